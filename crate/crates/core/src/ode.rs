//! Brute-force integration of the coefficient ODEs and a finite-difference
//! residual check of the reduced HJB equation. Everything here is independent
//! of the closed forms in [`crate::closed_form`] and serves as their oracle.

use crate::error::{Error, Result};
use crate::model::{FactorMarket, HestonParams, KimOmbergParams, Preferences, RiccatiCoeffs};

/// A terminal-value problem `x'(t) = f(t, x)` on `[0, horizon]` with `x(horizon)` given.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, state: &[f64], out: &mut [f64]);
    fn terminal_state(&self) -> Vec<f64>;
    fn horizon(&self) -> f64;
}

/// Nodes run backwards from the horizon to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Richardson bound on the sup-norm error of `states`.
    pub error_estimate: f64,
}

impl GridSolution {
    /// State at `t = 0`.
    pub fn initial(&self) -> &[f64] {
        self.states.last().expect("grid has at least two nodes")
    }

    /// Sup over nodes of `|component(t) - reference(t)|`.
    pub fn sup_distance(&self, component: usize, reference: impl Fn(f64) -> f64) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (s[component] - reference(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Classical fourth-order Runge-Kutta, stepping from the horizon down to 0.
///
/// The error estimate compares against a rerun at half the step size:
/// `16/15 * max |x_h - x_{h/2}|` over the shared nodes.
pub fn rk4<S: OdeSystem + ?Sized>(system: &S, n_steps: usize) -> Result<GridSolution> {
    if n_steps < 2 {
        return Err(Error::InvalidConfig(format!("rk4 needs n_steps >= 2, got {n_steps}")));
    }
    let (times, states) = rk4_fixed(system, n_steps)?;
    let (_, fine) = rk4_fixed(system, 2 * n_steps)?;
    let mut diff: f64 = 0.0;
    for (i, s) in states.iter().enumerate() {
        for (x, y) in s.iter().zip(&fine[2 * i]) {
            diff = diff.max((x - y).abs());
        }
    }
    Ok(GridSolution {
        times,
        states,
        error_estimate: diff * 16.0 / 15.0,
    })
}

#[allow(clippy::type_complexity)]
fn rk4_fixed<S: OdeSystem + ?Sized>(system: &S, n_steps: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = system.dim();
    let horizon = system.horizon();
    let h = -horizon / n_steps as f64;
    let mut x = system.terminal_state();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(horizon);
    states.push(x.clone());

    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    for i in 0..n_steps {
        let t = horizon + h * i as f64;
        system.rhs(t, &x, &mut k1);
        for j in 0..dim {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        system.rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..dim {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        system.rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..dim {
            tmp[j] = x[j] + h * k3[j];
        }
        system.rhs(t + h, &tmp, &mut k4);
        for j in 0..dim {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        // last node pinned to exactly 0
        let t_next = if i + 1 == n_steps { 0.0 } else { t + h };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(t_next));
        }
        times.push(t_next);
        states.push(x.clone());
    }
    Ok((times, states))
}

/// `B' = c B^2 + b B + a`, `A' = (gamma - 1) r - lambda_y y_bar B`; state `[B, A]`.
#[derive(Debug, Clone, Copy)]
pub struct HestonCoefficientOde {
    pub coeffs: RiccatiCoeffs,
    pub gamma: f64,
    pub r: f64,
    pub lambda_y: f64,
    pub y_bar: f64,
    pub horizon: f64,
}

impl HestonCoefficientOde {
    pub fn new(p: &HestonParams, prefs: &Preferences, horizon: f64) -> Self {
        Self {
            coeffs: p.riccati_coeffs(prefs),
            gamma: prefs.gamma(),
            r: p.r,
            lambda_y: p.lambda_y,
            y_bar: p.y_bar,
            horizon,
        }
    }
}

impl OdeSystem for HestonCoefficientOde {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, _t: f64, s: &[f64], out: &mut [f64]) {
        let b = s[0];
        out[0] = self.coeffs.eval(b);
        out[1] = (self.gamma - 1.0) * self.r - self.lambda_y * self.y_bar * b;
    }
    fn terminal_state(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// The three-function system of the predictable-return model; state `[C, B, A]`.
///
/// `C'/2 = c C^2 + b C + a`, `B' = 2c B C + b B - lambda_y y_bar C`,
/// `A' = (gamma - 1) r + c B^2 - lambda_y y_bar B - sigma_y^2 C / 2`.
#[derive(Debug, Clone, Copy)]
pub struct KoCoefficientOde {
    pub coeffs: RiccatiCoeffs,
    pub gamma: f64,
    pub r: f64,
    pub lambda_y: f64,
    pub y_bar: f64,
    pub sigma_y: f64,
    pub horizon: f64,
}

impl KoCoefficientOde {
    pub fn new(p: &KimOmbergParams, prefs: &Preferences, horizon: f64) -> Self {
        Self {
            coeffs: p.riccati_coeffs(prefs),
            gamma: prefs.gamma(),
            r: p.r,
            lambda_y: p.lambda_y,
            y_bar: p.y_bar,
            sigma_y: p.sigma_y,
            horizon,
        }
    }
}

impl OdeSystem for KoCoefficientOde {
    fn dim(&self) -> usize {
        3
    }
    fn rhs(&self, _t: f64, s: &[f64], out: &mut [f64]) {
        let RiccatiCoeffs { a, b, c, .. } = self.coeffs;
        let (cc, bb) = (s[0], s[1]);
        let ly = self.lambda_y * self.y_bar;
        out[0] = 2.0 * (c * cc * cc + b * cc + a);
        out[1] = 2.0 * c * bb * cc + b * bb - ly * cc;
        out[2] = (self.gamma - 1.0) * self.r + c * bb * bb - ly * bb - 0.5 * self.sigma_y * self.sigma_y * cc;
    }
    fn terminal_state(&self) -> Vec<f64> {
        vec![0.0, 0.0, 0.0]
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Characteristic magnitudes of `t` and `y`; finite-difference steps are
/// relative to `max(|t|, t_scale)` and `max(|y|, y_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct FdScales {
    pub t: f64,
    pub y: f64,
}

const FIRST_DERIVATIVE_STEP: f64 = 1e-5;
const SECOND_DERIVATIVE_STEP: f64 = 1e-4;

/// Maximum over `points` of `|v_t - H(v, v_y, v_yy)|`, where `H` is the
/// right-hand side of the reduced HJB equation for power utility:
///
/// ```text
/// v_t = (g-1)/g * ((mu^2/(2 sigma^2) + g r) v + mu rho a / sigma * v_y
///        + rho^2 a^2 / 2 * v_y^2 / v) - b v_y - a^2 v_yy / 2
/// ```
///
/// Derivatives are central differences. Points must lie far enough inside
/// the domain of `v` for the stencil.
pub fn hjb_residual<M, V>(market: &M, prefs: &Preferences, v: V, points: &[(f64, f64)], scales: FdScales) -> f64
where
    M: FactorMarket + ?Sized,
    V: Fn(f64, f64) -> f64,
{
    let g = prefs.gamma();
    let k = prefs.hedging_factor();
    let r = market.rate();
    let rho = market.correlation();
    points
        .iter()
        .map(|&(t, y)| {
            let ht = FIRST_DERIVATIVE_STEP * t.abs().max(scales.t);
            let hy = FIRST_DERIVATIVE_STEP * y.abs().max(scales.y);
            let hyy = SECOND_DERIVATIVE_STEP * y.abs().max(scales.y);
            let val = v(t, y);
            let v_t = (v(t + ht, y) - v(t - ht, y)) / (2.0 * ht);
            let v_y = (v(t, y + hy) - v(t, y - hy)) / (2.0 * hy);
            let v_yy = (v(t, y + hyy) - 2.0 * val + v(t, y - hyy)) / (hyy * hyy);

            let mu = market.excess_return(y);
            let sig = market.volatility(y);
            let a = market.factor_vol(y);
            let b = market.factor_drift(y);
            let rhs = k
                * ((mu * mu / (2.0 * sig * sig) + g * r) * val
                    + mu * rho * a / sig * v_y
                    + rho * rho * a * a / 2.0 * v_y * v_y / val)
                - b * v_y
                - 0.5 * a * a * v_yy;
            (v_t - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BlackScholesParams;

    struct Closure<F> {
        f: F,
        dim: usize,
        terminal: Vec<f64>,
        horizon: f64,
    }

    impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for Closure<F> {
        fn dim(&self) -> usize {
            self.dim
        }
        fn rhs(&self, t: f64, s: &[f64], out: &mut [f64]) {
            (self.f)(t, s, out)
        }
        fn terminal_state(&self) -> Vec<f64> {
            self.terminal.clone()
        }
        fn horizon(&self) -> f64 {
            self.horizon
        }
    }

    #[test]
    fn zero_rhs_stays_at_terminal_value() {
        let sys = Closure {
            f: |_t: f64, _s: &[f64], out: &mut [f64]| out[0] = 0.0,
            dim: 1,
            terminal: vec![0.0],
            horizon: 3.0,
        };
        let sol = rk4(&sys, 16).unwrap();
        assert!(sol.states.iter().all(|s| s[0] == 0.0));
        assert_eq!(sol.error_estimate, 0.0);
        assert_eq!(sol.times[0], 3.0);
        assert_eq!(*sol.times.last().unwrap(), 0.0);
    }

    #[test]
    fn exponential_decay_converges_at_fourth_order() {
        // y' = -y, y(T) = 1  =>  y(0) = e^T.
        let horizon = 2.0;
        let sys = Closure {
            f: |_t: f64, s: &[f64], out: &mut [f64]| out[0] = -s[0],
            dim: 1,
            terminal: vec![1.0],
            horizon,
        };
        let exact = horizon.exp();
        let errs: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&n| (rk4(&sys, n).unwrap().initial()[0] - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
        }
        let sol = rk4(&sys, 8).unwrap();
        assert!(sol.error_estimate >= errs[0] * 0.5 && sol.error_estimate <= errs[0] * 2.0);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = -y^2 backwards from y(T)=1 explodes at t = T - 1.
        let sys = Closure {
            f: |_t: f64, s: &[f64], out: &mut [f64]| out[0] = -s[0] * s[0] * 1e3,
            dim: 1,
            terminal: vec![1.0],
            horizon: 5.0,
        };
        assert!(matches!(rk4(&sys, 8), Err(Error::NonFiniteState(_))));
    }

    #[test]
    fn too_few_steps_rejected() {
        let p = HestonParams::pan();
        let prefs = Preferences::new(5.0).unwrap();
        let sys = HestonCoefficientOde::new(&p, &prefs, 1.0);
        assert!(rk4(&sys, 1).is_err());
    }

    #[test]
    fn constant_value_function_solves_null_market() {
        let bs = BlackScholesParams {
            r: 0.0,
            mu: 0.0,
            sigma: 0.2,
        };
        let prefs = Preferences::new(3.0).unwrap();
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (0.1 * i as f64 + 0.05, 1.0)).collect();
        let res = hjb_residual(&bs, &prefs, |_t, _y| 1.0, &pts, FdScales { t: 1.0, y: 1.0 });
        assert_eq!(res, 0.0);
    }

    #[test]
    fn black_scholes_value_function_has_small_residual() {
        let bs = BlackScholesParams {
            r: 0.01,
            mu: 0.08,
            sigma: 0.2,
        };
        let prefs = Preferences::new(2.0).unwrap();
        let g = prefs.gamma();
        let esr = bs.r + bs.mu * bs.mu / (2.0 * g * bs.sigma * bs.sigma);
        let horizon = 5.0;
        let v = |t: f64, _y: f64| ((1.0 - g) * esr * (horizon - t)).exp();
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (0.25 * i as f64 + 0.1, 0.0)).collect();
        let res = hjb_residual(&bs, &prefs, v, &pts, FdScales { t: 1.0, y: 1.0 });
        assert!(res < 1e-9, "{res}");
    }
}

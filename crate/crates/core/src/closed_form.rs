//! Finite-horizon value-function coefficients and candidate portfolios.

use crate::error::{Error, Result};
use crate::model::{BlackScholesParams, HestonParams, KimOmbergParams, Preferences};
use crate::riccati::RiccatiKernel;

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if (0.0..=horizon).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { t, horizon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSolution {
    pub pi_hat: f64,
    pub esr: f64,
    pub gamma: f64,
    pub horizon: f64,
}

impl BsSolution {
    /// Exponent of `v(t) = exp((1 - gamma) esr (T - t))`.
    pub fn value_exponent(&self, t: f64) -> f64 {
        (1.0 - self.gamma) * self.esr * (self.horizon - t)
    }
}

pub fn solve_bs(p: &BlackScholesParams, prefs: &Preferences, horizon: f64) -> Result<BsSolution> {
    p.validate()?;
    let g = prefs.gamma();
    let s2 = p.sigma * p.sigma;
    Ok(BsSolution {
        pi_hat: p.mu / (g * s2),
        esr: p.r + p.mu * p.mu / (2.0 * g * s2),
        gamma: g,
        horizon,
    })
}

/// `v(t, y) = exp(A(t) + B(t) y)` for the stochastic-volatility model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonFiniteSolution {
    pub params: HestonParams,
    pub gamma: f64,
    pub horizon: f64,
    kernel: RiccatiKernel,
}

pub fn solve_heston(p: &HestonParams, prefs: &Preferences, horizon: f64) -> Result<HestonFiniteSolution> {
    p.validate_allow_degenerate()?;
    let kernel = RiccatiKernel::new(p.riccati_coeffs(prefs))?;
    Ok(HestonFiniteSolution {
        params: *p,
        gamma: prefs.gamma(),
        horizon,
        kernel,
    })
}

impl HestonFiniteSolution {
    pub fn kernel(&self) -> &RiccatiKernel {
        &self.kernel
    }

    pub fn b(&self, t: f64) -> f64 {
        self.kernel.value(self.horizon - t)
    }

    pub fn a(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        let p = &self.params;
        (1.0 - self.gamma) * p.r * tau + p.lambda_y * p.y_bar * self.kernel.integral(tau)
    }

    pub fn value(&self, t: f64, y: f64) -> f64 {
        (self.a(t) + self.b(t) * y).exp()
    }

    pub fn myopic(&self) -> f64 {
        self.params.mu_s / self.gamma
    }

    pub fn hedging(&self, t: f64) -> Result<f64> {
        check_time(t, self.horizon)?;
        Ok(self.params.rho * self.params.sigma_y * self.b(t) / self.gamma)
    }

    pub fn portfolio(&self, t: f64) -> Result<f64> {
        Ok(self.myopic() + self.hedging(t)?)
    }

    /// `(A(0) + B(0) y0) / ((1 - gamma) T)`.
    pub fn esr(&self, y0: f64) -> f64 {
        (self.a(0.0) + self.b(0.0) * y0) / ((1.0 - self.gamma) * self.horizon)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KoSolveOptions {
    /// Steps of the backward integration; the grid step is `T / n_steps`.
    pub n_steps: usize,
    /// Bound on the Richardson estimate, relative to `max(1, sup |state|)`.
    pub tolerance: f64,
}

impl Default for KoSolveOptions {
    fn default() -> Self {
        Self {
            n_steps: 4096,
            tolerance: 1e-9,
        }
    }
}

/// `v(t, y) = exp(A(t) + B(t) y + C(t) y^2 / 2)` for the predictable-return model.
///
/// `C` is closed form. `B` and `A` live on a uniform grid and are evaluated
/// between nodes by cubic Hermite interpolation using the ODE right-hand side
/// as the node derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct KoFiniteSolution {
    pub params: KimOmbergParams,
    pub gamma: f64,
    pub horizon: f64,
    pub grid_step: f64,
    /// Richardson estimate of the grid error in `B` and `A`.
    pub error_estimate: f64,
    kernel: RiccatiKernel,
    // Node i sits at t = i * grid_step; entries are [B, A, B', A'].
    nodes: Vec<[f64; 4]>,
}

struct KoRhs {
    kernel: RiccatiKernel,
    horizon: f64,
    c: f64,
    b: f64,
    ly: f64,
    drift_const: f64,
    half_sy2: f64,
}

impl KoRhs {
    fn eval(&self, t: f64, bb: f64) -> [f64; 2] {
        let cc = self.kernel.value(self.horizon - t);
        [
            (2.0 * self.c * cc + self.b) * bb - self.ly * cc,
            self.drift_const + self.c * bb * bb - self.ly * bb - self.half_sy2 * cc,
        ]
    }
}

fn ko_grid(rhs: &KoRhs, n: usize) -> Vec<[f64; 4]> {
    let h = rhs.horizon / n as f64;
    let mut nodes = vec![[0.0; 4]; n + 1];
    let mut x = [0.0, 0.0];
    let d = rhs.eval(rhs.horizon, 0.0);
    nodes[n] = [0.0, 0.0, d[0], d[1]];
    for i in (0..n).rev() {
        let t = (i + 1) as f64 * h;
        let k1 = rhs.eval(t, x[0]);
        let k2 = rhs.eval(t - 0.5 * h, x[0] - 0.5 * h * k1[0]);
        let k3 = rhs.eval(t - 0.5 * h, x[0] - 0.5 * h * k2[0]);
        let k4 = rhs.eval(t - h, x[0] - h * k3[0]);
        for j in 0..2 {
            x[j] -= h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let d = rhs.eval(i as f64 * h, x[0]);
        nodes[i] = [x[0], x[1], d[0], d[1]];
    }
    nodes
}

fn hermite(nodes: &[[f64; 4]], h: f64, t: f64, component: usize) -> f64 {
    let n = nodes.len() - 1;
    let s = t / h;
    let i = (s.floor() as usize).min(n - 1);
    let u = s - i as f64;
    let (p0, p1) = (nodes[i][component], nodes[i + 1][component]);
    let (m0, m1) = (nodes[i][component + 2] * h, nodes[i + 1][component + 2] * h);
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * m1
}

pub fn solve_ko(p: &KimOmbergParams, prefs: &Preferences, horizon: f64) -> Result<KoFiniteSolution> {
    solve_ko_with(p, prefs, horizon, KoSolveOptions::default())
}

pub fn solve_ko_with(
    p: &KimOmbergParams,
    prefs: &Preferences,
    horizon: f64,
    opts: KoSolveOptions,
) -> Result<KoFiniteSolution> {
    p.validate_allow_degenerate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonpositiveParameter {
            name: "horizon",
            value: horizon,
            requirement: "positive and finite",
        });
    }
    if opts.n_steps < 2 {
        return Err(Error::InvalidConfig(format!(
            "n_steps must be >= 2, got {}",
            opts.n_steps
        )));
    }
    let coeffs = p.riccati_coeffs(prefs);
    coeffs.require_positive_discriminant()?;
    let kernel = RiccatiKernel::new(coeffs.doubled())?;
    let g = prefs.gamma();
    let rhs = KoRhs {
        kernel,
        horizon,
        c: coeffs.c,
        b: coeffs.b,
        ly: p.lambda_y * p.y_bar,
        drift_const: (g - 1.0) * p.r,
        half_sy2: 0.5 * p.sigma_y * p.sigma_y,
    };
    let n = opts.n_steps;
    let nodes = ko_grid(&rhs, n);
    let fine = ko_grid(&rhs, 2 * n);
    let h = horizon / n as f64;

    // Node error from the step-halving rerun, interpolation error from the
    // coarse interpolant at the fine grid's midpoints.
    let mut node_err: f64 = 0.0;
    let mut interp_err: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (j, f) in fine.iter().enumerate() {
        let t = j as f64 * 0.5 * h;
        for comp in 0..2 {
            scale = scale.max(f[comp].abs());
            if j % 2 == 0 {
                node_err = node_err.max((nodes[j / 2][comp] - f[comp]).abs());
            } else {
                interp_err = interp_err.max((hermite(&nodes, h, t, comp) - f[comp]).abs());
            }
        }
    }
    if nodes.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(0.0));
    }
    let error_estimate = (node_err * 16.0 / 15.0).max(interp_err);
    if error_estimate > opts.tolerance * scale {
        return Err(Error::GridTooCoarse {
            estimate: error_estimate,
            tolerance: opts.tolerance * scale,
        });
    }
    Ok(KoFiniteSolution {
        params: *p,
        gamma: g,
        horizon,
        grid_step: h,
        error_estimate,
        kernel,
        nodes,
    })
}

impl KoFiniteSolution {
    pub fn c(&self, t: f64) -> f64 {
        self.kernel.value(self.horizon - t)
    }

    pub fn b(&self, t: f64) -> f64 {
        hermite(&self.nodes, self.grid_step, t.clamp(0.0, self.horizon), 0)
    }

    pub fn a(&self, t: f64) -> f64 {
        hermite(&self.nodes, self.grid_step, t.clamp(0.0, self.horizon), 1)
    }

    pub fn value(&self, t: f64, y: f64) -> f64 {
        (self.a(t) + self.b(t) * y + 0.5 * self.c(t) * y * y).exp()
    }

    pub fn myopic(&self, y: f64) -> f64 {
        y / (self.gamma * self.params.sigma * self.params.sigma)
    }

    pub fn hedging(&self, t: f64, y: f64) -> Result<f64> {
        check_time(t, self.horizon)?;
        let p = &self.params;
        Ok(p.rho * p.sigma_y / (self.gamma * p.sigma) * (self.b(t) + self.c(t) * y))
    }

    pub fn portfolio(&self, t: f64, y: f64) -> Result<f64> {
        Ok(self.myopic(y) + self.hedging(t, y)?)
    }

    /// `(A(0) + B(0) y0 + C(0) y0^2 / 2) / ((1 - gamma) T)`.
    pub fn esr(&self, y0: f64) -> f64 {
        (self.a(0.0) + self.b(0.0) * y0 + 0.5 * self.c(0.0) * y0 * y0) / ((1.0 - self.gamma) * self.horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefs(g: f64) -> Preferences {
        Preferences::new(g).unwrap()
    }

    #[test]
    fn black_scholes_hand_arithmetic() {
        let p = BlackScholesParams::new(0.01, 0.08, 0.2).unwrap();
        let s = solve_bs(&p, &prefs(2.0), 10.0).unwrap();
        assert!((s.pi_hat - 1.0).abs() < 1e-15);
        assert!((s.esr - 0.05).abs() < 1e-15);
        let zero = solve_bs(&BlackScholesParams::new(0.01, 0.0, 0.2).unwrap(), &prefs(2.0), 1.0).unwrap();
        assert_eq!(zero.pi_hat, 0.0);
        assert_eq!(zero.esr, 0.01);
        let other = solve_bs(&p, &prefs(2.0), 3.0).unwrap();
        assert_eq!(other.pi_hat, s.pi_hat);
    }

    #[test]
    fn heston_terminal_conditions() {
        let s = solve_heston(&HestonParams::pan(), &prefs(5.0), 10.0).unwrap();
        assert_eq!(s.b(10.0), 0.0);
        assert_eq!(s.a(10.0), 0.0);
        assert!((s.portfolio(10.0).unwrap() - 0.88).abs() < 1e-15);
        assert!(matches!(s.portfolio(10.5), Err(Error::TimeOutOfRange { .. })));
        assert!(s.portfolio(-0.1).is_err());
    }

    #[test]
    fn heston_b_is_negative_and_hedge_positive_for_high_risk_aversion() {
        let s = solve_heston(&HestonParams::pan(), &prefs(5.0), 10.0).unwrap();
        for i in 0..100 {
            let t = 0.1 * i as f64;
            assert!(s.b(t) < 0.0);
            assert!(s.hedging(t).unwrap() > 0.0);
        }
        let low = solve_heston(&HestonParams::pan(), &prefs(0.5), 1.0).unwrap();
        assert!(low.b(0.0) > 0.0 && low.hedging(0.0).unwrap() < 0.0);
    }

    #[test]
    fn heston_b_satisfies_riccati_by_finite_difference() {
        let s = solve_heston(&HestonParams::pan(), &prefs(5.0), 10.0).unwrap();
        let co = *s.kernel().coeffs();
        let p = s.params;
        let h = 1e-5;
        let d = |f: &dyn Fn(f64) -> f64, t: f64| {
            (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
        };
        for i in 1..=100 {
            let t = 10.0 * i as f64 / 101.0;
            let db = d(&|t| s.b(t), t);
            assert!(
                (db - co.eval(s.b(t))).abs() < 1e-9,
                "t={t}: B {db} vs {}",
                co.eval(s.b(t))
            );
            let da = d(&|t| s.a(t), t);
            let expect = (s.gamma - 1.0) * p.r - p.lambda_y * p.y_bar * s.b(t);
            assert!((da - expect).abs() < 1e-9, "t={t}: A {da} vs {expect}");
        }
    }

    #[test]
    fn heston_b0_monotone_in_horizon() {
        let p = HestonParams::pan();
        let vals: Vec<f64> = (1..40)
            .map(|k| solve_heston(&p, &prefs(5.0), 0.05 * k as f64).unwrap().b(0.0))
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn ko_terminal_conditions_and_signs() {
        let p = KimOmbergParams::barberis();
        let s = solve_ko(&p, &prefs(5.0), 240.0).unwrap();
        assert_eq!(s.c(240.0), 0.0);
        assert_eq!(s.b(240.0), 0.0);
        assert_eq!(s.a(240.0), 0.0);
        for i in 0..240 {
            let t = i as f64;
            assert!(s.c(t) < 0.0 && s.b(t) < 0.0);
        }
        let myopic = p.y_bar / (5.0 * p.sigma * p.sigma);
        assert!((s.portfolio(240.0, p.y_bar).unwrap() - myopic).abs() < 1e-15);
        assert!((myopic - 0.3577).abs() < 1e-4);
        assert_eq!(s.portfolio(240.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ko_hermite_is_accurate_between_nodes() {
        let p = KimOmbergParams::barberis();
        let s = solve_ko(&p, &prefs(5.0), 240.0).unwrap();
        assert!(s.error_estimate < 1e-9);
        let h = 1e-3;
        let co = p.riccati_coeffs(&prefs(5.0));
        for i in 1..50 {
            let t = 240.0 * i as f64 / 50.3;
            let db = (s.b(t + h) - s.b(t - h)) / (2.0 * h);
            let expect = (2.0 * co.c * s.c(t) + co.b) * s.b(t) - p.lambda_y * p.y_bar * s.c(t);
            assert!(
                (db - expect).abs() < 1e-7 * (1.0 + expect.abs()),
                "t={t}: {db} vs {expect}"
            );
        }
    }

    #[test]
    fn coarse_ko_grid_is_rejected() {
        let p = KimOmbergParams::barberis();
        let opts = KoSolveOptions {
            n_steps: 2,
            tolerance: 1e-12,
        };
        assert!(matches!(
            solve_ko_with(&p, &prefs(5.0), 2400.0, opts),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn uncorrelated_factor_means_no_hedging() {
        let mut hp = HestonParams::pan();
        hp.rho = 0.0;
        let s = solve_heston(&hp, &prefs(5.0), 10.0).unwrap();
        assert_eq!(s.hedging(0.0).unwrap(), 0.0);
        assert_eq!(s.portfolio(0.0).unwrap(), s.myopic());
        let mut kp = KimOmbergParams::barberis();
        kp.rho = 0.0;
        let k = solve_ko(&kp, &prefs(5.0), 24.0).unwrap();
        assert_eq!(k.hedging(0.0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn log_utility_limit_is_myopic() {
        let p = HestonParams::pan();
        let base = solve_heston(&p, &prefs(5.0), 10.0).unwrap().hedging(0.0).unwrap();
        for g in [1.0 - 1e-4, 1.0 + 1e-4] {
            let h = solve_heston(&p, &prefs(g), 10.0).unwrap().hedging(0.0).unwrap();
            assert!(h.abs() < 1e-3 * base.abs());
        }
    }
}

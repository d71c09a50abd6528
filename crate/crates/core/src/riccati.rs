//! Scalar Riccati equation `y' = c y^2 + b y + a` with `y(T) = 0`, solved in
//! time-to-maturity `tau = T - t` for a positive discriminant.
//!
//! Both the variance-factor coefficient `B(t)` and the quadratic coefficient
//! `C(t)` of the predictable-return model (with doubled coefficients) are
//! instances of this equation.

use crate::error::Result;
use crate::model::RiccatiCoeffs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiKernel {
    coeffs: RiccatiCoeffs,
    sqrt_d: f64,
}

impl RiccatiKernel {
    pub fn new(coeffs: RiccatiCoeffs) -> Result<Self> {
        let sqrt_d = coeffs.require_positive_discriminant()?;
        Ok(Self { coeffs, sqrt_d })
    }

    pub fn coeffs(&self) -> &RiccatiCoeffs {
        &self.coeffs
    }

    pub fn sqrt_d(&self) -> f64 {
        self.sqrt_d
    }

    /// Solution at time-to-maturity `tau >= 0`.
    ///
    /// Written with `e = exp(-sqrt(D) tau) <= 1` so that long horizons cannot
    /// overflow: `-2a (1 - e) / ((b + s) - (b - s) e)`.
    pub fn value(&self, tau: f64) -> f64 {
        let RiccatiCoeffs { a, b, .. } = self.coeffs;
        let s = self.sqrt_d;
        let e = (-s * tau).exp();
        let one_minus_e = -(-s * tau).exp_m1();
        -2.0 * a * one_minus_e / ((b + s) - (b - s) * e)
    }

    /// Right-hand side `c y^2 + b y + a` evaluated along the solution; this is
    /// `dy/dt` (and `-dy/dtau`).
    pub fn time_derivative(&self, tau: f64) -> f64 {
        self.coeffs.eval(self.value(tau))
    }

    /// `int_0^tau y(s) ds` in closed form.
    ///
    /// Uses `(b - s) / (2c) = 2a / (b + s)` so that the expression stays
    /// finite as `c -> 0`.
    pub fn integral(&self, tau: f64) -> f64 {
        let RiccatiCoeffs { a, b, c, .. } = self.coeffs;
        let s = self.sqrt_d;
        let one_minus_e = -(-s * tau).exp_m1();
        let u = 2.0 * a * one_minus_e / (s * (b + s));
        -2.0 * a * tau / (b + s) + u * log1p_over_x(c * u)
    }

    /// Limit of the solution as `tau -> infinity`: the smaller root of the
    /// quadratic when `c < 0`.
    pub fn stationary_value(&self) -> f64 {
        smaller_root(&self.coeffs, self.sqrt_d)
    }
}

/// `ln(1 + x) / x`, continuous at 0.
fn log1p_over_x(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.ln_1p() / x
    }
}

/// Smaller root of `c x^2 + b x + a` (for `c < 0`), computed through
/// `q = -(b + sign(b) sqrt(D)) / 2` so neither root suffers cancellation.
pub fn smaller_root(coeffs: &RiccatiCoeffs, sqrt_d: f64) -> f64 {
    let RiccatiCoeffs { a, b, c, .. } = *coeffs;
    let q = -0.5 * (b + b.signum() * sqrt_d);
    let r1 = q / c;
    let r2 = a / q;
    r1.min(r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel() -> RiccatiKernel {
        // Pan parameters, gamma = 5.
        let k = 0.8;
        let (mu, lam, sy, rho) = (4.4, 5.3, 0.38, -0.57);
        RiccatiKernel::new(RiccatiCoeffs::new(
            k * mu * mu / 2.0,
            k * mu * rho * sy + lam,
            (k * rho * rho - 1.0) * sy * sy / 2.0,
        ))
        .unwrap()
    }

    /// The printed form with `exp(+sqrt(D) tau)`, usable for moderate tau.
    fn textbook_value(k: &RiccatiKernel, tau: f64) -> f64 {
        let RiccatiCoeffs { a, b, .. } = *k.coeffs();
        let s = k.sqrt_d();
        let e = (s * tau).exp();
        -2.0 * a * (e - 1.0) / (e * (b + s) - b + s)
    }

    fn textbook_integral(k: &RiccatiKernel, tau: f64) -> f64 {
        let RiccatiCoeffs { a, b, d, .. } = *k.coeffs();
        let s = k.sqrt_d();
        let bracket = (b + s) * tau - 2.0 * (((s * tau).exp() * (b + s) - b + s) / (2.0 * s)).ln();
        -2.0 * a / (b * b - d) * bracket
    }

    #[test]
    fn terminal_value_and_integral_vanish() {
        let k = kernel();
        assert_eq!(k.value(0.0), 0.0);
        assert_eq!(k.integral(0.0), 0.0);
    }

    #[test]
    fn stable_form_matches_textbook_form() {
        let k = kernel();
        for &tau in &[0.01, 0.3, 1.0, 4.0, 10.0] {
            let lhs = k.value(tau);
            let rhs = textbook_value(&k, tau);
            assert!((lhs - rhs).abs() < 1e-13, "tau={tau}: {lhs} vs {rhs}");
            let li = k.integral(tau);
            let ri = textbook_integral(&k, tau);
            assert!((li - ri).abs() < 1e-11 * (1.0 + ri.abs()), "tau={tau}: {li} vs {ri}");
        }
    }

    #[test]
    fn long_horizon_does_not_overflow() {
        let k = kernel();
        let v = k.value(1.0e6);
        assert!(v.is_finite());
        assert!((v - k.stationary_value()).abs() < 1e-14);
        assert!(k.integral(1.0e6).is_finite());
    }

    #[test]
    fn smaller_root_solves_quadratic_on_both_sign_branches() {
        for &(a, b, c) in &[(7.744, 4.54, -0.053), (2.0, -3.0, -0.5), (-0.3, 0.8, -1e-9)] {
            let coeffs = RiccatiCoeffs::new(a, b, c);
            let s = coeffs.d.sqrt();
            let x = smaller_root(&coeffs, s);
            let scale = a.abs() + (b * x).abs() + (c * x * x).abs();
            assert!(coeffs.eval(x).abs() < 1e-14 * scale);
            assert!(x <= -b / (2.0 * c));
        }
    }

    #[test]
    fn integral_is_finite_as_quadratic_coefficient_vanishes() {
        let coeffs = RiccatiCoeffs::new(0.5, 0.2, -1e-14);
        let k = RiccatiKernel::new(coeffs).unwrap();
        // c -> 0 reduces to the linear ODE y' = b y + a, y(T)=0.
        let tau: f64 = 3.0;
        let linear = -(0.5 / 0.2) * (1.0 - (-0.2 * tau).exp());
        assert!((k.value(tau) - linear).abs() < 1e-10);
        let linear_int = -(0.5 / 0.2) * (tau - (1.0 - (-0.2 * tau).exp()) / 0.2);
        assert!((k.integral(tau) - linear_int).abs() < 1e-10);
    }
}

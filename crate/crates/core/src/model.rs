//! Market parameter records, preferences, and the quadratic coefficients
//! shared by the stochastic-volatility and predictable-return models.
//!
//! All rates are per an arbitrary but consistent time unit. The presets use
//! the units of their source calibrations: [`HestonParams::pan`] is yearly,
//! [`KimOmbergParams::barberis`] is monthly.

use crate::error::{Error, Result};

/// Power-utility preferences `U(x) = x^(1-gamma) / (1-gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    gamma: f64,
}

impl Preferences {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::NonpositiveParameter {
                name: "gamma",
                value: gamma,
                requirement: "positive and finite",
            });
        }
        if gamma == 1.0 {
            return Err(Error::GammaIsOne);
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(gamma - 1) / gamma`, the factor in front of every hedging-demand term.
    pub fn hedging_factor(&self) -> f64 {
        (self.gamma - 1.0) / self.gamma
    }
}

/// Constant opportunity set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackScholesParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Square-root variance factor with risk premium linear in variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub r: f64,
    /// Risk premium per unit variance.
    pub mu_s: f64,
    pub lambda_y: f64,
    pub y_bar: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

/// Ornstein-Uhlenbeck excess return with constant volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KimOmbergParams {
    pub r: f64,
    pub sigma: f64,
    pub lambda_y: f64,
    pub y_bar: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveParameter {
            name,
            value,
            requirement: "positive",
        })
    }
}

fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveParameter {
            name,
            value,
            requirement: "nonnegative",
        })
    }
}

fn require_correlation(rho: f64) -> Result<()> {
    if (-1.0..=0.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::CorrelationOutOfRange(rho))
    }
}

impl BlackScholesParams {
    pub fn new(r: f64, mu: f64, sigma: f64) -> Result<Self> {
        let p = Self { r, mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_nonnegative("r", self.r)?;
        if !self.mu.is_finite() {
            return Err(Error::NonpositiveParameter {
                name: "mu",
                value: self.mu,
                requirement: "finite",
            });
        }
        require_positive("sigma", self.sigma)
    }

    pub fn sharpe_ratio(&self) -> f64 {
        self.mu / self.sigma
    }
}

impl HestonParams {
    /// Yearly estimates used for the stochastic-volatility figures.
    pub fn pan() -> Self {
        Self {
            r: 0.033,
            mu_s: 4.4,
            lambda_y: 5.3,
            y_bar: 0.024,
            sigma_y: 0.38,
            rho: -0.57,
        }
    }

    pub fn new(r: f64, mu_s: f64, lambda_y: f64, y_bar: f64, sigma_y: f64, rho: f64) -> Result<Self> {
        let p = Self {
            r,
            mu_s,
            lambda_y,
            y_bar,
            sigma_y,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    /// Like [`validate`](Self::validate) but accepts `sigma_y = 0`, the
    /// degenerate constant-variance limit used by small-noise expansions.
    pub fn validate_allow_degenerate(&self) -> Result<()> {
        self.check(true)
    }

    fn check(&self, allow_zero_vol: bool) -> Result<()> {
        require_nonnegative("r", self.r)?;
        require_positive("mu_s", self.mu_s)?;
        require_positive("lambda_y", self.lambda_y)?;
        require_positive("y_bar", self.y_bar)?;
        if allow_zero_vol {
            require_nonnegative("sigma_y", self.sigma_y)?;
        } else {
            require_positive("sigma_y", self.sigma_y)?;
        }
        require_correlation(self.rho)?;
        let lhs = 2.0 * self.lambda_y * self.y_bar;
        let rhs = self.sigma_y * self.sigma_y;
        if lhs <= rhs {
            return Err(Error::FellerViolation { lhs, rhs });
        }
        Ok(())
    }

    /// Black-Scholes market with the same mean return `mu_s * y_bar` and
    /// variance `y_bar`.
    pub fn matched_black_scholes(&self) -> BlackScholesParams {
        BlackScholesParams {
            r: self.r,
            mu: self.mu_s * self.y_bar,
            sigma: self.y_bar.sqrt(),
        }
    }

    pub fn riccati_coeffs(&self, prefs: &Preferences) -> RiccatiCoeffs {
        let k = prefs.hedging_factor();
        let a = k * self.mu_s * self.mu_s / 2.0;
        let b = k * self.mu_s * self.rho * self.sigma_y + self.lambda_y;
        let c = (k * self.rho * self.rho - 1.0) * self.sigma_y * self.sigma_y / 2.0;
        RiccatiCoeffs::new(a, b, c)
    }
}

impl KimOmbergParams {
    /// Monthly estimates used for the return-predictability figures.
    pub fn barberis() -> Self {
        Self {
            r: 0.0014,
            sigma: 0.0436,
            lambda_y: 0.0226,
            y_bar: 0.0034,
            sigma_y: 0.0008,
            rho: -0.935,
        }
    }

    pub fn new(r: f64, sigma: f64, lambda_y: f64, y_bar: f64, sigma_y: f64, rho: f64) -> Result<Self> {
        let p = Self {
            r,
            sigma,
            lambda_y,
            y_bar,
            sigma_y,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    /// Accepts `sigma_y = 0` (deterministic excess return).
    pub fn validate_allow_degenerate(&self) -> Result<()> {
        self.check(true)
    }

    fn check(&self, allow_zero_vol: bool) -> Result<()> {
        require_nonnegative("r", self.r)?;
        require_positive("sigma", self.sigma)?;
        require_positive("lambda_y", self.lambda_y)?;
        require_positive("y_bar", self.y_bar)?;
        if allow_zero_vol {
            require_nonnegative("sigma_y", self.sigma_y)?;
        } else {
            require_positive("sigma_y", self.sigma_y)?;
        }
        require_correlation(self.rho)
    }

    pub fn matched_black_scholes(&self) -> BlackScholesParams {
        BlackScholesParams {
            r: self.r,
            mu: self.y_bar,
            sigma: self.sigma,
        }
    }

    pub fn riccati_coeffs(&self, prefs: &Preferences) -> RiccatiCoeffs {
        let k = prefs.hedging_factor();
        let a = k / (2.0 * self.sigma * self.sigma);
        let b = k * self.rho * self.sigma_y / self.sigma + self.lambda_y;
        let c = (k * self.rho * self.rho - 1.0) * self.sigma_y * self.sigma_y / 2.0;
        RiccatiCoeffs::new(a, b, c)
    }
}

/// Coefficients of `c x^2 + b x + a` together with the discriminant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RiccatiCoeffs {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            d: b * b - 4.0 * a * c,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.c * x + self.b) * x + self.a
    }

    /// Coefficients of the same equation with every term doubled.
    pub fn doubled(&self) -> Self {
        Self::new(2.0 * self.a, 2.0 * self.b, 2.0 * self.c)
    }

    pub fn require_positive_discriminant(&self) -> Result<f64> {
        if self.d > 0.0 && self.d.is_finite() {
            Ok(self.d.sqrt())
        } else {
            Err(Error::NonpositiveDiscriminant(self.d))
        }
    }
}

/// Local coefficients of a one-factor market: `dS/S = (mu(y) + r) dt + sigma(y) dW`,
/// `dY = drift(y) dt + vol(y) dW^Y`, `d<W, W^Y> = rho dt`.
pub trait FactorMarket {
    fn rate(&self) -> f64;
    fn correlation(&self) -> f64;
    fn excess_return(&self, y: f64) -> f64;
    fn volatility(&self, y: f64) -> f64;
    fn factor_drift(&self, y: f64) -> f64;
    fn factor_vol(&self, y: f64) -> f64;
}

impl FactorMarket for BlackScholesParams {
    fn rate(&self) -> f64 {
        self.r
    }
    fn correlation(&self) -> f64 {
        0.0
    }
    fn excess_return(&self, _y: f64) -> f64 {
        self.mu
    }
    fn volatility(&self, _y: f64) -> f64 {
        self.sigma
    }
    fn factor_drift(&self, _y: f64) -> f64 {
        0.0
    }
    fn factor_vol(&self, _y: f64) -> f64 {
        0.0
    }
}

impl FactorMarket for HestonParams {
    fn rate(&self) -> f64 {
        self.r
    }
    fn correlation(&self) -> f64 {
        self.rho
    }
    fn excess_return(&self, y: f64) -> f64 {
        self.mu_s * y
    }
    fn volatility(&self, y: f64) -> f64 {
        y.max(0.0).sqrt()
    }
    fn factor_drift(&self, y: f64) -> f64 {
        self.lambda_y * (self.y_bar - y)
    }
    fn factor_vol(&self, y: f64) -> f64 {
        self.sigma_y * y.max(0.0).sqrt()
    }
}

impl FactorMarket for KimOmbergParams {
    fn rate(&self) -> f64 {
        self.r
    }
    fn correlation(&self) -> f64 {
        self.rho
    }
    fn excess_return(&self, y: f64) -> f64 {
        y
    }
    fn volatility(&self, _y: f64) -> f64 {
        self.sigma
    }
    fn factor_drift(&self, y: f64) -> f64 {
        self.lambda_y * (self.y_bar - y)
    }
    fn factor_vol(&self, _y: f64) -> f64 {
        self.sigma_y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pan_gamma5() -> (HestonParams, Preferences) {
        (HestonParams::pan(), Preferences::new(5.0).unwrap())
    }

    #[test]
    fn pan_preset_is_valid() {
        let (p, _) = pan_gamma5();
        p.validate().unwrap();
        KimOmbergParams::barberis().validate().unwrap();
    }

    #[test]
    fn feller_boundary_is_rejected() {
        let mut p = HestonParams::pan();
        p.sigma_y = (2.0 * p.lambda_y * p.y_bar).sqrt();
        // sqrt then square may land a hair either side; pin it exactly
        p.y_bar = p.sigma_y * p.sigma_y / (2.0 * p.lambda_y);
        assert!(matches!(p.validate(), Err(Error::FellerViolation { .. })));
    }

    #[test]
    fn gamma_one_is_rejected() {
        assert_eq!(Preferences::new(1.0), Err(Error::GammaIsOne));
        assert!(Preferences::new(0.0).is_err());
        assert!(Preferences::new(f64::NAN).is_err());
    }

    #[test]
    fn positive_correlation_is_rejected() {
        let mut p = KimOmbergParams::barberis();
        p.rho = 0.1;
        assert_eq!(p.validate(), Err(Error::CorrelationOutOfRange(0.1)));
        p.rho = -1.0;
        p.validate().unwrap();
    }

    #[test]
    fn nonpositive_parameters_are_named() {
        let mut p = HestonParams::pan();
        p.lambda_y = 0.0;
        match p.validate() {
            Err(Error::NonpositiveParameter { name, .. }) => assert_eq!(name, "lambda_y"),
            other => panic!("unexpected {other:?}"),
        }
        let bs = BlackScholesParams::new(0.01, 0.05, -0.2);
        assert!(matches!(bs, Err(Error::NonpositiveParameter { name: "sigma", .. })));
    }

    #[test]
    fn heston_coefficients_for_pan() {
        let (p, prefs) = pan_gamma5();
        let k = p.riccati_coeffs(&prefs);
        assert!((k.a - 7.744).abs() < 1e-12);
        assert!(k.c < 0.0);
        assert!(k.d > 0.0);
        assert_eq!(k.d, k.b * k.b - 4.0 * k.a * k.c);
    }

    #[test]
    fn zero_correlation_leaves_mean_reversion_as_linear_coefficient() {
        let prefs = Preferences::new(3.0).unwrap();
        let mut h = HestonParams::pan();
        h.rho = 0.0;
        assert_eq!(h.riccati_coeffs(&prefs).b, h.lambda_y);
        let mut ko = KimOmbergParams::barberis();
        ko.rho = 0.0;
        assert_eq!(ko.riccati_coeffs(&prefs).b, ko.lambda_y);
    }

    #[test]
    fn ko_discriminant_positive_for_barberis_and_small_noise_low_risk_aversion() {
        let ko = KimOmbergParams::barberis();
        assert!(ko.riccati_coeffs(&Preferences::new(5.0).unwrap()).d > 0.0);
        let mut quiet = ko;
        quiet.sigma_y = 1e-7;
        assert!(quiet.riccati_coeffs(&Preferences::new(0.5).unwrap()).d > 0.0);
    }

    #[test]
    fn doubled_coefficients_quadruple_discriminant() {
        let k = RiccatiCoeffs::new(1.5, -0.25, -0.7);
        assert!((k.doubled().d - 4.0 * k.d).abs() < 1e-12);
    }
}

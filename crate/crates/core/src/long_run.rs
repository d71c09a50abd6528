//! Long-horizon limits: algebraic coefficients, equivalent safe rates,
//! optimality conditions, dynamics under the myopic measure, stationary laws
//! and small-noise expansions.

use crate::error::{Error, Result};
use crate::model::{HestonParams, KimOmbergParams, Preferences, RiccatiCoeffs};
use crate::riccati::smaller_root;

/// `(1 - 2 (g-1)/g rho^2) sqrt(D) + b > 0`, only binding for `gamma > 1`.
fn theorem_condition(coeffs: &RiccatiCoeffs, sqrt_d: f64, k: f64, rho: f64) -> bool {
    k <= 0.0 || (1.0 - 2.0 * k * rho * rho) * sqrt_d + coeffs.b > 0.0
}

/// Value of the left-hand side of the `gamma > 1` optimality condition.
pub fn theorem_condition_margin(coeffs: &RiccatiCoeffs, k: f64, rho: f64) -> f64 {
    (1.0 - 2.0 * k * rho * rho) * coeffs.d.max(0.0).sqrt() + coeffs.b
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonLongRun {
    pub params: HestonParams,
    pub gamma: f64,
    pub coeffs: RiccatiCoeffs,
    pub b_inf: f64,
    pub a_inf: f64,
    pub esr: f64,
    pub pi_inf: f64,
    pub lambda_phat: f64,
    pub cond_discriminant: bool,
    pub cond_theorem: bool,
    pub cond_bound: bool,
}

pub fn heston_longrun(p: &HestonParams, prefs: &Preferences) -> Result<HestonLongRun> {
    p.validate_allow_degenerate()?;
    let g = prefs.gamma();
    let k = prefs.hedging_factor();
    let coeffs = p.riccati_coeffs(prefs);
    let sqrt_d = coeffs.require_positive_discriminant()?;
    let b_inf = if coeffs.c == 0.0 {
        -coeffs.a / coeffs.b
    } else {
        smaller_root(&coeffs, sqrt_d)
    };
    let a_inf = (1.0 - g) * p.r + p.lambda_y * p.y_bar * b_inf;
    let w = (1.0 - g) / g;
    let lambda_phat =
        p.lambda_y - p.sigma_y * p.sigma_y * b_inf - p.sigma_y * p.rho * w * (p.mu_s + p.rho * p.sigma_y * b_inf);
    let bound_rhs = (p.lambda_y - w * p.mu_s * p.rho * p.sigma_y) / (p.sigma_y * p.sigma_y * (1.0 + w * p.rho * p.rho));
    Ok(HestonLongRun {
        params: *p,
        gamma: g,
        coeffs,
        b_inf,
        a_inf,
        esr: a_inf / (1.0 - g),
        pi_inf: (p.mu_s + p.rho * p.sigma_y * b_inf) / g,
        lambda_phat,
        cond_discriminant: true,
        cond_theorem: theorem_condition(&coeffs, sqrt_d, k, p.rho),
        cond_bound: b_inf < bound_rhs,
    })
}

impl HestonLongRun {
    /// All conditions under which the long-run optimality claim is proven.
    pub fn verified(&self) -> bool {
        self.cond_discriminant && self.cond_theorem && self.cond_bound
    }

    pub fn myopic(&self) -> f64 {
        self.params.mu_s / self.gamma
    }

    pub fn hedging(&self) -> f64 {
        self.params.rho * self.params.sigma_y * self.b_inf / self.gamma
    }

    /// Law of the factor as `T -> infinity` under the myopic measure.
    pub fn stationary_law(&self) -> Result<StationaryLaw> {
        let p = &self.params;
        if self.lambda_phat <= 0.0 {
            return Err(Error::DivergentIntegral(format!(
                "myopic-measure mean reversion {} is not positive",
                self.lambda_phat
            )));
        }
        Ok(StationaryLaw::Gamma {
            shape: 2.0 * p.lambda_y * p.y_bar / (p.sigma_y * p.sigma_y),
            scale: p.sigma_y * p.sigma_y / (2.0 * self.lambda_phat),
        })
    }

    /// `-B y`; the identity exponents are `scale * (q(Y_T) - q(Y_0))`.
    pub fn q(&self, y: f64) -> f64 {
        -self.b_inf * y
    }

    pub fn exponent(&self, scale: f64) -> ExponentSpec {
        ExponentSpec {
            b_inf: self.b_inf,
            c_inf: 0.0,
            scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KoLongRun {
    pub params: KimOmbergParams,
    pub gamma: f64,
    pub coeffs: RiccatiCoeffs,
    pub c_inf: f64,
    pub b_inf: f64,
    pub a_inf: f64,
    pub esr: f64,
    pub k_phat: f64,
    pub l_phat: f64,
    pub cond_discriminant: bool,
    pub cond_theorem: bool,
    pub cond_bound: bool,
}

pub fn ko_longrun(p: &KimOmbergParams, prefs: &Preferences) -> Result<KoLongRun> {
    p.validate_allow_degenerate()?;
    let g = prefs.gamma();
    let k = prefs.hedging_factor();
    let coeffs = p.riccati_coeffs(prefs);
    let sqrt_d = coeffs.require_positive_discriminant()?;
    let c_inf = if coeffs.c == 0.0 {
        -coeffs.a / coeffs.b
    } else {
        smaller_root(&coeffs, sqrt_d)
    };
    let ly = p.lambda_y * p.y_bar;
    let b_inf = ly * c_inf / (2.0 * coeffs.c * c_inf + coeffs.b);
    let a_inf = (1.0 - g) * p.r - coeffs.c * b_inf * b_inf + ly * b_inf + 0.5 * p.sigma_y * p.sigma_y * c_inf;
    let w = (1.0 - g) / g;
    let sy2 = p.sigma_y * p.sigma_y;
    let k_phat = p.lambda_y - p.sigma_y * p.rho / p.sigma * w - c_inf * sy2 * (1.0 + w * p.rho * p.rho);
    let l_phat = ly + b_inf * sy2 * (1.0 + w * p.rho * p.rho);
    let bound_rhs = (p.lambda_y - w * p.sigma_y * p.rho / p.sigma) / (sy2 * (1.0 + p.rho * p.rho * w));
    Ok(KoLongRun {
        params: *p,
        gamma: g,
        coeffs,
        c_inf,
        b_inf,
        a_inf,
        esr: a_inf / (1.0 - g),
        k_phat,
        l_phat,
        cond_discriminant: true,
        cond_theorem: theorem_condition(&coeffs, sqrt_d, k, p.rho),
        cond_bound: c_inf < bound_rhs,
    })
}

impl KoLongRun {
    pub fn verified(&self) -> bool {
        self.cond_discriminant && self.cond_theorem && self.cond_bound
    }

    pub fn myopic(&self, y: f64) -> f64 {
        y / (self.gamma * self.params.sigma * self.params.sigma)
    }

    pub fn hedging(&self, y: f64) -> f64 {
        let p = &self.params;
        p.rho * p.sigma_y / (self.gamma * p.sigma) * (self.b_inf + self.c_inf * y)
    }

    pub fn pi_inf(&self, y: f64) -> f64 {
        self.myopic(y) + self.hedging(y)
    }

    /// Policy as `intercept + slope * y`.
    pub fn pi_inf_affine(&self) -> (f64, f64) {
        let p = &self.params;
        let h = p.rho * p.sigma_y / (self.gamma * p.sigma);
        (h * self.b_inf, 1.0 / (self.gamma * p.sigma * p.sigma) + h * self.c_inf)
    }

    pub fn stationary_law(&self) -> Result<StationaryLaw> {
        if self.k_phat <= 0.0 {
            return Err(Error::DivergentIntegral(format!(
                "myopic-measure mean reversion {} is not positive",
                self.k_phat
            )));
        }
        Ok(StationaryLaw::Gaussian {
            mean: self.l_phat / self.k_phat,
            variance: self.params.sigma_y * self.params.sigma_y / (2.0 * self.k_phat),
        })
    }

    /// `q(y) = -B y - C y^2 / 2`.
    pub fn q(&self, y: f64) -> f64 {
        -self.b_inf * y - 0.5 * self.c_inf * y * y
    }

    pub fn exponent(&self, scale: f64) -> ExponentSpec {
        ExponentSpec {
            b_inf: self.b_inf,
            c_inf: self.c_inf,
            scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationaryLaw {
    Gamma { shape: f64, scale: f64 },
    Gaussian { mean: f64, variance: f64 },
}

impl StationaryLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            StationaryLaw::Gamma { shape, scale } => shape * scale,
            StationaryLaw::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            StationaryLaw::Gamma { shape, scale } => shape * scale * scale,
            StationaryLaw::Gaussian { variance, .. } => variance,
        }
    }

    /// `E[exp(alpha Y + beta Y^2)]`; the Gamma law supports `beta = 0` only.
    pub fn exp_quadratic_moment(&self, alpha: f64, beta: f64) -> Result<f64> {
        match *self {
            StationaryLaw::Gamma { shape, scale } => {
                if beta != 0.0 {
                    return Err(Error::DivergentIntegral("quadratic exponent under a Gamma law".into()));
                }
                let base = 1.0 - alpha * scale;
                if base <= 0.0 {
                    return Err(Error::DivergentIntegral(format!(
                        "Gamma moment generating function at {alpha} exceeds 1/scale"
                    )));
                }
                Ok((-shape * base.ln()).exp())
            }
            StationaryLaw::Gaussian { mean, variance } => {
                let base = 1.0 - 2.0 * beta * variance;
                if base <= 0.0 {
                    return Err(Error::DivergentIntegral(format!(
                        "quadratic exponent {beta} too large for variance {variance}"
                    )));
                }
                let expo = (alpha * mean + beta * mean * mean + 0.5 * alpha * alpha * variance) / base;
                Ok(expo.exp() / base.sqrt())
            }
        }
    }
}

/// `exp(scale * q(y))` with `q(y) = -b_inf y - c_inf y^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSpec {
    pub b_inf: f64,
    pub c_inf: f64,
    pub scale: f64,
}

/// `lim E[exp(scale * q(Y_T))]` under the stationary law.
pub fn ergodic_limit(law: &StationaryLaw, spec: &ExponentSpec) -> Result<f64> {
    law.exp_quadratic_moment(-spec.scale * spec.b_inf, -0.5 * spec.scale * spec.c_inf)
}

/// `zeroth + first_coeff * sigma_y + O(sigma_y^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    pub zeroth: f64,
    pub first_coeff: f64,
}

impl Expansion {
    pub fn eval(&self, sigma_y: f64) -> f64 {
        self.zeroth + self.first_coeff * sigma_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionPair {
    pub esr: Expansion,
    /// Constant weight (Heston) or mean weight at the factor's long-run level (KO).
    pub portfolio: Expansion,
    pub r: f64,
    pub sigma_y: f64,
}

impl ExpansionPair {
    /// First-order correction relative to the risk-premium part of the ESR.
    pub fn esr_relative_correction(&self) -> f64 {
        self.esr.first_coeff * self.sigma_y / (self.esr.zeroth - self.r)
    }

    pub fn portfolio_relative_correction(&self) -> f64 {
        self.portfolio.first_coeff * self.sigma_y / self.portfolio.zeroth
    }
}

pub fn expand_heston(p: &HestonParams, prefs: &Preferences) -> ExpansionPair {
    let g = prefs.gamma();
    let prem = p.mu_s * p.mu_s * p.y_bar / (2.0 * g);
    let myopic = p.mu_s / g;
    let tilt = (1.0 - g) * myopic * p.rho / p.lambda_y;
    ExpansionPair {
        esr: Expansion {
            zeroth: p.r + prem,
            first_coeff: prem * tilt,
        },
        portfolio: Expansion {
            zeroth: myopic,
            first_coeff: myopic * tilt / 2.0,
        },
        r: p.r,
        sigma_y: p.sigma_y,
    }
}

pub fn expand_ko(p: &KimOmbergParams, prefs: &Preferences) -> ExpansionPair {
    let g = prefs.gamma();
    let s2 = p.sigma * p.sigma;
    let prem = p.y_bar * p.y_bar / (2.0 * g * s2);
    let myopic = p.y_bar / (g * s2);
    let tilt = (1.0 - g) * p.rho / (g * p.lambda_y * p.sigma);
    ExpansionPair {
        esr: Expansion {
            zeroth: p.r + prem,
            first_coeff: prem * 2.0 * tilt,
        },
        portfolio: Expansion {
            zeroth: myopic,
            first_coeff: myopic * tilt,
        },
        r: p.r,
        sigma_y: p.sigma_y,
    }
}

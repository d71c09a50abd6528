//! Exact transition samplers for the two factor processes.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::long_run::{HestonLongRun, KoLongRun};
use crate::model::{HestonParams, KimOmbergParams};

/// `dY = (kappa theta - kappa Y) dt + sigma sqrt(Y) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirDynamics {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl CirDynamics {
    pub fn physical(p: &HestonParams) -> Self {
        Self {
            kappa: p.lambda_y,
            theta: p.y_bar,
            sigma: p.sigma_y,
        }
    }

    /// Dynamics under the myopic measure: same `lambda_y y_bar`, mean reversion `lambda_phat`.
    pub fn myopic(lr: &HestonLongRun) -> Self {
        let p = &lr.params;
        Self {
            kappa: lr.lambda_phat,
            theta: p.lambda_y * p.y_bar / lr.lambda_phat,
            sigma: p.sigma_y,
        }
    }

    pub fn mean(&self, y0: f64, dt: f64) -> f64 {
        self.theta + (y0 - self.theta) * (-self.kappa * dt).exp()
    }

    pub fn variance(&self, y0: f64, dt: f64) -> f64 {
        let e = (-self.kappa * dt).exp();
        let s2k = self.sigma * self.sigma / self.kappa;
        y0 * s2k * (e - e * e) + self.theta * s2k / 2.0 * (1.0 - e) * (1.0 - e)
    }
}

/// Draw from the CIR transition law: a scaled noncentral chi-squared with
/// `4 kappa theta / sigma^2` degrees of freedom, sampled as a Poisson mixture
/// of Gamma variables.
pub fn sample_cir_exact<R: Rng + ?Sized>(y0: f64, dt: f64, dynamics: &CirDynamics, rng: &mut R) -> f64 {
    let CirDynamics { kappa, theta, sigma } = *dynamics;
    let one_minus_e = -(-kappa * dt).exp_m1();
    let scale = sigma * sigma * one_minus_e / (4.0 * kappa);
    let df = 4.0 * kappa * theta / (sigma * sigma);
    let noncentrality = y0 * (-kappa * dt).exp() / scale;
    let n = if noncentrality > 0.0 {
        Poisson::new(0.5 * noncentrality)
            .expect("finite positive rate")
            .sample(rng)
    } else {
        0.0
    };
    let chi2 = Gamma::new(0.5 * df + n, 2.0).expect("positive shape").sample(rng);
    scale * chi2
}

/// `dY = kappa (theta - Y) dt + sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuDynamics {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl OuDynamics {
    pub fn physical(p: &KimOmbergParams) -> Self {
        Self {
            kappa: p.lambda_y,
            theta: p.y_bar,
            sigma: p.sigma_y,
        }
    }

    pub fn myopic(lr: &KoLongRun) -> Self {
        Self {
            kappa: lr.k_phat,
            theta: lr.l_phat / lr.k_phat,
            sigma: lr.params.sigma_y,
        }
    }

    pub fn mean(&self, y0: f64, dt: f64) -> f64 {
        self.theta + (y0 - self.theta) * (-self.kappa * dt).exp()
    }

    pub fn variance(&self, dt: f64) -> f64 {
        self.sigma * self.sigma * -(-2.0 * self.kappa * dt).exp_m1() / (2.0 * self.kappa)
    }
}

pub fn sample_ou_exact<R: Rng + ?Sized>(y0: f64, dt: f64, dynamics: &OuDynamics, rng: &mut R) -> f64 {
    let mean = dynamics.mean(y0, dt);
    let sd = dynamics.variance(dt).sqrt();
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("finite sd").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{Purpose, RngSpec};

    #[test]
    fn cir_tiny_step_stays_put() {
        let dyn_ = CirDynamics::physical(&HestonParams::pan());
        let mut rng = RngSpec::new(1).path_rng(Purpose::Test, 0);
        for _ in 0..100 {
            let y = sample_cir_exact(0.03, 1e-10, &dyn_, &mut rng);
            assert!(((y - 0.03) / 0.03).abs() < 1e-3);
        }
    }

    #[test]
    fn ou_without_noise_is_deterministic() {
        let mut p = KimOmbergParams::barberis();
        p.sigma_y = 0.0;
        let d = OuDynamics::physical(&p);
        let mut rng = RngSpec::new(1).path_rng(Purpose::Test, 0);
        let y = sample_ou_exact(0.01, 3.0, &d, &mut rng);
        assert_eq!(y, p.y_bar + (0.01 - p.y_bar) * (-p.lambda_y * 3.0f64).exp());
    }

    #[test]
    fn cir_variance_matches_small_step_limit() {
        let d = CirDynamics::physical(&HestonParams::pan());
        let dt = 1e-6;
        let v = d.variance(0.02, dt);
        assert!((v / (d.sigma * d.sigma * 0.02 * dt) - 1.0).abs() < 1e-3);
    }
}

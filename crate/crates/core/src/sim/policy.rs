use std::fmt;
use std::sync::Arc;

use crate::closed_form::{HestonFiniteSolution, KoFiniteSolution};
use crate::long_run::{HestonLongRun, KoLongRun};

type Feedback = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A risky-asset weight `pi(t, y)` evaluable on the whole simulation grid.
#[derive(Clone)]
pub enum PolicySpec {
    Constant(f64),
    HestonFinite(HestonFiniteSolution),
    HestonLongRun(f64),
    KoFinite(Arc<KoFiniteSolution>),
    /// `intercept + slope * y`.
    KoLongRun {
        intercept: f64,
        slope: f64,
    },
    /// `scale * inner + shift`.
    Perturbed {
        inner: Box<PolicySpec>,
        scale: f64,
        shift: f64,
    },
    Custom(Feedback),
}

impl PolicySpec {
    pub fn heston_longrun(lr: &HestonLongRun) -> Self {
        PolicySpec::HestonLongRun(lr.pi_inf)
    }

    pub fn ko_longrun(lr: &KoLongRun) -> Self {
        let (intercept, slope) = lr.pi_inf_affine();
        PolicySpec::KoLongRun { intercept, slope }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        PolicySpec::Custom(Arc::new(f))
    }

    pub fn perturbed(&self, scale: f64, shift: f64) -> Self {
        PolicySpec::Perturbed {
            inner: Box::new(self.clone()),
            scale,
            shift,
        }
    }

    pub fn weight(&self, t: f64, y: f64) -> f64 {
        match self {
            PolicySpec::Constant(w) | PolicySpec::HestonLongRun(w) => *w,
            PolicySpec::HestonFinite(s) => {
                s.myopic() + s.params.rho * s.params.sigma_y * s.b(t.min(s.horizon)) / s.gamma
            }
            PolicySpec::KoFinite(s) => {
                let t = t.min(s.horizon);
                let p = &s.params;
                y / (s.gamma * p.sigma * p.sigma) + p.rho * p.sigma_y / (s.gamma * p.sigma) * (s.b(t) + s.c(t) * y)
            }
            PolicySpec::KoLongRun { intercept, slope } => intercept + slope * y,
            PolicySpec::Perturbed { inner, scale, shift } => scale * inner.weight(t, y) + shift,
            PolicySpec::Custom(f) => f(t, y),
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Constant(w) => format!("constant({w})"),
            PolicySpec::HestonFinite(_) => "heston_finite".into(),
            PolicySpec::HestonLongRun(_) => "heston_longrun".into(),
            PolicySpec::KoFinite(_) => "ko_finite".into(),
            PolicySpec::KoLongRun { .. } => "ko_longrun".into(),
            PolicySpec::Perturbed { inner, scale, shift } => {
                if *shift == 0.0 {
                    format!("{}*{scale}", inner.label())
                } else {
                    format!("{}*{scale}+{shift}", inner.label())
                }
            }
            PolicySpec::Custom(_) => "custom".into(),
        }
    }
}

impl fmt::Debug for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The multiplicative and additive perturbations used to probe exclusivity.
pub fn perturbation_set(candidate: &PolicySpec) -> Vec<PolicySpec> {
    let mut out: Vec<PolicySpec> = [0.5, 0.9, 1.1, 2.0]
        .iter()
        .map(|&s| candidate.perturbed(s, 0.0))
        .collect();
    out.push(candidate.perturbed(1.0, 0.1));
    out
}

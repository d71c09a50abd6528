//! Statistical and analytic checks that candidate portfolios attain the
//! duality bounds.

use std::fmt;
use std::io::{self, Write};

use crate::closed_form::{solve_bs, solve_heston, solve_ko};
use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::long_run::{heston_longrun, ko_longrun};
use crate::model::{BlackScholesParams, HestonParams, KimOmbergParams, Preferences};
use crate::sim::{
    estimate::estimate, mc_expect, perturbation_set, sample_terminal_exact, CirDynamics, Deflator, ExactDynamics,
    Market, McEstimate, Measure, OuDynamics, PathTerminal, PolicySpec, Purpose, RngSpec, SimConfig, Simulation,
};

/// Standard errors beyond which a gap in the forbidden direction is a violation.
pub const VIOLATION_SE: f64 = 3.0;
/// Lower edge of the inconclusive band.
pub const INCONCLUSIVE_SE: f64 = 2.0;
/// Relative tolerance for checks without sampling error.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `lhs <= rhs`.
    LessEq,
    /// `lhs == rhs`.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub relation: Relation,
    pub gap: f64,
    pub combined_se: f64,
    pub verdict: Verdict,
}

impl BoundReport {
    /// Sides estimated independently; their errors add in quadrature.
    pub fn new(name: impl Into<String>, lhs: McEstimate, rhs: McEstimate, relation: Relation) -> Self {
        let se = lhs.std_error.hypot(rhs.std_error);
        Self::with_se(name, lhs, rhs, relation, se)
    }

    /// Sides estimated on common paths; `gap_se` is the error of the per-path difference.
    /// A difference error at roundoff level means the sides agree path by
    /// path, so the report falls back to the exact tolerance.
    pub fn paired(name: impl Into<String>, lhs: McEstimate, rhs: McEstimate, relation: Relation, gap_se: f64) -> Self {
        let floor = EXACT_TOL * lhs.mean.abs().max(rhs.mean.abs()).max(1.0);
        let se = if gap_se < floor { 0.0 } else { gap_se };
        Self::with_se(name, lhs, rhs, relation, se)
    }

    fn with_se(name: impl Into<String>, lhs: McEstimate, rhs: McEstimate, relation: Relation, se: f64) -> Self {
        let gap = lhs.mean - rhs.mean;
        let forbidden = match relation {
            Relation::LessEq => gap,
            Relation::Equal => gap.abs(),
        };
        let verdict = if se == 0.0 {
            let tol = EXACT_TOL * lhs.mean.abs().max(rhs.mean.abs()).max(1.0);
            if forbidden > tol {
                Verdict::Violated
            } else {
                Verdict::Holds
            }
        } else if forbidden > VIOLATION_SE * se {
            Verdict::Violated
        } else if forbidden > INCONCLUSIVE_SE * se {
            Verdict::Inconclusive
        } else {
            Verdict::Holds
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            relation,
            gap,
            combined_se: se,
            verdict,
        }
    }

    /// Gap measured in standard errors; exact reports give 0 within tolerance
    /// and infinity outside it.
    pub fn z_score(&self) -> f64 {
        if self.combined_se > 0.0 {
            self.gap / self.combined_se
        } else if self.verdict == Verdict::Holds {
            0.0
        } else {
            f64::INFINITY.copysign(self.gap)
        }
    }
}

pub fn write_reports_csv<W: Write>(reports: &[BoundReport], mut w: W) -> io::Result<()> {
    writeln!(w, "name,lhs,rhs,gap,se,verdict")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.name,
            fmt_f64(r.lhs.mean),
            fmt_f64(r.rhs.mean),
            fmt_f64(r.gap),
            fmt_f64(r.combined_se),
            r.verdict
        )?;
    }
    Ok(())
}

pub fn summarize(reports: &[BoundReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&format!(
            "{:<40} lhs={:<14.8e} rhs={:<14.8e} gap/se={:>8.2}  {}\n",
            r.name,
            r.lhs.mean,
            r.rhs.mean,
            r.z_score(),
            r.verdict
        ));
    }
    s
}

/// `mean^power` with a delta-method standard error.
fn powered(e: McEstimate, power: f64) -> McEstimate {
    McEstimate {
        mean: e.mean.powf(power),
        std_error: (power * e.mean.powf(power - 1.0)).abs() * e.std_error,
        ..e
    }
}

/// Budget constraint and Hölder bound from paired samples of payoff and deflator.
///
/// Both sides are reported in utility units:
/// `E[X^{1-g}]/(1-g) <= x^{1-g}/(1-g) E[Z^{1-1/g}]^g`.
pub fn holder_bound(x: &[f64], z: &[f64], gamma: f64, x0: f64, seed: u64) -> Result<[BoundReport; 2]> {
    if x.len() != z.len() {
        return Err(Error::InvalidConfig(
            "payoff and deflator samples differ in length".into(),
        ));
    }
    let xz: Vec<f64> = x.iter().zip(z).map(|(a, b)| a * b).collect();
    let budget = BoundReport::new(
        "budget E[XZ] <= x",
        estimate(&xz, seed)?,
        McEstimate::exact(x0),
        Relation::LessEq,
    );
    let u = 1.0 - gamma;
    let xu: Vec<f64> = x.iter().map(|v| v.powf(u) / u).collect();
    let zp: Vec<f64> = z.iter().map(|v| v.powf(1.0 - 1.0 / gamma)).collect();
    let rhs = powered(estimate(&zp, seed)?, gamma).scaled(x0.powf(u) / u);
    let holder = BoundReport::new("holder", estimate(&xu, seed)?, rhs, Relation::LessEq);
    Ok([budget, holder])
}

/// The payoff attaining the Hölder bound: `X = x Z^{-1/g} / E[Z^{1-1/g}]`.
pub fn foc_payoff(z: &[f64], gamma: f64, x0: f64) -> Vec<f64> {
    let norm = z.iter().map(|v| v.powf(1.0 - 1.0 / gamma)).sum::<f64>() / z.len() as f64;
    z.iter().map(|v| x0 * v.powf(-1.0 / gamma) / norm).collect()
}

/// Both sides of the Black-Scholes duality equality in closed form, as
/// `E[X^{1-g}]` and `x^{1-g} E[Z^{1-1/g}]^g`.
pub fn verify_bs(p: &BlackScholesParams, prefs: &Preferences, horizon: f64, x0: f64) -> Result<BoundReport> {
    let sol = solve_bs(p, prefs, horizon)?;
    let g = prefs.gamma();
    let theta = p.mu / p.sigma;
    let primal = x0.powf(1.0 - g) * ((1.0 - g) * sol.esr * horizon).exp();
    let q = 1.0 - 1.0 / g;
    // E[(e^{-rT} M_T)^q] with M_T the Black-Scholes density process
    let dual_moment = (-q * p.r * horizon + 0.5 * q * (q - 1.0) * theta * theta * horizon).exp();
    let dual = x0.powf(1.0 - g) * dual_moment.powf(g);
    Ok(BoundReport::new(
        "bs primal = dual",
        McEstimate::exact(primal),
        McEstimate::exact(dual),
        Relation::Equal,
    ))
}

/// Simulated `E[X^{1-g}]` of the optimal constant weight against its closed form.
pub fn verify_bs_mc(p: &BlackScholesParams, prefs: &Preferences, config: SimConfig) -> Result<BoundReport> {
    let sol = solve_bs(p, prefs, config.horizon)?;
    let g = prefs.gamma();
    let out = Simulation::new(Market::BlackScholes(*p), config)
        .with_deflator(Deflator::black_scholes(p, prefs))
        .with_candidate(PolicySpec::Constant(sol.pi_hat))
        .simulate(Measure::Physical)?;
    let lhs = out.expect(|t| ((1.0 - g) * t.log_x[0]).exp())?;
    let exact = config.x0.powf(1.0 - g) * ((1.0 - g) * sol.esr * config.horizon).exp();
    Ok(BoundReport::new(
        "bs simulated utility",
        lhs,
        McEstimate::exact(exact),
        Relation::Equal,
    ))
}

/// Everything the finite-horizon bound checks need from a long-run solution.
#[derive(Debug, Clone)]
pub struct LongRunSetup {
    pub label: &'static str,
    pub market: Market,
    pub deflator: Deflator,
    pub candidate: PolicySpec,
    pub esr: f64,
    pub verified: bool,
    pub exact_myopic: ExactDynamics,
    pub exact_physical: ExactDynamics,
}

impl LongRunSetup {
    pub fn heston(p: &HestonParams, prefs: &Preferences) -> Result<Self> {
        let lr = heston_longrun(p, prefs)?;
        Ok(Self {
            label: "heston",
            market: Market::Heston(*p),
            deflator: Deflator::heston(&lr),
            candidate: PolicySpec::heston_longrun(&lr),
            esr: lr.esr,
            verified: lr.verified(),
            exact_myopic: ExactDynamics::Cir(CirDynamics::myopic(&lr)),
            exact_physical: ExactDynamics::Cir(CirDynamics::physical(p)),
        })
    }

    pub fn ko(p: &KimOmbergParams, prefs: &Preferences) -> Result<Self> {
        let lr = ko_longrun(p, prefs)?;
        Ok(Self {
            label: "ko",
            market: Market::Ko(*p),
            deflator: Deflator::ko(&lr),
            candidate: PolicySpec::ko_longrun(&lr),
            esr: lr.esr,
            verified: lr.verified(),
            exact_myopic: ExactDynamics::Ou(OuDynamics::myopic(&lr)),
            exact_physical: ExactDynamics::Ou(OuDynamics::physical(p)),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.deflator.gamma
    }
}

#[derive(Debug, Clone)]
pub struct FiniteBoundReports {
    /// `E[X^{1-g}] = x^{1-g} e^{A T} E^P_hat[e^{q(Y_T)-q(Y_0)}]`.
    pub utility_identity: BoundReport,
    /// `E[Z^{1-1/g}]^g = e^{A T} E^P_hat[e^{(q(Y_T)-q(Y_0))/g}]^g`.
    pub deflator_identity: BoundReport,
    /// Supermartingale property `E[X^pi Z] <= x` for the candidate and each perturbation.
    pub budget: Vec<BoundReport>,
    /// Utility identity on common physical paths, reweighted by the myopic density,
    /// for the candidate (first) and each perturbation.
    pub exclusivity: Vec<BoundReport>,
    /// The myopic density has mean one.
    pub density_mean: BoundReport,
    /// Largest path-wise gap between the two forms of `log Z_T`.
    pub deflator_form_gap: f64,
    /// Whether the parameter conditions behind the long-run optimality claim hold.
    pub optimality_verified: bool,
}

impl FiniteBoundReports {
    pub fn all(&self) -> Vec<BoundReport> {
        let mut v = vec![self.utility_identity.clone(), self.deflator_identity.clone()];
        v.extend(self.budget.iter().cloned());
        v.extend(self.exclusivity.iter().cloned());
        v.push(self.density_mean.clone());
        v
    }

    /// True when no report that is supposed to hold is violated. Exclusivity
    /// reports of perturbed policies are expected to fail and are skipped.
    pub fn any_violation(&self) -> bool {
        let mut expected = vec![&self.utility_identity, &self.deflator_identity, &self.density_mean];
        expected.extend(self.budget.iter());
        expected.extend(self.exclusivity.first());
        expected.iter().any(|r| r.verdict == Verdict::Violated)
    }
}

pub fn verify_finite_bounds_heston(
    p: &HestonParams,
    prefs: &Preferences,
    config: SimConfig,
) -> Result<FiniteBoundReports> {
    verify_finite_bounds(&LongRunSetup::heston(p, prefs)?, config)
}

pub fn verify_finite_bounds_ko(
    p: &KimOmbergParams,
    prefs: &Preferences,
    config: SimConfig,
) -> Result<FiniteBoundReports> {
    verify_finite_bounds(&LongRunSetup::ko(p, prefs)?, config)
}

pub fn verify_finite_bounds(setup: &LongRunSetup, config: SimConfig) -> Result<FiniteBoundReports> {
    let g = setup.gamma();
    let u = 1.0 - g;
    let d = setup.deflator;
    let horizon = config.horizon;
    let x0 = config.x0;
    let q0 = d.q(config.y0);
    let scale_u = x0.powf(u) * (d.a_inf * horizon).exp();
    let scale_z = (d.a_inf * horizon).exp();

    let mut sim = Simulation::new(setup.market, config)
        .with_deflator(d)
        .with_candidate(setup.candidate.clone());
    for p in perturbation_set(&setup.candidate) {
        sim = sim.with_policy(p);
    }
    let phys = sim.simulate(Measure::Physical)?;
    let myopic = Simulation::new(setup.market, config)
        .with_deflator(d)
        .simulate(Measure::Myopic)?;

    let lhs_u = phys.expect(|t| (u * t.log_x[0]).exp())?;
    let rhs_u = myopic.expect(|t| (d.q(t.y_t) - q0).exp())?.scaled(scale_u);
    let utility_identity = BoundReport::new(
        format!("{} utility identity", setup.label),
        lhs_u,
        rhs_u,
        Relation::Equal,
    );

    let lhs_z = powered(phys.expect(|t| ((1.0 - 1.0 / g) * t.log_z).exp())?, g);
    let rhs_z = powered(myopic.expect(|t| ((d.q(t.y_t) - q0) / g).exp())?, g).scaled(scale_z);
    let deflator_identity = BoundReport::new(
        format!("{} deflator identity", setup.label),
        lhs_z,
        rhs_z,
        Relation::Equal,
    );

    let mut budget = Vec::new();
    let mut exclusivity = Vec::new();
    for (k, pol) in sim.policies.iter().enumerate() {
        let xz = phys.expect(|t| (t.log_x[k] + t.log_z).exp())?;
        budget.push(BoundReport::new(
            format!("{} budget {}", setup.label, pol.label()),
            xz,
            McEstimate::exact(x0),
            Relation::LessEq,
        ));
        let weighted = |t: &PathTerminal| scale_u * (t.log_density + d.q(t.y_t) - q0).exp();
        let lhs = phys.expect(|t| (u * t.log_x[k]).exp())?;
        let rhs = phys.expect(weighted)?;
        let diff = phys.expect(|t| (u * t.log_x[k]).exp() - weighted(t))?;
        exclusivity.push(BoundReport::paired(
            format!("{} attainment {}", setup.label, pol.label()),
            lhs,
            rhs,
            Relation::Equal,
            diff.std_error,
        ));
    }

    let density_mean = BoundReport::new(
        format!("{} myopic density mean", setup.label),
        phys.expect(|t| t.log_density.exp())?,
        McEstimate::exact(1.0),
        Relation::Equal,
    );
    let deflator_form_gap = phys
        .paths
        .iter()
        .map(|t| (t.log_z - t.log_z_def).abs())
        .fold(0.0, f64::max);

    Ok(FiniteBoundReports {
        utility_identity,
        deflator_identity,
        budget,
        exclusivity,
        density_mean,
        deflator_form_gap,
        optimality_verified: setup.verified,
    })
}

/// `E^P_hat[exp(scale (q(Y_T) - q(Y_0)))]` from exact terminal draws.
pub fn myopic_exponent_moment(
    setup: &LongRunSetup,
    y0: f64,
    horizon: f64,
    scale: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let d = setup.deflator;
    let ys = sample_terminal_exact(
        setup.exact_myopic,
        y0,
        horizon,
        n_paths,
        RngSpec::new(seed),
        Purpose::ExactMyopic,
    );
    let q0 = d.q(y0);
    mc_expect(&ys, |&y| (scale * (d.q(y) - q0)).exp(), seed)
}

/// Equivalent safe rates over a set of horizons.
///
/// Columns: `T`, the finite-horizon optimizer (closed form), the long-run
/// optimizer (utility identity with an exact myopic-measure expectation) and
/// its standard error, the dual upper bound (deflator identity) and its
/// standard error, the matched Black-Scholes optimum, and the long-run limit.
pub fn growth_rate_scan(
    setup: &LongRunSetup,
    prefs: &Preferences,
    horizons: &[f64],
    y0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Table> {
    let g = prefs.gamma();
    let u = 1.0 - g;
    let a_inf = setup.deflator.a_inf;
    let bs = match setup.market {
        Market::Heston(p) => p.matched_black_scholes(),
        Market::Ko(p) => p.matched_black_scholes(),
        Market::BlackScholes(p) => p,
    };
    let esr_bs = solve_bs(&bs, prefs, 1.0)?.esr;
    let mut table = Table::new([
        "T",
        "esr_finite",
        "esr_longrun_policy",
        "esr_longrun_policy_se",
        "esr_dual_bound",
        "esr_dual_bound_se",
        "esr_black_scholes",
        "esr_limit",
    ]);
    for &horizon in horizons {
        let esr_finite = match setup.market {
            Market::Heston(p) => solve_heston(&p, prefs, horizon)?.esr(y0),
            Market::Ko(p) => solve_ko(&p, prefs, horizon)?.esr(y0),
            Market::BlackScholes(_) => esr_bs,
        };
        let m1 = myopic_exponent_moment(setup, y0, horizon, 1.0, n_paths, seed)?;
        let (l1, s1) = m1.ln();
        let m2 = myopic_exponent_moment(setup, y0, horizon, 1.0 / g, n_paths, seed)?;
        let (l2, s2) = m2.ln();
        let denom = u * horizon;
        table.push(vec![
            horizon,
            esr_finite,
            a_inf / u + l1 / denom,
            s1 / denom.abs(),
            a_inf / u + g * l2 / denom,
            g * s2 / denom.abs(),
            esr_bs,
            setup.esr,
        ]);
    }
    Ok(table)
}

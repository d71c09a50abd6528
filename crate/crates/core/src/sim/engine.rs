//! Joint Euler simulation of factor, wealth and deflator.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::long_run::{HestonLongRun, KoLongRun};
use crate::model::{BlackScholesParams, FactorMarket, HestonParams, KimOmbergParams, Preferences};
use crate::sim::estimate::{estimate, McEstimate};
use crate::sim::policy::PolicySpec;
use crate::sim::rng::{Purpose, RngSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// The physical measure.
    Physical,
    /// The myopic measure defined by the long-run deflator.
    Myopic,
}

impl Measure {
    fn purpose(self) -> Purpose {
        match self {
            Measure::Physical => Purpose::Physical,
            Measure::Myopic => Purpose::Myopic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Market {
    BlackScholes(BlackScholesParams),
    Heston(HestonParams),
    Ko(KimOmbergParams),
}

impl Market {
    /// State used inside drift and diffusion: the variance is truncated at 0.
    fn effective(&self, y: f64) -> f64 {
        match self {
            Market::Heston(_) => y.max(0.0),
            _ => y,
        }
    }

    pub fn long_run_level(&self) -> f64 {
        match self {
            Market::BlackScholes(_) => 0.0,
            Market::Heston(p) => p.y_bar,
            Market::Ko(p) => p.y_bar,
        }
    }

    fn inner(&self) -> &dyn FactorMarket {
        match self {
            Market::BlackScholes(p) => p,
            Market::Heston(p) => p,
            Market::Ko(p) => p,
        }
    }
}

impl FactorMarket for Market {
    fn rate(&self) -> f64 {
        self.inner().rate()
    }
    fn correlation(&self) -> f64 {
        self.inner().correlation()
    }
    fn excess_return(&self, y: f64) -> f64 {
        self.inner().excess_return(y)
    }
    fn volatility(&self, y: f64) -> f64 {
        self.inner().volatility(y)
    }
    fn factor_drift(&self, y: f64) -> f64 {
        self.inner().factor_drift(y)
    }
    fn factor_vol(&self, y: f64) -> f64 {
        self.inner().factor_vol(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    BlackScholes { theta: f64 },
    Heston { sigma_y: f64, mu_s: f64, rho: f64 },
    Ko { sigma_y: f64, sigma: f64, rho: f64 },
}

/// Long-run deflator `Z = e^{-rt} E(int zeta_Y dW^Y + int zeta_W dW)` together
/// with the constants of its closed form `(X/x)^{-gamma} exp(-A t - q(Y_t) + q(Y_0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deflator {
    kernel: Kernel,
    pub gamma: f64,
    pub a_inf: f64,
    pub b_inf: f64,
    pub c_inf: f64,
}

impl Deflator {
    pub fn black_scholes(p: &BlackScholesParams, prefs: &Preferences) -> Self {
        let g = prefs.gamma();
        let theta = p.mu / p.sigma;
        Deflator {
            kernel: Kernel::BlackScholes { theta },
            gamma: g,
            a_inf: (1.0 - g) * (p.r + theta * theta / (2.0 * g)),
            b_inf: 0.0,
            c_inf: 0.0,
        }
    }

    pub fn heston(lr: &HestonLongRun) -> Self {
        let p = &lr.params;
        Deflator {
            kernel: Kernel::Heston {
                sigma_y: p.sigma_y,
                mu_s: p.mu_s,
                rho: p.rho,
            },
            gamma: lr.gamma,
            a_inf: lr.a_inf,
            b_inf: lr.b_inf,
            c_inf: 0.0,
        }
    }

    pub fn ko(lr: &KoLongRun) -> Self {
        let p = &lr.params;
        Deflator {
            kernel: Kernel::Ko {
                sigma_y: p.sigma_y,
                sigma: p.sigma,
                rho: p.rho,
            },
            gamma: lr.gamma,
            a_inf: lr.a_inf,
            b_inf: lr.b_inf,
            c_inf: lr.c_inf,
        }
    }

    /// `(zeta_Y(y), zeta_W(y))`.
    pub fn zeta(&self, y: f64) -> (f64, f64) {
        match self.kernel {
            Kernel::BlackScholes { theta } => (0.0, -theta),
            Kernel::Heston { sigma_y, mu_s, rho } => {
                let s = y.sqrt();
                (sigma_y * s * self.b_inf, -s * (mu_s + rho * sigma_y * self.b_inf))
            }
            Kernel::Ko { sigma_y, sigma, rho } => {
                let h = self.b_inf + self.c_inf * y;
                (sigma_y * h, -(y + rho * sigma * sigma_y * h) / sigma)
            }
        }
    }

    /// Integrands of the myopic-measure density: `(zeta_Y, (1 - 1/gamma) zeta_W)`.
    pub fn psi(&self, y: f64) -> (f64, f64) {
        let (zy, zw) = self.zeta(y);
        (zy, (1.0 - 1.0 / self.gamma) * zw)
    }

    /// `q(y) = -B y - C y^2 / 2`.
    pub fn q(&self, y: f64) -> f64 {
        -self.b_inf * y - 0.5 * self.c_inf * y * y
    }
}

/// Drift and mean reversion of the factor under the myopic measure, read off
/// the Girsanov shift `dW^Y = dW^Y_hat + (psi_Y + rho psi_W) dt`. Returns
/// `(level_term, reversion)` with drift `level_term - reversion * y`.
pub fn myopic_factor_drift(market: &Market, deflator: &Deflator) -> (f64, f64) {
    // The drift is affine in y for both factor models; evaluate at two points.
    let rho = market.correlation();
    let drift = |y: f64| {
        let (py, pw) = deflator.psi(y);
        market.factor_drift(y) + market.factor_vol(y) * (py + rho * pw)
    };
    let (y1, y2) = (1.0, 2.0);
    let (d1, d2) = (drift(y1), drift(y2));
    let slope = d2 - d1;
    (d1 - slope * y1, -slope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub y0: f64,
    pub x0: f64,
}

impl SimConfig {
    pub const STEPS_PER_UNIT: f64 = 256.0;
    pub const DEFAULT_PATHS: usize = 100_000;

    /// Defaults: 256 steps per unit time, 10^5 paths, unit initial wealth.
    pub fn new(horizon: f64, y0: f64, seed: u64) -> Self {
        Self {
            horizon,
            n_steps: ((horizon * Self::STEPS_PER_UNIT).ceil() as usize).max(1),
            n_paths: Self::DEFAULT_PATHS,
            seed,
            y0,
            x0: 1.0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// Terminal state of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTerminal {
    pub y_t: f64,
    /// `log X_T` per policy.
    pub log_x: Vec<f64>,
    /// Stochastic-exponential form of the deflator.
    pub log_z: f64,
    /// Closed form of the deflator driven by the candidate's wealth (NaN without one).
    pub log_z_def: f64,
    /// `log dP_hat/dP` on `F_T`, accumulated along the path.
    pub log_density: f64,
}

/// A fully recorded path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub measure: Measure,
}

impl PathBundle {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,y,x,z")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                crate::csv::fmt_f64(self.times[i]),
                crate::csv::fmt_f64(self.y[i]),
                crate::csv::fmt_f64(self.x[i]),
                crate::csv::fmt_f64(self.z[i])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub market: Market,
    pub deflator: Option<Deflator>,
    pub policies: Vec<PolicySpec>,
    /// Index of the policy whose wealth drives the closed-form deflator.
    pub candidate: Option<usize>,
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub paths: Vec<PathTerminal>,
    pub config: SimConfig,
    pub measure: Measure,
}

impl SimOutput {
    /// Mean and standard error of a per-path functional.
    pub fn expect<F: Fn(&PathTerminal) -> f64 + Sync>(&self, f: F) -> Result<McEstimate> {
        mc_expect(&self.paths, f, self.config.seed)
    }
}

pub fn mc_expect<T: Sync, F: Fn(&T) -> f64 + Sync>(items: &[T], f: F, seed: u64) -> Result<McEstimate> {
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        items.par_iter().map(&f).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = items.iter().map(&f).collect();
    estimate(&values, seed)
}

/// Outcome of the discretization pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostic {
    pub coarse: McEstimate,
    pub fine: McEstimate,
    pub shift: f64,
}

impl Simulation {
    pub fn new(market: Market, config: SimConfig) -> Self {
        Self {
            market,
            deflator: None,
            policies: Vec::new(),
            candidate: None,
            config,
        }
    }

    pub fn with_deflator(mut self, d: Deflator) -> Self {
        self.deflator = Some(d);
        self
    }

    pub fn with_policy(mut self, p: PolicySpec) -> Self {
        self.policies.push(p);
        self
    }

    pub fn with_candidate(mut self, p: PolicySpec) -> Self {
        self.candidate = Some(self.policies.len());
        self.policies.push(p);
        self
    }

    fn check(&self, measure: Measure) -> Result<()> {
        let c = &self.config;
        if c.n_steps < 1 {
            return Err(Error::InvalidConfig("n_steps must be >= 1".into()));
        }
        if !(c.horizon > 0.0 && c.horizon.is_finite()) {
            return Err(Error::NonpositiveParameter {
                name: "horizon",
                value: c.horizon,
                requirement: "positive and finite",
            });
        }
        if c.x0.is_nan() || c.x0 <= 0.0 {
            return Err(Error::NonpositiveParameter {
                name: "x0",
                value: c.x0,
                requirement: "positive",
            });
        }
        if measure == Measure::Myopic && self.deflator.is_none() {
            return Err(Error::InvalidConfig("the myopic measure needs a deflator".into()));
        }
        Ok(())
    }

    pub fn simulate(&self, measure: Measure) -> Result<SimOutput> {
        self.check(measure)?;
        let run = |i: usize| self.run_path(i as u64, measure, self.config.n_steps, 1, None);
        #[cfg(feature = "parallel")]
        let paths: Vec<PathTerminal> = {
            use rayon::prelude::*;
            (0..self.config.n_paths).into_par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let paths: Vec<PathTerminal> = (0..self.config.n_paths).map(run).collect();
        for (i, p) in paths.iter().enumerate() {
            let finite = p.y_t.is_finite() && p.log_z.is_finite() && p.log_density.is_finite();
            if !finite || p.log_x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample(i as u64));
            }
        }
        Ok(SimOutput {
            paths,
            config: self.config,
            measure,
        })
    }

    /// Full trajectories of the given paths; identical to the same indices of [`Self::simulate`].
    pub fn record(&self, measure: Measure, indices: &[u64]) -> Result<Vec<PathBundle>> {
        self.check(measure)?;
        Ok(indices
            .iter()
            .map(|&i| {
                let mut b = PathBundle {
                    times: Vec::new(),
                    y: Vec::new(),
                    x: Vec::new(),
                    z: Vec::new(),
                    measure,
                };
                self.run_path(i, measure, self.config.n_steps, 1, Some(&mut b));
                b
            })
            .collect())
    }

    /// Reruns `pilot_paths` paths at the configured step and at half of it,
    /// driven by the same Brownian increments, and reports the shift of
    /// `functional`. Fails with [`Error::StepTooCoarse`] when the shift
    /// exceeds the coarse estimate's standard error.
    pub fn step_diagnostic<F>(&self, measure: Measure, pilot_paths: usize, functional: F) -> Result<StepDiagnostic>
    where
        F: Fn(&PathTerminal) -> f64 + Sync,
    {
        self.check(measure)?;
        let n = self.config.n_steps;
        let pair = |i: usize| {
            (
                self.run_path(i as u64, measure, n, 2, None),
                self.run_path(i as u64, measure, 2 * n, 1, None),
            )
        };
        #[cfg(feature = "parallel")]
        let runs: Vec<(PathTerminal, PathTerminal)> = {
            use rayon::prelude::*;
            (0..pilot_paths).into_par_iter().map(pair).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let runs: Vec<(PathTerminal, PathTerminal)> = (0..pilot_paths).map(pair).collect();
        let seed = self.config.seed;
        let coarse = mc_expect(&runs, |r| functional(&r.0), seed)?;
        let fine = mc_expect(&runs, |r| functional(&r.1), seed)?;
        let shift = fine.mean - coarse.mean;
        let diag = StepDiagnostic { coarse, fine, shift };
        if shift.abs() > coarse.std_error {
            return Err(Error::StepTooCoarse {
                shift,
                se: coarse.std_error,
            });
        }
        Ok(diag)
    }

    /// One path with `n_steps` steps; each step's Gaussian increment is the
    /// normalized sum of `refine` finer draws, which couples a run with
    /// `(n, 2)` to one with `(2n, 1)`.
    fn run_path(
        &self,
        index: u64,
        measure: Measure,
        n_steps: usize,
        refine: usize,
        mut record: Option<&mut PathBundle>,
    ) -> PathTerminal {
        let cfg = &self.config;
        let mut rng = RngSpec::new(cfg.seed).path_rng(measure.purpose(), index);
        let m = &self.market;
        let r = m.rate();
        let rho = m.correlation();
        let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();
        let dt = cfg.horizon / n_steps as f64;
        let sqdt = dt.sqrt();
        let norm = 1.0 / (refine as f64).sqrt();
        let gamma = self.deflator.map(|d| d.gamma).unwrap_or(1.0);
        let under_myopic = measure == Measure::Myopic;

        let mut y = cfg.y0;
        let mut log_x = vec![cfg.x0.ln(); self.policies.len()];
        let mut log_z = 0.0;
        let mut log_density = 0.0;

        let push = |rec: &mut Option<&mut PathBundle>, t: f64, y: f64, lx: f64, lz: f64| {
            if let Some(b) = rec.as_deref_mut() {
                b.times.push(t);
                b.y.push(y);
                b.x.push(lx.exp());
                b.z.push(lz.exp());
            }
        };
        push(
            &mut record,
            0.0,
            y,
            log_x.first().copied().unwrap_or(cfg.x0.ln()),
            log_z,
        );

        for step in 0..n_steps {
            let t = step as f64 * dt;
            let ye = m.effective(y);
            let (mut z1, mut z2) = (0.0, 0.0);
            for _ in 0..refine {
                z1 += rng.sample::<f64, _>(StandardNormal);
                z2 += rng.sample::<f64, _>(StandardNormal);
            }
            let dw_hat = z1 * norm * sqdt;
            let dwy_hat = rho * dw_hat + rho_bar * z2 * norm * sqdt;

            let (zy, zw) = self.deflator.map(|d| d.zeta(ye)).unwrap_or((0.0, 0.0));
            let (py, pw) = (zy, (1.0 - 1.0 / gamma) * zw);
            let (dw, dwy) = if under_myopic {
                (dw_hat + (pw + rho * py) * dt, dwy_hat + (py + rho * pw) * dt)
            } else {
                (dw_hat, dwy_hat)
            };

            let mu = m.excess_return(ye);
            let sig = m.volatility(ye);
            for (lx, pol) in log_x.iter_mut().zip(&self.policies) {
                let pi = pol.weight(t, ye);
                *lx += (r + pi * mu - 0.5 * pi * pi * sig * sig) * dt + pi * sig * dw;
            }
            log_z += -r * dt + zy * dwy + zw * dw - 0.5 * (zy * zy + 2.0 * rho * zy * zw + zw * zw) * dt;
            log_density += py * dwy + pw * dw - 0.5 * (py * py + 2.0 * rho * py * pw + pw * pw) * dt;
            y += m.factor_drift(ye) * dt + m.factor_vol(ye) * dwy;

            let t_next = if step + 1 == n_steps { cfg.horizon } else { t + dt };
            push(
                &mut record,
                t_next,
                y,
                log_x.first().copied().unwrap_or(cfg.x0.ln()),
                log_z,
            );
        }

        let log_z_def = match (self.deflator, self.candidate) {
            (Some(d), Some(k)) => -d.gamma * (log_x[k] - cfg.x0.ln()) - d.a_inf * cfg.horizon - d.q(y) + d.q(cfg.y0),
            _ => f64::NAN,
        };
        PathTerminal {
            y_t: y,
            log_x,
            log_z,
            log_z_def,
            log_density,
        }
    }
}

/// Terminal factor values drawn from the exact transition law.
pub fn sample_terminal_exact(
    dynamics: ExactDynamics,
    y0: f64,
    horizon: f64,
    n_paths: usize,
    rng: RngSpec,
    purpose: Purpose,
) -> Vec<f64> {
    use crate::sim::samplers::{sample_cir_exact, sample_ou_exact};
    let draw = |i: usize| {
        let mut g = rng.path_rng(purpose, i as u64);
        match dynamics {
            ExactDynamics::Cir(d) => sample_cir_exact(y0, horizon, &d, &mut g),
            ExactDynamics::Ou(d) => sample_ou_exact(y0, horizon, &d, &mut g),
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_paths).into_par_iter().map(draw).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_paths).map(draw).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactDynamics {
    Cir(crate::sim::samplers::CirDynamics),
    Ou(crate::sim::samplers::OuDynamics),
}

/// Partitioned Novikov diagnostic: the density's integrand has squared norm
/// at most `alpha`-proportional to `Y` (CIR) or `Y^2` (OU); Novikov then holds
/// on pieces shorter than `lambda_y / (alpha sigma_y^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovikovReport {
    pub alpha: f64,
    pub max_piece: f64,
    pub pieces_needed: u64,
    /// Whether the simulation step is itself an admissible partition.
    pub grid_admits: bool,
}

pub fn novikov_partition(market: &Market, deflator: &Deflator, config: &SimConfig) -> NovikovReport {
    let rho = market.correlation();
    // squared norm of (psi_Y, psi_W) including the correlation cross term
    let sq = |y: f64| {
        let (py, pw) = deflator.psi(y);
        py * py + 2.0 * rho * py * pw + pw * pw
    };
    let (alpha, lambda, sigma_y) = match market {
        Market::BlackScholes(_) => (0.0, 1.0, 0.0),
        Market::Heston(p) => (0.5 * sq(1.0), p.lambda_y, p.sigma_y),
        Market::Ko(p) => {
            // (a+b)^2 <= 2(a^2+b^2) doubles the y^2 coefficient, Novikov halves it
            let lead = (sq(2.0) - 2.0 * sq(1.0) + sq(0.0)) / 2.0;
            (lead.max(0.0), p.lambda_y, p.sigma_y)
        }
    };
    let max_piece = if alpha * sigma_y == 0.0 {
        f64::INFINITY
    } else {
        lambda / (alpha * sigma_y * sigma_y)
    };
    NovikovReport {
        alpha,
        max_piece,
        pieces_needed: if max_piece.is_finite() {
            (config.horizon / max_piece).floor() as u64 + 1
        } else {
            1
        },
        grid_admits: config.dt() < max_piece,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::long_run::{heston_longrun, ko_longrun};

    fn prefs(g: f64) -> Preferences {
        Preferences::new(g).unwrap()
    }

    #[test]
    fn generic_girsanov_reproduces_closed_form_myopic_dynamics() {
        let p = HestonParams::pan();
        let lr = heston_longrun(&p, &prefs(5.0)).unwrap();
        let (level, rev) = myopic_factor_drift(&Market::Heston(p), &Deflator::heston(&lr));
        assert!((level - p.lambda_y * p.y_bar).abs() < 1e-12);
        assert!((rev - lr.lambda_phat).abs() < 1e-12);

        let k = KimOmbergParams::barberis();
        let kl = ko_longrun(&k, &prefs(5.0)).unwrap();
        let (level, rev) = myopic_factor_drift(&Market::Ko(k), &Deflator::ko(&kl));
        assert!((level - kl.l_phat).abs() < 1e-12 * kl.l_phat.abs().max(1e-3));
        assert!((rev - kl.k_phat).abs() < 1e-12);
    }

    #[test]
    fn all_cash_is_riskless() {
        let bs = BlackScholesParams::new(0.03, 0.08, 0.2).unwrap();
        let mut cfg = SimConfig::new(2.0, 0.0, 9);
        cfg.n_paths = 200;
        let sim = Simulation::new(Market::BlackScholes(bs), cfg).with_policy(PolicySpec::Constant(0.0));
        let out = sim.simulate(Measure::Physical).unwrap();
        let e = out.expect(|p| p.log_x[0]).unwrap();
        assert!((e.mean - 0.06).abs() < 1e-12);
        assert!(e.std_error < 1e-15);
    }

    #[test]
    fn recorded_paths_match_terminal_values() {
        let p = HestonParams::pan();
        let lr = heston_longrun(&p, &prefs(5.0)).unwrap();
        let mut cfg = SimConfig::new(0.5, p.y_bar, 4);
        cfg.n_paths = 8;
        let sim = Simulation::new(Market::Heston(p), cfg)
            .with_deflator(Deflator::heston(&lr))
            .with_candidate(PolicySpec::heston_longrun(&lr));
        let out = sim.simulate(Measure::Physical).unwrap();
        let rec = sim.record(Measure::Physical, &[3]).unwrap();
        let b = &rec[0];
        assert_eq!(b.times.len(), cfg.n_steps + 1);
        assert_eq!(*b.y.last().unwrap(), out.paths[3].y_t);
        assert!((b.x.last().unwrap().ln() - out.paths[3].log_x[0]).abs() < 1e-12);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y,x,z\n"));
        assert_eq!(text.lines().count(), cfg.n_steps + 2);
    }

    #[test]
    fn myopic_measure_requires_deflator() {
        let sim = Simulation::new(Market::Heston(HestonParams::pan()), SimConfig::new(1.0, 0.02, 0));
        assert!(sim.simulate(Measure::Myopic).is_err());
    }

    #[test]
    fn novikov_pieces_cover_horizon() {
        let p = HestonParams::pan();
        let lr = heston_longrun(&p, &prefs(5.0)).unwrap();
        let cfg = SimConfig::new(10.0, p.y_bar, 0);
        let rep = novikov_partition(&Market::Heston(p), &Deflator::heston(&lr), &cfg);
        assert!(rep.alpha > 0.0);
        assert!(rep.pieces_needed as f64 * rep.max_piece > cfg.horizon);
        assert!(rep.grid_admits);
    }
}

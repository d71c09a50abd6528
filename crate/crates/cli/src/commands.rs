//! Subcommand implementations. Each returns the text summary it printed so
//! tests can inspect it.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::Path;
use std::sync::Arc;

use stochopt::closed_form::{solve_bs, solve_heston, solve_ko};
use stochopt::csv::Table;
use stochopt::long_run::{expand_heston, expand_ko, heston_longrun, ko_longrun, ExpansionPair};
use stochopt::sim::{novikov_partition, Deflator, Market, Measure, PolicySpec, Simulation};
use stochopt::verify::{
    growth_rate_scan, summarize, verify_bs, verify_bs_mc, verify_finite_bounds, write_reports_csv, BoundReport,
    LongRunSetup, Verdict,
};
use stochopt::{Error, HestonParams, KimOmbergParams, Preferences};
use thiserror::Error as ThisError;

use crate::config::{ModelKind, Preset, ResolvedModel, RunConfig};

/// Rows in solve and policy-figure tables.
const CURVE_POINTS: usize = 200;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0} bound check(s) violated")]
    Violation(usize),
}

impl CliError {
    /// 2 validation, 3 verification violation, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_validation() => 2,
            CliError::Model(_) => 4,
            CliError::Io(_) => 2,
            CliError::Violation(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn write_table(table: &Table, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => table.write(BufWriter::new(File::create(path)?))?,
        None => match table.write(io::stdout().lock()) {
            // a closed pipe (e.g. `| head`) is not a failure
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn grid(horizon: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| if i == n { horizon } else { horizon * i as f64 / n as f64 })
}

pub fn solve(c: &RunConfig) -> CliResult<String> {
    let prefs = c.preferences()?;
    let horizon = c.horizon()?;
    let model = c.resolve()?;
    let y0 = c.y0(&model);
    let (table, summary) = match model {
        ResolvedModel::BlackScholes(p) => {
            let s = solve_bs(&p, &prefs, horizon)?;
            let mut t = Table::new(["t", "pi"]);
            for x in grid(horizon, CURVE_POINTS) {
                t.push(vec![x, s.pi_hat]);
            }
            (t, format!("pi = {:.10}\nesr = {:.10}\n", s.pi_hat, s.esr))
        }
        ResolvedModel::Heston(p) => {
            let s = solve_heston(&p, &prefs, horizon)?;
            let mut t = Table::new(["t", "B", "A", "pi"]);
            for x in grid(horizon, CURVE_POINTS) {
                t.push(vec![x, s.b(x), s.a(x), s.portfolio(x)?]);
            }
            let summary = format!(
                "B(0) = {:.10}\nA(0) = {:.10}\nmyopic = {:.10}\npi(0) = {:.10}\npi(T) = {:.10}\nesr(y0 = {y0}) = {:.10}\n",
                s.b(0.0),
                s.a(0.0),
                s.myopic(),
                s.portfolio(0.0)?,
                s.portfolio(horizon)?,
                s.esr(y0)
            );
            (t, summary)
        }
        ResolvedModel::Ko(p) => {
            let s = solve_ko(&p, &prefs, horizon)?;
            let mut t = Table::new(["t", "C", "B", "A", "pi"]);
            for x in grid(horizon, CURVE_POINTS) {
                t.push(vec![x, s.c(x), s.b(x), s.a(x), s.portfolio(x, y0)?]);
            }
            let summary = format!(
                "C(0) = {:.10}\nB(0) = {:.10}\nA(0) = {:.10}\nmyopic(y0) = {:.10}\nhedging(0, y0) = {:.10}\npi(0, y0) = {:.10}\nesr(y0 = {y0}) = {:.10}\ngrid error estimate = {:.2e}\n",
                s.c(0.0),
                s.b(0.0),
                s.a(0.0),
                s.myopic(y0),
                s.hedging(0.0, y0)?,
                s.portfolio(0.0, y0)?,
                s.esr(y0),
                s.error_estimate
            );
            (t, summary)
        }
    };
    print!("{summary}");
    if let Some(out) = &c.out {
        write_table(&table, Some(out))?;
    }
    Ok(summary)
}

pub fn longrun(c: &RunConfig) -> CliResult<String> {
    let prefs = c.preferences()?;
    let model = c.resolve()?;
    let y0 = c.y0(&model);
    let flags = |d: bool, t: bool, b: bool| {
        format!(
            "discriminant positive = {d}\noptimality condition = {t}\nbound condition = {b}\nverified = {}\n",
            d && t && b
        )
    };
    let (table, summary) = match model {
        ResolvedModel::BlackScholes(p) => {
            let s = solve_bs(&p, &prefs, 1.0)?;
            let mut t = Table::new(["pi_inf", "esr"]);
            t.push(vec![s.pi_hat, s.esr]);
            (t, format!("pi_inf = {:.10}\nesr = {:.10}\n", s.pi_hat, s.esr))
        }
        ResolvedModel::Heston(p) => {
            let lr = heston_longrun(&p, &prefs)?;
            let mut t = Table::new(["B_inf", "A_inf", "esr", "pi_inf", "verified"]);
            t.push(vec![
                lr.b_inf,
                lr.a_inf,
                lr.esr,
                lr.pi_inf,
                f64::from(u8::from(lr.verified())),
            ]);
            let s = format!(
                "B_inf = {:.10}\nA_inf = {:.10}\nesr = {:.10}\npi_inf = {:.10}\nmyopic = {:.10}\nhedging = {:.10}\nmyopic-measure reversion = {:.10}\n{}",
                lr.b_inf,
                lr.a_inf,
                lr.esr,
                lr.pi_inf,
                lr.myopic(),
                lr.hedging() + 0.0,
                lr.lambda_phat,
                flags(lr.cond_discriminant, lr.cond_theorem, lr.cond_bound)
            );
            (t, s)
        }
        ResolvedModel::Ko(p) => {
            let lr = ko_longrun(&p, &prefs)?;
            let (a, b) = lr.pi_inf_affine();
            let mut t = Table::new(["C_inf", "B_inf", "A_inf", "esr", "pi_intercept", "pi_slope", "verified"]);
            t.push(vec![
                lr.c_inf,
                lr.b_inf,
                lr.a_inf,
                lr.esr,
                a,
                b,
                f64::from(u8::from(lr.verified())),
            ]);
            let s = format!(
                "C_inf = {:.10}\nB_inf = {:.10}\nA_inf = {:.10}\nesr = {:.10}\npi_inf(y) = {a:.10} + {b:.10} y\npi_inf(y0 = {y0}) = {:.10}\n{}",
                lr.c_inf,
                lr.b_inf,
                lr.a_inf,
                lr.esr,
                lr.pi_inf(y0),
                flags(lr.cond_discriminant, lr.cond_theorem, lr.cond_bound)
            );
            (t, s)
        }
    };
    print!("{summary}");
    if let Some(out) = &c.out {
        write_table(&table, Some(out))?;
    }
    Ok(summary)
}

/// Noise levels as fractions of the configured `sigma_y`.
const EXPANSION_FRACTIONS: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

pub fn expand(c: &RunConfig) -> CliResult<String> {
    let prefs = c.preferences()?;
    let model = c.resolve()?;
    let mut table = Table::new([
        "sigma_y",
        "esr_zeroth",
        "esr_first_order",
        "esr_exact",
        "esr_remainder",
        "pi_zeroth",
        "pi_first_order",
        "pi_exact",
        "pi_remainder",
    ]);
    let row = |pair: &ExpansionPair, s: f64, esr: f64, pi: f64| {
        let e1 = pair.esr.eval(s);
        let p1 = pair.portfolio.eval(s);
        vec![
            s,
            pair.esr.zeroth,
            e1,
            esr,
            esr - e1,
            pair.portfolio.zeroth,
            p1,
            pi,
            pi - p1,
        ]
    };
    let base = match model {
        ResolvedModel::BlackScholes(_) => {
            return Err(Error::InvalidConfig("expansions need a stochastic factor (heston or ko)".into()).into())
        }
        ResolvedModel::Heston(p) => {
            for f in EXPANSION_FRACTIONS {
                let q = HestonParams {
                    sigma_y: f * p.sigma_y,
                    ..p
                };
                let lr = heston_longrun(&q, &prefs)?;
                table.push(row(&expand_heston(&q, &prefs), q.sigma_y, lr.esr, lr.pi_inf));
            }
            expand_heston(&p, &prefs)
        }
        ResolvedModel::Ko(p) => {
            for f in EXPANSION_FRACTIONS {
                let q = KimOmbergParams {
                    sigma_y: f * p.sigma_y,
                    ..p
                };
                let lr = ko_longrun(&q, &prefs)?;
                table.push(row(&expand_ko(&q, &prefs), q.sigma_y, lr.esr, lr.pi_inf(q.y_bar)));
            }
            expand_ko(&p, &prefs)
        }
    };
    let mut summary = String::from("sigma_y            esr exact          first order        remainder\n");
    for r in &table.rows {
        summary.push_str(&format!(
            "{:<18.6e} {:<18.10e} {:<18.10e} {:.3e}\n",
            r[0], r[3], r[2], r[4]
        ));
    }
    let e = base.esr_relative_correction();
    let p = base.portfolio_relative_correction();
    summary.push_str(&format!(
        "relative first-order correction: esr {e:.6e}, portfolio {p:.6e}, ratio {:.12}\n",
        e / p
    ));
    print!("{summary}");
    if let Some(out) = &c.out {
        write_table(&table, Some(out))?;
    }
    Ok(summary)
}

fn setup(model: &ResolvedModel, prefs: &Preferences) -> stochopt::Result<Option<LongRunSetup>> {
    match model {
        ResolvedModel::BlackScholes(_) => Ok(None),
        ResolvedModel::Heston(p) => LongRunSetup::heston(p, prefs).map(Some),
        ResolvedModel::Ko(p) => LongRunSetup::ko(p, prefs).map(Some),
    }
}

pub fn verify(c: &RunConfig) -> CliResult<String> {
    let prefs = c.preferences()?;
    let horizon = c.horizon()?;
    let model = c.resolve()?;
    let y0 = c.y0(&model);
    let config = c.sim_config(horizon, y0)?;
    let mut summary = String::new();
    let (reports, violations): (Vec<BoundReport>, usize) = match (&model, setup(&model, &prefs)?) {
        (ResolvedModel::BlackScholes(p), _) => {
            let r = vec![
                verify_bs(p, &prefs, horizon, config.x0)?,
                verify_bs_mc(p, &prefs, config)?,
            ];
            let v = r.iter().filter(|r| r.verdict == Verdict::Violated).count();
            (r, v)
        }
        (_, Some(s)) => {
            let f = verify_finite_bounds(&s, config)?;
            let nov = novikov_partition(&s.market, &s.deflator, &config);
            summary.push_str(&format!(
                "long-run optimality conditions verified = {}\nmax |log Z - closed-form log Z| = {:.3e}\nnovikov: pieces shorter than {:.4e} needed ({} over the horizon), simulation grid admits = {}\n",
                f.optimality_verified, f.deflator_form_gap, nov.max_piece, nov.pieces_needed, nov.grid_admits
            ));
            let v = usize::from(f.any_violation());
            (f.all(), v)
        }
        _ => unreachable!(),
    };
    summary.push_str(&summarize(&reports));
    print!("{summary}");
    if let Some(out) = &c.out {
        write_reports_csv(&reports, BufWriter::new(File::create(out)?))?;
    }
    if violations > 0 {
        return Err(CliError::Violation(violations));
    }
    Ok(summary)
}

/// Horizons for the growth-rate figures: yearly steps up to 30 years, or
/// 12-month steps up to 50 years, unless a horizon caps the range.
fn scan_horizons(preset: Preset, cap: Option<f64>) -> Vec<f64> {
    let (step, max) = match preset {
        Preset::Pan => (1.0, cap.unwrap_or(30.0)),
        Preset::Barberis => (12.0, cap.unwrap_or(600.0)),
    };
    let n = (max / step).floor() as usize;
    (1..=n).map(|i| step * i as f64).collect()
}

pub fn figure(which: u8, c: &RunConfig) -> CliResult<String> {
    let mut c = c.clone();
    let (model, preset) = match which {
        1 | 3 => (ModelKind::Heston, Preset::Pan),
        2 | 4 => (ModelKind::Ko, Preset::Barberis),
        _ => return Err(Error::InvalidConfig(format!("figure {which} does not exist (expected 1-4)")).into()),
    };
    c.model = model;
    c.preset = Some(preset);
    let prefs = c.preferences()?;
    let resolved = c.resolve()?;
    let y0 = c.y0(&resolved);
    let table = match (which, resolved) {
        (1, ResolvedModel::Heston(p)) => {
            let horizon = c.horizon()?;
            let s = solve_heston(&p, &prefs, horizon)?;
            let lr = heston_longrun(&p, &prefs)?;
            let bs = solve_bs(&p.matched_black_scholes(), &prefs, horizon)?;
            let mut t = Table::new(["t", "pi_finite", "pi_longrun", "pi_black_scholes"]);
            for x in grid(horizon, CURVE_POINTS) {
                t.push(vec![x, s.portfolio(x)?, lr.pi_inf, bs.pi_hat]);
            }
            t
        }
        (2, ResolvedModel::Ko(p)) => {
            let horizon = c.horizon()?;
            let s = solve_ko(&p, &prefs, horizon)?;
            let lr = ko_longrun(&p, &prefs)?;
            let bs = solve_bs(&p.matched_black_scholes(), &prefs, horizon)?;
            let mut t = Table::new(["t", "pi_finite", "pi_longrun", "pi_black_scholes"]);
            for x in grid(horizon, CURVE_POINTS) {
                t.push(vec![x, s.portfolio(x, y0)?, lr.pi_inf(y0), bs.pi_hat]);
            }
            t
        }
        (_, m) => {
            let s = setup(&m, &prefs)?.expect("figures 3 and 4 use factor models");
            let horizons = scan_horizons(preset, c.horizon);
            let full = growth_rate_scan(&s, &prefs, &horizons, y0, c.paths, c.seed)?;
            let keep = [
                "T",
                "esr_finite",
                "esr_longrun_policy",
                "esr_black_scholes",
                "esr_limit",
            ];
            let mut t = Table::new(keep);
            let idx: Vec<usize> = keep
                .iter()
                .map(|k| full.header.iter().position(|h| h == k).unwrap())
                .collect();
            for r in &full.rows {
                t.push(idx.iter().map(|&i| r[i]).collect());
            }
            t
        }
    };
    write_table(&table, c.out.as_deref())?;
    Ok(format!("figure {which}: {} rows\n", table.rows.len()))
}

pub fn simulate(c: &RunConfig, record: usize, check_steps: bool) -> CliResult<String> {
    let prefs = c.preferences()?;
    let horizon = c.horizon()?;
    let model = c.resolve()?;
    let y0 = c.y0(&model);
    let config = c.sim_config(horizon, y0)?;
    let g = prefs.gamma();
    let (market, deflator, policy) = match model {
        ResolvedModel::BlackScholes(p) => {
            let s = solve_bs(&p, &prefs, horizon)?;
            (
                Market::BlackScholes(p),
                Deflator::black_scholes(&p, &prefs),
                PolicySpec::Constant(s.pi_hat),
            )
        }
        ResolvedModel::Heston(p) => {
            let lr = heston_longrun(&p, &prefs)?;
            let s = solve_heston(&p, &prefs, horizon)?;
            (Market::Heston(p), Deflator::heston(&lr), PolicySpec::HestonFinite(s))
        }
        ResolvedModel::Ko(p) => {
            let lr = ko_longrun(&p, &prefs)?;
            let s = solve_ko(&p, &prefs, horizon)?;
            (Market::Ko(p), Deflator::ko(&lr), PolicySpec::KoFinite(Arc::new(s)))
        }
    };
    let sim = Simulation::new(market, config)
        .with_deflator(deflator)
        .with_policy(policy);
    let u = 1.0 - g;
    let mut summary = String::new();
    if check_steps {
        let d = sim.step_diagnostic(Measure::Physical, (config.n_paths / 10).max(1000), |t| {
            (u * t.log_x[0]).exp()
        })?;
        summary.push_str(&format!(
            "step check: halving dt moved the estimate by {:.3e}\n",
            d.shift
        ));
    }
    let out = sim.simulate(Measure::Physical)?;
    let util = out.expect(|t| (u * t.log_x[0]).exp())?;
    let (log_u, log_se) = util.ln();
    let y_t = out.expect(|t| t.y_t)?;
    let xz = out.expect(|t| (t.log_x[0] + t.log_z).exp())?;
    summary.push_str(&format!(
        "paths = {}, steps = {}, seed = {}\nE[X_T^(1-gamma)] = {:.10e} (se {:.3e})\nimplied esr = {:.10} (se {:.3e})\nE[Y_T] = {:.10e} (se {:.3e})\nE[X_T Z_T] = {:.10} (se {:.3e})\n",
        config.n_paths,
        config.n_steps,
        config.seed,
        util.mean,
        util.std_error,
        log_u / (u * horizon),
        log_se / (u * horizon).abs(),
        y_t.mean,
        y_t.std_error,
        xz.mean,
        xz.std_error
    ));
    if record > 0 {
        let dir = c
            .out
            .clone()
            .ok_or_else(|| Error::InvalidConfig("--record needs --out naming a directory".into()))?;
        fs::create_dir_all(&dir)?;
        let indices: Vec<u64> = (0..record as u64).collect();
        for (i, bundle) in sim.record(Measure::Physical, &indices)?.iter().enumerate() {
            bundle.write_csv(BufWriter::new(File::create(dir.join(format!("path_{i:04}.csv")))?))?;
        }
        summary.push_str(&format!("recorded {record} paths in {}\n", dir.display()));
    }
    print!("{summary}");
    Ok(summary)
}

//! WebAssembly bindings for the browser demo. Every export returns a flat
//! row-major `Float64Array`; the column layout is documented per function.
//!
//! Parameters arrive as `[r, mu_s or sigma, lambda_y, y_bar, sigma_y, rho]`,
//! the second entry being `mu_s` for `heston` and `sigma` for `ko`.

use stochopt::closed_form::{solve_bs, solve_heston, solve_ko};
use stochopt::long_run::{heston_longrun, ko_longrun};
use stochopt::verify::{growth_rate_scan, LongRunSetup};
use stochopt::{HestonParams, KimOmbergParams, Preferences, Result};
use wasm_bindgen::prelude::*;

enum Model {
    Heston(HestonParams),
    Ko(KimOmbergParams),
}

fn model(kind: &str, p: &[f64]) -> std::result::Result<Model, String> {
    let [r, second, lambda_y, y_bar, sigma_y, rho] = p else {
        return Err(format!("expected 6 parameters, got {}", p.len()));
    };
    let m = match kind {
        "heston" => HestonParams::new(*r, *second, *lambda_y, *y_bar, *sigma_y, *rho).map(Model::Heston),
        "ko" => KimOmbergParams::new(*r, *second, *lambda_y, *y_bar, *sigma_y, *rho).map(Model::Ko),
        _ => return Err(format!("unknown model `{kind}`")),
    };
    m.map_err(|e| e.to_string())
}

fn prefs(gamma: f64) -> std::result::Result<Preferences, String> {
    Preferences::new(gamma).map_err(|e| e.to_string())
}

fn text<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Rows `[t, pi_finite, pi_longrun, pi_black_scholes]` on `points + 1`
/// equally spaced times; `y` is the factor level for `ko`.
pub fn policy_rows(
    kind: &str,
    params: &[f64],
    gamma: f64,
    horizon: f64,
    y: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, String> {
    let pr = prefs(gamma)?;
    let points = points.max(1);
    let times = (0..=points).map(|i| horizon * i as f64 / points as f64);
    let mut out = Vec::with_capacity(4 * (points + 1));
    match model(kind, params)? {
        Model::Heston(p) => {
            let s = text(solve_heston(&p, &pr, horizon))?;
            let lr = text(heston_longrun(&p, &pr))?;
            let bs = text(solve_bs(&p.matched_black_scholes(), &pr, horizon))?;
            for t in times {
                out.extend([t, text(s.portfolio(t.min(horizon)))?, lr.pi_inf, bs.pi_hat]);
            }
        }
        Model::Ko(p) => {
            let s = text(solve_ko(&p, &pr, horizon))?;
            let lr = text(ko_longrun(&p, &pr))?;
            let bs = text(solve_bs(&p.matched_black_scholes(), &pr, horizon))?;
            for t in times {
                out.extend([t, text(s.portfolio(t.min(horizon), y))?, lr.pi_inf(y), bs.pi_hat]);
            }
        }
    }
    Ok(out)
}

/// Rows `[T, esr_finite, esr_longrun_policy, esr_black_scholes, esr_limit]`
/// for `steps` horizons up to `max_horizon`.
pub fn esr_rows(
    kind: &str,
    params: &[f64],
    gamma: f64,
    max_horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, String> {
    let pr = prefs(gamma)?;
    let (setup, y0) = match model(kind, params)? {
        Model::Heston(p) => (text(LongRunSetup::heston(&p, &pr))?, p.y_bar),
        Model::Ko(p) => (text(LongRunSetup::ko(&p, &pr))?, p.y_bar),
    };
    let steps = steps.max(1);
    let horizons: Vec<f64> = (1..=steps).map(|i| max_horizon * i as f64 / steps as f64).collect();
    let table = text(growth_rate_scan(&setup, &pr, &horizons, y0, paths.max(2), seed))?;
    let keep = [
        "T",
        "esr_finite",
        "esr_longrun_policy",
        "esr_black_scholes",
        "esr_limit",
    ];
    let idx: Vec<usize> = keep
        .iter()
        .map(|k| table.header.iter().position(|h| h == k).unwrap())
        .collect();
    Ok(table.rows.iter().flat_map(|r| idx.iter().map(|&i| r[i])).collect())
}

/// `[B_inf, C_inf, A_inf, esr, hedge_ratio_at_y_bar, verified]`, with
/// `C_inf = 0` for `heston` and `verified` as 0/1.
pub fn longrun_row(kind: &str, params: &[f64], gamma: f64) -> std::result::Result<Vec<f64>, String> {
    let pr = prefs(gamma)?;
    Ok(match model(kind, params)? {
        Model::Heston(p) => {
            let lr = text(heston_longrun(&p, &pr))?;
            vec![
                lr.b_inf,
                0.0,
                lr.a_inf,
                lr.esr,
                lr.hedging() / lr.myopic(),
                f64::from(u8::from(lr.verified())),
            ]
        }
        Model::Ko(p) => {
            let lr = text(ko_longrun(&p, &pr))?;
            let ratio = lr.hedging(p.y_bar) / lr.myopic(p.y_bar);
            vec![
                lr.b_inf,
                lr.c_inf,
                lr.a_inf,
                lr.esr,
                ratio,
                f64::from(u8::from(lr.verified())),
            ]
        }
    })
}

#[wasm_bindgen(js_name = policyCurve)]
pub fn policy_curve(
    kind: &str,
    params: &[f64],
    gamma: f64,
    horizon: f64,
    y: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    policy_rows(kind, params, gamma, horizon, y, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = esrCurve)]
pub fn esr_curve(
    kind: &str,
    params: &[f64],
    gamma: f64,
    max_horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    esr_rows(kind, params, gamma, max_horizon, steps, paths, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = longRun)]
pub fn long_run(kind: &str, params: &[f64], gamma: f64) -> std::result::Result<Vec<f64>, JsError> {
    longrun_row(kind, params, gamma).map_err(|e| JsError::new(&e))
}

//! Closed-form and semi-numeric coefficients against brute-force RK4.

mod common;

use common::oracle;
use stochopt::closed_form::{solve_heston, solve_ko};
use stochopt::ode::{HestonCoefficientOde, KoCoefficientOde};
use stochopt::{HestonParams, KimOmbergParams, Preferences};

const GAMMAS: [f64; 4] = [0.5, 2.0, 5.0, 10.0];

#[test]
fn heston_coefficients_match_rk4() {
    let p = HestonParams::pan();
    for g in GAMMAS {
        for horizon in [1.0, 10.0, 50.0] {
            let prefs = Preferences::new(g).unwrap();
            let sol = solve_heston(&p, &prefs, horizon).unwrap();
            let grid = oracle(&HestonCoefficientOde::new(&p, &prefs, horizon));
            let db = grid.sup_distance(0, |t| sol.b(t));
            let da = grid.sup_distance(1, |t| sol.a(t));
            assert!(db < 1e-8 && da < 1e-8, "gamma={g} T={horizon}: B {db:e} A {da:e}");
        }
    }
}

#[test]
fn ko_coefficients_match_rk4() {
    let p = KimOmbergParams::barberis();
    for g in GAMMAS {
        for horizon in [12.0, 240.0, 600.0] {
            // at 600 months |C| is in the thousands; compare relative to scale
            let tol = if horizon > 240.0 { 1e-8 * 2e4 } else { 1e-8 };
            let prefs = Preferences::new(g).unwrap();
            let sol = solve_ko(&p, &prefs, horizon).unwrap();
            let grid = oracle(&KoCoefficientOde::new(&p, &prefs, horizon));
            let dc = grid.sup_distance(0, |t| sol.c(t));
            let db = grid.sup_distance(1, |t| sol.b(t));
            let da = grid.sup_distance(2, |t| sol.a(t));
            assert!(
                dc < tol && db < 1e-8 && da < 1e-8,
                "gamma={g} T={horizon}: C {dc:e} B {db:e} A {da:e}"
            );
        }
    }
}

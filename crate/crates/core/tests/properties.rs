mod common;

use common::midpoints;
use proptest::prelude::*;
use stochopt::closed_form::{solve_heston, solve_ko};
use stochopt::long_run::{heston_longrun, ko_longrun};
use stochopt::ode::{hjb_residual, FdScales};
use stochopt::sim::{
    mc_expect, sample_terminal_exact, CirDynamics, ExactDynamics, Market, Measure, OuDynamics, PolicySpec, Purpose,
    RngSpec, SimConfig, Simulation,
};
use stochopt::{HestonParams, KimOmbergParams, Preferences};

fn prefs(g: f64) -> Preferences {
    Preferences::new(g).unwrap()
}

fn assert_moments(dynamics: ExactDynamics, y0: f64, dt: f64, mean: f64, var: f64) {
    let n = 1_000_000;
    let ys = sample_terminal_exact(dynamics, y0, dt, n, RngSpec::new(11), Purpose::Test);
    let m = mc_expect(&ys, |&y| y, 11).unwrap();
    assert!(
        (m.mean - mean).abs() < 4.0 * m.std_error,
        "mean {} vs {mean} (se {})",
        m.mean,
        m.std_error
    );
    let sq = mc_expect(&ys, |&y| (y - mean).powi(2), 11).unwrap();
    assert!(
        (sq.mean - var).abs() < 4.0 * sq.std_error,
        "variance {} vs {var} (se {})",
        sq.mean,
        sq.std_error
    );
}

#[test]
fn cir_sampler_moments() {
    let p = HestonParams::pan();
    let phys = CirDynamics::physical(&p);
    for dt in [0.01, 0.5, 5.0] {
        assert_moments(
            ExactDynamics::Cir(phys),
            p.y_bar,
            dt,
            phys.mean(p.y_bar, dt),
            phys.variance(p.y_bar, dt),
        );
    }
    let lr = heston_longrun(&p, &prefs(5.0)).unwrap();
    let my = CirDynamics::myopic(&lr);
    assert_moments(
        ExactDynamics::Cir(my),
        0.02,
        2.0,
        my.mean(0.02, 2.0),
        my.variance(0.02, 2.0),
    );
}

#[test]
fn ou_sampler_moments() {
    let p = KimOmbergParams::barberis();
    let phys = OuDynamics::physical(&p);
    for dt in [1.0, 24.0, 240.0] {
        assert_moments(ExactDynamics::Ou(phys), 0.0, dt, phys.mean(0.0, dt), phys.variance(dt));
    }
    let lr = ko_longrun(&p, &prefs(5.0)).unwrap();
    let my = OuDynamics::myopic(&lr);
    assert_moments(
        ExactDynamics::Ou(my),
        p.y_bar,
        60.0,
        my.mean(p.y_bar, 60.0),
        my.variance(60.0),
    );
}

#[test]
fn exact_samplers_reach_stationary_laws() {
    let p = KimOmbergParams::barberis();
    let phys = OuDynamics::physical(&p);
    let var = p.sigma_y * p.sigma_y / (2.0 * p.lambda_y);
    assert_moments(ExactDynamics::Ou(phys), -0.01, 5000.0, p.y_bar, var);
    let lr = heston_longrun(&HestonParams::pan(), &prefs(5.0)).unwrap();
    let law = lr.stationary_law().unwrap();
    let my = CirDynamics::myopic(&lr);
    assert_moments(ExactDynamics::Cir(my), 0.1, 200.0, law.mean(), law.variance());
}

/// Euler terminal factor against exact draws, 4 combined standard errors.
fn euler_matches_exact(market: Market, dynamics: ExactDynamics, y0: f64, horizon: f64, steps: usize) {
    let mut config = SimConfig::new(horizon, y0, 21);
    config.n_paths = 100_000;
    config.n_steps = steps;
    let euler = Simulation::new(market, config)
        .with_policy(PolicySpec::Constant(0.0))
        .simulate(Measure::Physical)
        .unwrap();
    let exact = sample_terminal_exact(dynamics, y0, horizon, 100_000, RngSpec::new(22), Purpose::ExactPhysical);
    let m = |f: &(dyn Fn(f64) -> f64 + Sync)| {
        let a = euler.expect(|t| f(t.y_t)).unwrap();
        let b = mc_expect(&exact, |&y| f(y), 22).unwrap();
        ((a.mean - b.mean).abs(), a.std_error.hypot(b.std_error))
    };
    let (gap, se) = m(&|y| y);
    assert!(gap < 4.0 * se, "mean gap {gap:e} se {se:e}");
    let (gap, se) = m(&|y| y * y);
    assert!(gap < 4.0 * se, "second moment gap {gap:e} se {se:e}");
}

#[test]
fn euler_factor_matches_exact_sampler() {
    let p = HestonParams::pan();
    euler_matches_exact(
        Market::Heston(p),
        ExactDynamics::Cir(CirDynamics::physical(&p)),
        p.y_bar,
        1.0,
        256,
    );
    let p = KimOmbergParams::barberis();
    euler_matches_exact(
        Market::Ko(p),
        ExactDynamics::Ou(OuDynamics::physical(&p)),
        0.0,
        24.0,
        24 * 16,
    );
}

#[test]
fn heston_factor_mean_is_stationary_under_p() {
    let p = HestonParams::pan();
    let mut config = SimConfig::new(2.0, p.y_bar, 31);
    config.n_paths = 100_000;
    let out = Simulation::new(Market::Heston(p), config)
        .with_policy(PolicySpec::Constant(0.0))
        .simulate(Measure::Physical)
        .unwrap();
    let m = out.expect(|t| t.y_t).unwrap();
    assert!(
        (m.mean - p.y_bar).abs() < 3.0 * m.std_error,
        "{} vs {}",
        m.mean,
        p.y_bar
    );
}

#[test]
fn hjb_detects_corrupted_coefficient() {
    let p = HestonParams::pan();
    let pr = prefs(5.0);
    let sol = solve_heston(&p, &pr, 10.0).unwrap();
    let points: Vec<(f64, f64)> = midpoints(0.0, 10.0, 10)
        .into_iter()
        .flat_map(|t| {
            midpoints(0.5 * p.y_bar, 2.0 * p.y_bar, 10)
                .into_iter()
                .map(move |y| (t, y))
        })
        .collect();
    let scales = FdScales { t: 10.0, y: p.y_bar };
    let good = hjb_residual(&p, &pr, |t, y| sol.value(t, y), &points, scales);
    let bad = hjb_residual(&p, &pr, |t, y| (sol.a(t) + 1.1 * sol.b(t) * y).exp(), &points, scales);
    assert!(good < 1e-6, "{good:e}");
    assert!(bad > 1e-3, "{bad:e}");
}

#[test]
fn ko_hjb_detects_corrupted_coefficient() {
    let p = KimOmbergParams::barberis();
    let pr = prefs(5.0);
    let sol = solve_ko(&p, &pr, 240.0).unwrap();
    let sd = p.sigma_y / (2.0 * p.lambda_y).sqrt();
    let points: Vec<(f64, f64)> = midpoints(0.0, 240.0, 10)
        .into_iter()
        .flat_map(|t| {
            midpoints(p.y_bar - 2.0 * sd, p.y_bar + 2.0 * sd, 10)
                .into_iter()
                .map(move |y| (t, y))
        })
        .collect();
    let scales = FdScales { t: 240.0, y: sd };
    let v0 = sol.value(0.0, p.y_bar);
    let good = hjb_residual(&p, &pr, |t, y| sol.value(t, y) / v0, &points, scales);
    let bad = hjb_residual(
        &p,
        &pr,
        |t, y| (sol.a(t) + 1.1 * sol.b(t) * y + 0.5 * sol.c(t) * y * y).exp() / v0,
        &points,
        scales,
    );
    assert!(good < 1e-6, "{good:e}");
    assert!(bad > 1e-3, "{bad:e}");
}

fn heston_strategy() -> impl Strategy<Value = HestonParams> {
    (
        0.0..0.05f64,
        0.5..5.0f64,
        1.0..10.0f64,
        0.01..0.06f64,
        0.1..0.95f64,
        -0.95..0.0f64,
    )
        .prop_map(|(r, mu, lambda, y_bar, frac, rho)| {
            HestonParams::new(r, mu, lambda, y_bar, frac * (2.0 * lambda * y_bar).sqrt(), rho).unwrap()
        })
}

fn ko_strategy() -> impl Strategy<Value = KimOmbergParams> {
    (
        0.0..0.004f64,
        0.02..0.08f64,
        0.005..0.1f64,
        0.001..0.01f64,
        1e-4..2e-3f64,
        -0.95..0.0f64,
    )
        .prop_map(|(r, s, l, y, sy, rho)| KimOmbergParams::new(r, s, l, y, sy, rho).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heston_b_lies_between_zero_and_long_run(p in heston_strategy(), g in 1.1..20.0f64, horizon in 0.5..40.0f64) {
        let pr = prefs(g);
        let sol = solve_heston(&p, &pr, horizon).unwrap();
        let lr = heston_longrun(&p, &pr).unwrap();
        let mut prev = 0.0;
        for t in midpoints(0.0, horizon, 16).into_iter().rev() {
            let b = sol.b(t);
            prop_assert!(b <= prev && b >= lr.b_inf - 1e-12);
            prev = b;
        }
    }

    #[test]
    fn heston_esr_decreases_with_risk_aversion(p in heston_strategy(), g in 1.1..10.0f64) {
        let lo = heston_longrun(&p, &prefs(g)).unwrap().esr;
        let hi = heston_longrun(&p, &prefs(g + 1.0)).unwrap().esr;
        prop_assert!(hi < lo);
        prop_assert!(hi > p.r);
    }

    #[test]
    fn finite_esr_approaches_long_run(p in heston_strategy(), g in 1.1..10.0f64) {
        let pr = prefs(g);
        let lr = heston_longrun(&p, &pr).unwrap();
        let near = (solve_heston(&p, &pr, 20.0).unwrap().esr(p.y_bar) - lr.esr).abs();
        let far = (solve_heston(&p, &pr, 200.0).unwrap().esr(p.y_bar) - lr.esr).abs();
        prop_assert!(far <= near + 1e-15);
    }

    #[test]
    fn ko_c_is_monotone_towards_long_run(p in ko_strategy(), g in 1.1..20.0f64, horizon in 12.0..360.0f64) {
        let pr = prefs(g);
        let sol = solve_ko(&p, &pr, horizon).unwrap();
        let lr = ko_longrun(&p, &pr).unwrap();
        let mut prev = 0.0;
        for t in midpoints(0.0, horizon, 16).into_iter().rev() {
            let c = sol.c(t);
            prop_assert!(c <= prev && c >= lr.c_inf * (1.0 + 1e-12));
            prev = c;
        }
    }

    #[test]
    fn longrun_portfolio_is_affine_in_factor(p in ko_strategy(), g in 0.3..20.0f64, y in -0.01..0.02f64) {
        prop_assume!((g - 1.0).abs() > 1e-3);
        let pr = prefs(g);
        if let Ok(lr) = ko_longrun(&p, &pr) {
            let (a, b) = lr.pi_inf_affine();
            prop_assert!((lr.pi_inf(y) - (a + b * y)).abs() <= 1e-10 * (1.0 + lr.pi_inf(y).abs()));
        }
    }
}

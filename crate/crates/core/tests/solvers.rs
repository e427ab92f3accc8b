use asianfb::solution::solve;
use asianfb::solver_newton::NewtonConfig;
use asianfb::{rho_initial, Engine, GridSpec, MarketParams, SchemeMode, Settings, SolverSettings};
use proptest::prelude::*;

#[test]
fn single_precision_tracks_double() {
    let p64 = MarketParams::reference();
    let g64 = GridSpec::for_params(&p64, 50, None, None, None).unwrap();
    let r64 = solve(&p64, &g64, Engine::Newton, &Settings::default()).unwrap();

    let p32 = asianfb::f32::MarketParams::reference();
    // 1e-7 is below the spacing of f32 numbers near T = 50
    assert!(asianfb::f32::GridSpec::for_params(&p32, 50, None, None, None).is_err());
    let g32 = asianfb::f32::GridSpec::for_params(&p32, 50, None, None, Some(1e-4)).unwrap();
    let settings = SolverSettings::<f32> {
        newton: NewtonConfig {
            tol: 1e-4,
            max_iter: 20,
        },
        ..Default::default()
    };
    let r32 = solve(&p32, &g32, Engine::Newton, &settings).unwrap();
    for tau in [10.0, 20.0, 40.0] {
        let a = r64.rho_at(tau);
        let b = r32.rho_at(tau as f32) as f64;
        assert!((a - b).abs() < 1e-3, "tau {tau}: {a} vs {b}");
    }
}

#[test]
fn newton_iteration_counts_stay_small() {
    let p = MarketParams::reference();
    let g = GridSpec::for_params(&p, 200, None, None, None).unwrap();
    let res = solve(&p, &g, Engine::Newton, &Settings::default()).unwrap();
    assert!(res.max_iterations() <= 8, "{}", res.max_iterations());
    assert!(res.diagnostics.iter().all(|d| d.dominance_violations == 0));
}

#[test]
fn boundary_ends_near_one() {
    let p = MarketParams::reference();
    let g = GridSpec::for_params(&p, 100, None, None, None).unwrap();
    for engine in [Engine::Newton, Engine::PredictorCorrector] {
        let res = solve(&p, &g, engine, &Settings::default()).unwrap();
        let last = res.layers.last().unwrap().z;
        assert!((last - 1.0).abs() < 1e-3, "{engine}: {last}");
    }
}

#[test]
fn upwind_always_stays_within_bounds_but_is_less_accurate() {
    let p = MarketParams::reference();
    let g = GridSpec::for_params(&p, 50, None, None, None).unwrap();
    let hybrid = solve(&p, &g, Engine::Newton, &Settings::default()).unwrap();
    let always = solve(&p, &g, Engine::Newton, &Settings::with_mode(SchemeMode::UpwindAlways)).unwrap();
    let (lo, hi) = always.value_range();
    assert!(lo >= -1.0 - 1e-12 && hi <= 1e-12);
    // the fine-grid reference value at tau = 20 is about 1.9978
    assert!((always.rho_at(20.0) - 1.9978).abs() > (hybrid.rho_at(20.0) - 1.9978).abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn newton_respects_bounds(
        r in 0.02f64..0.1,
        frac in 0.0f64..0.9,
        sigma in 0.1f64..0.4,
        t in 1.0f64..50.0,
    ) {
        let p = MarketParams::new(r, r * frac, sigma, t).unwrap();
        let g = GridSpec::for_params(&p, 24, None, None, None).unwrap();
        let res = solve(&p, &g, Engine::Newton, &Settings::default()).unwrap();
        prop_assert_eq!(res.layers[0].z, rho_initial(&p));
        let (lo, hi) = res.value_range();
        prop_assert!(lo >= -1.0 - 1e-12 && hi <= 1e-12, "{} {}", lo, hi);
        prop_assert!(res.layers.iter().all(|l| l.z >= 1.0 - 1e-6));
    }
}

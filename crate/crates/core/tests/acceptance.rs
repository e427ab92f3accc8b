//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;

use asianfb::analysis::{compare_engines, refinement_study};
use asianfb::scheme::StepContext;
use asianfb::solution::solve;
use asianfb::solver_newton::{layer_residual, newton_layer_observed, NewtonStep};
use asianfb::tridiag::solve_tridiagonal;
use asianfb::{initial_layer, Engine, GridSpec, LayerState, MarketParams, SchemeMode, Settings};
use common::{dense_solve, fd_jacobian, max_abs, Lcg};

// Tolerances.
const REFERENCE_TOL: f64 = 5e-3;
const CR_BAND: (f64, f64) = (0.9, 2.2);
const RESIDUAL_TOL: f64 = 1e-7;
const FD_STEP: f64 = 1e-6;
const JACOBIAN_REL_TOL: f64 = 1e-5;
const SCHUR_REL_TOL: f64 = 1e-10;
const THOMAS_REL_TOL: f64 = 1e-12;
const ENGINE_DIFF_TOL: f64 = 5e-2;
const MAX_PRINCIPLE_SLACK: f64 = 1e-12;

/// Reference `rho(tau = 20)` for N = 50, 100, 200, 400, 800.
const REFERENCE_RHO_20: [f64; 5] = [1.991675, 1.995525, 1.996945, 1.997515, 1.997765];

type Check = fn() -> Result<String, String>;

fn reference() -> (MarketParams, GridSpec) {
    let p = MarketParams::reference();
    let g = GridSpec::for_params(&p, 200, None, None, None).unwrap();
    (p, g)
}

fn table_regression() -> Result<String, String> {
    let p = MarketParams::reference();
    let report =
        refinement_study(&p, 50, 5, Engine::Newton, &Settings::default(), &[20.0], None).map_err(|e| e.to_string())?;
    let rho = report.rho_column(0);
    let worst = rho
        .iter()
        .zip(REFERENCE_RHO_20)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let detail = format!("rho(20) = {rho:.6?}, max |error| = {worst:.2e} (tol {REFERENCE_TOL:e})");
    if worst <= REFERENCE_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn convergence_order() -> Result<String, String> {
    let p = MarketParams::reference();
    let report = refinement_study(&p, 50, 5, Engine::Newton, &Settings::default(), &[20.0, 40.0], None)
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (col, tau) in [20.0, 40.0].iter().enumerate() {
        let diff = report.diff_column(col);
        let cr = report.cr_column(col);
        let decreasing = diff.windows(2).all(|w| w[1] < w[0]);
        let in_band = cr.len() == 3 && cr.iter().all(|c| (CR_BAND.0..=CR_BAND.1).contains(c));
        ok &= decreasing && in_band;
        parts.push(format!("tau={tau}: diffs decreasing={decreasing}, CR={cr:.2?}"));
    }
    let detail = format!("{} (band [{}, {}])", parts.join("; "), CR_BAND.0, CR_BAND.1);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_initialization() -> Result<String, String> {
    let mut rng = Lcg(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let r = rng.range(0.005, 0.15);
        let q = rng.range(0.0, 0.15);
        let sigma = rng.range(0.05, 0.6);
        let t = rng.range(0.25, 60.0);
        let p = MarketParams::new(r, q, sigma, t).map_err(|e| e.to_string())?;
        let g = GridSpec::for_params(&p, 20, None, Some(1.0), None).map_err(|e| e.to_string())?;
        let expected = ((1.0 + r * t) / (1.0 + q * t)).max(1.0);
        let got = initial_layer(&p, &g).z;
        worst = worst.max((got - expected).abs() / expected);
    }
    let detail = format!("20 parameter sets, max relative deviation {worst:.1e}");
    if worst <= f64::EPSILON {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn residual_contract() -> Result<String, String> {
    let (p, g) = reference();
    let settings = Settings::default();
    let res = solve(&p, &g, Engine::Newton, &settings).map_err(|e| e.to_string())?;
    let mut violations = 0;
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    for j in 1..res.layers.len() {
        let ctx = StepContext::new(&p, &g, &res.layers[j - 1], settings.mode);
        let (f1, f2) = layer_residual(&res.layers[j].y, res.layers[j].z, &ctx).map_err(|e| e.to_string())?;
        let n1 = max_abs(&f1);
        w1 = w1.max(n1);
        w2 = w2.max(f2.abs());
        if n1 > RESIDUAL_TOL || f2.abs() > RESIDUAL_TOL {
            violations += 1;
        }
    }
    let detail = format!(
        "{} layers, max ||F1|| = {w1:.2e}, max |F2| = {w2:.2e}, violations = {violations}",
        res.layers.len() - 1
    );
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_state(rng: &mut Lcg, g: &GridSpec) -> (LayerState, Vec<f64>) {
    let n = g.intervals();
    let j = rng.index(0, g.layers() - 1);
    let mut y: Vec<f64> = (0..=n).map(|_| -rng.unit()).collect();
    y[0] = -1.0;
    y[n] = 0.0;
    let prev = LayerState {
        j,
        tau: g.tau(j),
        y,
        z: rng.range(1.0, 2.0),
    };
    let mut u: Vec<f64> = (0..n - 1).map(|_| -rng.unit()).collect();
    u.push(rng.range(1.0, 2.0));
    (prev, u)
}

fn jacobian_correctness() -> Result<String, String> {
    let p = MarketParams::reference();
    let g = GridSpec::for_params(&p, 8, Some(4), None, None).unwrap();
    let mut rng = Lcg(99);
    let mut worst: f64 = 0.0;
    for mode in [SchemeMode::Central, SchemeMode::UpwindSingular] {
        for _ in 0..50 {
            let (prev, u) = random_state(&mut rng, &g);
            let ctx = StepContext::new(&p, &g, &prev, mode);
            let mut y = vec![-1.0];
            y.extend_from_slice(&u[..u.len() - 1]);
            y.push(0.0);
            let analytic = asianfb::solver_newton::build_jacobian(&y, u[u.len() - 1], &ctx)
                .map_err(|e| e.to_string())?
                .to_dense();
            let fd = fd_jacobian(&u, &ctx, FD_STEP);
            for (ra, rf) in analytic.iter().zip(&fd) {
                let scale = max_abs(ra).max(f64::MIN_POSITIVE);
                for (a, f) in ra.iter().zip(rf) {
                    worst = worst.max((a - f).abs() / scale);
                }
            }
        }
    }
    let detail = format!("100 states (central + upwind-singular), max row-relative error {worst:.2e}");
    if worst <= JACOBIAN_REL_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn schur_equals_dense() -> Result<String, String> {
    let p = MarketParams::reference();
    let g = GridSpec::for_params(&p, 8, Some(4), None, None).unwrap();
    let mut worst: f64 = 0.0;
    let mut iterations = 0;
    for mode in [SchemeMode::Central, SchemeMode::UpwindSingular] {
        let settings = Settings::with_mode(mode);
        let mut layer = initial_layer(&p, &g);
        for _ in 0..g.layers() {
            let ctx = StepContext::new(&p, &g, &layer, mode);
            let observe = |_: &[f64], _: f64, step: &NewtonStep<f64>| {
                let mut rhs: Vec<f64> = step.f1.iter().map(|v| -v).collect();
                rhs.push(-step.f2);
                let oracle = dense_solve(step.jacobian.to_dense(), rhs);
                let mut got = step.delta_y.clone();
                got.push(step.delta_z);
                let diff: Vec<f64> = got.iter().zip(&oracle).map(|(a, b)| a - b).collect();
                worst = worst.max(max_abs(&diff) / max_abs(&oracle).max(f64::MIN_POSITIVE));
                iterations += 1;
            };
            layer = newton_layer_observed(&ctx, &settings.newton, observe)
                .map_err(|e| e.to_string())?
                .0;
        }
    }
    let detail = format!("{iterations} Newton iterations, max relative deviation {worst:.2e}");
    if worst <= SCHUR_REL_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn thomas_oracle() -> Result<String, String> {
    let mut rng = Lcg(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.index(2, 200);
        let lower: Vec<f64> = (0..n - 1).map(|_| rng.range(-1.0, 1.0)).collect();
        let upper: Vec<f64> = (0..n - 1).map(|_| rng.range(-1.0, 1.0)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let off = if i > 0 { lower[i - 1].abs() } else { 0.0 } + if i + 1 < n { upper[i].abs() } else { 0.0 };
                let sign = if rng.unit() < 0.5 { -1.0 } else { 1.0 };
                sign * (off + rng.range(0.1, 2.0))
            })
            .collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.range(-10.0, 10.0)).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).map_err(|e| e.to_string())?;
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i];
            if i > 0 {
                dense[i][i - 1] = lower[i - 1];
            }
            if i + 1 < n {
                dense[i][i + 1] = upper[i];
            }
        }
        let oracle = dense_solve(dense, rhs);
        let diff: Vec<f64> = x.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        worst = worst.max(max_abs(&diff) / max_abs(&oracle));
    }
    let detail = format!("100 systems, max relative deviation {worst:.2e}");
    if worst <= THOMAS_REL_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cross_engine() -> Result<String, String> {
    let (p, g) = reference();
    let cmp = compare_engines(&p, &g, &Settings::default()).map_err(|e| e.to_string())?;
    let close = cmp.max_abs_diff <= ENGINE_DIFF_TOL;
    let majority = cmp.underestimation_fraction > 0.5;
    let detail = format!(
        "max |rho_newton - rho_pc| = {:.3e} (tol {ENGINE_DIFF_TOL:e}, {}), pc below newton on {:.1}% of layers ({})",
        cmp.max_abs_diff,
        if close { "ok" } else { "exceeded" },
        100.0 * cmp.underestimation_fraction,
        if majority { "ok" } else { "not a majority" },
    );
    if close && majority {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn maximum_principle() -> Result<String, String> {
    let (p, g) = reference();
    let res = solve(&p, &g, Engine::Newton, &Settings::default()).map_err(|e| e.to_string())?;
    let (lo, hi) = res.value_range();
    let n = g.intervals();
    let edges = res.layers.iter().all(|l| l.y[0] == -1.0 && l.y[n] == 0.0);
    let detail = format!("y in [{lo:e}, {hi:e}], exact boundary rows = {edges}");
    if lo >= -1.0 - MAX_PRINCIPLE_SLACK && hi <= MAX_PRINCIPLE_SLACK && edges {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    for dir in [a.path(), b.path()] {
        let out = dir.to_str().unwrap();
        for args in [
            vec!["asianfb", "solve", "--out-dir", out],
            vec!["asianfb", "compare", "--out-dir", out],
            vec!["asianfb", "refine", "--base-n", "20", "--levels", "3", "--out-dir", out],
        ] {
            let code = asianfb::cli::run(args);
            if code != 0 {
                return Err(format!("command exited with {code}"));
            }
        }
    }
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    let detail = format!("files {names:?} compared byte by byte");
    if fa == fb && fa.len() == 6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let checks: [(u32, &str, Check); 10] = [
        (1, "reference table regression", table_regression),
        (2, "convergence order", convergence_order),
        (3, "exact initialization", exact_initialization),
        (4, "residual contract", residual_contract),
        (5, "jacobian vs finite differences", jacobian_correctness),
        (6, "schur solve vs dense solve", schur_equals_dense),
        (7, "thomas vs dense elimination", thomas_oracle),
        (8, "cross-engine agreement", cross_engine),
        (9, "maximum principle", maximum_principle),
        (10, "determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in checks {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {name}: {detail}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

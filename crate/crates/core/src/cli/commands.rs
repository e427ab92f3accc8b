use std::time::Instant;

use serde_json::{json, Map, Value};

use super::config::RunConfig;
use super::output::{ensure_dir, probe_key, write_csv, write_json};
use super::CliError;
use crate::analysis::{compare_engines, refinement_study};
use crate::mesh::GridSpec;
use crate::model::boundary_in_original_variables;
use crate::solution::{solve, SolveResult};

/// Config echo with `M` and `L` filled in from the grid actually used.
fn config_json(c: &RunConfig, g: &GridSpec<f64>) -> Result<Value, CliError> {
    let mut resolved = c.clone();
    resolved.m = Some(g.layers());
    resolved.l = Some(g.length());
    serde_json::to_value(&resolved).map_err(|e| CliError::Io(format!("config echo: {e}")))
}

fn report_time(what: &str, start: Instant, c: &RunConfig, summary: &mut Map<String, Value>) {
    let secs = start.elapsed().as_secs_f64();
    eprintln!("{what} finished in {secs:.3} s");
    if c.timing {
        summary.insert("wall_time_s".into(), json!(secs));
    }
}

fn solve_summary(c: &RunConfig, res: &SolveResult<f64>) -> Map<String, Value> {
    let g = &res.grid;
    let d = &res.diagnostics;
    let mut s = Map::new();
    s.insert(
        "grid".into(),
        json!({
            "N": g.intervals(),
            "M": g.layers(),
            "L": g.length(),
            "h": g.h(),
            "k": g.k(),
            "eps_final": g.eps_final(),
        }),
    );
    s.insert("engine".into(), json!(res.engine));
    s.insert("scheme_mode".into(), json!(res.mode));
    s.insert("rho_tau0".into(), json!(res.layers[0].z));
    for &tau in &c.tau_probes {
        s.insert(probe_key("rho", tau), json!(res.rho_at(tau)));
    }
    s.insert("rho_final".into(), json!(res.layers[res.layers.len() - 1].z));
    let total = res.total_iterations();
    s.insert(
        "iterations".into(),
        json!({
            "max": res.max_iterations(),
            "total": total,
            "mean": total as f64 / d.len().max(1) as f64,
        }),
    );
    let worst = |f: fn(&crate::solution::LayerDiagnostics<f64>) -> f64| d.iter().map(f).fold(0.0, f64::max);
    let (lo, hi) = res.value_range();
    s.insert(
        "diagnostics".into(),
        json!({
            "max_residual_interior": worst(|x| x.residual_interior),
            "max_residual_constraint": worst(|x| x.residual_constraint),
            "upwinded_rows": d.iter().map(|x| x.upwinded_rows).sum::<usize>(),
            "dominance_violations": d.iter().map(|x| x.dominance_violations).sum::<usize>(),
            "predictor_fallbacks": d.iter().filter(|x| x.predictor_fallback).count(),
            "pi_min": lo,
            "pi_max": hi,
        }),
    );
    s
}

pub fn cmd_solve(c: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let g = c.grid()?;
    let res = solve(&c.market, &g, c.engine, &c.settings())?;
    ensure_dir(&c.out_dir)?;

    let path = res.boundary();
    let original = boundary_in_original_variables(&c.market, &path)?;
    // original is sorted by t, i.e. reversed layer order
    let rows = path
        .iter()
        .zip(original.iter().rev())
        .map(|(&(tau, rho), &(t, xf))| vec![Some(tau), Some(rho), Some(xf), Some(t)]);
    write_csv(
        &c.out_dir.join("boundary.csv"),
        &header(&["tau", "rho", "xf_t", "t"]),
        rows,
    )?;

    let nodes = g.nodes();
    let surface = res.layers.iter().flat_map(|l| {
        l.y.iter()
            .zip(&nodes)
            .map(move |(&pi, &xi)| vec![Some(l.tau), Some(xi), Some(pi)])
    });
    write_csv(&c.out_dir.join("surface.csv"), &header(&["tau", "xi", "pi"]), surface)?;

    let mut summary = solve_summary(c, &res);
    summary.insert("config".into(), config_json(c, &g)?);
    report_time("solve", start, c, &mut summary);
    write_json(&c.out_dir.join("summary.json"), Value::Object(summary))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn cmd_refine(c: &RunConfig) -> Result<(), CliError> {
    if c.levels < 2 {
        return Err(CliError::Config("refine needs at least 2 levels".into()));
    }
    let start = Instant::now();
    let report = refinement_study(
        &c.market,
        c.base_n,
        c.levels,
        c.engine,
        &c.settings(),
        &c.tau_probes,
        c.jobs,
    )?;
    ensure_dir(&c.out_dir)?;
    let mut cols = vec!["N".to_string()];
    for &tau in &report.probe_times {
        cols.push(probe_key("rho", tau));
        cols.push(probe_key("diff", tau));
        cols.push(probe_key("CR", tau));
    }
    let rows = report.rows.iter().map(|row| {
        let mut cells = vec![Some(row.n as f64)];
        for p in 0..report.probe_times.len() {
            cells.extend([Some(row.rho[p]), row.diff[p], row.cr[p]]);
        }
        cells
    });
    write_csv(&c.out_dir.join("refine.csv"), &cols, rows)?;
    eprintln!("refine finished in {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_compare(c: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let g = c.grid()?;
    let cmp = compare_engines(&c.market, &g, &c.settings())?;
    ensure_dir(&c.out_dir)?;
    let rows = (0..cmp.taus.len()).map(|j| {
        vec![
            Some(cmp.taus[j]),
            Some(cmp.rho_newton[j]),
            Some(cmp.rho_pc[j]),
            Some(cmp.diff[j]),
        ]
    });
    write_csv(
        &c.out_dir.join("compare.csv"),
        &header(&["tau", "rho_newton", "rho_pc", "diff"]),
        rows,
    )?;
    let mut summary = Map::new();
    summary.insert("config".into(), config_json(c, &g)?);
    summary.insert("max_abs_diff".into(), json!(cmp.max_abs_diff));
    summary.insert("mean_abs_diff".into(), json!(cmp.mean_abs_diff));
    summary.insert("underestimation_fraction".into(), json!(cmp.underestimation_fraction));
    summary.insert("lower_engine".into(), json!(cmp.lower_engine));
    summary.insert(
        "diagnostics".into(),
        json!({
            "scheme_mode": c.scheme_mode,
            "newton_max_iterations": cmp.newton_max_iterations,
            "newton_upwinded_rows": cmp.newton_upwinded_rows,
            "pc_upwinded_rows": cmp.pc_upwinded_rows,
            "pc_fallback_layers": cmp.pc_fallback_layers,
        }),
    );
    report_time("compare", start, c, &mut summary);
    write_json(&c.out_dir.join("compare.json"), Value::Object(summary))
}

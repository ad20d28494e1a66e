use std::fmt::Write as _;
use std::path::Path;

use mildlab::config::ExperimentConfig;
use mildlab::{ModelPair, StateVector};
use serde::Serialize;
use serde_json::json;

use crate::run::{CliError, GeneratorDiagnostics, SolverRun};

pub const CSV_HEADER: &str = "# mildlab-errors v1";

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Io(format!("cannot serialize: {e}")))
}

/// One row per (solver, parameter); failed points are kept with status
/// `failed` and empty error columns.
pub fn errors_csv(runs: &[SolverRun]) -> String {
    let mut s = format!("{CSV_HEADER}\nsolver,param,status,l1_0_tau,sup_delta_tau,sup_0_tau\n");
    for run in runs {
        if let Some(rep) = &run.report {
            for (p, e) in rep.params.iter().zip(&rep.errors) {
                writeln!(s, "{},{p:.17e},ok,{:.17e},{:.17e},{:.17e}", run.solver, e.l1_0_tau, e.sup_delta_tau, e.sup_0_tau).unwrap();
            }
        }
        for f in &run.failures {
            let p = f.param.map(|p| format!("{p:.17e}")).unwrap_or_default();
            writeln!(s, "{},{p},failed,,,", run.solver).unwrap();
        }
    }
    s
}

fn model_card(cfg: &ExperimentConfig, mp: &ModelPair, x: &StateVector, warnings: &[String], runs: &[SolverRun]) -> String {
    let mut s = mp.card.clone();
    if !s.ends_with('\n') {
        s.push('\n');
    }
    let jump = x.norm.distance(&x.values, &mp.projection().apply(&x.values));
    writeln!(s, "\n## Run\n").unwrap();
    writeln!(s, "- parameter: {:?}, sweep {:?}", mp.param_kind, cfg.sweep_params(mp)).unwrap();
    writeln!(s, "- tau = {}, delta = {}, steps = {}, seed = {}", cfg.tau, cfg.delta(), cfg.steps, cfg.seed).unwrap();
    writeln!(s, "- |x| = {:.6e}, |x - Px| = {jump:.6e}", x.norm()).unwrap();
    for w in warnings {
        writeln!(s, "- warning: {w}").unwrap();
    }
    for run in runs {
        match &run.report {
            Some(rep) => {
                let last = rep.errors.last().map(|e| e.sup_delta_tau).unwrap_or(f64::NAN);
                write!(s, "- {}: {:?}, sup_delta_tau at the last parameter {last:.3e}", run.solver, rep.classification).unwrap();
                if run.partial {
                    write!(s, " (partial, {} failed point(s))", run.failures.len()).unwrap();
                }
                s.push('\n');
            }
            None => writeln!(s, "- {}: failed", run.solver).unwrap(),
        }
    }
    s
}

#[allow(clippy::too_many_arguments)]
pub fn write_all(
    dir: &Path,
    cfg: &ExperimentConfig,
    mp: &ModelPair,
    x: &StateVector,
    warnings: &[String],
    runs: &[SolverRun],
    points: &[GeneratorDiagnostics],
    limit: &GeneratorDiagnostics,
) -> Result<(), CliError> {
    let report = json!({
        "format": "mildlab-report v1",
        "model": mp.name,
        "dim": mp.dim(),
        "param_kind": mp.param_kind,
        "x_in_regularity_space": mp.x0_membership(&x.values),
        "admissibility_warnings": warnings,
        "partial": runs.iter().any(|r| r.partial),
        "runs": runs,
        "config": cfg,
    });
    let picard: Vec<_> = runs
        .iter()
        .filter_map(|r| r.report.as_ref())
        .map(|rep| {
            json!({
                "solver": rep.solver,
                "limit_iterations": rep.limit_info.picard_iterations,
                "iterations": rep.params.iter().zip(&rep.point_info).map(|(p, i)| json!({"param": p, "iterations": i.picard_iterations, "defect": i.picard_defect})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let diagnostics = json!({
        "format": "mildlab-diagnostics v1",
        "seed": cfg.seed,
        "probes": cfg.probes,
        "solvers": picard,
        "generators": points,
        "limit": limit,
    });
    write(dir, "report.json", &to_json(&report)?)?;
    write(dir, "errors.csv", &errors_csv(runs))?;
    write(dir, "model-card.md", &model_card(cfg, mp, x, warnings, runs))?;
    write(dir, "solver-diagnostics.json", &to_json(&diagnostics)?)?;
    Ok(())
}

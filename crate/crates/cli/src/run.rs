use std::path::Path;

use mildlab::config::{ConfigError, ExperimentConfig};
use mildlab::convergence::{report_from_points, sweep_points, Classification, ConvergenceReport, SolverChoice};
use mildlab::mild::{contraction_diagnostics, BieleckiWeight, Nonlinearity, ProbeSetup};
use mildlab::operator::{dissipativity_check, Generator};
use mildlab::{MildError, ModelPair};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::artifacts;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
}

impl From<MildError> for CliError {
    fn from(e: MildError) -> Self {
        CliError::Config(ConfigError::Model(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Solver(_) => 3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PointFailure {
    pub param: Option<f64>,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct SolverRun {
    pub solver: SolverChoice,
    /// Some sweep points failed; the report covers the others only.
    pub partial: bool,
    pub report: Option<ConvergenceReport>,
    pub failures: Vec<PointFailure>,
}

#[derive(Debug, Serialize)]
pub struct GeneratorDiagnostics {
    pub param: Option<f64>,
    pub semigroup_bound: f64,
    pub stability_bound: f64,
    pub lipschitz: f64,
    pub bielecki_lambda: Option<f64>,
    /// Measured Lipschitz constant of the mild map in the Bielecki norm.
    pub contraction_measured: Option<f64>,
    /// CL/λ.
    pub contraction_bound: Option<f64>,
    /// Largest sampled ‖e^{tA}x‖ with ‖x‖ = 1.
    pub dissipativity_max: Option<f64>,
    pub errors: Vec<String>,
}

pub struct RunOutcome {
    pub classifications: Vec<(SolverChoice, Classification)>,
    pub failures: usize,
}

fn diagnose(g: &Generator, f: &Nonlinearity, param: Option<f64>, cfg: &ExperimentConfig, amplitude: f64) -> GeneratorDiagnostics {
    let mut d = GeneratorDiagnostics {
        param,
        semigroup_bound: g.semigroup_bound(),
        stability_bound: g.stability_bound(),
        lipschitz: f.lipschitz(),
        bielecki_lambda: None,
        contraction_measured: None,
        contraction_bound: None,
        dissipativity_max: None,
        errors: Vec::new(),
    };
    if f.lipschitz() > 0.0 {
        let w = BieleckiWeight::default_for(g, f);
        d.bielecki_lambda = Some(w.lam());
        d.contraction_bound = Some(g.semigroup_bound() * f.lipschitz() / w.lam());
        let setup = ProbeSetup { tau: cfg.tau, steps: 200, amplitude, seed: cfg.seed };
        match contraction_diagnostics(g, f, w, cfg.probes, &setup) {
            Ok(q) => d.contraction_measured = Some(q),
            Err(e) => d.errors.push(format!("contraction diagnostics: {e}")),
        }
    }
    match dissipativity_check(g, 20, cfg.seed) {
        Ok(m) => d.dissipativity_max = Some(m),
        Err(e) => d.errors.push(format!("dissipativity check: {e}")),
    }
    d
}

pub fn solver_diagnostics(mp: &ModelPair, cfg: &ExperimentConfig) -> (Vec<GeneratorDiagnostics>, GeneratorDiagnostics) {
    let amplitude = mp.sample_box.0.abs().max(mp.sample_box.1.abs());
    let points = cfg
        .sweep_params(mp)
        .par_iter()
        .map(|&p| match mp.generator(p) {
            Ok(g) => diagnose(&g, &mp.nonlinearity, Some(p), cfg, amplitude),
            Err(e) => GeneratorDiagnostics {
                param: Some(p),
                semigroup_bound: f64::NAN,
                stability_bound: f64::NAN,
                lipschitz: mp.nonlinearity.lipschitz(),
                bielecki_lambda: None,
                contraction_measured: None,
                contraction_bound: None,
                dissipativity_max: None,
                errors: vec![e.to_string()],
            },
        })
        .collect();
    let limit = diagnose(&mp.limit.generator, &mp.limit.nonlinearity, None, cfg, amplitude);
    (points, limit)
}

fn run_solver(mp: &ModelPair, cfg: &ExperimentConfig, x: &mildlab::StateVector, solver: SolverChoice) -> SolverRun {
    let setup = cfg.sweep_setup(mp, solver);
    match sweep_points(mp, x, &setup) {
        Ok((points, limit_info)) => {
            let mut ok = Vec::new();
            let mut failures = Vec::new();
            for p in points {
                match p {
                    Ok(p) => ok.push(p),
                    Err(MildError::SweepPoint { param, source }) => {
                        failures.push(PointFailure { param: Some(param), error: source.to_string() })
                    }
                    Err(e) => failures.push(PointFailure { param: None, error: e.to_string() }),
                }
            }
            let report = (!ok.is_empty()).then(|| report_from_points(mp, x, &setup, &ok, limit_info));
            SolverRun { solver, partial: !failures.is_empty(), report, failures }
        }
        Err(e) => SolverRun {
            solver,
            partial: true,
            report: None,
            failures: vec![PointFailure { param: None, error: format!("limit system: {e}") }],
        },
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome, CliError> {
    let mp = cfg.build_model()?;
    let x = cfg.initial_state(&mp)?;
    let warnings = mp.admissibility_warnings(&x.values);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let runs: Vec<SolverRun> = cfg.solver.choices().into_iter().map(|s| run_solver(&mp, cfg, &x, s)).collect();
    let (points, limit) = solver_diagnostics(&mp, cfg);

    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    artifacts::write_all(out, cfg, &mp, &x, &warnings, &runs, &points, &limit)?;

    Ok(RunOutcome {
        classifications: runs.iter().filter_map(|r| r.report.as_ref().map(|rep| (r.solver, rep.classification))).collect(),
        failures: runs.iter().map(|r| r.failures.len()).sum(),
    })
}

//! Error metrics between perturbed and limit trajectories, parameter sweeps
//! and the regular / irregular classification.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MildError, Result};
use crate::mild::{expeuler_solve, picard_solve, PicardOptions, Trajectory};
use crate::models::ModelPair;
use crate::norm::StateVector;
use crate::operator::Projection;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorTriple {
    /// Trapezoidal ∫₀^τ ‖u_full − u_lim‖ dt.
    pub l1_0_tau: f64,
    /// Max over nodes in [δ, τ].
    pub sup_delta_tau: f64,
    /// Max over all nodes, t = 0 included.
    pub sup_0_tau: f64,
    pub delta: f64,
    pub tau: f64,
}

/// Compares two trajectories on the same grid and in the same norm.
pub fn error_metrics(full: &Trajectory, lim: &Trajectory, delta: f64, tau: f64) -> Result<ErrorTriple> {
    if full.times() != lim.times() {
        return Err(MildError::GridMismatch("trajectories live on different time grids".into()));
    }
    if full.norm() != lim.norm() {
        return Err(MildError::GridMismatch("trajectories are measured in different norms".into()));
    }
    if full.dim() != lim.dim() {
        return Err(MildError::DimensionMismatch { expected: full.dim(), got: lim.dim() });
    }
    if !(0.0 <= delta && delta < tau) {
        return Err(invalid(format!("need 0 <= delta < tau, got delta = {delta}, tau = {tau}")));
    }
    let times = full.times();
    let end = *times.last().expect("trajectories are nonempty");
    if (end - tau).abs() > 1e-12 * tau.max(1.0) || times[0] != 0.0 {
        return Err(MildError::GridMismatch(format!("grid covers [{}, {end}], expected [0, {tau}]", times[0])));
    }

    let norm = full.norm();
    let e: Vec<f64> = full.states().iter().zip(lim.states()).map(|(a, b)| norm.distance(a, b)).collect();
    let l1 = times.windows(2).zip(e.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum();
    let cutoff = delta - 1e-12 * tau;
    let sup_delta = times.iter().zip(&e).filter(|(t, _)| **t >= cutoff).map(|(_, v)| *v).fold(0.0, f64::max);
    let sup_0 = e.iter().cloned().fold(0.0, f64::max);
    Ok(ErrorTriple { l1_0_tau: l1, sup_delta_tau: sup_delta, sup_0_tau: sup_0, delta, tau })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Regular,
    Irregular,
    NonConvergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub tol_reg: f64,
    pub tol_irr: f64,
}

impl Thresholds {
    /// tol_reg = 1e-2·‖x‖, tol_irr = ½‖x − Px‖.
    pub fn defaults(x: &StateVector, p: &Projection) -> Self {
        let jump = x.norm.distance(&x.values, &p.apply(&x.values));
        Self { tol_reg: 1e-2 * x.norm(), tol_irr: 0.5 * jump }
    }
}

/// Rises below `slack` are discretization floor noise, not divergence.
fn last_three_nonincreasing(v: &[f64], slack: f64) -> bool {
    let tail = &v[v.len().saturating_sub(3)..];
    tail.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Regular: the last sup_0 is below tol_reg and the last three sup_0 do not
/// increase. Irregular: the same for sup_δ, while sup_0 never drops below
/// tol_irr. Anything else is non-convergent.
///
/// "Do not increase" tolerates rises of at most 1% of tol_reg: once the
/// perturbation error is gone the time-discretization floor remains, and it
/// may creep upward as the generator stiffens.
pub fn classify(errors: &[ErrorTriple], th: &Thresholds) -> Classification {
    let Some(last) = errors.last() else {
        return Classification::NonConvergent;
    };
    let sup0: Vec<f64> = errors.iter().map(|e| e.sup_0_tau).collect();
    let supd: Vec<f64> = errors.iter().map(|e| e.sup_delta_tau).collect();
    let slack = 1e-2 * th.tol_reg;
    if last.sup_0_tau <= th.tol_reg && last_three_nonincreasing(&sup0, slack) {
        return Classification::Regular;
    }
    let min0 = sup0.iter().cloned().fold(f64::INFINITY, f64::min);
    if last.sup_delta_tau <= th.tol_reg && last_three_nonincreasing(&supd, slack) && min0 >= th.tol_irr {
        return Classification::Irregular;
    }
    Classification::NonConvergent
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    #[default]
    Picard,
    Expeuler,
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverChoice::Picard => "picard",
            SolverChoice::Expeuler => "expeuler",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepSetup {
    pub params: Vec<f64>,
    pub tau: f64,
    pub delta: f64,
    pub steps: usize,
    pub solver: SolverChoice,
    pub picard: PicardOptions,
}

impl SweepSetup {
    /// τ = 1, δ = 0.1τ, the model's default sweep.
    pub fn new(mp: &ModelPair, steps: usize, solver: SolverChoice) -> Self {
        Self { params: mp.param_kind.default_sweep(), tau: 1.0, delta: 0.1, steps, solver, picard: PicardOptions::default() }
    }
}

/// Diagnostics of one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveInfo {
    pub picard_iterations: Option<usize>,
    pub picard_defect: Option<f64>,
    pub bielecki_lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub param: f64,
    pub errors: ErrorTriple,
    pub info: SolveInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub model: String,
    pub solver: SolverChoice,
    pub params: Vec<f64>,
    pub errors: Vec<ErrorTriple>,
    pub classification: Classification,
    pub floor_estimate: f64,
    pub thresholds: Thresholds,
    pub x_norm: f64,
    /// ‖x − Px‖.
    pub initial_jump: f64,
    /// log(sup_δ ratio) / log(param ratio) between consecutive points.
    pub empirical_rates: Vec<f64>,
    pub limit_info: SolveInfo,
    pub point_info: Vec<SolveInfo>,
}

fn solve(
    g: &crate::operator::Generator,
    f: &crate::mild::Nonlinearity,
    x: &StateVector,
    setup: &SweepSetup,
) -> Result<(Trajectory, SolveInfo)> {
    match setup.solver {
        SolverChoice::Picard => {
            let s = picard_solve(g, f, x, setup.tau, setup.steps, &setup.picard)?;
            let info =
                SolveInfo { picard_iterations: Some(s.iterations), picard_defect: Some(s.defect), bielecki_lambda: Some(s.weight.lam()) };
            Ok((s.trajectory, info))
        }
        SolverChoice::Expeuler => Ok((expeuler_solve(g, f, x, setup.tau, setup.steps)?, SolveInfo::default())),
    }
}

/// The limit trajectory started from Px.
pub fn solve_limit(mp: &ModelPair, x: &StateVector, setup: &SweepSetup) -> Result<(Trajectory, SolveInfo)> {
    let px = x.with_values(mp.projection().apply(&x.values));
    solve(&mp.limit.generator, &mp.limit.nonlinearity, &px, setup)
}

/// Solves the perturbed system at every parameter (in parallel) and compares
/// with the limit trajectory. Failures are kept per point.
pub fn sweep_points(mp: &ModelPair, x: &StateVector, setup: &SweepSetup) -> Result<(Vec<Result<SweepPoint>>, SolveInfo)> {
    if x.dim() != mp.dim() {
        return Err(MildError::DimensionMismatch { expected: mp.dim(), got: x.dim() });
    }
    if !x.is_finite() {
        return Err(invalid("initial state has non-finite entries"));
    }
    if x.norm != mp.norm {
        return Err(invalid("initial state is not measured in the model norm"));
    }
    let (lim, limit_info) = solve_limit(mp, x, setup)?;
    let points = setup
        .params
        .par_iter()
        .map(|&param| {
            let run = || -> Result<SweepPoint> {
                let g = mp.generator(param)?;
                let (full, info) = solve(&g, &mp.nonlinearity, x, setup)?;
                let errors = error_metrics(&full, &lim, setup.delta, setup.tau)?;
                Ok(SweepPoint { param, errors, info })
            };
            run().map_err(|e| MildError::SweepPoint { param, source: Box::new(e) })
        })
        .collect();
    Ok((points, limit_info))
}

pub fn report_from_points(
    mp: &ModelPair,
    x: &StateVector,
    setup: &SweepSetup,
    points: &[SweepPoint],
    limit_info: SolveInfo,
) -> ConvergenceReport {
    let thresholds = Thresholds::defaults(x, mp.projection());
    let errors: Vec<ErrorTriple> = points.iter().map(|p| p.errors).collect();
    let params: Vec<f64> = points.iter().map(|p| p.param).collect();
    let empirical_rates =
        points.windows(2).map(|w| (w[1].errors.sup_delta_tau / w[0].errors.sup_delta_tau).ln() / (w[1].param / w[0].param).ln()).collect();
    ConvergenceReport {
        model: mp.name.clone(),
        solver: setup.solver,
        params,
        classification: classify(&errors, &thresholds),
        floor_estimate: errors.last().map(|e| e.sup_0_tau).unwrap_or(f64::NAN),
        errors,
        thresholds,
        x_norm: x.norm(),
        initial_jump: 2.0 * thresholds.tol_irr,
        empirical_rates,
        limit_info,
        point_info: points.iter().map(|p| p.info).collect(),
    }
}

/// Full sweep; the first failing parameter aborts with its error.
pub fn sweep(mp: &ModelPair, x: &StateVector, setup: &SweepSetup) -> Result<ConvergenceReport> {
    let (points, limit_info) = sweep_points(mp, x, setup)?;
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(report_from_points(mp, x, setup, &points, limit_info))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FolkTrial {
    pub trial: usize,
    /// Replays this trial via [`folk_trial`].
    pub seed: u64,
    pub dim: usize,
    pub q: f64,
    pub n: usize,
    /// ‖sₙ* − s*‖
    pub distance: f64,
    /// (1/(1−q))‖Φ(s*) − Φₙ(s*)‖
    pub bound: f64,
    /// (1/(1−q))‖cₙ − c‖ + (q/(1−q))‖Rₙ − R‖‖s*‖
    pub derived_bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FolkReport {
    pub trials: usize,
    pub checks: usize,
    pub violations: Vec<FolkTrial>,
    /// Largest distance / bound observed.
    pub tightest: f64,
}

impl FolkReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_contraction_part(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let s = m.singular_values().max();
    if s > 0.0 {
        m / s
    } else {
        m
    }
}

fn fixed_point(q: f64, r: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let mut s = c.clone();
    for _ in 0..200_000 {
        let next = r * &s * q + c;
        let step = (&next - &s).norm();
        s = next;
        if step <= 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    s
}

/// One randomized trial: dimension d ≤ 8, q ∈ (0, 0.95), maps
/// Φₙ(s) = q Rₙ s + cₙ with Rₙ = (1 − 1/n)R + S/n, cₙ = c + e/n and
/// ‖R‖, ‖S‖ ≤ 1, checked at n ∈ {1, 2, 10, 100, 1000}.
pub fn folk_trial(trial: usize, seed: u64) -> Vec<FolkTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=8);
    let q = if trial.is_multiple_of(10) { rng.random_range(0.0..1e-3) } else { rng.random_range(1e-3..0.95) };
    let r = random_contraction_part(&mut rng, d);
    let s = random_contraction_part(&mut rng, d);
    let c = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let e = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let s_star = fixed_point(q, &r, &c);
    [1usize, 2, 10, 100, 1000]
        .into_iter()
        .map(|n| {
            let inv = 1.0 / n as f64;
            let rn = &r * (1.0 - inv) + &s * inv;
            let cn = &c + &e * inv;
            let sn = fixed_point(q, &rn, &cn);
            let phi = &r * &s_star * q + &c;
            let phin = &rn * &s_star * q + &cn;
            FolkTrial {
                trial,
                seed,
                dim: d,
                q,
                n,
                distance: (&sn - &s_star).norm(),
                bound: (phi - phin).norm() / (1.0 - q),
                derived_bound: (&cn - &c).norm() / (1.0 - q) + q / (1.0 - q) * (&rn - &r).norm() * s_star.norm(),
            }
        })
        .collect()
}

/// Runs `trials` randomized trials of the fixed-point stability estimate
/// d(s*, sₙ*) ≤ (1/(1−q)) d(Φ(s*), Φₙ(s*)).
pub fn folk_property_harness(seed: u64, trials: usize) -> Result<FolkReport> {
    if trials == 0 {
        return Err(invalid("folk_property_harness needs at least one trial"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| master.random()).collect();
    let mut report = FolkReport { trials, ..Default::default() };
    for (trial, &s) in seeds.iter().enumerate() {
        for check in folk_trial(trial, s) {
            report.checks += 1;
            let slack = 1e-9 * (1.0 + check.distance);
            if check.bound > 0.0 {
                report.tightest = report.tightest.max(check.distance / check.bound);
            }
            if check.distance > check.bound + slack || check.distance > check.derived_bound + 1e-9 {
                report.violations.push(check);
            }
        }
    }
    Ok(report)
}

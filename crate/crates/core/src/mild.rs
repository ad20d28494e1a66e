//! Mild solutions u(t) = e^{tA}x + ∫₀ᵗ e^{(t−s)A} F(s, u(s)) ds.
//!
//! Two independent routes are provided. [`picard_solve`] iterates the map
//! Φ above to its fixed point, measuring progress in the exponentially
//! weighted (Bielecki) norm in which Φ is a contraction. [`expeuler_solve`]
//! is a first-order exponential Euler stepper used as a cross-check.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, MildError, Result};
use crate::norm::{Norm, StateVector};
use crate::operator::Generator;

pub type ReactionFn = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// A map (t, u) ↦ F(t, u), globally Lipschitz in u with a declared constant.
#[derive(Clone)]
pub struct Nonlinearity {
    eval: Arc<ReactionFn>,
    lipschitz: f64,
    autonomous: bool,
    growth: GrowthBound,
}

/// Constants C₀, λ₀ with ∫₀ᵗ‖F(s,0)‖ds ≤ C₀e^{λ₀t}. Only needed for global
/// existence; recorded, never enforced on finite horizons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GrowthBound {
    pub c0: f64,
    pub lambda0: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("lipschitz", &self.lipschitz)
            .field("autonomous", &self.autonomous)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl Nonlinearity {
    pub fn new<F>(lipschitz: f64, eval: F) -> Result<Self>
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(invalid(format!("Lipschitz constant must be finite and nonnegative, got {lipschitz}")));
        }
        Ok(Self { eval: Arc::new(eval), lipschitz, autonomous: false, growth: GrowthBound::default() })
    }

    /// Time-independent F(u).
    pub fn autonomous<F>(lipschitz: f64, eval: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let mut nl = Self::new(lipschitz, move |_, u| eval(u))?;
        nl.autonomous = true;
        Ok(nl)
    }

    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_, u: &DVector<f64>| DVector::zeros(u.len())),
            lipschitz: 0.0,
            autonomous: true,
            growth: GrowthBound::default(),
        }
    }

    pub fn with_growth(mut self, growth: GrowthBound) -> Self {
        self.growth = growth;
        self
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn growth(&self) -> GrowthBound {
        self.growth
    }

    pub fn eval(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        (self.eval)(t, u)
    }

    /// Largest sampled ratio ‖F(t,u) − F(t,v)‖/‖u − v‖ over random pairs in
    /// the box [lo, hi]^dim and t ∈ [0, tau]. Fails if it exceeds the declared
    /// constant by more than 1e-8.
    pub fn check_lipschitz(&self, norm: &Norm, dim: usize, bounds: (f64, f64), tau: f64, samples: usize, seed: u64) -> Result<f64> {
        let (lo, hi) = bounds;
        if !(lo < hi) {
            return Err(invalid("empty sampling box"));
        }
        norm.check_dim(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for k in 0..samples {
            let t = if tau > 0.0 { rng.random_range(0.0..=tau) } else { 0.0 };
            let u = DVector::from_fn(dim, |_, _| rng.random_range(lo..hi));
            // alternate wide pairs with nearby pairs, which probe local slopes
            let v = if k % 2 == 0 {
                DVector::from_fn(dim, |_, _| rng.random_range(lo..hi))
            } else {
                let eps = 1e-3 * (hi - lo);
                u.map(|x| (x + rng.random_range(-eps..eps)).clamp(lo, hi))
            };
            let d = norm.distance(&u, &v);
            if d > 0.0 {
                worst = worst.max(norm.distance(&self.eval(t, &u), &self.eval(t, &v)) / d);
            }
        }
        if worst > self.lipschitz + 1e-8 {
            return Err(MildError::LipschitzViolated { declared: self.lipschitz, measured: worst });
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BieleckiWeight(f64);

impl BieleckiWeight {
    pub fn new(lam: f64) -> Result<Self> {
        if lam > 0.0 && lam.is_finite() {
            Ok(Self(lam))
        } else {
            Err(invalid(format!("Bielecki weight must be positive, got {lam}")))
        }
    }

    /// λ = 2CL (contraction factor ½); λ = 1 when CL = 0.
    pub fn default_for(g: &Generator, f: &Nonlinearity) -> Self {
        let cl = g.semigroup_bound() * f.lipschitz();
        Self(if cl > 0.0 { 2.0 * cl + g.stability_bound().max(0.0) } else { 1.0 })
    }

    pub fn lam(self) -> f64 {
        self.0
    }
}

/// A discrete trajectory: states on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    norm: Norm,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DVector<f64>>, norm: Norm) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(invalid(format!("{} times for {} states", times.len(), states.len())));
        }
        if !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("trajectory times must be nonnegative and strictly increasing"));
        }
        let dim = states[0].len();
        if let Some(s) = states.iter().find(|s| s.len() != dim) {
            return Err(MildError::DimensionMismatch { expected: dim, got: s.len() });
        }
        norm.check_dim(dim)?;
        if states.iter().any(|s| s.iter().any(|x| !x.is_finite())) {
            return Err(invalid("trajectory contains non-finite values"));
        }
        Ok(Self { times, states, norm })
    }

    /// Constant trajectory on the uniform grid t_i = iτ/M.
    pub fn constant(x: &StateVector, tau: f64, steps: usize) -> Self {
        let times = uniform_times(tau, steps);
        let states = vec![x.values.clone(); times.len()];
        Self { times, states, norm: x.norm.clone() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn norm(&self) -> &Norm {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn state(&self, i: usize) -> StateVector {
        StateVector { values: self.states[i].clone(), norm: self.norm.clone() }
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectories are nonempty")
    }

    /// Applies a linear map to every state, e.g. a projection or a pool average.
    pub fn map_states(&self, m: &DMatrix<f64>, norm: Norm) -> Result<Self> {
        Self::new(self.times.clone(), self.states.iter().map(|s| m * s).collect(), norm)
    }

    /// Pointwise difference on a shared grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.times != other.times {
            return Err(MildError::GridMismatch("time grids differ".into()));
        }
        if self.norm != other.norm {
            return Err(MildError::GridMismatch("norms differ".into()));
        }
        let states = self.states.iter().zip(&other.states).map(|(a, b)| a - b).collect();
        Ok(Self { times: self.times.clone(), states, norm: self.norm.clone() })
    }

    /// max_i ‖v(t_i)‖.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(|s| self.norm.of(s)).fold(0.0, f64::max)
    }
}

pub fn uniform_times(tau: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| if i == steps { tau } else { tau * i as f64 / steps as f64 }).collect()
}

/// max_i e^{−λt_i}‖v(t_i)‖.
pub fn bielecki_norm(v: &Trajectory, w: BieleckiWeight) -> f64 {
    v.times.iter().zip(&v.states).map(|(t, s)| (-w.0 * t).exp() * v.norm.of(s)).fold(0.0, f64::max)
}

/// The integrated variant max_i e^{−λt_i}∫_{t_0}^{t_i}‖v(s)‖ds (trapezoidal),
/// equivalent to the L¹((0,τ)) norm.
pub fn bielecki_l1_norm(v: &Trajectory, w: BieleckiWeight) -> f64 {
    let norms: Vec<f64> = v.states.iter().map(|s| v.norm.of(s)).collect();
    let mut integral = 0.0;
    let mut best = 0.0_f64;
    for i in 1..v.times.len() {
        integral += 0.5 * (v.times[i] - v.times[i - 1]) * (norms[i] + norms[i - 1]);
        best = best.max((-w.0 * v.times[i]).exp() * integral);
    }
    best
}

/// Defect between two trajectories in the Bielecki norm and in the plain
/// sup-over-time norm, without building the difference trajectory.
fn defects(a: &[DVector<f64>], b: &[DVector<f64>], times: &[f64], norm: &Norm, w: BieleckiWeight) -> (f64, f64) {
    let mut weighted = 0.0_f64;
    let mut plain = 0.0_f64;
    for ((x, y), t) in a.iter().zip(b).zip(times) {
        let d = norm.distance(x, y);
        plain = plain.max(d);
        weighted = weighted.max((-w.0 * t).exp() * d);
    }
    (weighted, plain)
}

fn check_grid(g: &Generator, x: &StateVector, tau: f64, steps: usize) -> Result<()> {
    if x.dim() != g.dim() {
        return Err(MildError::DimensionMismatch { expected: g.dim(), got: x.dim() });
    }
    if !x.is_finite() {
        return Err(invalid("initial state is not finite"));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if steps < 2 {
        return Err(invalid(format!("need at least 2 time steps, got {steps}")));
    }
    Ok(())
}

/// The map v ↦ Φ(v) on a uniform grid, with the convolution integral
/// discretized by the trapezoidal rule.
pub struct MildMap<'a> {
    f: &'a Nonlinearity,
    times: Vec<f64>,
    dt: f64,
    step: DMatrix<f64>,
    homogeneous: Vec<DVector<f64>>,
    norm: Norm,
}

impl<'a> MildMap<'a> {
    pub fn new(g: &Generator, f: &'a Nonlinearity, x: &StateVector, tau: f64, steps: usize) -> Result<Self> {
        check_grid(g, x, tau, steps)?;
        let times = uniform_times(tau, steps);
        let dt = tau / steps as f64;
        let step = g.exp(dt)?;
        let mut homogeneous = Vec::with_capacity(times.len());
        homogeneous.push(x.values.clone());
        if g.is_self_adjoint() {
            for &t in &times[1..] {
                homogeneous.push(g.exp_apply(t, &x.values)?);
            }
        } else {
            for i in 1..times.len() {
                let next = &step * &homogeneous[i - 1];
                homogeneous.push(next);
            }
        }
        Ok(Self { f, times, dt, step, homogeneous, norm: x.norm.clone() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Φ(v)(t_i) = e^{t_iA}x + Σ_j w_j e^{(t_i−s_j)A}F(s_j, v_j).
    ///
    /// The running sum S_i = e^{ΔtA}S_{i−1} + ΔtF_i starts from S_0 = ½ΔtF_0,
    /// and the trapezoid value is S_i − ½ΔtF_i, so each node costs one matvec.
    pub fn apply(&self, v: &[DVector<f64>]) -> Vec<DVector<f64>> {
        assert_eq!(v.len(), self.times.len(), "trajectory length");
        let half = 0.5 * self.dt;
        let mut out = Vec::with_capacity(v.len());
        out.push(self.homogeneous[0].clone());
        let mut sum = self.f.eval(self.times[0], &v[0]) * half;
        let mut scratch = DVector::zeros(sum.len());
        for (i, vi) in v.iter().enumerate().skip(1) {
            let fi = self.f.eval(self.times[i], vi);
            scratch.gemv(1.0, &self.step, &sum, 0.0);
            scratch.axpy(self.dt, &fi, 1.0);
            std::mem::swap(&mut sum, &mut scratch);
            let mut ui = &self.homogeneous[i] + &sum;
            ui.axpy(-half, &fi, 1.0);
            out.push(ui);
        }
        out
    }

    pub fn apply_trajectory(&self, v: &Trajectory) -> Result<Trajectory> {
        if v.times != self.times {
            return Err(MildError::GridMismatch("trajectory is not on the solver grid".into()));
        }
        Trajectory::new(self.times.clone(), self.apply(&v.states), self.norm.clone())
    }
}

#[derive(Clone, Debug, Default)]
pub enum InitialGuess {
    /// v⁰(t) ≡ x
    #[default]
    ConstantX,
    Zero,
    Custom(Trajectory),
}

#[derive(Clone, Debug)]
pub struct PicardOptions {
    /// Defaults to λ = 2CL.
    pub weight: Option<BieleckiWeight>,
    /// Stop once the Bielecki defect ‖Φ(v) − v‖_λ is at most this.
    pub tol: f64,
    /// Additionally require max_i ‖Φ(v)(t_i) − v(t_i)‖ ≤ uniform_tol·max(1, max_i‖v(t_i)‖).
    pub uniform_tol: Option<f64>,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { weight: None, tol: 1e-10, uniform_tol: Some(1e-10), max_iter: 200, initial_guess: InitialGuess::ConstantX }
    }
}

impl PicardOptions {
    /// Stopping on the Bielecki defect alone.
    pub fn bielecki_only(tol: f64) -> Self {
        Self { tol, uniform_tol: None, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// Bielecki norm of the last update.
    pub defect: f64,
    /// Sup-over-time norm of the last update.
    pub uniform_defect: f64,
    pub weight: BieleckiWeight,
}

/// Picard iteration of Φ to its fixed point on t_i = iτ/M, i = 0..=M.
pub fn picard_solve(
    g: &Generator,
    f: &Nonlinearity,
    x: &StateVector,
    tau: f64,
    steps: usize,
    opts: &PicardOptions,
) -> Result<PicardSolution> {
    let map = MildMap::new(g, f, x, tau, steps)?;
    let weight = opts.weight.unwrap_or_else(|| BieleckiWeight::default_for(g, f));
    let bound = g.semigroup_bound() * f.lipschitz() + g.stability_bound().max(0.0);
    if !(weight.0 > bound) {
        return Err(MildError::ContractionViolated { lam: weight.0, bound });
    }

    let mut v: Vec<DVector<f64>> = match &opts.initial_guess {
        InitialGuess::ConstantX => vec![x.values.clone(); map.times.len()],
        InitialGuess::Zero => vec![DVector::zeros(x.dim()); map.times.len()],
        InitialGuess::Custom(tr) => {
            if tr.times != map.times || tr.dim() != x.dim() {
                return Err(MildError::GridMismatch("initial guess is not on the solver grid".into()));
            }
            tr.states.clone()
        }
    };

    // With L = 0 the map does not depend on v: one application is exact.
    if f.lipschitz() == 0.0 {
        let next = map.apply(&v);
        let trajectory = Trajectory::new(map.times.clone(), next, x.norm.clone())?;
        return Ok(PicardSolution { trajectory, iterations: 1, defect: 0.0, uniform_defect: 0.0, weight });
    }

    let mut last = (f64::INFINITY, f64::INFINITY);
    for iteration in 1..=opts.max_iter {
        let next = map.apply(&v);
        let (weighted, plain) = defects(&next, &v, &map.times, &x.norm, weight);
        v = next;
        if v.iter().any(|s| s.iter().any(|c| !c.is_finite())) {
            return Err(MildError::NumericalOverflow { t: tau, norm: f64::INFINITY });
        }
        last = (weighted, plain);
        let scale = v.iter().map(|s| x.norm.of(s)).fold(1.0, f64::max);
        let uniform_ok = opts.uniform_tol.is_none_or(|u| plain <= u * scale);
        if weighted <= opts.tol && uniform_ok {
            let trajectory = Trajectory::new(map.times.clone(), v, x.norm.clone())?;
            return Ok(PicardSolution { trajectory, iterations: iteration, defect: weighted, uniform_defect: plain, weight });
        }
    }
    Err(MildError::NoConvergence { iterations: opts.max_iter, defect: last.0 })
}

/// Exponential Euler: u_{k+1} = e^{ΔtA}u_k + Δt φ₁(ΔtA) F(t_k, u_k).
pub fn expeuler_solve(g: &Generator, f: &Nonlinearity, x: &StateVector, tau: f64, steps: usize) -> Result<Trajectory> {
    check_grid(g, x, tau, steps)?;
    let times = uniform_times(tau, steps);
    let dt = tau / steps as f64;
    let step = g.exp(dt)?;
    let forcing = g.phi1_step(dt)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(x.values.clone());
    for k in 0..steps {
        let u = &states[k];
        let mut next = &step * u;
        next.gemv(1.0, &forcing, &f.eval(times[k], u), 1.0);
        if next.iter().any(|c| !c.is_finite()) {
            return Err(MildError::NumericalOverflow { t: times[k + 1], norm: f64::INFINITY });
        }
        states.push(next);
    }
    Trajectory::new(times, states, x.norm.clone())
}

/// Grid and sampling used by [`contraction_diagnostics`].
#[derive(Clone, Copy, Debug)]
pub struct ProbeSetup {
    pub tau: f64,
    pub steps: usize,
    /// Probe trajectories are drawn from [−amplitude, amplitude]^dim.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for ProbeSetup {
    fn default() -> Self {
        Self { tau: 1.0, steps: 200, amplitude: 1.0, seed: 0 }
    }
}

/// Measured Lipschitz constant q̂ of Φ in the Bielecki norm, maximized over
/// random trajectory pairs. The analytic bound is CL/λ.
///
/// The time grid is refined until λΔt ≤ 1/6, where the trapezoid sum of
/// e^{−λ(t−s)} overshoots the exact integral by well under 1%.
pub fn contraction_diagnostics(g: &Generator, f: &Nonlinearity, w: BieleckiWeight, probes: usize, setup: &ProbeSetup) -> Result<f64> {
    if probes == 0 {
        return Err(invalid("contraction_diagnostics needs at least one probe"));
    }
    let steps = setup.steps.max((6.0 * w.0 * setup.tau).ceil() as usize).max(2);
    let zero = StateVector::new(DVector::zeros(g.dim()), g.norm().clone())?;
    let map = MildMap::new(g, f, &zero, setup.tau, steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let a = setup.amplitude;
    let n = map.times.len();
    let mut worst = 0.0_f64;
    for k in 0..probes {
        let v: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(g.dim(), |_, _| rng.random_range(-a..a))).collect();
        let v2: Vec<DVector<f64>> = if k % 2 == 0 {
            (0..n).map(|_| DVector::from_fn(g.dim(), |_, _| rng.random_range(-a..a))).collect()
        } else {
            // difference growing like e^{λt}, the extremal shape for the weighted norm
            let dir = DVector::from_fn(g.dim(), |_, _| rng.random_range(-1.0..1.0));
            let lam_tau = w.0 * setup.tau;
            v.iter().zip(&map.times).map(|(s, t)| s + &dir * (0.5 * a * (w.0 * t - lam_tau).exp())).collect()
        };
        let (den, _) = defects(&v, &v2, &map.times, g.norm(), w);
        if den == 0.0 {
            continue;
        }
        let (num, _) = defects(&map.apply(&v), &map.apply(&v2), &map.times, g.norm(), w);
        worst = worst.max(num / den);
    }
    Ok(worst)
}

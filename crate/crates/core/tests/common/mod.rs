#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use mildlab::config::ExperimentConfig;
use mildlab::mild::{bielecki_l1_norm, bielecki_norm, uniform_times, BieleckiWeight, Trajectory};
use mildlab::models::neuro::{build_q, neuro_generator, PoolGeometry};
use mildlab::models::ModelPair;
use mildlab::operator::Generator;
use mildlab::{Norm, StateVector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped_configs() -> Vec<(String, ExperimentConfig)> {
    let dir = workspace_root().join("configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("reading {}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml" || x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (name, cfg)
        })
        .collect()
}

pub struct Shipped {
    pub name: String,
    pub cfg: ExperimentConfig,
    pub mp: ModelPair,
    pub x: StateVector,
    /// Generators at the first, middle and last sweep parameter.
    pub generators: Vec<(f64, Generator)>,
}

pub fn shipped() -> &'static [Shipped] {
    static CELL: OnceLock<Vec<Shipped>> = OnceLock::new();
    CELL.get_or_init(|| {
        shipped_configs()
            .into_iter()
            .map(|(name, cfg)| {
                let mp = cfg.build_model().unwrap();
                let x = cfg.initial_state(&mp).unwrap();
                let params = cfg.sweep_params(&mp);
                let picks = [params[0], params[params.len() / 2], params[params.len() - 1]];
                let generators = picks.iter().map(|&p| (p, mp.generator(p).unwrap())).collect();
                Shipped { name, cfg, mp, x, generators }
            })
            .collect()
    })
}

pub fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases: 100, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn random_vector(seed: u64, n: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

type Suite = fn() -> Result<usize, String>;

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<usize, String> {
    let mut r = runner();
    let cases = r.config().cases as usize;
    r.run(&strategy, test).map(|_| cases).map_err(|e| e.to_string())
}

fn pick() -> impl Strategy<Value = (usize, usize)> {
    let n = shipped().len();
    (0..n, 0..3usize)
}

/// ‖e^{(s+t)A}x − e^{sA}e^{tA}x‖ ≤ 1e-9‖x‖.
pub fn semigroup_law() -> Result<usize, String> {
    run((pick(), 0.0..2.0f64, 0.0..2.0f64, any::<u64>()), |((m, k), s, t, seed)| {
        let sh = &shipped()[m];
        let (p, g) = &sh.generators[k];
        let x = random_vector(seed, g.dim());
        let lhs = g.exp_apply(s + t, &x).unwrap();
        let rhs = g.exp_apply(s, &g.exp_apply(t, &x).unwrap()).unwrap();
        let (d, nx) = (g.norm().distance(&lhs, &rhs), g.norm().of(&x));
        check(d <= 1e-9 * nx, || format!("{} at p = {p}: s = {s}, t = {t}, defect {d:.3e}", sh.name))
    })
}

/// Every model projection and its action on random states is idempotent.
pub fn projection_idempotence() -> Result<usize, String> {
    run((0..shipped().len(), any::<u64>()), |(m, seed)| {
        let sh = &shipped()[m];
        let p = sh.mp.projection();
        check(p.idempotence_defect() <= 1e-10, || format!("{}: defect {:.3e}", sh.name, p.idempotence_defect()))?;
        let x = random_vector(seed, p.dim()) * 3.0;
        let px = p.apply(&x);
        let d = (p.apply(&px) - &px).amax();
        check(d <= 1e-10 * x.amax().max(1.0), || format!("{}: P(Px) - Px = {d:.3e}", sh.name))?;
        check(sh.mp.x0_membership(&px), || format!("{}: Px not in X0", sh.name))
    })
}

/// ‖e^{tA}x‖ ≤ C e^{ωt}‖x‖ with the declared constants.
pub fn contractivity() -> Result<usize, String> {
    run((pick(), 0.0..10.0f64, any::<u64>()), |((m, k), t, seed)| {
        let sh = &shipped()[m];
        let (p, g) = &sh.generators[k];
        let x = random_vector(seed, g.dim());
        let y = g.exp_apply(t, &x).unwrap();
        let bound = g.semigroup_bound() * (g.stability_bound() * t).exp() * g.norm().of(&x);
        let ny = g.norm().of(&y);
        check(ny <= bound * (1.0 + 1e-8), || format!("{} at p = {p}, t = {t}: {ny} > {bound}", sh.name))
    })
}

/// Kolmogorov generators: e^{tQ} is stochastic. Symmetric pool operators
/// without boundary loss conserve mass.
pub fn conservativity() -> Result<usize, String> {
    let perm = 0.05..5.0f64;
    run((perm.clone(), perm.clone(), perm.clone(), perm, 0.0..5.0f64, any::<u64>()), |(p12, p21, p23, p32, t, seed)| {
        let geom = PoolGeometry { p12, p21, p23, p32, ..Default::default() };
        let q = build_q(&geom).unwrap();
        let qd = DMatrix::from_fn(3, 3, |i, j| q[(i, j)]);
        let e = Generator::from_matrix(qd).unwrap().exp(t).unwrap();
        for i in 0..3 {
            let s = e.row(i).sum();
            check((s - 1.0).abs() <= 1e-10, || format!("row {i} of e^(tQ) sums to {s}"))?;
        }
        check(e.iter().all(|v| *v >= -1e-14), || format!("negative entry in e^(tQ): {e}"))?;

        let sym = PoolGeometry { p12, p21: p12, p23, p32: p23, ..Default::default() };
        let g = neuro_generator(60, &sym, 1.0 + 100.0 * t).unwrap();
        let x = random_vector(seed, 60);
        let w = g.grid().weights.clone();
        let mass = |v: &DVector<f64>| v.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
        let y = g.exp_apply(t, &x).unwrap();
        check((mass(&y) - mass(&x)).abs() <= 1e-9, || format!("mass {} -> {}", mass(&x), mass(&y)))
    })
}

/// Constant trajectories, exact exponentials, homogeneity and the triangle
/// inequality for the Bielecki norms.
pub fn bielecki_identities() -> Result<usize, String> {
    run((0.01..20.0f64, 2..200usize, -5.0..5.0f64, any::<u64>()), |(lam, steps, c, seed)| {
        let w = BieleckiWeight::new(lam).unwrap();
        let tau = 1.0;
        let times = uniform_times(tau, steps);
        let n = times.len();
        let x = random_vector(seed, 4);
        let constant = Trajectory::new(times.clone(), vec![x.clone(); n], Norm::Sup).unwrap();
        check(bielecki_norm(&constant, w) == x.amax(), || "constant trajectory".into())?;

        let grow =
            Trajectory::new(times.clone(), times.iter().map(|t| DVector::from_element(1, (lam * t).exp())).collect(), Norm::Sup).unwrap();
        let b = bielecki_norm(&grow, w);
        check((b - 1.0).abs() <= 1e-12, || format!("e^(lam t) has Bielecki norm {b}"))?;
        let l1 = bielecki_l1_norm(&constant, w);
        let expect = times.iter().map(|t| t * (-lam * t).exp()).fold(0.0, f64::max) * x.amax();
        check((l1 - expect).abs() <= 1e-12, || format!("L1 Bielecki norm of a constant: {l1} vs {expect}"))?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut random = || {
            let states = (0..n).map(|_| DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0))).collect();
            Trajectory::new(times.clone(), states, Norm::Sup).unwrap()
        };
        let (u, v) = (random(), random());
        let scaled = Trajectory::new(times.clone(), u.states().iter().map(|s| s * c).collect(), Norm::Sup).unwrap();
        let (nu, ns) = (bielecki_norm(&u, w), bielecki_norm(&scaled, w));
        check((ns - c.abs() * nu).abs() <= 1e-12 * nu.max(1.0), || "homogeneity".into())?;
        let sum = Trajectory::new(times.clone(), u.states().iter().zip(v.states()).map(|(a, b)| a + b).collect(), Norm::Sup).unwrap();
        check(bielecki_norm(&sum, w) <= nu + bielecki_norm(&v, w) + 1e-14, || "triangle inequality".into())?;
        let sup = u.sup_norm();
        check(nu <= sup && nu >= (-lam * tau).exp() * sup - 1e-15, || "sup-norm sandwich".into())
    })
}

pub const SUITES: [(&str, Suite); 5] = [
    ("semigroup law", semigroup_law),
    ("projection idempotence", projection_idempotence),
    ("contractivity", contractivity),
    ("conservativity", conservativity),
    ("Bielecki identities", bielecki_identities),
];

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use mildlab::config::ExperimentConfig;
use mildlab::convergence::{folk_property_harness, sweep, Classification, SolverChoice};
use mildlab::mild::{contraction_diagnostics, expeuler_solve, picard_solve, BieleckiWeight, ProbeSetup};
use mildlab::models::mck::MckParams;
use mildlab::models::thin_layer::{build_thin_layer, form_monotonicity_check};
use mildlab::ModelPair;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> ExperimentConfig {
    let path = common::workspace_root().join("configs").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ok_if(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let cfg = config("keener");
    let mp = cfg.build_model().map_err(|e| e.to_string())?;
    let x = cfg.initial_state(&mp).map_err(|e| e.to_string())?;
    let g = mp.generator(1.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let pic = picard_solve(&g, &mp.nonlinearity, &x, 1.0, 4096, &cfg.picard_options()).map_err(|e| e.to_string())?;
    let exp = expeuler_solve(&g, &mp.nonlinearity, &x, 1.0, 4096).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let err = pic.trajectory.states().iter().zip(exp.states()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    ok_if(
        err <= 1e-4 && secs <= 60.0,
        format!("Keener N = 64, M = 4096: picard vs expeuler sup error {err:.3e}, {} Picard iterations, {secs:.2} s", pic.iterations),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for (name, cfg) in common::shipped_configs() {
        let mp = cfg.build_model().map_err(|e| e.to_string())?;
        let params = cfg.sweep_params(&mp);
        for p in [params[0], params[params.len() - 1]] {
            let g = mp.generator(p).map_err(|e| e.to_string())?;
            let f = &mp.nonlinearity;
            let w = BieleckiWeight::default_for(&g, f);
            let amplitude = mp.sample_box.0.abs().max(mp.sample_box.1.abs());
            let setup = ProbeSetup { tau: cfg.tau, steps: 200, amplitude, seed: cfg.seed };
            let q = contraction_diagnostics(&g, f, w, cfg.probes, &setup).map_err(|e| format!("{name}: {e}"))?;
            let bound = g.semigroup_bound() * f.lipschitz() / w.lam();
            worst = worst.max(q - bound);
            if q > bound + 5e-3 {
                lines.push(format!("{name} at {p}: q = {q:.4} > {bound:.4} + 5e-3"));
            }
        }
    }
    ok_if(
        lines.is_empty(),
        if lines.is_empty() { format!("q - CL/lambda at most {worst:.2e} over all shipped configs") } else { lines.join("; ") },
    )
}

fn criterion_3() -> Outcome {
    let cfg = config("keener");
    let mp = cfg.build_model().map_err(|e| e.to_string())?;
    let x = cfg.initial_state(&mp).map_err(|e| e.to_string())?;
    let params = cfg.sweep_params(&mp);
    if params.len() != 15 || params[14] != 16384.0 || cfg.delta() != 0.1 || cfg.tau != 1.0 {
        return Err(format!("unexpected sweep setup {params:?}, delta {}", cfg.delta()));
    }
    let r = sweep(&mp, &x, &cfg.sweep_setup(&mp, SolverChoice::Picard)).map_err(|e| e.to_string())?;
    let jump = x.norm.distance(&x.values, &mp.projection().apply(&x.values));
    let last = r.errors.last().unwrap();
    let floor_ok = r.errors.iter().all(|e| e.sup_0_tau >= jump - 1e-9);
    let irregular = r.classification == Classification::Irregular && last.sup_delta_tau <= 1e-2 * x.norm() && floor_ok;

    let reg_cfg = config("keener-regular");
    let y = reg_cfg.initial_state(&mp).map_err(|e| e.to_string())?;
    if !mp.x0_membership(&y.values) {
        return Err("keener-regular initial state is not in X0".into());
    }
    let rr = sweep(&mp, &y, &reg_cfg.sweep_setup(&mp, SolverChoice::Picard)).map_err(|e| e.to_string())?;
    let rlast = rr.errors.last().unwrap();
    let regular = rr.classification == Classification::Regular && rlast.sup_0_tau <= 1e-2 * y.norm();
    ok_if(
        irregular && regular,
        format!(
            "bump: {:?}, sup_delta(2^14) = {:.3e} (limit {:.3e}), min sup_0 = {:.4} vs |x - Px| = {jump:.4}; flat: {:?}, sup_0(2^14) = {:.3e}",
            r.classification,
            last.sup_delta_tau,
            1e-2 * x.norm(),
            r.errors.iter().map(|e| e.sup_0_tau).fold(f64::INFINITY, f64::min),
            rr.classification,
            rlast.sup_0_tau
        ),
    )
}

/// Largest gap between the limit nonlinearity and `expected`, over random
/// states of the regularity space drawn by `draw`.
fn shadow_gap(mp: &ModelPair, draw: impl Fn(&mut ChaCha8Rng) -> DVector<f64>, expected: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..50)
        .map(|_| {
            let u = draw(&mut rng);
            assert!(mp.x0_membership(&u));
            let got = mp.limit.nonlinearity.eval(0.0, &u);
            (got - expected(&u)).amax().max(mp.nonlinearity_replacement_defect(0.0, &u))
        })
        .fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let keener = config("keener");
    let km = keener.build_model().map_err(|e| e.to_string())?;
    let n = keener.keener.as_ref().unwrap().n;
    let keener_gap = shadow_gap(
        &km,
        |rng| {
            let h = rng.random_range(-2.0..2.0);
            DVector::from_fn(2 * n, |i, _| if i < n { rng.random_range(-2.0..2.0) } else { h })
        },
        |u| {
            let h = u[n];
            let mean = (0..n).map(|i| u[i] - h).sum::<f64>() / n as f64;
            DVector::from_fn(2 * n, |i, _| if i < n { u[i] - u[i].powi(3) - h } else { mean })
        },
    );

    let mck = config("mck");
    let mm = mck.build_model().map_err(|e| e.to_string())?;
    let sec = mck.mck.as_ref().unwrap();
    let (n, q): (usize, MckParams) = (sec.n, sec.params);
    let hi = [sec.clip.c1, sec.clip.c2, sec.clip.c3];
    let mck_gap = shadow_gap(
        &mm,
        |rng| {
            let g = rng.random_range(0.0..hi[2]);
            DVector::from_fn(3 * n, |i, _| if i < 2 * n { rng.random_range(0.0..hi[i / n]) } else { g })
        },
        |u| {
            let (c, b, g) = (u.rows(0, n), u.rows(n, n), u[2 * n]);
            let bound = |i: usize| q.a_max * b[i] / (1.0 + b[i]);
            let supply = |i: usize| q.kappa0 + q.kappa1 * c[i] / (1.0 + c[i]);
            let avg = (0..n).map(|i| -q.alpha * c[i] * g - q.d_g * g + supply(i) + q.d * b[i]).sum::<f64>() / n as f64;
            DVector::from_fn(3 * n, |k, _| match k / n {
                0 => ((2.0 * q.p - 1.0) * bound(k) - q.d_c) * c[k],
                1 => q.alpha * c[k - n] * g - (q.d_b + q.d) * b[k - n],
                _ => avg,
            })
        },
    );
    ok_if(
        keener_gap <= 1e-9 && mck_gap <= 1e-9,
        format!("max deviation from the averaged fast equation: Keener {keener_gap:.2e}, MCK {mck_gap:.2e}"),
    )
}

/// Five smallest eigenvalues of −(Δ_x − diag(s)) on a Neumann cell grid.
fn reduced_eigenvalues(nx: usize, s: &[f64]) -> Vec<f64> {
    let h = 1.0 / nx as f64;
    let mut m = DMatrix::zeros(nx, nx);
    for i in 0..nx {
        if i > 0 {
            m[(i, i - 1)] = -1.0 / (h * h);
            m[(i, i)] += 1.0 / (h * h);
        }
        if i + 1 < nx {
            m[(i, i + 1)] = -1.0 / (h * h);
            m[(i, i)] += 1.0 / (h * h);
        }
        m[(i, i)] += s[i];
    }
    smallest(SymmetricEigen::new(m).eigenvalues.iter().cloned().collect())
}

fn smallest(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.truncate(5);
    v
}

fn criterion_5() -> Outcome {
    let (nx, nz) = (16, 8);
    let eps: Vec<f64> = (0..8).map(|k| 2f64.powi(-k)).collect();
    let xs: Vec<f64> = (0..nx).map(|i| (i as f64 + 0.5) / nx as f64).collect();
    let profiles = [
        ("c + d = 1", vec![0.5; nx], vec![0.5; nx]),
        ("nonconstant c + d", xs.iter().map(|x| 0.3 + 0.5 * x).collect(), xs.iter().map(|x| 0.2 + (3.0 * x).sin().powi(2)).collect()),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (label, c, d) in &profiles {
        let report = form_monotonicity_check(nx, nz, c, d, &eps, 50, 11).map_err(|e| e.to_string())?;
        let sum: Vec<f64> = c.iter().zip(d).map(|(a, b)| a + b).collect();
        let target = reduced_eigenvalues(nx, &sum);
        let g = build_thin_layer(nx, nz, eps[7], c, d).map_err(|e| e.to_string())?;
        let full = smallest(match g.eigenvalues() {
            Some(ev) => ev.iter().map(|l| -l).collect(),
            None => return Err("thin-layer generator was not diagonalized".into()),
        });
        let rel = full.iter().zip(&target).map(|(a, b)| (a - b).abs() / b.abs()).fold(0.0, f64::max);
        pass &= report.passed() && rel <= 5e-2;
        details.push(format!("{label}: {} probes, {} violations, eigenvalue rel. error {rel:.2e}", report.probes, report.violations.len()));
    }
    ok_if(pass, details.join("; "))
}

/// Classic RK4 for v' = Qv + (0, 0, β̄(u♯ − v₃)⁺), sampled every `every` steps.
fn pool_ode(q: &[[f64; 3]; 3], beta: f64, u_sharp: f64, v0: [f64; 3], dt: f64, steps: usize, every: usize) -> Vec<[f64; 3]> {
    let rhs = |v: [f64; 3]| {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (0..3).map(|j| q[i][j] * v[j]).sum();
        }
        out[2] += beta * (u_sharp - v[2]).max(0.0);
        out
    };
    let axpy = |v: [f64; 3], k: [f64; 3], a: f64| [v[0] + a * k[0], v[1] + a * k[1], v[2] + a * k[2]];
    let mut v = v0;
    let mut out = vec![v];
    for s in 1..=steps {
        let k1 = rhs(v);
        let k2 = rhs(axpy(v, k1, dt / 2.0));
        let k3 = rhs(axpy(v, k2, dt / 2.0));
        let k4 = rhs(axpy(v, k3, dt));
        for i in 0..3 {
            v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if s % every == 0 {
            out.push(v);
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let cfg = config("neuro");
    let sec = cfg.neuro.as_ref().unwrap();
    let geom = sec.geometry;
    if sec.n != 300 || geom.a != 0.2 || geom.b != 0.5 || sec.u_sharp != 1.0 {
        return Err("neuro config does not match the acceptance geometry".into());
    }
    let mp = cfg.build_model().map_err(|e| e.to_string())?;
    let x = cfg.initial_state(&mp).map_err(|e| e.to_string())?;
    let n = sec.n;
    let pool = |i: usize| {
        let c = (i as f64 + 0.5) / n as f64;
        if c < geom.a {
            0
        } else if c < geom.b {
            1
        } else {
            2
        }
    };
    let averages = |u: &DVector<f64>| {
        let (mut s, mut k) = ([0.0; 3], [0.0; 3]);
        for i in 0..n {
            s[pool(i)] += u[i];
            k[pool(i)] += 1.0;
        }
        [s[0] / k[0], s[1] / k[1], s[2] / k[2]]
    };
    // mass balance m_k v_k' = Σ p (v_j − v_k) across each membrane
    let m = [geom.a, geom.b - geom.a, 1.0 - geom.b];
    let q = [
        [-geom.p12 / m[0], geom.p12 / m[0], 0.0],
        [geom.p21 / m[1], -(geom.p21 + geom.p23) / m[1], geom.p23 / m[1]],
        [0.0, geom.p32 / m[2], -geom.p32 / m[2] - geom.robin / m[2]],
    ];
    let steps = 1000;
    let limit = pool_ode(&q, 1.0, sec.u_sharp, averages(&x.values), 1e-5, 100 * steps, 100);

    let mut gaps = Vec::new();
    for kappa in [1e3, 1e4] {
        let g = mp.generator(kappa).map_err(|e| e.to_string())?;
        let sol = picard_solve(&g, &mp.nonlinearity, &x, 1.0, steps, &cfg.picard_options()).map_err(|e| e.to_string())?;
        let gap = sol
            .trajectory
            .times()
            .iter()
            .zip(sol.trajectory.states())
            .zip(&limit)
            .filter(|((t, _), _)| **t >= 0.1 - 1e-12)
            .map(|((_, u), v)| {
                let a = averages(u);
                (0..3).map(|k| (a[k] - v[k]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    ok_if(
        gaps[0] <= 2e-2 && gaps[1] < gaps[0],
        format!("pool-average discrepancy on [0.1, 1]: {:.3e} at kappa = 1e3, {:.3e} at kappa = 1e4", gaps[0], gaps[1]),
    )
}

fn criterion_7() -> Outcome {
    let report = folk_property_harness(2024, 200).map_err(|e| e.to_string())?;
    ok_if(
        report.trials == 200 && report.passed(),
        format!(
            "{} trials, {} checks, {} violations, tightest ratio {:.4}",
            report.trials,
            report.checks,
            report.violations.len(),
            report.tightest
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, suite) in common::SUITES {
        match suite() {
            Ok(cases) if cases >= 100 => details.push(format!("{name} ({cases})")),
            Ok(cases) => {
                pass = false;
                details.push(format!("{name} ran only {cases} cases"));
            }
            Err(e) => {
                pass = false;
                details.push(format!("{name} failed: {e}"));
            }
        }
    }
    ok_if(pass, details.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", criterion_1),
        ("contraction bound", criterion_2),
        ("irregular-convergence signature", criterion_3),
        ("shadow-system limit content", criterion_4),
        ("thin-layer form monotonicity and limit", criterion_5),
        ("neurotransmitter lumping", criterion_6),
        ("fixed-point stability harness", criterion_7),
        ("invariant suites", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} - {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} - {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

mod common;

use mildlab::convergence::error_metrics;
use mildlab::mild::{expeuler_solve, picard_solve, PicardOptions};
use mildlab::models::keener::{build_keener, KeenerParams, KeenerReaction};
use mildlab::models::mck::{build_mck, ClipBox, MckParams};
use mildlab::models::neuro::{neuro_generator, PoolGeometry};
use mildlab::models::thin_layer::build_thin_layer;
use nalgebra::DVector;

#[test]
fn keener_full_tracks_shadow_system_at_large_kappa() {
    let n = 64;
    let mp = build_keener(&KeenerParams::new(n, 1e-3, KeenerReaction::clipped_cubic(2.0))).unwrap();
    let x = mp.state(mp.preset("flat").unwrap().clone()).unwrap();
    let opts = PicardOptions::default();
    let full = picard_solve(&mp.generator(1e4).unwrap(), &mp.nonlinearity, &x, 1.0, 1000, &opts).unwrap();
    let lim = picard_solve(&mp.limit.generator, &mp.limit.nonlinearity, &x, 1.0, 1000, &opts).unwrap();
    let e = error_metrics(&full.trajectory, &lim.trajectory, 0.1, 1.0).unwrap();
    assert!(e.sup_0_tau <= 5e-3, "{e:?}");
}

#[test]
fn mck_one_step_matches_taylor_expansion() {
    let n = 16;
    let params = MckParams::default();
    let mp = build_mck(n, &params, &ClipBox::default()).unwrap();
    let x = mp.state(mp.preset("bump-in-fast-component").unwrap().clone()).unwrap();
    let g = mp.generator(2.0).unwrap();
    let a = g.matrix();
    let fx = mp.nonlinearity.eval(0.0, &x.values);
    let first = a * &x.values + &fx;
    let defect = |dt: f64| {
        let step = expeuler_solve(&g, &mp.nonlinearity, &x, dt, 2).unwrap();
        // two steps of size dt/2 against the first-order Taylor polynomial
        (step.last() - (&x.values + &first * dt)).amax()
    };
    let (d1, d2) = (defect(1e-3), defect(5e-4));
    let ratio = d1 / d2;
    assert!((ratio - 4.0).abs() < 0.2, "{d1} {d2}");

    // the rhs in the interior of the box, straight from the model equations
    let (c, b, gv) = (x.values[3], x.values[n + 3], x.values[2 * n + 3]);
    let a_cb = params.a_max * b / (1.0 + b);
    assert!((fx[3] - ((2.0 * params.p - 1.0) * a_cb - params.d_c) * c).abs() < 1e-14);
    let supply = params.kappa0 + params.kappa1 * c / (1.0 + c);
    assert!((fx[2 * n + 3] - (-params.alpha * c * gv - params.d_g * gv + supply + params.d * b)).abs() < 1e-14);
}

#[test]
fn thin_layer_separates_variables() {
    let (nx, nz) = (12, 6);
    let zeros = vec![0.0; nx];
    let mu = |k: f64, m: usize| {
        let h = 1.0 / m as f64;
        4.0 / (h * h) * (0.5 * k * std::f64::consts::PI * h).sin().powi(2)
    };
    for eps in [1.0, 0.25] {
        let g = build_thin_layer(nx, nz, eps, &zeros, &zeros).unwrap();
        let u = DVector::from_fn(nx * nz, |i, _| {
            let (ix, iz) = (i / nz, i % nz);
            let x = (ix as f64 + 0.5) / nx as f64;
            let z = (iz as f64 + 0.5) / nz as f64;
            (std::f64::consts::PI * x).cos() * (2.0 * std::f64::consts::PI * z).cos()
        });
        let rate = mu(1.0, nx) + mu(2.0, nz) / (eps * eps);
        for t in [1e-3, 1e-2] {
            let got = g.exp_apply(t, &u).unwrap();
            assert!((got - &u * (-rate * t).exp()).amax() < 1e-11, "eps {eps}, t {t}");
        }
    }
}

#[test]
fn pool_constants_evolve_by_mass_balance() {
    let n = 40;
    let geom = PoolGeometry { a: 0.2, b: 0.5, p12: 2.0, p21: 2.0, p23: 0.5, p32: 0.5, robin: 0.3, diffusion: 1.0 };
    let g = neuro_generator(n, &geom, 50.0).unwrap();
    let pool = |i: usize| {
        let c = (i as f64 + 0.5) / n as f64;
        (c >= geom.a) as usize + (c >= geom.b) as usize
    };
    let v = [1.0, -2.0, 0.5];
    let u = DVector::from_fn(n, |i, _| v[pool(i)]);
    // m_k v_k' = Σ p (v_j − v_k) − r v_3 on the outer pool
    let m = [8.0 / 40.0, 12.0 / 40.0, 20.0 / 40.0];
    let rates = [
        geom.p12 * (v[1] - v[0]) / m[0],
        (geom.p21 * (v[0] - v[1]) + geom.p23 * (v[2] - v[1])) / m[1],
        (geom.p32 * (v[1] - v[2]) - geom.robin * v[2]) / m[2],
    ];
    let au = g.matrix() * &u;
    let h = 1.0 / n as f64;
    for k in 0..3 {
        let total: f64 = (0..n).filter(|i| pool(*i) == k).map(|i| au[i] * h).sum();
        assert!((total / m[k] - rates[k]).abs() < 1e-10, "pool {k}");
    }
}

#[test]
fn shipped_configs_build_and_have_consistent_limits() {
    for sh in common::shipped() {
        assert_eq!(sh.x.dim(), sh.mp.dim());
        let p = sh.mp.projection();
        let lim = &sh.mp.limit.generator;
        let pa = p.matrix() * lim.matrix();
        assert!((&pa - lim.matrix()).amax() <= 1e-8 * lim.matrix().amax().max(1.0), "{}", sh.name);
        let u = p.apply(&sh.x.values);
        assert!(sh.mp.nonlinearity_replacement_defect(0.0, &u) <= 1e-9, "{}", sh.name);
    }
}

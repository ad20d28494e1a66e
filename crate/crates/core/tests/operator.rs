use mildlab::operator::{dissipativity_check, expm_apply, limit_projection, resolvent_apply, Generator};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(seed: u64, n: usize, scale: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
}

fn taylor_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..60 {
        term = &term * a * (t / k as f64);
        sum += &term;
    }
    sum
}

#[test]
fn exp_matches_taylor_series() {
    for seed in 0..10 {
        let a = random_matrix(seed, 6, 1.0);
        let g = Generator::from_matrix(a.clone()).unwrap();
        for t in [0.0, 0.1, 1.0, 2.5] {
            let d = (g.exp(t).unwrap() - taylor_exp(&a, t)).amax();
            assert!(d < 1e-11 * taylor_exp(&a, t).amax().max(1.0), "seed {seed}, t {t}: {d}");
        }
    }
}

#[test]
fn rotation_generator_has_closed_form() {
    let g = Generator::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
    for t in [0.3, 3.0, 30.0] {
        let e = g.exp(t).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((e - want).amax() < 1e-12 * t.max(1.0));
    }
}

#[test]
fn symmetric_stiff_generator_matches_eigen_oracle() {
    // −κ·(path Laplacian), diagonalized independently
    let n = 20;
    let kappa = 1e4;
    let lap = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -(if i == 0 || i == n - 1 { 1.0 } else { 2.0 })
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    }) * kappa;
    let eig = lap.clone().symmetric_eigen();
    let g = Generator::from_matrix(lap).unwrap();
    let t = 0.01;
    let oracle = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l * t).exp())) * eig.eigenvectors.transpose();
    assert!((g.exp(t).unwrap() - oracle).amax() < 1e-12);
}

#[test]
fn resolvent_is_laplace_transform_of_semigroup() {
    let mut a = random_matrix(3, 4, 0.5);
    a -= DMatrix::identity(4, 4) * 2.0;
    let g = Generator::from_matrix(a).unwrap().with_stability_bound(0.0);
    let y = g.state(DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0])).unwrap();
    let lam = 1.5;
    // composite Simpson on [0, 40]; the integrand has decayed below 1e-20 there
    let (steps, end) = (8000, 40.0);
    let h = end / steps as f64;
    let mut integral = DVector::zeros(4);
    for k in 0..=steps {
        let t = k as f64 * h;
        let w = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += expm_apply(&g, t, &y).unwrap().values * (w * (-lam * t).exp());
    }
    integral *= h / 3.0;
    let r = resolvent_apply(&g, lam, &y).unwrap();
    assert!((r.values - integral).amax() < 1e-8);
}

#[test]
fn resolvent_rejects_lambda_below_growth_bound() {
    let g = Generator::from_matrix(DMatrix::identity(2, 2)).unwrap().with_stability_bound(1.0);
    let y = g.state(DVector::from_element(2, 1.0)).unwrap();
    assert!(resolvent_apply(&g, 0.5, &y).is_err());
}

/// Stationary distribution of an irreducible Kolmogorov matrix from πQ = 0,
/// Σπ = 1, solved directly.
fn stationary(q: &DMatrix<f64>) -> DVector<f64> {
    let n = q.nrows();
    let mut m = q.transpose();
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    m.lu().solve(&rhs).unwrap()
}

#[test]
fn limit_of_markov_chain_is_stationary_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let n = 5;
        let mut q = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.1..2.0) });
        for i in 0..n {
            let s: f64 = q.row(i).sum();
            q[(i, i)] = -s;
        }
        let pi = stationary(&q);
        let p = limit_projection(&Generator::from_matrix(q).unwrap(), None, 1e-10).unwrap();
        let want = DMatrix::from_fn(n, n, |_, j| pi[j]);
        assert!((p.matrix() - want).amax() < 1e-9);
        assert_eq!(p.range_dim(), 1);
    }
}

#[test]
fn limit_projection_fails_for_rotation() {
    let g = Generator::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
    assert!(limit_projection(&g, None, 1e-10).is_err());
}

#[test]
fn dissipativity_of_symmetric_negative_matrix() {
    let g = Generator::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0, 0.0]))).unwrap();
    let m = dissipativity_check(&g, 50, 1).unwrap();
    assert!(m <= 1.0 + 1e-12);
}

//! Dense matrix exponentials.
//!
//! General matrices go through scaling-and-squaring with the [13/13] Padé
//! approximant. Matrices that are self-adjoint in a diagonal weighted inner
//! product are diagonalized once and exponentiated through their spectrum,
//! which stays exact for arbitrarily large t.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Numerators of the [13/13] Padé coefficients of exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled [13/13] approximant meets unit roundoff.
const THETA_13: f64 = 5.371920351148152;

pub(crate) fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// exp(A) by scaling and squaring. Returns `None` if the Padé denominator
/// is singular or the result is not finite.
pub fn expm_pade(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm of a non-square matrix");
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return None;
    }
    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &PADE13;

    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = &a6 * &w1 + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * w2;
    let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * z1 + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let mut r = (&v - &u).lu().solve(&(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    r.iter().all(|x| x.is_finite()).then_some(r)
}

/// Spectral factorization `A = R diag(values) L` with `L R = I`, valid when
/// `W A` is symmetric for a positive diagonal weight `W`.
#[derive(Clone, Debug)]
pub(crate) struct SpectralFactor {
    pub values: DVector<f64>,
    /// Columns are the eigenvectors of `A`.
    pub right: DMatrix<f64>,
    /// Rows are the dual eigenvectors.
    pub left: DMatrix<f64>,
}

impl SpectralFactor {
    /// Diagonalizes `a` if `diag(w)·a` is symmetric to within `1e-12` relative.
    pub fn try_new(a: &DMatrix<f64>, weights: &[f64]) -> Option<Self> {
        let n = a.nrows();
        if n == 0 || weights.len() != n || weights.iter().any(|w| !(*w > 0.0)) {
            return None;
        }
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        // S = W^{1/2} A W^{-1/2}
        let s = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * a[(i, j)] / sqrt_w[j]);
        let scale = s.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        for j in 0..n {
            for i in 0..j {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * scale {
                    return None;
                }
            }
        }
        let s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let v = eig.eigenvectors;
        let right = DMatrix::from_fn(n, n, |i, k| v[(i, k)] / sqrt_w[i]);
        let left = DMatrix::from_fn(n, n, |k, j| v[(j, k)] * sqrt_w[j]);
        Some(Self { values: eig.eigenvalues, right, left })
    }

    /// R diag(f(values)) L
    pub fn function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.right.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        scaled * &self.left
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = &self.left * x;
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= f(self.values[k]);
        }
        &self.right * coeffs
    }
}

/// (e^z - 1)/z, continuous at 0.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        z.exp_m1() / z
    }
}

/// `φ₁(A)` through the exponential of the augmented block matrix `[[A, I], [0, 0]]`.
pub fn phi1_pade(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    let e = expm_pade(&aug)?;
    Some(e.view((0, n), (n, n)).into_owned())
}

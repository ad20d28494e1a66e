//! Cell-centred 1D grids on [0, 1].
//!
//! Unknown i lives at x_i = (i + ½)h with h = 1/n. Reflecting boundaries use
//! the ghost value u_{-1} = u_0 (resp. u_n = u_{n-1}), so each Laplacian row
//! sums to zero and constants are in the kernel exactly.

use nalgebra::DMatrix;

pub fn cell_centers(n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    (0..n).map(|i| (i as f64 + 0.5) * h).collect()
}

/// `coeff · ∂²ₓ` with Neumann ends, and the cell weights (all equal to h).
pub fn neumann_laplacian(n: usize, coeff: f64) -> (DMatrix<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two cells");
    let h = 1.0 / n as f64;
    let c = coeff / (h * h);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        if i > 0 {
            m[(i, i - 1)] = c;
            m[(i, i)] -= c;
        }
        if i + 1 < n {
            m[(i, i + 1)] = c;
            m[(i, i)] -= c;
        }
    }
    (m, vec![h; n])
}

/// Cell-weighted mean projector: every row equals the normalized weights.
pub fn averaging_matrix(weights: &[f64]) -> DMatrix<f64> {
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    DMatrix::from_fn(n, n, |_, j| weights[j] / total)
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        m.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    m
}

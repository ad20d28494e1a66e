//! Neurotransmitter pools: diffusion on [0, 1] split by two membranes into
//! Ω₁ = [0, a], Ω₂ = [a, b], Ω₃ = [b, 1].
//!
//! ```text
//! u_t = κ D u_xx + β (u♯ − u)⁺       inside each pool
//! κ D u_x = p_ij (u_j − u_i)          across the membrane from Ωᵢ to Ωⱼ
//! κ D u_x = −r u                      at x = 1
//! ```
//!
//! x = 0 is a symmetry axis and reflects. Production β is supported on Ω₃.
//! Only the diffusion is accelerated: permeabilities and the boundary loss
//! stay fixed, so as κ → ∞ each pool mixes instantly and the pool averages
//! follow the three-state intensity matrix Q of [`build_q`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::grid::cell_centers;
use super::{LimitSystem, ModelPair, ParamKind};
use crate::error::{invalid, Result};
use crate::mild::Nonlinearity;
use crate::norm::Norm;
use crate::operator::{BoundaryKind, Generator, GridMeta, Projection};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolGeometry {
    pub a: f64,
    pub b: f64,
    pub p12: f64,
    pub p21: f64,
    pub p23: f64,
    pub p32: f64,
    /// Loss coefficient at x = 1.
    pub robin: f64,
    pub diffusion: f64,
}

impl Default for PoolGeometry {
    fn default() -> Self {
        Self { a: 0.2, b: 0.5, p12: 1.0, p21: 1.0, p23: 1.0, p32: 1.0, robin: 0.0, diffusion: 1.0 }
    }
}

impl PoolGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.a && self.a < self.b && self.b < 1.0) {
            return Err(invalid(format!("need 0 < a < b < 1, got a = {}, b = {}", self.a, self.b)));
        }
        let coeffs = [("p12", self.p12), ("p21", self.p21), ("p23", self.p23), ("p32", self.p32), ("robin", self.robin)];
        for (name, v) in coeffs {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        for (name, fwd, back) in [("1|2", self.p12, self.p21), ("2|3", self.p23, self.p32)] {
            if (fwd == 0.0) != (back == 0.0) {
                return Err(invalid(format!("membrane {name} is permeable in one direction only")));
            }
        }
        if !(self.diffusion > 0.0) || !self.diffusion.is_finite() {
            return Err(invalid(format!("diffusion must be positive, got {}", self.diffusion)));
        }
        Ok(())
    }

    /// Lebesgue measures of the three pools.
    pub fn measures(&self) -> [f64; 3] {
        [self.a, self.b - self.a, 1.0 - self.b]
    }

    fn symmetric(&self) -> bool {
        self.p12 == self.p21 && self.p23 == self.p32
    }
}

/// The intensity matrix for pools of the given measures:
/// q_ij = p_ij/λ(Ωᵢ) for adjacent pools, zero rows sums, plus the boundary
/// loss −r/λ(Ω₃) on the outer pool.
pub fn build_q_with_measures(geom: &PoolGeometry, lam: [f64; 3]) -> Matrix3<f64> {
    let q12 = geom.p12 / lam[0];
    let q21 = geom.p21 / lam[1];
    let q23 = geom.p23 / lam[1];
    let q32 = geom.p32 / lam[2];
    Matrix3::new(-q12, q12, 0.0, q21, -(q21 + q23), q23, 0.0, q32, -q32 - geom.robin / lam[2])
}

/// [`build_q_with_measures`] with the exact pool lengths a, b − a, 1 − b.
pub fn build_q(geom: &PoolGeometry) -> Result<Matrix3<f64>> {
    geom.validate()?;
    Ok(build_q_with_measures(geom, geom.measures()))
}

/// Pool index of every cell, by cell centre. Membranes land on the cell face
/// nearest to a and b.
pub fn pool_of_cells(n: usize, geom: &PoolGeometry) -> Vec<usize> {
    cell_centers(n)
        .into_iter()
        .map(|x| {
            if x < geom.a {
                0
            } else if x < geom.b {
                1
            } else {
                2
            }
        })
        .collect()
}

/// Discrete pool measures n_k·h.
pub fn discrete_measures(pools: &[usize]) -> [f64; 3] {
    let h = 1.0 / pools.len() as f64;
    let mut lam = [0.0; 3];
    for &k in pools {
        lam[k] += h;
    }
    lam
}

/// Pool averaging R (3 × n) and the embedding Φ (n × 3) of pool values as
/// piecewise constants.
pub fn pool_maps(pools: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = pools.len();
    let counts = pools.iter().fold([0usize; 3], |mut c, &k| {
        c[k] += 1;
        c
    });
    let r = DMatrix::from_fn(3, n, |k, i| if pools[i] == k { 1.0 / counts[k] as f64 } else { 0.0 });
    let phi = DMatrix::from_fn(n, 3, |i, k| if pools[i] == k { 1.0 } else { 0.0 });
    (r, phi)
}

/// ℒ on n cells with diffusion κD inside pools, membrane exchange and the
/// outer boundary loss.
pub fn pool_operator(n: usize, geom: &PoolGeometry, kappa: f64) -> DMatrix<f64> {
    let pools = pool_of_cells(n, geom);
    let h = 1.0 / n as f64;
    let inner = kappa * geom.diffusion / (h * h);
    let perm = |from: usize, to: usize| match (from, to) {
        (0, 1) => geom.p12,
        (1, 0) => geom.p21,
        (1, 2) => geom.p23,
        (2, 1) => geom.p32,
        _ => 0.0,
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        let (ki, kj) = (pools[i], pools[i + 1]);
        let (fwd, back) = if ki == kj { (inner, inner) } else { (perm(ki, kj) / h, perm(kj, ki) / h) };
        m[(i, i + 1)] += fwd;
        m[(i, i)] -= fwd;
        m[(i + 1, i)] += back;
        m[(i + 1, i + 1)] -= back;
    }
    m[(n - 1, n - 1)] -= geom.robin / h;
    m
}

/// Measure π with π_i m_{i,i+1} = π_{i+1} m_{i+1,i}, normalized per connected
/// piece. The tridiagonal matrix is self-adjoint in the π-weighted product.
fn detailed_balance(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut pi = vec![1.0; n];
    for i in 0..n - 1 {
        let (f, b) = (m[(i, i + 1)], m[(i + 1, i)]);
        pi[i + 1] = if f > 0.0 && b > 0.0 { pi[i] * f / b } else { 1.0 };
    }
    pi
}

/// sup ‖e^{tℒ}‖ in the uniformly weighted L² norm, bounded through the
/// detailed-balance measure: sqrt(max π / min π) within each connected piece.
fn semigroup_constant(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let pi = detailed_balance(m);
    let mut worst = 1.0_f64;
    let mut start = 0;
    for i in 0..n {
        let piece_ends = i + 1 == n || !(m[(i, i + 1)] > 0.0 && m[(i + 1, i)] > 0.0);
        if piece_ends {
            let piece = &pi[start..=i];
            let hi = piece.iter().cloned().fold(f64::MIN, f64::max);
            let lo = piece.iter().cloned().fold(f64::MAX, f64::min);
            worst = worst.max((hi / lo).sqrt());
            start = i + 1;
        }
    }
    worst
}

fn pool_grid(n: usize) -> GridMeta {
    GridMeta::new(1.0 / n as f64, BoundaryKind::Transmission, vec![1.0 / n as f64; n])
}

fn pool_norm(n: usize) -> Norm {
    Norm::weighted_l2(vec![1.0 / n as f64; n])
}

/// The generator ℒ_κ, in the cell-weighted L² norm.
pub fn neuro_generator(n: usize, geom: &PoolGeometry, kappa: f64) -> Result<Generator> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid(format!("kappa must be positive, got {kappa}")));
    }
    let m = pool_operator(n, geom, kappa);
    let c = if geom.symmetric() { 1.0 } else { semigroup_constant(&m) };
    Ok(Generator::new(m, pool_grid(n), pool_norm(n))?.with_semigroup_bound(c))
}

#[derive(Clone, Debug)]
pub struct NeuroParams {
    pub n: usize,
    pub geometry: PoolGeometry,
    /// Production rate per cell; must vanish on Ω₁ ∪ Ω₂.
    pub beta: Vec<f64>,
    pub u_sharp: f64,
}

impl NeuroParams {
    /// β ≡ `rate` on Ω₃ and 0 elsewhere.
    pub fn with_uniform_production(n: usize, geometry: PoolGeometry, rate: f64, u_sharp: f64) -> Self {
        let beta = pool_of_cells(n, &geometry).into_iter().map(|k| if k == 2 { rate } else { 0.0 }).collect();
        Self { n, geometry, beta, u_sharp }
    }
}

pub fn build_neuro(params: &NeuroParams) -> Result<ModelPair> {
    let NeuroParams { n, geometry: geom, ref beta, u_sharp } = *params;
    if n < 12 {
        return Err(invalid(format!("pool model needs N >= 12, got {n}")));
    }
    geom.validate()?;
    let pools = pool_of_cells(n, &geom);
    if pools.iter().filter(|k| **k == 0).count() == 0 || pools.iter().filter(|k| **k == 1).count() == 0 {
        return Err(invalid("grid too coarse: a pool contains no cells"));
    }
    if beta.len() != n {
        return Err(invalid(format!("beta must have length {n}, got {}", beta.len())));
    }
    if let Some(i) = beta.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid(format!("beta[{i}] = {} must be finite and nonnegative", beta[i])));
    }
    if let Some(i) = (0..n).find(|&i| pools[i] < 2 && beta[i] != 0.0) {
        return Err(invalid(format!("beta must vanish on the inner pools, but beta[{i}] = {}", beta[i])));
    }
    if !(u_sharp > 0.0) || !u_sharp.is_finite() {
        return Err(invalid(format!("u_sharp must be positive, got {u_sharp}")));
    }

    let lip = beta.iter().cloned().fold(0.0, f64::max);
    let b = beta.clone();
    let f = Nonlinearity::autonomous(lip, move |u| DVector::from_fn(u.len(), |i, _| b[i] * (u_sharp - u[i]).max(0.0)))?;
    let norm = pool_norm(n);
    f.check_lipschitz(&norm, n, (0.0, 2.0 * u_sharp), 0.0, 100, 0x6e65)?;

    let lam = discrete_measures(&pools);
    let (r, phi) = pool_maps(&pools);
    let beta3 = (0..n).filter(|&i| pools[i] == 2).map(|i| beta[i]).sum::<f64>() / (n as f64 * lam[2]);
    let q = build_q_with_measures(&geom, lam);
    let q_dyn = DMatrix::from_fn(3, 3, |i, j| q[(i, j)]);
    let a_lim = &phi * &q_dyn * &r;
    let projection = Projection::new(&phi * &r)?;
    let r3 = r.row(2).into_owned();
    let outer: Vec<bool> = pools.iter().map(|k| *k == 2).collect();
    let f_lim = Nonlinearity::autonomous(beta3, move |u| {
        let u3 = (&r3 * u)[0];
        let rate = beta3 * (u_sharp - u3).max(0.0);
        DVector::from_fn(u.len(), |i, _| if outer[i] { rate } else { 0.0 })
    })?;
    let q_sym = geom.symmetric();
    let mut limit_gen = Generator::new(a_lim, pool_grid(n), norm.clone())?;
    if !q_sym {
        let pi = detailed_balance(&pool_operator(n, &geom, 1.0));
        let pool_pi: Vec<f64> = (0..3).map(|k| (0..n).filter(|&i| pools[i] == k).map(|i| pi[i]).sum::<f64>()).collect();
        let q_pi = [pool_pi[0] / lam[0], pool_pi[1] / lam[1], pool_pi[2] / lam[2]];
        let hi = q_pi.iter().cloned().fold(f64::MIN, f64::max);
        let lo = q_pi.iter().cloned().fold(f64::MAX, f64::min);
        limit_gen = limit_gen.with_semigroup_bound((hi / lo).sqrt().max(1.0));
    }
    let limit = LimitSystem { generator: limit_gen, projection, nonlinearity: f_lim };

    let x = cell_centers(n);
    let pool_step = DVector::from_fn(n, |i, _| [u_sharp, u_sharp, 0.2 * u_sharp][pools[i]]);
    let bump = DVector::from_fn(n, |i, _| u_sharp * (0.6 + 0.4 * (2.0 * std::f64::consts::PI * x[i]).cos()));
    let presets = vec![
        ("flat".to_string(), DVector::from_element(n, 0.5 * u_sharp)),
        ("pool-step".to_string(), pool_step),
        ("bump-in-fast-component".to_string(), bump),
    ];

    let card = format!(
        "# Neurotransmitter pools\n\n\
         | continuous | discrete |\n|---|---|\n\
         | u_t = kappa D u_xx + beta (u# - u)+ | N = {n} cells, pools by cell centre: {} / {} / {} cells |\n\
         | flux across membrane i->j = p_ij (u_i - u_j) | face coupling p_ij / h, not scaled by kappa |\n\
         | loss r u at x = 1; reflection at x = 0 | last cell diagonal -r/h |\n\
         | limit v' = Q v + (0, 0, beta3 (u# - v3)+) | Q from pool measures {:.4}, {:.4}, {:.4} |\n\
         | P = pool averaging, embedded as piecewise constants | |\n\n\
         - geometry: {geom:?}\n\
         - mean production on the outer pool beta3 = {beta3:.6}, u# = {u_sharp}\n\
         - norm: cell-weighted L2; perturbation parameter kappa multiplies D only\n",
        (lam[0] * n as f64).round(),
        (lam[1] * n as f64).round(),
        (lam[2] * n as f64).round(),
        lam[0],
        lam[1],
        lam[2],
    );

    let family = Arc::new(move |kappa: f64| neuro_generator(n, &geom, kappa));
    Ok(ModelPair::new("neuro", family, f, limit, ParamKind::Kappa, norm, (0.0, 2.0 * u_sharp), card).with_presets(presets))
}

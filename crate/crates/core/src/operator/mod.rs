//! Finite-dimensional generators, their semigroups, resolvents and
//! long-time limit projections.

pub mod expm;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, MildError, Result};
use crate::norm::{Norm, StateVector};
use expm::{expm_pade, one_norm, phi1, phi1_pade, SpectralFactor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Neumann,
    Robin,
    Transmission,
    None,
}

#[derive(Clone, Debug)]
pub struct GridMeta {
    pub spacing: f64,
    pub boundary: BoundaryKind,
    /// Integration weight of every unknown.
    pub weights: Arc<[f64]>,
}

impl GridMeta {
    pub fn new(spacing: f64, boundary: BoundaryKind, weights: Vec<f64>) -> Self {
        Self { spacing, boundary, weights: weights.into() }
    }

    /// Unit weights and spacing, for generators without a spatial grid.
    pub fn unstructured(dim: usize) -> Self {
        Self::new(1.0, BoundaryKind::None, vec![1.0; dim])
    }
}

/// A dense matrix standing in for the generator of a semigroup.
#[derive(Clone, Debug)]
pub struct Generator {
    matrix: DMatrix<f64>,
    grid: GridMeta,
    norm: Norm,
    stability_bound: f64,
    semigroup_bound: f64,
    spectral: Option<Arc<SpectralFactor>>,
}

impl Generator {
    /// Wraps `matrix`. If it is self-adjoint in the grid's weighted inner
    /// product it is diagonalized here, once.
    pub fn new(matrix: DMatrix<f64>, grid: GridMeta, norm: Norm) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(invalid(format!("generator must be square and nonempty, got {}x{}", n, matrix.ncols())));
        }
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(invalid("generator has non-finite entries"));
        }
        if grid.weights.len() != n {
            return Err(MildError::DimensionMismatch { expected: n, got: grid.weights.len() });
        }
        if !(grid.spacing > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        norm.check_dim(n)?;
        let spectral = SpectralFactor::try_new(&matrix, &grid.weights).map(Arc::new);
        Ok(Self { matrix, grid, norm, stability_bound: 0.0, semigroup_bound: 1.0, spectral })
    }

    /// Unstructured generator measured in the sup norm.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, GridMeta::unstructured(n), Norm::Sup)
    }

    /// Declared exponential growth bound ω in ‖e^{tA}‖ ≤ C e^{ωt}.
    pub fn with_stability_bound(mut self, omega: f64) -> Self {
        self.stability_bound = omega;
        self
    }

    /// Declared constant C in ‖e^{tA}‖ ≤ C e^{ωt}.
    pub fn with_semigroup_bound(mut self, c: f64) -> Self {
        self.semigroup_bound = c;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &GridMeta {
        &self.grid
    }

    pub fn norm(&self) -> &Norm {
        &self.norm
    }

    pub fn stability_bound(&self) -> f64 {
        self.stability_bound
    }

    pub fn semigroup_bound(&self) -> f64 {
        self.semigroup_bound
    }

    /// True when the semigroup is computed through an eigendecomposition.
    pub fn is_self_adjoint(&self) -> bool {
        self.spectral.is_some()
    }

    /// Real eigenvalues, available for self-adjoint generators.
    pub fn eigenvalues(&self) -> Option<&DVector<f64>> {
        self.spectral.as_ref().map(|s| &s.values)
    }

    pub fn state(&self, values: DVector<f64>) -> Result<StateVector> {
        if values.len() != self.dim() {
            return Err(MildError::DimensionMismatch { expected: self.dim(), got: values.len() });
        }
        StateVector::new(values, self.norm.clone())
    }

    fn overflow(&self, t: f64) -> MildError {
        MildError::NumericalOverflow { t, norm: one_norm(&self.matrix) }
    }

    /// The matrix e^{tA}.
    pub fn exp(&self, t: f64) -> Result<DMatrix<f64>> {
        if t == 0.0 {
            return Ok(DMatrix::identity(self.dim(), self.dim()));
        }
        let e = match &self.spectral {
            Some(s) => s.function(|l| (t * l).exp()),
            None => expm_pade(&(&self.matrix * t)).ok_or_else(|| self.overflow(t))?,
        };
        if e.iter().all(|x| x.is_finite()) {
            Ok(e)
        } else {
            Err(self.overflow(t))
        }
    }

    /// e^{tA} x; returns `x` untouched at t = 0.
    pub fn exp_apply(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        let y = match &self.spectral {
            Some(s) => s.apply(|l| (t * l).exp(), x),
            None => self.exp(t)? * x,
        };
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(self.overflow(t))
        }
    }

    /// The matrix h·φ₁(hA) = A⁻¹(e^{hA} − I), the exact step weight of a
    /// constant forcing over an interval of length h.
    pub fn phi1_step(&self, h: f64) -> Result<DMatrix<f64>> {
        let m = match &self.spectral {
            Some(s) => s.function(|l| h * phi1(h * l)),
            None => phi1_pade(&(&self.matrix * h)).ok_or_else(|| self.overflow(h))? * h,
        };
        if m.iter().all(|x| x.is_finite()) {
            Ok(m)
        } else {
            Err(self.overflow(h))
        }
    }

    /// Real parts of the spectrum, from the symmetric eigensolver or a Schur form.
    fn spectrum_real_parts(&self) -> Option<Vec<f64>> {
        if let Some(s) = &self.spectral {
            return Some(s.values.iter().copied().collect());
        }
        let schur = Schur::try_new(self.matrix.clone(), f64::EPSILON, 100_000)?;
        Some(schur.complex_eigenvalues().iter().map(|z| z.re).collect())
    }

    /// Max over t ∈ {0.1, 1, 10} and random unit x of ‖e^{tA}x‖ − 1; should
    /// not exceed 1e-8 when the generator claims ω = 0 with C = 1.
    pub fn contraction_excess(&self, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::NEG_INFINITY;
        for t in [0.1, 1.0, 10.0] {
            let e = self.exp(t)?;
            for _ in 0..8 {
                let x = random_unit(&mut rng, &self.norm, self.dim());
                worst = worst.max(self.norm.of(&(&e * x)) - 1.0);
            }
        }
        Ok(worst)
    }
}

fn random_unit(rng: &mut impl Rng, norm: &Norm, dim: usize) -> DVector<f64> {
    loop {
        let x = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = norm.of(&x);
        if n > 1e-12 {
            return x / n;
        }
    }
}

fn check_state(g: &Generator, x: &StateVector) -> Result<()> {
    if x.dim() != g.dim() {
        return Err(MildError::DimensionMismatch { expected: g.dim(), got: x.dim() });
    }
    Ok(())
}

/// e^{tA} x.
pub fn expm_apply(g: &Generator, t: f64, x: &StateVector) -> Result<StateVector> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be finite and nonnegative, got {t}")));
    }
    check_state(g, x)?;
    Ok(x.with_values(g.exp_apply(t, &x.values)?))
}

/// Solves (λI − A) x = y.
pub fn resolvent_apply(g: &Generator, lam: f64, y: &StateVector) -> Result<StateVector> {
    check_state(g, y)?;
    if !(lam > g.stability_bound) {
        return Err(invalid(format!("lambda = {lam} must exceed the stability bound {}", g.stability_bound)));
    }
    let n = g.dim();
    let shifted = DMatrix::<f64>::identity(n, n) * lam - &g.matrix;
    let ill = |condition| MildError::IllConditionedResolvent { lam, condition };
    let inverse = shifted.clone().lu().try_inverse().ok_or(ill(f64::INFINITY))?;
    let condition = one_norm(&shifted) * one_norm(&inverse);
    if !condition.is_finite() || condition > 1e12 {
        return Err(ill(condition));
    }
    Ok(y.with_values(inverse * &y.values))
}

/// An idempotent matrix.
#[derive(Clone, Debug)]
pub struct Projection {
    matrix: DMatrix<f64>,
    range_dim: usize,
}

impl Projection {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(invalid("projection must be square"));
        }
        let defect = idempotence_defect(&matrix);
        if !(defect <= 1e-10) {
            return Err(invalid(format!("matrix is not idempotent (defect {defect:.3e})")));
        }
        let svd = matrix.clone().svd(false, false);
        let range_dim = svd.singular_values.iter().filter(|s| **s > 1e-8).count();
        Ok(Self { matrix, range_dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim), range_dim: dim }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn range_dim(&self) -> usize {
        self.range_dim
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    pub fn idempotence_defect(&self) -> f64 {
        idempotence_defect(&self.matrix)
    }

    /// Is `x` in the range, i.e. `Px = x` up to `tol` (sup norm, relative to ‖x‖ ∨ 1)?
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (self.apply(x) - x).amax() <= tol * x.amax().max(1.0)
    }
}

fn idempotence_defect(p: &DMatrix<f64>) -> f64 {
    (p * p - p).amax()
}

/// Newton–Schulz sharpening `P ← 3P² − 2P³`, which converges to the spectral
/// projector onto the eigenvalues of P clustered at 1.
fn sharpen_projector(mut p: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..60 {
        if idempotence_defect(&p) <= 1e-14 * p.amax().max(1.0) {
            break;
        }
        let p2 = &p * &p;
        let p3 = &p2 * &p;
        p = p2 * 3.0 - p3 * 2.0;
    }
    p
}

/// lim_{t→∞} e^{tA}, detected a posteriori by requiring
/// ‖e^{tA} − e^{2tA}‖_max ≤ tol.
///
/// With `t_big = None` the scale is 10/gap, gap being the smallest nonzero
/// |Re λ| of the spectrum; without a usable spectrum a doubling search from
/// t = 10 is used instead.
pub fn limit_projection(g: &Generator, t_big: Option<f64>, tol: f64) -> Result<Projection> {
    let scale = one_norm(&g.matrix).max(1.0);
    let candidates: Vec<f64> = match t_big {
        Some(t) if t > 0.0 => vec![t, 4.0 * t],
        Some(t) => return Err(invalid(format!("t_big must be positive, got {t}"))),
        None => match g.spectrum_real_parts() {
            Some(re) => {
                let zero = 1e-10 * scale;
                if let Some(r) = re.iter().find(|r| **r > zero) {
                    return Err(MildError::NoLimit { t_big: f64::INFINITY, defect: *r });
                }
                let gap = re.iter().map(|r| r.abs()).filter(|r| *r > zero).fold(f64::INFINITY, f64::min);
                let t = if gap.is_finite() { 10.0 / gap } else { 10.0 };
                vec![t, 4.0 * t]
            }
            None => (0..20).map(|k| 10.0 * 2f64.powi(k)).collect(),
        },
    };
    let mut last = (0.0, f64::INFINITY);
    for t in candidates {
        let e1 = g.exp(t)?;
        let e2 = g.exp(2.0 * t)?;
        let defect = (&e1 - &e2).amax();
        if defect <= tol {
            let mut p = e2;
            if idempotence_defect(&p) > tol.min(1e-12) {
                p = sharpen_projector(p);
            }
            return Projection::new(p);
        }
        last = (t, defect);
    }
    Err(MildError::NoLimit { t_big: last.0, defect: last.1 })
}

/// Largest ‖e^{tA}x‖ over a log-spaced grid of t in [1e-3, 1e2] and random
/// unit x, one x per sampled t.
pub fn dissipativity_check(g: &Generator, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("dissipativity_check needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (-3.0_f64, 2.0_f64);
    let mut worst = 0.0_f64;
    for k in 0..samples {
        let frac = if samples == 1 { 0.0 } else { k as f64 / (samples - 1) as f64 };
        let t = 10f64.powf(lo + (hi - lo) * frac);
        let x = random_unit(&mut rng, &g.norm, g.dim());
        let y = g.exp_apply(t, &x)?;
        worst = worst.max(g.norm.of(&y));
    }
    Ok(worst)
}

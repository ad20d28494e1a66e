//! Activator–inhibitor system with a fast-diffusing inhibitor.
//!
//! ```text
//! a_t = d_a a_xx + F1(a, h)
//! h_t = κ   h_xx + F2(a, h)        on [0, 1], Neumann ends
//! ```
//!
//! As κ → ∞ the inhibitor flattens and its equation collapses to the shadow
//! ODE h' = ∫₀¹ F2(a, h) dx, started from the spatial mean of h(0).
//!
//! State layout: `[a_0 … a_{n−1}, h_0 … h_{n−1}]`, measured in the sup norm.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::grid::{averaging_matrix, block_diag, cell_centers, neumann_laplacian};
use super::{ModelPair, ParamKind, Scalar2};
use crate::error::{invalid, Result};
use crate::mild::Nonlinearity;
use crate::models::LimitSystem;
use crate::norm::Norm;
use crate::operator::{BoundaryKind, Generator, GridMeta, Projection};

/// The reaction terms (F1, F2), evaluated after clamping (a, h) into
/// [−clip, clip]² when a clip is set.
#[derive(Clone)]
pub struct KeenerReaction {
    pub name: String,
    pub f1: Scalar2,
    pub f2: Scalar2,
    /// Sup-norm Lipschitz constants of F1 and F2 on R² (after clipping).
    pub lipschitz: [f64; 2],
    pub clip: Option<f64>,
}

impl std::fmt::Debug for KeenerReaction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeenerReaction").field("name", &self.name).field("lipschitz", &self.lipschitz).field("clip", &self.clip).finish()
    }
}

impl KeenerReaction {
    pub fn zero() -> Self {
        Self { name: "zero".into(), f1: Arc::new(|_, _| 0.0), f2: Arc::new(|_, _| 0.0), lipschitz: [0.0; 2], clip: None }
    }

    /// F1 = a − a³ − h, F2 = a − h on the box [−clip, clip]².
    pub fn clipped_cubic(clip: f64) -> Self {
        // |∂F1/∂a| = |1 − 3a²| ≤ max(1, 3c² − 1), |∂F1/∂h| = 1
        let slope = (3.0 * clip * clip - 1.0).max(1.0);
        Self {
            name: format!("clipped cubic (box [-{clip}, {clip}]^2)"),
            f1: Arc::new(|a, h| a - a * a * a - h),
            f2: Arc::new(|a, h| a - h),
            lipschitz: [slope + 1.0, 2.0],
            clip: Some(clip),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz[0].max(self.lipschitz[1])
    }

    fn clamp(&self, a: f64, h: f64) -> (f64, f64) {
        match self.clip {
            Some(c) => (a.clamp(-c, c), h.clamp(-c, c)),
            None => (a, h),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KeenerParams {
    pub n: usize,
    pub d_a: f64,
    pub reaction: KeenerReaction,
}

impl KeenerParams {
    pub fn new(n: usize, d_a: f64, reaction: KeenerReaction) -> Self {
        Self { n, d_a, reaction }
    }
}

fn grid_meta(n: usize) -> GridMeta {
    let h = 1.0 / n as f64;
    GridMeta::new(h, BoundaryKind::Neumann, vec![h; 2 * n])
}

/// diag(d_a Δ, κ Δ).
pub fn keener_generator(n: usize, d_a: f64, kappa: f64) -> Result<Generator> {
    if !(kappa > 0.0) {
        return Err(invalid(format!("kappa must be positive, got {kappa}")));
    }
    let (slow, _) = neumann_laplacian(n, d_a);
    let (fast, _) = neumann_laplacian(n, kappa);
    Generator::new(block_diag(&[&slow, &fast]), grid_meta(n), Norm::Sup)
}

/// Identity on the activator block, spatial averaging on the inhibitor block.
pub fn shadow_projection(n: usize) -> Projection {
    let ident = DMatrix::identity(n, n);
    let avg = averaging_matrix(&vec![1.0 / n as f64; n]);
    Projection::new(block_diag(&[&ident, &avg])).expect("block projector is idempotent")
}

fn full_nonlinearity(n: usize, reaction: &KeenerReaction) -> Result<Nonlinearity> {
    let r = reaction.clone();
    Nonlinearity::autonomous(reaction.lipschitz(), move |u| {
        let mut out = DVector::zeros(2 * n);
        for i in 0..n {
            let (a, h) = r.clamp(u[i], u[n + i]);
            out[i] = (r.f1)(a, h);
            out[n + i] = (r.f2)(a, h);
        }
        out
    })
}

/// The shadow nonlinearity: F1 pointwise, and the spatial mean of F2
/// replicated over the inhibitor block.
fn shadow_nonlinearity(n: usize, reaction: &KeenerReaction) -> Result<Nonlinearity> {
    let r = reaction.clone();
    Nonlinearity::autonomous(reaction.lipschitz(), move |u| {
        let mut out = DVector::zeros(2 * n);
        let mut mean = 0.0;
        for i in 0..n {
            let (a, h) = r.clamp(u[i], u[n + i]);
            out[i] = (r.f1)(a, h);
            mean += (r.f2)(a, h);
        }
        mean /= n as f64;
        out.rows_mut(n, n).fill(mean);
        out
    })
}

pub fn build_keener(params: &KeenerParams) -> Result<ModelPair> {
    let KeenerParams { n, d_a, ref reaction } = *params;
    if n < 8 {
        return Err(invalid(format!("Keener grid needs N >= 8, got {n}")));
    }
    if !(d_a > 0.0) {
        return Err(invalid(format!("d_a must be positive, got {d_a}")));
    }
    let f = full_nonlinearity(n, reaction)?;
    let box_half = reaction.clip.unwrap_or(2.0);
    f.check_lipschitz(&Norm::Sup, 2 * n, (-box_half, box_half), 0.0, 100, 0x6b65)?;

    let family = Arc::new(move |kappa: f64| keener_generator(n, d_a, kappa));
    let (slow, _) = neumann_laplacian(n, d_a);
    let limit_matrix = block_diag(&[&slow, &DMatrix::zeros(n, n)]);
    let limit = LimitSystem {
        generator: Generator::new(limit_matrix, grid_meta(n), Norm::Sup)?,
        projection: shadow_projection(n),
        nonlinearity: shadow_nonlinearity(n, reaction)?,
    };

    let x = cell_centers(n);
    let pi = std::f64::consts::PI;
    let a0: Vec<f64> = x.iter().map(|x| 0.5 + 0.3 * (pi * x).cos()).collect();
    let bump: Vec<f64> = x.iter().map(|x| 0.2 + 0.5 * (2.0 * pi * x).cos()).collect();
    let stack = |a: &[f64], h: &[f64]| DVector::from_iterator(2 * n, a.iter().chain(h).copied());
    let presets = vec![("flat".to_string(), stack(&a0, &vec![0.2; n])), ("bump-in-fast-component".to_string(), stack(&a0, &bump))];

    let card = format!(
        "# Activator-inhibitor shadow system\n\n\
         | continuous | discrete |\n|---|---|\n\
         | a_t = d_a a_xx + F1(a,h) | block 1: d_a * Neumann Laplacian, N = {n} cells |\n\
         | h_t = kappa h_xx + F2(a,h) | block 2: kappa * Neumann Laplacian |\n\
         | h' = int_0^1 F2(a,h) dx | block 2 of the limit: cell mean of F2, zero generator |\n\
         | h(0) = int_0^1 h_0 dx | projection: identity (+) cell averaging |\n\n\
         - domain [0,1], cell-centred grid h = 1/{n}, ghost-point reflection at both ends\n\
         - reaction: {}, sup-norm Lipschitz constant {}\n\
         - d_a = {d_a}; norm: sup\n",
        reaction.name,
        reaction.lipschitz()
    );

    Ok(ModelPair::new("keener", family, f, limit, ParamKind::Kappa, Norm::Sup, (-box_half, box_half), card).with_presets(presets))
}

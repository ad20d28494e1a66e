//! Cell / bound-factor / free-factor model with fast diffusion of the free
//! growth factor.
//!
//! ```text
//! c_t = ((2p − 1) a(b, c) − d_c) c
//! b_t = α(c) g − d_b b − d b
//! g_t = (1/γ) g_xx − α(c) g − d_g g + κ(c) + d b
//! ```
//!
//! with a(b, c) = a_max·b/(1 + b), α(c) = alpha·c and κ(c) = κ₀ + κ₁·c/(1 + c).
//! The right-hand sides are only locally Lipschitz; arguments are clamped into
//! the box [0, C1]×[0, C2]×[0, C3] before evaluation, which gives a globally
//! Lipschitz extension agreeing with the original field inside the box.
//!
//! The perturbation parameter is 1/γ → ∞. The limit replaces the g-equation
//! by g' = −∫₀¹[α(c)g + d_g g − κ(c) − d b] dx.
//!
//! State layout: `[c (n), b (n), g (n)]`, sup norm.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::{averaging_matrix, block_diag, cell_centers, neumann_laplacian};
use super::{LimitSystem, ModelPair, ParamKind};
use crate::error::{invalid, Result};
use crate::mild::Nonlinearity;
use crate::norm::Norm;
use crate::operator::{BoundaryKind, Generator, GridMeta, Projection};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MckParams {
    /// Probability of self-renewal; proliferation is scaled by 2p − 1.
    pub p: f64,
    pub a_max: f64,
    pub d_c: f64,
    pub alpha: f64,
    pub d_b: f64,
    /// Dissociation rate of bound factor.
    pub d: f64,
    pub d_g: f64,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl Default for MckParams {
    fn default() -> Self {
        Self { p: 0.6, a_max: 1.0, d_c: 0.1, alpha: 0.5, d_b: 0.2, d: 0.1, d_g: 0.3, kappa0: 0.5, kappa1: 0.5 }
    }
}

/// Upper corners of the invariant box [0, C1]×[0, C2]×[0, C3].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClipBox {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for ClipBox {
    fn default() -> Self {
        Self { c1: 10.0, c2: 10.0, c3: 10.0 }
    }
}

impl MckParams {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("p", self.p),
            ("a_max", self.a_max),
            ("d_c", self.d_c),
            ("alpha", self.alpha),
            ("d_b", self.d_b),
            ("d", self.d),
            ("d_g", self.d_g),
            ("kappa0", self.kappa0),
            ("kappa1", self.kappa1),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("MCK coefficient {name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.p > 1.0 {
            return Err(invalid(format!("p is a probability, got {}", self.p)));
        }
        Ok(())
    }

    pub fn kappa_of(&self, c: f64) -> f64 {
        self.kappa0 + self.kappa1 * c / (1.0 + c)
    }

    /// The three right-hand sides at a point, without clipping.
    pub fn rhs(&self, c: f64, b: f64, g: f64) -> [f64; 3] {
        let a = self.a_max * b / (1.0 + b);
        let alpha = self.alpha * c;
        [
            ((2.0 * self.p - 1.0) * a - self.d_c) * c,
            alpha * g - self.d_b * b - self.d * b,
            -alpha * g - self.d_g * g + self.kappa_of(c) + self.d * b,
        ]
    }

    /// Sup-norm Lipschitz bound of the right-hand side on the box: the largest
    /// row sum of bounds on |∂F_i/∂u_j|.
    pub fn lipschitz_on(&self, clip: &ClipBox) -> f64 {
        let s = (2.0 * self.p - 1.0).abs();
        let row_c = s * self.a_max * clip.c2 / (1.0 + clip.c2) + self.d_c + s * self.a_max * clip.c1;
        let row_b = self.alpha * clip.c3 + self.d_b + self.d + self.alpha * clip.c1;
        let row_g = self.alpha * clip.c3 + self.kappa1 + self.d + self.alpha * clip.c1 + self.d_g;
        row_c.max(row_b).max(row_g)
    }
}

fn clamp3(clip: &ClipBox, c: f64, b: f64, g: f64) -> (f64, f64, f64) {
    (c.clamp(0.0, clip.c1), b.clamp(0.0, clip.c2), g.clamp(0.0, clip.c3))
}

fn grid_meta(n: usize) -> GridMeta {
    let h = 1.0 / n as f64;
    GridMeta::new(h, BoundaryKind::Neumann, vec![h; 3 * n])
}

/// diag(0, 0, κ Δ) with κ = 1/γ.
pub fn mck_generator(n: usize, inv_gamma: f64) -> Result<Generator> {
    if !(inv_gamma > 0.0) {
        return Err(invalid(format!("1/gamma must be positive, got {inv_gamma}")));
    }
    let (lap, _) = neumann_laplacian(n, inv_gamma);
    let zero = DMatrix::zeros(n, n);
    Generator::new(block_diag(&[&zero, &zero, &lap]), grid_meta(n), Norm::Sup)
}

pub fn build_mck(n: usize, params: &MckParams, clip: &ClipBox) -> Result<ModelPair> {
    if n < 8 {
        return Err(invalid(format!("MCK grid needs N >= 8, got {n}")));
    }
    params.validate()?;
    for (name, v) in [("C1", clip.c1), ("C2", clip.c2), ("C3", clip.c3)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(format!("clip bound {name} must be positive, got {v}")));
        }
    }
    let lip = params.lipschitz_on(clip);

    let (pr, cl) = (*params, *clip);
    let f = Nonlinearity::autonomous(lip, move |u| {
        let mut out = DVector::zeros(3 * n);
        for i in 0..n {
            let (c, b, g) = clamp3(&cl, u[i], u[n + i], u[2 * n + i]);
            let r = pr.rhs(c, b, g);
            out[i] = r[0];
            out[n + i] = r[1];
            out[2 * n + i] = r[2];
        }
        out
    })?;
    let hi = clip.c1.max(clip.c2).max(clip.c3);
    f.check_lipschitz(&Norm::Sup, 3 * n, (0.0, hi), 0.0, 100, 0x6d63)?;

    let f_lim = Nonlinearity::autonomous(lip, move |u| {
        let mut out = DVector::zeros(3 * n);
        let mut g_mean = 0.0;
        for i in 0..n {
            let (c, b, g) = clamp3(&cl, u[i], u[n + i], u[2 * n + i]);
            let r = pr.rhs(c, b, g);
            out[i] = r[0];
            out[n + i] = r[1];
            g_mean -= pr.alpha * c * g + pr.d_g * g - pr.kappa_of(c) - pr.d * b;
        }
        out.rows_mut(2 * n, n).fill(g_mean / n as f64);
        out
    })?;

    let ident = DMatrix::identity(n, n);
    let avg = averaging_matrix(&vec![1.0 / n as f64; n]);
    let projection = Projection::new(block_diag(&[&ident, &ident, &avg]))?;
    let limit =
        LimitSystem { generator: Generator::new(DMatrix::zeros(3 * n, 3 * n), grid_meta(n), Norm::Sup)?, projection, nonlinearity: f_lim };

    let x = cell_centers(n);
    let pi = std::f64::consts::PI;
    let c0: Vec<f64> = x.iter().map(|x| 1.0 + 0.5 * (pi * x).cos()).collect();
    let b0 = vec![0.5; n];
    let g_bump: Vec<f64> = x.iter().map(|x| 1.0 + 0.8 * (2.0 * pi * x).cos()).collect();
    let stack = |c: &[f64], b: &[f64], g: &[f64]| DVector::from_iterator(3 * n, c.iter().chain(b).chain(g).copied());
    let presets =
        vec![("flat".to_string(), stack(&c0, &b0, &vec![1.0; n])), ("bump-in-fast-component".to_string(), stack(&c0, &b0, &g_bump))];

    let card = format!(
        "# Cell / growth-factor shadow system\n\n\
         | continuous | discrete |\n|---|---|\n\
         | c_t = ((2p-1) a(b,c) - d_c) c | block 1: zero generator, pointwise reaction |\n\
         | b_t = alpha(c) g - d_b b - d b | block 2: zero generator, pointwise reaction |\n\
         | g_t = (1/gamma) g_xx - alpha(c) g - d_g g + kappa(c) + d b | block 3: (1/gamma) * Neumann Laplacian, N = {n} |\n\
         | g' = -int_0^1 [alpha(c) g + d_g g - kappa(c) - d b] dx | limit block 3: cell mean, zero generator |\n\n\
         - a(b,c) = a_max b/(1+b), alpha(c) = alpha c, kappa(c) = kappa0 + kappa1 c/(1+c)\n\
         - parameters: {params:?}\n\
         - arguments clamped into [0,{}] x [0,{}] x [0,{}]; sup-norm Lipschitz bound {lip:.4}\n\
         - perturbation parameter is 1/gamma\n",
        clip.c1, clip.c2, clip.c3
    );

    let family = Arc::new(move |p: f64| mck_generator(n, p));
    Ok(ModelPair::new("mck", family, f, limit, ParamKind::Kappa, Norm::Sup, (0.0, hi), card).with_presets(presets).with_admissibility(
        move |x| {
            let mut warnings = Vec::new();
            for (k, (name, hi)) in [("c", cl.c1), ("b", cl.c2), ("g", cl.c3)].into_iter().enumerate() {
                let block = x.rows(k * n, n);
                if block.iter().any(|v| *v < 0.0 || *v > hi) {
                    warnings.push(format!("initial {name} leaves [0, {hi}]: the solution is that of the clipped system"));
                }
            }
            warnings
        },
    ))
}

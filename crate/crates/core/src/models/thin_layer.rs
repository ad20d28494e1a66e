//! Diffusion in a layer of thickness ε, rescaled to the unit square.
//!
//! Unknowns sit on an nx × nz cell-centred grid of [0, 1]², stored with
//! index `ix·nz + iz`. The operator is A_ε = ∂²ₓ + ε⁻²∂²_z, Neumann in x,
//! with the Robin conditions ∂_z u(·,1) = −ε²c·u and ∂_z u(·,0) = ε²d·u.
//! After the ε⁻² scaling the Robin rows lose their ε dependence, so for
//! z-independent u the form a_ε[u] = −⟨A_ε u, u⟩ equals
//! ∫|u_x|² + (c + d)|u|² for every ε.
//!
//! As ε → 0 the semigroups converge to e^{tA}P with A = ∂²ₓ − (c + d) acting
//! on z-averages and P the z-averaging.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grid::{cell_centers, neumann_laplacian};
use super::{projected, LimitSystem, ModelPair, ParamKind, ScalarReaction};
use crate::error::{invalid, Result};
use crate::norm::Norm;
use crate::operator::{BoundaryKind, Generator, GridMeta, Projection};

fn check_profiles(nx: usize, c: &[f64], d: &[f64]) -> Result<()> {
    if c.len() != nx || d.len() != nx {
        return Err(invalid(format!("Robin profiles must have length {nx}, got {} and {}", c.len(), d.len())));
    }
    if let Some(v) = c.iter().chain(d).find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(invalid(format!("Robin coefficients must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

fn check_sizes(nx: usize, nz: usize) -> Result<()> {
    if nx < 4 || nz < 4 {
        return Err(invalid(format!("thin layer needs Nx, Nz >= 4, got {nx} x {nz}")));
    }
    Ok(())
}

/// Weighted L² norm with cell weights hx·hz.
pub fn layer_norm(nx: usize, nz: usize) -> Norm {
    Norm::weighted_l2(vec![1.0 / (nx * nz) as f64; nx * nz])
}

fn layer_grid(nx: usize, nz: usize) -> GridMeta {
    GridMeta::new(1.0 / nx as f64, BoundaryKind::Robin, vec![1.0 / (nx * nz) as f64; nx * nz])
}

fn layer_matrix(nx: usize, nz: usize, eps: f64, c: &[f64], d: &[f64]) -> DMatrix<f64> {
    let hz = 1.0 / nz as f64;
    let (lx, _) = neumann_laplacian(nx, 1.0);
    let (lz, _) = neumann_laplacian(nz, eps.powi(-2));
    let n = nx * nz;
    let mut m = DMatrix::zeros(n, n);
    for ix in 0..nx {
        for iz in 0..nz {
            let i = ix * nz + iz;
            for jx in ix.saturating_sub(1)..(ix + 2).min(nx) {
                m[(i, jx * nz + iz)] += lx[(ix, jx)];
            }
            for jz in iz.saturating_sub(1)..(iz + 2).min(nz) {
                m[(i, ix * nz + jz)] += lz[(iz, jz)];
            }
        }
        m[(ix * nz + nz - 1, ix * nz + nz - 1)] -= c[ix] / hz;
        m[(ix * nz, ix * nz)] -= d[ix] / hz;
    }
    m
}

/// A_ε on the nx × nz grid. Self-adjoint and nonpositive in the cell-weighted
/// L² product, hence a contraction generator.
pub fn build_thin_layer(nx: usize, nz: usize, eps: f64, c: &[f64], d: &[f64]) -> Result<Generator> {
    check_sizes(nx, nz)?;
    check_profiles(nx, c, d)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    Generator::new(layer_matrix(nx, nz, eps, c, d), layer_grid(nx, nz), layer_norm(nx, nz))
}

/// The one-dimensional limit operator ∂²ₓ − (c + d) on nx cells.
pub fn thin_layer_reduced(nx: usize, c: &[f64], d: &[f64]) -> Result<Generator> {
    if nx < 4 {
        return Err(invalid(format!("thin layer needs Nx >= 4, got {nx}")));
    }
    check_profiles(nx, c, d)?;
    let (mut lx, w) = neumann_laplacian(nx, 1.0);
    for i in 0..nx {
        lx[(i, i)] -= c[i] + d[i];
    }
    Generator::new(lx, GridMeta::new(1.0 / nx as f64, BoundaryKind::Neumann, w.clone()), Norm::weighted_l2(w))
}

/// z-averaging R (nx × nx·nz) and replication E (nx·nz × nx).
fn average_and_replicate(nx: usize, nz: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = DMatrix::from_fn(nx, nx * nz, |ix, j| if j / nz == ix { 1.0 / nz as f64 } else { 0.0 });
    let e = DMatrix::from_fn(nx * nz, nx, |i, ix| if i / nz == ix { 1.0 } else { 0.0 });
    (r, e)
}

/// The limit generator E(∂²ₓ − (c + d))R on the full grid and the z-averaging
/// projection P = ER.
pub fn thin_layer_limit(nx: usize, nz: usize, c: &[f64], d: &[f64]) -> Result<(Generator, Projection)> {
    check_sizes(nx, nz)?;
    let reduced = thin_layer_reduced(nx, c, d)?;
    let (r, e) = average_and_replicate(nx, nz);
    let a = &e * reduced.matrix() * &r;
    let p = Projection::new(&e * &r)?;
    Ok((Generator::new(a, layer_grid(nx, nz), layer_norm(nx, nz))?, p))
}

/// a_ε[u] = −⟨A_ε u, u⟩ in the cell-weighted product.
pub fn form_value(g: &Generator, u: &DVector<f64>) -> f64 {
    -g.norm().inner(&(g.matrix() * u), u)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormFailure {
    /// a_ε[u] decreased between two consecutive ε.
    NotMonotone,
    /// A z-flat probe changed value with ε.
    FlatProbeMoved,
    /// A z-flat probe disagrees with the limit form.
    LimitMismatch,
    /// A probe with z-variation failed to grow like ε⁻².
    NoBlowUp,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormViolation {
    pub probe: usize,
    pub z_flat: bool,
    pub eps_pair: (f64, f64),
    pub values: (f64, f64),
    pub kind: FormFailure,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FormReport {
    pub probes: usize,
    pub z_flat_probes: usize,
    pub comparisons: usize,
    pub violations: Vec<FormViolation>,
}

impl FormReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks along a strictly decreasing list of ε, for random probes u:
/// (a) a_ε[u] is nondecreasing; (b) it stays bounded exactly when u is
/// z-flat, in which case (c) it equals the limit form value. Every third probe
/// is z-flat; the others get random z-variation.
///
/// For (b) the z-part is recovered from the first two ε (a_ε = a₀ + ε⁻²b
/// exactly) and must be positive and predict the remaining values.
pub fn form_monotonicity_check(
    nx: usize,
    nz: usize,
    c: &[f64],
    d: &[f64],
    eps_list: &[f64],
    probes: usize,
    seed: u64,
) -> Result<FormReport> {
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_list must have at least two strictly decreasing entries"));
    }
    let gens = eps_list.iter().map(|&e| build_thin_layer(nx, nz, e, c, d)).collect::<Result<Vec<_>>>()?;
    let reduced = thin_layer_reduced(nx, c, d)?;
    let (r, _) = average_and_replicate(nx, nz);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FormReport { probes, ..Default::default() };

    for probe in 0..probes {
        let z_flat = probe % 3 == 0;
        let ux: Vec<f64> = (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = DVector::from_fn(nx * nz, |i, _| {
            let base = ux[i / nz];
            if z_flat {
                base
            } else {
                base + rng.random_range(-1.0..1.0)
            }
        });
        let values: Vec<f64> = gens.iter().map(|g| form_value(g, &u)).collect();
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let flag = |k: usize, kind: FormFailure, report: &mut FormReport| {
            report.violations.push(FormViolation {
                probe,
                z_flat,
                eps_pair: (eps_list[k], eps_list[k + 1]),
                values: (values[k], values[k + 1]),
                kind,
            });
        };

        for k in 0..values.len() - 1 {
            report.comparisons += 1;
            if values[k + 1] < values[k] - 1e-12 * scale {
                flag(k, FormFailure::NotMonotone, &mut report);
            }
        }

        if z_flat {
            report.z_flat_probes += 1;
            let ubar = &r * &u;
            let limit = form_value(&reduced, &ubar);
            for k in 0..values.len() - 1 {
                if (values[k + 1] - values[k]).abs() > 1e-9 * scale {
                    flag(k, FormFailure::FlatProbeMoved, &mut report);
                }
            }
            for k in 0..values.len() {
                if (values[k] - limit).abs() > 1e-9 * scale {
                    let j = k.min(values.len() - 2);
                    flag(j, FormFailure::LimitMismatch, &mut report);
                }
            }
        } else {
            let s0 = eps_list[0].powi(-2);
            let s1 = eps_list[1].powi(-2);
            let b = (values[1] - values[0]) / (s1 - s0);
            let a0 = values[0] - s0 * b;
            if !(b > 0.0) {
                flag(0, FormFailure::NoBlowUp, &mut report);
            }
            for k in 2..values.len() {
                let predicted = a0 + eps_list[k].powi(-2) * b;
                if (values[k] - predicted).abs() > 1e-8 * values[k].abs().max(1.0) {
                    flag(k - 1, FormFailure::NoBlowUp, &mut report);
                }
            }
        }
    }
    Ok(report)
}

/// Thin-layer family indexed by ε, with a pointwise reaction.
pub fn build_thin_layer_model(nx: usize, nz: usize, c: &[f64], d: &[f64], reaction: ScalarReaction) -> Result<ModelPair> {
    check_sizes(nx, nz)?;
    check_profiles(nx, c, d)?;
    let norm = layer_norm(nx, nz);
    let name = reaction.name.clone();
    let f = reaction.into_nonlinearity()?;
    f.check_lipschitz(&norm, nx * nz, (-1.0, 2.0), 0.0, 100, 0x746c)?;

    let (generator, projection) = thin_layer_limit(nx, nz, c, d)?;
    let nonlinearity = projected(&f, &projection, &norm)?;
    let limit = LimitSystem { generator, projection, nonlinearity };

    let (cv, dv) = (c.to_vec(), d.to_vec());
    let family = Arc::new(move |eps: f64| build_thin_layer(nx, nz, eps, &cv, &dv));

    let pi = std::f64::consts::PI;
    let xs = cell_centers(nx);
    let zs = cell_centers(nz);
    let flat = DVector::from_fn(nx * nz, |i, _| 0.5 + 0.4 * (pi * xs[i / nz]).cos());
    let bump = DVector::from_fn(nx * nz, |i, _| 0.5 + 0.4 * (pi * xs[i / nz]).cos() + 0.4 * (pi * zs[i % nz]).cos());
    let presets = vec![("flat".to_string(), flat), ("bump-in-fast-component".to_string(), bump)];

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let card = format!(
        "# Thin-layer diffusion\n\n\
         | continuous | discrete |\n|---|---|\n\
         | u_t = u_xx + eps^-2 u_zz + f(u) on (0,1)^2 | Nx = {nx}, Nz = {nz} cell-centred grid, index ix*Nz + iz |\n\
         | u_z(x,1) = -eps^2 c(x) u, u_z(x,0) = eps^2 d(x) u | ghost rows: -c/hz on the top cell, -d/hz on the bottom cell |\n\
         | u_x = 0 at x = 0, 1 | ghost-point reflection |\n\
         | limit u_t = u_xx - (c+d) u + P f(u) | limit generator acts on z-averages |\n\
         | Pu(x) = int_0^1 u(x,z) dz | cell mean over z, replicated |\n\n\
         - horizontal direction reduced to one dimension x in [0,1] with Neumann ends\n\
         - mean c = {:.4}, mean d = {:.4}\n\
         - reaction: {name}\n\
         - norm: cell-weighted L2; perturbation parameter eps -> 0\n",
        mean(c),
        mean(d)
    );

    Ok(ModelPair::new("thin_layer", family, f, limit, ParamKind::Epsilon, norm, (-1.0, 2.0), card).with_presets(presets))
}

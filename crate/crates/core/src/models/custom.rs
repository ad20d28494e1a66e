//! User-supplied matrix families A_κ = S + κK.
//!
//! The limit semigroup is e^{t PSP}P with P = lim e^{tK}; P is found by
//! [`limit_projection`]. Everything is measured in the sup norm, where the
//! logarithmic norm μ∞ gives a rigorous growth bound ‖e^{tA}‖ ≤ e^{μ∞(A)t}.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{projected, LimitSystem, ModelPair, ParamKind, ScalarReaction};
use crate::error::{invalid, Result};
use crate::norm::Norm;
use crate::operator::{limit_projection, Generator};

/// μ∞(A) = max_i (a_ii + Σ_{j≠i} |a_ij|).
pub fn log_norm_sup(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a[(i, i)] + (0..a.ncols()).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sup_generator(m: DMatrix<f64>) -> Result<Generator> {
    let omega = log_norm_sup(&m).max(0.0);
    Ok(Generator::from_matrix(m)?.with_stability_bound(omega))
}

pub fn build_custom(slow: DMatrix<f64>, fast: DMatrix<f64>, reaction: ScalarReaction) -> Result<ModelPair> {
    let n = slow.nrows();
    if n == 0 || slow.shape() != (n, n) || fast.shape() != (n, n) {
        return Err(invalid(format!("custom matrices must be square and of equal size, got {:?} and {:?}", slow.shape(), fast.shape())));
    }
    let fast_gen = Generator::from_matrix(fast.clone())?;
    let projection = limit_projection(&fast_gen, None, 1e-10)?;
    let p = projection.matrix();
    let a_lim = p * &slow * p;

    let name = reaction.name.clone();
    let f = reaction.into_nonlinearity()?;
    f.check_lipschitz(&Norm::Sup, n, (-2.0, 2.0), 0.0, 100, 0x6375)?;
    let nonlinearity = projected(&f, &projection, &Norm::Sup)?;
    let limit = LimitSystem { generator: sup_generator(a_lim)?, projection, nonlinearity };

    let presets = vec![
        ("flat".to_string(), DVector::from_element(n, 1.0)),
        ("bump-in-fast-component".to_string(), DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -0.5 })),
    ];
    let card = format!(
        "# Custom matrix family\n\n\
         | continuous | discrete |\n|---|---|\n\
         | u' = (S + kappa K) u + f(u) | dense {n} x {n} matrices |\n\
         | limit u' = PSP u + P f(u) | P = lim e^(tK), rank {} |\n\n\
         - reaction: {name}\n\
         - norm: sup; growth bound from the sup logarithmic norm\n",
        limit.projection.range_dim()
    );
    let family = Arc::new(move |kappa: f64| {
        if !(kappa > 0.0) {
            return Err(invalid(format!("kappa must be positive, got {kappa}")));
        }
        sup_generator(&slow + &fast * kappa)
    });
    Ok(ModelPair::new("custom-matrix", family, f, limit, ParamKind::Kappa, Norm::Sup, (-2.0, 2.0), card).with_presets(presets))
}

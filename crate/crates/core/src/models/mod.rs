//! Discretized singular-perturbation families and their limit systems.
//!
//! Every builder returns a [`ModelPair`]: a generator family indexed by the
//! perturbation parameter, the nonlinearity, and the limit system (generator,
//! projection onto the regularity space, projected nonlinearity).

pub mod custom;
pub mod grid;
pub mod keener;
pub mod mck;
pub mod neuro;
pub mod thin_layer;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::mild::Nonlinearity;
use crate::norm::{Norm, StateVector};
use crate::operator::{Generator, Projection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    /// Limit as the parameter grows without bound.
    Kappa,
    /// Limit as the parameter shrinks to zero.
    Epsilon,
}

impl ParamKind {
    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            ParamKind::Kappa => (0..=14).map(|k| 2f64.powi(k)).collect(),
            ParamKind::Epsilon => (0..=7).map(|k| 2f64.powi(-k)).collect(),
        }
    }
}

pub type FamilyFn = dyn Fn(f64) -> Result<Generator> + Send + Sync;
type AdmissibleFn = dyn Fn(&DVector<f64>) -> Vec<String> + Send + Sync;

#[derive(Clone, Debug)]
pub struct LimitSystem {
    pub generator: Generator,
    pub projection: Projection,
    /// The projected nonlinearity, written out in closed form by each model.
    pub nonlinearity: Nonlinearity,
}

#[derive(Clone)]
pub struct ModelPair {
    pub name: String,
    family: Arc<FamilyFn>,
    pub nonlinearity: Nonlinearity,
    pub limit: LimitSystem,
    pub param_kind: ParamKind,
    pub norm: Norm,
    /// Named initial conditions.
    pub presets: Vec<(String, DVector<f64>)>,
    pub card: String,
    /// Box in which sampled Lipschitz checks are meaningful.
    pub sample_box: (f64, f64),
    admissible: Option<Arc<AdmissibleFn>>,
}

impl fmt::Debug for ModelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelPair")
            .field("name", &self.name)
            .field("param_kind", &self.param_kind)
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

impl ModelPair {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        name: impl Into<String>,
        family: Arc<FamilyFn>,
        nonlinearity: Nonlinearity,
        limit: LimitSystem,
        param_kind: ParamKind,
        norm: Norm,
        sample_box: (f64, f64),
        card: String,
    ) -> Self {
        Self { name: name.into(), family, nonlinearity, limit, param_kind, norm, presets: Vec::new(), card, sample_box, admissible: None }
    }

    pub(crate) fn with_presets(mut self, presets: Vec<(String, DVector<f64>)>) -> Self {
        self.presets = presets;
        self
    }

    pub(crate) fn with_admissibility<F>(mut self, check: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Vec<String> + Send + Sync + 'static,
    {
        self.admissible = Some(Arc::new(check));
        self
    }

    pub fn dim(&self) -> usize {
        self.limit.projection.dim()
    }

    /// The generator A_p of the perturbed family.
    pub fn generator(&self, param: f64) -> Result<Generator> {
        (self.family)(param)
    }

    pub fn projection(&self) -> &Projection {
        &self.limit.projection
    }

    /// Is x in the regularity space, i.e. Px = x?
    pub fn x0_membership(&self, x: &DVector<f64>) -> bool {
        self.limit.projection.contains(x, 1e-10)
    }

    pub fn state(&self, values: DVector<f64>) -> Result<StateVector> {
        StateVector::new(values, self.norm.clone())
    }

    pub fn preset(&self, name: &str) -> Option<&DVector<f64>> {
        self.presets.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Warnings about initial data the model cannot faithfully represent.
    pub fn admissibility_warnings(&self, x: &DVector<f64>) -> Vec<String> {
        self.admissible.as_ref().map(|f| f(x)).unwrap_or_default()
    }

    /// max |P A_lim − A_lim P|.
    pub fn commutation_defect(&self) -> f64 {
        let p = self.limit.projection.matrix();
        let a = self.limit.generator.matrix();
        (p * a - a * p).amax()
    }

    /// ‖P F(t,u) − F_lim(t,u)‖ at u = Pv, the projected nonlinearity replacing F
    /// on the regularity space.
    pub fn nonlinearity_replacement_defect(&self, t: f64, v: &DVector<f64>) -> f64 {
        let u = self.limit.projection.apply(v);
        let pf = self.limit.projection.apply(&self.nonlinearity.eval(t, &u));
        self.norm.distance(&pf, &self.limit.nonlinearity.eval(t, &u))
    }
}

/// Operator norm of `m` with respect to `norm`.
pub(crate) fn operator_norm(m: &DMatrix<f64>, norm: &Norm) -> f64 {
    match norm {
        Norm::Sup => m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max),
        Norm::WeightedL1(w) => {
            (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| w[i] * m[(i, j)].abs()).sum::<f64>() / w[j]).fold(0.0, f64::max)
        }
        Norm::WeightedL2(w) => {
            let n = m.nrows();
            let s = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * m[(i, j)] / w[j].sqrt());
            s.singular_values().max()
        }
    }
}

/// Projected nonlinearity u ↦ P F(t, u), with Lipschitz constant ‖P‖·L.
pub(crate) fn projected(f: &Nonlinearity, p: &Projection, norm: &Norm) -> Result<Nonlinearity> {
    let pm = p.matrix().clone();
    let f = f.clone();
    let lip = operator_norm(&pm, norm) * f.lipschitz();
    Nonlinearity::new(lip, move |t, u| &pm * f.eval(t, u))
}

/// Scalar function of two variables with sup-norm Lipschitz constant on a clip box.
pub type Scalar2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Scalar1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pointwise reaction u ↦ f(u) with Lipschitz constant `lipschitz`.
#[derive(Clone)]
pub struct ScalarReaction {
    pub name: String,
    pub f: Scalar1,
    pub lipschitz: f64,
}

impl fmt::Debug for ScalarReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarReaction({}, L = {})", self.name, self.lipschitz)
    }
}

impl ScalarReaction {
    pub fn zero() -> Self {
        Self { name: "zero".into(), f: Arc::new(|_| 0.0), lipschitz: 0.0 }
    }

    /// r·v(1 − v) with v = clamp(u, 0, 1).
    pub fn logistic(rate: f64) -> Self {
        Self {
            name: format!("logistic(r = {rate})"),
            f: Arc::new(move |u| {
                let v = u.clamp(0.0, 1.0);
                rate * v * (1.0 - v)
            }),
            lipschitz: rate.abs(),
        }
    }

    /// tanh(r·u).
    pub fn tanh(rate: f64) -> Self {
        Self { name: format!("tanh(r = {rate})"), f: Arc::new(move |u| (rate * u).tanh()), lipschitz: rate.abs() }
    }

    pub fn into_nonlinearity(self) -> Result<Nonlinearity> {
        let f = self.f;
        Nonlinearity::autonomous(self.lipschitz, move |u| u.map(|x| f(x)))
    }
}

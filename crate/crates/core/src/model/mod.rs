//! Model abstraction, parameter layout and the multi-unit dataset.

mod cir;
mod growth;
mod ou2d;

pub use cir::CirModel;
pub use growth::GrowthModel;
pub use ou2d::Ou2dModel;

use serde::{Deserialize, Serialize};

use crate::dists::EffectPrior;
use crate::error::{DomainError, Error, Result};
use crate::scalar::Scalar;

/// How a parameter is represented inside the outer optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub scale: Scale,
    pub lower: f64,
    pub upper: f64,
}

impl ParamInfo {
    pub const fn positive(name: &'static str) -> Self {
        Self {
            name,
            scale: Scale::Log,
            lower: 1e-8,
            upper: 1e8,
        }
    }

    pub const fn real(name: &'static str) -> Self {
        Self {
            name,
            scale: Scale::Linear,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub const fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

/// Named flat layout of fixed effects, effect-distribution parameters and
/// random effects for one model family.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    pub theta: Vec<ParamInfo>,
    pub psi: Vec<ParamInfo>,
    pub effects: Vec<&'static str>,
}

impl ParamLayout {
    pub fn p(&self) -> usize {
        self.theta.len()
    }

    pub fn r(&self) -> usize {
        self.psi.len()
    }

    pub fn q(&self) -> usize {
        self.effects.len()
    }

    /// Theta entries followed by psi entries.
    pub fn all(&self) -> impl Iterator<Item = &ParamInfo> {
        self.theta.iter().chain(self.psi.iter())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.all().map(|p| p.name).collect()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.all().position(|p| p.name == name)
    }

    pub fn default_bounds(&self) -> Vec<(f64, f64)> {
        self.all().map(|p| (p.lower, p.upper)).collect()
    }
}

/// Fixed effects `theta`, distribution parameters `psi` and box bounds on
/// the concatenation `(theta, psi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterVector {
    /// Parameters with the layout's default bounds; fails if out of bounds.
    pub fn new(layout: &ParamLayout, theta: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        Self::with_bounds(layout, theta, psi, layout.default_bounds())
    }

    pub fn with_bounds(
        layout: &ParamLayout,
        theta: Vec<f64>,
        psi: Vec<f64>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if theta.len() != layout.p() || psi.len() != layout.r() {
            return Err(Error::config(format!(
                "expected {} fixed effects and {} distribution parameters, got {} and {}",
                layout.p(),
                layout.r(),
                theta.len(),
                psi.len()
            )));
        }
        if bounds.len() != layout.p() + layout.r() {
            return Err(Error::config("bounds length does not match the layout"));
        }
        let pv = Self { theta, psi, bounds };
        for ((info, v), (lo, hi)) in layout.all().zip(pv.flat()).zip(&pv.bounds) {
            if !(v >= *lo && v <= *hi) {
                return Err(Error::config(format!(
                    "parameter {} = {v} outside bounds [{lo}, {hi}]",
                    info.name
                )));
            }
        }
        Ok(pv)
    }

    pub fn flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.psi).copied().collect()
    }

    pub fn from_flat(&self, v: &[f64]) -> Self {
        let p = self.theta.len();
        Self {
            theta: v[..p].to_vec(),
            psi: v[p..].to_vec(),
            bounds: self.bounds.clone(),
        }
    }
}

/// One experimental unit: strictly increasing times and a state per time.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitSeries {
    pub id: usize,
    pub times: Vec<f64>,
    pub obs: Vec<Vec<f64>>,
}

impl UnitSeries {
    pub fn n_transitions(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn validate<M: SdeModel + ?Sized>(&self, model: &M) -> Result<()> {
        let d = model.dim();
        if self.times.len() != self.obs.len() {
            return Err(Error::Data(format!(
                "unit {}: {} times but {} observations",
                self.id,
                self.times.len(),
                self.obs.len()
            )));
        }
        if self.times.len() < 2 {
            return Err(Error::Data(format!("unit {} has fewer than two observations", self.id)));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Data(format!(
                    "unit {}: times not strictly increasing at {}",
                    self.id, w[1]
                )));
            }
        }
        for (t, row) in self.times.iter().zip(&self.obs) {
            if row.len() != d || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "unit {}: missing or invalid state at time {t}",
                    self.id
                )));
            }
            if !model.in_state_space(row) {
                return Err(Error::Data(format!(
                    "unit {}: state {row:?} at time {t} outside the state space",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationDataset {
    pub model_id: String,
    pub dim: usize,
    pub units: Vec<UnitSeries>,
}

impl PopulationDataset {
    pub fn m(&self) -> usize {
        self.units.len()
    }

    /// Total number of observation rows.
    pub fn n_rows(&self) -> usize {
        self.units.iter().map(|u| u.times.len()).sum()
    }

    pub fn validate<M: SdeModel + ?Sized>(&self, model: &M) -> Result<()> {
        if self.units.is_empty() {
            return Err(Error::Data("dataset has no units".into()));
        }
        if self.dim != model.dim() {
            return Err(Error::Data(format!(
                "dataset has {} state columns, model {} expects {}",
                self.dim,
                model.id(),
                model.dim()
            )));
        }
        self.units.iter().try_for_each(|u| u.validate(model))
    }
}

/// Random effects of one unit.
pub type RandomEffectVector = Vec<f64>;

/// A d-dimensional Ito SDE with fixed effects `theta` and random effects `b`.
///
/// Drift and diffusion are generic over [`Scalar`] in the state and in `b`
/// so that the same code serves simulation, density evaluation and AD.
pub trait SdeModel: Send + Sync {
    fn id(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn layout(&self) -> &ParamLayout;

    fn drift<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError>;

    /// Row-major `d x d` diffusion matrix.
    fn diffusion<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S])
        -> Result<Vec<S>, DomainError>;

    /// `d sigma_hh / d x_h` for diagonal diffusions, used by the Milstein scheme.
    fn diffusion_diag_dx(
        &self,
        x: &[f64],
        _theta: &[f64],
        _b: &[f64],
    ) -> Result<Vec<f64>, DomainError> {
        Ok(vec![0.0; x.len()])
    }

    fn in_state_space(&self, x: &[f64]) -> bool;

    fn constraint_ok(&self, _theta: &[f64], _b: &[f64]) -> bool {
        true
    }

    fn constraint_name(&self) -> &'static str {
        "none"
    }

    fn prior(&self, psi: &[f64]) -> Result<EffectPrior>;

    /// `sigma^2` for square-root diffusions; enables reflection of tiny
    /// negative overshoots during simulation.
    fn reflection_scale(&self, _theta: &[f64], _b: &[f64]) -> Option<f64> {
        None
    }

    /// Population quantities derived from `(theta, psi)` by moment relations.
    fn determined(&self, _theta: &[f64], _psi: &[f64]) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    fn check_effects(&self, theta: &[f64], b: &[f64]) -> Result<(), DomainError> {
        if self.constraint_ok(theta, b) {
            Ok(())
        } else {
            Err(DomainError::new(
                format!("constraint violated: {}", self.constraint_name()),
                f64::NAN,
            ))
        }
    }
}

/// Models admitting a Lamperti transform `y = gamma(x)` with unit diffusion.
pub trait Reducible: SdeModel {
    fn lamperti<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError>;

    fn lamperti_inverse<S: Scalar>(
        &self,
        y: &[S],
        theta: &[f64],
        b: &[S],
    ) -> Result<Vec<S>, DomainError>;

    /// Drift of the transformed process.
    fn drift_y<S: Scalar>(&self, y: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError>;

    /// `ln det(sigma sigma^T)` at `x`.
    fn log_det_v<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<S, DomainError>;
}

/// Identifier of a built-in model family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Growth,
    Ou2d,
    Cir,
}

impl ModelId {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Growth => "growth",
            ModelId::Ou2d => "ou2d",
            ModelId::Cir => "cir",
        }
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "growth" => Ok(ModelId::Growth),
            "ou2d" => Ok(ModelId::Ou2d),
            "cir" => Ok(ModelId::Cir),
            other => Err(Error::config(format!(
                "unknown model '{other}' (expected growth, ou2d or cir)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn make_growth_model() -> GrowthModel {
    GrowthModel::new()
}

pub fn make_ou2d_model() -> Ou2dModel {
    Ou2dModel::new()
}

pub fn make_cir_model() -> CirModel {
    CirModel::new()
}

pub(crate) fn positive(what: &str, v: f64) -> Result<(), DomainError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(DomainError::new(what.to_string(), v))
    }
}

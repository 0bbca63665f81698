//! Experiment driver behind the command-line tool: configuration, file
//! formats, Monte Carlo studies, fit bands and coefficient checks.

/// Binds concrete model and hand-coded coefficient values for a [`ModelId`].
macro_rules! with_model {
    ($id:expr, $m:ident, $c:ident, $body:expr) => {
        match $id {
            $crate::model::ModelId::Growth => {
                let $m = &$crate::model::make_growth_model();
                let $c = &$crate::density::growth_coeffs();
                $body
            }
            $crate::model::ModelId::Ou2d => {
                let $m = &$crate::model::make_ou2d_model();
                let $c = &$crate::density::ou2d_coeffs();
                $body
            }
            $crate::model::ModelId::Cir => {
                let $m = &$crate::model::make_cir_model();
                let $c = &$crate::density::cir_coeffs();
                $body
            }
        }
    };
}

pub mod bands;
pub mod coeff_check;
pub mod config;
pub mod io;
pub mod mc;
pub mod summary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::density::CoeffSet;
use crate::density::{Cfe, DensityMethod, Euler, ExactOu};
use crate::error::{Error, Result};
use crate::estimate::{fit, EstimationReport, FitOptions};
use crate::model::{ModelId, ParameterVector, PopulationDataset, Reducible};

pub use config::{ExperimentConfig, ResolvedDesign};

fn fit_generic<M: Reducible, C: CoeffSet>(
    model: &M,
    coeffs: &C,
    method: DensityMethod,
    data: &PopulationDataset,
    start: &ParameterVector,
    opts: &FitOptions,
) -> Result<EstimationReport> {
    match method {
        DensityMethod::Cfe { order } => fit(model, &Cfe::new(model, coeffs, order)?, data, start, opts),
        DensityMethod::EulerMaruyama => fit(model, &Euler::new(model), data, start, opts),
        DensityMethod::ExactOu if model.id() == ModelId::Ou2d.as_str() => {
            fit(model, &ExactOu, data, start, opts)
        }
        DensityMethod::ExactOu => Err(Error::config(format!(
            "method exact-ou is only available for model ou2d, not {}",
            model.id()
        ))),
    }
}

/// Fits `data` with the given model family and transition density.
pub fn estimate(
    model: ModelId,
    method: DensityMethod,
    data: &PopulationDataset,
    start: &ParameterVector,
    opts: &FitOptions,
) -> Result<EstimationReport> {
    with_model!(model, m, c, fit_generic(m, c, method, data, start, opts))
}

/// What `estimate` writes: the fit plus what is needed to simulate from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub model: ModelId,
    pub method: String,
    pub design: ResolvedDesign,
    /// `(theta, psi)` estimates by name.
    pub estimates: BTreeMap<String, f64>,
    pub report: EstimationReport,
}

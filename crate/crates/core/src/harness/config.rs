//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::DensityMethod;
use crate::error::{Error, Result};
use crate::estimate::{FitOptions, InnerOptions, NelderMeadOptions};
use crate::model::{ModelId, ParamLayout, ParameterVector, SdeModel};
use crate::sim::{equispaced, Scheme, SimPlan};

/// Observation times of the orange-tree data, used by the smallest growth design.
pub const ORANGE_TIMES: [f64; 7] = [118.0, 484.0, 664.0, 1004.0, 1231.0, 1372.0, 1582.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelId,
    /// True `(theta, psi)` by parameter name.
    pub truth: BTreeMap<String, f64>,
    pub design: DesignConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default = "one")]
    pub replications: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Number of units `M`.
    pub units: usize,
    /// Observations per unit `n + 1`, including the initial state.
    pub n_obs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Internal simulation step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Explicit sampling grid shared by all units; equispaced otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

/// Design values filled in from the model's defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDesign {
    pub units: usize,
    pub t0: f64,
    pub t_end: f64,
    pub x0: Vec<f64>,
    pub step: f64,
    pub scheme: Scheme,
    pub times: Vec<f64>,
}

impl DesignConfig {
    pub fn resolve(&self, model: ModelId) -> Result<ResolvedDesign> {
        let (t0, t_end, x0, step, scheme) = match model {
            ModelId::Growth => (118.0, 1582.0, vec![30.0], 1.0, Scheme::Milstein),
            ModelId::Ou2d => (0.0, 1.0, vec![3.0, 3.0], 1e-3, Scheme::EulerMaruyama),
            ModelId::Cir => (0.0, 1.0, vec![1.0], 1e-3, Scheme::EulerMaruyama),
        };
        let t0 = self.t0.unwrap_or(t0);
        let t_end = self.t_end.unwrap_or(t_end);
        let x0 = self.x0.clone().unwrap_or(x0);
        let dim = with_model!(model, m, _c, m.dim());
        if x0.len() != dim {
            return Err(Error::config(format!(
                "design.x0 has {} components, model {model} has dimension {dim}",
                x0.len()
            )));
        }
        if self.units == 0 {
            return Err(Error::config("design.units must be at least 1"));
        }
        if self.n_obs < 2 {
            return Err(Error::config("design.n_obs must be at least 2"));
        }
        if !(t_end > t0) {
            return Err(Error::config("design.t_end must exceed design.t0"));
        }
        let times = match &self.times {
            Some(t) if t.len() != self.n_obs => {
                return Err(Error::config(format!(
                    "design.times has {} entries but design.n_obs is {}",
                    t.len(),
                    self.n_obs
                )))
            }
            Some(t) => t.clone(),
            None => equispaced(t0, t_end, self.n_obs),
        };
        Ok(ResolvedDesign {
            units: self.units,
            t0,
            t_end,
            x0,
            step: self.step.unwrap_or(step),
            scheme: self.scheme.unwrap_or(scheme),
            times,
        })
    }
}

impl ResolvedDesign {
    pub fn plan(&self, theta: Vec<f64>, psi: Vec<f64>, seed: u64) -> SimPlan {
        SimPlan {
            theta,
            psi,
            x0: vec![self.x0.clone()],
            t0: self.t0,
            t_end: self.t_end,
            step: self.step,
            scheme: self.scheme,
            sample_times: vec![self.times.clone()],
            n_units: self.units,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    /// Density methods, e.g. `["cfe2", "eum"]`.
    pub methods: Vec<String>,
    /// Explicit outer starting values; truth with random perturbation otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<BTreeMap<String, f64>>,
    /// Relative half-width of the uniform start perturbation.
    pub perturbation: f64,
    /// Bound overrides by parameter name.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub max_evals: usize,
    pub restarts: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        let inner = InnerOptions::default();
        let outer = NelderMeadOptions::default();
        Self {
            methods: vec!["cfe2".into()],
            start: None,
            perturbation: 0.2,
            bounds: BTreeMap::new(),
            inner_tol: inner.tol,
            inner_max_iter: inner.max_iter,
            outer_tol: outer.xtol,
            max_evals: outer.max_evals,
            restarts: outer.restarts,
        }
    }
}

impl EstimationConfig {
    pub fn methods(&self) -> Result<Vec<DensityMethod>> {
        if self.methods.is_empty() {
            return Err(Error::config("estimation.methods must not be empty"));
        }
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            inner: InnerOptions {
                tol: self.inner_tol,
                max_iter: self.inner_max_iter,
                ..Default::default()
            },
            outer: NelderMeadOptions {
                xtol: self.outer_tol,
                ftol: self.outer_tol,
                max_evals: self.max_evals,
                restarts: self.restarts,
            },
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub simulation: u64,
    pub start: u64,
    pub fitbands: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            simulation: 1,
            start: 2,
            fitbands: 3,
        }
    }
}

/// Splits a named parameter map into `(theta, psi)` following `layout`.
pub fn split_named(
    layout: &ParamLayout,
    values: &BTreeMap<String, f64>,
    what: &str,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let names = layout.names();
    if let Some(extra) = values.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(Error::config(format!(
            "{what}.{extra} is not a parameter (expected {})",
            names.join(", ")
        )));
    }
    let mut flat = Vec::with_capacity(names.len());
    for n in &names {
        match values.get(*n) {
            Some(v) if v.is_finite() => flat.push(*v),
            Some(v) => return Err(Error::config(format!("{what}.{n} = {v} is not finite"))),
            None => return Err(Error::config(format!("{what}.{n} is missing"))),
        }
    }
    let p = layout.p();
    Ok((flat[..p].to_vec(), flat[p..].to_vec()))
}

pub fn named(layout: &ParamLayout, theta: &[f64], psi: &[f64]) -> BTreeMap<String, f64> {
    layout
        .names()
        .into_iter()
        .zip(theta.iter().chain(psi))
        .map(|(n, v)| (n.to_string(), *v))
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn layout(&self) -> ParamLayout {
        with_model!(self.model, m, _c, m.layout().clone())
    }

    pub fn truth(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        split_named(&self.layout(), &self.truth, "truth")
    }

    pub fn bounds(&self) -> Result<Vec<(f64, f64)>> {
        let layout = self.layout();
        let names = layout.names();
        let mut bounds = layout.default_bounds();
        for (k, [lo, hi]) in &self.estimation.bounds {
            let i = names.iter().position(|n| n == k).ok_or_else(|| {
                Error::config(format!("estimation.bounds.{k} is not a parameter"))
            })?;
            if !(lo < hi) {
                return Err(Error::config(format!("estimation.bounds.{k}: empty interval")));
            }
            bounds[i] = (*lo, *hi);
        }
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        let (theta, psi) = self.truth()?;
        with_model!(self.model, m, _c, {
            m.prior(&psi)
                .map_err(|e| Error::config(format!("truth: {e}")))?;
        });
        self.design.resolve(self.model)?.plan(theta, psi, 0).validate()?;
        self.estimation.methods()?;
        if !(self.estimation.perturbation >= 0.0 && self.estimation.perturbation < 1.0) {
            return Err(Error::config("estimation.perturbation must lie in [0, 1)"));
        }
        let bounds = self.bounds()?;
        if let Some(start) = &self.estimation.start {
            let (t, p) = split_named(&self.layout(), start, "estimation.start")?;
            ParameterVector::with_bounds(&self.layout(), t, p, bounds)?;
        }
        Ok(())
    }
}

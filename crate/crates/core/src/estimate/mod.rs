//! Laplace-approximated marginal likelihood and its maximization.
//!
//! Each unit's random effects are integrated out by a Laplace approximation
//! around the maximizer of `ln p(x_i | b) + ln p(b)`. Effects with bounded or
//! positive support are optimized on an unconstrained scale, with the log
//! Jacobian of the map included in the integrand.

pub mod inner;
pub mod nelder_mead;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::{EffectPrior, InnerScale};
use crate::error::{Error, Result};
use crate::model::{ParameterVector, PopulationDataset, Scale, SdeModel, UnitSeries};
use crate::scalar::{values, Scalar};
use crate::density::TransitionDensity;
use crate::dual::Dual2;

pub use inner::{laplace_unit, maximize, InnerOptions, InnerSolution};
pub use nelder_mead::{NelderMeadOptions, NelderMeadResult};

/// Objective value used by the outer search where the likelihood is undefined.
pub const PENALTY: f64 = 1e10;

/// `sum_j ln p(x_j | x_{j-1}; theta, b)` for one unit.
pub fn unit_cond_loglik<T: TransitionDensity, S: Scalar>(
    density: &T,
    unit: &UnitSeries,
    theta: &[f64],
    b: &[S],
) -> Result<S> {
    let mut acc = S::cst(0.0);
    for j in 1..unit.times.len() {
        let delta = unit.times[j] - unit.times[j - 1];
        acc += density
            .log_density(&unit.obs[j], &unit.obs[j - 1], delta, theta, b)
            .map_err(|source| Error::Transition {
                unit: unit.id,
                transition: j,
                source,
            })?;
    }
    Ok(acc)
}

/// Per-unit integrand `ln p(x_i | b(z)) + ln p(b(z)) + ln |db/dz|`.
pub struct LaplaceObjective<'a, M, T> {
    model: &'a M,
    density: &'a T,
    unit: &'a UnitSeries,
    theta: &'a [f64],
    prior: &'a EffectPrior,
    scales: Vec<InnerScale>,
}

impl<'a, M: SdeModel, T: TransitionDensity> LaplaceObjective<'a, M, T> {
    pub fn new(
        model: &'a M,
        density: &'a T,
        unit: &'a UnitSeries,
        theta: &'a [f64],
        prior: &'a EffectPrior,
    ) -> Self {
        Self {
            model,
            density,
            unit,
            theta,
            prior,
            scales: prior.scales(),
        }
    }

    pub fn natural(&self, z: &[f64]) -> Vec<f64> {
        self.scales.iter().zip(z).map(|(s, &v)| s.to_natural(v).0).collect()
    }

    pub fn internal(&self, b: &[f64]) -> Vec<f64> {
        self.scales.iter().zip(b).map(|(s, &v)| s.from_natural(v)).collect()
    }

    /// Prior mean on the optimizer's scale.
    pub fn cold_start(&self) -> Vec<f64> {
        self.internal(&self.prior.means())
    }

    pub fn eval<S: Scalar>(&self, z: &[S]) -> Result<S> {
        let mut b = Vec::with_capacity(z.len());
        let mut log_jac = S::cst(0.0);
        for (s, &zk) in self.scales.iter().zip(z) {
            let (bk, lj) = s.to_natural(zk);
            b.push(bk);
            log_jac += lj;
        }
        self.model.check_effects(self.theta, &values(&b))?;
        let prior = self.prior.log_pdf_s(&b)?;
        Ok(unit_cond_loglik(self.density, self.unit, self.theta, &b)? + prior + log_jac)
    }

    /// Maximizes the integrand from `start` (or the prior mean) and returns
    /// the solution with the unit's Laplace log-likelihood.
    pub fn solve(&self, start: Option<&[f64]>, opts: &InnerOptions) -> Result<UnitFit> {
        let cold = self.cold_start();
        let start = start.unwrap_or(&cold);
        let (mut solution, loglik) =
            laplace_unit(|z: &[Dual2]| self.eval(z), start, Some(&cold), opts)?;
        solution.b_hat = self.natural(&solution.z_hat);
        Ok(UnitFit { solution, loglik })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitFit {
    pub solution: InnerSolution,
    /// Laplace approximation of `ln p(x_i; theta, psi)`.
    pub loglik: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEval {
    pub loglik: f64,
    pub units: Vec<UnitFit>,
}

impl MarginalEval {
    /// Units whose inner maximization did not meet its tolerance.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.units.len())
            .filter(|&i| !self.units[i].solution.converged)
            .collect()
    }

    pub fn warm_starts(&self) -> Vec<Vec<f64>> {
        self.units.iter().map(|u| u.solution.z_hat.clone()).collect()
    }
}

/// Laplace-approximated marginal log-likelihood of the whole dataset.
///
/// `warm` holds per-unit starting points on the optimizer's scale; units
/// without one start at the prior mean. Units are processed in parallel and
/// summed in order, so the result does not depend on the thread count.
pub fn marginal_loglik<M: SdeModel, T: TransitionDensity>(
    model: &M,
    density: &T,
    data: &PopulationDataset,
    theta: &[f64],
    psi: &[f64],
    warm: Option<&[Vec<f64>]>,
    opts: &InnerOptions,
) -> Result<MarginalEval> {
    let prior = model.prior(psi)?;
    let fits: Vec<Result<UnitFit>> = data
        .units
        .par_iter()
        .enumerate()
        .map(|(i, unit)| {
            let obj = LaplaceObjective::new(model, density, unit, theta, &prior);
            let start = warm.and_then(|w| w.get(i)).map(Vec::as_slice);
            obj.solve(start, opts)
        })
        .collect();
    let units = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let loglik = units.iter().map(|u| u.loglik).sum();
    Ok(MarginalEval { loglik, units })
}

/// Empirical Bayes estimates of the random effects at `(theta, psi)`.
pub fn recover_effects<M: SdeModel, T: TransitionDensity>(
    model: &M,
    density: &T,
    data: &PopulationDataset,
    theta: &[f64],
    psi: &[f64],
    opts: &InnerOptions,
) -> Result<Vec<Vec<f64>>> {
    let eval = marginal_loglik(model, density, data, theta, psi, None, opts)?;
    Ok(eval.units.into_iter().map(|u| u.solution.b_hat).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub inner: InnerOptions,
    pub outer: NelderMeadOptions,
    /// Initial simplex edge: absolute on log-scaled parameters, relative
    /// (times `max(|x|, 1)`) on the others.
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            inner: InnerOptions::default(),
            outer: NelderMeadOptions::default(),
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub model: String,
    pub method: String,
    pub names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub psi_hat: Vec<f64>,
    pub loglik: f64,
    /// Population quantities implied by the estimates.
    pub determined: Vec<(String, f64)>,
    /// Per-unit maximizers of the Laplace integrand on the natural scale.
    pub effects: Vec<Vec<f64>>,
    pub flagged_units: Vec<usize>,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    pub elapsed_s: f64,
}

impl EstimationReport {
    pub fn estimates(&self) -> Vec<f64> {
        self.theta_hat.iter().chain(&self.psi_hat).copied().collect()
    }
}

fn to_internal(scale: Scale, v: f64) -> f64 {
    match scale {
        Scale::Linear => v,
        Scale::Log => v.ln(),
    }
}

fn to_natural(scale: Scale, u: f64) -> f64 {
    match scale {
        Scale::Linear => u,
        Scale::Log => u.exp(),
    }
}

/// Maximum Laplace-likelihood estimates of `(theta, psi)` from `start`.
pub fn fit<M: SdeModel, T: TransitionDensity>(
    model: &M,
    density: &T,
    data: &PopulationDataset,
    start: &ParameterVector,
    opts: &FitOptions,
) -> Result<EstimationReport> {
    let clock = Instant::now();
    data.validate(model)?;
    let layout = model.layout();
    let checked = ParameterVector::with_bounds(
        layout,
        start.theta.clone(),
        start.psi.clone(),
        start.bounds.clone(),
    )?;
    let scales: Vec<Scale> = layout.all().map(|i| i.scale).collect();
    let p = layout.p();
    let x0: Vec<f64> = scales
        .iter()
        .zip(checked.flat())
        .map(|(&s, v)| to_internal(s, v))
        .collect();
    let lower: Vec<f64> = scales
        .iter()
        .zip(&checked.bounds)
        .map(|(&s, b)| to_internal(s, b.0))
        .collect();
    let upper: Vec<f64> = scales
        .iter()
        .zip(&checked.bounds)
        .map(|(&s, b)| to_internal(s, b.1))
        .collect();
    let steps: Vec<f64> = scales
        .iter()
        .zip(&x0)
        .map(|(&s, x)| match s {
            Scale::Log => opts.initial_step,
            Scale::Linear => opts.initial_step * x.abs().max(1.0),
        })
        .collect();
    let natural = |u: &[f64]| -> Vec<f64> {
        scales.iter().zip(u).map(|(&s, &v)| to_natural(s, v)).collect()
    };

    let mut warm: Option<Vec<Vec<f64>>> = None;
    let objective = |u: &[f64]| -> f64 {
        let v = natural(u);
        match marginal_loglik(model, density, data, &v[..p], &v[p..], warm.as_deref(), &opts.inner) {
            Ok(e) if e.loglik.is_finite() => {
                warm = Some(e.warm_starts());
                -e.loglik
            }
            _ => PENALTY,
        }
    };
    let nm = nelder_mead::minimize(objective, &x0, &steps, &lower, &upper, &opts.outer);

    let best = natural(&nm.x);
    let (theta_hat, psi_hat) = (best[..p].to_vec(), best[p..].to_vec());
    let last = marginal_loglik(model, density, data, &theta_hat, &psi_hat, None, &opts.inner)?;
    Ok(EstimationReport {
        model: model.id().to_string(),
        method: density.method().label(),
        names: layout.names().iter().map(|s| s.to_string()).collect(),
        determined: model
            .determined(&theta_hat, &psi_hat)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        effects: last.units.iter().map(|u| u.solution.b_hat.clone()).collect(),
        flagged_units: last.flagged(),
        loglik: last.loglik,
        theta_hat,
        psi_hat,
        evaluations: nm.evaluations,
        iterations: nm.iterations,
        converged: nm.converged,
        history: nm.history,
        elapsed_s: clock.elapsed().as_secs_f64(),
    })
}

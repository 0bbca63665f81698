//! Monte Carlo studies: simulate, fit with each method, summarize.

use std::path::Path;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMethod;
use crate::error::{Error, Result};
use crate::estimate::EstimationReport;
use crate::model::{ParameterVector, PopulationDataset, SdeModel};
use crate::rng::substream;
use crate::sim::make_dataset;

use super::config::{split_named, ExperimentConfig};
use super::summary::{side_by_side, summarize, McSummary};
use super::{estimate, io};

/// Seed of the dataset generated for replication `rep`.
pub fn dataset_seed(base: u64, rep: usize) -> u64 {
    substream(base, &[rep as u64]).next_u64()
}

/// Simulated dataset and drawn effects of replication `rep`.
pub fn simulate_replication(
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<(PopulationDataset, Vec<Vec<f64>>)> {
    let (theta, psi) = cfg.truth()?;
    let plan = cfg
        .design
        .resolve(cfg.model)?
        .plan(theta, psi, dataset_seed(cfg.seeds.simulation, rep));
    with_model!(cfg.model, m, _c, make_dataset(m, &plan))
}

/// Redraws allowed for a perturbed start that violates the model constraint.
pub const MAX_START_DRAWS: usize = 1000;

/// The model constraint holds at the prior mean of the effects.
fn start_admissible(cfg: &ExperimentConfig, theta: &[f64], psi: &[f64]) -> bool {
    with_model!(cfg.model, m, _c, {
        m.prior(psi).is_ok_and(|prior| m.constraint_ok(theta, &prior.means()))
    })
}

/// Outer starting values for replication `rep`: the configured start, or
/// the truth with each value scaled by an independent `1 + U(-p, p)` factor
/// (zero values are shifted by `U(-p, p)` instead), clamped to the bounds and
/// redrawn while the model constraint fails at the prior mean of the effects.
pub fn start_values(cfg: &ExperimentConfig, rep: usize) -> Result<ParameterVector> {
    let layout = cfg.layout();
    let bounds = cfg.bounds()?;
    let (theta, psi) = match &cfg.estimation.start {
        Some(start) => split_named(&layout, start, "estimation.start")?,
        None => {
            let (theta, psi) = cfg.truth()?;
            let p = cfg.estimation.perturbation;
            let mut rng = substream(cfg.seeds.start, &[rep as u64]);
            let k = theta.len();
            let mut attempts = 0;
            loop {
                let flat: Vec<f64> = theta
                    .iter()
                    .chain(&psi)
                    .zip(&bounds)
                    .map(|(&v, &(lo, hi))| {
                        let u: f64 = if p > 0.0 { rng.random_range(-p..p) } else { 0.0 };
                        let s = if v == 0.0 { u } else { v * (1.0 + u) };
                        s.clamp(lo, hi)
                    })
                    .collect();
                let (t, s) = (flat[..k].to_vec(), flat[k..].to_vec());
                attempts += 1;
                if start_admissible(cfg, &t, &s) || attempts >= MAX_START_DRAWS {
                    break (t, s);
                }
            }
        }
    };
    ParameterVector::with_bounds(&layout, theta, psi, bounds)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodFit {
    pub method: String,
    pub report: Option<EstimationReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Replication {
    pub rep: usize,
    pub seed: u64,
    pub start: Vec<f64>,
    /// Set when the dataset could not be generated.
    pub error: Option<String>,
    pub fits: Vec<MethodFit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McResult {
    /// Estimated parameters followed by determined quantities.
    pub columns: Vec<String>,
    pub truth: Vec<f64>,
    pub replications: Vec<Replication>,
    pub summaries: Vec<McSummary>,
}

impl McResult {
    pub fn summary(&self, method: &str) -> Option<&McSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn table(&self) -> String {
        side_by_side(&self.summaries, &self.truth)
    }
}

fn row(report: &EstimationReport) -> Vec<f64> {
    report
        .estimates()
        .into_iter()
        .chain(report.determined.iter().map(|(_, v)| *v))
        .collect()
}

fn run_one(cfg: &ExperimentConfig, methods: &[DensityMethod], rep: usize) -> Replication {
    let seed = dataset_seed(cfg.seeds.simulation, rep);
    let opts = cfg.estimation.fit_options();
    let start = match start_values(cfg, rep) {
        Ok(s) => s,
        Err(e) => {
            return Replication {
                rep,
                seed,
                start: Vec::new(),
                error: Some(e.to_string()),
                fits: Vec::new(),
            }
        }
    };
    let data = match simulate_replication(cfg, rep) {
        Ok((d, _)) => d,
        Err(e) => {
            return Replication {
                rep,
                seed,
                start: start.flat(),
                error: Some(e.to_string()),
                fits: Vec::new(),
            }
        }
    };
    let fits = methods
        .iter()
        .map(|&m| {
            let (report, error) = match estimate(cfg.model, m, &data, &start, &opts) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MethodFit {
                method: m.label(),
                report,
                error,
            }
        })
        .collect();
    Replication {
        rep,
        seed,
        start: start.flat(),
        error: None,
        fits,
    }
}

/// Runs `reps` replications in parallel. Each replication owns its random
/// substreams, so results do not depend on the thread count.
pub fn run_mc(cfg: &ExperimentConfig, reps: usize) -> Result<McResult> {
    if reps == 0 {
        return Err(Error::config("number of replications must be at least 1"));
    }
    cfg.validate()?;
    let methods = cfg.estimation.methods()?;
    let (theta, psi) = cfg.truth()?;
    let mut columns: Vec<String> = cfg.layout().names().iter().map(|s| s.to_string()).collect();
    let determined =
        with_model!(cfg.model, m, _c, m.determined(&theta, &psi));
    columns.extend(determined.iter().map(|(k, _)| format!("{k}*")));
    let mut truth: Vec<f64> = theta.iter().chain(&psi).copied().collect();
    truth.extend(determined.iter().map(|(_, v)| *v));

    let replications: Vec<Replication> =
        (0..reps).into_par_iter().map(|r| run_one(cfg, &methods, r)).collect();

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut rows = Vec::new();
            let mut failures = 0;
            let mut non_converged = 0;
            for rep in &replications {
                match rep.fits.get(k).and_then(|f| f.report.as_ref()) {
                    Some(r) => {
                        non_converged += usize::from(!r.converged);
                        rows.push(row(r));
                    }
                    None => failures += 1,
                }
            }
            let mut s = summarize(&m.label(), &columns, &rows);
            s.failures = failures;
            s.non_converged = non_converged;
            s
        })
        .collect();
    Ok(McResult {
        columns,
        truth,
        replications,
        summaries,
    })
}

/// Writes per-replication estimates, `summary.json` and `table.txt`.
pub fn write_mc(out: &Path, result: &McResult) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for (k, s) in result.summaries.iter().enumerate() {
        let path = out.join(format!("estimates_{}.csv", s.method));
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> =
            ["rep", "status", "converged", "loglik", "evaluations"].map(String::from).to_vec();
        header.extend(result.columns.iter().cloned());
        w.write_record(&header)?;
        for rep in &result.replications {
            let fit = rep.fits.get(k);
            let mut rec = vec![rep.rep.to_string()];
            match fit.and_then(|f| f.report.as_ref()) {
                Some(r) => {
                    rec.push("ok".into());
                    rec.push(r.converged.to_string());
                    rec.push(io::fmt_f64(r.loglik));
                    rec.push(r.evaluations.to_string());
                    rec.extend(row(r).into_iter().map(io::fmt_f64));
                }
                None => {
                    let msg = fit
                        .and_then(|f| f.error.clone())
                        .or_else(|| rep.error.clone())
                        .unwrap_or_default();
                    rec.push(format!("failed: {msg}"));
                    rec.extend(std::iter::repeat_n(String::new(), 3 + result.columns.len()));
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    io::write_json(&out.join("summary.json"), &result.summaries)?;
    std::fs::write(out.join("table.txt"), result.table())?;
    Ok(())
}

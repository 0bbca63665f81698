//! Pointwise mean and 95% bands of trajectories simulated at fitted values.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::rng::substream;
use crate::sim::{draw_effects, equispaced, simulate_path};

use super::config::ResolvedDesign;
use super::io::fmt_f64;
use super::summary::quantile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBands {
    pub times: Vec<f64>,
    pub dim: usize,
    /// `[time][component]`.
    pub mean: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// A few simulated paths, `[path][time][component]`.
    pub examples: Vec<Vec<Vec<f64>>>,
}

/// Simulates `sims` units with fresh effects drawn from the fitted
/// distributions and summarizes them on `n_points` equispaced times.
#[allow(clippy::too_many_arguments)]
pub fn fit_bands<M: SdeModel>(
    model: &M,
    theta: &[f64],
    psi: &[f64],
    design: &ResolvedDesign,
    sims: usize,
    n_points: usize,
    n_examples: usize,
    seed: u64,
) -> Result<FitBands> {
    if sims == 0 || n_points < 2 {
        return Err(Error::config("fitbands needs at least one simulation and two time points"));
    }
    let times = equispaced(design.t0, design.t_end, n_points);
    let paths: Vec<Vec<Vec<f64>>> = (0..sims)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, &[s as u64]);
            let b = draw_effects(model, theta, psi, &mut rng)?;
            let traj = simulate_path(
                model,
                theta,
                &b,
                &design.x0,
                design.t0,
                design.t_end,
                design.step,
                design.scheme,
                &mut rng,
            )?;
            times.iter().map(|&t| traj.at(t)).collect()
        })
        .collect::<Result<_>>()?;
    let dim = model.dim();
    let mut mean = Vec::with_capacity(n_points);
    let mut lower = Vec::with_capacity(n_points);
    let mut upper = Vec::with_capacity(n_points);
    for j in 0..n_points {
        let (mut m, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..dim {
            let mut xs: Vec<f64> = paths.iter().map(|p| p[j][k]).collect();
            m.push(xs.iter().sum::<f64>() / xs.len() as f64);
            xs.sort_by(f64::total_cmp);
            lo.push(quantile(&xs, 0.025));
            hi.push(quantile(&xs, 0.975));
        }
        mean.push(m);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(FitBands {
        times,
        dim,
        mean,
        lower,
        upper,
        examples: paths.into_iter().take(n_examples).collect(),
    })
}

/// CSV with `time,mean,lower,upper,path1,...` (suffixed `_x1`, `_x2`, ... when
/// the state has more than one component).
pub fn write_bands(path: &Path, bands: &FitBands) -> Result<()> {
    let suffix = |k: usize| {
        if bands.dim == 1 {
            String::new()
        } else {
            format!("_x{}", k + 1)
        }
    };
    let mut header = vec!["time".to_string()];
    for k in 0..bands.dim {
        for col in ["mean", "lower", "upper"] {
            header.push(format!("{col}{}", suffix(k)));
        }
    }
    for e in 0..bands.examples.len() {
        for k in 0..bands.dim {
            header.push(format!("path{}{}", e + 1, suffix(k)));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for (j, t) in bands.times.iter().enumerate() {
        let mut rec = vec![fmt_f64(*t)];
        for k in 0..bands.dim {
            rec.push(fmt_f64(bands.mean[j][k]));
            rec.push(fmt_f64(bands.lower[j][k]));
            rec.push(fmt_f64(bands.upper[j][k]));
        }
        for e in &bands.examples {
            rec.extend(e[j].iter().map(|v| fmt_f64(*v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

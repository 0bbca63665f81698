//! Path simulation and synthetic dataset generation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PopulationDataset, SdeModel, UnitSeries};
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    Milstein,
}

/// Maximum number of path restarts after a genuine state-space violation.
pub const MAX_RESTARTS: usize = 1000;
/// Maximum number of random-effect redraws to satisfy the model constraint.
pub const MAX_REDRAWS: usize = 1000;

/// States on the uniform grid `t0 + k * step`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub step: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.step * (self.states.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.step * k as f64
    }

    /// Linear interpolation at `t`; exact on grid nodes.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.states.len() - 1;
        let span = self.t_end() - self.t0;
        let slack = 1e-9 * span.max(1.0);
        if !(t >= self.t0 - slack && t <= self.t_end() + slack) {
            return Err(Error::Simulation(format!(
                "sample time {t} outside simulated span [{}, {}]",
                self.t0,
                self.t_end()
            )));
        }
        let s = ((t - self.t0) / self.step).max(0.0);
        let k = (s.floor() as usize).min(n);
        let w = s - k as f64;
        if k == n || w <= 0.0 {
            return Ok(self.states[k].clone());
        }
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        Ok(a.iter().zip(b).map(|(&a, &b)| a + w * (b - a)).collect())
    }
}

/// Simulates one path on `[t0, t_end]`.
///
/// The internal step is shrunk slightly if needed so the grid ends exactly at
/// `t_end`. For square-root diffusions a negative proposal is reflected when
/// it is a tiny overshoot (below `step * sigma^2`); otherwise the path is
/// restarted with fresh increments.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path<M: SdeModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    b: &[f64],
    x0: &[f64],
    t0: f64,
    t_end: f64,
    step: f64,
    scheme: Scheme,
    rng: &mut R,
) -> Result<Trajectory> {
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::config(format!("initial state must have {d} components")));
    }
    if !model.in_state_space(x0) {
        return Err(Error::config(format!("initial state {x0:?} outside the state space")));
    }
    model.check_effects(theta, b)?;
    if !(t_end > t0 && step > 0.0) {
        return Err(Error::config("simulation needs t_end > t0 and a positive step"));
    }
    let n = (((t_end - t0) / step) - 1e-9).ceil().max(1.0) as usize;
    let h = (t_end - t0) / n as f64;
    let sqh = h.sqrt();
    let reflect_below = model.reflection_scale(theta, b).map(|s2| h * s2);

    'restart: for _ in 0..MAX_RESTARTS {
        let mut states = Vec::with_capacity(n + 1);
        states.push(x0.to_vec());
        let mut x = x0.to_vec();
        let mut dw = vec![0.0; d];
        for _ in 0..n {
            for w in dw.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = z * sqh;
            }
            let mu = model.drift(&x, theta, b)?;
            let sig = model.diffusion(&x, theta, b)?;
            let mut next: Vec<f64> = (0..d)
                .map(|i| {
                    let noise: f64 = (0..d).map(|k| sig[i * d + k] * dw[k]).sum();
                    x[i] + mu[i] * h + noise
                })
                .collect();
            if scheme == Scheme::Milstein {
                let dsig = model.diffusion_diag_dx(&x, theta, b)?;
                for i in 0..d {
                    next[i] += 0.5 * sig[i * d + i] * dsig[i] * (dw[i] * dw[i] - h);
                }
            }
            if !model.in_state_space(&next) {
                let Some(limit) = reflect_below else {
                    continue 'restart;
                };
                for v in next.iter_mut() {
                    if *v < 0.0 && -*v < limit {
                        *v = -*v;
                    }
                }
                if !model.in_state_space(&next) {
                    continue 'restart;
                }
            }
            states.push(next.clone());
            x = next;
        }
        return Ok(Trajectory { t0, step: h, states });
    }
    Err(Error::Simulation(format!(
        "path left the state space in {MAX_RESTARTS} consecutive attempts"
    )))
}

/// Observations of `traj` at `times` by linear interpolation.
pub fn sample_at(traj: &Trajectory, times: &[f64], unit_id: usize) -> Result<UnitSeries> {
    let obs = times.iter().map(|&t| traj.at(t)).collect::<Result<Vec<_>>>()?;
    Ok(UnitSeries {
        id: unit_id,
        times: times.to_vec(),
        obs,
    })
}

/// Equally spaced grid of `n_obs` times from `t0` to `t_end` inclusive.
pub fn equispaced(t0: f64, t_end: f64, n_obs: usize) -> Vec<f64> {
    assert!(n_obs >= 2);
    let n = (n_obs - 1) as f64;
    (0..n_obs)
        .map(|j| if j + 1 == n_obs { t_end } else { t0 + (t_end - t0) * j as f64 / n })
        .collect()
}

/// Everything needed to generate one synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    /// One initial state shared by all units, or one per unit.
    pub x0: Vec<Vec<f64>>,
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub scheme: Scheme,
    /// One sampling grid shared by all units, or one per unit.
    pub sample_times: Vec<Vec<f64>>,
    pub n_units: usize,
    pub seed: u64,
}

impl SimPlan {
    fn per_unit<'a, T>(v: &'a [T], i: usize, what: &str) -> Result<&'a T> {
        match v.len() {
            1 => Ok(&v[0]),
            n if i < n => Ok(&v[i]),
            n => Err(Error::config(format!("{what}: {n} entries for unit {i}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(Error::config("design.units must be at least 1"));
        }
        for (what, len) in [("x0", self.x0.len()), ("sample_times", self.sample_times.len())] {
            if len != 1 && len != self.n_units {
                return Err(Error::config(format!(
                    "{what} must have 1 or {} entries, got {len}",
                    self.n_units
                )));
            }
        }
        let mut min_gap = f64::INFINITY;
        for grid in &self.sample_times {
            if grid.len() < 2 {
                return Err(Error::config("sample_times needs at least two times per unit"));
            }
            for w in grid.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::config("sample_times must be strictly increasing"));
                }
                min_gap = min_gap.min(w[1] - w[0]);
            }
            if grid[0] < self.t0 || grid[grid.len() - 1] > self.t_end {
                return Err(Error::config(format!(
                    "sample_times must lie in [{}, {}]",
                    self.t0, self.t_end
                )));
            }
        }
        if !(self.step > 0.0 && self.step <= min_gap + 1e-12) {
            return Err(Error::config(format!(
                "step {} must be positive and no larger than the smallest sampling gap {min_gap}",
                self.step
            )));
        }
        Ok(())
    }
}

/// Draws effects until the model constraint holds.
pub fn draw_effects<M: SdeModel, R: Rng + ?Sized>(
    model: &M,
    theta: &[f64],
    psi: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let prior = model.prior(psi)?;
    for _ in 0..MAX_REDRAWS {
        let b = prior.sample(rng);
        if model.constraint_ok(theta, &b) {
            return Ok(b);
        }
    }
    Err(Error::config(format!(
        "no random-effect draw satisfied '{}' in {MAX_REDRAWS} attempts",
        model.constraint_name()
    )))
}

/// Simulates `plan.n_units` independent units with fresh random effects.
///
/// Returns the dataset and the effects drawn for each unit.
pub fn make_dataset<M: SdeModel>(
    model: &M,
    plan: &SimPlan,
) -> Result<(PopulationDataset, Vec<Vec<f64>>)> {
    plan.validate()?;
    let units: Vec<(UnitSeries, Vec<f64>)> = (0..plan.n_units)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(plan.seed, &[i as u64]);
            let b = draw_effects(model, &plan.theta, &plan.psi, &mut rng)?;
            let x0 = SimPlan::per_unit(&plan.x0, i, "x0")?;
            let times = SimPlan::per_unit(&plan.sample_times, i, "sample_times")?;
            let traj = simulate_path(
                model,
                &plan.theta,
                &b,
                x0,
                plan.t0,
                plan.t_end,
                plan.step,
                plan.scheme,
                &mut rng,
            )?;
            Ok((sample_at(&traj, times, i)?, b))
        })
        .collect::<Result<_>>()?;
    let (units, effects) = units.into_iter().unzip();
    Ok((
        PopulationDataset {
            model_id: model.id().to_string(),
            dim: model.dim(),
            units,
        },
        effects,
    ))
}

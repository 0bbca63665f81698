//! Agreement between the generic expansion engine and the hand-coded
//! coefficient sets at random admissible points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{CoeffSet, MAX_ORDER};
use crate::error::{Error, Result};
use crate::expansion::GenericCoeffs;
use crate::model::{ModelId, Reducible};
use crate::rng::substream;


/// Relative deviations must stay below this for a pass.
pub const COEFF_TOL: f64 = 1e-8;
/// Denominator floor of the relative deviation.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffCheck {
    pub model: ModelId,
    pub points: usize,
    /// Largest `|generic - hand| / max(|hand|, floor)` for `C(-1)`, `C(0)`, `C(1)`, `C(2)`.
    pub max_rel: [f64; 4],
    pub pass: bool,
}

/// A random `(theta, b, x, x0)` inside the region where the model is used.
fn random_point<R: Rng>(model: ModelId, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    match model {
        ModelId::Growth => {
            let theta = vec![u(150.0, 250.0), u(250.0, 450.0), u(0.04, 0.12)];
            let b = vec![u(-50.0, 50.0), u(-100.0, 100.0)];
            (theta, b, vec![u(30.0, 250.0)], vec![u(30.0, 250.0)])
        }
        ModelId::Ou2d => {
            let theta = vec![
                u(0.5, 2.0),
                u(0.5, 2.0),
                u(2.0, 4.0),
                u(0.5, 2.5),
                u(0.5, 2.0),
                u(2.0, 4.0),
                u(0.2, 0.6),
                u(0.2, 0.6),
            ];
            let b = (0..4).map(|_| u(0.8, 1.2)).collect();
            (theta, b, vec![u(0.0, 4.0), u(0.0, 4.0)], vec![u(0.0, 4.0), u(0.0, 4.0)])
        }
        ModelId::Cir => {
            let theta = vec![u(1.0, 4.0)];
            let b = vec![u(0.1, 5.0), u(0.5, 2.0), u(0.5, 1.5)];
            (theta, b, vec![u(0.3, 8.0)], vec![u(0.3, 8.0)])
        }
    }
}

/// Index of the fixed effect perturbed in the hand-coded set by `perturb`.
fn perturbed_index(model: ModelId) -> usize {
    match model {
        ModelId::Growth => 1,
        // beta12 enters only through the off-diagonal kappa terms
        ModelId::Ou2d => 3,
        ModelId::Cir => 0,
    }
}

fn check<M: Reducible, C: CoeffSet, const D: usize>(
    id: ModelId,
    model: &M,
    hand: &C,
    points: usize,
    seed: u64,
    perturb: f64,
) -> Result<CoeffCheck> {
    let generic = GenericCoeffs::<M, D>::new(model);
    let mut max_rel = [0.0f64; 4];
    let mut accepted = 0;
    let mut draws = 0u64;
    while accepted < points {
        let mut rng = substream(seed, &[draws]);
        draws += 1;
        if draws > 1000 * points as u64 + 1000 {
            return Err(Error::config(format!("no admissible points found for {id}")));
        }
        let (theta, b, x, x0) = random_point(id, &mut rng);
        if !model.constraint_ok(&theta, &b) {
            continue;
        }
        let y = model.lamperti(&x, &theta, &b)?;
        let y0 = model.lamperti(&x0, &theta, &b)?;
        let mut theta_h = theta.clone();
        theta_h[perturbed_index(id)] *= 1.0 + perturb;
        let g = generic.coefficients(&y, &y0, &theta, &b, MAX_ORDER)?;
        let h = hand.coefficients(&y, &y0, &theta_h, &b, MAX_ORDER)?;
        for k in 0..4 {
            let rel = (g[k] - h[k]).abs() / h[k].abs().max(REL_FLOOR);
            max_rel[k] = max_rel[k].max(rel);
        }
        accepted += 1;
    }
    Ok(CoeffCheck {
        model: id,
        points,
        pass: max_rel.iter().all(|r| *r < COEFF_TOL),
        max_rel,
    })
}

/// Compares the two coefficient sets at `points` random points.
///
/// `perturb` multiplies one fixed effect seen by the hand-coded set by
/// `1 + perturb`; it exists to confirm that the check detects faults.
pub fn coeff_check(model: ModelId, points: usize, seed: u64, perturb: f64) -> Result<CoeffCheck> {
    if points == 0 {
        return Err(Error::config("points must be at least 1"));
    }
    match model {
        ModelId::Ou2d => with_model!(model, m, c, check::<_, _, 2>(model, m, c, points, seed, perturb)),
        _ => with_model!(model, m, c, check::<_, _, 1>(model, m, c, points, seed, perturb)),
    }
}

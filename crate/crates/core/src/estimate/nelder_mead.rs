//! Bounded Nelder-Mead minimization with projection onto a box.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Simplex diameter tolerance (sup-norm) in the optimizer's coordinates.
    pub xtol: f64,
    /// Tolerance on the spread of objective values over the simplex.
    pub ftol: f64,
    pub max_evals: usize,
    /// Number of fresh-simplex restarts from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-6,
            ftol: 1e-6,
            max_evals: 2000,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration; never increases.
    pub history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counter<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    evals: usize,
    best: (Vec<f64>, f64),
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best.1 {
            self.best = (x.to_vec(), v);
        }
        v
    }
}

fn initial_simplex<F: FnMut(&[f64]) -> f64>(
    c: &mut Counter<'_, F>,
    x0: &[f64],
    steps: &[f64],
) -> Vec<(Vec<f64>, f64)> {
    let f0 = c.eval(x0);
    let mut simplex = vec![(x0.to_vec(), f0)];
    for i in 0..x0.len() {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        c.project(&mut x);
        if x[i] == x0[i] {
            x[i] -= steps[i];
            c.project(&mut x);
        }
        let f = c.eval(&x);
        simplex.push((x, f));
    }
    simplex
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `steps` sets the initial simplex edge along each coordinate. NaN values
/// are treated as `+inf`.
pub fn minimize<F>(
    f: F,
    x0: &[f64],
    steps: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut c = Counter {
        f,
        lower,
        upper,
        evals: 0,
        best: (x0.to_vec(), f64::INFINITY),
    };
    let mut start = x0.to_vec();
    c.project(&mut start);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut restarts_left = opts.restarts;
    let mut simplex = initial_simplex(&mut c, &start, steps);
    let mut last_converged_value = f64::INFINITY;

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread_f = (simplex[n].1 - simplex[0].1).abs();
        if spread_x <= opts.xtol && spread_f <= opts.ftol {
            let best = simplex[0].1;
            let improved = last_converged_value - best > opts.ftol;
            if restarts_left == 0 || !improved {
                converged = true;
                break;
            }
            restarts_left -= 1;
            last_converged_value = best;
            let x = simplex[0].0.clone();
            simplex = initial_simplex(&mut c, &x, steps);
            continue;
        }
        if c.evals >= opts.max_evals {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (cj, xj) in centroid.iter_mut().zip(x) {
                *cj += xj / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let mut xr = combine(&centroid, &worst.0, -REFLECT);
        c.project(&mut xr);
        let fr = c.eval(&xr);
        let mut shrink = false;
        if fr < simplex[0].1 {
            let mut xe = combine(&centroid, &worst.0, -EXPAND);
            c.project(&mut xe);
            let fe = c.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else if fr < worst.1 {
            let xc = combine(&centroid, &xr, CONTRACT);
            let fc = c.eval(&xc);
            if fc <= fr {
                simplex[n] = (xc, fc);
            } else {
                shrink = true;
            }
        } else {
            let xc = combine(&centroid, &worst.0, CONTRACT);
            let fc = c.eval(&xc);
            if fc < worst.1 {
                simplex[n] = (xc, fc);
            } else {
                shrink = true;
            }
        }
        if shrink {
            let best = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                v.0 = combine(&best, &v.0, SHRINK);
                v.1 = c.eval(&v.0);
            }
        }
        history.push(c.best.1);
    }

    let (x, value) = c.best.clone();
    NelderMeadResult {
        x,
        value,
        evaluations: c.evals,
        iterations,
        converged,
        history,
    }
}

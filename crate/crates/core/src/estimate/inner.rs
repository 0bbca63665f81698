//! Trust-region Newton maximization of a per-unit objective with exact
//! second derivatives.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dual::{hessian_of, Dual2};
use crate::error::{DomainError, Error, Result};
use crate::linalg::{chol_logdet, cholesky};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    /// Convergence threshold on the gradient sup-norm.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_radius: f64,
    pub max_radius: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            initial_radius: 1.0,
            max_radius: 1e3,
        }
    }
}

const SHRINK: f64 = 0.25;
const EXPAND: f64 = 2.0;
const ACCEPT: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    /// Maximizer in the optimizer's coordinates.
    pub z_hat: Vec<f64>,
    /// Maximizer on the natural scale of the random effects.
    pub b_hat: Vec<f64>,
    pub f_at_max: f64,
    pub grad: Vec<f64>,
    /// Dense row-major Hessian of `f` at `z_hat`.
    pub hess: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl InnerSolution {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// `ln det(-H)`, failing unless `-H` is positive definite.
    pub fn log_det_neg_hess(&self) -> Result<f64, DomainError> {
        let q = self.z_hat.len();
        let neg: Vec<f64> = self.hess.iter().map(|h| -h).collect();
        let l = cholesky(&neg, q)
            .map_err(|e| DomainError::new("Hessian at the maximizer is not negative definite", e.value))?;
        Ok(chol_logdet(&l, q))
    }

    /// Laplace approximation of `ln int exp(f(z)) dz`.
    pub fn laplace(&self) -> Result<f64, DomainError> {
        let q = self.z_hat.len() as f64;
        Ok(self.f_at_max + 0.5 * q * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * self.log_det_neg_hess()?)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizer of `g.p + p.B.p / 2` subject to `|p| <= radius`, exact for small dimensions.
pub fn trust_region_step(g: &[f64], b: &[f64], radius: f64) -> Vec<f64> {
    let n = g.len();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, b));
    let q = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let gt: DVector<f64> = q.transpose() * DVector::from_column_slice(g);
    let step_for = |mu: f64| -> DVector<f64> {
        let coef = DVector::from_fn(n, |i, _| -gt[i] / (lam[i] + mu));
        q * coef
    };
    let (imin, lmin) = lam
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
    let scale = lam.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    if lmin > 1e-12 * scale {
        let p = step_for(0.0);
        if p.norm() <= radius {
            return p.iter().copied().collect();
        }
    }
    let lo = (-lmin).max(0.0);
    let gnorm = gt.norm();
    // hard case: no shift beyond -lmin reaches the boundary
    let eps = 1e-12 * scale;
    let partial = |mu: f64| -> DVector<f64> {
        let coef = DVector::from_fn(n, |i, _| {
            let d = lam[i] + mu;
            if d > eps {
                -gt[i] / d
            } else {
                0.0
            }
        });
        q * coef
    };
    if gt[imin].abs() <= 1e-12 * gnorm.max(1e-300) || gnorm == 0.0 {
        let p0 = partial(lo);
        let r0 = p0.norm();
        if r0 < radius {
            let tau = (radius * radius - r0 * r0).sqrt();
            let p = p0 + q.column(imin) * tau;
            return p.iter().copied().collect();
        }
    }
    let mut a = lo;
    let mut bnd = lo + gnorm / radius + eps;
    for _ in 0..200 {
        let mid = 0.5 * (a + bnd);
        let nrm = step_for(mid).norm();
        if !nrm.is_finite() || nrm > radius {
            a = mid;
        } else {
            bnd = mid;
        }
        if (bnd - a) <= 1e-15 * bnd.max(1e-300) {
            break;
        }
    }
    step_for(bnd).iter().copied().collect()
}

/// Maximizes `f` from `start` by trust-region Newton steps.
///
/// Fails only if `f` cannot be evaluated at `start`; non-convergence is
/// reported through [`InnerSolution::converged`].
pub fn maximize<F>(f: F, start: &[f64], opts: &InnerOptions) -> Result<InnerSolution>
where
    F: Fn(&[Dual2]) -> Result<Dual2>,
{
    let n = start.len();
    let eval = |z: &[f64]| hessian_of::<_, Error>(|v| f(v), z);
    let mut z = start.to_vec();
    let (mut fz, mut g, mut h) = eval(&z)?;
    if !fz.is_finite() {
        return Err(DomainError::new("objective is not finite at the start", fz).into());
    }
    let mut radius = opts.initial_radius;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if sup(&g) < opts.tol {
            converged = true;
            break;
        }
        // minimize phi = -f
        let gp: Vec<f64> = g.iter().map(|v| -v).collect();
        let hp: Vec<f64> = h.iter().map(|v| -v).collect();
        let p = trust_region_step(&gp, &hp, radius);
        let pnorm = norm2(&p);
        // stagnation at the limit of floating-point resolution
        let zscale = 1.0 + sup(&z);
        if pnorm <= 1e-13 * zscale && sup(&g) < 1e-6 * fz.abs().max(1.0) {
            converged = true;
            break;
        }
        let mut pred = 0.0;
        for i in 0..n {
            pred -= gp[i] * p[i];
            for j in 0..n {
                pred -= 0.5 * p[i] * hp[i * n + j] * p[j];
            }
        }
        let trial: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a + b).collect();
        iterations += 1;
        let outcome = eval(&trial).ok().filter(|r| r.0.is_finite());
        let rho = match &outcome {
            Some((ft, _, _)) if pred > 0.0 => (ft - fz) / pred,
            Some((ft, _, _)) if *ft >= fz => 1.0,
            _ => f64::NEG_INFINITY,
        };
        if rho < 0.25 {
            radius = SHRINK * radius.min(pnorm.max(1e-300) * 4.0);
        } else if rho > 0.75 && pnorm >= 0.99 * radius {
            radius = (EXPAND * radius).min(opts.max_radius);
        }
        if rho > ACCEPT {
            let (ft, gt, ht) = outcome.unwrap();
            z = trial;
            fz = ft;
            g = gt;
            h = ht;
        }
        if radius < 1e-14 * zscale {
            break;
        }
    }
    if !converged && sup(&g) < opts.tol {
        converged = true;
    }
    Ok(InnerSolution {
        b_hat: z.clone(),
        z_hat: z,
        f_at_max: fz,
        grad: g,
        hess: h,
        iterations,
        converged,
    })
}

/// Maximizes `f` and returns the solution with its Laplace term.
///
/// If `-H` is not positive definite at the maximizer the search is repeated
/// from `fallback` before giving up.
pub fn laplace_unit<F>(
    f: F,
    start: &[f64],
    fallback: Option<&[f64]>,
    opts: &InnerOptions,
) -> Result<(InnerSolution, f64)>
where
    F: Fn(&[Dual2]) -> Result<Dual2>,
{
    let first = maximize(&f, start, opts);
    if let Ok(sol) = &first {
        if let Ok(v) = sol.laplace() {
            return Ok((sol.clone(), v));
        }
    }
    match fallback {
        Some(fb) if fb != start => {
            let sol = maximize(&f, fb, opts)?;
            let v = sol.laplace()?;
            Ok((sol, v))
        }
        _ => {
            let sol = first?;
            let v = sol.laplace()?;
            Ok((sol, v))
        }
    }
}

//! Transition log-densities: closed-form expansion, Euler-Maruyama and the
//! exact Gaussian density of the bivariate OU model.

mod coeffs;

pub use coeffs::{
    c_minus1, cir_coeffs, growth_coeffs, ou2d_closed_form, ou2d_coeffs, CirCoeffs, CoeffSet,
    GrowthCoeffs, Ou2dCoeffs,
};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, Error, Result};
use crate::linalg::{expm2, gaussian_log_density, lyapunov2, mat2_mul, mat2_transpose, Mat2};
use crate::model::{Ou2dModel, Reducible, SdeModel};
use crate::scalar::{lift_consts, Scalar};

/// Highest supported expansion order.
pub const MAX_ORDER: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityMethod {
    Cfe { order: usize },
    EulerMaruyama,
    ExactOu,
}

impl DensityMethod {
    pub const CFE2: DensityMethod = DensityMethod::Cfe { order: 2 };

    pub fn label(&self) -> String {
        match self {
            DensityMethod::Cfe { order } => format!("cfe{order}"),
            DensityMethod::EulerMaruyama => "eum".into(),
            DensityMethod::ExactOu => "exact-ou".into(),
        }
    }
}

impl fmt::Display for DensityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for DensityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cfe0" => Ok(DensityMethod::Cfe { order: 0 }),
            "cfe1" => Ok(DensityMethod::Cfe { order: 1 }),
            "cfe2" | "cfe" => Ok(DensityMethod::CFE2),
            "eum" | "euler" => Ok(DensityMethod::EulerMaruyama),
            "exact-ou" | "exact" => Ok(DensityMethod::ExactOu),
            other => Err(Error::config(format!(
                "unknown density method '{other}' (expected cfe2, cfe1, eum or exact-ou)"
            ))),
        }
    }
}

/// A transition log-density `ln p(x_j, delta | x_{j-1}; theta, b)` over data
/// states and scalar-typed random effects.
pub trait TransitionDensity: Sync {
    fn method(&self) -> DensityMethod;

    fn log_density<S: Scalar>(
        &self,
        xj: &[f64],
        xjm1: &[f64],
        delta: f64,
        theta: &[f64],
        b: &[S],
    ) -> Result<S, DomainError>;
}

fn check_delta(delta: f64) -> Result<(), DomainError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(DomainError::new("time step must be positive", delta))
    }
}

/// Order-`order` closed-form expansion of the log transition density.
pub fn cfe_log_density<M, C, S>(
    model: &M,
    coeffs: &C,
    xj: &[S],
    xjm1: &[S],
    delta: f64,
    theta: &[f64],
    b: &[S],
    order: usize,
) -> Result<S>
where
    M: Reducible,
    C: CoeffSet,
    S: Scalar,
{
    if order > MAX_ORDER {
        return Err(Error::Unsupported(format!(
            "expansion order {order} (at most {MAX_ORDER})"
        )));
    }
    Ok(cfe_unchecked(model, coeffs, xj, xjm1, delta, theta, b, order)?)
}

#[allow(clippy::too_many_arguments)]
fn cfe_unchecked<M: Reducible, C: CoeffSet, S: Scalar>(
    model: &M,
    coeffs: &C,
    xj: &[S],
    xjm1: &[S],
    delta: f64,
    theta: &[f64],
    b: &[S],
    order: usize,
) -> Result<S, DomainError> {
    check_delta(delta)?;
    model.check_effects(theta, &crate::scalar::values(b))?;
    let y = model.lamperti(xj, theta, b)?;
    let y0 = model.lamperti(xjm1, theta, b)?;
    let c = coeffs.coefficients(&y, &y0, theta, b, order)?;
    let d = xj.len() as f64;
    let mut out = model.log_det_v(xj, theta, b)? * -0.5 + c[0] / delta + c[1]
        - 0.5 * d * (2.0 * PI * delta).ln();
    if order >= 1 {
        out += c[2] * delta;
    }
    if order >= 2 {
        out += c[3] * (delta * delta * 0.5);
    }
    Ok(out)
}

/// Gaussian one-step density with mean `x + mu(x) delta` and covariance `v(x) delta`.
pub fn euler_log_density<M: SdeModel, S: Scalar>(
    model: &M,
    xj: &[S],
    xjm1: &[S],
    delta: f64,
    theta: &[f64],
    b: &[S],
) -> Result<S, DomainError> {
    check_delta(delta)?;
    let n = xjm1.len();
    let mu = model.drift(xjm1, theta, b)?;
    let sig = model.diffusion(xjm1, theta, b)?;
    let mean: Vec<S> = xjm1.iter().zip(&mu).map(|(&x, &m)| x + m * delta).collect();
    if n == 1 {
        let var = sig[0].square() * delta;
        if !(var.value() > 0.0) {
            return Err(DomainError::new("singular covariance", var.value()));
        }
        let r = xj[0] - mean[0];
        return Ok((r.square() / var + var.ln()) * -0.5 - 0.5 * (2.0 * PI).ln());
    }
    let mut cov = vec![S::cst(0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = S::cst(0.0);
            for k in 0..n {
                acc += sig[i * n + k] * sig[j * n + k];
            }
            cov[i * n + j] = acc * delta;
        }
    }
    gaussian_log_density(xj, &mean, &cov)
}

/// Mean and covariance of the exact OU transition over `delta`.
pub fn exact_ou_moments<S: Scalar>(
    xjm1: &[f64],
    delta: f64,
    theta: &[f64],
    b: &[S],
) -> Result<([S; 2], Mat2<S>), DomainError> {
    check_delta(delta)?;
    Ou2dModel::stable(theta, b)?;
    let a = Ou2dModel::drift_matrix(theta, b);
    let alpha = Ou2dModel::alpha(theta);
    let sigma = Ou2dModel::sigma(theta);
    let minus_a_dt = [
        [a[0][0] * -delta, a[0][1] * -delta],
        [a[1][0] * -delta, a[1][1] * -delta],
    ];
    let e = expm2(&minus_a_dt);
    let dev = [xjm1[0] - alpha[0], xjm1[1] - alpha[1]];
    let mean = [
        e[0][0] * dev[0] + e[0][1] * dev[1] + alpha[0],
        e[1][0] * dev[0] + e[1][1] * dev[1] + alpha[1],
    ];
    let q = [
        [S::cst(sigma[0] * sigma[0]), S::cst(0.0)],
        [S::cst(0.0), S::cst(sigma[1] * sigma[1])],
    ];
    let lam = lyapunov2(&a, &q)?;
    let carried = mat2_mul(&mat2_mul(&e, &lam), &mat2_transpose(&e));
    let mut omega = lam;
    for i in 0..2 {
        for j in 0..2 {
            omega[i][j] -= carried[i][j];
        }
    }
    Ok((mean, omega))
}

/// Exact bivariate normal transition log-density of the OU model.
pub fn exact_ou_log_density<S: Scalar>(
    xj: &[f64],
    xjm1: &[f64],
    delta: f64,
    theta: &[f64],
    b: &[S],
) -> Result<S, DomainError> {
    let (mean, omega) = exact_ou_moments(xjm1, delta, theta, b)?;
    let x: Vec<S> = lift_consts(xj);
    let cov = [omega[0][0], omega[0][1], omega[1][0], omega[1][1]];
    gaussian_log_density(&x, &mean, &cov)
}

/// Stationary covariance solving `A L + L A^T = sigma sigma^T` for the OU model.
pub fn lyapunov(theta: &[f64], b: &[f64]) -> Result<Mat2<f64>, DomainError> {
    let a = Ou2dModel::drift_matrix(theta, b);
    let s = Ou2dModel::sigma(theta);
    lyapunov2(&a, &[[s[0] * s[0], 0.0], [0.0, s[1] * s[1]]])
}

/// Closed-form expansion of a reducible model with a given coefficient set.
#[derive(Clone, Copy, Debug)]
pub struct Cfe<'a, M, C> {
    pub model: &'a M,
    pub coeffs: &'a C,
    order: usize,
}

impl<'a, M: Reducible, C: CoeffSet> Cfe<'a, M, C> {
    pub fn new(model: &'a M, coeffs: &'a C, order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::Unsupported(format!(
                "expansion order {order} (at most {MAX_ORDER})"
            )));
        }
        Ok(Self {
            model,
            coeffs,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl<M: Reducible, C: CoeffSet> TransitionDensity for Cfe<'_, M, C> {
    fn method(&self) -> DensityMethod {
        DensityMethod::Cfe { order: self.order }
    }

    fn log_density<S: Scalar>(
        &self,
        xj: &[f64],
        xjm1: &[f64],
        delta: f64,
        theta: &[f64],
        b: &[S],
    ) -> Result<S, DomainError> {
        cfe_unchecked(
            self.model,
            self.coeffs,
            &lift_consts(xj),
            &lift_consts(xjm1),
            delta,
            theta,
            b,
            self.order,
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Euler<'a, M> {
    pub model: &'a M,
}

impl<'a, M: SdeModel> Euler<'a, M> {
    pub fn new(model: &'a M) -> Self {
        Self { model }
    }
}

impl<M: SdeModel> TransitionDensity for Euler<'_, M> {
    fn method(&self) -> DensityMethod {
        DensityMethod::EulerMaruyama
    }

    fn log_density<S: Scalar>(
        &self,
        xj: &[f64],
        xjm1: &[f64],
        delta: f64,
        theta: &[f64],
        b: &[S],
    ) -> Result<S, DomainError> {
        self.model.check_effects(theta, &crate::scalar::values(b))?;
        euler_log_density(self.model, &lift_consts(xj), &lift_consts(xjm1), delta, theta, b)
    }
}

/// Exact transition density of [`Ou2dModel`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactOu;

impl TransitionDensity for ExactOu {
    fn method(&self) -> DensityMethod {
        DensityMethod::ExactOu
    }

    fn log_density<S: Scalar>(
        &self,
        xj: &[f64],
        xjm1: &[f64],
        delta: f64,
        theta: &[f64],
        b: &[S],
    ) -> Result<S, DomainError> {
        exact_ou_log_density(xj, xjm1, delta, theta, b)
    }
}

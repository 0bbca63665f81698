//! Closed-form expansion coefficients for the built-in models.
//!
//! Each set returns `[C(-1), C(0), C(1), C(2)]` on the Lamperti scale; entries
//! above the requested order are left at zero.

use crate::error::DomainError;
use crate::linalg::Mat2;
use crate::model::{CirModel, GrowthModel, Ou2dModel};
use crate::scalar::Scalar;

/// Expansion coefficients `C(k)(y | y0)` for `k = -1..=order`.
pub trait CoeffSet: Sync {
    fn coefficients<S: Scalar>(
        &self,
        y: &[S],
        y0: &[S],
        theta: &[f64],
        b: &[S],
        order: usize,
    ) -> Result<[S; 4], DomainError>;
}

/// `C(-1)(y | y0) = -|y - y0|^2 / 2`, shared by every reducible model.
pub fn c_minus1<S: Scalar>(y: &[S], y0: &[S]) -> S {
    let mut acc = S::cst(0.0);
    for (&a, &b) in y.iter().zip(y0) {
        acc += (a - b).square();
    }
    acc * -0.5
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GrowthCoeffs;

#[derive(Clone, Copy, Debug, Default)]
pub struct Ou2dCoeffs;

#[derive(Clone, Copy, Debug, Default)]
pub struct CirCoeffs;

pub fn growth_coeffs() -> GrowthCoeffs {
    GrowthCoeffs
}

pub fn ou2d_coeffs() -> Ou2dCoeffs {
    Ou2dCoeffs
}

pub fn cir_coeffs() -> CirCoeffs {
    CirCoeffs
}

impl CoeffSet for GrowthCoeffs {
    fn coefficients<S: Scalar>(
        &self,
        y: &[S],
        y0: &[S],
        theta: &[f64],
        b: &[S],
        order: usize,
    ) -> Result<[S; 4], DomainError> {
        let (p1, p3) = GrowthModel::totals(theta, b)?;
        let s2 = theta[GrowthModel::SIGMA].powi(2);
        let s4 = s2 * s2;
        let (y, y0) = (y[0], y0[0]);
        let ratio = (y / y0).try_ln()?;
        let zero = S::cst(0.0);
        let mut c = [c_minus1(&[y], &[y0]), zero, zero, zero];

        let yy = y * y;
        let yy0 = y0 * y0;
        let c0 = -((yy * yy - yy0 * yy0) * s2) / (p3 * p1 * 32.0) + (yy - yy0) / (p3 * 4.0)
            - ratio * 0.5;
        c[1] = c0;
        if order == 0 {
            return Ok(c);
        }

        let p = y * y0;
        let p3sq = p3 * p3;
        let p1sq = p1 * p1;
        let quad = yy + p + yy0;
        // complete homogeneous sums y^k + y^(k-1) y0 + ... + y0^k
        let h4 = yy * yy + yy * p + p * p + p * yy0 + yy0 * yy0;
        let h6 = yy * yy * yy + yy * yy * p + yy * p * p + p * p * p + p * p * yy0
            + p * yy0 * yy0
            + yy0 * yy0 * yy0;
        c[2] = -(h6 * s4) / (p3sq * p1sq * 896.0)
            + (p3 * quad * 10.0 + h4 * 3.0) * s2 / (p3sq * p1 * 240.0)
            - (p3sq * 9.0 + p * quad) / (p * p3sq * 24.0);
        if order == 1 {
            return Ok(c);
        }

        let pp = p * p;
        c[3] = -(((yy * yy + yy0 * yy0) * 5.0 + p * (yy + yy0) * 8.0 + pp * 9.0) * s4)
            / (p3sq * p1sq * 896.0)
            + ((yy + yy0) * 9.0 + p * 12.0 + p3 * 10.0) * s2 / (p3sq * p1 * 240.0)
            - (pp + p3sq * 9.0) / (pp * p3sq * 24.0);
        Ok(c)
    }
}

impl CoeffSet for CirCoeffs {
    fn coefficients<S: Scalar>(
        &self,
        y: &[S],
        y0: &[S],
        theta: &[f64],
        b: &[S],
        order: usize,
    ) -> Result<[S; 4], DomainError> {
        let q = CirModel::q(theta, b)?;
        let beta = b[1];
        let (y, y0) = (y[0], y0[0]);
        let ratio = (y / y0).try_ln()?;
        let zero = S::cst(0.0);
        let mut c = [c_minus1(&[y], &[y0]), zero, zero, zero];

        c[1] = ratio * (q + 0.5) - beta * (y * y - y0 * y0) * 0.25;
        if order == 0 {
            return Ok(c);
        }

        let p = y * y0;
        let b2 = beta * beta;
        let tail = q * q * 12.0 - 3.0;
        c[2] = -(-(beta * p * (q + 1.0) * 12.0) + b2 * p * (y * y + p + y0 * y0) + tail)
            / (p * 24.0);
        if order == 1 {
            return Ok(c);
        }

        let pp = p * p;
        c[3] = -(b2 * pp + tail) / (pp * 24.0);
        Ok(c)
    }
}

impl CoeffSet for Ou2dCoeffs {
    fn coefficients<S: Scalar>(
        &self,
        y: &[S],
        y0: &[S],
        theta: &[f64],
        b: &[S],
        order: usize,
    ) -> Result<[S; 4], DomainError> {
        let (k, eta) = Ou2dModel::kappa_eta(theta, b);
        Ok(ou2d_closed_form(&k, eta, y, y0, order))
    }
}

/// Closed-form coefficients of the unit-diffusion process `dY = kappa (eta - Y) dt + dW`.
pub fn ou2d_closed_form<S: Scalar>(
    k: &Mat2<S>,
    eta: [f64; 2],
    y: &[S],
    y0: &[S],
    order: usize,
) -> [S; 4] {
    let [[k11, k12], [k21, k22]] = *k;
    let d1 = y[0] - y0[0];
    let d2 = y[1] - y0[1];
    let a1 = y0[0] - eta[0];
    let a2 = y0[1] - eta[1];
    let zero = S::cst(0.0);
    let mut c = [(d1 * d1 + d2 * d2) * -0.5, zero, zero, zero];

    let s1 = y[0] + y0[0] - 2.0 * eta[0];
    let s2 = y[1] + y0[1] - 2.0 * eta[1];
    c[1] = -(d1 * (s1 * k11 + s2 * k12)) * 0.5 - d2 * (s1 * k21 + s2 * k22) * 0.5;
    if order == 0 {
        return c;
    }

    // recurring kappa combinations
    let col1 = k11 * k11 + k21 * k21;
    let col2 = k12 * k12 + k22 * k22;
    let cross = k11 * k12 + k21 * k22;
    let r1 = a1 * k11 + a2 * k12;
    let r2 = a1 * k21 + a2 * k22;
    let m1 = a1 * col1 + a2 * cross;
    let m2 = a1 * cross + a2 * col2;
    let k12k21 = k12 * k21;

    c[2] = (k11 - r1 * r1) * 0.5 + (k22 - r2 * r2) * 0.5 - d1 * m1 * 0.5
        + d1 * d1 * (-(k11 * k11) * 4.0 + k12 * k12 - k12k21 * 2.0 - k21 * k21 * 3.0) / 24.0
        - d2 * m2 * 0.5
        + d2 * d2 * (-(k22 * k22) * 4.0 + k21 * k21 - k12k21 * 2.0 - k12 * k12 * 3.0) / 24.0
        - d1 * d2 * cross / 3.0;
    if order == 1 {
        return c;
    }

    let skew = k12 - k21;
    c[3] = -((k11 * k11 + k22 * k22) * 2.0 + (k12 + k21).square()) / 12.0
        + d1 * skew * m2 / 6.0
        + d1 * d1 * skew * cross / 12.0
        - d2 * d2 * skew * cross / 12.0
        - d2 * skew * m1 / 6.0
        + d1 * d2 * skew * (col2 - k11 * k11 - k21 * k21) / 12.0;
    c
}

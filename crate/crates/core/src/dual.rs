//! Forward-mode automatic differentiation.
//!
//! [`Dual2`] carries a value, gradient and Hessian with respect to up to
//! [`MAX_VARS`] seeded variables (the random effects of one unit). The Hessian
//! is stored as a packed upper triangle, so symmetry holds by construction.
//!
//! [`Dual1`] carries a value and a `D`-vector of first partials over any inner
//! [`Scalar`]. Nesting `Dual1<Dual1<f64, D>, D>` yields second derivatives;
//! the expansion engine nests it four deep.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::DomainError;
use crate::scalar::Scalar;

/// Maximum number of variables a [`Dual2`] can be seeded with.
pub const MAX_VARS: usize = 4;
const PACKED: usize = MAX_VARS * (MAX_VARS + 1) / 2;

#[inline(always)]
const fn pidx(i: usize, j: usize) -> usize {
    // i <= j, row-major upper triangle of a MAX_VARS x MAX_VARS matrix
    i * (2 * MAX_VARS + 1 - i) / 2 + (j - i)
}

/// Second-order forward-mode dual number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2 {
    value: f64,
    grad: [f64; MAX_VARS],
    hess: [f64; PACKED],
    /// Number of active variables; constants have `n == 0`.
    n: usize,
}

impl Dual2 {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            grad: [0.0; MAX_VARS],
            hess: [0.0; PACKED],
            n: 0,
        }
    }

    /// Variable `index` out of `n` seeded variables.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        assert!(n <= MAX_VARS, "Dual2 supports at most {MAX_VARS} variables");
        assert!(index < n);
        let mut d = Self::constant(value);
        d.grad[index] = 1.0;
        d.n = n;
        d
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad[..self.n]
    }

    pub fn hess_entry(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.hess[pidx(i, j)]
    }

    /// Dense row-major Hessian.
    pub fn hessian(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.hess_entry(i, j);
            }
        }
        out
    }

    /// Apply a scalar function given f(a), f'(a), f''(a).
    #[inline]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let n = self.n;
        let mut out = Self::constant(f);
        out.n = n;
        for i in 0..n {
            out.grad[i] = df * self.grad[i];
        }
        for i in 0..n {
            let gi = self.grad[i];
            for j in i..n {
                let k = pidx(i, j);
                out.hess[k] = df * self.hess[k] + d2f * gi * self.grad[j];
            }
        }
        out
    }
}

/// Seed `b` as independent variables.
pub fn lift(b: &[f64]) -> Vec<Dual2> {
    let n = b.len();
    b.iter()
        .enumerate()
        .map(|(i, &v)| Dual2::variable(v, i, n))
        .collect()
}

/// Value, gradient and dense Hessian of `objective` at `b`.
pub fn hessian_of<F, E>(objective: F, b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), E>
where
    F: FnOnce(&[Dual2]) -> Result<Dual2, E>,
{
    let vars = lift(b);
    let out = objective(&vars)?;
    let n = b.len();
    let mut grad = out.grad().to_vec();
    grad.resize(n, 0.0);
    let mut hess = vec![0.0; n * n];
    let m = out.n.min(n);
    for i in 0..m {
        for j in 0..m {
            hess[i * n + j] = out.hess_entry(i, j);
        }
    }
    Ok((out.value, grad, hess))
}

impl Add for Dual2 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        let n = self.n.max(rhs.n);
        self.value += rhs.value;
        for i in 0..n {
            self.grad[i] += rhs.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = pidx(i, j);
                self.hess[k] += rhs.hess[k];
            }
        }
        self.n = n;
        self
    }
}

impl Sub for Dual2 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        let n = self.n.max(rhs.n);
        self.value -= rhs.value;
        for i in 0..n {
            self.grad[i] -= rhs.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = pidx(i, j);
                self.hess[k] -= rhs.hess[k];
            }
        }
        self.n = n;
        self
    }
}

impl Mul for Dual2 {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let n = self.n.max(rhs.n);
        let (a, b) = (self.value, rhs.value);
        let mut out = Self::constant(a * b);
        out.n = n;
        for i in 0..n {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let k = pidx(i, j);
                out.hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        out
    }
}

impl Div for Dual2 {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let mut out = self * rhs.recip();
        // keep the primal bitwise equal to plain division
        out.value = self.value / rhs.value;
        out
    }
}

impl Neg for Dual2 {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for g in &mut self.grad[..self.n] {
            *g = -*g;
        }
        for h in &mut self.hess {
            *h = -*h;
        }
        self
    }
}

impl Add<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.value *= rhs;
        for g in &mut self.grad[..self.n] {
            *g *= rhs;
        }
        for h in &mut self.hess {
            *h *= rhs;
        }
        self
    }
}

impl Div<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn div(mut self, rhs: f64) -> Self {
        self.value /= rhs;
        for g in &mut self.grad[..self.n] {
            *g /= rhs;
        }
        for h in &mut self.hess {
            *h /= rhs;
        }
        self
    }
}

impl AddAssign for Dual2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual2 {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual2 {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Scalar for Dual2 {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let a = self.value;
        self.chain(a.ln(), 1.0 / a, -1.0 / (a * a))
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }
    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
    fn recip(self) -> Self {
        let a = self.value;
        let r = 1.0 / a;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
    fn powi(self, n: i32) -> Self {
        let a = self.value;
        let nf = n as f64;
        match n {
            0 => Self::constant(1.0),
            1 => self,
            _ => self.chain(a.powi(n), nf * a.powi(n - 1), nf * (nf - 1.0) * a.powi(n - 2)),
        }
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(c, s, c)
    }
}

/// First-order forward-mode dual number over an arbitrary scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual1<S: Scalar, const D: usize> {
    pub v: S,
    pub g: [S; D],
}

impl<S: Scalar, const D: usize> Dual1<S, D> {
    /// A constant of the inner type.
    pub fn constant(v: S) -> Self {
        Self {
            v,
            g: [S::cst(0.0); D],
        }
    }

    /// Variable `index` with unit seed.
    pub fn variable(v: S, index: usize) -> Self {
        let mut d = Self::constant(v);
        d.g[index] = S::cst(1.0);
        d
    }

    #[inline]
    fn chain(self, f: S, df: S) -> Self {
        let mut g = self.g;
        for gi in &mut g {
            *gi = *gi * df;
        }
        Self { v: f, g }
    }
}

impl<S: Scalar, const D: usize> Add for Dual1<S, D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..D {
            self.g[i] += rhs.g[i];
        }
        self
    }
}

impl<S: Scalar, const D: usize> Sub for Dual1<S, D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for i in 0..D {
            self.g[i] -= rhs.g[i];
        }
        self
    }
}

impl<S: Scalar, const D: usize> Mul for Dual1<S, D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut g = self.g;
        for i in 0..D {
            g[i] = self.v * rhs.g[i] + rhs.v * self.g[i];
        }
        Self {
            v: self.v * rhs.v,
            g,
        }
    }
}

impl<S: Scalar, const D: usize> Div for Dual1<S, D> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut out = self * rhs.recip();
        out.v = self.v / rhs.v;
        out
    }
}

impl<S: Scalar, const D: usize> Neg for Dual1<S, D> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for gi in &mut self.g {
            *gi = -*gi;
        }
        self
    }
}

impl<S: Scalar, const D: usize> Add<f64> for Dual1<S, D> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v = self.v + rhs;
        self
    }
}

impl<S: Scalar, const D: usize> Sub<f64> for Dual1<S, D> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v = self.v - rhs;
        self
    }
}

impl<S: Scalar, const D: usize> Mul<f64> for Dual1<S, D> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.v = self.v * rhs;
        for gi in &mut self.g {
            *gi = *gi * rhs;
        }
        self
    }
}

impl<S: Scalar, const D: usize> Div<f64> for Dual1<S, D> {
    type Output = Self;
    fn div(mut self, rhs: f64) -> Self {
        self.v = self.v / rhs;
        for g in &mut self.g {
            *g = *g / rhs;
        }
        self
    }
}

impl<S: Scalar, const D: usize> AddAssign for Dual1<S, D> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Scalar, const D: usize> SubAssign for Dual1<S, D> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<S: Scalar, const D: usize> MulAssign for Dual1<S, D> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<S: Scalar, const D: usize> Scalar for Dual1<S, D> {
    fn cst(v: f64) -> Self {
        Self::constant(S::cst(v))
    }
    fn value(&self) -> f64 {
        self.v.value()
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        let v = self.v;
        self.chain(v.ln(), v.recip())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, s.recip() * 0.5)
    }
    fn sin(self) -> Self {
        let v = self.v;
        self.chain(v.sin(), v.cos())
    }
    fn cos(self) -> Self {
        let v = self.v;
        self.chain(v.cos(), -v.sin())
    }
    fn recip(self) -> Self {
        let r = self.v.recip();
        self.chain(r, -(r * r))
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::cst(1.0),
            1 => self,
            _ => {
                let v = self.v;
                self.chain(v.powi(n), v.powi(n - 1) * n as f64)
            }
        }
    }
    fn sinh(self) -> Self {
        let v = self.v;
        self.chain(v.sinh(), v.cosh())
    }
    fn cosh(self) -> Self {
        let v = self.v;
        self.chain(v.cosh(), v.sinh())
    }
}

/// Domain-checked power for real exponents on positive bases.
pub fn try_powf<S: Scalar>(base: S, exponent: f64) -> Result<S, DomainError> {
    Ok((base.try_ln()? * exponent).exp())
}

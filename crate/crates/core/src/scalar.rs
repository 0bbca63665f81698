//! Numeric abstraction shared by plain evaluation and forward-mode AD.
//!
//! Every density, coefficient and drift formula in the crate is written once,
//! generic over [`Scalar`], so the value used by the outer optimizer and the
//! gradient/Hessian used by the inner Newton step come from the same code.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::DomainError;

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// A constant (all derivatives zero).
    fn cst(v: f64) -> Self;
    /// The primal value.
    fn value(&self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn recip(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn square(self) -> Self {
        self * self
    }

    fn sinh(self) -> Self {
        let e = self.exp();
        (e - e.recip()) * 0.5
    }

    fn cosh(self) -> Self {
        let e = self.exp();
        (e + e.recip()) * 0.5
    }

    fn try_ln(self) -> Result<Self, DomainError> {
        let v = self.value();
        if v > 0.0 && v.is_finite() {
            Ok(self.ln())
        } else {
            Err(DomainError::new("log of non-positive argument", v))
        }
    }

    fn try_sqrt(self) -> Result<Self, DomainError> {
        let v = self.value();
        if v > 0.0 && v.is_finite() {
            Ok(self.sqrt())
        } else if v == 0.0 {
            Err(DomainError::new("square root at zero is not differentiable", v))
        } else {
            Err(DomainError::new("square root of negative argument", v))
        }
    }

    fn try_recip(self) -> Result<Self, DomainError> {
        let v = self.value();
        if v != 0.0 && v.is_finite() {
            Ok(self.recip())
        } else {
            Err(DomainError::new("division by zero", v))
        }
    }

    fn try_div(self, rhs: Self) -> Result<Self, DomainError> {
        rhs.try_recip()?;
        Ok(self / rhs)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn recip(self) -> Self {
        f64::recip(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
}

/// Lift a slice of plain values into constants of `S`.
pub fn lift_consts<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::cst(x)).collect()
}

pub fn values<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(Scalar::value).collect()
}

//! Generic expansion coefficients for any reducible model.
//!
//! `C(0)`, `C(1)` and `C(2)` are line integrals over `u in [0, 1]` of
//! expressions in the transformed drift `mu_Y` and in `y`-derivatives of the
//! lower-order coefficients. The integrals use Gauss-Legendre quadrature and
//! the `y`-derivatives are taken by nested [`Dual1`] numbers through the
//! integrand (the nodes `u` do not depend on `y`), so `C(2)` carries four
//! levels of nesting. Validity rests on `mu_Y` being smooth on the segment
//! from `y0` to `y`.

use crate::density::{c_minus1, CoeffSet, MAX_ORDER};
use crate::dual::Dual1;
use crate::error::DomainError;
use crate::linalg::inverse;
use crate::model::Reducible;
use crate::scalar::Scalar;

/// Gauss-Legendre rule mapped to `[0, 1]`; exact for polynomials of degree `2n - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 20;

impl QuadratureRule {
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton iteration on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.order() - 1
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&u, &w)| w * f(u)).sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(DEFAULT_QUADRATURE_ORDER)
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

type T1<S, const D: usize> = Dual1<S, D>;
type T2<S, const D: usize> = Dual1<Dual1<S, D>, D>;

fn up<S: Scalar, const D: usize>(v: &[S]) -> Vec<T1<S, D>> {
    v.iter().map(|&s| Dual1::constant(s)).collect()
}

fn up2<S: Scalar, const D: usize>(v: &[S]) -> Vec<T2<S, D>> {
    v.iter().map(|&s| Dual1::constant(Dual1::constant(s))).collect()
}

fn seed<S: Scalar, const D: usize>(v: &[S]) -> Vec<T1<S, D>> {
    v.iter().enumerate().map(|(h, &s)| Dual1::variable(s, h)).collect()
}

/// Seeds both nesting levels so `.g[h].g[k]` holds second partials.
fn seed2<S: Scalar, const D: usize>(v: &[S]) -> Vec<T2<S, D>> {
    v.iter()
        .enumerate()
        .map(|(h, &s)| Dual1::variable(Dual1::variable(s, h), h))
        .collect()
}

fn segment_point<S: Scalar>(y: &[S], y0: &[S], u: f64) -> Vec<S> {
    y.iter().zip(y0).map(|(&a, &b)| b + (a - b) * u).collect()
}

/// `C(0)(y | y0) = sum_h (y_h - y0_h) int_0^1 mu_Y,h(y0 + u (y - y0)) du`.
pub fn c0<M: Reducible, S: Scalar>(
    model: &M,
    y: &[S],
    y0: &[S],
    theta: &[f64],
    b: &[S],
    quad: &QuadratureRule,
) -> Result<S, DomainError> {
    let mut acc = S::cst(0.0);
    for (&u, &w) in quad.nodes.iter().zip(&quad.weights) {
        let z = segment_point(y, y0, u);
        let mu = model.drift_y(&z, theta, b)?;
        for h in 0..y.len() {
            acc += (y[h] - y0[h]) * mu[h] * w;
        }
    }
    Ok(acc)
}

/// `G(1)(y | y0)`.
pub fn g1<M: Reducible, S: Scalar, const D: usize>(
    model: &M,
    y: &[S],
    y0: &[S],
    theta: &[f64],
    b: &[S],
    quad: &QuadratureRule,
) -> Result<S, DomainError> {
    assert_eq!(y.len(), D, "state dimension must equal D");
    let c: T2<S, D> = c0(model, &seed2(y), &up2(y0), theta, &up2(b), quad)?;
    let mu: Vec<T1<S, D>> = model.drift_y(&seed(y), theta, &up(b))?;
    let mut out = S::cst(0.0);
    for h in 0..D {
        let dc = c.v.g[h];
        out -= mu[h].g[h] + mu[h].v * dc;
        out += (c.g[h].g[h] + dc * dc) * 0.5;
    }
    Ok(out)
}

/// `C(1)(y | y0) = int_0^1 G(1)(y0 + u (y - y0) | y0) du`.
pub fn c1<M: Reducible, S: Scalar, const D: usize>(
    model: &M,
    y: &[S],
    y0: &[S],
    theta: &[f64],
    b: &[S],
    quad: &QuadratureRule,
) -> Result<S, DomainError> {
    let mut acc = S::cst(0.0);
    for (&u, &w) in quad.nodes.iter().zip(&quad.weights) {
        let z = segment_point(y, y0, u);
        acc += g1::<M, S, D>(model, &z, y0, theta, b, quad)? * w;
    }
    Ok(acc)
}

/// `G(2)(y | y0)`.
pub fn g2<M: Reducible, S: Scalar, const D: usize>(
    model: &M,
    y: &[S],
    y0: &[S],
    theta: &[f64],
    b: &[S],
    quad: &QuadratureRule,
) -> Result<S, DomainError> {
    assert_eq!(y.len(), D, "state dimension must equal D");
    let k1: T2<S, D> = c1::<M, T2<S, D>, D>(model, &seed2(y), &up2(y0), theta, &up2(b), quad)?;
    let k0: T1<S, D> = c0(model, &seed(y), &up(y0), theta, &up(b), quad)?;
    let mu = model.drift_y(y, theta, b)?;
    let mut out = S::cst(0.0);
    for h in 0..D {
        let dk1 = k1.v.g[h];
        out += -(mu[h] * dk1) + k1.g[h].g[h] * 0.5 + k0.g[h] * dk1;
    }
    Ok(out)
}

/// `C(2)(y | y0) = 2 int_0^1 G(2)(y0 + u (y - y0) | y0) u du`.
pub fn c2<M: Reducible, S: Scalar, const D: usize>(
    model: &M,
    y: &[S],
    y0: &[S],
    theta: &[f64],
    b: &[S],
    quad: &QuadratureRule,
) -> Result<S, DomainError> {
    let mut acc = S::cst(0.0);
    for (&u, &w) in quad.nodes.iter().zip(&quad.weights) {
        let z = segment_point(y, y0, u);
        acc += g2::<M, S, D>(model, &z, y0, theta, b, quad)? * (2.0 * w * u);
    }
    Ok(acc)
}

/// `C(k)` for `k in {1, 2}`.
pub fn c_k<M: Reducible, S: Scalar, const D: usize>(
    model: &M,
    y: &[S],
    y0: &[S],
    theta: &[f64],
    b: &[S],
    k: usize,
    quad: &QuadratureRule,
) -> Result<S, DomainError> {
    match k {
        1 => c1::<M, S, D>(model, y, y0, theta, b, quad),
        2 => c2::<M, S, D>(model, y, y0, theta, b, quad),
        _ => Err(DomainError::new("coefficient order outside 1..=2", k as f64)),
    }
}

/// Coefficient set computed by the generic engine for a `D`-dimensional model.
#[derive(Clone, Debug)]
pub struct GenericCoeffs<'a, M, const D: usize> {
    pub model: &'a M,
    pub quad: QuadratureRule,
}

impl<'a, M: Reducible, const D: usize> GenericCoeffs<'a, M, D> {
    pub fn new(model: &'a M) -> Self {
        Self::with_rule(model, QuadratureRule::default())
    }

    pub fn with_rule(model: &'a M, quad: QuadratureRule) -> Self {
        assert_eq!(model.dim(), D, "model dimension must equal D");
        Self { model, quad }
    }
}

impl<M: Reducible, const D: usize> CoeffSet for GenericCoeffs<'_, M, D> {
    fn coefficients<S: Scalar>(
        &self,
        y: &[S],
        y0: &[S],
        theta: &[f64],
        b: &[S],
        order: usize,
    ) -> Result<[S; 4], DomainError> {
        let order = order.min(MAX_ORDER);
        let zero = S::cst(0.0);
        let mut c = [c_minus1(y, y0), zero, zero, zero];
        c[1] = c0(self.model, y, y0, theta, b, &self.quad)?;
        for k in 1..=order {
            c[k + 1] = c_k::<M, S, D>(self.model, y, y0, theta, b, k, &self.quad)?;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reducibility {
    pub reducible: bool,
    pub max_violation: f64,
}

/// Tolerance on the cross-partial identity.
pub const REDUCIBILITY_TOL: f64 = 1e-8;

/// Checks `d(sigma^-1)_ij / dx_k = d(sigma^-1)_ik / dx_j` at every probe.
///
/// `diffusion` maps a state to the row-major `D x D` diffusion matrix.
pub fn check_reducible<const D: usize, F>(
    diffusion: F,
    probes: &[Vec<f64>],
) -> Result<Reducibility, DomainError>
where
    F: Fn(&[Dual1<f64, D>]) -> Result<Vec<Dual1<f64, D>>, DomainError>,
{
    let mut worst = 0.0f64;
    for x in probes {
        let sig = diffusion(&seed::<f64, D>(x))?;
        let inv = inverse(&sig, D)?;
        for i in 0..D {
            for j in 0..D {
                for k in (j + 1)..D {
                    let v = (inv[i * D + j].g[k] - inv[i * D + k].g[j]).abs();
                    worst = worst.max(v);
                }
            }
        }
    }
    Ok(Reducibility {
        reducible: worst < REDUCIBILITY_TOL,
        max_violation: worst,
    })
}

//! Small dense linear algebra over [`Scalar`], row-major.
//!
//! State dimensions here are 1 or 2, so plain loops are all that is needed;
//! the point is that the same routines run on `f64`, `Dual1` and `Dual2`.

use crate::error::DomainError;
use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive definite `n x n` matrix.
pub fn cholesky<S: Scalar>(a: &[S], n: usize) -> Result<Vec<S>, DomainError> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![S::cst(0.0); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k].square();
        }
        if !(d.value() > 0.0) {
            return Err(DomainError::new("matrix is not positive definite", d.value()));
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// `log det A` from its Cholesky factor.
pub fn chol_logdet<S: Scalar>(l: &[S], n: usize) -> S {
    let mut acc = S::cst(0.0);
    for i in 0..n {
        acc += l[i * n + i].ln();
    }
    acc * 2.0
}

/// `r^T A^{-1} r` from the Cholesky factor of `A`.
pub fn chol_quad_form<S: Scalar>(l: &[S], n: usize, r: &[S]) -> S {
    // forward substitution L z = r, result is |z|^2
    let mut z = vec![S::cst(0.0); n];
    let mut acc = S::cst(0.0);
    for i in 0..n {
        let mut s = r[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
        acc += z[i].square();
    }
    acc
}

/// Log-density of `N(mean, cov)` at `x`.
pub fn gaussian_log_density<S: Scalar>(
    x: &[S],
    mean: &[S],
    cov: &[S],
) -> Result<S, DomainError> {
    let n = x.len();
    let l = cholesky(cov, n)?;
    let r: Vec<S> = x.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let q = chol_quad_form(&l, n, &r);
    Ok((chol_logdet(&l, n) + q) * -0.5 - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Inverse by Gauss-Jordan elimination with partial pivoting on primal values.
pub fn inverse<S: Scalar>(a: &[S], n: usize) -> Result<Vec<S>, DomainError> {
    let mut m = a.to_vec();
    let mut inv = vec![S::cst(0.0); n * n];
    for i in 0..n {
        inv[i * n + i] = S::cst(1.0);
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .value()
                    .abs()
                    .total_cmp(&m[j * n + col].value().abs())
            })
            .unwrap();
        let pv = m[piv * n + col].value();
        if pv == 0.0 || !pv.is_finite() {
            return Err(DomainError::new("singular matrix", pv));
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let p = m[col * n + col].recip();
        for k in 0..n {
            m[col * n + k] *= p;
            inv[col * n + k] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f.value() == 0.0 {
                continue;
            }
            for k in 0..n {
                let mk = m[col * n + k];
                let ik = inv[col * n + k];
                m[r * n + k] -= f * mk;
                inv[r * n + k] -= f * ik;
            }
        }
    }
    Ok(inv)
}

pub type Mat2<S> = [[S; 2]; 2];

pub fn mat2_mul<S: Scalar>(a: &Mat2<S>, b: &Mat2<S>) -> Mat2<S> {
    let mut c = [[S::cst(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn mat2_transpose<S: Scalar>(a: &Mat2<S>) -> Mat2<S> {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn mat2_det<S: Scalar>(a: &Mat2<S>) -> S {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// `cosh(sqrt(z))` and `sinh(sqrt(z))/sqrt(z)` as smooth functions of `z`,
/// valid for either sign of `z`.
fn cosh_sinhc_of_square<S: Scalar>(z: S) -> (S, S) {
    let zv = z.value();
    if zv.abs() < 1e-2 {
        // Taylor series in z; 9 terms are exact to rounding for |z| < 1e-2
        let mut c = S::cst(0.0);
        let mut s = S::cst(0.0);
        let mut pow = S::cst(1.0);
        let mut fact_even = 1.0; // (2k)!
        let mut fact_odd = 1.0; // (2k+1)!
        for k in 0..9 {
            if k > 0 {
                fact_even *= (2 * k - 1) as f64 * (2 * k) as f64;
                fact_odd *= (2 * k) as f64 * (2 * k + 1) as f64;
            }
            c += pow / fact_even;
            s += pow / fact_odd;
            pow *= z;
        }
        (c, s)
    } else if zv > 0.0 {
        let r = z.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-z).sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// Closed-form exponential of a 2x2 matrix.
pub fn expm2<S: Scalar>(m: &Mat2<S>) -> Mat2<S> {
    let s = (m[0][0] + m[1][1]) * 0.5;
    let half_diff = (m[0][0] - m[1][1]) * 0.5;
    // N = M - sI is traceless with N^2 = z I
    let z = half_diff.square() + m[0][1] * m[1][0];
    let (c, sh) = cosh_sinhc_of_square(z);
    let es = s.exp();
    [
        [es * (c + sh * half_diff), es * sh * m[0][1]],
        [es * sh * m[1][0], es * (c - sh * half_diff)],
    ]
}

/// Solution of `A L + L A^T = Q` for 2x2 `A` with eigenvalues of positive real part.
pub fn lyapunov2<S: Scalar>(a: &Mat2<S>, q: &Mat2<S>) -> Result<Mat2<S>, DomainError> {
    let tr = a[0][0] + a[1][1];
    let det = mat2_det(a);
    if !(tr.value() > 0.0 && det.value() > 0.0) {
        return Err(DomainError::new(
            "drift matrix must have eigenvalues with positive real part",
            det.value().min(tr.value()),
        ));
    }
    let mut shifted = *a;
    shifted[0][0] -= tr;
    shifted[1][1] -= tr;
    let sq = mat2_mul(&mat2_mul(&shifted, q), &mat2_transpose(&shifted));
    let scale = (tr * det * 2.0).recip();
    let mut out = [[S::cst(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (det * q[i][j] + sq[i][j]) * scale;
        }
    }
    Ok(out)
}

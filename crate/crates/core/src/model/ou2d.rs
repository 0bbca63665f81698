use super::{positive, ParamInfo, ParamLayout, Reducible, SdeModel};
use crate::dists::{EffectDistribution, EffectPrior};
use crate::error::{DomainError, Result};
use crate::linalg::Mat2;
use crate::scalar::Scalar;

/// Bivariate Ornstein-Uhlenbeck process `dX = (beta * b)(alpha - X) dt + sigma dW`
/// with elementwise multiplicative Gamma effects on the drift matrix.
///
/// theta = (alpha1, alpha2, beta11, beta12, beta21, beta22, sigma1, sigma2),
/// b = (b11, b12, b21, b22), psi = (nu11, nu12, nu21, nu22).
#[derive(Clone, Debug)]
pub struct Ou2dModel {
    layout: ParamLayout,
}

impl Ou2dModel {
    pub fn new() -> Self {
        Self {
            layout: ParamLayout {
                theta: vec![
                    ParamInfo::real("alpha1"),
                    ParamInfo::real("alpha2"),
                    ParamInfo::positive("beta11"),
                    ParamInfo::positive("beta12"),
                    ParamInfo::positive("beta21"),
                    ParamInfo::positive("beta22"),
                    ParamInfo::positive("sigma1"),
                    ParamInfo::positive("sigma2"),
                ],
                psi: vec![
                    ParamInfo::positive("nu11").with_bounds(1e-2, 1e4),
                    ParamInfo::positive("nu12").with_bounds(1e-2, 1e4),
                    ParamInfo::positive("nu21").with_bounds(1e-2, 1e4),
                    ParamInfo::positive("nu22").with_bounds(1e-2, 1e4),
                ],
                effects: vec!["b11", "b12", "b21", "b22"],
            },
        }
    }

    pub fn alpha(theta: &[f64]) -> [f64; 2] {
        [theta[0], theta[1]]
    }

    pub fn sigma(theta: &[f64]) -> [f64; 2] {
        [theta[6], theta[7]]
    }

    /// The drift matrix `beta * b` (elementwise product).
    pub fn drift_matrix<S: Scalar>(theta: &[f64], b: &[S]) -> Mat2<S> {
        [
            [b[0] * theta[2], b[1] * theta[3]],
            [b[2] * theta[4], b[3] * theta[5]],
        ]
    }

    /// Eigenvalues of `beta * b` have positive real part and all effects are positive.
    pub fn stable<S: Scalar>(theta: &[f64], b: &[S]) -> Result<(), DomainError> {
        for bi in b {
            positive("multiplicative effect", bi.value())?;
        }
        let a = Self::drift_matrix(theta, b);
        let tr = a[0][0].value() + a[1][1].value();
        let det = a[0][0].value() * a[1][1].value() - a[0][1].value() * a[1][0].value();
        positive("trace of beta * b", tr)?;
        positive("determinant of beta * b", det)
    }

    /// `kappa = sigma^{-1} (beta * b) sigma` and `eta = sigma^{-1} alpha`.
    pub fn kappa_eta<S: Scalar>(theta: &[f64], b: &[S]) -> (Mat2<S>, [f64; 2]) {
        let a = Self::drift_matrix(theta, b);
        let s = Self::sigma(theta);
        let al = Self::alpha(theta);
        let mut k = a;
        for i in 0..2 {
            for j in 0..2 {
                k[i][j] = a[i][j] * (s[j] / s[i]);
            }
        }
        (k, [al[0] / s[0], al[1] / s[1]])
    }

    fn check_sigma(theta: &[f64]) -> Result<(), DomainError> {
        positive("sigma1", theta[6])?;
        positive("sigma2", theta[7])
    }
}

impl Default for Ou2dModel {
    fn default() -> Self {
        Self::new()
    }
}

impl SdeModel for Ou2dModel {
    fn id(&self) -> &'static str {
        "ou2d"
    }

    fn dim(&self) -> usize {
        2
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        let a = Self::drift_matrix(theta, b);
        let r0 = -x[0] + theta[0];
        let r1 = -x[1] + theta[1];
        Ok(vec![a[0][0] * r0 + a[0][1] * r1, a[1][0] * r0 + a[1][1] * r1])
    }

    fn diffusion<S: Scalar>(
        &self,
        _x: &[S],
        theta: &[f64],
        _b: &[S],
    ) -> Result<Vec<S>, DomainError> {
        Self::check_sigma(theta)?;
        Ok(vec![
            S::cst(theta[6]),
            S::cst(0.0),
            S::cst(0.0),
            S::cst(theta[7]),
        ])
    }

    fn in_state_space(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }

    fn constraint_ok(&self, theta: &[f64], b: &[f64]) -> bool {
        Self::stable(theta, b).is_ok()
    }

    fn constraint_name(&self) -> &'static str {
        "beta * b has eigenvalues with positive real part"
    }

    fn prior(&self, psi: &[f64]) -> Result<EffectPrior> {
        EffectPrior::new(
            psi.iter()
                .map(|&nu| EffectDistribution::Gamma { shape: nu })
                .collect(),
        )
    }
}

impl Reducible for Ou2dModel {
    fn lamperti<S: Scalar>(&self, x: &[S], theta: &[f64], _b: &[S]) -> Result<Vec<S>, DomainError> {
        Self::check_sigma(theta)?;
        Ok(vec![x[0] / theta[6], x[1] / theta[7]])
    }

    fn lamperti_inverse<S: Scalar>(
        &self,
        y: &[S],
        theta: &[f64],
        _b: &[S],
    ) -> Result<Vec<S>, DomainError> {
        Ok(vec![y[0] * theta[6], y[1] * theta[7]])
    }

    fn drift_y<S: Scalar>(&self, y: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        Self::check_sigma(theta)?;
        let (k, eta) = Self::kappa_eta(theta, b);
        let r0 = -y[0] + eta[0];
        let r1 = -y[1] + eta[1];
        Ok(vec![k[0][0] * r0 + k[0][1] * r1, k[1][0] * r0 + k[1][1] * r1])
    }

    fn log_det_v<S: Scalar>(&self, _x: &[S], theta: &[f64], _b: &[S]) -> Result<S, DomainError> {
        Self::check_sigma(theta)?;
        Ok(S::cst(2.0 * (theta[6].ln() + theta[7].ln())))
    }
}

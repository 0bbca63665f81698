use super::{positive, ParamInfo, ParamLayout, Reducible, SdeModel};
use crate::dists::{EffectDistribution, EffectPrior};
use crate::error::{DomainError, Result};
use crate::scalar::Scalar;

/// Square-root process `dX = -beta_i (X - alpha - alpha_i) dt + sigma_i sqrt(X) dW`.
///
/// theta = (alpha), b = (alpha_i, beta_i, sigma_i) with a symmetric Beta
/// effect on `[a, b]` and log-normal `beta_i`, `sigma_i`;
/// psi = (p_alpha, p_beta1, p_beta2, p_sigma1, p_sigma2).
#[derive(Clone, Debug)]
pub struct CirModel {
    layout: ParamLayout,
    /// Support of the `alpha_i` effect.
    pub support: (f64, f64),
}

impl CirModel {
    pub fn new() -> Self {
        Self::with_support(0.1, 5.0)
    }

    pub fn with_support(a: f64, b: f64) -> Self {
        assert!(a < b, "empty support");
        Self {
            layout: ParamLayout {
                theta: vec![ParamInfo::real("alpha")],
                psi: vec![
                    ParamInfo::positive("p_alpha").with_bounds(1e-2, 1e3),
                    ParamInfo::real("p_beta1").with_bounds(-10.0, 10.0),
                    ParamInfo::positive("p_beta2").with_bounds(1e-3, 1.0),
                    ParamInfo::real("p_sigma1").with_bounds(-10.0, 10.0),
                    ParamInfo::positive("p_sigma2").with_bounds(1e-3, 1.0),
                ],
                effects: vec!["alpha_i", "beta_i", "sigma_i"],
            },
            support: (a, b),
        }
    }

    /// `(alpha + alpha_i, beta_i, sigma_i)` with the rate and scale checked positive.
    pub(crate) fn parts<S: Scalar>(theta: &[f64], b: &[S]) -> Result<(S, S, S), DomainError> {
        positive("beta_i", b[1].value())?;
        positive("sigma_i", b[2].value())?;
        Ok((b[0] + theta[0], b[1], b[2]))
    }

    /// Exponent `q = 2 beta_i (alpha + alpha_i) / sigma_i^2 - 1`.
    pub(crate) fn q<S: Scalar>(theta: &[f64], b: &[S]) -> Result<S, DomainError> {
        let (level, beta, sigma) = Self::parts(theta, b)?;
        Ok(beta * level * 2.0 / sigma.square() - 1.0)
    }
}

impl Default for CirModel {
    fn default() -> Self {
        Self::new()
    }
}

impl SdeModel for CirModel {
    fn id(&self) -> &'static str {
        "cir"
    }

    fn dim(&self) -> usize {
        1
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        let (level, beta, _) = Self::parts(theta, b)?;
        Ok(vec![-(beta * (x[0] - level))])
    }

    fn diffusion<S: Scalar>(
        &self,
        x: &[S],
        theta: &[f64],
        b: &[S],
    ) -> Result<Vec<S>, DomainError> {
        let (_, _, sigma) = Self::parts(theta, b)?;
        Ok(vec![x[0].try_sqrt()? * sigma])
    }

    fn diffusion_diag_dx(
        &self,
        x: &[f64],
        _theta: &[f64],
        b: &[f64],
    ) -> Result<Vec<f64>, DomainError> {
        positive("state", x[0])?;
        Ok(vec![b[2] / (2.0 * x[0].sqrt())])
    }

    fn in_state_space(&self, x: &[f64]) -> bool {
        x[0] > 0.0 && x[0].is_finite()
    }

    fn constraint_ok(&self, theta: &[f64], b: &[f64]) -> bool {
        matches!(Self::q(theta, b), Ok(q) if q >= 0.0)
    }

    fn constraint_name(&self) -> &'static str {
        "2 (alpha + alpha_i) beta_i / sigma_i^2 >= 1"
    }

    fn prior(&self, psi: &[f64]) -> Result<EffectPrior> {
        EffectPrior::new(vec![
            EffectDistribution::SymmetricBeta {
                p: psi[0],
                lower: self.support.0,
                upper: self.support.1,
            },
            EffectDistribution::LogNormal {
                mu: psi[1],
                sigma: psi[2],
            },
            EffectDistribution::LogNormal {
                mu: psi[3],
                sigma: psi[4],
            },
        ])
    }

    fn reflection_scale(&self, _theta: &[f64], b: &[f64]) -> Option<f64> {
        Some(b[2] * b[2])
    }

    fn determined(&self, theta: &[f64], psi: &[f64]) -> Vec<(&'static str, f64)> {
        match self.prior(psi) {
            Ok(prior) => {
                let m = prior.derived_moments();
                vec![
                    ("mean_level", theta[0] + m[0].mean),
                    ("beta", m[1].mean),
                    ("sigma", m[2].mean),
                ]
            }
            Err(_) => Vec::new(),
        }
    }
}

impl Reducible for CirModel {
    fn lamperti<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        let (_, _, sigma) = Self::parts(theta, b)?;
        Ok(vec![x[0].try_sqrt()? * 2.0 / sigma])
    }

    fn lamperti_inverse<S: Scalar>(
        &self,
        y: &[S],
        theta: &[f64],
        b: &[S],
    ) -> Result<Vec<S>, DomainError> {
        let (_, _, sigma) = Self::parts(theta, b)?;
        positive("transformed state", y[0].value())?;
        let h = y[0] * sigma * 0.5;
        Ok(vec![h * h])
    }

    fn drift_y<S: Scalar>(&self, y: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        let q = Self::q(theta, b)?;
        let y = y[0];
        positive("transformed state", y.value())?;
        Ok(vec![(q * 2.0 + 1.0) / (y * 2.0) - b[1] * y * 0.5])
    }

    fn log_det_v<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<S, DomainError> {
        let (_, _, sigma) = Self::parts(theta, b)?;
        Ok(x[0].try_ln()? + sigma.square().ln())
    }
}

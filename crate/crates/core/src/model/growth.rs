use super::{positive, ParamInfo, ParamLayout, Reducible, SdeModel};
use crate::dists::{EffectDistribution, EffectPrior};
use crate::error::{DomainError, Result};
use crate::scalar::Scalar;

/// Logistic growth with `sigma sqrt(X)` noise and additive normal effects on
/// the asymptote `phi1` and the scale `phi3`.
///
/// theta = (phi1, phi3, sigma), b = (phi1_i, phi3_i), psi = (sd_phi1, sd_phi3).
#[derive(Clone, Debug)]
pub struct GrowthModel {
    layout: ParamLayout,
}

impl GrowthModel {
    pub const PHI1: usize = 0;
    pub const PHI3: usize = 1;
    pub const SIGMA: usize = 2;

    pub fn new() -> Self {
        Self {
            layout: ParamLayout {
                theta: vec![
                    ParamInfo::positive("phi1"),
                    ParamInfo::positive("phi3"),
                    ParamInfo::positive("sigma"),
                ],
                psi: vec![
                    ParamInfo::positive("sd_phi1"),
                    ParamInfo::positive("sd_phi3"),
                ],
                effects: vec!["phi1_i", "phi3_i"],
            },
        }
    }

    /// `(phi1 + phi1_i, phi3 + phi3_i)`, both required positive.
    pub(crate) fn totals<S: Scalar>(theta: &[f64], b: &[S]) -> Result<(S, S), DomainError> {
        let p1 = b[0] + theta[Self::PHI1];
        let p3 = b[1] + theta[Self::PHI3];
        positive("phi1 + phi1_i", p1.value())?;
        positive("phi3 + phi3_i", p3.value())?;
        Ok((p1, p3))
    }
}

impl Default for GrowthModel {
    fn default() -> Self {
        Self::new()
    }
}

impl SdeModel for GrowthModel {
    fn id(&self) -> &'static str {
        "growth"
    }

    fn dim(&self) -> usize {
        1
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift<S: Scalar>(&self, x: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        let (p1, p3) = Self::totals(theta, b)?;
        let x = x[0];
        Ok(vec![x * (p1 - x) / (p1 * p3)])
    }

    fn diffusion<S: Scalar>(
        &self,
        x: &[S],
        theta: &[f64],
        _b: &[S],
    ) -> Result<Vec<S>, DomainError> {
        Ok(vec![x[0].try_sqrt()? * theta[Self::SIGMA]])
    }

    fn diffusion_diag_dx(
        &self,
        x: &[f64],
        theta: &[f64],
        _b: &[f64],
    ) -> Result<Vec<f64>, DomainError> {
        positive("state", x[0])?;
        Ok(vec![theta[Self::SIGMA] / (2.0 * x[0].sqrt())])
    }

    fn in_state_space(&self, x: &[f64]) -> bool {
        x[0] > 0.0 && x[0].is_finite()
    }

    fn constraint_ok(&self, theta: &[f64], b: &[f64]) -> bool {
        Self::totals(theta, b).is_ok()
    }

    fn constraint_name(&self) -> &'static str {
        "phi1 + phi1_i > 0 and phi3 + phi3_i > 0"
    }

    fn prior(&self, psi: &[f64]) -> Result<EffectPrior> {
        EffectPrior::new(vec![
            EffectDistribution::Normal { sd: psi[0] },
            EffectDistribution::Normal { sd: psi[1] },
        ])
    }

    fn reflection_scale(&self, theta: &[f64], _b: &[f64]) -> Option<f64> {
        Some(theta[Self::SIGMA].powi(2))
    }
}

impl Reducible for GrowthModel {
    fn lamperti<S: Scalar>(&self, x: &[S], theta: &[f64], _b: &[S]) -> Result<Vec<S>, DomainError> {
        Ok(vec![x[0].try_sqrt()? * (2.0 / theta[Self::SIGMA])])
    }

    fn lamperti_inverse<S: Scalar>(
        &self,
        y: &[S],
        theta: &[f64],
        _b: &[S],
    ) -> Result<Vec<S>, DomainError> {
        positive("transformed state", y[0].value())?;
        let h = y[0] * (theta[Self::SIGMA] * 0.5);
        Ok(vec![h * h])
    }

    fn drift_y<S: Scalar>(&self, y: &[S], theta: &[f64], b: &[S]) -> Result<Vec<S>, DomainError> {
        let (p1, p3) = Self::totals(theta, b)?;
        let y = y[0];
        positive("transformed state", y.value())?;
        let s2 = theta[Self::SIGMA].powi(2);
        Ok(vec![
            y * (p1 - y * y * (s2 * 0.25)) / (p1 * p3 * 2.0) - y.recip() * 0.5,
        ])
    }

    fn log_det_v<S: Scalar>(&self, x: &[S], theta: &[f64], _b: &[S]) -> Result<S, DomainError> {
        Ok(x[0].try_ln()? + theta[Self::SIGMA].powi(2).ln())
    }
}

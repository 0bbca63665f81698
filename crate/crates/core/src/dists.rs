//! Random-effect distributions, their log-densities, samplers and moments.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{DomainError, Error, Result};
use crate::scalar::Scalar;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectDistribution {
    /// Zero-mean normal.
    Normal { sd: f64 },
    /// Gamma with shape `nu` and scale `1/nu`, so mean 1 and SD `1/sqrt(nu)`.
    Gamma { shape: f64 },
    /// `exp(N(mu, sigma^2))`.
    LogNormal { mu: f64, sigma: f64 },
    /// `Beta(p, p)` affinely mapped onto `[lower, upper]`.
    SymmetricBeta { p: f64, lower: f64, upper: f64 },
}

/// Reparameterization used by the inner optimizer: `b = map(z)` with `z` unconstrained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerScale {
    Identity,
    Log,
    Logit { lower: f64, upper: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl EffectDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            EffectDistribution::Normal { sd } => sd > 0.0 && sd.is_finite(),
            EffectDistribution::Gamma { shape } => shape > 0.0 && shape.is_finite(),
            EffectDistribution::LogNormal { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            EffectDistribution::SymmetricBeta { p, lower, upper } => {
                p > 0.0 && p.is_finite() && lower < upper && lower.is_finite() && upper.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid effect distribution {self:?}")))
        }
    }

    pub fn in_support(&self, z: f64) -> bool {
        match *self {
            EffectDistribution::Normal { .. } => z.is_finite(),
            EffectDistribution::Gamma { .. } | EffectDistribution::LogNormal { .. } => {
                z > 0.0 && z.is_finite()
            }
            EffectDistribution::SymmetricBeta { lower, upper, .. } => z > lower && z < upper,
        }
    }

    /// Log-density; `-inf` outside the support.
    pub fn log_pdf(&self, z: f64) -> f64 {
        self.log_pdf_s(z).unwrap_or(f64::NEG_INFINITY)
    }

    /// Log-density over any scalar; a domain error outside the support.
    pub fn log_pdf_s<S: Scalar>(&self, z: S) -> Result<S, DomainError> {
        let v = z.value();
        if !self.in_support(v) {
            return Err(DomainError::new(
                format!("effect outside the support of {self:?}"),
                v,
            ));
        }
        Ok(match *self {
            EffectDistribution::Normal { sd } => {
                (z / sd).square() * -0.5 - (sd.ln() + LN_SQRT_2PI)
            }
            EffectDistribution::Gamma { shape } => {
                // shape nu, rate nu
                z.ln() * (shape - 1.0) - z * shape + (shape * shape.ln() - ln_gamma(shape))
            }
            EffectDistribution::LogNormal { mu, sigma } => {
                let lz = z.ln();
                ((lz - mu) / sigma).square() * -0.5 - lz - (sigma.ln() + LN_SQRT_2PI)
            }
            EffectDistribution::SymmetricBeta { p, lower, upper } => {
                ((z - lower).ln() + (-z + upper).ln()) * (p - 1.0)
                    - (ln_beta(p, p) + (2.0 * p - 1.0) * (upper - lower).ln())
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EffectDistribution::Normal { sd } => Normal::new(0.0, sd).unwrap().sample(rng),
            EffectDistribution::Gamma { shape } => Gamma::new(shape, 1.0 / shape).unwrap().sample(rng),
            EffectDistribution::LogNormal { mu, sigma } => {
                LogNormal::new(mu, sigma).unwrap().sample(rng)
            }
            EffectDistribution::SymmetricBeta { p, lower, upper } => {
                let u: f64 = Beta::new(p, p).unwrap().sample(rng);
                lower + (upper - lower) * u
            }
        }
    }

    pub fn moments(&self) -> Moments {
        match *self {
            EffectDistribution::Normal { sd } => Moments {
                mean: 0.0,
                variance: sd * sd,
            },
            EffectDistribution::Gamma { shape } => Moments {
                mean: 1.0,
                variance: 1.0 / shape,
            },
            EffectDistribution::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                Moments {
                    mean: (mu + s2 / 2.0).exp(),
                    variance: s2.exp_m1() * (2.0 * mu + s2).exp(),
                }
            }
            EffectDistribution::SymmetricBeta { p, lower, upper } => Moments {
                mean: (lower + upper) / 2.0,
                variance: (upper - lower).powi(2) / (4.0 * (2.0 * p + 1.0)),
            },
        }
    }

    pub fn inner_scale(&self) -> InnerScale {
        match *self {
            EffectDistribution::Normal { .. } | EffectDistribution::Gamma { .. } => {
                InnerScale::Identity
            }
            EffectDistribution::LogNormal { .. } => InnerScale::Log,
            EffectDistribution::SymmetricBeta { lower, upper, .. } => {
                InnerScale::Logit { lower, upper }
            }
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus<S: Scalar>(x: S) -> S {
    if x.value() > 0.0 {
        x + ((-x).exp() + 1.0).ln()
    } else {
        (x.exp() + 1.0).ln()
    }
}

impl InnerScale {
    /// Natural-scale value and `ln |db/dz|`.
    pub fn to_natural<S: Scalar>(&self, z: S) -> (S, S) {
        match *self {
            InnerScale::Identity => (z, S::cst(0.0)),
            InnerScale::Log => (z.exp(), z),
            InnerScale::Logit { lower, upper } => {
                let w = upper - lower;
                // ln sigmoid(z) = -softplus(-z), ln(1 - sigmoid(z)) = -softplus(z)
                let sp_neg = softplus(-z);
                let sp_pos = softplus(z);
                let sig = (-sp_neg).exp();
                (sig * w + lower, -(sp_neg + sp_pos) + w.ln())
            }
        }
    }

    pub fn from_natural(&self, b: f64) -> f64 {
        match *self {
            InnerScale::Identity => b,
            InnerScale::Log => b.ln(),
            InnerScale::Logit { lower, upper } => {
                let u = (b - lower) / (upper - lower);
                (u / (1.0 - u)).ln()
            }
        }
    }
}

/// Independent components, one per random effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectPrior {
    pub components: Vec<EffectDistribution>,
}

impl EffectPrior {
    pub fn new(components: Vec<EffectDistribution>) -> Result<Self> {
        components.iter().try_for_each(EffectDistribution::validate)?;
        Ok(Self { components })
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn log_pdf(&self, b: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(b)
            .map(|(d, &z)| d.log_pdf(z))
            .sum()
    }

    pub fn log_pdf_s<S: Scalar>(&self, b: &[S]) -> Result<S, DomainError> {
        let mut acc = S::cst(0.0);
        for (d, &z) in self.components.iter().zip(b) {
            acc += d.log_pdf_s(z)?;
        }
        Ok(acc)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.components.iter().map(|d| d.sample(rng)).collect()
    }

    /// Analytic mean and variance of every component.
    pub fn derived_moments(&self) -> Vec<Moments> {
        self.components.iter().map(EffectDistribution::moments).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.derived_moments().iter().map(|m| m.mean).collect()
    }

    pub fn scales(&self) -> Vec<InnerScale> {
        self.components.iter().map(EffectDistribution::inner_scale).collect()
    }
}

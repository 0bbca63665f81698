//! Acceptance criteria computed against independent oracles.
//!
//! Each function returns whether the criterion holds and a one-line detail.

use std::path::PathBuf;

use rand::Rng;

use sdmem::density::{cir_coeffs, growth_coeffs, lyapunov, ou2d_coeffs, Cfe, CoeffSet};
use sdmem::dists::EffectPrior;
use sdmem::dual::{hessian_of, Dual2};
use sdmem::estimate::{laplace_unit, InnerOptions, LaplaceObjective};
use sdmem::harness::coeff_check::coeff_check;
use sdmem::harness::config::ExperimentConfig;
use sdmem::harness::mc::{run_mc, McResult};
use sdmem::Scalar;
use sdmem::model::{make_cir_model, make_growth_model, make_ou2d_model, ModelId, PopulationDataset, Reducible};

use super::props::{self, quadratic_objective, random_quadratic};
use super::*;

pub type Verdict = (bool, String);

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).unwrap()
}

/// `ln N(x | b, 1) + ln N(b | 0, 1)` summed over independent components.
fn gaussian_convolution(x: &[f64]) -> impl Fn(&[Dual2]) -> sdmem::Result<Dual2> + '_ {
    move |b: &[Dual2]| {
        let mut acc = Dual2::constant(0.0);
        for (k, &xk) in x.iter().enumerate() {
            let r = b[k] * -1.0 + xk;
            acc += r.square() * -0.5 + b[k].square() * -0.5 - (2.0 * std::f64::consts::PI).ln();
        }
        Ok(acc)
    }
}

/// Laplace exactness on the Gaussian family: `q = 1` at `x = 0.7`, `q = 2`
/// replicates, and 100 random concave quadratics of dimension 1 to 4.
pub fn laplace_exactness() -> Verdict {
    let opts = InnerOptions::default();
    let mut worst = 0.0f64;
    for x in [vec![0.7], vec![0.7, -1.3]] {
        let (_, value) = laplace_unit(gaussian_convolution(&x), &vec![0.0; x.len()], None, &opts).unwrap();
        let exact: f64 = x.iter().map(|&xk| ln_normal(xk, 0.0, 2.0)).sum();
        worst = worst.max((value - exact).abs());
    }
    let mut r = rng(2024);
    for k in 0..100 {
        let q = 1 + k % 4;
        let (p, m, c, exact) = random_quadratic(&mut r, q);
        let start: Vec<f64> = (0..q).map(|_| uniform(&mut r, -5.0, 5.0)).collect();
        let (_, value) = laplace_unit(quadratic_objective(&p, &m, c), &start, None, &opts).unwrap();
        worst = worst.max((value - exact).abs());
    }
    (worst < 1e-12, format!("max |laplace - closed form| = {worst:.2e} over 102 objectives (tol 1e-12)"))
}

/// Standard deviation of each effect on the optimizer's scale, from prior draws.
fn internal_scales(prior: &EffectPrior, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let scales = prior.scales();
    let draws: Vec<Vec<f64>> = (0..4000)
        .map(|_| prior.sample(&mut r).iter().zip(&scales).map(|(&b, s)| s.from_natural(b)).collect())
        .collect();
    (0..scales.len())
        .map(|k| {
            let n = draws.len() as f64;
            let mean = draws.iter().map(|d| d[k]).sum::<f64>() / n;
            (draws.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Worst relative AD/FD discrepancy of one model's per-unit objective at
/// 20 random points, measured in prior-standardized coordinates.
fn ad_vs_fd<M: Reducible, C: CoeffSet>(
    model: &M,
    coeffs: &C,
    data: &PopulationDataset,
    theta0: &[f64],
    psi: &[f64],
    seed: u64,
) -> (f64, f64) {
    let density = Cfe::new(model, coeffs, 2).unwrap();
    let prior = model.prior(psi).unwrap();
    let s = internal_scales(&prior, seed);
    let mut r = rng(seed);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let mut accepted = 0;
    while accepted < 20 {
        let theta: Vec<f64> = theta0.iter().map(|v| v * (1.0 + uniform(&mut r, -0.1, 0.1))).collect();
        let unit = &data.units[r.random_range(0..data.m())];
        let obj = LaplaceObjective::new(model, &density, unit, &theta, &prior);
        let b = prior.sample(&mut r);
        let z = obj.internal(&b);
        // objective in standardized coordinates w, z = z0 + s * w
        let f = |w: &[f64]| -> f64 {
            let zz: Vec<f64> = z.iter().zip(&s).zip(w).map(|((z, s), w)| z + s * w).collect();
            obj.eval::<f64>(&zz).unwrap_or(f64::NAN)
        };
        let Ok((_, g, h)) = hessian_of(|v: &[Dual2]| obj.eval(v), &z) else {
            continue;
        };
        let w0 = vec![0.0; z.len()];
        let q = z.len();
        let gs: Vec<f64> = g.iter().zip(&s).map(|(g, s)| g * s).collect();
        let hs: Vec<f64> = (0..q * q).map(|k| h[k] * s[k / q] * s[k % q]).collect();
        let g_fd = fd_grad(&f, &w0, &vec![1e-5; q]);
        let h_fd = fd_hess(&f, &w0, &vec![1e-4; q]);
        if g_fd.iter().chain(&h_fd).any(|v| !v.is_finite()) {
            continue;
        }
        worst_g = worst_g.max(rel_err(&gs, &g_fd));
        worst_h = worst_h.max(rel_err(&hs, &h_fd));
        accepted += 1;
    }
    (worst_g, worst_h)
}

/// Dual2 gradients and Hessians of the three per-unit objectives against central differences.
pub fn ad_correctness() -> Verdict {
    let (gd, _) = growth_data(10, 20, 101);
    let (od, _) = ou_data(7, 20, 102);
    let (cd, _) = cir_data(10, 20, 103);
    let results = [
        ("growth", ad_vs_fd(&make_growth_model(), &growth_coeffs(), &gd, &GROWTH_THETA, &GROWTH_PSI, 1)),
        ("ou2d", ad_vs_fd(&make_ou2d_model(), &ou2d_coeffs(), &od, &OU_THETA, &OU_PSI, 2)),
        ("cir", ad_vs_fd(&make_cir_model(), &cir_coeffs(), &cd, &CIR_THETA, &CIR_PSI, 3)),
    ];
    let pass = results.iter().all(|(_, (g, h))| *g < 1e-5 && *h < 1e-5);
    let detail = results
        .iter()
        .map(|(m, (g, h))| format!("{m} grad {g:.1e} hess {h:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    (pass, format!("{detail} (tol 1e-5, 20 points each)"))
}

/// Generic expansion engine against the hand-coded coefficient sets.
pub fn coefficient_agreement() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for id in [ModelId::Growth, ModelId::Ou2d, ModelId::Cir] {
        let r = coeff_check(id, 20, 1, 0.0).unwrap();
        pass &= r.pass;
        let worst = r.max_rel.iter().fold(0.0f64, |m, v| m.max(*v));
        parts.push(format!("{id} {worst:.1e}"));
    }
    (pass, format!("max relative deviation {} (tol 1e-8, 20 points each)", parts.join(", ")))
}

/// CFE(2) against the exact OU density at `delta = 1/19`.
pub fn exact_ou_oracle() -> Verdict {
    let (max_err, frac) = props::cfe_vs_exact_ou(100, 1.0 / 19.0, 5);
    (
        max_err < 1e-3 && frac >= 0.95,
        format!(
            "max |cfe2 - exact| = {max_err:.2e} (tol 1e-3), cfe2 closer than eum on {:.0}% of 100 pairs (need 95%)",
            100.0 * frac
        ),
    )
}

/// Residual of the Lyapunov equation for random positive-definite drift matrices.
pub fn lyapunov_residual() -> Verdict {
    let mut r = rng(55);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 100 {
        let beta: Vec<f64> = (0..4).map(|_| uniform(&mut r, -1.0, 4.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| uniform(&mut r, 0.5, 1.5)).collect();
        let a = [[beta[0] * b[0], beta[1] * b[1]], [beta[2] * b[2], beta[3] * b[3]]];
        // positive definite: the symmetric part has positive eigenvalues
        let off = 0.5 * (a[0][1] + a[1][0]);
        if !(a[0][0] > 0.0 && a[1][1] > 0.0 && a[0][0] * a[1][1] > off * off) {
            continue;
        }
        let sigma = [uniform(&mut r, 0.1, 1.0), uniform(&mut r, 0.1, 1.0)];
        let theta = [1.0, 1.5, beta[0], beta[1], beta[2], beta[3], sigma[0], sigma[1]];
        let lam = lyapunov(&theta, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for k in 0..2 {
                    v += a[i][k] * lam[k][j] + lam[i][k] * a[j][k];
                }
                if i == j {
                    v -= sigma[i] * sigma[i];
                }
                worst = worst.max(v.abs());
            }
        }
        n += 1;
    }
    (worst < 1e-12, format!("max residual {worst:.2e} over 100 matrices (tol 1e-12)"))
}

fn mean_of(result: &McResult, method: &str, column: &str) -> f64 {
    result.summary(method).and_then(|s| s.column(column)).map(|c| c.mean).unwrap_or(f64::NAN)
}

fn counts(result: &McResult, method: &str) -> String {
    match result.summary(method) {
        Some(s) => format!("{method}: n={} failed={} budget={}", s.n, s.failures, s.non_converged),
        None => format!("{method}: missing"),
    }
}

/// Growth model, M = 30, n + 1 = 20, R = 50.
pub fn growth_table_n20() -> Verdict {
    let mut cfg = load_config("growth_m30_n20.json");
    cfg.estimation.methods = vec!["cfe2".into()];
    let res = run_mc(&cfg, cfg.replications).unwrap();
    let phi1 = mean_of(&res, "cfe2", "phi1");
    let sigma = mean_of(&res, "cfe2", "sigma");
    (
        (183.0..=209.0).contains(&phi1) && (0.075..=0.085).contains(&sigma),
        format!(
            "mean phi1 {phi1:.2} (need [183, 209]), mean sigma {sigma:.4} (need [0.075, 0.085]); {}",
            counts(&res, "cfe2")
        ),
    )
}

/// Growth model, M = 30, n + 1 = 7, R = 50: bias ordering of phi3.
pub fn growth_bias_ordering() -> Verdict {
    let cfg = load_config("growth_m30_n7.json");
    let res = run_mc(&cfg, cfg.replications).unwrap();
    let cfe = mean_of(&res, "cfe2", "phi3");
    let eum = mean_of(&res, "eum", "phi3");
    (
        eum < cfe && (cfe - 350.0).abs() < (eum - 350.0).abs(),
        format!(
            "mean phi3 cfe2 {cfe:.2}, eum {eum:.2} (truth 350); {}; {}",
            counts(&res, "cfe2"),
            counts(&res, "eum")
        ),
    )
}

/// Pooled random-effect estimates of the OU study and their per-effect means and SDs.
pub fn ou_effects(res: &McResult) -> (Vec<f64>, Vec<f64>, usize) {
    let pooled: Vec<&Vec<f64>> = res
        .replications
        .iter()
        .flat_map(|rep| rep.fits.iter())
        .filter_map(|f| f.report.as_ref())
        .flat_map(|r| r.effects.iter())
        .collect();
    let n = pooled.len() as f64;
    let means: Vec<f64> = (0..4).map(|k| pooled.iter().map(|b| b[k]).sum::<f64>() / n).collect();
    let sds: Vec<f64> = (0..4)
        .map(|k| (pooled.iter().map(|b| (b[k] - means[k]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    (means, sds, pooled.len())
}

/// OU model, M = 7, n + 1 = 20 per coordinate, R = 30: pooled effect means.
pub fn ou_effect_recovery() -> (Verdict, McResult) {
    let cfg = load_config("ou2d_m7.json");
    let res = run_mc(&cfg, cfg.replications).unwrap();
    let (means, sds, n) = ou_effects(&res);
    let pass = n > 0 && means.iter().all(|m| (0.95..=1.05).contains(m));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    (
        (
            pass,
            format!(
                "pooled means ({}) (need [0.95, 1.05]), SDs ({}) from {n} unit estimates; {}",
                fmt(&means),
                fmt(&sds),
                counts(&res, "cfe2")
            ),
        ),
        res,
    )
}

/// CIR model, M = 10, n + 1 = 20, R = 30: determined sigma.
pub fn cir_determined_sigma() -> Verdict {
    let cfg = load_config("cir_m10_n20.json");
    let res = run_mc(&cfg, cfg.replications).unwrap();
    let sigma = mean_of(&res, "cfe2", "sigma*");
    (
        (0.88..=1.48).contains(&sigma),
        format!("mean determined sigma {sigma:.4} (need [0.88, 1.48]); {}", counts(&res, "cfe2")),
    )
}

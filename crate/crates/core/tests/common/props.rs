//! Property checks shared by `properties.rs` and the acceptance suite.
//!
//! Each check returns `Err` with a description of the first violation.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sdmem::density::{
    c_minus1, cfe_log_density, cir_coeffs, euler_log_density, exact_ou_log_density,
    exact_ou_moments, growth_coeffs, ou2d_coeffs, CoeffSet, Cfe, MAX_ORDER,
};
use sdmem::dists::EffectDistribution;
use sdmem::dual::{hessian_of, lift, Dual1, Dual2};
use sdmem::estimate::nelder_mead::{minimize, NelderMeadOptions};
use sdmem::estimate::{laplace_unit, marginal_loglik, InnerOptions};
use sdmem::expansion::{GenericCoeffs, QuadratureRule};
use sdmem::harness::config::{ExperimentConfig, ORANGE_TIMES};
use sdmem::harness::io::{read_dataset, read_effects, write_dataset, write_effects};
use sdmem::harness::mc::run_mc;
use sdmem::harness::summary::summarize_column;
use sdmem::linalg::{cholesky, expm2, inverse};
use sdmem::model::{
    make_cir_model, make_growth_model, make_ou2d_model, ModelId, Ou2dModel, PopulationDataset,
    Reducible, SdeModel, UnitSeries,
};
use sdmem::scalar::{lift_consts, Scalar};
use sdmem::sim::{simulate_path, Scheme};

use super::*;

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Check {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// A random `(theta, b, x, x0)` where the model is admissible.
pub fn admissible(id: ModelId, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    loop {
        let mut u = |lo: f64, hi: f64| uniform(rng, lo, hi);
        let (theta, b, x, x0) = match id {
            ModelId::Growth => (
                vec![u(150.0, 250.0), u(250.0, 450.0), u(0.04, 0.12)],
                vec![u(-50.0, 50.0), u(-100.0, 100.0)],
                vec![u(30.0, 250.0)],
                vec![u(30.0, 250.0)],
            ),
            ModelId::Ou2d => (
                vec![
                    u(0.5, 2.0),
                    u(0.5, 2.0),
                    u(2.0, 4.0),
                    u(0.5, 2.5),
                    u(0.5, 2.0),
                    u(2.0, 4.0),
                    u(0.2, 0.6),
                    u(0.2, 0.6),
                ],
                (0..4).map(|_| u(0.8, 1.2)).collect(),
                vec![u(0.0, 4.0), u(0.0, 4.0)],
                vec![u(0.0, 4.0), u(0.0, 4.0)],
            ),
            ModelId::Cir => (
                vec![u(1.0, 4.0)],
                vec![u(0.1, 5.0), u(0.5, 2.0), u(0.5, 1.5)],
                vec![u(0.3, 8.0)],
                vec![u(0.3, 8.0)],
            ),
        };
        let ok = match id {
            ModelId::Growth => make_growth_model().constraint_ok(&theta, &b),
            ModelId::Ou2d => make_ou2d_model().constraint_ok(&theta, &b),
            ModelId::Cir => make_cir_model().constraint_ok(&theta, &b),
        };
        if ok {
            return (theta, b, x, x0);
        }
    }
}

fn lamperti_checks<M: Reducible>(model: &M, id: ModelId, seed: u64) -> Check {
    let mut rng = rng(seed);
    for _ in 0..100 {
        let (theta, b, x, _) = admissible(id, &mut rng);
        let y = model.lamperti(&x, &theta, &b).map_err(|e| e.to_string())?;
        let back = model.lamperti_inverse(&y, &theta, &b).map_err(|e| e.to_string())?;
        for (a, c) in x.iter().zip(&back) {
            ensure((a - c).abs() <= 1e-12 * a.abs().max(1e-300), || {
                format!("{id}: round trip {x:?} -> {back:?}")
            })?;
        }
        // numeric Jacobian of gamma against the inverse diffusion
        let d = x.len();
        let mut jac = vec![0.0; d * d];
        for k in 0..d {
            let h = 1e-5 * x[k].abs().max(1e-2);
            let mut p = x.clone();
            let mut m = x.clone();
            p[k] += h;
            m[k] -= h;
            let yp = model.lamperti(&p, &theta, &b).unwrap();
            let ym = model.lamperti(&m, &theta, &b).unwrap();
            for i in 0..d {
                jac[i * d + k] = (yp[i] - ym[i]) / (2.0 * h);
            }
        }
        let sig = model.diffusion(&x, &theta, &b).map_err(|e| e.to_string())?;
        let inv = inverse(&sig, d).map_err(|e| e.to_string())?;
        let err = rel_err(&inv, &jac);
        ensure(err < 1e-6, || format!("{id}: gamma' vs sigma^-1 relative error {err:e} at {x:?}"))?;
        // purity
        let (d1, d2) = (model.drift(&x, &theta, &b), model.drift(&x, &theta, &b));
        let (s1, s2) = (model.diffusion(&x, &theta, &b), model.diffusion(&x, &theta, &b));
        let bits = |v: Vec<f64>| v.iter().map(|z| z.to_bits()).collect::<Vec<_>>();
        ensure(
            bits(d1.unwrap()) == bits(d2.unwrap()) && bits(s1.unwrap()) == bits(s2.unwrap()),
            || format!("{id}: callbacks not pure"),
        )?;
    }
    Ok(())
}

/// Lamperti round trip, `gamma' = sigma^-1` and callback purity for every model.
pub fn model_core() -> Check {
    lamperti_checks(&make_growth_model(), ModelId::Growth, 11)?;
    lamperti_checks(&make_ou2d_model(), ModelId::Ou2d, 12)?;
    lamperti_checks(&make_cir_model(), ModelId::Cir, 13)
}

/// Distributions used by the built-in models at and around their true values.
pub fn test_distributions() -> Vec<EffectDistribution> {
    vec![
        EffectDistribution::Normal { sd: 25.0 },
        EffectDistribution::Normal { sd: 52.5 },
        EffectDistribution::Gamma { shape: 45.0 },
        EffectDistribution::Gamma { shape: 100.0 },
        EffectDistribution::Gamma { shape: 25.0 },
        EffectDistribution::Gamma { shape: 3.0 },
        EffectDistribution::LogNormal { mu: 0.0, sigma: 0.25 },
        EffectDistribution::LogNormal { mu: 0.1, sigma: 0.3 },
        EffectDistribution::SymmetricBeta { p: 5.0, lower: 0.1, upper: 5.0 },
        EffectDistribution::SymmetricBeta { p: 2.0, lower: -1.0, upper: 1.0 },
        EffectDistribution::SymmetricBeta { p: 1.0, lower: 0.0, upper: 2.0 },
    ]
}

/// Integration range covering all but a negligible tail.
fn support_range(d: &EffectDistribution) -> (f64, f64) {
    match *d {
        EffectDistribution::Normal { sd } => (-15.0 * sd, 15.0 * sd),
        EffectDistribution::Gamma { shape } => (0.0, 1.0 + 40.0 / shape.sqrt()),
        EffectDistribution::LogNormal { mu, sigma } => (0.0, (mu + 15.0 * sigma).exp()),
        EffectDistribution::SymmetricBeta { lower, upper, .. } => {
            // the density is defined on the open interval
            let eps = 1e-13 * (upper - lower);
            (lower + eps, upper - eps)
        }
    }
}

fn pdf(d: &EffectDistribution, z: f64) -> f64 {
    d.log_pdf(z).exp()
}

/// Cumulative distribution on a fine grid by trapezoidal integration of the pdf.
fn cdf_table(d: &EffectDistribution, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = support_range(d);
    let h = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
    let mut cdf = vec![0.0; n + 1];
    let mut prev = pdf(d, xs[0]);
    for i in 1..=n {
        let cur = pdf(d, xs[i]);
        cdf[i] = cdf[i - 1] + 0.5 * h * (prev + cur);
        prev = cur;
    }
    (xs, cdf)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return 0.0;
    }
    if x >= xs[xs.len() - 1] {
        return 1.0;
    }
    let h = xs[1] - xs[0];
    let k = ((x - xs[0]) / h).floor() as usize;
    let k = k.min(xs.len() - 2);
    let w = (x - xs[k]) / h;
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// Normalization, KS agreement of draws with the pdf, and sample moments.
pub fn dists() -> Check {
    for (k, d) in test_distributions().iter().enumerate() {
        let (a, b) = support_range(d);
        let total = simpson(|z| pdf(d, z), a, b, 200_000);
        ensure((total - 1.0).abs() < 1e-6, || format!("{d:?} integrates to {total}"))?;

        let mut r = rng(100 + k as u64);
        let n = 10_000;
        let mut draws: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
        draws.sort_by(f64::total_cmp);
        let (xs, cdf) = cdf_table(d, 400_000);
        let mut ks = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let f = interp(&xs, &cdf, x);
            ks = ks.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
        }
        // 1% critical value of the one-sample KS statistic
        let crit = 1.628 / (n as f64).sqrt();
        ensure(ks < crit, || format!("{d:?}: KS statistic {ks:.4} >= {crit:.4}"))?;

        let n = 1_000_000;
        let big: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
        let mean = big.iter().sum::<f64>() / n as f64;
        let var = big.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m4 = big.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let m = d.moments();
        let se_mean = (var / n as f64).sqrt();
        let se_var = ((m4 - var * var) / n as f64).sqrt();
        ensure((mean - m.mean).abs() < 3.0 * se_mean, || {
            format!("{d:?}: sample mean {mean} vs {}", m.mean)
        })?;
        ensure((var - m.variance).abs() < 3.0 * se_var, || {
            format!("{d:?}: sample variance {var} vs {}", m.variance)
        })?;
    }
    Ok(())
}

/// Random smooth expression in three variables.
#[derive(Clone, Debug)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// `a / (1.5 + b^2)`
    Div(Box<Expr>, Box<Expr>),
    /// `exp(sin a)`
    Exp(Box<Expr>),
    /// `ln(2 + cos a)`
    Ln(Box<Expr>),
    /// `sqrt(1 + a^2)`
    Sqrt(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    /// `(sin a)^n`
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn random(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
        if depth == 0 || rng.random_bool(0.2) {
            return if rng.random_bool(0.75) {
                Expr::Var(rng.random_range(0..3))
            } else {
                Expr::Const(uniform(rng, -2.0, 2.0))
            };
        }
        let mut sub = || Box::new(Expr::random(rng, depth - 1));
        let (a, b) = (sub(), sub());
        match rng.random_range(0..11) {
            0 => Expr::Add(a, b),
            1 => Expr::Sub(a, b),
            2 | 3 => Expr::Mul(a, b),
            4 => Expr::Div(a, b),
            5 => Expr::Exp(a),
            6 => Expr::Ln(a),
            7 => Expr::Sqrt(a),
            8 => Expr::Sin(a),
            9 => Expr::Cos(a),
            _ => Expr::Pow(a, rng.random_range(2..5)),
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Expr::Var(i) => x[*i],
            Expr::Const(c) => S::cst(*c),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / (b.eval(x).square() + 1.5),
            Expr::Exp(a) => a.eval(x).sin().exp(),
            Expr::Ln(a) => (a.eval(x).cos() + 2.0).ln(),
            Expr::Sqrt(a) => (a.eval(x).square() + 1.0).sqrt(),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Pow(a, n) => a.eval(x).sin().powi(*n),
        }
    }
}

type D1 = Dual1<f64, 3>;
type DD = Dual1<D1, 3>;

fn nested_hessian(e: &Expr, x: &[f64]) -> Vec<f64> {
    let vars: Vec<DD> = (0..3)
        .map(|i| {
            let mut g = [D1::constant(0.0); 3];
            g[i] = D1::constant(1.0);
            DD {
                v: D1::variable(x[i], i),
                g,
            }
        })
        .collect();
    let out = e.eval(&vars);
    let mut h = vec![0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            h[i * 3 + j] = out.g[i].g[j];
        }
    }
    h
}

/// Dual2 against finite differences, Hessian symmetry, and nested Dual1 agreement
/// on 50 random composite expressions.
pub fn dual_ad() -> Check {
    run_cases(50, any::<u64>(), |seed| {
        let mut r = rng(seed);
        let e = Expr::random(&mut r, 4);
        let x: Vec<f64> = (0..3).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let (value, grad, h) = hessian_of::<_, ()>(|b| Ok(e.eval(b)), &x).unwrap();
        let f = |p: &[f64]| e.eval(p);
        let g_fd = fd_grad(&f, &x, &[1e-5; 3]);
        let h_fd = fd_hess(&f, &x, &[1e-4; 3]);
        prop_assert!(rel_err(&grad, &g_fd) < 1e-5, "gradient {:?} vs {:?} for {:?}", grad, g_fd, e);
        prop_assert!(rel_err(&h, &h_fd) < 1e-5, "hessian {:?} vs {:?} for {:?}", h, h_fd, e);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(h[i * 3 + j].to_bits(), h[j * 3 + i].to_bits());
            }
        }
        let hn = nested_hessian(&e, &x);
        prop_assert!(rel_err(&h, &hn) < 1e-12, "nested {:?} vs dual2 {:?}", hn, h);
        prop_assert_eq!(value.to_bits(), e.eval(&x).to_bits());
        Ok(())
    })
}

/// Identical seeds give identical datasets; the truth file round trip is exact.
pub fn sim_reproducible() -> Check {
    let (a, ea) = growth_data(5, 7, 9);
    let (b, eb) = growth_data(5, 7, 9);
    ensure(a == b && ea == eb, || "growth datasets differ for one seed".into())?;
    let (c, _) = growth_data(5, 7, 10);
    ensure(a != c, || "different seeds gave the same dataset".into())?;
    let (o1, _) = ou_data(4, 20, 3);
    let (o2, _) = ou_data(4, 20, 3);
    ensure(o1 == o2, || "ou datasets differ for one seed".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("truth.csv");
    let (_, effects) = cir_data(6, 20, 4);
    let names = make_cir_model().layout().effects.clone();
    write_effects(&path, &names, &effects).map_err(|e| e.to_string())?;
    let back = read_effects(&path).map_err(|e| e.to_string())?;
    let bits = |v: &Vec<Vec<f64>>| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(&back) == bits(&effects), || "truth file round trip is not exact".into())
}

/// Empirical lag-`delta` cross-covariance of stationary OU paths against `exp(-A delta) lambda`.
pub fn ou_autocovariance() -> Check {
    let model = make_ou2d_model();
    let theta = OU_THETA.to_vec();
    let b = vec![1.0; 4];
    let lam = sdmem::density::lyapunov(&theta, &b).map_err(|e| e.to_string())?;
    let l = cholesky(&[lam[0][0], lam[0][1], lam[1][0], lam[1][1]], 2).map_err(|e| e.to_string())?;
    let alpha = Ou2dModel::alpha(&theta);
    let delta = 0.25;
    let n = 20_000;
    let mut r = rng(77);
    let mut start = Vec::with_capacity(n);
    let mut end = Vec::with_capacity(n);
    for _ in 0..n {
        let (u1, u2): (f64, f64) = (r.sample(rand_distr::StandardNormal), r.sample(rand_distr::StandardNormal));
        let x0 = vec![alpha[0] + l[0] * u1, alpha[1] + l[2] * u1 + l[3] * u2];
        let path = simulate_path(&model, &theta, &b, &x0, 0.0, delta, 1e-3, Scheme::EulerMaruyama, &mut r)
            .map_err(|e| e.to_string())?;
        end.push(path.states.last().unwrap().clone());
        start.push(x0);
    }
    let a = Ou2dModel::drift_matrix(&theta, &b);
    let e = expm2(&[[-a[0][0] * delta, -a[0][1] * delta], [-a[1][0] * delta, -a[1][1] * delta]]);
    let mean = |v: &[Vec<f64>], i: usize| v.iter().map(|x| x[i]).sum::<f64>() / n as f64;
    for i in 0..2 {
        for j in 0..2 {
            let expected = e[i][0] * lam[0][j] + e[i][1] * lam[1][j];
            let (mi, mj) = (mean(&end, i), mean(&start, j));
            let prods: Vec<f64> = end.iter().zip(&start).map(|(x, y)| (x[i] - mi) * (y[j] - mj)).collect();
            let c = prods.iter().sum::<f64>() / n as f64;
            let sd = (prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / n as f64).sqrt();
            let se = sd / (n as f64).sqrt();
            ensure((c - expected).abs() < 4.0 * se, || {
                format!("lag covariance ({i},{j}) = {c:.5}, expected {expected:.5} (se {se:.1e})")
            })?;
        }
    }
    Ok(())
}

fn cfe_dual_checks<M: Reducible, C: CoeffSet>(model: &M, coeffs: &C, id: ModelId, seed: u64) -> Check {
    let mut r = rng(seed);
    for _ in 0..1000 {
        let (theta, b, x, x0) = admissible(id, &mut r);
        let delta = match id {
            ModelId::Growth => uniform(&mut r, 10.0, 250.0),
            _ => uniform(&mut r, 0.01, 0.5),
        };
        let plain = cfe_log_density(model, coeffs, &x, &x0, delta, &theta, &b, 2).map_err(|e| e.to_string())?;
        let dual: Dual2 = cfe_log_density(model, coeffs, &lift_consts(&x), &lift_consts(&x0), delta, &theta, &lift(&b), 2)
            .map_err(|e| e.to_string())?;
        ensure((dual.value() - plain).abs() <= 1e-14 * plain.abs().max(1.0), || {
            format!("{id}: Dual2 value {} vs plain {plain}", dual.value())
        })?;
    }
    Ok(())
}

/// `int exp(cfe2(x | x0)) dx` for the growth model at each gap in `gaps` and
/// three starting states.
pub fn growth_normalization(gaps: &[f64]) -> Vec<(String, f64)> {
    let growth = make_growth_model();
    let gc = growth_coeffs();
    let mut out = Vec::new();
    for &delta in gaps {
        for (x0, b) in [(30.0, [0.0, 0.0]), (100.0, [20.0, -40.0]), (180.0, [-15.0, 30.0])] {
            let f = |x: f64| {
                cfe_log_density(&growth, &gc, &[x], &[x0], delta, &GROWTH_THETA, &b, 2)
                    .map(f64::exp)
                    .unwrap_or(0.0)
            };
            let total = simpson(f, 1e-6, 2000.0, 400_000);
            out.push((format!("growth delta={delta:.2} x0={x0}"), total));
        }
    }
    out
}

/// Same for the CIR model at its sampling gap `1/19`.
pub fn cir_normalization() -> Vec<(String, f64)> {
    let cir = make_cir_model();
    let cc = cir_coeffs();
    let mut out = Vec::new();
    for (x0, b) in [(1.0, [2.5, 1.0, 1.1]), (3.0, [1.0, 1.3, 0.9]), (6.0, [4.0, 0.8, 1.2])] {
        let f = |x: f64| {
            cfe_log_density(&cir, &cc, &[x], &[x0], 1.0 / 19.0, &CIR_THETA, &b, 2)
                .map(f64::exp)
                .unwrap_or(0.0)
        };
        let total = simpson(f, 1e-9, 60.0, 400_000);
        out.push((format!("cir delta=1/19 x0={x0}"), total));
    }
    out
}

/// Growth gap of the 20-point designs.
pub const GROWTH_GAP_N20: f64 = (1582.0 - 118.0) / 19.0;

/// Growth gaps of the 7-point designs: equispaced and the orange-tree grid.
pub fn growth_gaps_n7() -> Vec<f64> {
    let mut gaps = vec![(1582.0 - 118.0) / 6.0];
    gaps.extend(ORANGE_TIMES.windows(2).map(|w| w[1] - w[0]));
    gaps
}

fn normalization_check(results: Vec<(String, f64)>) -> Check {
    let bad: Vec<String> = results
        .iter()
        .filter(|(_, t)| (t - 1.0).abs() >= 1e-3)
        .map(|(l, t)| format!("{l}: {t:.6}"))
        .collect();
    ensure(bad.is_empty(), || format!("integral differs from 1 by 1e-3 or more at {}", bad.join("; ")))
}

/// Normalization within `1e-3` at the 20-point growth gap and the CIR gap.
pub fn normalization_n20() -> Check {
    let mut results = growth_normalization(&[GROWTH_GAP_N20]);
    results.extend(cir_normalization());
    normalization_check(results)
}

/// Normalization within `1e-3` at the 7-point growth gaps.
pub fn normalization_n7() -> Check {
    normalization_check(growth_normalization(&growth_gaps_n7()))
}

/// Test states for the exact-OU comparison: `alpha + L u`, `u ~ U[-1, 1]^2`,
/// with `L` the Cholesky factor of the transition covariance at `delta`.
pub fn ou_state_pairs(n: usize, delta: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let theta = OU_THETA;
    let b = [1.0; 4];
    let (_, omega) = exact_ou_moments(&[3.0, 3.0], delta, &theta, &b).unwrap();
    let l = cholesky(&[omega[0][0], omega[0][1], omega[1][0], omega[1][1]], 2).unwrap();
    let alpha = Ou2dModel::alpha(&theta);
    let mut r = rng(seed);
    let state = |r: &mut ChaCha8Rng| {
        let (u1, u2) = (uniform(r, -1.0, 1.0), uniform(r, -1.0, 1.0));
        vec![alpha[0] + l[0] * u1, alpha[1] + l[2] * u1 + l[3] * u2]
    };
    (0..n).map(|_| (state(&mut r), state(&mut r))).collect()
}

/// Largest CFE(2) error against the exact OU log-density and the fraction of
/// pairs on which CFE beats Euler-Maruyama.
pub fn cfe_vs_exact_ou(n: usize, delta: f64, seed: u64) -> (f64, f64) {
    let model = make_ou2d_model();
    let coeffs = ou2d_coeffs();
    let theta = OU_THETA;
    let b = [1.0; 4];
    let mut max_err = 0.0f64;
    let mut wins = 0;
    for (x0, x) in ou_state_pairs(n, delta, seed) {
        let exact: f64 = exact_ou_log_density(&x, &x0, delta, &theta, &b).unwrap();
        let cfe = cfe_log_density(&model, &coeffs, &x, &x0, delta, &theta, &b, 2).unwrap();
        let eum = euler_log_density(&model, &x, &x0, delta, &theta, &b).unwrap();
        let (ec, ee) = ((cfe - exact).abs(), (eum - exact).abs());
        max_err = max_err.max(ec);
        wins += usize::from(ec < ee);
    }
    (max_err, wins as f64 / n as f64)
}

/// Dual2/plain agreement and accuracy against the exact OU density.
pub fn density() -> Check {
    cfe_dual_checks(&make_growth_model(), &growth_coeffs(), ModelId::Growth, 21)?;
    cfe_dual_checks(&make_ou2d_model(), &ou2d_coeffs(), ModelId::Ou2d, 22)?;
    cfe_dual_checks(&make_cir_model(), &cir_coeffs(), ModelId::Cir, 23)?;
    let (max_err, frac) = cfe_vs_exact_ou(100, 1.0 / 19.0, 5);
    ensure(frac >= 0.95, || format!("CFE beats EuM on only {:.0}% of pairs", 100.0 * frac))?;
    ensure(max_err < 1e-3, || format!("CFE error against exact OU {max_err:e}"))
}

fn generic_checks<M: Reducible, C: CoeffSet, const D: usize>(
    model: &M,
    hand: &C,
    id: ModelId,
    seed: u64,
) -> Check {
    let base = GenericCoeffs::<M, D>::new(model);
    let doubled = GenericCoeffs::<M, D>::with_rule(model, QuadratureRule::gauss_legendre(40));
    let mut r = rng(seed);
    for _ in 0..20 {
        let (theta, b, x, x0) = admissible(id, &mut r);
        let y = model.lamperti(&x, &theta, &b).unwrap();
        let y0 = model.lamperti(&x0, &theta, &b).unwrap();
        let g = base.coefficients(&y, &y0, &theta, &b, MAX_ORDER).map_err(|e| e.to_string())?;
        let g2 = doubled.coefficients(&y, &y0, &theta, &b, MAX_ORDER).map_err(|e| e.to_string())?;
        for k in 0..4 {
            let diff = (g[k] - g2[k]).abs() / g[k].abs().max(1.0);
            ensure(diff < 1e-10, || format!("{id}: C({}) moves by {diff:e} when the rule doubles", k as i32 - 1))?;
        }
        let a: f64 = c_minus1(&y, &y0);
        let c: f64 = c_minus1(&y0, &y);
        ensure(a.to_bits() == c.to_bits(), || format!("{id}: C(-1) not symmetric"))?;
        let delta = match id {
            ModelId::Growth => uniform(&mut r, 10.0, 250.0),
            _ => uniform(&mut r, 0.01, 0.5),
        };
        let via_generic = cfe_log_density(model, &base, &x, &x0, delta, &theta, &b, 2).unwrap();
        let via_hand = cfe_log_density(model, hand, &x, &x0, delta, &theta, &b, 2).unwrap();
        let rel = (via_generic - via_hand).abs() / via_hand.abs().max(1.0);
        ensure(rel < 1e-8, || format!("{id}: generic density {via_generic} vs hand-coded {via_hand}"))?;
    }
    Ok(())
}

/// Quadrature convergence, `C(-1)` exchange symmetry and generic/hand-coded density agreement.
pub fn expansion() -> Check {
    generic_checks::<_, _, 1>(&make_growth_model(), &growth_coeffs(), ModelId::Growth, 31)?;
    generic_checks::<_, _, 2>(&make_ou2d_model(), &ou2d_coeffs(), ModelId::Ou2d, 32)?;
    generic_checks::<_, _, 1>(&make_cir_model(), &cir_coeffs(), ModelId::Cir, 33)
}

/// A random concave quadratic `c - (b - m)' P (b - m) / 2` and its exact log-integral.
pub fn random_quadratic(r: &mut ChaCha8Rng, q: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let a: Vec<f64> = (0..q * q).map(|_| uniform(r, -1.0, 1.0)).collect();
    let mut p = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            p[i * q + j] = (0..q).map(|k| a[i * q + k] * a[j * q + k]).sum::<f64>();
        }
        p[i * q + i] += 0.5;
    }
    let m: Vec<f64> = (0..q).map(|_| uniform(r, -3.0, 3.0)).collect();
    let c = uniform(r, -5.0, 5.0);
    let l = cholesky(&p, q).unwrap();
    let logdet: f64 = (0..q).map(|i| 2.0 * l[i * q + i].ln()).sum();
    let exact = c + 0.5 * q as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet;
    (p, m, c, exact)
}

pub fn quadratic_objective<'a>(
    p: &'a [f64],
    m: &'a [f64],
    c: f64,
) -> impl Fn(&[Dual2]) -> sdmem::Result<Dual2> + 'a {
    let q = m.len();
    move |b: &[Dual2]| {
        let mut acc = Dual2::constant(c);
        for i in 0..q {
            for j in 0..q {
                acc -= (b[i] - m[i]) * (b[j] - m[j]) * (0.5 * p[i * q + j]);
            }
        }
        Ok(acc)
    }
}

/// Laplace exactness on random quadratics, objective determinism, inner
/// gradient checks and monotone outer history.
pub fn estimate() -> Check {
    run_cases(100, (1usize..=4, any::<u64>()), |(q, seed)| {
        let mut r = rng(seed);
        let (p, m, c, exact) = random_quadratic(&mut r, q);
        let start: Vec<f64> = (0..q).map(|_| uniform(&mut r, -5.0, 5.0)).collect();
        let (_, value) = laplace_unit(quadratic_objective(&p, &m, c), &start, None, &InnerOptions::default())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!((value - exact).abs() < 1e-12, "laplace {} vs exact {} (q = {})", value, exact, q);
        Ok(())
    })?;

    let opts = InnerOptions::default();
    let (data, _) = growth_data(8, 7, 5);
    let growth = make_growth_model();
    let gc = growth_coeffs();
    let density = Cfe::new(&growth, &gc, 2).unwrap();
    let first = marginal_loglik(&growth, &density, &data, &GROWTH_THETA, &GROWTH_PSI, None, &opts)
        .map_err(|e| e.to_string())?;
    let warm = first.warm_starts();
    let a = marginal_loglik(&growth, &density, &data, &GROWTH_THETA, &GROWTH_PSI, Some(&warm), &opts)
        .map_err(|e| e.to_string())?;
    let b = marginal_loglik(&growth, &density, &data, &GROWTH_THETA, &GROWTH_PSI, Some(&warm), &opts)
        .map_err(|e| e.to_string())?;
    ensure(a.loglik.to_bits() == b.loglik.to_bits() && a.warm_starts() == b.warm_starts(), || {
        "marginal log-likelihood is not deterministic".into()
    })?;

    let check_grad = |eval: &sdmem::estimate::MarginalEval, what: &str| -> Check {
        for (i, u) in eval.units.iter().enumerate() {
            let s = &u.solution;
            let scaled = sup(&s.grad) / s.f_at_max.abs().max(1.0);
            ensure(s.converged && scaled < 1e-6, || {
                format!("{what} unit {i}: gradient {:?} at the inner solution", s.grad)
            })?;
        }
        Ok(())
    };
    check_grad(&first, "growth")?;
    let (odata, _) = ou_data(5, 20, 6);
    let ou = make_ou2d_model();
    let oc = ou2d_coeffs();
    let eval = marginal_loglik(&ou, &Cfe::new(&ou, &oc, 2).unwrap(), &odata, &OU_THETA, &OU_PSI, None, &opts)
        .map_err(|e| e.to_string())?;
    check_grad(&eval, "ou")?;
    let (cdata, _) = cir_data(5, 20, 7);
    let cir = make_cir_model();
    let cc = cir_coeffs();
    let eval = marginal_loglik(&cir, &Cfe::new(&cir, &cc, 2).unwrap(), &cdata, &CIR_THETA, &CIR_PSI, None, &opts)
        .map_err(|e| e.to_string())?;
    check_grad(&eval, "cir")?;

    run_cases(30, any::<u64>(), |seed| {
        let mut r = rng(seed);
        let c: Vec<f64> = (0..3).map(|_| uniform(&mut r, -2.0, 2.0)).collect();
        let f = |x: &[f64]| {
            (x[0] - c[0]).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2) + (x[2] - c[2]).abs() + c[1] * x[1].sin()
        };
        let res = minimize(f, &[0.0; 3], &[0.5; 3], &[-5.0; 3], &[5.0; 3], &NelderMeadOptions::default());
        prop_assert!(res.history.windows(2).all(|w| w[1] <= w[0]), "history increases: {:?}", res.history);
        prop_assert_eq!(res.history.last().copied(), Some(res.value));
        Ok(())
    })
}

fn random_dataset(r: &mut ChaCha8Rng) -> PopulationDataset {
    let dim = r.random_range(1..=2);
    let m = r.random_range(1..=4);
    let units = (0..m)
        .map(|id| {
            let n = r.random_range(2..=8);
            let mut t = uniform(r, -1e3, 1e3);
            let mut times = Vec::new();
            let mut obs = Vec::new();
            for _ in 0..n {
                times.push(t);
                t += 10f64.powf(uniform(r, -6.0, 3.0));
                obs.push(
                    (0..dim)
                        .map(|_| uniform(r, -1.0, 1.0) * 10f64.powf(uniform(r, -300.0, 300.0)))
                        .collect(),
                );
            }
            UnitSeries { id: id * 3 + 1, times, obs }
        })
        .collect();
    PopulationDataset {
        model_id: "test".into(),
        dim,
        units,
    }
}

fn config(methods: &str, reps: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "model": "growth",
            "truth": {{"phi1": 195, "phi3": 350, "sigma": 0.08, "sd_phi1": 25, "sd_phi3": 52.5}},
            "design": {{"units": 5, "n_obs": 7}},
            "estimation": {{"methods": [{methods}], "max_evals": 300}},
            "replications": {reps}
        }}"#
    ))
    .unwrap()
}

/// CSV round trip, reproducibility of `mc` across thread counts, and summary statistics.
pub fn harness() -> Check {
    run_cases(64, any::<u64>(), |seed| {
        let data = random_dataset(&mut rng(seed));
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let back = read_dataset(buf.as_slice(), "test").map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, data);
        Ok(())
    })?;

    let cfg = config(r#""eum""#, 3);
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_mc(&cfg, 3))
    };
    let one = run_with(1).map_err(|e| e.to_string())?;
    let three = run_with(3).map_err(|e| e.to_string())?;
    let key = |r: &sdmem::harness::mc::McResult| {
        r.replications
            .iter()
            .flat_map(|rep| rep.fits.iter())
            .map(|f| f.report.as_ref().map(|r| (r.estimates(), r.loglik.to_bits())))
            .collect::<Vec<_>>()
    };
    ensure(key(&one) == key(&three), || "mc results depend on the thread count".into())?;
    ensure(key(&one).iter().all(Option::is_some), || "mc fit failed".into())?;

    let mut r = rng(41);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| r.sample(rand_distr::StandardNormal)).collect();
    let s = summarize_column("z", &xs);
    let rn = (n as f64).sqrt();
    let skew = s.skewness.unwrap_or(f64::NAN);
    let kurt = s.kurtosis.unwrap_or(f64::NAN);
    ensure(s.mean.abs() < 4.0 / rn, || format!("normal mean {}", s.mean))?;
    ensure(skew.abs() < 4.0 * (6.0f64).sqrt() / rn, || format!("normal skewness {skew}"))?;
    ensure((kurt - 3.0).abs() < 4.0 * (24.0f64).sqrt() / rn, || format!("normal kurtosis {kurt}"))?;
    ensure((s.q025 + 1.959964).abs() < 0.03 && (s.q975 - 1.959964).abs() < 0.03, || {
        format!("normal quantiles {} {}", s.q025, s.q975)
    })?;
    let us: Vec<f64> = (0..n).map(|_| uniform(&mut r, 0.0, 1.0)).collect();
    let s = summarize_column("u", &us);
    let kurt = s.kurtosis.unwrap_or(f64::NAN);
    ensure((s.mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0).sqrt() / rn, || format!("uniform mean {}", s.mean))?;
    ensure((kurt - 1.8).abs() < 0.02, || format!("uniform kurtosis {kurt}"))?;
    ensure((s.q025 - 0.025).abs() < 0.003 && (s.q975 - 0.975).abs() < 0.003, || {
        format!("uniform quantiles {} {}", s.q025, s.q975)
    })
}

/// Every property group, by module.
pub fn all() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("model-core", model_core as fn() -> Check),
        ("dists", dists),
        ("dual-ad", dual_ad),
        ("sim", sim_reproducible),
        ("sim-ou-autocovariance", ou_autocovariance),
        ("density", density),
        ("density-normalization-n20", normalization_n20),
        ("density-normalization-n7", normalization_n7),
        ("expansion-generic", expansion),
        ("estimate", estimate),
        ("harness", harness),
    ]
}

//! Laplace approximation of one unit's marginal likelihood.
//!
//! Compares the Laplace value with brute-force integration over both effects.
//!
//! cargo run --release --example laplace

use sdmem::density::{growth_coeffs, Cfe};
use sdmem::estimate::{InnerOptions, LaplaceObjective};
use sdmem::harness::config::ORANGE_TIMES;
use sdmem::model::{make_growth_model, SdeModel};
use sdmem::sim::{make_dataset, Scheme, SimPlan};

fn main() -> sdmem::Result<()> {
    let model = make_growth_model();
    let (theta, psi) = ([195.0, 350.0, 0.08], [25.0, 52.5]);
    let plan = SimPlan {
        theta: theta.to_vec(),
        psi: psi.to_vec(),
        x0: vec![vec![30.0]],
        t0: 118.0,
        t_end: 1582.0,
        step: 1.0,
        scheme: Scheme::Milstein,
        sample_times: vec![ORANGE_TIMES.to_vec()],
        n_units: 1,
        seed: 7,
    };
    let (data, truth) = make_dataset(&model, &plan)?;
    let coeffs = growth_coeffs();
    let density = Cfe::new(&model, &coeffs, 2)?;
    let prior = model.prior(&psi)?;
    let obj = LaplaceObjective::new(&model, &density, &data.units[0], &theta, &prior);
    let fit = obj.solve(None, &InnerOptions::default())?;
    println!("true effects      {:?}", truth[0]);
    println!("mode of integrand {:?} after {} Newton steps", fit.solution.b_hat, fit.solution.iterations);
    println!("laplace loglik    {:.6}", fit.loglik);

    // midpoint rule over a wide box around the mode
    let (n, half) = (300, [100.0, 250.0]);
    let z = &fit.solution.z_hat;
    let peak = fit.solution.f_at_max;
    let h = [2.0 * half[0] / n as f64, 2.0 * half[1] / n as f64];
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let u = z[0] - half[0] + (i as f64 + 0.5) * h[0];
            let v = z[1] - half[1] + (j as f64 + 0.5) * h[1];
            acc += obj.eval::<f64>(&[u, v]).map(|f| (f - peak).exp()).unwrap_or(0.0);
        }
    }
    println!("quadrature loglik {:.6}", peak + (acc * h[0] * h[1]).ln());
    Ok(())
}

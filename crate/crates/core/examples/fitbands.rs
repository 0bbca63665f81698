//! Mean and 95% bands of OU trajectories at the true parameters.
//!
//! cargo run --release --example fitbands

use sdmem::harness::bands::fit_bands;
use sdmem::harness::config::ExperimentConfig;
use sdmem::model::make_ou2d_model;

const CONFIG: &str = r#"{
  "model": "ou2d",
  "truth": {
    "alpha1": 1.0, "alpha2": 1.5,
    "beta11": 3.0, "beta12": 2.5, "beta21": 1.8, "beta22": 2.0,
    "sigma1": 0.3, "sigma2": 0.5,
    "nu11": 45.0, "nu12": 100.0, "nu21": 100.0, "nu22": 25.0
  },
  "design": { "units": 7, "n_obs": 20 }
}"#;

fn main() -> sdmem::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let (theta, psi) = cfg.truth()?;
    let design = cfg.design.resolve(cfg.model)?;
    let bands = fit_bands(&make_ou2d_model(), &theta, &psi, &design, 2000, 11, 0, 3)?;
    println!("{:>5} {:>24} {:>24}", "t", "x1 mean [95%]", "x2 mean [95%]");
    for (j, t) in bands.times.iter().enumerate() {
        let cell = |k: usize| format!("{:.3} [{:.3}, {:.3}]", bands.mean[j][k], bands.lower[j][k], bands.upper[j][k]);
        println!("{t:5.2} {:>24} {:>24}", cell(0), cell(1));
    }
    Ok(())
}

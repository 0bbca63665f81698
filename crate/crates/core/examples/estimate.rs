//! Fit the growth model to one simulated dataset with CFE(2) and Euler.
//!
//! cargo run --release --example estimate

use sdmem::density::DensityMethod;
use sdmem::harness::config::ExperimentConfig;
use sdmem::harness::estimate;
use sdmem::harness::mc::{simulate_replication, start_values};

const CONFIG: &str = r#"{
  "model": "growth",
  "truth": { "phi1": 195.0, "phi3": 350.0, "sigma": 0.08, "sd_phi1": 25.0, "sd_phi3": 52.5 },
  "design": { "units": 30, "n_obs": 20 }
}"#;

fn main() -> sdmem::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let (data, _) = simulate_replication(&cfg, 0)?;
    let start = start_values(&cfg, 0)?;
    println!("start     {:?}", start.flat());
    for method in [DensityMethod::Cfe { order: 2 }, DensityMethod::EulerMaruyama] {
        let r = estimate(cfg.model, method, &data, &start, &cfg.estimation.fit_options())?;
        let est: Vec<String> = r.estimates().iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "{:<6} {} loglik {:.3} ({} evaluations, {:.1}s)",
            method.label(),
            est.join(" "),
            r.loglik,
            r.evaluations,
            r.elapsed_s
        );
    }
    Ok(())
}

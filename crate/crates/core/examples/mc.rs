//! A short Monte Carlo study of the smallest growth design.
//!
//! cargo run --release --example mc -- [replications]

use sdmem::harness::config::ExperimentConfig;
use sdmem::harness::mc::run_mc;

const CONFIG: &str = r#"{
  "model": "growth",
  "truth": { "phi1": 195.0, "phi3": 350.0, "sigma": 0.08, "sd_phi1": 25.0, "sd_phi3": 52.5 },
  "design": { "units": 30, "n_obs": 7, "times": [118, 484, 664, 1004, 1231, 1372, 1582] },
  "estimation": { "methods": ["cfe2", "eum"] }
}"#;

fn main() -> sdmem::Result<()> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let result = run_mc(&cfg, reps)?;
    print!("{}", result.table());
    Ok(())
}

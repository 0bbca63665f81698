//! Simulate a growth population on the orange-tree time grid and print it.
//!
//! cargo run --release --example simulate

use sdmem::harness::config::ORANGE_TIMES;
use sdmem::model::make_growth_model;
use sdmem::sim::{make_dataset, Scheme, SimPlan};

fn main() -> sdmem::Result<()> {
    let plan = SimPlan {
        theta: vec![195.0, 350.0, 0.08],
        psi: vec![25.0, 52.5],
        x0: vec![vec![30.0]],
        t0: 118.0,
        t_end: 1582.0,
        step: 1.0,
        scheme: Scheme::Milstein,
        sample_times: vec![ORANGE_TIMES.to_vec()],
        n_units: 5,
        seed: 1,
    };
    let (data, effects) = make_dataset(&make_growth_model(), &plan)?;
    for (unit, b) in data.units.iter().zip(&effects) {
        let xs: Vec<String> = unit.obs.iter().map(|x| format!("{:6.1}", x[0])).collect();
        println!("unit {} (phi1_i {:+6.1}, phi3_i {:+6.1}): {}", unit.id, b[0], b[1], xs.join(" "));
    }
    Ok(())
}

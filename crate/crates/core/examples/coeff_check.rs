//! Hand-coded expansion coefficients against the generic engine.
//!
//! cargo run --release --example coeff_check

use sdmem::harness::coeff_check::coeff_check;
use sdmem::model::ModelId;

fn main() -> sdmem::Result<()> {
    for model in [ModelId::Growth, ModelId::Ou2d, ModelId::Cir] {
        let r = coeff_check(model, 20, 1, 0.0)?;
        println!(
            "{model:<7} max relative deviation per order {:?} -> {}",
            r.max_rel.map(|v| format!("{v:.1e}")),
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}

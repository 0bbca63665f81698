//! Expansion coefficients for a reducible model defined only by its drift and diffusion.
//!
//! The generic engine integrates along the straight line from `y0` to `y`,
//! so the growth coefficients here come from quadrature rather than closed forms.
//!
//! cargo run --release --example expansion

use sdmem::density::{growth_coeffs, CoeffSet};
use sdmem::expansion::{GenericCoeffs, QuadratureRule};
use sdmem::model::{make_growth_model, Reducible};

fn main() -> sdmem::Result<()> {
    let model = make_growth_model();
    let theta = [195.0, 350.0, 0.08];
    let b = [4.0, -20.0];
    let (x0, x) = ([60.0], [85.0]);
    let y0 = model.lamperti(&x0, &theta, &b)?;
    let y = model.lamperti(&x, &theta, &b)?;
    let hand: [f64; 4] = growth_coeffs().coefficients(&y, &y0, &theta, &b, 2)?;
    println!("hand-coded      {:?}", hand.map(|c| format!("{c:.10}")));
    for n in [2, 3, 5, 40] {
        let generic = GenericCoeffs::<_, 1>::with_rule(&model, QuadratureRule::gauss_legendre(n));
        let c: [f64; 4] = generic.coefficients(&y, &y0, &theta, &b, 2)?;
        println!("{n:>2}-point rule  {:?}", c.map(|c| format!("{c:.10}")));
    }
    Ok(())
}

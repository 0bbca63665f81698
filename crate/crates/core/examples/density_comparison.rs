//! CFE of increasing order and the Euler density against the exact OU transition.
//!
//! cargo run --release --example density_comparison

use sdmem::density::{exact_ou_moments, ou2d_coeffs, Cfe, Euler, ExactOu, TransitionDensity};
use sdmem::model::make_ou2d_model;

fn main() -> sdmem::Result<()> {
    let model = make_ou2d_model();
    let coeffs = ou2d_coeffs();
    let theta = [1.0, 1.5, 3.0, 2.5, 1.8, 2.0, 0.3, 0.5];
    let b = [1.0, 1.0, 1.0, 1.0];
    let x0 = [3.0, 3.0];
    let orders: Vec<Cfe<_, _>> = (0..=2).map(|k| Cfe::new(&model, &coeffs, k)).collect::<Result<_, _>>()?;
    let euler = Euler::new(&model);
    println!("{:>7} {:>10} {:>10} {:>10} {:>10}", "delta", "cfe0", "cfe1", "cfe2", "euler");
    for delta in [0.2, 0.1, 0.05, 0.025] {
        // one conditional SD from the exact mean in each coordinate
        let (m, v) = exact_ou_moments(&x0, delta, &theta, &b)?;
        let y = [m[0] + v[0][0].sqrt(), m[1] - v[1][1].sqrt()];
        let exact: f64 = ExactOu.log_density(&y, &x0, delta, &theta, &b)?;
        let mut row = format!("{delta:7.3}");
        for d in &orders {
            let v: f64 = d.log_density(&y, &x0, delta, &theta, &b)?;
            row += &format!(" {:10.2e}", v - exact);
        }
        let v: f64 = euler.log_density(&y, &x0, delta, &theta, &b)?;
        row += &format!(" {:10.2e}", v - exact);
        println!("{row}");
    }
    Ok(())
}

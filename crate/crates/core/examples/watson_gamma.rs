//! Green's-function constant from two independent quadratures and the
//! hardcore scattering length it fixes.

use hubbard_lab::scattering::{scattering_length, watson_gamma, Coupling};

fn main() -> hubbard_lab::Result<()> {
    let est = watson_gamma(1e-10)?;
    println!("gamma (adaptive)   = {:.15}", est.method_a);
    println!("gamma (trapezoid)  = {:.15}", est.method_b);
    println!("disagreement       = {:.2e}", est.err);
    for g in [Coupling::new(1.0)?, Coupling::new(8.0)?, Coupling::Infinite] {
        println!(
            "a(g = {:>3})         = {:.12}",
            g.to_string(),
            scattering_length(g, est.gamma)?
        );
    }
    Ok(())
}

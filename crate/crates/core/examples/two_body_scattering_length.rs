//! Extracts the scattering length from the hardcore two-particle energy
//! shift in growing Dirichlet boxes.

use hubbard_lab::hubbard::{interaction_shift, SolveOptions};
use hubbard_lab::scattering::{watson_gamma, Coupling};

fn main() -> hubbard_lab::Result<()> {
    let gamma = watson_gamma(1e-10)?.gamma;
    let a_inf = 1.0 / (8.0 * std::f64::consts::PI * gamma);
    println!("a_inf = {a_inf:.6}");
    for l in [6, 8, 10] {
        let row = interaction_shift(l, 1, 1, Coupling::Infinite, gamma, &SolveOptions::default())?;
        let a1 = row.a_first_order.expect("two-body row");
        let a2 = row.a_extracted.expect("two-body row");
        println!(
            "L = {l:>2}: dE = {:.8}, V_eff = {:.2}, a (first order) = {a1:.6}, a (second order) = {a2:.6} ({:+.3}%)",
            row.de,
            row.v_eff.expect("two-body row"),
            100.0 * (a2 / a_inf - 1.0)
        );
    }
    Ok(())
}

//! Ground-state energy density of the free lattice Fermi gas and its
//! approach to the continuum law at low density.

use hubbard_lab::ideal_fermi::{continuum_energy_density, energy_density};

fn main() -> hubbard_lab::Result<()> {
    println!(
        "{:>8} {:>12} {:>14} {:>10}",
        "rho", "E_f", "e(rho)", "e/e_cont"
    );
    for rho in [1e-4, 1e-3, 1e-2, 0.125, 0.5, 1.0] {
        let p = energy_density(rho)?;
        let ratio = p.energy_density / continuum_energy_density(rho);
        println!(
            "{rho:>8} {:>12.8} {:>14.8e} {ratio:>10.6}",
            p.fermi_energy, p.energy_density
        );
    }
    Ok(())
}

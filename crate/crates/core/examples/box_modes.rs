//! Finite-box mode families: plane waves on the closed box, the Dirichlet
//! sine modes and the rank of the Fermi projection at density 1/8.

use hubbard_lab::ideal_fermi::{box_modes, free_ground_energy, xi_projection};

fn main() -> hubbard_lab::Result<()> {
    let spec = box_modes(4)?;
    println!(
        "L = 4: {} plane waves, {} Dirichlet modes",
        spec.modes.len(),
        spec.dirichlet_modes.len()
    );
    for m in spec.dirichlet_modes.iter().take(5) {
        println!("  sine mode {:?} energy {:.6}", m.n, m.energy);
    }
    for l in [7, 11, 15] {
        let m = (l + 1usize).pow(3) / 8;
        let xi = xi_projection(m, l)?;
        println!(
            "L = {l}: M = {m}, rank = {}, rank/M = {:.4}",
            xi.rank,
            xi.rank_ratio()
        );
    }
    let free = free_ground_energy(2, 2, 5)?;
    println!(
        "free 2+2 energy in the L = 5 Dirichlet box: {:.10}",
        free.energy
    );
    Ok(())
}

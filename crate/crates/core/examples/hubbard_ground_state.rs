//! Lanczos ground state of the Dirichlet-box Hubbard model and its
//! observables. Arguments: L N_u N_d g (defaults 4 2 2 inf).

use hubbard_lab::hubbard::{build_basis, ground_state, observables, SolveOptions};
use hubbard_lab::ideal_fermi::free_ground_energy;
use hubbard_lab::scattering::Coupling;

fn main() -> hubbard_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let l: usize = arg(0, "4").parse().expect("L");
    let n_u: usize = arg(1, "2").parse().expect("N_u");
    let n_d: usize = arg(2, "2").parse().expect("N_d");
    let g: Coupling = arg(3, "inf").parse()?;
    let basis = build_basis(l, n_u, n_d, g.is_infinite())?;
    println!(
        "basis: {} allowed states of {} slots",
        basis.dim(),
        basis.slots()
    );
    let gs = ground_state(&basis, g, &SolveOptions::default())?;
    let free = free_ground_energy(n_u, n_d, l)?;
    println!(
        "E0 = {:.12}, residual {:.2e}, {} matvecs",
        gs.energy, gs.residual, gs.matvecs
    );
    println!(
        "E0(g=0) = {:.12}, shift = {:.12}",
        free.energy,
        gs.energy - free.energy
    );
    let obs = observables(&basis, &gs, &[1, 2])?;
    println!("defects: up {:.6}, down {:.6}", obs.defect_u, obs.defect_d);
    println!("double occupancy {:.6}", obs.double_occupancy);
    for (r, v) in &obs.i_r_expectation {
        println!("close pairs within 2 sqrt(3) {r}: {v:.6}");
    }
    Ok(())
}

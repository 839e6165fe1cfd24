//! Tabulates the zero-energy scattering solution and checks its
//! defining equation, the surface identity and the far-field decay.

use hubbard_lab::lattice::LatticePoint;
use hubbard_lab::scattering::{
    equation_residual, identity_ap2, phi_table, verify_decay, watson_gamma, Coupling,
    ScatteringParams,
};

fn main() -> hubbard_lab::Result<()> {
    let gamma = watson_gamma(1e-10)?.gamma;
    let g: Coupling = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("inf")
        .parse()?;
    let params = ScatteringParams::new(g, gamma)?;
    let sol = phi_table(params, 16, 96, 1e-9)?;
    println!("g = {g}, a = {:.10}", params.a);
    println!(
        "phi(0) = {:.10} (expected {:.10})",
        sol.phi(LatticePoint::ORIGIN),
        params.phi_at_origin()
    );
    println!("max equation residual = {:.2e}", equation_residual(&sol));
    for r in 2..=8 {
        let s = identity_ap2(&sol, r)?;
        println!(
            "r = {r}: surface sum {s:.10}, 4 pi a = {:.10}",
            4.0 * std::f64::consts::PI * params.a
        );
    }
    let decay = verify_decay(&sol);
    println!(
        "tail coefficient {:.6} (a = {:.6}), within 2%: {}",
        decay.tail_coefficient, params.a, decay.tail_within_2pct
    );
    for x in [1, 2, 4, 8, 16] {
        let p = LatticePoint::new(x, 0, 0);
        println!("phi({x},0,0) = {:.8}", sol.phi(p));
    }
    Ok(())
}

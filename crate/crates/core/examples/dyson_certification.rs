//! Certifies the Dyson-type operator inequality on a periodic box by
//! scanning the constant C_V upward until the lowest eigenvalue of
//! LHS - RHS is non-negative.

use hubbard_lab::scattering::{watson_gamma, Coupling, ScatteringParams};
use hubbard_lab::soft_potential::{build_soft_set, certify_lemma1, FilterPair};

fn main() -> hubbard_lab::Result<()> {
    let gamma = watson_gamma(1e-10)?.gamma;
    let params = ScatteringParams::new(Coupling::Infinite, gamma)?;
    let lambda = 32;
    let pair = FilterPair::trivial(lambda)?;
    for r in [4, 6, 8] {
        let set = build_soft_set(&pair, r, 0.5, 0.5)?;
        for c_v in [0.0, 1.0, 10.0, 100.0] {
            let rep = certify_lemma1(&params, &pair, &set, c_v)?;
            println!(
                "R = {r}, C_V = {c_v:>5}: min eig {:+.3e}, |LHS| {:.3e}, pass {}",
                rep.min_eig, rep.lhs_norm, rep.pass
            );
            if rep.pass {
                break;
            }
        }
    }
    Ok(())
}

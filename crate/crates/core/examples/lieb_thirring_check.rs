//! Two spinless fermions on a periodic torus in an attractive pair
//! potential: the ground energy never falls below the semiclassical bound.

use hubbard_lab::hubbard::{lt_check, LtShape};

fn main() -> hubbard_lab::Result<()> {
    let l = 6;
    for shape in [
        LtShape::Step {
            height: 1.0,
            range: 1.0,
        },
        LtShape::Step {
            height: 4.0,
            range: 2.0,
        },
        LtShape::Exponential {
            height: 4.0,
            length: 2.0,
        },
    ] {
        let rep = lt_check(l, shape)?;
        println!(
            "{shape:?}: min eig {:+.6}, bound {:+.6}, holds {}",
            rep.min_eig, rep.bound, rep.holds
        );
    }
    Ok(())
}

//! Random-instance test of the trace inequality that bounds the
//! interaction of a state against that of a reference projection.

use hubbard_lab::hubbard::trace_bound_check;

fn main() -> hubbard_lab::Result<()> {
    for delta in [None, Some(0.1), Some(0.5)] {
        let rep = trace_bound_check(7, delta, 1000)?;
        println!(
            "delta {:>6}: {} instances, {} violations, min relative slack {:.3e}",
            delta.map_or("random".to_string(), |d| d.to_string()),
            rep.instances,
            rep.violations,
            rep.min_relative_slack
        );
    }
    Ok(())
}

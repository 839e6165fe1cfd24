//! Drives the batch layer from an in-memory configuration: a small ED grid
//! over box size and coupling, run on two workers.

use hubbard_lab::cli::{parse_config, run};

fn main() -> hubbard_lab::Result<()> {
    let out = std::env::temp_dir().join("hubbard_lab_sweep");
    let text = format!(
        "[sweep]\ntarget = ed\nL = 3, 4\nN_u = 1\nN_d = 1, 2\ng = 0, 1, inf\n\n[run]\nworkers = 2\nout = {}\n",
        out.display()
    );
    let cfg = parse_config(&text)?;
    let record = run(&cfg)?;
    println!("config hash {}", record.config_hash);
    println!("{} failed points", record.failed_points);
    print!("{}", std::fs::read_to_string(out.join("ed.csv"))?);
    Ok(())
}

pub mod cli;
pub mod eigen;
pub mod error;
pub mod hubbard;
pub mod ideal_fermi;
pub mod lattice;
pub mod quad;
pub mod scattering;
pub mod soft_potential;

pub use error::{Error, Result};

//! Ground-state observables: one-particle density matrices, the defect
//! against the Dirichlet Fermi sea, close-pair counts and double occupancy.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::basis::{FockBasis, SpinSector};
use super::GroundState;
use crate::error::Result;
use crate::ideal_fermi::dirichlet_sea;
use crate::lattice::LatticePoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Spin {
    Up,
    Down,
}

/// `γ(x, x') = ⟨c†_{x} c_{x'}⟩` for one spin, in basis site order.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub spin: Spin,
    pub matrix: DMatrix<f64>,
    pub trace: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    /// `Tr[γ(1-ξ)]` with `ξ` the projection onto the closed-shell
    /// Dirichlet sea of the same particle number.
    pub defect: f64,
    /// The sea holds exactly `N` modes (otherwise `ξ` covers the whole
    /// partially filled shell).
    pub sea_closed: bool,
}

#[derive(Clone, Debug)]
pub struct ObservableSet {
    pub gamma_u: DensityMatrix,
    pub gamma_d: DensityMatrix,
    pub defect_u: f64,
    pub defect_d: f64,
    pub i_r_expectation: Vec<(u32, f64)>,
    pub double_occupancy: f64,
}

/// `γ` of the spin whose configurations index the rows of `amps`
/// (`rows × width`, row-major).
fn density_from_rows(sector: &SpinSector, amps: &[f64], width: usize) -> DMatrix<f64> {
    let s = sector.sites;
    let row = |i: usize| &amps[i * width..(i + 1) * width];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let entries: Vec<Vec<(u16, u16, f64)>> = (0..sector.len())
        .into_par_iter()
        .map(|i| {
            let config = sector.config(i);
            let ri = row(i);
            let norm = dot(ri, ri);
            let mut out = Vec::new();
            if norm == 0.0 {
                return out;
            }
            let mut scratch = Vec::with_capacity(sector.n);
            for (k, &from) in config.iter().enumerate() {
                out.push((from, from, norm));
                for to in 0..s as u16 {
                    if config.binary_search(&to).is_ok() {
                        continue;
                    }
                    let (j, sign) = sector.move_particle(i, k, to, &mut scratch);
                    // c†_to c_from |i⟩ = sign |j⟩
                    out.push((to, from, sign * dot(row(j), ri)));
                }
            }
            out
        })
        .collect();
    let mut m = DMatrix::zeros(s, s);
    for (a, b, v) in entries.into_iter().flatten() {
        m[(a as usize, b as usize)] += v;
    }
    m
}

fn transpose(amps: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; amps.len()];
    t.par_chunks_mut(rows.max(1))
        .enumerate()
        .for_each(|(c, out)| {
            for (r, o) in out.iter_mut().enumerate() {
                *o = amps[r * cols + c];
            }
        });
    t
}

/// Dirichlet sine mode evaluated at a site.
fn mode_value(n: [usize; 3], l: usize, p: LatticePoint) -> f64 {
    let amp = (2.0 / l as f64).sqrt();
    (0..3)
        .map(|a| amp * (PI * (n[a] as i64 * p.0[a]) as f64 / l as f64).sin())
        .product()
}

pub fn one_particle_dm(
    basis: &FockBasis,
    state: &GroundState,
    spin: Spin,
) -> Result<DensityMatrix> {
    let (nu, nd) = (basis.up.len(), basis.down.len());
    let psi = state.vector();
    let (matrix, n) = match spin {
        Spin::Up => (density_from_rows(&basis.up, psi, nd), basis.n_up()),
        Spin::Down => (
            density_from_rows(&basis.down, &transpose(psi, nu, nd), nu),
            basis.n_down(),
        ),
    };
    let trace = matrix.trace();
    let eig = matrix.clone().symmetric_eigen().eigenvalues;
    let eig_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let eig_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sea = dirichlet_sea(n, basis.l)?;
    let mut captured = 0.0;
    for mode in &sea.modes {
        let v: Vec<f64> = (0..basis.site_count())
            .map(|k| mode_value(mode.n, basis.l, basis.site(k)))
            .collect();
        let gv = &matrix * nalgebra::DVector::from_vec(v.clone());
        captured += v.iter().zip(gv.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(DensityMatrix {
        spin,
        trace,
        eig_min,
        eig_max,
        defect: trace - captured,
        sea_closed: sea.closed_shell,
        matrix,
    })
}

/// Number of particles of `config` with another one at Euclidean distance
/// at most `2√3 R`.
fn close_count(basis: &FockBasis, config: &[u16], r: u32) -> usize {
    let limit = 12 * (r as i64) * (r as i64);
    config
        .iter()
        .filter(|&&a| {
            let pa = basis.site(a as usize);
            config.iter().any(|&b| {
                if a == b {
                    return false;
                }
                let d =
                    pa.0.iter()
                        .zip(basis.site(b as usize).0)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<i64>();
                d <= limit
            })
        })
        .count()
}

/// `⟨I_R⟩` for the down spins, one value per entry of `rs`.
pub fn close_pair_count(basis: &FockBasis, state: &GroundState, rs: &[u32]) -> Vec<f64> {
    let nd = basis.down.len();
    let psi = state.vector();
    let mut marginal = vec![0.0; nd];
    for row in psi.chunks(nd) {
        marginal.iter_mut().zip(row).for_each(|(m, a)| *m += a * a);
    }
    rs.iter()
        .map(|&r| {
            marginal
                .iter()
                .enumerate()
                .map(|(id, p)| p * close_count(basis, basis.down.config(id), r) as f64)
                .sum()
        })
        .collect()
}

/// `⟨Σ_x n_{x↑} n_{x↓}⟩`.
pub fn double_occupancy(basis: &FockBasis, state: &GroundState) -> f64 {
    state
        .vector()
        .iter()
        .enumerate()
        .map(|(s, a)| a * a * basis.double_occupancy(s) as f64)
        .sum()
}

pub fn observables(basis: &FockBasis, state: &GroundState, rs: &[u32]) -> Result<ObservableSet> {
    let gamma_u = one_particle_dm(basis, state, Spin::Up)?;
    let gamma_d = one_particle_dm(basis, state, Spin::Down)?;
    Ok(ObservableSet {
        defect_u: gamma_u.defect,
        defect_d: gamma_d.defect,
        gamma_u,
        gamma_d,
        i_r_expectation: rs
            .iter()
            .copied()
            .zip(close_pair_count(basis, state, rs))
            .collect(),
        double_occupancy: double_occupancy(basis, state),
    })
}

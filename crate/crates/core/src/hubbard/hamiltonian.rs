//! Matrix-free Hubbard Hamiltonian with Dirichlet boundary conditions.
//!
//! The kinetic term is the restriction of the Z³ form `Σ|∇ψ|²` to
//! functions supported on `[1,L-1]^3`: the diagonal is 6 per particle at
//! every site, boundary sites included, and each interior bond carries -1.
//! A box Laplacian that drops the diagonal for missing neighbours would be
//! a different (Neumann-like) operator.

use rayon::prelude::*;

use super::basis::{FockBasis, SpinSector};
use crate::eigen::LinearOperator;
use crate::error::{invalid, Result};
use crate::scattering::Coupling;

/// Off-diagonal hops of one spin sector in compressed rows.
#[derive(Clone, Debug)]
pub struct HopTable {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    coeffs: Vec<f64>,
}

impl HopTable {
    pub fn build(sector: &SpinSector, neighbors: &[Vec<u16>]) -> Self {
        let mut offsets = Vec::with_capacity(sector.len() + 1);
        let mut targets = Vec::new();
        let mut coeffs = Vec::new();
        let mut scratch = Vec::with_capacity(sector.n);
        offsets.push(0);
        for i in 0..sector.len() {
            let config = sector.config(i).to_vec();
            for (k, &site) in config.iter().enumerate() {
                for &to in &neighbors[site as usize] {
                    if config.binary_search(&to).is_ok() {
                        continue;
                    }
                    let (j, sign) = sector.move_particle(i, k, to, &mut scratch);
                    targets.push(j as u32);
                    coeffs.push(-sign);
                }
            }
            offsets.push(targets.len() as u32);
        }
        HopTable {
            offsets,
            targets,
            coeffs,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        self.targets[a..b]
            .iter()
            .zip(&self.coeffs[a..b])
            .map(|(&j, &c)| (j as usize, c))
    }
}

/// `H = Σ_i -Δ_i + g Σ_x n_{x↑} n_{x↓}` on the slots of a [`FockBasis`].
pub struct HubbardOperator<'a> {
    pub basis: &'a FockBasis,
    pub coupling: Coupling,
    hops_up: HopTable,
    hops_down: HopTable,
    kinetic_diagonal: f64,
}

impl<'a> HubbardOperator<'a> {
    /// A hard-core basis requires `g = ∞` and vice versa.
    pub fn new(basis: &'a FockBasis, coupling: Coupling) -> Result<Self> {
        if basis.hardcore != coupling.is_infinite() {
            return Err(invalid(
                "g",
                "the hard-core basis is used exactly when g = inf",
            ));
        }
        let neighbors = basis.neighbors();
        Ok(HubbardOperator {
            basis,
            coupling,
            hops_up: HopTable::build(&basis.up, &neighbors),
            hops_down: HopTable::build(&basis.down, &neighbors),
            kinetic_diagonal: 6.0 * (basis.n_up() + basis.n_down()) as f64,
        })
    }

    fn g(&self) -> f64 {
        match self.coupling {
            Coupling::Finite(g) => g,
            Coupling::Infinite => 0.0,
        }
    }

    /// Dense matrix on the admissible slots only, with their slot indices.
    pub fn dense_allowed(&self) -> (nalgebra::DMatrix<f64>, Vec<usize>) {
        let keep: Vec<usize> = (0..self.basis.slots())
            .filter(|&s| self.basis.is_allowed(s))
            .collect();
        let mut m = nalgebra::DMatrix::zeros(keep.len(), keep.len());
        let mut x = vec![0.0; self.basis.slots()];
        let mut y = vec![0.0; self.basis.slots()];
        for (c, &s) in keep.iter().enumerate() {
            x[s] = 1.0;
            self.apply(&x, &mut y);
            x[s] = 0.0;
            for (r, &t) in keep.iter().enumerate() {
                m[(r, c)] = y[t];
            }
        }
        (m, keep)
    }
}

impl LinearOperator for HubbardOperator<'_> {
    fn dim(&self) -> usize {
        self.basis.slots()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nd = self.basis.down.len();
        let g = self.g();
        let hardcore = self.basis.hardcore;
        y.par_chunks_mut(nd).enumerate().for_each(|(iu, row)| {
            let base = iu * nd;
            let xrow = &x[base..base + nd];
            for (id, out) in row.iter_mut().enumerate() {
                let docc = self.basis.double_occupancy(base + id);
                let mut v = (self.kinetic_diagonal + g * docc as f64) * xrow[id];
                for (jd, c) in self.hops_down.row(id) {
                    v += c * xrow[jd];
                }
                *out = v;
            }
            for (ju, c) in self.hops_up.row(iu) {
                let src = &x[ju * nd..ju * nd + nd];
                row.iter_mut().zip(src).for_each(|(o, s)| *o += c * s);
            }
            if hardcore {
                for (id, out) in row.iter_mut().enumerate() {
                    if self.basis.double_occupancy(base + id) != 0 {
                        *out = 0.0;
                    }
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{dense_eigenvalues, dot};
    use crate::hubbard::basis::build_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn single_particle_is_dirichlet_laplacian() {
        let l = 4;
        let b = build_basis(l, 1, 0, false).unwrap();
        let h = HubbardOperator::new(&b, Coupling::Finite(3.0)).unwrap();
        let (m, _) = h.dense_allowed();
        for i in 0..m.nrows() {
            assert_eq!(m[(i, i)], 6.0);
            let off: f64 = (0..m.ncols()).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            let p = b.site(i);
            let interior = (0..3)
                .flat_map(|a| [-1, 1].map(move |s| (a, s)))
                .filter(|&(a, s)| b.site_index(p.shifted(a, s)).is_some())
                .count();
            assert_eq!(off, -(interior as f64));
        }
        let ev = dense_eigenvalues(m);
        assert!((ev[0] - 6.0 * (1.0 - (PI / l as f64).cos())).abs() < 1e-12);
    }

    #[test]
    fn hermitian_on_random_pairs() {
        for (l, nu, nd, g) in [
            (3, 2, 1, Coupling::Finite(2.5)),
            (4, 2, 2, Coupling::Infinite),
            (3, 3, 2, Coupling::Finite(0.0)),
        ] {
            let b = build_basis(l, nu, nd, g.is_infinite()).unwrap();
            let h = HubbardOperator::new(&b, g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let n = b.slots();
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for s in 0..n {
                if !b.is_allowed(s) {
                    u[s] = 0.0;
                    v[s] = 0.0;
                }
            }
            let (mut hu, mut hv) = (vec![0.0; n], vec![0.0; n]);
            h.apply(&u, &mut hu);
            h.apply(&v, &mut hv);
            let (a, c) = (dot(&u, &hv), dot(&hu, &v));
            assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {c}");
        }
    }

    #[test]
    fn hardcore_mismatch_rejected() {
        let b = build_basis(3, 1, 1, true).unwrap();
        assert!(HubbardOperator::new(&b, Coupling::Finite(1.0)).is_err());
    }
}

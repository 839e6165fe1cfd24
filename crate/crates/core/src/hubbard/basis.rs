//! Two-species fermionic Fock basis on the interior sites `[1,L-1]^3`.
//!
//! Each spin sector enumerates sorted site lists in colexicographic order,
//! ranked by the combinatorial number system. A joint state is the slot
//! `iu * n_down + id`; with a hard core the slots with a doubly occupied
//! site are excluded and always hold zero.

use crate::error::{invalid, Error, Result};
use crate::lattice::LatticePoint;

pub const DEFAULT_DIMENSION_CAP: u128 = 200_000_000;

/// Binomial coefficients `C(m, k)` for `m ≤ sites`, `k ≤ n`.
#[derive(Clone, Debug)]
struct Binomials {
    n: usize,
    table: Vec<u64>,
}

impl Binomials {
    fn new(sites: usize, n: usize) -> Self {
        let mut table = vec![0u64; (sites + 1) * (n + 1)];
        for m in 0..=sites {
            table[m * (n + 1)] = 1;
            for k in 1..=n.min(m) {
                let a = if k < m {
                    table[(m - 1) * (n + 1) + k]
                } else {
                    0
                };
                table[m * (n + 1) + k] = table[(m - 1) * (n + 1) + k - 1] + a;
            }
        }
        Binomials { n, table }
    }

    fn get(&self, m: usize, k: usize) -> u64 {
        if k > m {
            0
        } else {
            self.table[m * (self.n + 1) + k]
        }
    }
}

/// Exact `C(m, k)` in 128 bits for dimension checks.
pub fn binomial(m: u64, k: u64) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All `n`-particle configurations of one spin species.
#[derive(Clone, Debug)]
pub struct SpinSector {
    pub n: usize,
    pub sites: usize,
    /// Sorted site lists, `n` entries per configuration.
    configs: Vec<u16>,
    binom: Binomials,
}

impl SpinSector {
    pub fn new(sites: usize, n: usize) -> Self {
        let binom = Binomials::new(sites, n);
        let count = binom.get(sites, n) as usize;
        let mut configs = Vec::with_capacity(count * n);
        let mut cur = Vec::with_capacity(n);
        enumerate_below(sites, n, &mut cur, &mut configs);
        debug_assert_eq!(configs.len(), count * n);
        SpinSector {
            n,
            sites,
            configs,
            binom,
        }
    }

    pub fn len(&self) -> usize {
        self.binom.get(self.sites, self.n) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn config(&self, index: usize) -> &[u16] {
        &self.configs[index * self.n..(index + 1) * self.n]
    }

    /// Rank of a sorted site list.
    pub fn rank(&self, sorted: &[u16]) -> usize {
        sorted
            .iter()
            .enumerate()
            .map(|(k, &s)| self.binom.get(s as usize, k + 1) as usize)
            .sum()
    }

    /// Moves the particle at position `k` of configuration `index` to the
    /// empty site `to`; returns the new rank and the fermionic sign, the
    /// parity of the occupied sites strictly between the two positions.
    pub fn move_particle(
        &self,
        index: usize,
        k: usize,
        to: u16,
        scratch: &mut Vec<u16>,
    ) -> (usize, f64) {
        let c = self.config(index);
        let from = c[k];
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        let between = c.iter().filter(|&&s| s > lo && s < hi).count();
        scratch.clear();
        scratch.extend(c.iter().copied().filter(|&s| s != from));
        let pos = scratch.partition_point(|&s| s < to);
        scratch.insert(pos, to);
        let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
        (self.rank(scratch), sign)
    }

    pub fn occupies(&self, index: usize, site: u16) -> bool {
        self.config(index).binary_search(&site).is_ok()
    }
}

/// Appends, in colex order, every completion of `cur` (largest elements
/// first) with `k` smaller elements below `bound`.
fn enumerate_below(bound: usize, k: usize, cur: &mut Vec<u16>, out: &mut Vec<u16>) {
    if k == 0 {
        out.extend(cur.iter().rev());
        return;
    }
    for next in (k - 1)..bound {
        cur.push(next as u16);
        enumerate_below(next, k - 1, cur, out);
        cur.pop();
    }
}

/// Basis of `H(N_u, N_d)` on the interior of the Dirichlet box.
#[derive(Clone, Debug)]
pub struct FockBasis {
    pub l: usize,
    pub hardcore: bool,
    /// Interior sites in basis order (lexicographic unless permuted).
    sites: Vec<LatticePoint>,
    pub up: SpinSector,
    pub down: SpinSector,
    /// Number of doubly occupied sites per slot.
    docc: Vec<u8>,
    allowed: usize,
}

pub fn interior_sites(l: usize) -> Vec<LatticePoint> {
    let l = l as i64;
    let mut out = Vec::new();
    for x in 1..l {
        for y in 1..l {
            for z in 1..l {
                out.push(LatticePoint::new(x, y, z));
            }
        }
    }
    out
}

pub fn build_basis(l: usize, n_u: usize, n_d: usize, hardcore: bool) -> Result<FockBasis> {
    build_basis_with(l, n_u, n_d, hardcore, DEFAULT_DIMENSION_CAP, None)
}

/// As [`build_basis`] with an explicit cap and optional site permutation
/// (`order[k]` is the lexicographic index of the `k`-th basis site).
pub fn build_basis_with(
    l: usize,
    n_u: usize,
    n_d: usize,
    hardcore: bool,
    cap: u128,
    order: Option<&[usize]>,
) -> Result<FockBasis> {
    if l < 2 {
        return Err(invalid("L", "box side must be at least 2"));
    }
    let lex = interior_sites(l);
    let s = lex.len();
    if s > u16::MAX as usize {
        return Err(invalid("L", "too many sites"));
    }
    if n_u > s || n_d > s {
        return Err(invalid(
            "N",
            format!("particle number exceeds the {s} interior sites"),
        ));
    }
    if hardcore && n_u + n_d > s {
        return Err(invalid("N", "hard core needs N_u + N_d <= sites"));
    }
    let dim = binomial(s as u64, n_u as u64) * binomial(s as u64, n_d as u64);
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let sites = match order {
        Some(p) => {
            let mut seen = vec![false; s];
            if p.len() != s
                || p.iter()
                    .any(|&i| i >= s || std::mem::replace(&mut seen[i], true))
            {
                return Err(invalid("order", "not a permutation of the interior sites"));
            }
            p.iter().map(|&i| lex[i]).collect()
        }
        None => lex,
    };
    let up = SpinSector::new(s, n_u);
    let down = SpinSector::new(s, n_d);
    let (nu, nd) = (up.len(), down.len());
    let mut docc = vec![0u8; nu * nd];
    let mut occ = vec![false; s];
    for iu in 0..nu {
        for &site in up.config(iu) {
            occ[site as usize] = true;
        }
        for id in 0..nd {
            docc[iu * nd + id] = down
                .config(id)
                .iter()
                .filter(|&&site| occ[site as usize])
                .count() as u8;
        }
        for &site in up.config(iu) {
            occ[site as usize] = false;
        }
    }
    let allowed = if hardcore {
        docc.iter().filter(|&&d| d == 0).count()
    } else {
        docc.len()
    };
    Ok(FockBasis {
        l,
        hardcore,
        sites,
        up,
        down,
        docc,
        allowed,
    })
}

impl FockBasis {
    /// Number of admissible many-body states.
    pub fn dim(&self) -> usize {
        self.allowed
    }

    /// Length of the padded amplitude vector, `C(S,N_u)·C(S,N_d)`.
    pub fn slots(&self) -> usize {
        self.up.len() * self.down.len()
    }

    pub fn n_up(&self) -> usize {
        self.up.n
    }

    pub fn n_down(&self) -> usize {
        self.down.n
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, index: usize) -> LatticePoint {
        self.sites[index]
    }

    pub fn site_index(&self, p: LatticePoint) -> Option<usize> {
        self.sites.iter().position(|&q| q == p)
    }

    pub fn slot(&self, iu: usize, id: usize) -> usize {
        iu * self.down.len() + id
    }

    pub fn unslot(&self, slot: usize) -> (usize, usize) {
        (slot / self.down.len(), slot % self.down.len())
    }

    pub fn double_occupancy(&self, slot: usize) -> u8 {
        self.docc[slot]
    }

    pub fn is_allowed(&self, slot: usize) -> bool {
        !self.hardcore || self.docc[slot] == 0
    }

    /// Nearest-neighbour interior sites of every site, in basis indices.
    pub fn neighbors(&self) -> Vec<Vec<u16>> {
        (0..self.sites.len())
            .map(|i| {
                let p = self.sites[i];
                let mut out = Vec::with_capacity(6);
                for axis in 0..3 {
                    for step in [-1, 1] {
                        if let Some(j) = self.site_index(p.shifted(axis, step)) {
                            out.push(j as u16);
                        }
                    }
                }
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(build_basis(3, 1, 0, false).unwrap().dim(), 8);
        assert_eq!(build_basis(3, 1, 1, true).unwrap().dim(), 56);
        let b = build_basis(5, 2, 2, false).unwrap();
        assert_eq!(b.dim(), 4_064_256);
        assert!(matches!(
            build_basis_with(5, 2, 2, false, 1000, None),
            Err(Error::DimensionCap { .. })
        ));
        assert!(build_basis(3, 5, 4, true).is_err());
    }

    #[test]
    fn rank_inverts_enumeration() {
        let s = SpinSector::new(10, 3);
        assert_eq!(s.len(), 120);
        for i in 0..s.len() {
            let c = s.config(i);
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(s.rank(c), i);
        }
    }

    #[test]
    fn move_sign_counts_passed_particles() {
        let s = SpinSector::new(6, 3);
        let i = s.rank(&[0, 2, 4]);
        let mut scratch = Vec::new();
        // 0 -> 5 passes 2 and 4
        let (j, sign) = s.move_particle(i, 0, 5, &mut scratch);
        assert_eq!(s.config(j), &[2, 4, 5]);
        assert_eq!(sign, 1.0);
        // 2 -> 5 passes 4
        let (j, sign) = s.move_particle(i, 1, 5, &mut scratch);
        assert_eq!(s.config(j), &[0, 4, 5]);
        assert_eq!(sign, -1.0);
    }

    #[test]
    fn exact_binomials() {
        assert_eq!(binomial(64, 2), 2016);
        assert_eq!(binomial(125, 2), 7750);
        assert_eq!(binomial(5, 7), 0);
    }
}

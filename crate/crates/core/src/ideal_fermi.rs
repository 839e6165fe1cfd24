//! Ideal lattice Fermi gas: Fermi energy and energy density in the
//! thermodynamic limit, finite-box mode families, Fermi-sea projections and
//! free ground energies of the Dirichlet box.
//!
//! Brillouin-zone integrals over `{E(p) ≤ E}` reduce to `[0,π]^3`; the
//! innermost coordinate is integrated in closed form, leaving a nested
//! adaptive Gauss-Kronrod integral with breakpoints at every kink.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::{dispersion, BoxRegion, LatticeField, LatticePoint};
use crate::quad::{adaptive_pieces, Estimate};

/// One row of the equation of state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EosPoint {
    pub rho: f64,
    pub fermi_energy: f64,
    pub energy_density: f64,
    pub err: f64,
}

const INNER_TOL: f64 = 1e-13;
const OUTER_TOL: f64 = 1e-12;
const PANELS: usize = 400;

fn one_d(p: f64) -> f64 {
    4.0 * (0.5 * p).sin().powi(2)
}

/// `∫_0^π` of the `p3`-slice with `2(1 - cos p3) ≤ t`: `(length, ∫ E_3)`.
fn slice(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 4.0);
    let theta = (1.0 - 0.5 * t).clamp(-1.0, 1.0).acos();
    (theta, 2.0 * (theta - theta.sin()))
}

/// Roots `p ∈ (0,π)` of `2(1 - cos p) = c`.
fn kink(c: f64, out: &mut Vec<f64>) {
    if c > 0.0 && c < 4.0 {
        out.push((1.0 - 0.5 * c).acos());
    }
}

fn breakpoints(levels: &[f64]) -> Vec<f64> {
    let mut pts = vec![0.0, PI];
    for &c in levels {
        kink(c, &mut pts);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `π^{-3} ∫_{[0,π]^3, E(p) ≤ e} (1, E(p)) dp`, i.e. the occupied fraction
/// of the zone and the energy per site, with error estimates.
fn occupied_moments(e: f64) -> (Estimate, Estimate) {
    if e <= 0.0 {
        let zero = Estimate {
            value: 0.0,
            error: 0.0,
        };
        return (zero, zero);
    }
    if e >= 12.0 {
        return (
            Estimate {
                value: 1.0,
                error: 0.0,
            },
            Estimate {
                value: 6.0,
                error: 0.0,
            },
        );
    }
    let moment = |energy: bool| {
        let outer_pts = breakpoints(&[e, e - 4.0, e - 8.0]);
        let est = adaptive_pieces(&outer_pts, OUTER_TOL * PI, PANELS, |p1| {
            let e1 = one_d(p1);
            let rest = e - e1;
            if rest <= 0.0 {
                return 0.0;
            }
            let inner_pts = breakpoints(&[rest, rest - 4.0]);
            adaptive_pieces(&inner_pts, INNER_TOL * PI, PANELS, |p2| {
                let e12 = e1 + one_d(p2);
                let (len, e3) = slice(e - e12);
                if energy {
                    e12 * len + e3
                } else {
                    len
                }
            })
            .value
        });
        let norm = PI.powi(3);
        Estimate {
            value: est.value / norm,
            error: est.error / norm + OUTER_TOL,
        }
    };
    (moment(false), moment(true))
}

fn check_density(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(
            "rho",
            format!("density must lie in [0,1], got {rho}"),
        ));
    }
    Ok(())
}

/// Fraction of the Brillouin zone with `E(p) ≤ e`.
pub fn occupied_volume(e: f64) -> f64 {
    occupied_moments(e).0.value
}

/// Solves `(2π)^{-3} vol{E(p) ≤ E_f} = ρ` by bisection; `|vol(E_f) - ρ| ≤ 1e-10`.
pub fn fermi_energy(rho: f64) -> Result<f64> {
    check_density(rho)?;
    if rho == 0.0 {
        return Ok(0.0);
    }
    if rho == 1.0 {
        return Ok(12.0);
    }
    let (mut lo, mut hi) = (0.0f64, 12.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = occupied_volume(mid);
        if (v - rho).abs() <= 1e-12 || hi - lo <= 1e-14 {
            return Ok(mid);
        }
        if v < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `e(ρ) = (2π)^{-3} ∫_{E(p) ≤ E_f(ρ)} E(p) dp` with an error estimate.
pub fn energy_density(rho: f64) -> Result<EosPoint> {
    let ef = fermi_energy(rho)?;
    let (vol, en) = occupied_moments(ef);
    // de/dρ = E_f, so a density mismatch shifts e by about E_f·|Δρ|
    let err = en.error + ef * ((vol.value - rho).abs() + vol.error);
    Ok(EosPoint {
        rho,
        fermi_energy: ef,
        energy_density: en.value,
        err,
    })
}

/// `e(ρ_u) + e(ρ_d)`.
pub fn e0(rho_u: f64, rho_d: f64) -> Result<f64> {
    Ok(energy_density(rho_u)?.energy_density + energy_density(rho_d)?.energy_density)
}

/// `(3/5)(6π²)^{2/3} ρ^{5/3}`, the quadratic-dispersion limit of `e(ρ)`.
pub fn continuum_energy_density(rho: f64) -> f64 {
    0.6 * (6.0 * PI * PI).powf(2.0 / 3.0) * rho.powf(5.0 / 3.0)
}

/// A periodic plane-wave mode on `[0,L]^3` (`m` integer, momentum `2πm/(L+1)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneMode {
    pub m: [i64; 3],
    pub energy: f64,
}

/// A sine mode of the Dirichlet box `[1,L-1]^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletMode {
    pub n: [usize; 3],
    pub energy: f64,
}

/// Mode families of a box of side `L`.
#[derive(Clone, Debug)]
pub struct BoxSpectrum {
    pub l: usize,
    /// `(L+1)^3` plane waves, `m_j ∈ [-L/2, (L+1)/2]`.
    pub modes: Vec<PlaneMode>,
    /// `(L-1)^3` sine modes sorted by energy, ties in lexicographic order.
    pub dirichlet_modes: Vec<DirichletMode>,
}

/// Integers in the closed interval `[-L/2, (L+1)/2]`: exactly `L+1` of them.
fn plane_indices(l: usize) -> std::ops::RangeInclusive<i64> {
    let lo = -((l / 2) as i64);
    lo..=lo + l as i64
}

pub fn box_modes(l: usize) -> Result<BoxSpectrum> {
    if l < 2 {
        return Err(invalid("L", "box side must be at least 2"));
    }
    let k = 2.0 * PI / (l + 1) as f64;
    let mut modes = Vec::with_capacity((l + 1).pow(3));
    for a in plane_indices(l) {
        for b in plane_indices(l) {
            for c in plane_indices(l) {
                let m = [a, b, c];
                modes.push(PlaneMode {
                    m,
                    energy: dispersion(m.map(|v| k * v as f64)),
                });
            }
        }
    }
    let spectrum = BoxSpectrum {
        l,
        modes,
        dirichlet_modes: dirichlet_modes(l),
    };
    spectrum.check_orthonormal()?;
    Ok(spectrum)
}

/// `(L-1)^3` Dirichlet modes sorted by `(energy, n)`.
pub fn dirichlet_modes(l: usize) -> Vec<DirichletMode> {
    let e1 = |n: usize| 2.0 * (1.0 - (PI * n as f64 / l as f64).cos());
    let mut out = Vec::with_capacity((l.saturating_sub(1)).pow(3));
    for a in 1..l {
        for b in 1..l {
            for c in 1..l {
                out.push(DirichletMode {
                    n: [a, b, c],
                    energy: e1(a) + e1(b) + e1(c),
                });
            }
        }
    }
    // energies of equal modes are computed by the same sum in permuted
    // order, so ties are resolved by rounding before comparing
    out.sort_by(|x, y| {
        tie_key(x.energy)
            .total_cmp(&tie_key(y.energy))
            .then(x.n.cmp(&y.n))
    });
    out
}

fn tie_key(e: f64) -> f64 {
    (e * 1e10).round() / 1e10
}

impl BoxSpectrum {
    fn phase_1d(&self, m: i64, x: i64) -> Complex64 {
        let n = (self.l + 1) as f64;
        Complex64::from_polar(1.0 / n.sqrt(), 2.0 * PI * (m * x) as f64 / n)
    }

    /// `f_m(x) = (L+1)^{-3/2} e^{2πi m·x/(L+1)}` on `[0,L]^3`.
    pub fn plane_wave(&self, m: [i64; 3]) -> LatticeField<Complex64> {
        let region = BoxRegion::uniform(0, self.l as i64).expect("L >= 2");
        LatticeField::from_fn(region, |x| {
            (0..3).map(|i| self.phase_1d(m[i], x.0[i])).product()
        })
    }

    /// The modes are products of one-dimensional factors, so orthonormality
    /// of `{f_m}` is equivalent to that of the one-dimensional family.
    fn check_orthonormal(&self) -> Result<()> {
        let idx: Vec<i64> = plane_indices(self.l).collect();
        let mut worst: f64 = 0.0;
        for &a in &idx {
            for &b in &idx {
                let s: Complex64 = (0..=self.l as i64)
                    .map(|x| self.phase_1d(a, x).conj() * self.phase_1d(b, x))
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        if worst > 1e-12 {
            return Err(invalid(
                "L",
                format!("plane waves not orthonormal: {worst:.2e}"),
            ));
        }
        Ok(())
    }

    /// `Σ_m E(2πm/(L+1)) |⟨ψ|f_m⟩|^2` by direct overlap sums.
    pub fn kinetic_mode_sum(&self, psi: &LatticeField<Complex64>) -> f64 {
        let l = self.l as i64;
        let idx: Vec<i64> = plane_indices(self.l).collect();
        let coords: Vec<i64> = (0..=l).collect();
        // separable transform, one axis at a time
        let n = coords.len();
        let mut data: Vec<Complex64> = Vec::with_capacity(n * n * n);
        for &x in &coords {
            for &y in &coords {
                for &z in &coords {
                    data.push(psi.get(LatticePoint::new(x, y, z)).conj());
                }
            }
        }
        for axis in 0..3 {
            let stride = n.pow(2 - axis as u32);
            let mut next = vec![Complex64::default(); data.len()];
            for (flat, out) in next.iter_mut().enumerate() {
                let mi = (flat / stride) % n;
                let base = flat - mi * stride;
                *out = (0..n)
                    .map(|xi| data[base + xi * stride] * self.phase_1d(idx[mi], coords[xi]))
                    .sum();
            }
            data = next;
        }
        self.modes
            .iter()
            .zip(&data)
            .map(|(mode, amp)| mode.energy * amp.norm_sqr())
            .sum()
    }
}

/// `ξ(M)`: plane-wave modes of the `[0,L]^3` box with energy at most
/// `E_f(M/(L+1)^3)`.
#[derive(Clone, Debug)]
pub struct FermiProjection {
    pub m_target: usize,
    pub l: usize,
    pub fermi_energy: f64,
    pub modes: Vec<[i64; 3]>,
    pub rank: usize,
}

impl FermiProjection {
    pub fn rank_ratio(&self) -> f64 {
        self.rank as f64 / self.m_target as f64
    }
}

/// Modes whose energy lies within this distance of `E_f` count as occupied.
pub const FERMI_LEVEL_TOL: f64 = 1e-9;

pub fn xi_projection(m_target: usize, l: usize) -> Result<FermiProjection> {
    let total = (l + 1).pow(3);
    if m_target == 0 || m_target > total {
        return Err(invalid("M", format!("need 1 <= M <= (L+1)^3 = {total}")));
    }
    let spectrum = box_modes(l)?;
    let ef = fermi_energy(m_target as f64 / total as f64)?;
    let modes: Vec<[i64; 3]> = spectrum
        .modes
        .iter()
        .filter(|m| m.energy <= ef + FERMI_LEVEL_TOL)
        .map(|m| m.m)
        .collect();
    Ok(FermiProjection {
        m_target,
        l,
        fermi_energy: ef,
        rank: modes.len(),
        modes,
    })
}

/// Sum of the lowest `N_u` and lowest `N_d` Dirichlet eigenvalues.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergy {
    pub energy: f64,
    /// The last filled level is shared with an empty mode for some spin.
    pub degenerate: bool,
}

pub fn free_ground_energy(n_u: usize, n_d: usize, l: usize) -> Result<FreeEnergy> {
    if l < 2 {
        return Err(invalid("L", "box side must be at least 2"));
    }
    let sites = (l - 1).pow(3);
    if n_u > sites || n_d > sites {
        return Err(invalid(
            "N",
            format!("particle number exceeds the {sites} interior sites"),
        ));
    }
    let modes = dirichlet_modes(l);
    let fill = |n: usize| -> (f64, bool) {
        let e = modes[..n].iter().map(|m| m.energy).sum();
        let degenerate =
            n > 0 && n < modes.len() && tie_key(modes[n - 1].energy) == tie_key(modes[n].energy);
        (e, degenerate)
    };
    let (eu, du) = fill(n_u);
    let (ed, dd) = fill(n_d);
    Ok(FreeEnergy {
        energy: eu + ed,
        degenerate: du || dd,
    })
}

/// Closed-shell Dirichlet Fermi sea for `N` particles: every mode whose
/// energy does not exceed that of the `N`-th lowest mode.
#[derive(Clone, Debug)]
pub struct DirichletSea {
    pub modes: Vec<DirichletMode>,
    /// The shell at the Fermi level is exactly filled by `N` particles.
    pub closed_shell: bool,
}

pub fn dirichlet_sea(n: usize, l: usize) -> Result<DirichletSea> {
    let modes = dirichlet_modes(l);
    if n > modes.len() {
        return Err(invalid("N", "particle number exceeds the interior sites"));
    }
    if n == 0 {
        return Ok(DirichletSea {
            modes: Vec::new(),
            closed_shell: true,
        });
    }
    let level = tie_key(modes[n - 1].energy);
    let sea: Vec<DirichletMode> = modes
        .into_iter()
        .take_while(|m| tie_key(m.energy) <= level)
        .collect();
    Ok(DirichletSea {
        closed_shell: sea.len() == n,
        modes: sea,
    })
}

/// Normalized sine mode on the interior sites `[1,L-1]^3`, listed in
/// lexicographic site order.
pub fn dirichlet_vector(n: [usize; 3], l: usize) -> Vec<f64> {
    let amp = (2.0 / l as f64).sqrt();
    let factor = |k: usize, x: usize| amp * (PI * (k * x) as f64 / l as f64).sin();
    let mut out = Vec::with_capacity((l - 1).pow(3));
    for x in 1..l {
        for y in 1..l {
            for z in 1..l {
                out.push(factor(n[0], x) * factor(n[1], y) * factor(n[2], z));
            }
        }
    }
    out
}

/// `1/Σ_x ψ_0(x)^4` for the Dirichlet ground mode: the volume that turns a
/// contact interaction into a first-order energy shift of two particles.
pub fn pair_effective_volume(l: usize) -> f64 {
    1.0 / dirichlet_vector([1, 1, 1], l)
        .iter()
        .map(|v| v.powi(4))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::laplacian_apply;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn band_edges_and_half_filling() {
        assert_eq!(fermi_energy(0.0).unwrap(), 0.0);
        assert_eq!(fermi_energy(1.0).unwrap(), 12.0);
        assert!((fermi_energy(0.5).unwrap() - 6.0).abs() < 1e-9);
        assert!((occupied_volume(6.0) - 0.5).abs() < 1e-12);
        let full = energy_density(1.0).unwrap();
        assert!((full.energy_density - 6.0).abs() < 1e-12);
        assert!(fermi_energy(1.5).is_err());
    }

    #[test]
    fn occupied_volume_matches_monte_carlo_grid() {
        // midpoint grid count of the occupied set
        let n = 120;
        let e = 3.7;
        let h = PI / n as f64;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [i, j, k].map(|v| (v as f64 + 0.5) * h);
                    if dispersion(p) <= e {
                        count += 1;
                    }
                }
            }
        }
        let grid = count as f64 / (n * n * n) as f64;
        assert!((grid - occupied_volume(e)).abs() < 2e-3);
    }

    #[test]
    fn low_density_limit() {
        let rho = 1e-3;
        let ef = fermi_energy(rho).unwrap();
        assert!((ef / (6.0 * PI * PI * rho).powf(2.0 / 3.0) - 1.0).abs() < 0.05);
        let e = energy_density(rho).unwrap().energy_density;
        assert!((e / continuum_energy_density(rho) - 1.0).abs() < 0.05);
        assert!((e0(rho, 0.0).unwrap() - e).abs() < 1e-15);
    }

    #[test]
    fn plane_index_set_has_l_plus_one_members() {
        for l in 2..10 {
            let idx: Vec<i64> = plane_indices(l).collect();
            assert_eq!(idx.len(), l + 1);
            assert!(idx[0] as f64 >= -(l as f64) / 2.0);
            assert!(*idx.last().unwrap() as f64 <= (l as f64 + 1.0) / 2.0);
        }
    }

    #[test]
    fn plane_waves_are_orthonormal() {
        let s = box_modes(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = s.modes[rng.gen_range(0..s.modes.len())].m;
            let b = s.modes[rng.gen_range(0..s.modes.len())].m;
            let v = s.plane_wave(a).inner(&s.plane_wave(b));
            let target = if a == b { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(target, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mode_sum_reproduces_kinetic_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in [4usize, 5] {
            let s = box_modes(l).unwrap();
            let interior = BoxRegion::uniform(1, l as i64 - 1).unwrap();
            let psi = LatticeField::from_fn(interior, |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let direct = -psi.inner(&laplacian_apply(&psi)).re;
            let modes = s.kinetic_mode_sum(&psi);
            assert!((direct - modes).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn dirichlet_ground_mode_and_free_energy() {
        for l in [3usize, 5, 8] {
            let m = dirichlet_modes(l);
            assert_eq!(m.len(), (l - 1).pow(3));
            let e = 6.0 * (1.0 - (PI / l as f64).cos());
            assert!((m[0].energy - e).abs() < 1e-14);
            let f = free_ground_energy(1, 0, l).unwrap();
            assert!((f.energy - e).abs() < 1e-14);
            assert!(!f.degenerate);
        }
        // the second level is threefold
        assert!(free_ground_energy(2, 0, 5).unwrap().degenerate);
        assert!(!free_ground_energy(4, 4, 5).unwrap().degenerate);
        assert!(free_ground_energy(65, 0, 5).is_err());
    }

    #[test]
    fn dirichlet_sea_closes_shells() {
        let sea = dirichlet_sea(2, 5).unwrap();
        assert_eq!(sea.modes.len(), 4);
        assert!(!sea.closed_shell);
        assert!(dirichlet_sea(4, 5).unwrap().closed_shell);
    }

    #[test]
    fn effective_volume_closed_form() {
        for l in [4usize, 7, 12] {
            let v = pair_effective_volume(l);
            assert!((v - (2.0 * l as f64 / 3.0).powi(3)).abs() < 1e-9 * v);
        }
    }

    #[test]
    fn full_projection() {
        let p = xi_projection(125, 4).unwrap();
        assert_eq!(p.rank, 125);
        assert!(xi_projection(1, 4).unwrap().rank >= 1);
    }
}

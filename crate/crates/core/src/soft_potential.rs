//! Momentum filters, soft potentials and numerical certification of the
//! Dyson-type operator inequality on a periodic box of side `Λ`.
//!
//! The inequality certified is
//!
//! ```text
//! C_h† [∇†θ_A∇]_s C_h + (g/2) δ_0  ≥  4πa [ (1-ε)(1-η) U - W/ε - C_V V/η ]
//! ```
//!
//! with `A = A(R)`, `U = (2R+1)^{-3} θ_A`, `W = 16π f_R Σ f_R` and
//! `V = (2R+1)^{-3} (θ_A - P_A)`. Infinite coupling restricts both sides to
//! `ψ(0) = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::{lowest_eigenpair, random_start, LanczosOptions, LinearOperator};
use crate::error::{invalid, Error, Result};
use crate::ideal_fermi::fermi_energy;
use crate::lattice::{
    dispersion, fft3, grid_momentum, inverse_dft, BoxRegion, LatticeField, LatticePoint,
    SpectralGrid,
};
use crate::scattering::{Coupling, ScatteringParams};

/// Radial cutoff `l`: 0 below 1, 1 above 2, quintic smoothstep between.
#[derive(Clone, Copy, Debug, Default)]
pub struct CutoffProfile;

pub fn build_cutoff() -> CutoffProfile {
    CutoffProfile
}

impl CutoffProfile {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 1.0 {
            0.0
        } else if t >= 2.0 {
            1.0
        } else {
            let u = t - 1.0;
            u * u * u * (10.0 + u * (6.0 * u - 15.0))
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= 1.0 || t >= 2.0 {
            0.0
        } else {
            let u = t - 1.0;
            30.0 * u * u * (u - 1.0) * (u - 1.0)
        }
    }
}

fn grid_radius(period: usize, index: usize) -> f64 {
    let p = grid_momentum(period, index);
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// `ĥ_s(p) = l(s|p|)` and its complement on the period-`Λ` grid.
#[derive(Clone, Debug)]
pub struct FilterPair {
    /// `None` for the trivial filter `ĥ ≡ 1`.
    pub s: Option<f64>,
    pub lambda: usize,
    pub h_hat: Vec<f64>,
    /// `h'_s` in real space (periodic).
    pub h_prime: LatticeField<f64>,
    /// `Σ_x |h'_s(x)|`.
    pub l1_norm: f64,
    /// `Σ_x h'_s(x)`, equal to `ĥ'_s(0) = 1` for a proper filter.
    pub mass: f64,
    /// Largest `|h'_s|` on the faces of the box: the truncation proxy.
    pub truncation: f64,
    /// Largest imaginary part discarded after the inverse transform.
    pub imag_residue: f64,
}

impl FilterPair {
    pub fn is_trivial(&self) -> bool {
        self.s.is_none()
    }

    /// `ĥ ≡ 1`, `h' = 0`.
    pub fn trivial(lambda: usize) -> Result<Self> {
        let h_prime = LatticeField::periodic_zeros(lambda)?;
        Ok(FilterPair {
            s: None,
            lambda,
            h_hat: vec![1.0; lambda.pow(3)],
            h_prime,
            l1_norm: 0.0,
            mass: 0.0,
            truncation: 0.0,
            imag_residue: 0.0,
        })
    }
}

pub fn build_filter(s: f64, lambda: usize) -> Result<FilterPair> {
    if !(s >= 1.0) {
        return Err(invalid("s", format!("filter scale must be >= 1, got {s}")));
    }
    if (lambda as f64) < 8.0 * s {
        return Err(invalid(
            "Lambda",
            format!(
                "period {lambda} cannot resolve |p| <= 2/s for s = {s}; need at least {}",
                (8.0 * s).ceil()
            ),
        ));
    }
    let l = build_cutoff();
    let h_hat: Vec<f64> = (0..lambda.pow(3))
        .map(|i| l.eval(s * grid_radius(lambda, i)))
        .collect();
    let spec = SpectralGrid::from_fn(lambda, |_| Complex64::default())?;
    let mut spec = spec;
    for (v, h) in spec.values_mut().iter_mut().zip(&h_hat) {
        *v = Complex64::new(1.0 - h, 0.0);
    }
    let complex = inverse_dft(&spec);
    let imag_residue = complex
        .values()
        .iter()
        .map(|v| v.im.abs())
        .fold(0.0, f64::max);
    let h_prime = complex.map(|v| v.re);
    let l1_norm = h_prime.values().iter().map(|v| v.abs()).sum();
    let mass = h_prime.values().iter().sum();
    let half = (lambda / 2) as i64;
    let truncation = h_prime
        .region()
        .points()
        .zip(h_prime.values())
        .filter(|(x, _)| x.0.contains(&half))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    Ok(FilterPair {
        s: Some(s),
        lambda,
        h_hat,
        h_prime,
        l1_norm,
        mass,
        truncation,
        imag_residue,
    })
}

/// `M̂(p) = √[1 - E_f(ρ_u)/E(p)]_+` and `M̂' = √(1 - M̂²)` on the grid.
#[derive(Clone, Debug)]
pub struct MomentumSplit {
    pub rho_u: f64,
    pub fermi_energy: f64,
    pub lambda: usize,
    pub m_hat: Vec<f64>,
    pub m_prime: Vec<f64>,
}

impl MomentumSplit {
    pub fn new(rho_u: f64, lambda: usize) -> Result<Self> {
        let ef = fermi_energy(rho_u)?;
        let m_hat: Vec<f64> = (0..lambda.pow(3))
            .map(|i| {
                let e = dispersion(grid_momentum(lambda, i));
                if e <= 0.0 {
                    0.0
                } else {
                    (1.0 - ef / e).max(0.0).sqrt()
                }
            })
            .collect();
        let m_prime = m_hat
            .iter()
            .map(|m| (1.0 - m * m).max(0.0).sqrt())
            .collect();
        Ok(MomentumSplit {
            rho_u,
            fermi_energy: ef,
            lambda,
            m_hat,
            m_prime,
        })
    }
}

/// Applies the real even multiplier `mult` to a periodic field.
pub fn apply_multiplier(mult: &[f64], f: &LatticeField<f64>) -> Result<LatticeField<f64>> {
    let period = f
        .period()
        .ok_or_else(|| invalid("field", "multiplier needs a periodic field"))?;
    if mult.len() != period.pow(3) {
        return Err(invalid("field", "multiplier and field differ in period"));
    }
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(&mut data, period, false);
    data.iter_mut().zip(mult).for_each(|(v, m)| *v *= m);
    fft3(&mut data, period, true);
    LatticeField::periodic_from_values(period, data.into_iter().map(|v| v.re).collect())
}

/// `⟨ψ|-Δ|ψ⟩` against `⟨C_Mψ|-Δ|C_Mψ⟩ + ⟨C_M'ψ|-Δ|C_M'ψ⟩`, both evaluated
/// with the real-space stencil; returns `(lhs, rhs)`.
pub fn momsep_check(split: &MomentumSplit, psi: &LatticeField<f64>) -> Result<(f64, f64)> {
    let kinetic = |f: &LatticeField<f64>| -f.inner(&crate::lattice::laplacian_apply(f));
    let a = apply_multiplier(&split.m_hat, psi)?;
    let b = apply_multiplier(&split.m_prime, psi)?;
    Ok((kinetic(psi), kinetic(&a) + kinetic(&b)))
}

/// Lowest eigenvalue of `-C_M†ΔC_M - factor·(-C_h†ΔC_h)`. Both operators
/// are diagonal in the plane-wave basis of the box, so the spectrum is
/// `E(p)(M̂(p)² - factor·ĥ(p)²)` over the grid.
pub fn implcor_min_eig(split: &MomentumSplit, pair: &FilterPair, factor: f64) -> Result<f64> {
    if split.lambda != pair.lambda {
        return Err(invalid(
            "Lambda",
            "split and filter live on different grids",
        ));
    }
    Ok((0..pair.lambda.pow(3))
        .map(|i| {
            let e = dispersion(grid_momentum(pair.lambda, i));
            e * (split.m_hat[i].powi(2) - factor * pair.h_hat[i].powi(2))
        })
        .fold(f64::INFINITY, f64::min))
}

/// Sliding max (or min) over a centered window of half-width `r` along one
/// axis of a periodic cube.
fn sliding_extreme(data: &[f64], n: usize, axis: usize, r: usize, max: bool) -> Vec<f64> {
    let stride = n.pow(2 - axis as u32);
    let mut out = vec![0.0; data.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let c = (flat / stride) % n;
        let base = flat - c * stride;
        let mut best = if max {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
        for d in 0..=2 * r {
            let k = (c + n * (r + 1) + d - r) % n;
            let v = data[base + k * stride];
            best = if max { best.max(v) } else { best.min(v) };
        }
        *o = best;
    }
    out
}

/// `f_r(x) = max_{y ∈ x + A(r)} |h'(y) - h'(x)|` on the periodic box. The
/// cube max and min are separable, so each costs three one-axis passes.
pub fn f_r_compute(pair: &FilterPair, r: u32) -> Result<LatticeField<f64>> {
    if r < 1 {
        return Err(invalid("r", "radius must be >= 1"));
    }
    let n = pair.lambda;
    let r = r as usize;
    if 2 * r + 1 > n {
        return Err(invalid("r", "cube A(r) wraps around the periodic box"));
    }
    let h = pair.h_prime.values();
    let mut hi = h.to_vec();
    let mut lo = h.to_vec();
    for axis in 0..3 {
        hi = sliding_extreme(&hi, n, axis, r, true);
        lo = sliding_extreme(&lo, n, axis, r, false);
    }
    let values = h
        .iter()
        .zip(hi.iter().zip(&lo))
        .map(|(&v, (&mx, &mn))| (mx - v).max(v - mn))
        .collect();
    LatticeField::periodic_from_values(n, values)
}

/// `U`, `W`, `V` and the parameters of the right-hand side.
#[derive(Clone, Debug)]
pub struct SoftPotentialSet {
    pub r: u32,
    pub eps: f64,
    pub eta: f64,
    /// `(2R+1)^{-3}`: the value of `U` on `A(R)` and the scale of `V`.
    pub u_value: f64,
    pub f_r: LatticeField<f64>,
    /// `W(x) = 16π f_R(x) Σ_y f_R(y)` on the periodic box.
    pub w: LatticeField<f64>,
}

impl SoftPotentialSet {
    pub fn region(&self) -> BoxRegion {
        BoxRegion::centered(self.r)
    }

    /// `U` as a field on `A(R)`.
    pub fn u(&self) -> LatticeField<f64> {
        LatticeField::from_fn(self.region(), |_| self.u_value)
    }

    /// `V ψ = (2R+1)^{-3} θ_A (ψ - mean_A ψ)`.
    pub fn v_apply(&self, psi: &LatticeField<f64>) -> LatticeField<f64> {
        let a = self.region();
        let mean = a.points().map(|x| psi.get(x)).sum::<f64>() / a.len() as f64;
        LatticeField::from_fn(a, |x| self.u_value * (psi.get(x) - mean))
    }
}

pub fn build_soft_set(pair: &FilterPair, r: u32, eps: f64, eta: f64) -> Result<SoftPotentialSet> {
    if r < 1 {
        return Err(invalid("R", "radius must be >= 1"));
    }
    for (name, v) in [("eps", eps), ("eta", eta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(invalid(name, format!("must lie in (0,1), got {v}")));
        }
    }
    let f_r = f_r_compute(pair, r)?;
    let total: f64 = f_r.values().iter().sum();
    let w = f_r.map(|v| 16.0 * PI * v * total);
    Ok(SoftPotentialSet {
        r,
        eps,
        eta,
        u_value: (2.0 * r as f64 + 1.0).powi(-3),
        f_r,
        w,
    })
}

/// The three quantities bounded by the W-scaling laws.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WScaling {
    pub r: u32,
    pub s: f64,
    pub lambda: usize,
    pub w_max: f64,
    pub w_sum: f64,
    /// `max_x Σ_i W(x - y_i)` for a cubic array of centres with spacing
    /// above `2√3 R`.
    pub separated_max: f64,
    pub spacing: usize,
}

/// Smallest divisor of `lambda` strictly above `2√3 R`.
fn lattice_spacing(lambda: usize, r: u32) -> Option<usize> {
    let need = 2.0 * 3f64.sqrt() * r as f64;
    (1..=lambda).find(|d| lambda.is_multiple_of(*d) && *d as f64 > need && 2 * d <= lambda)
}

pub fn w_scaling(pair: &FilterPair, r: u32) -> Result<WScaling> {
    let set = build_soft_set(pair, r, 0.5, 0.5)?;
    let n = pair.lambda;
    let w = set.w.values();
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let w_sum = w.iter().sum();
    let spacing = lattice_spacing(n, r)
        .ok_or_else(|| invalid("Lambda", "no separated lattice fits the box"))?;
    // periodic sum over the centre lattice folds W onto one cell
    let mut cell = vec![0.0; spacing.pow(3)];
    for (p, &v) in BoxRegion::periodic_domain(n).points().zip(w) {
        let c = p.0.map(|x| x.rem_euclid(spacing as i64) as usize);
        cell[(c[0] * spacing + c[1]) * spacing + c[2]] += v;
    }
    let separated_max = cell.iter().copied().fold(0.0, f64::max);
    Ok(WScaling {
        r,
        s: pair.s.unwrap_or(f64::INFINITY),
        lambda: n,
        w_max,
        w_sum,
        separated_max,
        spacing,
    })
}

/// Least-squares exponents of `log Q = c + α log R + β log s` for the
/// three W quantities.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub points: Vec<WScaling>,
    /// `(α, β)` for `max W`, `Σ W` and the separated sum.
    pub w_max_exponents: (f64, f64),
    pub w_sum_exponents: (f64, f64),
    pub separated_exponents: (f64, f64),
    /// Every fitted exponent within 20% of `(2,-5)`, `(2,-2)`, `(-1,-2)`.
    pub within_20pct: bool,
}

fn fit_exponents(points: &[WScaling], q: impl Fn(&WScaling) -> f64) -> (f64, f64) {
    // normal equations for [1, log R, log s]
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for p in points {
        let row = nalgebra::Vector3::new(1.0, (p.r as f64).ln(), p.s.ln());
        ata += row * row.transpose();
        atb += row * q(p).ln();
    }
    match ata.lu().solve(&atb) {
        Some(x) => (x[1], x[2]),
        None => (f64::NAN, f64::NAN),
    }
}

/// Sweeps `(R, s)`, with `Λ = lambda_factor·s` rounded up to even, and fits
/// the exponents.
pub fn scaling_report(rs: &[u32], ss: &[f64], lambda_factor: usize) -> Result<ScalingReport> {
    let mut points = Vec::new();
    for &s in ss {
        let lambda = ((lambda_factor as f64 * s).ceil() as usize).next_multiple_of(2);
        let pair = build_filter(s, lambda)?;
        for &r in rs {
            if (r as f64) > s {
                return Err(invalid("R", "scaling laws need R <= s"));
            }
            points.push(w_scaling(&pair, r)?);
        }
    }
    let w_max_exponents = fit_exponents(&points, |p| p.w_max);
    let w_sum_exponents = fit_exponents(&points, |p| p.w_sum);
    let separated_exponents = fit_exponents(&points, |p| p.separated_max);
    let close = |got: (f64, f64), want: (f64, f64)| {
        ((got.0 - want.0) / want.0).abs() <= 0.2 && ((got.1 - want.1) / want.1).abs() <= 0.2
    };
    let within_20pct = close(w_max_exponents, (2.0, -5.0))
        && close(w_sum_exponents, (2.0, -2.0))
        && close(separated_exponents, (-1.0, -2.0));
    Ok(ScalingReport {
        points,
        w_max_exponents,
        w_sum_exponents,
        separated_exponents,
        within_20pct,
    })
}

/// Verdict of one certification run.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationReport {
    pub g: String,
    pub r: u32,
    pub s: Option<f64>,
    pub eps: f64,
    pub eta: f64,
    pub c_v: f64,
    pub lambda: usize,
    pub centres: usize,
    /// Lowest eigenvalue of `LHS - RHS`.
    pub min_eig: f64,
    /// Lowest eigenvalue on the sites the operator can touch; equals
    /// `min_eig` unless the rest of the box contributes the eigenvalue 0.
    pub active_min_eig: f64,
    /// Largest eigenvalue of `LHS` (Lanczos estimate).
    pub lhs_norm: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Relative certification tolerance: pass iff `min_eig ≥ -CERT_TOL·‖LHS‖`.
pub const CERT_TOL: f64 = 1e-10;

enum Kinetic {
    /// Weighted bonds `(i, j, w)` of the symmetrized Neumann form.
    Bonds(Vec<(usize, usize, f64)>),
    /// Full periodic `-Δ`.
    Laplacian,
}

/// `LHS - RHS` (or `±LHS` alone) restricted to an active set of sites.
struct InequalityOperator {
    n: usize,
    active: Vec<usize>,
    slot: Vec<u32>,
    filter: Option<Vec<f64>>,
    kinetic: Kinetic,
    /// Multiplication part, indexed by flat site.
    diag: Vec<f64>,
    /// `-c · |θ_B⟩⟨θ_B|` terms, flat site lists.
    rank_one: Vec<(Vec<usize>, f64)>,
    sign: f64,
}

const INACTIVE: u32 = u32::MAX;

fn flat(n: usize, p: LatticePoint) -> usize {
    let q = p.wrap(n);
    ((q.0[0] as usize * n) + q.0[1] as usize) * n + q.0[2] as usize
}

fn neighbor(n: usize, idx: usize, axis: usize) -> usize {
    let stride = n.pow(2 - axis as u32);
    let c = (idx / stride) % n;
    if c + 1 == n {
        idx + stride - n * stride
    } else {
        idx + stride
    }
}

impl InequalityOperator {
    fn convolve(&self, buf: &mut [Complex64]) {
        if let Some(h) = &self.filter {
            fft3(buf, self.n, false);
            buf.iter_mut().zip(h).for_each(|(v, m)| *v *= m);
            fft3(buf, self.n, true);
        }
    }
}

impl LinearOperator for InequalityOperator {
    fn dim(&self) -> usize {
        self.active.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let total = self.n.pow(3);
        let mut psi = vec![0.0; total];
        for (&site, &v) in self.active.iter().zip(x) {
            psi[site] = v;
        }
        let mut kin_in: Vec<Complex64> = psi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.convolve(&mut kin_in);
        let mut kin_out = vec![Complex64::default(); total];
        match &self.kinetic {
            Kinetic::Bonds(bonds) => {
                for &(i, j, w) in bonds {
                    let d = kin_in[i] - kin_in[j];
                    kin_out[i] += d * w;
                    kin_out[j] -= d * w;
                }
            }
            Kinetic::Laplacian => {
                for i in 0..total {
                    for axis in 0..3 {
                        let j = neighbor(self.n, i, axis);
                        let d = kin_in[i] - kin_in[j];
                        kin_out[i] += d;
                        kin_out[j] -= d;
                    }
                }
            }
        }
        self.convolve(&mut kin_out);
        let mut out: Vec<f64> = kin_out
            .iter()
            .zip(&psi)
            .zip(&self.diag)
            .map(|((k, p), d)| k.re + d * p)
            .collect();
        for (sites, c) in &self.rank_one {
            let s: f64 = sites.iter().map(|&i| psi[i]).sum();
            for &i in sites {
                out[i] -= c * s;
            }
        }
        for (yi, &site) in y.iter_mut().zip(&self.active) {
            *yi = self.sign * out[site];
        }
    }
}

struct Centre {
    at: LatticePoint,
}

/// Builds `LHS - RHS` for centres `y_i`; `neumann` selects the Lemma form
/// (single centre at the origin) over the full Laplacian.
#[allow(clippy::too_many_arguments)]
fn build_operator(
    params: &ScatteringParams,
    pair: &FilterPair,
    set: &SoftPotentialSet,
    centres: &[Centre],
    c_v: f64,
    neumann: bool,
    lhs_only: bool,
) -> Result<InequalityOperator> {
    let n = pair.lambda;
    let total = n.pow(3);
    let r = set.r as i64;
    let four_pi_a = 4.0 * PI * params.a;
    let a_region = set.region();
    let mut diag = vec![0.0; total];
    let mut rank_one = Vec::new();
    let mut removed = vec![false; total];
    for c in centres {
        let origin = flat(n, c.at);
        match params.g {
            Coupling::Infinite => removed[origin] = true,
            Coupling::Finite(g) => diag[origin] += 0.5 * g,
        }
        if lhs_only {
            continue;
        }
        let sites: Vec<usize> = a_region.points().map(|x| flat(n, x + c.at)).collect();
        let u_coef = four_pi_a * (1.0 - set.eps) * (1.0 - set.eta) * set.u_value;
        let v_coef = four_pi_a * c_v / set.eta * set.u_value;
        for &i in &sites {
            diag[i] += -u_coef + v_coef;
        }
        rank_one.push((sites.clone(), v_coef / sites.len() as f64));
        if !pair.is_trivial() {
            for (p, &w) in BoxRegion::periodic_domain(n).points().zip(set.w.values()) {
                diag[flat(n, p + c.at)] += four_pi_a * w / set.eps;
            }
        }
    }
    let kinetic = if neumann {
        let inside = |p: LatticePoint| p.sup_norm() <= r;
        let mut bonds = Vec::new();
        for x in BoxRegion::centered(set.r + 1).points() {
            for axis in 0..3 {
                let y = x.shifted(axis, 1);
                let w = 0.5 * (inside(x) as u8 as f64 + inside(y) as u8 as f64);
                if w > 0.0 {
                    bonds.push((flat(n, x), flat(n, y), w));
                }
            }
        }
        Kinetic::Bonds(bonds)
    } else {
        Kinetic::Laplacian
    };
    // the trivial Lemma operator vanishes identically off A(R+1)
    let active: Vec<usize> = if neumann && pair.is_trivial() {
        let mut v: Vec<usize> = BoxRegion::centered(set.r + 1)
            .points()
            .map(|p| flat(n, p))
            .collect();
        v.sort_unstable();
        v
    } else {
        (0..total).collect()
    };
    let active: Vec<usize> = active.into_iter().filter(|&i| !removed[i]).collect();
    let mut slot = vec![INACTIVE; total];
    for (k, &i) in active.iter().enumerate() {
        slot[i] = k as u32;
    }
    // rank-one terms act only through active sites
    let rank_one = rank_one
        .into_iter()
        .map(|(sites, c): (Vec<usize>, f64)| {
            (
                sites.into_iter().filter(|&i| slot[i] != INACTIVE).collect(),
                c,
            )
        })
        .collect();
    Ok(InequalityOperator {
        n,
        active,
        slot,
        filter: if pair.is_trivial() {
            None
        } else {
            Some(pair.h_hat.clone())
        },
        kinetic,
        diag,
        rank_one,
        sign: 1.0,
    })
}

const CERT_SEED: u64 = 0x5eed_d150;

fn lowest(op: &InequalityOperator, tol: f64) -> Result<(f64, f64)> {
    let start = random_start(op.dim(), CERT_SEED, |_| true);
    let opts = LanczosOptions {
        tol,
        krylov_dim: 60,
        max_restarts: 400,
        want_vector: false,
        ..Default::default()
    };
    let pair = lowest_eigenpair(op, &start, &opts)?;
    Ok((pair.value, pair.residual))
}

#[allow(clippy::too_many_arguments)]
fn certify(
    params: &ScatteringParams,
    pair: &FilterPair,
    set: &SoftPotentialSet,
    centres: &[Centre],
    c_v: f64,
    neumann: bool,
) -> Result<CertificationReport> {
    let n = pair.lambda;
    // the trivial Lemma operator is exact on A(R+1); anything else sees the torus
    let exact_block = neumann && pair.is_trivial();
    let need = if exact_block {
        2 * set.r as usize + 3
    } else {
        8 * set.r as usize
    };
    if n < need || pair.s.is_some_and(|s| (n as f64) < 8.0 * s) {
        return Err(invalid(
            "Lambda",
            format!("need Lambda >= {need} and >= 8s for this operator, got {n}"),
        ));
    }
    if !(c_v >= 0.0) {
        return Err(invalid("C_V", "must be nonnegative"));
    }
    let op = build_operator(params, pair, set, centres, c_v, neumann, false)?;
    let (block_min, residual) = lowest(&op, 1e-11)?;
    // sites outside the active block carry the eigenvalue 0
    let covers_box = op.active.len() + centres.len() >= n.pow(3) || !exact_block;
    let min_eig = if covers_box {
        block_min
    } else {
        block_min.min(0.0)
    };
    let mut lhs = build_operator(params, pair, set, centres, c_v, neumann, true)?;
    lhs.sign = -1.0;
    let (neg_top, _) = lowest(&lhs, 1e-6)?;
    let lhs_norm = -neg_top;
    debug_assert!(lhs.slot.len() == n.pow(3));
    Ok(CertificationReport {
        g: params.g.to_string(),
        r: set.r,
        s: pair.s,
        eps: set.eps,
        eta: set.eta,
        c_v,
        lambda: n,
        centres: centres.len(),
        min_eig,
        active_min_eig: block_min,
        lhs_norm,
        residual,
        pass: min_eig >= -CERT_TOL * lhs_norm,
    })
}

/// Certifies the single-centre inequality with the Neumann form on `A(R)`.
pub fn certify_lemma1(
    params: &ScatteringParams,
    pair: &FilterPair,
    set: &SoftPotentialSet,
    c_v: f64,
) -> Result<CertificationReport> {
    certify(
        params,
        pair,
        set,
        &[Centre {
            at: LatticePoint::ORIGIN,
        }],
        c_v,
        true,
    )
}

/// Minimum-image Euclidean distance on the period-`n` torus.
fn torus_distance(n: usize, a: LatticePoint, b: LatticePoint) -> f64 {
    let n = n as i64;
    let d = (a - b).0.map(|c| {
        let c = c.rem_euclid(n);
        c.min(n - c) as f64
    });
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Certifies the many-centre inequality with the full Laplacian; centres
/// must be more than `2√3 R` apart on the torus.
pub fn certify_corollary(
    params: &ScatteringParams,
    pair: &FilterPair,
    set: &SoftPotentialSet,
    centres: &[LatticePoint],
    c_v: f64,
) -> Result<CertificationReport> {
    if centres.is_empty() {
        return Err(invalid("centres", "need at least one centre"));
    }
    let required = 2.0 * 3f64.sqrt() * set.r as f64;
    for i in 0..centres.len() {
        for j in i + 1..centres.len() {
            let distance = torus_distance(pair.lambda, centres[i], centres[j]);
            if distance <= required {
                return Err(Error::Separation {
                    i,
                    j,
                    distance,
                    required,
                });
            }
        }
    }
    let cs: Vec<Centre> = centres.iter().map(|&at| Centre { at }).collect();
    certify(params, pair, set, &cs, c_v, false)
}

/// Geometric `C_V` grid `10^{k/4}`, `k = lo..=hi`.
pub fn cv_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powf(k as f64 / 4.0)).collect()
}

/// Runs the Lemma certification over `c_vs` (ascending) and returns every
/// report together with the smallest passing `C_V`. Larger `C_V` only
/// weakens the right-hand side, so the scan stops at the first pass.
pub fn scan_cv(
    params: &ScatteringParams,
    pair: &FilterPair,
    set: &SoftPotentialSet,
    c_vs: &[f64],
) -> Result<(Vec<CertificationReport>, Option<f64>)> {
    let mut out = Vec::new();
    for &c in c_vs {
        let rep = certify_lemma1(params, pair, set, c)?;
        let pass = rep.pass;
        out.push(rep);
        if pass {
            return Ok((out, Some(c)));
        }
    }
    Ok((out, None))
}

/// `[1 - E_f(ρ_u)/min_{|p|≥1/s} E(p)]_+` and its small-density proxy.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SesMargin {
    pub factor: f64,
    /// `min_{|p| ≥ 1/s} E(p) = 2(1 - cos(1/s))`, attained on an axis.
    pub min_energy: f64,
    pub fermi_energy: f64,
    /// `c` in `1 - c s² ρ^{2/3}`, from `E_f ≈ (6π²ρ)^{2/3}` and `min E ≈ s^{-2}`.
    pub proxy_constant: f64,
    pub proxy: f64,
}

pub fn ses_margin(s: f64, rho_u: f64) -> Result<SesMargin> {
    if !(s >= 1.0) {
        return Err(invalid("s", "filter scale must be >= 1"));
    }
    let ef = fermi_energy(rho_u)?;
    // E grows along every ray in the zone, so the minimum sits on |p| = 1/s
    // where E is smallest along a coordinate axis
    let min_energy = 2.0 * (1.0 - (1.0 / s).cos());
    let factor = (1.0 - ef / min_energy).max(0.0);
    let c = (6.0 * PI * PI).powf(2.0 / 3.0);
    Ok(SesMargin {
        factor,
        min_energy,
        fermi_energy: ef,
        proxy_constant: c,
        proxy: 1.0 - c * s * s * rho_u.powf(2.0 / 3.0),
    })
}

/// Parameter choices as functions of `a` and `ρ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamChoice {
    pub r_exact: f64,
    pub r: u32,
    pub s: f64,
    pub eps: f64,
    pub eta: f64,
    pub delta: f64,
    /// `0 < ε = η = δ < 1`.
    pub eps_valid: bool,
    /// `(aρ^{1/3})^{1/10} ≥ ρ^{1/3}`.
    pub smallness_ok: bool,
    /// `1 ≤ R ≤ s`.
    pub r_below_s: bool,
}

pub fn param_heuristics(a: f64, rho: f64) -> Result<ParamChoice> {
    if !(a > 0.0) || !(rho > 0.0) {
        return Err(invalid("a", "a and rho must be positive"));
    }
    let x = a.powi(3) * rho;
    let cube = rho.powf(-1.0 / 3.0);
    let r_exact = cube * x.powf(1.0 / 30.0);
    let s = cube * x.powf(1.0 / 90.0);
    let e = x.powf(1.0 / 45.0);
    let r = r_exact.round().max(1.0) as u32;
    Ok(ParamChoice {
        r_exact,
        r,
        s,
        eps: e,
        eta: e,
        delta: e,
        eps_valid: e > 0.0 && e < 1.0,
        smallness_ok: (a * rho.cbrt()).powf(0.1) >= rho.cbrt(),
        r_below_s: r >= 1 && (r as f64) <= s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{assemble_dense, dense_eigenvalues};

    const GAMMA: f64 = 0.126_365_504_929_331_5;

    #[test]
    fn cutoff_profile_endpoints() {
        let l = build_cutoff();
        assert_eq!(l.eval(1.0), 0.0);
        assert_eq!(l.eval(2.0), 1.0);
        assert!((l.eval(1.5) - 0.5).abs() < 1e-15);
        let h = 1e-7;
        assert!(((l.eval(1.0 + h) - l.eval(1.0)) / h).abs() < 1e-6);
        assert!(((l.eval(2.0) - l.eval(2.0 - h)) / h).abs() < 1e-6);
        for i in 0..100 {
            let t = 1.0 + i as f64 / 100.0;
            assert!(l.eval(t + 0.01) >= l.eval(t));
            let fd = (l.eval(t + 1e-6) - l.eval(t - 1e-6)) / 2e-6;
            assert!((fd - l.derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn filter_mass_and_support() {
        let f = build_filter(4.0, 32).unwrap();
        assert!((f.mass - 1.0).abs() < 1e-12);
        assert!(f.imag_residue < 1e-12);
        for (i, &h) in f.h_hat.iter().enumerate() {
            assert!((0.0..=1.0).contains(&h));
            if grid_radius(32, i) >= 0.5 {
                assert_eq!(h, 1.0);
            }
        }
        assert!(build_filter(4.0, 16).is_err());
    }

    #[test]
    fn f_r_matches_brute_force() {
        let f = build_filter(2.0, 16).unwrap();
        let fr = f_r_compute(&f, 2).unwrap();
        let dom = BoxRegion::periodic_domain(16);
        for x in dom.points().step_by(37) {
            let hx = f.h_prime.get(x);
            let brute = BoxRegion::centered(2)
                .points()
                .map(|d| (f.h_prime.get(x + d) - hx).abs())
                .fold(0.0, f64::max);
            assert!((brute - fr.get(x)).abs() < 1e-15);
        }
        let fr3 = f_r_compute(&f, 3).unwrap();
        assert!(fr3.values().iter().zip(fr.values()).all(|(a, b)| a >= b));
    }

    #[test]
    fn trivial_filter_has_no_w() {
        let f = FilterPair::trivial(16).unwrap();
        let set = build_soft_set(&f, 2, 0.5, 0.5).unwrap();
        assert!(set.w.values().iter().all(|&v| v == 0.0));
        assert!((set.u().values().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let ones = LatticeField::from_fn(BoxRegion::centered(2), |_| 1.0);
        assert!(set.v_apply(&ones).values().iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn lemma_operator_matches_dense_oracle() {
        let params = ScatteringParams::new(Coupling::Infinite, GAMMA).unwrap();
        let f = FilterPair::trivial(16).unwrap();
        let set = build_soft_set(&f, 2, 0.5, 0.5).unwrap();
        let op = build_operator(
            &params,
            &f,
            &set,
            &[Centre {
                at: LatticePoint::ORIGIN,
            }],
            1.0,
            true,
            false,
        )
        .unwrap();
        let m = assemble_dense(&op);
        assert!((&m - m.transpose()).amax() < 1e-14);
        let dense = dense_eigenvalues(m)[0];
        let (lz, _) = lowest(&op, 1e-11).unwrap();
        assert!((dense - lz).abs() < 1e-9, "{dense} vs {lz}");
    }

    #[test]
    fn lhs_is_positive_semidefinite() {
        let params = ScatteringParams::new(Coupling::Finite(2.0), GAMMA).unwrap();
        let f = build_filter(2.0, 16).unwrap();
        let set = build_soft_set(&f, 1, 0.5, 0.5).unwrap();
        let op = build_operator(
            &params,
            &f,
            &set,
            &[Centre {
                at: LatticePoint::ORIGIN,
            }],
            1.0,
            true,
            true,
        )
        .unwrap();
        let (v, _) = lowest(&op, 1e-10).unwrap();
        assert!(v >= -1e-10);
    }

    #[test]
    fn separation_is_enforced() {
        let params = ScatteringParams::new(Coupling::Infinite, GAMMA).unwrap();
        let f = FilterPair::trivial(16).unwrap();
        let set = build_soft_set(&f, 2, 0.5, 0.5).unwrap();
        let err = certify_corollary(
            &params,
            &f,
            &set,
            &[LatticePoint::ORIGIN, LatticePoint::new(3, 0, 0)],
            1.0,
        );
        assert!(matches!(err, Err(Error::Separation { .. })));
    }

    #[test]
    fn ses_margin_examples() {
        assert_eq!(ses_margin(4.0, 0.0).unwrap().factor, 1.0);
        let m = ses_margin(4.0, 1e-5).unwrap();
        assert!(m.factor > 0.8 && m.factor <= 1.0);
        assert!((0.0..=1.0).contains(&ses_margin(4.0, 1e-3).unwrap().factor));
    }

    #[test]
    fn heuristics_examples() {
        let p = param_heuristics(0.3, 1e-3).unwrap();
        assert_eq!(p.r, 7);
        assert!((p.s - 8.897).abs() < 1e-2);
        assert!(p.eps_valid && p.r_below_s);
        let q = param_heuristics(1.0, 1.0).unwrap();
        assert!((q.eps - 1.0).abs() < 1e-15);
        assert!(!q.eps_valid);
    }

    #[test]
    fn momentum_split_is_a_partition_of_unity() {
        let s = MomentumSplit::new(0.05, 8).unwrap();
        for (m, mp) in s.m_hat.iter().zip(&s.m_prime) {
            assert!((m * m + mp * mp - 1.0).abs() < 1e-14);
        }
    }
}

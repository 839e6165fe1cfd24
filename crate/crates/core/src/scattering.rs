//! Green's constant, scattering length and the zero-energy scattering
//! solution of the on-site interaction `g δ_{x,0}`.
//!
//! Conventions: `E(p) = 2Σ(1 - cos p^i)` is the symbol of `-Δ`, the Green's
//! constant is `γ = (2π)^{-3} ∫ dk / (2E(k))` over the Brillouin zone, and
//! the scattering length is `a = g / (8π(gγ + 1))` (`1/(8πγ)` when the
//! coupling is infinite). The scattering solution is `φ = 1 - 4πa G` with
//! `G` the lattice Green's function of `-Δ`, so `G(0) = 2γ`.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{laplacian_apply, BoxRegion, LatticeField, LatticePoint};
use crate::quad::GaussLegendre;

/// Non-negative on-site coupling; `+∞` is a value of its own (hard core).
/// Serialized as a number, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "CouplingRepr", try_from = "CouplingRepr")]
pub enum Coupling {
    Finite(f64),
    Infinite,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CouplingRepr {
    Number(f64),
    Text(String),
}

impl From<Coupling> for CouplingRepr {
    fn from(g: Coupling) -> Self {
        match g {
            Coupling::Finite(v) => CouplingRepr::Number(v),
            Coupling::Infinite => CouplingRepr::Text("inf".into()),
        }
    }
}

impl TryFrom<CouplingRepr> for Coupling {
    type Error = Error;
    fn try_from(r: CouplingRepr) -> Result<Self> {
        match r {
            CouplingRepr::Number(v) => Coupling::new(v),
            CouplingRepr::Text(t) => t.parse(),
        }
    }
}

impl Coupling {
    pub fn new(g: f64) -> Result<Self> {
        if g.is_nan() || g < 0.0 {
            return Err(invalid("g", format!("coupling must be >= 0, got {g}")));
        }
        Ok(if g.is_infinite() {
            Coupling::Infinite
        } else {
            Coupling::Finite(g)
        })
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Coupling::Infinite)
    }

    pub fn is_zero(self) -> bool {
        self == Coupling::Finite(0.0)
    }

    /// Numeric value, `f64::INFINITY` for the hard core.
    pub fn value(self) -> f64 {
        match self {
            Coupling::Finite(g) => g,
            Coupling::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Finite(g) => write!(f, "{g}"),
            Coupling::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Coupling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "+inf" | "∞" => Ok(Coupling::Infinite),
            other => {
                let g: f64 = other
                    .parse()
                    .map_err(|_| invalid("g", format!("not a number: {other}")))?;
                Coupling::new(g)
            }
        }
    }
}

/// The two quadratures behind [`watson_gamma`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    /// `|method_a - method_b|`.
    pub err: f64,
    /// Periodized trapezoid with a smooth ball subtraction, Richardson-extrapolated.
    pub method_a: f64,
    /// Adaptive cube subdivision toward the origin.
    pub method_b: f64,
}

/// `4Σ(1 - cos k^i)`, computed through `sin²` to keep precision near 0.
fn four_sum(k: [f64; 3]) -> f64 {
    8.0 * k.iter().map(|&c| (0.5 * c).sin().powi(2)).sum::<f64>()
}

/// C^∞ radial cutoff: 1 below `R0`, 0 above `R1`.
const R0: f64 = 0.5;
const R1: f64 = 3.0;

fn flat_bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn ball_cutoff(r: f64) -> f64 {
    if r <= R0 {
        return 1.0;
    }
    if r >= R1 {
        return 0.0;
    }
    let t = (r - R0) / (R1 - R0);
    let a = flat_bump(1.0 - t);
    a / (a + flat_bump(t))
}

/// `(2π)^{-3} ∫_{R^3} χ(|k|) / (2|k|²) dk`. The cutoff satisfies
/// `χ(t) + χ(1-t) = 1` on the transition, so `∫χ dr = (R0 + R1)/2`.
fn ball_integral() -> f64 {
    (R0 + R1) / (8.0 * PI * PI)
}

/// Trapezoid sum of `1/(4Σ(1-cos k)) - χ(|k|)/(2|k|²)` on the `n^3` grid,
/// normalized by `(2π)^3`. The remainder is periodic and bounded, with
/// error terms in `h^3, h^5, ...`.
pub fn trapezoid_remainder(n: usize) -> f64 {
    assert!(n >= 4 && n.is_multiple_of(2));
    let h = 2.0 * PI / n as f64;
    // fold the grid onto 0..=n/2 with multiplicities
    let half = n / 2;
    let coords: Vec<(f64, f64)> = (0..=half)
        .map(|m| {
            let w = if m == 0 || m == half { 1.0 } else { 2.0 };
            (m as f64 * h, w)
        })
        .collect();
    let mut total = 0.0;
    for &(k1, w1) in &coords {
        for &(k2, w2) in &coords {
            let mut row = 0.0;
            for &(k3, w3) in &coords {
                if k1 == 0.0 && k2 == 0.0 && k3 == 0.0 {
                    continue;
                }
                let k = [k1, k2, k3];
                let r = (k1 * k1 + k2 * k2 + k3 * k3).sqrt();
                let v = 1.0 / four_sum(k) - ball_cutoff(r) / (2.0 * r * r);
                row += w3 * v;
            }
            total += w1 * w2 * row;
        }
    }
    total / (n as f64).powi(3)
}

/// Method A: Richardson extrapolation of [`trapezoid_remainder`] over
/// `n0, 2n0, 4n0, 8n0`, removing the `h^3, h^5, h^7` terms.
pub fn gamma_trapezoid(n0: usize) -> (f64, f64) {
    let levels: Vec<f64> = (0..4).map(|i| trapezoid_remainder(n0 << i)).collect();
    let mut table = levels.clone();
    let mut prev_best = table[table.len() - 1];
    for (step, p) in [3, 5, 7].into_iter().enumerate() {
        let f = 2f64.powi(p);
        let next: Vec<f64> = table
            .windows(2)
            .map(|w| (f * w[1] - w[0]) / (f - 1.0))
            .collect();
        if step == 1 {
            prev_best = *next.last().expect("level");
        }
        table = next;
    }
    let best = table[0];
    (best + ball_integral(), (best - prev_best).abs())
}

/// `∫_{[-1,1]^2} du dv / (1 + u² + v²)`.
fn face_integral() -> f64 {
    let gl = GaussLegendre::new(48);
    gl.on(0.0, 1.0)
        .map(|(u, wu)| wu * gl.integrate(0.0, 1.0, |v| 1.0 / (1.0 + u * u + v * v)))
        .sum::<f64>()
        * 4.0
}

/// Method B: integrate over `[0,π]^3` with cubes refined geometrically
/// toward the origin; each cube away from the corner is refined until
/// two Gauss-Legendre orders agree to relative `tol`.
pub fn gamma_adaptive(tol: f64) -> (f64, f64) {
    let lo_rule = GaussLegendre::new(8);
    let hi_rule = GaussLegendre::new(12);
    let f = |k: [f64; 3]| 1.0 / four_sum(k);

    fn tensor(rule: &GaussLegendre, lo: [f64; 3], size: f64, f: &impl Fn([f64; 3]) -> f64) -> f64 {
        let pts: Vec<(f64, f64)> = rule.on(0.0, size).collect();
        let mut acc = 0.0;
        for &(a, wa) in &pts {
            for &(b, wb) in &pts {
                let mut row = 0.0;
                for &(c, wc) in &pts {
                    row += wc * f([lo[0] + a, lo[1] + b, lo[2] + c]);
                }
                acc += wa * wb * row;
            }
        }
        acc
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        lo: [f64; 3],
        size: f64,
        depth: usize,
        tol: f64,
        lo_rule: &GaussLegendre,
        hi_rule: &GaussLegendre,
        f: &impl Fn([f64; 3]) -> f64,
        err: &mut f64,
    ) -> f64 {
        let coarse = tensor(lo_rule, lo, size, f);
        let fine = tensor(hi_rule, lo, size, f);
        if (fine - coarse).abs() <= tol * fine.abs() || depth >= 8 {
            *err += (fine - coarse).abs();
            return fine;
        }
        let h = 0.5 * size;
        let mut acc = 0.0;
        for octant in 0..8 {
            let sub = [0, 1, 2].map(|i| lo[i] + if octant >> i & 1 == 1 { h } else { 0.0 });
            acc += refine(sub, h, depth + 1, tol, lo_rule, hi_rule, f, err);
        }
        acc
    }

    let mut total = 0.0;
    let mut err = 0.0;
    let mut size = PI;
    for _level in 0..24 {
        let h = 0.5 * size;
        for octant in 1..8 {
            let sub = [0, 1, 2].map(|i| if octant >> i & 1 == 1 { h } else { 0.0 });
            total += refine(sub, h, 0, tol, &lo_rule, &hi_rule, &f, &mut err);
        }
        size = h;
    }
    // corner cube [0,δ]^3 by its leading term ∫ 1/(2|k|²)
    total += size * 6.0 * face_integral() / 16.0;
    (total / PI.powi(3), err / PI.powi(3))
}

/// `γ = (2π)^{-3} ∫ dk / (4Σ(1-cos k^i))` from two independent quadratures
/// that must agree to `tol` (relative).
pub fn watson_gamma(tol: f64) -> Result<GammaEstimate> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(invalid("tol", format!("must lie in (0, 1e-3], got {tol}")));
    }
    let (method_a, _) = gamma_trapezoid(32);
    let (method_b, _) = gamma_adaptive(1e-11);
    let err = (method_a - method_b).abs();
    if err > tol * method_a.abs() {
        return Err(Error::NoConvergence {
            what: "watson_gamma",
            detail: format!("trapezoid {method_a:.15} vs adaptive {method_b:.15}"),
        });
    }
    Ok(GammaEstimate {
        gamma: method_a,
        err,
        method_a,
        method_b,
    })
}

/// Coupling, Green's constant and scattering length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatteringParams {
    pub g: Coupling,
    pub gamma: f64,
    pub a: f64,
}

impl ScatteringParams {
    pub fn new(g: Coupling, gamma: f64) -> Result<Self> {
        Ok(ScatteringParams {
            g,
            gamma,
            a: scattering_length(g, gamma)?,
        })
    }

    /// `1/(gγ + 1)`, zero for the hard core.
    pub fn phi_at_origin(&self) -> f64 {
        match self.g {
            Coupling::Finite(g) => 1.0 / (g * self.gamma + 1.0),
            Coupling::Infinite => 0.0,
        }
    }

    /// `½ g φ(0)`, with the limit `1/(2γ)` at infinite coupling.
    pub fn half_g_phi0(&self) -> f64 {
        match self.g {
            Coupling::Finite(g) => 0.5 * g * self.phi_at_origin(),
            Coupling::Infinite => 0.5 / self.gamma,
        }
    }
}

/// `a = g/(8π(gγ+1))`, `1/(8πγ)` for the hard core.
pub fn scattering_length(g: Coupling, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "must be positive"));
    }
    match g {
        Coupling::Finite(g) if g < 0.0 || g.is_nan() => Err(invalid("g", "coupling must be >= 0")),
        Coupling::Finite(g) => Ok(g / (8.0 * PI * (g * gamma + 1.0))),
        Coupling::Infinite => Ok(1.0 / (8.0 * PI * gamma)),
    }
}

/// Quadrature for the lattice Green's function
/// `G(x) = (2π)^{-3} ∫ e^{ip·x} / E(p) dp`.
///
/// The integral over `p^3` is done in closed form,
/// `(2π)^{-1}∫ e^{ip x}/(A + 2 - 2cos p) dp = e^{-κ|x|}/(2 sinh κ)` with
/// `cosh κ = 1 + A/2`, leaving a 2D integral with a `1/|p|` point
/// singularity. Polar coordinates about the origin on the two triangles of
/// the quadrant `[0,π]^2` make the integrand smooth, so tensor
/// Gauss-Legendre converges geometrically.
pub struct GreenQuadrature {
    order: usize,
    nodes: Vec<GreenNode>,
}

struct GreenNode {
    p1: f64,
    p2: f64,
    weight: f64,
    kappa: f64,
}

impl GreenQuadrature {
    pub fn new(order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let mut nodes = Vec::with_capacity(2 * order * order);
        for lower in [true, false] {
            let (t0, t1) = if lower {
                (0.0, PI / 4.0)
            } else {
                (PI / 4.0, PI / 2.0)
            };
            for (theta, wt) in gl.on(t0, t1) {
                let (s, c) = theta.sin_cos();
                let rmax = if lower { PI / c } else { PI / s };
                for (t, wr) in gl.on(0.0, 1.0) {
                    let r = t * rmax;
                    let (p1, p2) = (r * c, r * s);
                    let u = 2.0 * ((0.5 * p1).sin().powi(2) + (0.5 * p2).sin().powi(2));
                    let sinh = (u * (u + 2.0)).sqrt();
                    let kappa = (u + sinh).ln_1p();
                    // quadrant → full zone (×4), (2π)^{-2}, 1/(2 sinh κ), Jacobian r
                    let weight = wt * wr * rmax * r / (2.0 * sinh) / (PI * PI);
                    nodes.push(GreenNode {
                        p1,
                        p2,
                        weight,
                        kappa,
                    });
                }
            }
        }
        GreenQuadrature { order, nodes }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, x: LatticePoint) -> f64 {
        let mut c = x.0.map(|v| v.unsigned_abs() as f64);
        c.sort_by(f64::total_cmp);
        // largest coordinate goes into the closed-form direction
        let (c1, c2, c3) = (c[0], c[1], c[2]);
        self.nodes
            .iter()
            .map(|nd| nd.weight * (nd.p1 * c1).cos() * (nd.p2 * c2).cos() * (-nd.kappa * c3).exp())
            .sum()
    }
}

/// `G(x)` with an error estimate from a second, lower quadrature order.
pub fn lattice_green(x: LatticePoint, order: usize) -> (f64, f64) {
    let hi = GreenQuadrature::new(order).eval(x);
    let lo = GreenQuadrature::new((2 * order).div_ceil(3)).eval(x);
    (hi, (hi - lo).abs())
}

/// Tabulated `φ` on `A(r_max)`.
#[derive(Clone, Debug)]
pub struct ZeroEnergySolution {
    pub params: ScatteringParams,
    pub table: LatticeField<f64>,
    pub r_max: u32,
    pub grid: u32,
    /// Least-squares far-field coefficient of `|x|(1 - φ(x))`.
    pub tail_coefficient: f64,
    /// Largest per-point quadrature error estimate on `φ`.
    pub max_error: f64,
}

impl ZeroEnergySolution {
    pub fn phi(&self, x: LatticePoint) -> f64 {
        if x.sup_norm() > self.r_max as i64 {
            return f64::NAN;
        }
        self.table.get(x)
    }

    fn from_table(
        params: ScatteringParams,
        table: LatticeField<f64>,
        r_max: u32,
        grid: u32,
        max_error: f64,
    ) -> Self {
        let mut sol = ZeroEnergySolution {
            params,
            table,
            r_max,
            grid,
            tail_coefficient: 0.0,
            max_error,
        };
        sol.tail_coefficient = fit_tail(&sol).0;
        sol
    }
}

/// `φ(x) = 1 - 4πa G(x)` on `|x|_∞ ≤ r_max`, using the cubic symmetry of
/// `G` to evaluate only sorted coordinate triples.
pub fn phi_table(
    params: ScatteringParams,
    r_max: u32,
    grid: u32,
    tol: f64,
) -> Result<ZeroEnergySolution> {
    if r_max < 2 {
        return Err(invalid("r_max", "must be at least 2"));
    }
    if grid < 8 {
        return Err(invalid("grid", "quadrature order must be at least 8"));
    }
    let region = BoxRegion::centered(r_max);
    if params.g.is_zero() {
        let table = LatticeField::from_fn(region, |_| 1.0);
        return Ok(ZeroEnergySolution::from_table(
            params, table, r_max, grid, 0.0,
        ));
    }
    let hi = GreenQuadrature::new(grid as usize);
    let lo = GreenQuadrature::new((2 * grid as usize).div_ceil(3));
    let r = r_max as usize;
    let side = r + 1;
    let mut unique = vec![f64::NAN; side * side * side];
    let mut max_error: f64 = 0.0;
    let coeff = 4.0 * PI * params.a;
    for c3 in 0..=r {
        for c2 in 0..=c3 {
            for c1 in 0..=c2 {
                let p = LatticePoint([c1 as i64, c2 as i64, c3 as i64]);
                let g_hi = hi.eval(p);
                let g_lo = lo.eval(p);
                max_error = max_error.max(coeff * (g_hi - g_lo).abs());
                unique[(c1 * side + c2) * side + c3] = 1.0 - coeff * g_hi;
            }
        }
    }
    if max_error > tol {
        return Err(invalid(
            "grid",
            format!("order {grid} gives error estimate {max_error:.2e} above tolerance {tol:.1e}"),
        ));
    }
    let table = LatticeField::from_fn(region, |x| {
        let mut c = x.0.map(|v| v.unsigned_abs() as usize);
        c.sort_unstable();
        unique[(c[0] * side + c[1]) * side + c[2]]
    });
    Ok(ZeroEnergySolution::from_table(
        params, table, r_max, grid, max_error,
    ))
}

/// `max_x |-Δφ(x) + ½ g δ_{x,0} φ(x)|` over `|x|_∞ ≤ r_max - 1`, using the
/// closed-form `½gφ(0)` at the origin.
pub fn equation_residual(sol: &ZeroEnergySolution) -> f64 {
    let lap = laplacian_apply(&sol.table);
    let inner = BoxRegion::centered(sol.r_max - 1);
    inner
        .points()
        .map(|x| {
            let mut v = -lap.get(x);
            if x == LatticePoint::ORIGIN {
                v += sol.params.half_g_phi0();
            }
            v.abs()
        })
        .fold(0.0, f64::max)
}

/// `(a_fit, c_fit)` for `|x|(1 - φ(x)) ≈ a + c/|x|²` on the outer half of
/// the table.
fn fit_tail(sol: &ZeroEnergySolution) -> (f64, f64) {
    let rmax = sol.r_max as f64;
    let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, &phi) in sol.table.region().points().zip(sol.table.values()) {
        let r = x.norm();
        if r < 0.5 * rmax || r > rmax - 1.0 {
            continue;
        }
        let y = r * (1.0 - phi);
        let z = 1.0 / (r * r);
        s00 += 1.0;
        s01 += z;
        s11 += z * z;
        b0 += y;
        b1 += y * z;
    }
    let det = s00 * s11 - s01 * s01;
    if det.abs() < 1e-300 {
        return (0.0, 0.0);
    }
    ((s11 * b0 - s01 * b1) / det, (s00 * b1 - s01 * b0) / det)
}

/// Far-field behaviour of a tabulated `φ`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    /// `max |x|^3 |φ(x) - 1 + a/|x||` over `4 ≤ |x| ≤ r_max - 1`.
    pub bound: f64,
    /// Same maximum per unit-width radial shell `[k, k+1)`.
    pub shell_bounds: Vec<(u32, f64)>,
    /// No growth: the outer half of the shells stays within 1.5× the inner half.
    pub bounded: bool,
    pub tail_coefficient: f64,
    /// `|x|(1 - φ(x)) / a` at `|x| ≈ r_max/2` on an axis and on the diagonal.
    pub axis_ratio: f64,
    pub diagonal_ratio: f64,
    pub tail_within_2pct: bool,
}

pub fn verify_decay(sol: &ZeroEnergySolution) -> DecayReport {
    let a = sol.params.a;
    let rmax = sol.r_max as f64;
    let mut shells: Vec<(u32, f64)> = Vec::new();
    let mut bound: f64 = 0.0;
    for (x, &phi) in sol.table.region().points().zip(sol.table.values()) {
        let r = x.norm();
        if r < 4.0 || r > rmax - 1.0 {
            continue;
        }
        let v = r.powi(3) * (phi - 1.0 + a / r).abs();
        bound = bound.max(v);
        let k = r.floor() as u32;
        match shells.iter_mut().find(|s| s.0 == k) {
            Some(s) => s.1 = s.1.max(v),
            None => shells.push((k, v)),
        }
    }
    shells.sort_by_key(|s| s.0);
    let half = shells.len() / 2;
    let inner = shells[..half].iter().map(|s| s.1).fold(0.0, f64::max);
    let outer = shells[half..].iter().map(|s| s.1).fold(0.0, f64::max);
    let bounded = a == 0.0 || outer <= 1.5 * inner;

    let axis = LatticePoint([(sol.r_max / 2) as i64, 0, 0]);
    let d = (rmax / (2.0 * 3f64.sqrt())).round() as i64;
    let diag = LatticePoint([d, d, d]);
    let ratio = |x: LatticePoint| {
        if a == 0.0 {
            1.0
        } else {
            x.norm() * (1.0 - sol.phi(x)) / a
        }
    };
    let axis_ratio = ratio(axis);
    let diagonal_ratio = ratio(diag);
    let tail_ok = |v: f64| (v - 1.0).abs() <= 0.02;
    DecayReport {
        bound,
        shell_bounds: shells,
        bounded,
        tail_coefficient: sol.tail_coefficient,
        axis_ratio,
        diagonal_ratio,
        tail_within_2pct: tail_ok(axis_ratio)
            && tail_ok(diagonal_ratio)
            && (a == 0.0 || (sol.tail_coefficient / a - 1.0).abs() <= 0.02),
    }
}

/// Discrete Gauss law for `φ`: `Σ_{|x|_∞ ≤ r} Δφ(x)` telescopes to the
/// outward surface flux, which equals `½gφ(0) = 4πa`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ApReport {
    pub r: u32,
    /// `Σ_{|x|_∞ ≤ r} Δφ(x)`.
    pub laplacian_sum: f64,
    pub half_g_phi0: f64,
    pub four_pi_a: f64,
    /// `|laplacian_sum - 4πa|`.
    pub residual: f64,
}

pub fn identity_ap(sol: &ZeroEnergySolution) -> ApReport {
    let r = sol.r_max - 1;
    let lap = laplacian_apply(&sol.table);
    let laplacian_sum: f64 = BoxRegion::centered(r).points().map(|x| lap.get(x)).sum();
    let four_pi_a = 4.0 * PI * sol.params.a;
    ApReport {
        r,
        laplacian_sum,
        half_g_phi0: sol.params.half_g_phi0(),
        four_pi_a,
        residual: (laplacian_sum - four_pi_a).abs(),
    }
}

/// `Σ_{x∈A(r), y∉A(r), |x-y|=1} (φ(y) - φ(x))`.
pub fn identity_ap2(sol: &ZeroEnergySolution, r: u32) -> Result<f64> {
    if r < 1 || r + 1 > sol.r_max {
        return Err(invalid(
            "r",
            format!("need 1 <= r <= r_max - 1 = {}", sol.r_max - 1),
        ));
    }
    let a = BoxRegion::centered(r);
    let mut sum = 0.0;
    for x in a.points() {
        for axis in 0..3 {
            for step in [-1, 1] {
                let y = x.shifted(axis, step);
                if !a.contains(y) {
                    sum += sol.phi(y) - sol.phi(x);
                }
            }
        }
    }
    Ok(sum)
}

const MAGIC: &[u8; 8] = b"PHITABLE";
const FORMAT_VERSION: u32 = 1;

/// Writes the binary table: header (magic, version, g-flag, g, r_max,
/// grid, γ, a) then `(2r_max+1)^3` little-endian `f64` in lexicographic
/// `x` order (first coordinate slowest).
pub fn write_phi_table(path: &Path, sol: &ZeroEnergySolution) -> Result<()> {
    let mut buf = Vec::with_capacity(48 + 8 * sol.table.values().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let (flag, g) = match sol.params.g {
        Coupling::Finite(g) => (0u32, g),
        Coupling::Infinite => (1u32, f64::INFINITY),
    };
    buf.extend_from_slice(&flag.to_le_bytes());
    buf.extend_from_slice(&g.to_le_bytes());
    buf.extend_from_slice(&sol.r_max.to_le_bytes());
    buf.extend_from_slice(&sol.grid.to_le_bytes());
    buf.extend_from_slice(&sol.params.gamma.to_le_bytes());
    buf.extend_from_slice(&sol.params.a.to_le_bytes());
    for v in sol.table.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&buf)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_phi_table(path: &Path) -> Result<ZeroEnergySolution> {
    let bytes = fs::read(path)?;
    if bytes.len() < 48 || &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let g = match u32_at(12) {
        0 => Coupling::new(f64_at(16))?,
        1 => Coupling::Infinite,
        f => return Err(Error::Format(format!("bad coupling flag {f}"))),
    };
    let r_max = u32_at(24);
    let grid = u32_at(28);
    let gamma = f64_at(32);
    let a = f64_at(40);
    let region = BoxRegion::centered(r_max);
    if bytes.len() != 48 + 8 * region.len() {
        return Err(Error::Format(format!(
            "expected {} table bytes, found {}",
            8 * region.len(),
            bytes.len() - 48
        )));
    }
    let values = bytes[48..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let table = LatticeField::from_values(region, values)?;
    let params = ScatteringParams { g, gamma, a };
    Ok(ZeroEnergySolution::from_table(
        params, table, r_max, grid, 0.0,
    ))
}

/// On-disk cache of `φ` tables keyed by `(g, r_max, grid)`.
pub struct PhiCache {
    dir: PathBuf,
}

impl PhiCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PhiCache { dir: dir.into() }
    }

    pub fn path_for(&self, g: Coupling, r_max: u32, grid: u32) -> PathBuf {
        let key = match g {
            Coupling::Finite(g) => format!("{:016x}", g.to_bits()),
            Coupling::Infinite => "inf".to_string(),
        };
        self.dir.join(format!("phi_g{key}_r{r_max}_n{grid}.bin"))
    }

    pub fn load_or_compute(
        &self,
        params: ScatteringParams,
        r_max: u32,
        grid: u32,
        tol: f64,
    ) -> Result<ZeroEnergySolution> {
        let path = self.path_for(params.g, r_max, grid);
        if let Ok(sol) = read_phi_table(&path) {
            if sol.params.gamma == params.gamma {
                return Ok(sol);
            }
        }
        let sol = phi_table(params, r_max, grid, tol)?;
        write_phi_table(&path, &sol)?;
        Ok(sol)
    }
}

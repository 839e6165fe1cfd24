//! Finite-dimensional checks of two inequalities used by the lower bound:
//! a kinetic-versus-nearest-neighbour-potential bound for two spinless
//! fermions on a torus, and a trace inequality for `0 ≤ γ ≤ 1` against a
//! projection, sampled on random matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::basis::SpinSector;
use super::hamiltonian::HopTable;
use crate::eigen::{lowest_eigenpair, random_start, LanczosOptions, LinearOperator};
use crate::error::{invalid, Result};

/// Radial profile `f ≥ 0` of the attraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LtShape {
    /// `c` for `|x| ≤ range`, zero beyond.
    Step { height: f64, range: f64 },
    /// `c e^{-|x|/length}`.
    Exponential { height: f64, length: f64 },
}

impl LtShape {
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            LtShape::Step { height, range } => {
                if d <= range {
                    height
                } else {
                    0.0
                }
            }
            LtShape::Exponential { height, length } => height * (-d / length).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LtShape::Step { height, range } => height >= 0.0 && range >= 0.0,
            LtShape::Exponential { height, length } => height >= 0.0 && length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "f",
                "profile must be nonnegative with a positive length",
            ))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LtReport {
    pub l: usize,
    pub shape: LtShape,
    pub min_eig: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
    pub residual: f64,
}

/// Two spinless fermions on the periodic `L³` torus with
/// `H = Σ_i (-Δ_i - f(D_i))`, `D_i` the minimum-image distance to the
/// other particle.
pub struct TorusPair {
    hops: HopTable,
    diagonal: Vec<f64>,
}

fn torus_distance(l: usize, a: usize, b: usize) -> f64 {
    let coords = |s: usize| [s / (l * l), (s / l) % l, s % l];
    let (pa, pb) = (coords(a), coords(b));
    (0..3)
        .map(|k| {
            let d = pa[k].abs_diff(pb[k]);
            let d = d.min(l - d) as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

impl TorusPair {
    pub fn new(l: usize, f: &LtShape) -> Self {
        let s = l * l * l;
        let neighbors: Vec<Vec<u16>> = (0..s)
            .map(|i| {
                let c = [i / (l * l), (i / l) % l, i % l];
                let mut out = Vec::with_capacity(6);
                for axis in 0..3 {
                    for step in [1, l - 1] {
                        let mut q = c;
                        q[axis] = (q[axis] + step) % l;
                        out.push((q[0] * l * l + q[1] * l + q[2]) as u16);
                    }
                }
                out
            })
            .collect();
        let sector = SpinSector::new(s, 2);
        let hops = HopTable::build(&sector, &neighbors);
        let diagonal = (0..sector.len())
            .map(|i| {
                let c = sector.config(i);
                12.0 - 2.0 * f.eval(torus_distance(l, c[0] as usize, c[1] as usize))
            })
            .collect();
        TorusPair { hops, diagonal }
    }
}

impl LinearOperator for TorusPair {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            let mut v = self.diagonal[i] * x[i];
            for (j, c) in self.hops.row(i) {
                v += c * x[j];
            }
            *out = v;
        }
    }
}

/// `2^{11/2}/(15π²) · N · Σ_x f(|x|)^{5/2}` summed over the torus with
/// minimum-image distances, `N = 2`.
fn lt_bound(l: usize, f: &LtShape) -> f64 {
    let sum: f64 = (0..l * l * l)
        .map(|x| f.eval(torus_distance(l, 0, x)).powf(2.5))
        .sum();
    -(2f64.powf(5.5) / (15.0 * PI * PI)) * 2.0 * sum
}

pub fn lt_check(l: usize, f: LtShape) -> Result<LtReport> {
    if !(3..=12).contains(&l) {
        return Err(invalid("L", "torus side must lie in 3..=12"));
    }
    f.validate()?;
    let op = TorusPair::new(l, &f);
    let start = random_start(op.dim(), 0x17_c4ec, |_| true);
    let pair = lowest_eigenpair(&op, &start, &LanczosOptions::default())?;
    let bound = lt_bound(l, &f);
    Ok(LtReport {
        l,
        shape: f,
        min_eig: pair.value,
        bound,
        slack: pair.value - bound,
        holds: pair.value >= bound,
        residual: pair.residual,
    })
}

/// Twelve profiles: steps and exponentials at heights `{1/4, 1, 4}` and
/// ranges `{1, 2}`.
pub fn lt_suite(l: usize) -> Result<Vec<LtReport>> {
    let mut out = Vec::new();
    for height in [0.25, 1.0, 4.0] {
        for range in [1.0, 2.0] {
            out.push(lt_check(l, LtShape::Step { height, range })?);
            out.push(lt_check(
                l,
                LtShape::Exponential {
                    height,
                    length: range,
                },
            )?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub seed: u64,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `lhs - rhs` over all instances.
    pub min_slack: f64,
    /// Smallest `(lhs - rhs) / scale`, `scale` the sum of absolute terms.
    pub min_relative_slack: f64,
}

/// Both sides of the trace inequality for one instance.
#[derive(Clone, Copy, Debug)]
pub struct TraceSides {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.amax()
}

/// `Tr[γw]` against `Tr[ξw₊](1-δ) - Tr[ξw₋](1+δ) - (1+1/δ)(‖w₊‖+‖w₋‖)Tr[γ(1-ξ)] - ‖w‖Tr[ξ(1-γ)]`.
pub fn trace_sides(
    gamma: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    wp: &DMatrix<f64>,
    wm: &DMatrix<f64>,
    delta: f64,
) -> TraceSides {
    let n = gamma.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let w = wp - wm;
    let tr = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a * b).trace();
    let lhs = tr(gamma, &w);
    let terms = [
        tr(xi, wp) * (1.0 - delta),
        -tr(xi, wm) * (1.0 + delta),
        -(1.0 + 1.0 / delta) * (op_norm(wp) + op_norm(wm)) * tr(gamma, &(&id - xi)),
        -op_norm(&w) * tr(xi, &(&id - gamma)),
    ];
    TraceSides {
        lhs,
        rhs: terms.iter().sum(),
        scale: lhs.abs() + terms.iter().map(|t| t.abs()).sum::<f64>(),
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let rank = rng.gen_range(0..=n);
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let b = DMatrix::from_fn(n, rank, |_, _| rng.gen_range(-1.0..1.0));
    &b * b.transpose() * scale
}

/// Samples `instances` random `(γ, ξ, w₊, w₋, δ)` in dimensions 4 to 16.
/// `γ` is drawn either independently of `ξ` or as a small perturbation of
/// it, where the inequality is tightest. A fixed `delta` overrides the
/// per-instance draw from `(0, 1)`.
pub fn trace_bound_check(seed: u64, delta: Option<f64>, instances: usize) -> Result<TraceReport> {
    if let Some(d) = delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let mut min_relative = f64::INFINITY;
    for _ in 0..instances {
        let n = rng.gen_range(4..=16);
        let q = random_orthogonal(n, &mut rng);
        let rank = rng.gen_range(0..=n);
        let xi_diag = DVector::from_fn(n, |i, _| if i < rank { 1.0 } else { 0.0 });
        let xi = &q * DMatrix::from_diagonal(&xi_diag) * q.transpose();
        let gamma = if rng.gen_bool(0.5) {
            let u = random_orthogonal(n, &mut rng);
            let ev = DVector::from_fn(n, |_, _| rng.gen_range(0.0..=1.0));
            &u * DMatrix::from_diagonal(&ev) * u.transpose()
        } else {
            let eps = 10f64.powf(rng.gen_range(-4.0..-0.5));
            let ev = DVector::from_fn(n, |i, _| {
                let t = rng.gen_range(0.0..eps);
                if i < rank {
                    1.0 - t
                } else {
                    t
                }
            });
            let tilt = random_orthogonal(n, &mut rng);
            let small = (&tilt - DMatrix::identity(n, n)) * eps;
            let r = (DMatrix::identity(n, n) + small).qr().q();
            let basis = &q * r;
            &basis * DMatrix::from_diagonal(&ev) * basis.transpose()
        };
        let wp = random_psd(n, &mut rng);
        let wm = random_psd(n, &mut rng);
        let d = delta.unwrap_or_else(|| rng.gen_range(0.01..0.99));
        let sides = trace_sides(&gamma, &xi, &wp, &wm, d);
        let slack = sides.lhs - sides.rhs;
        if slack < -1e-12 * sides.scale.max(1.0) {
            violations += 1;
        }
        min_slack = min_slack.min(slack);
        min_relative = min_relative.min(slack / sides.scale.max(f64::MIN_POSITIVE));
    }
    Ok(TraceReport {
        seed,
        instances,
        violations,
        min_slack,
        min_relative_slack: min_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_pair_on_torus() {
        let l = 4;
        let r = lt_check(
            l,
            LtShape::Step {
                height: 0.0,
                range: 1.0,
            },
        )
        .unwrap();
        // one particle at rest, the other in the lowest nonzero momentum
        let expect = 2.0 * (1.0 - (2.0 * PI / l as f64).cos());
        assert!((r.min_eig - expect).abs() < 1e-9);
        assert_eq!(r.bound, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn step_profile_holds() {
        let r = lt_check(
            8,
            LtShape::Step {
                height: 0.5,
                range: 2.0,
            },
        )
        .unwrap();
        assert!(r.holds && r.slack > 0.0, "{r:?}");
    }

    #[test]
    fn pair_energy_against_dense() {
        let f = LtShape::Exponential {
            height: 3.0,
            length: 1.5,
        };
        let op = TorusPair::new(3, &f);
        let dense = crate::eigen::assemble_dense(&op);
        let ev = crate::eigen::dense_eigenvalues(dense)[0];
        assert!((lt_check(3, f).unwrap().min_eig - ev).abs() < 1e-9);
    }

    #[test]
    fn trace_inequality_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let q = random_orthogonal(n, &mut rng);
        let xi = &q
            * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]))
            * q.transpose();
        let wp = random_psd(n, &mut rng);
        let wm = random_psd(n, &mut rng);
        let delta = 0.3;
        // γ = ξ: slack is δ(Tr ξw₊ + Tr ξw₋)
        let s = trace_sides(&xi, &xi, &wp, &wm, delta);
        let expect = delta * ((&xi * &wp).trace() + (&xi * &wm).trace());
        assert!((s.lhs - s.rhs - expect).abs() < 1e-10 * s.scale);
        // w₋ = 0, γ = ξ/2
        let zero = DMatrix::zeros(n, n);
        let half = &xi * 0.5;
        let s = trace_sides(&half, &xi, &wp, &zero, delta);
        let t = (&xi * &wp).trace();
        let expect = 0.5 * t - (1.0 - delta) * t + op_norm(&wp) * 1.0;
        assert!((s.lhs - s.rhs - expect).abs() < 1e-10 * s.scale);
        assert!(s.lhs >= s.rhs);
    }

    #[test]
    fn random_instances() {
        let r = trace_bound_check(11, None, 200).unwrap();
        assert_eq!(r.violations, 0);
        assert!(trace_bound_check(1, Some(1.5), 1).is_err());
    }
}

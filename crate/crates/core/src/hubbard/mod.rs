//! Exact diagonalization of the two-species Hubbard model in a Dirichlet
//! box, and the finite-dimensional inequality checks that accompany it.

pub mod basis;
pub mod checks;
pub mod hamiltonian;
pub mod observables;

use serde::Serialize;

pub use basis::{build_basis, build_basis_with, FockBasis, DEFAULT_DIMENSION_CAP};
pub use checks::{lt_check, lt_suite, trace_bound_check, LtReport, LtShape, TraceReport};
pub use hamiltonian::HubbardOperator;
pub use observables::{close_pair_count, observables, one_particle_dm, ObservableSet, Spin};

use crate::eigen::{
    lowest_eigenpair, lowest_eigenpair_lowmem, random_start, LanczosOptions, LinearOperator,
};
use crate::error::{invalid, Result};
use crate::ideal_fermi::{free_ground_energy, pair_effective_volume};
use crate::scattering::{scattering_length, Coupling};

/// Below this many slots the thick-restart solver with full
/// reorthogonalization is used; above it the two-pass low-memory one.
pub const FULL_REORTH_LIMIT: usize = 100_000;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Residual target relative to `max(1, |E0|)`, within `[1e-12, 1e-6]`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            seed: 0x0ed_5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Solver {
    FullReorthogonalization,
    LowMemory,
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub l: usize,
    pub n_u: usize,
    pub n_d: usize,
    pub coupling: Coupling,
    pub energy: f64,
    /// `‖Hv - E0 v‖` of the returned unit vector.
    pub residual: f64,
    pub matvecs: usize,
    pub solver: Solver,
    vector: Vec<f64>,
}

impl GroundState {
    /// Amplitudes indexed by basis slot; excluded slots hold zero.
    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn amplitude(&self, slot: usize) -> f64 {
        self.vector[slot]
    }
}

pub fn ground_state(basis: &FockBasis, g: Coupling, opts: &SolveOptions) -> Result<GroundState> {
    if !(1e-12..=1e-6).contains(&opts.tol) {
        return Err(invalid("tol", "must lie in [1e-12, 1e-6]"));
    }
    let op = HubbardOperator::new(basis, g)?;
    let n = basis.slots();
    let start = random_start(n, opts.seed, |s| basis.is_allowed(s));
    let (pair, solver) = if n == 1 {
        let mut y = vec![0.0];
        op.apply(&start, &mut y);
        let pair = crate::eigen::EigenPair {
            value: y[0] / start[0],
            vector: Some(start),
            residual: 0.0,
            matvecs: 1,
        };
        (pair, Solver::FullReorthogonalization)
    } else {
        let lanczos = LanczosOptions {
            tol: opts.tol,
            ..LanczosOptions::default()
        };
        if n < FULL_REORTH_LIMIT {
            (
                lowest_eigenpair(&op, &start, &lanczos)?,
                Solver::FullReorthogonalization,
            )
        } else {
            (
                lowest_eigenpair_lowmem(&op, &start, &lanczos)?,
                Solver::LowMemory,
            )
        }
    };
    Ok(GroundState {
        l: basis.l,
        n_u: basis.n_up(),
        n_d: basis.n_down(),
        coupling: g,
        energy: pair.value,
        residual: pair.residual,
        matvecs: pair.matvecs,
        solver,
        vector: pair.vector.expect("eigenvector requested"),
    })
}

/// Small-`a` expansion of the two-body shift in the Dirichlet box,
/// `ΔE = 8πa·first + (8πa)²·second + O(a³)`.
///
/// With `ψ_n` the sine modes and `M_{nn'} = Σ_x ψ_0² ψ_n ψ_{n'}`,
/// `first = M_{00} = Σψ_0⁴` and
/// `second = γ·first - Σ_{(n,n')≠(0,0)} M²_{nn'} / (E_n + E_{n'} - 2E_0)`:
/// the box resolvent minus the infinite-volume part already contained in
/// `a = g/(8π(1+gγ))`. Both are exact finite sums; `M` factorizes over
/// axes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairCoefficients {
    pub first: f64,
    pub second: f64,
}

impl PairCoefficients {
    pub fn new(l: usize, gamma: f64) -> Self {
        use std::f64::consts::PI;
        let lf = l as f64;
        let mode = |k: usize, x: usize| (2.0 / lf).sqrt() * (PI * (k * x) as f64 / lf).sin();
        let level = |k: usize| 2.0 * (1.0 - (PI * k as f64 / lf).cos());
        // m[k][k'] = Σ_x ψ_1(x)² ψ_k(x) ψ_k'(x) in one dimension
        let m: Vec<Vec<f64>> = (0..l)
            .map(|k| {
                (0..l)
                    .map(|kp| {
                        if k == 0 || kp == 0 {
                            0.0
                        } else {
                            (1..l)
                                .map(|x| mode(1, x).powi(2) * mode(k, x) * mode(kp, x))
                                .sum()
                        }
                    })
                    .collect()
            })
            .collect();
        let modes: Vec<[usize; 3]> = (1..l)
            .flat_map(|a| (1..l).flat_map(move |b| (1..l).map(move |c| [a, b, c])))
            .collect();
        let energy = |q: &[usize; 3]| level(q[0]) + level(q[1]) + level(q[2]);
        let e0 = 3.0 * level(1);
        let first = m[1][1].powi(3);
        let mut resolvent = 0.0;
        for p in &modes {
            let ep = energy(p);
            for q in &modes {
                if p == &[1, 1, 1] && q == &[1, 1, 1] {
                    continue;
                }
                let mm = m[p[0]][q[0]] * m[p[1]][q[1]] * m[p[2]][q[2]];
                if mm != 0.0 {
                    resolvent += mm * mm / (ep + energy(q) - 2.0 * e0);
                }
            }
        }
        PairCoefficients {
            first,
            second: gamma * first - resolvent,
        }
    }

    /// Smallest positive `a` with `8πa·first + (8πa)²·second = ΔE`.
    pub fn invert(&self, de: f64) -> f64 {
        let (c1, c2) = (self.first, self.second);
        let big_a = if c2.abs() < 1e-300 {
            de / c1
        } else {
            2.0 * de / (c1 + (c1 * c1 + 4.0 * c2 * de).sqrt())
        };
        big_a / (8.0 * std::f64::consts::PI)
    }
}

pub const SHIFT_CSV_HEADER: &str =
    "L,N_u,N_d,g,E0,residual,E0_free,dE,pred_8pi_a_NuNd_over_V,ratio,defect_u,defect_d,IR_1,IR_2,docc";

/// Ground energy shift against the free gas and its comparison with
/// `8πa N_u N_d / L³`.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftRow {
    pub l: usize,
    pub n_u: usize,
    pub n_d: usize,
    pub g: Coupling,
    pub e0: f64,
    pub residual: f64,
    /// Exact `E0(g=0)`, the sum of the lowest Dirichlet levels.
    pub e0_free: f64,
    pub free_degenerate: bool,
    pub de: f64,
    pub scattering_length: f64,
    pub prediction: f64,
    /// `None` when the prediction vanishes (`g = 0` or an empty species).
    pub ratio: Option<f64>,
    pub defect_u: f64,
    pub defect_d: f64,
    pub ir_1: f64,
    pub ir_2: f64,
    pub docc: f64,
    /// Two-body case only: `1/Σψ₀⁴` for the Dirichlet ground mode.
    pub v_eff: Option<f64>,
    /// Two-body case only: `ΔE V_eff / 8π`.
    pub a_first_order: Option<f64>,
    /// Two-body case only: root of the second-order relation of
    /// [`PairCoefficients`].
    pub a_extracted: Option<f64>,
    /// Two-body case only: `(V_eff^{1/3} - (L-1)) / 2`.
    pub offset: Option<f64>,
}

impl ShiftRow {
    pub fn csv_record(&self) -> String {
        let ratio = self
            .ratio
            .map_or_else(|| "nan".to_string(), |r| format!("{r:.12e}"));
        format!(
            "{},{},{},{},{:.15e},{:.3e},{:.15e},{:.15e},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.l,
            self.n_u,
            self.n_d,
            self.g,
            self.e0,
            self.residual,
            self.e0_free,
            self.de,
            self.prediction,
            ratio,
            self.defect_u,
            self.defect_d,
            self.ir_1,
            self.ir_2,
            self.docc
        )
    }
}

/// Runs the ground state at `g` and measures every observable of the row.
/// `E0(0)` is taken from the exact free spectrum; for `g = 0` the
/// diagonalized energy itself is reported, which equals it.
pub fn interaction_shift(
    l: usize,
    n_u: usize,
    n_d: usize,
    g: Coupling,
    gamma: f64,
    opts: &SolveOptions,
) -> Result<ShiftRow> {
    let basis = build_basis(l, n_u, n_d, g.is_infinite())?;
    let gs = ground_state(&basis, g, opts)?;
    let obs = observables(&basis, &gs, &[1, 2])?;
    let free = free_ground_energy(n_u, n_d, l)?;
    let a = scattering_length(g, gamma)?;
    let volume = (l as f64).powi(3);
    let prediction = 8.0 * std::f64::consts::PI * a * (n_u * n_d) as f64 / volume;
    let de = gs.energy - free.energy;
    let two_body = n_u == 1 && n_d == 1;
    let v_eff = two_body.then(|| pair_effective_volume(l));
    Ok(ShiftRow {
        l,
        n_u,
        n_d,
        g,
        e0: gs.energy,
        residual: gs.residual,
        e0_free: free.energy,
        free_degenerate: free.degenerate,
        de,
        scattering_length: a,
        prediction,
        ratio: (prediction > 0.0).then(|| de / prediction),
        defect_u: obs.defect_u,
        defect_d: obs.defect_d,
        ir_1: obs.i_r_expectation[0].1,
        ir_2: obs.i_r_expectation[1].1,
        docc: obs.double_occupancy,
        v_eff,
        a_first_order: v_eff.map(|v| de * v / (8.0 * std::f64::consts::PI)),
        a_extracted: two_body.then(|| PairCoefficients::new(l, gamma).invert(de)),
        offset: v_eff.map(|v| (v.cbrt() - (l as f64 - 1.0)) / 2.0),
    })
}

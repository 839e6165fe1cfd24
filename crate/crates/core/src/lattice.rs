//! Geometry, difference operators and Fourier machinery on `Z^3`.
//!
//! Fields are dense over a box. A non-periodic field is zero outside its
//! box, so every stencil operation returns a field on the box grown by one
//! shell. A periodic field lives on `[0, period)^3` and stands in for `Z^3`
//! with the period kept explicit.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Unit vectors `e^1, e^2, e^3`.
pub const UNIT: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(pub [i64; 3]);

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint([0, 0, 0]);

    pub fn new(x: i64, y: i64, z: i64) -> Self {
        LatticePoint([x, y, z])
    }

    pub fn norm_sq(self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn sup_norm(self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn shifted(self, axis: usize, step: i64) -> Self {
        let mut c = self.0;
        c[axis] += step;
        LatticePoint(c)
    }

    /// Reduces every coordinate into `[0, period)`.
    pub fn wrap(self, period: usize) -> Self {
        let p = period as i64;
        LatticePoint(self.0.map(|c| c.rem_euclid(p)))
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, o: Self) -> Self {
        LatticePoint([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, o: Self) -> Self {
        LatticePoint([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> Self {
        LatticePoint(self.0.map(|c| -c))
    }
}

/// Inclusive axis-aligned box `[lo, hi]` (per axis) in `Z^3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoxRegion {
    lo: [i64; 3],
    hi: [i64; 3],
}

impl BoxRegion {
    /// The cube `A(r) = center + [-r, r]^3`.
    pub fn cube(center: LatticePoint, r: u32) -> Self {
        let r = r as i64;
        BoxRegion {
            lo: center.0.map(|c| c - r),
            hi: center.0.map(|c| c + r),
        }
    }

    pub fn centered(r: u32) -> Self {
        Self::cube(LatticePoint::ORIGIN, r)
    }

    pub fn axis_box(lo: [i64; 3], hi: [i64; 3]) -> Result<Self> {
        if (0..3).any(|i| hi[i] < lo[i]) {
            return Err(invalid("region", format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// `[lo, hi]^3` with the same bounds on every axis.
    pub fn uniform(lo: i64, hi: i64) -> Result<Self> {
        Self::axis_box([lo; 3], [hi; 3])
    }

    /// The fundamental domain `[0, period)^3` of a periodic box.
    pub fn periodic_domain(period: usize) -> Self {
        let hi = period as i64 - 1;
        BoxRegion {
            lo: [0; 3],
            hi: [hi; 3],
        }
    }

    pub fn lo(&self) -> [i64; 3] {
        self.lo
    }

    pub fn hi(&self) -> [i64; 3] {
        self.hi
    }

    pub fn side(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side(0) * self.side(1) * self.side(2)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        (0..3).all(|i| p.0[i] >= self.lo[i] && p.0[i] <= self.hi[i])
    }

    /// Lexicographic index with the first coordinate slowest.
    pub fn index_of(&self, p: LatticePoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let (s1, s2) = (self.side(1), self.side(2));
        let d = [0, 1, 2].map(|i| (p.0[i] - self.lo[i]) as usize);
        Some((d[0] * s1 + d[1]) * s2 + d[2])
    }

    pub fn point(&self, index: usize) -> LatticePoint {
        let (s1, s2) = (self.side(1), self.side(2));
        let k = index % s2;
        let j = (index / s2) % s1;
        let i = index / (s1 * s2);
        LatticePoint([
            self.lo[0] + i as i64,
            self.lo[1] + j as i64,
            self.lo[2] + k as i64,
        ])
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn grow(&self, shell: i64) -> Self {
        BoxRegion {
            lo: self.lo.map(|c| c - shell),
            hi: self.hi.map(|c| c + shell),
        }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &BoxRegion) -> Self {
        BoxRegion {
            lo: [0, 1, 2].map(|i| self.lo[i].min(other.lo[i])),
            hi: [0, 1, 2].map(|i| self.hi[i].max(other.hi[i])),
        }
    }
}

/// Field values: real or complex.
pub trait Scalar:
    Copy
    + Default
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn conj(self) -> Self;
    fn abs_sq(self) -> f64;
    fn to_complex(self) -> Complex64;
    fn scale(self, s: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// A function on `Z^3` stored densely over a box, or a periodic function
/// stored over one period.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField<T: Scalar = f64> {
    region: BoxRegion,
    values: Vec<T>,
    period: Option<usize>,
}

impl<T: Scalar> LatticeField<T> {
    pub fn zeros(region: BoxRegion) -> Self {
        LatticeField {
            region,
            values: vec![T::default(); region.len()],
            period: None,
        }
    }

    pub fn from_fn(region: BoxRegion, mut f: impl FnMut(LatticePoint) -> T) -> Self {
        let values = region.points().map(&mut f).collect();
        LatticeField {
            region,
            values,
            period: None,
        }
    }

    pub fn from_values(region: BoxRegion, values: Vec<T>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(invalid(
                "values",
                format!(
                    "{} values for a box of {} points",
                    values.len(),
                    region.len()
                ),
            ));
        }
        Ok(LatticeField {
            region,
            values,
            period: None,
        })
    }

    pub fn periodic_zeros(period: usize) -> Result<Self> {
        if period == 0 {
            return Err(invalid("period", "must be positive"));
        }
        Ok(LatticeField {
            region: BoxRegion::periodic_domain(period),
            values: vec![T::default(); period.pow(3)],
            period: Some(period),
        })
    }

    pub fn periodic_from_fn(period: usize, f: impl FnMut(LatticePoint) -> T) -> Result<Self> {
        if period == 0 {
            return Err(invalid("period", "must be positive"));
        }
        let mut field = Self::from_fn(BoxRegion::periodic_domain(period), f);
        field.period = Some(period);
        Ok(field)
    }

    pub fn periodic_from_values(period: usize, values: Vec<T>) -> Result<Self> {
        let mut field = Self::from_values(BoxRegion::periodic_domain(period), values)?;
        field.period = Some(period);
        Ok(field)
    }

    /// Kronecker delta at `at`, supported on the single point.
    pub fn delta(at: LatticePoint) -> Self {
        let region = BoxRegion::cube(at, 0);
        LatticeField {
            region,
            values: vec![T::from_f64(1.0)],
            period: None,
        }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value at any point of `Z^3`: wrapped when periodic, zero off the
    /// support otherwise.
    pub fn get(&self, p: LatticePoint) -> T {
        match self.period {
            Some(n) => self.values[self.region.index_of(p.wrap(n)).expect("wrapped point")],
            None => self
                .region
                .index_of(p)
                .map_or(T::default(), |i| self.values[i]),
        }
    }

    pub fn set(&mut self, p: LatticePoint, value: T) -> Result<()> {
        let q = match self.period {
            Some(n) => p.wrap(n),
            None => p,
        };
        let idx = self
            .region
            .index_of(q)
            .ok_or_else(|| invalid("point", format!("{:?} outside the support", p.0)))?;
        self.values[idx] = value;
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.abs_sq()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::default(), |acc, &v| acc + v)
    }

    /// `<self|other> = sum conj(self) other` over the union of supports.
    pub fn inner(&self, other: &LatticeField<T>) -> T {
        match (self.period, other.period) {
            (Some(a), Some(b)) if a == b => self
                .values
                .iter()
                .zip(&other.values)
                .fold(T::default(), |acc, (&u, &v)| acc + u.conj() * v),
            _ => self
                .region
                .points()
                .zip(&self.values)
                .fold(T::default(), |acc, (p, &u)| acc + u.conj() * other.get(p)),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> LatticeField<U> {
        LatticeField {
            region: self.region,
            values: self.values.iter().map(|&v| f(v)).collect(),
            period: self.period,
        }
    }

    /// Region an operator with a one-step stencil writes to.
    fn stencil_region(&self) -> BoxRegion {
        match self.period {
            Some(_) => self.region,
            None => self.region.grow(1),
        }
    }

    fn with_same_layout(&self, region: BoxRegion, f: impl FnMut(LatticePoint) -> T) -> Self {
        let mut out = Self::from_fn(region, f);
        out.period = self.period;
        out
    }

    /// Largest absolute difference from `other` over both supports.
    pub fn max_abs_diff(&self, other: &LatticeField<T>) -> f64 {
        let region = match (self.period, other.period) {
            (Some(_), Some(_)) => self.region,
            _ => self.region.hull(&other.region),
        };
        region
            .points()
            .map(|p| (self.get(p) - other.get(p)).abs_sq().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `(Δf)(x) = Σ_{|y-x|=1} (f(y) - f(x))`.
pub fn laplacian_apply<T: Scalar>(f: &LatticeField<T>) -> LatticeField<T> {
    f.with_same_layout(f.stencil_region(), |x| {
        let fx = f.get(x);
        let mut acc = T::default();
        for axis in 0..3 {
            acc += f.get(x.shifted(axis, 1)) - fx;
            acc += f.get(x.shifted(axis, -1)) - fx;
        }
        acc
    })
}

/// Forward differences `f(x+e^i) - f(x)`, or with `adjoint` the
/// backward differences `f(x-e^i) - f(x)`.
pub fn gradient_apply<T: Scalar>(f: &LatticeField<T>, adjoint: bool) -> [LatticeField<T>; 3] {
    let step = if adjoint { -1 } else { 1 };
    let region = f.stencil_region();
    [0, 1, 2].map(|axis| f.with_same_layout(region, |x| f.get(x.shifted(axis, step)) - f.get(x)))
}

/// Sum of `∇^{i†} g_i` for a triple of fields.
pub fn divergence_adjoint<T: Scalar>(g: &[LatticeField<T>; 3]) -> LatticeField<T> {
    let region = g[0].stencil_region();
    g[0].with_same_layout(region, |x| {
        let mut acc = T::default();
        for (axis, gi) in g.iter().enumerate() {
            acc += gi.get(x.shifted(axis, -1)) - gi.get(x);
        }
        acc
    })
}

/// Membership test for `A`, taken modulo the period for periodic fields.
fn membership(a: &BoxRegion, period: Option<usize>) -> impl Fn(LatticePoint) -> bool + '_ {
    move |x: LatticePoint| match period {
        None => a.contains(x),
        Some(n) => {
            let n = n as i64;
            let lo = a.lo();
            let hi = a.hi();
            (0..3).all(|i| {
                // smallest representative of x_i that is >= lo_i
                let rep = lo[i] + (x.0[i] - lo[i]).rem_euclid(n);
                hi[i] - lo[i] + 1 >= n || rep <= hi[i]
            })
        }
    }
}

/// `[∇†θ_A∇]_s f = ½(∇†·θ_A∇ + ∇·θ_A∇†) f`, the Neumann-type form on `A`.
pub fn neumann_form_apply<T: Scalar>(a: &BoxRegion, f: &LatticeField<T>) -> LatticeField<T> {
    let theta = membership(a, f.period());
    let region = f.stencil_region();
    f.with_same_layout(region, |x| {
        let fx = f.get(x);
        let tx = if theta(x) { 1.0 } else { 0.0 };
        let mut acc = T::default();
        for axis in 0..3 {
            let xm = x.shifted(axis, -1);
            let xp = x.shifted(axis, 1);
            let (fm, fp) = (f.get(xm), f.get(xp));
            let tm = if theta(xm) { 1.0 } else { 0.0 };
            let tp = if theta(xp) { 1.0 } else { 0.0 };
            // bond (x-e, x) carries ½(θ(x-e) + θ(x)), bond (x, x+e) ½(θ(x) + θ(x+e))
            acc += (fx - fm).scale(0.5 * (tm + tx));
            acc += (fx - fp).scale(0.5 * (tx + tp));
        }
        acc
    })
}

/// Both evaluations of `<f|∂̃_A|g>` with `∂̃_A = [∇†θ_A∇]_s + θ_A Δ`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryForm<T> {
    /// `<f|[∇†θ_A∇]_s g> + <f|θ_A Δ g>` by applying the operators.
    pub operator_form: T,
    /// `½ Σ_{x∈A, y∉A, |x-y|=1} conj(f(x)+f(y)) (g(y)-g(x))`.
    pub boundary_sum: T,
}

pub fn dt_apply<T: Scalar>(
    a: &BoxRegion,
    f: &LatticeField<T>,
    g: &LatticeField<T>,
) -> BoundaryForm<T> {
    let theta = membership(a, g.period());
    let ng = neumann_form_apply(a, g);
    let lg = laplacian_apply(g);
    let region = match g.period() {
        Some(_) => *g.region(),
        None => ng.region().hull(&f.region().grow(1)).hull(&a.grow(1)),
    };
    let mut operator_form = T::default();
    for x in region.points() {
        let mut v = ng.get(x);
        if theta(x) {
            v += lg.get(x);
        }
        operator_form += f.get(x).conj() * v;
    }

    let mut boundary_sum = T::default();
    let inside: Vec<LatticePoint> = match g.period() {
        Some(n) => BoxRegion::periodic_domain(n)
            .points()
            .filter(|&x| theta(x))
            .collect(),
        None => a.points().collect(),
    };
    for x in inside {
        for axis in 0..3 {
            for step in [-1, 1] {
                let y = x.shifted(axis, step);
                if !theta(y) {
                    boundary_sum += (f.get(x) + f.get(y)).conj() * (g.get(y) - g.get(x));
                }
            }
        }
    }
    BoundaryForm {
        operator_form,
        boundary_sum: boundary_sum.scale(0.5),
    }
}

/// `E(p) = 2 Σ_i (1 - cos p^i)`.
pub fn dispersion(p: [f64; 3]) -> f64 {
    2.0 * p.iter().map(|&c| 1.0 - c.cos()).sum::<f64>()
}

/// Values on the momentum grid `p = 2πm/Λ` of a period-`Λ` box. Index
/// order matches [`BoxRegion::periodic_domain`]; `m` is read back into
/// `(-Λ/2, Λ/2]` so momenta lie in `(-π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    period: usize,
    values: Vec<Complex64>,
}

impl SpectralGrid {
    pub fn from_fn(period: usize, mut f: impl FnMut([f64; 3]) -> Complex64) -> Result<Self> {
        if period == 0 {
            return Err(invalid("period", "must be positive"));
        }
        let values = (0..period.pow(3))
            .map(|i| f(grid_momentum(period, i)))
            .collect();
        Ok(SpectralGrid { period, values })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn momentum(&self, index: usize) -> [f64; 3] {
        grid_momentum(self.period, index)
    }

    /// `Σ_p |ψ̂(p)|² / Λ³`, equal to `‖ψ‖²` by Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }

    /// `Σ_p E(p) |ψ̂(p)|² / Λ³`, the kinetic energy `<ψ|-Δ|ψ>`.
    pub fn kinetic(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| dispersion(self.momentum(i)) * v.norm_sqr())
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn multiply(&self, other: &SpectralGrid) -> Result<SpectralGrid> {
        if self.period != other.period {
            return Err(invalid("period", "spectral grids differ in period"));
        }
        Ok(SpectralGrid {
            period: self.period,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

/// Signed grid index in `(-Λ/2, Λ/2]`.
pub fn signed_index(m: usize, period: usize) -> i64 {
    let m = m as i64;
    let n = period as i64;
    if 2 * m > n {
        m - n
    } else {
        m
    }
}

pub fn grid_momentum(period: usize, index: usize) -> [f64; 3] {
    let k = index % period;
    let j = (index / period) % period;
    let i = index / (period * period);
    let scale = 2.0 * std::f64::consts::PI / period as f64;
    [i, j, k].map(|m| scale * signed_index(m, period) as f64)
}

/// In-place 3D FFT over a `period^3` array in lexicographic order.
pub(crate) fn fft3(data: &mut [Complex64], period: usize, inverse: bool) {
    let n = period;
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // last axis is contiguous
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut line = vec![Complex64::default(); n];
    for stride in [n, n * n] {
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + off + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + off + t * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// `ψ̂(p) = Σ_x e^{-ip·x} ψ(x)` on the period grid.
pub fn dft<T: Scalar>(f: &LatticeField<T>) -> Result<SpectralGrid> {
    let period = f
        .period()
        .ok_or_else(|| invalid("field", "the DFT needs a periodic field"))?;
    let mut data: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
    fft3(&mut data, period, false);
    Ok(SpectralGrid {
        period,
        values: data,
    })
}

/// `ψ(x) = Λ^{-3} Σ_p e^{ip·x} ψ̂(p)`.
pub fn inverse_dft(spec: &SpectralGrid) -> LatticeField<Complex64> {
    let mut data = spec.values.clone();
    fft3(&mut data, spec.period, true);
    LatticeField::periodic_from_values(spec.period, data).expect("consistent layout")
}

/// `(C_h f)(x) = Σ_y h(x-y) f(y)` by direct summation. With `adjoint`
/// the kernel becomes `conj(h(-z))`. Periodic inputs must share a period
/// and are convolved circularly.
pub fn convolve<T: Scalar>(
    h: &LatticeField<T>,
    f: &LatticeField<T>,
    adjoint: bool,
) -> Result<LatticeField<T>> {
    let kernel = |z: LatticePoint| {
        if adjoint {
            h.get(-z).conj()
        } else {
            h.get(z)
        }
    };
    match (h.period(), f.period()) {
        (None, None) => {
            let hr = if adjoint {
                BoxRegion::axis_box(h.region().hi().map(|c| -c), h.region().lo().map(|c| -c))?
            } else {
                *h.region()
            };
            let region = BoxRegion::axis_box(
                [0, 1, 2].map(|i| hr.lo()[i] + f.region().lo()[i]),
                [0, 1, 2].map(|i| hr.hi()[i] + f.region().hi()[i]),
            )?;
            Ok(LatticeField::from_fn(region, |x| {
                let mut acc = T::default();
                for (y, &fy) in f.region().points().zip(f.values()) {
                    acc += kernel(x - y) * fy;
                }
                acc
            }))
        }
        (Some(a), Some(b)) if a == b => {
            let dom = BoxRegion::periodic_domain(a);
            LatticeField::periodic_from_fn(a, |x| {
                let mut acc = T::default();
                for (y, &fy) in dom.points().zip(f.values()) {
                    acc += kernel(x - y) * fy;
                }
                acc
            })
        }
        _ => Err(invalid(
            "field",
            "convolution needs two finite or two equally periodic fields",
        )),
    }
}

/// Circular convolution through the DFT: `(h*f)^ = ĥ f̂`.
pub fn convolve_spectral<T: Scalar>(
    h: &LatticeField<T>,
    f: &LatticeField<T>,
    adjoint: bool,
) -> Result<LatticeField<Complex64>> {
    let mut hh = dft(h)?;
    if adjoint {
        hh.values_mut().iter_mut().for_each(|v| *v = v.conj());
    }
    let ff = dft(f)?;
    Ok(inverse_dft(&hh.multiply(&ff)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_periodic(n: usize, seed: u64) -> LatticeField<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatticeField::periodic_from_fn(n, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .unwrap()
    }

    fn random_box(r: BoxRegion, seed: u64) -> LatticeField<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatticeField::from_fn(r, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn laplacian_of_delta() {
        let d = LatticeField::<f64>::delta(LatticePoint::ORIGIN);
        let l = laplacian_apply(&d);
        assert_eq!(l.get(LatticePoint::ORIGIN), -6.0);
        assert_eq!(l.get(LatticePoint::new(1, 0, 0)), 1.0);
        assert_eq!(l.get(LatticePoint::new(1, 1, 0)), 0.0);
    }

    #[test]
    fn constants_are_harmonic_on_periodic_box() {
        let f = LatticeField::periodic_from_fn(5, |_| 2.5).unwrap();
        assert!(laplacian_apply(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_delta() {
        let d = LatticeField::<f64>::delta(LatticePoint::ORIGIN);
        let g = gradient_apply(&d, false);
        assert_eq!(g[0].get(LatticePoint::ORIGIN), -1.0);
        assert_eq!(g[0].get(LatticePoint::new(-1, 0, 0)), 1.0);
        let minus_lap = divergence_adjoint(&g);
        let lap = laplacian_apply(&d);
        assert_eq!(minus_lap.max_abs_diff(&lap.map(|v: f64| -v)), 0.0);
    }

    #[test]
    fn kinetic_form_is_sum_of_gradient_norms() {
        let f = random_periodic(8, 3);
        let g = gradient_apply(&f, false);
        let lhs = f.inner(&divergence_adjoint(&g)).re;
        let rhs: f64 = g.iter().map(|gi| gi.norm_sq()).sum();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn neumann_form_annihilates_constants() {
        let a = BoxRegion::centered(2);
        let f = LatticeField::from_fn(BoxRegion::centered(4), |_| 1.0);
        let nf = neumann_form_apply(&a, &f);
        // constant on a box that covers A plus a shell
        for x in BoxRegion::centered(3).points() {
            assert_eq!(nf.get(x), 0.0);
        }
        let fp = LatticeField::periodic_from_fn(6, |_| 1.0).unwrap();
        assert!(neumann_form_apply(&a, &fp)
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn neumann_form_is_laplacian_inside_large_region() {
        let f = random_box(BoxRegion::centered(1), 7);
        let a = BoxRegion::centered(2);
        let nf = neumann_form_apply(&a, &f);
        let lap = laplacian_apply(&f);
        for x in f.region().points() {
            assert!((nf.get(x) + lap.get(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_neumann_matrix_is_symmetric_psd() {
        // assemble on a 5^3 box with A = A(1) and check against a bond sum
        let dom = BoxRegion::centered(2);
        let a = BoxRegion::centered(1);
        let n = dom.len();
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let e =
                LatticeField::from_fn(dom, |x| if dom.index_of(x) == Some(j) { 1.0 } else { 0.0 });
            let col = neumann_form_apply(&a, &e);
            for i in 0..n {
                m[(i, j)] = col.get(dom.point(i));
            }
        }
        assert!((&m - m.transpose()).amax() < 1e-15);
        let eig = nalgebra::SymmetricEigen::new(m);
        assert!(eig.eigenvalues.min() > -1e-12);
    }

    #[test]
    fn boundary_form_is_empty_away_from_boundary() {
        let a = BoxRegion::centered(4);
        let f = random_box(BoxRegion::centered(1), 1);
        let g = random_box(BoxRegion::centered(2), 2);
        let v = dt_apply(&a, &f, &g);
        assert!(v.operator_form.abs() < 1e-13);
        assert_eq!(v.boundary_sum, 0.0);
    }

    #[test]
    fn boundary_form_identity_on_random_fields() {
        for seed in 0..5 {
            let f = random_box(BoxRegion::uniform(-3, 2).unwrap(), seed);
            let g = random_box(BoxRegion::uniform(-2, 3).unwrap(), seed + 100);
            let a = BoxRegion::axis_box([-1, -2, 0], [1, 1, 2]).unwrap();
            let v = dt_apply(&a, &f, &g);
            assert!((v.operator_form - v.boundary_sum).abs() < 1e-12, "{v:?}");
        }
        // periodic, complex
        let f = random_periodic(6, 11);
        let g = random_periodic(6, 12);
        let v = dt_apply(&BoxRegion::centered(1), &f, &g);
        assert!((v.operator_form - v.boundary_sum).norm() < 1e-12);
    }

    #[test]
    fn dft_of_delta_is_one() {
        let mut d = LatticeField::<f64>::periodic_zeros(6).unwrap();
        d.set(LatticePoint::ORIGIN, 1.0).unwrap();
        let s = dft(&d).unwrap();
        assert!(s
            .values()
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn dft_round_trip_parseval_and_kinetic() {
        let f = random_periodic(7, 5);
        let s = dft(&f).unwrap();
        let back = inverse_dft(&s);
        assert!(back.max_abs_diff(&f) < 1e-12);
        assert!((s.norm_sq() - f.norm_sq()).abs() < 1e-12 * f.norm_sq());
        let kin = -f.inner(&laplacian_apply(&f)).re;
        assert!((s.kinetic() - kin).abs() < 1e-12 * kin);
    }

    #[test]
    fn dft_matches_definition() {
        let f = random_periodic(4, 9);
        let s = dft(&f).unwrap();
        for idx in [0, 5, 17, 63] {
            let p = s.momentum(idx);
            let mut direct = Complex64::default();
            for x in f.region().points() {
                let phase = -(p[0] * x.0[0] as f64 + p[1] * x.0[1] as f64 + p[2] * x.0[2] as f64);
                direct += Complex64::from_polar(1.0, phase) * f.get(x);
            }
            assert!((direct - s.values()[idx]).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_identity_and_adjoint() {
        let f = random_box(BoxRegion::centered(1), 3);
        let d = LatticeField::<f64>::delta(LatticePoint::ORIGIN);
        assert!(convolve(&d, &f, false).unwrap().max_abs_diff(&f) < 1e-15);

        let h = random_box(BoxRegion::axis_box([0, -1, 0], [2, 1, 1]).unwrap(), 4);
        let g = random_box(BoxRegion::uniform(-2, 2).unwrap(), 5);
        let lhs = g.inner(&convolve(&h, &f, false).unwrap());
        let rhs = convolve(&h, &g, true).unwrap().inner(&f);
        assert!((lhs - rhs).abs() < 1e-12);
        // double-sum oracle for <g|C_h f>
        let mut oracle = 0.0;
        for x in BoxRegion::centered(6).points() {
            for y in f.region().points() {
                oracle += g.get(x) * h.get(x - y) * f.get(y);
            }
        }
        assert!((lhs - oracle).abs() < 1e-12);
    }

    #[test]
    fn convolution_theorem_and_spectral_path() {
        let h = random_periodic(6, 21);
        let f = random_periodic(6, 22);
        for adjoint in [false, true] {
            let direct = convolve(&h, &f, adjoint).unwrap();
            let spectral = convolve_spectral(&h, &f, adjoint).unwrap();
            assert!(direct.max_abs_diff(&spectral) < 1e-10);
        }
        let prod = dft(&h).unwrap().multiply(&dft(&f).unwrap()).unwrap();
        let conv = dft(&convolve(&h, &f, false).unwrap()).unwrap();
        for (a, b) in prod.values().iter().zip(conv.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn dispersion_values() {
        assert_eq!(dispersion([0.0; 3]), 0.0);
        assert!((dispersion([PI; 3]) - 12.0).abs() < 1e-15);
        assert!((dispersion([PI / 2.0, 0.0, 0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn box_indexing_round_trips() {
        let b = BoxRegion::axis_box([-1, 0, 2], [1, 3, 4]).unwrap();
        assert_eq!(b.len(), 3 * 4 * 3);
        for i in 0..b.len() {
            assert_eq!(b.index_of(b.point(i)), Some(i));
        }
        assert_eq!(BoxRegion::centered(2).len(), 125);
        assert!(BoxRegion::uniform(2, 1).is_err());
    }

    #[test]
    fn periodic_membership_wraps() {
        let a = BoxRegion::centered(1);
        let theta = membership(&a, Some(6));
        assert!(theta(LatticePoint::new(5, 0, 1)));
        assert!(!theta(LatticePoint::new(2, 0, 0)));
        assert!(theta(LatticePoint::new(0, 5, 5)));
        assert!(!theta(LatticePoint::new(0, 4, 0)));
    }
}

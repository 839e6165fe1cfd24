//! Lanczos solvers for the lowest eigenpair of a real symmetric operator.
//!
//! Two variants share the tridiagonal machinery:
//!
//! * [`lowest_eigenpair`] keeps the Krylov basis, reorthogonalizes fully and
//!   restarts from the current Ritz vector. Used while `dim * krylov_dim`
//!   vectors fit comfortably in memory.
//! * [`lowest_eigenpair_lowmem`] runs the plain three-term recurrence with
//!   three live vectors and regenerates the basis in a second pass to form
//!   the Ritz vector. Loss of orthogonality only produces spurious copies of
//!   converged Ritz values, which do not disturb the lowest one.
//!
//! Dot products and norms are accumulated sequentially so repeated runs are
//! bit-identical.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A real symmetric linear map applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Residual target `‖Ax - θx‖ ≤ tol · max(1, |θ|)`.
    pub tol: f64,
    /// Krylov dimension per restart cycle (reorthogonalized variant).
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Iteration cap per cycle of the low-memory variant.
    pub max_iter: usize,
    pub want_vector: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            krylov_dim: 80,
            max_restarts: 200,
            max_iter: 3000,
            want_vector: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Option<Vec<f64>>,
    /// `‖Ax - θx‖` of the returned unit vector; for value-only runs the
    /// Lanczos estimate `β_k |y_k|`.
    pub residual: f64,
    pub matvecs: usize,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Normalized pseudo-random start vector, zero wherever `keep` is false.
pub fn random_start(dim: usize, seed: u64, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim)
        .map(|i| {
            let r: f64 = rng.gen_range(-1.0..1.0);
            if keep(i) {
                r
            } else {
                0.0
            }
        })
        .collect();
    let n = norm(&v);
    if n > 0.0 {
        scale(1.0 / n, &mut v);
    }
    v
}

/// Number of eigenvalues of the tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 {
            0.0
        } else {
            beta[i - 1] * beta[i - 1]
        };
        d = alpha[i] - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + x.abs() + 1.0);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - σ) y = b` with partial pivoting.
fn tridiagonal_solve(alpha: &[f64], beta: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = alpha.len();
    if n == 1 {
        let d = alpha[0] - sigma;
        let d = if d.abs() < 1e-300 { 1e-300 } else { d };
        return vec![b[0] / d];
    }
    // rows stored as (l, d, u, u2) for the pivoted elimination
    let mut dl: Vec<f64> = beta.to_vec();
    let mut d: Vec<f64> = alpha.iter().map(|a| a - sigma).collect();
    let mut du: Vec<f64> = beta.to_vec();
    let mut du2 = vec![0.0; n];
    let mut x = b.to_vec();
    let tiny = 1e-300;
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let piv = if d[i].abs() < tiny { tiny } else { d[i] };
            d[i] = piv;
            let f = dl[i] / piv;
            d[i + 1] -= f * du[i];
            x[i + 1] -= f * x[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            du[i] = tmp;
            x.swap(i, i + 1);
            x[i + 1] -= f * x[i];
        }
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = tiny;
    }
    x[n - 1] /= d[n - 1];
    x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    x
}

/// Cyclic Jacobi diagonalization of a small symmetric matrix. Unlike a
/// QR sweep with closed-form 2×2 blocks it keeps eigenvector components
/// of order `|h_ij| / gap` even when `|h_ij|` is far below `eps·‖H‖`,
/// which the Ritz residual estimates depend on.
pub fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off == 0.0 {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                // far below anything a residual estimate can resolve
                if apq.abs() <= 1e-20 * (app.abs() + aqq.abs()) || apq.abs() <= 1e-300 {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

struct JacobiEigen {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl JacobiEigen {
    fn new(m: DMatrix<f64>) -> Self {
        let (eigenvalues, eigenvectors) = jacobi_eigen(m);
        JacobiEigen {
            eigenvalues,
            eigenvectors,
        }
    }
}

/// Lowest Ritz pair of the tridiagonal: value and unit eigenvector.
pub fn tridiagonal_lowest_pair(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let n = alpha.len();
    if n <= 64 {
        let mut t = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = alpha[i];
            if i + 1 < n {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (values, vectors) = jacobi_eigen(t);
        let k = (0..n)
            .min_by(|&p, &q| values[p].total_cmp(&values[q]))
            .unwrap_or(0);
        return (values[k], vectors.column(k).iter().copied().collect());
    }
    let theta = tridiagonal_lowest(alpha, beta);
    let scale_t = alpha.iter().map(|a| a.abs()).fold(1.0, f64::max);
    let sigma = theta - 1e-14 * scale_t;
    let mut y: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
    for _ in 0..4 {
        y = tridiagonal_solve(alpha, beta, sigma, &y);
        let nrm = norm(&y);
        scale(1.0 / nrm, &mut y);
    }
    (theta, y)
}

/// Lanczos with full reorthogonalization and thick restarts: at the end of
/// a cycle the lowest half of the Ritz vectors is kept and the Krylov
/// expansion continues from the residual direction.
pub fn lowest_eigenpair(
    op: &dyn LinearOperator,
    start: &[f64],
    opts: &LanczosOptions,
) -> Result<EigenPair> {
    let n = op.dim();
    assert_eq!(start.len(), n);
    let m = opts.krylov_dim.min(n).max(2);
    let keep = (m / 2).max(1);
    let mut x = start.to_vec();
    let nx = norm(&x);
    if nx == 0.0 {
        return Err(Error::NoConvergence {
            what: "lanczos",
            detail: "zero start vector".into(),
        });
    }
    scale(1.0 / nx, &mut x);
    if n == 1 {
        let mut y = vec![0.0];
        op.apply(&x, &mut y);
        return Ok(EigenPair {
            value: y[0],
            vector: opts.want_vector.then_some(x),
            residual: 0.0,
            matvecs: 1,
        });
    }
    let mut matvecs = 0;
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = vec![x];
    // projected matrix V^T A V
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut cycles = 0;

    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        matvecs += 1;
        for i in 0..=j {
            let c = dot(&basis[i], &w);
            h[(i, j)] = c;
            h[(j, i)] = c;
        }
        for i in 0..=j {
            axpy(-h[(i, j)], &basis[i], &mut w);
        }
        for q in &basis {
            let c = dot(q, &w);
            axpy(-c, q, &mut w);
        }
        let b = norm(&w);
        let eig = JacobiEigen::new(h.view((0, 0), (j + 1, j + 1)).into_owned());
        let mut order: Vec<usize> = (0..=j).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
        let lo = order[0];
        let theta = eig.eigenvalues[lo];
        let scale_ref = theta.abs().max(1.0);
        let est = b * eig.eigenvectors[(j, lo)].abs();
        let exhausted = b <= 1e-13 * scale_ref;

        if est <= 0.1 * opts.tol * scale_ref || exhausted {
            let mut x = vec![0.0; n];
            for (i, q) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(i, lo)], q, &mut x);
            }
            let nx = norm(&x);
            scale(1.0 / nx, &mut x);
            op.apply(&x, &mut w);
            matvecs += 1;
            let rq = dot(&x, &w);
            axpy(-rq, &x, &mut w);
            let res = norm(&w);
            last = (rq, res);
            if res <= opts.tol * rq.abs().max(1.0) {
                return Ok(EigenPair {
                    value: rq,
                    vector: opts.want_vector.then_some(x),
                    residual: res,
                    matvecs,
                });
            }
            // the estimate was optimistic: restart from the Ritz vector alone
            basis = vec![x];
            h.fill(0.0);
            cycles += 1;
        } else if basis.len() == m {
            cycles += 1;
            last = (theta, est);
            if cycles > opts.max_restarts {
                break;
            }
            let mut next = w.clone();
            scale(1.0 / b, &mut next);
            let mut kept: Vec<Vec<f64>> = Vec::with_capacity(keep + 1);
            for &c in order.iter().take(keep) {
                let mut u = vec![0.0; n];
                for (i, q) in basis.iter().enumerate() {
                    axpy(eig.eigenvectors[(i, c)], q, &mut u);
                }
                kept.push(u);
            }
            h.fill(0.0);
            for (i, &c) in order.iter().take(keep).enumerate() {
                h[(i, i)] = eig.eigenvalues[c];
            }
            kept.push(next);
            basis = kept;
        } else {
            let mut next = w.clone();
            scale(1.0 / b, &mut next);
            basis.push(next);
        }
        if cycles > opts.max_restarts {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "lanczos",
        detail: format!("best value {} with residual {:.3e}", last.0, last.1),
    })
}

/// Plain Lanczos keeping three vectors; the Ritz vector is rebuilt by a
/// second pass over the same recurrence.
pub fn lowest_eigenpair_lowmem(
    op: &dyn LinearOperator,
    start: &[f64],
    opts: &LanczosOptions,
) -> Result<EigenPair> {
    let n = op.dim();
    assert_eq!(start.len(), n);
    let mut x = start.to_vec();
    let nx = norm(&x);
    scale(1.0 / nx, &mut x);
    let mut matvecs = 0;
    let mut last = (f64::INFINITY, f64::INFINITY);

    for _cycle in 0..=opts.max_restarts.min(20) {
        // first pass: coefficients only
        let (alpha, beta, steps, b_final) = {
            let mut prev = vec![0.0; n];
            let mut cur = x.clone();
            let mut w = vec![0.0; n];
            let mut alpha = Vec::new();
            let mut beta: Vec<f64> = Vec::new();
            let mut last_theta = f64::INFINITY;
            let mut steps = 0;
            let mut b_final = 0.0;
            for j in 0..opts.max_iter {
                op.apply(&cur, &mut w);
                matvecs += 1;
                let a = dot(&cur, &w);
                alpha.push(a);
                axpy(-a, &cur, &mut w);
                if j > 0 {
                    axpy(-beta[j - 1], &prev, &mut w);
                }
                let b = norm(&w);
                steps = j + 1;
                b_final = b;
                if j + 1 == opts.max_iter {
                    break;
                }
                if j % 5 == 4 || b < 1e-14 {
                    let (theta, y) = tridiagonal_lowest_pair(&alpha, &beta);
                    let est = b * y[j].abs();
                    let scale_ref = theta.abs().max(1.0);
                    let stalled = (last_theta - theta).abs() <= 1e-3 * opts.tol * scale_ref;
                    last_theta = theta;
                    if est <= 0.1 * opts.tol * scale_ref
                        || b <= 1e-14 * scale_ref
                        || (stalled && est <= opts.tol * scale_ref)
                    {
                        break;
                    }
                }
                beta.push(b);
                // prev <- cur, cur <- w / b
                std::mem::swap(&mut prev, &mut cur);
                cur.copy_from_slice(&w);
                scale(1.0 / b, &mut cur);
            }
            (alpha, beta, steps, b_final)
        };
        let (theta, y) = tridiagonal_lowest_pair(&alpha, &beta);
        if !opts.want_vector {
            return Ok(EigenPair {
                value: theta,
                vector: None,
                residual: b_final * y[steps - 1].abs(),
                matvecs,
            });
        }
        // second pass: accumulate the Ritz vector
        let mut acc = vec![0.0; n];
        {
            let mut prev = vec![0.0; n];
            let mut cur = std::mem::take(&mut x);
            let mut w = vec![0.0; n];
            for j in 0..steps {
                axpy(y[j], &cur, &mut acc);
                if j + 1 == steps {
                    break;
                }
                op.apply(&cur, &mut w);
                matvecs += 1;
                axpy(-alpha[j], &cur, &mut w);
                if j > 0 {
                    axpy(-beta[j - 1], &prev, &mut w);
                }
                std::mem::swap(&mut prev, &mut cur);
                cur.copy_from_slice(&w);
                scale(1.0 / beta[j], &mut cur);
            }
        }
        let na = norm(&acc);
        scale(1.0 / na, &mut acc);
        let mut w = vec![0.0; n];
        op.apply(&acc, &mut w);
        matvecs += 1;
        let rq = dot(&acc, &w);
        axpy(-rq, &acc, &mut w);
        let res = norm(&w);
        last = (rq, res);
        if res <= opts.tol * rq.abs().max(1.0) {
            return Ok(EigenPair {
                value: rq,
                vector: Some(acc),
                residual: res,
                matvecs,
            });
        }
        x = acc;
    }
    Err(Error::NoConvergence {
        what: "lanczos (low memory)",
        detail: format!("best value {} with residual {:.3e}", last.0, last.1),
    })
}

/// Dense oracle: all eigenvalues in ascending order.
pub fn dense_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Assembles the dense matrix of an operator column by column.
pub fn assemble_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a + a.transpose()
    }

    #[test]
    fn tridiagonal_bisection_matches_dense() {
        let alpha: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let beta: Vec<f64> = (0..99)
            .map(|i| 0.5 + (i as f64 * 0.11).cos() * 0.3)
            .collect();
        let mut t = DMatrix::<f64>::zeros(100, 100);
        for i in 0..100 {
            t[(i, i)] = alpha[i];
            if i < 99 {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let dense = dense_eigenvalues(t.clone())[0];
        let (theta, y) = tridiagonal_lowest_pair(&alpha, &beta);
        assert!((theta - dense).abs() < 1e-12);
        let ty = &t * nalgebra::DVector::from_vec(y.clone());
        let r: f64 = ty
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(r < 1e-10, "inverse iteration residual {r}");
    }

    #[test]
    fn both_lanczos_variants_match_dense() {
        let m = random_symmetric(300, 1);
        let exact = dense_eigenvalues(m.clone())[0];
        let start = random_start(300, 7, |_| true);
        let opts = LanczosOptions {
            tol: 1e-10,
            krylov_dim: 40,
            ..Default::default()
        };
        let a = lowest_eigenpair(&m, &start, &opts).unwrap();
        assert!((a.value - exact).abs() < 1e-9, "{} vs {exact}", a.value);
        assert!(a.residual <= 1e-10 * a.value.abs());
        let b = lowest_eigenpair_lowmem(&m, &start, &opts).unwrap();
        assert!((b.value - exact).abs() < 1e-9, "{} vs {exact}", b.value);
        assert!(b.residual <= 1e-10 * b.value.abs());
    }

    #[test]
    fn lanczos_is_deterministic() {
        let m = random_symmetric(120, 3);
        let start = random_start(120, 1, |_| true);
        let opts = LanczosOptions::default();
        let a = lowest_eigenpair(&m, &start, &opts).unwrap();
        let b = lowest_eigenpair(&m, &start, &opts).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn invariant_subspace_terminates() {
        let m =
            DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0, 5.0]));
        let start = vec![0.0, 1.0, 1.0, 0.0];
        let r = lowest_eigenpair(&m, &start, &LanczosOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }
}

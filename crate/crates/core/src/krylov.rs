//! Lanczos propagation `exp(-i t H) v` and lowest eigenpairs for real
//! symmetric operators acting on complex vectors.
//!
//! All reductions are split into fixed chunks and merged in index order, so
//! results do not depend on the rayon pool size.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

const CHUNK: usize = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error("Krylov substep shrank to {tau:e} without meeting tolerance {tol:e}")]
    StepTooSmall { tau: f64, tol: f64 },
    #[error("starting vector has zero norm")]
    ZeroVector,
    #[error("non-finite value in Krylov recursion")]
    NonFinite,
    #[error("eigensolver residual {residual:e} above {tol:e} after {restarts} restarts")]
    NotConverged { residual: f64, tol: f64, restarts: usize },
}

/// A Hermitian operator applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = H x`; `y` is overwritten.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

/// `<a, b>` (antilinear in `a`).
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<Complex64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum())
        .collect();
    partial.into_iter().sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .map(|x| x.iter().map(|p| p.norm_sqr()).sum())
        .collect();
    partial.into_iter().sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(q, p)| *q += alpha * p));
}

fn scale(alpha: f64, x: &mut [Complex64]) {
    x.par_chunks_mut(CHUNK).for_each(|c| c.iter_mut().for_each(|p| *p *= alpha));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Maximal Lanczos basis size per substep.
    pub dim: usize,
    /// Bound on the accumulated error estimate over the whole interval, relative to `|v|`.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { dim: 24, tol: 1e-12 }
    }
}

/// What the propagator actually did; substep shrinking is always reported here.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovReport {
    pub substeps: usize,
    pub rejected: usize,
    pub applications: usize,
    pub error_estimate: f64,
}

impl KrylovReport {
    pub fn merge(&mut self, other: &KrylovReport) {
        self.substeps += other.substeps;
        self.rejected += other.rejected;
        self.applications += other.applications;
        self.error_estimate += other.error_estimate;
    }
}

/// Orthonormal Lanczos basis with tridiagonal coefficients; `beta[j]` couples `j` and `j+1`.
struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last vector (0 on invariant subspace).
    tail: f64,
    applications: usize,
}

fn lanczos<O: LinearOperator + ?Sized>(op: &O, start: &[Complex64], max_dim: usize) -> Result<Lanczos, KrylovError> {
    let n0 = norm(start);
    if n0 == 0.0 {
        return Err(KrylovError::ZeroVector);
    }
    let mut v = start.to_vec();
    scale(1.0 / n0, &mut v);
    let mut out = Lanczos {
        basis: vec![v],
        alpha: Vec::new(),
        beta: Vec::new(),
        tail: 0.0,
        applications: 0,
    };
    let mut w = vec![Complex64::default(); start.len()];
    let max_dim = max_dim.min(start.len()).max(1);
    loop {
        let j = out.basis.len() - 1;
        op.apply(&out.basis[j], &mut w);
        out.applications += 1;
        let a = dot(&out.basis[j], &w).re;
        if !a.is_finite() {
            return Err(KrylovError::NonFinite);
        }
        out.alpha.push(a);
        // Two passes of full Gram-Schmidt keep the basis orthonormal to roundoff.
        for _ in 0..2 {
            for q in &out.basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        let scale_ref = a.abs().max(out.beta.last().copied().unwrap_or(0.0)).max(1e-300);
        if b <= 1e-13 * scale_ref {
            out.tail = 0.0;
            return Ok(out);
        }
        if out.basis.len() == max_dim {
            out.tail = b;
            return Ok(out);
        }
        out.beta.push(b);
        let mut next = std::mem::replace(&mut w, vec![Complex64::default(); start.len()]);
        scale(1.0 / b, &mut next);
        out.basis.push(next);
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t)
}

/// Coefficients of `exp(-i tau T) e_1` in the Lanczos basis.
fn small_exponential(eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> Vec<Complex64> {
    let m = eig.eigenvalues.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let q = eig.eigenvectors[(i, j)] * eig.eigenvectors[(0, j)];
                    Complex64::from_polar(q, -tau * eig.eigenvalues[j])
                })
                .sum()
        })
        .collect()
}

/// Computes `exp(-i t H) v` with adaptive substeps.
///
/// Each substep's error is estimated from the residual coupling `tail * |c_m|`;
/// a substep is accepted when that estimate is below `tol * |tau / t|`.
pub fn expm_apply<O: LinearOperator + ?Sized>(
    op: &O,
    v: &[Complex64],
    t: f64,
    opts: &KrylovOptions,
) -> Result<(Vec<Complex64>, KrylovReport), KrylovError> {
    let mut report = KrylovReport::default();
    let mut w = v.to_vec();
    if t == 0.0 {
        return Ok((w, report));
    }
    let total = t.abs();
    let sign = t.signum();
    let mut done = 0.0;
    let mut tau = total;
    while done < total {
        let n0 = norm(&w);
        if n0 == 0.0 {
            return Ok((w, report));
        }
        let lz = lanczos(op, &w, opts.dim)?;
        report.applications += lz.applications;
        let eig = tridiagonal_eigen(&lz.alpha, &lz.beta);
        tau = tau.min(total - done);
        let coeffs = loop {
            let c = small_exponential(&eig, sign * tau);
            let err = lz.tail * c.last().map_or(0.0, |z| z.norm());
            // The coefficient itself carries roundoff of order eps; below
            // that floor the estimate says nothing.
            let allowed = (opts.tol * tau / total).max(64.0 * f64::EPSILON * lz.tail);
            if err <= allowed || lz.tail == 0.0 {
                report.error_estimate += err;
                break c;
            }
            report.rejected += 1;
            // Error grows like tau^m; aim a little under the allowance.
            let m = lz.alpha.len() as f64;
            let factor = (0.5 * allowed / err).powf(1.0 / m).clamp(0.1, 0.9);
            tau *= factor;
            if tau < 1e-12 * total {
                return Err(KrylovError::StepTooSmall { tau, tol: opts.tol });
            }
        };
        let mut next = vec![Complex64::default(); w.len()];
        for (q, c) in lz.basis.iter().zip(&coeffs) {
            axpy(c * n0, q, &mut next);
        }
        if next.iter().any(|z| !z.is_finite()) {
            return Err(KrylovError::NonFinite);
        }
        w = next;
        done += tau;
        report.substeps += 1;
        if total - done < 1e-15 * total {
            break;
        }
        tau *= 1.5;
    }
    Ok((w, report))
}

/// Lowest eigenpair by restarted Lanczos; the returned vector has unit norm.
pub fn lowest_eigenpair<O: LinearOperator + ?Sized>(
    op: &O,
    start: &[Complex64],
    tol: f64,
) -> Result<(f64, Vec<Complex64>), KrylovError> {
    const MAX_RESTARTS: usize = 200;
    let dim = 80.min(op.dim());
    let mut v = start.to_vec();
    let mut residual = f64::INFINITY;
    let mut hv = vec![Complex64::default(); v.len()];
    for _ in 0..MAX_RESTARTS {
        let lz = lanczos(op, &v, dim)?;
        let eig = tridiagonal_eigen(&lz.alpha, &lz.beta);
        let (lowest, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty tridiagonal");
        let mut ritz = vec![Complex64::default(); v.len()];
        for (j, q) in lz.basis.iter().enumerate() {
            axpy(Complex64::new(eig.eigenvectors[(j, lowest)], 0.0), q, &mut ritz);
        }
        let n = norm(&ritz);
        scale(1.0 / n, &mut ritz);
        op.apply(&ritz, &mut hv);
        let e = dot(&ritz, &hv).re;
        axpy(Complex64::new(-e, 0.0), &ritz, &mut hv);
        residual = norm(&hv);
        if residual <= tol * e.abs().max(1.0) {
            return Ok((e, ritz));
        }
        v = ritz;
    }
    Err(KrylovError::NotConverged {
        residual,
        tol,
        restarts: MAX_RESTARTS,
    })
}

/// Dense Hermitian operator, mainly as a test oracle.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<Complex64>);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dim();
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = (0..n).map(|j| self.0[(i, j)] * x[j]).sum();
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (&a + a.transpose()) * 5.0
    }

    fn random_vector(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn exact(h: &DMatrix<f64>, v: &[Complex64], t: f64) -> Vec<Complex64> {
        let eig = SymmetricEigen::new(h.clone());
        let n = v.len();
        let mut out = vec![Complex64::default(); n];
        for j in 0..n {
            let q = eig.eigenvectors.column(j);
            let c: Complex64 = (0..n).map(|i| q[i] * v[i]).sum();
            let phase = Complex64::from_polar(1.0, -t * eig.eigenvalues[j]);
            for i in 0..n {
                out[i] += q[i] * c * phase;
            }
        }
        out
    }

    #[test]
    fn matches_dense_exponential() {
        let h = random_symmetric(120, 3);
        let op = DenseOperator(h.map(|x| Complex64::new(x, 0.0)));
        let v = random_vector(120, 4);
        for t in [0.01, 0.3, -0.7] {
            let (got, report) = expm_apply(&op, &v, t, &KrylovOptions::default()).unwrap();
            let want = exact(&h, &v, t);
            let err: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-10 * norm(&v), "t = {t}: err {err}, {report:?}");
            assert!((norm(&got) - norm(&v)).abs() < 1e-11 * norm(&v));
        }
    }

    #[test]
    fn small_krylov_dimension_forces_substeps() {
        let h = random_symmetric(60, 5);
        let op = DenseOperator(h.map(|x| Complex64::new(x, 0.0)));
        let v = random_vector(60, 6);
        let opts = KrylovOptions { dim: 8, tol: 1e-10 };
        let (got, report) = expm_apply(&op, &v, 1.0, &opts).unwrap();
        assert!(report.substeps > 1);
        let want = exact(&h, &v, 1.0);
        let err: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-8 * norm(&v), "err {err}");
    }

    #[test]
    fn lowest_eigenpair_matches_dense() {
        let h = random_symmetric(150, 8);
        let op = DenseOperator(h.map(|x| Complex64::new(x, 0.0)));
        let (e, vec) = lowest_eigenpair(&op, &random_vector(150, 9), 1e-11).unwrap();
        let want = SymmetricEigen::new(h).eigenvalues.min();
        assert!((e - want).abs() < 1e-9 * want.abs());
        assert!((norm(&vec) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reductions_are_chunk_deterministic() {
        let v = random_vector(3 * CHUNK + 17, 1);
        let a = dot(&v, &v);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| dot(&v, &v));
        assert_eq!(a.re.to_bits(), b.re.to_bits());
    }

    #[test]
    fn zero_vector_is_rejected() {
        let op = DenseOperator(DMatrix::identity(4, 4));
        assert_eq!(
            lowest_eigenpair(&op, &[Complex64::default(); 4], 1e-8).unwrap_err(),
            KrylovError::ZeroVector
        );
    }
}

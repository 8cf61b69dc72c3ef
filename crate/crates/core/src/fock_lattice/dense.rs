use num_complex::Complex64;
use rayon::prelude::*;

use std::sync::Arc;

use super::{check_resolution, pair_table, FockBasis, FockError, FockState, LatticeSpec};
use crate::gp_field::Field;
use crate::krylov::{self, KrylovOptions, KrylovReport, LinearOperator};
use crate::potentials::ScaledPair;

/// First-quantized tensor `psi(x_1, .., x_N) h^{N/2}` over `M^N` sites,
/// row-major with `x_1` slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNBody {
    pub m: usize,
    pub n: usize,
    pub spacing: f64,
    pub values: Vec<Complex64>,
}

impl DenseNBody {
    pub fn new(m: usize, n: usize, spacing: f64, values: Vec<Complex64>) -> Result<Self, FockError> {
        if !(1..=3).contains(&n) {
            return Err(FockError::TooManyParticles(n));
        }
        if values.len() != m.pow(n as u32) {
            return Err(FockError::Config(format!("{} values for M^N = {}", values.len(), m.pow(n as u32))));
        }
        Ok(Self { m, n, spacing, values })
    }

    /// `phi_1 (x) .. (x) phi_N`, each factor taken as given (not normalized).
    pub fn product(factors: &[Field]) -> Result<Self, FockError> {
        let first = factors.first().ok_or(FockError::TooManyParticles(0))?;
        let (m, h) = (first.grid.m, first.grid.spacing());
        if factors.iter().any(|f| f.grid != first.grid) {
            return Err(FockError::LatticeMismatch("product factors on different grids".into()));
        }
        let mut values = vec![Complex64::new(1.0, 0.0)];
        for f in factors {
            values = values
                .iter()
                .flat_map(|a| f.values.iter().map(move |b| a * b * h.sqrt()))
                .collect();
        }
        Self::new(m, factors.len(), h, values)
    }

    pub fn norm(&self) -> f64 {
        krylov::norm(&self.values)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = index;
        for i in (0..self.n).rev() {
            c[i] = rest % self.m;
            rest /= self.m;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &x| acc * self.m + x)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    match n {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
    }
}

fn multinomial_weight(occ: &[u8], n: usize) -> f64 {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    fact(n) / occ.iter().map(|&k| fact(k as usize)).product::<f64>()
}

/// First-quantized form of an occupation state: `psi(x) = c_n / sqrt(N! / prod n_x!)`.
pub fn fock_to_dense(psi: &FockState) -> Result<DenseNBody, FockError> {
    let (m, n) = (psi.basis.modes(), psi.particles());
    if !(1..=3).contains(&n) {
        return Err(FockError::TooManyParticles(n));
    }
    let shape = DenseNBody::new(m, n, psi.spacing, vec![Complex64::default(); m.pow(n as u32)])?;
    let mut occ = vec![0u8; m];
    let values = (0..shape.values.len())
        .map(|i| {
            occ.iter_mut().for_each(|o| *o = 0);
            for &x in &shape.coords(i)[..n] {
                occ[x] += 1;
            }
            psi.amplitudes[psi.basis.rank(&occ)] / multinomial_weight(&occ, n).sqrt()
        })
        .collect();
    Ok(DenseNBody { values, ..shape })
}

/// Occupation amplitudes of a symmetric tensor (symmetry is not checked).
pub fn dense_to_fock(psi: &DenseNBody) -> Result<FockState, FockError> {
    let basis = Arc::new(FockBasis::new(psi.m, psi.n)?);
    let amplitudes = basis
        .iter()
        .map(|occ| {
            let coords: Vec<usize> = occ
                .iter()
                .enumerate()
                .flat_map(|(x, &k)| std::iter::repeat(x).take(k as usize))
                .collect();
            psi.values[psi.index(&coords)] * multinomial_weight(occ, psi.n).sqrt()
        })
        .collect();
    Ok(FockState {
        basis,
        spacing: psi.spacing,
        amplitudes,
    })
}

/// Projection onto the symmetric subspace, renormalized.
pub fn symmetrize(t: &DenseNBody) -> Result<DenseNBody, FockError> {
    let perms = permutations(t.n);
    let inv = 1.0 / perms.len() as f64;
    let values: Vec<Complex64> = (0..t.values.len())
        .into_par_iter()
        .map(|i| {
            let c = t.coords(i);
            let sum: Complex64 = perms
                .iter()
                .map(|p| {
                    let permuted: Vec<usize> = p.iter().map(|&k| c[k]).collect();
                    t.values[t.index(&permuted)]
                })
                .sum();
            sum * inv
        })
        .collect();
    let norm = krylov::norm(&values);
    if norm <= 1e-12 * t.norm().max(f64::MIN_POSITIVE) {
        return Err(FockError::ZeroVector);
    }
    Ok(DenseNBody {
        values: values.into_iter().map(|v| v / norm).collect(),
        ..t.clone()
    })
}

/// The lattice Hamiltonian in first quantization: per-coordinate hopping,
/// trap, and `sum_{i<j} w(x_i - x_j)`.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    m: usize,
    n: usize,
    hop: f64,
    diagonal: Vec<f64>,
}

impl DenseHamiltonian {
    pub fn new(lat: &LatticeSpec, n: usize, pair: &ScaledPair) -> Result<Self, FockError> {
        lat.validate()?;
        if !(1..=3).contains(&n) {
            return Err(FockError::TooManyParticles(n));
        }
        if n >= 2 {
            if pair.n as usize != n {
                return Err(FockError::ParticleMismatch {
                    pair: pair.n,
                    particles: n,
                });
            }
            check_resolution(lat, pair)?;
        }
        let m = lat.m;
        let h = lat.spacing();
        let w = pair_table(lat, pair);
        let trap = lat.v_ext.clone().unwrap_or_else(|| vec![0.0; m]);
        let hop = 1.0 / (h * h);
        let shape = DenseNBody {
            m,
            n,
            spacing: h,
            values: Vec::new(),
        };
        let diagonal = (0..m.pow(n as u32))
            .map(|i| {
                let c = shape.coords(i);
                let mut e = 2.0 * n as f64 * hop;
                for a in 0..n {
                    e += trap[c[a]];
                    for b in a + 1..n {
                        e += w[(c[a] + m - c[b]) % m];
                    }
                }
                e
            })
            .collect();
        Ok(Self { m, n, hop, diagonal })
    }
}

impl LinearOperator for DenseHamiltonian {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let (m, n) = (self.m, self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = x[i] * self.diagonal[i];
            let mut stride = 1;
            for _ in 0..n {
                let c = (i / stride) % m;
                let up = if c + 1 == m { i + stride - m * stride } else { i + stride };
                let down = if c == 0 { i + (m - 1) * stride } else { i - stride };
                acc -= (x[up] + x[down]) * self.hop;
                stride *= m;
            }
            *yi = acc;
        });
    }
}

/// `exp(-i t H) psi` in the dense representation.
pub fn evolve_dense(
    psi: &DenseNBody,
    h: &DenseHamiltonian,
    t: f64,
    opts: &KrylovOptions,
) -> Result<(DenseNBody, KrylovReport), FockError> {
    if psi.values.len() != h.dim() {
        return Err(FockError::LatticeMismatch("dense state and Hamiltonian sizes differ".into()));
    }
    let (values, report) = krylov::expm_apply(h, &psi.values, t, opts)?;
    Ok((DenseNBody { values, ..psi.clone() }, report))
}

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{MarginalDensity, MarginalError};
use crate::fock_lattice::{DenseNBody, FockBasis, FockState};

/// Many-body states that yield reduced densities.
pub trait Reducible {
    fn reduce(&self, k: usize) -> Result<MarginalDensity, MarginalError>;
}

pub fn reduce<S: Reducible + ?Sized>(state: &S, k: usize) -> Result<MarginalDensity, MarginalError> {
    state.reduce(k)
}

/// `G = A^T conj(A)` for column-major `A` with `cols` columns of length `rows`.
fn gram(columns: &[Complex64], rows: usize, cols: usize) -> DMatrix<Complex64> {
    let upper: Vec<Vec<Complex64>> = (0..cols)
        .into_par_iter()
        .map(|i| {
            let a = &columns[i * rows..(i + 1) * rows];
            (i..cols)
                .map(|j| {
                    let b = &columns[j * rows..(j + 1) * rows];
                    a.iter().zip(b).map(|(p, q)| p * q.conj()).sum()
                })
                .collect()
        })
        .collect();
    let mut g = DMatrix::zeros(cols, cols);
    for (i, row) in upper.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            g[(i, i + off)] = *v;
            g[(i + off, i)] = v.conj();
        }
    }
    g
}

impl Reducible for FockState {
    /// `gamma^(1)(x; y) = <a_y^* a_x> / N`, `gamma^(2) = <a_{y1}^* a_{y2}^* a_{x2} a_{x1}> / (N (N-1))`,
    /// both as Gram matrices of annihilated states.
    fn reduce(&self, k: usize) -> Result<MarginalDensity, MarginalError> {
        let n = self.particles();
        if k == 0 || k > n || k > 2 {
            return Err(MarginalError::InvalidOrder { k, n });
        }
        let m = self.basis.modes();
        let lower = Arc::new(FockBasis::new(m, n - k).map_err(|e| MarginalError::Shape(e.to_string()))?);
        let rows = lower.len();
        let cols = m.pow(k as u32);
        let mut columns = vec![Complex64::default(); rows * cols];
        columns.par_chunks_mut(rows).enumerate().for_each(|(c, col)| {
            let (x1, x2) = if k == 1 { (c, None) } else { (c / m, Some(c % m)) };
            let mut s = vec![0u8; m];
            for (t, out) in col.iter_mut().enumerate() {
                s.copy_from_slice(lower.state(t));
                // a_{x2} a_{x1} |s>, with s = t + e_{x1} + e_{x2}.
                s[x1] += 1;
                let mut coeff = 1.0;
                if let Some(x2) = x2 {
                    s[x2] += 1;
                    coeff *= f64::from(s[x2] - u8::from(x1 == x2));
                }
                coeff *= f64::from(s[x1]);
                *out = self.amplitudes[self.basis.rank(&s)] * coeff.sqrt();
            }
        });
        let norm = (n * if k == 2 { n - 1 } else { 1 }) as f64;
        let g = gram(&columns, rows, cols) / Complex64::new(norm, 0.0);
        MarginalDensity::new(k, m, self.spacing, g)
    }
}

impl Reducible for DenseNBody {
    fn reduce(&self, k: usize) -> Result<MarginalDensity, MarginalError> {
        if k == 0 || k > self.n {
            return Err(MarginalError::InvalidOrder { k, n: self.n });
        }
        let cols = self.m.pow(k as u32);
        let rows = self.m.pow((self.n - k) as u32);
        // values[(x_1..x_k) * rows + rest] is already column-major in the kept indices.
        let g = gram(&self.values, rows, cols);
        MarginalDensity::new(k, self.m, self.spacing, g)
    }
}

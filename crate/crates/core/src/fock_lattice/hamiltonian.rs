use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{check_resolution, pair_table, FockBasis, FockError, FockState, LatticeSpec};
use crate::krylov::LinearOperator;
use crate::potentials::ScaledPair;

const ROW_CHUNK: usize = 1024;

/// Matrix-free `H = sum_x (2 n_x - hops)/h^2 + sum_x V_ext(x) n_x
/// + 1/2 sum_{x,y} w(x - y) a_x^dagger a_y^dagger a_y a_x` on the occupation basis.
///
/// `H` is real symmetric in this basis, so it is applied as a gather over rows.
#[derive(Debug, Clone)]
pub struct FockHamiltonian {
    pub lattice: LatticeSpec,
    pub pair: ScaledPair,
    basis: Arc<FockBasis>,
    diagonal: Vec<f64>,
    hop: f64,
}

pub fn assemble_hamiltonian(lat: &LatticeSpec, n: usize, pair: &ScaledPair) -> Result<FockHamiltonian, FockError> {
    FockHamiltonian::new(lat, Arc::new(FockBasis::new(lat.m, n)?), pair)
}

impl FockHamiltonian {
    /// Builds on an existing basis so that states and operator share it.
    pub fn new(lat: &LatticeSpec, basis: Arc<FockBasis>, pair: &ScaledPair) -> Result<Self, FockError> {
        lat.validate()?;
        let n = basis.particles();
        if basis.modes() != lat.m {
            return Err(FockError::LatticeMismatch(format!(
                "basis has {} modes, lattice {}",
                basis.modes(),
                lat.m
            )));
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
        let h = lat.spacing();
        let hop = 1.0 / (h * h);
        let w = pair_table(lat, pair);
        let trap = lat.v_ext.clone().unwrap_or_else(|| vec![0.0; lat.m]);
        let kinetic = 2.0 * n as f64 * hop;
        let diagonal = (0..basis.len())
            .into_par_iter()
            .map(|r| {
                let occ = basis.state(r);
                let mut e = kinetic;
                let mut occupied = [(0usize, 0f64); 256];
                let mut count = 0;
                for (x, &k) in occ.iter().enumerate() {
                    if k > 0 {
                        occupied[count] = (x, k as f64);
                        count += 1;
                        e += trap[x] * k as f64;
                    }
                }
                let occupied = &occupied[..count];
                for (i, &(x, nx)) in occupied.iter().enumerate() {
                    e += 0.5 * w[0] * nx * (nx - 1.0);
                    for &(y, ny) in &occupied[i + 1..] {
                        e += w[y - x] * nx * ny;
                    }
                }
                e
            })
            .collect();
        Ok(Self {
            lattice: lat.clone(),
            pair: *pair,
            basis,
            diagonal,
            hop,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn check_state(&self, psi: &FockState) -> Result<(), FockError> {
        if !Arc::ptr_eq(&psi.basis, &self.basis) && *psi.basis != *self.basis {
            return Err(FockError::LatticeMismatch("state and Hamiltonian bases differ".into()));
        }
        Ok(())
    }

    /// Gershgorin bound on the spectral radius.
    pub fn spectral_bound(&self) -> f64 {
        let n = self.basis.particles() as f64;
        self.diagonal.iter().fold(0.0f64, |a, d| a.max(d.abs())) + 2.0 * n * self.hop * 2.0
    }

    fn row(&self, r: usize, x: &[Complex64], rem: &mut [usize], scratch: &mut [u8]) -> Complex64 {
        let basis = &*self.basis;
        let occ = basis.state(r);
        let m = occ.len();
        let mut left = basis.particles();
        for (i, &k) in occ.iter().enumerate() {
            rem[i] = left;
            left -= k as usize;
        }
        let p = |i: usize, rem: usize, v: usize| basis.prefix(i, rem, v);
        let mut acc = x[r] * self.diagonal[r];
        let base = r as i64;
        let mut hops = Complex64::default();
        for s in 0..m {
            let ns = occ[s] as usize;
            if ns == 0 {
                continue;
            }
            // s -> s + 1
            if s + 1 < m {
                let nt = occ[s + 1] as usize;
                let t = base + p(s, rem[s], ns - 1) - p(s, rem[s], ns) + p(s + 1, rem[s + 1] + 1, nt + 1)
                    - p(s + 1, rem[s + 1], nt);
                let c = ((ns * (nt + 1)) as f64).sqrt();
                hops += x[t as usize] * c;
            }
            // s -> s - 1
            if s >= 1 {
                let nt = occ[s - 1] as usize;
                let t = base + p(s - 1, rem[s - 1], nt + 1) - p(s - 1, rem[s - 1], nt) + p(s, rem[s] - 1, ns - 1)
                    - p(s, rem[s], ns);
                let c = ((ns * (nt + 1)) as f64).sqrt();
                hops += x[t as usize] * c;
            }
        }
        // Wrap-around hops shift every intermediate remainder; rank them directly.
        for (from, to) in [(m - 1, 0), (0, m - 1)] {
            let nf = occ[from] as usize;
            if nf == 0 {
                continue;
            }
            scratch.copy_from_slice(occ);
            scratch[from] -= 1;
            scratch[to] += 1;
            let c = ((nf * (occ[to] as usize + 1)) as f64).sqrt();
            hops += x[basis.rank(scratch)] * c;
        }
        acc -= hops * self.hop;
        acc
    }
}

impl LinearOperator for FockHamiltonian {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.basis.modes();
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, out)| {
            let mut rem = vec![0usize; m];
            let mut scratch = vec![0u8; m];
            for (i, yi) in out.iter_mut().enumerate() {
                *yi = self.row(c * ROW_CHUNK + i, x, &mut rem, &mut scratch);
            }
        });
    }
}

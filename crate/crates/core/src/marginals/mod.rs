//! Reduced density matrices on the lattice and their condensation diagnostics.
//!
//! A [`MarginalDensity`] of order `k` stores the `M^k x M^k` matrix `G` in the
//! orthonormal lattice basis, so `Tr G = 1` and the continuum kernel is
//! `G / h^k`. Multi-indices are row-major, `x_1` slowest.

mod export;
mod reduce;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub use export::{write_matrix_csv, write_profile_csv, write_spectrum_csv, MarginalSummary};
pub use reduce::{reduce, Reducible};

use crate::gp_field::{Field, Grid};
use crate::scattering::CorrelationFunction;

/// Tolerance for the structural invariants of a density matrix.
pub const INVARIANT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MarginalError {
    #[error("cannot take a {k}-particle marginal of a {n}-particle state")]
    InvalidOrder { k: usize, n: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{invariant} violated: {detail}")]
    Invariant { invariant: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDensity {
    pub order: usize,
    pub m: usize,
    pub spacing: f64,
    pub matrix: DMatrix<Complex64>,
}

impl MarginalDensity {
    pub fn new(order: usize, m: usize, spacing: f64, matrix: DMatrix<Complex64>) -> Result<Self, MarginalError> {
        let size = m.pow(order as u32);
        if matrix.nrows() != size || matrix.ncols() != size {
            return Err(MarginalError::Shape(format!(
                "order {order} on {m} sites needs {size}x{size}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            order,
            m,
            spacing,
            matrix,
        })
    }

    /// `|phi><phi|` for a one-dimensional field (normalized internally).
    pub fn pure(phi: &Field) -> Result<Self, MarginalError> {
        if phi.grid.dimension.get() != 1 {
            return Err(MarginalError::Shape("pure state needs a 1D field".into()));
        }
        let h = phi.grid.spacing();
        let norm = phi.inner(phi).re.sqrt();
        let v = nalgebra::DVector::from_iterator(phi.values.len(), phi.values.iter().map(|p| p * (h.sqrt() / norm)));
        Self::new(1, phi.grid.m, h, &v * v.adjoint())
    }

    /// Kernel value `gamma(x; y)` in continuum normalization.
    pub fn kernel(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)] / self.spacing.powi(self.order as i32)
    }

    pub fn length(&self) -> f64 {
        self.m as f64 * self.spacing
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(&self.matrix)).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `Tr_2 G` for `order = 2`.
    pub fn partial_trace(&self) -> Result<Self, MarginalError> {
        if self.order != 2 {
            return Err(MarginalError::InvalidOrder { k: 1, n: self.order });
        }
        let m = self.m;
        let g = DMatrix::from_fn(m, m, |x, y| (0..m).map(|z| self.matrix[(x * m + z, y * m + z)]).sum());
        Self::new(1, m, self.spacing, g)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self, MarginalError> {
        if self.m != other.m || self.spacing != other.spacing {
            return Err(MarginalError::Shape("tensor factors on different lattices".into()));
        }
        Self::new(
            self.order + other.order,
            self.m,
            self.spacing,
            self.matrix.kronecker(&other.matrix),
        )
    }

    /// Hermiticity, positivity, unit trace and (for `order = 2`) exchange symmetry.
    pub fn check_invariants(&self) -> Result<(), MarginalError> {
        let scale = self.matrix.norm().max(1.0);
        let herm = (&self.matrix - self.matrix.adjoint()).norm();
        if herm > INVARIANT_TOL * scale {
            return Err(MarginalError::Invariant {
                invariant: "hermiticity",
                detail: format!("|G - G^*| = {herm:e}"),
            });
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > INVARIANT_TOL {
            return Err(MarginalError::Invariant {
                invariant: "unit trace",
                detail: format!("Tr G = {tr}"),
            });
        }
        let lowest = self.eigenvalues().last().copied().unwrap_or(0.0);
        if lowest < -INVARIANT_TOL {
            return Err(MarginalError::Invariant {
                invariant: "positivity",
                detail: format!("smallest eigenvalue {lowest:e}"),
            });
        }
        if self.order == 2 {
            let m = self.m;
            let swap = |i: usize| (i % m) * m + i / m;
            let size = m * m;
            let mut worst = 0.0f64;
            for i in 0..size {
                for j in 0..size {
                    worst = worst.max((self.matrix[(i, j)] - self.matrix[(swap(i), swap(j))]).norm());
                }
            }
            if worst > INVARIANT_TOL * scale {
                return Err(MarginalError::Invariant {
                    invariant: "bosonic symmetry",
                    detail: format!("max exchange defect {worst:e}"),
                });
            }
        }
        Ok(())
    }

    fn ensure_same_shape(&self, other: &Self) -> Result<(), MarginalError> {
        if self.order != other.order || self.m != other.m || self.spacing != other.spacing {
            return Err(MarginalError::Shape(format!(
                "order/sites/spacing ({}, {}, {}) vs ({}, {}, {})",
                self.order, self.m, self.spacing, other.order, other.m, other.spacing
            )));
        }
        Ok(())
    }
}

fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

fn trace_norm(a: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(hermitian_part(a)).eigenvalues.iter().map(|e| e.abs()).sum()
}

/// `Tr |gamma - gamma'|`.
pub fn trace_distance(a: &MarginalDensity, b: &MarginalDensity) -> Result<f64, MarginalError> {
    a.ensure_same_shape(b)?;
    Ok(trace_norm(&(&a.matrix - &b.matrix)))
}

/// Largest eigenvalue of `gamma^(1)` and its eigenvector as a unit-mass field.
pub fn condensate_fraction(gamma: &MarginalDensity) -> Result<(f64, Field), MarginalError> {
    if gamma.order != 1 {
        return Err(MarginalError::InvalidOrder { k: 1, n: gamma.order });
    }
    let eig = SymmetricEigen::new(hermitian_part(&gamma.matrix));
    let (top, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    let grid = Grid::one_d(gamma.m, gamma.length());
    let scale = 1.0 / gamma.spacing.sqrt();
    let field = Field {
        grid,
        values: eig.eigenvectors.column(top).iter().map(|v| v * scale).collect(),
    };
    Ok((lambda, field))
}

/// `g_2(r)` on minimum-image separations `r = d h`, `d = 0..=M/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub r: Vec<f64>,
    pub g2: Vec<f64>,
    /// `g_2(r) / f(r)^2` when a correlation function is supplied.
    pub quotient: Option<Vec<f64>>,
}

impl PairCorrelation {
    /// `g_2(L/2) - g_2(0)`: positive when pairs avoid contact.
    pub fn dip_depth(&self) -> f64 {
        self.g2[self.g2.len() - 1] - self.g2[0]
    }
}

/// Ratio of `sum_x gamma^(2)(x, x+r; x, x+r)` to `sum_x rho(x) rho(x+r)`,
/// symmetrized over `+r` and `-r`.
pub fn pair_correlation(gamma2: &MarginalDensity, f: Option<&CorrelationFunction>) -> Result<PairCorrelation, MarginalError> {
    if gamma2.order != 2 {
        return Err(MarginalError::InvalidOrder { k: 2, n: gamma2.order });
    }
    let m = gamma2.m;
    let rho: Vec<f64> = gamma2.partial_trace()?.matrix.diagonal().iter().map(|z| z.re).collect();
    let mut r = Vec::new();
    let mut g2 = Vec::new();
    for d in 0..=m / 2 {
        let (mut pair, mut product) = (0.0, 0.0);
        for x in 0..m {
            for y in [(x + d) % m, (x + m - d) % m] {
                let i = x * m + y;
                pair += gamma2.matrix[(i, i)].re;
                product += rho[x] * rho[y];
            }
        }
        r.push(d as f64 * gamma2.spacing);
        g2.push(pair / product);
    }
    let quotient = f.map(|f| r.iter().zip(&g2).map(|(&r, g)| g / f.eval(r).powi(2)).collect());
    Ok(PairCorrelation { r, g2, quotient })
}

/// `(1 - Delta)^{1/2}` as an `M x M` matrix, with spectral wavenumbers `2 pi n / L`.
fn sobolev_multiplier(m: usize, l: f64) -> DMatrix<Complex64> {
    let k = |n: usize| {
        let n = if n <= m / 2 { n as f64 } else { n as f64 - m as f64 };
        2.0 * std::f64::consts::PI * n / l
    };
    let inv = 1.0 / m as f64;
    DMatrix::from_fn(m, m, |x, y| {
        (0..m)
            .map(|n| {
                let phase = 2.0 * std::f64::consts::PI * n as f64 * (x as f64 - y as f64) * inv;
                Complex64::from_polar((1.0 + k(n).powi(2)).sqrt() * inv, phase)
            })
            .sum()
    })
}

/// `Tr |S_1..S_k G S_k..S_1|` with `S = (1 - Delta)^{1/2}` on every coordinate.
pub fn hk_norm(gamma: &MarginalDensity) -> Result<f64, MarginalError> {
    let s1 = sobolev_multiplier(gamma.m, gamma.length());
    let s = match gamma.order {
        1 => s1,
        2 => s1.kronecker(&s1),
        k => return Err(MarginalError::InvalidOrder { k, n: 2 }),
    };
    Ok(trace_norm(&(&s * &gamma.matrix * &s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_density(m: usize, seed: u64) -> MarginalDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::<Complex64>::from_fn(m, m, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let g = &a * a.adjoint();
        let tr = g.trace();
        MarginalDensity::new(1, m, 0.5, g / tr).unwrap()
    }

    fn grid() -> Grid {
        Grid::one_d(16, 2.0 * std::f64::consts::PI)
    }

    #[test]
    fn orthogonal_pure_states_are_distance_two() {
        let a = MarginalDensity::pure(&Field::plane_wave(grid(), [1, 0, 0])).unwrap();
        let b = MarginalDensity::pure(&Field::plane_wave(grid(), [2, 0, 0])).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a).unwrap() < 1e-14);
    }

    #[test]
    fn triangle_inequality() {
        for s in 0..5 {
            let (a, b, c) = (random_density(6, 3 * s), random_density(6, 3 * s + 1), random_density(6, 3 * s + 2));
            let ab = trace_distance(&a, &b).unwrap();
            let bc = trace_distance(&b, &c).unwrap();
            let ac = trace_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn condensate_fraction_of_pure_state() {
        let phi = Field::plane_wave(grid(), [3, 0, 0]);
        let (lambda, v) = condensate_fraction(&MarginalDensity::pure(&phi).unwrap()).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12);
        assert!((phi.inner(&v).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_never_raises_the_top_eigenvalue() {
        for s in 0..5 {
            let g = random_density(8, 40 + s);
            let mixed = MarginalDensity {
                matrix: &g.matrix * Complex64::new(0.9, 0.0)
                    + DMatrix::<Complex64>::identity(8, 8) * Complex64::new(0.1 / 8.0, 0.0),
                ..g.clone()
            };
            assert!(condensate_fraction(&mixed).unwrap().0 <= condensate_fraction(&g).unwrap().0 + 1e-14);
            mixed.check_invariants().unwrap();
        }
    }

    #[test]
    fn hk_norm_examples() {
        let l = 2.0 * std::f64::consts::PI;
        let g = Grid::one_d(16, l);
        let q = 3.0;
        let pw = MarginalDensity::pure(&Field::plane_wave(g, [3, 0, 0])).unwrap();
        assert!((hk_norm(&pw).unwrap() - (1.0 + q * q)).abs() < 1e-10);
        let c = MarginalDensity::pure(&Field::constant(g, Complex64::new(1.0, 0.0))).unwrap();
        assert!((hk_norm(&c).unwrap() - 1.0).abs() < 1e-12);
        let smooth = Field::from_fn(g, |x| Complex64::new(1.0 + 0.3 * x[0].cos(), 0.2 * (2.0 * x[0]).sin()));
        let g1 = MarginalDensity::pure(&smooth).unwrap();
        let g2 = g1.tensor(&g1).unwrap();
        let n1 = hk_norm(&g1).unwrap();
        assert!((hk_norm(&g2).unwrap() - n1 * n1).abs() < 1e-10 * n1 * n1);
    }

    #[test]
    fn factorized_pair_correlation_is_flat() {
        let phi = Field::from_fn(grid(), |x| Complex64::new(1.0 + 0.5 * x[0].cos(), 0.1));
        let g1 = MarginalDensity::pure(&phi).unwrap();
        let g2 = g1.tensor(&g1).unwrap();
        g2.check_invariants().unwrap();
        let pc = pair_correlation(&g2, None).unwrap();
        assert!(pc.g2.iter().all(|g| (g - 1.0).abs() < 1e-10));
        assert!((trace_distance(&g2.partial_trace().unwrap(), &g1).unwrap()) < 1e-12);
    }

    #[test]
    fn invariant_violation_is_named() {
        let mut g = random_density(5, 9);
        g.matrix[(0, 1)] += Complex64::new(0.1, 0.0);
        let err = g.check_invariants().unwrap_err();
        assert!(err.to_string().starts_with("hermiticity"));
    }
}

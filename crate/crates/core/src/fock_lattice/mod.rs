//! Finite-N bosons on a periodic 1D lattice.
//!
//! Production states live in the symmetric occupation-number basis
//! ([`FockState`]); [`DenseNBody`] keeps the first-quantized tensor for
//! `N <= 3` as an independent oracle. Both share the same Hamiltonian: the
//! nearest-neighbour hopping Laplacian, an optional trap, and the pair
//! interaction sampled at minimum-image separations.

mod basis;
mod dense;
mod hamiltonian;
mod io;
mod probe;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use basis::{sector_dimension, FockBasis, MAX_DIMENSION};
pub use dense::{dense_to_fock, evolve_dense, fock_to_dense, symmetrize, DenseHamiltonian, DenseNBody};
pub use hamiltonian::{assemble_hamiltonian, FockHamiltonian};
pub use io::{read_state, write_state, TrajectorySummary};
pub use probe::{energy_ratio_probe, ProbeResult};

use crate::gp_field::{Dispersion, Field, GpError, Grid};
use crate::krylov::{self, KrylovError, KrylovOptions, KrylovReport, LinearOperator};
use crate::potentials::{RadialPotential, ScaledPair};

#[derive(Debug, Error)]
pub enum FockError {
    #[error("invalid lattice configuration: {0}")]
    Config(String),
    #[error(
        "resolution constraint 2h <= R/N^beta <= L/2 violated: interaction range {range:.4}, spacing {spacing:.4}, half box {half_box:.4}"
    )]
    Resolution { range: f64, spacing: f64, half_box: f64 },
    #[error("occupation basis for M = {m}, N = {n} exceeds the size limit")]
    DimensionTooLarge { m: usize, n: usize },
    #[error("state and operator live on different lattices: {0}")]
    LatticeMismatch(String),
    #[error("pair scaled for N = {pair} used with {particles} particles")]
    ParticleMismatch { pair: u32, particles: usize },
    #[error("dense representation supports N <= 3, got {0}")]
    TooManyParticles(usize),
    #[error("symmetrization annihilated the state")]
    ZeroVector,
    #[error("quotient denominator {min:e} below 1e-12")]
    DegenerateQuotient { min: f64 },
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Field(#[from] GpError),
    #[error("state checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Periodic lattice `x_j = -L/2 + j h`, `h = L/M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub m: usize,
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ext: Option<Vec<f64>>,
}

impl LatticeSpec {
    pub fn new(m: usize, l: f64) -> Result<Self, FockError> {
        let spec = Self { m, l, v_ext: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_trap(mut self, v_ext: Vec<f64>) -> Result<Self, FockError> {
        self.v_ext = Some(v_ext);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), FockError> {
        if self.m < 8 {
            return Err(FockError::Config(format!("need M >= 8 modes, got {}", self.m)));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(FockError::Config(format!("box length must be positive, got {}", self.l)));
        }
        if let Some(v) = &self.v_ext {
            if v.len() != self.m {
                return Err(FockError::Config(format!("trap has {} samples for {} modes", v.len(), self.m)));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.m as f64
    }

    /// The matching single-particle grid (hopping dispersion).
    pub fn grid(&self) -> Grid {
        Grid::one_d(self.m, self.l).with_dispersion(Dispersion::Lattice)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.l + j as f64 * self.spacing()
    }

    pub fn without_trap(&self) -> Self {
        Self {
            v_ext: None,
            ..self.clone()
        }
    }

    fn check_field(&self, phi: &Field) -> Result<(), FockError> {
        if phi.grid.m != self.m || phi.grid.l != self.l || phi.grid.dimension.get() != 1 {
            return Err(FockError::LatticeMismatch(format!(
                "field on M = {}, L = {}, d = {}; lattice M = {}, L = {}",
                phi.grid.m,
                phi.grid.l,
                phi.grid.dimension.get(),
                self.m,
                self.l
            )));
        }
        Ok(())
    }
}

/// `w(d h)` for `d = 0..M`, at minimum-image distance.
pub fn pair_table(lat: &LatticeSpec, pair: &ScaledPair) -> Vec<f64> {
    let h = lat.spacing();
    (0..lat.m)
        .map(|d| {
            let d = d.min(lat.m - d);
            pair.value(d as f64 * h)
        })
        .collect()
}

/// `2h <= R / N^beta <= L/2`; interaction-free pairs always pass.
pub fn check_resolution(lat: &LatticeSpec, pair: &ScaledPair) -> Result<(), FockError> {
    if pair.is_zero() {
        return Ok(());
    }
    let range = pair.support_radius();
    let spacing = lat.spacing();
    let half_box = 0.5 * lat.l;
    if range < 2.0 * spacing || range > half_box {
        return Err(FockError::Resolution { range, spacing, half_box });
    }
    Ok(())
}

/// Normalized amplitudes over a shared occupation basis.
#[derive(Debug, Clone)]
pub struct FockState {
    pub basis: Arc<FockBasis>,
    /// Lattice spacing `h`, needed to turn marginals into kernels.
    pub spacing: f64,
    pub amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn particles(&self) -> usize {
        self.basis.particles()
    }

    pub fn norm(&self) -> f64 {
        krylov::norm(&self.amplitudes)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `(sum_x phi_x a_x^dagger)^N |0> / sqrt(N!)` with `phi_x = phi(x) sqrt(h)`.
pub fn product_state(lat: &LatticeSpec, phi: &Field, n: usize) -> Result<FockState, FockError> {
    lat.check_field(phi)?;
    let phi = phi.normalized()?;
    let basis = Arc::new(FockBasis::new(lat.m, n)?);
    product_state_in(&basis, &phi)
}

/// As [`product_state`] on an existing basis; `phi` is assumed normalized.
pub fn product_state_in(basis: &Arc<FockBasis>, phi: &Field) -> Result<FockState, FockError> {
    if phi.grid.m != basis.modes() {
        return Err(FockError::LatticeMismatch("field and basis mode counts differ".into()));
    }
    let root_h = phi.grid.spacing().sqrt();
    let v: Vec<Complex64> = phi.values.iter().map(|p| p * root_h).collect();
    let n_fact = factorial(basis.particles());
    let amplitudes = basis
        .iter()
        .map(|occ| {
            let mut amp = Complex64::new(1.0, 0.0);
            let mut denom = 1.0;
            for (x, &k) in occ.iter().enumerate() {
                if k > 0 {
                    amp *= v[x].powu(u32::from(k));
                    denom *= factorial(k as usize);
                }
            }
            amp * (n_fact / denom).sqrt()
        })
        .collect();
    Ok(FockState {
        basis: basis.clone(),
        spacing: phi.grid.spacing(),
        amplitudes,
    })
}

/// `(<H>, <H^2>)` with `<H^2> = |H psi|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

pub fn expectation_moments<O: LinearOperator + ?Sized>(psi: &[Complex64], h: &O) -> Moments {
    let mut hpsi = vec![Complex64::default(); psi.len()];
    h.apply(psi, &mut hpsi);
    Moments {
        mean: krylov::dot(psi, &hpsi).re,
        second: krylov::norm(&hpsi).powi(2),
    }
}

/// Runs `steps` Krylov propagations of length `dt` (each adaptively substepped).
pub fn evolve_manybody(
    psi: &FockState,
    h: &FockHamiltonian,
    dt: f64,
    steps: usize,
    opts: &KrylovOptions,
) -> Result<(FockState, KrylovReport), FockError> {
    h.check_state(psi)?;
    let mut report = KrylovReport::default();
    let mut amps = psi.amplitudes.clone();
    for _ in 0..steps {
        let (next, r) = krylov::expm_apply(h, &amps, dt, opts)?;
        report.merge(&r);
        amps = next;
    }
    Ok((
        FockState {
            amplitudes: amps,
            ..psi.clone()
        },
        report,
    ))
}

/// `<psi, T psi>` for the lattice translation `x -> x + h`.
pub fn translation_expectation(psi: &FockState) -> Complex64 {
    let basis = &psi.basis;
    let m = basis.modes();
    let mut shifted = vec![0u8; m];
    basis
        .iter()
        .enumerate()
        .map(|(r, occ)| {
            shifted[1..].copy_from_slice(&occ[..m - 1]);
            shifted[0] = occ[m - 1];
            psi.amplitudes[basis.rank(&shifted)].conj() * psi.amplitudes[r]
        })
        .sum()
}

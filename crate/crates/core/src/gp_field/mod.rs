//! One-particle fields on periodic grids: cubic NLS / Gross–Pitaevskii and
//! Hartree evolution by Strang splitting, the GP energy functional and its
//! constrained minimizer.

mod energy;
mod evolve;
mod io;
mod spectral;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::Dimension;

pub use energy::{gp_energy, minimize_gp_energy, MinimizeOptions};
pub use evolve::{evolve_hartree, evolve_nls, evolve_nls_trajectory, EvolutionParams, Nonlinearity, Propagator};
pub use io::{read_binary, read_csv, write_binary, write_csv, EvolutionSummary};
pub use spectral::FftOps;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("evolution parameters select {expected} mode but {found} was given")]
    ModeMismatch { expected: &'static str, found: &'static str },
    #[error("time step must be finite and non-zero, got {0}")]
    BadTimeStep(f64),
    #[error("phase per step {phase:.3} exceeds π (dt · max|U| with U the nonlinear potential)")]
    Aliasing { phase: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("minimization did not converge within {iterations} iterations (energy decrement {decrement:e}, residual {residual:e})")]
    IterationLimit { iterations: usize, decrement: f64, residual: f64 },
    #[error("field has zero norm")]
    ZeroNorm,
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symbol of the kinetic operator `-Δ` in Fourier space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// `|k|²`, spectrally exact.
    #[default]
    Spectral,
    /// `Σ_a (2 - 2 cos(k_a h)) / h²`, the nearest-neighbour second difference.
    Lattice,
}

/// Uniform periodic grid on `[-L/2, L/2)^d` with `M` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dimension: Dimension,
    pub m: usize,
    pub l: f64,
    #[serde(default)]
    pub dispersion: Dispersion,
}

impl Grid {
    pub fn new(dimension: Dimension, m: usize, l: f64) -> Self {
        Self {
            dimension,
            m,
            l,
            dispersion: Dispersion::Spectral,
        }
    }

    pub fn one_d(m: usize, l: f64) -> Self {
        Self::new(Dimension::One, m, l)
    }

    pub fn three_d(m: usize, l: f64) -> Self {
        Self::new(Dimension::Three, m, l)
    }

    pub fn with_dispersion(self, dispersion: Dispersion) -> Self {
        Self { dispersion, ..self }
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension.get() as i32)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dimension.get() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Coordinate of index `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.l + j as f64 * self.spacing()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.coordinate(j)).collect()
    }

    /// Angular wavenumber of FFT index `j` along one axis.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = self.m as isize;
        let j = j as isize;
        let shifted = if j <= m / 2 { j } else { j - m };
        2.0 * PI * shifted as f64 / self.l
    }

    /// One-axis kinetic symbol for FFT index `j`.
    pub fn axis_symbol(&self, j: usize) -> f64 {
        let k = self.wavenumber(j);
        match self.dispersion {
            Dispersion::Spectral => k * k,
            Dispersion::Lattice => {
                let h = self.spacing();
                (2.0 - 2.0 * (k * h).cos()) / (h * h)
            }
        }
    }

    /// Kinetic symbol for every Fourier mode, in the same (row-major) layout as field values.
    pub fn kinetic_symbol(&self) -> Vec<f64> {
        let axis: Vec<f64> = (0..self.m).map(|j| self.axis_symbol(j)).collect();
        match self.dimension {
            Dimension::One => axis,
            Dimension::Three => {
                let mut out = Vec::with_capacity(self.len());
                for a in &axis {
                    for b in &axis {
                        for c in &axis {
                            out.push(a + b + c);
                        }
                    }
                }
                out
            }
        }
    }

    /// Samples `g(x)` (`x` as a coordinate triple padded with zeros in 1D) on the grid.
    pub fn sample<G: Fn([f64; 3]) -> f64>(&self, g: G) -> Vec<f64> {
        let axis = self.axis();
        match self.dimension {
            Dimension::One => axis.iter().map(|&x| g([x, 0.0, 0.0])).collect(),
            Dimension::Three => {
                let mut out = Vec::with_capacity(self.len());
                for &x in &axis {
                    for &y in &axis {
                        for &z in &axis {
                            out.push(g([x, y, z]));
                        }
                    }
                }
                out
            }
        }
    }

    /// Periodic minimum-image distance from the origin for each grid offset,
    /// used to sample convolution kernels.
    pub fn offset_distances(&self) -> Vec<f64> {
        let h = self.spacing();
        let m = self.m;
        let axis: Vec<f64> = (0..m).map(|j| j.min(m - j) as f64 * h).collect();
        match self.dimension {
            Dimension::One => axis,
            Dimension::Three => {
                let mut out = Vec::with_capacity(self.len());
                for a in &axis {
                    for b in &axis {
                        for c in &axis {
                            out.push((a * a + b * b + c * c).sqrt());
                        }
                    }
                }
                out
            }
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<(), GpError> {
        if self != other {
            return Err(GpError::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Complex amplitudes on a [`Grid`], row-major in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn<G: Fn([f64; 3]) -> Complex64>(grid: Grid, g: G) -> Self {
        let axis = grid.axis();
        let values = match grid.dimension {
            Dimension::One => axis.iter().map(|&x| g([x, 0.0, 0.0])).collect(),
            Dimension::Three => {
                let mut out = Vec::with_capacity(grid.len());
                for &x in &axis {
                    for &y in &axis {
                        for &z in &axis {
                            out.push(g([x, y, z]));
                        }
                    }
                }
                out
            }
        };
        Self { grid, values }
    }

    /// `e^{i k·x}` with integer mode numbers, normalized to unit mass.
    pub fn plane_wave(grid: Grid, modes: [i64; 3]) -> Self {
        let kf = 2.0 * PI / grid.l;
        let amp = 1.0 / grid.l.powi(grid.dimension.get() as i32).sqrt();
        Self::from_fn(grid, |x| {
            let phase = kf * (modes[0] as f64 * x[0] + modes[1] as f64 * x[1] + modes[2] as f64 * x[2]);
            Complex64::from_polar(amp, phase)
        })
    }

    pub fn constant(grid: Grid, value: Complex64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn normalized(&self) -> Result<Self, GpError> {
        let m = mass(self);
        if !(m > 0.0) {
            return Err(GpError::ZeroNorm);
        }
        Ok(self.scaled(1.0 / m.sqrt()))
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `Σ conj(self) other h^d`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        let dv = self.grid.cell_volume();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * dv
    }

    /// `sqrt(Σ |self - other|² h^d)`.
    pub fn distance(&self, other: &Field) -> f64 {
        let dv = self.grid.cell_volume();
        (self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * dv)
            .sqrt()
    }
}

/// `Σ |φ|² h^d`.
pub fn mass(phi: &Field) -> f64 {
    phi.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * phi.grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_examples() {
        let g = Grid::one_d(64, 5.0);
        let pw = Field::plane_wave(g, [3, 0, 0]);
        assert!((mass(&pw) - 1.0).abs() < 1e-14);
        assert!((mass(&pw.scaled(2.0)) - 4.0).abs() < 1e-13);
        let g3 = Grid::three_d(8, 2.0);
        assert!((mass(&Field::plane_wave(g3, [1, -2, 0])) - 1.0).abs() < 1e-13);
        let m1 = mass(&pw);
        assert_eq!(m1, mass(&pw));
    }

    #[test]
    fn lattice_symbol_matches_second_difference() {
        let g = Grid::one_d(16, 4.0).with_dispersion(Dispersion::Lattice);
        let h = g.spacing();
        for j in 0..16 {
            let k = g.wavenumber(j);
            assert!((g.axis_symbol(j) - 4.0 * (0.5 * k * h).sin().powi(2) / (h * h)).abs() < 1e-12);
        }
    }

    #[test]
    fn offsets_use_minimum_image() {
        let g = Grid::one_d(8, 8.0);
        assert_eq!(g.offset_distances(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]);
    }
}

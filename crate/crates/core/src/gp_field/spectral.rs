use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;
use crate::potentials::Dimension;

/// Cached FFT plans and the kinetic symbol for one grid.
#[derive(Clone)]
pub struct FftOps {
    pub grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl std::fmt::Debug for FftOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftOps").field("grid", &self.grid).finish()
    }
}

impl FftOps {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.m),
            inverse: planner.plan_fft_inverse(grid.m),
            symbol: grid.kinetic_symbol(),
        }
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn along_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.grid.m;
        match self.grid.dimension {
            Dimension::One => plan.process(data),
            Dimension::Three => {
                // Contiguous last axis.
                plan.process(data);
                let mut line = vec![Complex64::new(0.0, 0.0); m];
                for stride in [m, m * m] {
                    for base in 0..data.len() {
                        // `base` enumerates line starts: index with a zero digit at `stride`.
                        if (base / stride) % m != 0 {
                            continue;
                        }
                        for (j, slot) in line.iter_mut().enumerate() {
                            *slot = data[base + j * stride];
                        }
                        plan.process(&mut line);
                        for (j, v) in line.iter().enumerate() {
                            data[base + j * stride] = *v;
                        }
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.forward);
    }

    /// Inverse DFT including the `1/M^d` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Applies a Fourier multiplier `m(k)` to `data` in place.
    pub fn apply_multiplier<F: Fn(f64) -> Complex64>(&self, data: &mut [Complex64], multiplier: F) {
        self.forward(data);
        for (v, &s) in data.iter_mut().zip(&self.symbol) {
            *v *= multiplier(s);
        }
        self.inverse(data);
    }

    /// `-Δ data` with the grid's dispersion.
    pub fn kinetic(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut out = data.to_vec();
        self.forward(&mut out);
        for (v, &s) in out.iter_mut().zip(&self.symbol) {
            *v *= s;
        }
        self.inverse(&mut out);
        out
    }

    /// `Σ_x |∇φ|² h^d` via Parseval.
    pub fn kinetic_energy(&self, data: &[Complex64]) -> f64 {
        let mut hat = data.to_vec();
        self.forward(&mut hat);
        let sum: f64 = hat.iter().zip(&self.symbol).map(|(v, s)| v.norm_sqr() * s).sum();
        sum * self.grid.cell_volume() / data.len() as f64
    }

    /// Periodic convolution `Σ_y v(x - y) ρ(y) h^d` of a kernel sampled at grid offsets.
    pub fn convolve(&self, kernel_hat: &[Complex64], rho: &[f64]) -> Vec<f64> {
        let mut r: Vec<Complex64> = rho.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut r);
        for (v, k) in r.iter_mut().zip(kernel_hat) {
            *v *= k;
        }
        self.inverse(&mut r);
        let dv = self.grid.cell_volume();
        r.iter().map(|v| v.re * dv).collect()
    }

    /// Forward transform of a real kernel sampled at grid offsets.
    pub fn kernel_transform(&self, kernel: &[f64]) -> Vec<Complex64> {
        let mut k: Vec<Complex64> = kernel.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut k);
        k
    }
}

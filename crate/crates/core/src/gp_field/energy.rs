use std::f64::consts::PI;

use num_complex::Complex64;

use super::{mass, Field, FftOps, GpError, Grid};

/// `Σ (|∇φ|² + V_ext |φ|² + 4π a0 |φ|⁴) h^d`, gradient term evaluated with the grid's dispersion.
pub fn gp_energy(phi: &Field, a0: f64, v_ext: Option<&[f64]>) -> f64 {
    let ops = FftOps::new(phi.grid);
    energy_with(&ops, phi, a0, v_ext)
}

fn energy_with(ops: &FftOps, phi: &Field, a0: f64, v_ext: Option<&[f64]>) -> f64 {
    let dv = phi.grid.cell_volume();
    let kinetic = ops.kinetic_energy(&phi.values);
    let potential: f64 = match v_ext {
        Some(v) => phi.values.iter().zip(v).map(|(p, v)| v * p.norm_sqr()).sum::<f64>() * dv,
        None => 0.0,
    };
    let quartic: f64 = phi.values.iter().map(|p| p.norm_sqr().powi(2)).sum::<f64>() * dv;
    kinetic + potential + 4.0 * PI * a0 * quartic
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop once the energy decrement per step falls below this ...
    pub energy_tol: f64,
    /// ... and the projected gradient norm is below this.
    pub residual_tol: f64,
    pub initial: Option<Field>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            energy_tol: 1e-10,
            residual_tol: 1e-9,
            initial: None,
        }
    }
}

/// Minimizes the GP functional on the unit sphere `mass = 1` by a
/// Fourier-preconditioned normalized gradient flow (imaginary time with a
/// step-size line search), renormalizing after every step.
pub fn minimize_gp_energy(v_ext: Option<&[f64]>, a0: f64, grid: Grid, opts: &MinimizeOptions) -> Result<Field, GpError> {
    if let Some(v) = v_ext {
        if v.len() != grid.len() {
            return Err(GpError::GridMismatch(format!(
                "external potential has {} samples, grid has {}",
                v.len(),
                grid.len()
            )));
        }
    }
    let ops = FftOps::new(grid);
    let mut phi = match &opts.initial {
        Some(f) => {
            f.grid.ensure_same(&grid)?;
            f.normalized()?
        }
        None => {
            let w = grid.l / 8.0;
            Field::from_fn(grid, |x| {
                Complex64::new((-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp(), 0.0)
            })
            .normalized()?
        }
    };
    let dv = grid.cell_volume();
    let mut energy = energy_with(&ops, &phi, a0, v_ext);
    let v_max = v_ext.map_or(0.0, |v| v.iter().copied().fold(0.0, f64::max));
    let mut tau: f64 = 0.5;
    let mut decrement = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut h_phi = ops.kinetic(&phi.values);
        for (i, hp) in h_phi.iter_mut().enumerate() {
            let v = v_ext.map_or(0.0, |v| v[i]);
            *hp += phi.values[i] * (v + 8.0 * PI * a0 * phi.values[i].norm_sqr());
        }
        let mu: f64 = phi.values.iter().zip(&h_phi).map(|(p, hp)| (p.conj() * hp).re).sum::<f64>() * dv;
        let mut grad: Vec<Complex64> = h_phi.iter().zip(&phi.values).map(|(hp, p)| hp - p * mu).collect();
        residual = (grad.iter().map(|g| g.norm_sqr()).sum::<f64>() * dv).sqrt();
        if decrement < opts.energy_tol && residual < opts.residual_tol {
            return Ok(phi);
        }
        ops.apply_multiplier(&mut grad, |s| Complex64::new(1.0 / (1.0 + s), 0.0));
        // Explicit stability bound of the preconditioned flow: P(H - mu) has
        // spectrum below 1 + max V_ext + 8 pi a0 max|phi|^2.
        let peak = phi.values.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
        let tau_max = 1.9 / (1.0 + v_max + 8.0 * PI * a0.max(0.0) * peak);
        tau = tau.min(tau_max);
        loop {
            let trial = Field {
                grid,
                values: phi.values.iter().zip(&grad).map(|(p, g)| p - g * tau).collect(),
            }
            .normalized()?;
            let e = energy_with(&ops, &trial, a0, v_ext);
            if e <= energy + 1e-15 * energy.abs().max(1.0) {
                decrement = energy - e;
                energy = e;
                phi = trial;
                tau = (tau * 1.25).min(tau_max);
                break;
            }
            tau *= 0.5;
            if tau < 1e-14 {
                // No descent possible at working precision: stationary.
                decrement = 0.0;
                tau = tau_max;
                break;
            }
        }
    }
    debug_assert!((mass(&phi) - 1.0).abs() < 1e-10);
    Err(GpError::IterationLimit {
        iterations: opts.max_iterations,
        decrement,
        residual,
    })
}

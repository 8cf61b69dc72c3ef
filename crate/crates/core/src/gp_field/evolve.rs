use num_complex::Complex64;

use super::{mass, Field, FftOps, GpError};

/// Which nonlinear term drives the pointwise substep.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `σ |φ|² φ`.
    Cubic { sigma: f64 },
    /// `(v ∗ |φ|²) φ` with `v` sampled at grid offsets (minimum image).
    Hartree { kernel: Vec<f64> },
}

impl Nonlinearity {
    fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Cubic { .. } => "cubic",
            Nonlinearity::Hartree { .. } => "hartree",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionParams {
    pub nonlinearity: Nonlinearity,
    /// Optional external potential sampled on the grid.
    pub v_ext: Option<Vec<f64>>,
    /// Signed time step; negative values run the flow backwards.
    pub dt: f64,
    pub steps: usize,
    /// Promote the phase-per-step warning to an error.
    pub strict: bool,
}

impl EvolutionParams {
    pub fn cubic(sigma: f64, dt: f64, steps: usize) -> Self {
        Self {
            nonlinearity: Nonlinearity::Cubic { sigma },
            v_ext: None,
            dt,
            steps,
            strict: false,
        }
    }

    pub fn hartree(kernel: Vec<f64>, dt: f64, steps: usize) -> Self {
        Self {
            nonlinearity: Nonlinearity::Hartree { kernel },
            v_ext: None,
            dt,
            steps,
            strict: false,
        }
    }

    pub fn with_external(mut self, v_ext: Vec<f64>) -> Self {
        self.v_ext = Some(v_ext);
        self
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }
}

/// Strang-split propagator: half kinetic step in Fourier space, full
/// pointwise phase `exp(-i dt (V_ext + U[φ]))`, half kinetic step.
#[derive(Debug, Clone)]
pub struct Propagator {
    ops: FftOps,
    half_kick: Vec<Complex64>,
    v_ext: Option<Vec<f64>>,
    nonlinearity: Nonlinearity,
    kernel_hat: Option<Vec<Complex64>>,
    dt: f64,
    strict: bool,
    /// Largest `dt · max|U|` seen so far.
    pub max_phase: f64,
}

impl Propagator {
    pub fn new(grid: super::Grid, params: &EvolutionParams) -> Result<Self, GpError> {
        if !(params.dt.is_finite() && params.dt != 0.0) {
            return Err(GpError::BadTimeStep(params.dt));
        }
        let ops = FftOps::new(grid);
        if let Some(v) = &params.v_ext {
            if v.len() != grid.len() {
                return Err(GpError::GridMismatch(format!(
                    "external potential has {} samples, grid has {}",
                    v.len(),
                    grid.len()
                )));
            }
        }
        let kernel_hat = match &params.nonlinearity {
            Nonlinearity::Hartree { kernel } => {
                if kernel.len() != grid.len() {
                    return Err(GpError::GridMismatch(format!(
                        "kernel has {} samples, grid has {}",
                        kernel.len(),
                        grid.len()
                    )));
                }
                Some(ops.kernel_transform(kernel))
            }
            Nonlinearity::Cubic { .. } => None,
        };
        let half_kick = ops
            .symbol()
            .iter()
            .map(|&s| Complex64::from_polar(1.0, -0.5 * params.dt * s))
            .collect();
        Ok(Self {
            ops,
            half_kick,
            v_ext: params.v_ext.clone(),
            nonlinearity: params.nonlinearity.clone(),
            kernel_hat,
            dt: params.dt,
            strict: params.strict,
            max_phase: 0.0,
        })
    }

    fn kick(&self, values: &mut [Complex64]) {
        self.ops.forward(values);
        for (v, k) in values.iter_mut().zip(&self.half_kick) {
            *v *= k;
        }
        self.ops.inverse(values);
    }

    /// Pointwise potential `V_ext + U[φ]` of the nonlinear substep.
    pub fn nonlinear_potential(&self, values: &[Complex64]) -> Vec<f64> {
        let rho: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
        let mut u = match (&self.nonlinearity, &self.kernel_hat) {
            (Nonlinearity::Cubic { sigma }, _) => rho.iter().map(|r| sigma * r).collect(),
            (Nonlinearity::Hartree { .. }, Some(kh)) => self.ops.convolve(kh, &rho),
            (Nonlinearity::Hartree { .. }, None) => unreachable!("kernel transform built in new()"),
        };
        if let Some(v) = &self.v_ext {
            u.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        u
    }

    pub fn step(&mut self, phi: &mut Field) -> Result<(), GpError> {
        self.kick(&mut phi.values);
        let u = self.nonlinear_potential(&phi.values);
        let phase = self.dt.abs() * u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        self.max_phase = self.max_phase.max(phase);
        if self.strict && phase > std::f64::consts::PI {
            return Err(GpError::Aliasing { phase });
        }
        for (v, &ux) in phi.values.iter_mut().zip(&u) {
            *v *= Complex64::from_polar(1.0, -self.dt * ux);
        }
        self.kick(&mut phi.values);
        Ok(())
    }
}

fn run(phi: &Field, p: &EvolutionParams) -> Result<Field, GpError> {
    let mut prop = Propagator::new(phi.grid, p)?;
    let mut out = phi.clone();
    for _ in 0..p.steps {
        prop.step(&mut out)?;
    }
    Ok(out)
}

/// `i ∂φ = -Δφ + V_ext φ + σ |φ|² φ`.
pub fn evolve_nls(phi: &Field, p: &EvolutionParams) -> Result<Field, GpError> {
    if let Nonlinearity::Hartree { .. } = p.nonlinearity {
        return Err(GpError::ModeMismatch {
            expected: "cubic",
            found: p.nonlinearity.name(),
        });
    }
    run(phi, p)
}

/// `i ∂φ = -Δφ + V_ext φ + (v ∗ |φ|²) φ`.
pub fn evolve_hartree(phi: &Field, p: &EvolutionParams) -> Result<Field, GpError> {
    if let Nonlinearity::Cubic { .. } = p.nonlinearity {
        return Err(GpError::ModeMismatch {
            expected: "hartree",
            found: p.nonlinearity.name(),
        });
    }
    run(phi, p)
}

/// Evolution keeping every `every`-th state, starting with the initial one.
pub fn evolve_nls_trajectory(phi: &Field, p: &EvolutionParams, every: usize) -> Result<Vec<Field>, GpError> {
    let every = every.max(1);
    let mut prop = Propagator::new(phi.grid, p)?;
    let mut cur = phi.clone();
    let mut out = vec![cur.clone()];
    for s in 1..=p.steps {
        prop.step(&mut cur)?;
        if s % every == 0 {
            out.push(cur.clone());
        }
    }
    debug_assert!(mass(&cur).is_finite());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_field::{gp_energy, Grid};
    use std::f64::consts::PI;

    fn gaussian(grid: Grid, x0: f64, width: f64, k0: f64) -> Field {
        Field::from_fn(grid, |x| {
            Complex64::from_polar((-(x[0] - x0).powi(2) / (2.0 * width * width)).exp(), k0 * x[0])
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn free_plane_wave_phase() {
        let g = Grid::one_d(64, 2.0 * PI);
        let pw = Field::plane_wave(g, [3, 0, 0]);
        let out = evolve_nls(&pw, &EvolutionParams::cubic(0.0, 0.01, 100)).unwrap();
        let expect = Complex64::from_polar(1.0, -9.0 * 1.0);
        for (a, b) in out.values.iter().zip(&pw.values) {
            assert!((a - b * expect).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_field_phase_rotation() {
        let g = Grid::one_d(256, 2.0 * PI);
        let c = Field::constant(g, Complex64::new(1.0, 0.0));
        let out = evolve_nls(&c, &EvolutionParams::cubic(2.0, 1e-3, 1000)).unwrap();
        let expect = Complex64::from_polar(1.0, -2.0);
        for v in &out.values {
            assert!((v - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn strang_order_two() {
        let g = Grid::one_d(256, 2.0 * PI);
        let phi = gaussian(g, 0.3, 0.6, 2.0);
        let t = 0.5;
        let solve = |steps: usize| evolve_nls(&phi, &EvolutionParams::cubic(5.0, t / steps as f64, steps)).unwrap();
        let reference = solve(6400);
        let errs: Vec<f64> = [50usize, 100, 200].iter().map(|&s| solve(s).distance(&reference)).collect();
        let slope1 = (errs[0] / errs[1]).log2();
        let slope2 = (errs[1] / errs[2]).log2();
        assert!((slope1 - 2.0).abs() < 0.1 && (slope2 - 2.0).abs() < 0.1, "{slope1} {slope2}");
    }

    #[test]
    fn mass_energy_and_reversal() {
        let g = Grid::one_d(256, 2.0 * PI);
        let phi = gaussian(g, 0.0, 0.7, 1.0);
        let sigma = 3.0;
        let fwd = evolve_nls(&phi, &EvolutionParams::cubic(sigma, 1e-3, 1000)).unwrap();
        assert!((mass(&fwd) - mass(&phi)).abs() < 1e-12);
        let a0 = sigma / (8.0 * PI);
        let (e0, e1) = (gp_energy(&phi, a0, None), gp_energy(&fwd, a0, None));
        assert!(((e1 - e0) / e0).abs() < 1e-6, "energy drift {}", (e1 - e0) / e0);
        let back = evolve_nls(&fwd, &EvolutionParams::cubic(sigma, -1e-3, 1000)).unwrap();
        assert!(back.distance(&phi) < 1e-8);
    }

    #[test]
    fn strict_mode_flags_large_phase() {
        let g = Grid::one_d(32, 1.0);
        let c = Field::constant(g, Complex64::new(3.0, 0.0));
        let p = EvolutionParams::cubic(1.0, 0.5, 1);
        assert!(evolve_nls(&c, &p).is_ok());
        assert!(matches!(evolve_nls(&c, &p.clone().strict()), Err(GpError::Aliasing { .. })));
    }

    #[test]
    fn mode_mismatch() {
        let g = Grid::one_d(32, 1.0);
        let c = Field::constant(g, Complex64::new(1.0, 0.0));
        assert!(matches!(
            evolve_hartree(&c, &EvolutionParams::cubic(1.0, 0.1, 1)),
            Err(GpError::ModeMismatch { .. })
        ));
        assert!(matches!(
            evolve_nls(&c, &EvolutionParams::hartree(vec![0.0; 32], 0.1, 1)),
            Err(GpError::ModeMismatch { .. })
        ));
        assert!(matches!(
            evolve_nls(&c, &EvolutionParams::cubic(1.0, 0.0, 1)),
            Err(GpError::BadTimeStep(_))
        ));
    }

    #[test]
    fn hartree_zero_kernel_is_free() {
        let g = Grid::one_d(128, 2.0 * PI);
        let phi = gaussian(g, 0.0, 0.5, 1.0);
        let a = evolve_hartree(&phi, &EvolutionParams::hartree(vec![0.0; 128], 1e-2, 50)).unwrap();
        let b = evolve_nls(&phi, &EvolutionParams::cubic(0.0, 1e-2, 50)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hartree_constant_field() {
        let g = Grid::one_d(128, 2.0 * PI);
        let kernel: Vec<f64> = g.offset_distances().iter().map(|&r| (-r * r).exp()).collect();
        let integral: f64 = kernel.iter().sum::<f64>() * g.spacing();
        let a = Complex64::new(0.6, 0.8);
        let c = Field::constant(g, a);
        let out = evolve_hartree(&c, &EvolutionParams::hartree(kernel, 1e-3, 1000)).unwrap();
        let expect = a * Complex64::from_polar(1.0, -integral);
        for v in &out.values {
            assert!((v - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn hartree_approaches_nls_as_kernel_narrows() {
        let g = Grid::one_d(256, 2.0 * PI);
        let phi = gaussian(g, 0.0, 0.6, 1.5);
        let sigma = 4.0;
        let p = EvolutionParams::cubic(sigma, 1e-3, 500);
        let nls = evolve_nls(&phi, &p).unwrap();
        let mut errs = Vec::new();
        for width in [0.4, 0.2, 0.1] {
            let raw: Vec<f64> = g.offset_distances().iter().map(|&r| (-(r / width).powi(2)).exp()).collect();
            let norm: f64 = raw.iter().sum::<f64>() * g.spacing();
            let kernel = raw.iter().map(|v| v * sigma / norm).collect();
            let h = evolve_hartree(&phi, &EvolutionParams::hartree(kernel, 1e-3, 500)).unwrap();
            errs.push(h.distance(&nls));
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn three_d_constant_and_mass() {
        let g = Grid::three_d(12, 2.0);
        let c = Field::constant(g, Complex64::new(0.5, 0.0));
        let out = evolve_nls(&c, &EvolutionParams::cubic(4.0, 1e-2, 100)).unwrap();
        let expect = Complex64::from_polar(0.5, -1.0);
        for v in &out.values {
            assert!((v - expect).norm() < 1e-10);
        }
        let phi = Field::from_fn(g, |x| Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp(), 0.0))
            .normalized()
            .unwrap();
        let out = evolve_nls(&phi, &EvolutionParams::cubic(10.0, 1e-3, 50)).unwrap();
        assert!((mass(&out) - 1.0).abs() < 1e-12);
    }
}

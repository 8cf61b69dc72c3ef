//! Zero-energy scattering: the radial solution `u = r f(r)` of
//! `(-Δ + V/2) f = 0`, the scattering length by two independent routes,
//! the scaled correlation function `f_N` and its derivative bounds.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{alpha_measure, b0_integral, Dimension, PotentialError, PotentialSpec, RadialPotential, ScaledPair};
use crate::quadrature::simpson_uniform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error("the zero-energy problem is solved for three-dimensional potentials only")]
    NotThreeDimensional,
    #[error("r_max = {r_max} must exceed the support radius {support}")]
    InvalidDomain { r_max: f64, support: f64 },
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("potential is negative at r = {0}")]
    NegativePotential(f64),
    #[error("tail is not linear: fit residual {residual:e} above {tol:e}")]
    TailNotLinear { residual: f64, tol: f64 },
    #[error("adaptive refinement did not reach tolerance {tol:e} (last change {change:e})")]
    NotConverged { tol: f64, change: f64 },
    #[error("β = {0} outside (0, 1]")]
    BetaOutOfRange(f64),
    #[error("no scattering length in one dimension; the effective coupling is b0")]
    OneDimensional,
    #[error("bound violated: {0}")]
    BoundViolation(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Radial zero-energy solution normalized so that `u(r) = r - a0` beyond the support.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub pair: ScaledPair,
    /// Uniform radial grid from 0 to `r_max`; the support radius is a node.
    pub r_grid: Vec<f64>,
    pub u: Vec<f64>,
    pub a0: f64,
    pub f0: f64,
    /// Grid index of the support radius.
    pub support_index: usize,
    /// Radial steps per support radius chosen by refinement.
    pub steps_per_radius: usize,
}

impl ScatteringSolution {
    pub fn step(&self) -> f64 {
        self.r_grid[1] - self.r_grid[0]
    }

    pub fn support_radius(&self) -> f64 {
        self.r_grid[self.support_index]
    }

    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().expect("non-empty grid")
    }

    /// `f(r) = u(r)/r` on the grid, with `f(0) = f0`.
    pub fn f_values(&self) -> Vec<f64> {
        self.r_grid
            .iter()
            .zip(&self.u)
            .map(|(&r, &u)| if r == 0.0 { self.f0 } else { u / r })
            .collect()
    }

    /// `f` at an arbitrary radius; exact tail beyond the support, linear
    /// interpolation of `u` inside.
    pub fn f_at(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.support_radius() {
            return 1.0 - self.a0 / r;
        }
        if r == 0.0 {
            return self.f0;
        }
        let h = self.step();
        let i = ((r / h) as usize).min(self.support_index.saturating_sub(1));
        let t = (r - self.r_grid[i]) / h;
        let u = self.u[i] * (1.0 - t) + self.u[i + 1] * t;
        u / r
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,u,f")?;
        for ((r, u), f) in self.r_grid.iter().zip(&self.u).zip(self.f_values()) {
            writeln!(out, "{r:.17e},{u:.17e},{f:.17e}")?;
        }
        Ok(())
    }
}

/// One classical RK4 sweep of `u'' = V(r) u / 2` with step `h`; the support
/// radius sits at node `support_steps`, beyond which the potential vanishes.
fn rk4_sweep<P: RadialPotential>(pot: &P, h: f64, support_steps: usize, total: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(total + 1);
    let mut du = Vec::with_capacity(total + 1);
    let (mut y, mut dy) = (0.0f64, 1.0f64);
    u.push(y);
    du.push(dy);
    let rs = pot.support_radius();
    // Interior (left) limits so a jump at the support radius is never sampled from outside.
    let half_v = |r: f64| 0.5 * pot.value(r.min(rs * (1.0 - 1e-15)));
    for i in 0..total {
        if i >= support_steps {
            // V = 0: RK4 is exact for linear solutions.
            y += h * dy;
            u.push(y);
            du.push(dy);
            continue;
        }
        let r = i as f64 * h;
        let v0 = half_v(r);
        let vm = half_v(r + 0.5 * h);
        let v1 = half_v(r + h);
        let k1 = (dy, v0 * y);
        let k2 = (dy + 0.5 * h * k1.1, vm * (y + 0.5 * h * k1.0));
        let k3 = (dy + 0.5 * h * k2.1, vm * (y + 0.5 * h * k2.0));
        let k4 = (dy + h * k3.1, v1 * (y + h * k3.0));
        y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        dy += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        u.push(y);
        du.push(dy);
    }
    (u, du)
}

fn check_profile<P: RadialPotential>(pot: &P) -> Result<(), ScatteringError> {
    if pot.dimension() != Dimension::Three {
        return Err(ScatteringError::NotThreeDimensional);
    }
    let rs = pot.support_radius();
    for i in 0..=64 {
        let r = rs * i as f64 / 64.0;
        if pot.value(r) < 0.0 {
            return Err(ScatteringError::NegativePotential(r));
        }
    }
    Ok(())
}

/// Integrates the radial zero-energy equation outward from `u(0) = 0`,
/// `u'(0) = 1` and normalizes so that `u(r) → r - a0`.
///
/// The number of steps per support radius is doubled until the matched
/// scattering length and `f(0)` change by less than `tol` (relative to the
/// support radius). The grid continues past the support with the same step
/// up to `r_max`, where the ODE is still integrated (not filled in).
pub fn solve_zero_energy<P>(pot: &P, r_max: f64, tol: f64) -> Result<ScatteringSolution, ScatteringError>
where
    P: RadialPotential + Into<ScaledPair> + Copy,
{
    check_profile(pot)?;
    let rs = pot.support_radius();
    if !(r_max > rs) {
        return Err(ScatteringError::InvalidDomain { r_max, support: rs });
    }
    if !(tol > 0.0) {
        return Err(ScatteringError::BadTolerance);
    }
    let pair: ScaledPair = (*pot).into();
    let outer_ratio = r_max / rs;

    let matched = |n: usize| -> (f64, f64) {
        if pot.is_zero() {
            return (0.0, 1.0);
        }
        let h = rs / n as f64;
        let (u, du) = rk4_sweep(pot, h, n, n);
        let (ur, dur) = (u[n], du[n]);
        (rs - ur / dur, 1.0 / dur)
    };

    let mut n = 64usize;
    let (mut a_prev, mut f_prev) = matched(n);
    loop {
        let next = 2 * n;
        let (a, f) = matched(next);
        let change = ((a - a_prev).abs().max((f - f_prev).abs() * rs)) / rs;
        n = next;
        a_prev = a;
        f_prev = f;
        if change < tol || pot.is_zero() {
            break;
        }
        if n > 1 << 16 {
            return Err(ScatteringError::NotConverged { tol, change });
        }
    }

    let h = rs / n as f64;
    let total = (outer_ratio * n as f64).ceil() as usize;
    let (u_raw, du_raw) = rk4_sweep(pot, h, n, total);
    let slope = du_raw[n];
    let a0 = rs - u_raw[n] / slope;
    let u: Vec<f64> = u_raw.iter().map(|v| v / slope).collect();
    let r_grid: Vec<f64> = (0..=total).map(|i| i as f64 * h).collect();
    Ok(ScatteringSolution {
        pair,
        r_grid,
        u,
        a0,
        f0: 1.0 / slope,
        support_index: n,
        steps_per_radius: n,
    })
}

impl From<PotentialSpec> for ScaledPair {
    fn from(spec: PotentialSpec) -> Self {
        ScaledPair::unscaled(spec)
    }
}

/// Default outer radius: twenty support radii.
pub fn default_r_max<P: RadialPotential>(pot: &P) -> f64 {
    20.0 * pot.support_radius()
}

/// Least-squares fit of `u(r) = r - a0` on the tail window `(1.5 R, r_max]`.
pub fn scattering_length_tail(sol: &ScatteringSolution) -> Result<f64, ScatteringError> {
    let rs = sol.support_radius();
    let start = 1.5 * rs;
    let tail: Vec<(f64, f64)> = sol
        .r_grid
        .iter()
        .zip(&sol.u)
        .filter(|(&r, _)| r > start)
        .map(|(&r, &u)| (r, u))
        .collect();
    if tail.len() < 2 {
        return Err(ScatteringError::InvalidDomain {
            r_max: sol.r_max(),
            support: rs,
        });
    }
    // Unit slope is part of the normalization; fit slope and offset and
    // check the slope as part of the linearity test.
    let n = tail.len() as f64;
    let (sx, sy) = tail.iter().fold((0.0, 0.0), |acc, (r, u)| (acc.0 + r, acc.1 + u));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = tail
        .iter()
        .fold((0.0, 0.0), |acc, (r, u)| (acc.0 + (r - mx) * (u - my), acc.1 + (r - mx) * (r - mx)));
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    let residual = tail
        .iter()
        .map(|(r, u)| (u - (slope * r + offset)).abs())
        .fold((slope - 1.0).abs() * sol.r_max(), f64::max);
    let tol = 1e-9 * sol.r_max();
    if residual > tol {
        return Err(ScatteringError::TailNotLinear { residual, tol });
    }
    Ok(-offset / slope)
}

/// `(1/8π) ∫ V f = (1/2) ∫₀^R V(r) u(r) r dr` by Simpson's rule on the solution grid.
pub fn scattering_length_integral(sol: &ScatteringSolution) -> f64 {
    if sol.pair.is_zero() {
        return 0.0;
    }
    let n = sol.support_index;
    let h = sol.step();
    let samples: Vec<f64> = (0..=n)
        .map(|i| {
            let r = sol.r_grid[i];
            // Interior limit at the support node.
            let rv = r.min(sol.pair.support_radius() * (1.0 - 1e-15));
            sol.pair.value(rv) * sol.u[i] * r
        })
        .collect();
    0.5 * simpson_uniform(&samples, h)
}

/// Summary record exported alongside the CSV profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSummary {
    pub a0_tail: f64,
    pub a0_integral: f64,
    pub b0: f64,
    pub alpha: f64,
    pub f0: f64,
}

pub fn summarize(spec: &PotentialSpec, sol: &ScatteringSolution) -> Result<ScatteringSummary, ScatteringError> {
    Ok(ScatteringSummary {
        a0_tail: scattering_length_tail(sol)?,
        a0_integral: scattering_length_integral(sol),
        b0: b0_integral(spec)?,
        alpha: alpha_measure(spec)?,
        f0: sol.f0,
    })
}

/// `f_N(x) = f(N|x|)`.
#[derive(Debug, Clone)]
pub struct CorrelationFunction {
    pub solution: ScatteringSolution,
    pub n: u32,
}

impl CorrelationFunction {
    pub fn eval(&self, r: f64) -> f64 {
        self.solution.f_at(self.n as f64 * r.abs())
    }

    pub fn scattering_length(&self) -> f64 {
        self.solution.a0 / self.n as f64
    }
}

pub fn build_correlation(sol: &ScatteringSolution, n: u32) -> Result<CorrelationFunction, ScatteringError> {
    if n < 1 {
        return Err(PotentialError::BadParticleNumber.into());
    }
    Ok(CorrelationFunction {
        solution: sol.clone(),
        n,
    })
}

/// Fitted constants of `1 - C α ≤ f ≤ 1`, `|f'| ≤ C α / r`, `|f''| ≤ C α / r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub c_low: f64,
    pub c_grad: f64,
    pub c_hess: f64,
}

pub fn verify_f_bounds(sol: &ScatteringSolution, alpha: f64) -> Result<BoundReport, ScatteringError> {
    let f = sol.f_values();
    for (i, &v) in f.iter().enumerate() {
        if v > 1.0 + 1e-12 {
            return Err(ScatteringError::BoundViolation(format!("f({}) = {v} > 1", sol.r_grid[i])));
        }
        if v <= 0.0 {
            return Err(ScatteringError::BoundViolation(format!("f({}) = {v} ≤ 0", sol.r_grid[i])));
        }
    }
    for (i, w) in f.windows(2).enumerate() {
        if w[1] < w[0] - 1e-13 {
            return Err(ScatteringError::BoundViolation(format!(
                "f decreases between r = {} and r = {}",
                sol.r_grid[i],
                sol.r_grid[i + 1]
            )));
        }
    }
    if alpha <= 0.0 || sol.pair.is_zero() {
        return Ok(BoundReport {
            c_low: 0.0,
            c_grad: 0.0,
            c_hess: 0.0,
        });
    }
    let h = sol.step();
    let fmin = f.iter().copied().fold(f64::INFINITY, f64::min);
    let c_low = (1.0 - fmin) / alpha;
    let (mut grad, mut hess) = (0.0f64, 0.0f64);
    for i in 1..f.len() - 1 {
        let r = sol.r_grid[i];
        let d1 = (f[i + 1] - f[i - 1]) / (2.0 * h);
        let d2 = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
        grad = grad.max(r * d1.abs());
        hess = hess.max(r * r * d2.abs());
    }
    Ok(BoundReport {
        c_low,
        c_grad: grad / alpha,
        c_hess: hess / alpha,
    })
}

/// Effective one-body coupling: `8π a0` at `β = 1`, otherwise `b0 = ∫ V`.
pub fn coupling_constant(spec: &PotentialSpec, beta: f64) -> Result<f64, ScatteringError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ScatteringError::BetaOutOfRange(beta));
    }
    if spec.is_zero() {
        return Ok(0.0);
    }
    if beta < 1.0 {
        return Ok(b0_integral(spec)?);
    }
    if spec.dimension != Dimension::Three {
        return Err(ScatteringError::OneDimensional);
    }
    let sol = solve_zero_energy(spec, default_r_max(spec), 1e-12)?;
    Ok(8.0 * PI * sol.a0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ss(v0: f64) -> PotentialSpec {
        PotentialSpec::soft_sphere(v0, 1.0, Dimension::Three).unwrap()
    }

    /// Closed form for the soft sphere: `a0 = R - tanh(κR)/κ`, `κ = sqrt(V0/2)`.
    fn soft_sphere_a0(v0: f64, r: f64) -> f64 {
        let k = (v0 / 2.0).sqrt();
        r - (k * r).tanh() / k
    }

    #[test]
    fn zero_potential_is_trivial() {
        let spec = PotentialSpec::zero(Dimension::Three);
        let sol = solve_zero_energy(&spec, 20.0, 1e-10).unwrap();
        assert_eq!(sol.a0, 0.0);
        assert!(sol.f_values().iter().all(|&f| (f - 1.0).abs() < 1e-14));
        assert_eq!(scattering_length_tail(&sol).unwrap().abs(), 0.0);
        assert_eq!(scattering_length_integral(&sol), 0.0);
        let rep = verify_f_bounds(&sol, 0.0).unwrap();
        assert_eq!((rep.c_low, rep.c_grad, rep.c_hess), (0.0, 0.0, 0.0));
        assert_eq!(coupling_constant(&spec, 1.0).unwrap(), 0.0);
        assert_eq!(coupling_constant(&spec, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn soft_sphere_closed_form() {
        let sol = solve_zero_energy(&ss(2.0), 20.0, 1e-12).unwrap();
        let exact = 1.0 - 1f64.tanh();
        assert!((exact - 0.238_405_844_044_234).abs() < 1e-12);
        assert!((sol.a0 - exact).abs() < 1e-9);
        assert!((sol.f0 - 1.0 / 1f64.cosh()).abs() < 1e-9);
        assert!((scattering_length_tail(&sol).unwrap() - exact).abs() < 1e-9);
        assert!((scattering_length_integral(&sol) - exact).abs() < 1e-7);
        for v0 in [0.01, 0.5, 7.0] {
            let sol = solve_zero_energy(&ss(v0), 20.0, 1e-12).unwrap();
            assert!((sol.a0 - soft_sphere_a0(v0, 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_is_linear_beyond_support() {
        let sol = solve_zero_energy(&ss(2.0), 20.0, 1e-12).unwrap();
        for (r, u) in sol.r_grid.iter().zip(&sol.u).skip(sol.support_index) {
            assert!((u - (r - sol.a0)).abs() < 1e-10);
        }
    }

    #[test]
    fn smooth_bump_routes_agree() {
        let spec = PotentialSpec::smooth_bump(1.0, 1.0, Dimension::Three).unwrap();
        let sol = solve_zero_energy(&spec, 20.0, 1e-12).unwrap();
        let tail = scattering_length_tail(&sol).unwrap();
        let integral = scattering_length_integral(&sol);
        assert!((tail - integral).abs() <= 1e-6 * tail);
    }

    #[test]
    fn born_limit() {
        let spec = PotentialSpec::smooth_bump(1e-4, 1.0, Dimension::Three).unwrap();
        let sol = solve_zero_energy(&spec, 20.0, 1e-12).unwrap();
        let b0 = b0_integral(&spec).unwrap();
        let a = scattering_length_integral(&sol);
        assert!((8.0 * PI * a - b0).abs() / b0 < 1e-3);
        assert!(8.0 * PI * a < b0);
    }

    #[test]
    fn eight_pi_a0_below_b0() {
        for v0 in [0.1, 1.0, 10.0] {
            for spec in [ss(v0), PotentialSpec::smooth_bump(v0, 1.0, Dimension::Three).unwrap()] {
                let sol = solve_zero_energy(&spec, 20.0, 1e-12).unwrap();
                assert!(8.0 * PI * sol.a0 < b0_integral(&spec).unwrap());
            }
        }
    }

    #[test]
    fn correlation_function() {
        let sol = solve_zero_energy(&ss(2.0), 20.0, 1e-12).unwrap();
        let f1 = build_correlation(&sol, 1).unwrap();
        for r in [0.0, 0.3, 0.99, 1.5, 7.0] {
            assert_eq!(f1.eval(r), sol.f_at(r));
        }
        let f10 = build_correlation(&sol, 10).unwrap();
        assert!((f10.eval(1.0) - (1.0 - 0.023_840_584_404_423_4)).abs() < 1e-10);
        assert!((f10.scattering_length() - sol.a0 / 10.0).abs() < 1e-16);
    }

    #[test]
    fn rescaled_problem_has_a0_over_n() {
        let spec = PotentialSpec::smooth_bump(1.0, 1.0, Dimension::Three).unwrap();
        let sol = solve_zero_energy(&spec, 20.0, 1e-12).unwrap();
        for n in [2u32, 10, 100] {
            let pair = ScaledPair::new(spec, n, 1.0).unwrap();
            let scaled = solve_zero_energy(&pair, default_r_max(&pair), 1e-12).unwrap();
            let expect = sol.a0 / n as f64;
            assert!((scaled.a0 - expect).abs() <= 1e-10 * expect, "n = {n}");
        }
    }

    #[test]
    fn rk4_order_under_step_halving() {
        let spec = PotentialSpec::smooth_bump(3.0, 1.0, Dimension::Three).unwrap();
        let a = |n: usize| {
            let h = 1.0 / n as f64;
            let (u, du) = rk4_sweep(&spec, h, n, n);
            1.0 - u[n] / du[n]
        };
        let reference = a(8192);
        let e1 = (a(64) - reference).abs();
        let e2 = (a(128) - reference).abs();
        assert!((e1 / e2).log2() >= 3.8, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn f_bounds_small_alpha() {
        let mut c_lows = Vec::new();
        for v0 in [0.01, 0.02, 0.04] {
            let spec = ss(v0);
            let sol = solve_zero_energy(&spec, 20.0, 1e-12).unwrap();
            let alpha = alpha_measure(&spec).unwrap();
            let rep = verify_f_bounds(&sol, alpha).unwrap();
            assert!(rep.c_low.is_finite() && rep.c_grad.is_finite() && rep.c_hess.is_finite());
            assert!(1.0 - sol.f0 <= rep.c_low * alpha + 1e-15);
            c_lows.push(rep.c_low);
        }
        let (lo, hi) = c_lows.iter().fold((f64::MAX, 0.0f64), |a, &c| (a.0.min(c), a.1.max(c)));
        assert!(hi / lo < 1.2);
    }

    #[test]
    fn coupling_switch() {
        let c1 = coupling_constant(&ss(2.0), 1.0).unwrap();
        assert!((c1 - 8.0 * PI * (1.0 - 1f64.tanh())).abs() < 1e-8);
        assert!((c1 - 5.991_792_385_777_945).abs() < 1e-7);
        let c05 = coupling_constant(&ss(2.0), 0.5).unwrap();
        assert!((c05 - 8.377_580_409_572_781).abs() < 1e-12);
        assert!(matches!(coupling_constant(&ss(2.0), 0.0), Err(ScatteringError::BetaOutOfRange(_))));
        let one_d = PotentialSpec::soft_sphere(1.0, 1.0, Dimension::One).unwrap();
        assert_eq!(coupling_constant(&one_d, 0.5).unwrap(), 2.0);
        assert!(coupling_constant(&one_d, 1.0).is_err());
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            solve_zero_energy(&ss(1.0), 0.5, 1e-8),
            Err(ScatteringError::InvalidDomain { .. })
        ));
        let one_d = PotentialSpec::soft_sphere(1.0, 1.0, Dimension::One).unwrap();
        assert!(matches!(
            solve_zero_energy(&one_d, 20.0, 1e-8),
            Err(ScatteringError::NotThreeDimensional)
        ));
    }

    #[test]
    fn csv_export() {
        let sol = solve_zero_energy(&ss(2.0), 3.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,u,f\n"));
        assert_eq!(text.lines().count(), sol.r_grid.len() + 1);
    }
}

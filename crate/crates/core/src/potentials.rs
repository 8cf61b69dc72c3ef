//! Model pair interactions, their smallness measure, bare coupling and the
//! `(N, β)`-scaled family `w(x) = N^{dβ-1} V(N^β x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{integrate, QuadratureError};

const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential height must be finite and non-negative, got {0}")]
    NegativeHeight(f64),
    #[error("potential radius must be finite and positive, got {0}")]
    BadRadius(f64),
    #[error("unsupported dimension {0} (expected 1 or 3)")]
    BadDimension(u8),
    #[error("particle number must be at least 1")]
    BadParticleNumber,
    #[error("scaling exponent β = {0} outside [0, 1]")]
    BadBeta(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `V₀` inside the ball of radius `R`, zero outside.
    SoftSphere,
    /// `V₀ exp(-1/(1-(r/R)²))` for `r < R`.
    SmoothBump,
    Zero,
}

/// Spatial dimension of the configuration space of one particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    One,
    Three,
}

impl Dimension {
    pub fn get(self) -> u8 {
        match self {
            Dimension::One => 1,
            Dimension::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = PotentialError;
    fn try_from(d: u8) -> Result<Self, Self::Error> {
        match d {
            1 => Ok(Dimension::One),
            3 => Ok(Dimension::Three),
            other => Err(PotentialError::BadDimension(other)),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.get()
    }
}

/// A repulsive, radially symmetric, compactly supported interaction profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub v0: f64,
    pub radius: f64,
    pub dimension: Dimension,
}

/// Anything that can be evaluated as a radial profile with compact support.
pub trait RadialPotential {
    fn value(&self, r: f64) -> f64;
    /// Radius beyond which the profile vanishes identically.
    fn support_radius(&self) -> f64;
    fn dimension(&self) -> Dimension;
    fn is_zero(&self) -> bool;
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, v0: f64, radius: f64, dimension: Dimension) -> Result<Self, PotentialError> {
        let spec = Self {
            kind,
            v0,
            radius,
            dimension,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(dimension: Dimension) -> Self {
        Self {
            kind: PotentialKind::Zero,
            v0: 0.0,
            radius: 1.0,
            dimension,
        }
    }

    pub fn soft_sphere(v0: f64, radius: f64, dimension: Dimension) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::SoftSphere, v0, radius, dimension)
    }

    pub fn smooth_bump(v0: f64, radius: f64, dimension: Dimension) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::SmoothBump, v0, radius, dimension)
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        if !(self.v0.is_finite() && self.v0 >= 0.0) {
            return Err(PotentialError::NegativeHeight(self.v0));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(PotentialError::BadRadius(self.radius));
        }
        Ok(())
    }

    /// Same profile with a different height.
    pub fn with_height(&self, v0: f64) -> Self {
        Self { v0, ..*self }
    }

    /// Integral of `g(r)` against the radial measure of the spec's dimension,
    /// restricted to the support.
    fn radial_integral<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64, PotentialError> {
        let r = self.radius;
        Ok(match self.dimension {
            Dimension::One => 2.0 * integrate(&g, 0.0, r, QUAD_TOL)?,
            Dimension::Three => 4.0 * PI * integrate(|s| g(s) * s * s, 0.0, r, QUAD_TOL)?,
        })
    }
}

impl RadialPotential for PotentialSpec {
    fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SoftSphere => {
                if r < self.radius {
                    self.v0
                } else {
                    0.0
                }
            }
            PotentialKind::SmoothBump => {
                let s = r / self.radius;
                if s < 1.0 {
                    self.v0 * (-1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    fn dimension(&self) -> Dimension {
        self.dimension
    }

    fn is_zero(&self) -> bool {
        self.kind == PotentialKind::Zero || self.v0 == 0.0
    }
}

/// Smallness measure `sup |x|² V(x) + ∫ V(x)/|x| dx`.
///
/// The measure is defined for the three-dimensional radial profile; a
/// one-dimensional spec is measured as the same profile in three dimensions
/// (the 1D integral of `V/|x|` diverges whenever `V(0) > 0`).
pub fn alpha_measure(spec: &PotentialSpec) -> Result<f64, PotentialError> {
    spec.validate()?;
    let (v0, r) = (spec.v0, spec.radius);
    Ok(match spec.kind {
        _ if spec.is_zero() => 0.0,
        PotentialKind::Zero => 0.0,
        PotentialKind::SoftSphere => v0 * r * r + 2.0 * PI * v0 * r * r,
        PotentialKind::SmoothBump => {
            // s² e^{-1/(1-s²)} peaks where s² + s - 1 = 0.
            let s_star = 0.5 * (5f64.sqrt() - 1.0);
            let sup = v0 * r * r * s_star * s_star * (-1.0 / (1.0 - s_star * s_star)).exp();
            let inv_r = 4.0 * PI * integrate(|s| spec.value(s) * s, 0.0, r, QUAD_TOL)?;
            sup + inv_r
        }
    })
}

/// Bare coupling `b₀ = ∫ V`.
pub fn b0_integral(spec: &PotentialSpec) -> Result<f64, PotentialError> {
    spec.validate()?;
    let (v0, r) = (spec.v0, spec.radius);
    match spec.kind {
        _ if spec.is_zero() => Ok(0.0),
        PotentialKind::Zero => Ok(0.0),
        PotentialKind::SoftSphere => Ok(match spec.dimension {
            Dimension::One => 2.0 * v0 * r,
            Dimension::Three => 4.0 / 3.0 * PI * r.powi(3) * v0,
        }),
        PotentialKind::SmoothBump => spec.radial_integral(|s| spec.value(s)),
    }
}

/// Pair interaction of the mean-field scaling family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledPair {
    #[serde(flatten)]
    pub base: PotentialSpec,
    pub n: u32,
    pub beta: f64,
}

impl ScaledPair {
    pub fn new(base: PotentialSpec, n: u32, beta: f64) -> Result<Self, PotentialError> {
        base.validate()?;
        if n < 1 {
            return Err(PotentialError::BadParticleNumber);
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(PotentialError::BadBeta(beta));
        }
        Ok(Self { base, n, beta })
    }

    /// The bare potential, viewed as the `N = 1` member of the family.
    pub fn unscaled(base: PotentialSpec) -> Self {
        Self { base, n: 1, beta: 1.0 }
    }

    /// `N^β`: the inverse length scale of the scaled profile.
    pub fn length_scale(&self) -> f64 {
        (self.n as f64).powf(self.beta)
    }

    /// `N^{dβ-1}`.
    pub fn prefactor(&self) -> f64 {
        let d = self.base.dimension.get() as f64;
        (self.n as f64).powf(d * self.beta - 1.0)
    }
}

/// `w(x) = N^{dβ-1} V(N^β x)` at distance `r = |x|`.
pub fn scaled_eval(pair: &ScaledPair, r: f64) -> f64 {
    pair.value(r)
}

impl RadialPotential for ScaledPair {
    fn value(&self, r: f64) -> f64 {
        if self.base.is_zero() {
            return 0.0;
        }
        self.prefactor() * self.base.value(self.length_scale() * r.abs())
    }

    fn support_radius(&self) -> f64 {
        self.base.radius / self.length_scale()
    }

    fn dimension(&self) -> Dimension {
        self.base.dimension
    }

    fn is_zero(&self) -> bool {
        self.base.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ss3(v0: f64) -> PotentialSpec {
        PotentialSpec::soft_sphere(v0, 1.0, Dimension::Three).unwrap()
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_measure(&PotentialSpec::zero(Dimension::Three)).unwrap(), 0.0);
        let a = alpha_measure(&ss3(2.0)).unwrap();
        assert!((a - 2.0 * (1.0 + 2.0 * PI)).abs() < 1e-12);
        assert!((a - 14.566_370_614_359_172).abs() < 1e-9);
        let a = alpha_measure(&ss3(0.02)).unwrap();
        assert!((a - 0.145_663_706_143_591_72).abs() < 1e-12);
    }

    #[test]
    fn smooth_bump_alpha_sup_matches_dense_scan() {
        let spec = PotentialSpec::smooth_bump(1.0, 1.3, Dimension::Three).unwrap();
        let scan = (1..200_000)
            .map(|i| {
                let r = 1.3 * i as f64 / 200_000.0;
                r * r * spec.value(r)
            })
            .fold(0.0, f64::max);
        let inv = 4.0 * PI * integrate(|s| spec.value(s) * s, 0.0, 1.3, 1e-12).unwrap();
        let a = alpha_measure(&spec).unwrap();
        assert!((a - inv - scan).abs() < 1e-9);
    }

    #[test]
    fn b0_examples() {
        assert_eq!(b0_integral(&PotentialSpec::zero(Dimension::Three)).unwrap(), 0.0);
        assert!((b0_integral(&ss3(2.0)).unwrap() - 8.377_580_409_572_781).abs() < 1e-12);
        let spec = PotentialSpec::smooth_bump(1.0, 1.0, Dimension::Three).unwrap();
        let coarse = b0_integral(&spec).unwrap();
        let fine = 4.0 * PI * integrate(|s| spec.value(s) * s * s, 0.0, 1.0, 1e-14).unwrap();
        assert!((coarse - fine).abs() <= 1e-8 * fine);
        let one_d = PotentialSpec::soft_sphere(3.0, 0.5, Dimension::One).unwrap();
        assert!((b0_integral(&one_d).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn linear_in_height() {
        for kind in [PotentialKind::SoftSphere, PotentialKind::SmoothBump] {
            for dim in [Dimension::One, Dimension::Three] {
                let s1 = PotentialSpec::new(kind, 0.7, 1.2, dim).unwrap();
                let s2 = s1.with_height(2.1);
                let (a1, a2) = (alpha_measure(&s1).unwrap(), alpha_measure(&s2).unwrap());
                let (b1, b2) = (b0_integral(&s1).unwrap(), b0_integral(&s2).unwrap());
                assert!((a2 - 3.0 * a1).abs() < 1e-9 * a2);
                assert!((b2 - 3.0 * b1).abs() < 1e-9 * b2);
            }
        }
    }

    #[test]
    fn scaled_eval_examples() {
        let base = ss3(2.0);
        for n in [1, 7, 40] {
            let p = ScaledPair::new(base, n, 0.0).unwrap();
            assert_eq!(scaled_eval(&p, 0.3), base.value(0.3) / n as f64);
        }
        let p = ScaledPair::new(base, 10, 1.0).unwrap();
        assert_eq!(scaled_eval(&p, 0.05), 200.0);
        let bump = PotentialSpec::smooth_bump(1.5, 1.0, Dimension::Three).unwrap();
        let p = ScaledPair::new(bump, 13, 1.0).unwrap();
        for i in 0..50 {
            let r = i as f64 * 0.0017;
            assert_eq!(scaled_eval(&p, r), 169.0 * bump.value(13.0 * r));
        }
    }

    #[test]
    fn scaled_support_and_positivity() {
        let bump = PotentialSpec::smooth_bump(1.0, 2.0, Dimension::One).unwrap();
        let p = ScaledPair::new(bump, 9, 0.5).unwrap();
        assert!((p.support_radius() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(scaled_eval(&p, 0.67), 0.0);
        assert!(scaled_eval(&p, 0.66) > 0.0);
    }

    #[test]
    fn scaled_integral_is_b0_over_n() {
        for dim in [Dimension::One, Dimension::Three] {
            let base = PotentialSpec::smooth_bump(1.3, 0.8, dim).unwrap();
            let b0 = b0_integral(&base).unwrap();
            for (n, beta) in [(1u32, 0.4), (5, 0.3), (20, 0.7), (50, 1.0)] {
                let p = ScaledPair::new(base, n, beta).unwrap();
                let rs = p.support_radius();
                let total = match dim {
                    Dimension::One => 2.0 * integrate(|r| p.value(r), 0.0, rs, 1e-12).unwrap(),
                    Dimension::Three => 4.0 * PI * integrate(|r| p.value(r) * r * r, 0.0, rs, 1e-12).unwrap(),
                };
                assert!((total - b0 / n as f64).abs() <= 1e-6 * b0 / n as f64, "{dim:?} n={n} β={beta}");
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(PotentialSpec::soft_sphere(-1.0, 1.0, Dimension::One).is_err());
        assert!(PotentialSpec::soft_sphere(1.0, 0.0, Dimension::One).is_err());
        assert!(ScaledPair::new(ss3(1.0), 0, 0.5).is_err());
        assert!(ScaledPair::new(ss3(1.0), 2, 1.5).is_err());
        assert!(Dimension::try_from(2).is_err());
    }

    #[test]
    fn config_record_roundtrip() {
        let p = ScaledPair::new(PotentialSpec::smooth_bump(0.5, 1.5, Dimension::One).unwrap(), 4, 0.5).unwrap();
        let json = serde_json::to_value(p).unwrap();
        for key in ["kind", "v0", "radius", "dimension", "n", "beta"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["kind"], "smooth_bump");
        let back: ScaledPair = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);
    }
}

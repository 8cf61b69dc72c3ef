use std::path::Path;

use gplab_core::potentials::{Dimension, PotentialKind, PotentialSpec};
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Scattering,
    GpEvolve,
    GpMinimize,
    MbConverge,
    BetaSweep,
    TrapRelease,
    HierarchyCheck,
    Graphs,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Scattering => "scattering",
            Self::GpEvolve => "gp_evolve",
            Self::GpMinimize => "gp_minimize",
            Self::MbConverge => "mb_converge",
            Self::BetaSweep => "beta_sweep",
            Self::TrapRelease => "trap_release",
            Self::HierarchyCheck => "hierarchy_check",
            Self::Graphs => "graphs",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial one-particle state on the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `exp(-x^2/2) (1 + i s x)` with `s = phase_slope`.
    Gaussian,
    /// `1 + 0.3 e^{i k x} + 0.2 e^{-i k x}`, `k = 2 pi / L`.
    LowMode,
    /// Seeded random combination of the modes `|n| <= 3`.
    Random,
}

/// Flat key-value experiment description. Missing keys take the canonical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub potential: PotentialKind,
    pub v0: f64,
    pub radius: f64,
    pub dimension: u8,
    pub modes: usize,
    pub length: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub beta: f64,
    pub betas: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
    /// Output times after `t = 0` for time series.
    pub samples: usize,
    /// Harmonic trap `V_ext = trap x^2`; zero disables it.
    pub trap: f64,
    pub initial: InitialState,
    pub phase_slope: f64,
    pub seed: u64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    /// Coupling multiplier of the control comparison.
    pub control_factor: f64,
    pub k_max: u32,
    pub m_max: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::MbConverge,
            potential: PotentialKind::SmoothBump,
            v0: 10.0,
            radius: 2.0,
            dimension: 1,
            modes: 24,
            length: 6.0,
            n_min: 2,
            n_max: 6,
            beta: 0.5,
            betas: vec![0.1, 0.3, 0.5, 0.8],
            t_final: 0.5,
            dt: 1e-3,
            samples: 4,
            trap: 0.0,
            initial: InitialState::Gaussian,
            phase_slope: 0.4,
            seed: 0,
            krylov_dim: 40,
            krylov_tol: 1e-10,
            control_factor: 2.0,
            k_max: 3,
            m_max: 4,
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn canonical(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            ..Self::default()
        };
        match kind {
            ExperimentKind::Scattering => Self {
                potential: PotentialKind::SoftSphere,
                v0: 2.0,
                radius: 1.0,
                dimension: 3,
                ..base
            },
            ExperimentKind::GpEvolve => Self {
                modes: 256,
                length: 12.0,
                t_final: 1.0,
                samples: 10,
                ..base
            },
            ExperimentKind::GpMinimize => Self {
                potential: PotentialKind::Zero,
                modes: 128,
                length: 16.0,
                trap: 1.0,
                ..base
            },
            ExperimentKind::MbConverge | ExperimentKind::Graphs => base,
            ExperimentKind::BetaSweep => Self {
                radius: 2.5,
                n_min: 3,
                ..base
            },
            ExperimentKind::TrapRelease => Self {
                trap: 1.0,
                t_final: 0.25,
                ..base
            },
            ExperimentKind::HierarchyCheck => Self {
                n_min: 4,
                n_max: 4,
                initial: InitialState::LowMode,
                ..base
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn dimension(&self) -> Result<Dimension, LabError> {
        Dimension::try_from(self.dimension).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, LabError> {
        let dim = self.dimension()?;
        if self.potential == PotentialKind::Zero {
            return Ok(PotentialSpec::zero(dim));
        }
        PotentialSpec::new(self.potential, self.v0, self.radius, dim).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let fail = |msg: String| Err(LabError::Config(msg));
        self.potential_spec()?;
        if self.modes < 8 || !(self.length > 0.0) {
            return fail(format!("grid needs modes >= 8 and length > 0, got {} and {}", self.modes, self.length));
        }
        if !(self.dt > 0.0 && self.t_final >= 0.0) {
            return fail(format!("dt = {} and t_final = {} must be positive", self.dt, self.t_final));
        }
        if self.samples == 0 || self.krylov_dim < 2 {
            return fail("samples and krylov_dim must be positive".into());
        }
        let manybody = matches!(
            self.kind,
            ExperimentKind::MbConverge | ExperimentKind::BetaSweep | ExperimentKind::TrapRelease | ExperimentKind::HierarchyCheck
        );
        if manybody {
            if self.dimension != 1 {
                return fail("many-body experiments are one-dimensional".into());
            }
            if self.n_min < 1 || self.n_min > self.n_max || self.n_max > 6 {
                return fail(format!("particle range {}..={} outside 1..=6", self.n_min, self.n_max));
            }
            if matches!(self.kind, ExperimentKind::MbConverge | ExperimentKind::BetaSweep) && self.n_min < 2 {
                return fail("convergence runs need at least two particles".into());
            }
        }
        if self.kind == ExperimentKind::Scattering && self.dimension != 3 {
            return fail("scattering runs are three-dimensional".into());
        }
        if self.kind == ExperimentKind::BetaSweep && self.betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return fail(format!("betas {:?} outside (0, 1]", self.betas));
        }
        if self.kind == ExperimentKind::Graphs && (self.k_max < 1 || self.k_max + self.m_max > 8) {
            return fail(format!("graph range k <= {}, m <= {} too large", self.k_max, self.m_max));
        }
        if !(0.0..=1.0).contains(&self.beta) || self.beta == 0.0 {
            return fail(format!("beta = {} outside (0, 1]", self.beta));
        }
        Ok(())
    }
}

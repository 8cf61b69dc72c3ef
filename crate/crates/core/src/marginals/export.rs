use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{MarginalDensity, MarginalError, PairCorrelation};

/// Headline diagnostics of a marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub lambda_max: f64,
    pub trace_distance: f64,
    pub hk_norm: f64,
}

/// One `row,col,re,im` line per matrix entry (kernel normalization).
pub fn write_matrix_csv<W: Write>(gamma: &MarginalDensity, mut out: W) -> Result<(), MarginalError> {
    writeln!(out, "row,col,re,im")?;
    let n = gamma.matrix.nrows();
    for i in 0..n {
        for j in 0..n {
            let v = gamma.kernel(i, j);
            writeln!(out, "{i},{j},{:.17e},{:.17e}", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Eigenvalues in descending order.
pub fn write_spectrum_csv<W: Write>(gamma: &MarginalDensity, mut out: W) -> Result<(), MarginalError> {
    writeln!(out, "index,eigenvalue")?;
    for (i, e) in gamma.eigenvalues().iter().enumerate() {
        writeln!(out, "{i},{e:.17e}")?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(profile: &PairCorrelation, mut out: W) -> Result<(), MarginalError> {
    match &profile.quotient {
        Some(q) => {
            writeln!(out, "r,g2,g2_over_f2")?;
            for ((r, g), q) in profile.r.iter().zip(&profile.g2).zip(q) {
                writeln!(out, "{r:.17e},{g:.17e},{q:.17e}")?;
            }
        }
        None => {
            writeln!(out, "r,g2")?;
            for (r, g) in profile.r.iter().zip(&profile.g2) {
                writeln!(out, "{r:.17e},{g:.17e}")?;
            }
        }
    }
    Ok(())
}

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FockBasis, FockError, FockState};

const MAGIC: &[u8; 4] = b"FCK1";

/// Little endian: `FCK1`, `M: u32`, `N: u32`, `h: f64`, `dim: u64`, then `(re, im)` pairs.
pub fn write_state<W: Write>(psi: &FockState, mut out: W) -> Result<(), FockError> {
    out.write_all(MAGIC)?;
    out.write_all(&(psi.basis.modes() as u32).to_le_bytes())?;
    out.write_all(&(psi.basis.particles() as u32).to_le_bytes())?;
    out.write_all(&psi.spacing.to_le_bytes())?;
    out.write_all(&(psi.amplitudes.len() as u64).to_le_bytes())?;
    for a in &psi.amplitudes {
        out.write_all(&a.re.to_le_bytes())?;
        out.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state<R: Read>(mut input: R) -> Result<FockState, FockError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FockError::Format("bad magic".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let m = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut long = [0u8; 8];
    input.read_exact(&mut long)?;
    let spacing = f64::from_le_bytes(long);
    input.read_exact(&mut long)?;
    let dim = u64::from_le_bytes(long) as usize;
    let basis = Arc::new(FockBasis::new(m, n)?);
    if basis.len() != dim {
        return Err(FockError::Format(format!("header dimension {dim}, basis has {}", basis.len())));
    }
    let mut amplitudes = Vec::with_capacity(dim);
    let mut buf = [0u8; 16];
    for _ in 0..dim {
        input.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        amplitudes.push(Complex64::new(re, im));
    }
    Ok(FockState {
        basis,
        spacing,
        amplitudes,
    })
}

/// Norm and energy moments sampled along a many-body run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub times: Vec<f64>,
    pub norm: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub second_moment: Vec<f64>,
}

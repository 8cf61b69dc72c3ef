//! Field checkpoints (binary and CSV) and JSON evolution summaries.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Dispersion, Field, GpError, Grid};
use crate::potentials::Dimension;

const MAGIC: &[u8; 4] = b"GPF1";

/// Binary layout (little endian): `GPF1`, dimension `u8`, dispersion `u8`,
/// `M: u32`, `L: f64`, then `M^d` interleaved `(re, im)` pairs of `f64`.
pub fn write_binary<W: Write>(phi: &Field, mut out: W) -> Result<(), GpError> {
    out.write_all(MAGIC)?;
    out.write_all(&[phi.grid.dimension.get(), dispersion_tag(phi.grid.dispersion)])?;
    out.write_all(&(phi.grid.m as u32).to_le_bytes())?;
    out.write_all(&phi.grid.l.to_le_bytes())?;
    for v in &phi.values {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Field, GpError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GpError::Format("bad magic".into()));
    }
    let mut tags = [0u8; 2];
    input.read_exact(&mut tags)?;
    let dimension = Dimension::try_from(tags[0]).map_err(|e| GpError::Format(e.to_string()))?;
    let dispersion = dispersion_from_tag(tags[1])?;
    let mut m = [0u8; 4];
    input.read_exact(&mut m)?;
    let mut l = [0u8; 8];
    input.read_exact(&mut l)?;
    let grid = Grid {
        dimension,
        m: u32::from_le_bytes(m) as usize,
        l: f64::from_le_bytes(l),
        dispersion,
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 16];
    for _ in 0..grid.len() {
        input.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        values.push(Complex64::new(re, im));
    }
    Ok(Field { grid, values })
}

fn dispersion_tag(d: Dispersion) -> u8 {
    match d {
        Dispersion::Spectral => 0,
        Dispersion::Lattice => 1,
    }
}

fn dispersion_from_tag(t: u8) -> Result<Dispersion, GpError> {
    match t {
        0 => Ok(Dispersion::Spectral),
        1 => Ok(Dispersion::Lattice),
        other => Err(GpError::Format(format!("unknown dispersion tag {other}"))),
    }
}

/// CSV checkpoint: a `# dimension=.. m=.. l=.. dispersion=..` line, a header, then `index,re,im` rows.
pub fn write_csv<W: Write>(phi: &Field, mut out: W) -> Result<(), GpError> {
    let disp = match phi.grid.dispersion {
        Dispersion::Spectral => "spectral",
        Dispersion::Lattice => "lattice",
    };
    writeln!(
        out,
        "# dimension={} m={} l={:e} dispersion={disp}",
        phi.grid.dimension.get(),
        phi.grid.m,
        phi.grid.l
    )?;
    writeln!(out, "index,re,im")?;
    for (i, v) in phi.values.iter().enumerate() {
        writeln!(out, "{i},{:.17e},{:.17e}", v.re, v.im)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Field, GpError> {
    let mut lines = input.lines();
    let meta = lines.next().ok_or_else(|| GpError::Format("empty file".into()))??;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| GpError::Format("missing metadata line".into()))?;
    let (mut dim, mut m, mut l, mut disp) = (None, None, None, Dispersion::Spectral);
    for kv in meta.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| GpError::Format(format!("bad metadata entry {kv}")))?;
        let bad = |_| GpError::Format(format!("bad value in {kv}"));
        match k {
            "dimension" => dim = Some(v.parse::<u8>().map_err(|e| bad(e.to_string()))?),
            "m" => m = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "l" => l = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "dispersion" => {
                disp = match v {
                    "spectral" => Dispersion::Spectral,
                    "lattice" => Dispersion::Lattice,
                    _ => return Err(GpError::Format(format!("unknown dispersion {v}"))),
                }
            }
            _ => {}
        }
    }
    let missing = |what: &str| GpError::Format(format!("metadata lacks {what}"));
    let dimension =
        Dimension::try_from(dim.ok_or_else(|| missing("dimension"))?).map_err(|e| GpError::Format(e.to_string()))?;
    let grid = Grid {
        dimension,
        m: m.ok_or_else(|| missing("m"))?,
        l: l.ok_or_else(|| missing("l"))?,
        dispersion: disp,
    };
    lines.next().ok_or_else(|| missing("header"))??;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        let mut parts = line.split(',').skip(1);
        let mut next = || -> Result<f64, GpError> {
            parts
                .next()
                .ok_or_else(|| GpError::Format(format!("short row: {line}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| GpError::Format(e.to_string()))
        };
        let re = next()?;
        let im = next()?;
        values.push(Complex64::new(re, im));
    }
    if values.len() != grid.len() {
        return Err(GpError::Format(format!("expected {} rows, found {}", grid.len(), values.len())));
    }
    Ok(Field { grid, values })
}

/// Time series of an evolution run, serialized as JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoints_roundtrip(vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 8), l in 0.1f64..100.0) {
            let grid = Grid::one_d(8, l).with_dispersion(Dispersion::Lattice);
            let phi = Field { grid, values: vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect() };
            let mut bin = Vec::new();
            write_binary(&phi, &mut bin).unwrap();
            prop_assert_eq!(&read_binary(bin.as_slice()).unwrap(), &phi);
            let mut csv = Vec::new();
            write_csv(&phi, &mut csv).unwrap();
            prop_assert_eq!(&read_csv(csv.as_slice()).unwrap(), &phi);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_binary(&b"NOPE"[..]).is_err());
        assert!(read_csv(&b"index,re,im\n"[..]).is_err());
    }
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DenseHamiltonian, DenseNBody, FockError, LatticeSpec};
use crate::krylov::{self, LinearOperator};
use crate::potentials::ScaledPair;
use crate::scattering::CorrelationFunction;

/// Both sides of the energy inequality; `ratio` is `None` when `rhs` vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
}

/// `lhs = <H^2>`, `rhs = N^2 max_{i != j} |D_i D_j (psi / f(x_i - x_j))|^2` with
/// centred differences `D`. `f = None` means `f = 1`.
pub fn energy_ratio_probe(
    psi: &DenseNBody,
    lat: &LatticeSpec,
    pair: &ScaledPair,
    f: Option<&CorrelationFunction>,
) -> Result<ProbeResult, FockError> {
    if !(2..=3).contains(&psi.n) {
        return Err(FockError::Config(format!("probe needs N in {{2, 3}}, got {}", psi.n)));
    }
    if psi.m != lat.m {
        return Err(FockError::LatticeMismatch("probe state and lattice differ".into()));
    }
    let (m, n, h) = (psi.m, psi.n, lat.spacing());
    let ham = DenseHamiltonian::new(lat, n, pair)?;
    let mut hpsi = vec![Complex64::default(); ham.dim()];
    ham.apply(&psi.values, &mut hpsi);
    let lhs = krylov::norm(&hpsi).powi(2);

    let f_table: Vec<f64> = (0..m)
        .map(|d| match f {
            Some(f) => f.eval(d.min(m - d) as f64 * h),
            None => 1.0,
        })
        .collect();
    let min = f_table.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if min < 1e-12 {
        return Err(FockError::DegenerateQuotient { min });
    }

    let stride = |i: usize| m.pow((n - 1 - i) as u32);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let q: Vec<Complex64> = psi
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let c = psi.coords(k);
                    v / f_table[(c[i] + m - c[j]) % m]
                })
                .collect();
            let di = centred(&q, m, stride(i), h);
            let dij = centred(&di, m, stride(j), h);
            worst = worst.max(krylov::norm(&dij).powi(2));
        }
    }
    let rhs = (n * n) as f64 * worst;
    Ok(ProbeResult {
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
    })
}

fn centred(data: &[Complex64], m: usize, stride: usize, h: f64) -> Vec<Complex64> {
    (0..data.len())
        .map(|k| {
            let c = (k / stride) % m;
            let up = if c + 1 == m { k + stride - m * stride } else { k + stride };
            let down = if c == 0 { k + (m - 1) * stride } else { k - stride };
            (data[up] - data[down]) / (2.0 * h)
        })
        .collect()
}

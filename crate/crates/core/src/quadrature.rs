//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach relative tolerance {tol:e} (estimate {estimate:e}) within {max_intervals} intervals")]
    NotConverged {
        tol: f64,
        estimate: f64,
        max_intervals: usize,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Kronrod panel; returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite(center));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let (xl, xr) = (center - dx, center + dx);
        let (fl, fr) = (f(xl), f(xr));
        if !fl.is_finite() {
            return Err(QuadratureError::NonFinite(xl));
        }
        if !fr.is_finite() {
            return Err(QuadratureError::NonFinite(xr));
        }
        kronrod += WGK[j] * (fl + fr);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (fl + fr);
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Integrates `f` over `[a, b]` by global bisection of the worst panel until
/// the summed error estimate is below `rel_tol * |I|` (or an absolute floor
/// of `rel_tol * 1e-300` for vanishing integrals).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(0.0);
    }
    let (first, err) = gk15(&f, a, b)?;
    let mut panels = vec![(a, b, first, err)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= rel_tol * total.abs() || total_err < 1e-300 {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(QuadratureError::NotConverged {
                tol: rel_tol,
                estimate: total_err / total.abs().max(1e-300),
                max_intervals: MAX_INTERVALS,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (i1, e1) = gk15(&f, lo, mid)?;
        let (i2, e2) = gk15(&f, mid, hi)?;
        panels.push((lo, mid, i1, e1));
        panels.push((mid, hi, i2, e2));
    }
}

/// Composite Simpson rule on uniformly spaced samples (odd sample count).
/// With an even sample count the final interval is handled by the
/// 3/8 rule on the last four points.
pub fn simpson_uniform(samples: &[f64], step: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * step * (samples[0] + samples[1]),
        3 => step / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ if n % 2 == 1 => {
            let mut acc = samples[0] + samples[n - 1];
            for (i, &s) in samples.iter().enumerate().take(n - 1).skip(1) {
                acc += if i % 2 == 1 { 4.0 * s } else { 2.0 * s };
            }
            acc * step / 3.0
        }
        _ => {
            let head = simpson_uniform(&samples[..n - 3], step);
            let t = &samples[n - 4..];
            head + 3.0 * step / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3])
        }
    }
}

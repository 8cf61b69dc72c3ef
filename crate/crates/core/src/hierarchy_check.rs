//! Residual checks of the reduced-density hierarchies.
//!
//! All one-particle objects are `M x M` matrices in the orthonormal lattice
//! basis (see [`crate::marginals`]); the lattice delta is `Kronecker / h`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock_lattice::{pair_table, FockError, FockHamiltonian, FockState, LatticeSpec};
use crate::gp_field::{Field, FftOps};
use crate::krylov::{self, KrylovOptions, KrylovReport};
use crate::marginals::{reduce, MarginalDensity, MarginalError};
use crate::potentials::ScaledPair;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },
    #[error("snapshots are not uniformly spaced in time")]
    NonUniform,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("order {0} is not supported")]
    Order(usize),
    #[error("{quantity} overflows 128-bit arithmetic")]
    Overflow { quantity: &'static str },
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// One- and two-particle marginals sampled at uniform times.
#[derive(Debug, Clone)]
pub struct MarginalTrajectory {
    pub times: Vec<f64>,
    pub gamma1: Vec<MarginalDensity>,
    /// Absent for single-particle runs.
    pub gamma2: Option<Vec<MarginalDensity>>,
    pub particles: usize,
    pub pair: ScaledPair,
    pub lattice: LatticeSpec,
}

impl MarginalTrajectory {
    pub fn new(
        times: Vec<f64>,
        gamma1: Vec<MarginalDensity>,
        gamma2: Option<Vec<MarginalDensity>>,
        particles: usize,
        pair: ScaledPair,
        lattice: LatticeSpec,
    ) -> Result<Self, HierarchyError> {
        if times.len() != gamma1.len() || gamma2.as_ref().is_some_and(|g| g.len() != times.len()) {
            return Err(HierarchyError::GridMismatch("snapshot counts differ".into()));
        }
        if times.len() >= 2 {
            let dt = times[1] - times[0];
            if dt <= 0.0 || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
                return Err(HierarchyError::NonUniform);
            }
        }
        Ok(Self {
            times,
            gamma1,
            gamma2,
            particles,
            pair,
            lattice,
        })
    }

    /// Evolves `psi` and reduces after every `dt`, starting at `t = 0`.
    pub fn record(
        psi: &FockState,
        h: &FockHamiltonian,
        dt: f64,
        snapshots: usize,
        opts: &KrylovOptions,
    ) -> Result<(Self, KrylovReport), HierarchyError> {
        h.check_state(psi)?;
        let n = psi.particles();
        let mut report = KrylovReport::default();
        let mut amps = psi.amplitudes.clone();
        let (mut g1, mut g2) = (Vec::new(), Vec::new());
        for s in 0..snapshots {
            if s > 0 {
                let (next, r) = krylov::expm_apply(h, &amps, dt, opts).map_err(FockError::from)?;
                report.merge(&r);
                amps = next;
            }
            let state = FockState {
                amplitudes: amps.clone(),
                ..psi.clone()
            };
            g1.push(reduce(&state, 1)?);
            if n >= 2 {
                g2.push(reduce(&state, 2)?);
            }
        }
        let times = (0..snapshots).map(|s| s as f64 * dt).collect();
        let traj = Self::new(
            times,
            g1,
            (n >= 2).then_some(g2),
            n,
            h.pair,
            h.lattice.clone(),
        )?;
        Ok((traj, report))
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Normalized residuals at interior times, with the truncation-error model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbgkyResidual {
    pub times: Vec<f64>,
    pub residual: Vec<f64>,
    /// `dt^2/6 |d^3 gamma / dt^3|` on the same normalization.
    pub error_model: Vec<f64>,
    pub scale: Vec<f64>,
}

impl BbgkyResidual {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_model(&self) -> f64 {
        self.error_model.iter().copied().fold(0.0, f64::max)
    }
}

/// `-Delta_h + V_ext` on the lattice.
fn one_body_matrix(lat: &LatticeSpec) -> DMatrix<Complex64> {
    let m = lat.m;
    let hop = 1.0 / lat.spacing().powi(2);
    let trap = lat.v_ext.clone().unwrap_or_else(|| vec![0.0; m]);
    DMatrix::from_fn(m, m, |i, j| {
        let d = (i + m - j) % m;
        let v = if d == 0 {
            2.0 * hop + trap[i]
        } else if d == 1 || d == m - 1 {
            -hop
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    })
}

fn frobenius(a: &DMatrix<Complex64>) -> f64 {
    a.norm()
}

/// `| i d_t gamma1 - [-Delta + V_ext, gamma1] - (N-1) Tr_2 [w(x1 - x2) - w(x1' - x2)] gamma2 |`
/// at every interior snapshot, normalized by `max(term norms, |gamma1|)`.
pub fn bbgky_residual_k1(traj: &MarginalTrajectory) -> Result<BbgkyResidual, HierarchyError> {
    let count = traj.times.len();
    if count < 3 {
        return Err(HierarchyError::TooFewSnapshots { needed: 3, got: count });
    }
    let dt = traj.dt();
    let m = traj.lattice.m;
    let k_mat = one_body_matrix(&traj.lattice);
    let w = pair_table(&traj.lattice, &traj.pair);
    let coupling = traj.particles.saturating_sub(1) as f64;
    let g = |s: usize| &traj.gamma1[s].matrix;
    let mut out = BbgkyResidual {
        times: Vec::new(),
        residual: Vec::new(),
        error_model: Vec::new(),
        scale: Vec::new(),
    };
    for s in 1..count - 1 {
        let dgdt = (g(s + 1) - g(s - 1)) * Complex64::new(0.0, 1.0 / (2.0 * dt));
        let comm = &k_mat * g(s) - g(s) * &k_mat;
        let inter = match &traj.gamma2 {
            Some(g2) if coupling > 0.0 => {
                let g2 = &g2[s].matrix;
                DMatrix::from_fn(m, m, |x, y| {
                    let sum: Complex64 = (0..m)
                        .map(|z| g2[(x * m + z, y * m + z)] * (w[(x + m - z) % m] - w[(y + m - z) % m]))
                        .sum();
                    sum * coupling
                })
            }
            _ => DMatrix::zeros(m, m),
        };
        let res = &dgdt - &comm - &inter;
        let scale = frobenius(&dgdt)
            .max(frobenius(&comm))
            .max(frobenius(&inter))
            .max(frobenius(g(s)));
        // Third derivative from the widest centred stencil available.
        let third = if s >= 2 && s + 2 < count {
            (g(s + 2) - g(s + 1) * Complex64::new(2.0, 0.0) + g(s - 1) * Complex64::new(2.0, 0.0) - g(s - 2))
                / Complex64::new(2.0 * dt.powi(3), 0.0)
        } else {
            let c = if s + 2 < count { s + 1 } else { s - 1 };
            let c = c.clamp(2, count.saturating_sub(3).max(2));
            if c >= 2 && c + 2 < count {
                (g(c + 2) - g(c + 1) * Complex64::new(2.0, 0.0) + g(c - 1) * Complex64::new(2.0, 0.0) - g(c - 2))
                    / Complex64::new(2.0 * dt.powi(3), 0.0)
            } else {
                DMatrix::zeros(m, m)
            }
        };
        out.times.push(traj.times[s]);
        out.residual.push(frobenius(&res) / scale);
        out.error_model.push(dt * dt / 6.0 * frobenius(&third) / scale);
        out.scale.push(scale);
    }
    Ok(out)
}

/// Observed order `log2(coarse / fine)` for a halved step.
pub fn refinement_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// `(B^(1) gamma2)(x; x') = i sigma [gamma2(x, x; x', x) - gamma2(x, x'; x', x')]` as an
/// `M x M` matrix (kernel times `h`). The result is an operator, not a density.
pub fn collision_apply(gamma2: &MarginalDensity, sigma: f64) -> Result<MarginalDensity, HierarchyError> {
    if gamma2.order != 2 {
        return Err(HierarchyError::Order(gamma2.order));
    }
    let m = gamma2.m;
    let g = &gamma2.matrix;
    let factor = Complex64::new(0.0, sigma / gamma2.spacing);
    let out = DMatrix::from_fn(m, m, |x, y| (g[(x * m + x, y * m + x)] - g[(x * m + y, y * m + y)]) * factor);
    Ok(MarginalDensity::new(1, m, gamma2.spacing, out)?)
}

/// `U = exp(-i t (-Delta))` with spectral wavenumbers.
fn free_unitary(m: usize, l: f64, t: f64) -> DMatrix<Complex64> {
    let inv = 1.0 / m as f64;
    let tau = 2.0 * std::f64::consts::PI;
    DMatrix::from_fn(m, m, |x, y| {
        (0..m)
            .map(|n| {
                let signed = if n <= m / 2 { n as f64 } else { n as f64 - m as f64 };
                let k = tau * signed / l;
                let phase = tau * n as f64 * (x as f64 - y as f64) * inv - t * k * k;
                Complex64::from_polar(inv, phase)
            })
            .sum()
    })
}

/// `gamma -> U gamma U^*` with `U` the free propagator on every coordinate.
pub fn free_propagate(gamma: &MarginalDensity, t: f64) -> Result<MarginalDensity, HierarchyError> {
    let u1 = free_unitary(gamma.m, gamma.length(), t);
    let u = match gamma.order {
        1 => u1,
        2 => u1.kronecker(&u1),
        k => return Err(HierarchyError::Order(k)),
    };
    Ok(MarginalDensity {
        matrix: &u * &gamma.matrix * u.adjoint(),
        ..gamma.clone()
    })
}

/// Residual of `|phi_t><phi_t|^{(x) k}` in the infinite hierarchy with contact coupling `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizedResidual {
    /// Largest absolute residual norm over interior times.
    pub absolute: f64,
    /// Largest of the term norms and `|gamma|` at the same time.
    pub scale: f64,
    pub normalized: f64,
    /// Norm of `sum_j [|phi(x_j)|^2, gamma]`: the residual added per unit coupling error.
    pub interaction_scale: f64,
}

/// Evaluates `i d_t gamma - sum_j [-Delta_j, gamma] - sigma sum_j [|phi(x_j)|^2, gamma]`
/// entrywise for `gamma = |phi><phi|^{(x) k}`, `k in {1, 2}`, using the fields'
/// own dispersion and centred differences over uniformly spaced snapshots
/// (fourth order from five snapshots on).
pub fn factorized_hierarchy_residual(
    fields: &[Field],
    dt: f64,
    sigma: f64,
    k: usize,
) -> Result<FactorizedResidual, HierarchyError> {
    if !(1..=2).contains(&k) {
        return Err(HierarchyError::Order(k));
    }
    if fields.len() < 3 {
        return Err(HierarchyError::TooFewSnapshots {
            needed: 3,
            got: fields.len(),
        });
    }
    let grid = fields[0].grid;
    if grid.dimension.get() != 1 || fields.iter().any(|f| f.grid != grid) {
        return Err(HierarchyError::GridMismatch("trajectory needs one common 1D grid".into()));
    }
    let ops = FftOps::new(grid);
    let m = grid.m;
    let weight = grid.spacing().powi(2 * k as i32);
    let size = m.pow(k as u32);
    let split = |i: usize| -> [usize; 2] {
        if k == 1 {
            [i, 0]
        } else {
            [i / m, i % m]
        }
    };
    let mut worst = FactorizedResidual {
        absolute: 0.0,
        scale: 0.0,
        normalized: 0.0,
        interaction_scale: 0.0,
    };
    // Five-point centred stencil where the trajectory is long enough, else three-point.
    let stencil: &[(isize, f64)] = if fields.len() >= 5 {
        &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)]
    } else {
        &[(-1, -0.5), (1, 0.5)]
    };
    let reach = stencil[stencil.len() - 1].0 as usize;
    for s in reach..fields.len() - reach {
        let cur = &fields[s].values;
        let around: Vec<(&[Complex64], f64)> = stencil
            .iter()
            .map(|&(o, w)| (fields[(s as isize + o) as usize].values.as_slice(), w / dt))
            .collect();
        let kphi = ops.kinetic(cur);
        let rho: Vec<f64> = cur.iter().map(|p| p.norm_sqr()).collect();
        let prod = |v: &[Complex64], idx: [usize; 2]| -> Complex64 {
            (0..k).map(|j| v[idx[j]]).product()
        };
        let (mut r2, mut t1, mut t2, mut t3, mut g2, mut i2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for a in 0..size {
            let xa = split(a);
            let ca = prod(cur, xa);
            let left: Vec<Complex64> = around.iter().map(|(v, w)| prod(v, xa) * *w).collect();
            for b in 0..size {
                let yb = split(b);
                let gamma = ca * prod(cur, yb).conj();
                let d = around
                    .iter()
                    .zip(&left)
                    .map(|((v, _), l)| l * prod(v, yb).conj())
                    .sum::<Complex64>()
                    * Complex64::new(0.0, 1.0);
                let mut kin = Complex64::default();
                let mut contact = 0.0;
                for j in 0..k {
                    let mut left = kphi[xa[j]];
                    let mut right = kphi[yb[j]].conj();
                    for i in 0..k {
                        if i != j {
                            left *= cur[xa[i]];
                            right *= cur[yb[i]].conj();
                        }
                    }
                    kin += left * prod(cur, yb).conj() - ca * right;
                    contact += rho[xa[j]] - rho[yb[j]];
                }
                let inter = gamma * contact;
                let res = d - kin - inter * sigma;
                r2 += res.norm_sqr();
                t1 += d.norm_sqr();
                t2 += kin.norm_sqr();
                t3 += (inter * sigma).norm_sqr();
                g2 += gamma.norm_sqr();
                i2 += inter.norm_sqr();
            }
        }
        let absolute = (r2 * weight).sqrt();
        let scale = (t1.max(t2).max(t3).max(g2) * weight).sqrt();
        if absolute / scale >= worst.normalized {
            worst = FactorizedResidual {
                absolute,
                scale,
                normalized: absolute / scale,
                interaction_scale: (i2 * weight).sqrt(),
            };
        }
    }
    Ok(worst)
}

/// Term counts of the expansion: `(m+k)!/k!` summands, `(n+k)!/k!` error-term summands,
/// and the graph bound `2^{4m+k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuhamelCounts {
    pub xi_summands: u128,
    pub eta_summands: u128,
    pub graph_bound: u128,
}

fn falling(top: u32, k: u32) -> Option<u128> {
    // (top)! / k! for top >= k
    (k + 1..=top).try_fold(1u128, |acc, v| acc.checked_mul(u128::from(v)))
}

pub fn duhamel_counts(k: u32, m: u32, n: u32) -> Result<DuhamelCounts, HierarchyError> {
    let xi = m
        .checked_add(k)
        .and_then(|top| falling(top, k))
        .ok_or(HierarchyError::Overflow { quantity: "(m+k)!/k!" })?;
    let eta = n
        .checked_add(k)
        .and_then(|top| falling(top, k))
        .ok_or(HierarchyError::Overflow { quantity: "(n+k)!/k!" })?;
    let exp = m
        .checked_mul(4)
        .and_then(|v| v.checked_add(k))
        .filter(|&e| e < 128)
        .ok_or(HierarchyError::Overflow { quantity: "2^(4m+k)" })?;
    Ok(DuhamelCounts {
        xi_summands: xi,
        eta_summands: eta,
        graph_bound: 1u128 << exp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_field::{evolve_nls_trajectory, EvolutionParams, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn smooth(grid: Grid) -> Field {
        Field::from_fn(grid, |x| {
            Complex64::new(1.0 + 0.3 * x[0].cos(), 0.2 * (2.0 * x[0]).sin()) + Complex64::new(0.0, 0.1)
        })
        .normalized()
        .unwrap()
    }

    fn nls_snapshots(phi: &Field, sigma: f64, dt: f64, count: usize) -> Vec<Field> {
        let sub = 10;
        let p = EvolutionParams::cubic(sigma, dt / sub as f64, sub * (count - 1));
        evolve_nls_trajectory(phi, &p, sub).unwrap()
    }

    #[test]
    fn duhamel_examples() {
        assert_eq!(duhamel_counts(1, 0, 0).unwrap().xi_summands, 1);
        assert_eq!(duhamel_counts(1, 2, 0).unwrap().xi_summands, 6);
        let c = duhamel_counts(2, 3, 1).unwrap();
        assert_eq!((c.xi_summands, c.graph_bound, c.eta_summands), (60, 16384, 3));
        assert!(matches!(duhamel_counts(1, 40, 0), Err(HierarchyError::Overflow { .. })));
    }

    #[test]
    fn collision_of_factorized_state() {
        let g = Grid::one_d(16, 2.0 * PI);
        let phi = smooth(g);
        let g1 = MarginalDensity::pure(&phi).unwrap();
        let g2 = g1.tensor(&g1).unwrap();
        let sigma = 1.7;
        let b = collision_apply(&g2, sigma).unwrap();
        let h = g.spacing();
        for x in 0..16 {
            for y in 0..16 {
                let want = Complex64::new(0.0, sigma)
                    * (phi.values[x].norm_sqr() - phi.values[y].norm_sqr())
                    * phi.values[x]
                    * phi.values[y].conj();
                assert!((b.kernel(x, y) - want).norm() < 1e-10 * want.norm().max(1.0));
            }
        }
        assert!(b.trace().norm() < 1e-12);
        assert!((&b.matrix - b.matrix.adjoint()).norm() < 1e-12);
        let c = MarginalDensity::pure(&Field::constant(g, Complex64::new(1.0, 0.0))).unwrap();
        let bc = collision_apply(&c.tensor(&c).unwrap(), sigma).unwrap();
        assert!(bc.matrix.norm() < 1e-14);
        assert!(h > 0.0);
    }

    #[test]
    fn free_propagation_properties() {
        let g = Grid::one_d(12, 2.0 * PI);
        let pw = MarginalDensity::pure(&Field::plane_wave(g, [2, 0, 0])).unwrap();
        let moved = free_propagate(&pw, 0.7).unwrap();
        assert!((&moved.matrix - &pw.matrix).norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::<Complex64>::from_fn(12, 12, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        let gamma = MarginalDensity::new(1, 12, g.spacing(), rho / tr).unwrap();
        let same = free_propagate(&gamma, 0.0).unwrap();
        assert!((&same.matrix - &gamma.matrix).norm() < 1e-13);
        let moved = free_propagate(&gamma, 0.31).unwrap();
        for (a, b) in moved.eigenvalues().iter().zip(gamma.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
        let h1 = crate::marginals::hk_norm(&gamma).unwrap();
        assert!((crate::marginals::hk_norm(&moved).unwrap() - h1).abs() < 1e-10 * h1);
        let g2 = gamma.tensor(&gamma).unwrap();
        let m2 = free_propagate(&g2, 0.31).unwrap();
        assert!((m2.trace() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn five_point_stencil_reaches_strong_coupling() {
        let g = Grid::one_d(24, 6.0);
        let dt = 1e-3;
        let k = 2.0 * PI / 6.0;
        let low = Field::from_fn(g, |x| {
            Complex64::new(1.0, 0.0) + Complex64::from_polar(0.3, k * x[0]) + Complex64::from_polar(0.2, -k * x[0])
        })
        .normalized()
        .unwrap();
        let traj = nls_snapshots(&low, 9.0, dt, 5);
        for k in [1, 2] {
            let r = factorized_hierarchy_residual(&traj, dt, 9.0, k).unwrap();
            assert!(r.normalized < 1e-6, "k = {k}: {r:?}");
        }
    }

    #[test]
    fn factorized_residual_constant_and_consistent() {
        let g = Grid::one_d(32, 2.0 * PI);
        let dt = 1e-3;
        let c = Field::constant(g, Complex64::new(1.0 / (2.0 * PI).sqrt(), 0.0));
        let traj = nls_snapshots(&c, 2.0, dt, 3);
        for k in [1, 2] {
            assert!(factorized_hierarchy_residual(&traj, dt, 2.0, k).unwrap().normalized < 1e-8);
        }
        let low = Field::from_fn(g, |x| {
            Complex64::new(1.0, 0.0) + Complex64::from_polar(0.3, x[0]) + Complex64::from_polar(0.2, -x[0])
        })
        .normalized()
        .unwrap();
        let traj = nls_snapshots(&low, 2.0, dt, 4);
        for k in [1, 2] {
            let r = factorized_hierarchy_residual(&traj, dt, 2.0, k).unwrap();
            assert!(r.normalized < 1e-6, "k = {k}: {r:?}");
            let wrong = factorized_hierarchy_residual(&traj, dt, 3.0, k).unwrap();
            assert!(wrong.absolute > 0.1 * wrong.interaction_scale, "k = {k}: {wrong:?}");
        }
    }
}

use std::sync::Arc;

use gplab_core::fock_lattice::{fock_to_dense, FockBasis, FockState};
use gplab_core::gp_field::{evolve_nls, mass, EvolutionParams, Field, Grid};
use gplab_core::hierarchy_check::{collision_apply, duhamel_counts};
use gplab_core::marginals::{reduce, trace_distance, MarginalDensity};
use gplab_core::potentials::{Dimension, PotentialSpec, ScaledPair};
use gplab_core::scattering::{default_r_max, solve_zero_energy};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_fock(m: usize, n: usize, seed: u64) -> FockState {
    let basis = Arc::new(FockBasis::new(m, n).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amplitudes: Vec<Complex64> = (0..basis.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amplitudes.iter_mut().for_each(|a| *a /= norm);
    FockState {
        basis,
        spacing: 4.0 / m as f64,
        amplitudes,
    }
}

fn random_field(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field {
        grid,
        values: (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    }
    .normalized()
    .unwrap()
}

fn factorial_ratio(top: u32, bottom: u32) -> u128 {
    (bottom + 1..=top).map(u128::from).product()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rank_inverts_state(m in 1usize..7, n in 1usize..5) {
        let basis = FockBasis::new(m, n).unwrap();
        for r in 0..basis.len() {
            let occ = basis.state(r);
            prop_assert_eq!(occ.iter().map(|&c| c as usize).sum::<usize>(), n);
            prop_assert_eq!(basis.rank(occ), r);
        }
    }

    #[test]
    fn marginals_are_density_matrices(m in 3usize..7, n in 2usize..4, seed in any::<u64>()) {
        let psi = random_fock(m, n, seed);
        let g1 = reduce(&psi, 1).unwrap();
        let g2 = reduce(&psi, 2).unwrap();
        g1.check_invariants().unwrap();
        g2.check_invariants().unwrap();
        prop_assert!(trace_distance(&g2.partial_trace().unwrap(), &g1).unwrap() < 1e-10);
        let dense = fock_to_dense(&psi).unwrap();
        prop_assert!(trace_distance(&reduce(&dense, 2).unwrap(), &g2).unwrap() < 1e-10);
    }

    #[test]
    fn collision_is_traceless_and_hermitian(m in 3usize..7, n in 2usize..4, seed in any::<u64>(), sigma in 0.1f64..10.0) {
        let g2: MarginalDensity = reduce(&random_fock(m, n, seed), 2).unwrap();
        let c = collision_apply(&g2, sigma).unwrap();
        let scale = c.matrix.norm().max(1.0);
        prop_assert!(c.trace().norm() < 1e-12 * scale);
        prop_assert!((&c.matrix - c.matrix.adjoint()).norm() < 1e-12 * scale);
    }

    #[test]
    fn scattering_length_scales_inversely(v0 in 0.05f64..5.0, n in 1u32..60) {
        let spec = PotentialSpec::soft_sphere(v0, 1.0, Dimension::Three).unwrap();
        let a0 = solve_zero_energy(&spec, default_r_max(&spec), 1e-12).unwrap().a0;
        let pair = ScaledPair::new(spec, n, 1.0).unwrap();
        let an = solve_zero_energy(&pair, default_r_max(&pair), 1e-12).unwrap().a0;
        prop_assert!((an * f64::from(n) / a0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nls_conserves_mass(seed in any::<u64>(), sigma in -5.0f64..5.0) {
        let phi = random_field(Grid::one_d(64, 8.0), seed);
        let out = evolve_nls(&phi, &EvolutionParams::cubic(sigma, 1e-3, 200)).unwrap();
        prop_assert!((mass(&out) - mass(&phi)).abs() < 1e-12);
    }

    #[test]
    fn summands_are_factorial_ratios(k in 1u32..6, m in 0u32..8) {
        let c = duhamel_counts(k, m, 0).unwrap();
        prop_assert_eq!(c.xi_summands, factorial_ratio(m + k, k));
    }
}

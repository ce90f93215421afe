mod common;

use common::{as_vector, c, dense_h, term_matrix, C};
use ffprep::models::{build_fredkin, build_heisenberg_chain, build_heisenberg_single_particle};
use ffprep::resetfree::{
    binomial_string_density, build_symmetrized, detectability_bound_check, eigen_correspondence, operator_string_density,
    projection_energy_series, random_orthogonal_states, ProjectionRound,
};
use ffprep::spectra::{lowest_pair, SparseHamiltonian};
use ffprep::LayeredModel;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Π_layers Π_terms (1 − P_i) as a dense product, first layer applied first.
fn dense_round(m: &LayeredModel, order: &[usize]) -> DMatrix<C> {
    let n = m.dim();
    let id = DMatrix::<C>::identity(n, n);
    order.iter().fold(id.clone(), |acc, &l| {
        let layer = m.layers()[l].iter().fold(id.clone(), |a, &i| (&id - term_matrix(m, i)) * a);
        layer * acc
    })
}

#[test]
fn round_matches_dense_product() {
    for m in [build_heisenberg_chain::<f64>(8, true, 4).unwrap(), build_fredkin(8).unwrap()] {
        let round = ProjectionRound::new(&m);
        let p = dense_round(&m, round.order());
        let psi = random_orthogonal_states(&m, 1, 5).unwrap().remove(0);
        let mut a = psi.amplitudes().to_vec();
        round.apply_raw(&mut a);
        assert!((as_vector(&a) - &p * as_vector(psi.amplitudes())).norm() < 1e-12, "{}", m.id());
        let mut b = psi.amplitudes().to_vec();
        round.apply_adjoint_raw(&mut b);
        assert!((as_vector(&b) - p.adjoint() * as_vector(psi.amplitudes())).norm() < 1e-12);
    }
}

#[test]
fn single_particle_symmetrized_round_is_polynomial_in_h() {
    // Disjoint bond projectors are mutually orthogonal with one flipped spin, so each layer sum is a projector.
    for m in [build_heisenberg_single_particle::<f64>(1, 12).unwrap(), build_heisenberg_single_particle(1, 8).unwrap()] {
        let h = dense_h(&m);
        let n = m.dim();
        let oracle = DMatrix::<C>::identity(n, n) - &h * c(1.5) + &h * &h * c(0.5);
        assert!((build_symmetrized(&m).unwrap() - oracle).norm() < 1e-12, "{}", m.id());
    }
}

#[test]
fn two_layer_symmetrized_round_is_hermitian_part() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    assert_eq!(m.n_layers(), 2);
    let p = dense_round(&m, &[0, 1]);
    let oracle = (&p + p.adjoint()) * c(0.5);
    assert!((build_symmetrized(&m).unwrap() - oracle).norm() < 1e-12);
}

#[test]
fn three_layer_symmetrized_round_averages_orderings() {
    let m = build_fredkin::<f64>(8).unwrap();
    assert_eq!(m.n_layers(), 3);
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let n = m.dim();
    let avg = orders.iter().fold(DMatrix::<C>::zeros(n, n), |a, o| a + dense_round(&m, o)) * c(1.0 / 6.0);
    assert!((build_symmetrized(&m).unwrap() - avg).norm() < 1e-12);
}

#[test]
fn ground_state_is_fixed_and_leading() {
    let m = build_heisenberg_chain::<f64>(10, true, 5).unwrap();
    let g = m.ground_state().unwrap();
    let (out, nrm) = ProjectionRound::new(&m).apply(g).unwrap();
    assert!((nrm - 1.0).abs() < 1e-12);
    assert!((out.fidelity(g).unwrap() - 1.0).abs() < 1e-12);
    let corr = eigen_correspondence(&m, 3, (5, 20)).unwrap();
    assert!((corr.entries[0].lambda_tilde - 1.0).abs() < 1e-10);
    assert!((corr.entries[0].lambda - 1.0).abs() < 1e-10);
    assert!(corr.entries[1].lambda_tilde < 1.0 - 1e-3);
}

#[test]
fn reset_free_overlap_never_decreases() {
    let m = build_heisenberg_chain::<f64>(10, true, 5).unwrap();
    let steps = projection_energy_series(&m, m.initial_state(), 200).unwrap();
    for w in steps.windows(2) {
        assert!(w[1].overlap >= w[0].overlap - 1e-12);
        assert!(w[1].log_norm <= w[0].log_norm + 1e-12);
    }
    assert!(steps.last().unwrap().energy < steps[0].energy);
}

#[test]
fn detectability_sandwich_on_small_models() {
    for m in [build_heisenberg_chain::<f64>(8, true, 4).unwrap(), build_fredkin(8).unwrap(), build_heisenberg_single_particle(1, 10).unwrap()] {
        let gap = lowest_pair(&SparseHamiltonian::assemble(&m)).unwrap().gap;
        let trials = random_orthogonal_states(&m, 50, 9).unwrap();
        let report = detectability_bound_check(&m, &trials, gap).unwrap();
        assert_eq!(report.violations, 0, "{}", m.id());
        assert!(report.min_slack >= -1e-12);
    }
}

#[test]
fn string_density_mean_and_normalization() {
    for tau in 1..=16usize {
        let exact = operator_string_density(tau).unwrap();
        let binom = binomial_string_density(tau);
        assert!((exact.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((binom.values().sum::<f64>() - 1.0).abs() < 1e-12);
        // Interior walls average (τ−1)/2 and the two ends remove 1/2 each on average.
        let t = tau as f64;
        let mean: f64 = exact.iter().map(|(k, p)| *k as f64 * p).sum();
        assert!((mean - (1.5 * t - 0.5)).abs() < 1e-9, "tau={tau}");
        let bmean: f64 = binom.iter().map(|(k, p)| *k as f64 * p).sum();
        assert!((bmean - 1.5 * t).abs() < 1e-9);
    }
    assert!(operator_string_density(0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_is_a_contraction(seed in any::<u64>()) {
        let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
        let psi = random_orthogonal_states(&m, 1, seed).unwrap().remove(0);
        let (_, n) = ProjectionRound::new(&m).apply(&psi).unwrap();
        prop_assert!(n <= 1.0 + 1e-12);
        let e = m.energy(&psi).unwrap();
        prop_assert!(n * n >= 1.0 - 4.0 * e - 1e-12);
    }
}

mod common;

use common::{c, dense_h, eigenvalues, C};
use ffprep::models::{build_cluster_ising, build_heisenberg_2d, build_heisenberg_chain, build_heisenberg_single_particle, build_qdm};
use ffprep::spectra::{gap_scaling_fit, lanczos_lowest, lowest_pair, spectrum, SparseHamiltonian};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn assembled_matrix_equals_dense_oracle() {
    for m in [
        build_heisenberg_chain::<f64>(8, true, 4).unwrap(),
        build_heisenberg_single_particle(2, 4).unwrap(),
        build_qdm(2, 4).unwrap(),
        build_cluster_ising(6).unwrap(),
    ] {
        let h = SparseHamiltonian::assemble(&m);
        assert!((h.to_dense() - dense_h(&m)).norm() < 1e-12, "{}", m.id());
        assert!(h.hermiticity_defect() < 1e-14);
    }
}

#[test]
fn single_particle_matrix_is_discrete_laplacian() {
    let m = build_heisenberg_single_particle::<f64>(1, 6).unwrap();
    let h = SparseHamiltonian::assemble(&m).to_dense();
    let oracle = DMatrix::from_fn(6, 6, |r, s| {
        let d = (r as i64 - s as i64).rem_euclid(6);
        c(if d == 0 { 1.0 } else if d == 1 || d == 5 { -0.5 } else { 0.0 })
    });
    assert!((h - oracle).norm() < 1e-14);
}

#[test]
fn qdm_two_by_two_matrix() {
    let m = build_qdm::<f64>(2, 2).unwrap();
    let h = SparseHamiltonian::assemble(&m).to_dense();
    let oracle = DMatrix::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)]);
    assert!((h - oracle).norm() < 1e-14);
}

#[test]
fn lanczos_agrees_with_dense_on_square_lattice() {
    let m = build_heisenberg_2d::<f64>(4, 4, false, 3).unwrap();
    assert_eq!(m.dim(), 560);
    let h = SparseHamiltonian::assemble(&m);
    let e = eigenvalues(&h.to_dense());
    let ground = m.ground_state().unwrap().amplitudes().to_vec();
    let (e1, v, _, res) = lanczos_lowest(&h, &[ground.clone()], 1e-10, 5000, 3).unwrap();
    assert!((e1 - e[1]).abs() < 1e-9, "{e1} vs {}", e[1]);
    assert!(res < 1e-8);
    let overlap: C = ground.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    assert!(overlap.norm() < 1e-8);
    let g = lowest_pair(&h).unwrap();
    assert!(g.dense);
    assert!((g.gap - (e[1] - e[0])).abs() < 1e-10);
}

#[test]
fn sparse_path_matches_dense_path() {
    // 3432 states: above the dense cutoff.
    let m = build_heisenberg_chain::<f64>(14, true, 7).unwrap();
    let g = lowest_pair(&SparseHamiltonian::assemble(&m)).unwrap();
    assert!(!g.dense);
    assert!(g.e0.abs() < 1e-9);
    let magnon = 1.0 - (2.0 * std::f64::consts::PI / 14.0).cos();
    assert!((g.gap - magnon).abs() < 1e-8, "{}", g.gap);
    assert_eq!(g.degeneracy, 1);
}

#[test]
fn cluster_ground_level_is_doubly_degenerate() {
    let m = build_cluster_ising::<f64>(9).unwrap();
    let h = SparseHamiltonian::assemble(&m);
    let g = lowest_pair(&h).unwrap();
    assert_eq!(g.degeneracy, 2);
    let s = spectrum(&h);
    assert!(s[0].abs() < 1e-10 && s[1].abs() < 1e-10 && s[2] > 1e-3);
    assert!((g.e1 - s[2]).abs() < 1e-10);
}

#[test]
fn single_particle_exponent_is_two() {
    let sizes = [8usize, 12, 16, 24, 32];
    let gaps: Vec<f64> = sizes
        .iter()
        .map(|&l| lowest_pair(&SparseHamiltonian::assemble(&build_heisenberg_single_particle::<f64>(1, l).unwrap())).unwrap().gap)
        .collect();
    let fit = gap_scaling_fit(&sizes.map(|l| l as f64), &gaps, 1).unwrap();
    assert!((fit.z - 2.0).abs() < 0.1, "{}", fit.z);
}

#[test]
fn heisenberg_chain_exponent_is_two() {
    let sizes = [8usize, 10, 12, 14, 16];
    let gaps: Vec<f64> = sizes
        .iter()
        .map(|&n| lowest_pair(&SparseHamiltonian::assemble(&build_heisenberg_chain::<f64>(n, true, n / 2).unwrap())).unwrap().gap)
        .collect();
    let fit = gap_scaling_fit(&sizes.map(|l| l as f64), &gaps, 1).unwrap();
    assert!((fit.z - 2.0).abs() < 0.2, "{}", fit.z);
}

#[test]
fn gap_fit_needs_enough_sizes() {
    assert!(gap_scaling_fit(&[8.0, 16.0, 32.0], &[0.1, 0.03, 0.01], 1).is_err());
    assert!(gap_scaling_fit(&[8.0, 9.0, 10.0, 11.0], &[0.1, 0.09, 0.08, 0.07], 1).is_err());
}

#[test]
fn f32_gap_tracks_f64() {
    let a = lowest_pair(&SparseHamiltonian::assemble(&build_heisenberg_chain::<f64>(10, true, 5).unwrap())).unwrap();
    let b = lowest_pair(&SparseHamiltonian::assemble(&build_heisenberg_chain::<f32>(10, true, 5).unwrap())).unwrap();
    assert!((a.gap - b.gap).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exact_power_law_recovers_exponent(z in 1.0f64..3.0, a in 0.1f64..10.0, dim in 1usize..=2) {
        let sizes = [16.0, 36.0, 64.0, 100.0, 144.0];
        let gaps: Vec<f64> = sizes.iter().map(|n: &f64| a * n.powf(-z / dim as f64)).collect();
        let fit = gap_scaling_fit(&sizes, &gaps, dim).unwrap();
        prop_assert!((fit.z - z).abs() < 1e-9);
        prop_assert!(fit.r2 > 1.0 - 1e-12);
    }
}

mod common;

use common::{c, dense_h, eigenvalues, expectation, term_matrix, C};
use ffprep::basis::Configuration;
use ffprep::models::{
    build_cluster_ising, build_fredkin, build_heisenberg_2d, build_heisenberg_chain, build_heisenberg_chain_full,
    build_heisenberg_single_particle, build_qdm, cluster_ising_local,
};
use ffprep::{LayeredModel, StateVector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn neel(n: usize) -> Configuration {
    Configuration::from_sites(&(0..n).filter(|s| s % 2 == 1).collect::<Vec<_>>())
}

fn all_models() -> Vec<LayeredModel> {
    vec![
        build_heisenberg_chain(8, true, 4).unwrap(),
        build_heisenberg_chain(10, false, 5).unwrap(),
        build_heisenberg_single_particle(1, 8).unwrap(),
        build_heisenberg_single_particle(2, 4).unwrap(),
        build_heisenberg_2d(2, 4, true, 4).unwrap(),
        build_heisenberg_2d(4, 4, false, 3).unwrap(),
        build_fredkin(6).unwrap(),
        build_fredkin(8).unwrap(),
        build_qdm(2, 4).unwrap(),
        build_qdm(4, 4).unwrap(),
        build_cluster_ising(6).unwrap(),
    ]
}

#[test]
fn neel_energy_on_short_ring() {
    let m = build_heisenberg_chain(4, true, 2).unwrap();
    let psi = StateVector::basis_state(m.basis(), &neel(4)).unwrap();
    assert!((m.energy(&psi).unwrap() - 2.0).abs() < 1e-12);
    assert!((expectation(&dense_h(&m), psi.amplitudes()) - 2.0).abs() < 1e-12);
}

#[test]
fn every_dicke_state_is_annihilated() {
    let m = build_heisenberg_chain_full(6, true).unwrap();
    let h = dense_h(&m);
    for k in 0..=6 {
        let terms: Vec<(Configuration, C)> =
            m.basis().configs().iter().filter(|x| x.count_ones() == k).map(|&x| (x, c(1.0))).collect();
        let mut psi = StateVector::from_terms(m.basis(), &terms).unwrap();
        psi.normalize().unwrap();
        assert!(m.energy(&psi).unwrap().abs() < 1e-12, "k={k}");
        assert!(expectation(&h, psi.amplitudes()).abs() < 1e-12);
    }
    assert_eq!(m.ground_space().len(), 7);
}

#[test]
fn neel_overlap_with_uniform_ground_state() {
    let m = build_heisenberg_chain(16, true, 8).unwrap();
    let psi = StateVector::basis_state(m.basis(), &neel(16)).unwrap();
    assert!((m.ground_overlap(&psi).unwrap() - 1.0 / 12870.0).abs() < 1e-15);
}

#[test]
fn single_particle_ring_matches_circulant() {
    let m = build_heisenberg_single_particle(1, 8).unwrap();
    let h = dense_h(&m);
    let oracle = DMatrix::from_fn(8, 8, |r, s| {
        let d = (r as i64 - s as i64).rem_euclid(8);
        c(if d == 0 { 1.0 } else if d == 1 || d == 7 { -0.5 } else { 0.0 })
    });
    // Basis is ordered by the single flipped site.
    assert!((&h - &oracle).norm() < 1e-12);
    let e = eigenvalues(&h);
    assert!(e[0].abs() < 1e-12);
    assert!((e[1] - (1.0 - (std::f64::consts::PI / 4.0).cos())).abs() < 1e-12);
    assert!((m.dispersion().unwrap().gap() - e[1]).abs() < 1e-12);
    let init = m.initial_state();
    assert!((m.ground_overlap(init).unwrap() - 2.0 / 8.0).abs() < 1e-12);
}

#[test]
fn single_particle_spectrum_is_magnon_band() {
    for (dim, length) in [(1usize, 10usize), (2, 4), (3, 4)] {
        let m = build_heisenberg_single_particle(dim, length).unwrap();
        let e = eigenvalues(&dense_h(&m));
        let mut band: Vec<f64> = m.dispersion().unwrap().momenta().iter().map(|k| m.dispersion().unwrap().eval(k)).collect();
        band.sort_by(f64::total_cmp);
        assert_eq!(band.len(), e.len());
        for (a, b) in band.iter().zip(&e) {
            assert!((a - b).abs() < 1e-10, "d={dim}: {a} vs {b}");
        }
        let n = m.dim() as f64;
        assert!((m.ground_overlap(m.initial_state()).unwrap() - 2.0 / n).abs() < 1e-12);
    }
}

#[test]
fn single_magnon_chain_band_is_one_minus_cos() {
    let n = 12;
    let m = build_heisenberg_chain(n, true, 1).unwrap();
    let e = eigenvalues(&dense_h(&m));
    let mut band: Vec<f64> = (0..n).map(|q| 1.0 - (2.0 * std::f64::consts::PI * q as f64 / n as f64).cos()).collect();
    band.sort_by(f64::total_cmp);
    for (a, b) in band.iter().zip(&e) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn square_lattice_coordination() {
    let m = build_heisenberg_2d::<f64>(4, 4, false, 8).unwrap();
    assert_eq!(m.terms().len(), 32);
    let mut degree = [0usize; 16];
    for t in m.terms() {
        for &s in &t.support {
            degree[s] += 1;
        }
    }
    assert!(degree.iter().all(|&d| d == 4));
    let open = build_heisenberg_2d::<f64>(2, 2, true, 2).unwrap();
    assert_eq!(open.terms().len(), 4);
    assert_eq!(open.dim(), 6);
}

#[test]
fn fredkin_bulk_term_is_rank_three_projector() {
    let m = build_fredkin::<f64>(8).unwrap();
    let bulk: Vec<_> = m.terms().iter().filter(|t| t.support.len() == 4).collect();
    assert!(!bulk.is_empty());
    for t in bulk {
        let p = t.local_matrix();
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!((p.trace().re - 3.0).abs() < 1e-12);
        assert_eq!(t.local_rank(), 3);
    }
}

#[test]
fn fredkin_ground_state_is_annihilated_termwise() {
    let m = build_fredkin(6).unwrap();
    let g = m.ground_state().unwrap();
    for i in 0..m.terms().len() {
        let v = common::as_vector(g.amplitudes());
        assert!((term_matrix(&m, i) * v).norm() < 1e-10, "term {i}");
    }
    // Uniform superposition of Dyck paths.
    let a = g.amplitudes();
    assert!(a.iter().all(|x| (x - a[0]).norm() < 1e-12));
}

#[test]
fn cluster_term_is_projector_killing_ferromagnets() {
    let p = cluster_ising_local::<f64>();
    assert!((&p * &p - &p).norm() < 1e-12);
    assert!(p.column(0).norm() < 1e-12);
    assert!(p.column(7).norm() < 1e-12);
    // X on the centre of a triple moves weight out of the kernel.
    let m = build_cluster_ising(6).unwrap();
    let t = &m.terms()[0];
    let u = t.correction_matrix();
    assert!((&u * &p - &p * &u).norm() > 0.1);
    assert_eq!(m.ground_space().len(), 2);
}

#[test]
fn qdm_two_by_two_is_rokhsar_kivelson_pair() {
    let m = build_qdm(2, 2).unwrap();
    let h = dense_h(&m);
    let oracle = DMatrix::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)]);
    assert!((&h - &oracle).norm() < 1e-12);
    let e = eigenvalues(&h);
    assert!(e[0].abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
}

#[test]
fn f32_models_agree_with_f64() {
    let a = build_heisenberg_chain::<f64>(10, true, 5).unwrap();
    let b = build_heisenberg_chain::<f32>(10, true, 5).unwrap();
    let ea = a.energy(a.initial_state()).unwrap();
    let eb = b.energy(b.initial_state()).unwrap();
    assert!((ea - f64::from(eb)).abs() < 1e-5);
    let fa = build_fredkin::<f64>(8).unwrap();
    let fb = build_fredkin::<f32>(8).unwrap();
    assert!((fa.energy(fa.initial_state()).unwrap() - f64::from(fb.energy(fb.initial_state()).unwrap())).abs() < 1e-5);
}

#[test]
fn hamiltonians_are_hermitian_psd_and_frustration_free() {
    for m in all_models() {
        if m.dim() > 600 {
            continue;
        }
        let h = dense_h(&m);
        assert!((&h - h.adjoint()).norm() < 1e-12, "{}", m.id());
        let e = eigenvalues(&h);
        assert!(e[0] > -1e-10, "{}", m.id());
        assert!(e[0].abs() < 1e-10, "{} ground energy {}", m.id(), e[0]);
        for g in m.ground_space() {
            assert!(expectation(&h, g.amplitudes()).abs() < 1e-10);
        }
    }
}

#[test]
fn layers_partition_terms_into_commuting_sets() {
    for m in all_models() {
        let mut seen = vec![0; m.terms().len()];
        for layer in m.layers() {
            for &i in layer {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&n| n == 1), "{}", m.id());
        if m.dim() > 300 {
            continue;
        }
        for layer in m.layers() {
            for (k, &i) in layer.iter().enumerate() {
                for &j in &layer[k + 1..] {
                    let (a, b) = (term_matrix(&m, i), term_matrix(&m, j));
                    assert!((&a * &b - &b * &a).norm() < 1e-10, "{} terms {i},{j}", m.id());
                }
            }
        }
    }
}

#[test]
fn sectors_are_closed() {
    for m in all_models() {
        m.check_closure().unwrap();
        // Dense oracle: each term maps the sector into itself, so P² = P holds within it.
        if m.dim() <= 300 {
            for i in 0..m.terms().len() {
                let p = term_matrix(&m, i);
                assert!((&p * &p - &p).norm() < 1e-10, "{} term {i}", m.id());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_matches_dense_quadratic_form(seed in any::<u64>(), pick in 0usize..11) {
        use rand::{Rng, SeedableRng};
        let m = &all_models()[pick];
        prop_assume!(m.dim() <= 600);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<C> = (0..m.dim()).map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let e = m.energy_of(&amps);
        let oracle = expectation(&dense_h(m), &amps);
        prop_assert!((e - oracle).abs() < 1e-10 * (1.0 + oracle.abs()));
    }
}

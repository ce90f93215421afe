mod common;

use common::{correction_matrix, dense_h, term_matrix, C};
use ffprep::models::{build_fredkin, build_heisenberg_chain};
use ffprep::protocol::{
    evolve_channel_exact, postselect_threshold, pure_density, run_ensemble, run_trajectory, stable_hash, EnsembleSummary,
    ProtocolConfig,
};
use ffprep::LayeredModel;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Outcome-averaged round: per term ρ ↦ (1−P)ρ(1−P) + U P ρ P U†.
fn dense_channel_round(m: &LayeredModel, rho: &DMatrix<C>) -> DMatrix<C> {
    let n = m.dim();
    let id = DMatrix::<C>::identity(n, n);
    let mut rho = rho.clone();
    for layer in m.layers() {
        for &i in layer {
            let p = term_matrix(m, i);
            let q = &id - &p;
            let u = correction_matrix(m, i);
            rho = &q * &rho * &q + &u * &p * &rho * &p * u.adjoint();
        }
    }
    rho
}

fn trace_with(h: &DMatrix<C>, rho: &DMatrix<C>) -> f64 {
    (h * rho).trace().re
}

#[test]
fn trajectories_are_reproducible_from_their_seed() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    let cfg = ProtocolConfig::rounds(30);
    let a = run_trajectory(&m, m.initial_state(), &cfg, 99).unwrap();
    let b = run_trajectory(&m, m.initial_state(), &cfg, 99).unwrap();
    assert_eq!(a, b);
    let e1 = run_ensemble(&m, m.initial_state(), &cfg, 8, 3).unwrap();
    let e2 = run_ensemble(&m, m.initial_state(), &cfg, 8, 3).unwrap();
    assert_eq!(e1.summary, e2.summary);
    for (k, r) in e1.records.iter().enumerate() {
        assert_eq!(r.seed, stable_hash(3, k as u64));
    }
    let e3 = run_ensemble(&m, m.initial_state(), &cfg, 8, 4).unwrap();
    assert_ne!(e1.summary.mean_energy, e3.summary.mean_energy);
}

#[test]
fn ground_initialized_run_stops_clean() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    let cfg = ProtocolConfig { max_rounds: 100, stop_clean_rounds: 5, ..ProtocolConfig::default() };
    let r = run_trajectory(&m, m.ground_state().unwrap(), &cfg, 1).unwrap();
    assert!(r.converged);
    assert_eq!(r.rounds_run, 5);
    assert_eq!(r.n_hits(), 0);
    assert!(r.energies.iter().all(|e| e.abs() < 1e-12));
    assert!(r.infidelities.iter().all(|f| f.abs() < 1e-12));
}

#[test]
fn reset_bookkeeping_is_consistent() {
    let m = build_fredkin::<f64>(8).unwrap();
    let cfg = ProtocolConfig::rounds(60);
    for seed in 0..20 {
        let r = run_trajectory(&m, m.initial_state(), &cfg, seed).unwrap();
        let rounds = r.reset_rounds();
        assert_eq!(rounds.len(), r.reset_gaps.len());
        assert_eq!(r.reset_gaps.iter().sum::<usize>(), rounds.last().copied().unwrap_or(0));
        assert!(rounds.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r.rounds_since_last_reset(), r.rounds_run - rounds.last().copied().unwrap_or(0));
        assert_eq!(r.hits_in_window(r.rounds_run, None), r.n_hits());
        assert_eq!(r.energies.len(), r.rounds_run + 1);
    }
}

#[test]
fn record_stride_thins_the_series() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    let cfg = ProtocolConfig { max_rounds: 40, record_every: 10, ..ProtocolConfig::default() };
    let e = run_ensemble(&m, m.initial_state(), &cfg, 4, 0).unwrap();
    assert_eq!(e.summary.t, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
    assert!(e.summary.n_alive.iter().all(|&n| n == 4));
}

#[test]
fn single_trajectory_summary_has_zero_sem() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    let e = run_ensemble(&m, m.initial_state(), &ProtocolConfig::rounds(10), 1, 0).unwrap();
    assert!(e.summary.sem_energy.iter().all(|&s| s == 0.0));
    assert_eq!(e.summary.mean_energy, e.records[0].energies);
    assert_eq!(e.summary.acceptance_rate, 1.0);
}

#[test]
fn sem_shrinks_like_inverse_root_n() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    let cfg = ProtocolConfig::rounds(10);
    let small = run_ensemble(&m, m.initial_state(), &cfg, 400, 1).unwrap().summary;
    let large = run_ensemble(&m, m.initial_state(), &cfg, 800, 2).unwrap().summary;
    let ratio = large.sem_energy[5] / small.sem_energy[5];
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn exact_channel_matches_dense_oracle() {
    let m = build_heisenberg_chain::<f64>(6, true, 3).unwrap();
    let cfg = ProtocolConfig::default();
    let rho0 = pure_density(m.initial_state());
    let pts = evolve_channel_exact(&m, &rho0, &cfg, 15).unwrap();
    let h = dense_h(&m);
    let g = common::as_vector(m.ground_state().unwrap().amplitudes());
    let mut rho = rho0;
    for p in &pts {
        assert!((p.trace - 1.0).abs() < 1e-12);
        assert!((p.energy - trace_with(&h, &rho)).abs() < 1e-12, "round {}", p.round);
        let ov = (g.adjoint() * &rho * &g)[(0, 0)].re;
        assert!((p.ground_overlap - ov).abs() < 1e-12);
        rho = dense_channel_round(&m, &rho);
    }
}

#[test]
fn ensemble_average_tracks_channel() {
    let m = build_heisenberg_chain::<f64>(6, true, 3).unwrap();
    let cfg = ProtocolConfig::rounds(4);
    let pts = evolve_channel_exact(&m, &pure_density(m.initial_state()), &cfg, 4).unwrap();
    let s = run_ensemble(&m, m.initial_state(), &cfg, 4000, 0).unwrap().summary;
    // Later rounds are dominated by a tail too thin for the sample to resolve.
    for r in [1usize, 2, 4] {
        let z = (s.mean_energy[r] - pts[r].energy) / s.sem_energy[r];
        assert!(z.abs() < 3.0, "round {r}: z = {z}");
    }
}

#[test]
fn postselection_threshold_and_acceptance() {
    let m = build_fredkin::<f64>(8).unwrap();
    let cfg = ProtocolConfig::rounds(30);
    let pilot = run_ensemble(&m, m.initial_state(), &cfg, 200, 5).unwrap().records;
    let k = postselect_threshold(&pilot, 0.5, None).unwrap();
    let accepted = pilot.iter().filter(|r| r.n_hits() <= k).count();
    assert!(accepted >= 100);
    let cfg = ProtocolConfig { postselect_max_hits: Some(k), ..cfg };
    let s = EnsembleSummary::from_records(&pilot, cfg.postselection()).unwrap();
    assert!((s.acceptance_rate - accepted as f64 / 200.0).abs() < 1e-12);
    assert!(s.n_alive.windows(2).all(|w| w[1] <= w[0]));
    assert!(postselect_threshold(&pilot, 1.5, None).is_err());
}

#[test]
fn invalid_configurations_are_rejected() {
    for cfg in [
        ProtocolConfig { max_rounds: 0, ..ProtocolConfig::default() },
        ProtocolConfig { record_every: 0, ..ProtocolConfig::default() },
        ProtocolConfig { dephasing_p: 1.0, ..ProtocolConfig::default() },
        ProtocolConfig { postselect_window: Some(0), ..ProtocolConfig::default() },
    ] {
        assert!(cfg.validate().is_err());
    }
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    assert!(run_ensemble(&m, m.initial_state(), &ProtocolConfig::default(), 0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn observables_stay_physical(seed in any::<u64>(), p in 0.0f64..0.2) {
        let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
        let cfg = ProtocolConfig { max_rounds: 20, dephasing_p: p, ..ProtocolConfig::default() };
        let r = run_trajectory(&m, m.initial_state(), &cfg, seed).unwrap();
        prop_assert!(r.energies.iter().all(|&e| e > -1e-12 && e <= m.terms().len() as f64 + 1e-12));
        prop_assert!(r.infidelities.iter().all(|&f| (-1e-12..=1.0 + 1e-12).contains(&f)));
    }
}

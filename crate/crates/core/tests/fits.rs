use ffprep::fits::{
    collapse_residual, convergence_time, fit_early_exponent_window, fit_late_rate, linear_fit, power_law_fit, rate_unit,
    shared_rate_intercepts, Curve,
};
use ffprep::markov::{closed_form_avg_energy, EnergyCurve, MarkovParams};
use ffprep::models::build_heisenberg_chain;
use ffprep::protocol::{run_ensemble, ProtocolConfig};
use proptest::prelude::*;

fn grid(t_max: usize) -> Vec<f64> {
    (0..=t_max).map(|t| t as f64).collect()
}

#[test]
fn late_rate_recovers_closed_form() {
    for (beta, lam) in [(0.5, 1.0), (1.0, 2.0), (1.5, 0.7), (0.375, 3.0)] {
        let p = MarkovParams { beta, lam, energy: EnergyCurve::Asymptotic, ..MarkovParams::single_particle(1, 32) };
        let t = grid((4.0 / p.gap) as usize);
        let e: Vec<f64> = t.iter().map(|&x| closed_form_avg_energy(x, &p)).collect();
        let f = fit_late_rate(&t, &e, p.gap, beta).unwrap();
        assert!((f.lam / lam - 1.0).abs() < 0.02, "beta {beta}: {}", f.lam);
    }
}

#[test]
fn rate_unit_branches() {
    let d: f64 = 0.01;
    assert_eq!(rate_unit(d, 0.5), d);
    assert!((rate_unit(d, 1.0) - d / d.ln().abs()).abs() < 1e-15);
    assert!((rate_unit(d, 2.0) - d * d).abs() < 1e-18);
}

#[test]
fn early_exponent_of_pure_power_law() {
    let t = grid(400);
    let e: Vec<f64> = t.iter().map(|&x| 0.3 * x.max(1.0).powf(-0.75)).collect();
    let f = fit_early_exponent_window(&t, &e, 5.0, 300.0).unwrap();
    assert!((f.exponent + 0.75).abs() < 1e-10);
    assert!(fit_early_exponent_window(&t, &e, 5.0, 9.0).is_err());
}

#[test]
fn convergence_time_interpolates() {
    let t = [0.0, 1.0, 2.0, 3.0];
    let y = [1.0, 0.5, 0.1, 0.05];
    assert!((convergence_time(&t, &y, 0.3).unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(convergence_time(&t, &y, 2.0).unwrap(), 0.0);
    assert!(convergence_time(&t, &y, 0.01).is_err());
}

#[test]
fn ground_initialized_ensemble_converges_at_zero() {
    let m = build_heisenberg_chain::<f64>(8, true, 4).unwrap();
    let e = run_ensemble(&m, m.ground_state().unwrap(), &ProtocolConfig::rounds(10), 16, 0).unwrap();
    assert_eq!(convergence_time(&e.summary.t, &e.summary.mean_infidelity, 0.2).unwrap(), 0.0);
}

#[test]
fn identical_curves_collapse_perfectly() {
    let x: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
    let a = Curve { x: x.clone(), y: y.clone() };
    let b = Curve { x, y: y.iter().map(|v| 2.0 * v).collect() };
    let same = collapse_residual(&[a.clone(), a.clone()], 0.0, 4.0, 30).unwrap();
    assert!(same.rms_log_spread < 1e-12);
    let off = collapse_residual(&[a, b], 0.0, 4.0, 30).unwrap();
    // ln 2 / 2 per point for two curves.
    assert!((off.rms_log_spread - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    assert!((off.max_relative_spread - 1.0).abs() < 1e-12);
}

#[test]
fn shared_intercepts_of_scaled_exponentials() {
    let gaps = [0.1, 0.05, 0.025];
    let series: Vec<(Vec<f64>, Vec<f64>)> = gaps
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let t = grid((4.0 / g) as usize);
            let y = t.iter().map(|&x| (k + 1) as f64 * (-1.5 * g * x).exp()).collect();
            (t, y)
        })
        .collect();
    let refs: Vec<(&[f64], &[f64])> = series.iter().map(|(t, y)| (t.as_slice(), y.as_slice())).collect();
    let s = shared_rate_intercepts(&refs, &gaps, 0.5).unwrap();
    assert!((s.lam - 1.5).abs() < 1e-9);
    for (k, f) in s.intercepts.iter().enumerate() {
        assert!((f - (k + 1) as f64).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn linear_fit_is_exact_on_lines(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 3usize..40) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.37 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let f = linear_fit(&x, &y).unwrap();
        prop_assert!((f.slope - a).abs() < 1e-9);
        prop_assert!((f.intercept - b).abs() < 1e-9);
        prop_assert!(f.residuals.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn power_law_recovers_exponent(p in -3.0f64..3.0, c in 0.01f64..100.0) {
        let x: Vec<f64> = (1..30).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
        let f = power_law_fit(&x, &y).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-9);
        prop_assert!((f.intercept.exp() / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn late_rate_recovers_pure_exponential(lam in 0.2f64..4.0, gap in 0.01f64..0.3) {
        let t = grid((4.0 / gap) as usize);
        let y: Vec<f64> = t.iter().map(|&x| 0.3 * (-lam * gap * x).exp()).collect();
        let f = fit_late_rate(&t, &y, gap, 0.5).unwrap();
        prop_assert!((f.lam / lam - 1.0).abs() < 1e-8);
    }
}

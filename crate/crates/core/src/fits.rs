//! Scaling-parameter extraction from ensemble series.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ordinary least squares y = intercept + slope·x with a 95% interval on the slope.
#[derive(Clone, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub slope_ci: (f64, f64),
    pub r2: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::DegenerateFit(format!("{n} points")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let (slope_se, half) = if n > 2 {
        let se = (ss_res / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(LinearFit { slope, intercept, slope_se, slope_ci: (slope - half, slope + half), r2, residuals })
}

/// Power law y = a·x^p fitted in log-log space.
pub fn power_law_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Late-time rate constant: Ē ∝ exp(−λ·Δ^{max(1,β)}·t), or exp(−λΔt/|log Δ|) at β = 1.
#[derive(Clone, Debug, Serialize)]
pub struct LateRateFit {
    pub lam: f64,
    pub lam_ci: (f64, f64),
    /// Fitted log-intercept at t = 0.
    pub log_intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub r2: f64,
}

/// Rate unit multiplying λ.
pub fn rate_unit(gap: f64, beta: f64) -> f64 {
    if (beta - 1.0).abs() < 1e-12 {
        gap / gap.ln().abs()
    } else {
        gap.powf(beta.max(1.0))
    }
}

fn window_points(t: &[f64], y: &[f64], lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    t.iter()
        .zip(y)
        .filter(|(a, b)| **a >= lo && **a <= hi && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (*a, b.ln()))
        .unzip()
}

/// Log-linear fit of `mean` over t ∈ [1/Δ, min(3/Δ, last positive)].
pub fn fit_late_rate(t: &[f64], mean: &[f64], gap: f64, beta: f64) -> Result<LateRateFit> {
    fit_late_rate_window(t, mean, gap, beta, 1.0 / gap, 3.0 / gap)
}

pub fn fit_late_rate_window(t: &[f64], mean: &[f64], gap: f64, beta: f64, lo: f64, hi: f64) -> Result<LateRateFit> {
    let last_positive = t.iter().zip(mean).filter(|(_, m)| **m > 0.0).map(|(a, _)| *a).fold(f64::NAN, f64::max);
    let hi = hi.min(last_positive);
    let (x, y) = window_points(t, mean, lo, hi);
    if x.len() < 3 {
        return Err(Error::WindowTooShort { lo, hi, points: x.len(), needed: 3 });
    }
    let f = linear_fit(&x, &y)?;
    let unit = rate_unit(gap, beta);
    Ok(LateRateFit {
        lam: -f.slope / unit,
        lam_ci: (-f.slope_ci.1 / unit, -f.slope_ci.0 / unit),
        log_intercept: f.intercept,
        window: (lo, hi),
        points: x.len(),
        r2: f.r2,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EarlyExponentFit {
    pub exponent: f64,
    pub exponent_ci: (f64, f64),
    pub window: (f64, f64),
    pub points: usize,
    pub r2: f64,
}

/// Log-log slope over t ∈ [5, 0.3/Δ].
pub fn fit_early_exponent(t: &[f64], mean: &[f64], gap: f64) -> Result<EarlyExponentFit> {
    fit_early_exponent_window(t, mean, 5.0, 0.3 / gap)
}

pub fn fit_early_exponent_window(t: &[f64], mean: &[f64], lo: f64, hi: f64) -> Result<EarlyExponentFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(mean)
        .filter(|(a, b)| **a >= lo && **a <= hi && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    if x.len() < 8 {
        return Err(Error::WindowTooShort { lo, hi, points: x.len(), needed: 8 });
    }
    let f = linear_fit(&x, &y)?;
    Ok(EarlyExponentFit { exponent: f.slope, exponent_ci: f.slope_ci, window: (lo, hi), points: x.len(), r2: f.r2 })
}

#[derive(Clone, Debug, Serialize)]
pub enum EarlyDecay {
    Algebraic(EarlyExponentFit),
    /// No usable algebraic window (too short, or a poor power-law fit).
    Inconclusive { reason: String },
}

/// Early-exponent fit that reports an inconclusive result instead of failing.
pub fn assess_early_decay(t: &[f64], mean: &[f64], gap: f64, min_r2: f64) -> EarlyDecay {
    match fit_early_exponent(t, mean, gap) {
        Ok(f) if f.r2 >= min_r2 => EarlyDecay::Algebraic(f),
        Ok(f) => EarlyDecay::Inconclusive { reason: format!("power-law R² {:.3} below {min_r2}", f.r2) },
        Err(e) => EarlyDecay::Inconclusive { reason: e.to_string() },
    }
}

/// Prefactor scaling of late-time intercepts across sizes.
#[derive(Clone, Debug, Serialize)]
pub struct PrefactorFit {
    /// a in f(N) ∝ N^a.
    pub exponent: f64,
    pub exponent_ci: (f64, f64),
    pub r2: f64,
    /// Exponent and R² against the scale N·√Δ.
    pub scale_exponent: f64,
    pub scale_r2: f64,
    /// Largest ratio of intercept to the loose bound N/√Δ.
    pub max_ratio_to_loose_bound: f64,
}

pub fn fit_prefactor(sizes: &[f64], intercepts: &[f64], gaps: &[f64]) -> Result<PrefactorFit> {
    if sizes.len() < 3 || intercepts.len() != sizes.len() || gaps.len() != sizes.len() {
        return Err(Error::DegenerateFit(format!("{} sizes, need at least 3", sizes.len())));
    }
    let f = power_law_fit(sizes, intercepts)?;
    let scale: Vec<f64> = sizes.iter().zip(gaps).map(|(n, g)| n * g.sqrt()).collect();
    let s = power_law_fit(&scale, intercepts)?;
    let ratio = sizes
        .iter()
        .zip(gaps)
        .zip(intercepts)
        .map(|((n, g), f)| f / (n / g.sqrt()))
        .fold(0.0, f64::max);
    Ok(PrefactorFit {
        exponent: f.slope,
        exponent_ci: f.slope_ci,
        r2: f.r2,
        scale_exponent: s.slope,
        scale_r2: s.r2,
        max_ratio_to_loose_bound: ratio,
    })
}

/// Late-time intercepts of several series under one shared rate.
#[derive(Clone, Debug, Serialize)]
pub struct SharedRateIntercepts {
    /// Mean of the per-series late-rate fits.
    pub lam: f64,
    pub per_series_lam: Vec<f64>,
    /// exp⟨ln y + λ·unit·t⟩ over each series' late window.
    pub intercepts: Vec<f64>,
}

/// Intercepts f_i of y_i(t) ≈ f_i·e^{−λ·unit_i·t} with λ shared across series.
pub fn shared_rate_intercepts(series: &[(&[f64], &[f64])], gaps: &[f64], beta: f64) -> Result<SharedRateIntercepts> {
    if series.len() != gaps.len() || series.is_empty() {
        return Err(Error::DegenerateFit("series and gaps differ in length".into()));
    }
    let fits = series
        .iter()
        .zip(gaps)
        .map(|((t, y), g)| fit_late_rate(t, y, *g, beta))
        .collect::<Result<Vec<_>>>()?;
    let per_series_lam: Vec<f64> = fits.iter().map(|f| f.lam).collect();
    let lam = per_series_lam.iter().sum::<f64>() / per_series_lam.len() as f64;
    let intercepts = series
        .iter()
        .zip(gaps)
        .zip(&fits)
        .map(|(((t, y), g), f)| {
            let unit = rate_unit(*g, beta);
            let (x, ly) = window_points(t, y, f.window.0, f.window.1);
            (x.iter().zip(&ly).map(|(a, b)| b + lam * unit * a).sum::<f64>() / x.len() as f64).exp()
        })
        .collect();
    Ok(SharedRateIntercepts { lam, per_series_lam, intercepts })
}

/// First t with series ≤ target, linearly interpolated.
pub fn convergence_time(t: &[f64], series: &[f64], target: f64) -> Result<f64> {
    if series.first().is_some_and(|v| *v <= target) {
        return Ok(t[0]);
    }
    for k in 1..series.len() {
        if series[k] <= target {
            let (t0, t1, y0, y1) = (t[k - 1], t[k], series[k - 1], series[k]);
            return Ok(t0 + (t1 - t0) * (y0 - target) / (y0 - y1));
        }
    }
    Err(Error::NoCrossing { target })
}

/// A curve in transformed coordinates.
#[derive(Clone, Debug)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Log-space interpolation of a positive curve at `x` (None outside its range).
fn interp_log(c: &Curve, x: f64) -> Option<f64> {
    let k = c.x.iter().position(|&a| a >= x)?;
    if k == 0 {
        return (c.x[0] == x && c.y[0] > 0.0).then(|| c.y[0].ln());
    }
    let (x0, x1, y0, y1) = (c.x[k - 1], c.x[k], c.y[k - 1], c.y[k]);
    if y0 <= 0.0 || y1 <= 0.0 {
        return None;
    }
    let w = (x - x0) / (x1 - x0);
    Some(y0.ln() * (1.0 - w) + y1.ln() * w)
}

/// Collapse quality of several curves over their common x-range.
#[derive(Clone, Debug, Serialize)]
pub struct CollapseResidual {
    /// RMS over grid points of the standard deviation of ln y across curves.
    pub rms_log_spread: f64,
    /// Largest relative spread max(y)/min(y) − 1 at any grid point.
    pub max_relative_spread: f64,
    pub window: (f64, f64),
    pub points: usize,
}

pub fn collapse_residual(curves: &[Curve], lo: f64, hi: f64, n_grid: usize) -> Result<CollapseResidual> {
    if curves.len() < 2 {
        return Err(Error::DegenerateFit("need at least two curves".into()));
    }
    let lo = curves.iter().map(|c| c.x[0]).fold(lo, f64::max);
    let hi = curves.iter().map(|c| *c.x.last().unwrap()).fold(hi, f64::min);
    if hi <= lo {
        return Err(Error::WindowTooShort { lo, hi, points: 0, needed: 2 });
    }
    let mut sum = 0.0;
    let mut worst = 0.0f64;
    let mut used = 0;
    for k in 0..n_grid {
        let x = lo + (hi - lo) * k as f64 / (n_grid - 1).max(1) as f64;
        let vals: Option<Vec<f64>> = curves.iter().map(|c| interp_log(c, x)).collect();
        let Some(vals) = vals else { continue };
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
        sum += var;
        let (mn, mx) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        worst = worst.max((mx - mn).exp() - 1.0);
        used += 1;
    }
    if used < 2 {
        return Err(Error::WindowTooShort { lo, hi, points: used, needed: 2 });
    }
    Ok(CollapseResidual { rms_log_spread: (sum / used as f64).sqrt(), max_relative_spread: worst, window: (lo, hi), points: used })
}

/// Everything extracted from one ensemble series.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub lam: f64,
    pub lam_ci: (f64, f64),
    pub beta: f64,
    pub early: EarlyDecay,
    pub late_window: (f64, f64),
    pub late_r2: f64,
}

pub fn scaling_fit(t: &[f64], mean: &[f64], gap: f64, beta: f64) -> Result<ScalingFit> {
    let late = fit_late_rate(t, mean, gap, beta)?;
    Ok(ScalingFit {
        lam: late.lam,
        lam_ci: late.lam_ci,
        beta,
        early: assess_early_decay(t, mean, gap, 0.98),
        late_window: late.window,
        late_r2: late.r2,
    })
}

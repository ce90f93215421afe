//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use ffprep::fits::{convergence_time, fit_early_exponent, fit_late_rate, rate_unit};
use ffprep::markov::{
    closed_form_avg_energy, EnergyCurve, MarkovParams, RenewalProcess, ResetRule,
};
use ffprep::protocol::{run_ensemble, EnsembleSummary};
use ffprep::resetfree::{
    detectability_bound_check, eigen_correspondence, projection_energy_series, random_orthogonal_states,
};
use ffprep::spectra::{gap_scaling_fit, lowest_pair, SparseHamiltonian};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::output::{ensure_dir, write_json, Table};
use crate::registry::{self, ModelSpec};

fn fit_value<T: Serialize>(r: ffprep::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("serializable fit"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Fit report for an ensemble series.
pub fn series_fits(s: &EnsembleSummary, gap: f64, beta: f64, analysis: &crate::config::AnalysisConfig) -> Value {
    let mut fits = serde_json::Map::new();
    fits.insert("gap".into(), json!(gap));
    fits.insert("beta".into(), json!(beta));
    fits.insert("rate_unit".into(), json!(rate_unit(gap, beta)));
    if analysis.fit_late_rate {
        fits.insert("late_rate_energy".into(), fit_value(fit_late_rate(&s.t, &s.mean_energy, gap, beta)));
        fits.insert("late_rate_infidelity".into(), fit_value(fit_late_rate(&s.t, &s.mean_infidelity, gap, beta)));
    }
    if analysis.fit_early_exponent {
        fits.insert("early_exponent_energy".into(), fit_value(fit_early_exponent(&s.t, &s.mean_energy, gap)));
    }
    if let Some(target) = analysis.target_infidelity {
        fits.insert(
            "convergence_time".into(),
            json!({ "target_infidelity": target, "t_c": fit_value(convergence_time(&s.t, &s.mean_infidelity, target)) }),
        );
    }
    Value::Object(fits)
}

fn model_info(spec: &ModelSpec, m: &ffprep::LayeredModel, gap: f64, beta: f64) -> Value {
    json!({
        "name": spec.name,
        "id": m.id(),
        "dim": m.dim(),
        "system_size": m.system_size(),
        "n_layers": m.n_layers(),
        "n_terms": m.terms().len(),
        "gap": gap,
        "beta": beta,
    })
}

/// Executes an ensemble run and writes series, fits and manifest into the run directory.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    let start = Instant::now();
    let dir = cfg.output.directory.clone();
    ensure_dir(&dir)?;
    let built = registry::build(&cfg.model)?;
    let t_build = start.elapsed().as_secs_f64();
    let gap = registry::gap(&built.model)?;
    let t_gap = start.elapsed().as_secs_f64() - t_build;
    let beta = cfg.analysis.beta.unwrap_or(built.beta);
    let m = &built.model;
    let ens = run_ensemble(m, m.initial_state(), &cfg.protocol, cfg.ensemble.n_trajectories, cfg.ensemble.master_seed)?;
    let t_ens = start.elapsed().as_secs_f64() - t_build - t_gap;
    let s = &ens.summary;

    let mut files = Vec::new();
    for f in &cfg.output.formats {
        match f {
            Format::Csv => {
                Table::from_summary(s).write(&dir.join("series.csv"))?;
                files.push("series.csv");
            }
            Format::Json => {
                write_json(&dir.join("series.json"), s)?;
                files.push("series.json");
            }
        }
    }
    let fits = series_fits(s, gap, beta, &cfg.analysis);
    write_json(&dir.join("fits.json"), &fits)?;
    files.push("fits.json");
    files.push("manifest.json");
    let manifest = json!({
        "command": "run",
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seeds": { "master_seed": cfg.ensemble.master_seed, "n_trajectories": cfg.ensemble.n_trajectories },
        "model": model_info(&cfg.model, m, gap, beta),
        "acceptance_rate": s.acceptance_rate,
        "converged_trajectories": s.convergence_times.len(),
        "threads": rayon::current_num_threads(),
        "wall_times_s": { "build": t_build, "gap": t_gap, "ensemble": t_ens, "total": start.elapsed().as_secs_f64() },
        "fits": fits,
        "files": files,
    });
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(dir)
}

#[derive(Serialize)]
struct GapEntry {
    size: usize,
    dim: usize,
    e0: f64,
    gap: f64,
    degeneracy: usize,
}

/// Exact gaps over a list of linear sizes, with the z fit when at least four sizes are given.
pub fn gap(name: &str, sizes: &[usize], overrides: &toml::Table, allow_large: bool, out: Option<&Path>) -> Result<Value> {
    if sizes.is_empty() {
        bail!("no sizes given");
    }
    let mut entries = Vec::new();
    for &size in sizes {
        let mut parameters = registry::sized(name, size)?;
        parameters.extend(overrides.clone());
        let spec = ModelSpec { name: name.to_string(), parameters, allow_large };
        let m = registry::build(&spec)?.model;
        let g = lowest_pair(&SparseHamiltonian::assemble(&m))?;
        entries.push(GapEntry { size, dim: m.dim(), e0: g.e0, gap: g.gap, degeneracy: g.degeneracy });
    }
    let dim = registry::scaling_dim(name);
    let z = if entries.len() >= 4 {
        let x: Vec<f64> = entries.iter().map(|e| e.size as f64).collect();
        let y: Vec<f64> = entries.iter().map(|e| e.gap).collect();
        fit_value(gap_scaling_fit(&x, &y, dim))
    } else {
        json!({ "omitted": format!("{} sizes, the fit needs at least 4", entries.len()) })
    };
    let report = json!({ "model": name, "scaling_dim": dim, "gaps": entries, "z_fit": z });
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("gaps.json"), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Kernel {
    /// Every reset returns to the initial state.
    Simple,
    /// One branch per layer of the last hit.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Rule {
    TwiceEnergy,
    Survival,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Curve {
    Exact,
    MomentumSum,
    Asymptotic,
}

pub struct MarkovArgs {
    pub dim: usize,
    pub length: usize,
    pub t_max: Option<usize>,
    pub n_trajectories: usize,
    pub rule: Rule,
    pub curve: Curve,
    pub kernel: Kernel,
    pub seed: u64,
}

/// Simulates the single-particle renewal process and tabulates its exact averages and distributions.
pub fn markov(a: &MarkovArgs, dir: &Path) -> Result<()> {
    let start = Instant::now();
    ensure_dir(dir)?;
    let mut p = MarkovParams::single_particle(a.dim, a.length);
    p.rule = match a.rule {
        Rule::TwiceEnergy => ResetRule::TwiceEnergy,
        Rule::Survival => ResetRule::Survival,
    };
    p.energy = match a.curve {
        Curve::Exact => EnergyCurve::Exact { dim: a.dim, length: a.length },
        Curve::MomentumSum => EnergyCurve::MomentumSum { dim: a.dim, length: a.length },
        Curve::Asymptotic => EnergyCurve::Asymptotic,
    };
    p.validate()?;
    let t_max = a.t_max.unwrap_or((3.2 / p.gap).ceil() as usize);
    let process = match a.kernel {
        Kernel::Simple => RenewalProcess::simple(&p, t_max)?,
        Kernel::Exact => {
            if a.rule != Rule::TwiceEnergy || a.curve != Curve::Exact {
                bail!("the exact kernel takes its reset probabilities from the quantum model; drop --rule/--curve");
            }
            RenewalProcess::exact_single_particle(a.dim, a.length, t_max)?
        }
    };
    let run = process.simulate(a.n_trajectories, t_max, a.seed)?;
    let mut series = Table::new();
    series
        .push("t", run.t.clone())
        .push("mean_energy", run.mean_energy.clone())
        .push("sem_energy", run.sem_energy.clone())
        .push("mean_infidelity", run.mean_infidelity.clone())
        .push("sem_infidelity", run.sem_infidelity.clone())
        .push("n_alive", vec![run.n_trajectories as f64; run.t.len()])
        .push("mean_infidelity_bound", run.mean_infidelity_bound.clone());
    series.write(&dir.join("series.csv"))?;

    let exact = process.exact_average(t_max)?;
    let mut ex = Table::new();
    ex.push("t", exact.t.clone())
        .push("energy", exact.energy.clone())
        .push("infidelity", exact.infidelity.clone())
        .push("reset_rate", exact.reset_rate.clone())
        .push("closed_form_energy", exact.t.iter().map(|&t| closed_form_avg_energy(t, &p)).collect());
    ex.write(&dir.join("exact.csv"))?;

    let d = process.reset_distributions();
    let mut dist = Table::new();
    dist.push("tau", (0..d.q.len()).map(|t| t as f64).collect())
        .push("q", d.q.clone())
        .push("q_prime", d.q_prime.clone());
    dist.write(&dir.join("distributions.csv"))?;

    let n = run.reset_counts.len() as f64;
    let manifest = json!({
        "command": "markov",
        "code_version": env!("CARGO_PKG_VERSION"),
        "parameters": {
            "dim": a.dim, "length": a.length, "t_max": t_max, "n_trajectories": a.n_trajectories,
            "rule": format!("{:?}", a.rule), "energy_curve": format!("{:?}", a.curve), "kernel": format!("{:?}", a.kernel),
            "beta": p.beta, "gap": p.gap,
        },
        "seeds": { "master_seed": a.seed },
        "reset_statistics": {
            "q_inf": d.q_inf,
            "mean_resets_exact": d.mean_resets,
            "mean_resets_sampled": run.reset_counts.iter().sum::<usize>() as f64 / n,
            "mean_gap": d.mean_gap,
        },
        "wall_times_s": { "total": start.elapsed().as_secs_f64() },
        "files": ["series.csv", "exact.csv", "distributions.csv", "manifest.json"],
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

pub struct ResetFreeArgs {
    pub rounds: usize,
    pub states: usize,
    pub window: (usize, usize),
    pub dl_trials: usize,
    pub seed: u64,
}

/// Reset-free projection series, and for small sectors the 𝒫̃ correspondence and detectability-lemma check.
pub fn resetfree(spec: &ModelSpec, a: &ResetFreeArgs, dir: &Path) -> Result<()> {
    let start = Instant::now();
    ensure_dir(dir)?;
    let built = registry::build(spec)?;
    let m = &built.model;
    let gap = registry::gap(m)?;
    let steps = projection_energy_series(m, m.initial_state(), a.rounds)?;
    let mut t = Table::new();
    t.push("tau", steps.iter().map(|s| s.tau as f64).collect())
        .push("log_norm", steps.iter().map(|s| s.log_norm).collect())
        .push("energy", steps.iter().map(|s| s.energy).collect())
        .push("ground_overlap", steps.iter().map(|s| s.overlap).collect());
    t.write(&dir.join("projection.csv"))?;
    let tau: Vec<f64> = steps.iter().map(|s| s.tau as f64).collect();
    let energy: Vec<f64> = steps.iter().map(|s| s.energy).collect();
    let mut files = vec!["projection.csv"];
    let mut extra = serde_json::Map::new();
    // Reset-free decay is measured in units of Δ.
    extra.insert("late_rate".into(), fit_value(fit_late_rate(&tau, &energy, gap, 0.5)));
    if a.states > 0 {
        if m.dim() > ffprep::protocol::CHANNEL_BUDGET {
            extra.insert(
                "correspondence".into(),
                json!({ "omitted": format!("dimension {} above the dense limit {}", m.dim(), ffprep::protocol::CHANNEL_BUDGET) }),
            );
        } else {
            let c = eigen_correspondence(m, a.states, a.window)?;
            write_json(&dir.join("correspondence.json"), &c)?;
            files.push("correspondence.json");
        }
    }
    if a.dl_trials > 0 {
        let trials = random_orthogonal_states(m, a.dl_trials, a.seed)?;
        let r = detectability_bound_check(m, &trials, gap)?;
        extra.insert(
            "detectability".into(),
            json!({ "trials": r.entries.len(), "violations": r.violations, "min_slack": r.min_slack, "upper": 1.0 / (1.0 + gap / (r.n_layers * r.n_layers) as f64) }),
        );
    }
    files.push("manifest.json");
    let manifest = json!({
        "command": "resetfree",
        "code_version": env!("CARGO_PKG_VERSION"),
        "model": model_info(spec, m, gap, built.beta),
        "model_spec": spec,
        "rounds": a.rounds,
        "seeds": { "master_seed": a.seed },
        "analysis": Value::Object(extra),
        "wall_times_s": { "total": start.elapsed().as_secs_f64() },
        "files": files,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

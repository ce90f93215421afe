//! Desk-scale data bundles for the figures: one CSV per curve plus `figure.json`.

use std::path::Path;

use anyhow::{bail, Result};
use ffprep::fits::{convergence_time, fit_late_rate};
use ffprep::markov::{MarkovParams, RenewalProcess, ResetRule};
use ffprep::protocol::{run_ensemble, ProtocolConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{ensure_dir, write_json, Table};
use crate::registry::{self, ModelSpec};

pub const FIGURE_IDS: [&str; 8] = ["fig1b", "fig2", "fig3a", "fig3b", "fig4a", "fig4b", "sm-markov", "sm-cluster"];

#[derive(Serialize)]
pub struct FigureSpec {
    pub id: String,
    pub title: String,
    pub panels: Vec<Panel>,
    pub fits: Value,
}

#[derive(Serialize)]
pub struct Panel {
    pub name: String,
    pub x: Axis,
    pub y: Axis,
    pub curves: Vec<CurveRef>,
    pub reference_lines: Vec<ReferenceLine>,
}

#[derive(Serialize)]
pub struct Axis {
    pub column: String,
    pub label: String,
    pub scale: &'static str,
}

#[derive(Serialize)]
pub struct CurveRef {
    pub csv: String,
    pub label: String,
    /// Scalars the transforms refer to.
    pub n: f64,
    pub gap: f64,
}

#[derive(Serialize)]
pub struct ReferenceLine {
    /// `power` for y ∝ x^value, `exponential` for y ∝ e^{−value·x}.
    pub kind: &'static str,
    pub value: f64,
    pub annotation: String,
}

fn axis(column: &str, label: &str, scale: &'static str) -> Axis {
    Axis { column: column.into(), label: label.into(), scale }
}

fn spec(name: &str, params: &[(&str, i64)]) -> ModelSpec {
    let parameters = params.iter().map(|(k, v)| (k.to_string(), toml::Value::Integer(*v))).collect();
    ModelSpec { name: name.into(), parameters, allow_large: false }
}

pub struct FigureOptions {
    pub n_trajectories: usize,
    pub seed: u64,
}

struct Series {
    label: String,
    csv: String,
    n: f64,
    gap: f64,
    t: Vec<f64>,
    energy: Vec<f64>,
}

/// x and y of the energy collapse for β = d/z.
fn collapse(t: &[f64], e: &[f64], n: f64, gap: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    if (beta - 1.0).abs() < 1e-12 {
        let l = gap.ln().abs();
        (t.iter().map(|t| t * gap / l).collect(), e.iter().map(|e| e * l / n).collect())
    } else {
        let q = (1.0 - beta).max(0.0);
        (t.iter().map(|t| t * gap).collect(), e.iter().map(|e| e / (n * gap.powf(q))).collect())
    }
}

fn collapse_label(beta: f64) -> (String, String) {
    if (beta - 1.0).abs() < 1e-12 {
        ("Δt/|log Δ|".into(), "Ē·|log Δ|/N".into())
    } else {
        ("Δt".into(), format!("Ē/(N·Δ^{})", (1.0 - beta).max(0.0)))
    }
}

/// Runs one ensemble per model and writes its series with collapse columns.
fn ensembles(models: &[(ModelSpec, String)], beta: f64, span: f64, o: &FigureOptions, dir: &Path) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    for (k, (spec, label)) in models.iter().enumerate() {
        let m = registry::build(spec)?.model;
        let gap = registry::gap(&m)?;
        let n = if spec.name == "heisenberg_single_particle" { 1.0 } else { m.system_size() as f64 };
        let rounds = (span / gap).ceil() as usize;
        let s = run_ensemble(&m, m.initial_state(), &ProtocolConfig::rounds(rounds), o.n_trajectories, o.seed + k as u64)?.summary;
        let (x, y) = collapse(&s.t, &s.mean_energy, n, gap, beta);
        let csv = format!("{}.csv", label.replace(['×', ' ', '='], "_"));
        let mut table = Table::from_summary(&s);
        table.push("x_scaled", x).push("y_scaled", y);
        table.write(&dir.join(&csv))?;
        out.push(Series { label: label.clone(), csv, n, gap, t: s.t, energy: s.mean_energy });
    }
    Ok(out)
}

fn curve_refs(series: &[Series]) -> Vec<CurveRef> {
    series.iter().map(|s| CurveRef { csv: s.csv.clone(), label: s.label.clone(), n: s.n, gap: s.gap }).collect()
}

fn late_rates(series: &[Series], beta: f64) -> Value {
    let mut m = serde_json::Map::new();
    for s in series {
        let v = match fit_late_rate(&s.t, &s.energy, s.gap, beta) {
            Ok(f) => json!({ "lambda": f.lam, "lambda_ci": f.lam_ci, "r2": f.r2, "window": f.window }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        m.insert(s.label.clone(), v);
    }
    json!({ "beta": beta, "late_rate_energy": m })
}

fn collapse_figure(id: &str, title: &str, models: Vec<(ModelSpec, String)>, beta: f64, o: &FigureOptions, dir: &Path) -> Result<FigureSpec> {
    let series = ensembles(&models, beta, 3.2, o, dir)?;
    let (xl, yl) = collapse_label(beta);
    let fits = late_rates(&series, beta);
    let lam = fits["late_rate_energy"].as_object().and_then(|m| m.values().find_map(|v| v["lambda"].as_f64())).unwrap_or(1.0);
    Ok(FigureSpec {
        id: id.into(),
        title: title.into(),
        panels: vec![Panel {
            name: "energy collapse".into(),
            x: axis("x_scaled", &xl, "linear"),
            y: axis("y_scaled", &yl, "log"),
            curves: curve_refs(&series),
            reference_lines: vec![ReferenceLine { kind: "exponential", value: lam, annotation: format!("λ = {lam:.2}") }],
        }],
        fits,
    })
}

fn fig1b(o: &FigureOptions, dir: &Path) -> Result<FigureSpec> {
    let families: Vec<(&str, Vec<ModelSpec>)> = vec![
        ("single_particle", [16, 32, 64].map(|n| spec("heisenberg_single_particle", &[("length", n)])).to_vec()),
        ("heisenberg_chain", [8, 10, 12].map(|n| spec("heisenberg_chain", &[("n", n)])).to_vec()),
        ("fredkin", [8, 10, 12].map(|n| spec("fredkin", &[("n", n)])).to_vec()),
        ("qdm", vec![spec("qdm", &[("lx", 4), ("ly", 4)]), spec("qdm", &[("lx", 4), ("ly", 6)])]),
        ("cluster_ising", [6, 9, 12].map(|n| spec("cluster_ising", &[("n", n)])).to_vec()),
    ];
    let target = 0.2;
    let mut curves = Vec::new();
    for (k, (family, specs)) in families.iter().enumerate() {
        let (mut inv_gap, mut tc, mut sizes) = (Vec::new(), Vec::new(), Vec::new());
        for (j, s) in specs.iter().enumerate() {
            let m = registry::build(s)?.model;
            let gap = registry::gap(&m)?;
            let rounds = (8.0 / gap).ceil() as usize;
            let seed = o.seed + (100 * k + j) as u64;
            let sum = run_ensemble(&m, m.initial_state(), &ProtocolConfig::rounds(rounds), o.n_trajectories, seed)?.summary;
            inv_gap.push(1.0 / gap);
            tc.push(convergence_time(&sum.t, &sum.mean_infidelity, target).unwrap_or(f64::NAN));
            sizes.push(m.system_size() as f64);
        }
        let csv = format!("{family}.csv");
        let mut t = Table::new();
        t.push("n", sizes).push("inv_gap", inv_gap).push("t_c", tc);
        t.write(&dir.join(&csv))?;
        curves.push(CurveRef { csv, label: family.to_string(), n: f64::NAN, gap: f64::NAN });
    }
    Ok(FigureSpec {
        id: "fig1b".into(),
        title: format!("preparation time at infidelity {target} against inverse gap"),
        panels: vec![Panel {
            name: "T_c vs 1/Δ".into(),
            x: axis("inv_gap", "1/Δ", "log"),
            y: axis("t_c", "T_c", "log"),
            curves,
            reference_lines: vec![ReferenceLine { kind: "power", value: 1.0, annotation: "T_c ∝ 1/Δ".into() }],
        }],
        fits: json!({ "target_infidelity": target }),
    })
}

fn fig2(o: &FigureOptions, dir: &Path) -> Result<FigureSpec> {
    let models: Vec<(ModelSpec, String)> =
        [16, 32, 64].iter().map(|&n| (spec("heisenberg_single_particle", &[("length", n)]), format!("N={n}"))).collect();
    let series = ensembles(&models, 0.5, 3.2, o, dir)?;
    let fits = late_rates(&series, 0.5);
    let refs = curve_refs(&series);
    let again = || curve_refs(&series);
    Ok(FigureSpec {
        id: "fig2".into(),
        title: "single particle, d = 1".into(),
        panels: vec![
            Panel {
                name: "a: energy collapse".into(),
                x: axis("x_scaled", "Δt", "linear"),
                y: axis("y_scaled", "Ē/√Δ", "log"),
                curves: refs,
                reference_lines: vec![ReferenceLine { kind: "exponential", value: 1.0, annotation: "e^{−Δt}".into() }],
            },
            Panel {
                name: "b: early-time energy".into(),
                x: axis("t", "t", "log"),
                y: axis("mean_energy", "Ē", "log"),
                curves: again(),
                reference_lines: vec![ReferenceLine { kind: "power", value: -0.5, annotation: "t^{−1/2}".into() }],
            },
            Panel {
                name: "c: infidelity".into(),
                x: axis("x_scaled", "Δt", "linear"),
                y: axis("mean_infidelity", "ε̄", "log"),
                curves: again(),
                reference_lines: vec![ReferenceLine { kind: "exponential", value: 1.0, annotation: "e^{−Δt}".into() }],
            },
        ],
        fits,
    })
}

fn sm_markov(o: &FigureOptions, dir: &Path) -> Result<FigureSpec> {
    let mut curves = Vec::new();
    for (dim, length) in [(1usize, 64usize), (1, 256), (2, 16)] {
        let mut p = MarkovParams::single_particle(dim, length);
        p.rule = ResetRule::Survival;
        let t_max = (3.0 / p.gap).ceil() as usize;
        let d = RenewalProcess::simple(&p, t_max)?.reset_distributions();
        let run = RenewalProcess::simple(&p, t_max)?.simulate(o.n_trajectories, t_max, o.seed + (dim * 1000 + length) as u64)?;
        // The first gap of each trajectory samples Q′ directly.
        let mut hist = vec![0.0; t_max + 1];
        for first in run.gaps.iter().filter_map(|g| g.first()) {
            hist[(*first).min(t_max)] += 1.0;
        }
        let total = run.gaps.len() as f64;
        let csv = format!("d{dim}_N{length}.csv");
        let mut t = Table::new();
        t.push("tau", (0..=t_max).map(|x| x as f64).collect())
            .push("q", d.q.clone())
            .push("q_prime", d.q_prime.clone())
            .push("q_prime_sampled", hist.iter().map(|h| h / total).collect());
        t.write(&dir.join(&csv))?;
        curves.push(CurveRef { csv, label: format!("d={dim}, L={length}"), n: 1.0, gap: p.gap });
    }
    Ok(FigureSpec {
        id: "sm-markov".into(),
        title: "first-reset time distribution".into(),
        panels: vec![Panel {
            name: "Q′(τ)".into(),
            x: axis("tau", "τ", "log"),
            y: axis("q_prime", "Q′(τ)", "log"),
            curves,
            reference_lines: vec![
                ReferenceLine { kind: "power", value: -1.5, annotation: "τ^{−3/2}".into() },
                ReferenceLine { kind: "power", value: -2.0, annotation: "τ^{−2}".into() },
            ],
        }],
        fits: json!({}),
    })
}

/// Runs the figure `id` and writes its bundle into `dir`.
pub fn figure(id: &str, o: &FigureOptions, dir: &Path) -> Result<FigureSpec> {
    ensure_dir(dir)?;
    let chain = |ns: &[i64]| ns.iter().map(|&n| (spec("heisenberg_chain", &[("n", n)]), format!("N={n}"))).collect::<Vec<_>>();
    let fig = match id {
        "fig1b" => fig1b(o, dir)?,
        "fig2" => fig2(o, dir)?,
        "fig3a" => collapse_figure(id, "1D Heisenberg chain", chain(&[8, 12, 16]), 0.5, o, dir)?,
        "fig3b" => {
            let m = [(2, 4), (3, 4), (4, 4)].map(|(x, y)| (spec("heisenberg_2d", &[("lx", x), ("ly", y)]), format!("{x}x{y}")));
            collapse_figure(id, "2D Heisenberg model, open boundaries", m.to_vec(), 1.0, o, dir)?
        }
        "fig4a" => {
            let m = [8, 10, 12].map(|n| (spec("fredkin", &[("n", n)]), format!("N={n}")));
            collapse_figure(id, "Fredkin chain", m.to_vec(), 3.0 / 8.0, o, dir)?
        }
        "fig4b" => {
            let m = [(2, 4), (4, 4)].map(|(x, y)| (spec("qdm", &[("lx", x), ("ly", y)]), format!("{x}x{y}")));
            collapse_figure(id, "quantum dimer model, open boundaries", m.to_vec(), 0.5, o, dir)?
        }
        "sm-markov" => sm_markov(o, dir)?,
        "sm-cluster" => {
            let m = [9, 12].map(|n| (spec("cluster_ising", &[("n", n)]), format!("N={n}")));
            collapse_figure(id, "cluster-Ising ring", m.to_vec(), 0.5, o, dir)?
        }
        other => bail!("unknown figure `{other}`; valid figures: {}", FIGURE_IDS.join(", ")),
    };
    write_json(&dir.join("figure.json"), &fig)?;
    Ok(fig)
}

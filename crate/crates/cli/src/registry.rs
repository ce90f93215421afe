//! Model names, their parameters and desk-scale caps.

use anyhow::{anyhow, bail, Context, Result};
use ffprep::basis::DEFAULT_BUDGET;
use ffprep::models::{
    build_cluster_ising, build_fredkin_in, build_heisenberg_2d_in, build_heisenberg_chain_in,
    build_heisenberg_single_particle, build_qdm_in,
};
use ffprep::LayeredModel;
use serde::{Deserialize, Serialize};

/// Largest sector built without `allow_large`.
pub const DESK_CAP: usize = 20_000;

pub const MODEL_NAMES: [&str; 6] =
    ["heisenberg_chain", "heisenberg_single_particle", "heisenberg_2d", "fredkin", "qdm", "cluster_ising"];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub parameters: toml::Table,
    #[serde(default)]
    pub allow_large: bool,
}

/// Values the analysis needs beyond the model itself.
pub struct BuiltModel {
    pub model: LayeredModel,
    /// β = d/z used for rate units and collapses.
    pub beta: f64,
}

struct Params<'a> {
    model: &'a str,
    table: &'a toml::Table,
    allowed: &'static [&'static str],
}

impl<'a> Params<'a> {
    fn new(model: &'a str, table: &'a toml::Table, allowed: &'static [&'static str]) -> Result<Self> {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!("model {model}: unknown parameter `{key}` (valid: {})", allowed.join(", "));
            }
        }
        Ok(Self { model, table, allowed })
    }

    fn usize(&self, key: &str, default: Option<usize>) -> Result<usize> {
        debug_assert!(self.allowed.contains(&key));
        match self.table.get(key) {
            None => default.ok_or_else(|| anyhow!("model {}: missing parameter `{key}`", self.model)),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
            Some(v) => bail!("model {}: parameter `{key}` must be a non-negative integer, got {v}", self.model),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(v) => bail!("model {}: parameter `{key}` must be a boolean, got {v}", self.model),
        }
    }
}

fn cap(allow_large: bool) -> usize {
    if allow_large {
        DEFAULT_BUDGET
    } else {
        DESK_CAP
    }
}

fn check_size(what: &str, dim: usize, allow_large: bool) -> Result<()> {
    let budget = cap(allow_large);
    if dim > budget {
        bail!("{what}: dimension {dim} exceeds the desk-scale cap {budget}; set allow_large = true to override");
    }
    Ok(())
}

fn with_cap_hint<T>(r: ffprep::Result<T>, allow_large: bool) -> Result<T> {
    r.map_err(|e| match e {
        ffprep::Error::Capacity { .. } if !allow_large => anyhow!("{e}; set allow_large = true to lift the desk-scale cap"),
        e => anyhow!(e),
    })
}

pub fn build(spec: &ModelSpec) -> Result<BuiltModel> {
    let large = spec.allow_large;
    let budget = cap(large);
    let t = &spec.parameters;
    let name = spec.name.as_str();
    let built = match name {
        "heisenberg_chain" => {
            let p = Params::new(name, t, &["n", "periodic", "n_up"])?;
            let n = p.usize("n", None)?;
            let model = with_cap_hint(build_heisenberg_chain_in(n, p.bool("periodic", true)?, Some(p.usize("n_up", Some(n / 2))?), budget), large)?;
            BuiltModel { model, beta: 0.5 }
        }
        "heisenberg_single_particle" => {
            let p = Params::new(name, t, &["dim", "length"])?;
            let (dim, length) = (p.usize("dim", Some(1))?, p.usize("length", None)?);
            check_size("single-particle lattice", length.checked_pow(dim as u32).unwrap_or(usize::MAX), large)?;
            BuiltModel { model: build_heisenberg_single_particle(dim, length)?, beta: dim as f64 / 2.0 }
        }
        "heisenberg_2d" => {
            let p = Params::new(name, t, &["lx", "ly", "open", "n_up"])?;
            let (lx, ly) = (p.usize("lx", None)?, p.usize("ly", None)?);
            let model = with_cap_hint(build_heisenberg_2d_in(lx, ly, p.bool("open", true)?, p.usize("n_up", Some(lx * ly / 2))?, budget), large)?;
            BuiltModel { model, beta: 1.0 }
        }
        "fredkin" => {
            let p = Params::new(name, t, &["n"])?;
            BuiltModel { model: with_cap_hint(build_fredkin_in(p.usize("n", None)?, budget), large)?, beta: 3.0 / 8.0 }
        }
        "qdm" => {
            let p = Params::new(name, t, &["lx", "ly"])?;
            BuiltModel { model: with_cap_hint(build_qdm_in(p.usize("lx", None)?, p.usize("ly", None)?, budget), large)?, beta: 0.5 }
        }
        "cluster_ising" => {
            let p = Params::new(name, t, &["n"])?;
            let n = p.usize("n", None)?;
            check_size("cluster-Ising ring", 1usize.checked_shl(n as u32).unwrap_or(usize::MAX), large)?;
            BuiltModel { model: build_cluster_ising(n)?, beta: 0.5 }
        }
        other => bail!("unknown model `{other}`; valid models: {}", MODEL_NAMES.join(", ")),
    };
    Ok(built)
}

/// Parameters for `name` at linear size `size`, the axis swept by `gap`.
pub fn sized(name: &str, size: usize) -> Result<toml::Table> {
    let mut t = toml::Table::new();
    let key = match name {
        "heisenberg_chain" | "fredkin" | "cluster_ising" => "n",
        "heisenberg_single_particle" => "length",
        "heisenberg_2d" | "qdm" => {
            t.insert("lx".into(), toml::Value::Integer(size as i64));
            "ly"
        }
        other => bail!("unknown model `{other}`; valid models: {}", MODEL_NAMES.join(", ")),
    };
    t.insert(key.into(), toml::Value::Integer(size as i64));
    Ok(t)
}

/// Spatial dimension entering Δ ∝ N^{−z/d}, with N the linear size passed to [`sized`].
pub fn scaling_dim(name: &str) -> usize {
    match name {
        "heisenberg_2d" | "qdm" => 2,
        _ => 1,
    }
}

/// Parses `key=value` overrides as TOML scalars.
pub fn parse_overrides(pairs: &[String]) -> Result<toml::Table> {
    let mut t = toml::Table::new();
    for pair in pairs {
        let (k, v) = pair.split_once('=').with_context(|| format!("parameter `{pair}` is not key=value"))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {v}"))
            .with_context(|| format!("parameter `{k}`: cannot parse `{v}`"))?
            .remove("v")
            .expect("parsed key");
        t.insert(k.trim().to_string(), value);
    }
    Ok(t)
}

/// Exact gap; the single-particle model uses its dispersion.
pub fn gap(model: &LayeredModel) -> Result<f64> {
    if let Some(d) = model.dispersion() {
        return Ok(d.gap());
    }
    let h = ffprep::spectra::SparseHamiltonian::assemble(model);
    Ok(ffprep::spectra::lowest_pair(&h)?.gap)
}

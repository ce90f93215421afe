//! The measurement-feedback loop: rounds, trajectories, ensembles and the
//! exact averaged channel for small sectors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LayeredModel;
use crate::num::{czero, Complex, Real};
use crate::pauli::PauliString;
use crate::statevec::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    #[default]
    Deterministic,
    /// Uniform Pauli string on the violated term's support.
    RandomPauli,
    /// Measurement only.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub max_rounds: usize,
    /// Stop after this many consecutive rounds without a 1-outcome; 0 disables.
    pub stop_clean_rounds: usize,
    pub record_every: usize,
    /// Probability of a Z error per site after each layer.
    pub dephasing_p: f64,
    pub postselect_max_hits: Option<usize>,
    /// Count only hits in the last this many rounds; None counts the whole history.
    pub postselect_window: Option<usize>,
    pub correction_mode: CorrectionMode,
    pub dephasing_scope: DephasingScope,
}

/// Sites exposed to dephasing after a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DephasingScope {
    AllSites,
    /// Only sites in the support of the layer's terms.
    #[default]
    LayerSupport,
}

fn layer_sites<T: Real>(model: &LayeredModel<T>, scope: DephasingScope) -> Vec<Vec<usize>> {
    let n = model.basis().n_sites();
    model
        .layers()
        .iter()
        .map(|terms| match scope {
            DephasingScope::AllSites => (0..n).collect(),
            DephasingScope::LayerSupport => {
                let mut s: Vec<usize> = terms.iter().flat_map(|&i| model.terms()[i].support.iter().copied()).collect();
                s.sort_unstable();
                s.dedup();
                s
            }
        })
        .collect()
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            stop_clean_rounds: 0,
            record_every: 1,
            dephasing_p: 0.0,
            postselect_max_hits: None,
            postselect_window: None,
            correction_mode: CorrectionMode::Deterministic,
            dephasing_scope: DephasingScope::LayerSupport,
        }
    }
}

impl ProtocolConfig {
    pub fn rounds(max_rounds: usize) -> Self {
        Self { max_rounds, ..Self::default() }
    }

    pub fn postselection(&self) -> Option<Postselection> {
        self.postselect_max_hits.map(|max_hits| Postselection { max_hits, window: self.postselect_window })
    }

    pub fn validate(&self) -> Result<()> {
        if self.postselect_window == Some(0) {
            return Err(Error::InvalidParameter("postselect_window must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidParameter("max_rounds must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dephasing_p) {
            return Err(Error::InvalidParameter(format!("dephasing_p = {} outside [0, 1)", self.dephasing_p)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HitEvent {
    pub round: usize,
    pub layer: usize,
    pub term: usize,
}

/// Per-trajectory seed derived from the master seed.
pub fn stable_hash(master_seed: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(master_seed) ^ index)
}

pub fn trajectory_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One round: every layer in order, terms ascending, feedback on each hit.
/// Returns the 1-outcome events with `round` set to `round_index`.
pub fn run_round<T: Real>(
    state: &mut StateVector<T>,
    model: &LayeredModel<T>,
    cfg: &ProtocolConfig,
    round_index: usize,
    rng: &mut impl Rng,
) -> Result<Vec<HitEvent>> {
    let mut hits = Vec::new();
    let exposed = if cfg.dephasing_p > 0.0 { layer_sites(model, cfg.dephasing_scope) } else { Vec::new() };
    for (layer, terms) in model.layers().iter().enumerate() {
        for &i in terms {
            let m = state.measure(model.plan(i), i, rng)?;
            if m.outcome == 1 {
                hits.push(HitEvent { round: round_index, layer, term: i });
                match cfg.correction_mode {
                    CorrectionMode::Deterministic => state.apply_pauli(&model.terms()[i].correction)?,
                    CorrectionMode::RandomPauli => {
                        let all = PauliString::all_on(&model.terms()[i].support);
                        let pick = rng.random_range(0..all.len());
                        state.apply_pauli(&all[pick])?;
                    }
                    CorrectionMode::Disabled => {}
                }
            }
        }
        if cfg.dephasing_p > 0.0 {
            for &site in &exposed[layer] {
                if rng.random::<f64>() < cfg.dephasing_p {
                    state.apply_z(site);
                }
            }
        }
    }
    Ok(hits)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub rounds_run: usize,
    pub converged: bool,
    pub record_every: usize,
    /// Values at rounds 0, record_every, 2·record_every, ...
    pub energies: Vec<f64>,
    pub infidelities: Vec<f64>,
    pub hit_events: Vec<HitEvent>,
    /// Rounds between successive reset rounds, the first measured from round 0.
    pub reset_gaps: Vec<usize>,
    pub accepted: bool,
}

impl TrajectoryRecord {
    pub fn n_hits(&self) -> usize {
        self.hit_events.len()
    }

    /// Rounds containing at least one 1-outcome.
    pub fn reset_rounds(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.hit_events.iter().map(|h| h.round).collect();
        r.dedup();
        r
    }

    pub fn hits_up_to(&self, round: usize) -> usize {
        self.hit_events.partition_point(|h| h.round <= round)
    }

    /// Hits in rounds (round − window, round], or up to `round` without a window.
    pub fn hits_in_window(&self, round: usize, window: Option<usize>) -> usize {
        let lo = window.map_or(0, |w| round.saturating_sub(w) + 1);
        self.hits_up_to(round) - self.hit_events.partition_point(|h| h.round < lo)
    }

    pub fn rounds_since_last_reset(&self) -> usize {
        self.rounds_run - self.reset_rounds().last().copied().unwrap_or(0)
    }
}

pub fn run_trajectory<T: Real>(
    model: &LayeredModel<T>,
    init: &StateVector<T>,
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if !init.same_basis(model.basis()) {
        return Err(Error::BasisMismatch);
    }
    let mut rng = trajectory_rng(seed);
    let mut state = init.clone();
    let observe = |s: &StateVector<T>| -> Result<(f64, f64)> {
        Ok((model.energy(s)?.as_f64(), 1.0 - model.ground_overlap(s)?.as_f64()))
    };
    let (e0, f0) = observe(&state)?;
    let mut energies = vec![e0];
    let mut infidelities = vec![f0];
    let mut hit_events = Vec::new();
    let mut reset_gaps = Vec::new();
    let mut last_reset = 0;
    let mut clean = 0;
    let mut converged = false;
    let mut rounds_run = 0;
    for round in 1..=cfg.max_rounds {
        let hits = run_round(&mut state, model, cfg, round, &mut rng)?;
        rounds_run = round;
        if hits.is_empty() {
            clean += 1;
        } else {
            clean = 0;
            reset_gaps.push(round - last_reset);
            last_reset = round;
            hit_events.extend(hits);
        }
        if round % cfg.record_every == 0 {
            let (e, f) = observe(&state)?;
            energies.push(e);
            infidelities.push(f);
        }
        if cfg.stop_clean_rounds > 0 && clean >= cfg.stop_clean_rounds {
            converged = true;
            break;
        }
    }
    let mut rec = TrajectoryRecord {
        seed,
        rounds_run,
        converged,
        record_every: cfg.record_every,
        energies,
        infidelities,
        hit_events,
        reset_gaps,
        accepted: true,
    };
    rec.accepted = cfg.postselection().is_none_or(|p| p.accepts(&rec, rec.rounds_run));
    Ok(rec)
}

/// Accept a trajectory at a given round iff its hit count is within `max_hits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Postselection {
    pub max_hits: usize,
    pub window: Option<usize>,
}

impl Postselection {
    pub fn accepts(&self, r: &TrajectoryRecord, round: usize) -> bool {
        r.hits_in_window(round, self.window) <= self.max_hits
    }
}

/// Trajectory-averaged series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub t: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub sem_energy: Vec<f64>,
    pub mean_infidelity: Vec<f64>,
    pub sem_infidelity: Vec<f64>,
    /// Trajectories not yet rejected by postselection at each recorded time.
    pub n_alive: Vec<usize>,
    pub acceptance_rate: f64,
    /// Round at which each converged trajectory stopped.
    pub convergence_times: Vec<usize>,
}

fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

impl EnsembleSummary {
    /// Averages records that share `record_every`. Trajectories that stopped
    /// early hold their last recorded values. With `postselect`, each time
    /// averages only trajectories accepted at that round.
    pub fn from_records(records: &[TrajectoryRecord], postselect: Option<Postselection>) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::InvalidParameter("no trajectories".into()))?;
        let stride = first.record_every;
        if records.iter().any(|r| r.record_every != stride) {
            return Err(Error::InvalidParameter("records use different strides".into()));
        }
        let len = records.iter().map(|r| r.energies.len()).max().unwrap_or(0);
        let mut s = EnsembleSummary {
            n_trajectories: records.len(),
            t: (0..len).map(|k| (k * stride) as f64).collect(),
            mean_energy: Vec::with_capacity(len),
            sem_energy: Vec::with_capacity(len),
            mean_infidelity: Vec::with_capacity(len),
            sem_infidelity: Vec::with_capacity(len),
            n_alive: Vec::with_capacity(len),
            acceptance_rate: 0.0,
            convergence_times: records.iter().filter(|r| r.converged).map(|r| r.rounds_run).collect(),
        };
        for k in 0..len {
            let round = k * stride;
            let alive: Vec<&TrajectoryRecord> =
                records.iter().filter(|r| postselect.is_none_or(|p| p.accepts(r, round))).collect();
            let pick = |v: &Vec<f64>| v.get(k).or(v.last()).copied().unwrap_or(f64::NAN);
            let e: Vec<f64> = alive.iter().map(|r| pick(&r.energies)).collect();
            let f: Vec<f64> = alive.iter().map(|r| pick(&r.infidelities)).collect();
            let (me, se) = mean_sem(&e);
            let (mf, sf) = mean_sem(&f);
            s.mean_energy.push(me);
            s.sem_energy.push(se);
            s.mean_infidelity.push(mf);
            s.sem_infidelity.push(sf);
            s.n_alive.push(alive.len());
        }
        let accepted = records.iter().filter(|r| postselect.is_none_or(|p| p.accepts(r, r.rounds_run))).count();
        s.acceptance_rate = accepted as f64 / records.len() as f64;
        Ok(s)
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub records: Vec<TrajectoryRecord>,
    pub summary: EnsembleSummary,
}

/// Independent trajectories seeded by `stable_hash(master_seed, i)`.
pub fn run_ensemble<T: Real>(
    model: &LayeredModel<T>,
    init: &StateVector<T>,
    cfg: &ProtocolConfig,
    n_traj: usize,
    master_seed: u64,
) -> Result<Ensemble> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    let records = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(model, init, cfg, stable_hash(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let summary = EnsembleSummary::from_records(&records, cfg.postselection())?;
    Ok(Ensemble { records, summary })
}

/// Smallest hit threshold accepting at least `rate` of the pilot trajectories
/// at their final round.
pub fn postselect_threshold(pilot: &[TrajectoryRecord], rate: f64, window: Option<usize>) -> Result<usize> {
    if pilot.is_empty() || !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter("need pilot trajectories and a rate in [0, 1]".into()));
    }
    let mut hits: Vec<usize> = pilot.iter().map(|r| r.hits_in_window(r.rounds_run, window)).collect();
    hits.sort_unstable();
    let k = ((rate * hits.len() as f64).ceil() as usize).clamp(1, hits.len());
    Ok(hits[k - 1])
}

/// Observables of the round-averaged density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelPoint {
    pub round: usize,
    pub ground_overlap: f64,
    pub energy: f64,
    pub trace: f64,
}

pub fn pure_density<T: Real>(state: &StateVector<T>) -> DMatrix<Complex<T>> {
    let a = state.amplitudes();
    DMatrix::from_fn(a.len(), a.len(), |r, c| a[r] * a[c].conj())
}

/// Dense budget for the exact channel.
pub const CHANNEL_BUDGET: usize = 4096;

/// Index map of a Pauli string on the basis: image ordinal and phase per column.
fn pauli_map<T: Real>(model: &LayeredModel<T>, p: &PauliString) -> Result<Vec<(usize, Complex<T>)>> {
    let b = model.basis();
    b.configs()
        .iter()
        .map(|c| {
            let (img, f) = p.act::<T>(c);
            let j = b.index_of(&img).ok_or_else(|| Error::SectorEscape(c.to_bit_string(b.n_sites())))?;
            Ok((j, f))
        })
        .collect()
}

/// U·M for a Pauli map U.
fn pauli_left<T: Real>(map: &[(usize, Complex<T>)], m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let mut out = DMatrix::from_element(m.nrows(), m.ncols(), czero());
    for c in 0..m.ncols() {
        for (r, &(j, f)) in map.iter().enumerate() {
            out[(j, c)] = f * m[(r, c)];
        }
    }
    out
}

/// U·M·U† for hermitian M.
fn pauli_conjugate<T: Real>(map: &[(usize, Complex<T>)], m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let x = pauli_left(map, m);
    pauli_left(map, &x.adjoint()).adjoint()
}

fn project_columns<T: Real>(plan: &crate::statevec::TermPlan<T>, m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let mut out = m.clone();
    let n = m.nrows();
    for col in out.as_mut_slice().chunks_exact_mut(n) {
        plan.project(col);
    }
    out
}

fn observe<T: Real>(model: &LayeredModel<T>, rho: &DMatrix<Complex<T>>, round: usize) -> ChannelPoint {
    let n = rho.nrows();
    let trace = (0..n).fold(0.0, |a, k| a + rho[(k, k)].re.as_f64());
    let mut overlap = 0.0;
    for g in model.ground_space() {
        let v = g.amplitudes();
        let mut acc = czero::<T>();
        for c in 0..n {
            if v[c] == czero() {
                continue;
            }
            let mut col = czero::<T>();
            for r in 0..n {
                col += v[r].conj() * rho[(r, c)];
            }
            acc += col * v[c];
        }
        overlap += acc.re.as_f64();
    }
    let mut energy = 0.0;
    for plan in model.plans() {
        let p = project_columns(plan, rho);
        energy += (0..n).fold(0.0, |a, k| a + p[(k, k)].re.as_f64());
    }
    ChannelPoint { round, ground_overlap: overlap, energy, trace }
}

/// Applies the outcome-averaged round map `n_rounds` times; returns the
/// observables at rounds 0..=n_rounds.
pub fn evolve_channel_exact<T: Real>(
    model: &LayeredModel<T>,
    rho0: &DMatrix<Complex<T>>,
    cfg: &ProtocolConfig,
    n_rounds: usize,
) -> Result<Vec<ChannelPoint>> {
    let n = model.dim();
    if n > CHANNEL_BUDGET {
        return Err(Error::Capacity { what: "exact channel".into(), dim: n, budget: CHANNEL_BUDGET });
    }
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::BasisMismatch);
    }
    let corrections: Vec<Vec<Vec<(usize, Complex<T>)>>> = model
        .terms()
        .iter()
        .map(|t| match cfg.correction_mode {
            CorrectionMode::Deterministic => Ok(vec![pauli_map(model, &t.correction)?]),
            CorrectionMode::RandomPauli => {
                PauliString::all_on(&t.support).iter().map(|p| pauli_map(model, p)).collect()
            }
            CorrectionMode::Disabled => Ok(Vec::new()),
        })
        .collect::<Result<_>>()?;
    let z_signs: Vec<Vec<bool>> = (0..model.basis().n_sites())
        .map(|s| model.basis().configs().iter().map(|c| c.get(s)).collect())
        .collect();
    let exposed = layer_sites(model, cfg.dephasing_scope);
    let mut rho = rho0.clone();
    let mut out = vec![observe(model, &rho, 0)];
    for round in 1..=n_rounds {
        for (a, layer) in model.layers().iter().enumerate() {
            for &i in layer {
                let a = project_columns(model.plan(i), &rho);
                let b = project_columns(model.plan(i), &a.adjoint());
                let mut next = &rho - &a - a.adjoint() + &b;
                match cfg.correction_mode {
                    CorrectionMode::Disabled => next += &b,
                    _ => {
                        let w = T::one() / T::of(corrections[i].len() as f64);
                        for map in &corrections[i] {
                            next += pauli_conjugate(map, &b).map(|z| z.scale(w));
                        }
                    }
                }
                rho = next;
            }
            if cfg.dephasing_p > 0.0 {
                let p = T::of(cfg.dephasing_p);
                for &site in &exposed[a] {
                    let signs = &z_signs[site];
                    for c in 0..n {
                        for r in 0..n {
                            if signs[r] != signs[c] {
                                rho[(r, c)] = rho[(r, c)].scale(T::one() - p - p);
                            }
                        }
                    }
                }
            }
        }
        out.push(observe(model, &rho, round));
    }
    Ok(out)
}

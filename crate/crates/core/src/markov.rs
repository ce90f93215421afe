//! The single-particle reset process: imaginary-time rounds interrupted by
//! stochastic resets, as closed forms, exact renewal sums and Monte-Carlo.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fits::rate_unit;
use crate::models::{build_heisenberg_single_particle, LayeredModel};
use crate::protocol::{stable_hash, trajectory_rng};
use crate::resetfree::{projection_energy_series, ProjectionRound};
use crate::statevec::StateVector;

/// Source of the reset-free energy e(τ).
#[derive(Clone, Debug, PartialEq)]
pub enum EnergyCurve {
    /// β/(2τ) up to τ = 1/Δ, then (βΔ/2)·e^{−4(Δτ−1)}.
    Asymptotic,
    /// Plane-wave sum with weights e^{−4ε(k)τ}.
    MomentumSum { dim: usize, length: usize },
    /// Tabulated from the projection rounds of the single-particle model.
    Exact { dim: usize, length: usize },
    Table(Vec<f64>),
}

/// Reset probability in the round that starts at age τ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ResetRule {
    /// clamp(2·e(τ+1), 0, 1).
    #[default]
    TwiceEnergy,
    /// 1 − ‖𝒫^{τ+1}ψ‖²/‖𝒫^τψ‖²; needs [`EnergyCurve::Exact`].
    Survival,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovParams {
    pub beta: f64,
    pub gap: f64,
    pub dim: usize,
    pub dyn_exponent: f64,
    pub lam: f64,
    pub energy: EnergyCurve,
    pub rule: ResetRule,
}

impl MarkovParams {
    /// Hypercubic single particle: β = d/2, exact gap, λ = 1.
    pub fn single_particle(dim: usize, length: usize) -> Self {
        Self {
            beta: dim as f64 / 2.0,
            gap: 1.0 - (2.0 * PI / length as f64).cos(),
            dim,
            dyn_exponent: 2.0,
            lam: 1.0,
            energy: EnergyCurve::Exact { dim, length },
            rule: ResetRule::TwiceEnergy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.gap > 0.0 && self.lam > 0.0) {
            return Err(Error::InvalidParameter("beta, gap and lam must be positive".into()));
        }
        if self.beta < 1.0 && self.lam > 4.0 {
            return Err(Error::InvalidParameter(format!("lam = {} exceeds 4 for beta < 1", self.lam)));
        }
        if self.rule == ResetRule::Survival && !matches!(self.energy, EnergyCurve::Exact { .. }) {
            return Err(Error::InvalidParameter("the survival rule needs the exact energy curve".into()));
        }
        Ok(())
    }
}

fn momentum_weights(dim: usize, length: usize, tau: f64) -> (f64, f64, f64) {
    let disp = crate::models::Dispersion { dim, length };
    let (mut num, mut den, mut ground) = (0.0, 0.0, 0.0);
    for k in disp.momenta() {
        let eps = disp.eval(&k);
        let w = (1.0 + k[0].cos()) * (-4.0 * eps * tau).exp();
        num += eps * w;
        den += w;
        if eps == 0.0 {
            ground += w;
        }
    }
    (num, den, ground)
}

/// Momentum-sum approximation to e(τ) from the two-site initial state.
pub fn momentum_sum_energy(tau: f64, dim: usize, length: usize) -> f64 {
    let (num, den, _) = momentum_weights(dim, length, tau);
    num / den
}

pub fn momentum_sum_infidelity(tau: f64, dim: usize, length: usize) -> f64 {
    let (_, den, ground) = momentum_weights(dim, length, tau);
    1.0 - ground / den
}

/// e(τ) and ε(τ) for τ = 0..=t_max from exact projection rounds.
pub fn single_particle_series(dim: usize, length: usize, t_max: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let model = build_heisenberg_single_particle::<f64>(dim, length)?;
    let steps = projection_energy_series(&model, model.initial_state(), t_max + 1)?;
    let energy = steps.iter().take(t_max + 1).map(|s| s.energy).collect();
    let infidelity = steps.iter().take(t_max + 1).map(|s| 1.0 - s.overlap).collect();
    let survival = steps.iter().map(|s| s.norm * s.norm).collect();
    Ok((energy, infidelity, survival))
}

/// Reset-free e(τ) of the single particle, evaluated exactly.
pub fn single_particle_energy(tau: usize, dim: usize, length: usize) -> Result<f64> {
    Ok(single_particle_series(dim, length, tau)?.0[tau])
}

/// Scaling form of Ē(t), normalized by continuity of the branches at t = 1/Δ.
pub fn closed_form_avg_energy(t: f64, p: &MarkovParams) -> f64 {
    let d = p.gap;
    let rate = p.lam * rate_unit(d, p.beta);
    let t1 = t.max(1.0);
    if (p.beta - 1.0).abs() < 1e-12 {
        let l = d.ln().abs();
        if t < 1.0 / d {
            (1.0 + l) / l * (-rate / d).exp() / (1.0 + t1.ln())
        } else {
            (-rate * t).exp() / l
        }
    } else {
        let q = (1.0 - p.beta).max(0.0);
        if t < 1.0 / d {
            (-rate / d).exp() * t1.powf(-q)
        } else {
            d.powf(q) * (-rate * t).exp()
        }
    }
}

/// min(1, e^{−λ·unit·t}).
pub fn avg_infidelity_bound(t: f64, p: &MarkovParams) -> f64 {
    (-p.lam * rate_unit(p.gap, p.beta) * t).exp().min(1.0)
}

/// Time at which the bound reaches `target`.
pub fn bound_convergence_time(target: f64, p: &MarkovParams) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter(format!("target {target} outside (0, 1]")));
    }
    Ok((1.0 / target).ln() / (p.lam * rate_unit(p.gap, p.beta)))
}

/// Tables for one post-reset branch, indexed by age τ.
#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub energy: Vec<f64>,
    pub infidelity: Vec<f64>,
    /// Probability that the round starting at age τ has its first hit of each kind.
    pub hits: Vec<Vec<f64>>,
}

impl Branch {
    pub fn hit_probability(&self, tau: usize) -> f64 {
        self.hits[tau].iter().sum()
    }
}

/// Renewal process over post-reset branches. A hit of kind k sends the
/// process to branch b at age 0 with probability `cascade[k][b]`.
#[derive(Clone, Debug, Serialize)]
pub struct RenewalProcess {
    pub branches: Vec<Branch>,
    pub cascade: Vec<Vec<f64>>,
    pub initial: usize,
    pub t_max: usize,
    pub gap: f64,
}

/// Per-round state of one Markov trajectory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkovState {
    pub t: usize,
    pub tau: usize,
    pub branch: usize,
    pub resets: Vec<usize>,
}

impl MarkovState {
    pub fn step(&mut self, process: &RenewalProcess, rng: &mut impl Rng) {
        let hits = &process.branches[self.branch].hits[self.tau];
        let mut u = rng.random::<f64>();
        self.t += 1;
        for (k, &g) in hits.iter().enumerate() {
            if u < g {
                let row = &process.cascade[k];
                let next = if row.len() == 1 {
                    0
                } else {
                    let mut v = rng.random::<f64>();
                    row.iter().position(|&c| {
                        v -= c;
                        v < 0.0
                    })
                    .unwrap_or(row.len() - 1)
                };
                self.branch = next;
                self.tau = 0;
                self.resets.push(self.t);
                return;
            }
            u -= g;
        }
        self.tau += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovRun {
    pub n_trajectories: usize,
    pub t: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub sem_energy: Vec<f64>,
    pub mean_infidelity: Vec<f64>,
    pub sem_infidelity: Vec<f64>,
    /// Mean of min(1, E/Δ).
    pub mean_infidelity_bound: Vec<f64>,
    pub reset_counts: Vec<usize>,
    /// Differences of reset times per trajectory, the first measured from t = 0.
    pub gaps: Vec<Vec<usize>>,
    pub last_reset: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactAverage {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub infidelity: Vec<f64>,
    /// Probability of a reset in round t.
    pub reset_rate: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResetDistributions {
    /// Survival Q(τ) without a reset, τ = 0..=t_max.
    pub q: Vec<f64>,
    /// First reset exactly at round τ; entry 0 is zero.
    pub q_prime: Vec<f64>,
    /// Q(t_max), the estimate of Q(∞).
    pub q_inf: f64,
    /// P_#r(n) = (1 − Q∞)^n Q∞ truncated where the tail falls below 1e-12.
    pub count_distribution: Vec<f64>,
    /// Mean number of resets, (1 − Q∞)/Q∞.
    pub mean_resets: f64,
    /// Mean gap between resets over the resolved part of Q′.
    pub mean_gap: f64,
    /// Probability that the last reset happens at t; entry 0 is "never".
    pub last_reset: Vec<f64>,
}

const CHUNK: usize = 64;

#[derive(Clone, Default)]
struct Sums {
    e: Vec<f64>,
    e2: Vec<f64>,
    f: Vec<f64>,
    f2: Vec<f64>,
    b: Vec<f64>,
    counts: Vec<usize>,
    gaps: Vec<Vec<usize>>,
    last: Vec<usize>,
}

impl Sums {
    fn new(len: usize) -> Self {
        Self { e: vec![0.0; len], e2: vec![0.0; len], f: vec![0.0; len], f2: vec![0.0; len], b: vec![0.0; len], ..Self::default() }
    }

    fn merge(&mut self, o: Sums) {
        for (k, x) in o.e.iter().enumerate() {
            self.e[k] += x;
            self.e2[k] += o.e2[k];
            self.f[k] += o.f[k];
            self.f2[k] += o.f2[k];
            self.b[k] += o.b[k];
        }
        self.counts.extend(o.counts);
        self.gaps.extend(o.gaps);
        self.last.extend(o.last);
    }
}

fn moments(sum: f64, sum2: f64, n: usize) -> (f64, f64) {
    let m = sum / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = ((sum2 - n as f64 * m * m) / (n - 1) as f64).max(0.0);
    (m, (var / n as f64).sqrt())
}

impl RenewalProcess {
    /// One branch driven by `params.energy` and `params.rule`.
    pub fn simple(params: &MarkovParams, t_max: usize) -> Result<Self> {
        params.validate()?;
        let n = t_max + 1;
        let (energy, infidelity, survival) = match &params.energy {
            EnergyCurve::Exact { dim, length } => {
                let (e, f, s) = single_particle_series(*dim, *length, t_max + 1)?;
                (e, f, Some(s))
            }
            EnergyCurve::Asymptotic => {
                let (b, d) = (params.beta, params.gap);
                let e: Vec<f64> = (0..=n)
                    .map(|tau| {
                        let t = (tau as f64).max(1.0);
                        if t <= 1.0 / d {
                            b / (2.0 * t)
                        } else {
                            b * d / 2.0 * (-4.0 * (d * t - 1.0)).exp()
                        }
                    })
                    .collect();
                let f = e.iter().map(|x| (x / d).min(1.0)).collect();
                (e, f, None)
            }
            EnergyCurve::MomentumSum { dim, length } => (
                (0..=n).map(|tau| momentum_sum_energy(tau as f64, *dim, *length)).collect(),
                (0..=n).map(|tau| momentum_sum_infidelity(tau as f64, *dim, *length)).collect(),
                None,
            ),
            EnergyCurve::Table(v) => {
                if v.len() < n + 1 {
                    return Err(Error::InvalidParameter(format!("energy table has {} entries, need {}", v.len(), n + 1)));
                }
                let f = v.iter().map(|x| (x / params.gap).min(1.0)).collect();
                (v.clone(), f, None)
            }
        };
        let hits = (0..n)
            .map(|tau| {
                let p = match (&params.rule, &survival) {
                    (ResetRule::Survival, Some(s)) => 1.0 - s[tau + 1] / s[tau],
                    _ => 2.0 * energy[tau + 1],
                };
                vec![p.clamp(0.0, 1.0)]
            })
            .collect();
        Ok(Self {
            branches: vec![Branch { energy: energy[..n].to_vec(), infidelity: infidelity[..n].to_vec(), hits }],
            cascade: vec![vec![1.0]],
            initial: 0,
            t_max,
            gap: params.gap,
        })
    }

    /// Exact round-level kernel of the single-particle protocol. Branch 0 is
    /// the initial state; branch 1 + a is the end-of-round state after a last
    /// hit in layer a. Exact because every hit re-localizes the particle on a
    /// bond and layer-preserving translations map bonds of a layer onto each other.
    pub fn exact_single_particle(dim: usize, length: usize, t_max: usize) -> Result<Self> {
        let model = build_heisenberg_single_particle::<f64>(dim, length)?;
        Self::from_relocalizing_model(&model, t_max)
    }

    /// Builds the branch kernel for any model whose hits leave a fixed state
    /// per layer up to a symmetry of the model.
    pub fn from_relocalizing_model(model: &LayeredModel<f64>, t_max: usize) -> Result<Self> {
        let n_layers = model.n_layers();
        for (i, t) in model.terms().iter().enumerate() {
            if t.local_rank() != 1 || model.plan(i).n_groups() != 1 {
                return Err(Error::InvalidParameter("hits do not re-localize: term image is not one-dimensional".into()));
            }
        }
        let round = ProjectionRound::new(model);
        let post_hit: Vec<StateVector<f64>> = (0..n_layers).map(|a| post_hit_state(model, model.layers()[a][0])).collect::<Result<_>>()?;
        // Probability that, starting right after a hit in layer a, the next hit is in layer a2 > a.
        let mut follow = vec![vec![0.0; n_layers]; n_layers];
        let mut ends: Vec<StateVector<f64>> = Vec::with_capacity(n_layers);
        for a in 0..n_layers {
            let mut s = post_hit[a].clone();
            for (a2, slot) in follow[a].iter_mut().enumerate().skip(a + 1) {
                let before = s.norm_sqr();
                round.apply_layer(a2, s.amplitudes_mut());
                *slot = before - s.norm_sqr();
            }
            s.normalize()?;
            ends.push(s);
        }
        // cascade[a][b]: last hit of the round in layer b - 1 given the first in layer a.
        let mut cascade = vec![vec![0.0; n_layers + 1]; n_layers];
        for a in (0..n_layers).rev() {
            let stay = 1.0 - follow[a].iter().sum::<f64>();
            cascade[a][a + 1] += stay;
            for a2 in a + 1..n_layers {
                let f = follow[a][a2];
                for b in 0..=n_layers {
                    let c = cascade[a2][b];
                    cascade[a][b] += f * c;
                }
            }
        }
        let mut starts = vec![model.initial_state().clone()];
        starts.extend(ends);
        let branches = starts.iter().map(|s| branch_tables(model, &round, s, t_max)).collect::<Result<_>>()?;
        let gap = model.dispersion().map(|d| d.gap()).unwrap_or(f64::NAN);
        Ok(Self { branches, cascade, initial: 0, t_max, gap })
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Monte-Carlo over `n_traj` trajectories of `t_max` rounds; trajectory i
    /// is seeded with `stable_hash(seed, i)`.
    pub fn simulate(&self, n_traj: usize, t_max: usize, seed: u64) -> Result<MarkovRun> {
        if n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
        }
        if t_max > self.t_max {
            return Err(Error::InvalidParameter(format!("t_max {t_max} beyond tabulated {}", self.t_max)));
        }
        let len = t_max + 1;
        let chunks: Vec<Sums> = (0..n_traj.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut s = Sums::new(len);
                for i in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
                    let mut rng = trajectory_rng(stable_hash(seed, i as u64));
                    let mut st = MarkovState { branch: self.initial, ..MarkovState::default() };
                    for k in 0..len {
                        if k > 0 {
                            st.step(self, &mut rng);
                        }
                        let br = &self.branches[st.branch];
                        let (e, f) = (br.energy[st.tau], br.infidelity[st.tau]);
                        s.e[k] += e;
                        s.e2[k] += e * e;
                        s.f[k] += f;
                        s.f2[k] += f * f;
                        s.b[k] += (e / self.gap).min(1.0);
                    }
                    let mut prev = 0;
                    s.gaps.push(st.resets.iter().map(|&r| r - std::mem::replace(&mut prev, r)).collect());
                    s.counts.push(st.resets.len());
                    s.last.push(st.resets.last().copied().unwrap_or(0));
                }
                s
            })
            .collect();
        let mut total = Sums::new(len);
        for c in chunks {
            total.merge(c);
        }
        let mut run = MarkovRun {
            n_trajectories: n_traj,
            t: (0..len).map(|k| k as f64).collect(),
            mean_energy: Vec::with_capacity(len),
            sem_energy: Vec::with_capacity(len),
            mean_infidelity: Vec::with_capacity(len),
            sem_infidelity: Vec::with_capacity(len),
            mean_infidelity_bound: total.b.iter().map(|x| x / n_traj as f64).collect(),
            reset_counts: total.counts,
            gaps: total.gaps,
            last_reset: total.last,
        };
        for k in 0..len {
            let (m, s) = moments(total.e[k], total.e2[k], n_traj);
            run.mean_energy.push(m);
            run.sem_energy.push(s);
            let (m, s) = moments(total.f[k], total.f2[k], n_traj);
            run.mean_infidelity.push(m);
            run.sem_infidelity.push(s);
        }
        Ok(run)
    }

    /// Trajectory averages from the exact distribution over (branch, age).
    pub fn exact_average(&self, t_max: usize) -> Result<ExactAverage> {
        if t_max > self.t_max {
            return Err(Error::InvalidParameter(format!("t_max {t_max} beyond tabulated {}", self.t_max)));
        }
        let nb = self.n_branches();
        let mut pi = vec![vec![0.0; t_max + 1]; nb];
        pi[self.initial][0] = 1.0;
        let mut out = ExactAverage { t: Vec::new(), energy: Vec::new(), infidelity: Vec::new(), reset_rate: Vec::new() };
        for t in 0..=t_max {
            if t > 0 {
                let mut next = vec![vec![0.0; t_max + 1]; nb];
                let mut reset = 0.0;
                for (b, row) in pi.iter().enumerate() {
                    for tau in 0..t {
                        let w = row[tau];
                        if w == 0.0 {
                            continue;
                        }
                        let hits = &self.branches[b].hits[tau];
                        let h: f64 = hits.iter().sum();
                        next[b][tau + 1] += w * (1.0 - h);
                        for (k, g) in hits.iter().enumerate() {
                            for (b2, c) in self.cascade[k].iter().enumerate() {
                                next[b2][0] += w * g * c;
                            }
                        }
                        reset += w * h;
                    }
                }
                pi = next;
                out.reset_rate.push(reset);
            } else {
                out.reset_rate.push(0.0);
            }
            let (mut e, mut f) = (0.0, 0.0);
            for (b, row) in pi.iter().enumerate() {
                for (tau, w) in row.iter().enumerate().take(t + 1) {
                    e += w * self.branches[b].energy[tau];
                    f += w * self.branches[b].infidelity[tau];
                }
            }
            out.t.push(t as f64);
            out.energy.push(e);
            out.infidelity.push(f);
        }
        Ok(out)
    }

    /// Reset statistics of the initial branch treated as a renewal process.
    pub fn reset_distributions(&self) -> ResetDistributions {
        let br = &self.branches[self.initial];
        let n = self.t_max;
        let mut q = Vec::with_capacity(n + 1);
        let mut q_prime = vec![0.0];
        let mut s = 1.0;
        q.push(s);
        for tau in 0..n {
            let p = br.hit_probability(tau);
            q_prime.push(s * p);
            s *= 1.0 - p;
            q.push(s);
        }
        let q_inf = s;
        let mut count_distribution = Vec::new();
        let mut w = q_inf;
        let mut acc = 0.0;
        while acc < 1.0 - 1e-12 && q_inf > 0.0 && count_distribution.len() < 1_000_000 {
            count_distribution.push(w);
            acc += w;
            w *= 1.0 - q_inf;
        }
        let resolved: f64 = q_prime.iter().sum();
        let mean_gap = q_prime.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>() / resolved;
        let mut r = vec![0.0; n + 1];
        for t in 1..=n {
            let mut v = q_prime[t];
            for s in 1..t {
                v += r[s] * q_prime[t - s];
            }
            r[t] = v;
        }
        let mut last_reset: Vec<f64> = r.iter().map(|v| v * q_inf).collect();
        last_reset[0] = q_inf;
        ResetDistributions {
            q,
            q_prime,
            q_inf,
            count_distribution,
            mean_resets: (1.0 - q_inf) / q_inf,
            mean_gap,
            last_reset,
        }
    }
}

fn post_hit_state(model: &LayeredModel<f64>, term: usize) -> Result<StateVector<f64>> {
    let basis = model.basis();
    for c in basis.configs() {
        let mut s = StateVector::basis_state(basis, c)?;
        model.plan(term).project(s.amplitudes_mut());
        if s.norm_sqr() > 1e-20 {
            s.normalize()?;
            s.apply_pauli(&model.terms()[term].correction)?;
            return Ok(s);
        }
    }
    Err(Error::InvalidParameter(format!("term {term} annihilates the sector")))
}

fn branch_tables(model: &LayeredModel<f64>, round: &ProjectionRound<f64>, start: &StateVector<f64>, t_max: usize) -> Result<Branch> {
    let mut s = start.clone();
    let mut b = Branch { energy: Vec::new(), infidelity: Vec::new(), hits: Vec::new() };
    for tau in 0..=t_max {
        b.energy.push(model.energy_of(s.amplitudes()));
        b.infidelity.push(1.0 - model.ground_overlap_of(s.amplitudes()));
        let mut hits = Vec::with_capacity(model.n_layers());
        for a in 0..model.n_layers() {
            let before = s.norm_sqr();
            round.apply_layer(a, s.amplitudes_mut());
            hits.push((before - s.norm_sqr()).max(0.0));
        }
        b.hits.push(hits);
        let n = s.norm();
        if !(n > 1e-150) {
            return Err(Error::VanishingNorm { tau: tau + 1 });
        }
        s.scale(1.0 / n);
    }
    Ok(b)
}

/// Monte-Carlo of the single-branch process defined by `params`.
pub fn simulate_markov(params: &MarkovParams, n_traj: usize, t_max: usize, seed: u64) -> Result<MarkovRun> {
    RenewalProcess::simple(params, t_max)?.simulate(n_traj, t_max, seed)
}

/// Q∞ = |⟨Ω|ψ(0)⟩|² for the two-site initial state on N sites.
pub fn ground_weight(n_sites: usize) -> f64 {
    2.0 / n_sites as f64
}

//! Reset-free evolution: the projection-round operator 𝒫, its symmetrized
//! counterpart 𝒫̃, and the bounds and correspondences relating them to H.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fits::linear_fit;
use crate::models::LayeredModel;
use crate::num::{czero, Complex, Real};
use crate::spectra::hermitian_eigen;
use crate::statevec::StateVector;

/// Dense budget for 𝒫̃.
pub const DENSE_BUDGET: usize = 4096;

/// Matrix-free Π_layers Π_{i∈layer} (1 − P_i) in a fixed layer order.
#[derive(Clone, Debug)]
pub struct ProjectionRound<'a, T: Real> {
    model: &'a LayeredModel<T>,
    order: Vec<usize>,
}

impl<'a, T: Real> ProjectionRound<'a, T> {
    pub fn new(model: &'a LayeredModel<T>) -> Self {
        Self { model, order: (0..model.n_layers()).collect() }
    }

    pub fn with_order(model: &'a LayeredModel<T>, order: Vec<usize>) -> Self {
        Self { model, order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// In place 𝒫ψ on raw amplitudes.
    pub fn apply_raw(&self, amps: &mut [Complex<T>]) {
        for &a in &self.order {
            self.apply_layer(a, amps);
        }
    }

    /// In place 𝒫†ψ.
    pub fn apply_adjoint_raw(&self, amps: &mut [Complex<T>]) {
        for &a in self.order.iter().rev() {
            self.apply_layer(a, amps);
        }
    }

    pub fn apply_layer(&self, layer: usize, amps: &mut [Complex<T>]) {
        for &i in &self.model.layers()[layer] {
            self.model.plan(i).apply_complement(amps);
        }
    }

    /// Returns (𝒫ψ, ‖𝒫ψ‖); the caller renormalizes.
    pub fn apply(&self, state: &StateVector<T>) -> Result<(StateVector<T>, T)> {
        if !state.same_basis(self.model.basis()) {
            return Err(Error::BasisMismatch);
        }
        let mut out = state.clone();
        self.apply_raw(out.amplitudes_mut());
        let n = out.norm();
        Ok((out, n))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionStep {
    pub tau: usize,
    /// ‖𝒫^τ ψ‖ as its natural log, to survive long runs.
    pub log_norm: f64,
    pub norm: f64,
    /// ⟨H⟩ of the renormalized state.
    pub energy: f64,
    /// Weight in the ground manifold of the renormalized state.
    pub overlap: f64,
}

/// e(τ) and friends along the renormalized reset-free trajectory, τ = 0..=n_rounds.
pub fn projection_energy_series<T: Real>(
    model: &LayeredModel<T>,
    init: &StateVector<T>,
    n_rounds: usize,
) -> Result<Vec<ProjectionStep>> {
    let round = ProjectionRound::new(model);
    let mut state = init.clone();
    let mut log_norm = 0.0;
    let mut out = Vec::with_capacity(n_rounds + 1);
    for tau in 0..=n_rounds {
        if tau > 0 {
            round.apply_raw(state.amplitudes_mut());
            let n = state.norm().as_f64();
            log_norm += n.ln();
            if !(log_norm > 1e-300f64.ln()) || n == 0.0 {
                return Err(Error::VanishingNorm { tau });
            }
            state.scale(T::one() / T::of(n));
        }
        out.push(ProjectionStep {
            tau,
            log_norm,
            norm: log_norm.exp(),
            energy: model.energy_of(state.amplitudes()).as_f64(),
            overlap: model.ground_overlap(&state)?.as_f64(),
        });
    }
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// 𝒫̃: average of 𝒫 over all layer orderings (for two layers, (𝒫 + 𝒫†)/2).
pub fn build_symmetrized<T: Real>(model: &LayeredModel<T>) -> Result<DMatrix<Complex<T>>> {
    let n = model.dim();
    if n > DENSE_BUDGET {
        return Err(Error::Capacity { what: "symmetrized round operator".into(), dim: n, budget: DENSE_BUDGET });
    }
    if model.n_layers() > 3 {
        return Err(Error::InvalidParameter(format!("{} layers: symmetrization supports at most 3", model.n_layers())));
    }
    let perms = permutations(model.n_layers());
    let w = T::one() / T::of(perms.len() as f64);
    let mut m = DMatrix::from_element(n, n, czero::<T>());
    for perm in perms {
        let round = ProjectionRound::with_order(model, perm);
        for c in 0..n {
            let mut col = vec![czero::<T>(); n];
            col[c] = Complex::new(T::one(), T::zero());
            round.apply_raw(&mut col);
            for (r, v) in col.into_iter().enumerate() {
                m[(r, c)] += v.scale(w);
            }
        }
    }
    // Symmetrize away rounding so the hermitian solver sees an exact hermitian matrix.
    let half = T::of(0.5);
    let herm = DMatrix::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()).scale(half));
    Ok(herm)
}

/// Exponent relating 𝒫̃ eigenvalues to 𝒫 decay factors.
pub fn correspondence_exponent(n_layers: usize) -> f64 {
    if n_layers == 3 {
        9.0 / 7.0
    } else {
        4.0 / 3.0
    }
}

/// Two-layer prediction including the |log λ̃|² correction:
/// λ^τ = λ̃^{4τ/3}·exp(−(2/27)τ|log λ̃|²).
pub fn two_layer_prediction(lambda_tilde: f64, tau: f64) -> f64 {
    let l = lambda_tilde.ln().abs();
    (-(4.0 / 3.0) * l * tau - (2.0 / 27.0) * tau * l * l).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrespondenceEntry {
    pub lambda_tilde: f64,
    /// Per-round decay factor of ‖𝒫^τψ̃‖ over the fit window.
    pub lambda: f64,
    /// λ̃ raised to the layer-dependent exponent.
    pub predicted: f64,
    /// |⟨ψ̃|𝒫^τψ̃⟩| / ‖𝒫^τψ̃‖ at the end of the window.
    pub overlap: f64,
    pub norms: Vec<f64>,
    pub overlaps: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralCorrespondence {
    pub exponent: f64,
    pub window: (usize, usize),
    /// Sorted by decreasing λ̃; entry 0 is the ground state.
    pub entries: Vec<CorrespondenceEntry>,
}

/// Matches the leading `n_states` eigenvectors of 𝒫̃ (ground included) to
/// their decay under 𝒫, fitting log‖𝒫^τψ̃‖ over τ ∈ `window`.
pub fn eigen_correspondence<T: Real>(
    model: &LayeredModel<T>,
    n_states: usize,
    window: (usize, usize),
) -> Result<SpectralCorrespondence> {
    let pt = build_symmetrized(model)?;
    let (vals, vecs) = hermitian_eigen(&pt);
    let n = vals.len();
    let round = ProjectionRound::new(model);
    let exponent = correspondence_exponent(model.n_layers());
    let mut entries = Vec::new();
    for k in 0..n_states.min(n) {
        let col = n - 1 - k;
        let lt = vals[col].as_f64();
        let psi: Vec<Complex<T>> = vecs.column(col).iter().copied().collect();
        let mut cur = psi.clone();
        let mut log_norm = 0.0;
        let mut norms = vec![1.0];
        let mut overlaps = vec![1.0];
        for _ in 0..window.1 {
            round.apply_raw(&mut cur);
            let nn = cur.iter().fold(0.0, |a, z| a + z.norm_sqr().as_f64()).sqrt();
            if nn == 0.0 {
                return Err(Error::VanishingNorm { tau: norms.len() });
            }
            log_norm += nn.ln();
            for z in &mut cur {
                *z = z.unscale(T::of(nn));
            }
            norms.push(log_norm.exp());
            let ov = psi.iter().zip(&cur).fold(czero::<T>(), |a, (x, y)| a + x.conj() * y);
            overlaps.push(ov.norm_sqr().as_f64().sqrt());
        }
        let taus: Vec<f64> = (window.0..=window.1).map(|t| t as f64).collect();
        let logs: Vec<f64> = (window.0..=window.1).map(|t| norms[t].ln()).collect();
        let lambda = if window.1 > window.0 { linear_fit(&taus, &logs)?.slope.exp() } else { f64::NAN };
        entries.push(CorrespondenceEntry {
            lambda_tilde: lt,
            lambda,
            predicted: lt.max(0.0).powf(exponent),
            overlap: *overlaps.last().unwrap(),
            norms,
            overlaps,
        });
    }
    Ok(SpectralCorrespondence { exponent, window, entries })
}

#[derive(Clone, Debug, Serialize)]
pub struct DlEntry {
    pub energy: f64,
    pub norm_sq: f64,
    pub lower: f64,
    pub upper: f64,
}

impl DlEntry {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower <= self.norm_sq + slack && self.norm_sq <= self.upper + slack
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DlReport {
    pub gap: f64,
    pub n_layers: usize,
    pub entries: Vec<DlEntry>,
    pub violations: usize,
    /// Smallest distance to either bound over all trials.
    pub min_slack: f64,
}

/// Checks 1 − 4⟨H⟩ ≤ ‖𝒫ψ⊥‖² ≤ (1 + Δ/𝒜²)^{−1} after projecting out the ground manifold.
pub fn detectability_bound_check<T: Real>(
    model: &LayeredModel<T>,
    trials: &[StateVector<T>],
    gap: f64,
) -> Result<DlReport> {
    let round = ProjectionRound::new(model);
    let a = model.n_layers() as f64;
    let upper = 1.0 / (1.0 + gap / (a * a));
    let mut entries = Vec::new();
    for t in trials {
        let mut psi = t.clone();
        for g in model.ground_space() {
            let c = g.inner(&psi)?;
            psi.axpy(-c, g)?;
        }
        psi.normalize()?;
        let energy = model.energy(&psi)?.as_f64();
        let (_, nrm) = round.apply(&psi)?;
        let norm_sq = nrm.as_f64().powi(2);
        entries.push(DlEntry { energy, norm_sq, lower: 1.0 - 4.0 * energy, upper });
    }
    let slack = 1e-12;
    let violations = entries.iter().filter(|e| !e.holds(slack)).count();
    let min_slack = entries
        .iter()
        .map(|e| (e.norm_sq - e.lower).min(e.upper - e.norm_sq))
        .fold(f64::INFINITY, f64::min);
    Ok(DlReport { gap, n_layers: model.n_layers(), entries, violations, min_slack })
}

/// Random normalized states with the ground manifold projected out.
pub fn random_orthogonal_states<T: Real>(model: &LayeredModel<T>, n: usize, seed: u64) -> Result<Vec<StateVector<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let amps: Vec<Complex<T>> = (0..model.dim())
                .map(|_| Complex::new(T::of(rng.random::<f64>() - 0.5), T::of(rng.random::<f64>() - 0.5)))
                .collect();
            let mut psi = StateVector::from_amplitudes(model.basis(), amps)?;
            for g in model.ground_space() {
                let c = g.inner(&psi)?;
                psi.axpy(-c, g)?;
            }
            psi.normalize()?;
            Ok(psi)
        })
        .collect()
}

/// Distribution of the reduced 𝒫-string length τ_eff over the 2^τ operator
/// strings of 𝒫̃^τ, keyed by 2·τ_eff. Domain walls 𝒫𝒫† or 𝒫†𝒫 shorten the
/// string by one half each, with boundary corrections when the string starts
/// or ends in 𝒫†.
pub fn operator_string_density(tau: usize) -> Result<BTreeMap<usize, f64>> {
    if tau == 0 || tau > 24 {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside 1..=24")));
    }
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for s in 0u32..1 << tau {
        // bit n set means Q_n = 𝒫†
        let walls = (s ^ (s >> 1)) & ((1 << (tau - 1)) - 1);
        let n_dw = walls.count_ones() as usize;
        let first_dag = s & 1 == 1;
        let last_dag = (s >> (tau - 1)) & 1 == 1;
        let twice = 2 * tau - n_dw - usize::from(first_dag) - usize::from(last_dag);
        *counts.entry(twice).or_default() += 1;
    }
    let total = (1u64 << tau) as f64;
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect())
}

/// Binomial approximation 2^{−τ}·C(τ, 2(τ − τ_eff)), keyed by 2·τ_eff.
pub fn binomial_string_density(tau: usize) -> BTreeMap<usize, f64> {
    (0..=tau)
        .map(|n_dw| (2 * tau - n_dw, crate::basis::binomial(tau, n_dw).unwrap_or(0) as f64 / 2f64.powi(tau as i32)))
        .collect()
}

//! Dense state vectors over a sector and the local projector kernel.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::basis::{Configuration, SectorBasis};
use crate::error::{Error, Result};
use crate::num::{czero, Complex, Real};
use crate::pauli::PauliString;

const ABSENT: u32 = u32::MAX;
const MAX_RANK: usize = 16;

#[derive(Clone, Debug)]
pub struct StateVector<T: Real> {
    amps: Vec<Complex<T>>,
    basis: Arc<SectorBasis>,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(basis: &Arc<SectorBasis>) -> Self {
        Self { amps: vec![czero(); basis.len()], basis: basis.clone() }
    }

    pub fn basis_state(basis: &Arc<SectorBasis>, c: &Configuration) -> Result<Self> {
        let i = basis.index_of(c).ok_or_else(|| Error::SectorEscape(c.to_bit_string(basis.n_sites())))?;
        let mut s = Self::zeros(basis);
        s.amps[i] = Complex::new(T::one(), T::zero());
        Ok(s)
    }

    /// Normalized equal superposition over the whole sector.
    pub fn uniform(basis: &Arc<SectorBasis>) -> Self {
        let a = T::one() / T::of(basis.len() as f64).sqrt();
        Self { amps: vec![Complex::new(a, T::zero()); basis.len()], basis: basis.clone() }
    }

    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(basis: &Arc<SectorBasis>, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::BasisMismatch);
        }
        Ok(Self { amps, basis: basis.clone() })
    }

    /// Normalized superposition Σ w_c |c⟩.
    pub fn from_terms(basis: &Arc<SectorBasis>, terms: &[(Configuration, Complex<T>)]) -> Result<Self> {
        let mut s = Self::zeros(basis);
        for (c, w) in terms {
            let i = basis.index_of(c).ok_or_else(|| Error::SectorEscape(c.to_bit_string(basis.n_sites())))?;
            s.amps[i] += *w;
        }
        s.normalize()?;
        Ok(s)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn same_basis(&self, other: &Arc<SectorBasis>) -> bool {
        Arc::ptr_eq(&self.basis, other)
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, f: T) {
        for a in &mut self.amps {
            *a = a.scale(f);
        }
    }

    /// Rescales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> Result<T> {
        let n = self.norm();
        if n.as_f64() < 1e-300 || !n.is_finite() {
            return Err(Error::DegenerateCollapse { norm: n.as_f64() });
        }
        self.scale(T::one() / n);
        Ok(n)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if !Arc::ptr_eq(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// self += f * other.
    pub fn axpy(&mut self, f: Complex<T>, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += f * b;
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm().as_f64() - 1.0).abs() <= T::TOL
    }

    /// Applies a Pauli string; fails if it leaves the sector.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.is_diagonal() {
            for (i, a) in self.amps.iter_mut().enumerate() {
                let (_, f) = p.act::<T>(&self.basis.config(i));
                *a *= f;
            }
            return Ok(());
        }
        let mut out = vec![czero(); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let c = self.basis.config(i);
            let (img, f) = p.act::<T>(&c);
            let j = self
                .basis
                .index_of(&img)
                .ok_or_else(|| Error::SectorEscape(c.to_bit_string(self.basis.n_sites())))?;
            out[j] = f * a;
        }
        self.amps = out;
        Ok(())
    }

    /// Z on `site`.
    pub fn apply_z(&mut self, site: usize) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            if self.basis.config(i).get(site) {
                *a = -*a;
            }
        }
    }

    pub fn term_expectation(&self, plan: &TermPlan<T>) -> Result<T> {
        plan.check(&self.basis)?;
        Ok(plan.expectation(&self.amps))
    }

    /// Born-rule measurement of one projector with a single uniform draw.
    pub fn measure(&mut self, plan: &TermPlan<T>, term_index: usize, rng: &mut impl Rng) -> Result<MeasurementOutcome> {
        plan.check(&self.basis)?;
        let total = self.norm_sqr().as_f64();
        let p1 = (plan.expectation(&self.amps).as_f64() / total).clamp(0.0, 1.0);
        let u: f64 = rng.random();
        let hit = u < p1;
        if hit {
            if p1 * total < 1e-28 {
                return Err(Error::DegenerateCollapse { norm: (p1 * total).sqrt() });
            }
            plan.project(&mut self.amps);
        } else {
            if (1.0 - p1) * total < 1e-28 {
                return Err(Error::DegenerateCollapse { norm: ((1.0 - p1) * total).sqrt() });
            }
            plan.apply_complement(&mut self.amps);
        }
        self.normalize()?;
        Ok(MeasurementOutcome { term_index, outcome: u8::from(hit), p1 })
    }

    /// |⟨reference|self⟩|².
    pub fn fidelity(&self, reference: &Self) -> Result<T> {
        Ok(self.inner(reference)?.norm_sqr())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementOutcome {
    pub term_index: usize,
    pub outcome: u8,
    pub p1: f64,
}

/// Projector compiled against a basis: complement groups with the basis
/// ordinal of each local slot the projector can touch.
#[derive(Clone, Debug)]
pub struct TermPlan<T: Real> {
    basis: Arc<SectorBasis>,
    /// Per local vector: (slot position, value).
    vectors: Vec<Vec<(usize, Complex<T>)>>,
    n_slots: usize,
    groups: Vec<u32>,
}

impl<T: Real> TermPlan<T> {
    /// `local_vectors[r][l]` is the amplitude on local configuration `l` of `support`.
    pub fn compile(basis: &Arc<SectorBasis>, support: &[usize], local_vectors: &[Vec<Complex<T>>]) -> Result<Self> {
        if local_vectors.len() > MAX_RANK {
            return Err(Error::InvalidParameter(format!("local rank {} above {MAX_RANK}", local_vectors.len())));
        }
        let tiny = T::of(1e-28);
        let mut slot_of = HashMap::new();
        let mut slot_locals = Vec::new();
        let mut vectors = Vec::with_capacity(local_vectors.len());
        for v in local_vectors {
            let mut sparse = Vec::new();
            for (l, &a) in v.iter().enumerate() {
                if a.norm_sqr() > tiny {
                    let next = slot_locals.len();
                    let pos = *slot_of.entry(l).or_insert_with(|| {
                        slot_locals.push(l);
                        next
                    });
                    sparse.push((pos, a));
                }
            }
            vectors.push(sparse);
        }
        let n_slots = slot_locals.len();
        let mut group_of: HashMap<Configuration, usize> = HashMap::new();
        let mut groups: Vec<u32> = Vec::new();
        for (i, c) in basis.configs().iter().enumerate() {
            let local = c.extract(support);
            let Some(&pos) = slot_of.get(&local) else { continue };
            let key = c.with_local(support, 0);
            let g = *group_of.entry(key).or_insert_with(|| {
                groups.extend(std::iter::repeat_n(ABSENT, n_slots));
                groups.len() / n_slots - 1
            });
            groups[g * n_slots + pos] = u32::try_from(i).map_err(|_| Error::Capacity {
                what: "basis index".into(),
                dim: basis.len(),
                budget: u32::MAX as usize,
            })?;
        }
        // A vector touching the sector in a group must lie entirely inside it,
        // otherwise the restricted operator is not a projector.
        for g in groups.chunks(n_slots.max(1)) {
            for v in &vectors {
                let present = v.iter().filter(|(p, _)| g[*p] != ABSENT).count();
                if present != 0 && present != v.len() {
                    let (p, _) = v.iter().find(|(p, _)| g[*p] != ABSENT).unwrap();
                    let c = basis.config(g[*p] as usize);
                    return Err(Error::SectorEscape(c.to_bit_string(basis.n_sites())));
                }
            }
        }
        Ok(Self { basis: basis.clone(), vectors, n_slots, groups })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn n_groups(&self) -> usize {
        if self.n_slots == 0 {
            0
        } else {
            self.groups.len() / self.n_slots
        }
    }

    fn check(&self, basis: &Arc<SectorBasis>) -> Result<()> {
        if Arc::ptr_eq(&self.basis, basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    #[inline]
    fn coefficients(&self, g: &[u32], amps: &[Complex<T>], out: &mut [Complex<T>; MAX_RANK]) {
        for (r, v) in self.vectors.iter().enumerate() {
            let mut c = czero::<T>();
            for &(p, a) in v {
                let i = g[p];
                if i != ABSENT {
                    c += a.conj() * amps[i as usize];
                }
            }
            out[r] = c;
        }
    }

    /// ‖Pψ‖² for unnormalized amplitudes.
    pub fn expectation(&self, amps: &[Complex<T>]) -> T {
        let mut coef = [czero::<T>(); MAX_RANK];
        let rank = self.vectors.len();
        let mut acc = T::zero();
        for g in self.groups.chunks_exact(self.n_slots.max(1)) {
            self.coefficients(g, amps, &mut coef);
            for c in &coef[..rank] {
                acc += c.norm_sqr();
            }
        }
        acc
    }

    /// ψ ← (1 − P)ψ.
    pub fn apply_complement(&self, amps: &mut [Complex<T>]) {
        let mut coef = [czero::<T>(); MAX_RANK];
        for g in self.groups.chunks_exact(self.n_slots.max(1)) {
            self.coefficients(g, amps, &mut coef);
            for (v, c) in self.vectors.iter().zip(&coef) {
                for &(p, a) in v {
                    let i = g[p];
                    if i != ABSENT {
                        amps[i as usize] -= a * c;
                    }
                }
            }
        }
    }

    /// ψ ← Pψ.
    pub fn project(&self, amps: &mut [Complex<T>]) {
        let rank = self.vectors.len();
        let n_groups = self.n_groups();
        let mut coefs = vec![czero::<T>(); n_groups * rank];
        let mut coef = [czero::<T>(); MAX_RANK];
        for (k, g) in self.groups.chunks_exact(self.n_slots.max(1)).enumerate() {
            self.coefficients(g, amps, &mut coef);
            coefs[k * rank..(k + 1) * rank].copy_from_slice(&coef[..rank]);
        }
        amps.fill(czero());
        for (k, g) in self.groups.chunks_exact(self.n_slots.max(1)).enumerate() {
            for (v, c) in self.vectors.iter().zip(&coefs[k * rank..(k + 1) * rank]) {
                for &(p, a) in v {
                    let i = g[p];
                    if i != ABSENT {
                        amps[i as usize] += a * c;
                    }
                }
            }
        }
    }

    /// Nonzero matrix elements (row, col, value) of the restricted projector.
    pub fn matrix_elements(&self) -> Vec<(usize, usize, Complex<T>)> {
        let mut out = Vec::new();
        for g in self.groups.chunks_exact(self.n_slots.max(1)) {
            for v in &self.vectors {
                for &(p, a) in v {
                    for &(q, b) in v {
                        if g[p] != ABSENT && g[q] != ABSENT {
                            out.push((g[p] as usize, g[q] as usize, a * b.conj()));
                        }
                    }
                }
            }
        }
        out
    }
}

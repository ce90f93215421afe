//! Frustration-free models as layered projector terms.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{
    enumerate_magnetization_sector, enumerate_reachable_sector, Configuration, LocalMove, SectorBasis, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::num::{cplx, czero, Complex, Real};
use crate::pauli::{Pauli, PauliString};
use crate::statevec::{StateVector, TermPlan};

/// Local projector with an attached feedback unitary.
#[derive(Clone, Debug)]
pub struct ProjectorTerm<T: Real> {
    pub support: Vec<usize>,
    /// Orthonormal vectors spanning the image; entry `l` is local configuration `l`.
    pub local_vectors: Vec<Vec<Complex<T>>>,
    pub correction: PauliString,
}

impl<T: Real> ProjectorTerm<T> {
    pub fn local_rank(&self) -> usize {
        self.local_vectors.len()
    }

    pub fn local_dim(&self) -> usize {
        1 << self.support.len()
    }

    pub fn local_matrix(&self) -> DMatrix<Complex<T>> {
        let d = self.local_dim();
        DMatrix::from_fn(d, d, |r, c| {
            self.local_vectors.iter().fold(czero(), |acc, v| acc + v[r] * v[c].conj())
        })
    }

    /// Correction expressed on the term's support.
    pub fn correction_matrix(&self) -> DMatrix<Complex<T>> {
        self.correction.local_matrix(&self.support)
    }

    /// Rewrites generated by the term and its correction, for sector closure.
    pub fn moves(&self) -> Vec<LocalMove> {
        let tiny = T::of(1e-28);
        let mut out = Vec::new();
        for v in &self.local_vectors {
            let nz: Vec<usize> = (0..v.len()).filter(|&l| v[l].norm_sqr() > tiny).collect();
            for (k, &a) in nz.iter().enumerate() {
                for &b in &nz[k + 1..] {
                    out.push(LocalMove::from_local(self.support.clone(), a, b));
                }
            }
        }
        let flips: Vec<usize> = self
            .correction
            .factors
            .iter()
            .filter(|(_, p)| matches!(p, Pauli::X | Pauli::Y))
            .map(|(s, _)| *s)
            .collect();
        if !flips.is_empty() {
            for l in 0..1usize << flips.len() {
                let to = l ^ ((1 << flips.len()) - 1);
                if l < to {
                    out.push(LocalMove::from_local(flips.clone(), l, to));
                }
            }
        }
        out
    }
}

/// Single-particle hopping dispersion ε(k) = Σ_a (1 − cos k_a) on a periodic hypercube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dispersion {
    pub dim: usize,
    pub length: usize,
}

impl Dispersion {
    pub fn eval(&self, k: &[f64]) -> f64 {
        k.iter().map(|ka| 1.0 - ka.cos()).sum()
    }

    /// All allowed momenta 2πm/L per axis.
    pub fn momenta(&self) -> Vec<Vec<f64>> {
        let l = self.length;
        (0..l.pow(self.dim as u32))
            .map(|mut m| {
                (0..self.dim)
                    .map(|_| {
                        let ka = 2.0 * PI * (m % l) as f64 / l as f64;
                        m /= l;
                        ka
                    })
                    .collect()
            })
            .collect()
    }

    pub fn gap(&self) -> f64 {
        1.0 - (2.0 * PI / self.length as f64).cos()
    }
}

/// Projector terms grouped into commuting layers over a closed sector.
#[derive(Clone, Debug)]
pub struct LayeredModel<T: Real> {
    name: String,
    params: Vec<(String, String)>,
    basis: Arc<SectorBasis>,
    terms: Vec<ProjectorTerm<T>>,
    plans: Vec<TermPlan<T>>,
    layers: Vec<Vec<usize>>,
    ground_space: Vec<StateVector<T>>,
    initial: StateVector<T>,
    system_size: usize,
    dispersion: Option<Dispersion>,
}

pub struct ModelParts<T: Real> {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub basis: Arc<SectorBasis>,
    pub terms: Vec<ProjectorTerm<T>>,
    pub layers: Vec<Vec<usize>>,
    pub ground_space: Vec<StateVector<T>>,
    pub initial: StateVector<T>,
    pub system_size: usize,
    pub dispersion: Option<Dispersion>,
}

impl<T: Real> LayeredModel<T> {
    /// Validates and compiles a model.
    pub fn new(parts: ModelParts<T>) -> Result<Self> {
        let ModelParts { name, params, basis, terms, layers, ground_space, initial, system_size, dispersion } = parts;
        let mut seen = vec![0usize; terms.len()];
        for layer in &layers {
            for &i in layer {
                *seen.get_mut(i).ok_or_else(|| Error::InvalidParameter(format!("layer lists term {i}")))? += 1;
            }
        }
        if let Some(i) = seen.iter().position(|&n| n != 1) {
            return Err(Error::InvalidParameter(format!("term {i} appears in {} layers", seen[i])));
        }
        let tol = T::TOL;
        for (i, t) in terms.iter().enumerate() {
            let p = t.local_matrix();
            if (&p * &p - &p).norm().as_f64() > tol {
                return Err(Error::InvalidParameter(format!("term {i} is not a projector")));
            }
            let u = t.correction_matrix();
            if (&u * &p - &p * &u).norm().as_f64() < tol {
                return Err(Error::InvalidParameter(format!("correction of term {i} commutes with its projector")));
            }
        }
        for layer in &layers {
            for (k, &i) in layer.iter().enumerate() {
                for &j in &layer[k + 1..] {
                    if !terms_commute(&terms[i], &terms[j]) {
                        return Err(Error::InvalidParameter(format!("terms {i} and {j} share a layer but do not commute")));
                    }
                }
            }
        }
        let plans = terms
            .iter()
            .map(|t| TermPlan::compile(&basis, &t.support, &t.local_vectors))
            .collect::<Result<Vec<_>>>()?;
        for g in &ground_space {
            if !g.same_basis(&basis) || !g.is_normalized() {
                return Err(Error::InvalidParameter("ground state not a unit vector of the basis".into()));
            }
            for (i, p) in plans.iter().enumerate() {
                let e = p.expectation(g.amplitudes()).as_f64();
                if e.sqrt() > tol.max(1e-10) {
                    return Err(Error::InvalidParameter(format!("ground state violates term {i} by {e:e}")));
                }
            }
        }
        Ok(Self { name, params, basis, terms, plans, layers, ground_space, initial, system_size, dispersion })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Stable `name@key=value,...` identifier.
    pub fn id(&self) -> String {
        let mut s = self.name.clone();
        s.push('@');
        for (k, (key, v)) in self.params.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let _ = write!(s, "{key}={v}");
        }
        s
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn terms(&self) -> &[ProjectorTerm<T>] {
        &self.terms
    }

    pub fn plan(&self, i: usize) -> &TermPlan<T> {
        &self.plans[i]
    }

    pub fn plans(&self) -> &[TermPlan<T>] {
        &self.plans
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Orthonormal basis of the zero-energy manifold, if known.
    pub fn ground_space(&self) -> &[StateVector<T>] {
        &self.ground_space
    }

    pub fn ground_state(&self) -> Option<&StateVector<T>> {
        self.ground_space.first()
    }

    pub fn initial_state(&self) -> &StateVector<T> {
        &self.initial
    }

    /// Number of physical sites N used in scaling relations.
    pub fn system_size(&self) -> usize {
        self.system_size
    }

    pub fn dispersion(&self) -> Option<Dispersion> {
        self.dispersion
    }

    pub fn energy(&self, state: &StateVector<T>) -> Result<T> {
        if !state.same_basis(&self.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(self.energy_of(state.amplitudes()))
    }

    /// ⟨ψ|H|ψ⟩ for raw (possibly unnormalized) amplitudes.
    pub fn energy_of(&self, amps: &[Complex<T>]) -> T {
        self.plans.iter().fold(T::zero(), |acc, p| acc + p.expectation(amps))
    }

    /// Weight of the state in the ground manifold.
    pub fn ground_overlap(&self, state: &StateVector<T>) -> Result<T> {
        self.ground_space.iter().try_fold(T::zero(), |acc, g| Ok(acc + state.fidelity(g)?))
    }

    /// Sum of the state's weight in the ground manifold for raw amplitudes.
    pub fn ground_overlap_of(&self, amps: &[Complex<T>]) -> T {
        self.ground_space.iter().fold(T::zero(), |acc, g| {
            let ov = g.amplitudes().iter().zip(amps).fold(czero::<T>(), |a, (x, y)| a + x.conj() * y);
            acc + ov.norm_sqr()
        })
    }

    /// Sector closure under every term rewrite and correction.
    pub fn check_closure(&self) -> Result<()> {
        for t in &self.terms {
            for m in t.moves() {
                for c in self.basis.configs() {
                    if let Some(img) = m.apply(c) {
                        if !self.basis.contains(&img) {
                            return Err(Error::SectorEscape(c.to_bit_string(self.basis.n_sites())));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn terms_commute<T: Real>(a: &ProjectorTerm<T>, b: &ProjectorTerm<T>) -> bool {
    if a.support.iter().all(|s| !b.support.contains(s)) {
        return true;
    }
    let mut union = a.support.clone();
    for &s in &b.support {
        if !union.contains(&s) {
            union.push(s);
        }
    }
    let ea = embed(a, &union);
    let eb = embed(b, &union);
    (&ea * &eb - &eb * &ea).norm().as_f64() < T::TOL
}

/// Projector of `t` as a matrix on the larger support `union`.
fn embed<T: Real>(t: &ProjectorTerm<T>, union: &[usize]) -> DMatrix<Complex<T>> {
    let d = 1usize << union.len();
    let p = t.local_matrix();
    let local = |l: usize| Configuration::empty().with_local(union, l).extract(&t.support);
    let rest = |l: usize| Configuration::empty().with_local(union, l).with_local(&t.support, 0);
    DMatrix::from_fn(d, d, |r, c| if rest(r) == rest(c) { p[(local(r), local(c))] } else { czero() })
}

fn singlet<T: Real>() -> Vec<Complex<T>> {
    vec![czero(), cplx(FRAC_1_SQRT_2, 0.0), cplx(-FRAC_1_SQRT_2, 0.0), czero()]
}

fn bond_term<T: Real>(i: usize, j: usize) -> ProjectorTerm<T> {
    ProjectorTerm { support: vec![i, j], local_vectors: vec![singlet()], correction: PauliString::single(i.min(j), Pauli::Z) }
}

fn param(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

/// Configuration with `n_up` bits set, taking sites from `preferred` first.
fn filled(preferred: impl Iterator<Item = usize>, n_sites: usize, n_up: usize) -> Configuration {
    let mut order: Vec<usize> = preferred.collect();
    let rest: Vec<usize> = (0..n_sites).filter(|s| !order.contains(s)).collect();
    order.extend(rest);
    Configuration::from_sites(&order[..n_up])
}

/// Heisenberg chain Σ singlet projectors in a fixed-magnetization sector.
pub fn build_heisenberg_chain<T: Real>(n_sites: usize, periodic: bool, n_up: usize) -> Result<LayeredModel<T>> {
    build_heisenberg_chain_in(n_sites, periodic, Some(n_up), DEFAULT_BUDGET)
}

/// Heisenberg chain on the full 2^N space (ground manifold = all Dicke states).
pub fn build_heisenberg_chain_full<T: Real>(n_sites: usize, periodic: bool) -> Result<LayeredModel<T>> {
    build_heisenberg_chain_in(n_sites, periodic, None, DEFAULT_BUDGET)
}

pub fn build_heisenberg_chain_in<T: Real>(
    n_sites: usize,
    periodic: bool,
    n_up: Option<usize>,
    budget: usize,
) -> Result<LayeredModel<T>> {
    if n_sites < 4 || n_sites % 2 == 1 {
        return Err(Error::InvalidParameter(format!("chain length {n_sites} must be even and at least 4")));
    }
    let n_bonds = if periodic { n_sites } else { n_sites - 1 };
    let terms: Vec<ProjectorTerm<T>> = (0..n_bonds).map(|i| bond_term(i, (i + 1) % n_sites)).collect();
    let layers = vec![(0..n_bonds).step_by(2).collect(), (1..n_bonds).step_by(2).collect()];
    let (basis, ground_space, initial, mut params) = match n_up {
        Some(k) => {
            let basis = Arc::new(enumerate_magnetization_sector(n_sites, k, budget)?);
            let neel = filled((0..n_sites).step_by(2), n_sites, k);
            let initial = StateVector::basis_state(&basis, &neel)?;
            (basis.clone(), vec![StateVector::uniform(&basis)], initial, vec![param("n_up", k)])
        }
        None => {
            let basis = Arc::new(SectorBasis::full(n_sites, budget)?);
            let ground = (0..=n_sites).map(|k| dicke(&basis, k)).collect::<Result<Vec<_>>>()?;
            let neel = filled((0..n_sites).step_by(2), n_sites, n_sites / 2);
            let initial = StateVector::basis_state(&basis, &neel)?;
            (basis, ground, initial, vec![param("sector", "full")])
        }
    };
    params.splice(0..0, [param("n_sites", n_sites), param("periodic", periodic)]);
    LayeredModel::new(ModelParts {
        name: "heisenberg_chain".into(),
        params,
        basis,
        terms,
        layers,
        ground_space,
        initial,
        system_size: n_sites,
        dispersion: None,
    })
}

fn dicke<T: Real>(basis: &Arc<SectorBasis>, k: usize) -> Result<StateVector<T>> {
    let members: Vec<_> = basis
        .configs()
        .iter()
        .filter(|c| c.count_ones() as usize == k)
        .map(|c| (*c, cplx::<T>(1.0, 0.0)))
        .collect();
    StateVector::from_terms(basis, &members)
}

/// One flipped spin hopping on a periodic d-dimensional hypercube.
pub fn build_heisenberg_single_particle<T: Real>(dim: usize, length: usize) -> Result<LayeredModel<T>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
    }
    if length < 4 || length % 2 == 1 {
        return Err(Error::InvalidParameter(format!("length {length} must be even and at least 4")));
    }
    let n = length.pow(dim as u32);
    if n > crate::basis::MAX_SITES {
        return Err(Error::Capacity { what: "single-particle lattice".into(), dim: n, budget: crate::basis::MAX_SITES });
    }
    let stride = |a: usize| length.pow(a as u32);
    let coord = |s: usize, a: usize| (s / stride(a)) % length;
    let neighbor = |s: usize, a: usize| s - coord(s, a) * stride(a) + ((coord(s, a) + 1) % length) * stride(a);
    let mut terms = Vec::new();
    let mut layers = vec![Vec::new(); 2 * dim];
    for a in 0..dim {
        for s in 0..n {
            layers[2 * a + coord(s, a) % 2].push(terms.len());
            terms.push(bond_term(s, neighbor(s, a)));
        }
    }
    let basis = Arc::new(SectorBasis::from_configs(
        n,
        (0..n).map(|s| Configuration::from_sites(&[s])).collect(),
        "single-particle",
    ));
    let ground = StateVector::uniform(&basis);
    let h = cplx::<T>(FRAC_1_SQRT_2, 0.0);
    let initial = StateVector::from_terms(&basis, &[(Configuration::from_sites(&[0]), h), (Configuration::from_sites(&[1]), h)])?;
    LayeredModel::new(ModelParts {
        name: "heisenberg_single_particle".into(),
        params: vec![param("dim", dim), param("length", length)],
        basis,
        terms,
        layers,
        ground_space: vec![ground],
        initial,
        system_size: n,
        dispersion: Some(Dispersion { dim, length }),
    })
}

/// Square-lattice Heisenberg model; site (x, y) is index x + lx·y.
pub fn build_heisenberg_2d<T: Real>(lx: usize, ly: usize, open_boundaries: bool, n_up: usize) -> Result<LayeredModel<T>> {
    build_heisenberg_2d_in(lx, ly, open_boundaries, n_up, DEFAULT_BUDGET)
}

pub fn build_heisenberg_2d_in<T: Real>(
    lx: usize,
    ly: usize,
    open_boundaries: bool,
    n_up: usize,
    budget: usize,
) -> Result<LayeredModel<T>> {
    if lx < 2 || ly < 2 {
        return Err(Error::InvalidParameter(format!("lattice {lx}x{ly} too small")));
    }
    if !open_boundaries && (lx % 2 == 1 || ly % 2 == 1 || lx < 4 || ly < 4) {
        return Err(Error::InvalidParameter("periodic lattices need even sides of at least 4".into()));
    }
    let n = lx * ly;
    let site = |x: usize, y: usize| x + lx * y;
    let mut terms = Vec::new();
    let mut layers = vec![Vec::new(); 4];
    let nx = if open_boundaries { lx - 1 } else { lx };
    let ny = if open_boundaries { ly - 1 } else { ly };
    for y in 0..ly {
        for x in 0..nx {
            layers[x % 2].push(terms.len());
            terms.push(bond_term(site(x, y), site((x + 1) % lx, y)));
        }
    }
    for y in 0..ny {
        for x in 0..lx {
            layers[2 + y % 2].push(terms.len());
            terms.push(bond_term(site(x, y), site(x, (y + 1) % ly)));
        }
    }
    let basis = Arc::new(enumerate_magnetization_sector(n, n_up, budget)?);
    let checker = (0..n).filter(|s| (s % lx + s / lx) % 2 == 0);
    let initial = StateVector::basis_state(&basis, &filled(checker, n, n_up))?;
    let ground = StateVector::uniform(&basis);
    LayeredModel::new(ModelParts {
        name: "heisenberg_2d".into(),
        params: vec![param("lx", lx), param("ly", ly), param("open", open_boundaries), param("n_up", n_up)],
        basis,
        terms,
        layers,
        ground_space: vec![ground],
        initial,
        system_size: n,
        dispersion: None,
    })
}

/// Fredkin chain with boundary spins |0⟩ (left) and |1⟩ (right) held fixed.
///
/// Bit k is site k+1; bit value 1 is Z = −1. Term j = 1..N−1 is the singlet on
/// sites (j, j+1) conditioned on (j−1, j+2) avoiding |10⟩.
pub fn build_fredkin<T: Real>(n_sites: usize) -> Result<LayeredModel<T>> {
    build_fredkin_in(n_sites, DEFAULT_BUDGET)
}

pub fn build_fredkin_in<T: Real>(n_sites: usize, budget: usize) -> Result<LayeredModel<T>> {
    if n_sites < 2 || n_sites % 2 == 1 {
        return Err(Error::InvalidParameter(format!("Fredkin chain length {n_sites} must be even")));
    }
    let mut terms = Vec::new();
    let mut layers = vec![Vec::new(); 3.min(n_sites - 1)];
    for j in 1..n_sites {
        let (l, r) = (j - 1, j);
        let left_fixed = j == 1;
        let right_fixed = j == n_sites - 1;
        let term = if left_fixed || right_fixed {
            // The boundary spin never matches the blocked pattern.
            bond_term(l, r)
        } else {
            let s = singlet::<T>();
            let mut vecs = Vec::new();
            for (a, b) in [(0usize, 0usize), (0, 1), (1, 1)] {
                let mut v = vec![czero(); 16];
                for (mid, amp) in s.iter().enumerate() {
                    v[a | mid << 1 | b << 3] = *amp;
                }
                vecs.push(v);
            }
            ProjectorTerm { support: vec![l - 1, l, r, r + 1], local_vectors: vecs, correction: PauliString::single(l, Pauli::Z) }
        };
        layers[(j - 1) % 3].push(terms.len());
        terms.push(term);
    }
    let moves: Vec<LocalMove> = terms.iter().flat_map(|t: &ProjectorTerm<T>| t.moves()).collect();
    let neel = Configuration::from_sites(&(1..n_sites).step_by(2).collect::<Vec<_>>());
    let basis = Arc::new(enumerate_reachable_sector(neel, n_sites, &moves, "dyck", budget)?);
    let ground = StateVector::uniform(&basis);
    let initial = StateVector::basis_state(&basis, &neel)?;
    LayeredModel::new(ModelParts {
        name: "fredkin".into(),
        params: vec![param("n_sites", n_sites)],
        basis,
        terms,
        layers,
        ground_space: vec![ground],
        initial,
        system_size: n_sites,
        dispersion: None,
    })
}

/// Link indexing for an open lx × ly site lattice: horizontal links row-major,
/// then vertical links row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DimerLattice {
    pub lx: usize,
    pub ly: usize,
}

impl DimerLattice {
    pub fn n_links(&self) -> usize {
        (self.lx - 1) * self.ly + self.lx * (self.ly - 1)
    }

    /// Link between (x, y) and (x+1, y).
    pub fn horizontal(&self, x: usize, y: usize) -> usize {
        x + (self.lx - 1) * y
    }

    /// Link between (x, y) and (x, y+1).
    pub fn vertical(&self, x: usize, y: usize) -> usize {
        (self.lx - 1) * self.ly + x + self.lx * y
    }

    /// Sites joined by a link.
    pub fn endpoints(&self, link: usize) -> ((usize, usize), (usize, usize)) {
        let nh = (self.lx - 1) * self.ly;
        if link < nh {
            let (x, y) = (link % (self.lx - 1), link / (self.lx - 1));
            ((x, y), (x + 1, y))
        } else {
            let k = link - nh;
            let (x, y) = (k % self.lx, k / self.lx);
            ((x, y), (x, y + 1))
        }
    }

    /// True if every site is covered by exactly one occupied link.
    pub fn is_perfect_matching(&self, c: &Configuration) -> bool {
        let mut cover = vec![0u8; self.lx * self.ly];
        for link in 0..self.n_links() {
            if c.get(link) {
                let (a, b) = self.endpoints(link);
                cover[a.0 + self.lx * a.1] += 1;
                cover[b.0 + self.lx * b.1] += 1;
            }
        }
        cover.iter().all(|&k| k == 1)
    }
}

/// Rokhsar-Kivelson dimer model at the RK point, one term per plaquette.
pub fn build_qdm<T: Real>(lx_sites: usize, ly_sites: usize) -> Result<LayeredModel<T>> {
    build_qdm_in(lx_sites, ly_sites, DEFAULT_BUDGET)
}

pub fn build_qdm_in<T: Real>(lx: usize, ly: usize, budget: usize) -> Result<LayeredModel<T>> {
    if lx < 2 || ly < 2 {
        return Err(Error::InvalidParameter(format!("dimer lattice {lx}x{ly} too small")));
    }
    if lx * ly % 2 == 1 {
        return Err(Error::InvalidParameter(format!("{lx}x{ly} sites admit no dimer covering")));
    }
    let lat = DimerLattice { lx, ly };
    if lat.n_links() > crate::basis::MAX_SITES {
        return Err(Error::Capacity { what: "dimer links".into(), dim: lat.n_links(), budget: crate::basis::MAX_SITES });
    }
    let mut terms = Vec::new();
    let mut layers = vec![Vec::new(); 2];
    let amp = FRAC_1_SQRT_2;
    for py in 0..ly - 1 {
        for px in 0..lx - 1 {
            let support = vec![lat.horizontal(px, py), lat.horizontal(px, py + 1), lat.vertical(px, py), lat.vertical(px + 1, py)];
            let mut v = vec![czero(); 16];
            v[0b0011] = cplx(amp, 0.0);
            v[0b1100] = cplx(-amp, 0.0);
            let correction = PauliString::single(support[0], Pauli::Z);
            layers[(px + py) % 2].push(terms.len());
            terms.push(ProjectorTerm { support, local_vectors: vec![v], correction });
        }
    }
    let mut links = Vec::new();
    if lx % 2 == 0 {
        for y in 0..ly {
            links.extend((0..lx).step_by(2).map(|x| lat.horizontal(x, y)));
        }
    } else {
        for y in (0..ly).step_by(2) {
            links.extend((0..lx).map(|x| lat.vertical(x, y)));
        }
    }
    let columnar = Configuration::from_sites(&links);
    let moves: Vec<LocalMove> = terms.iter().flat_map(|t: &ProjectorTerm<T>| t.moves()).collect();
    let basis = Arc::new(enumerate_reachable_sector(columnar, lat.n_links(), &moves, "dimer-krylov", budget)?);
    let ground = StateVector::uniform(&basis);
    let initial = StateVector::basis_state(&basis, &columnar)?;
    LayeredModel::new(ModelParts {
        name: "qdm".into(),
        params: vec![param("lx", lx), param("ly", ly)],
        basis,
        terms,
        layers,
        ground_space: vec![ground],
        initial,
        system_size: lx * ly,
        dispersion: None,
    })
}

/// Cluster-Ising ring at g = 0 on the full space.
pub fn build_cluster_ising<T: Real>(n_sites: usize) -> Result<LayeredModel<T>> {
    if n_sites < 3 || n_sites % 3 != 0 {
        return Err(Error::InvalidParameter(format!("cluster-Ising ring of {n_sites} sites needs a multiple of 3")));
    }
    let basis = Arc::new(SectorBasis::full(n_sites, DEFAULT_BUDGET)?);
    let local = cluster_ising_local::<T>();
    let eig = local.clone().symmetric_eigen();
    let mut vectors = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.as_f64() > 0.5 {
            vectors.push(eig.eigenvectors.column(k).iter().copied().collect::<Vec<_>>());
        }
    }
    let mut terms = Vec::new();
    let mut layers = vec![Vec::new(); 3];
    for i in 0..n_sites {
        let support = vec![(i + n_sites - 1) % n_sites, i, (i + 1) % n_sites];
        layers[i % 3].push(terms.len());
        terms.push(ProjectorTerm { support, local_vectors: vectors.clone(), correction: PauliString::single(i, Pauli::X) });
    }
    let all_up = StateVector::basis_state(&basis, &Configuration::empty())?;
    let all_down = StateVector::basis_state(&basis, &Configuration::from_sites(&(0..n_sites).collect::<Vec<_>>()))?;
    let initial = StateVector::uniform(&basis);
    LayeredModel::new(ModelParts {
        name: "cluster_ising".into(),
        params: vec![param("n_sites", n_sites), param("g", 0)],
        basis,
        terms,
        layers,
        ground_space: vec![all_up, all_down],
        initial,
        system_size: n_sites,
        dispersion: None,
    })
}

/// 1/2 + ZXZ/4 − (ZZI + IZZ)/4 − X/4 on (i−1, i, i+1).
pub fn cluster_ising_local<T: Real>() -> DMatrix<Complex<T>> {
    let sup = [0, 1, 2];
    let m = |f: Vec<(usize, Pauli)>| PauliString::new(f).local_matrix::<T>(&sup);
    let q = |x: f64| cplx::<T>(x, 0.0);
    DMatrix::<Complex<T>>::identity(8, 8) * q(0.5) + m(vec![(0, Pauli::Z), (1, Pauli::X), (2, Pauli::Z)]) * q(0.25)
        - (m(vec![(0, Pauli::Z), (1, Pauli::Z)]) + m(vec![(1, Pauli::Z), (2, Pauli::Z)])) * q(0.25)
        - m(vec![(1, Pauli::X)]) * q(0.25)
}

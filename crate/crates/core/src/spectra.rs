//! Sector Hamiltonians, lowest eigenpairs and gap-scaling fits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fits::{linear_fit, LinearFit};
use crate::models::LayeredModel;
use crate::num::{czero, Complex, Real};

/// Below this dimension the dense eigensolver is used.
pub const DENSE_CUTOFF: usize = 2048;
/// Eigenvalues closer than this are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 5000;
const KRYLOV_MAX: usize = 240;

/// H = Σ P_i in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian<T: Real> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex<T>>,
}

impl<T: Real> SparseHamiltonian<T> {
    pub fn assemble(model: &LayeredModel<T>) -> Self {
        let dim = model.dim();
        let mut entries: Vec<(usize, usize, Complex<T>)> =
            model.plans().iter().flat_map(|p| p.matrix_elements()).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex<T>> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries (col, value) of a row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.row(r).find(|(j, _)| *j == c).map_or(czero(), |(_, v)| v)
    }

    pub fn matvec(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = czero::<T>();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// ⟨x|H|x⟩ (real part).
    pub fn quadratic_form(&self, x: &[Complex<T>]) -> T {
        let mut y = vec![czero(); self.dim];
        self.matvec(x, &mut y);
        x.iter().zip(&y).fold(T::zero(), |acc, (a, b)| acc + (a.conj() * b).re)
    }

    pub fn to_dense(&self) -> DMatrix<Complex<T>> {
        let mut m = DMatrix::from_element(self.dim, self.dim, czero());
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Largest |H_rc − conj(H_cr)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm_sqr().as_f64().sqrt());
            }
        }
        worst
    }
}

/// Hermitian eigendecomposition, ascending. Uses the real solver when the
/// matrix has no imaginary part.
pub fn hermitian_eigen<T: Real>(m: &DMatrix<Complex<T>>) -> (Vec<T>, DMatrix<Complex<T>>) {
    let real = m.iter().all(|z| z.im == T::zero());
    let (vals, vecs) = if real {
        let re = m.map(|z| z.re);
        let eig = re.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors.map(|x| Complex::new(x, T::zero())))
    } else {
        let eig = m.clone().symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

#[derive(Clone, Debug)]
pub struct GapResult<T: Real> {
    pub e0: f64,
    /// Lowest level above the ground manifold.
    pub e1: f64,
    pub gap: f64,
    /// Number of eigenvalues within [`DEGENERACY_TOL`] of e0.
    pub degeneracy: usize,
    pub ground: Vec<Complex<T>>,
    pub iterations: usize,
    pub residual: f64,
    pub dense: bool,
}

/// Ground energy, gap above the (possibly degenerate) ground level, and a ground vector.
pub fn lowest_pair<T: Real>(h: &SparseHamiltonian<T>) -> Result<GapResult<T>> {
    if h.dim() < 2 {
        return Err(Error::InvalidParameter("need dimension at least 2".into()));
    }
    if h.dim() < DENSE_CUTOFF {
        let (vals, vecs) = hermitian_eigen(&h.to_dense());
        let e0 = vals[0].as_f64();
        let degeneracy = vals.iter().take_while(|v| v.as_f64() - e0 < DEGENERACY_TOL).count();
        if degeneracy == vals.len() {
            return Err(Error::InvalidParameter("spectrum is a single degenerate level".into()));
        }
        let e1 = vals[degeneracy].as_f64();
        let ground: Vec<_> = vecs.column(0).iter().copied().collect();
        let residual = residual_norm(h, &ground, vals[0]);
        return Ok(GapResult { e0, e1, gap: e1 - e0, degeneracy, ground, iterations: 0, residual, dense: true });
    }
    let mut found: Vec<Vec<Complex<T>>> = Vec::new();
    let mut energies = Vec::new();
    let mut iterations = 0;
    let mut ground_residual = 0.0;
    loop {
        let (e, v, it, res) = lanczos_lowest(h, &found, T::TOL, MAX_ITERATIONS - iterations.min(MAX_ITERATIONS - 1), 17 + found.len() as u64)?;
        iterations += it;
        if found.is_empty() {
            ground_residual = res;
        }
        energies.push(e);
        found.push(v);
        let e0 = energies[0];
        if e - e0 > DEGENERACY_TOL {
            let degeneracy = energies.len() - 1;
            let ground = found.swap_remove(0);
            return Ok(GapResult { e0, e1: e, gap: e - e0, degeneracy, ground, iterations, residual: ground_residual, dense: false });
        }
        if found.len() >= h.dim() || found.len() > 16 {
            return Err(Error::InvalidParameter("ground manifold too degenerate".into()));
        }
    }
}

fn residual_norm<T: Real>(h: &SparseHamiltonian<T>, v: &[Complex<T>], e: T) -> f64 {
    let mut y = vec![czero(); h.dim()];
    h.matvec(v, &mut y);
    y.iter().zip(v).map(|(a, b)| (*a - b.scale(e)).norm_sqr().as_f64()).sum::<f64>().sqrt()
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt()
}

fn orthogonalize<T: Real>(w: &mut [Complex<T>], against: &[Vec<Complex<T>>]) {
    for _ in 0..2 {
        for v in against {
            let c = dot(v, w);
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * y;
            }
        }
    }
}

/// Lowest eigenpair of H restricted to the orthogonal complement of `deflate`
/// (Lanczos with full reorthogonalization and restarts).
pub fn lanczos_lowest<T: Real>(
    h: &SparseHamiltonian<T>,
    deflate: &[Vec<Complex<T>>],
    tol: f64,
    max_iterations: usize,
    seed: u64,
) -> Result<(f64, Vec<Complex<T>>, usize, f64)> {
    let n = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<Complex<T>> =
        (0..n).map(|_| Complex::new(T::of(rng.random::<f64>() - 0.5), T::of(rng.random::<f64>() - 0.5))).collect();
    let krylov_max = KRYLOV_MAX.min(n - deflate.len());
    let mut iterations = 0;
    let mut best = (f64::NAN, start.clone(), f64::INFINITY);
    while iterations < max_iterations {
        orthogonalize(&mut start, deflate);
        let s = norm(&start);
        if s.as_f64() < 1e-300 {
            return Err(Error::NonConvergence { iterations, residual: f64::INFINITY });
        }
        let mut basis: Vec<Vec<Complex<T>>> = vec![start.iter().map(|x| x.unscale(s)).collect()];
        let mut alphas: Vec<T> = Vec::new();
        let mut betas: Vec<T> = Vec::new();
        let mut w = vec![czero(); n];
        loop {
            let j = basis.len() - 1;
            h.matvec(&basis[j], &mut w);
            iterations += 1;
            let a = dot(&basis[j], &w).re;
            alphas.push(a);
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, deflate);
            let b = norm(&w);
            let m = alphas.len();
            let exhausted = b.as_f64() < 1e-12 || m >= krylov_max || iterations >= max_iterations;
            if m % 8 == 0 || exhausted {
                let t = DMatrix::from_fn(m, m, |r, c| {
                    if r == c {
                        alphas[r]
                    } else if r + 1 == c {
                        betas[r]
                    } else if c + 1 == r {
                        betas[c]
                    } else {
                        T::zero()
                    }
                });
                let eig = t.symmetric_eigen();
                let (k, theta) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                    .map(|(k, v)| (k, *v))
                    .unwrap();
                let estimate = (b * eig.eigenvectors[(m - 1, k)]).as_f64().abs();
                if estimate < tol || exhausted {
                    let mut x = vec![czero::<T>(); n];
                    for (i, v) in basis.iter().enumerate() {
                        let c = eig.eigenvectors[(i, k)];
                        for (xi, vi) in x.iter_mut().zip(v) {
                            *xi += vi.scale(c);
                        }
                    }
                    orthogonalize(&mut x, deflate);
                    let xn = norm(&x);
                    for xi in &mut x {
                        *xi = xi.unscale(xn);
                    }
                    let res = residual_norm(h, &x, theta);
                    if res < tol {
                        return Ok((theta.as_f64(), x, iterations, res));
                    }
                    if res < best.2 {
                        best = (theta.as_f64(), x.clone(), res);
                    }
                    if exhausted {
                        start = x;
                        break;
                    }
                }
            }
            betas.push(b);
            basis.push(w.iter().map(|x| x.unscale(b)).collect());
        }
    }
    Err(Error::NonConvergence { iterations, residual: best.2 })
}

/// Dynamical exponent from Δ ∝ N^{−z/d}.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ZFit {
    pub z: f64,
    pub z_ci: (f64, f64),
    pub r2: f64,
    pub residuals: Vec<f64>,
}

pub fn gap_scaling_fit(sizes: &[f64], gaps: &[f64], dim: usize) -> Result<ZFit> {
    if sizes.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} sizes, need at least 4", sizes.len())));
    }
    let lo = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sizes.iter().cloned().fold(0.0, f64::max);
    if hi < 1.5 * lo {
        return Err(Error::DegenerateFit(format!("sizes span {lo}..{hi}, less than a factor 1.5")));
    }
    let x: Vec<f64> = sizes.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let LinearFit { slope, slope_ci, r2, residuals, .. } = linear_fit(&x, &y)?;
    let d = dim as f64;
    Ok(ZFit { z: -slope * d, z_ci: (-slope_ci.1 * d, -slope_ci.0 * d), r2, residuals })
}

/// Full spectrum, ascending (dense).
pub fn spectrum<T: Real>(h: &SparseHamiltonian<T>) -> DVector<f64> {
    let (vals, _) = hermitian_eigen(&h.to_dense());
    DVector::from_iterator(vals.len(), vals.into_iter().map(|v| v.as_f64()))
}

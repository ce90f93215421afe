use std::fmt;

use nalgebra::DMatrix;

use crate::basis::Configuration;
use crate::num::{cplx, Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Matrix element ⟨out|σ|bit⟩ for the single output bit it can reach.
    fn phase<T: Real>(self, bit: bool) -> Complex<T> {
        match (self, bit) {
            (Pauli::I | Pauli::X, _) => cplx(1.0, 0.0),
            (Pauli::Z, false) => cplx(1.0, 0.0),
            (Pauli::Z, true) => cplx(-1.0, 0.0),
            // Y|0> = i|1>, Y|1> = -i|0>
            (Pauli::Y, false) => cplx(0.0, 1.0),
            (Pauli::Y, true) => cplx(0.0, -1.0),
        }
    }
}

/// Signed product of single-site Paulis.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub factors: Vec<(usize, Pauli)>,
    pub negative: bool,
}

impl PauliString {
    pub fn identity() -> Self {
        Self { factors: Vec::new(), negative: false }
    }

    pub fn single(site: usize, p: Pauli) -> Self {
        Self { factors: vec![(site, p)], negative: false }
    }

    pub fn new(factors: Vec<(usize, Pauli)>) -> Self {
        let factors = factors.into_iter().filter(|(_, p)| *p != Pauli::I).collect();
        Self { factors, negative: false }
    }

    pub fn is_diagonal(&self) -> bool {
        self.factors.iter().all(|(_, p)| !p.flips())
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.iter().map(|(s, _)| *s)
    }

    /// Image configuration and amplitude factor of `σ|c⟩`.
    #[inline]
    pub fn act<T: Real>(&self, c: &Configuration) -> (Configuration, Complex<T>) {
        let mut out = *c;
        let mut amp: Complex<T> = cplx(if self.negative { -1.0 } else { 1.0 }, 0.0);
        for &(s, p) in &self.factors {
            amp *= p.phase::<T>(c.get(s));
            if p.flips() {
                out.flip(s);
            }
        }
        (out, amp)
    }

    /// Dense 2^k matrix on `support` (support[j] is bit j of the local index).
    pub fn local_matrix<T: Real>(&self, support: &[usize]) -> DMatrix<Complex<T>> {
        let d = 1usize << support.len();
        let mut m = DMatrix::from_element(d, d, cplx(0.0, 0.0));
        for l in 0..d {
            let c = Configuration::empty().with_local(support, l);
            let (out, amp) = self.act::<T>(&c);
            m[(out.extract(support), l)] = amp;
        }
        m
    }

    /// All 4^k strings on `support`, identity first.
    pub fn all_on(support: &[usize]) -> Vec<PauliString> {
        let k = support.len();
        (0..1usize << (2 * k))
            .map(|code| {
                PauliString::new(
                    support.iter().enumerate().map(|(j, &s)| (s, Pauli::ALL[(code >> (2 * j)) & 3])).collect(),
                )
            })
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-")?;
        }
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        for (k, (s, p)) in self.factors.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            write!(f, "{p:?}{s}")?;
        }
        Ok(())
    }
}

//! Computational-basis configurations and closed sectors.
//!
//! Site `i` is bit `i` of the configuration. String dumps print the highest
//! site first.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

pub const MAX_SITES: usize = 256;
const WORDS: usize = MAX_SITES / 64;

/// Default cap on the number of stored configurations.
pub const DEFAULT_BUDGET: usize = 1 << 22;

/// Fixed-width bit pattern; bits above the owning basis' `n_sites` are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Configuration {
    words: [u64; WORDS],
}

impl Configuration {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_u64(bits: u64) -> Self {
        let mut c = Self::default();
        c.words[0] = bits;
        c
    }

    pub fn from_sites(sites: &[usize]) -> Self {
        let mut c = Self::default();
        for &s in sites {
            c.set(s, true);
        }
        c
    }

    /// Parses a 0/1 string written with the highest site first.
    pub fn parse(s: &str) -> Result<Self> {
        let n = s.len();
        if n > MAX_SITES {
            return Err(Error::InvalidParameter(format!("{n} sites exceed {MAX_SITES}")));
        }
        let mut c = Self::default();
        for (k, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => c.set(n - 1 - k, true),
                _ => return Err(Error::InvalidParameter(format!("bad bit character {ch:?}"))),
            }
        }
        Ok(c)
    }

    #[inline]
    pub fn get(&self, site: usize) -> bool {
        (self.words[site >> 6] >> (site & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, site: usize, value: bool) {
        let mask = 1u64 << (site & 63);
        if value {
            self.words[site >> 6] |= mask;
        } else {
            self.words[site >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, site: usize) {
        self.words[site >> 6] ^= 1u64 << (site & 63);
    }

    #[inline]
    pub fn flipped(mut self, site: usize) -> Self {
        self.flip(site);
        self
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Low 64 bits; exact when the configuration has at most 64 sites.
    pub fn low_word(&self) -> u64 {
        self.words[0]
    }

    /// Bits on `support` packed into a local index (support[j] is bit j).
    #[inline]
    pub fn extract(&self, support: &[usize]) -> usize {
        support.iter().enumerate().fold(0, |acc, (j, &s)| acc | (usize::from(self.get(s)) << j))
    }

    /// Overwrites the bits on `support` with the local index `local`.
    #[inline]
    pub fn with_local(mut self, support: &[usize], local: usize) -> Self {
        for (j, &s) in support.iter().enumerate() {
            self.set(s, (local >> j) & 1 == 1);
        }
        self
    }

    pub fn to_bit_string(&self, n_sites: usize) -> String {
        (0..n_sites).rev().map(|s| if self.get(s) { '1' } else { '0' }).collect()
    }

    fn key(&self) -> [u64; WORDS] {
        let mut k = self.words;
        k.reverse();
        k
    }
}

impl PartialOrd for Configuration {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Numeric order of the bit pattern.
impl Ord for Configuration {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let top = (0..MAX_SITES).rev().find(|&s| self.get(s)).map_or(1, |s| s + 1);
        write!(f, "Configuration({})", self.to_bit_string(top))
    }
}

/// Involutive local rewrite `from <-> to` on a support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalMove {
    pub support: Vec<usize>,
    pub from: usize,
    pub to: usize,
}

impl LocalMove {
    /// Patterns are bit slices with `pattern[j]` the value on `support[j]`.
    pub fn new(support: Vec<usize>, from: &[u8], to: &[u8]) -> Result<Self> {
        if from.len() != to.len() {
            return Err(Error::MalformedMove(format!(
                "patterns of width {} and {}",
                from.len(),
                to.len()
            )));
        }
        if from.len() != support.len() {
            return Err(Error::MalformedMove(format!(
                "pattern width {} on support of {} sites",
                from.len(),
                support.len()
            )));
        }
        let pack = |p: &[u8]| -> Result<usize> {
            p.iter().enumerate().try_fold(0usize, |acc, (j, &b)| match b {
                0 => Ok(acc),
                1 => Ok(acc | 1 << j),
                _ => Err(Error::MalformedMove(format!("bit value {b}"))),
            })
        };
        Ok(Self { from: pack(from)?, to: pack(to)?, support })
    }

    pub fn from_local(support: Vec<usize>, from: usize, to: usize) -> Self {
        Self { support, from, to }
    }

    /// Image of `c` under the move, if either pattern matches.
    pub fn apply(&self, c: &Configuration) -> Option<Configuration> {
        let local = c.extract(&self.support);
        if local == self.from {
            Some(c.with_local(&self.support, self.to))
        } else if local == self.to {
            Some(c.with_local(&self.support, self.from))
        } else {
            None
        }
    }
}

/// Sorted configurations of a closed sector with O(1) reverse lookup.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_sites: usize,
    configs: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
    label: String,
    full: bool,
}

impl SectorBasis {
    pub fn from_configs(n_sites: usize, mut configs: Vec<Configuration>, label: &str) -> Self {
        configs.sort_unstable();
        configs.dedup();
        let index = configs.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Self { n_sites, configs, index, label: label.to_string(), full: false }
    }

    /// All 2^n configurations.
    pub fn full(n_sites: usize, budget: usize) -> Result<Self> {
        if n_sites >= 63 || (1usize << n_sites) > budget {
            return Err(Error::Capacity {
                what: format!("full space of {n_sites} sites"),
                dim: if n_sites >= 63 { usize::MAX } else { 1 << n_sites },
                budget,
            });
        }
        let configs: Vec<_> = (0..1u64 << n_sites).map(Configuration::from_u64).collect();
        let index = configs.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Ok(Self { n_sites, configs, index, label: "full".into(), full: true })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    #[inline]
    pub fn config(&self, i: usize) -> Configuration {
        self.configs[i]
    }

    #[inline]
    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        if self.full {
            let w = c.low_word();
            return (w < self.configs.len() as u64 && *c == Configuration::from_u64(w)).then_some(w as usize);
        }
        self.index.get(c).copied()
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        self.index_of(c).is_some()
    }

    pub fn dump(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        for c in &self.configs {
            writeln!(out, "{}", c.to_bit_string(self.n_sites))?;
        }
        Ok(())
    }
}

pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Configurations of `n_sites` bits with exactly `n_up` set bits.
pub fn enumerate_magnetization_sector(n_sites: usize, n_up: usize, budget: usize) -> Result<SectorBasis> {
    if n_up > n_sites || n_sites > MAX_SITES {
        return Err(Error::InvalidParameter(format!("n_up={n_up} with n_sites={n_sites}")));
    }
    let dim = binomial(n_sites, n_up).unwrap_or(usize::MAX);
    if dim > budget {
        return Err(Error::Capacity { what: format!("magnetization sector ({n_sites}, {n_up})"), dim, budget });
    }
    let mut configs = Vec::with_capacity(dim);
    let mut chosen = Vec::with_capacity(n_up);
    combinations(n_sites, n_up, 0, &mut chosen, &mut configs);
    Ok(SectorBasis::from_configs(n_sites, configs, &format!("n_up={n_up}")))
}

fn combinations(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, out: &mut Vec<Configuration>) {
    if chosen.len() == k {
        out.push(Configuration::from_sites(chosen));
        return;
    }
    for s in start..=(n - (k - chosen.len())) {
        chosen.push(s);
        combinations(n, k, s + 1, chosen, out);
        chosen.pop();
    }
}

fn check_moves(n_sites: usize, moves: &[LocalMove]) -> Result<()> {
    for m in moves {
        if let Some(&s) = m.support.iter().find(|&&s| s >= n_sites) {
            return Err(Error::MalformedMove(format!("site {s} outside {n_sites} sites")));
        }
        let width = 1usize << m.support.len();
        if m.from >= width || m.to >= width {
            return Err(Error::MalformedMove("pattern wider than support".into()));
        }
    }
    Ok(())
}

/// Breadth-first closure of `seed` under `moves`.
pub fn enumerate_reachable_sector(
    seed: Configuration,
    n_sites: usize,
    moves: &[LocalMove],
    label: &str,
    budget: usize,
) -> Result<SectorBasis> {
    check_moves(n_sites, moves)?;
    let mut seen: HashMap<Configuration, ()> = HashMap::new();
    let mut queue = VecDeque::from([seed]);
    seen.insert(seed, ());
    while let Some(c) = queue.pop_front() {
        for m in moves {
            if let Some(next) = m.apply(&c) {
                if seen.insert(next, ()).is_none() {
                    if seen.len() > budget {
                        return Err(Error::Capacity { what: format!("reachable sector {label}"), dim: seen.len(), budget });
                    }
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(SectorBasis::from_configs(n_sites, seen.into_keys().collect(), label))
}

/// Depth-first variant of [`enumerate_reachable_sector`], kept as a cross-check.
pub fn enumerate_reachable_sector_dfs(
    seed: Configuration,
    n_sites: usize,
    moves: &[LocalMove],
    label: &str,
    budget: usize,
) -> Result<SectorBasis> {
    check_moves(n_sites, moves)?;
    let mut seen = std::collections::HashSet::from([seed]);
    let mut stack = vec![seed];
    while let Some(c) = stack.pop() {
        for m in moves.iter().rev() {
            if let Some(next) = m.apply(&c) {
                if seen.insert(next) {
                    if seen.len() > budget {
                        return Err(Error::Capacity { what: format!("reachable sector {label}"), dim: seen.len(), budget });
                    }
                    stack.push(next);
                }
            }
        }
    }
    Ok(SectorBasis::from_configs(n_sites, seen.into_iter().collect(), label))
}

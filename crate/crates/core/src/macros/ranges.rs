//! Ordered enumeration of range tuples with ranking in both directions, so
//! a member can be found from its position and back without listing others.

use crate::syntax::{Power, PowerKind, RangeItem};

pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Ordered selections of `n` out of `m - done` remaining elements.
fn falling(m: u64, n: u64) -> Option<u128> {
    if n > m {
        return Some(0);
    }
    (0..n).try_fold(1u128, |acc, i| acc.checked_mul((m - i) as u128))
}

/// `n`-tuples over `0..m`: all of them (`Repeat`), those without repeats
/// (`Perm`) or the strictly increasing ones (`Comb`), in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tuples {
    pub m: u64,
    pub kind: PowerKind,
    pub n: u32,
}

impl Tuples {
    pub fn single(m: u64) -> Tuples {
        Tuples {
            m,
            kind: PowerKind::Repeat,
            n: 1,
        }
    }

    pub fn count(&self) -> Option<u128> {
        let (m, n) = (self.m, self.n as u64);
        match self.kind {
            PowerKind::Repeat => (self.m as u128).checked_pow(self.n),
            PowerKind::Perm => falling(m, n),
            PowerKind::Comb => binomial(m, n),
        }
    }

    /// Completions of a prefix of length `len`.
    fn tail_count(&self, len: u64) -> u128 {
        let (m, n) = (self.m, self.n as u64);
        match self.kind {
            PowerKind::Repeat => (m as u128).pow((n - len) as u32),
            PowerKind::Perm => falling(m - len, n - len).unwrap_or(u128::MAX),
            PowerKind::Comb => unreachable!(),
        }
    }

    pub fn unrank(&self, mut r: u128) -> Vec<u64> {
        let n = self.n as u64;
        let mut out = Vec::with_capacity(n as usize);
        match self.kind {
            PowerKind::Repeat | PowerKind::Perm => {
                for pos in 0..n {
                    let block = self.tail_count(pos + 1);
                    let k = (r / block) as u64;
                    r %= block;
                    let v = if self.kind == PowerKind::Repeat {
                        k
                    } else {
                        // The k-th element not used yet.
                        let mut used = out.clone();
                        used.sort_unstable();
                        used.iter().fold(k, |v, &u| if u <= v { v + 1 } else { v })
                    };
                    out.push(v);
                }
            }
            PowerKind::Comb => {
                let mut v = 0;
                for pos in 0..n {
                    loop {
                        let block = binomial(self.m - v - 1, n - pos - 1).unwrap_or(u128::MAX);
                        if r < block {
                            break;
                        }
                        r -= block;
                        v += 1;
                    }
                    out.push(v);
                    v += 1;
                }
            }
        }
        out
    }

    /// Position of `t`, or `None` if it is not one of the tuples.
    pub fn rank(&self, t: &[u64]) -> Option<u128> {
        let n = self.n as u64;
        if t.len() as u64 != n || t.iter().any(|&v| v >= self.m) {
            return None;
        }
        let mut r: u128 = 0;
        match self.kind {
            PowerKind::Repeat | PowerKind::Perm => {
                for (pos, &v) in t.iter().enumerate() {
                    let before = &t[..pos];
                    let k = if self.kind == PowerKind::Repeat {
                        v
                    } else {
                        if before.contains(&v) {
                            return None;
                        }
                        v - before.iter().filter(|&&u| u < v).count() as u64
                    };
                    r = r.checked_add((k as u128).checked_mul(self.tail_count(pos as u64 + 1))?)?;
                }
            }
            PowerKind::Comb => {
                if t.windows(2).any(|w| w[0] >= w[1]) {
                    return None;
                }
                let mut start = 0;
                for (pos, &v) in t.iter().enumerate() {
                    for u in start..v {
                        r = r.checked_add(binomial(self.m - u - 1, n - pos as u64 - 1)?)?;
                    }
                    start = v + 1;
                }
            }
        }
        Some(r)
    }
}

/// A written multi-range with every item resolved to literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpace {
    /// Lower bound and tuple shape per item.
    items: Vec<(i64, Tuples)>,
}

/// Raised for index variables that survive into a range being enumerated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundVar(pub String);

impl IndexSpace {
    pub fn new(range: &[RangeItem]) -> Result<IndexSpace, UnboundVar> {
        let items = range
            .iter()
            .map(|it| match it {
                RangeItem::Range { lo, hi } => Ok((*lo, Tuples::single((hi - lo + 1) as u64))),
                RangeItem::Index(v) => Ok((*v, Tuples::single(1))),
                RangeItem::Power {
                    lo,
                    hi,
                    power: Power { kind, n },
                } => Ok((
                    *lo,
                    Tuples {
                        m: (hi - lo + 1) as u64,
                        kind: *kind,
                        n: *n,
                    },
                )),
                RangeItem::Var(v) => Err(UnboundVar(v.clone())),
            })
            .collect::<Result<_, _>>()?;
        Ok(IndexSpace { items })
    }

    /// Number of values in each tuple.
    pub fn arity(&self) -> usize {
        self.items.iter().map(|(_, t)| t.n as usize).sum()
    }

    pub fn count(&self) -> Option<u128> {
        self.items.iter().try_fold(1u128, |acc, (_, t)| acc.checked_mul(t.count()?))
    }

    /// The `r`-th tuple; the first item varies slowest.
    pub fn unrank(&self, mut r: u128) -> Vec<i64> {
        let mut parts = Vec::with_capacity(self.items.len());
        for (lo, t) in self.items.iter().rev() {
            let c = t.count().unwrap_or(u128::MAX);
            parts.push((lo, t, r % c));
            r /= c;
        }
        let mut out = Vec::with_capacity(self.arity());
        for (lo, t, k) in parts.into_iter().rev() {
            out.extend(t.unrank(k).into_iter().map(|v| lo + v as i64));
        }
        out
    }

    pub fn rank(&self, values: &[i64]) -> Option<u128> {
        if values.len() != self.arity() {
            return None;
        }
        let mut r: u128 = 0;
        let mut at = 0;
        for (lo, t) in &self.items {
            let chunk = &values[at..at + t.n as usize];
            at += t.n as usize;
            let offs: Option<Vec<u64>> = chunk.iter().map(|&v| u64::try_from(v - lo).ok()).collect();
            let k = t.rank(&offs?)?;
            r = r.checked_mul(t.count()?)?.checked_add(k)?;
        }
        Some(r)
    }

    /// Every tuple in order; only for small spaces.
    pub fn all(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.count().unwrap_or(0)).map(|r| self.unrank(r))
    }
}

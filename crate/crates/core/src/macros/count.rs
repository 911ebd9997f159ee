//! Model counts from the hole tree, kept as products of powers so that
//! collections with hundreds of thousands of members stay printable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::{HoleKind, MacroProgram};

/// Counts with more bits than this print as powers.
const PLAIN_BITS: u64 = 96;

/// A count written as a product of `base^exponent` factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelCount {
    factors: BTreeMap<BigUint, u64>,
    /// False when some hole is reachable from more than one place; the count
    /// then treats those choices as independent and is an upper bound.
    pub exact: bool,
}

impl ModelCount {
    pub fn from_u64(n: u64) -> ModelCount {
        ModelCount::power(BigUint::from(n), 1)
    }

    pub fn power(base: BigUint, exp: u64) -> ModelCount {
        let mut factors = BTreeMap::new();
        if exp > 0 && !base.is_one() {
            factors.insert(base, exp);
        }
        ModelCount { factors, exact: true }
    }

    pub fn is_zero(&self) -> bool {
        self.factors.keys().any(|b| b.is_zero())
    }

    pub fn mul(&self, other: &ModelCount) -> ModelCount {
        let mut factors = self.factors.clone();
        for (b, e) in &other.factors {
            *factors.entry(b.clone()).or_insert(0) += e;
        }
        if factors.keys().any(|b| b.is_zero()) {
            factors = BTreeMap::from([(BigUint::zero(), 1)]);
        }
        ModelCount {
            factors,
            exact: self.exact && other.exact,
        }
    }

    pub fn add(&self, other: &ModelCount) -> ModelCount {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        let mut out = ModelCount::power(self.value() + other.value(), 1);
        out.exact = self.exact && other.exact;
        out
    }

    pub fn value(&self) -> BigUint {
        self.factors.iter().fold(BigUint::one(), |acc, (b, &e)| acc * b.pow(e as u32))
    }

    pub fn log10(&self) -> f64 {
        self.factors.iter().map(|(b, &e)| e as f64 * log10_big(b)).sum()
    }

    /// Whether the count is larger than `n`, without expanding big powers.
    pub fn exceeds(&self, n: u64) -> bool {
        !self.is_zero() && (self.log10() > 20.0 || self.value() > BigUint::from(n))
    }

    fn bits(&self) -> u64 {
        self.factors.iter().map(|(b, &e)| b.bits().saturating_mul(e)).sum()
    }

    /// `(base, exponent)` when the count is a single power.
    pub fn as_power(&self) -> Option<(BigUint, u64)> {
        match self.factors.len() {
            0 => Some((BigUint::one(), 1)),
            1 => self.factors.iter().next().map(|(b, &e)| (b.clone(), e)),
            _ => None,
        }
    }
}

fn log10_big(b: &BigUint) -> f64 {
    match b.to_f64() {
        Some(f) if f.is_finite() && f > 0.0 => f.log10(),
        _ if b.is_zero() => f64::NEG_INFINITY,
        _ => {
            let shift = b.bits() - 53;
            (b >> shift).to_f64().unwrap().log10() + shift as f64 * std::f64::consts::LOG10_2
        }
    }
}

impl fmt::Display for ModelCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits() <= PLAIN_BITS {
            return write!(f, "{}", self.value());
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(b, e)| if *e == 1 { b.to_string() } else { format!("{b}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl Serialize for ModelCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            count: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            value: Option<String>,
            log10: f64,
            exact: bool,
        }
        let value = (self.bits() <= 4096).then(|| self.value().to_string());
        Repr {
            count: self.to_string(),
            value,
            log10: (self.log10() * 1000.0).round() / 1000.0,
            exact: self.exact,
        }
        .serialize(s)
    }
}

/// Number of valid selections, by summing over implementations and
/// multiplying over the holes each one calls. Collections whose members call
/// no holes contribute `2^members` without visiting members.
pub fn count_models(p: &MacroProgram) -> ModelCount {
    let mut memo: HashMap<u32, ModelCount> = HashMap::new();
    let mut referrers: HashMap<u32, u32> = HashMap::new();
    for &h in &p.base_holes {
        *referrers.entry(h).or_default() += 1;
    }
    for (k, h) in p.holes.iter().enumerate() {
        let mut called: Vec<u32> = match &h.kind {
            HoleKind::Eager(v) => v.iter().flat_map(|e| e.children.iter().copied()).collect(),
            HoleKind::Collection(c) => p.collections[*c as usize]
                .family
                .operands
                .iter()
                .flat_map(|o| o.plain.iter().chain(&o.templates))
                .flat_map(|s| s.child_ids.iter().copied())
                .collect(),
        };
        called.sort_unstable();
        called.dedup();
        for c in called {
            if c as usize != k {
                *referrers.entry(c).or_default() += 1;
            }
        }
    }
    let mut total = ModelCount::from_u64(1);
    for &h in &p.base_holes {
        total = total.mul(&hole_count(p, h, &mut memo, &mut Vec::new()));
    }
    total.exact = total.exact && referrers.values().all(|&n| n <= 1);
    total
}

fn hole_count(p: &MacroProgram, h: u32, memo: &mut HashMap<u32, ModelCount>, stack: &mut Vec<u32>) -> ModelCount {
    if let Some(c) = memo.get(&h) {
        return c.clone();
    }
    if stack.contains(&h) {
        return ModelCount::from_u64(0);
    }
    stack.push(h);
    let out = match &p.holes[h as usize].kind {
        HoleKind::Eager(v) => v.iter().fold(ModelCount::from_u64(0), |acc, e| {
            let prod = e
                .children
                .iter()
                .fold(ModelCount::from_u64(1), |a, &c| a.mul(&hole_count(p, c, memo, stack)));
            acc.add(&prod)
        }),
        HoleKind::Collection(ci) => {
            let coll = &p.collections[*ci as usize];
            if coll.leafy() {
                ModelCount::power(BigUint::from(2u32), coll.count())
            } else {
                // Group members by the holes they call; each group contributes
                // (1 + product of child counts)^size.
                let mut groups: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
                for o in 0..coll.count() {
                    *groups.entry(p.member_children(*ci, o)).or_default() += 1;
                }
                groups.into_iter().fold(ModelCount::from_u64(1), |acc, (children, n)| {
                    let yes = children
                        .iter()
                        .fold(ModelCount::from_u64(1), |a, &c| a.mul(&hole_count(p, c, memo, stack)));
                    let per = yes.add(&ModelCount::from_u64(1));
                    let mut f = ModelCount::power(per.value(), n);
                    f.exact = per.exact;
                    acc.mul(&f)
                })
            }
        }
    };
    stack.pop();
    memo.insert(h, out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = ModelCount::power(BigUint::from(2u32), 100);
        let b = ModelCount::power(BigUint::from(2u32), 4950);
        let c = a.mul(&b);
        assert_eq!(c.to_string(), "2^5050");
        assert_eq!(c.as_power(), Some((BigUint::from(2u32), 5050)));
        assert!((c.log10() - 5050.0 * 2f64.log10()).abs() < 1e-6);
        let small = ModelCount::from_u64(3).add(&ModelCount::from_u64(4)).mul(&ModelCount::from_u64(2));
        assert_eq!(small.to_string(), "14");
        assert!(ModelCount::from_u64(0).mul(&c).is_zero());
        assert!(c.exceeds(u64::MAX) && !small.exceeds(14) && small.exceeds(13));
    }
}

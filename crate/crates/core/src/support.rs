//! Index sets `T` and their complements.
//!
//! Indices are 0-based in the API. The JSON form lists them 1-based, which
//! is how supports are usually written down by hand.

use itertools::Itertools;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportSet {
    indices: Vec<usize>,
    n: usize,
}

impl SupportSet {
    /// Sorts and deduplicates; returns `None` if an index is out of range.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Option<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i >= n) {
            return None;
        }
        Some(Self { indices, n })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            indices: Vec::new(),
            n,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.contains(i)).collect()
    }

    /// `v_T`: `v` with the coordinates outside `T` zeroed.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for &i in &self.indices {
            out[i] = v[i];
        }
        out
    }

    /// `‖v_T‖₁`.
    pub fn norm1_on(&self, v: &[f64]) -> f64 {
        self.indices.iter().map(|&i| v[i].abs()).sum()
    }

    /// `‖v_{T^c}‖₁`.
    pub fn norm1_off(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .filter(|(i, _)| !self.contains(*i))
            .map(|(_, x)| x.abs())
            .sum()
    }

    /// Indices of the `k` largest-magnitude entries; ties go to the lower index.
    pub fn top_k(v: &[f64], k: usize) -> Self {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
        order.truncate(k);
        Self::new(order, v.len()).expect("indices come from the vector itself")
    }

    /// All subsets of `{0..n}` of size `k`, in lexicographic order.
    pub fn all_of_size(n: usize, k: usize) -> impl Iterator<Item = SupportSet> {
        (0..n)
            .combinations(k)
            .map(move |indices| SupportSet { indices, n })
    }
}

/// `n choose k`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Every vector in `{+1, -1}^k`, the all-plus pattern first.
pub fn sign_patterns(k: usize) -> Vec<Vec<f64>> {
    (0..(1usize << k))
        .map(|mask| {
            (0..k)
                .map(|b| if mask >> b & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RawSupport {
    indices: Vec<usize>,
    n: usize,
}

impl Serialize for SupportSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawSupport {
            indices: self.indices.iter().map(|i| i + 1).collect(),
            n: self.n,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SupportSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawSupport::deserialize(d)?;
        if raw.indices.contains(&0) {
            return Err(D::Error::custom("support indices are 1-based"));
        }
        SupportSet::new(raw.indices.iter().map(|i| i - 1).collect(), raw.n)
            .ok_or_else(|| D::Error::custom("support index out of range"))
    }
}

//! Threshold propositions, their conjunctions, and selected row sets.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Direction of a threshold literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    /// `x <= t`, written `-x >= -t`.
    Neg,
    /// `x >= t`.
    Pos,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Neg => -1,
            Sign::Pos => 1,
        }
    }

    pub fn from_i8(s: i8) -> Option<Self> {
        match s {
            -1 => Some(Sign::Neg),
            1 => Some(Sign::Pos),
            _ => None,
        }
    }
}

/// The literal `sign * x[feature] >= sign * threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposition {
    pub feature: usize,
    pub sign: Sign,
    pub threshold: f64,
}

impl Proposition {
    pub fn new(feature: usize, sign: Sign, threshold: f64) -> Self {
        Self {
            feature,
            sign,
            threshold,
        }
    }

    pub fn holds(&self, x: f64) -> bool {
        match self.sign {
            Sign::Pos => x >= self.threshold,
            Sign::Neg => x <= self.threshold,
        }
    }

    /// True if `self` implies `other` (same feature and sign, tighter threshold).
    fn tighter_than(&self, other: &Proposition) -> bool {
        match self.sign {
            Sign::Pos => self.threshold >= other.threshold,
            Sign::Neg => self.threshold <= other.threshold,
        }
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.feature
            .cmp(&other.feature)
            .then(self.sign.cmp(&other.sign))
            .then(self.threshold.total_cmp(&other.threshold))
    }

    pub fn describe(&self, names: &[String]) -> String {
        let name = names
            .get(self.feature)
            .cloned()
            .unwrap_or_else(|| format!("x{}", self.feature + 1));
        let op = match self.sign {
            Sign::Pos => ">=",
            Sign::Neg => "<=",
        };
        format!("{name} {op} {}", self.threshold)
    }
}

/// A conjunction of propositions. The empty conjunction is always true.
///
/// Conjunctions are kept in normal form: at most one literal per
/// (feature, sign) pair, holding the tightest threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Query {
    propositions: Vec<Proposition>,
}

impl Query {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_propositions(props: impl IntoIterator<Item = Proposition>) -> Self {
        let mut q = Self::empty();
        for p in props {
            q.push(p);
        }
        q
    }

    pub fn propositions(&self) -> &[Proposition] {
        &self.propositions
    }

    /// Number of literals, `c_i` in the complexity measure.
    pub fn len(&self) -> usize {
        self.propositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.propositions.is_empty()
    }

    /// Conjoins `p`, keeping the normal form.
    pub fn push(&mut self, p: Proposition) {
        if let Some(existing) = self
            .propositions
            .iter_mut()
            .find(|e| e.feature == p.feature && e.sign == p.sign)
        {
            if p.tighter_than(existing) {
                existing.threshold = p.threshold;
            }
        } else {
            self.propositions.push(p);
        }
    }

    pub fn and(&self, p: Proposition) -> Self {
        let mut q = self.clone();
        q.push(p);
        q
    }

    /// Evaluates the conjunction on one feature vector accessor.
    pub fn holds(&self, value: impl Fn(usize) -> f64) -> bool {
        self.propositions.iter().all(|p| p.holds(value(p.feature)))
    }

    /// Lexicographic order on the literal lists, used as a final tie-break.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.propositions.iter().zip(&other.propositions) {
            let c = a.total_cmp(b);
            if c != Ordering::Equal {
                return c;
            }
        }
        self.len().cmp(&other.len())
    }

    pub fn describe(&self, names: &[String]) -> String {
        if self.is_empty() {
            return "TRUE".to_string();
        }
        self.propositions
            .iter()
            .map(|p| p.describe(names))
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe(&[]))
    }
}

/// Ascending list of selected row indices, `I(q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Selection(Vec<usize>);

impl Selection {
    /// Wraps indices, sorting and deduplicating them.
    pub fn from_indices(mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Self(rows)
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn rows(&self) -> &[usize] {
        &self.0
    }

    /// `|I(q)|`, which equals `||q||^2` for the binary output vector.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.0.binary_search(&row).is_ok()
    }

    /// Binary output vector of length `n`.
    pub fn indicator(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &i in &self.0 {
            v[i] = 1.0;
        }
        v
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.0 {
            m[i] = true;
        }
        m
    }

    /// Rows where `v` is nonzero.
    pub fn from_indicator(v: &[f64]) -> Self {
        Self(
            v.iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    /// Merge-based intersection of two ascending lists.
    pub fn intersect(&self, other: &Selection) -> Selection {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Selection(out)
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().map(|&i| v[i]).sum()
    }
}

/// Rows of `ds` satisfying every proposition of `q`.
pub fn evaluate_query(q: &Query, ds: &Dataset) -> Selection {
    let mut rows: Vec<usize> = (0..ds.n()).collect();
    for p in q.propositions() {
        let col = ds.column(p.feature);
        rows.retain(|&i| p.holds(col[i]));
    }
    Selection(rows)
}

/// A query paired with its selection on the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub query: Query,
    pub selection: Selection,
}

impl BoundQuery {
    pub fn evaluate(query: Query, ds: &Dataset) -> Self {
        let selection = evaluate_query(&query, ds);
        Self { query, selection }
    }
}

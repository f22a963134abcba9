//! The learned model: an offset plus weighted conjunctive rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{self, LossKind};
use crate::query::{evaluate_query, Query, Selection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub query: Query,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEnsemble {
    pub offset: f64,
    pub rules: Vec<Rule>,
    pub loss: LossKind,
    /// Names of the features the rule indices refer to.
    pub feature_names: Vec<String>,
}

impl RuleEnsemble {
    pub fn offset_only(offset: f64, loss: LossKind, feature_names: Vec<String>) -> Self {
        Self {
            offset,
            rules: Vec::new(),
            loss,
            feature_names,
        }
    }

    /// Number of rules `k`.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// `C(f) = k + sum_i c_i`.
    pub fn complexity(&self) -> usize {
        self.rules.iter().map(|r| 1 + r.query.len()).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.weight).collect()
    }

    /// Raw output for a feature accessor indexed like `feature_names`.
    pub fn predict_row(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut f = self.offset;
        for r in &self.rules {
            if r.query.holds(&x) {
                f += r.weight;
            }
        }
        f
    }

    /// Maps this model's feature indices to columns of `ds` by name.
    pub fn column_map(&self, ds: &Dataset) -> Result<Vec<usize>> {
        let mut map = Vec::with_capacity(self.feature_names.len());
        let mut missing = Vec::new();
        for name in &self.feature_names {
            match ds.feature_index(name) {
                Some(j) => map.push(j),
                None => {
                    missing.push(name.clone());
                    map.push(usize::MAX);
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::FeatureMismatch { missing });
        }
        Ok(map)
    }

    /// Raw outputs on every row of `ds`; features are matched by name.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let map = self.column_map(ds)?;
        if map.iter().enumerate().all(|(i, &j)| i == j) {
            return Ok(self.predict_aligned(ds));
        }
        Ok((0..ds.n())
            .map(|i| self.predict_row(|j| ds.value(i, map[j])))
            .collect())
    }

    /// Raw outputs assuming `ds` has this model's feature layout.
    pub fn predict_aligned(&self, ds: &Dataset) -> Vec<f64> {
        let mut f = vec![self.offset; ds.n()];
        for r in &self.rules {
            for &i in evaluate_query(&r.query, ds).rows() {
                f[i] += r.weight;
            }
        }
        f
    }

    pub fn predict_mean(&self, ds: &Dataset) -> Result<Vec<f64>> {
        Ok(self
            .predict(ds)?
            .into_iter()
            .map(|f| losses::predict_mean(self.loss, f))
            .collect())
    }

    /// Mean loss on `ds`.
    pub fn risk(&self, ds: &Dataset) -> Result<f64> {
        self.loss.check_targets(ds.target())?;
        let f = self.predict(ds)?;
        Ok(losses::risk(self.loss, &f, ds.target()))
    }

    /// Selections of every rule on `ds`.
    pub fn selections(&self, ds: &Dataset) -> Result<Vec<Selection>> {
        let map = self.column_map(ds)?;
        Ok(self
            .rules
            .iter()
            .map(|r| {
                let rows = (0..ds.n())
                    .filter(|&i| r.query.holds(|j| ds.value(i, map[j])))
                    .collect();
                Selection::from_indices(rows)
            })
            .collect())
    }

    /// `IF <condition> THEN <weight>` for rule `i`.
    pub fn describe_rule(&self, i: usize) -> String {
        let r = &self.rules[i];
        format!("IF {} THEN {:+}", r.query.describe(&self.feature_names), r.weight)
    }
}

impl fmt::Display for RuleEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "offset {:+}", self.offset)?;
        for i in 0..self.rules.len() {
            writeln!(f, "{}", self.describe_rule(i))?;
        }
        Ok(())
    }
}

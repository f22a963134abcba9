//! Column-major training data with per-feature sort orders.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of response variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    BinaryClassification,
    CountRegression,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Regression => "reg",
            Task::BinaryClassification => "binary",
            Task::CountRegression => "count",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reg" | "regression" => Ok(Task::Regression),
            "binary" | "classification" => Ok(Task::BinaryClassification),
            "count" | "poisson" => Ok(Task::CountRegression),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// A numeric feature matrix together with a target vector.
///
/// Features are stored column by column. For every feature the dataset keeps
/// a permutation of the rows that orders them by ascending feature value; the
/// rule search walks these orders to enumerate threshold propositions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    task: Task,
    feature_names: Vec<String>,
    sort_index: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from feature columns.
    ///
    /// Binary-classification targets may be given as `{0, 1}` or `{-1, +1}`
    /// and are stored as `{-1, +1}`. Count targets must be nonnegative
    /// integers.
    pub fn new(
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        task: Task,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = target.len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if columns.is_empty() {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if feature_names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has {} values, target has {n}",
                    feature_names[j],
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "non-finite value in column `{}` at row {i}",
                    feature_names[j]
                )));
            }
        }
        let target = normalize_target(target, task)?;
        let sort_index = columns.iter().map(|col| argsort(col)).collect();
        Ok(Self {
            columns,
            target,
            task,
            feature_names,
            sort_index,
        })
    }

    /// Builds a dataset with generated feature names `x1..xd`.
    pub fn from_columns(columns: Vec<Vec<f64>>, target: Vec<f64>, task: Task) -> Result<Self> {
        let names = (1..=columns.len()).map(|j| format!("x{j}")).collect();
        Self::new(columns, target, task, names)
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rows ordered by ascending value of feature `j` (stable for ties).
    pub fn sort_index(&self, j: usize) -> &[usize] {
        &self.sort_index[j]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Dataset restricted to `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let columns: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&i| col[i]).collect())
            .collect();
        let target: Vec<f64> = rows.iter().map(|&i| self.target[i]).collect();
        let sort_index = columns.iter().map(|col| argsort(col)).collect();
        Self {
            columns,
            target,
            task: self.task,
            feature_names: self.feature_names.clone(),
            sort_index,
        }
    }
}

fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

fn normalize_target(mut target: Vec<f64>, task: Task) -> Result<Vec<f64>> {
    match task {
        Task::Regression => {
            if let Some(i) = target.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("non-finite target at row {i}")));
            }
        }
        Task::BinaryClassification => {
            let zero_one = target.iter().all(|&v| v == 0.0 || v == 1.0);
            for (i, v) in target.iter_mut().enumerate() {
                if zero_one {
                    *v = if *v == 1.0 { 1.0 } else { -1.0 };
                } else if *v != 1.0 && *v != -1.0 {
                    return Err(Error::InvalidTarget {
                        loss: "logistic",
                        row: i,
                        value: *v,
                    });
                }
            }
        }
        Task::CountRegression => {
            for (i, &v) in target.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0) {
                    return Err(Error::InvalidTarget {
                        loss: "poisson",
                        row: i,
                        value: v,
                    });
                }
            }
        }
    }
    Ok(target)
}

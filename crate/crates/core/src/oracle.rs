//! Exhaustive reference computations used to check the fast paths, and the
//! study comparing greedy bounds with the exact subset bound.

use std::cmp::Ordering;
use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::OrthoBasis;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objectives::{objective_value, Objective, ObjectiveKind};
use crate::query::{BoundQuery, Proposition, Query, Selection, Sign};
use crate::search::{bound_heuristic, SearchNode};

/// Maximum number of distinct selections `enumerate_queries` will produce.
pub const ENUMERATION_LIMIT: usize = 1_000_000;
/// Largest node for which all subsets are enumerated.
pub const SUBSET_LIMIT: usize = 20;

/// All distinct nonempty selections reachable with at most `max_props`
/// propositions, each with a shortest query producing it.
pub fn enumerate_queries(ds: &Dataset, max_props: usize) -> Result<Vec<BoundQuery>> {
    let root = BoundQuery {
        query: Query::empty(),
        selection: Selection::all(ds.n()),
    };
    let mut seen: HashSet<Selection> = HashSet::new();
    seen.insert(root.selection.clone());
    let mut out = vec![root.clone()];
    let mut frontier = vec![root];
    for _ in 0..max_props {
        let mut next = Vec::new();
        for node in &frontier {
            for j in 0..ds.d() {
                let col = ds.column(j);
                let mut values: Vec<f64> = node.selection.rows().iter().map(|&r| col[r]).collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                for sign in [Sign::Neg, Sign::Pos] {
                    for &t in &values {
                        let prop = Proposition::new(j, sign, t);
                        let rows: Vec<usize> = node
                            .selection
                            .rows()
                            .iter()
                            .copied()
                            .filter(|&r| prop.holds(col[r]))
                            .collect();
                        let sel = Selection::from_indices(rows);
                        if sel.is_empty() || seen.contains(&sel) {
                            continue;
                        }
                        if seen.len() >= ENUMERATION_LIMIT {
                            return Err(Error::Explosion {
                                limit: ENUMERATION_LIMIT,
                            });
                        }
                        seen.insert(sel.clone());
                        let bq = BoundQuery {
                            query: node.query.and(prop),
                            selection: sel,
                        };
                        out.push(bq.clone());
                        next.push(bq);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceBest {
    pub query: Query,
    pub selection: Selection,
    pub value: f64,
}

/// Exact maximizer over every distinct query, with the search's tie-break:
/// higher value, fewer literals, larger coverage, lexicographic literals.
/// For the orthogonal objective `g` must already be projected.
pub fn brute_force_best(ds: &Dataset, g: &[f64], h: &[f64], basis: &OrthoBasis, obj: &Objective) -> Result<BruteForceBest> {
    let n = ds.n();
    let mut best: Option<BruteForceBest> = None;
    for bq in enumerate_queries(ds, usize::MAX)? {
        let value = objective_value(obj, &bq.selection.indicator(n), g, h, basis)?;
        let better = match &best {
            None => true,
            Some(b) => {
                if value != b.value {
                    value > b.value
                } else if bq.query.len() != b.query.len() {
                    bq.query.len() < b.query.len()
                } else if bq.selection.len() != b.selection.len() {
                    bq.selection.len() > b.selection.len()
                } else {
                    bq.query.lex_cmp(&b.query) == Ordering::Less
                }
            }
        };
        if better {
            best = Some(BruteForceBest {
                query: bq.query,
                selection: bq.selection,
                value,
            });
        }
    }
    Ok(best.expect("the empty query is always enumerated"))
}

/// `q - Q (Q^T Q)^{-1} Q^T q` through the Gram matrix.
pub fn naive_projection(queries: &[Vec<f64>], q: &[f64]) -> Result<Vec<f64>> {
    if queries.is_empty() {
        return Ok(q.to_vec());
    }
    let n = q.len();
    if let Some(bad) = queries.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    let t = queries.len();
    let qm = DMatrix::from_fn(n, t, |i, j| queries[j][i]);
    let gram = qm.transpose() * &qm;
    let v = DVector::from_column_slice(q);
    let rhs = qm.transpose() * &v;
    let coef = gram.cholesky().ok_or(Error::RankDeficient)?.solve(&rhs);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok((v - qm * coef).iter().copied().collect())
}

fn check_subset_size(sel: &Selection) -> Result<()> {
    if sel.len() > SUBSET_LIMIT {
        return Err(Error::Config(format!(
            "exact subset bound limited to {SUBSET_LIMIT} rows, node has {}",
            sel.len()
        )));
    }
    Ok(())
}

/// Exact `max obj_ogb(q')` over nonempty subsets of the node's rows.
pub fn exact_subset_bound(sel: &Selection, g_perp: &[f64], basis: &OrthoBasis, epsilon: f64) -> Result<f64> {
    Ok(exact_subset_bounds(sel, g_perp, basis, &[epsilon])?[0])
}

/// [`exact_subset_bound`] for several `epsilon` values in one enumeration.
pub fn exact_subset_bounds(sel: &Selection, g_perp: &[f64], basis: &OrthoBasis, epsilons: &[f64]) -> Result<Vec<f64>> {
    check_subset_size(sel)?;
    let rows = sel.rows();
    let m = rows.len();
    let t = basis.len();
    let o = basis.row_major();
    let mut inside = vec![false; m];
    let mut sums = vec![0.0; t];
    let mut gsum = 0.0;
    let mut count = 0usize;
    let mut best = vec![0.0f64; epsilons.len()];
    // Gray code: step s flips the element at the lowest set bit of s
    for s in 1u64..(1u64 << m) {
        let e = s.trailing_zeros() as usize;
        let r = rows[e];
        let sign = if inside[e] { -1.0 } else { 1.0 };
        inside[e] = !inside[e];
        if sign > 0.0 {
            count += 1;
        } else {
            count -= 1;
        }
        gsum += sign * g_perp[r];
        for (k, acc) in sums.iter_mut().enumerate() {
            *acc += sign * o[r * t + k];
        }
        if count == 0 {
            continue;
        }
        let par: f64 = sums.iter().map(|v| v * v).sum();
        let perp = (count as f64 - par).max(0.0).sqrt();
        for (b, &eps) in best.iter_mut().zip(epsilons) {
            let den = perp + eps;
            if den > 0.0 {
                *b = b.max(gsum.abs() / den);
            }
        }
    }
    Ok(best)
}

/// Grows a subset one row at a time, always adding the row that maximizes
/// the orthogonal objective, and returns the best value seen.
pub fn full_greedy_bound(sel: &Selection, g_perp: &[f64], basis: &OrthoBasis, epsilon: f64) -> f64 {
    let t = basis.len();
    let o = basis.row_major();
    let obj = Objective::new(ObjectiveKind::Ogb).with_epsilon(epsilon);
    let mut remaining: Vec<usize> = sel.rows().to_vec();
    let mut sums = vec![0.0; t];
    let mut gsum = 0.0;
    let mut count = 0.0;
    let mut best: f64 = 0.0;
    while !remaining.is_empty() {
        let mut pick: Option<(usize, f64)> = None;
        for (pos, &r) in remaining.iter().enumerate() {
            let par: f64 = sums.iter().enumerate().map(|(k, s)| (s + o[r * t + k]).powi(2)).sum();
            let v = obj.score(gsum + g_perp[r], count + 1.0, 0.0, count + 1.0 - par);
            if pick.is_none_or(|(_, bv)| v > bv) {
                pick = Some((pos, v));
            }
        }
        let (pos, v) = pick.expect("nonempty");
        let r = remaining.swap_remove(pos);
        gsum += g_perp[r];
        count += 1.0;
        for (k, s) in sums.iter_mut().enumerate() {
            *s += o[r * t + k];
        }
        best = best.max(v);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStudyConfig {
    pub instances: usize,
    pub points: usize,
    pub existing_rules: usize,
    pub epsilons: Vec<f64>,
    pub seed: u64,
}

impl Default for BoundStudyConfig {
    fn default() -> Self {
        Self {
            instances: 2000,
            points: 15,
            existing_rules: 5,
            epsilons: vec![0.001, 0.1, 1.0],
            seed: 0,
        }
    }
}

impl BoundStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.points > SUBSET_LIMIT {
            return Err(Error::Config(format!(
                "points must be between 1 and {SUBSET_LIMIT}, got {}",
                self.points
            )));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Config("at least one epsilon is required".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {e}")));
        }
        Ok(())
    }
}

/// Approximation thresholds reported by the bound study.
pub const APPROXIMATION_LEVELS: [f64; 6] = [0.75, 0.80, 0.85, 0.90, 0.95, 1.00];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStudyTable {
    pub epsilons: Vec<f64>,
    /// `prefix[level][eps]`: fraction of instances whose prefix-greedy bound
    /// reaches the level's share of the exact bound.
    pub prefix: Vec<Vec<f64>>,
    pub full: Vec<Vec<f64>>,
    /// Per instance and epsilon: (prefix ratio, full ratio).
    pub ratios: Vec<Vec<(f64, f64)>>,
}

impl BoundStudyTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,rate");
        for e in &self.epsilons {
            s.push_str(&format!(",eps_{e}"));
        }
        s.push('\n');
        for (name, rows) in [("prefix-greedy", &self.prefix), ("full-greedy", &self.full)] {
            for (level, row) in APPROXIMATION_LEVELS.iter().zip(rows) {
                s.push_str(&format!("{name},{level:.2}"));
                for v in row {
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
        }
        s
    }
}

fn ratio(approx: f64, exact: f64) -> f64 {
    if exact <= 0.0 {
        1.0
    } else {
        approx / exact
    }
}

/// Random instances of binary rules and an orthogonalized Gaussian gradient;
/// compares greedy bounds at the root with the exact subset bound.
pub fn run_bound_study(cfg: &BoundStudyConfig) -> Result<BoundStudyTable> {
    cfg.validate()?;
    let n = cfg.points;
    let ratios: Vec<Result<Vec<(f64, f64)>>> = (0..cfg.instances)
        .into_par_iter()
        .map(|inst| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(inst as u64);
            let mut basis = OrthoBasis::new(n);
            for _ in 0..cfg.existing_rules {
                let q: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
                basis.extend(&q)?;
            }
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let g_perp = basis.perp(&g)?;
            let all = Selection::all(n);
            let exact = exact_subset_bounds(&all, &g_perp, &basis, &cfg.epsilons)?;
            let node = SearchNode {
                value: 0.0,
                query: Query::empty(),
                selected: all.clone(),
            };
            Ok(cfg
                .epsilons
                .iter()
                .zip(&exact)
                .map(|(&eps, &ex)| {
                    let prefix = bound_heuristic(&node, &g_perp, &basis, eps);
                    let full = full_greedy_bound(&all, &g_perp, &basis, eps);
                    (ratio(prefix, ex), ratio(full, ex))
                })
                .collect())
        })
        .collect();
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;

    let rate = |level: f64, e: usize, pick: fn(&(f64, f64)) -> f64| -> f64 {
        if ratios.is_empty() {
            return 0.0;
        }
        let hits = ratios.iter().filter(|r| pick(&r[e]) >= level - 1e-12).count();
        hits as f64 / ratios.len() as f64
    };
    let table = |pick: fn(&(f64, f64)) -> f64| -> Vec<Vec<f64>> {
        APPROXIMATION_LEVELS
            .iter()
            .map(|&l| (0..cfg.epsilons.len()).map(|e| rate(l, e, pick)).collect())
            .collect()
    };
    Ok(BoundStudyTable {
        epsilons: cfg.epsilons.clone(),
        prefix: table(|r| r.0),
        full: table(|r| r.1),
        ratios,
    })
}

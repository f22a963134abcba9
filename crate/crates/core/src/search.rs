//! Single-rule base learner.
//!
//! A layered search over conjunctive queries that covers both beam search
//! (finite width) and branch-and-bound (unbounded width). Every dequeued node
//! is expanded by walking, for each feature and direction, the node's rows in
//! sorted feature order: each prefix of that walk is the selection of one
//! augmented query, and all prefix objective values come out of a single pass
//! of cumulative sums. For the orthogonal objective those sums include one
//! running total per basis vector, so a walk of length `l` costs `O(tl)`.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::rc::Rc;

use crate::basis::OrthoBasis;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objectives::{Objective, ObjectiveKind};
use crate::query::{Proposition, Query, Selection, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Queue size limit per layer; `None` is unbounded (branch-and-bound).
    pub width: Option<usize>,
    pub objective: Objective,
    /// Cap on the number of literals per query.
    pub max_propositions: Option<usize>,
    /// Prune nodes whose bound does not exceed the incumbent.
    pub bounding: bool,
}

use serde::{Deserialize, Serialize};

impl SearchConfig {
    pub fn greedy(objective: Objective) -> Self {
        Self::beam(objective, 1)
    }

    pub fn beam(objective: Objective, width: usize) -> Self {
        Self {
            width: Some(width),
            objective,
            max_propositions: None,
            bounding: true,
        }
    }

    pub fn branch_and_bound(objective: Objective) -> Self {
        Self {
            width: None,
            objective,
            max_propositions: None,
            bounding: true,
        }
    }

    /// Unbounded width and no pruning: visits every distinct selection.
    pub fn exhaustive(objective: Objective) -> Self {
        Self {
            width: None,
            objective,
            max_propositions: None,
            bounding: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == Some(0) {
            return Err(Error::Config("search width must be at least 1".into()));
        }
        self.objective.validate()
    }
}

/// A search node: a query, its selection and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub value: f64,
    pub query: Query,
    pub selected: Selection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub query: Query,
    pub selection: Selection,
    pub value: f64,
    pub nodes_expanded: usize,
    pub nodes_pruned: usize,
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &r in order {
        if r >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: r + 1,
            });
        }
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::NonInjectiveOrder(r));
        }
    }
    Ok(())
}

/// Orthogonal objective values of all prefixes of `order`:
/// `v_i = |G_i| / (sqrt(i - sum_k N_{k,i}^2) + epsilon)` with
/// `G_i` the prefix sum of `g_perp` and `N_{k,i}` the prefix sums of basis
/// vector `k`.
pub fn prefix_values(g_perp: &[f64], basis: &OrthoBasis, order: &[usize], epsilon: f64) -> Result<Vec<f64>> {
    if basis.n() != g_perp.len() {
        return Err(Error::DimensionMismatch {
            expected: g_perp.len(),
            actual: basis.n(),
        });
    }
    check_order(order, g_perp.len())?;
    let obj = Objective::new(ObjectiveKind::Ogb).with_epsilon(epsilon);
    let walker = Walker::new(obj, g_perp, &[], basis);
    let mut out = Vec::with_capacity(order.len());
    walker.walk(order, |_, v| out.push(v));
    Ok(out)
}

/// Position (1-based) and value of the best prefix; ties go to the shorter
/// prefix. An empty order gives `(0, 0.0)`.
pub fn prefix_argmax(g_perp: &[f64], basis: &OrthoBasis, order: &[usize], epsilon: f64) -> Result<(usize, f64)> {
    let values = prefix_values(g_perp, basis, order, epsilon)?;
    Ok(argmax_first(&values))
}

fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        if best.0 == 0 || v > best.1 {
            best = (i + 1, v);
        }
    }
    best
}

/// Greedy-prefix bound used to prune nodes under the orthogonal objective:
/// the best prefix value along the `g_perp`-sorted order of the node's rows,
/// in both directions. Not admissible.
pub fn bound_heuristic(node: &SearchNode, g_perp: &[f64], basis: &OrthoBasis, epsilon: f64) -> f64 {
    let obj = Objective::new(ObjectiveKind::Ogb).with_epsilon(epsilon);
    let walker = Walker::new(obj, g_perp, &[], basis);
    let order = argsort_by(g_perp);
    let mask = node.selected.mask(g_perp.len());
    walker.two_sided_max(&order, &mask)
}

/// Records visited selections by fingerprint. Returns true when `candidate`
/// must be skipped: it selects the same rows as `parent` or its fingerprint
/// is already present. Otherwise the fingerprint is inserted.
pub fn redundancy_check(candidate: &Selection, parent: &Selection, visited: &mut HashSet<Fingerprint>) -> bool {
    if candidate == parent {
        return true;
    }
    !visited.insert(Fingerprint::of(candidate))
}

/// Order-independent hash of a row set, computable incrementally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    a: u64,
    b: u64,
    count: usize,
}

impl Fingerprint {
    const EMPTY: Fingerprint = Fingerprint { a: 0, b: 0, count: 0 };

    fn add(&mut self, row: usize) {
        self.a = self.a.wrapping_add(splitmix(row as u64 ^ 0x9e37_79b9_7f4a_7c15));
        self.b = self.b.wrapping_add(splitmix((row as u64).wrapping_mul(0xd1b5_4a32_d192_ed03) ^ 0x5851_f42d));
        self.count += 1;
    }

    pub fn of(sel: &Selection) -> Self {
        let mut fp = Self::EMPTY;
        for &r in sel.rows() {
            fp.add(r);
        }
        fp
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn argsort_by(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

/// Cumulative-sum evaluator for prefixes of row orders.
struct Walker<'a> {
    obj: Objective,
    g: &'a [f64],
    h: &'a [f64],
    basis_rows: Vec<f64>,
    t: usize,
    scratch: RefCell<Vec<f64>>,
}

impl<'a> Walker<'a> {
    fn new(obj: Objective, g: &'a [f64], h: &'a [f64], basis: &OrthoBasis) -> Self {
        let ogb = obj.kind == ObjectiveKind::Ogb;
        let t = if ogb { basis.len() } else { 0 };
        Self {
            obj,
            g,
            h,
            basis_rows: if ogb { basis.row_major() } else { Vec::new() },
            t,
            scratch: RefCell::new(vec![0.0; t]),
        }
    }

    /// Calls `visit(position, value)` for every prefix of `seq`.
    fn walk(&self, seq: &[usize], mut visit: impl FnMut(usize, f64)) {
        let t = self.t;
        let xgb = self.obj.kind == ObjectiveKind::Xgb;
        let mut sums = self.scratch.borrow_mut();
        sums.iter_mut().for_each(|s| *s = 0.0);
        let (mut gsum, mut hsum) = (0.0, 0.0);
        for (pos, &r) in seq.iter().enumerate() {
            gsum += self.g[r];
            if xgb {
                hsum += self.h[r];
            }
            let count = (pos + 1) as f64;
            let perp_sq = if t > 0 {
                let row = &self.basis_rows[r * t..(r + 1) * t];
                let mut par = 0.0;
                for (s, &o) in sums.iter_mut().zip(row) {
                    *s += o;
                    par += *s * *s;
                }
                (count - par).max(0.0)
            } else {
                count
            };
            visit(pos, self.obj.score(gsum, count, hsum, perp_sq));
        }
    }

    /// Best prefix value over `order` filtered to `mask`, scanned forwards
    /// and backwards.
    fn two_sided_max(&self, order: &[usize], mask: &[bool]) -> f64 {
        let mut filtered: Vec<usize> = order.iter().copied().filter(|&r| mask[r]).collect();
        let mut best: f64 = 0.0;
        self.walk(&filtered, |_, v| best = best.max(v));
        filtered.reverse();
        self.walk(&filtered, |_, v| best = best.max(v));
        best
    }
}

/// An expanded node shared by its pending children.
struct Expanded {
    query: Query,
    selection: Selection,
}

/// A child waiting in a layer queue; its selection is materialized on dequeue.
struct Pending {
    value: f64,
    count: usize,
    seq: u64,
    parent: Rc<Expanded>,
    prop: Proposition,
}

impl Pending {
    /// Best-first order: higher value, then smaller selection, then earlier.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then(self.count.cmp(&other.count))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Heap wrapper whose maximum is the worst entry.
struct Worst(Pending);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

enum LayerQueue {
    Bounded { limit: usize, heap: BinaryHeap<Worst> },
    Unbounded(Vec<Pending>),
}

impl LayerQueue {
    fn new(width: Option<usize>) -> Self {
        match width {
            Some(limit) => LayerQueue::Bounded {
                limit,
                heap: BinaryHeap::with_capacity(limit + 1),
            },
            None => LayerQueue::Unbounded(Vec::new()),
        }
    }

    /// Whether an entry with this rank would be kept.
    fn admits(&self, value: f64, count: usize) -> bool {
        match self {
            LayerQueue::Bounded { limit, heap } => {
                if heap.len() < *limit {
                    return true;
                }
                let worst = &heap.peek().expect("nonempty").0;
                value > worst.value || (value == worst.value && count < worst.count)
            }
            LayerQueue::Unbounded(_) => true,
        }
    }

    fn push(&mut self, p: Pending) {
        match self {
            LayerQueue::Bounded { limit, heap } => {
                heap.push(Worst(p));
                if heap.len() > *limit {
                    heap.pop();
                }
            }
            LayerQueue::Unbounded(v) => v.push(p),
        }
    }

    fn into_sorted(self) -> Vec<Pending> {
        let mut v: Vec<Pending> = match self {
            LayerQueue::Bounded { heap, .. } => heap.into_iter().map(|w| w.0).collect(),
            LayerQueue::Unbounded(v) => v,
        };
        v.sort_by(|a, b| a.rank_cmp(b));
        v
    }
}

struct Incumbent {
    value: f64,
    query: Query,
    count: usize,
    parent: Option<Rc<Expanded>>,
}

impl Incumbent {
    /// Strictly better by (value, fewer literals, larger coverage, lexicographic literals).
    fn improved_by(&self, value: f64, query: &Query, count: usize) -> bool {
        if value != self.value {
            return value > self.value;
        }
        if query.len() != self.query.len() {
            return query.len() < self.query.len();
        }
        if count != self.count {
            return count > self.count;
        }
        query.lex_cmp(&self.query) == Ordering::Less
    }
}

/// Finds the query maximizing the configured objective.
///
/// `g` is the gradient vector; for [`ObjectiveKind::Ogb`] it must already be
/// projected onto the orthogonal complement of the basis. `h` is only read by
/// [`ObjectiveKind::Xgb`]. Returns `None` when no query has a positive
/// objective value.
pub fn find_best_query(
    ds: &Dataset,
    g: &[f64],
    h: &[f64],
    basis: &OrthoBasis,
    cfg: &SearchConfig,
) -> Result<Option<SearchOutcome>> {
    cfg.validate()?;
    let n = ds.n();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    let obj = cfg.objective;
    if obj.kind == ObjectiveKind::Xgb && h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: h.len(),
        });
    }
    if obj.kind == ObjectiveKind::Ogb && basis.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: basis.n(),
        });
    }

    let walker = Walker::new(obj, g, h, basis);
    let bound_order = if cfg.bounding {
        match obj.kind {
            ObjectiveKind::Xgb => {
                let ratio: Vec<f64> = g.iter().zip(h).map(|(gi, hi)| gi / hi).collect();
                argsort_by(&ratio)
            }
            _ => argsort_by(g),
        }
    } else {
        Vec::new()
    };

    let root = Rc::new(Expanded {
        query: Query::empty(),
        selection: Selection::all(n),
    });
    let mut root_value = 0.0;
    walker.walk(root.selection.rows(), |pos, v| {
        if pos + 1 == n {
            root_value = v;
        }
    });
    let mut best = Incumbent {
        value: root_value,
        query: Query::empty(),
        count: n,
        parent: None,
    };

    let mut visited: HashSet<Fingerprint> = HashSet::new();
    visited.insert(Fingerprint::of(&root.selection));
    let mut seq: u64 = 0;
    let mut expanded = 0usize;
    let mut pruned = 0usize;

    let mut layer: Vec<Rc<Expanded>> = vec![root];
    let mut mask = vec![false; n];
    let mut walk_buf: Vec<usize> = Vec::with_capacity(n);

    while !layer.is_empty() {
        let mut next = LayerQueue::new(cfg.width);
        for node in &layer {
            for &r in node.selection.rows() {
                mask[r] = true;
            }
            if cfg.bounding {
                let bound = walker.two_sided_max(&bound_order, &mask);
                if bound <= best.value {
                    pruned += 1;
                    for &r in node.selection.rows() {
                        mask[r] = false;
                    }
                    continue;
                }
            }
            expanded += 1;
            for j in 0..ds.d() {
                let col = ds.column(j);
                for sign in [Sign::Neg, Sign::Pos] {
                    let child_len = node.query.len()
                        + usize::from(
                            !node
                                .query
                                .propositions()
                                .iter()
                                .any(|p| p.feature == j && p.sign == sign),
                        );
                    if cfg.max_propositions.is_some_and(|cap| child_len > cap) {
                        continue;
                    }
                    walk_buf.clear();
                    walk_buf.extend(ds.sort_index(j).iter().copied().filter(|&r| mask[r]));
                    if sign == Sign::Pos {
                        walk_buf.reverse();
                    }
                    let l = walk_buf.len();
                    let mut fp = Fingerprint::EMPTY;
                    let mut values = Vec::with_capacity(l);
                    walker.walk(&walk_buf, |_, v| values.push(v));
                    for pos in 0..l {
                        let r = walk_buf[pos];
                        fp.add(r);
                        // a cut must separate distinct feature values; the
                        // full prefix reproduces the parent
                        if pos + 1 == l || col[walk_buf[pos + 1]] == col[r] {
                            continue;
                        }
                        let value = values[pos];
                        let count = pos + 1;
                        let prop = Proposition::new(j, sign, col[r]);
                        if value >= best.value {
                            let q = node.query.and(prop);
                            if best.improved_by(value, &q, count) {
                                best = Incumbent {
                                    value,
                                    query: q,
                                    count,
                                    parent: Some(Rc::clone(node)),
                                };
                            }
                        }
                        if !next.admits(value, count) || visited.contains(&fp) {
                            continue;
                        }
                        visited.insert(fp);
                        next.push(Pending {
                            value,
                            count,
                            seq,
                            parent: Rc::clone(node),
                            prop,
                        });
                        seq += 1;
                    }
                }
            }
            for &r in node.selection.rows() {
                mask[r] = false;
            }
        }
        layer = next
            .into_sorted()
            .into_iter()
            .map(|p| {
                let col = ds.column(p.prop.feature);
                let rows: Vec<usize> = p
                    .parent
                    .selection
                    .rows()
                    .iter()
                    .copied()
                    .filter(|&r| p.prop.holds(col[r]))
                    .collect();
                Rc::new(Expanded {
                    query: p.parent.query.and(p.prop),
                    selection: Selection::from_indices(rows),
                })
            })
            .collect();
    }

    if best.value <= 0.0 {
        return Ok(None);
    }
    let selection = match &best.parent {
        None => Selection::all(n),
        Some(_) => crate::query::evaluate_query(&best.query, ds),
    };
    Ok(Some(SearchOutcome {
        query: best.query,
        selection,
        value: best.value,
        nodes_expanded: expanded,
        nodes_pruned: pruned,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use crate::objectives::objective_value;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig2_basis() -> OrthoBasis {
        let mut b = OrthoBasis::new(3);
        b.extend(&[1.0, 1.0, 0.0]).unwrap();
        b
    }

    fn fig2_data() -> Dataset {
        Dataset::from_columns(vec![vec![1.0, 2.0, 3.0]], vec![-10.0, -6.0, 5.0], Task::Regression).unwrap()
    }

    #[test]
    fn prefix_values_without_basis() {
        let v = prefix_values(&[3.0, 1.0, -2.0], &OrthoBasis::new(3), &[0, 1, 2], 0.0).unwrap();
        let expected = [3.0, 4.0 / 2f64.sqrt(), 2.0 / 3f64.sqrt()];
        for (a, e) in v.iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-12);
        }
        assert_eq!(argmax_first(&v), (1, 3.0));
    }

    #[test]
    fn prefix_values_fig2() {
        let v = prefix_values(&[2.0, -2.0, -5.0], &fig2_basis(), &[2, 1], 0.0).unwrap();
        assert_abs_diff_eq!(v[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 7.0 / 1.5f64.sqrt(), epsilon = 1e-12);
        let (i, best) = prefix_argmax(&[2.0, -2.0, -5.0], &fig2_basis(), &[2, 1], 0.0).unwrap();
        assert_eq!(i, 2);
        assert_abs_diff_eq!(best, 7.0 / 1.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn prefix_values_zero_gradient_row() {
        let v = prefix_values(&[0.0, 1.0, 0.0], &fig2_basis(), &[2], 0.1).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn prefix_argmax_ties_and_empty() {
        assert_eq!(argmax_first(&[2.0, 2.0, 2.0]), (1, 2.0));
        assert_eq!(prefix_argmax(&[1.0], &OrthoBasis::new(1), &[], 0.0).unwrap(), (0, 0.0));
    }

    #[test]
    fn prefix_values_rejects_repeated_rows() {
        let err = prefix_values(&[1.0, 2.0], &OrthoBasis::new(2), &[1, 1], 0.0).unwrap_err();
        assert!(matches!(err, Error::NonInjectiveOrder(1)));
    }

    #[test]
    fn prefix_values_match_direct_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let mut basis = OrthoBasis::new(n);
            for _ in 0..rng.random_range(0..5) {
                let q: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
                basis.extend(&q).unwrap();
            }
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g_perp = basis.perp(&g).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            order.truncate(rng.random_range(1..=n));
            let eps = 0.01;
            let fast = prefix_values(&g_perp, &basis, &order, eps).unwrap();
            let obj = Objective::new(ObjectiveKind::Ogb).with_epsilon(eps);
            let mut q = vec![0.0; n];
            for (i, &r) in order.iter().enumerate() {
                q[r] = 1.0;
                let direct = objective_value(&obj, &q, &g_perp, &[], &basis).unwrap();
                assert!((fast[i] - direct).abs() <= 1e-9 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn bound_heuristic_examples() {
        let g = [2.0, -2.0, -5.0];
        let single = SearchNode {
            value: 0.0,
            query: Query::empty(),
            selected: Selection::from_indices(vec![2]),
        };
        assert_abs_diff_eq!(bound_heuristic(&single, &g, &fig2_basis(), 0.1), 5.0 / 1.1, epsilon = 1e-12);
        let root = SearchNode {
            value: 0.0,
            query: Query::empty(),
            selected: Selection::all(3),
        };
        assert!(bound_heuristic(&root, &g, &fig2_basis(), 0.0) >= 7.0 / 1.5f64.sqrt() - 1e-12);
        assert_eq!(bound_heuristic(&root, &[0.0; 3], &fig2_basis(), 0.0), 0.0);
    }

    #[test]
    fn redundancy_examples() {
        let parent = Selection::from_indices(vec![0, 1, 2]);
        let mut visited = HashSet::new();
        assert!(redundancy_check(&parent.clone(), &parent, &mut visited));
        let a = Selection::from_indices(vec![0, 1]);
        assert!(!redundancy_check(&a, &parent, &mut visited));
        assert!(redundancy_check(&a.clone(), &parent, &mut visited));
        let b = Selection::from_indices(vec![1, 2]);
        assert!(!redundancy_check(&b, &parent, &mut visited));
    }

    #[test]
    fn fig2_second_round_choices() {
        let ds = fig2_data();
        let g = [2.0, -2.0, -5.0];
        let basis = fig2_basis();
        let ogb = Objective::new(ObjectiveKind::Ogb);
        let out = find_best_query(&ds, &g, &[], &basis, &SearchConfig::branch_and_bound(ogb))
            .unwrap()
            .unwrap();
        assert_eq!(out.selection.rows(), &[1, 2]);
        let gb = Objective::new(ObjectiveKind::Gb);
        let out = find_best_query(&ds, &g, &[], &basis, &SearchConfig::branch_and_bound(gb))
            .unwrap()
            .unwrap();
        assert_eq!(out.selection.rows(), &[2]);
    }

    #[test]
    fn prop2_first_round_selects_middle_point() {
        let (a, e) = (1.0, 0.1);
        let y = [-a - e, a, -3.0 * a - e, a + e, 2.0 * a + e];
        let ds = Dataset::from_columns(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]], y.to_vec(), Task::Regression).unwrap();
        let g: Vec<f64> = y.iter().map(|v| -v).collect();
        let obj = Objective::new(ObjectiveKind::Ogb).with_epsilon(0.1);
        let out = find_best_query(&ds, &g, &[], &OrthoBasis::new(5), &SearchConfig::branch_and_bound(obj))
            .unwrap()
            .unwrap();
        assert_eq!(out.selection.rows(), &[2]);
        assert_eq!(out.query.len(), 2);
    }

    #[test]
    fn single_row_dataset() {
        let ds = Dataset::from_columns(vec![vec![4.0]], vec![1.0], Task::Regression).unwrap();
        let obj = Objective::new(ObjectiveKind::Gb);
        let out = find_best_query(&ds, &[-1.0], &[], &OrthoBasis::new(1), &SearchConfig::greedy(obj))
            .unwrap()
            .unwrap();
        assert_eq!(out.selection.rows(), &[0]);
        assert!(out.query.is_empty());
    }

    #[test]
    fn zero_gradient_yields_nothing() {
        let ds = fig2_data();
        let obj = Objective::new(ObjectiveKind::Gs);
        let out = find_best_query(&ds, &[0.0; 3], &[], &OrthoBasis::new(3), &SearchConfig::greedy(obj)).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn proposition_cap_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let ds = Dataset::from_columns(cols, vec![0.0; n], Task::Regression).unwrap();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cfg = SearchConfig::beam(Objective::new(ObjectiveKind::Gb), 5);
        cfg.max_propositions = Some(1);
        let out = find_best_query(&ds, &g, &[], &OrthoBasis::new(n), &cfg).unwrap().unwrap();
        assert!(out.query.len() <= 1);
    }

    #[test]
    fn width_one_follows_greedy_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let n = 25;
            let cols: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..8))).collect())
                .collect();
            let ds = Dataset::from_columns(cols, vec![0.0; n], Task::Regression).unwrap();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let obj = Objective::new(ObjectiveKind::Gb);
            let mut cfg = SearchConfig::greedy(obj);
            cfg.bounding = false;
            let out = find_best_query(&ds, &g, &[], &OrthoBasis::new(n), &cfg).unwrap().unwrap();

            // reference: repeatedly take the best single augmentation
            let basis = OrthoBasis::new(n);
            let mut current = Query::empty();
            let mut current_sel = Selection::all(n);
            let mut best_value = objective_value(&obj, &current_sel.indicator(n), &g, &[], &basis).unwrap();
            loop {
                let mut step: Option<(f64, usize, Query, Selection)> = None;
                for j in 0..2 {
                    for sign in [Sign::Neg, Sign::Pos] {
                        let mut ts: Vec<f64> = current_sel.rows().iter().map(|&r| ds.value(r, j)).collect();
                        ts.sort_by(f64::total_cmp);
                        ts.dedup();
                        for t in ts {
                            let q = current.and(Proposition::new(j, sign, t));
                            let sel = crate::query::evaluate_query(&q, &ds);
                            if sel == current_sel {
                                continue;
                            }
                            let v = objective_value(&obj, &sel.indicator(n), &g, &[], &basis).unwrap();
                            let better = match &step {
                                None => true,
                                Some((bv, bc, _, _)) => v > *bv + 1e-12 || ((v - *bv).abs() <= 1e-12 && sel.len() < *bc),
                            };
                            if better {
                                step = Some((v, sel.len(), q, sel));
                            }
                        }
                    }
                }
                match step {
                    None => break,
                    Some((v, _, q, sel)) => {
                        best_value = best_value.max(v);
                        current = q;
                        current_sel = sel;
                    }
                }
            }
            assert!((out.value - best_value).abs() <= 1e-9, "{} vs {}", out.value, best_value);
        }
    }
}

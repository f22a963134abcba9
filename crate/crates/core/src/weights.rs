//! Rule weight fitting: offset, stagewise line search, extreme-boosting
//! closed form and the fully corrective refit.
//!
//! Risks here are normalized by `n` and the ridge penalty is `lambda ||b||^2 / n`
//! with the offset excluded.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{self, LossKind};
use crate::query::Selection;

/// Offsets are clamped to this magnitude for single-class or all-zero targets.
const OFFSET_LIMIT: f64 = 30.0;
/// Largest weight the line search will return.
const WEIGHT_LIMIT: f64 = 1e6;
const LINE_TOL: f64 = 1e-10;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const JITTER: f64 = 1e-10;

/// Best constant model `argmin_b R(b * 1)`.
pub fn fit_offset(ds: &Dataset, kind: LossKind) -> Result<f64> {
    let y = ds.target();
    kind.check_targets(y)?;
    let n = y.len() as f64;
    let offset = match kind {
        LossKind::Squared => y.iter().sum::<f64>() / n,
        LossKind::Logistic => {
            let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
            (pos.ln() - (n - pos).ln()).clamp(-OFFSET_LIMIT, OFFSET_LIMIT)
        }
        LossKind::Poisson => (y.iter().sum::<f64>() / n).ln().max(-OFFSET_LIMIT),
    };
    Ok(offset)
}

fn rows_of(q: &[f64]) -> Vec<usize> {
    q.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `argmin_b R_lambda(f + b q)` for a binary output vector `q`.
pub fn line_search_weight(kind: LossKind, f: &[f64], y: &[f64], q: &[f64], lambda: f64) -> Result<f64> {
    if f.len() != y.len() || q.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: if f.len() != y.len() { f.len() } else { q.len() },
        });
    }
    line_search_rows(kind, f, y, &rows_of(q), lambda)
}

/// Line search over the rows of a selection.
pub fn line_search_selection(kind: LossKind, f: &[f64], y: &[f64], sel: &Selection, lambda: f64) -> Result<f64> {
    line_search_rows(kind, f, y, sel.rows(), lambda)
}

fn line_search_rows(kind: LossKind, f: &[f64], y: &[f64], rows: &[usize], lambda: f64) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let n = y.len() as f64;
    if kind == LossKind::Squared {
        let resid: f64 = rows.iter().map(|&i| y[i] - f[i]).sum();
        return Ok(resid / (rows.len() as f64 + lambda));
    }
    let deriv = |b: f64| -> f64 {
        let s: f64 = rows.iter().map(|&i| losses::loss_derivative(kind, f[i] + b, y[i])).sum();
        (s + 2.0 * lambda * b) / n
    };
    let curv = |b: f64| -> f64 {
        let s: f64 = rows
            .iter()
            .map(|&i| losses::loss_second_derivative(kind, f[i] + b, y[i]))
            .sum();
        (s + 2.0 * lambda) / n
    };

    let d0 = deriv(0.0);
    if d0.abs() <= LINE_TOL {
        return Ok(0.0);
    }
    // bracket the root of the increasing derivative
    let dir = -d0.signum();
    let mut step = (d0 / curv(0.0)).abs().clamp(1e-3, 1.0);
    let mut far = dir * step;
    let mut d_far = deriv(far);
    while d_far.signum() == d0.signum() && d_far.abs() > LINE_TOL {
        if far.abs() >= WEIGHT_LIMIT {
            return Ok(far.clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT));
        }
        step *= 2.0;
        far = (dir * step).clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT);
        d_far = deriv(far);
    }
    if d_far.abs() <= LINE_TOL {
        return Ok(far);
    }
    let (mut lo, mut hi) = if dir > 0.0 { (0.0, far) } else { (far, 0.0) };

    let mut x = 0.0;
    let mut dx = d0;
    for _ in 0..500 {
        let mut next = x - dx / curv(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        x = next;
        dx = deriv(x);
        if dx.abs() <= LINE_TOL {
            break;
        }
        if dx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Closed-form weight `-<q,g> / (<q,h> + lambda)`.
pub fn xgb_weight(q: &[f64], g: &[f64], h: &[f64], lambda: f64) -> Result<f64> {
    if q.len() != g.len() || q.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: if q.len() != g.len() { g.len() } else { h.len() },
        });
    }
    let num: f64 = q.iter().zip(g).map(|(a, b)| a * b).sum();
    let den: f64 = q.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + lambda;
    xgb_ratio(num, den)
}

pub(crate) fn xgb_ratio(grad_sum: f64, hess_sum: f64) -> Result<f64> {
    if hess_sum.is_nan() || hess_sum <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    if grad_sum == 0.0 {
        return Ok(0.0);
    }
    Ok(-grad_sum / hess_sum)
}

fn query_matrix(n: usize, queries: &[Selection]) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, queries.len());
    for (j, sel) in queries.iter().enumerate() {
        for &i in sel.rows() {
            q[(i, j)] = 1.0;
        }
    }
    q
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`, retrying with
/// a small diagonal jitter.
fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let t = a.nrows();
    let jittered = a + DMatrix::identity(t, t) * JITTER;
    jittered.cholesky().map(|ch| ch.solve(b)).ok_or(Error::RankDeficient)
}

fn objective(kind: LossKind, f: &DVector<f64>, y: &[f64], beta: &DVector<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let total: f64 = f.iter().zip(y).map(|(&fi, &yi)| losses::loss(kind, fi, yi)).sum();
    (total + lambda * beta.norm_squared()) / n
}

/// Jointly refits all rule weights with the offset held fixed:
/// `argmin_b (1/n) sum_i l(b0 + Q b, y) + lambda ||b||^2 / n`.
pub fn corrective_fit(kind: LossKind, ds: &Dataset, offset: f64, queries: &[Selection], lambda: f64) -> Result<Vec<f64>> {
    corrective_fit_from(kind, ds.target(), offset, queries, lambda, None)
}

/// [`corrective_fit`] on a raw target vector with an optional starting point.
pub fn corrective_fit_from(
    kind: LossKind,
    y: &[f64],
    offset: f64,
    queries: &[Selection],
    lambda: f64,
    init: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let t = queries.len();
    if t == 0 {
        return Ok(Vec::new());
    }
    let n = y.len();
    let nf = n as f64;
    let q = query_matrix(n, queries);
    let qt = q.transpose();

    if kind == LossKind::Squared {
        let a = &qt * &q + DMatrix::identity(t, t) * lambda;
        let r = DVector::from_iterator(n, y.iter().map(|&v| v - offset));
        let b = &qt * r;
        return Ok(spd_solve(&a, &b)?.iter().copied().collect());
    }

    let mut beta = match init {
        Some(w) if w.len() == t => DVector::from_column_slice(w),
        _ => DVector::zeros(t),
    };
    let outputs = |beta: &DVector<f64>| -> DVector<f64> { (&q * beta).add_scalar(offset) };
    let mut f = outputs(&beta);
    let mut value = objective(kind, &f, y, &beta, lambda);
    for _ in 0..NEWTON_MAX_ITER {
        let d = DVector::from_iterator(n, f.iter().zip(y).map(|(&fi, &yi)| losses::loss_derivative(kind, fi, yi)));
        let grad = (&qt * d + &beta * (2.0 * lambda)) / nf;
        if grad.amax() <= NEWTON_TOL {
            break;
        }
        let mut weighted = q.clone();
        for (i, (&fi, &yi)) in f.iter().zip(y).enumerate() {
            let w = losses::loss_second_derivative(kind, fi, yi);
            weighted.row_mut(i).scale_mut(w);
        }
        let hess = (&qt * weighted + DMatrix::identity(t, t) * (2.0 * lambda)) / nf;
        let step = spd_solve(&hess, &(-&grad))?;
        let slope = grad.dot(&step);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACKS {
            let cand = &beta + &step * s;
            let f_cand = outputs(&cand);
            let v_cand = objective(kind, &f_cand, y, &cand, lambda);
            if v_cand <= value + ARMIJO * s * slope {
                beta = cand;
                f = f_cand;
                value = v_cand;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(beta.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use approx::assert_abs_diff_eq;

    fn fig2() -> Dataset {
        Dataset::from_columns(vec![vec![1.0, 2.0, 3.0]], vec![-10.0, -6.0, 5.0], Task::Regression).unwrap()
    }

    #[test]
    fn offsets() {
        assert_abs_diff_eq!(fit_offset(&fig2(), LossKind::Squared).unwrap(), -11.0 / 3.0, epsilon = 1e-15);
        let ds = Dataset::from_columns(vec![vec![1.0; 4]], vec![1.0; 4], Task::CountRegression).unwrap();
        assert_eq!(fit_offset(&ds, LossKind::Poisson).unwrap(), 0.0);
        let ds = Dataset::from_columns(vec![vec![1.0; 3]], vec![0.0; 3], Task::CountRegression).unwrap();
        assert_eq!(fit_offset(&ds, LossKind::Poisson).unwrap(), -OFFSET_LIMIT);
        let ds = Dataset::from_columns(vec![vec![1.0; 3]], vec![1.0; 3], Task::BinaryClassification).unwrap();
        assert_eq!(fit_offset(&ds, LossKind::Logistic).unwrap(), OFFSET_LIMIT);
    }

    #[test]
    fn line_search_examples() {
        let y = [-10.0, -6.0, 5.0];
        let b = line_search_weight(LossKind::Squared, &[0.0; 3], &y, &[1.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(b, -8.0);
        let b = line_search_weight(LossKind::Squared, &[0.0; 2], &[2.0, 2.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(b, 2.0);
        assert!(matches!(
            line_search_weight(LossKind::Squared, &[0.0; 2], &[2.0, 2.0], &[0.0, 0.0], 0.0),
            Err(Error::EmptyQuery)
        ));
        let b = line_search_weight(LossKind::Poisson, &[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn line_search_is_stationary() {
        let y = [1.0, -1.0, 1.0, 1.0, -1.0];
        let f = [0.2, -0.4, 0.1, 0.0, 0.3];
        let q = [1.0, 1.0, 1.0, 0.0, 1.0];
        for lambda in [0.0, 0.5] {
            let b = line_search_weight(LossKind::Logistic, &f, &y, &q, lambda).unwrap();
            let d: f64 = (0..5)
                .filter(|&i| q[i] != 0.0)
                .map(|i| losses::loss_derivative(LossKind::Logistic, f[i] + b, y[i]))
                .sum::<f64>()
                + 2.0 * lambda * b;
            assert!((d / 5.0).abs() <= 1e-8);
        }
        let yc = [0.0, 3.0, 7.0, 1.0, 2.0];
        let b = line_search_weight(LossKind::Poisson, &f, &yc, &q, 0.0).unwrap();
        let d: f64 = (0..5)
            .filter(|&i| q[i] != 0.0)
            .map(|i| losses::loss_derivative(LossKind::Poisson, f[i] + b, yc[i]))
            .sum();
        assert!((d / 5.0).abs() <= 1e-8);
    }

    #[test]
    fn xgb_examples() {
        let g = [2.0, -2.0, -5.0];
        let h = [1.0; 3];
        assert_eq!(xgb_weight(&[0.0, 0.0, 1.0], &g, &h, 0.0).unwrap(), 5.0);
        assert!(xgb_weight(&[0.0, 0.0, 1.0], &g, &h, 1e12).unwrap().abs() < 1e-10);
        assert_eq!(xgb_weight(&[1.0, 1.0, 0.0], &g, &h, 0.0).unwrap(), 0.0);
        assert!(matches!(
            xgb_weight(&[0.0; 3], &g, &h, 0.0),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn corrective_fig2() {
        let ds = fig2();
        let q1 = Selection::from_indices(vec![0, 1]);
        let q3 = Selection::from_indices(vec![1, 2]);
        let w = corrective_fit(LossKind::Squared, &ds, 0.0, &[q1.clone(), q3], 0.0).unwrap();
        assert_abs_diff_eq!(w[0], -31.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 14.0 / 3.0, epsilon = 1e-12);
        let q2 = Selection::from_indices(vec![2]);
        let w = corrective_fit(LossKind::Squared, &ds, 0.0, &[q1, q2], 0.0).unwrap();
        assert_abs_diff_eq!(w[0], -8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn corrective_stationary_at_optimal_offset() {
        let ds = fig2();
        let w = corrective_fit(LossKind::Squared, &ds, -11.0 / 3.0, &[Selection::all(3)], 0.0).unwrap();
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn corrective_newton_reaches_tolerance() {
        let y = vec![1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let queries = vec![
            Selection::from_indices(vec![0, 1, 2, 3]),
            Selection::from_indices(vec![2, 3, 4, 5, 6]),
        ];
        let offset = 0.0;
        let w = corrective_fit_from(LossKind::Logistic, &y, offset, &queries, 0.0, None).unwrap();
        for sel in &queries {
            let g: f64 = sel
                .rows()
                .iter()
                .map(|&i| {
                    let f: f64 = offset + queries.iter().zip(&w).filter(|(s, _)| s.contains(i)).map(|(_, b)| b).sum::<f64>();
                    losses::loss_derivative(LossKind::Logistic, f, y[i])
                })
                .sum();
            assert!((g / 8.0).abs() <= 1e-8);
        }
    }
}

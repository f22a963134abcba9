//! Orthonormal basis of the span of selected query output vectors.
//!
//! Each accepted query contributes the normalized component orthogonal to the
//! current basis (Gram-Schmidt), so projections onto the orthogonal complement
//! cost `O(tn)` instead of requiring a Gram-matrix inverse.

use crate::error::{Error, Result};
use crate::query::Selection;

/// Queries whose orthogonal component is at most this long are redundant.
pub const REJECTION_TOL: f64 = 1e-9;

const REORTHO_PERIOD: usize = 32;
const REORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    n: usize,
    columns: Vec<Vec<f64>>,
    source_norms: Vec<f64>,
    since_check: usize,
}

/// Result of trying to add a vector to the basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extension {
    Added { perp_norm: f64 },
    Rejected { perp_norm: f64 },
}

impl Extension {
    pub fn is_added(self) -> bool {
        matches!(self, Extension::Added { .. })
    }
}

impl OrthoBasis {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            columns: Vec::new(),
            source_norms: Vec::new(),
            since_check: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of basis vectors `t`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// `||q_perp||` of each inserted vector at insertion time.
    pub fn source_norms(&self) -> &[f64] {
        &self.source_norms
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: len,
            });
        }
        Ok(())
    }

    /// Splits `v` into its component orthogonal to the basis and the
    /// coefficients `<o_k, v>` of its parallel part.
    pub fn project_out(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(v.len())?;
        let mut perp = v.to_vec();
        let mut coefs = Vec::with_capacity(self.columns.len());
        for o in &self.columns {
            let c = dot(o, &perp);
            axpy(-c, o, &mut perp);
            coefs.push(c);
        }
        Ok((perp, coefs))
    }

    /// Orthogonal component of `v`.
    pub fn perp(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.project_out(v).map(|(p, _)| p)
    }

    /// `O^T v`.
    pub fn coefficients(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        Ok(self.columns.iter().map(|o| dot(o, v)).collect())
    }

    /// Squared norm of the orthogonal component of a binary vector.
    pub fn perp_norm_sq(&self, sel: &Selection) -> f64 {
        let par: f64 = self
            .columns
            .iter()
            .map(|o| {
                let c = sel.dot(o);
                c * c
            })
            .sum();
        (sel.len() as f64 - par).max(0.0)
    }

    /// Appends the normalized orthogonal component of `q`, or rejects `q`
    /// when that component is (numerically) zero.
    pub fn extend(&mut self, q: &[f64]) -> Result<Extension> {
        let (mut perp, _) = self.project_out(q)?;
        // second pass for numerical orthogonality
        for o in &self.columns {
            let c = dot(o, &perp);
            axpy(-c, o, &mut perp);
        }
        let norm = dot(&perp, &perp).sqrt();
        if norm <= REJECTION_TOL {
            return Ok(Extension::Rejected { perp_norm: norm });
        }
        perp.iter_mut().for_each(|x| *x /= norm);
        self.columns.push(perp);
        self.source_norms.push(norm);
        self.since_check += 1;
        if self.since_check >= REORTHO_PERIOD {
            self.since_check = 0;
            if self.max_gram_deviation() > REORTHO_TOL {
                self.reorthogonalize();
            }
        }
        Ok(Extension::Added { perp_norm: norm })
    }

    pub fn extend_selection(&mut self, sel: &Selection) -> Result<Extension> {
        self.extend(&sel.indicator(self.n))
    }

    /// Largest elementwise deviation of the Gram matrix from the identity.
    pub fn max_gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, oa) in self.columns.iter().enumerate() {
            for (b, ob) in self.columns.iter().enumerate().skip(a) {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot(oa, ob) - target).abs());
            }
        }
        worst
    }

    /// One modified Gram-Schmidt pass over the stored columns.
    pub fn reorthogonalize(&mut self) {
        for k in 0..self.columns.len() {
            let (done, rest) = self.columns.split_at_mut(k);
            let col = &mut rest[0];
            for o in done.iter() {
                let c = dot(o, col);
                axpy(-c, o, col);
            }
            let norm = dot(col, col).sqrt();
            if norm > 0.0 {
                col.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    /// Row-major `n x t` copy, row `i` holding `o_{1,i} .. o_{t,i}`.
    pub fn row_major(&self) -> Vec<f64> {
        let t = self.columns.len();
        let mut out = vec![0.0; self.n * t];
        for (k, o) in self.columns.iter().enumerate() {
            for (i, &v) in o.iter().enumerate() {
                out[i * t + k] = v;
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn fig2_basis() -> OrthoBasis {
        let mut b = OrthoBasis::new(3);
        assert!(b.extend(&[1.0, 1.0, 0.0]).unwrap().is_added());
        b
    }

    #[test]
    fn empty_basis_projection_is_identity() {
        let b = OrthoBasis::new(3);
        let (perp, coefs) = b.project_out(&[2.0, -2.0, -5.0]).unwrap();
        assert_eq!(perp, vec![2.0, -2.0, -5.0]);
        assert!(coefs.is_empty());
    }

    #[test]
    fn projection_on_fig2_basis() {
        let b = fig2_basis();
        assert_abs_diff_eq!(b.columns()[0][0], FRAC_1_SQRT_2, epsilon = 1e-15);
        let (perp, _) = b.project_out(&[0.0, 1.0, 1.0]).unwrap();
        for (a, e) in perp.iter().zip([-0.5, 0.5, 1.0]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-12);
        }
        let (perp, _) = b.project_out(&[1.0, 1.0, 0.0]).unwrap();
        for a in perp {
            assert_abs_diff_eq!(a, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn extension_and_rejection() {
        let mut b = fig2_basis();
        assert!(!b.extend(&[1.0, 1.0, 0.0]).unwrap().is_added());
        assert_eq!(b.len(), 1);
        let ext = b.extend(&[0.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            match ext {
                Extension::Added { perp_norm } => perp_norm,
                _ => panic!("expected added"),
            },
            1.5f64.sqrt(),
            epsilon = 1e-12
        );
        let s = 1.5f64.sqrt();
        for (a, e) in b.columns()[1].iter().zip([-0.5 / s, 0.5 / s, 1.0 / s]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let b = OrthoBasis::new(3);
        assert!(matches!(
            b.project_out(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn perp_norm_of_selection_matches_projection() {
        let mut b = fig2_basis();
        b.extend(&[0.0, 0.0, 1.0]).unwrap();
        let sel = Selection::from_indices(vec![1, 2]);
        let p = b.perp(&sel.indicator(3)).unwrap();
        assert_abs_diff_eq!(b.perp_norm_sq(&sel), dot(&p, &p), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn gram_stays_identity_and_projection_is_idempotent(
            rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 12), 1..40),
            v in prop::collection::vec(-10.0f64..10.0, 12),
        ) {
            let mut b = OrthoBasis::new(12);
            for r in &rows {
                let q: Vec<f64> = r.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
                b.extend(&q).unwrap();
            }
            prop_assert!(b.max_gram_deviation() <= 1e-8);
            let once = b.perp(&v).unwrap();
            let twice = b.perp(&once).unwrap();
            for (a, c) in once.iter().zip(&twice) {
                prop_assert!((a - c).abs() <= 1e-10);
            }
        }
    }
}

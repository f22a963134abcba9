//! Query selection objectives.
//!
//! All four objectives are functions of a few sums over the selected rows:
//! the gradient sum `<g, q>`, the count `||q||^2`, the Hessian sum `<h, q>`
//! and, for the orthogonal objective, `||q_perp||^2`. [`score`] turns those
//! sums into an objective value and is shared by the search engine and the
//! direct evaluation below.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis::{dot, OrthoBasis};
use crate::error::{Error, Result};

/// Default additive regularizer in the orthogonal objective's denominator.
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// `|<g,q>| / ||q||`
    Gb,
    /// `|<g,q>|`
    Gs,
    /// `|<g,q>| / sqrt(<h,q> + lambda)`
    Xgb,
    /// `|<g_perp,q>| / (||q_perp|| + epsilon)`
    Ogb,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [
        ObjectiveKind::Gb,
        ObjectiveKind::Gs,
        ObjectiveKind::Xgb,
        ObjectiveKind::Ogb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Gb => "gb",
            ObjectiveKind::Gs => "gs",
            ObjectiveKind::Xgb => "xgb",
            ObjectiveKind::Ogb => "ogb",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gb" => Ok(ObjectiveKind::Gb),
            "gs" => Ok(ObjectiveKind::Gs),
            "xgb" => Ok(ObjectiveKind::Xgb),
            "ogb" => Ok(ObjectiveKind::Ogb),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

const PERP_FLOOR_SQ: f64 = crate::basis::REJECTION_TOL * crate::basis::REJECTION_TOL;

/// An objective together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    /// Only used by [`ObjectiveKind::Ogb`].
    pub epsilon: f64,
    /// Only used by [`ObjectiveKind::Xgb`].
    pub lambda: f64,
}

impl Objective {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
            lambda: 0.0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Objective value from the sufficient statistics of a selection.
    ///
    /// `perp_norm_sq` is only read for the orthogonal objective; `grad_sum`
    /// must then be taken over the projected gradient.
    #[inline]
    pub fn score(&self, grad_sum: f64, count: f64, hess_sum: f64, perp_norm_sq: f64) -> f64 {
        if count <= 0.0 {
            return 0.0;
        }
        let num = grad_sum.abs();
        let den = match self.kind {
            ObjectiveKind::Gb => count.sqrt(),
            ObjectiveKind::Gs => 1.0,
            ObjectiveKind::Xgb => (hess_sum + self.lambda).sqrt(),
            // a q inside the span leaves only rounding noise in both terms
            ObjectiveKind::Ogb if perp_norm_sq <= PERP_FLOOR_SQ => return 0.0,
            ObjectiveKind::Ogb => perp_norm_sq.sqrt() + self.epsilon,
        };
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

fn check(len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: len,
        });
    }
    Ok(())
}

/// Objective value of a binary output vector `q`.
///
/// For [`ObjectiveKind::Ogb`], `g` must already be the projected gradient
/// `g_perp`; `q` is projected here via the basis.
pub fn objective_value(obj: &Objective, q: &[f64], g: &[f64], h: &[f64], basis: &OrthoBasis) -> Result<f64> {
    let n = g.len();
    check(q.len(), n)?;
    let count: f64 = q.iter().map(|x| x * x).sum();
    if count == 0.0 {
        return Ok(0.0);
    }
    let grad_sum = dot(g, q);
    let hess_sum = match obj.kind {
        ObjectiveKind::Xgb => {
            check(h.len(), n)?;
            dot(h, q)
        }
        _ => 0.0,
    };
    let perp_norm_sq = match obj.kind {
        ObjectiveKind::Ogb => {
            check(basis.n(), n)?;
            let perp = basis.perp(q)?;
            dot(&perp, &perp)
        }
        _ => 0.0,
    };
    Ok(obj.score(grad_sum, count, hess_sum, perp_norm_sq))
}

/// Minimum squared distance from `target` to `span(basis ∪ {q})`.
pub fn projection_error(q: &[f64], target: &[f64], basis: &OrthoBasis) -> Result<f64> {
    check(q.len(), target.len())?;
    let r = basis.perp(target)?;
    let qp = basis.perp(q)?;
    let rr = dot(&r, &r);
    let qq = dot(&qp, &qp);
    if qq <= crate::basis::REJECTION_TOL * crate::basis::REJECTION_TOL {
        return Ok(rr);
    }
    let rq = dot(&r, &qp);
    Ok((rr - rq * rq / qq).max(0.0))
}

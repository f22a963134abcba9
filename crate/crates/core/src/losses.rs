//! Squared, logistic and Poisson losses with their output-space derivatives.
//!
//! The squared-loss `gradient` uses the half-loss convention `g = f - y`
//! (and `h = 1`) while `loss_value` is `(f - y)^2`. Rule selection is
//! invariant to positive rescaling of `g` and the weight fits use
//! [`loss_derivative`], which is the exact derivative of `loss_value`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};

/// Largest exponent passed to `exp`; keeps Poisson terms finite.
const EXP_CEILING: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logistic,
    Poisson,
}

impl LossKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => LossKind::Squared,
            Task::BinaryClassification => LossKind::Logistic,
            Task::CountRegression => LossKind::Poisson,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
            LossKind::Poisson => "poisson",
        }
    }

    pub fn check_target(self, row: usize, y: f64) -> Result<()> {
        let ok = match self {
            LossKind::Squared => y.is_finite(),
            LossKind::Logistic => y == 1.0 || y == -1.0,
            LossKind::Poisson => y.is_finite() && y >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTarget {
                loss: self.name(),
                row,
                value: y,
            })
        }
    }

    pub fn check_targets(self, y: &[f64]) -> Result<()> {
        y.iter()
            .enumerate()
            .try_for_each(|(i, &v)| self.check_target(i, v))
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "sqr" => Ok(LossKind::Squared),
            "logistic" | "log" => Ok(LossKind::Logistic),
            "poisson" | "poi" => Ok(LossKind::Poisson),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn capped_exp(f: f64) -> f64 {
    f.min(EXP_CEILING).exp()
}

/// `log(1 + exp(-m))` without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m >= 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Loss of output `f` on target `y`, without target validation.
pub fn loss(kind: LossKind, f: f64, y: f64) -> f64 {
    match kind {
        LossKind::Squared => (f - y) * (f - y),
        LossKind::Logistic => softplus_neg(y * f),
        LossKind::Poisson => {
            let ylogy = if y > 0.0 { y * y.ln() } else { 0.0 };
            ylogy - y * f - y + capped_exp(f)
        }
    }
}

pub fn loss_value(kind: LossKind, f: f64, y: f64) -> Result<f64> {
    kind.check_target(0, y)?;
    Ok(loss(kind, f, y))
}

/// Exact `dl/df`.
pub fn loss_derivative(kind: LossKind, f: f64, y: f64) -> f64 {
    match kind {
        LossKind::Squared => 2.0 * (f - y),
        LossKind::Logistic => -y * sigmoid(-y * f),
        LossKind::Poisson => capped_exp(f) - y,
    }
}

/// Exact `d^2 l / df^2`, strictly positive.
pub fn loss_second_derivative(kind: LossKind, f: f64, y: f64) -> f64 {
    match kind {
        LossKind::Squared => 2.0,
        LossKind::Logistic => {
            let m = y * f;
            (sigmoid(m) * sigmoid(-m)).max(f64::MIN_POSITIVE)
        }
        LossKind::Poisson => capped_exp(f).max(f64::MIN_POSITIVE),
    }
}

fn check_lengths(f: &[f64], y: &[f64]) -> Result<()> {
    if f.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: f.len(),
        });
    }
    Ok(())
}

/// Gradient vector of the empirical loss with respect to the outputs.
pub fn gradient(kind: LossKind, f: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_lengths(f, y)?;
    Ok(f.iter()
        .zip(y)
        .map(|(&fi, &yi)| match kind {
            LossKind::Squared => fi - yi,
            _ => loss_derivative(kind, fi, yi),
        })
        .collect())
}

/// Diagonal of the loss Hessian with respect to the outputs.
pub fn hessian_diag(kind: LossKind, f: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_lengths(f, y)?;
    Ok(f.iter()
        .zip(y)
        .map(|(&fi, &yi)| match kind {
            LossKind::Squared => 1.0,
            _ => loss_second_derivative(kind, fi, yi),
        })
        .collect())
}

/// Maps a raw ensemble output to the conditional-mean scale.
pub fn predict_mean(kind: LossKind, f: f64) -> f64 {
    match kind {
        LossKind::Squared => f,
        LossKind::Logistic => sigmoid(f),
        LossKind::Poisson => capped_exp(f),
    }
}

/// Mean loss over all rows.
pub fn risk(kind: LossKind, f: &[f64], y: &[f64]) -> f64 {
    total_loss(kind, f, y) / y.len() as f64
}

/// Sum of losses over all rows.
pub fn total_loss(kind: LossKind, f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(&fi, &yi)| loss(kind, fi, yi)).sum()
}

/// Mean loss plus `lambda * ||weights||^2 / n`.
pub fn regularized_risk(kind: LossKind, f: &[f64], y: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let penalty: f64 = weights.iter().map(|w| w * w).sum();
    risk(kind, f, y) + lambda * penalty / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const KINDS: [LossKind; 3] = [LossKind::Squared, LossKind::Logistic, LossKind::Poisson];

    #[test]
    fn loss_examples() {
        assert_eq!(loss_value(LossKind::Squared, -8.0, -10.0).unwrap(), 4.0);
        assert_abs_diff_eq!(
            loss_value(LossKind::Logistic, 0.0, 1.0).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(loss_value(LossKind::Poisson, 0.0, 0.0).unwrap(), 1.0);
        assert!(loss_value(LossKind::Logistic, 0.0, 0.5).is_err());
        assert!(loss_value(LossKind::Poisson, 0.0, -1.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = gradient(LossKind::Squared, &[-8.0, -8.0, 0.0], &[-10.0, -6.0, 5.0]).unwrap();
        assert_eq!(g, vec![2.0, -2.0, -5.0]);
        let g = gradient(LossKind::Logistic, &[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!(g, vec![-0.5, 0.5]);
        let g = gradient(LossKind::Poisson, &[0.0, 0.0], &[1.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0, -2.0]);
        assert!(gradient(LossKind::Squared, &[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hessian_examples() {
        assert_eq!(
            hessian_diag(LossKind::Squared, &[3.0, -1.0], &[0.0, 9.0]).unwrap(),
            vec![1.0, 1.0]
        );
        assert_eq!(
            hessian_diag(LossKind::Logistic, &[0.0, 0.0], &[1.0, -1.0]).unwrap(),
            vec![0.25, 0.25]
        );
        let h = hessian_diag(LossKind::Poisson, &[0.0, 2f64.ln()], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(predict_mean(LossKind::Squared, 3.5), 3.5);
        assert_eq!(predict_mean(LossKind::Logistic, 0.0), 0.5);
        assert_eq!(predict_mean(LossKind::Poisson, 0.0), 1.0);
    }

    #[test]
    fn extreme_outputs_stay_finite() {
        for kind in KINDS {
            for f in [-1e6, -800.0, 800.0, 1e6] {
                let y = if kind == LossKind::Logistic { -1.0 } else { 1.0 };
                assert!(loss(kind, f, y).is_finite());
                assert!(loss_derivative(kind, f, y).is_finite());
                let h = loss_second_derivative(kind, f, y);
                assert!(h.is_finite() && h > 0.0);
            }
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, kind: LossKind) -> (f64, f64) {
        let f = rng.random_range(-4.0..4.0);
        let y = match kind {
            LossKind::Squared => rng.random_range(-5.0..5.0),
            LossKind::Logistic => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            LossKind::Poisson => f64::from(rng.random_range(0u32..10)),
        };
        (f, y)
    }

    #[test]
    fn finite_difference_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-5;
        for draw in 0..1000 {
            let kind = KINDS[draw % 3];
            let (f, y) = random_point(&mut rng, kind);
            let fd = (loss(kind, f + step, y) - loss(kind, f - step, y)) / (2.0 * step);
            let d = loss_derivative(kind, f, y);
            assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "{kind} f={f} y={y}");
            let fd2 = (loss_derivative(kind, f + step, y) - loss_derivative(kind, f - step, y))
                / (2.0 * step);
            let h = loss_second_derivative(kind, f, y);
            assert!((h - fd2).abs() <= 1e-6 * h.abs().max(1.0), "{kind} f={f} y={y}");
        }
    }

    #[test]
    fn discrete_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for draw in 0..300 {
            let kind = KINDS[draw % 3];
            let (f, y) = random_point(&mut rng, kind);
            let step = 0.1;
            let second = loss(kind, f + step, y) - 2.0 * loss(kind, f, y) + loss(kind, f - step, y);
            assert!(second >= -1e-12);
        }
    }

    #[test]
    fn derivatives_are_elementwise() {
        let f = [0.3, -1.2, 2.0];
        let y = [1.0, 0.0, 4.0];
        let full = gradient(LossKind::Poisson, &f, &y).unwrap();
        for i in 0..3 {
            let single = gradient(LossKind::Poisson, &f[i..=i], &y[i..=i]).unwrap();
            assert_eq!(single[0], full[i]);
        }
    }
}

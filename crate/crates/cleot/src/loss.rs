//! Classification losses over predicted class probabilities, each returning
//! the batch-mean value together with its gradient with respect to the
//! probabilities.
//!
//! Besides plain cross-entropy, the zoo covers losses built to tolerate
//! label noise:
//!
//! - margin-style losses on `s = <y, p>`, the predicted probability of the
//!   labeled class: `unhinged = 1 - s`, `sigmoid = 1/(1+exp(4(2s-1)))`,
//!   `ramp = min(1, max(0, 1.5 - 2s))`, `savage = (1-s)^2`;
//! - bootstrap-soft, cross-entropy against a mixture of the given label and
//!   the prediction itself;
//! - forward/backward correction through a known class-transition matrix
//!   `E`: forward scores the predicted *noisy*-label posterior `E^T p`,
//!   backward re-weights per-class log losses by `E^{-1}` to cancel the
//!   corruption in expectation.
//!
//! All values are means over the batch, so learning rates are comparable
//! across batch sizes. Backward-corrected per-sample losses can legitimately
//! be negative; nothing here clamps them.

use crate::error::{Error, Result};
use crate::linalg::{one_norm, LuFactors};
use crate::matrix::Matrix;
use crate::noise::{one_hot_class, TransitionMatrix};

/// Floor for probabilities inside logarithms and their gradients.
const CLAMP: f64 = 1e-12;

/// Condition numbers above this make an inverse meaningless in f64.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    CrossEntropy,
    Unhinged,
    Sigmoid,
    Ramp,
    Savage,
    BootstrapSoft { beta: f64 },
    Backward { transition: TransitionMatrix },
    Forward { transition: TransitionMatrix },
}

/// A compiled loss: validation and any one-time work (inverting the
/// transition matrix for backward correction) happen in [`Loss::new`].
#[derive(Debug, Clone)]
pub struct Loss {
    kind: LossKind,
    inverse: Option<Matrix>,
}

impl Loss {
    pub fn new(kind: LossKind) -> Result<Loss> {
        let inverse = match &kind {
            LossKind::BootstrapSoft { beta } => {
                if !beta.is_finite() || !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::Contract(format!(
                        "bootstrap mixing weight must lie in (0, 1], got {beta}"
                    )));
                }
                None
            }
            LossKind::Backward { transition } => {
                let lu = LuFactors::new(transition.matrix()).map_err(|_| {
                    Error::SingularTransition { cond: f64::INFINITY }
                })?;
                let inverse = lu.inverse();
                let cond = one_norm(transition.matrix()) * one_norm(&inverse);
                if !cond.is_finite() || cond > MAX_CONDITION {
                    return Err(Error::SingularTransition { cond });
                }
                Some(inverse)
            }
            _ => None,
        };
        Ok(Loss { kind, inverse })
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    /// Batch-mean loss and its gradient with respect to `probs`. `labels`
    /// rows are one-hot for the margin losses and may be arbitrary simplex
    /// vectors elsewhere (propagated labels, for instance).
    pub fn evaluate(&self, labels: &Matrix, probs: &Matrix) -> Result<(f64, Matrix)> {
        if labels.shape() != probs.shape() {
            return Err(Error::Shape(format!(
                "labels are {:?} but probabilities are {:?}",
                labels.shape(),
                probs.shape()
            )));
        }
        if labels.rows() == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        match &self.kind {
            LossKind::CrossEntropy => Ok(cross_entropy(labels, probs)),
            LossKind::Unhinged => margin_loss(labels, probs, |s| (1.0 - s, -1.0)),
            LossKind::Sigmoid => margin_loss(labels, probs, |s| {
                let l = 1.0 / (1.0 + (4.0 * (2.0 * s - 1.0)).exp());
                (l, -8.0 * l * (1.0 - l))
            }),
            LossKind::Ramp => margin_loss(labels, probs, |s| {
                let raw = 1.5 - 2.0 * s;
                if raw <= 0.0 {
                    (0.0, 0.0)
                } else if raw >= 1.0 {
                    (1.0, 0.0)
                } else {
                    (raw, -2.0)
                }
            }),
            LossKind::Savage => margin_loss(labels, probs, |s| {
                let miss = 1.0 - s;
                (miss * miss, -2.0 * miss)
            }),
            LossKind::BootstrapSoft { beta } => Ok(bootstrap_soft(labels, probs, *beta)),
            LossKind::Forward { transition } => {
                forward_corrected(labels, probs, transition)
            }
            LossKind::Backward { transition } => backward_corrected(
                labels,
                probs,
                transition,
                self.inverse.as_ref().expect("inverse is computed at construction"),
            ),
        }
    }
}

fn cross_entropy(labels: &Matrix, probs: &Matrix) -> (f64, Matrix) {
    let batch = labels.rows() as f64;
    let mut acc = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..labels.rows() {
        for (k, (&y, &p)) in labels.row(i).iter().zip(probs.row(i)).enumerate() {
            let clamped = p.clamp(CLAMP, 1.0);
            acc += y * clamped.ln();
            grad[(i, k)] = -y / clamped / batch;
        }
    }
    (-acc / batch, grad)
}

/// Losses that depend on `p` only through `s = <y, p>`, the probability
/// assigned to the labeled class. `eval` returns `(value, d value / d s)`.
fn margin_loss(
    labels: &Matrix,
    probs: &Matrix,
    eval: impl Fn(f64) -> (f64, f64),
) -> Result<(f64, Matrix)> {
    let batch = labels.rows() as f64;
    let mut acc = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..labels.rows() {
        let class = one_hot_class(labels.row(i)).ok_or_else(|| {
            Error::Contract(format!("margin losses need one-hot labels; row {i} is not"))
        })?;
        let (value, slope) = eval(probs[(i, class)]);
        acc += value;
        grad[(i, class)] = slope / batch;
    }
    Ok((acc / batch, grad))
}

fn bootstrap_soft(labels: &Matrix, probs: &Matrix, beta: f64) -> (f64, Matrix) {
    let batch = labels.rows() as f64;
    let mut acc = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..labels.rows() {
        for (k, (&y, &p)) in labels.row(i).iter().zip(probs.row(i)).enumerate() {
            let target = beta * y + (1.0 - beta) * p;
            let clamped = p.clamp(CLAMP, 1.0);
            acc += target * clamped.ln();
            // The prediction appears both inside the log and in the target.
            grad[(i, k)] = (-(1.0 - beta) * clamped.ln() - target / clamped) / batch;
        }
    }
    (-acc / batch, grad)
}

fn forward_corrected(
    labels: &Matrix,
    probs: &Matrix,
    transition: &TransitionMatrix,
) -> Result<(f64, Matrix)> {
    check_classes(labels, transition)?;
    // Noisy-label posterior q = E^T p, scored with plain cross-entropy; the
    // chain rule then maps the q-gradient back through E.
    let noisy_posterior = probs.matmul(transition.matrix());
    let (value, grad_q) = cross_entropy(labels, &noisy_posterior);
    Ok((value, grad_q.matmul_transpose(transition.matrix())))
}

fn backward_corrected(
    labels: &Matrix,
    probs: &Matrix,
    transition: &TransitionMatrix,
    inverse: &Matrix,
) -> Result<(f64, Matrix)> {
    check_classes(labels, transition)?;
    let batch = labels.rows() as f64;
    // Per-sample class weights w = label^T E^{-1}; the corrected loss is the
    // w-weighted sum of per-class log losses, which may be negative.
    let weights = labels.matmul(inverse);
    let mut acc = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..labels.rows() {
        for (k, (&w, &p)) in weights.row(i).iter().zip(probs.row(i)).enumerate() {
            let clamped = p.clamp(CLAMP, 1.0);
            acc += w * clamped.ln();
            grad[(i, k)] = -w / clamped / batch;
        }
    }
    Ok((-acc / batch, grad))
}

fn check_classes(labels: &Matrix, transition: &TransitionMatrix) -> Result<()> {
    if labels.cols() != transition.classes() {
        return Err(Error::Shape(format!(
            "labels have {} classes but the transition matrix has {}",
            labels.cols(),
            transition.classes()
        )));
    }
    Ok(())
}

//! The coupled transport objective: a joint feature/label ground cost, the
//! minibatch training loss that reweights per-pair cross-entropies by an
//! entropic optimal-transport coupling, and the label-propagation view of
//! that coupling.
//!
//! For a batch of m samples with noisy labels `y~_i` and predictions
//! `p_j = f(x_j)`, the ground cost is
//!
//! ```text
//! D[i][j] = alpha * |x_i - x_j|^2 + beta * CE(y~_i, p_j)
//! ```
//!
//! and the batch loss is `sum_ij gamma*_ij * CE(y~_i, p_j)` where `gamma*`
//! is the entropic coupling between uniform marginals under `D`. Matching
//! mass flows from noisy samples to samples the current model explains
//! well, which discounts mislabeled points. The coupling equivalently
//! defines propagated labels `y^_j = m * sum_i gamma*_ij y~_i`, a
//! coupling-weighted average that acts as a denoised estimate.

use crate::error::{Error, Result};
use crate::matrix::{pairwise_squared_distances, Matrix};
use crate::nn::{DenseNet, Gradients};
use crate::ot::{
    exact_assignment, sinkhorn, sinkhorn_backward, sinkhorn_unrolled, Coupling, DiscreteMeasure,
    GroundCost, SinkhornConfig,
};
use crate::rng::Rng;

const CLAMP: f64 = 1e-12;

/// How gradients flow through the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Differentiate through a fixed number of Sinkhorn sweeps, so the loss
    /// sees both the explicit cross-entropy term and the coupling's
    /// dependence on the predictions.
    Unrolled,
    /// Treat the coupling as a constant (alternating-minimization view);
    /// cheaper, and the only mode that supports `lambda = 0` via the exact
    /// assignment solver.
    DetachedCoupling,
}

/// Weights and solver settings for the transport objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CleotConfig {
    /// Feature-distance weight.
    pub alpha: f64,
    /// Label-cost weight.
    pub beta: f64,
    /// Entropic regularization weight; 0 selects the exact assignment.
    pub lambda: f64,
    /// Sweeps recorded by the differentiable solver in unrolled mode.
    pub unroll_depth: usize,
    pub mode: GradientMode,
}

impl CleotConfig {
    /// Defaults: unroll depth 100 and the unrolled gradient mode, except
    /// that `lambda = 0` selects detached coupling (the assignment path is
    /// the only one defined there).
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<CleotConfig> {
        let mode =
            if lambda == 0.0 { GradientMode::DetachedCoupling } else { GradientMode::Unrolled };
        let cfg = CleotConfig { alpha, beta, lambda, unroll_depth: 100, mode };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Contract(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.lambda == 0.0 && self.mode != GradientMode::DetachedCoupling {
            return Err(Error::Contract(
                "lambda = 0 uses the exact assignment, which is not differentiable; \
                 use the detached-coupling mode"
                    .into(),
            ));
        }
        if self.alpha == 0.0 && self.beta == 0.0 && self.lambda > 0.0 {
            return Err(Error::Contract(
                "alpha and beta are both 0: the cost is identically zero and the \
                 coupling carries no information"
                    .into(),
            ));
        }
        if self.unroll_depth == 0 {
            return Err(Error::Contract("unroll_depth must be at least 1".into()));
        }
        Ok(())
    }
}

fn clamped_ce(label: &[f64], probs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&y, &p) in label.iter().zip(probs) {
        acc += y * p.clamp(CLAMP, 1.0).ln();
    }
    -acc
}

fn check_batch(features: &Matrix, labels: &Matrix, predictions: &Matrix) -> Result<usize> {
    let m = features.rows();
    if labels.rows() != m || predictions.rows() != m {
        return Err(Error::Shape(format!(
            "batch size mismatch: {m} feature rows, {} label rows, {} prediction rows",
            labels.rows(),
            predictions.rows()
        )));
    }
    if labels.cols() != predictions.cols() {
        return Err(Error::Shape(format!(
            "{} label classes but {} prediction classes",
            labels.cols(),
            predictions.cols()
        )));
    }
    if m == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    if !predictions.all_finite() || predictions.as_slice().iter().any(|&p| p < 0.0) {
        return Err(Error::Contract("predictions must be non-negative and finite".into()));
    }
    Ok(m)
}

/// Cross-entropy block of the cost: `L[i][j] = CE(labels_i, predictions_j)`.
fn label_cost(labels: &Matrix, predictions: &Matrix) -> Matrix {
    let m = labels.rows();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = clamped_ce(labels.row(i), predictions.row(j));
        }
    }
    out
}

/// Joint ground cost `alpha * |x_i - x_j|^2 + beta * CE(y~_i, p_j)` over one
/// batch. All inputs must share the batch size; predictions are probability
/// rows (e.g. softmax outputs).
pub fn ground_cost(
    features: &Matrix,
    noisy_labels: &Matrix,
    predictions: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<GroundCost> {
    check_batch(features, noisy_labels, predictions)?;
    let mut cost = pairwise_squared_distances(features, features);
    cost.scale(alpha);
    if beta != 0.0 {
        let ce = label_cost(noisy_labels, predictions);
        cost.add_scaled(&ce, beta);
    }
    GroundCost::new(cost)
}

/// Batch loss, its parameter gradients, and the coupling that produced it.
#[derive(Debug)]
pub struct BatchLoss {
    pub value: f64,
    pub gradients: Gradients,
    pub coupling: Coupling,
}

/// Coupling between uniform marginals under the joint cost, by the solver
/// the gradient mode calls for.
pub(crate) fn solve_coupling(
    cost: &GroundCost,
    cfg: &CleotConfig,
) -> Result<(Coupling, Option<crate::ot::SinkhornTape>)> {
    let m = cost.shape().0;
    let a = DiscreteMeasure::uniform(m);
    let b = DiscreteMeasure::uniform(m);
    if cfg.lambda == 0.0 {
        let assignment = exact_assignment(cost)?;
        let mut plan = Matrix::zeros(m, m);
        for (i, &j) in assignment.assignment.iter().enumerate() {
            plan[(i, j)] = 1.0 / m as f64;
        }
        return Ok((Coupling::measure(plan, &a, &b), None));
    }
    match cfg.mode {
        GradientMode::Unrolled => {
            let mut sk = SinkhornConfig::new(cfg.lambda);
            sk.unroll_depth = cfg.unroll_depth;
            let (solution, tape) = sinkhorn_unrolled(cost, &a, &b, &sk)?;
            Ok((solution.coupling, Some(tape)))
        }
        GradientMode::DetachedCoupling => {
            let mut sk = SinkhornConfig::new(cfg.lambda);
            sk.max_iterations = 20_000;
            let solution = sinkhorn(cost, &a, &b, &sk)?;
            if !solution.converged {
                return Err(Error::Numeric(format!(
                    "coupling solve did not converge (marginal violation {:.3e})",
                    solution.coupling.marginal_error()
                )));
            }
            Ok((solution.coupling, None))
        }
    }
}

/// Transport-weighted cross-entropy over one batch, with gradients for every
/// network parameter.
///
/// Runs a training-mode forward pass (`dropout_rng` feeds any dropout
/// layers), builds the joint cost from the resulting predictions, solves for
/// the coupling, and returns `sum_ij gamma_ij * CE(y~_i, p_j)`. In unrolled
/// mode the backward pass adds the coupling's sensitivity to the predictions
/// on top of the explicit cross-entropy term; in detached mode the coupling
/// is a constant weight matrix.
pub fn batch_loss(
    features: &Matrix,
    noisy_labels: &Matrix,
    net: &mut DenseNet,
    cfg: &CleotConfig,
    dropout_rng: Option<&mut Rng>,
) -> Result<BatchLoss> {
    cfg.validate()?;
    let (predictions, tape) = net.forward_train(features, dropout_rng)?;
    let m = check_batch(features, noisy_labels, &predictions)?;

    let ce = label_cost(noisy_labels, &predictions);
    let mut cost = pairwise_squared_distances(features, features);
    cost.scale(cfg.alpha);
    cost.add_scaled(&ce, cfg.beta);
    let cost = GroundCost::new(cost)?;

    let (coupling, ot_tape) = solve_coupling(&cost, cfg)?;
    let gamma = coupling.matrix();
    let value = gamma.dot(&ce);

    // d(loss)/d(CE matrix): the explicit coupling weights, plus in unrolled
    // mode the coupling's own dependence on the cost (which sees the CE
    // block scaled by beta).
    let mut ce_grad = gamma.clone();
    if let Some(ot_tape) = &ot_tape {
        if cfg.beta != 0.0 {
            let through_coupling = sinkhorn_backward(ot_tape, &ce)?;
            ce_grad.add_scaled(&through_coupling, cfg.beta);
        }
    }

    // d(loss)/d(predictions): CE(i, j) only touches prediction row j.
    let mut pred_grad = Matrix::zeros(m, predictions.cols());
    for i in 0..m {
        for j in 0..m {
            let w = ce_grad[(i, j)];
            if w == 0.0 {
                continue;
            }
            for k in 0..predictions.cols() {
                let y = noisy_labels[(i, k)];
                if y != 0.0 {
                    pred_grad[(j, k)] -= w * y / predictions[(j, k)].clamp(CLAMP, 1.0);
                }
            }
        }
    }

    let (gradients, _) = net.backward(&tape, &pred_grad)?;
    Ok(BatchLoss { value, gradients, coupling })
}

/// The same objective without gradients, on an eval-mode forward pass; used
/// for validation losses.
pub fn batch_objective(
    features: &Matrix,
    noisy_labels: &Matrix,
    net: &DenseNet,
    cfg: &CleotConfig,
) -> Result<f64> {
    cfg.validate()?;
    let predictions = net.forward_eval(features)?;
    check_batch(features, noisy_labels, &predictions)?;
    let ce = label_cost(noisy_labels, &predictions);
    let cost = ground_cost(features, noisy_labels, &predictions, cfg.alpha, cfg.beta)?;
    let (coupling, _) = solve_coupling(&cost, cfg)?;
    Ok(coupling.matrix().dot(&ce))
}

/// Coupling-weighted average of the batch labels, rescaled onto the simplex:
/// `y^_j = m * sum_i gamma_ij * y~_i`.
///
/// Requires the coupling's column marginals to be uniform `1/m` (within
/// 1e-6), which is what makes the rescaled rows sum to 1.
pub fn propagate_labels(coupling: &Matrix, noisy_labels: &Matrix) -> Result<Matrix> {
    let m = coupling.rows();
    if coupling.cols() != m || noisy_labels.rows() != m {
        return Err(Error::Shape(format!(
            "coupling is {:?} with {} label rows",
            coupling.shape(),
            noisy_labels.rows()
        )));
    }
    let uniform = 1.0 / m as f64;
    for (j, sum) in coupling.col_sums().into_iter().enumerate() {
        if (sum - uniform).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "column {j} of the coupling sums to {sum}, expected the uniform marginal {uniform}"
            )));
        }
    }
    let classes = noisy_labels.cols();
    let mut out = Matrix::zeros(m, classes);
    for j in 0..m {
        for i in 0..m {
            let w = coupling[(i, j)] * m as f64;
            if w == 0.0 {
                continue;
            }
            for k in 0..classes {
                out[(j, k)] += w * noisy_labels[(i, k)];
            }
        }
    }
    Ok(out)
}

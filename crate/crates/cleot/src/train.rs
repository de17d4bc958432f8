//! Training loops: minibatch SGD over either a pointwise loss or the
//! transport objective, validation-loss early stopping with best-checkpoint
//! return, and the iterative full-batch propagate-then-fine-tune scheme.
//!
//! Training code receives a [`TrainingView`], which holds only the train and
//! validation rows; clean test labels live in the separate [`TestProbe`]
//! that is consulted purely for per-epoch reporting. That split makes "the
//! test set never influences training" a property of the API rather than a
//! convention.

use crate::data::{BatchSampler, LabeledDataset, SamplerMode, SplitTag};
use crate::error::{Error, Result};
use crate::loss::{Loss, LossKind};
use crate::matrix::Matrix;
use crate::nn::{DenseNet, SgdMomentum};
use crate::objective::{self, CleotConfig, GradientMode};
use crate::ot::Coupling;
use crate::rng::{stream, Rng, StreamKind};

/// What the trainer minimizes.
#[derive(Debug, Clone)]
pub enum Method {
    /// A pointwise loss from the zoo, averaged over the batch.
    Loss(LossKind),
    /// The coupling-weighted transport objective.
    Cleot(CleotConfig),
}

/// Train and validation rows only; the only data a training loop sees.
#[derive(Debug, Clone)]
pub struct TrainingView {
    pub train_features: Matrix,
    pub train_labels: Matrix,
    pub val_features: Matrix,
    pub val_labels: Matrix,
}

/// Clean test rows, used exclusively for accuracy reporting.
#[derive(Debug, Clone)]
pub struct TestProbe {
    pub features: Matrix,
    pub labels: Matrix,
}

impl LabeledDataset {
    /// Train/validation rows with the labels a trainer is allowed to see
    /// (noisy once noise has been applied). Requires a split with non-empty
    /// train and validation parts.
    pub fn training_view(&self) -> Result<TrainingView> {
        if self.split_tags().is_none() {
            return Err(Error::State("dataset has not been split".into()));
        }
        let train = self.indices_of(SplitTag::Train);
        let val = self.indices_of(SplitTag::Val);
        if train.is_empty() || val.is_empty() {
            return Err(Error::Contract(format!(
                "training needs non-empty train and validation splits, got {} and {} rows",
                train.len(),
                val.len()
            )));
        }
        let labels = self.training_labels();
        Ok(TrainingView {
            train_features: self.features().select_rows(&train),
            train_labels: labels.select_rows(&train),
            val_features: self.features().select_rows(&val),
            val_labels: labels.select_rows(&val),
        })
    }

    /// Clean-labeled test rows for reporting.
    pub fn test_probe(&self) -> Result<TestProbe> {
        if self.split_tags().is_none() {
            return Err(Error::State("dataset has not been split".into()));
        }
        let test = self.indices_of(SplitTag::Test);
        if test.is_empty() {
            return Err(Error::Contract("the test split is empty".into()));
        }
        Ok(TestProbe {
            features: self.features().select_rows(&test),
            labels: self.clean_labels().select_rows(&test),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub sampler: SamplerMode,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Epochs without a strict validation improvement tolerated before
    /// stopping; 0 stops at the first non-improving epoch.
    pub patience: usize,
}

impl TrainSettings {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Contract(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Contract(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Contract("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    /// Row count of a nominal batch, used to chunk the validation set.
    fn batch_rows(&self, classes: usize) -> usize {
        match self.sampler {
            SamplerMode::Plain { batch_size } => batch_size,
            SamplerMode::Stratified { per_class } => per_class * classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Clean test accuracy; NaN when trained without a probe.
    pub test_acc: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// The checkpoint with the best validation loss, not the last state.
    pub net: DenseNet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Fraction of rows whose predicted class matches the one-hot label.
pub fn accuracy(net: &DenseNet, features: &Matrix, labels: &Matrix) -> Result<f64> {
    let probs = net.forward_eval(features)?;
    if labels.shape() != probs.shape() {
        return Err(Error::Shape(format!(
            "labels are {:?} but predictions are {:?}",
            labels.shape(),
            probs.shape()
        )));
    }
    let hits = (0..probs.rows()).filter(|&i| probs.row_argmax(i) == labels.row_argmax(i)).count();
    Ok(hits as f64 / probs.rows() as f64)
}

fn batch_context(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numeric(msg) => {
            Error::Numeric(format!("epoch {epoch}, batch {batch}: {msg}"))
        }
        other => other,
    }
}

/// One gradient step on one batch; returns the batch loss value.
fn step_batch(
    net: &mut DenseNet,
    opt: &mut SgdMomentum,
    method: &Method,
    loss: Option<&Loss>,
    x: &Matrix,
    y: &Matrix,
    dropout_rng: &mut Rng,
) -> Result<f64> {
    match method {
        Method::Loss(_) => {
            let loss = loss.expect("prepared for zoo methods");
            let (probs, tape) = net.forward_train(x, Some(dropout_rng))?;
            let (value, grad) = loss.evaluate(y, &probs)?;
            let (grads, _) = net.backward(&tape, &grad)?;
            opt.step(net, &grads)?;
            Ok(value)
        }
        Method::Cleot(cfg) => {
            let out = objective::batch_loss(x, y, net, cfg, Some(dropout_rng))?;
            opt.step(net, &out.gradients)?;
            Ok(out.value)
        }
    }
}

/// Validation loss under the same functional as training, on an eval-mode
/// forward pass. Pointwise losses evaluate the whole split at once (their
/// value is a per-row mean); the transport objective is computed on
/// sequential chunks of nominal batch size and averaged with batch-size
/// weights, since its coupling is defined per batch.
fn validation_loss(
    net: &DenseNet,
    method: &Method,
    loss: Option<&Loss>,
    view: &TrainingView,
    chunk_rows: usize,
) -> Result<f64> {
    match method {
        Method::Loss(_) => {
            let probs = net.forward_eval(&view.val_features)?;
            let (value, _) = loss.expect("prepared").evaluate(&view.val_labels, &probs)?;
            Ok(value)
        }
        Method::Cleot(cfg) => {
            let rows = view.val_features.rows();
            let chunk = chunk_rows.clamp(1, rows);
            let mut weighted = 0.0;
            let mut start = 0;
            while start < rows {
                let end = (start + chunk).min(rows);
                let idx: Vec<usize> = (start..end).collect();
                let x = view.val_features.select_rows(&idx);
                let y = view.val_labels.select_rows(&idx);
                weighted += objective::batch_objective(&x, &y, net, cfg)? * idx.len() as f64;
                start = end;
            }
            Ok(weighted / rows as f64)
        }
    }
}

/// Minibatch training with early stopping.
///
/// Per epoch: one pass of the sampler with an optimizer step per batch, then
/// the validation loss and (if a probe is given) clean test accuracy. Stops
/// when the validation loss has not strictly improved for more than
/// `patience` epochs and returns the checkpoint with the best validation
/// loss. The probe affects only the reported accuracy, never the training
/// trajectory.
pub fn train(
    view: &TrainingView,
    probe: Option<&TestProbe>,
    mut net: DenseNet,
    method: &Method,
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainOutcome> {
    settings.validate()?;
    if let Method::Cleot(cfg) = method {
        cfg.validate()?;
    }
    let loss = match method {
        Method::Loss(kind) => Some(Loss::new(kind.clone())?),
        Method::Cleot(_) => None,
    };

    let train_rows = view.train_features.rows();
    let indices: Vec<usize> = (0..train_rows).collect();
    let mut sampler = BatchSampler::new(settings.sampler, &view.train_labels, &indices)?;
    let batches = sampler.batches_per_epoch();
    let chunk_rows = settings.batch_rows(view.train_labels.cols());

    let mut opt = SgdMomentum::new(settings.learning_rate, settings.momentum);
    let mut sampling_rng = stream(seed, StreamKind::Sampling);
    let mut dropout_rng = stream(seed, StreamKind::Dropout);

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_net = net.clone();
    let mut since_best = 0;

    for epoch in 1..=settings.max_epochs {
        let mut loss_sum = 0.0;
        let mut row_sum = 0usize;
        for batch in 0..batches {
            let idx = sampler.next_batch(&mut sampling_rng);
            let x = view.train_features.select_rows(&idx);
            let y = view.train_labels.select_rows(&idx);
            let value = step_batch(&mut net, &mut opt, method, loss.as_ref(), &x, &y, &mut dropout_rng)
                .map_err(|e| batch_context(e, epoch, batch))?;
            loss_sum += value * idx.len() as f64;
            row_sum += idx.len();
        }
        let train_loss = loss_sum / row_sum as f64;
        let val_loss = validation_loss(&net, method, loss.as_ref(), view, chunk_rows)?;
        let test_acc = match probe {
            Some(p) => accuracy(&net, &p.features, &p.labels)?,
            None => f64::NAN,
        };
        history.push(EpochRecord { epoch, train_loss, val_loss, test_acc });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_net = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > settings.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome { net: best_net, history, best_epoch, best_val_loss: best_val })
}

/// Fixed-epoch cross-entropy fine-tuning on the given (possibly
/// simplex-valued) labels, plain shuffled batches, no early stopping.
pub fn fit_cross_entropy(
    net: &mut DenseNet,
    features: &Matrix,
    labels: &Matrix,
    epochs: usize,
    batch_size: usize,
    opt: &mut SgdMomentum,
    sampling_rng: &mut Rng,
    dropout_rng: &mut Rng,
) -> Result<()> {
    let loss = Loss::new(LossKind::CrossEntropy)?;
    let indices: Vec<usize> = (0..features.rows()).collect();
    let mut sampler = BatchSampler::new(SamplerMode::Plain { batch_size }, labels, &indices)?;
    for _ in 0..epochs {
        for _ in 0..sampler.batches_per_epoch() {
            let idx = sampler.next_batch(sampling_rng);
            let x = features.select_rows(&idx);
            let y = labels.select_rows(&idx);
            let (probs, tape) = net.forward_train(&x, Some(dropout_rng))?;
            let (_, grad) = loss.evaluate(&y, &probs)?;
            let (grads, _) = net.backward(&tape, &grad)?;
            opt.step(net, &grads)?;
        }
    }
    Ok(())
}

/// One round of the iterative scheme, recorded for inspection.
#[derive(Debug)]
pub struct RoundRecord {
    pub round: usize,
    /// Clean-label accuracy over the whole dataset after fine-tuning.
    pub accuracy: f64,
    pub coupling: Coupling,
    /// Simplex-valued propagated labels used for this round's fine-tuning.
    pub propagated: Matrix,
    /// Snapshot of the network after this round's fine-tuning, so callers
    /// can render how the decision boundary evolves.
    pub net: DenseNet,
}

#[derive(Debug)]
pub struct IterativeOutcome {
    pub net: DenseNet,
    /// Clean-label accuracy of the starting network.
    pub initial_accuracy: f64,
    pub rounds: Vec<RoundRecord>,
}

/// Full-batch iterate of: solve the coupling between the noisy labels and
/// the current predictions, propagate the labels through it, fine-tune on
/// the propagated labels with cross-entropy.
///
/// Each round propagates the original noisy labels; what improves across
/// rounds is the coupling, as the fine-tuned predictions sharpen the label
/// block of the ground cost. Works on the whole dataset (the usual setting
/// has no test split) and reports clean-label accuracy after every round.
pub fn iterative_propagation(
    ds: &LabeledDataset,
    mut net: DenseNet,
    cfg: &CleotConfig,
    rounds: usize,
    epochs_per_round: usize,
    batch_size: usize,
    learning_rate: f64,
    momentum: f64,
    seed: u64,
) -> Result<IterativeOutcome> {
    cfg.validate()?;
    if ds.len() > 2000 {
        return Err(Error::Contract(format!(
            "{} samples is past the full-batch coupling cap of 2000; train with the \
             minibatch objective instead",
            ds.len()
        )));
    }
    let features = ds.features();
    let noisy = ds.training_labels();
    let initial_accuracy = accuracy(&net, features, ds.clean_labels())?;

    let mut opt = SgdMomentum::new(learning_rate, momentum);
    let mut sampling_rng = stream(seed, StreamKind::Sampling);
    let mut dropout_rng = stream(seed, StreamKind::Dropout);
    // Gradients never flow through the full-batch coupling; always solve it
    // to convergence.
    let mut solve_cfg = cfg.clone();
    solve_cfg.mode = GradientMode::DetachedCoupling;

    let mut records = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let predictions = net.forward_eval(features)?;
        let cost =
            objective::ground_cost(features, noisy, &predictions, cfg.alpha, cfg.beta)?;
        let (coupling, _) = objective::solve_coupling(&cost, &solve_cfg).map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("round {round}: {msg}")),
            other => other,
        })?;

        let propagated = objective::propagate_labels(coupling.matrix(), noisy)?;
        fit_cross_entropy(
            &mut net,
            features,
            &propagated,
            epochs_per_round,
            batch_size,
            &mut opt,
            &mut sampling_rng,
            &mut dropout_rng,
        )?;
        let acc = accuracy(&net, features, ds.clean_labels())?;
        records.push(RoundRecord { round, accuracy: acc, coupling, propagated, net: net.clone() });
    }

    Ok(IterativeOutcome { net, initial_accuracy, rounds: records })
}

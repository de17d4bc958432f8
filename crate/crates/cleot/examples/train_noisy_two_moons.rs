//! Minibatch training on two moons with 40% of the labels flipped:
//! plain cross-entropy against the coupling objective.
//!
//! Both methods share the dataset, the split, the noise realization, the
//! starting weights, and the early-stopping rule; only the loss differs.
//! Cross-entropy eventually fits the flipped labels, while the coupling
//! objective scores each prediction against a transport-weighted mix of its
//! neighbors' labels, so isolated flips stop steering the fit.
//!
//! ```text
//! cargo run --release --example train_noisy_two_moons
//! ```

use cleot::data::{two_moons, SamplerMode};
use cleot::loss::LossKind;
use cleot::nn::{DenseNet, LayerSpec, SgdMomentum};
use cleot::noise::TransitionMatrix;
use cleot::objective::{CleotConfig, GradientMode};
use cleot::rng::{stream, StreamKind};
use cleot::train::{accuracy, fit_cross_entropy, train, Method, TrainSettings};

fn main() {
    let seed = 0;
    let mut ds = two_moons(500, 0.1, &mut stream(seed, StreamKind::Dataset)).unwrap();
    ds.split((0.8, 0.1, 0.1), &mut stream(seed, StreamKind::Split)).unwrap();
    let transition = TransitionMatrix::symmetric(2, 0.4).unwrap();
    let flipped =
        ds.apply_label_noise(&transition, &mut stream(seed, StreamKind::Noise)).unwrap();
    println!(
        "flipped {} of {} train/val labels; the {} test rows stay clean\n",
        flipped.len(),
        450,
        50
    );

    let view = ds.training_view().unwrap();
    let probe = ds.test_probe().unwrap();
    let settings = TrainSettings {
        sampler: SamplerMode::Stratified { per_class: 100 },
        learning_rate: 0.1,
        momentum: 0.9,
        max_epochs: 300,
        patience: 25,
    };
    let fresh_net = || {
        DenseNet::new(
            &[
                LayerSpec::Dense { inputs: 2, outputs: 256, l2: 0.0 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 256, outputs: 256, l2: 0.0 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 256, outputs: 2, l2: 0.0 },
                LayerSpec::Softmax,
            ],
            &mut stream(seed, StreamKind::Init),
        )
        .unwrap()
    };

    let ce = train(
        &view,
        Some(&probe),
        fresh_net(),
        &Method::Loss(LossKind::CrossEntropy),
        &settings,
        seed,
    )
    .unwrap();
    let ce_acc = accuracy(&ce.net, &probe.features, &probe.labels).unwrap();
    println!(
        "cross-entropy: best val loss {:.4} at epoch {} of {}, clean test accuracy {:.4}",
        ce.best_val_loss,
        ce.best_epoch,
        ce.history.len(),
        ce_acc
    );

    // The coupling arm fine-tunes from a short cross-entropy warm-up, so the
    // predictions entering the ground cost already carry the coarse shape of
    // the moons.
    let mut warm = fresh_net();
    let mut opt = SgdMomentum::new(settings.learning_rate, settings.momentum);
    fit_cross_entropy(
        &mut warm,
        &view.train_features,
        &view.train_labels,
        50,
        200,
        &mut opt,
        &mut stream(seed, StreamKind::Sampling),
        &mut stream(seed, StreamKind::Dropout),
    )
    .unwrap();

    let mut cfg = CleotConfig::new(1.0, 0.5, 0.05).unwrap();
    cfg.mode = GradientMode::DetachedCoupling;
    let cleot = train(&view, Some(&probe), warm, &Method::Cleot(cfg), &settings, seed).unwrap();
    let cleot_acc = accuracy(&cleot.net, &probe.features, &probe.labels).unwrap();
    println!(
        "coupling loss: best val loss {:.4} at epoch {} of {}, clean test accuracy {:.4}",
        cleot.best_val_loss,
        cleot.best_epoch,
        cleot.history.len(),
        cleot_acc
    );

    println!("\nper-epoch clean test accuracy (every 10th epoch of the coupling run):");
    for record in cleot.history.iter().step_by(10) {
        println!(
            "  epoch {:>3}: train loss {:>7.4}, val loss {:>7.4}, test acc {:.4}",
            record.epoch, record.train_loss, record.val_loss, record.test_acc
        );
    }
}

use cleot::data::{two_moons, SamplerMode};
use cleot::loss::LossKind;
use cleot::nn::{DenseNet, LayerSpec, SgdMomentum};
use cleot::noise::TransitionMatrix;
use cleot::objective::CleotConfig;
use cleot::rng::{stream, StreamKind};
use cleot::train::{accuracy, fit_cross_entropy, train, Method, TrainSettings};
use std::time::Instant;

fn net(seed: u64, hidden: usize) -> DenseNet {
    DenseNet::new(
        &[
            LayerSpec::Dense { inputs: 2, outputs: hidden, l2: 0.0 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: hidden, outputs: hidden, l2: 0.0 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: hidden, outputs: 2, l2: 0.0 },
            LayerSpec::Softmax,
        ],
        &mut stream(seed, StreamKind::Init),
    )
    .unwrap()
}

fn run(
    method: &Method,
    p_e: f64,
    seed: u64,
    settings: &TrainSettings,
    hidden: usize,
    warmup: usize,
    noise_std: f64,
    val_frac: f64,
) -> f64 {
    let mut ds = two_moons(500, noise_std, &mut stream(seed, StreamKind::Dataset)).unwrap();
    ds.split((0.9 - val_frac, val_frac, 0.1), &mut stream(seed, StreamKind::Split)).unwrap();
    if p_e > 0.0 {
        let e = TransitionMatrix::symmetric(2, p_e).unwrap();
        ds.apply_label_noise(&e, &mut stream(seed, StreamKind::Noise)).unwrap();
    }
    let view = ds.training_view().unwrap();
    let probe = ds.test_probe().unwrap();
    let mut n = net(seed, hidden);
    if warmup > 0 {
        let mut opt = SgdMomentum::new(0.1, 0.9);
        fit_cross_entropy(
            &mut n,
            &view.train_features,
            &view.train_labels,
            warmup,
            128,
            &mut opt,
            &mut stream(seed, StreamKind::Sampling),
            &mut stream(seed, StreamKind::Dropout),
        )
        .unwrap();
    }
    let out = train(&view, Some(&probe), n, method, settings, seed).unwrap();
    if std::env::var("CLEOT_TRACE").is_ok() && matches!(method, Method::Cleot(_)) {
        for r in out.history.iter().step_by(10) {
            println!(
                "    epoch {:>3} train {:>8.4} val {:>8.4} test {:.4}",
                r.epoch, r.train_loss, r.val_loss, r.test_acc
            );
        }
        println!("    best epoch {} val {:.4}", out.best_epoch, out.best_val_loss);
    }
    accuracy(&out.net, &probe.features, &probe.labels).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let beta: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4.0);
    let lambda: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let per_class: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(32);
    let hidden: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(256);
    let max_epochs: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(300);
    let patience: usize = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(25);
    let seeds: u64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(5);
    let levels: Vec<f64> = args
        .get(8)
        .map(|s| s.split(',').map(|p| p.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![0.0, 0.2, 0.4]);
    let detached = args.get(9).map(|s| s == "d").unwrap_or(false);
    let warmup: usize = args.get(10).map(|s| s.parse().unwrap()).unwrap_or(0);
    let cleot_lr: f64 = args.get(11).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let cleot_momentum: f64 = args.get(12).map(|s| s.parse().unwrap()).unwrap_or(0.9);
    let noise_std: f64 = args.get(13).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let val_frac: f64 = args.get(14).map(|s| s.parse().unwrap()).unwrap_or(0.1);

    let settings = TrainSettings {
        sampler: SamplerMode::Stratified { per_class },
        learning_rate: 0.1,
        momentum: 0.9,
        max_epochs,
        patience,
    };
    let cleot_settings = TrainSettings {
        sampler: SamplerMode::Stratified { per_class },
        learning_rate: cleot_lr,
        momentum: cleot_momentum,
        max_epochs,
        patience,
    };
    let mut cfg = CleotConfig::new(1.0, beta, lambda).unwrap();
    if detached {
        cfg.mode = cleot::objective::GradientMode::DetachedCoupling;
    }
    println!(
        "beta={beta} lambda={lambda} per_class={per_class} hidden={hidden} max_epochs={max_epochs} patience={patience} mode={:?} warmup={warmup} cleot_lr={cleot_lr} cleot_m={cleot_momentum} std={noise_std} val={val_frac}",
        cfg.mode
    );

    let t0 = Instant::now();
    for &p_e in &levels {
        let mut ce = Vec::new();
        let mut cl = Vec::new();
        for seed in 0..seeds {
            let t1 = Instant::now();
            let a = run(
                &Method::Loss(LossKind::CrossEntropy),
                p_e,
                seed,
                &settings,
                hidden,
                0,
                noise_std,
                val_frac,
            );
            let t_ce = t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let b = run(
                &Method::Cleot(cfg.clone()),
                p_e,
                seed,
                &cleot_settings,
                hidden,
                warmup,
                noise_std,
                val_frac,
            );
            let t_cl = t2.elapsed().as_secs_f64();
            println!("  p={p_e} seed={seed}: ce {a:.4} ({t_ce:.0}s) cleot {b:.4} ({t_cl:.0}s)");
            ce.push(a);
            cl.push(b);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "p={p_e}: ce mean {:.4} cleot mean {:.4} diff {:+.2} points",
            mean(&ce),
            mean(&cl),
            (mean(&cl) - mean(&ce)) * 100.0
        );
    }
    println!("total {:.0}s", t0.elapsed().as_secs_f64());
}

use cleot::data::two_moons;
use cleot::nn::{DenseNet, LayerSpec, SgdMomentum};
use cleot::noise::TransitionMatrix;
use cleot::objective::CleotConfig;
use cleot::rng::{stream, StreamKind};
use cleot::train::{accuracy, fit_cross_entropy, iterative_propagation};
use std::time::Instant;

fn toy_net(seed: u64) -> DenseNet {
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
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let beta: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let lambda: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let init_epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(150);
    let round_epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(100);

    println!("beta={beta} lambda={lambda} init={init_epochs} per-round={round_epochs}");
    for seed in 0..5u64 {
        let t0 = Instant::now();
        let mut ds = two_moons(400, 0.1, &mut stream(seed, StreamKind::Dataset)).unwrap();
        let e = TransitionMatrix::symmetric(2, 0.2).unwrap();
        ds.apply_label_noise(&e, &mut stream(seed, StreamKind::Noise)).unwrap();

        let mut net = toy_net(seed);
        let mut opt = SgdMomentum::new(0.1, 0.9);
        fit_cross_entropy(
            &mut net,
            ds.features(),
            ds.training_labels(),
            init_epochs,
            128,
            &mut opt,
            &mut stream(seed, StreamKind::Sampling),
            &mut stream(seed, StreamKind::Dropout),
        )
        .unwrap();
        let initial = accuracy(&net, ds.features(), ds.clean_labels()).unwrap();

        let cfg = CleotConfig::new(1.0, beta, lambda).unwrap();
        let out =
            iterative_propagation(&ds, net, &cfg, 3, round_epochs, 128, 0.1, 0.9, seed).unwrap();
        // How clean are the propagated labels themselves (argmax vs truth)?
        let clean = ds.clean_labels();
        let noisy_acc = (0..ds.len())
            .filter(|&i| ds.training_labels().row_argmax(i) == clean.row_argmax(i))
            .count() as f64
            / ds.len() as f64;
        let prop_acc: Vec<String> = out
            .rounds
            .iter()
            .map(|r| {
                let hits = (0..ds.len())
                    .filter(|&i| r.propagated.row_argmax(i) == clean.row_argmax(i))
                    .count();
                format!("{:.4}", hits as f64 / ds.len() as f64)
            })
            .collect();
        let rounds: Vec<String> =
            out.rounds.iter().map(|r| format!("{:.4}", r.accuracy)).collect();
        println!(
            "seed {seed}: noisy {noisy_acc:.3} initial {initial:.4} -> net [{}] prop [{}] in {:.1}s",
            rounds.join(", "),
            prop_acc.join(", "),
            t0.elapsed().as_secs_f64()
        );
    }
}

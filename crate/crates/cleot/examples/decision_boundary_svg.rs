//! Render a decision boundary and a transport coupling as SVG.
//!
//! Trains a small net on two moons, shades its decision regions behind the
//! samples, then solves one full-batch coupling and draws the transport
//! edges. Both files are plain SVG with no external references; open them in
//! any browser.
//!
//! ```text
//! cargo run --release --example decision_boundary_svg
//! ```

use cleot::data::two_moons;
use cleot::nn::{DenseNet, LayerSpec, SgdMomentum};
use cleot::objective::{ground_cost, CleotConfig};
use cleot::ot::{sinkhorn, DiscreteMeasure, SinkhornConfig};
use cleot::plot::{plot_coupling_graph, plot_decision_boundary};
use cleot::rng::{stream, StreamKind};
use cleot::train::fit_cross_entropy;

fn main() {
    let seed = 4;
    let ds = two_moons(160, 0.12, &mut stream(seed, StreamKind::Dataset)).unwrap();
    let mut net = DenseNet::new(
        &[
            LayerSpec::Dense { inputs: 2, outputs: 64, l2: 0.0 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 64, outputs: 2, l2: 0.0 },
            LayerSpec::Softmax,
        ],
        &mut stream(seed, StreamKind::Init),
    )
    .unwrap();
    let mut opt = SgdMomentum::new(0.1, 0.9);
    fit_cross_entropy(
        &mut net,
        ds.features(),
        ds.clean_labels(),
        120,
        64,
        &mut opt,
        &mut stream(seed, StreamKind::Sampling),
        &mut stream(seed, StreamKind::Dropout),
    )
    .unwrap();

    let out = std::env::temp_dir().join("cleot-plots");
    std::fs::create_dir_all(&out).unwrap();

    let boundary = plot_decision_boundary(&net, ds.features(), ds.clean_labels(), 200).unwrap();
    let boundary_path = out.join("boundary.svg");
    std::fs::write(&boundary_path, &boundary).unwrap();
    println!(
        "decision boundary: {} shaded cells -> {}",
        boundary.matches("class=\"cell\"").count(),
        boundary_path.display()
    );

    // One joint-cost coupling over the whole dataset. The label block uses
    // the trained predictions, so edges connect samples the plan treats as
    // exchangeable: nearby, and agreeing in predicted class.
    let cfg = CleotConfig::new(1.0, 0.5, 0.05).unwrap();
    let predictions = net.forward_eval(ds.features()).unwrap();
    let cost =
        ground_cost(ds.features(), ds.clean_labels(), &predictions, cfg.alpha, cfg.beta).unwrap();
    let uniform = DiscreteMeasure::uniform(ds.len());
    let mut solver = SinkhornConfig::new(cfg.lambda);
    solver.max_iterations = 20_000;
    let solution = sinkhorn(&cost, &uniform, &uniform, &solver).unwrap();
    assert!(solution.converged);

    let threshold = 0.25 / (ds.len() * ds.len()) as f64;
    let graph = plot_coupling_graph(solution.coupling.matrix(), ds.features(), threshold).unwrap();
    let graph_path = out.join("coupling.svg");
    std::fs::write(&graph_path, &graph).unwrap();
    println!(
        "coupling graph: {} edges, {} self-loops -> {}",
        graph.matches("class=\"edge\"").count(),
        graph.matches("class=\"loop\"").count(),
        graph_path.display()
    );
}

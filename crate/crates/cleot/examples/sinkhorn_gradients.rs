//! Reverse-mode differentiation through unrolled Sinkhorn iterations.
//!
//! Treats `loss = <P(C), W>` as a function of the ground cost, pulls the
//! gradient back through the fixed-depth solve with [`sinkhorn_backward`],
//! and checks a few coordinates against central finite differences.
//!
//! ```text
//! cargo run --release --example sinkhorn_gradients
//! ```

use cleot::ot::{sinkhorn_backward, sinkhorn_unrolled, DiscreteMeasure, GroundCost, SinkhornConfig};
use cleot::rng::{stream, StreamKind};
use cleot::Matrix;
use rand::Rng as _;

fn random_matrix(rows: usize, cols: usize, rng: &mut cleot::rng::Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.random_range(0.0..1.0);
        }
    }
    m
}

/// `<P(C), W>` under a fixed-depth unrolled solve.
fn loss(cost: &Matrix, a: &DiscreteMeasure, b: &DiscreteMeasure, w: &Matrix, cfg: &SinkhornConfig) -> f64 {
    let cost = GroundCost::new(cost.clone()).unwrap();
    let (sol, _) = sinkhorn_unrolled(&cost, a, b, cfg).unwrap();
    sol.coupling.matrix().dot(w)
}

fn main() {
    let (n1, n2) = (5, 7);
    let mut rng = stream(3, StreamKind::Dataset);
    let cost = random_matrix(n1, n2, &mut rng);
    let w = random_matrix(n1, n2, &mut rng);
    let a = DiscreteMeasure::uniform(n1);
    let b = DiscreteMeasure::uniform(n2);
    let cfg = SinkhornConfig::new(0.1);

    let (_, tape) = sinkhorn_unrolled(&GroundCost::new(cost.clone()).unwrap(), &a, &b, &cfg).unwrap();
    let grad = sinkhorn_backward(&tape, &w).unwrap();

    println!("d<P,W>/dC against central differences (h = 1e-6):\n");
    println!("{:>8} {:>14} {:>14} {:>10}", "coord", "reverse-mode", "finite diff", "rel err");
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, j) in [(0, 0), (1, 4), (2, 2), (3, 6), (4, 1)] {
        let mut plus = cost.clone();
        plus[(i, j)] += h;
        let mut minus = cost.clone();
        minus[(i, j)] -= h;
        let fd = (loss(&plus, &a, &b, &w, &cfg) - loss(&minus, &a, &b, &w, &cfg)) / (2.0 * h);
        let rel = (grad[(i, j)] - fd).abs() / fd.abs().max(1e-12);
        worst = worst.max(rel);
        println!("{:>8} {:>14.8} {:>14.8} {:>10.2e}", format!("({i},{j})"), grad[(i, j)], fd, rel);
    }
    println!("\nworst relative error {worst:.2e}");
    assert!(worst < 1e-4, "reverse-mode gradient drifted from finite differences");
}

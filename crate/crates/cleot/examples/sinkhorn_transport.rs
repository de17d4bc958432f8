//! Entropic optimal transport on a small random instance.
//!
//! Solves the same 6x6 problem at several entropy weights and prints how the
//! plan moves from a near-permutation (tiny lambda, value matching the exact
//! assignment) to near-uniform mixing (large lambda, maximum entropy).
//!
//! ```text
//! cargo run --release --example sinkhorn_transport
//! ```

use cleot::ot::{exact_assignment, sinkhorn, DiscreteMeasure, GroundCost, SinkhornConfig};
use cleot::rng::{stream, StreamKind};
use cleot::Matrix;
use rand::Rng as _;

fn main() {
    let n = 6;
    let mut rng = stream(42, StreamKind::Dataset);
    let mut cost = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cost[(i, j)] = rng.random_range(0.0..1.0);
        }
    }
    let cost = GroundCost::new(cost).unwrap();
    let a = DiscreteMeasure::uniform(n);
    let b = DiscreteMeasure::uniform(n);

    let exact = exact_assignment(&cost).unwrap();
    // The assignment matches whole rows to whole columns, so on uniform
    // marginals its transport value is cost / n.
    println!("exact assignment value {:.6}\n", exact.cost / n as f64);

    println!("{:>8} {:>12} {:>10} {:>12} {:>6}", "lambda", "<P,C>", "entropy", "marginal", "iters");
    for lambda in [0.002, 0.05, 0.2, 1.0, 10.0] {
        let sol = sinkhorn(&cost, &a, &b, &SinkhornConfig::new(lambda)).unwrap();
        assert!(sol.converged);
        println!(
            "{lambda:>8} {:>12.6} {:>10.4} {:>12.2e} {:>6}",
            sol.transport_cost,
            sol.coupling.entropy(),
            sol.coupling.marginal_error(),
            sol.iterations
        );
    }

    let sharp = sinkhorn(&cost, &a, &b, &SinkhornConfig::new(0.002)).unwrap();
    println!("\nplan at lambda = 0.002, scaled by n (1.00 = a full match):");
    let plan = sharp.coupling.matrix();
    for i in 0..n {
        let row: Vec<String> =
            (0..n).map(|j| format!("{:>5.2}", plan[(i, j)] * n as f64)).collect();
        let mark = if plan.row_argmax(i) == exact.assignment[i] { "  <- matches exact" } else { "" };
        println!("  [{}]{}", row.join(" "), mark);
    }
    println!(
        "\ngap to the exact value: {:.2e}",
        sharp.transport_cost - exact.cost / n as f64
    );
}

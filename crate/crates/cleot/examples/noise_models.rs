//! Label-corruption models and their empirical behavior.
//!
//! Builds a symmetric and an asymmetric transition matrix, corrupts 10,000
//! labels per class through each, and compares the observed class-change
//! frequencies with the matrix entries.
//!
//! ```text
//! cargo run --release --example noise_models
//! ```

use cleot::noise::{apply_noise, FlipSpec, TransitionMatrix};
use cleot::rng::{stream, StreamKind};
use cleot::Matrix;

fn print_transition(name: &str, t: &TransitionMatrix) {
    println!("{name}:");
    let m = t.matrix();
    for i in 0..t.classes() {
        let row: Vec<String> = (0..t.classes()).map(|j| format!("{:>5.2}", m[(i, j)])).collect();
        println!("  [{}]", row.join(" "));
    }
}

/// `per_class` one-hot rows of every class, corrupted through `t`; returns
/// the empirical transition frequencies.
fn empirical(t: &TransitionMatrix, per_class: usize, seed: u64) -> Matrix {
    let classes = t.classes();
    let mut rows = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let mut row = vec![0.0; classes];
        row[class] = 1.0;
        rows.extend(std::iter::repeat_n(row, per_class));
    }
    let labels = Matrix::from_rows(&rows);
    let (noisy, changed) = apply_noise(&labels, t, &mut stream(seed, StreamKind::Noise)).unwrap();
    println!("  {} of {} labels changed class", changed.len(), labels.rows());

    let mut counts = Matrix::zeros(classes, classes);
    for i in 0..labels.rows() {
        counts[(labels.row_argmax(i), noisy.row_argmax(i))] += 1.0;
    }
    counts.scale(1.0 / per_class as f64);
    counts
}

fn report(name: &str, t: &TransitionMatrix, seed: u64) {
    print_transition(name, t);
    let freq = empirical(t, 10_000, seed);
    let mut worst: f64 = 0.0;
    for i in 0..t.classes() {
        for j in 0..t.classes() {
            worst = worst.max((freq[(i, j)] - t.matrix()[(i, j)]).abs());
        }
    }
    println!("  observed frequencies:");
    for i in 0..t.classes() {
        let row: Vec<String> =
            (0..t.classes()).map(|j| format!("{:>5.2}", freq[(i, j)])).collect();
        println!("  [{}]", row.join(" "));
    }
    // 3 sigma for a binomial proportion at p ~ 0.3, n = 10,000.
    println!("  worst |observed - specified| = {worst:.4}\n");
    assert!(worst < 0.015);
}

fn main() {
    report("symmetric, 30% flips over 3 classes", &TransitionMatrix::symmetric(3, 0.3).unwrap(), 1);

    // Directed confusions: 0 -> 1 and 2 -> 0, each with probability 0.25;
    // class 1 is never corrupted.
    let spec = FlipSpec::new(vec![(0, 1), (2, 0)], 0.25).unwrap();
    report("asymmetric, 0>1 and 2>0 at 25%", &TransitionMatrix::asymmetric(3, &spec).unwrap(), 2);

    println!("rerunning a corruption with the same seed reproduces it bit for bit;");
    let t = TransitionMatrix::symmetric(2, 0.4).unwrap();
    let labels = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    let (a, _) = apply_noise(&labels, &t, &mut stream(9, StreamKind::Noise)).unwrap();
    let (b, _) = apply_noise(&labels, &t, &mut stream(9, StreamKind::Noise)).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    println!("seed 9 twice -> identical corrupted labels");
}

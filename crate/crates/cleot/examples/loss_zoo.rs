//! Tour of the classification losses and the properties that make some of
//! them tolerate label noise.
//!
//! Prints each loss on a confident-right and a confident-wrong prediction
//! (the robust ones stay bounded where cross-entropy blows up), checks the
//! unhinged symmetry `sum_k loss(e_k, p) = c - 1`, and demonstrates that
//! backward correction cancels a known corruption in expectation.
//!
//! ```text
//! cargo run --release --example loss_zoo
//! ```

use cleot::loss::{Loss, LossKind};
use cleot::noise::TransitionMatrix;
use cleot::Matrix;

fn one_hot(class: usize, classes: usize) -> Matrix {
    let mut row = vec![0.0; classes];
    row[class] = 1.0;
    Matrix::from_rows(&[row])
}

fn main() {
    let transition = TransitionMatrix::symmetric(3, 0.3).unwrap();
    let losses: Vec<(&str, LossKind)> = vec![
        ("cross-entropy", LossKind::CrossEntropy),
        ("unhinged", LossKind::Unhinged),
        ("sigmoid", LossKind::Sigmoid),
        ("ramp", LossKind::Ramp),
        ("savage", LossKind::Savage),
        ("bootstrap-soft 0.8", LossKind::BootstrapSoft { beta: 0.8 }),
        ("forward", LossKind::Forward { transition: transition.clone() }),
        ("backward", LossKind::Backward { transition: transition.clone() }),
    ];

    // A prediction almost certain of class 0; score it against the right
    // label and against a wrong one.
    let confident = Matrix::from_rows(&[vec![0.999_999, 0.000_000_5, 0.000_000_5]]);
    let right = one_hot(0, 3);
    let wrong = one_hot(1, 3);

    println!("{:<20} {:>12} {:>12}", "loss", "right label", "wrong label");
    for (name, kind) in &losses {
        let loss = Loss::new(kind.clone()).unwrap();
        let (on_right, _) = loss.evaluate(&right, &confident).unwrap();
        let (on_wrong, _) = loss.evaluate(&wrong, &confident).unwrap();
        println!("{name:<20} {on_right:>12.4} {on_wrong:>12.4}");
    }
    println!("\nthe margin losses cap the pain of a confidently wrong prediction;");
    println!("cross-entropy charges it -log(p) without bound.\n");

    // Unhinged symmetry: summing the loss over every possible label gives a
    // constant, which is exactly what makes its risk noise-invariant.
    let p = Matrix::from_rows(&[vec![0.61, 0.07, 0.32]]);
    let unhinged = Loss::new(LossKind::Unhinged).unwrap();
    let total: f64 =
        (0..3).map(|k| unhinged.evaluate(&one_hot(k, 3), &p).unwrap().0).sum();
    println!("unhinged symmetry: sum over labels = {total} (c - 1 = 2)");
    assert_eq!(total, 2.0);

    // Backward correction: corrupt a clean label through E, score the noisy
    // labels with the corrected loss, and weight by the corruption
    // probabilities. The expectation equals the loss on the clean label.
    let backward = Loss::new(LossKind::Backward { transition: transition.clone() }).unwrap();
    let ce = Loss::new(LossKind::CrossEntropy).unwrap();
    let clean_class = 2;
    let mut expected = 0.0;
    for noisy_class in 0..3 {
        let prob = transition.matrix()[(clean_class, noisy_class)];
        let (value, _) = backward.evaluate(&one_hot(noisy_class, 3), &p).unwrap();
        expected += prob * value;
    }
    let (clean_value, _) = ce.evaluate(&one_hot(clean_class, 3), &p).unwrap();
    println!("\nbackward correction, symmetric 30% noise on 3 classes:");
    println!("  E[corrected loss on noisy label] = {expected:.12}");
    println!("  cross-entropy on the clean label = {clean_value:.12}");
    assert!((expected - clean_value).abs() < 1e-10);
    println!("  unbiased: the corruption cancels in expectation");
}

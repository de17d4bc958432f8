use super::*;
use crate::rng::{stream, StreamKind};
use std::collections::BTreeMap;

fn dataset_rng() -> Rng {
    stream(11, StreamKind::Dataset)
}

/// Minimal dataset with the given number of rows per class and a single
/// feature column holding the row index.
fn synthetic(counts: &[usize]) -> LabeledDataset {
    let n: usize = counts.iter().sum();
    let mut features = Matrix::zeros(n, 1);
    let mut labels = Matrix::zeros(n, counts.len());
    let mut row = 0;
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            features[(row, 0)] = row as f64;
            labels[(row, class)] = 1.0;
            row += 1;
        }
    }
    LabeledDataset::new(features, labels).unwrap()
}

fn class_of(ds: &LabeledDataset, i: usize) -> usize {
    one_hot_class(ds.clean_labels().row(i)).unwrap()
}

use crate::rng::Rng;

#[test]
fn noiseless_moons_lie_exactly_on_the_arcs() {
    let ds = two_moons(40, 0.0, &mut dataset_rng()).unwrap();
    for i in 0..ds.len() {
        let x = ds.features()[(i, 0)];
        let y = ds.features()[(i, 1)];
        if class_of(&ds, i) == 0 {
            // Upper moon: unit circle, non-negative second coordinate.
            assert!((x * x + y * y - 1.0).abs() < 1e-12, "row {i} off the arc");
            assert!(y >= -1e-12);
        } else {
            // Lower moon: unit circle shifted to (1, 0.5) and reflected.
            let u = x - 1.0;
            let v = y - 0.5;
            assert!((u * u + v * v - 1.0).abs() < 1e-12, "row {i} off the arc");
            assert!(y <= 0.5 + 1e-12);
        }
    }
    // End points of the parameter range are hit exactly.
    assert_eq!(ds.features()[(0, 0)], 1.0);
    assert_eq!(ds.features()[(0, 1)], 0.0);
    assert_eq!(ds.features()[(20, 0)], 0.0);
    assert_eq!(ds.features()[(20, 1)], 0.5);
}

#[test]
fn moon_centroids_match_the_arc_means() {
    // The mean of (cos t, sin t) over t uniform on [0, pi] is (0, 2/pi);
    // the lower moon mirrors it to (1, 0.5 - 2/pi). With n = 400 and
    // jitter 0.1 the sample centroids land well within 0.05 of those.
    let ds = two_moons(400, 0.1, &mut dataset_rng()).unwrap();
    let mut sums = [[0.0; 2]; 2];
    let mut counts = [0usize; 2];
    for i in 0..ds.len() {
        let class = class_of(&ds, i);
        sums[class][0] += ds.features()[(i, 0)];
        sums[class][1] += ds.features()[(i, 1)];
        counts[class] += 1;
    }
    assert_eq!(counts, [200, 200]);
    let two_over_pi = 2.0 / std::f64::consts::PI;
    let centroid = |c: usize| [sums[c][0] / 200.0, sums[c][1] / 200.0];
    let upper = centroid(0);
    let lower = centroid(1);
    assert!((upper[0] - 0.0).abs() < 0.05, "upper x {}", upper[0]);
    assert!((upper[1] - two_over_pi).abs() < 0.05, "upper y {}", upper[1]);
    assert!((lower[0] - 1.0).abs() < 0.05, "lower x {}", lower[0]);
    assert!((lower[1] - (0.5 - two_over_pi)).abs() < 0.05, "lower y {}", lower[1]);
}

#[test]
fn moons_reject_bad_arguments() {
    assert!(two_moons(401, 0.1, &mut dataset_rng()).is_err());
    assert!(two_moons(0, 0.1, &mut dataset_rng()).is_err());
    assert!(two_moons(400, -0.1, &mut dataset_rng()).is_err());
    assert!(two_moons(400, f64::NAN, &mut dataset_rng()).is_err());
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("moons.csv");
    let ds = two_moons(50, 0.1, &mut dataset_rng()).unwrap();
    ds.save_csv(&path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("f0,f1,label\n"));

    let back = LabeledDataset::load_csv(&path).unwrap();
    assert_eq!(back.len(), 50);
    assert_eq!(back.classes(), 2);
    assert_eq!(back.features().as_slice(), ds.features().as_slice());
    assert_eq!(back.clean_labels().as_slice(), ds.clean_labels().as_slice());
}

#[test]
fn training_csv_writes_the_corrupted_labels() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = two_moons(50, 0.1, &mut dataset_rng()).unwrap();
    let transition = TransitionMatrix::symmetric(2, 0.4).unwrap();
    let flipped = ds.apply_label_noise(&transition, &mut stream(3, StreamKind::Noise)).unwrap();
    assert!(!flipped.is_empty());

    let noisy_path = dir.path().join("noisy.csv");
    ds.save_training_csv(&noisy_path).unwrap();
    let noisy = LabeledDataset::load_csv(&noisy_path).unwrap();
    assert_eq!(noisy.clean_labels().as_slice(), ds.training_labels().as_slice());

    let clean_path = dir.path().join("clean.csv");
    ds.save_csv(&clean_path).unwrap();
    let clean = LabeledDataset::load_csv(&clean_path).unwrap();
    assert_eq!(clean.clean_labels().as_slice(), ds.clean_labels().as_slice());
    assert_ne!(noisy.clean_labels().as_slice(), clean.clean_labels().as_slice());
}

#[test]
fn csv_errors_carry_line_locations() {
    let dir = tempfile::tempdir().unwrap();
    let case = |name: &str, body: &str| -> String {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        LabeledDataset::load_csv(&path).unwrap_err().to_string()
    };

    let ragged = case("ragged.csv", "f0,f1,label\n0.5,0.5,0\n0.25,1\n");
    assert!(ragged.contains(":3"), "{ragged}");

    let bad_number = case("number.csv", "f0,f1,label\n0.5,abc,0\n");
    assert!(bad_number.contains(":2") && bad_number.contains("abc"), "{bad_number}");

    let bad_label = case("label.csv", "f0,f1,label\n0.5,0.5,0\n0.5,0.5,-1\n");
    assert!(bad_label.contains(":3"), "{bad_label}");

    let bad_header = case("header.csv", "a,b,label\n0.5,0.5,0\n");
    assert!(bad_header.contains(":1"), "{bad_header}");

    let empty = case("empty.csv", "f0,f1,label\n");
    assert!(empty.contains("no data rows"), "{empty}");
}

#[test]
fn split_uses_floor_counts_with_remainder_to_train() {
    let mut ds = synthetic(&[100, 100]);
    ds.split((0.8, 0.1, 0.1), &mut stream(3, StreamKind::Split)).unwrap();
    for class in 0..2 {
        let count = |tag: SplitTag| {
            ds.indices_of(tag).iter().filter(|&&i| class_of(&ds, i) == class).count()
        };
        assert_eq!(count(SplitTag::Train), 80);
        assert_eq!(count(SplitTag::Val), 10);
        assert_eq!(count(SplitTag::Test), 10);
    }

    // 103 per class: floor(10.3) = 10 to val and test, remainder 83 to train.
    let mut odd = synthetic(&[103, 103]);
    odd.split((0.8, 0.1, 0.1), &mut stream(3, StreamKind::Split)).unwrap();
    assert_eq!(odd.indices_of(SplitTag::Train).len(), 166);
    assert_eq!(odd.indices_of(SplitTag::Val).len(), 20);
    assert_eq!(odd.indices_of(SplitTag::Test).len(), 20);
}

#[test]
fn split_tags_partition_the_rows() {
    let mut ds = synthetic(&[40, 60]);
    ds.split((0.6, 0.2, 0.2), &mut stream(9, StreamKind::Split)).unwrap();
    let train = ds.indices_of(SplitTag::Train);
    let val = ds.indices_of(SplitTag::Val);
    let test = ds.indices_of(SplitTag::Test);
    let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
}

#[test]
fn split_is_deterministic_per_seed() {
    let mut a = synthetic(&[50, 50]);
    let mut b = synthetic(&[50, 50]);
    a.split((0.8, 0.1, 0.1), &mut stream(5, StreamKind::Split)).unwrap();
    b.split((0.8, 0.1, 0.1), &mut stream(5, StreamKind::Split)).unwrap();
    assert_eq!(a.split_tags().unwrap(), b.split_tags().unwrap());

    let mut c = synthetic(&[50, 50]);
    c.split((0.8, 0.1, 0.1), &mut stream(6, StreamKind::Split)).unwrap();
    assert_ne!(a.split_tags().unwrap(), c.split_tags().unwrap());
}

#[test]
fn split_rejects_bad_fractions_and_tiny_classes() {
    let mut ds = synthetic(&[50, 50]);
    assert!(ds.split((0.5, 0.2, 0.2), &mut stream(0, StreamKind::Split)).is_err());
    assert!(ds.split((1.2, -0.1, -0.1), &mut stream(0, StreamKind::Split)).is_err());

    let mut everything_train = synthetic(&[50, 50]);
    everything_train.split((1.0, 0.0, 0.0), &mut stream(0, StreamKind::Split)).unwrap();
    assert_eq!(everything_train.indices_of(SplitTag::Train).len(), 100);

    let mut tiny = synthetic(&[2, 50]);
    let err = tiny.split((0.8, 0.1, 0.1), &mut stream(0, StreamKind::Split)).unwrap_err();
    assert!(err.to_string().contains("class 0"), "{err}");
}

#[test]
fn label_noise_never_touches_test_rows() {
    let mut ds = two_moons(400, 0.1, &mut dataset_rng()).unwrap();
    ds.split((0.6, 0.2, 0.2), &mut stream(4, StreamKind::Split)).unwrap();
    assert!(ds.noisy_labels().is_none());
    assert_eq!(ds.training_labels().as_slice(), ds.clean_labels().as_slice());

    let transition = TransitionMatrix::symmetric(2, 0.5).unwrap();
    let flipped = ds.apply_label_noise(&transition, &mut stream(4, StreamKind::Noise)).unwrap();

    let noisy = ds.noisy_labels().unwrap();
    for &i in &ds.indices_of(SplitTag::Test) {
        assert_eq!(noisy.row(i), ds.clean_labels().row(i), "test row {i} corrupted");
        assert!(!flipped.contains(&i));
    }
    // At a 50% flip rate roughly half of the 320 train+val rows change.
    assert!(flipped.len() > 100, "only {} flips", flipped.len());
    for &i in &flipped {
        assert_ne!(noisy.row(i), ds.clean_labels().row(i));
    }
    assert_eq!(ds.training_labels().as_slice(), noisy.as_slice());
}

#[test]
fn label_noise_without_split_covers_all_rows() {
    let mut ds = two_moons(200, 0.1, &mut dataset_rng()).unwrap();
    let transition = TransitionMatrix::symmetric(2, 0.5).unwrap();
    let flipped = ds.apply_label_noise(&transition, &mut stream(8, StreamKind::Noise)).unwrap();
    // Both halves of the index range see flips.
    assert!(flipped.iter().any(|&i| i < 100));
    assert!(flipped.iter().any(|&i| i >= 100));
}

#[test]
fn split_tag_csv_lists_one_tag_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.csv");
    let mut ds = synthetic(&[5, 5]);
    assert!(ds.save_split_csv(&path).is_err());
    ds.split((0.6, 0.2, 0.2), &mut stream(2, StreamKind::Split)).unwrap();
    ds.save_split_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], "split");
    for (i, line) in lines[1..].iter().enumerate() {
        assert_eq!(*line, ds.split_tags().unwrap()[i].as_str());
    }
}

#[test]
fn plain_sampler_walks_a_shuffle_and_keeps_the_short_batch() {
    let ds = synthetic(&[200, 200]);
    let indices: Vec<usize> = (0..400).collect();
    let mut sampler =
        BatchSampler::new(SamplerMode::Plain { batch_size: 128 }, ds.clean_labels(), &indices)
            .unwrap();
    assert_eq!(sampler.batches_per_epoch(), 4);

    let mut rng = stream(1, StreamKind::Sampling);
    let mut epoch: Vec<Vec<usize>> = (0..4).map(|_| sampler.next_batch(&mut rng)).collect();
    assert_eq!(epoch.iter().map(Vec::len).collect::<Vec<_>>(), vec![128, 128, 128, 16]);

    // One epoch visits every training index exactly once.
    let mut union: Vec<usize> = epoch.drain(..).flatten().collect();
    union.sort_unstable();
    assert_eq!(union, indices);

    // The next epoch starts over with a new shuffle of the same indices.
    let next = sampler.next_batch(&mut rng);
    assert_eq!(next.len(), 128);
}

#[test]
fn plain_sampler_is_reproducible() {
    let ds = synthetic(&[30, 30]);
    let indices: Vec<usize> = (0..60).collect();
    let run = || {
        let mut sampler =
            BatchSampler::new(SamplerMode::Plain { batch_size: 25 }, ds.clean_labels(), &indices)
                .unwrap();
        let mut rng = stream(7, StreamKind::Sampling);
        (0..7).map(|_| sampler.next_batch(&mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn stratified_batches_have_exact_per_class_counts() {
    let ds = synthetic(&[180, 220]);
    let indices: Vec<usize> = (0..400).collect();
    let mut sampler = BatchSampler::new(
        SamplerMode::Stratified { per_class: 50 },
        ds.clean_labels(),
        &indices,
    )
    .unwrap();
    // The largest class (220 rows) runs out after ceil(220/50) = 5 batches.
    assert_eq!(sampler.batches_per_epoch(), 5);

    let mut rng = stream(3, StreamKind::Sampling);
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..5 {
        let batch = sampler.next_batch(&mut rng);
        assert_eq!(batch.len(), 100);
        let class0 = batch.iter().filter(|&&i| class_of(&ds, i) == 0).count();
        assert_eq!(class0, 50, "every batch holds exactly 50 rows per class");
        for &i in &batch {
            *seen.entry(i).or_insert(0) += 1;
        }
    }
    // Without-replacement phase covers every index of both classes at least
    // once per epoch; the with-replacement refill only adds repeats.
    for i in 0..400 {
        assert!(seen.contains_key(&i), "index {i} never sampled");
    }
    let class1_draws: usize = seen.iter().filter(|(&i, _)| class_of(&ds, i) == 1).map(|(_, &c)| c).sum();
    assert_eq!(class1_draws, 250);
}

#[test]
fn stratified_sampler_is_reproducible_and_validates() {
    let ds = synthetic(&[20, 30]);
    let indices: Vec<usize> = (0..50).collect();
    let run = || {
        let mut sampler = BatchSampler::new(
            SamplerMode::Stratified { per_class: 8 },
            ds.clean_labels(),
            &indices,
        )
        .unwrap();
        let mut rng = stream(2, StreamKind::Sampling);
        (0..6).map(|_| sampler.next_batch(&mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());

    // Every class must appear in the index set.
    let class0_only: Vec<usize> = (0..20).collect();
    let err = BatchSampler::new(
        SamplerMode::Stratified { per_class: 8 },
        ds.clean_labels(),
        &class0_only,
    )
    .unwrap_err();
    assert!(err.to_string().contains("class 1"), "{err}");

    assert!(BatchSampler::new(
        SamplerMode::Stratified { per_class: 0 },
        ds.clean_labels(),
        &indices
    )
    .is_err());
    assert!(BatchSampler::new(
        SamplerMode::Plain { batch_size: 0 },
        ds.clean_labels(),
        &indices
    )
    .is_err());
    assert!(
        BatchSampler::new(SamplerMode::Plain { batch_size: 4 }, ds.clean_labels(), &[]).is_err()
    );
}

use super::*;
use crate::config::{MethodKind, NetSpec, NoiseSpec};
use crate::data::SamplerMode;
use std::path::PathBuf;

fn tiny_config(out: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::TwoMoons { n: 40, noise_std: 0.1 },
        split: (0.6, 0.2, 0.2),
        noise: NoiseSpec::Symmetric { levels: vec![0.0, 0.5] },
        net: NetSpec { hidden: vec![8], dropout: 0.0, batch_norm: false, l2: 0.0 },
        learning_rate: 0.1,
        momentum: 0.9,
        sampler: SamplerMode::Plain { batch_size: 16 },
        max_epochs: 3,
        patience: 5,
        methods: vec![
            MethodSpec { name: "cross-entropy".into(), kind: MethodKind::CrossEntropy },
            MethodSpec { name: "unhinged".into(), kind: MethodKind::Unhinged },
        ],
        seeds: vec![0, 1],
        output: out,
        workers: 1,
    }
}

#[test]
fn single_triple_grid_emits_one_raw_and_one_aggregate_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().join("out"));
    cfg.noise = NoiseSpec::None;
    cfg.methods.truncate(1);
    cfg.seeds = vec![7];

    let outcome = run_grid(&cfg).unwrap();
    assert_eq!(outcome.results.len(), 1);
    assert_eq!(outcome.aggregates.len(), 1);
    assert_eq!(outcome.skipped, 0);
    assert!(outcome.failures.is_empty());

    let row = &outcome.results[0];
    assert_eq!((row.method.as_str(), row.noise, row.seed), ("cross-entropy", 0.0, 7));
    assert!((0.0..=1.0).contains(&row.test_acc));
    assert!(row.epochs >= 1 && row.epochs <= 3);

    let agg = &outcome.aggregates[0];
    assert_eq!(agg.runs, 1);
    assert_eq!(agg.mean_acc, row.test_acc);
    assert_eq!(agg.std_acc, 0.0);

    let raw = read_results(&cfg.output.join("results.csv")).unwrap();
    assert_eq!(raw, outcome.results);
    assert!(cfg.output.join("aggregates.csv").is_file());
}

#[test]
fn aggregate_means_and_stds_follow_the_textbook_formulas() {
    let row = |method: &str, noise: f64, seed: u64, acc: f64| RunResult {
        method: method.into(),
        noise,
        seed,
        test_acc: acc,
        epochs: 1,
        wall_ms: 0,
    };
    let rows = vec![
        row("a", 0.2, 0, 0.9),
        row("a", 0.2, 1, 0.8),
        row("a", 0.2, 2, 0.7),
        row("b", 0.2, 0, 0.5),
        row("a", 0.4, 0, 1.0),
    ];
    let aggs = aggregate(&rows);
    assert_eq!(aggs.len(), 3);
    assert!((aggs[0].mean_acc - 0.8).abs() < 1e-15);
    assert!((aggs[0].std_acc - 0.1).abs() < 1e-12);
    assert_eq!(aggs[0].runs, 3);
    assert_eq!(aggs[1].mean_acc, 0.5);
    assert_eq!(aggs[1].std_acc, 0.0);
    assert_eq!((aggs[2].method.as_str(), aggs[2].noise), ("a", 0.4));
}

#[test]
fn second_invocation_skips_every_completed_triple() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path().join("out"));

    let first = run_grid(&cfg).unwrap();
    assert_eq!(first.results.len(), 8);
    assert_eq!(first.skipped, 0);
    let bytes = std::fs::read(cfg.output.join("results.csv")).unwrap();

    let second = run_grid(&cfg).unwrap();
    assert_eq!(second.skipped, 8);
    assert_eq!(second.results, first.results);
    assert_eq!(std::fs::read(cfg.output.join("results.csv")).unwrap(), bytes);
}

#[test]
fn a_widened_grid_keeps_existing_rows_and_fills_in_the_new_ones() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().join("out"));
    cfg.seeds = vec![0];
    let first = run_grid(&cfg).unwrap();
    assert_eq!(first.results.len(), 4);

    cfg.seeds = vec![0, 1];
    let second = run_grid(&cfg).unwrap();
    assert_eq!(second.skipped, 4);
    assert_eq!(second.results.len(), 8);
    assert_eq!(&second.results[..4], &first.results[..]);
    for row in &second.results[4..] {
        assert_eq!(row.seed, 1);
    }
}

#[test]
fn identical_config_and_seed_reproduce_the_row_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_a = tiny_config(dir.path().join("a"));
    let cfg_b = tiny_config(dir.path().join("b"));
    let a = run_grid(&cfg_a).unwrap().results;
    let b = run_grid(&cfg_b).unwrap().results;
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.method, y.method);
        assert_eq!(x.noise.to_bits(), y.noise.to_bits());
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.test_acc.to_bits(), y.test_acc.to_bits(), "{} {} {}", x.method, x.noise, x.seed);
        assert_eq!(x.epochs, y.epochs);
    }
}

#[test]
fn a_failing_method_is_logged_while_the_rest_of_the_grid_finishes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().join("out"));
    // Symmetric flips at 0.5 make the two-class transition matrix singular,
    // so the backward correction cannot be built and that run must fail.
    cfg.noise = NoiseSpec::Symmetric { levels: vec![0.5] };
    cfg.methods = vec![
        MethodSpec { name: "backward".into(), kind: MethodKind::Backward },
        MethodSpec { name: "cross-entropy".into(), kind: MethodKind::CrossEntropy },
    ];
    cfg.seeds = vec![0];

    let outcome = run_grid(&cfg).unwrap();
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.failures[0].method, "backward");
    assert_eq!(outcome.results.len(), 1);
    assert_eq!(outcome.results[0].method, "cross-entropy");
    let log = std::fs::read_to_string(cfg.output.join("failures.log")).unwrap();
    assert!(log.contains("backward,0.5,0:"), "log was {log:?}");

    // The failed triple is retried (and fails again) on the next invocation.
    let again = run_grid(&cfg).unwrap();
    assert_eq!(again.skipped, 1);
    assert_eq!(again.failures.len(), 1);
}

#[test]
fn parallel_workers_produce_the_same_rows_as_one() {
    let dir = tempfile::tempdir().unwrap();
    let sequential = tiny_config(dir.path().join("seq"));
    let mut parallel = tiny_config(dir.path().join("par"));
    parallel.workers = 3;

    let mut a = run_grid(&sequential).unwrap().results;
    let mut b = run_grid(&parallel).unwrap().results;
    let key = |r: &RunResult| (r.method.clone(), r.noise.to_bits(), r.seed);
    a.sort_by_key(key);
    b.sort_by_key(key);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.test_acc.to_bits(), y.test_acc.to_bits());
        assert_eq!(x.epochs, y.epochs);
    }
}

#[test]
fn malformed_results_files_are_rejected_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");

    std::fs::write(&path, "method,oops\n").unwrap();
    let err = read_results(&path).unwrap_err().to_string();
    assert!(err.contains(":1"), "{err}");

    std::fs::write(&path, format!("{RESULTS_HEADER}\nce,0.2,0\n")).unwrap();
    let err = read_results(&path).unwrap_err().to_string();
    assert!(err.contains(":2") && err.contains("6 fields"), "{err}");

    std::fs::write(&path, format!("{RESULTS_HEADER}\nce,0.2,0,high,3,12\n")).unwrap();
    let err = read_results(&path).unwrap_err().to_string();
    assert!(err.contains("bad number"), "{err}");

    assert_eq!(read_results(&dir.path().join("absent.csv")).unwrap(), Vec::new());
}

#[test]
fn csv_datasets_feed_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("moons.csv");
    crate::data::two_moons(40, 0.1, &mut stream(0, StreamKind::Dataset))
        .unwrap()
        .save_csv(&data)
        .unwrap();

    let mut cfg = tiny_config(dir.path().join("out"));
    cfg.dataset = DatasetSpec::Csv { path: data };
    cfg.noise = NoiseSpec::None;
    cfg.methods.truncate(1);
    let outcome = run_grid(&cfg).unwrap();
    assert_eq!(outcome.results.len(), 2);
    assert!(outcome.failures.is_empty());
}

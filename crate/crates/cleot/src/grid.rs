//! Config-driven experiment grids.
//!
//! [`run_grid`] trains every `(method, noise level, seed)` triple of an
//! [`ExperimentConfig`] and reports clean test accuracy per run plus
//! mean ± std aggregates per `(method, level)` cell. Raw rows land in
//! `results.csv` under the configured output directory, rewritten through a
//! temp-file rename after every finished run, so an interrupted grid can be
//! rerun and will skip the triples that already have rows. Failed runs are
//! appended to `failures.log` and retried on the next invocation; the rest
//! of the grid keeps going.
//!
//! With `workers > 1` the pending triples are spread over that many threads.
//! Each run derives all of its randomness from its own seed, so results are
//! identical whichever worker picks a triple up; only the order of rows in
//! `results.csv` depends on scheduling. A single worker writes rows in the
//! canonical level-outer, method-inner order.

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use crate::config::{DatasetSpec, ExperimentConfig, MethodSpec};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::DenseNet;
use crate::rng::{stream, StreamKind};
use crate::train::{accuracy, train, TrainSettings};

/// Column order of `results.csv`.
pub const RESULTS_HEADER: &str = "method,noise,seed,test_acc,epochs,wall_ms";

/// Column order of `aggregates.csv`.
pub const AGGREGATES_HEADER: &str = "method,noise,mean_acc,std_acc,runs";

/// One finished training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub noise: f64,
    pub seed: u64,
    /// Accuracy on the clean held-out test rows.
    pub test_acc: f64,
    /// Epochs actually run (early stopping may cut `max_epochs` short).
    pub epochs: usize,
    pub wall_ms: u64,
}

impl RunResult {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method, self.noise, self.seed, self.test_acc, self.epochs, self.wall_ms
        )
    }

    fn key(&self) -> (String, u64, u64) {
        (self.method.clone(), self.noise.to_bits(), self.seed)
    }
}

/// A run that errored; the grid records it and moves on.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub method: String,
    pub noise: f64,
    pub seed: u64,
    pub message: String,
}

/// Mean ± std of clean test accuracy over the seeds of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub noise: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub runs: usize,
}

/// Everything [`run_grid`] did: all raw rows (old and new), their
/// aggregates, this invocation's failures, and how many triples were
/// skipped because a previous invocation had already finished them.
#[derive(Debug)]
pub struct GridOutcome {
    pub results: Vec<RunResult>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<RunFailure>,
    pub skipped: usize,
}

/// Group rows by `(method, noise)` in first-appearance order and compute
/// the mean and sample standard deviation of test accuracy.
pub fn aggregate(results: &[RunResult]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for r in results {
        let at = rows
            .iter()
            .position(|a| a.method == r.method && a.noise == r.noise)
            .unwrap_or_else(|| {
                rows.push(AggregateRow {
                    method: r.method.clone(),
                    noise: r.noise,
                    mean_acc: 0.0,
                    std_acc: 0.0,
                    runs: 0,
                });
                groups.push(Vec::new());
                rows.len() - 1
            });
        groups[at].push(r.test_acc);
    }
    for (row, accs) in rows.iter_mut().zip(&groups) {
        let n = accs.len();
        let mean = accs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        row.mean_acc = mean;
        row.std_acc = var.sqrt();
        row.runs = n;
    }
    rows
}

/// Parse `results.csv`; a missing file is an empty result set.
pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path.display().to_string(), e)),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        _ => {
            return Err(Error::parse(
                format!("{}:1", path.display()),
                format!("expected header `{RESULTS_HEADER}`"),
            ))
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", path.display(), idx + 1);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::parse(loc(), format!("expected 6 fields, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::parse(loc(), format!("bad number `{}`", fields[i])))
        };
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|_| Error::parse(loc(), format!("bad integer `{}`", fields[i])))
        };
        out.push(RunResult {
            method: fields[0].to_string(),
            noise: num(1)?,
            seed: int(2)?,
            test_acc: num(3)?,
            epochs: int(4)? as usize,
            wall_ms: int(5)?,
        });
    }
    Ok(out)
}

/// Write a full CSV through a temp file and rename, so readers (and an
/// interrupted grid) never see a half-written file.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_results(path: &Path, rows: &[RunResult]) -> Result<()> {
    let mut text = String::from(RESULTS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_atomic(path, &text)
}

fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut text = String::from(AGGREGATES_HEADER);
    text.push('\n');
    for a in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            a.method, a.noise, a.mean_acc, a.std_acc, a.runs
        ));
    }
    write_atomic(path, &text)
}

fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<LabeledDataset> {
    match spec {
        DatasetSpec::TwoMoons { n, noise_std } => {
            crate::data::two_moons(*n, *noise_std, &mut stream(seed, StreamKind::Dataset))
        }
        DatasetSpec::Csv { path } => LabeledDataset::load_csv(path),
    }
}

/// Train and evaluate one `(method, level, seed)` triple of the grid.
pub fn run_single(
    cfg: &ExperimentConfig,
    spec: &MethodSpec,
    level: f64,
    seed: u64,
) -> Result<RunResult> {
    let start = Instant::now();
    let mut ds = load_dataset(&cfg.dataset, seed)?;
    ds.split(cfg.split, &mut stream(seed, StreamKind::Split))?;
    if let Some(transition) = cfg.noise.transition(ds.classes(), level)? {
        ds.apply_label_noise(&transition, &mut stream(seed, StreamKind::Noise))?;
    }
    let view = ds.training_view()?;
    let probe = ds.test_probe()?;
    let net = DenseNet::new(
        &cfg.net.layer_specs(ds.dims(), ds.classes()),
        &mut stream(seed, StreamKind::Init),
    )?;
    let method = spec.resolve(ds.classes(), &cfg.noise, level)?;
    let settings = TrainSettings {
        sampler: cfg.sampler,
        learning_rate: cfg.learning_rate,
        momentum: cfg.momentum,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
    };
    let out = train(&view, None, net, &method, &settings, seed)?;
    let test_acc = accuracy(&out.net, &probe.features, &probe.labels)?;
    Ok(RunResult {
        method: spec.name.clone(),
        noise: level,
        seed,
        test_acc,
        epochs: out.history.len(),
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Run every triple the config describes, skipping those already present in
/// `results.csv`, and rewrite `aggregates.csv` from the union.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridOutcome> {
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(cfg.output.display().to_string(), e))?;
    let results_path = cfg.output.join("results.csv");
    let existing = read_results(&results_path)?;
    let done: HashSet<(String, u64, u64)> = existing.iter().map(RunResult::key).collect();

    let mut pending: VecDeque<(usize, f64, u64)> = VecDeque::new();
    let mut skipped = 0usize;
    for level in cfg.noise.levels() {
        for (m, spec) in cfg.methods.iter().enumerate() {
            for &seed in &cfg.seeds {
                if done.contains(&(spec.name.clone(), level.to_bits(), seed)) {
                    skipped += 1;
                } else {
                    pending.push_back((m, level, seed));
                }
            }
        }
    }

    let sink = Mutex::new(existing);
    let failures = Mutex::new(Vec::new());
    let queue = Mutex::new(pending);
    let record = |triple: (usize, f64, u64)| {
        let (m, level, seed) = triple;
        let spec = &cfg.methods[m];
        match run_single(cfg, spec, level, seed) {
            Ok(row) => {
                let mut rows = sink.lock().unwrap();
                rows.push(row);
                write_results(&results_path, &rows)
            }
            Err(e) => {
                failures.lock().unwrap().push(RunFailure {
                    method: spec.name.clone(),
                    noise: level,
                    seed,
                    message: e.to_string(),
                });
                Ok(())
            }
        }
    };

    if cfg.workers <= 1 {
        while let Some(triple) = { queue.lock().unwrap().pop_front() } {
            record(triple)?;
        }
    } else {
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for _ in 0..cfg.workers {
                handles.push(scope.spawn(|| -> Result<()> {
                    loop {
                        let triple = queue.lock().unwrap().pop_front();
                        match triple {
                            Some(t) => record(t)?,
                            None => return Ok(()),
                        }
                    }
                }));
            }
            for h in handles {
                h.join().expect("grid worker panicked")?;
            }
            Ok(())
        })?;
    }

    let results = sink.into_inner().unwrap();
    let failures = failures.into_inner().unwrap();
    let aggregates = aggregate(&results);
    write_aggregates(&cfg.output.join("aggregates.csv"), &aggregates)?;
    if !failures.is_empty() {
        let log = cfg.output.join("failures.log");
        let mut text = String::new();
        for f in &failures {
            text.push_str(&format!("{},{},{}: {}\n", f.method, f.noise, f.seed, f.message));
        }
        append(&log, &text)?;
    }
    Ok(GridOutcome { results, aggregates, failures, skipped })
}

fn append(path: &Path, text: &str) -> Result<()> {
    use std::io::Write as _;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests;

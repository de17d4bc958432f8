//! Command line entry point for the experiment harness.
//!
//! ```text
//! cleot run <config>            # train a (method x noise x seed) grid, resumably
//! cleot toy [--seed N]          # two-moons label-propagation walkthrough with plots
//! cleot plot boundary ...       # decision-boundary SVG from a checkpoint + data CSV
//! cleot plot coupling ...       # coupling-graph SVG from a coupling CSV + data CSV
//! cleot gen-data ...            # write a two-moons CSV (optionally noisy / split)
//! cleot validate-config <file>  # parse a config and report, with no side effects
//! ```
//!
//! Exit codes: 0 success, 1 bad usage or bad config, 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, NetSpec};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::grid::run_grid;
use crate::matrix::Matrix;
use crate::nn::{load_params, save_params, DenseNet, SgdMomentum};
use crate::noise::TransitionMatrix;
use crate::objective::CleotConfig;
use crate::plot::{plot_coupling_graph, plot_decision_boundary};
use crate::rng::{stream, StreamKind};
use crate::train::{fit_cross_entropy, iterative_propagation};

#[derive(Parser)]
#[command(name = "cleot", version, about = "Noise-robust classifier training via optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (method, noise level, seed) triple of a config file.
    ///
    /// Results stream into <output>/results.csv; rerunning skips finished
    /// triples, so an interrupted grid picks up where it stopped.
    Run {
        /// Experiment config file (see the config module docs for the format).
        config: PathBuf,
    },
    /// End-to-end two-moons walkthrough: corrupt labels, train, then refine
    /// by coupling rounds, writing per-round plots and an accuracy table.
    Toy(ToyArgs),
    /// Render SVG plots from saved artifacts.
    Plot {
        #[command(subcommand)]
        what: PlotCommand,
    },
    /// Generate a two-moons dataset CSV.
    GenData(GenDataArgs),
    /// Parse and validate a config file without running anything.
    ValidateConfig {
        config: PathBuf,
    },
}

#[derive(Args)]
struct ToyArgs {
    /// Base seed for data, noise, initialization, and training.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for plots, tables, data, and the final checkpoint.
    #[arg(long, default_value = "toy-out")]
    out: PathBuf,
    /// Number of coupling/propagation rounds.
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    /// Samples in the generated two-moons dataset.
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Probability of flipping each label.
    #[arg(long, default_value_t = 0.2)]
    flip: f64,
    /// Coupling-graph mass threshold; defaults to 0.25/m^2.
    #[arg(long)]
    threshold: Option<f64>,
    /// Decision-boundary grid resolution.
    #[arg(long, default_value_t = 200)]
    resolution: usize,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Shade a trained network's decision regions behind the labeled samples.
    Boundary {
        /// Dataset CSV (f0,...,label) with two feature columns.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint written by `cleot toy` or [`nn::save_params`].
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Hidden ReLU widths of the checkpointed network.
        #[arg(long, default_value = "256,256", value_delimiter = ',')]
        hidden: Vec<usize>,
        /// Set if the checkpointed network batch-normalizes its logits.
        #[arg(long)]
        batch_norm: bool,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
    },
    /// Draw a transport coupling as a graph over the samples.
    Coupling {
        /// Dataset CSV whose rows the coupling indexes.
        #[arg(long)]
        data: PathBuf,
        /// Coupling CSV with a row,col,mass header.
        #[arg(long)]
        coupling: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Minimum mass to draw; defaults to 0.25/m^2.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Args)]
struct GenDataArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Gaussian jitter added to the arcs.
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional symmetric label-flip probability; the written labels are
    /// then the corrupted ones.
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    /// Optional train/val/test fractions, e.g. 0.8,0.1,0.1. Also writes the
    /// per-row split tags next to the data as <out>.split.csv, and label
    /// flips then spare the test rows.
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<f64>>,
}

/// Run the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses code 0 for --help/--version and 2 for usage errors;
            // fold usage errors into the config-error code.
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("{e}");
            2
        }
    }
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

/// Everything that goes wrong after the config was accepted.
fn runtime(e: Error) -> Failure {
    Failure::Runtime(e)
}

fn execute(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::ValidateConfig { config } => {
            let cfg = load_config(&config).map_err(Failure::Config)?;
            println!(
                "ok: {} method(s) x {} noise level(s) x {} seed(s) -> {}",
                cfg.methods.len(),
                cfg.noise.levels().len(),
                cfg.seeds.len(),
                cfg.output.display()
            );
            Ok(())
        }
        Command::Run { config } => {
            let cfg = load_config(&config).map_err(Failure::Config)?;
            let outcome = run_grid(&cfg).map_err(runtime)?;
            if outcome.skipped > 0 {
                println!("skipped {} already-finished run(s)", outcome.skipped);
            }
            println!("{:<24} {:>6} {:>18} {:>5}", "method", "noise", "accuracy", "runs");
            for a in &outcome.aggregates {
                println!(
                    "{:<24} {:>6} {:>9.4} ± {:<6.4} {:>5}",
                    a.method, a.noise, a.mean_acc, a.std_acc, a.runs
                );
            }
            println!("results: {}", cfg.output.join("results.csv").display());
            if outcome.failures.is_empty() {
                Ok(())
            } else {
                for f in &outcome.failures {
                    eprintln!("failed: {} noise {} seed {}: {}", f.method, f.noise, f.seed, f.message);
                }
                Err(Failure::Runtime(Error::State(format!(
                    "{} run(s) failed; see {}",
                    outcome.failures.len(),
                    cfg.output.join("failures.log").display()
                ))))
            }
        }
        Command::Toy(args) => toy(args).map_err(runtime),
        Command::GenData(args) => gen_data(args).map_err(runtime),
        Command::Plot { what } => plot(what).map_err(runtime),
    }
}

/// The two-moons walkthrough: flip labels, fit a baseline net on the noisy
/// labels, then run coupling/propagation rounds, writing one boundary SVG,
/// one coupling SVG, and one coupling CSV per round plus an accuracy table.
fn toy(args: ToyArgs) -> Result<()> {
    let ToyArgs { seed, out, rounds, n, flip, threshold, resolution } = args;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;

    let mut ds = crate::data::two_moons(n, 0.1, &mut stream(seed, StreamKind::Dataset))?;
    if flip > 0.0 {
        let transition = TransitionMatrix::symmetric(2, flip)?;
        let flipped = ds.apply_label_noise(&transition, &mut stream(seed, StreamKind::Noise))?;
        println!("flipped {} of {} labels", flipped.len(), ds.len());
    }
    ds.save_training_csv(&out.join("data.csv"))?;
    ds.save_csv(&out.join("data_clean.csv"))?;

    let spec = NetSpec { hidden: vec![256, 256], dropout: 0.0, batch_norm: false, l2: 0.0 };
    let mut net = DenseNet::new(&spec.layer_specs(2, 2), &mut stream(seed, StreamKind::Init))?;
    let mut opt = SgdMomentum::new(0.1, 0.9);
    fit_cross_entropy(
        &mut net,
        ds.features(),
        ds.training_labels(),
        150,
        128,
        &mut opt,
        &mut stream(seed, StreamKind::Sampling),
        &mut stream(seed, StreamKind::Dropout),
    )?;

    let cfg = CleotConfig::new(1.0, 4.0, 0.1)?;
    let outcome = iterative_propagation(&ds, net, &cfg, rounds, 100, 128, 0.1, 0.9, seed)?;
    println!("initial accuracy {:.4}", outcome.initial_accuracy);

    let mass_cut = threshold.unwrap_or(0.25 / (ds.len() * ds.len()) as f64);
    let mut table = String::from("round,accuracy\n");
    table.push_str(&format!("0,{}\n", outcome.initial_accuracy));
    for record in &outcome.rounds {
        println!("round {} accuracy {:.4}", record.round, record.accuracy);
        table.push_str(&format!("{},{}\n", record.round, record.accuracy));

        let boundary =
            plot_decision_boundary(&record.net, ds.features(), ds.clean_labels(), resolution)?;
        write_text(&out.join(format!("boundary_round{}.svg", record.round)), &boundary)?;

        let graph = plot_coupling_graph(record.coupling.matrix(), ds.features(), mass_cut)?;
        write_text(&out.join(format!("coupling_round{}.svg", record.round)), &graph)?;
        record.coupling.write_csv(&out.join(format!("coupling_round{}.csv", record.round)), 1e-12)?;
    }
    write_text(&out.join("accuracy.csv"), &table)?;
    save_params(&outcome.net, &out.join("net.clnn"))?;
    println!("artifacts in {}", out.display());
    Ok(())
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let GenDataArgs { out, n, noise_std, seed, flip, split } = args;
    let mut ds = crate::data::two_moons(n, noise_std, &mut stream(seed, StreamKind::Dataset))?;
    if let Some(fractions) = split {
        if fractions.len() != 3 {
            return Err(Error::Contract(format!(
                "--split takes train,val,test fractions, got {} value(s)",
                fractions.len()
            )));
        }
        ds.split((fractions[0], fractions[1], fractions[2]), &mut stream(seed, StreamKind::Split))?;
        let tags = tag_path(&out);
        ds.save_split_csv(&tags)?;
        println!("wrote {}", tags.display());
    }
    if flip > 0.0 {
        let transition = TransitionMatrix::symmetric(2, flip)?;
        let flipped = ds.apply_label_noise(&transition, &mut stream(seed, StreamKind::Noise))?;
        println!("flipped {} of {} labels", flipped.len(), ds.len());
        ds.save_training_csv(&out)?;
    } else {
        ds.save_csv(&out)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// `moons.csv` -> `moons.split.csv`.
fn tag_path(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => out.with_extension(format!("split.{ext}")),
        None => out.with_extension("split"),
    }
}

fn plot(what: PlotCommand) -> Result<()> {
    match what {
        PlotCommand::Boundary { data, checkpoint, out, hidden, batch_norm, resolution } => {
            let ds = LabeledDataset::load_csv(&data)?;
            let spec = NetSpec { hidden, dropout: 0.0, batch_norm, l2: 0.0 };
            let mut net = DenseNet::new(
                &spec.layer_specs(ds.dims(), ds.classes()),
                &mut stream(0, StreamKind::Init),
            )?;
            load_params(&mut net, &checkpoint)?;
            let svg = plot_decision_boundary(&net, ds.features(), ds.clean_labels(), resolution)?;
            write_text(&out, &svg)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        PlotCommand::Coupling { data, coupling, out, threshold } => {
            let ds = LabeledDataset::load_csv(&data)?;
            let m = ds.len();
            let matrix = read_coupling_csv(&coupling, m)?;
            let mass_cut = threshold.unwrap_or(0.25 / (m * m) as f64);
            let svg = plot_coupling_graph(&matrix, ds.features(), mass_cut)?;
            write_text(&out, &svg)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

/// Read a sparse `row,col,mass` CSV back into a dense `m x m` matrix.
fn read_coupling_csv(path: &Path, m: usize) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "row,col,mass")) => {}
        _ => {
            return Err(Error::parse(
                format!("{}:1", path.display()),
                "expected header `row,col,mass`",
            ))
        }
    }
    let mut matrix = Matrix::zeros(m, m);
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", path.display(), idx + 1);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(loc(), format!("expected 3 fields, got {}", fields.len())));
        }
        let index = |what: &str, field: &str| -> Result<usize> {
            let v: usize = field
                .parse()
                .map_err(|_| Error::parse(loc(), format!("bad {what} `{field}`")))?;
            if v >= m {
                return Err(Error::parse(
                    loc(),
                    format!("{what} {v} out of range for {m} samples"),
                ));
            }
            Ok(v)
        };
        let (i, j) = (index("row", fields[0])?, index("col", fields[1])?);
        let mass = fields[2]
            .parse::<f64>()
            .map_err(|_| Error::parse(loc(), format!("bad mass `{}`", fields[2])))?;
        matrix[(i, j)] = mass;
    }
    Ok(matrix)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

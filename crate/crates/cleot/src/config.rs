//! Experiment configuration.
//!
//! Configs are plain text in a flat, sectioned `key = value` format so they
//! can be written by hand and parsed from any language without a dependency:
//!
//! ```text
//! # Lines starting with # are comments; blank lines are ignored.
//! [dataset]
//! kind = two-moons          # or: csv (requires path = ...)
//! n = 500
//! noise_std = 0.1
//!
//! [split]                   # fractions of each class, must sum to 1
//! train = 0.8
//! val = 0.1
//! test = 0.1
//!
//! [noise]
//! kind = symmetric          # none | symmetric | asymmetric
//! levels = 0.0, 0.2, 0.4    # flip-probability grid, one run set per level
//! # pairs = 0>1, 1>2        # asymmetric only: source>target class pairs
//!
//! [net]
//! hidden = 256, 256         # widths of the ReLU hidden layers
//! dropout = 0.0             # drop probability after each hidden layer
//! batch_norm = false        # batch-normalize before the softmax
//! l2 = 0.0                  # weight decay on dense layers
//!
//! [optimizer]
//! learning_rate = 0.1
//! momentum = 0.9
//!
//! [sampler]
//! kind = stratified         # plain | stratified
//! per_class = 50            # plain uses batch_size = ... instead
//!
//! [train]
//! max_epochs = 300
//! patience = 25
//!
//! [run]
//! seeds = 0, 1, 2, 3, 4
//! output = out/moons
//! workers = 1
//!
//! [methods]
//! method = cross-entropy
//! method = unhinged
//! method = forward
//! method = cleot alpha=1 beta=0.05 lambda=0.05
//! ```
//!
//! `method` is the only repeatable key. Each value is a tag followed by
//! optional `key=value` arguments:
//!
//! | tag | arguments |
//! |---|---|
//! | `cross-entropy`, `unhinged`, `sigmoid`, `ramp`, `savage` | — |
//! | `bootstrap-soft` | `beta` in (0, 1] |
//! | `forward`, `backward` | — (correction uses the true transition of the current noise level) |
//! | `cleot` | `alpha`, `beta`, `lambda`, `mode` (`unrolled`/`detached`), `depth` |
//!
//! Every method accepts `name=...` to override the label used in result
//! tables, which is required when the same tag appears twice.
//!
//! Unknown sections, unknown keys, and duplicate scalar keys are rejected so
//! a typo fails loudly instead of silently falling back to a default. Every
//! error carries the `section.key` path it refers to.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::data::SamplerMode;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::nn::LayerSpec;
use crate::noise::{FlipSpec, TransitionMatrix};
use crate::objective::{CleotConfig, GradientMode};
use crate::train::Method;

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    TwoMoons { n: usize, noise_std: f64 },
    Csv { path: PathBuf },
}

/// Label-corruption model applied to train/val rows, swept over `levels`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    None,
    Symmetric { levels: Vec<f64> },
    Asymmetric { pairs: Vec<(usize, usize)>, levels: Vec<f64> },
}

impl NoiseSpec {
    /// Flip probabilities the grid iterates over; `None` contributes a
    /// single clean level so every config produces at least one run set.
    pub fn levels(&self) -> Vec<f64> {
        match self {
            NoiseSpec::None => vec![0.0],
            NoiseSpec::Symmetric { levels } | NoiseSpec::Asymmetric { levels, .. } => {
                levels.clone()
            }
        }
    }

    /// Transition matrix for one level, or `None` when no corruption applies.
    pub fn transition(&self, classes: usize, level: f64) -> Result<Option<TransitionMatrix>> {
        if level == 0.0 {
            return Ok(None);
        }
        match self {
            NoiseSpec::None => Ok(None),
            NoiseSpec::Symmetric { .. } => TransitionMatrix::symmetric(classes, level).map(Some),
            NoiseSpec::Asymmetric { pairs, .. } => {
                let spec = FlipSpec::new(pairs.clone(), level)?;
                TransitionMatrix::asymmetric(classes, &spec).map(Some)
            }
        }
    }
}

/// Fully-connected architecture; input width and class count come from the
/// dataset at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub batch_norm: bool,
    pub l2: f64,
}

impl NetSpec {
    /// Expand into layer specs for a `d`-input, `classes`-output classifier.
    pub fn layer_specs(&self, inputs: usize, classes: usize) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut width = inputs;
        for &h in &self.hidden {
            specs.push(LayerSpec::Dense { inputs: width, outputs: h, l2: self.l2 });
            specs.push(LayerSpec::Relu);
            if self.dropout > 0.0 {
                specs.push(LayerSpec::Dropout { rate: self.dropout });
            }
            width = h;
        }
        specs.push(LayerSpec::Dense { inputs: width, outputs: classes, l2: self.l2 });
        if self.batch_norm {
            specs.push(LayerSpec::BatchNorm { momentum: 0.9, epsilon: 1e-5 });
        }
        specs.push(LayerSpec::Softmax);
        specs
    }
}

/// One entry from `[methods]`. Corrections that need the noise transition
/// are resolved per level once the class count is known.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub kind: MethodKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodKind {
    CrossEntropy,
    Unhinged,
    Sigmoid,
    Ramp,
    Savage,
    BootstrapSoft { beta: f64 },
    Forward,
    Backward,
    Cleot(CleotConfig),
}

impl MethodSpec {
    /// Bind the spec to a concrete trainable method. Forward/backward
    /// corrections use the exact transition matrix of the current noise
    /// level (the "known noise" setting); at level 0 that is the identity.
    pub fn resolve(&self, classes: usize, noise: &NoiseSpec, level: f64) -> Result<Method> {
        let transition = || -> Result<TransitionMatrix> {
            Ok(match noise.transition(classes, level)? {
                Some(t) => t,
                None => TransitionMatrix::symmetric(classes, 0.0)?,
            })
        };
        Ok(match &self.kind {
            MethodKind::CrossEntropy => Method::Loss(LossKind::CrossEntropy),
            MethodKind::Unhinged => Method::Loss(LossKind::Unhinged),
            MethodKind::Sigmoid => Method::Loss(LossKind::Sigmoid),
            MethodKind::Ramp => Method::Loss(LossKind::Ramp),
            MethodKind::Savage => Method::Loss(LossKind::Savage),
            MethodKind::BootstrapSoft { beta } => {
                Method::Loss(LossKind::BootstrapSoft { beta: *beta })
            }
            MethodKind::Forward => Method::Loss(LossKind::Forward { transition: transition()? }),
            MethodKind::Backward => Method::Loss(LossKind::Backward { transition: transition()? }),
            MethodKind::Cleot(cfg) => Method::Cleot(cfg.clone()),
        })
    }
}

/// Everything a grid run needs, validated at parse time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub split: (f64, f64, f64),
    pub noise: NoiseSpec,
    pub net: NetSpec,
    pub learning_rate: f64,
    pub momentum: f64,
    pub sampler: SamplerMode,
    pub max_epochs: usize,
    pub patience: usize,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub workers: usize,
}

/// Read and parse a config file. Relative paths inside the file (the csv
/// dataset, the output directory) are resolved against the file's directory,
/// and referenced input files must exist.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

/// Parse config text; `base` anchors relative paths.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::scan(text)?;

    let dataset = parse_dataset(&mut raw, base)?;
    let split = parse_split(&mut raw)?;
    let noise = parse_noise(&mut raw)?;
    let net = parse_net(&mut raw)?;
    let (learning_rate, momentum) = parse_optimizer(&mut raw)?;
    let sampler = parse_sampler(&mut raw)?;
    let (max_epochs, patience) = parse_train(&mut raw)?;
    let methods = parse_methods(&mut raw)?;
    let (seeds, output, workers) = parse_run(&mut raw, base)?;

    raw.finish()?;
    Ok(ExperimentConfig {
        dataset,
        split,
        noise,
        net,
        learning_rate,
        momentum,
        sampler,
        max_epochs,
        patience,
        methods,
        seeds,
        output,
        workers,
    })
}

/// Scanned `[section]` / `key = value` text, consumed key by key so that
/// anything left over can be reported as unknown.
struct RawConfig {
    /// section -> key -> values in file order (only `method` repeats).
    sections: HashMap<String, HashMap<String, Vec<String>>>,
}

impl RawConfig {
    fn scan(text: &str) -> Result<Self> {
        let mut sections: HashMap<String, HashMap<String, Vec<String>>> = HashMap::new();
        let mut current: Option<String> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match line.find('#') {
                Some(cut) => &line[..cut],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        Error::config(format!("line {lineno}"), "unterminated section header")
                    })?
                    .trim();
                if !KNOWN_SECTIONS.contains(&name) {
                    return Err(Error::config(
                        name,
                        format!("unknown section (expected one of {})", KNOWN_SECTIONS.join(", ")),
                    ));
                }
                if sections.contains_key(name) {
                    return Err(Error::config(name, "section appears twice"));
                }
                sections.insert(name.to_string(), HashMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {lineno}"), format!("expected `key = value`, got `{line}`"))
            })?;
            let section = current.as_ref().ok_or_else(|| {
                Error::config(format!("line {lineno}"), "entry before any [section] header")
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let entries = sections.get_mut(section).unwrap();
            let slot = entries.entry(key.clone()).or_default();
            if !slot.is_empty() && key != "method" {
                return Err(Error::config(format!("{section}.{key}"), "key appears twice"));
            }
            slot.push(value);
        }
        Ok(RawConfig { sections })
    }

    /// Take a single-valued key out of a section, if present.
    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.sections.get_mut(section)?.remove(key)?.into_iter().next()
    }

    /// Take the repeatable `method` key (all values, file order).
    fn take_all(&mut self, section: &str, key: &str) -> Vec<String> {
        self.sections
            .get_mut(section)
            .and_then(|s| s.remove(key))
            .unwrap_or_default()
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Error on any key nobody consumed.
    fn finish(self) -> Result<()> {
        for (section, entries) in &self.sections {
            if let Some(key) = entries.keys().min() {
                return Err(Error::config(format!("{section}.{key}"), "unknown key"));
            }
        }
        Ok(())
    }
}

const KNOWN_SECTIONS: &[&str] =
    &["dataset", "split", "noise", "net", "optimizer", "sampler", "train", "run", "methods"];

fn parse_f64(field: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::config(field, format!("expected a number, got `{value}`")))?;
    if !v.is_finite() {
        return Err(Error::config(field, "value must be finite"));
    }
    Ok(v)
}

fn parse_usize(field: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::config(field, format!("expected a non-negative integer, got `{value}`")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(field, format!("expected true or false, got `{value}`"))),
    }
}

fn parse_list<T>(field: &str, value: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(|s| item(field, s.trim())).collect()
}

fn parse_dataset(raw: &mut RawConfig, base: &Path) -> Result<DatasetSpec> {
    if !raw.has_section("dataset") {
        return Err(Error::config("dataset", "missing required section"));
    }
    let kind = raw
        .take("dataset", "kind")
        .ok_or_else(|| Error::config("dataset.kind", "missing required key"))?;
    match kind.as_str() {
        "two-moons" => {
            let n = match raw.take("dataset", "n") {
                Some(v) => parse_usize("dataset.n", &v)?,
                None => 400,
            };
            if n == 0 || n % 2 != 0 {
                return Err(Error::config("dataset.n", format!("need a positive even count, got {n}")));
            }
            let noise_std = match raw.take("dataset", "noise_std") {
                Some(v) => parse_f64("dataset.noise_std", &v)?,
                None => 0.1,
            };
            if noise_std < 0.0 {
                return Err(Error::config("dataset.noise_std", "must be non-negative"));
            }
            Ok(DatasetSpec::TwoMoons { n, noise_std })
        }
        "csv" => {
            let rel = raw
                .take("dataset", "path")
                .ok_or_else(|| Error::config("dataset.path", "missing required key"))?;
            let path = base.join(rel);
            if !path.is_file() {
                return Err(Error::config(
                    "dataset.path",
                    format!("file not found: {}", path.display()),
                ));
            }
            Ok(DatasetSpec::Csv { path })
        }
        other => Err(Error::config("dataset.kind", format!("expected two-moons or csv, got `{other}`"))),
    }
}

fn parse_split(raw: &mut RawConfig) -> Result<(f64, f64, f64)> {
    let mut get = |key: &str, default: f64| -> Result<f64> {
        let field = format!("split.{key}");
        let v = match raw.take("split", key) {
            Some(v) => parse_f64(&field, &v)?,
            None => default,
        };
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::config(field, "fraction must lie in [0, 1]"));
        }
        Ok(v)
    };
    let train = get("train", 0.8)?;
    let val = get("val", 0.1)?;
    let test = get("test", 0.1)?;
    if (train + val + test - 1.0).abs() > 1e-9 {
        return Err(Error::config(
            "split",
            format!("fractions must sum to 1, got {}", train + val + test),
        ));
    }
    if val == 0.0 {
        return Err(Error::config("split.val", "early stopping needs a validation fraction > 0"));
    }
    if test == 0.0 {
        return Err(Error::config("split.test", "reporting needs a test fraction > 0"));
    }
    Ok((train, val, test))
}

fn parse_noise(raw: &mut RawConfig) -> Result<NoiseSpec> {
    if !raw.has_section("noise") {
        return Ok(NoiseSpec::None);
    }
    let kind = raw
        .take("noise", "kind")
        .ok_or_else(|| Error::config("noise.kind", "missing required key"))?;
    let levels = raw.take("noise", "levels");
    let pairs = raw.take("noise", "pairs");
    match kind.as_str() {
        "none" => {
            if levels.is_some() || pairs.is_some() {
                return Err(Error::config("noise.kind", "kind none takes no levels or pairs"));
            }
            Ok(NoiseSpec::None)
        }
        "symmetric" | "asymmetric" => {
            let levels = parse_list(
                "noise.levels",
                &levels.ok_or_else(|| Error::config("noise.levels", "missing required key"))?,
                parse_f64,
            )?;
            if levels.is_empty() {
                return Err(Error::config("noise.levels", "need at least one level"));
            }
            for &p in &levels {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config("noise.levels", format!("flip probability {p} outside [0, 1]")));
                }
            }
            if kind == "symmetric" {
                if pairs.is_some() {
                    return Err(Error::config("noise.pairs", "pairs only apply to kind asymmetric"));
                }
                Ok(NoiseSpec::Symmetric { levels })
            } else {
                let text = pairs.ok_or_else(|| Error::config("noise.pairs", "missing required key"))?;
                let pairs = parse_list("noise.pairs", &text, |field, item| {
                    let (a, b) = item.split_once('>').ok_or_else(|| {
                        Error::config(field, format!("expected source>target, got `{item}`"))
                    })?;
                    Ok((parse_usize(field, a.trim())?, parse_usize(field, b.trim())?))
                })?;
                Ok(NoiseSpec::Asymmetric { pairs, levels })
            }
        }
        other => Err(Error::config(
            "noise.kind",
            format!("expected none, symmetric or asymmetric, got `{other}`"),
        )),
    }
}

fn parse_net(raw: &mut RawConfig) -> Result<NetSpec> {
    let hidden = match raw.take("net", "hidden") {
        Some(v) => parse_list("net.hidden", &v, parse_usize)?,
        None => vec![256, 256],
    };
    if hidden.iter().any(|&h| h == 0) {
        return Err(Error::config("net.hidden", "layer widths must be positive"));
    }
    let dropout = match raw.take("net", "dropout") {
        Some(v) => parse_f64("net.dropout", &v)?,
        None => 0.0,
    };
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::config("net.dropout", "drop probability must lie in [0, 1)"));
    }
    let batch_norm = match raw.take("net", "batch_norm") {
        Some(v) => parse_bool("net.batch_norm", &v)?,
        None => false,
    };
    let l2 = match raw.take("net", "l2") {
        Some(v) => parse_f64("net.l2", &v)?,
        None => 0.0,
    };
    if l2 < 0.0 {
        return Err(Error::config("net.l2", "weight decay must be non-negative"));
    }
    Ok(NetSpec { hidden, dropout, batch_norm, l2 })
}

fn parse_optimizer(raw: &mut RawConfig) -> Result<(f64, f64)> {
    let lr = match raw.take("optimizer", "learning_rate") {
        Some(v) => parse_f64("optimizer.learning_rate", &v)?,
        None => 0.1,
    };
    if lr <= 0.0 {
        return Err(Error::config("optimizer.learning_rate", "must be positive"));
    }
    let momentum = match raw.take("optimizer", "momentum") {
        Some(v) => parse_f64("optimizer.momentum", &v)?,
        None => 0.9,
    };
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::config("optimizer.momentum", "must lie in [0, 1)"));
    }
    Ok((lr, momentum))
}

fn parse_sampler(raw: &mut RawConfig) -> Result<SamplerMode> {
    if !raw.has_section("sampler") {
        return Ok(SamplerMode::Plain { batch_size: 128 });
    }
    let kind = raw
        .take("sampler", "kind")
        .ok_or_else(|| Error::config("sampler.kind", "missing required key"))?;
    match kind.as_str() {
        "plain" => {
            let batch_size = match raw.take("sampler", "batch_size") {
                Some(v) => parse_usize("sampler.batch_size", &v)?,
                None => 128,
            };
            if batch_size == 0 {
                return Err(Error::config("sampler.batch_size", "must be positive"));
            }
            Ok(SamplerMode::Plain { batch_size })
        }
        "stratified" => {
            let per_class = match raw.take("sampler", "per_class") {
                Some(v) => parse_usize("sampler.per_class", &v)?,
                None => 50,
            };
            if per_class == 0 {
                return Err(Error::config("sampler.per_class", "must be positive"));
            }
            Ok(SamplerMode::Stratified { per_class })
        }
        other => Err(Error::config("sampler.kind", format!("expected plain or stratified, got `{other}`"))),
    }
}

fn parse_train(raw: &mut RawConfig) -> Result<(usize, usize)> {
    let max_epochs = match raw.take("train", "max_epochs") {
        Some(v) => parse_usize("train.max_epochs", &v)?,
        None => 300,
    };
    if max_epochs == 0 {
        return Err(Error::config("train.max_epochs", "must be at least 1"));
    }
    let patience = match raw.take("train", "patience") {
        Some(v) => parse_usize("train.patience", &v)?,
        None => 25,
    };
    Ok((max_epochs, patience))
}

fn parse_methods(raw: &mut RawConfig) -> Result<Vec<MethodSpec>> {
    let lines = raw.take_all("methods", "method");
    if lines.is_empty() {
        return Err(Error::config("methods.method", "need at least one method"));
    }
    let mut methods = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let field = format!("methods.method[{i}]");
        methods.push(parse_method(&field, line)?);
    }
    for i in 1..methods.len() {
        if methods[..i].iter().any(|m| m.name == methods[i].name) {
            return Err(Error::config(
                format!("methods.method[{i}]"),
                format!("duplicate method name `{}`; disambiguate with name=...", methods[i].name),
            ));
        }
    }
    Ok(methods)
}

fn parse_method(field: &str, line: &str) -> Result<MethodSpec> {
    let mut tokens = line.split_whitespace();
    let tag = tokens
        .next()
        .ok_or_else(|| Error::config(field, "empty method entry"))?;
    let mut args: HashMap<&str, &str> = HashMap::new();
    for token in tokens {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| Error::config(field, format!("expected key=value argument, got `{token}`")))?;
        if args.insert(k, v).is_some() {
            return Err(Error::config(field, format!("argument `{k}` appears twice")));
        }
    }
    let mut num = |key: &str, default: f64| -> Result<f64> {
        match args.remove(key) {
            Some(v) => parse_f64(field, v),
            None => Ok(default),
        }
    };
    let kind = match tag {
        "cross-entropy" => MethodKind::CrossEntropy,
        "unhinged" => MethodKind::Unhinged,
        "sigmoid" => MethodKind::Sigmoid,
        "ramp" => MethodKind::Ramp,
        "savage" => MethodKind::Savage,
        "bootstrap-soft" => {
            let beta = num("beta", 0.8)?;
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::config(field, format!("beta must lie in (0, 1], got {beta}")));
            }
            MethodKind::BootstrapSoft { beta }
        }
        "forward" => MethodKind::Forward,
        "backward" => MethodKind::Backward,
        "cleot" => {
            let mut cfg =
                CleotConfig::new(num("alpha", 1.0)?, num("beta", 0.05)?, num("lambda", 0.05)?)
                    .map_err(|e| Error::config(field, e.to_string()))?;
            if let Some(mode) = args.remove("mode") {
                cfg.mode = match mode {
                    "unrolled" => GradientMode::Unrolled,
                    "detached" => GradientMode::DetachedCoupling,
                    other => {
                        return Err(Error::config(
                            field,
                            format!("expected mode unrolled or detached, got `{other}`"),
                        ))
                    }
                };
            }
            if let Some(depth) = args.remove("depth") {
                cfg.unroll_depth = parse_usize(field, depth)?;
            }
            cfg.validate().map_err(|e| Error::config(field, e.to_string()))?;
            MethodKind::Cleot(cfg)
        }
        other => return Err(Error::config(field, format!("unknown method tag `{other}`"))),
    };
    let name = match args.remove("name") {
        Some(n) => n.to_string(),
        None => tag.to_string(),
    };
    if name.is_empty() || name.contains(',') {
        return Err(Error::config(field, "method names must be non-empty and free of commas"));
    }
    if let Some(stray) = args.keys().next() {
        return Err(Error::config(field, format!("unknown argument `{stray}` for `{tag}`")));
    }
    Ok(MethodSpec { name, kind })
}

fn parse_run(raw: &mut RawConfig, base: &Path) -> Result<(Vec<u64>, PathBuf, usize)> {
    let seeds_text = raw
        .take("run", "seeds")
        .ok_or_else(|| Error::config("run.seeds", "missing required key"))?;
    let seeds = parse_list("run.seeds", &seeds_text, |field, item| {
        item.parse::<u64>()
            .map_err(|_| Error::config(field, format!("expected a seed integer, got `{item}`")))
    })?;
    if seeds.is_empty() {
        return Err(Error::config("run.seeds", "need at least one seed"));
    }
    for i in 1..seeds.len() {
        if seeds[..i].contains(&seeds[i]) {
            return Err(Error::config("run.seeds", format!("seed {} appears twice", seeds[i])));
        }
    }
    let output = base.join(raw.take("run", "output").unwrap_or_else(|| "out".to_string()));
    let workers = match raw.take("run", "workers") {
        Some(v) => parse_usize("run.workers", &v)?,
        None => 1,
    };
    if workers == 0 {
        return Err(Error::config("run.workers", "must be at least 1"));
    }
    Ok((seeds, output, workers))
}

//! Dataset plumbing: the two-moons generator, CSV persistence, stratified
//! train/validation/test splitting, label-noise application that never
//! touches test rows, and the two minibatch samplers (plain shuffled passes
//! and exact per-class stratified batches).

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::noise::{apply_noise, one_hot_class, TransitionMatrix};
use crate::rng::Rng;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

/// Features with clean one-hot labels, and optionally noisy labels and
/// split tags once the corresponding steps have run.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: Matrix,
    clean_labels: Matrix,
    noisy_labels: Option<Matrix>,
    split: Option<Vec<SplitTag>>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, clean_labels: Matrix) -> Result<Self> {
        if features.rows() != clean_labels.rows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} label rows",
                features.rows(),
                clean_labels.rows()
            )));
        }
        if features.rows() == 0 {
            return Err(Error::Contract("dataset has no rows".into()));
        }
        if !features.all_finite() {
            return Err(Error::Contract("features must be finite".into()));
        }
        for i in 0..clean_labels.rows() {
            if one_hot_class(clean_labels.row(i)).is_none() {
                return Err(Error::Contract(format!("label row {i} is not one-hot")));
            }
        }
        Ok(LabeledDataset { features, clean_labels, noisy_labels: None, split: None })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.clean_labels.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn clean_labels(&self) -> &Matrix {
        &self.clean_labels
    }

    /// Noisy labels if noise has been applied, otherwise the clean ones.
    pub fn training_labels(&self) -> &Matrix {
        self.noisy_labels.as_ref().unwrap_or(&self.clean_labels)
    }

    pub fn noisy_labels(&self) -> Option<&Matrix> {
        self.noisy_labels.as_ref()
    }

    pub fn split_tags(&self) -> Option<&[SplitTag]> {
        self.split.as_deref()
    }

    pub fn indices_of(&self, tag: SplitTag) -> Vec<usize> {
        match &self.split {
            Some(tags) => {
                (0..self.len()).filter(|&i| tags[i] == tag).collect()
            }
            // Without a split everything is training data.
            None if tag == SplitTag::Train => (0..self.len()).collect(),
            None => Vec::new(),
        }
    }

    /// Stratified split: each class is partitioned separately so the class
    /// balance carries into every split. Floor rule: validation and test get
    /// `floor(fraction * class size)` rows each, the remainder goes to train.
    pub fn split(&mut self, fractions: (f64, f64, f64), rng: &mut Rng) -> Result<()> {
        let (train, val, test) = fractions;
        let total = train + val + test;
        if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::Contract(format!(
                "split fractions must be in [0,1] and sum to 1, got ({train}, {val}, {test})"
            )));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.classes()];
        for i in 0..self.len() {
            let class = one_hot_class(self.clean_labels.row(i)).expect("validated one-hot");
            by_class[class].push(i);
        }
        let mut tags = vec![SplitTag::Train; self.len()];
        for (class, mut indices) in by_class.into_iter().enumerate() {
            if indices.len() < 3 {
                return Err(Error::Contract(format!(
                    "class {class} has {} samples; need at least 3 to split",
                    indices.len()
                )));
            }
            indices.shuffle(rng);
            let n_val = (val * indices.len() as f64).floor() as usize;
            let n_test = (test * indices.len() as f64).floor() as usize;
            for (pos, &i) in indices.iter().enumerate() {
                tags[i] = if pos < n_val {
                    SplitTag::Val
                } else if pos < n_val + n_test {
                    SplitTag::Test
                } else {
                    SplitTag::Train
                };
            }
        }
        self.split = Some(tags);
        Ok(())
    }

    /// Resamples the labels of train and validation rows through the
    /// transition matrix; test rows always keep their clean labels. Without
    /// split tags every row is treated as training data. Returns the indices
    /// whose label changed.
    pub fn apply_label_noise(
        &mut self,
        transition: &TransitionMatrix,
        rng: &mut Rng,
    ) -> Result<Vec<usize>> {
        let corrupt: Vec<usize> = match &self.split {
            Some(tags) => (0..self.len()).filter(|&i| tags[i] != SplitTag::Test).collect(),
            None => (0..self.len()).collect(),
        };
        let subset = self.clean_labels.select_rows(&corrupt);
        let (noisy_subset, flipped_local) = apply_noise(&subset, transition, rng)?;
        let mut noisy = self.clean_labels.clone();
        for (local, &global) in corrupt.iter().enumerate() {
            for k in 0..noisy.cols() {
                noisy[(global, k)] = noisy_subset[(local, k)];
            }
        }
        self.noisy_labels = Some(noisy);
        Ok(flipped_local.into_iter().map(|local| corrupt[local]).collect())
    }

    /// Header `f0,...,f{d-1},label`, then one row per sample with the
    /// 0-based integer class. Feature values survive a round trip
    /// bit-exactly. Only features and clean labels are stored.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_feature_csv(path, &self.clean_labels)
    }

    /// Like [`save_csv`](Self::save_csv) but writes the labels training
    /// would see, i.e. the corrupted ones when noise has been applied. A
    /// file written this way reads back as a dataset whose "clean" labels
    /// are the corrupted ones, which is exactly the noisy-data setting.
    pub fn save_training_csv(&self, path: &Path) -> Result<()> {
        self.write_feature_csv(path, self.training_labels())
    }

    fn write_feature_csv(&self, path: &Path, labels: &Matrix) -> Result<()> {
        let mut text = String::new();
        for j in 0..self.dims() {
            text.push_str(&format!("f{j},"));
        }
        text.push_str("label\n");
        for i in 0..self.len() {
            for &v in self.features.row(i) {
                text.push_str(&format!("{v},"));
            }
            let class = one_hot_class(labels.row(i)).expect("validated one-hot");
            text.push_str(&format!("{class}\n"));
        }
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(text.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let name = path.display();
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(format!("{name}:1"), "empty file"))?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.len() < 2 || columns[columns.len() - 1] != "label" {
            return Err(Error::parse(
                format!("{name}:1"),
                "expected a header of the form f0,...,label",
            ));
        }
        let dims = columns.len() - 1;
        for (j, col) in columns[..dims].iter().enumerate() {
            if *col != format!("f{j}") {
                return Err(Error::parse(
                    format!("{name}:1"),
                    format!("expected column f{j}, found {col:?}"),
                ));
            }
        }

        let mut features = Vec::new();
        let mut classes = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dims + 1 {
                return Err(Error::parse(
                    format!("{name}:{line_no}"),
                    format!("expected {} fields, got {}", dims + 1, fields.len()),
                ));
            }
            let mut row = Vec::with_capacity(dims);
            for field in &fields[..dims] {
                let v: f64 = field.parse().map_err(|_| {
                    Error::parse(format!("{name}:{line_no}"), format!("invalid number {field:?}"))
                })?;
                row.push(v);
            }
            let class: i64 = fields[dims].parse().map_err(|_| {
                Error::parse(
                    format!("{name}:{line_no}"),
                    format!("invalid label {:?}", fields[dims]),
                )
            })?;
            if class < 0 {
                return Err(Error::parse(
                    format!("{name}:{line_no}"),
                    format!("labels must be non-negative, got {class}"),
                ));
            }
            features.push(row);
            classes.push(class as usize);
        }
        if features.is_empty() {
            return Err(Error::parse(format!("{name}:2"), "no data rows"));
        }

        let class_count = classes.iter().max().copied().unwrap_or(0) + 1;
        let mut labels = Matrix::zeros(classes.len(), class_count);
        for (i, &class) in classes.iter().enumerate() {
            labels[(i, class)] = 1.0;
        }
        LabeledDataset::new(Matrix::from_rows(&features), labels)
    }

    /// One-column CSV of split tags aligned with row order.
    pub fn save_split_csv(&self, path: &Path) -> Result<()> {
        let tags = self
            .split
            .as_ref()
            .ok_or_else(|| Error::State("dataset has not been split".into()))?;
        let mut text = String::from("split\n");
        for tag in tags {
            text.push_str(tag.as_str());
            text.push('\n');
        }
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(text.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Two interleaved half-circles with Gaussian jitter: class 0 on
/// `(cos t, sin t)` and class 1 on `(1 - cos t, 0.5 - sin t)` for `t` evenly
/// spaced over `[0, pi]` inclusive, `n/2` points each.
pub fn two_moons(n: usize, noise_std: f64, rng: &mut Rng) -> Result<LabeledDataset> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Contract(format!("need a positive even sample count, got {n}")));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::Contract(format!("noise_std must be non-negative, got {noise_std}")));
    }
    let half = n / 2;
    let mut features = Matrix::zeros(n, 2);
    let mut labels = Matrix::zeros(n, 2);
    let normal = StandardNormal;
    for k in 0..half {
        let t = if half == 1 {
            0.0
        } else {
            std::f64::consts::PI * k as f64 / (half - 1) as f64
        };
        features[(k, 0)] = t.cos();
        features[(k, 1)] = t.sin();
        labels[(k, 0)] = 1.0;
        features[(half + k, 0)] = 1.0 - t.cos();
        features[(half + k, 1)] = 0.5 - t.sin();
        labels[(half + k, 1)] = 1.0;
    }
    if noise_std > 0.0 {
        for v in features.as_mut_slice() {
            let jitter: f64 = normal.sample(rng);
            *v += noise_std * jitter;
        }
    }
    LabeledDataset::new(features, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Sequential chunks of a fresh shuffle each epoch; the final short
    /// batch is kept.
    Plain { batch_size: usize },
    /// Every batch holds exactly `per_class` rows of each class. Classes are
    /// drawn without replacement until exhausted within an epoch, then with
    /// replacement until the largest class runs out, which ends the epoch.
    Stratified { per_class: usize },
}

/// Yields batches of dataset indices. The label matrix used for
/// stratification is whatever the trainer will see (noisy labels when noise
/// has been applied).
#[derive(Debug, Clone)]
pub struct BatchSampler {
    mode: SamplerMode,
    // Plain state: the shuffled order and a cursor into it.
    order: Vec<usize>,
    cursor: usize,
    // Stratified state: per-class index pools, per-class cursors, and the
    // number of batches left in the current epoch.
    by_class: Vec<Vec<usize>>,
    class_cursors: Vec<usize>,
    batches_left: usize,
}

impl BatchSampler {
    pub fn new(mode: SamplerMode, labels: &Matrix, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Contract("sampler needs a non-empty index set".into()));
        }
        match mode {
            SamplerMode::Plain { batch_size } => {
                if batch_size == 0 {
                    return Err(Error::Contract("batch size must be at least 1".into()));
                }
                Ok(BatchSampler {
                    mode,
                    order: indices.to_vec(),
                    cursor: indices.len(),
                    by_class: Vec::new(),
                    class_cursors: Vec::new(),
                    batches_left: 0,
                })
            }
            SamplerMode::Stratified { per_class } => {
                if per_class == 0 {
                    return Err(Error::Contract("per-class count must be at least 1".into()));
                }
                let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.cols()];
                for &i in indices {
                    let class = one_hot_class(labels.row(i)).ok_or_else(|| {
                        Error::Contract(format!("label row {i} is not one-hot"))
                    })?;
                    by_class[class].push(i);
                }
                if let Some(missing) = by_class.iter().position(|c| c.is_empty()) {
                    return Err(Error::Contract(format!(
                        "stratified sampling requires every class in the split; class {missing} is absent"
                    )));
                }
                let cursors = vec![0; by_class.len()];
                Ok(BatchSampler {
                    mode,
                    order: Vec::new(),
                    cursor: 0,
                    by_class,
                    class_cursors: cursors,
                    batches_left: 0,
                })
            }
        }
    }

    /// Number of batches that make up one epoch.
    pub fn batches_per_epoch(&self) -> usize {
        match self.mode {
            SamplerMode::Plain { batch_size } => self.order.len().div_ceil(batch_size),
            SamplerMode::Stratified { per_class } => {
                let largest = self.by_class.iter().map(Vec::len).max().unwrap_or(0);
                largest.div_ceil(per_class)
            }
        }
    }

    /// Next batch of dataset indices, starting a new epoch (with fresh
    /// shuffles) whenever the previous one is exhausted.
    pub fn next_batch(&mut self, rng: &mut Rng) -> Vec<usize> {
        match self.mode {
            SamplerMode::Plain { batch_size } => {
                if self.cursor >= self.order.len() {
                    self.order.shuffle(rng);
                    self.cursor = 0;
                }
                let end = (self.cursor + batch_size).min(self.order.len());
                let batch = self.order[self.cursor..end].to_vec();
                self.cursor = end;
                batch
            }
            SamplerMode::Stratified { per_class } => {
                if self.batches_left == 0 {
                    for pool in &mut self.by_class {
                        pool.shuffle(rng);
                    }
                    self.class_cursors.iter_mut().for_each(|c| *c = 0);
                    self.batches_left = self.batches_per_epoch();
                }
                let mut batch = Vec::with_capacity(per_class * self.by_class.len());
                for (class, pool) in self.by_class.iter().enumerate() {
                    let cursor = &mut self.class_cursors[class];
                    for _ in 0..per_class {
                        if *cursor < pool.len() {
                            batch.push(pool[*cursor]);
                            *cursor += 1;
                        } else {
                            // Exhausted: resample with replacement so every
                            // batch keeps its exact per-class shape.
                            batch.push(pool[rng.random_range(0..pool.len())]);
                        }
                    }
                }
                self.batches_left -= 1;
                batch
            }
        }
    }
}

#[cfg(test)]
mod tests;

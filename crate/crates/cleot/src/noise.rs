//! Label-corruption models: class-transition matrices and their seeded
//! application to one-hot label batches.
//!
//! A [`TransitionMatrix`] `E` is row-stochastic with `E[i][j] = p(observed
//! class j | true class i)`. Symmetric noise spreads a flip probability
//! uniformly over the other classes; asymmetric noise follows an explicit
//! list of directed class pairs.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use rand::Rng as _;
use std::io::Write as _;
use std::path::Path;

/// Row-stochastic class-transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: Matrix,
}

impl TransitionMatrix {
    /// Validates squareness, entry range, and row sums (1 within 1e-12).
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.rows() == 0 || matrix.rows() != matrix.cols() {
            return Err(Error::Shape(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if matrix.as_slice().iter().any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v)) {
            return Err(Error::Contract(
                "transition probabilities must lie in [0, 1]".into(),
            ));
        }
        for i in 0..matrix.rows() {
            let sum: f64 = matrix.row(i).iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!(
                    "transition row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(TransitionMatrix { matrix })
    }

    /// Uniform label noise: with probability `p_e` the label flips, landing
    /// on each of the other `c - 1` classes with equal probability.
    pub fn symmetric(classes: usize, p_e: f64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Contract(format!(
                "symmetric noise needs at least 2 classes, got {classes}"
            )));
        }
        check_probability(p_e)?;
        let off = p_e / (classes - 1) as f64;
        let mut m = Matrix::filled(classes, classes, off);
        for i in 0..classes {
            m[(i, i)] = 1.0 - p_e;
        }
        TransitionMatrix::new(m)
    }

    /// Directed pair-flip noise: each source class keeps its label with
    /// probability `1 - p_e` and distributes `p_e` equally over its listed
    /// targets. Classes that appear in no pair keep their label always.
    pub fn asymmetric(classes: usize, spec: &FlipSpec) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Contract("need at least one class".into()));
        }
        let mut targets: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for &(src, dst) in &spec.pairs {
            if src >= classes || dst >= classes {
                return Err(Error::Contract(format!(
                    "flip pair {src}->{dst} references a class outside 0..{classes}"
                )));
            }
            targets[src].push(dst);
        }
        let mut m = Matrix::zeros(classes, classes);
        for (i, list) in targets.iter().enumerate() {
            if list.is_empty() {
                m[(i, i)] = 1.0;
            } else {
                m[(i, i)] = 1.0 - spec.probability;
                let share = spec.probability / list.len() as f64;
                for &dst in list {
                    m[(i, dst)] += share;
                }
            }
        }
        TransitionMatrix::new(m)
    }

    pub fn classes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Writes the class count on the first line, then one comma-separated
    /// row per class. Values round-trip bit-exactly through [`Self::read_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = format!("{}\n", self.classes());
        for i in 0..self.classes() {
            let row: Vec<String> = self.matrix.row(i).iter().map(|v| v.to_string()).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(text.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let name = path.display();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(format!("{name}:1"), "empty file"))?;
        let classes: usize = header.trim().parse().map_err(|_| {
            Error::parse(format!("{name}:1"), format!("expected a class count, got {header:?}"))
        })?;
        let mut m = Matrix::zeros(classes.max(1), classes.max(1));
        for i in 0..classes {
            let line = lines.next().ok_or_else(|| {
                Error::parse(format!("{name}:{}", i + 2), format!("expected {classes} rows"))
            })?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != classes {
                return Err(Error::parse(
                    format!("{name}:{}", i + 2),
                    format!("expected {classes} values, got {}", fields.len()),
                ));
            }
            for (j, field) in fields.iter().enumerate() {
                m[(i, j)] = field.trim().parse().map_err(|_| {
                    Error::parse(
                        format!("{name}:{}", i + 2),
                        format!("invalid probability {field:?}"),
                    )
                })?;
            }
        }
        if lines.next().is_some() {
            return Err(Error::parse(
                format!("{name}:{}", classes + 2),
                "trailing data after final row",
            ));
        }
        TransitionMatrix::new(m)
    }
}

fn check_probability(p_e: f64) -> Result<()> {
    if !p_e.is_finite() || !(0.0..1.0).contains(&p_e) {
        return Err(Error::Contract(format!(
            "noise probability must lie in [0, 1), got {p_e}"
        )));
    }
    Ok(())
}

/// Directed class-flip pairs sharing one flip probability.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipSpec {
    pairs: Vec<(usize, usize)>,
    probability: f64,
}

impl FlipSpec {
    /// Rejects self-pairs, duplicate pairs (their weight would be ambiguous),
    /// and probabilities outside `[0, 1)`.
    pub fn new(pairs: Vec<(usize, usize)>, probability: f64) -> Result<Self> {
        check_probability(probability)?;
        for (idx, &(src, dst)) in pairs.iter().enumerate() {
            if src == dst {
                return Err(Error::Contract(format!(
                    "flip pair {src}->{dst} maps a class to itself"
                )));
            }
            if pairs[..idx].contains(&(src, dst)) {
                return Err(Error::Contract(format!("duplicate flip pair {src}->{dst}")));
            }
        }
        Ok(FlipSpec { pairs, probability })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

/// Index of the single `1.0` entry of an exactly one-hot row.
pub(crate) fn one_hot_class(row: &[f64]) -> Option<usize> {
    let mut hot = None;
    for (k, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return None;
            }
            hot = Some(k);
        } else if v != 0.0 {
            return None;
        }
    }
    hot
}

/// Resamples every one-hot label from its class's transition row. Returns the
/// corrupted labels and the indices whose class changed. Deterministic given
/// the generator state.
pub fn apply_noise(
    labels: &Matrix,
    transition: &TransitionMatrix,
    rng: &mut Rng,
) -> Result<(Matrix, Vec<usize>)> {
    if labels.cols() != transition.classes() {
        return Err(Error::Shape(format!(
            "labels have {} classes but the transition matrix has {}",
            labels.cols(),
            transition.classes()
        )));
    }
    let mut noisy = Matrix::zeros(labels.rows(), labels.cols());
    let mut flipped = Vec::new();
    for i in 0..labels.rows() {
        let class = one_hot_class(labels.row(i)).ok_or_else(|| {
            Error::Contract(format!("label row {i} is not one-hot"))
        })?;
        let row = transition.matrix.row(class);
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        let mut drawn = row.len() - 1;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                drawn = j;
                break;
            }
        }
        noisy[(i, drawn)] = 1.0;
        if drawn != class {
            flipped.push(i);
        }
    }
    Ok((noisy, flipped))
}

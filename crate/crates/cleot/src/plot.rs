//! SVG renderings of two-dimensional experiments: decision boundaries over
//! a shaded prediction grid, and transport couplings drawn as graphs over
//! the samples. SVG is emitted directly as text, so outputs are diffable
//! and countable in tests without an image decoder.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::DenseNet;
use crate::train::accuracy;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;

/// Class colors (cycled when a problem has more than ten classes).
const PALETTE: &[(u8, u8, u8)] = &[
    (228, 26, 28),
    (55, 126, 184),
    (77, 175, 74),
    (152, 78, 163),
    (255, 127, 0),
    (166, 86, 40),
    (247, 129, 191),
    (153, 153, 153),
    (23, 190, 207),
    (188, 189, 34),
];

fn class_color(k: usize) -> (u8, u8, u8) {
    PALETTE[k % PALETTE.len()]
}

/// Mix class colors weighted by predicted probability.
fn blend(probs: &[f64]) -> String {
    let mut rgb = [0.0f64; 3];
    for (k, &p) in probs.iter().enumerate() {
        let (r, g, b) = class_color(k);
        rgb[0] += p * r as f64;
        rgb[1] += p * g as f64;
        rgb[2] += p * b as f64;
    }
    let to_byte = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", to_byte(rgb[0]), to_byte(rgb[1]), to_byte(rgb[2]))
}

fn hex(k: usize) -> String {
    let (r, g, b) = class_color(k);
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Axis-aligned data window with padding, mapped onto the SVG viewport.
struct Frame {
    min: [f64; 2],
    max: [f64; 2],
}

impl Frame {
    fn around(features: &Matrix) -> Frame {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for i in 0..features.rows() {
            for d in 0..2 {
                min[d] = min[d].min(features[(i, d)]);
                max[d] = max[d].max(features[(i, d)]);
            }
        }
        for d in 0..2 {
            let span = max[d] - min[d];
            let pad = if span > 0.0 { 0.08 * span } else { 1.0 };
            min[d] -= pad;
            max[d] += pad;
        }
        Frame { min, max }
    }

    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = (x - self.min[0]) / (self.max[0] - self.min[0]);
        let sy = (y - self.min[1]) / (self.max[1] - self.min[1]);
        // SVG y grows downward.
        (MARGIN + sx * (SIZE - 2.0 * MARGIN), SIZE - MARGIN - sy * (SIZE - 2.0 * MARGIN))
    }
}

fn check_planar(features: &Matrix) -> Result<()> {
    if features.cols() != 2 {
        return Err(Error::Contract(format!(
            "plots need two-dimensional features, got {}",
            features.cols()
        )));
    }
    if features.rows() == 0 {
        return Err(Error::Contract("plots need at least one sample".into()));
    }
    Ok(())
}

fn svg_open(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
}

/// Render a classifier's decision regions behind the labeled samples.
///
/// The feature window is tiled with `resolution x resolution` cells shaded
/// by the eval-mode prediction at each cell center; samples are drawn on
/// top colored by `labels`, and the accuracy of `net` against those labels
/// is printed in the corner.
pub fn plot_decision_boundary(
    net: &DenseNet,
    features: &Matrix,
    labels: &Matrix,
    resolution: usize,
) -> Result<String> {
    check_planar(features)?;
    if resolution == 0 {
        return Err(Error::Contract("grid resolution must be at least 1".into()));
    }
    let acc = accuracy(net, features, labels)?;
    let frame = Frame::around(features);

    let mut centers = Vec::with_capacity(resolution * resolution);
    let step = [
        (frame.max[0] - frame.min[0]) / resolution as f64,
        (frame.max[1] - frame.min[1]) / resolution as f64,
    ];
    for gy in 0..resolution {
        for gx in 0..resolution {
            centers.push(vec![
                frame.min[0] + (gx as f64 + 0.5) * step[0],
                frame.min[1] + (gy as f64 + 0.5) * step[1],
            ]);
        }
    }
    let probs = net.forward_eval(&Matrix::from_rows(&centers))?;

    let mut svg = String::new();
    svg_open(&mut svg);
    let cell_px = (SIZE - 2.0 * MARGIN) / resolution as f64;
    for gy in 0..resolution {
        for gx in 0..resolution {
            let fill = blend(probs.row(gy * resolution + gx));
            // Cell (gx, gy) covers data-space y rising with gy, so it sits
            // above the corresponding pixel row counted from the bottom.
            let px = MARGIN + gx as f64 * cell_px;
            let py = SIZE - MARGIN - (gy as f64 + 1.0) * cell_px;
            svg.push_str(&format!(
                "<rect class=\"cell\" x=\"{px:.2}\" y=\"{py:.2}\" width=\"{w:.2}\" height=\"{w:.2}\" fill=\"{fill}\"/>\n",
                w = cell_px + 0.05,
            ));
        }
    }
    for i in 0..features.rows() {
        let (px, py) = frame.to_px(features[(i, 0)], features[(i, 1)]);
        let class = labels
            .row(i)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        svg.push_str(&format!(
            "<circle class=\"pt\" cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.5\"/>\n",
            hex(class)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{y}\" font-family=\"monospace\" font-size=\"16\" fill=\"#b2182b\">accuracy {acc:.4}</text>\n",
        y = MARGIN - 12.0,
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render a coupling as a graph over the samples: a line for every
/// off-diagonal entry at or above `threshold`, stroke width proportional
/// to the entry, and a point marker for every diagonal entry at or above
/// it (a sample effectively keeping its own label).
pub fn plot_coupling_graph(coupling: &Matrix, features: &Matrix, threshold: f64) -> Result<String> {
    check_planar(features)?;
    let m = features.rows();
    if coupling.shape() != (m, m) {
        return Err(Error::Shape(format!(
            "coupling is {}x{} but there are {m} samples",
            coupling.rows(),
            coupling.cols()
        )));
    }
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::Contract(format!("mass threshold must be positive, got {threshold}")));
    }
    let mut peak = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let v = coupling[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Numeric(format!("coupling entry ({i}, {j}) is {v}")));
            }
            peak = peak.max(v);
        }
    }

    let frame = Frame::around(features);
    let mut svg = String::new();
    svg_open(&mut svg);
    for i in 0..m {
        for j in 0..m {
            if i == j || coupling[(i, j)] < threshold {
                continue;
            }
            let (x1, y1) = frame.to_px(features[(i, 0)], features[(i, 1)]);
            let (x2, y2) = frame.to_px(features[(j, 0)], features[(j, 1)]);
            let width = 3.0 * coupling[(i, j)] / peak;
            svg.push_str(&format!(
                "<line class=\"edge\" x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#444444\" stroke-width=\"{width:.4}\" stroke-opacity=\"0.6\"/>\n"
            ));
        }
    }
    for i in 0..m {
        if coupling[(i, i)] < threshold {
            continue;
        }
        let (px, py) = frame.to_px(features[(i, 0)], features[(i, 1)]);
        svg.push_str(&format!(
            "<circle class=\"loop\" cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"#1a1a1a\"/>\n"
        ));
    }
    for i in 0..m {
        let (px, py) = frame.to_px(features[(i, 0)], features[(i, 1)]);
        svg.push_str(&format!(
            "<circle class=\"pt\" cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"1.5\" fill=\"#999999\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

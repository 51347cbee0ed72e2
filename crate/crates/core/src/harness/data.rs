//! Labeled image and feature sets, plus a procedural handwritten-digit
//! generator for runs without the real dataset on disk.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

use crate::rng::{shuffle, stream, uniform_f64, Stream};
use crate::{Error, Result};

/// Grayscale images in `[0, 1]`, row-major, all `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
    pub labels: Vec<usize>,
}

impl ImageSet {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if pixels.len() != rows * cols * labels.len() {
            return Err(Error::dim("image pixels", rows * cols * labels.len(), pixels.len()));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain("image pixels", alloc::format!("{bad} not in [0, 1]")));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    /// First `n` images (or all of them).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[..n * self.rows * self.cols].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

/// Fixed-width feature vectors with integer labels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSet {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::dim("feature matrix", dim * labels.len(), features.len()));
        }
        if !crate::math::all_finite(&features) {
            return Err(Error::NonFinite("features"));
        }
        Ok(Self { dim, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

type Point = (f64, f64);

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Vec<Point> {
    let n = 18;
    (0..=n)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / n as f64).to_radians();
            (cx + rx * libm::cos(a), cy + ry * libm::sin(a))
        })
        .collect()
}

fn line(points: &[Point]) -> Vec<Point> {
    points.to_vec()
}

/// Stroke skeletons in the unit square, y pointing down.
fn strokes(digit: usize) -> Vec<Vec<Point>> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.21, 0.32, 0.0, 360.0)],
        1 => vec![line(&[(0.40, 0.26), (0.52, 0.15), (0.52, 0.85)])],
        2 => {
            let mut s = arc(0.5, 0.34, 0.2, 0.18, 190.0, 400.0);
            s.extend([(0.30, 0.85), (0.72, 0.85)]);
            vec![s]
        }
        3 => {
            let mut s = arc(0.49, 0.32, 0.19, 0.16, 200.0, 450.0);
            s.extend(arc(0.49, 0.67, 0.22, 0.18, 270.0, 520.0));
            vec![s]
        }
        4 => vec![line(&[(0.62, 0.85), (0.62, 0.15), (0.27, 0.62), (0.76, 0.62)])],
        5 => {
            let mut s = line(&[(0.70, 0.15), (0.34, 0.15), (0.31, 0.47)]);
            s.extend(arc(0.50, 0.64, 0.21, 0.20, 225.0, 490.0));
            vec![s]
        }
        6 => {
            let mut s = line(&[(0.66, 0.15), (0.46, 0.28)]);
            s.extend(arc(0.50, 0.66, 0.18, 0.19, 215.0, 575.0));
            vec![s]
        }
        7 => vec![line(&[(0.27, 0.15), (0.73, 0.15), (0.42, 0.85)])],
        8 => vec![
            arc(0.5, 0.32, 0.16, 0.16, 0.0, 360.0),
            arc(0.5, 0.67, 0.20, 0.18, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.34, 0.18, 0.18, 0.0, 360.0),
            line(&[(0.68, 0.36), (0.60, 0.85)]),
        ],
    }
}

fn seg_dist2(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    ex * ex + ey * ey
}

fn sym(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    (2.0 * uniform_f64(rng) - 1.0) * half_width
}

/// Renders one randomly deformed glyph of `digit` into `out` (`side × side`).
fn render(digit: usize, side: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let rot = sym(rng, 0.25);
    let shear = sym(rng, 0.3);
    let sx = 0.8 + 0.3 * uniform_f64(rng);
    let sy = 0.8 + 0.3 * uniform_f64(rng);
    let (tx, ty) = (sym(rng, 0.08), sym(rng, 0.08));
    let thick = 0.035 + 0.035 * uniform_f64(rng);
    let peak = 0.7 + 0.3 * uniform_f64(rng);
    let (c, s) = (libm::cos(rot), libm::sin(rot));

    let polys: Vec<Vec<Point>> = strokes(digit)
        .into_iter()
        .map(|poly| {
            poly.into_iter()
                .map(|(x, y)| {
                    let (x, y) = (x - 0.5 + sym(rng, 0.02), y - 0.5 + sym(rng, 0.02));
                    let (x, y) = (sx * (x + shear * y), sy * y);
                    (c * x - s * y + 0.5 + tx, s * x + c * y + 0.5 + ty)
                })
                .collect()
        })
        .collect();

    let px = 1.0 / side as f64;
    for r in 0..side {
        for col in 0..side {
            let p = ((col as f64 + 0.5) * px, (r as f64 + 0.5) * px);
            let mut d2 = f64::INFINITY;
            for poly in &polys {
                for w in poly.windows(2) {
                    d2 = d2.min(seg_dist2(p, w[0], w[1]));
                }
            }
            let coverage = ((thick + 0.5 * px - libm::sqrt(d2)) / px).clamp(0.0, 1.0);
            let mut v = peak * coverage;
            if rng.next_u32().is_multiple_of(64) {
                v = v.max(0.5 * uniform_f64(rng));
            }
            out[r * side + col] = v;
        }
    }
}

/// `n` synthetic 28×28 handwritten-style digits with balanced, shuffled labels.
pub fn synthetic_digits(n: usize, seed: u64) -> ImageSet {
    let side = 28;
    let mut rng = stream(seed, Stream::Dataset);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    shuffle(&mut labels, &mut rng);
    let mut pixels = vec![0.0; n * side * side];
    for (i, &label) in labels.iter().enumerate() {
        render(
            label,
            side,
            &mut rng,
            &mut pixels[i * side * side..(i + 1) * side * side],
        );
    }
    ImageSet {
        rows: side,
        cols: side,
        pixels,
        labels,
    }
}

/// Disjoint train and test sets drawn from one generator stream.
pub fn synthetic_digit_split(n_train: usize, n_test: usize, seed: u64) -> (ImageSet, ImageSet) {
    let all = synthetic_digits(n_train + n_test, seed);
    let n = all.rows * all.cols;
    let test = ImageSet {
        rows: all.rows,
        cols: all.cols,
        pixels: all.pixels[n_train * n..].to_vec(),
        labels: all.labels[n_train..].to_vec(),
    };
    (all.truncated(n_train), test)
}

//! Digit-like images and the top/bottom split into two views.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::ClusterAssignment;
use crate::rng::{self, ids};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageLayout {
    pub height: usize,
    pub width: usize,
}

/// Splits row-major images (`(H·W) × N`) into the top `H/2` pixel rows and
/// the bottom `H/2` pixel rows.
pub fn split_views(images: &Matrix, layout: ImageLayout) -> Result<MultiViewDataset> {
    let ImageLayout { height, width } = layout;
    if height % 2 != 0 {
        return Err(Error::shape(format!("image height {height} is odd")));
    }
    if height * width != images.rows() {
        return Err(Error::shape(format!(
            "{}x{} layout does not match {} pixels",
            height,
            width,
            images.rows()
        )));
    }
    let half = height / 2 * width;
    let top: Vec<usize> = (0..half).collect();
    let bottom: Vec<usize> = (half..images.rows()).collect();
    MultiViewDataset::new(vec![images.select_rows(&top), images.select_rows(&bottom)], None)
}

const GLYPHS: [[&str; 8]; 10] = [
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..",
    ],
    [
        "...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####..",
    ],
    [
        "..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######.",
    ],
    [
        "..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####..",
    ],
    [
        ".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", ".....#..",
    ],
    [
        ".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####..",
    ],
    [
        "..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####..",
    ],
    [
        ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#....",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####..",
    ],
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "..####..",
    ],
];

/// Generator for 8×8 digit-like images.
///
/// Each image is `amplitude · glyph(class) + Σ c_j · style_j + Σ local terms +
/// pixel noise`. The style patterns are smooth and span the whole image, so
/// they correlate the two halves independently of the class. Local patterns
/// live in one half only and are independent across halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitSpec {
    pub layout: ImageLayout,
    /// Number of classes, taken from the first `k` glyphs.
    pub k: usize,
    pub amplitude: f64,
    /// Standard deviation of the per-image multiplicative jitter on the glyph.
    pub amplitude_jitter: f64,
    pub style_patterns: usize,
    pub style_scale: f64,
    pub local_patterns: usize,
    pub local_scale: f64,
    pub pixel_noise: f64,
}

impl Default for DigitSpec {
    fn default() -> Self {
        Self {
            layout: ImageLayout { height: 8, width: 8 },
            k: 3,
            amplitude: 1.0,
            amplitude_jitter: 0.2,
            style_patterns: 1,
            style_scale: 0.25,
            local_patterns: 2,
            local_scale: 2.0,
            pixel_noise: 0.6,
        }
    }
}

fn glyph(class: usize) -> Vec<f64> {
    GLYPHS[class]
        .iter()
        .flat_map(|row| row.chars().map(|c| if c == '#' { 1.0 } else { 0.0 }))
        .collect()
}

/// Low-frequency cosine pattern `j` on an `h × w` grid, unit RMS.
fn cosine_pattern(j: usize, h: usize, w: usize) -> Vec<f64> {
    const FREQS: [(f64, f64); 8] = [
        (1.0, 0.0),
        (0.0, 1.0),
        (1.0, 1.0),
        (2.0, 0.0),
        (0.0, 2.0),
        (2.0, 1.0),
        (1.0, 2.0),
        (2.0, 2.0),
    ];
    let (fr, fc) = FREQS[j % FREQS.len()];
    let mut p: Vec<f64> = (0..h * w)
        .map(|idx| {
            let (r, c) = (idx / w, idx % w);
            (PI * fr * (r as f64 + 0.5) / h as f64).cos() * (PI * fc * (c as f64 + 0.5) / w as f64).cos()
        })
        .collect();
    let rms = (p.iter().map(|x| x * x).sum::<f64>() / p.len() as f64).sqrt();
    for x in &mut p {
        *x /= rms;
    }
    p
}

/// Draws `n_samples` images (`64 × N`) and their class labels.
pub fn synth_digits(spec: &DigitSpec, n_samples: usize, seed: u64) -> Result<(Matrix, ClusterAssignment)> {
    let ImageLayout { height, width } = spec.layout;
    if (height, width) != (8, 8) {
        return Err(Error::InvalidSpec("digit glyphs are 8x8".into()));
    }
    if spec.k < 2 || spec.k > GLYPHS.len() {
        return Err(Error::InvalidSpec(format!("digit classes must be in 2..=10, got {}", spec.k)));
    }
    if spec.style_patterns > 8 || spec.local_patterns > 8 {
        return Err(Error::InvalidSpec("at most 8 style and 8 local patterns".into()));
    }
    if n_samples < spec.k {
        return Err(Error::InvalidSpec(format!("need at least {} samples", spec.k)));
    }
    let pixels = height * width;
    let half = pixels / 2;
    let glyphs: Vec<Vec<f64>> = (0..spec.k).map(glyph).collect();
    let style: Vec<Vec<f64>> = (0..spec.style_patterns).map(|j| cosine_pattern(j, height, width)).collect();
    let local: Vec<Vec<f64>> = (0..spec.local_patterns)
        .map(|j| cosine_pattern(j, height / 2, width))
        .collect();

    let mut rng = rng::stream(seed, ids::LATENT);
    let mut noise_rng = rng::stream(seed, ids::VIEW_NOISE_BASE);
    let mut images = Matrix::zeros(pixels, n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    let mut col = vec![0.0; pixels];
    for i in 0..n_samples {
        let class = rng.random_range(0..spec.k);
        labels.push(class);
        let z: f64 = rng.sample(StandardNormal);
        let amp = spec.amplitude * (1.0 + spec.amplitude_jitter * z);
        for (p, g) in col.iter_mut().zip(&glyphs[class]) {
            *p = amp * g;
        }
        for s in &style {
            let c: f64 = rng.sample::<f64, _>(StandardNormal) * spec.style_scale;
            for (p, v) in col.iter_mut().zip(s) {
                *p += c * v;
            }
        }
        for offset in [0, half] {
            for l in &local {
                let c: f64 = rng.sample::<f64, _>(StandardNormal) * spec.local_scale;
                for (p, v) in col[offset..offset + half].iter_mut().zip(l) {
                    *p += c * v;
                }
            }
        }
        for p in col.iter_mut() {
            let z: f64 = noise_rng.sample(StandardNormal);
            *p += spec.pixel_noise * z;
        }
        images.set_column(i, &col);
    }
    Ok((images, ClusterAssignment::new(labels, spec.k)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_split() {
        // Columns are samples; pixel order is row-major (a, b, c, d).
        let img = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let ds = split_views(&img, ImageLayout { height: 2, width: 2 }).unwrap();
        assert_eq!(ds.views[0], Matrix::from_rows(&[&[1.0], &[2.0]]));
        assert_eq!(ds.views[1], Matrix::from_rows(&[&[3.0], &[4.0]]));
    }

    #[test]
    fn zero_images_split_to_zero_views() {
        let ds = split_views(&Matrix::zeros(16, 3), ImageLayout { height: 4, width: 4 }).unwrap();
        assert_eq!(ds.views[0], Matrix::zeros(8, 3));
        assert_eq!(ds.views[1], Matrix::zeros(8, 3));
    }

    #[test]
    fn split_round_trips() {
        let (img, _) = synth_digits(&DigitSpec::default(), 20, 1).unwrap();
        let ds = split_views(&img, ImageLayout { height: 8, width: 8 }).unwrap();
        assert_eq!(Matrix::vcat(&[&ds.views[0], &ds.views[1]]).unwrap(), img);
    }

    #[test]
    fn odd_height_is_rejected() {
        let r = split_views(&Matrix::zeros(6, 2), ImageLayout { height: 3, width: 2 });
        assert!(matches!(r, Err(Error::InvalidShape(_))));
    }

    #[test]
    fn glyphs_are_distinct() {
        for a in 0..10 {
            assert_eq!(glyph(a).len(), 64);
            for b in 0..a {
                assert_ne!(glyph(a), glyph(b));
            }
        }
    }

    #[test]
    fn digits_are_deterministic() {
        let s = DigitSpec::default();
        assert_eq!(synth_digits(&s, 30, 2).unwrap(), synth_digits(&s, 30, 2).unwrap());
    }
}

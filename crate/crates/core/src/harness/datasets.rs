use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::HarnessError;
use crate::classifier::{LabeledDataset, Split};
use crate::rng;

/// Built-in synthetic datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// Two isotropic Gaussians in the unit square, means 0.5 apart, std 0.05.
    GaussMix2d,
    /// Two noisy concentric rings in the unit square.
    Rings2d,
    /// Ten low-contrast 8x8 digit glyphs with jitter and pixel noise.
    SyntheticDigits8x8,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::GaussMix2d => "gauss-mix-2d",
            DatasetKind::Rings2d => "rings-2d",
            DatasetKind::SyntheticDigits8x8 => "synthetic-digits-8x8",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            DatasetKind::GaussMix2d | DatasetKind::Rings2d => 2,
            DatasetKind::SyntheticDigits8x8 => 10,
        }
    }

    pub fn input_shape(self) -> Vec<usize> {
        match self {
            DatasetKind::GaussMix2d | DatasetKind::Rings2d => vec![2],
            DatasetKind::SyntheticDigits8x8 => vec![64],
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gauss-mix-2d" => Ok(DatasetKind::GaussMix2d),
            "rings-2d" => Ok(DatasetKind::Rings2d),
            "synthetic-digits-8x8" => Ok(DatasetKind::SyntheticDigits8x8),
            other => Err(HarnessError::Dataset(format!("unknown dataset kind '{other}'"))),
        }
    }
}

const GLYPHS: [[&str; 8]; 10] = [
    [
        "..####..", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", "..####..", "........",
    ],
    [
        "...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "..####..", "........",
    ],
    [
        "..####..", ".##..##.", ".....##.", "....##..", "...##...", "..##....", ".######.", "........",
    ],
    [
        "..####..", ".##..##.", ".....##.", "...###..", ".....##.", ".##..##.", "..####..", "........",
    ],
    [
        "....##..", "...###..", "..#.##..", ".#..##..", ".######.", "....##..", "....##..", "........",
    ],
    [
        ".######.", ".##.....", ".#####..", ".....##.", ".....##.", ".##..##.", "..####..", "........",
    ],
    [
        "..####..", ".##.....", ".#####..", ".##..##.", ".##..##.", ".##..##.", "..####..", "........",
    ],
    [
        ".######.", ".....##.", "....##..", "...##...", "...##...", "...##...", "...##...", "........",
    ],
    [
        "..####..", ".##..##.", ".##..##.", "..####..", ".##..##.", ".##..##.", "..####..", "........",
    ],
    [
        "..####..", ".##..##.", ".##..##.", "..#####.", ".....##.", "....##..", "..###...", "........",
    ],
];

/// Background level, stroke contrast range, pixel noise and maximum shift
/// (in pixels, each axis) of the digits.
const DIGIT_BACKGROUND: f64 = 0.35;
const DIGIT_CONTRAST: (f64, f64) = (0.22, 0.32);
const DIGIT_NOISE: f64 = 0.08;
const DIGIT_SHIFT: i32 = 1;

fn sample_point<R: Rng>(kind: DatasetKind, class: usize, r: &mut R) -> Vec<f64> {
    let normal = |r: &mut R| -> f64 { r.sample(StandardNormal) };
    match kind {
        DatasetKind::GaussMix2d => {
            let cx = if class == 0 { 0.25 } else { 0.75 };
            vec![cx + 0.05 * normal(r), 0.5 + 0.05 * normal(r)]
        }
        DatasetKind::Rings2d => {
            let radius = if class == 0 { 0.15 } else { 0.35 };
            let theta = r.random::<f64>() * std::f64::consts::TAU;
            let rr = radius + 0.03 * normal(r);
            vec![0.5 + rr * theta.cos(), 0.5 + rr * theta.sin()]
        }
        DatasetKind::SyntheticDigits8x8 => {
            let glyph = &GLYPHS[class];
            let dx = r.random_range(-DIGIT_SHIFT..=DIGIT_SHIFT);
            let dy = r.random_range(-DIGIT_SHIFT..=DIGIT_SHIFT);
            let contrast = DIGIT_CONTRAST.0 + (DIGIT_CONTRAST.1 - DIGIT_CONTRAST.0) * r.random::<f64>();
            let mut img = Vec::with_capacity(64);
            for row in 0..8i32 {
                for col in 0..8i32 {
                    let (sr, sc) = (row - dy, col - dx);
                    let on = (0..8).contains(&sr)
                        && (0..8).contains(&sc)
                        && glyph[sr as usize].as_bytes()[sc as usize] == b'#';
                    let base = DIGIT_BACKGROUND + if on { contrast } else { 0.0 };
                    img.push(base + DIGIT_NOISE * normal(r));
                }
            }
            img
        }
    }
    .into_iter()
    .map(|v| v.clamp(0.0, 1.0))
    .collect()
}

/// Draws `train_per_class` training and `test_per_class` test examples of
/// every class. Examples are stored class-interleaved, training examples
/// first.
pub fn generate_toy_dataset(
    kind: DatasetKind,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset<f64>, HarnessError> {
    if train_per_class < 10 || test_per_class < 10 {
        return Err(HarnessError::Dataset(format!(
            "need at least 10 examples per class and split, got {train_per_class} train / {test_per_class} test"
        )));
    }
    let classes = kind.classes();
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    for (split, count, tag) in [(Split::Train, train_per_class, 0u64), (Split::Test, test_per_class, 1)] {
        let mut r = rng::stream(seed, kind.as_str(), &[tag]);
        for _ in 0..count {
            for class in 0..classes {
                inputs.push(sample_point(kind, class, &mut r));
                labels.push(class);
                splits.push(split);
            }
        }
    }
    Ok(LabeledDataset::new(
        kind.input_shape(),
        classes,
        inputs,
        labels,
        splits,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_validated() {
        let a = generate_toy_dataset(DatasetKind::Rings2d, 10, 10, 3).unwrap();
        let b = generate_toy_dataset(DatasetKind::Rings2d, 10, 10, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(Split::Test), vec![10, 10]);
        assert!(generate_toy_dataset(DatasetKind::GaussMix2d, 0, 10, 3).is_err());
        assert!("moons".parse::<DatasetKind>().is_err());
    }

    #[test]
    fn glyphs_are_distinct() {
        for (a, ga) in GLYPHS.iter().enumerate() {
            assert!(GLYPHS[a + 1..].iter().all(|gb| gb != ga));
        }
        let d = generate_toy_dataset(DatasetKind::SyntheticDigits8x8, 10, 10, 1).unwrap();
        assert_eq!(d.dim(), 64);
        assert_eq!(d.classes(), 10);
    }
}

//! Four-way reflected pattern with additive Gaussian noise.
//!
//! Every sample is one of four transforms of a fixed 32×32 prototype plus
//! i.i.d. zero-mean pixel noise. Transforms 0 and 2 form class 0, 1 and 3
//! form class 1, so the data carry exactly 2 bits of structure and 1 bit
//! of label.

use std::f64::consts::{E, PI};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::idx::{write_idx_images, write_idx_labels, IdxDtype};
use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const SIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub side: usize,
    pub per_rotation_count: usize,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            side: SIDE,
            per_rotation_count: 64,
            noise_variance: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.side != SIDE {
            return Err(Error::InvalidArgument(format!("side must be {SIDE}, got {}", self.side)));
        }
        if self.per_rotation_count == 0 {
            return Err(Error::InvalidArgument("per_rotation_count must be at least 1".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be finite and non-negative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationKind {
    Identity,
    /// Reflection about the secondary (top-right to bottom-left) diagonal.
    AntiTranspose,
    FlipAboutVerticalAxis,
    FlipAboutHorizontalAxis,
}

impl RotationKind {
    /// In sample order: Image0..Image3.
    pub const ALL: [RotationKind; 4] = [
        RotationKind::Identity,
        RotationKind::AntiTranspose,
        RotationKind::FlipAboutVerticalAxis,
        RotationKind::FlipAboutHorizontalAxis,
    ];

    pub fn label(self) -> usize {
        match self {
            RotationKind::Identity | RotationKind::FlipAboutVerticalAxis => 0,
            RotationKind::AntiTranspose | RotationKind::FlipAboutHorizontalAxis => 1,
        }
    }

    /// Applies the transform to a square image.
    pub fn apply(self, img: &DenseMatrix) -> DenseMatrix {
        let n = img.rows();
        assert_eq!(n, img.cols(), "transforms act on square images");
        let mut out = DenseMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let v = match self {
                    RotationKind::Identity => img.get(r, c),
                    RotationKind::AntiTranspose => img.get(n - 1 - c, n - 1 - r),
                    RotationKind::FlipAboutVerticalAxis => img.get(r, n - 1 - c),
                    RotationKind::FlipAboutHorizontalAxis => img.get(n - 1 - r, c),
                };
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Two-tone prototype: a bright 11×11 block (rows 4–14, columns 18–28) on a
/// dark background, offset from every symmetry axis so that all four
/// transforms differ.
pub fn base_image() -> DenseMatrix {
    let mut img = DenseMatrix::zeros(SIDE, SIDE);
    for r in 4..=14 {
        for c in 18..=28 {
            img.set(r, c, 1.0);
        }
    }
    img
}

/// The four noiseless transformed prototypes (flattened), labelled by class.
pub fn prototypes() -> Dataset {
    let base = base_image();
    let rows: Vec<Vec<f64>> = RotationKind::ALL.iter().map(|r| r.apply(&base).into_vec()).collect();
    let labels = RotationKind::ALL.iter().map(|r| r.label()).collect();
    Dataset::new(
        DenseMatrix::from_rows(&rows).expect("equal-length rows"),
        labels,
        2,
        "synthetic prototypes",
    )
    .expect("valid prototypes")
}

/// `4·per_rotation_count` samples, one transform per consecutive quarter.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let protos = prototypes();
    let m = SIDE * SIDE;
    let j = 4 * spec.per_rotation_count;
    let mut data = Vec::with_capacity(j * m);
    let mut labels = Vec::with_capacity(j);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_variance.sqrt()).expect("validated variance");
    for (q, rot) in RotationKind::ALL.iter().enumerate() {
        let proto = protos.inputs.row(q);
        for _ in 0..spec.per_rotation_count {
            if spec.noise_variance > 0.0 {
                data.extend(proto.iter().map(|&p| p + noise.sample(&mut rng)));
            } else {
                data.extend_from_slice(proto);
            }
            labels.push(rot.label());
        }
    }
    Dataset::new(
        DenseMatrix::new(j, m, data)?,
        labels,
        2,
        format!(
            "synthetic side={} per_rotation={} sigma2={} seed={}",
            spec.side, spec.per_rotation_count, spec.noise_variance, spec.seed
        ),
    )
}

/// Entropy of the synthetic data in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBudget {
    pub feature_bits: f64,
    /// `½·log₂(2πeσ²)`; `-inf` when σ² = 0.
    pub noise_bits_per_sample: f64,
    pub total_bits: f64,
    pub label_bits: f64,
}

pub fn entropy_budget(spec: &SyntheticSpec) -> EntropyBudget {
    let feature_bits = (RotationKind::ALL.len() as f64).log2();
    let noise_bits_per_sample = if spec.noise_variance > 0.0 {
        0.5 * (2.0 * PI * E * spec.noise_variance).log2()
    } else {
        f64::NEG_INFINITY
    };
    EntropyBudget {
        feature_bits,
        noise_bits_per_sample,
        total_bits: feature_bits + noise_bits_per_sample,
        label_bits: 1.0,
    }
}

/// Writes `<stem>-images.idx` (f64 payload), `<stem>-labels.idx` and a
/// `<stem>.json` sidecar with the spec and its entropy budget.
pub fn export_synthetic(spec: &SyntheticSpec, data: &Dataset, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_idx_images(data, &[SIDE, SIDE], IdxDtype::F64, dir.join(format!("{stem}-images.idx")))?;
    write_idx_labels(&data.labels, dir.join(format!("{stem}-labels.idx")))?;
    let sidecar = serde_json::json!({
        "spec": spec,
        "entropy_budget": entropy_budget(spec),
        "samples": data.len(),
        "class_counts": data.class_counts(),
    });
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

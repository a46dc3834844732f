//! Labelled datasets: the rotated-pattern synthetic set and IDX files.

mod idx;
mod synthetic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use idx::{
    load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxDtype, IMAGES_MAGIC_F64,
    IMAGES_MAGIC_U8, LABELS_MAGIC,
};
pub use synthetic::{
    base_image, entropy_budget, export_synthetic, generate_synthetic, prototypes, EntropyBudget, RotationKind,
    SyntheticSpec, SIDE,
};

use crate::error::{shape_err, Error, Result};
use crate::matrix::DenseMatrix;

/// `J` samples of `M` features with class labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub provenance: String,
}

impl Dataset {
    pub fn new(inputs: DenseMatrix, labels: Vec<usize>, num_classes: usize, provenance: impl Into<String>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(shape_err("Dataset::new", format!("{} labels", inputs.rows()), labels.len()));
        }
        if inputs.rows() == 0 {
            return Err(Error::InvalidArgument("dataset must contain at least one sample".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {num_classes})")));
        }
        if !inputs.is_finite() {
            return Err(Error::NonFinite("dataset inputs".into()));
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize], note: &str) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            provenance: format!("{} | {note}", self.provenance),
        }
    }
}

/// `n` samples drawn without replacement, in shuffled order.
pub fn subset(data: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n > data.len() {
        return Err(Error::InvalidArgument(format!(
            "subset size {n} must lie in [1, {}]",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.truncate(n);
    Ok(data.select(&order, &format!("subset n={n} seed={seed}")))
}

/// Shuffled split with `round(fraction·J)` training samples.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let n_train = (fraction * data.len() as f64).round() as usize;
    if n_train == 0 || n_train == data.len() {
        return Err(Error::InvalidArgument(format!(
            "split of {} samples at {fraction} leaves an empty side",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = order.split_at(n_train);
    Ok((
        data.select(a, &format!("train split {fraction} seed={seed}")),
        data.select(b, &format!("test split {fraction} seed={seed}")),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten() -> Dataset {
        let inputs = DenseMatrix::new(10, 1, (0..10).map(|i| i as f64).collect()).unwrap();
        Dataset::new(inputs, (0..10).map(|i| i % 3).collect(), 3, "ten").unwrap()
    }

    #[test]
    fn full_subset_is_a_permutation() {
        let d = ten();
        let s = subset(&d, 10, 4).unwrap();
        let mut seen: Vec<usize> = s.inputs.as_slice().iter().map(|&v| v as usize).collect();
        for (row, &l) in s.inputs.row_iter().zip(&s.labels) {
            assert_eq!(d.labels[row[0] as usize], l);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn subset_bounds() {
        assert_eq!(subset(&ten(), 1, 0).unwrap().len(), 1);
        assert!(subset(&ten(), 11, 0).is_err());
        assert!(subset(&ten(), 0, 0).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (a, b) = split(&ten(), 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split(&ten(), 0.8, 3).unwrap().0, a);
        assert!(split(&ten(), 1.0, 3).is_err());
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let inputs = DenseMatrix::zeros(2, 1);
        assert!(Dataset::new(inputs, vec![0, 2], 2, "x").is_err());
    }
}

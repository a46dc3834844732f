//! Diagnostics for whether the activations of a layer behave like i.i.d.
//! samples: Pearson correlations between activation vectors of different
//! inputs, and the weight-level conditions that independent, identically
//! distributed neurons would have to satisfy.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::matrix::DenseMatrix;
use crate::par::Exec;

/// Pearson correlation of two equally long vectors.
pub fn sample_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err("sample_correlation", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two entries".into()));
    }
    let za = standardize(a).ok_or(Error::ConstantVector("sample correlation"))?;
    let zb = standardize(b).ok_or(Error::ConstantVector("sample correlation"))?;
    Ok(dot(&za, &zb).clamp(-1.0, 1.0))
}

/// Centres `v` and scales it to unit Euclidean norm, so that the dot
/// product of two standardized vectors is their correlation.
fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let centred: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = dot(&centred, &centred).sqrt();
    if !(norm > 1e-12 * (1.0 + mean.abs()) * (v.len() as f64).sqrt()) {
        return None;
    }
    Some(centred.into_iter().map(|x| x / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standardized rows plus the indices of rows that were constant.
fn standardized_rows(activations: &DenseMatrix) -> (DenseMatrix, Vec<bool>) {
    let mut z = DenseMatrix::zeros(activations.rows(), activations.cols());
    let mut ok = Vec::with_capacity(activations.rows());
    for (r, row) in activations.row_iter().enumerate() {
        match standardize(row) {
            Some(s) => {
                z.row_mut(r).copy_from_slice(&s);
                ok.push(true);
            }
            None => ok.push(false),
        }
    }
    (z, ok)
}

/// Stable ordering that places samples with equal labels next to each
/// other, classes in ascending order.
pub fn label_order(labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);
    order
}

pub const DEFAULT_MATRIX_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    /// `|r|` between samples `order[a]` and `order[b]`.
    pub abs_r: DenseMatrix,
    pub order: Vec<usize>,
    pub sorted_labels: Vec<usize>,
    /// Samples whose activation vector was constant; their off-diagonal
    /// entries are left at 0.
    pub constant_rows: usize,
}

/// `J × J` matrix of absolute sample correlations with rows and columns
/// grouped by label. Refuses more than `cap` samples.
pub fn correlation_matrix(activations: &DenseMatrix, labels: &[usize], cap: usize, exec: Exec) -> Result<CorrelationMatrix> {
    let j = activations.rows();
    if labels.len() != j {
        return Err(shape_err("label vector", format!("{j} labels"), labels.len()));
    }
    if j < 2 {
        return Err(Error::InvalidArgument("correlation matrix needs at least two samples".into()));
    }
    if j > cap {
        return Err(Error::InvalidArgument(format!(
            "{j} samples exceed the correlation matrix cap of {cap}"
        )));
    }
    let order = label_order(labels);
    let (z, ok) = standardized_rows(&activations.select_rows(&order));
    let blocks = exec.map_chunks(j, 128, |range| {
        let block = z.select_rows(&range.clone().collect::<Vec<_>>());
        block.matmul_t(&z)
    });
    let mut abs_r = DenseMatrix::zeros(j, j);
    let mut row = 0;
    for b in blocks {
        let b = b?;
        for r in 0..b.rows() {
            for c in 0..j {
                let v = if row == c {
                    1.0
                } else if ok[row] && ok[c] {
                    b.get(r, c).abs().min(1.0)
                } else {
                    0.0
                };
                abs_r.set(row, c, v);
            }
            row += 1;
        }
    }
    // Enforce exact symmetry regardless of summation order inside gemm.
    for r in 0..j {
        for c in r + 1..j {
            let v = abs_r.get(r, c);
            abs_r.set(c, r, v);
        }
    }
    Ok(CorrelationMatrix {
        sorted_labels: order.iter().map(|&i| labels[i]).collect(),
        order,
        abs_r,
        constant_rows: ok.iter().filter(|&&b| !b).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgCorrelations {
    pub r_same: f64,
    pub r_diff: f64,
    pub same_pairs: u64,
    pub diff_pairs: u64,
    /// Samples left out because their activation vector was constant.
    pub constant_rows: usize,
}

/// Mean signed correlation over all pairs `j < j'` with equal labels and
/// over all pairs with different labels.
pub fn avg_correlations(activations: &DenseMatrix, labels: &[usize], exec: Exec) -> Result<AvgCorrelations> {
    let j = activations.rows();
    if labels.len() != j {
        return Err(shape_err("label vector", format!("{j} labels"), labels.len()));
    }
    let (z, ok) = standardized_rows(activations);
    let keep: Vec<usize> = (0..j).filter(|&i| ok[i]).collect();
    let z = z.select_rows(&keep);
    let labels: Vec<usize> = keep.iter().map(|&i| labels[i]).collect();
    let n = keep.len();

    let blocks = exec.map_chunks(n, 128, |range| -> Result<(f64, u64, f64, u64)> {
        let block = z.select_rows(&range.clone().collect::<Vec<_>>());
        let prod = block.matmul_t(&z)?;
        let (mut s_same, mut n_same, mut s_diff, mut n_diff) = (0.0, 0u64, 0.0, 0u64);
        for (bi, i) in range.enumerate() {
            let row = prod.row(bi);
            for k in i + 1..n {
                let r = row[k].clamp(-1.0, 1.0);
                if labels[i] == labels[k] {
                    s_same += r;
                    n_same += 1;
                } else {
                    s_diff += r;
                    n_diff += 1;
                }
            }
        }
        Ok((s_same, n_same, s_diff, n_diff))
    });
    let (mut s_same, mut n_same, mut s_diff, mut n_diff) = (0.0, 0u64, 0.0, 0u64);
    for b in blocks {
        let (a, b, c, d) = b?;
        s_same += a;
        n_same += b;
        s_diff += c;
        n_diff += d;
    }
    if n_same == 0 {
        return Err(Error::NoPairs("same-label"));
    }
    if n_diff == 0 {
        return Err(Error::NoPairs("different-label"));
    }
    Ok(AvgCorrelations {
        r_same: s_same / n_same as f64,
        r_diff: s_diff / n_diff as f64,
        same_pairs: n_same,
        diff_pairs: n_diff,
        constant_rows: j - n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceCondition {
    /// `|⟨ω_k, ω_k'⟩|` for every pair of neurons.
    pub gram_abs: DenseMatrix,
    /// Mean of the strictly upper triangle of `gram_abs`.
    pub mean_offdiag: f64,
}

/// Orthogonality check on a `fan_in × K` weight matrix whose columns are
/// the neurons' weight vectors.
pub fn independence_condition(weights: &DenseMatrix) -> Result<IndependenceCondition> {
    let k = weights.cols();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("independence check needs at least two neurons, got {k}")));
    }
    let gram_abs = weights.t_matmul(weights)?.map(f64::abs);
    let mut sum = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            sum += gram_abs.get(a, b);
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(IndependenceCondition {
        gram_abs,
        mean_offdiag: sum / pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdenticalCondition {
    /// `(Σ_n (ω_nk − ω_nk'), b_k − b_k')` for every pair `k < k'`.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of a line through the origin; `None` when every
    /// abscissa is zero.
    pub fitted_slope: Option<f64>,
    pub expected_slope: f64,
}

/// Neurons `k` and `k'` with inputs of common mean `E(F)` can only be
/// identically distributed if `b_k − b_k' = −E(F)·Σ_n (ω_nk − ω_nk')`.
pub fn identical_condition(weights: &DenseMatrix, biases: &[f64], mean_prev_activation: f64) -> Result<IdenticalCondition> {
    let k = weights.cols();
    if biases.len() != k {
        return Err(shape_err("bias vector", format!("{k} biases"), biases.len()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("identical-distribution check needs at least two neurons, got {k}")));
    }
    let col_sums = weights.column_sums();
    let mut samples = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            samples.push((col_sums[a] - col_sums[b], biases[a] - biases[b]));
        }
    }
    let sxx: f64 = samples.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = samples.iter().map(|(x, y)| x * y).sum();
    Ok(IdenticalCondition {
        fitted_slope: (sxx > 0.0).then(|| sxy / sxx),
        expected_slope: -mean_prev_activation,
        samples,
    })
}

/// Correlation summary of one layer at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub epoch: usize,
    pub layer: usize,
    pub r_same: f64,
    pub r_diff: f64,
    pub constant_rows: usize,
}

/// Weight-level summary of one layer at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConditionReport {
    pub epoch: usize,
    pub layer: usize,
    pub r_f: f64,
    pub fitted_slope: Option<f64>,
    pub expected_slope: f64,
}

fn lf_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_pairs_csv<W: Write>(samples: &[(f64, f64)], w: W) -> Result<()> {
    let mut out = lf_writer(w);
    out.write_record(["weight_sum_diff", "bias_diff"])?;
    for (x, y) in samples {
        out.write_record([x.to_string(), y.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix_csv<W: Write>(m: &DenseMatrix, w: W) -> Result<()> {
    let mut out = lf_writer(w);
    out.write_record((0..m.cols()).map(|c| format!("c{c}")))?;
    for row in m.row_iter() {
        out.write_record(row.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Binary greyscale PGM; values in `[0, 1]` map to black..white.
pub fn write_pgm(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    bytes.extend(m.as_slice().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_pins() {
        assert!((sample_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        let a = [1.0, -2.0, 0.5, 0.5];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((sample_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((sample_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(sample_correlation(&[2.0; 4], &a), Err(Error::ConstantVector(_))));
    }

    #[test]
    fn label_order_is_stable() {
        assert_eq!(label_order(&[1, 0, 1, 0, 2]), vec![1, 3, 0, 2, 4]);
    }

    #[test]
    fn regression_through_origin_recovers_constructed_slope() {
        let w = DenseMatrix::from_rows(&[[0.3, -0.2, 1.0], [0.1, 0.4, -0.5]]).unwrap();
        let sums = w.column_sums();
        let biases: Vec<f64> = sums.iter().map(|s| -0.5 * s + 2.0).collect();
        let r = identical_condition(&w, &biases, 0.5).unwrap();
        assert!((r.fitted_slope.unwrap() + 0.5).abs() < 1e-9);
        assert_eq!(r.expected_slope, -0.5);
        assert_eq!(r.samples.len(), 3);

        let flat = DenseMatrix::filled(3, 2, 0.2);
        assert_eq!(identical_condition(&flat, &[0.0, 1.0], 0.5).unwrap().fitted_slope, None);
    }

    #[test]
    fn pgm_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let m = DenseMatrix::from_rows(&[[0.0, 1.0, 0.5]]).unwrap();
        write_pgm(&m, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 255, 128]);
    }
}

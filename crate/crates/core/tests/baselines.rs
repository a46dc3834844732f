use infoflow::baselines::*;
use infoflow::{DenseMatrix, Exec};
use proptest::prelude::*;

fn h(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .map(|&c| c as f64 / n as f64)
        .map(|p| -p * p.log2())
        .sum()
}

#[test]
fn distinct_states_give_log_j() {
    let a = DenseMatrix::new(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
    let cfg = BinningConfig {
        num_bins: 5,
        range_mode: RangeMode::PerLayerMinMax,
    };
    let r = binned_mi(&a, &[0, 0, 1, 1, 1], &cfg).unwrap();
    assert!((r.i_x - 5f64.log2()).abs() < 1e-12);
    // Every state is unique, so the label is fully determined by T.
    assert!((r.i_y - h(&[2, 3])).abs() < 1e-12);
}

#[test]
fn identical_rows_give_zero() {
    let a = DenseMatrix::filled(6, 3, 0.25);
    let cfg = BinningConfig {
        num_bins: 30,
        range_mode: RangeMode::Fixed { lo: 0.0, hi: 1.0 },
    };
    let r = binned_mi(&a, &[0, 1, 0, 1, 0, 1], &cfg).unwrap();
    assert_eq!((r.i_x, r.i_y), (0.0, 0.0));
}

#[test]
fn six_sample_enumeration() {
    // Two neurons, range [0, 1], two bins split at 0.5.
    let a = DenseMatrix::from_rows(&[
        [0.1, 0.2], // (0,0)
        [0.3, 0.9], // (0,1)
        [0.7, 0.1], // (1,0)
        [0.2, 0.4], // (0,0)
        [0.6, 0.8], // (1,1)
        [0.9, 0.3], // (1,0)
    ])
    .unwrap();
    let labels = [0, 0, 1, 1, 1, 0];
    let cfg = BinningConfig {
        num_bins: 2,
        range_mode: RangeMode::Fixed { lo: 0.0, hi: 1.0 },
    };
    let r = binned_mi(&a, &labels, &cfg).unwrap();
    // States: (0,0)×2, (0,1)×1, (1,0)×2, (1,1)×1.
    let h_t = h(&[2, 1, 2, 1]);
    // Label 0: (0,0), (0,1), (1,0). Label 1: (1,0), (0,0), (1,1).
    let h_t_y = 0.5 * h(&[1, 1, 1]) + 0.5 * h(&[1, 1, 1]);
    assert!((r.i_x - h_t).abs() < 1e-12);
    assert!((r.i_y - (h_t - h_t_y)).abs() < 1e-12);
}

#[test]
fn monotone_transform_preserving_bins_is_invariant() {
    let a = DenseMatrix::from_rows(&[[0.05, 0.9], [0.45, 0.1], [0.55, 0.6], [0.95, 0.35]]).unwrap();
    let cfg = BinningConfig {
        num_bins: 2,
        range_mode: RangeMode::Fixed { lo: 0.0, hi: 1.0 },
    };
    // Pushes values towards the bin edges without crossing 0.5.
    let b = a.map(|v| if v < 0.5 { v * v } else { 1.0 - (1.0 - v) * (1.0 - v) });
    let labels = [0, 1, 0, 1];
    assert_eq!(binned_mi(&a, &labels, &cfg).unwrap(), binned_mi(&b, &labels, &cfg).unwrap());
}

/// Differential entropy of a 1-D equal-weight Gaussian mixture by
/// trapezoidal integration around each component.
fn mixture_entropy_1d(centers: &[f64], var: f64) -> f64 {
    let sigma = var.sqrt();
    let density = |t: f64| {
        centers
            .iter()
            .map(|c| (-(t - c).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
            .sum::<f64>()
            / centers.len() as f64
    };
    let steps = 20_000;
    let mut total = 0.0;
    for &c in centers {
        let (lo, hi) = (c - 12.0 * sigma, c + 12.0 * sigma);
        let dt = (hi - lo) / steps as f64;
        for k in 0..=steps {
            let t = lo + k as f64 * dt;
            let p = density(t);
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            if p > 0.0 {
                total -= w * p * p.log2() * dt;
            }
        }
    }
    total
}

#[test]
fn separated_rows_saturate_at_log_j() {
    let var = 1e-6;
    let centers = [0.0, 1.0, 2.0];
    let a = DenseMatrix::new(3, 1, centers.to_vec()).unwrap();
    let r = kde_mi(&a, &[0, 1, 2], &KdeConfig { noise_variance: var }).unwrap();
    let noise = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).log2();
    let oracle = mixture_entropy_1d(&centers, var) - noise;
    assert!((oracle - 3f64.log2()).abs() < 0.01, "oracle {oracle}");
    assert!((r.i_x - oracle).abs() < 0.01, "{} vs {oracle}", r.i_x);
    assert!((r.i_x - 3f64.log2()).abs() < 0.01);
    assert!((r.i_y - 3f64.log2()).abs() < 0.01);
}

#[test]
fn huge_variance_washes_out() {
    let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.2, 0.9]]).unwrap();
    let r = kde_mi(&a, &[0, 1, 0, 1], &KdeConfig { noise_variance: 1e6 }).unwrap();
    assert!(r.i_x < 1e-6 && r.i_x >= 0.0);
}

#[test]
fn kde_needs_two_samples() {
    let a = DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap();
    assert!(kde_mi(&a, &[0], &KdeConfig::default()).is_err());
}

#[test]
fn kde_is_identical_across_execution_modes() {
    let data: Vec<f64> = (0..300 * 4).map(|i| ((i * 37 % 101) as f64 / 50.0).sin()).collect();
    let a = DenseMatrix::new(300, 4, data).unwrap();
    let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
    let cfg = KdeConfig::default();
    let s = kde_mi_with(&a, &labels, &cfg, Exec::Sequential).unwrap();
    let p = kde_mi_with(&a, &labels, &cfg, Exec::Parallel).unwrap();
    assert_eq!(s, p);
}

fn table() -> impl Strategy<Value = (DenseMatrix, Vec<usize>)> {
    (2usize..20, 1usize..4).prop_flat_map(|(j, n)| {
        (prop::collection::vec(-3f64..3.0, j * n), prop::collection::vec(0usize..2, j))
            .prop_map(move |(d, l)| (DenseMatrix::new(j, n, d).unwrap(), l))
    })
}

proptest! {
    #[test]
    fn refining_bins_never_lowers_i_x((a, labels) in table(), nb in 2usize..20) {
        let coarse = BinningConfig { num_bins: nb, range_mode: RangeMode::PerLayerMinMax };
        let fine = BinningConfig { num_bins: 2 * nb, range_mode: RangeMode::PerLayerMinMax };
        let c = binned_mi(&a, &labels, &coarse).unwrap();
        let f = binned_mi(&a, &labels, &fine).unwrap();
        prop_assert!(f.i_x >= c.i_x - 1e-12);
    }

    #[test]
    fn kde_i_x_is_non_negative_and_continuous((a, labels) in table(), var in 1e-3f64..10.0) {
        let r = kde_mi(&a, &labels, &KdeConfig { noise_variance: var }).unwrap();
        let r2 = kde_mi(&a, &labels, &KdeConfig { noise_variance: var * (1.0 + 1e-9) }).unwrap();
        prop_assert!(r.i_x >= 0.0);
        prop_assert!((r.i_x - r2.i_x).abs() < 1e-6);
    }
}

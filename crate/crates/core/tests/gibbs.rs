use infoflow::data::Dataset;
use infoflow::gibbs::*;
use infoflow::nn::{init_weights, ActivationKind, InitScheme, LayerSpec, Mlp};
use infoflow::DenseMatrix;
use proptest::prelude::*;

/// Pre-activations of the first hidden layer for the four prototypes, as
/// printed for the converged ReLU network.
const G_IMAGES: [[f64; 8]; 4] = [
    [45.3, 215.7, 206.2, -62.7, -222.9, 137.1, -202.5, -171.6],
    [-53.5, -217.7, -208.4, 69.0, 224.8, -134.6, 204.1, 171.3],
    [219.4, 54.9, 78.9, -211.3, -37.4, 153.6, -106.6, -116.4],
    [-219.0, -55.9, -81.6, 208.0, 41.3, -159.6, 111.8, 122.1],
];
const LABELS: [usize; 4] = [0, 1, 0, 1];

fn activated(kind: ActivationKind, rows_per_image: usize) -> (DenseMatrix, Vec<usize>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (g, &l) in G_IMAGES.iter().zip(&LABELS) {
        for _ in 0..rows_per_image {
            rows.push(g.iter().map(|&v| kind.apply(v)).collect::<Vec<_>>());
            labels.push(l);
        }
    }
    (DenseMatrix::from_rows(&rows).unwrap(), labels)
}

fn kl_oracle(layer: &LayerGibbs) -> f64 {
    let m = marginal(layer);
    let j = layer.samples() as f64;
    layer
        .conditional
        .row_iter()
        .map(|row| {
            row.iter()
                .zip(&m)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &q)| p * (p / q).log2())
                .sum::<f64>()
        })
        .sum::<f64>()
        / j
}

#[test]
fn relu_and_linear_rows_are_one_hot() {
    let winners = [1, 4, 0, 3];
    for kind in [ActivationKind::ReLU, ActivationKind::Linear] {
        for (g, &w) in G_IMAGES.iter().zip(&winners) {
            let f: Vec<f64> = g.iter().map(|&v| kind.apply(v)).collect();
            let p = layer_conditional(&f).unwrap();
            for (n, &pn) in p.iter().enumerate() {
                let target = if n == w { 1.0 } else { 0.0 };
                assert!((pn - target).abs() < 1e-4, "{kind} neuron {n}: {pn}");
            }
        }
    }
}

#[test]
fn saturating_rows_match_printed_probabilities() {
    let tanh: Vec<f64> = G_IMAGES[0].iter().map(|&g| ActivationKind::Tanh.apply(g)).collect();
    let p = layer_conditional(&tanh).unwrap();
    let expected = [0.22, 0.22, 0.22, 0.03, 0.03, 0.22, 0.03, 0.03];
    for (a, e) in p.iter().zip(expected) {
        assert!((a - e).abs() < 0.005, "{a} vs {e}");
    }
    assert!((entropy(&p).unwrap() - 2.53).abs() < 0.01);

    let sig: Vec<f64> = G_IMAGES[0].iter().map(|&g| ActivationKind::Sigmoid.apply(g)).collect();
    let p = layer_conditional(&sig).unwrap();
    let expected = [0.18, 0.18, 0.18, 0.07, 0.07, 0.18, 0.07, 0.07];
    for (a, e) in p.iter().zip(expected) {
        assert!((a - e).abs() < 0.005, "{a} vs {e}");
    }
    assert!((entropy(&p).unwrap() - 2.84).abs() < 0.01);
}

#[test]
fn converged_relu_layer_summary() {
    let (f, labels) = activated(ActivationKind::ReLU, 16);
    let layer = LayerGibbs::from_activations(&f, 0).unwrap();
    let m = marginal(&layer);
    let expected = [0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0];
    for (a, e) in m.iter().zip(expected) {
        assert!((a - e).abs() < 1e-3);
    }
    let class0 = label_conditional(&layer, &labels, 0).unwrap();
    let expected0 = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (a, e) in class0.iter().zip(expected0) {
        assert!((a - e).abs() < 1e-3);
    }
    let s = MiSummary::from_layer(&layer, &labels).unwrap();
    assert!((s.h_f - 2.0).abs() < 1e-3);
    assert!((s.i_x - 2.0).abs() < 1e-3);
    assert!((s.i_y - 1.0).abs() < 1e-3);
    assert!((s.i_xbar - 1.0).abs() < 1e-3);
}

#[test]
fn tanh_layer_carries_little_information() {
    let (f, labels) = activated(ActivationKind::Tanh, 16);
    let layer = LayerGibbs::from_activations(&f, 0).unwrap();
    let s = MiSummary::from_layer(&layer, &labels).unwrap();
    assert!(s.h_f > 2.9 && s.h_f <= 3.0);
    assert!(s.i_x < 1.0 && s.i_x > 0.0);
    assert!(s.i_y <= s.i_x + 1e-12);
}

#[test]
fn mi_x_equals_kl_oracle_on_paper_tables() {
    for kind in ActivationKind::ALL {
        let (f, _) = activated(kind, 3);
        let layer = LayerGibbs::from_activations(&f, 0).unwrap();
        assert!((mi_x(&layer) - kl_oracle(&layer)).abs() < 1e-9, "{kind}");
    }
}

#[test]
fn single_neuron_layer_is_exactly_zero() {
    let f = DenseMatrix::new(4, 1, vec![3.0, -1.0, 0.0, 100.0]).unwrap();
    let layer = LayerGibbs::from_activations(&f, 0).unwrap();
    let s = MiSummary::from_layer(&layer, &[0, 1, 0, 1]).unwrap();
    assert_eq!((s.h_f, s.i_x, s.i_y), (0.0, 0.0, 0.0));
}

fn random_net(seed: u64, widths: [usize; 4], act: ActivationKind) -> Mlp {
    let specs = [
        LayerSpec::new(widths[0], widths[1], act).unwrap(),
        LayerSpec::new(widths[1], widths[2], act).unwrap(),
        LayerSpec::new(widths[2], widths[3], ActivationKind::Linear).unwrap(),
    ];
    let mut mlp = Mlp::new(&specs).unwrap();
    init_weights(&mut mlp, InitScheme::TruncatedNormal { sigma: 1.0 }, seed).unwrap();
    mlp
}

#[test]
fn chain_sum_reproduces_softmax_output() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for seed in 0..100u64 {
        let act = ActivationKind::ALL[(seed % 4) as usize];
        let mlp = random_net(seed, [5, 4, 3, 3], act);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dev = marginal_chain_check(&mlp, &x).unwrap();
        assert!(dev < 1e-9, "seed {seed}: {dev}");
    }
    let tiny = random_net(3, [2, 1, 1, 2], ActivationKind::ReLU);
    assert_eq!(marginal_chain_check(&tiny, &[0.3, -0.4]).unwrap(), 0.0);
}

#[test]
fn chain_check_requires_three_layers() {
    let mlp = Mlp::with_widths(3, &[2], 2, ActivationKind::ReLU).unwrap();
    assert!(marginal_chain_check(&mlp, &[0.0; 3]).is_err());
}

#[test]
fn untrained_network_flows_near_zero() {
    let mut mlp = Mlp::with_widths(1024, &[8, 6], 2, ActivationKind::ReLU).unwrap();
    init_weights(&mut mlp, InitScheme::Uniform { a: 0.001 }, 1).unwrap();
    let data = infoflow::data::generate_synthetic(&Default::default()).unwrap();
    for s in flow_summary(&mlp, &data).unwrap() {
        assert!(s.i_x < 0.01 && s.i_y < 0.01, "{s:?}");
        assert!((s.i_xbar - (s.i_x - s.i_y)).abs() < 1e-12);
    }
}

#[test]
fn label_determinism_enumeration() {
    let synth = infoflow::data::generate_synthetic(&Default::default()).unwrap();
    assert_eq!(label_determinism_check(&synth), 0.0);
    let x = DenseMatrix::from_rows(&[[1.0], [1.0], [1.0], [2.0]]).unwrap();
    let d = Dataset::new(x, vec![0, 0, 1, 1], 2, "collide").unwrap();
    // Three rows share an input with labels {0,0,1}; the fourth is alone.
    let h3 = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0 / 3.0) * (1.0f64 / 3.0).log2();
    assert!((label_determinism_check(&d) - 0.75 * h3).abs() < 1e-12);
}

fn activation_table() -> impl Strategy<Value = (DenseMatrix, Vec<usize>)> {
    (1usize..12, 1usize..7).prop_flat_map(|(j, n)| {
        (
            prop::collection::vec(-1e4f64..1e4, j * n),
            prop::collection::vec(0usize..3, j),
        )
            .prop_map(move |(data, labels)| (DenseMatrix::new(j, n, data).unwrap(), labels))
    })
}

proptest! {
    #[test]
    fn tables_are_row_stochastic((f, _) in activation_table()) {
        let layer = LayerGibbs::from_activations(&f, 0).unwrap();
        for row in layer.conditional.row_iter() {
            prop_assert!(row.iter().all(|p| p.is_finite() && *p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn information_bounds_hold((f, labels) in activation_table()) {
        let layer = LayerGibbs::from_activations(&f, 0).unwrap();
        let s = MiSummary::from_layer(&layer, &labels).unwrap();
        prop_assert!(s.i_x >= -1e-9);
        prop_assert!(s.i_y >= -1e-9);
        prop_assert!(s.h_f <= (layer.neuron_count() as f64).log2() + 1e-9);
        prop_assert!((s.i_x - kl_oracle(&layer)).abs() < 1e-9);
        prop_assert!((s.i_xbar - (s.i_x - s.i_y)).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_leaves_conditional_unchanged(
        f in prop::collection::vec(-50f64..50.0, 1..10),
        c in -100f64..100.0,
    ) {
        let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
        let a = layer_conditional(&f).unwrap();
        let b = layer_conditional(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

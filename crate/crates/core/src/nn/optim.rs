use serde::{Deserialize, Serialize};

use super::network::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer with its per-parameter state.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        // first and second moments, one flat buffer per layer (weights then biases)
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, mlp: &Mlp) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = mlp
                    .layers()
                    .iter()
                    .map(|l| vec![0.0; l.fan_in() * l.fan_out() + l.fan_out()])
                    .collect();
                Optimizer::Adam {
                    lr,
                    step: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) {
        match self {
            Optimizer::Sgd { lr } => {
                let lr = *lr;
                for (layer, g) in mlp.layers_mut().iter_mut().zip(grads) {
                    for (w, d) in layer.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                        *w -= lr * d;
                    }
                    for (b, d) in layer.biases.iter_mut().zip(&g.biases) {
                        *b -= lr * d;
                    }
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(*step);
                let bc2 = 1.0 - ADAM_BETA2.powi(*step);
                let lr = *lr;
                for (((layer, g), m), v) in mlp.layers_mut().iter_mut().zip(grads).zip(m).zip(v) {
                    let params = layer
                        .weights
                        .as_mut_slice()
                        .iter_mut()
                        .chain(layer.biases.iter_mut());
                    let grads = g.weights.as_slice().iter().chain(&g.biases);
                    for (((p, &d), m), v) in params.zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * d;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * d * d;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ActivationKind, LayerGrad};
    use crate::DenseMatrix;

    #[test]
    fn first_adam_step_moves_each_parameter_by_lr() {
        let mut mlp = Mlp::with_widths(2, &[], 2, ActivationKind::Linear).unwrap();
        let grads = vec![LayerGrad {
            weights: DenseMatrix::from_rows(&[[0.5, -2.0], [1e-3, 0.0]]).unwrap(),
            biases: vec![3.0, -0.1],
        }];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, &mlp);
        opt.step(&mut mlp, &grads);
        let w = mlp.layers()[0].weights.as_slice();
        // Bias-corrected first step is lr·sign(g) up to eps.
        assert!((w[0] + 0.01).abs() < 1e-9);
        assert!((w[1] - 0.01).abs() < 1e-9);
        assert!((w[2] + 0.01).abs() < 1e-7);
        assert_eq!(w[3], 0.0);
        assert!((mlp.layers()[0].biases[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn sgd_step_is_plain_gradient_descent() {
        let mut mlp = Mlp::with_widths(1, &[], 2, ActivationKind::Linear).unwrap();
        let grads = vec![LayerGrad {
            weights: DenseMatrix::from_rows(&[[1.0, -1.0]]).unwrap(),
            biases: vec![0.5, 0.0],
        }];
        Optimizer::new(OptimizerKind::Sgd, 0.1, &mlp).step(&mut mlp, &grads);
        assert_eq!(mlp.layers()[0].weights.as_slice(), &[-0.1, 0.1]);
        assert_eq!(mlp.layers()[0].biases, vec![-0.05, 0.0]);
    }
}

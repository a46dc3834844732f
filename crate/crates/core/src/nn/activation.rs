use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Elementwise nonlinearity of a hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Linear,
    #[serde(rename = "relu")]
    ReLU,
    Tanh,
    Sigmoid,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Linear,
        ActivationKind::ReLU,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
    ];

    #[inline]
    pub fn apply(self, g: f64) -> f64 {
        match self {
            ActivationKind::Linear => g,
            ActivationKind::ReLU => g.max(0.0),
            ActivationKind::Tanh => g.tanh(),
            ActivationKind::Sigmoid => sigmoid(g),
        }
    }

    /// Derivative expressed through the pre-activation `g` and the
    /// activation `f = apply(g)`. The ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative(self, g: f64, f: f64) -> f64 {
        match self {
            ActivationKind::Linear => 1.0,
            ActivationKind::ReLU => {
                if g > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => 1.0 - f * f,
            ActivationKind::Sigmoid => f * (1.0 - f),
        }
    }

    /// Whether the function has a kink (non-differentiable point).
    pub fn has_kink(self) -> bool {
        matches!(self, ActivationKind::ReLU)
    }

    pub fn code(self) -> u8 {
        match self {
            ActivationKind::Linear => 0,
            ActivationKind::ReLU => 1,
            ActivationKind::Tanh => 2,
            ActivationKind::Sigmoid => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Linear => "linear",
            ActivationKind::ReLU => "relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activation `{s}`")))
    }
}

#[inline]
fn sigmoid(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax of one row, written into `out`.
pub fn softmax_into(row: &[f64], out: &mut [f64]) {
    debug_assert_eq!(row.len(), out.len());
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; row.len()];
    softmax_into(row, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_pins_from_trained_layer() {
        assert_eq!(ActivationKind::ReLU.apply(-62.7), 0.0);
        assert_eq!(ActivationKind::ReLU.apply(215.7), 215.7);
        assert_eq!(ActivationKind::ReLU.derivative(0.0, 0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(ActivationKind::Sigmoid.apply(0.0), 0.5);
        assert_eq!(ActivationKind::Sigmoid.apply(-1000.0), 0.0);
        assert_eq!(ActivationKind::Sigmoid.apply(1000.0), 1.0);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1e4, -1e4, 9_999.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn codes_round_trip() {
        for a in ActivationKind::ALL {
            assert_eq!(ActivationKind::from_code(a.code()), Some(a));
            assert_eq!(a.name().parse::<ActivationKind>().unwrap(), a);
        }
        assert!(ActivationKind::from_code(9).is_none());
    }
}

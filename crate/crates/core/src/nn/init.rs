use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::network::Mlp;
use crate::error::{Error, Result};

/// Weight initialization scheme. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    /// i.i.d. `U[−a, a]`.
    Uniform { a: f64 },
    /// `N(0, σ²)` resampled until `|w| ≤ 2σ`.
    TruncatedNormal { sigma: f64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Uniform { a: 0.1 }
    }
}

impl InitScheme {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            InitScheme::Uniform { a } => ("uniform half-width", a),
            InitScheme::TruncatedNormal { sigma } => ("truncated-normal sigma", sigma),
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
        }
    }
}

pub fn init_weights(mlp: &mut Mlp, scheme: InitScheme, seed: u64) -> Result<()> {
    scheme.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in mlp.layers_mut() {
        match scheme {
            InitScheme::Uniform { a } => {
                for w in layer.weights.as_mut_slice() {
                    *w = rng.random_range(-a..=a);
                }
            }
            InitScheme::TruncatedNormal { sigma } => {
                let normal = Normal::new(0.0, sigma).expect("sigma validated positive");
                for w in layer.weights.as_mut_slice() {
                    *w = loop {
                        let v: f64 = normal.sample(&mut rng);
                        if v.abs() <= 2.0 * sigma {
                            break v;
                        }
                    };
                }
            }
        }
        layer.biases.iter_mut().for_each(|b| *b = 0.0);
    }
    Ok(())
}

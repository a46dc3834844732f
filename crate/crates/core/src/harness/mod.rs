//! Experiment orchestration: configs and presets, multi-seed flow runs,
//! estimator comparison, correlation diagnostics, generalization sweeps
//! and chart output.

mod chart;
mod diagnostics;
mod flow;
mod generalization;
mod trace;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use chart::{emit_charts, render_line_chart, ChartSeries};
pub use diagnostics::{run_iid, IidResult, RfPoint};
pub use flow::{compare_estimators, run_flow};
pub use generalization::{run_generalization, spearman, GeneralizationRow, GeneralizationTable, Sweep};
pub use trace::{read_trace_csv, seed_summary, write_trace_csv, CurvePoint, FlowRow, FlowTrace, Quantity, SeedFailure};

use crate::baselines::KdeConfig;
use crate::data::{generate_synthetic, load_idx, subset, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::nn::{ActivationKind, InitScheme, LayerSpec, Mlp, OptimizerKind, TrainConfig};

/// Loss below which a network counts as converged (nats).
pub const CONVERGED_LOSS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Gibbs,
    Binning,
    Kde,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Gibbs => "gibbs",
            Estimator::Binning => "binning",
            Estimator::Kde => "kde",
        }
    }

    /// Parses a comma-separated list such as `gibbs,binning`.
    pub fn parse_list(s: &str) -> Result<Vec<Estimator>> {
        let mut out: Vec<Estimator> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let e = part.parse()?;
            if !out.contains(&e) {
                out.push(e);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gibbs" => Ok(Estimator::Gibbs),
            "binning" => Ok(Estimator::Binning),
            "kde" => Ok(Estimator::Kde),
            other => Err(Error::InvalidArgument(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Named architectures. MLP1–3 take the 32×32 synthetic images, MLP4–10
/// take 28×28 benchmark images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Mlp1,
    Mlp2,
    Mlp3,
    Mlp4,
    Mlp5,
    Mlp6,
    Mlp8,
    Mlp9,
    Mlp10,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Mlp1,
        Preset::Mlp2,
        Preset::Mlp3,
        Preset::Mlp4,
        Preset::Mlp5,
        Preset::Mlp6,
        Preset::Mlp8,
        Preset::Mlp9,
        Preset::Mlp10,
    ];

    /// `(input, hidden widths, classes, hidden activation)`
    pub fn shape(self) -> (usize, &'static [usize], usize, ActivationKind) {
        use ActivationKind::{ReLU, Tanh};
        match self {
            Preset::Mlp1 => (1024, &[8, 6], 2, ReLU),
            Preset::Mlp2 => (1024, &[8, 6], 2, Tanh),
            Preset::Mlp3 => (1024, &[1, 6], 2, ReLU),
            Preset::Mlp4 => (784, &[96, 32], 10, ReLU),
            Preset::Mlp5 => (784, &[96, 32], 10, Tanh),
            Preset::Mlp6 => (784, &[32, 96], 10, ReLU),
            Preset::Mlp8 => (784, &[256, 128, 96], 10, ReLU),
            Preset::Mlp9 => (784, &[256, 128, 96], 10, Tanh),
            Preset::Mlp10 => (784, &[96, 128, 256], 10, ReLU),
        }
    }

    pub fn specs(self) -> Vec<LayerSpec> {
        let (input, hidden, classes, act) = self.shape();
        Mlp::with_widths(input, hidden, classes, act)
            .expect("preset shapes are valid")
            .specs()
    }

    pub fn is_synthetic(self) -> bool {
        matches!(self, Preset::Mlp1 | Preset::Mlp2 | Preset::Mlp3)
    }

    /// Adam at 0.01 for 1000 full-batch epochs from Uniform(0.1) on the
    /// synthetic data; Adam at 0.001 with minibatches of 128 from a
    /// truncated normal on the benchmark data.
    pub fn default_train(self) -> TrainConfig {
        if self.is_synthetic() {
            TrainConfig::default()
        } else {
            TrainConfig {
                optimizer: OptimizerKind::Adam,
                learning_rate: 0.001,
                epochs: 300,
                batch_size: 128,
                init: InitScheme::TruncatedNormal { sigma: 0.1 },
                seed: 0,
            }
        }
    }

    pub fn default_eval_every(self) -> usize {
        if self.is_synthetic() {
            1
        } else {
            5
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format!("{self:?}").to_ascii_lowercase())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{s}` (expected mlp1..mlp6, mlp8..mlp10)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// The held-out set, when one is needed, is an independent draw with
    /// seed `spec.seed + 1`.
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
        #[serde(default)]
        train_subset: Option<usize>,
        #[serde(default)]
        test_subset: Option<usize>,
        #[serde(default)]
        subset_seed: u64,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            spec: SyntheticSpec::default(),
        }
    }
}

impl DatasetConfig {
    /// IDX files in `dir` with the standard MNIST file names.
    pub fn mnist(dir: &Path, train_subset: Option<usize>, test_subset: Option<usize>) -> Self {
        DatasetConfig::Idx {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: Some(dir.join("t10k-images-idx3-ubyte")),
            test_labels: Some(dir.join("t10k-labels-idx1-ubyte")),
            train_subset,
            test_subset,
            subset_seed: 0,
        }
    }

    /// Training set and, if configured, the held-out set.
    pub fn load(&self) -> Result<(Dataset, Option<Dataset>)> {
        match self {
            DatasetConfig::Synthetic { spec } => {
                let train = generate_synthetic(spec)?;
                let test = generate_synthetic(&SyntheticSpec {
                    seed: spec.seed.wrapping_add(1),
                    ..*spec
                })?;
                Ok((train, Some(test)))
            }
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                train_subset,
                test_subset,
                subset_seed,
            } => {
                let mut train = load_idx(train_images, train_labels)?;
                if let Some(n) = train_subset {
                    train = subset(&train, *n, *subset_seed)?;
                }
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => {
                        let mut t = load_idx(i, l)?;
                        if let Some(n) = test_subset {
                            t = subset(&t, *n, subset_seed.wrapping_add(1))?;
                        }
                        t.num_classes = t.num_classes.max(train.num_classes);
                        Some(t)
                    }
                    (None, None) => None,
                    _ => {
                        return Err(Error::InvalidArgument(
                            "test_images and test_labels must be given together".into(),
                        ))
                    }
                };
                if let Some(t) = &test {
                    train.num_classes = train.num_classes.max(t.num_classes);
                }
                Ok((train, test))
            }
        }
    }
}

/// Which samples define `P(X)` for the information estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSet {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub dataset: DatasetConfig,
    pub architecture: Vec<LayerSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_bins")]
    pub num_bins: usize,
    #[serde(default)]
    pub kde: KdeConfig,
    #[serde(default)]
    pub mi_on: EvalSet,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_eval_every() -> usize {
    1
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Gibbs]
}

fn default_bins() -> usize {
    30
}

impl ExperimentConfig {
    /// A preset with its default dataset (synthetic, or MNIST under
    /// `mnist_dir` for the benchmark presets) and training schedule.
    pub fn from_preset(preset: Preset, mnist_dir: Option<&Path>) -> Self {
        let dataset = if preset.is_synthetic() {
            DatasetConfig::default()
        } else {
            DatasetConfig::mnist(mnist_dir.unwrap_or(Path::new("data/mnist")), None, None)
        };
        Self {
            name: preset.to_string(),
            dataset,
            architecture: preset.specs(),
            train: preset.default_train(),
            seeds: default_seeds(),
            eval_every: preset.default_eval_every(),
            estimators: default_estimators(),
            num_bins: default_bins(),
            kde: KdeConfig::default(),
            mi_on: EvalSet::Train,
            output_dir: None,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one seed is required".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidArgument("eval_every must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("at least one estimator is required".into()));
        }
        if self.num_bins < 2 {
            return Err(Error::InvalidArgument("num_bins must be at least 2".into()));
        }
        self.kde.validate()?;
        self.train.init.validate()?;
        if !(self.train.learning_rate >= 0.0 && self.train.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be finite and non-negative".into()));
        }
        Mlp::new(&self.architecture)?;
        Ok(())
    }

    pub fn build_network(&self) -> Result<Mlp> {
        Mlp::new(&self.architecture)
    }

    /// Writes the fully resolved config next to a run's outputs.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("resolved-config.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

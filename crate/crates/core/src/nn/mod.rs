//! Dense feedforward networks with a softmax head, trained by closed-form
//! backpropagation of the cross-entropy.

mod activation;
mod gradcheck;
mod init;
mod network;
mod optim;
mod snapshot;
mod train;

pub use activation::{softmax, softmax_into, ActivationKind};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, REL_ERROR_FLOOR};
pub use init::{init_weights, InitScheme};
pub use network::{
    argmax, cross_entropy, error_rate, CrossEntropy, ForwardTrace, Gradients, Layer, LayerGrad, LayerSpec, Mlp,
    PROB_FLOOR,
};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot};
pub use train::{train, train_with, EpochReport, TrainConfig};

//! Fixed-topology feed-forward networks with exact time derivatives and
//! exact parameter gradients, plus the optimizer, schedule and training loop
//! shared by the inverse solvers.

mod adam;
mod network;
mod schedule;
mod train;

pub use adam::AdamState;
pub use network::{
    loss_gradient, Activation, Dense, Evaluation, ExtraScalar, ForwardPass, NetGradient, Network,
    NetworkConfig, Objective, OutputAdjoint,
};
pub use schedule::poly_lr;
pub use train::{train_stage, CompositeObjective, LossParts, TrainConfig};

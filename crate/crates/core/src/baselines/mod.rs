//! Comparison learners and synthesiser target definitions.

pub mod lambda_sg;
pub mod targets;
pub mod truncated;

pub use lambda_sg::{offline_lambda_sg_epoch, online_lambda_sg_run, online_lambda_sg_step, regress_step};
pub use targets::{
    interim_lambda_target, interim_targets_recursive, lambda_target, lambda_weights, n_step_target, true_gradient,
    true_gradients, TargetKind, TargetVector,
};
pub use truncated::{window_sizes, windowed_grads, Truncated, TruncatedConfig, WindowedGrads};

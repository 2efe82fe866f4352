//! Online learning of synthetic gradients for recurrent networks.
//!
//! The central piece is accumulate BP(λ) ([`bp_lambda`]): a linear
//! synthesiser predicts the future loss gradient of the recurrent state and
//! learns online from TD errors carried by forward eligibility traces. The
//! crate also provides the comparison learners ([`baselines`]), the tasks
//! ([`tasks`]), and numerical checks of the theory ([`theory`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases fix `f64`.

pub mod baselines;
pub mod bp_lambda;
pub mod cells;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod optim;
pub mod scalar;
pub mod synth;
pub mod tasks;
pub mod tensor;
pub mod theory;
pub mod trajectory;

pub use bp_lambda::{
    apply_synth_update, replay_raw, td_error, update_trace, BpLambda, EligibilityTrace, RawReplay, TdError,
    TrainerConfig, UpdateMode,
};
pub use cells::{CellKind, HeadKind, Model, Readout, ReadoutLoss, RnnGrads, RnnParams, StepOutput, Target};
pub use error::{Error, Result};
pub use learner::{evaluate, BatchStats, EpisodeOutcome, Learner, ModelGrads};
pub use metrics::cosine_alignment;
pub use optim::{adam_step, sgd_step, AdamConfig, AdamState};
pub use scalar::Scalar;
pub use synth::{SynthGrad, SynthGradient, Synthesiser};
pub use tasks::{Episode, TaskStep};
pub use tensor::{trace_contract, Matrix, Tensor3, Vector};
pub use trajectory::{ForwardPass, TrajectoryRecord};

pub type Vector64 = Vector<f64>;
pub type Matrix64 = Matrix<f64>;
pub type Tensor64 = Tensor3<f64>;
pub type Model64 = Model<f64>;
pub type Synthesiser64 = Synthesiser<f64>;
pub type Vector32 = Vector<f32>;
pub type Matrix32 = Matrix<f32>;
pub type Model32 = Model<f32>;

//! Task generators and data ingestion.
//!
//! Every generator is a pure function of its parameters and seed.

mod copy_repeat;
pub mod idx;
mod mnist;
mod toy;

pub use copy_repeat::{advance_curriculum, bits_error, CopyRepeat, Curriculum, COPY_INPUT_DIM, COPY_OUTPUT_DIM};
pub use mnist::{Mnist, MnistImage, MnistSplit, MNIST_CLASSES, MNIST_ROWS};
pub use toy::{ToyFixed, ToyPlastic, TOY_INPUT_DIM, TOY_OUTPUT_DIM};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cells::Target;
use crate::scalar::Scalar;
use crate::tensor::Vector;

/// One `(x_t, y_t)` pair; `target` is `None` where the task defines no loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStep<S> {
    pub input: Vector<S>,
    pub target: Option<Target<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<S> {
    pub steps: Vec<TaskStep<S>>,
}

impl<S: Scalar> Episode<S> {
    pub fn new(steps: Vec<TaskStep<S>>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// 1-based timesteps that carry a target.
    pub fn target_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.target.is_some())
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TaskStep<S>> {
        self.steps.iter()
    }
}

impl<'a, S> IntoIterator for &'a Episode<S> {
    type Item = &'a TaskStep<S>;
    type IntoIter = std::slice::Iter<'a, TaskStep<S>>;

    fn into_iter(self) -> Self::IntoIter {
        self.steps.iter()
    }
}

/// The seeded generator used throughout.
pub fn task_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator for `seed`.
pub fn task_rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

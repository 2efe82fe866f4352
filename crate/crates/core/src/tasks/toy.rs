//! Target-reach toy tasks: an input at the first step, nothing afterwards,
//! and a 2-d unit-circle target at the last step.

use rand::Rng;

use super::{task_rng, Episode, TaskStep};
use crate::cells::Target;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Vector;

pub const TOY_INPUT_DIM: usize = 10;
pub const TOY_OUTPUT_DIM: usize = 2;

fn binary_input<S: Scalar, R: Rng>(rng: &mut R) -> Vector<S> {
    Vector::from_vec(
        (0..TOY_INPUT_DIM)
            .map(|_| if rng.gen_bool(0.5) { S::one() } else { S::zero() })
            .collect(),
    )
}

fn circle_point<S: Scalar>(angle: f64) -> Vector<S> {
    Vector::from_f64(&[angle.cos(), angle.sin()])
}

fn reach_episode<S: Scalar>(input: &Vector<S>, target: &Vector<S>, t_len: usize) -> Episode<S> {
    let mut steps = Vec::with_capacity(t_len);
    for t in 1..=t_len {
        steps.push(TaskStep {
            input: if t == 1 {
                input.clone()
            } else {
                Vector::zeros(TOY_INPUT_DIM)
            },
            target: (t == t_len).then(|| Target::Regression(target.clone())),
        });
    }
    Episode::new(steps)
}

/// One fixed input/target pair with `T = 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFixed<S> {
    pub input: Vector<S>,
    pub target: Vector<S>,
}

impl<S: Scalar> ToyFixed<S> {
    pub const T: usize = 10;

    pub fn new(seed: u64) -> Self {
        let mut rng = task_rng(seed);
        let mut input = binary_input(&mut rng);
        while input.iter().all(|&v| v == S::zero()) {
            input = binary_input(&mut rng);
        }
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        Self {
            input,
            target: circle_point(angle),
        }
    }

    pub fn episode(&self) -> Episode<S> {
        reach_episode(&self.input, &self.target, Self::T)
    }

    pub fn batch(&self, size: usize) -> Vec<Episode<S>> {
        vec![self.episode(); size]
    }
}

/// Three input/target pairs, targets equidistant on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPlastic<S> {
    pub t_len: usize,
    pub pairs: Vec<(Vector<S>, Vector<S>)>,
}

impl<S: Scalar> ToyPlastic<S> {
    pub const PAIRS: usize = 3;

    /// `t_len` must be a positive multiple of 10, at most 100.
    pub fn new(t_len: usize, seed: u64) -> Result<Self> {
        if t_len == 0 || !t_len.is_multiple_of(10) || t_len > 100 {
            return Err(Error::Invalid(format!(
                "toy_plastic length must be a multiple of 10 in 10..=100, got {t_len}"
            )));
        }
        let mut rng = task_rng(seed);
        let mut inputs: Vec<Vector<S>> = Vec::new();
        while inputs.len() < Self::PAIRS {
            let x = binary_input(&mut rng);
            if x.iter().any(|&v| v != S::zero()) && !inputs.contains(&x) {
                inputs.push(x);
            }
        }
        let pairs = inputs
            .into_iter()
            .enumerate()
            .map(|(k, x)| (x, circle_point(std::f64::consts::TAU * k as f64 / Self::PAIRS as f64)))
            .collect();
        Ok(Self { t_len, pairs })
    }

    pub fn episode(&self, k: usize) -> Episode<S> {
        let (x, y) = &self.pairs[k % Self::PAIRS];
        reach_episode(x, y, self.t_len)
    }

    /// Cycles through the pairs starting at `offset`.
    pub fn batch(&self, size: usize, offset: usize) -> Vec<Episode<S>> {
        (0..size).map(|i| self.episode(offset + i)).collect()
    }
}

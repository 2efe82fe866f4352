//! Copy-repeat with its curriculum.
//!
//! Input channels: 8 pattern bits, start delimiter (8), repeat count `R/10`
//! (9). Output channels: 8 pattern bits and the stop flag (8).
//!
//! Layout for pattern length `N` and repeat count `R`:
//! `t = 1` start delimiter, `t = 2 … N+1` pattern, `t = N+2` repeat count,
//! then `N·R` steps reproducing the pattern and one stop step, so
//! `T = N(R+1) + 3`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Episode, TaskStep};
use crate::cells::Target;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Vector;

pub const COPY_INPUT_DIM: usize = 10;
pub const COPY_OUTPUT_DIM: usize = 9;
const BITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyRepeat {
    pub n: usize,
    pub r: usize,
}

impl CopyRepeat {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::Invalid(format!(
                "copy_repeat needs N, R >= 1 (got N = {n}, R = {r})"
            )));
        }
        Ok(Self { n, r })
    }

    pub fn seq_len(&self) -> usize {
        self.n * (self.r + 1) + 3
    }

    /// Number of steps that carry a target: `N·R` pattern steps plus stop.
    pub fn target_len(&self) -> usize {
        self.n * self.r + 1
    }

    pub fn episode<S: Scalar, R: Rng>(&self, rng: &mut R) -> Episode<S> {
        let pattern: Vec<[bool; BITS]> = (0..self.n)
            .map(|_| std::array::from_fn(|_| rng.gen_bool(0.5)))
            .collect();
        let bit = |b: bool| if b { S::one() } else { S::zero() };
        let mut steps = Vec::with_capacity(self.seq_len());

        let mut start = vec![S::zero(); COPY_INPUT_DIM];
        start[BITS] = S::one();
        steps.push(TaskStep {
            input: Vector::from_vec(start),
            target: None,
        });
        for row in &pattern {
            let mut x = vec![S::zero(); COPY_INPUT_DIM];
            for (v, &b) in x.iter_mut().zip(row) {
                *v = bit(b);
            }
            steps.push(TaskStep {
                input: Vector::from_vec(x),
                target: None,
            });
        }
        let mut rep = vec![S::zero(); COPY_INPUT_DIM];
        rep[BITS + 1] = S::lit(self.r as f64 / 10.0);
        steps.push(TaskStep {
            input: Vector::from_vec(rep),
            target: None,
        });
        for _ in 0..self.r {
            for row in &pattern {
                let mut y = vec![S::zero(); COPY_OUTPUT_DIM];
                for (v, &b) in y.iter_mut().zip(row) {
                    *v = bit(b);
                }
                steps.push(TaskStep {
                    input: Vector::zeros(COPY_INPUT_DIM),
                    target: Some(Target::Bits(Vector::from_vec(y))),
                });
            }
        }
        let mut stop = vec![S::zero(); COPY_OUTPUT_DIM];
        stop[BITS] = S::one();
        steps.push(TaskStep {
            input: Vector::zeros(COPY_INPUT_DIM),
            target: Some(Target::Bits(Vector::from_vec(stop))),
        });
        Episode::new(steps)
    }

    pub fn batch<S: Scalar, R: Rng>(&self, size: usize, rng: &mut R) -> Vec<Episode<S>> {
        (0..size).map(|_| self.episode(rng)).collect()
    }
}

/// Cross-entropy of one episode in bits per target step, from its summed
/// loss in nats.
pub fn bits_error(loss_nats: f64, target_steps: usize) -> f64 {
    loss_nats / (std::f64::consts::LN_2 * target_steps.max(1) as f64)
}

/// Curriculum over `(N, R)`; a solved level advances `N` and `R` in turn,
/// `N` first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curriculum {
    pub n: usize,
    pub r: usize,
    /// Sequence lengths of every solved level, in order.
    pub solved: Vec<usize>,
}

impl Default for Curriculum {
    fn default() -> Self {
        Self {
            n: 1,
            r: 1,
            solved: Vec::new(),
        }
    }
}

impl Curriculum {
    pub fn task(&self) -> CopyRepeat {
        CopyRepeat { n: self.n, r: self.r }
    }

    pub fn seq_len(&self) -> usize {
        self.task().seq_len()
    }

    /// Longest solved sequence length, 0 when nothing is solved yet.
    pub fn solved_length(&self) -> usize {
        self.solved.iter().copied().max().unwrap_or(0)
    }
}

pub fn advance_curriculum(state: &Curriculum, solved: bool) -> Curriculum {
    let mut next = state.clone();
    if solved {
        next.solved.push(state.seq_len());
        if state.n == state.r {
            next.n += 1;
        } else {
            next.r += 1;
        }
    }
    next
}

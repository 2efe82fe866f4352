//! Recorded forward passes.

use crate::cells::{Model, ReadoutLoss, StepCache};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synth::Synthesiser;
use crate::tasks::Episode;
use crate::tensor::{matvec_t, Matrix, Vector};

/// Per-step quantities of one sequence.
///
/// Indexing follows the sequence clock: states `h_0 … h_T` (with `h_0` the
/// zero initial state), Jacobians `∂h_τ/∂h_{τ−1}` and loss gradients
/// `∂L_τ/∂h_τ` for `τ = 1 … T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<S> {
    states: Vec<Vector<S>>,
    jacs: Vec<Matrix<S>>,
    loss_grads: Vec<Vector<S>>,
    losses: Vec<S>,
}

impl<S: Scalar> TrajectoryRecord<S> {
    /// Starts a record at `h_0`.
    pub fn new(h0: Vector<S>) -> Self {
        Self {
            states: vec![h0],
            jacs: Vec::new(),
            loss_grads: Vec::new(),
            losses: Vec::new(),
        }
    }

    /// Appends step `τ = len()+1`.
    pub fn push(&mut self, h: Vector<S>, jac: Matrix<S>, loss_grad: Vector<S>, loss: S) -> Result<()> {
        let n = self.state_dim();
        if h.len() != n || jac.shape() != (n, n) || loss_grad.len() != n {
            return Err(crate::error::shape_err(
                "TrajectoryRecord::push",
                format!("state dim {n}"),
                format!("h {}, jac {:?}, grad {}", h.len(), jac.shape(), loss_grad.len()),
            ));
        }
        self.states.push(h);
        self.jacs.push(jac);
        self.loss_grads.push(loss_grad);
        self.losses.push(loss);
        Ok(())
    }

    /// Sequence length `T`.
    pub fn len(&self) -> usize {
        self.jacs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacs.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    /// `h_t`, `0 ≤ t ≤ T`.
    pub fn state(&self, t: usize) -> &Vector<S> {
        &self.states[t]
    }

    /// `∂h_τ/∂h_{τ−1}`, `1 ≤ τ ≤ T`.
    pub fn jac(&self, tau: usize) -> &Matrix<S> {
        &self.jacs[tau - 1]
    }

    /// `∂L_τ/∂h_τ`, `1 ≤ τ ≤ T`.
    pub fn loss_grad(&self, tau: usize) -> &Vector<S> {
        &self.loss_grads[tau - 1]
    }

    pub fn loss(&self, tau: usize) -> S {
        self.losses[tau - 1]
    }

    pub fn total_loss(&self) -> S {
        self.losses.iter().copied().sum()
    }

    /// `(∂h_τ/∂h_{τ−1})ᵀ v`.
    pub fn pull(&self, tau: usize, v: &Vector<S>) -> Vector<S> {
        matvec_t(&self.jacs[tau - 1], v).expect("recorded shapes are consistent")
    }

    /// Keeps steps `1 … horizon`.
    pub fn truncated(&self, horizon: usize) -> Self {
        Self {
            states: self.states[..=horizon].to_vec(),
            jacs: self.jacs[..horizon].to_vec(),
            loss_grads: self.loss_grads[..horizon].to_vec(),
            losses: self.losses[..horizon].to_vec(),
        }
    }

    /// Synthesiser predictions `g(h_τ; θ)` for `τ = 0 … T` with the
    /// final-step zero rule applied at `τ = T`.
    pub fn bootstrap(&self, synth: &Synthesiser<S>) -> Result<Vec<Vector<S>>> {
        let t_len = self.len();
        (0..=t_len)
            .map(|tau| synth.value(&self.states[tau], tau == t_len))
            .collect()
    }
}

/// A forward pass with everything a reverse sweep needs.
#[derive(Debug, Clone)]
pub struct ForwardPass<S> {
    pub record: TrajectoryRecord<S>,
    pub caches: Vec<StepCache<S>>,
    pub readouts: Vec<ReadoutLoss<S>>,
}

impl<S: Scalar> ForwardPass<S> {
    pub fn run(model: &Model<S>, episode: &Episode<S>) -> Result<Self> {
        let mut h = model.rnn.zero_state();
        let mut record = TrajectoryRecord::new(h.clone());
        let mut caches = Vec::with_capacity(episode.len());
        let mut readouts = Vec::with_capacity(episode.len());
        for (i, step) in episode.steps.iter().enumerate() {
            let out = model.rnn.step(&step.input, &h).map_err(|e| with_step(e, i + 1))?;
            let rl = model
                .readout
                .readout(&out.next_state, step.target.as_ref())
                .map_err(|e| with_step(e, i + 1))?;
            if !rl.loss.is_finite() {
                return Err(Error::NonFinite {
                    context: "loss",
                    step: i + 1,
                });
            }
            record.push(out.next_state.clone(), out.jac_state, rl.grad_state.clone(), rl.loss)?;
            h = out.next_state;
            caches.push(out.cache);
            readouts.push(rl);
        }
        Ok(Self {
            record,
            caches,
            readouts,
        })
    }
}

pub(crate) fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { context, .. } => Error::NonFinite { context, step },
        other => other,
    }
}

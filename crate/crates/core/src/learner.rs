//! The interface every training algorithm implements, plus the shared
//! parameter-update plumbing.

use crate::cells::{Model, ReadoutGrads, RnnGrads};
use crate::error::Result;
use crate::optim::{AdamConfig, AdamState};
use crate::scalar::Scalar;
use crate::synth::Synthesiser;
use crate::tasks::Episode;
use crate::tensor::Vector;

/// What one training episode produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome<S> {
    pub loss: S,
    /// `(timestep, prediction)` for every step that carried a target.
    pub predictions: Vec<(usize, Vector<S>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<S> {
    pub episodes: Vec<EpisodeOutcome<S>>,
}

impl<S: Scalar> BatchStats<S> {
    pub fn mean_loss(&self) -> S {
        let n = S::from_usize(self.episodes.len().max(1)).unwrap();
        self.episodes.iter().map(|e| e.loss).sum::<S>() / n
    }
}

/// Forward pass without training: loss and predictions of one episode.
pub fn evaluate<S: Scalar>(model: &Model<S>, episode: &Episode<S>) -> Result<EpisodeOutcome<S>> {
    let mut h = model.rnn.zero_state();
    let mut loss = S::zero();
    let mut predictions = Vec::new();
    for (i, step) in episode.steps.iter().enumerate() {
        h = model.rnn.advance(&step.input, &h)?;
        if let Some(target) = &step.target {
            let rl = model.readout.readout(&h, Some(target))?;
            loss += rl.loss;
            predictions.push((i + 1, rl.prediction));
        }
    }
    Ok(EpisodeOutcome { loss, predictions })
}

pub trait Learner<S: Scalar> {
    fn name(&self) -> String;

    /// Trains on one batch. Increments are accumulated over every step of
    /// every episode (in batch order) and applied once at the end, unless
    /// the learner runs in raw per-step mode.
    fn train_batch(&mut self, model: &mut Model<S>, batch: &[Episode<S>]) -> Result<BatchStats<S>>;

    /// The synthesiser, for learners that have one.
    fn synthesiser(&self) -> Option<&Synthesiser<S>>;
}

/// Accumulated gradients of every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<S> {
    pub rnn: RnnGrads<S>,
    pub readout: ReadoutGrads<S>,
}

impl<S: Scalar> ModelGrads<S> {
    pub fn zeros_like(model: &Model<S>) -> Self {
        Self {
            rnn: RnnGrads::zeros_like(&model.rnn),
            readout: ReadoutGrads::zeros_like(&model.readout),
        }
    }

    pub fn clear(&mut self) {
        self.rnn.clear();
        self.readout.clear();
    }

    pub fn add(&mut self, other: &Self) -> Result<()> {
        self.rnn.add_scaled(S::one(), &other.rnn)?;
        self.readout.weight.add_scaled(S::one(), &other.readout.weight)?;
        self.readout.bias.axpy(S::one(), &other.readout.bias)
    }
}

/// One ADAM state per parameter tensor of a [`Model`].
#[derive(Debug, Clone)]
pub struct ModelOptimiser<S> {
    rnn: Vec<AdamState<S>>,
    readout: Vec<AdamState<S>>,
}

impl<S: Scalar> ModelOptimiser<S> {
    pub fn new(model: &Model<S>, config: AdamConfig) -> Self {
        let g = ModelGrads::zeros_like(model);
        Self {
            rnn: g.rnn.blocks().iter().map(|b| AdamState::new(b.len(), config)).collect(),
            readout: g
                .readout
                .blocks()
                .iter()
                .map(|b| AdamState::new(b.len(), config))
                .collect(),
        }
    }

    pub fn step(&mut self, model: &mut Model<S>, grads: &ModelGrads<S>) -> Result<()> {
        for ((p, g), st) in model
            .rnn
            .blocks_mut()
            .into_iter()
            .zip(grads.rnn.blocks())
            .zip(&mut self.rnn)
        {
            st.step(p, g)?;
        }
        for ((p, g), st) in model
            .readout
            .blocks_mut()
            .into_iter()
            .zip(grads.readout.blocks())
            .zip(&mut self.readout)
        {
            st.step(p, g)?;
        }
        Ok(())
    }
}

/// Plain gradient descent on every model parameter: `Ψ -= rate · grad`.
pub fn sgd_model<S: Scalar>(model: &mut Model<S>, grads: &ModelGrads<S>, rate: S) -> Result<()> {
    for (p, g) in model.rnn.blocks_mut().into_iter().zip(grads.rnn.blocks()) {
        crate::optim::sgd_step(p, g, -rate)?;
    }
    for (p, g) in model.readout.blocks_mut().into_iter().zip(grads.readout.blocks()) {
        crate::optim::sgd_step(p, g, -rate)?;
    }
    Ok(())
}

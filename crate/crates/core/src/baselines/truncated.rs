//! Truncated BPTT, optionally with n-step synthetic gradients injected at
//! window boundaries. `n = 1` without synthetic gradients is the no-BPTT
//! baseline; `n ≥ T` is full BPTT.

use serde::{Deserialize, Serialize};

use crate::cells::Model;
use crate::error::{Error, Result};
use crate::learner::{BatchStats, EpisodeOutcome, Learner, ModelGrads, ModelOptimiser};
use crate::optim::{AdamConfig, AdamState};
use crate::scalar::Scalar;
use crate::synth::{grad_theta, Synthesiser};
use crate::tasks::Episode;
use crate::tensor::{outer, Matrix};
use crate::trajectory::ForwardPass;

use super::targets::n_step_value;

/// Window sizes for a sequence of length `t_len`: a leading window of
/// `t_len mod n` (omitted when zero) followed by windows of `n`.
pub fn window_sizes(t_len: usize, n: usize) -> Vec<usize> {
    assert!(n >= 1);
    if n >= t_len {
        return vec![t_len];
    }
    let r = t_len % n;
    let mut out = Vec::with_capacity(t_len / n + 1);
    if r > 0 {
        out.push(r);
    }
    out.extend(std::iter::repeat_n(n, t_len / n));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedConfig {
    /// Truncation size `n`.
    pub n: usize,
    pub use_sg: bool,
    /// Synthesiser learning rate.
    pub alpha: f64,
    /// Network learning rate.
    pub eta: f64,
    pub gamma: f64,
    /// Factor on the bootstrap gradient injected into the network.
    pub sg_scale: f64,
}

/// Gradients from one sequence.
#[derive(Debug, Clone)]
pub struct WindowedGrads<S> {
    pub model: ModelGrads<S>,
    /// Descent gradient of `½‖v − g‖²` summed over window starts.
    pub theta: Option<Matrix<S>>,
    pub outcome: EpisodeOutcome<S>,
}

/// Windowed reverse sweeps over one forward pass.
///
/// Inside a window the adjoint is exact BPTT. At the window end `h_b` the
/// adjoint is seeded with `sg_scale · g(h_b)` when `synth` is given (zero at
/// the final step), and no gradient crosses into the previous window. With
/// a synthesiser, `g(h_a)` at each window start regresses onto the n-step
/// target that bootstraps from `g(h_b)`.
pub fn windowed_grads<S: Scalar>(
    model: &Model<S>,
    episode: &Episode<S>,
    n: usize,
    synth: Option<&Synthesiser<S>>,
    gamma: S,
    sg_scale: S,
) -> Result<WindowedGrads<S>> {
    let pass = ForwardPass::run(model, episode)?;
    let rec = &pass.record;
    let t_len = rec.len();
    let mut grads = ModelGrads::zeros_like(model);
    let mut theta = synth.map(|s| Matrix::zeros(s.state_dim(), s.state_dim() + 1));
    let boot = match synth {
        Some(s) => Some(rec.bootstrap(s)?),
        None => None,
    };

    let mut start = 0;
    for size in window_sizes(t_len, n) {
        let end = start + size;
        let mut adj = rec.loss_grad(end).clone();
        if let Some(b) = &boot {
            adj.axpy(sg_scale, &b[end])?;
        }
        for tau in (start + 1..=end).rev() {
            if tau < end {
                adj.axpy(S::one(), rec.loss_grad(tau))?;
            }
            model.rnn.accumulate_vjp(&pass.caches[tau - 1], &adj, &mut grads.rnn)?;
            adj = rec.pull(tau, &adj);
        }
        if let (Some(b), Some(tg)) = (&boot, theta.as_mut()) {
            let target = n_step_value(rec, start, size, b, gamma);
            let err = target.sub(&b[start])?;
            let z = grad_theta(rec.state(start));
            tg.add_scaled(-S::one(), &outer(&err, z.input()))?;
        }
        start = end;
    }

    let mut predictions = Vec::new();
    for (i, rl) in pass.readouts.iter().enumerate() {
        model
            .readout
            .accumulate_grads(rec.state(i + 1), &rl.grad_logits, &mut grads.readout)?;
        if episode.steps[i].target.is_some() {
            predictions.push((i + 1, rl.prediction.clone()));
        }
    }
    Ok(WindowedGrads {
        model: grads,
        theta,
        outcome: EpisodeOutcome {
            loss: rec.total_loss(),
            predictions,
        },
    })
}

/// Truncated-BPTT learner; gradients summed over the batch, one ADAM step
/// per batch.
#[derive(Debug, Clone)]
pub struct Truncated<S> {
    cfg: TruncatedConfig,
    synth: Option<Synthesiser<S>>,
    theta_opt: Option<AdamState<S>>,
    model_opt: ModelOptimiser<S>,
}

impl<S: Scalar> Truncated<S> {
    pub fn new(cfg: TruncatedConfig, model: &Model<S>) -> Result<Self> {
        if cfg.n == 0 {
            return Err(Error::Invalid("truncation size must be at least 1".into()));
        }
        let n = model.state_dim();
        Ok(Self {
            cfg,
            synth: cfg.use_sg.then(|| Synthesiser::zeros(n)),
            theta_opt: cfg
                .use_sg
                .then(|| AdamState::new(n * (n + 1), AdamConfig::with_rate(cfg.alpha))),
            model_opt: ModelOptimiser::new(model, AdamConfig::with_rate(cfg.eta)),
        })
    }

    pub fn no_bptt(eta: f64, model: &Model<S>) -> Result<Self> {
        Self::new(
            TruncatedConfig {
                n: 1,
                use_sg: false,
                alpha: eta,
                eta,
                gamma: 1.0,
                sg_scale: 0.0,
            },
            model,
        )
    }

    pub fn config(&self) -> &TruncatedConfig {
        &self.cfg
    }
}

impl<S: Scalar> Learner<S> for Truncated<S> {
    fn name(&self) -> String {
        match (self.cfg.n, self.cfg.use_sg) {
            (1, false) => "no_bptt".into(),
            (n, false) => format!("tbptt({n})"),
            (n, true) => format!("nstep_sg({n})"),
        }
    }

    fn train_batch(&mut self, model: &mut Model<S>, batch: &[Episode<S>]) -> Result<BatchStats<S>> {
        let gamma = S::lit(self.cfg.gamma);
        let scale = S::lit(self.cfg.sg_scale);
        let mut total = ModelGrads::zeros_like(model);
        let mut theta_total = self
            .synth
            .as_ref()
            .map(|s| Matrix::zeros(s.theta().rows(), s.theta().cols()));
        let mut episodes = Vec::with_capacity(batch.len());
        for ep in batch {
            let g = windowed_grads(model, ep, self.cfg.n, self.synth.as_ref(), gamma, scale)?;
            total.add(&g.model)?;
            if let (Some(acc), Some(t)) = (theta_total.as_mut(), g.theta.as_ref()) {
                acc.add_scaled(S::one(), t)?;
            }
            episodes.push(g.outcome);
        }
        self.model_opt.step(model, &total)?;
        if let (Some(s), Some(opt), Some(g)) = (self.synth.as_mut(), self.theta_opt.as_mut(), theta_total) {
            opt.step(s.theta_mut().as_mut_slice(), g.as_slice())?;
        }
        Ok(BatchStats { episodes })
    }

    fn synthesiser(&self) -> Option<&Synthesiser<S>> {
        self.synth.as_ref()
    }
}

//! Accumulate BP(λ): online synthesiser learning from TD errors and
//! forward-propagated eligibility traces, with no backward pass through time.
//!
//! Per step, in order: trace update, forward step, local gradients, TD error,
//! synthesiser increment, recurrent-network increment, state advance. Every
//! quantity touched spans at most one timestep.

use serde::{Deserialize, Serialize};

use crate::cells::Model;
use crate::error::{shape_err, Error, Result};
use crate::learner::{sgd_model, BatchStats, EpisodeOutcome, Learner, ModelGrads, ModelOptimiser};
use crate::optim::{AdamConfig, AdamState};
use crate::scalar::Scalar;
use crate::synth::{grad_theta, SynthGrad, Synthesiser};
use crate::tasks::Episode;
use crate::tensor::{axpy_slice, contract_into, contract_row, matvec_t, trace_contract, Matrix, Tensor3, Vector};
use crate::trajectory::{with_step, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Sum increments over the batch and apply them with ADAM.
    Batched,
    /// Apply every increment immediately with plain SGD.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Synthesiser learning rate `α`.
    pub alpha: f64,
    /// Recurrent network learning rate `η`.
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Factor applied to the synthetic gradient where the network consumes it.
    pub sg_scale: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: UpdateMode,
    /// `false` freezes `Ψ` and the readout; only `θ` learns.
    pub train_rnn: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            eta: 1e-3,
            gamma: 0.9,
            lambda: 1.0,
            sg_scale: 1.0,
            batch_size: 10,
            seed: 0,
            mode: UpdateMode::Batched,
            train_rnn: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.alpha > 0.0 && self.eta > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !self.sg_scale.is_finite() {
            return bad("sg_scale must be finite");
        }
        Ok(())
    }
}

/// `e_t`, shape `(|h|, |h|, |h|+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityTrace<S> {
    e: Tensor3<S>,
    scratch: Tensor3<S>,
}

impl<S: Scalar> EligibilityTrace<S> {
    pub fn zeros(state_dim: usize) -> Self {
        let e = Tensor3::zeros(state_dim, state_dim, state_dim + 1);
        Self { scratch: e.clone(), e }
    }

    pub fn from_tensor(e: Tensor3<S>) -> Result<Self> {
        let [a, b, c] = e.dims();
        if a != b || c != a + 1 {
            return Err(shape_err("EligibilityTrace", "(n, n, n+1)", format!("{:?}", e.dims())));
        }
        Ok(Self { scratch: e.clone(), e })
    }

    pub fn state_dim(&self) -> usize {
        self.e.dims()[0]
    }

    pub fn tensor(&self) -> &Tensor3<S> {
        &self.e
    }

    pub fn reset(&mut self) {
        self.e.fill(S::zero());
    }

    /// `e ← decay · (∂h_t/∂h_{t−1}) e + ∇_θ g(h_t)`, using the sparse
    /// structure of the synthesiser gradient. With `decay == 0` the history
    /// is discarded without touching the Jacobian.
    pub fn update(&mut self, jac: &Matrix<S>, grad: &SynthGrad<S>, decay: S) -> Result<()> {
        let n = self.state_dim();
        if jac.shape() != (n, n) {
            return Err(shape_err(
                "update_trace(jac)",
                format!("({n}, {n})"),
                format!("{:?}", jac.shape()),
            ));
        }
        if grad.state_dim() != n {
            return Err(shape_err("update_trace(grad)", n, grad.state_dim()));
        }
        if decay == S::zero() {
            self.e.fill(S::zero());
        } else {
            contract_into(jac, &self.e, &mut self.scratch);
            if decay != S::one() {
                self.scratch.scale_in_place(decay);
            }
            std::mem::swap(&mut self.e, &mut self.scratch);
        }
        self.add_grad(grad);
        Ok(())
    }

    /// Adds `∇_θ g` only: the first step of a sequence.
    pub fn add_grad(&mut self, grad: &SynthGrad<S>) {
        let m = self.e.dims()[2];
        let z = grad.input().as_slice();
        for j in 0..self.state_dim() {
            axpy_slice(&mut self.e.slab_mut(j)[j * m..(j + 1) * m], S::one(), z);
        }
    }

    /// Reference update through the public contraction and a dense gradient.
    pub fn update_dense(&mut self, jac: &Matrix<S>, grad: &Tensor3<S>, decay: S) -> Result<()> {
        let mut next = trace_contract(jac, &self.e)?.into_tensor();
        next.scale_in_place(decay);
        next.add_scaled(S::one(), grad)?;
        self.e = next;
        Ok(())
    }

    /// `δᵀ e`, shaped like `θ`.
    pub fn contract(&self, delta: &Vector<S>) -> Result<Matrix<S>> {
        contract_row(delta, &self.e)
    }
}

/// Functional form of [`EligibilityTrace::update`] with decay `γλ`.
pub fn update_trace<S: Scalar>(
    e: &EligibilityTrace<S>,
    jac: &Matrix<S>,
    grad: &SynthGrad<S>,
    gamma: S,
    lambda: S,
) -> Result<EligibilityTrace<S>> {
    let mut next = e.clone();
    next.update(jac, grad, gamma * lambda)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdError<S> {
    pub delta: Vector<S>,
}

/// `δ_t = ∂L_{t+1}/∂h_t + γ (∂h_{t+1}/∂h_t)ᵀ g(h_{t+1}) − g(h_t)`.
///
/// `grad_loss_next` is already pulled back to `h_t`.
pub fn td_error<S: Scalar>(
    grad_loss_next: &Vector<S>,
    g_next: &Vector<S>,
    jac: &Matrix<S>,
    g_curr: &Vector<S>,
    gamma: S,
) -> Result<TdError<S>> {
    let mut delta = matvec_t(jac, g_next)?;
    delta.scale_in_place(gamma);
    delta.axpy(S::one(), grad_loss_next)?;
    delta.axpy(-S::one(), g_curr)?;
    Ok(TdError { delta })
}

/// Raw update `θ ← θ + α δᵀ e`.
pub fn apply_synth_update<S: Scalar>(
    synth: &mut Synthesiser<S>,
    delta: &TdError<S>,
    trace: &EligibilityTrace<S>,
    alpha: S,
) -> Result<()> {
    let inc = trace.contract(&delta.delta)?;
    synth.add_scaled(alpha, &inc)
}

/// Per-step record of a raw replay.
#[derive(Debug, Clone)]
pub struct RawReplay<S> {
    /// `θ_0 … θ_T`; `θ_t` is the weight used at step `t`.
    pub thetas: Vec<Synthesiser<S>>,
    /// `δ_0 … δ_{T−1}`.
    pub deltas: Vec<Vector<S>>,
    /// `e_0 … e_{T−1}`.
    pub traces: Vec<Tensor3<S>>,
}

/// Raw-mode accumulate BP(λ) driven by a recorded trajectory with frozen
/// network weights. Produces exactly the synthesiser sequence that
/// [`BpLambda`] yields in [`UpdateMode::Raw`] with `train_rnn = false`.
pub fn replay_raw<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    theta0: &Synthesiser<S>,
    alpha: S,
    lambda: S,
    gamma: S,
    keep_traces: bool,
) -> Result<RawReplay<S>> {
    let n = traj.state_dim();
    let t_len = traj.len();
    let mut synth = theta0.clone();
    let mut trace = EligibilityTrace::zeros(n);
    let mut thetas = vec![synth.clone()];
    let mut deltas = Vec::with_capacity(t_len);
    let mut traces = Vec::new();
    for t in 0..t_len {
        let h = traj.state(t);
        let grad = grad_theta(h);
        if t == 0 {
            trace.add_grad(&grad);
        } else {
            trace.update(traj.jac(t), &grad, gamma * lambda)?;
        }
        let g_next = synth.value(traj.state(t + 1), t + 1 == t_len)?;
        let g_curr = synth.value(h, false)?;
        let pulled = traj.pull(t + 1, traj.loss_grad(t + 1));
        let delta = td_error(&pulled, &g_next, traj.jac(t + 1), &g_curr, gamma)?;
        apply_synth_update(&mut synth, &delta, &trace, alpha)?;
        if keep_traces {
            traces.push(trace.tensor().clone());
        }
        deltas.push(delta.delta);
        thetas.push(synth.clone());
    }
    Ok(RawReplay { thetas, deltas, traces })
}

/// The accumulate BP(λ) learner: co-trains `Ψ` with synthetic gradients and
/// `θ` with TD errors and eligibility traces.
#[derive(Debug, Clone)]
pub struct BpLambda<S> {
    cfg: TrainerConfig,
    synth: Synthesiser<S>,
    trace: EligibilityTrace<S>,
    theta_grad: Matrix<S>,
    theta_opt: AdamState<S>,
    model_grads: ModelGrads<S>,
    model_opt: ModelOptimiser<S>,
}

impl<S: Scalar> BpLambda<S> {
    pub fn new(cfg: TrainerConfig, model: &Model<S>) -> Result<Self> {
        cfg.validate()?;
        let n = model.state_dim();
        let synth = Synthesiser::zeros(n);
        Ok(Self {
            cfg,
            theta_grad: Matrix::zeros(n, n + 1),
            theta_opt: AdamState::new(n * (n + 1), AdamConfig::with_rate(cfg.alpha)),
            trace: EligibilityTrace::zeros(n),
            model_grads: ModelGrads::zeros_like(model),
            model_opt: ModelOptimiser::new(model, AdamConfig::with_rate(cfg.eta)),
            synth,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn synth(&self) -> &Synthesiser<S> {
        &self.synth
    }

    pub fn trace(&self) -> &EligibilityTrace<S> {
        &self.trace
    }

    /// Runs one sequence. In batched mode the increments are only
    /// accumulated; [`Learner::train_batch`] applies them.
    pub fn train_sequence(&mut self, model: &mut Model<S>, episode: &Episode<S>) -> Result<EpisodeOutcome<S>> {
        let cfg = self.cfg;
        let gamma = S::lit(cfg.gamma);
        let decay = gamma * S::lit(cfg.lambda);
        let alpha = S::lit(cfg.alpha);
        let eta = S::lit(cfg.eta);
        let scale = S::lit(cfg.sg_scale);
        let raw = cfg.mode == UpdateMode::Raw;
        let t_len = episode.len();
        if t_len == 0 {
            return Err(Error::Invalid("empty episode".into()));
        }

        let mut h = model.rnn.zero_state();
        let mut prev_jac: Option<Matrix<S>> = None;
        let mut total = S::zero();
        let mut predictions = Vec::new();
        self.trace.reset();

        for (i, step) in episode.steps.iter().enumerate() {
            let t = i + 1;
            let grad = grad_theta(&h);
            match &prev_jac {
                None => self.trace.add_grad(&grad),
                Some(j) => self.trace.update(j, &grad, decay)?,
            }

            let out = model.rnn.step(&step.input, &h).map_err(|e| with_step(e, t))?;
            let rl = model
                .readout
                .readout(&out.next_state, step.target.as_ref())
                .map_err(|e| with_step(e, t))?;
            if !rl.loss.is_finite() {
                return Err(Error::NonFinite {
                    context: "loss",
                    step: t,
                });
            }
            total += rl.loss;
            if step.target.is_some() {
                predictions.push((t, rl.prediction.clone()));
            }

            let g_next = self.synth.value(&out.next_state, t == t_len)?;
            let g_curr = self.synth.value(&h, false)?;
            let pulled = matvec_t(&out.jac_state, &rl.grad_state)?;
            let delta = td_error(&pulled, &g_next, &out.jac_state, &g_curr, gamma)?;
            if !delta.delta.is_finite() {
                return Err(Error::NonFinite {
                    context: "TD error",
                    step: t,
                });
            }
            let inc = self.trace.contract(&delta.delta)?;
            if raw {
                self.synth.add_scaled(alpha, &inc)?;
            } else {
                // ADAM descends, the TD increment ascends.
                self.theta_grad.add_scaled(-S::one(), &inc)?;
            }

            if cfg.train_rnn {
                let mut adjoint = rl.grad_state.clone();
                adjoint.axpy(scale, &g_next)?;
                model
                    .rnn
                    .accumulate_vjp(&out.cache, &adjoint, &mut self.model_grads.rnn)?;
                model
                    .readout
                    .accumulate_grads(&out.next_state, &rl.grad_logits, &mut self.model_grads.readout)?;
                if raw {
                    sgd_model(model, &self.model_grads, eta)?;
                    self.model_grads.clear();
                }
            }

            h = out.next_state;
            prev_jac = Some(out.jac_state);
        }
        Ok(EpisodeOutcome {
            loss: total,
            predictions,
        })
    }

    fn apply_batch(&mut self, model: &mut Model<S>) -> Result<()> {
        if self.cfg.mode == UpdateMode::Batched {
            self.theta_opt
                .step(self.synth.theta_mut().as_mut_slice(), self.theta_grad.as_slice())?;
            self.theta_grad.fill(S::zero());
            if self.cfg.train_rnn {
                self.model_opt.step(model, &self.model_grads)?;
            }
        }
        self.model_grads.clear();
        Ok(())
    }
}

impl<S: Scalar> Learner<S> for BpLambda<S> {
    fn name(&self) -> String {
        format!("bp_lambda({})", self.cfg.lambda)
    }

    fn train_batch(&mut self, model: &mut Model<S>, batch: &[Episode<S>]) -> Result<BatchStats<S>> {
        let mut episodes = Vec::with_capacity(batch.len());
        for ep in batch {
            episodes.push(self.train_sequence(model, ep)?);
        }
        self.apply_batch(model)?;
        Ok(BatchStats { episodes })
    }

    fn synthesiser(&self) -> Option<&Synthesiser<S>> {
        Some(&self.synth)
    }
}

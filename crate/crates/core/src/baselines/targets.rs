//! Synthesiser regression targets computed from a recorded trajectory.
//!
//! Bootstrap predictions are passed in as `boot[τ] = ĝ(h_τ)` for
//! `τ = 0 … T` (see [`TrajectoryRecord::bootstrap`]) so callers decide which
//! weights produced each prediction. `boot[T]` must be zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Vector;
use crate::trajectory::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TargetKind {
    OneStep,
    NStep(usize),
    Lambda(f64),
    Interim { lambda: f64, horizon: usize },
    TrueBptt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector<S> {
    pub value: Vector<S>,
    pub kind: TargetKind,
}

fn check_t<S: Scalar>(traj: &TrajectoryRecord<S>, t: usize) -> Result<()> {
    if t >= traj.len() {
        return Err(Error::OutOfRange {
            what: "target timestep",
            index: t,
            len: traj.len(),
        });
    }
    Ok(())
}

fn check_boot<S: Scalar>(traj: &TrajectoryRecord<S>, boot: &[Vector<S>]) -> Result<()> {
    if boot.len() != traj.len() + 1 {
        return Err(crate::error::shape_err(
            "bootstrap predictions",
            traj.len() + 1,
            boot.len(),
        ));
    }
    Ok(())
}

/// `G_t` for every `t = 0 … T`, by one reverse sweep (`G_T = 0`).
pub fn true_gradients<S: Scalar>(traj: &TrajectoryRecord<S>, gamma: S) -> Vec<Vector<S>> {
    let t_len = traj.len();
    let mut out = vec![Vector::zeros(traj.state_dim()); t_len + 1];
    for t in (0..t_len).rev() {
        let mut v = traj.loss_grad(t + 1).clone();
        v.axpy(gamma, &out[t + 1]).expect("state dims agree");
        out[t] = traj.pull(t + 1, &v);
    }
    out
}

/// `G_t = Σ_{τ≥1} γ^{τ−1} ∂L_{t+τ}/∂h_t`.
pub fn true_gradient<S: Scalar>(traj: &TrajectoryRecord<S>, t: usize, gamma: S) -> Result<TargetVector<S>> {
    check_t(traj, t)?;
    let mut acc = Vector::zeros(traj.state_dim());
    for tau in (t + 1..=traj.len()).rev() {
        let mut v = traj.loss_grad(tau).clone();
        v.axpy(gamma, &acc)?;
        acc = traj.pull(tau, &v);
    }
    Ok(TargetVector {
        value: acc,
        kind: TargetKind::TrueBptt,
    })
}

/// `G_t^{(n)} = Σ_{t<τ≤t+n} γ^{τ−t−1} ∂L_τ/∂h_t + γ^n ĝ_{t+n} ∂h_{t+n}/∂h_t`.
pub fn n_step_target<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    t: usize,
    n: usize,
    boot: &[Vector<S>],
    gamma: S,
) -> Result<TargetVector<S>> {
    check_t(traj, t)?;
    check_boot(traj, boot)?;
    if n == 0 || t + n > traj.len() {
        return Err(Error::Invalid(format!(
            "n-step horizon overrun: t = {t}, n = {n}, T = {}",
            traj.len()
        )));
    }
    let value = n_step_value(traj, t, n, boot, gamma);
    Ok(TargetVector {
        value,
        kind: if n == 1 {
            TargetKind::OneStep
        } else {
            TargetKind::NStep(n)
        },
    })
}

pub(crate) fn n_step_value<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    t: usize,
    n: usize,
    boot: &[Vector<S>],
    gamma: S,
) -> Vector<S> {
    let end = t + n;
    let mut acc = boot[end].scaled(gamma);
    acc.axpy(S::one(), traj.loss_grad(end)).expect("dims");
    acc = traj.pull(end, &acc);
    for tau in (t + 1..end).rev() {
        let mut v = traj.loss_grad(tau).clone();
        v.axpy(gamma, &acc).expect("dims");
        acc = traj.pull(tau, &v);
    }
    acc
}

/// Weights of `G^{(1)}, …, G^{(m)}` followed by the tail weight in the
/// truncated λ-mixture, where `m = T − t − 1`. They sum to one.
pub fn lambda_weights(lambda: f64, t: usize, t_len: usize) -> Vec<f64> {
    let m = t_len - t - 1;
    let mut w: Vec<f64> = (1..=m).map(|n| (1.0 - lambda) * lambda.powi(n as i32 - 1)).collect();
    w.push(lambda.powi(m as i32));
    w
}

/// `G_t^λ = (1−λ) Σ_{n=1}^{T−t−1} λ^{n−1} G_t^{(n)} + λ^{T−t−1} G_t`,
/// evaluated term by term.
pub fn lambda_target<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    t: usize,
    lambda: S,
    boot: &[Vector<S>],
    gamma: S,
) -> Result<TargetVector<S>> {
    check_t(traj, t)?;
    check_boot(traj, boot)?;
    let value = mixture(traj, t, traj.len(), lambda, boot, gamma, true);
    Ok(TargetVector {
        value,
        kind: TargetKind::Lambda(lambda.to_f64_lossy()),
    })
}

/// `G_k^{λ|H} = (1−λ) Σ_{n=1}^{H−k−1} λ^{n−1} G_k^{(n)} + λ^{H−k−1} G_k^{(H−k)}`,
/// evaluated term by term. Needs `k < H ≤ T`.
pub fn interim_lambda_target<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    k: usize,
    lambda: S,
    horizon: usize,
    boot: &[Vector<S>],
    gamma: S,
) -> Result<TargetVector<S>> {
    check_boot(traj, boot)?;
    if k >= horizon || horizon > traj.len() {
        return Err(Error::Invalid(format!(
            "interim target needs k < H <= T (k = {k}, H = {horizon}, T = {})",
            traj.len()
        )));
    }
    let value = mixture(traj, k, horizon, lambda, boot, gamma, false);
    Ok(TargetVector {
        value,
        kind: TargetKind::Interim {
            lambda: lambda.to_f64_lossy(),
            horizon,
        },
    })
}

fn mixture<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    t: usize,
    horizon: usize,
    lambda: S,
    boot: &[Vector<S>],
    gamma: S,
    true_tail: bool,
) -> Vector<S> {
    let one = S::one();
    let m = horizon - t - 1;
    let mut acc = Vector::zeros(traj.state_dim());
    for n in 1..=m {
        let w = (one - lambda) * lambda.powi(n as i32 - 1);
        if w != S::zero() {
            acc.axpy(w, &n_step_value(traj, t, n, boot, gamma)).expect("dims");
        }
    }
    let tail_w = lambda.powi(m as i32);
    if tail_w != S::zero() {
        let tail = if true_tail {
            true_gradient(traj, t, gamma).expect("t checked").value
        } else {
            n_step_value(traj, t, horizon - t, boot, gamma)
        };
        acc.axpy(tail_w, &tail).expect("dims");
    }
    acc
}

/// All interim targets `G_k^{λ|H}` for `k = 0 … H−1` in one reverse sweep:
/// `G_{H−1} = G_{H−1}^{(1)}` and
/// `G_k = J_{k+1}ᵀ(∂L_{k+1}/∂h_{k+1} + γ(λ G_{k+1} + (1−λ) ĝ_{k+1}))`.
pub fn interim_targets_recursive<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    lambda: S,
    horizon: usize,
    boot: &[Vector<S>],
    gamma: S,
) -> Vec<Vector<S>> {
    assert!(horizon >= 1 && horizon <= traj.len() && boot.len() > horizon);
    let one = S::one();
    let mut out = vec![Vector::zeros(traj.state_dim()); horizon];
    let mut next = boot[horizon].scaled(gamma);
    next.axpy(one, traj.loss_grad(horizon)).expect("dims");
    out[horizon - 1] = traj.pull(horizon, &next);
    for k in (0..horizon - 1).rev() {
        let mut v = traj.loss_grad(k + 1).clone();
        v.axpy(gamma * lambda, &out[k + 1]).expect("dims");
        v.axpy(gamma * (one - lambda), &boot[k + 1]).expect("dims");
        out[k] = traj.pull(k + 1, &v);
    }
    out
}

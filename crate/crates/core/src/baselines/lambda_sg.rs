//! Offline and online λ-SG: direct regression of the synthesiser onto
//! λ-weighted targets computed from a stored trajectory.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::synth::{grad_theta, Synthesiser};
use crate::tensor::{outer, Vector};
use crate::trajectory::TrajectoryRecord;

use super::targets::{interim_targets_recursive, lambda_target};

/// `θ ← θ + α (v − g(h; θ)) ⊗ [h‖1]`.
pub fn regress_step<S: Scalar>(synth: &mut Synthesiser<S>, h: &Vector<S>, target: &Vector<S>, alpha: S) -> Result<()> {
    let err = target.sub(&synth.raw(h)?)?;
    synth.add_scaled(alpha, &outer(&err, grad_theta(h).input()))
}

/// One offline pass over complete sequences. Targets of each sequence are
/// computed with the weights held at its start; the regression steps then
/// run in time order.
pub fn offline_lambda_sg_epoch<S: Scalar>(
    trajs: &[TrajectoryRecord<S>],
    synth: &Synthesiser<S>,
    alpha: S,
    lambda: S,
    gamma: S,
) -> Result<Synthesiser<S>> {
    let mut out = synth.clone();
    for traj in trajs {
        let boot = traj.bootstrap(&out)?;
        let targets = (0..traj.len())
            .map(|t| lambda_target(traj, t, lambda, &boot, gamma).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        for (t, v) in targets.iter().enumerate() {
            regress_step(&mut out, traj.state(t), v, alpha)?;
        }
    }
    Ok(out)
}

/// Weights after horizon `H`: restart from `theta_init` and regress
/// `g(h_k)` onto `G_k^{λ|H}` for `k = 0 … H−1` in order.
///
/// `boot[τ]` is the bootstrap used at `h_τ`; only `boot[1..=H]` is read.
pub fn online_lambda_sg_step<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    horizon: usize,
    theta_init: &Synthesiser<S>,
    boot: &[Vector<S>],
    alpha: S,
    lambda: S,
    gamma: S,
) -> Result<Synthesiser<S>> {
    let targets = interim_targets_recursive(traj, lambda, horizon, boot, gamma);
    let mut synth = theta_init.clone();
    for (k, v) in targets.iter().enumerate() {
        regress_step(&mut synth, traj.state(k), v, alpha)?;
    }
    Ok(synth)
}

/// Online λ-SG over a whole sequence. Returns `θ^λ_0 … θ^λ_T` with
/// `θ^λ_0 = theta_init`. The bootstrap at `h_τ` uses `θ^λ_{τ−1}`, and the
/// final state predicts zero.
pub fn online_lambda_sg_run<S: Scalar>(
    traj: &TrajectoryRecord<S>,
    theta_init: &Synthesiser<S>,
    alpha: S,
    lambda: S,
    gamma: S,
) -> Result<Vec<Synthesiser<S>>> {
    let t_len = traj.len();
    let mut thetas = vec![theta_init.clone()];
    let mut boot = vec![theta_init.value(traj.state(0), t_len == 0)?];
    for h in 1..=t_len {
        boot.push(thetas[h - 1].value(traj.state(h), h == t_len)?);
        let mut padded = boot.clone();
        padded.resize(t_len + 1, Vector::zeros(traj.state_dim()));
        thetas.push(online_lambda_sg_step(
            traj, h, theta_init, &padded, alpha, lambda, gamma,
        )?);
    }
    Ok(thetas)
}

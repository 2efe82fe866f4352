//! Numerical checks of the equivalence between accumulate BP(λ) and online
//! λ-SG, the lemma chain behind it, the recursive form of the λ-target, and
//! the shared finite-difference oracle.

use rand::Rng;
use serde::Serialize;

use crate::baselines::lambda_sg::online_lambda_sg_run;
use crate::baselines::targets::{interim_lambda_target, lambda_target};
use crate::bp_lambda::replay_raw;
use crate::cells::{CellKind, HeadKind, Model, Target};
use crate::error::{Error, Result};
use crate::synth::{grad_theta, Synthesiser};
use crate::tasks::{task_rng, Episode, TaskStep};
use crate::tensor::{outer, trace_contract, Matrix, Tensor3, Vector};
use crate::trajectory::{ForwardPass, TrajectoryRecord};

/// Central-difference Jacobian of `f` at `point`: row `i`, column `j` is
/// `∂f_i/∂x_j`.
pub fn finite_difference<F>(f: F, point: &[f64], step: f64) -> Result<Matrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Invalid("finite-difference step must be positive".into()));
    }
    let base = f(point);
    let mut jac = Matrix::zeros(base.len(), point.len());
    let mut x = point.to_vec();
    for j in 0..point.len() {
        x[j] = point[j] + step;
        let up = f(&x);
        x[j] = point[j] - step;
        let down = f(&x);
        x[j] = point[j];
        for i in 0..base.len() {
            let d = (up[i] - down[i]) / (2.0 * step);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "finite difference",
                    step: j,
                });
            }
            jac.set(i, j, d);
        }
    }
    Ok(jac)
}

/// Relative error `‖a − b‖∞ / ‖b‖∞` (denominator floored at 1e-12).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// A random frozen system: model, episode and recorded trajectory.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: Model<f64>,
    pub episode: Episode<f64>,
    pub traj: TrajectoryRecord<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceSpec {
    pub kind: CellKind,
    pub units: usize,
    pub input_dim: usize,
    pub t_len: usize,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn linear(units: usize, t_len: usize, seed: u64) -> Self {
        Self {
            kind: CellKind::Linear,
            units,
            input_dim: 3,
            t_len,
            seed,
        }
    }

    /// Random inputs and a random 2-d regression target at every step.
    pub fn build(&self) -> Result<Instance> {
        let mut rng = task_rng(self.seed);
        let model = Model::init(self.kind, HeadKind::Mse, self.input_dim, self.units, 2, &mut rng);
        let steps = (0..self.t_len)
            .map(|_| TaskStep {
                input: Vector::from_vec((0..self.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()),
                target: Some(Target::Regression(Vector::from_vec(
                    (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                ))),
            })
            .collect();
        let episode = Episode::new(steps);
        let traj = ForwardPass::run(&model, &episode)?.record;
        Ok(Instance { model, episode, traj })
    }
}

/// A synthesiser with entries uniform in `±scale`.
pub fn random_synth<R: Rng>(state_dim: usize, scale: f64, rng: &mut R) -> Synthesiser<f64> {
    let theta = Matrix::from_vec(
        state_dim,
        state_dim + 1,
        (0..state_dim * (state_dim + 1))
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    )
    .expect("shape");
    Synthesiser::from_theta(theta).expect("shape")
}

/// Largest deviation between the term-by-term λ-target and the backward
/// recursion `G_t = J_{t+1}ᵀ(∂L_{t+1}/∂h_{t+1} + γλ G_{t+1} + γ(1−λ) g(h_{t+1}))`.
pub fn recursive_identity_check(
    traj: &TrajectoryRecord<f64>,
    synth: &Synthesiser<f64>,
    lambda: f64,
    gamma: f64,
) -> Result<f64> {
    let t_len = traj.len();
    let boot = traj.bootstrap(synth)?;
    let mut rec = vec![Vector::zeros(traj.state_dim()); t_len + 1];
    for t in (0..t_len).rev() {
        let mut v = traj.loss_grad(t + 1).clone();
        v.axpy(gamma * lambda, &rec[t + 1])?;
        v.axpy(gamma * (1.0 - lambda), &boot[t + 1])?;
        rec[t] = traj.pull(t + 1, &v);
    }
    let mut worst = 0.0f64;
    for (t, r) in rec.iter().enumerate().take(t_len) {
        let def = lambda_target(traj, t, lambda, &boot, gamma)?.value;
        worst = worst.max(def.max_abs_diff(r)?);
    }
    Ok(worst)
}

/// `(∂h_b/∂h_a)ᵀ v`.
pub fn pull_range(traj: &TrajectoryRecord<f64>, a: usize, b: usize, v: &Vector<f64>) -> Vector<f64> {
    let mut out = v.clone();
    for tau in (a + 1..=b).rev() {
        out = traj.pull(tau, &out);
    }
    out
}

/// Weights used for the bootstrap at `h_τ`: `θ_{τ−1}`, with `θ_{−1} = θ_0`.
fn boot_weights(thetas: &[Synthesiser<f64>], tau: usize) -> &Synthesiser<f64> {
    &thetas[tau.saturating_sub(1)]
}

/// Bootstraps `g(h_τ; θ_{τ−1})` with the final-step zero rule.
pub fn lagged_bootstrap(traj: &TrajectoryRecord<f64>, thetas: &[Synthesiser<f64>]) -> Result<Vec<Vector<f64>>> {
    let t_len = traj.len();
    (0..=t_len)
        .map(|tau| boot_weights(thetas, tau).value(traj.state(tau), tau == t_len))
        .collect()
}

/// `δ′_{a,t} = ∂L_{t+1}/∂h_a + γ (∂h_{t+1}/∂h_a)ᵀ g(h_{t+1}; θ_t) − (∂h_t/∂h_a)ᵀ g(h_t; θ_{t−1})`,
/// with bootstraps taken from `boot`.
pub fn delta_prime(traj: &TrajectoryRecord<f64>, boot: &[Vector<f64>], a: usize, t: usize, gamma: f64) -> Vector<f64> {
    let mut v = traj.loss_grad(t + 1).clone();
    v.axpy(gamma, &boot[t + 1]).expect("dims");
    let mut out = pull_range(traj, a, t + 1, &v);
    out.axpy(-1.0, &pull_range(traj, a, t, &boot[t])).expect("dims");
    out
}

/// Per-lemma largest deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaReport {
    /// Telescoping increment of the interim target.
    pub lemma1: f64,
    /// Interim target as base plus weighted `δ′` sum.
    pub lemma2: f64,
    /// Base case `G_a^{λ|a+1} = δ′_{a,a} + g(h_a; θ_{a−1})`.
    pub lemma3: f64,
    /// Weighted `δ′` sum equals `G_a^{λ|t} − g(h_a; θ_{a−1})`.
    pub lemma4: f64,
    /// Recursive trace against its explicit unrolled sum.
    pub lemma5: f64,
    /// Gap between the weighted `δ` sum and `G_a^{λ|t} − g(h_a; θ_{a−1})`.
    pub lemma6_gap: f64,
}

/// Runs raw BP(λ) on the frozen trajectory from `theta0` and checks every
/// lemma against the recorded weight history.
pub fn lemma_suite(
    traj: &TrajectoryRecord<f64>,
    theta0: &Synthesiser<f64>,
    alpha: f64,
    lambda: f64,
    gamma: f64,
) -> Result<LemmaReport> {
    let t_len = traj.len();
    let replay = replay_raw(traj, theta0, alpha, lambda, gamma, true)?;
    let thetas = &replay.thetas;
    let boot = lagged_bootstrap(traj, thetas)?;
    let gl = gamma * lambda;
    let mut r = LemmaReport {
        lemma1: 0.0,
        lemma2: 0.0,
        lemma3: 0.0,
        lemma4: 0.0,
        lemma5: 0.0,
        lemma6_gap: 0.0,
    };
    let interim = |a: usize, h: usize| -> Result<Vector<f64>> {
        Ok(interim_lambda_target(traj, a, lambda, h, &boot, gamma)?.value)
    };

    for a in 0..t_len {
        let dp: Vec<Vector<f64>> = (a..t_len).map(|t| delta_prime(traj, &boot, a, t, gamma)).collect();
        let base = interim(a, a + 1)?;

        let mut l3 = dp[0].clone();
        l3.axpy(1.0, &boot[a])?;
        r.lemma3 = r.lemma3.max(base.max_abs_diff(&l3)?);

        let mut dsum = Vector::zeros(traj.state_dim());
        let mut dp_sum = Vector::zeros(traj.state_dim());
        for t in a + 1..=t_len {
            let w = gl.powi((t - 1 - a) as i32);
            let g_t = interim(a, t)?;
            if t < t_len {
                let g_next = interim(a, t + 1)?;
                let mut l1 = g_t.clone();
                l1.axpy(gl.powi((t - a) as i32), &dp[t - a])?;
                r.lemma1 = r.lemma1.max(g_next.max_abs_diff(&l1)?);
            }
            let mut l2 = base.clone();
            for b in a + 1..t {
                l2.axpy(gl.powi((b - a) as i32), &dp[b - a])?;
            }
            r.lemma2 = r.lemma2.max(g_t.max_abs_diff(&l2)?);

            dp_sum.axpy(w, &dp[t - 1 - a])?;
            let rhs = g_t.sub(&boot[a])?;
            r.lemma4 = r.lemma4.max(dp_sum.max_abs_diff(&rhs)?);

            let d = pull_range(traj, a, t - 1, &replay.deltas[t - 1]);
            dsum.axpy(w, &d)?;
            r.lemma6_gap = r.lemma6_gap.max(dsum.max_abs_diff(&rhs)?);
        }
    }

    let n = traj.state_dim();
    for b in 0..t_len {
        let mut explicit = Tensor3::zeros(n, n, n + 1);
        for a in 0..=b {
            let mut term = grad_theta(traj.state(a)).materialise();
            for tau in a + 1..=b {
                term = trace_contract(traj.jac(tau), &term)?.into_tensor();
            }
            explicit.add_scaled(gl.powi((b - a) as i32), &term)?;
        }
        r.lemma5 = r.lemma5.max(explicit.max_abs_diff(&replay.traces[b])?);
    }
    Ok(r)
}

/// Theorem-1 ratio at one α.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub alpha: f64,
    /// Largest ratio over `t = 1 … T`.
    pub ratio: f64,
    /// `‖θ^BP_t − θ^λ_t‖ / ‖θ^BP_t − θ_0‖` for `t = 1 … T`.
    pub per_t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub lambda: f64,
    pub gamma: f64,
    /// `false` when some entry of `Σ_a Δ_a^t` vanishes; the ratios are then
    /// not meaningful and no verdict is given. Entries whose input column is
    /// zero at every `a < t` (the state columns at `t = 1`, since `h_0 = 0`)
    /// are exempt: both increments are exactly zero there.
    pub condition_holds: bool,
    pub points: Vec<RatioPoint>,
}

impl RatioReport {
    /// Ratios non-increasing along the (decreasing) α sweep.
    pub fn monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].ratio <= w[0].ratio)
    }
}

/// `Σ_a (Ḡ_a^{λ|t} − g(h_a; θ_0)) ⊗ [h_a‖1]` for every `t = 1 … T`, with all
/// bootstraps from `θ_0`.
pub fn delta_sums(
    traj: &TrajectoryRecord<f64>,
    theta0: &Synthesiser<f64>,
    lambda: f64,
    gamma: f64,
) -> Result<Vec<Matrix<f64>>> {
    let boot = traj.bootstrap(theta0)?;
    let n = traj.state_dim();
    let mut out = Vec::with_capacity(traj.len());
    for t in 1..=traj.len() {
        let mut sum = Matrix::zeros(n, n + 1);
        for a in 0..t {
            let g = interim_lambda_target(traj, a, lambda, t, &boot, gamma)?.value;
            let err = g.sub(&theta0.raw(traj.state(a))?)?;
            sum.add_scaled(1.0, &outer(&err, grad_theta(traj.state(a)).input()))?;
        }
        out.push(sum);
    }
    Ok(out)
}

fn diff_norm(a: &Synthesiser<f64>, b: &Synthesiser<f64>) -> f64 {
    a.theta()
        .as_slice()
        .iter()
        .zip(b.theta().as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Runs raw BP(λ) and online λ-SG from the same `θ_0` on the frozen
/// trajectory for each α (given in decreasing order).
pub fn theorem1_ratio(
    traj: &TrajectoryRecord<f64>,
    theta0: &Synthesiser<f64>,
    lambda: f64,
    gamma: f64,
    alphas: &[f64],
) -> Result<RatioReport> {
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("alphas must be strictly decreasing".into()));
    }
    let condition_holds = delta_sums(traj, theta0, lambda, gamma)?
        .iter()
        .enumerate()
        .all(|(i, m)| {
            let t = i + 1;
            (0..m.rows()).all(|r| {
                (0..m.cols()).all(|k| {
                    let live = (0..t).any(|a| grad_theta(traj.state(a)).input()[k] != 0.0);
                    !live || m.get(r, k).abs() > 1e-12
                })
            })
        });
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let bp = replay_raw(traj, theta0, alpha, lambda, gamma, false)?.thetas;
        let sg = online_lambda_sg_run(traj, theta0, alpha, lambda, gamma)?;
        let per_t: Vec<f64> = (1..=traj.len())
            .map(|t| {
                let den = diff_norm(&bp[t], theta0);
                if den == 0.0 {
                    0.0
                } else {
                    diff_norm(&bp[t], &sg[t]) / den
                }
            })
            .collect();
        let ratio = per_t.iter().copied().fold(0.0, f64::max);
        points.push(RatioPoint { alpha, ratio, per_t });
    }
    Ok(RatioReport {
        lambda,
        gamma,
        condition_holds,
        points,
    })
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub instance: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, instance: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            instance: instance.into(),
            deviation,
            tolerance,
            pass: deviation.is_finite() && deviation < tolerance,
        }
    }
}

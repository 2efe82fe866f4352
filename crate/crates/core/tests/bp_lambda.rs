#![allow(clippy::needless_range_loop)]

use bplambda::baselines::{n_step_target, regress_step, true_gradients, windowed_grads};
use bplambda::cells::{CellKind, HeadKind, Model, Target};
use bplambda::learner::ModelGrads;
use bplambda::tasks::{task_rng, ToyFixed, TOY_INPUT_DIM, TOY_OUTPUT_DIM};
use bplambda::tensor::matvec_t;
use bplambda::theory::{random_synth, InstanceSpec};
use bplambda::{
    cosine_alignment, replay_raw, td_error, BpLambda, Episode, ForwardPass, Learner, Matrix, Synthesiser, TaskStep,
    TrainerConfig, UpdateMode, Vector,
};

fn raw_cfg(lambda: f64, gamma: f64, alpha: f64) -> TrainerConfig {
    TrainerConfig {
        alpha,
        eta: 1e-3,
        gamma,
        lambda,
        sg_scale: 1.0,
        batch_size: 1,
        seed: 0,
        mode: UpdateMode::Raw,
        train_rnn: false,
    }
}

#[test]
fn lambda_zero_is_one_step_regression() {
    let inst = InstanceSpec::linear(4, 8, 3).build().unwrap();
    let s0 = random_synth(4, 0.3, &mut task_rng(1));
    let (alpha, gamma) = (0.05, 0.9);
    let replay = replay_raw(&inst.traj, &s0, alpha, 0.0, gamma, false).unwrap();
    let mut synth = s0.clone();
    for t in 0..inst.traj.len() {
        let boot = inst.traj.bootstrap(&synth).unwrap();
        let v = n_step_target(&inst.traj, t, 1, &boot, gamma).unwrap().value;
        regress_step(&mut synth, inst.traj.state(t), &v, alpha).unwrap();
        let d = replay.thetas[t + 1].theta().max_abs_diff(synth.theta()).unwrap();
        assert!(d < 1e-12, "t = {t}: {d}");
    }
}

#[test]
fn learner_raw_mode_matches_replay() {
    let inst = InstanceSpec::linear(3, 7, 5).build().unwrap();
    let mut model = inst.model.clone();
    let cfg = raw_cfg(0.8, 0.9, 0.02);
    let mut learner = BpLambda::new(cfg, &model).unwrap();
    learner
        .train_batch(&mut model, std::slice::from_ref(&inst.episode))
        .unwrap();
    let replay = replay_raw(&inst.traj, &Synthesiser::zeros(3), 0.02, 0.8, 0.9, false).unwrap();
    assert_eq!(learner.synth(), replay.thetas.last().unwrap());
    assert_eq!(model, inst.model);
}

#[test]
fn gamma_zero_degeneracy() {
    let inst = InstanceSpec::linear(3, 6, 8).build().unwrap();
    let s0 = random_synth(3, 0.3, &mut task_rng(2));
    let replay = replay_raw(&inst.traj, &s0, 0.03, 0.9, 0.0, true).unwrap();
    for t in 0..6 {
        let g = bplambda::synth::grad_theta(inst.traj.state(t)).materialise();
        assert_eq!(&replay.traces[t], &g);
        let mut want = inst.traj.pull(t + 1, inst.traj.loss_grad(t + 1));
        want.axpy(-1.0, &replay.thetas[t].raw(inst.traj.state(t)).unwrap())
            .unwrap();
        assert!(replay.deltas[t].max_abs_diff(&want).unwrap() < 1e-15);
    }
}

#[test]
fn zero_loss_task_leaves_parameters_unchanged() {
    let mut rng = task_rng(4);
    let mut model = Model::<f64>::init(CellKind::Tanh, HeadKind::Mse, 2, 3, 2, &mut rng);
    let inputs = [[0.3, -0.1], [0.0, 0.5], [1.0, 1.0]];
    let probe = Episode::new(
        inputs
            .iter()
            .map(|x| TaskStep {
                input: Vector::from_f64(x),
                target: None,
            })
            .collect(),
    );
    let pass = ForwardPass::run(&model, &probe).unwrap();
    let episode = Episode::new(
        inputs
            .iter()
            .zip(&pass.readouts)
            .map(|(x, rl)| TaskStep {
                input: Vector::from_f64(x),
                target: Some(Target::Regression(rl.prediction.clone())),
            })
            .collect(),
    );
    let before = model.clone();
    let cfg = TrainerConfig {
        batch_size: 2,
        ..TrainerConfig::default()
    };
    let mut learner = BpLambda::new(cfg, &model).unwrap();
    let stats = learner.train_batch(&mut model, &[episode.clone(), episode]).unwrap();
    assert_eq!(stats.mean_loss(), 0.0);
    assert_eq!(model.rnn.w_rec(), before.rnn.w_rec());
    assert_eq!(model.rnn.w_in(), before.rnn.w_in());
    assert_eq!(model.readout.weight(), before.readout.weight());
    assert!(learner.synth().theta().as_slice().iter().all(|&v| v == 0.0));
}

/// Solves `A x = b` by Gauss–Jordan elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

#[test]
fn exact_synthesiser_has_vanishing_td_error() {
    // Fixed linear RNN, one episode, loss at T only. With more synthesiser
    // inputs than visited states, θ can interpolate the true gradients; the
    // minimum-norm θ·Z = G solution is found through the Gram matrix.
    let mut rng = task_rng(17);
    let units = 8;
    let t_len = 6;
    let model = Model::<f64>::init(CellKind::Linear, HeadKind::Mse, 3, units, 2, &mut rng);
    let mut steps: Vec<TaskStep<f64>> = (0..t_len)
        .map(|i| TaskStep {
            input: if i == 0 {
                Vector::from_f64(&[1.0, 0.0, 1.0])
            } else {
                Vector::zeros(3)
            },
            target: None,
        })
        .collect();
    steps[t_len - 1].target = Some(Target::Regression(Vector::from_f64(&[0.6, 0.8])));
    let traj = ForwardPass::run(&model, &Episode::new(steps)).unwrap().record;
    let g = true_gradients(&traj, 1.0);

    let z: Vec<Vector<f64>> = (0..t_len).map(|t| traj.state(t).with_bias()).collect();
    let gram: Vec<Vec<f64>> = z
        .iter()
        .map(|a| z.iter().map(|b| a.dot(b).unwrap()).collect())
        .collect();
    let mut theta = Matrix::zeros(units, units + 1);
    for row in 0..units {
        let coeff = solve(gram.clone(), (0..t_len).map(|t| g[t][row]).collect());
        for (t, c) in coeff.iter().enumerate() {
            for k in 0..=units {
                theta.set(row, k, theta.get(row, k) + c * z[t][k]);
            }
        }
    }
    let synth = Synthesiser::from_theta(theta).unwrap();
    for t in 0..t_len {
        let pulled = matvec_t(traj.jac(t + 1), traj.loss_grad(t + 1)).unwrap();
        let g_next = synth.value(traj.state(t + 1), t + 1 == t_len).unwrap();
        let g_curr = synth.value(traj.state(t), false).unwrap();
        let d = td_error(&pulled, &g_next, traj.jac(t + 1), &g_curr, 1.0).unwrap();
        assert!(d.delta.norm() < 1e-8, "t = {t}: {}", d.delta.norm());
    }
}

#[test]
fn full_window_gradients_match_true_gradient_pullbacks() {
    let inst = InstanceSpec {
        kind: CellKind::Tanh,
        units: 3,
        input_dim: 2,
        t_len: 7,
        seed: 4,
    }
    .build()
    .unwrap();
    let pass = ForwardPass::run(&inst.model, &inst.episode).unwrap();
    let g = true_gradients(&pass.record, 1.0);
    let mut want = ModelGrads::zeros_like(&inst.model);
    let mut none = ModelGrads::zeros_like(&inst.model);
    for tau in 1..=7 {
        let mut adj = pass.record.loss_grad(tau).clone();
        inst.model
            .rnn
            .accumulate_vjp(&pass.caches[tau - 1], pass.record.loss_grad(tau), &mut none.rnn)
            .unwrap();
        adj.axpy(1.0, &g[tau]).unwrap();
        inst.model
            .rnn
            .accumulate_vjp(&pass.caches[tau - 1], &adj, &mut want.rnn)
            .unwrap();
    }
    let full = windowed_grads(&inst.model, &inst.episode, 7, None, 1.0, 0.0).unwrap();
    assert!(full.model.rnn.max_abs_diff(&want.rnn).unwrap() < 1e-10);
    let no_bptt = windowed_grads(&inst.model, &inst.episode, 1, None, 1.0, 0.0).unwrap();
    assert!(no_bptt.model.rnn.max_abs_diff(&none.rnn).unwrap() < 1e-14);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut rng = task_rng(9);
        let mut model = Model::<f64>::init(
            CellKind::Tanh,
            HeadKind::Mse,
            TOY_INPUT_DIM,
            4,
            TOY_OUTPUT_DIM,
            &mut rng,
        );
        let task = ToyFixed::<f64>::new(9);
        let mut learner = BpLambda::new(TrainerConfig::default(), &model).unwrap();
        let mut losses = Vec::new();
        for _ in 0..5 {
            losses.push(learner.train_batch(&mut model, &task.batch(4)).unwrap().mean_loss());
        }
        (losses, model, learner.synth().clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn bp1_aligns_with_true_gradients_on_fixed_linear_rnn() {
    let mut rng = task_rng(0);
    let mut model = Model::<f64>::init(
        CellKind::Linear,
        HeadKind::Mse,
        TOY_INPUT_DIM,
        30,
        TOY_OUTPUT_DIM,
        &mut rng,
    );
    let task = ToyFixed::<f64>::new(0);
    let cfg = TrainerConfig {
        alpha: 3e-4,
        gamma: 1.0,
        lambda: 1.0,
        batch_size: 1,
        train_rnn: false,
        ..TrainerConfig::default()
    };
    let mut learner = BpLambda::new(cfg, &model).unwrap();
    for _ in 0..14_000 {
        learner.train_batch(&mut model, &task.batch(1)).unwrap();
    }
    let traj = ForwardPass::run(&model, &task.episode()).unwrap().record;
    let g = true_gradients(&traj, 1.0);
    for t in 1..ToyFixed::<f64>::T {
        let c = cosine_alignment(&learner.synth().raw(traj.state(t)).unwrap(), &g[t]).unwrap();
        assert!(c > 0.99, "t = {t}: cosine {c}");
    }
}

#[test]
fn unscaled_bootstrap_reduces_to_no_bptt() {
    use bplambda::baselines::{Truncated, TruncatedConfig};
    use bplambda::tasks::{CopyRepeat, COPY_INPUT_DIM, COPY_OUTPUT_DIM};
    let mut rng = task_rng(21);
    let init = Model::<f64>::init(
        CellKind::Lstm,
        HeadKind::Bits,
        COPY_INPUT_DIM,
        4,
        COPY_OUTPUT_DIM,
        &mut rng,
    );
    let task = CopyRepeat::new(2, 2).unwrap();
    let batches: Vec<_> = (0..5).map(|_| task.batch::<f64, _>(3, &mut rng)).collect();
    let cfg = TrainerConfig {
        sg_scale: 0.0,
        eta: 1e-3,
        ..TrainerConfig::default()
    };
    let (mut a, mut b) = (init.clone(), init);
    let mut bp = BpLambda::new(cfg, &a).unwrap();
    let tc = TruncatedConfig {
        n: 1,
        use_sg: false,
        alpha: cfg.alpha,
        eta: cfg.eta,
        gamma: cfg.gamma,
        sg_scale: 0.0,
    };
    let mut nb = Truncated::new(tc, &b).unwrap();
    for batch in &batches {
        let la = bp.train_batch(&mut a, batch).unwrap().mean_loss();
        let lb = nb.train_batch(&mut b, batch).unwrap().mean_loss();
        assert!((la - lb).abs() < 1e-12, "{la} vs {lb}");
    }
    assert!(a.rnn.w_rec().max_abs_diff(b.rnn.w_rec()).unwrap() < 1e-12);
    assert!(a.readout.weight().max_abs_diff(b.readout.weight()).unwrap() < 1e-12);
}

//! Runs one configuration for each of its seeds. Every learner goes through
//! [`Learner::train_batch`]; only the task decides what is logged.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Result};
use bplambda::baselines::{true_gradients, Truncated, TruncatedConfig};
use bplambda::metrics::argmax;
use bplambda::tasks::{
    advance_curriculum, bits_error, task_rng_stream, Curriculum, Mnist, ToyFixed, ToyPlastic, COPY_INPUT_DIM,
    COPY_OUTPUT_DIM, MNIST_CLASSES, MNIST_ROWS, TOY_INPUT_DIM, TOY_OUTPUT_DIM,
};
use bplambda::{
    cosine_alignment, evaluate, BpLambda, CellKind, Episode, ForwardPass, HeadKind, Learner, Model, Synthesiser,
};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Budget, ExperimentConfig, LearnerSpec, TaskSpec};

const MODEL_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const DATA_STREAM: u64 = 3;

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub epoch: usize,
    /// Batches trained so far.
    pub batch: usize,
    /// Sequence length in force.
    pub length: usize,
    pub loss: f64,
    /// Accuracy, bits error or solved length, by task.
    pub metric: Option<f64>,
    /// Cosine alignment at `t = 1 …`; `None` where undefined.
    pub cosines: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub learner: String,
    #[serde(skip)]
    pub rows: Vec<MetricRow>,
    /// The per-seed figure that goes into the summary.
    pub final_metric: f64,
    pub detail: serde_json::Value,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

/// Name of the summary figure per task.
pub fn metric_name(task: &TaskSpec) -> &'static str {
    match task {
        TaskSpec::ToyFixed => "final_loss",
        TaskSpec::ToyPlastic { .. } => "solved_length",
        TaskSpec::SeqMnist { .. } => "test_accuracy",
        TaskSpec::CopyRepeat { .. } => "solved_length",
    }
}

pub fn build_learner(cfg: &ExperimentConfig, model: &Model<f64>, seed: u64) -> Result<Box<dyn Learner<f64>>> {
    let h = &cfg.hyper;
    let truncated = |n: usize, use_sg: bool| -> Result<Box<dyn Learner<f64>>> {
        let tc = TruncatedConfig {
            n,
            use_sg,
            alpha: h.alpha,
            eta: h.eta,
            gamma: h.gamma,
            sg_scale: h.sg_scale,
        };
        Ok(Box::new(Truncated::new(tc, model)?))
    };
    match cfg.learner {
        LearnerSpec::BpLambda { lambda } => Ok(Box::new(BpLambda::new(h.trainer(lambda, seed), model)?)),
        LearnerSpec::NstepSg { n } => truncated(n, true),
        LearnerSpec::Tbptt { n } => truncated(n, false),
        LearnerSpec::NoBptt => truncated(1, false),
        LearnerSpec::Oracle => truncated(usize::MAX, false),
    }
}

fn init_model(cfg: &ExperimentConfig, head: HeadKind, input: usize, output: usize, seed: u64) -> Model<f64> {
    let mut rng = task_rng_stream(seed, MODEL_STREAM);
    Model::init(cfg.model.cell, head, input, cfg.model.units, output, &mut rng)
}

/// Trains one batch; a frozen network (`train_rnn = false`) is restored
/// afterwards whatever the learner did to it.
fn train(
    learner: &mut dyn Learner<f64>,
    model: &mut Model<f64>,
    batch: &[Episode<f64>],
    frozen: Option<&Model<f64>>,
) -> Result<f64> {
    let stats = learner.train_batch(model, batch)?;
    if let Some(f) = frozen {
        *model = f.clone();
    }
    let loss = stats.mean_loss();
    if !loss.is_finite() {
        return Err(anyhow!("non-finite loss"));
    }
    Ok(loss)
}

/// Cosine between `g(h_t)` and the discounted true gradient for `t = 1 … T−1`.
pub fn alignment(
    model: &Model<f64>,
    synth: Option<&Synthesiser<f64>>,
    episode: &Episode<f64>,
    gamma: f64,
) -> Result<Vec<Option<f64>>> {
    let t_len = episode.len();
    let Some(s) = synth else {
        return Ok(vec![None; t_len.saturating_sub(1)]);
    };
    let traj = ForwardPass::run(model, episode)?.record;
    let g = true_gradients(&traj, gamma);
    (1..t_len)
        .map(|t| Ok(cosine_alignment(&s.raw(traj.state(t))?, &g[t])))
        .collect()
}

fn mean_cosines(per_episode: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    let width = per_episode.iter().map(Vec::len).max().unwrap_or(0);
    (0..width)
        .map(|t| {
            let vals: Vec<f64> = per_episode.iter().filter_map(|v| v.get(t).copied().flatten()).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

struct Progress {
    rows: Vec<MetricRow>,
    final_metric: f64,
    detail: serde_json::Value,
}

fn run_toy_fixed(cfg: &ExperimentConfig, seed: u64, rows: &mut Vec<MetricRow>) -> Result<(f64, serde_json::Value)> {
    let task = ToyFixed::<f64>::new(seed);
    let mut model = init_model(cfg, HeadKind::Mse, TOY_INPUT_DIM, TOY_OUTPUT_DIM, seed);
    let frozen = (!cfg.hyper.train_rnn).then(|| model.clone());
    let mut learner = build_learner(cfg, &model, seed)?;
    let bpe = cfg.batches_per_epoch.unwrap_or(100);
    let batch = task.batch(cfg.hyper.batch_size);
    let mut done = 0;
    let mut last = f64::NAN;
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for _ in 0..bpe {
            total += train(learner.as_mut(), &mut model, &batch, frozen.as_ref())?;
            done += 1;
        }
        last = total / bpe as f64;
        let cosines = if cfg.align {
            alignment(&model, learner.synthesiser(), &task.episode(), cfg.hyper.gamma)?
        } else {
            Vec::new()
        };
        rows.push(MetricRow {
            epoch,
            batch: done,
            length: ToyFixed::<f64>::T,
            loss: last,
            metric: None,
            cosines,
        });
    }
    let final_cos = rows.last().map(|r| r.cosines.clone()).unwrap_or_default();
    Ok((last, serde_json::json!({ "final_cosines": final_cos })))
}

fn run_toy_plastic(
    cfg: &ExperimentConfig,
    seed: u64,
    lengths: &[usize],
    solve_error: f64,
    window: usize,
    rows: &mut Vec<MetricRow>,
) -> Result<(f64, serde_json::Value)> {
    let bpe = cfg.batches_per_epoch.unwrap_or(100);
    let bs = cfg.hyper.batch_size;
    let mut solved = Vec::new();
    let mut errors = Vec::new();
    let mut solved_length = 0usize;
    let mut chain = true;
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    for &t_len in &sorted {
        let task = ToyPlastic::<f64>::new(t_len, seed)?;
        let mut model = init_model(cfg, HeadKind::Mse, TOY_INPUT_DIM, TOY_OUTPUT_DIM, seed);
        let frozen = (!cfg.hyper.train_rnn).then(|| model.clone());
        let mut learner = build_learner(cfg, &model, seed)?;
        let mut history = Vec::with_capacity(cfg.epochs);
        let mut done = 0;
        for epoch in 1..=cfg.epochs {
            let mut total = 0.0;
            for b in 0..bpe {
                let batch = task.batch(bs, b * bs);
                total += train(learner.as_mut(), &mut model, &batch, frozen.as_ref())?;
                done += 1;
            }
            let loss = total / bpe as f64;
            history.push(loss);
            let cosines = if cfg.align {
                let per: Result<Vec<_>> = (0..ToyPlastic::<f64>::PAIRS)
                    .map(|k| alignment(&model, learner.synthesiser(), &task.episode(k), cfg.hyper.gamma))
                    .collect();
                mean_cosines(&per?)
            } else {
                Vec::new()
            };
            rows.push(MetricRow {
                epoch,
                batch: done,
                length: t_len,
                loss,
                metric: None,
                cosines,
            });
        }
        let w = window.min(history.len()).max(1);
        let err = history[history.len() - w..].iter().sum::<f64>() / w as f64;
        let ok = err < solve_error;
        chain &= ok;
        if chain {
            solved_length = t_len;
        }
        solved.push(ok);
        errors.push(err);
    }
    Ok((
        solved_length as f64,
        serde_json::json!({ "lengths": sorted, "solved": solved, "window_error": errors }),
    ))
}

fn run_copy_repeat(
    cfg: &ExperimentConfig,
    seed: u64,
    solve_bits: f64,
    budget: Budget,
    rows: &mut Vec<MetricRow>,
) -> Result<(f64, serde_json::Value)> {
    let mut model = init_model(cfg, HeadKind::Bits, COPY_INPUT_DIM, COPY_OUTPUT_DIM, seed);
    let frozen = (!cfg.hyper.train_rnn).then(|| model.clone());
    let mut learner = build_learner(cfg, &model, seed)?;
    let mut rng = task_rng_stream(seed, DATA_STREAM);
    let bpe = cfg.batches_per_epoch.unwrap_or(1);
    let mut state = Curriculum::default();
    let start = Instant::now();
    let mut done = 0usize;
    loop {
        match budget {
            Budget::Batches(n) if done >= n => break,
            Budget::Seconds(s) if start.elapsed().as_secs_f64() >= s => break,
            _ => {}
        }
        let task = state.task();
        let batch = task.batch::<f64, _>(cfg.hyper.batch_size, &mut rng);
        let stats = learner.train_batch(&mut model, &batch)?;
        if let Some(f) = &frozen {
            model = f.clone();
        }
        let loss = stats.mean_loss();
        if !loss.is_finite() {
            return Err(anyhow!("non-finite loss"));
        }
        let bits = stats
            .episodes
            .iter()
            .map(|e| bits_error(e.loss, task.target_len()))
            .sum::<f64>()
            / stats.episodes.len() as f64;
        done += 1;
        rows.push(MetricRow {
            epoch: done.div_ceil(bpe),
            batch: done,
            length: task.seq_len(),
            loss,
            metric: Some(bits),
            cosines: Vec::new(),
        });
        state = advance_curriculum(&state, bits < solve_bits);
    }
    Ok((
        state.solved_length() as f64,
        serde_json::json!({ "batches": done, "level": [state.n, state.r], "solved": state.solved }),
    ))
}

/// Where the MNIST files live: config, then `BPL_DATA_DIR`, then
/// `data/mnist`.
pub fn mnist_dir(configured: Option<&PathBuf>) -> PathBuf {
    configured
        .cloned()
        .or_else(|| std::env::var_os("BPL_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

fn accuracy(model: &Model<f64>, images: &[bplambda::tasks::MnistImage]) -> Result<f64> {
    let mut correct = 0usize;
    for img in images {
        let out = evaluate(model, &img.episode::<f64>())?;
        let (_, pred) = out.predictions.last().ok_or_else(|| anyhow!("no prediction"))?;
        if argmax(pred) == img.label as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / images.len().max(1) as f64)
}

fn run_seq_mnist(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Mnist,
    rows: &mut Vec<MetricRow>,
) -> Result<(f64, serde_json::Value)> {
    let mut model = init_model(cfg, HeadKind::CrossEntropy, MNIST_ROWS, MNIST_CLASSES, seed);
    let frozen = (!cfg.hyper.train_rnn).then(|| model.clone());
    let mut learner = build_learner(cfg, &model, seed)?;
    let mut rng = task_rng_stream(seed, SHUFFLE_STREAM);
    let bs = cfg.hyper.batch_size;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let (mut best_val, mut best_test, mut best_epoch) = (-1.0, 0.0, 0);
    let mut done = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let chunks: Vec<&[usize]> = order.chunks(bs).collect();
        let limit = cfg.batches_per_epoch.unwrap_or(chunks.len()).min(chunks.len());
        for chunk in &chunks[..limit] {
            let batch: Vec<Episode<f64>> = chunk.iter().map(|&i| data.train[i].episode()).collect();
            total += train(learner.as_mut(), &mut model, &batch, frozen.as_ref())?;
            done += 1;
        }
        let val = accuracy(&model, &data.validation)?;
        let test = accuracy(&model, &data.test)?;
        if val > best_val {
            best_val = val;
            best_test = test;
            best_epoch = epoch;
        }
        rows.push(MetricRow {
            epoch,
            batch: done,
            length: MNIST_ROWS,
            loss: total / limit.max(1) as f64,
            metric: Some(val),
            cosines: Vec::new(),
        });
    }
    Ok((
        best_test,
        serde_json::json!({ "best_epoch": best_epoch, "best_validation": best_val }),
    ))
}

/// Runs one seed. Failures are reported in `error` with the rows logged up
/// to that point.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, mnist: Option<&Mnist>) -> SeedResult {
    let start = Instant::now();
    let mut rows = Vec::new();
    let outcome = match &cfg.task {
        TaskSpec::ToyFixed => run_toy_fixed(cfg, seed, &mut rows),
        TaskSpec::ToyPlastic {
            lengths,
            solve_error,
            solve_window,
        } => run_toy_plastic(cfg, seed, lengths, *solve_error, *solve_window, &mut rows),
        TaskSpec::CopyRepeat { solve_bits, budget } => run_copy_repeat(cfg, seed, *solve_bits, *budget, &mut rows),
        TaskSpec::SeqMnist { .. } => match mnist {
            Some(m) => run_seq_mnist(cfg, seed, m, &mut rows),
            None => Err(anyhow!("MNIST data not loaded")),
        },
    };
    let progress = match outcome {
        Ok((final_metric, detail)) => Ok(Progress {
            rows,
            final_metric,
            detail,
        }),
        Err(e) => Err((rows, e)),
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    let learner = cfg.learner.label();
    match progress {
        Ok(p) => SeedResult {
            seed,
            learner,
            rows: p.rows,
            final_metric: p.final_metric,
            detail: p.detail,
            wall_seconds,
            error: None,
        },
        Err((rows, e)) => SeedResult {
            seed,
            learner,
            rows,
            final_metric: f64::NAN,
            detail: serde_json::Value::Null,
            wall_seconds,
            error: Some(format!("{e:#}")),
        },
    }
}

pub fn load_mnist(cfg: &ExperimentConfig) -> Result<Option<Mnist>> {
    match &cfg.task {
        TaskSpec::SeqMnist { data_dir, train_limit } => {
            let dir = mnist_dir(data_dir.as_ref());
            Ok(Some(
                Mnist::load(&dir, *train_limit).map_err(|e| anyhow!("{e} (data dir {})", dir.display()))?,
            ))
        }
        _ => Ok(None),
    }
}

/// All seeds of the (already effective) configuration, in parallel.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SeedResult>> {
    let mnist = load_mnist(cfg)?;
    Ok(cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s, mnist.as_ref()))
        .collect())
}

/// The cell kind each task uses unless the config says otherwise.
pub fn default_cell(task: &TaskSpec) -> CellKind {
    match task {
        TaskSpec::ToyFixed => CellKind::Linear,
        TaskSpec::ToyPlastic { .. } => CellKind::Tanh,
        TaskSpec::SeqMnist { .. } | TaskSpec::CopyRepeat { .. } => CellKind::Lstm,
    }
}

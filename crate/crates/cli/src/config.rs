//! Experiment configuration, read from JSON.

use std::path::PathBuf;

use anyhow::{bail, Result};
use bplambda::{CellKind, TrainerConfig, UpdateMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Fixed linear RNN, one input/target pair per seed.
    ToyFixed,
    /// Plastic RNN; each length trains from scratch.
    ToyPlastic {
        lengths: Vec<usize>,
        #[serde(default = "default_solve_error")]
        solve_error: f64,
        #[serde(default = "default_solve_window")]
        solve_window: usize,
    },
    SeqMnist {
        #[serde(default)]
        data_dir: Option<PathBuf>,
        /// Cap on training-file images (before the validation split).
        #[serde(default)]
        train_limit: Option<usize>,
    },
    CopyRepeat {
        #[serde(default = "default_solve_bits")]
        solve_bits: f64,
        budget: Budget,
    },
}

fn default_solve_error() -> f64 {
    0.025
}

fn default_solve_window() -> usize {
    20
}

fn default_solve_bits() -> f64 {
    0.15
}

/// Copy-repeat training budget. A batch budget keeps the output
/// reproducible; a time budget does not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Batches(usize),
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    BpLambda {
        lambda: f64,
    },
    NstepSg {
        n: usize,
    },
    Tbptt {
        n: usize,
    },
    NoBptt,
    /// Full BPTT.
    Oracle,
}

impl std::str::FromStr for LearnerSpec {
    type Err = anyhow::Error;

    /// `bp_lambda:<λ>`, `nstep_sg:<n>`, `tbptt:<n>`, `no_bptt` or `oracle`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = || -> Result<f64> {
            arg.parse::<f64>()
                .map_err(|_| anyhow::anyhow!("learner {s}: expected a number after ':'"))
        };
        Ok(match kind {
            "bp_lambda" => LearnerSpec::BpLambda { lambda: num()? },
            "nstep_sg" => LearnerSpec::NstepSg { n: num()? as usize },
            "tbptt" => LearnerSpec::Tbptt { n: num()? as usize },
            "no_bptt" => LearnerSpec::NoBptt,
            "oracle" => LearnerSpec::Oracle,
            _ => bail!("unknown learner {s}"),
        })
    }
}

impl LearnerSpec {
    pub fn label(&self) -> String {
        match self {
            LearnerSpec::BpLambda { lambda } => format!("bp_lambda({lambda})"),
            LearnerSpec::NstepSg { n } => format!("nstep_sg({n})"),
            LearnerSpec::Tbptt { n } => format!("tbptt({n})"),
            LearnerSpec::NoBptt => "no_bptt".into(),
            LearnerSpec::Oracle => "oracle".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub cell: CellKind,
    pub units: usize,
}

/// Hyperparameters shared by every learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Synthesiser learning rate.
    pub alpha: f64,
    /// Network learning rate.
    pub eta: f64,
    pub gamma: f64,
    pub sg_scale: f64,
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub train_rnn: bool,
    #[serde(default = "default_mode")]
    pub mode: UpdateMode,
}

fn default_true() -> bool {
    true
}

fn default_mode() -> UpdateMode {
    UpdateMode::Batched
}

impl Hyper {
    pub fn trainer(&self, lambda: f64, seed: u64) -> TrainerConfig {
        TrainerConfig {
            alpha: self.alpha,
            eta: self.eta,
            gamma: self.gamma,
            lambda,
            sg_scale: self.sg_scale,
            batch_size: self.batch_size,
            seed,
            mode: self.mode,
            train_rnn: self.train_rnn,
        }
    }
}

/// Settings that replace the full-scale ones under `--desk-scale`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeskScale {
    #[serde(default)]
    pub units: Option<usize>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batches_per_epoch: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub train_limit: Option<usize>,
    #[serde(default)]
    pub lengths: Option<Vec<usize>>,
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: TaskSpec,
    pub learner: LearnerSpec,
    pub model: ModelSpec,
    pub hyper: Hyper,
    pub epochs: usize,
    /// Batches per epoch; seq-MNIST uses full passes over the training set.
    #[serde(default)]
    pub batches_per_epoch: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub desk_scale: bool,
    #[serde(default)]
    pub desk: DeskScale,
    /// Log cosine alignment with the full-BPTT gradient at every epoch end.
    #[serde(default)]
    pub align: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("config {}: no seeds", self.name);
        }
        if self.epochs == 0 {
            bail!("config {}: epochs must be positive", self.name);
        }
        if self.model.units == 0 {
            bail!("config {}: units must be positive", self.name);
        }
        if self.batches_per_epoch == Some(0) {
            bail!("config {}: batches_per_epoch must be positive", self.name);
        }
        match &self.task {
            TaskSpec::ToyPlastic { lengths, .. } => {
                if lengths.is_empty() {
                    bail!("config {}: toy_plastic needs at least one length", self.name)
                }
                for &l in lengths {
                    bplambda::tasks::ToyPlastic::<f64>::new(l, 0)?;
                }
            }
            TaskSpec::CopyRepeat {
                budget: Budget::Batches(0),
                ..
            } => bail!("config {}: empty budget", self.name),
            _ => {}
        }
        match self.learner {
            LearnerSpec::NstepSg { n: 0 } | LearnerSpec::Tbptt { n: 0 } => {
                bail!("config {}: truncation size must be at least 1", self.name)
            }
            LearnerSpec::BpLambda { lambda } if !(0.0..=1.0).contains(&lambda) => {
                bail!("config {}: lambda {lambda} outside [0, 1]", self.name)
            }
            _ => {}
        }
        self.hyper.trainer(0.0, 0).validate()?;
        Ok(())
    }

    /// The configuration actually run: desk-scale overrides folded in and
    /// the flag cleared.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        if !c.desk_scale {
            return c;
        }
        let d = c.desk.clone();
        if let Some(u) = d.units {
            c.model.units = u;
        }
        if let Some(e) = d.epochs {
            c.epochs = e;
        }
        if let Some(b) = d.batches_per_epoch {
            c.batches_per_epoch = Some(b);
        }
        if let Some(b) = d.batch_size {
            c.hyper.batch_size = b;
        }
        if let Some(s) = d.seeds {
            c.seeds = s;
        }
        if let Some(a) = d.alpha {
            c.hyper.alpha = a;
        }
        match &mut c.task {
            TaskSpec::SeqMnist { train_limit, .. } => {
                if d.train_limit.is_some() {
                    *train_limit = d.train_limit;
                }
            }
            TaskSpec::ToyPlastic { lengths, .. } => {
                if let Some(l) = d.lengths {
                    *lengths = l;
                }
            }
            TaskSpec::CopyRepeat { budget, .. } => {
                if let Some(b) = d.budget {
                    *budget = b;
                }
            }
            TaskSpec::ToyFixed => {}
        }
        c.desk_scale = false;
        c.desk = DeskScale::default();
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_learner(&self, learner: LearnerSpec) -> Self {
        let mut c = self.clone();
        c.learner = learner;
        c
    }
}

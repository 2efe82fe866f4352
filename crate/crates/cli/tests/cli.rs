use std::path::PathBuf;

use bplambda_cli::config::{Budget, ExperimentConfig, LearnerSpec, TaskSpec};
use bplambda_cli::runner::{run_seed, run_seeds};
use bplambda_cli::write_outputs;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&root().join("configs").join(format!("{name}.json"))).unwrap()
}

fn tiny_plastic() -> ExperimentConfig {
    let mut c = load("toy_plastic");
    c.model.units = 4;
    c.epochs = 2;
    c.batches_per_epoch = Some(3);
    c.seeds = vec![0, 1];
    c.task = TaskSpec::ToyPlastic {
        lengths: vec![10],
        solve_error: 0.025,
        solve_window: 20,
    };
    c
}

#[test]
fn shipped_configs_parse_and_validate() {
    for name in ["toy_fixed", "toy_plastic", "seq_mnist", "copy_repeat"] {
        let c = load(name);
        let mut d = c.clone();
        d.desk_scale = true;
        d.effective().validate().unwrap();
        assert_eq!(c.name, name);
    }
}

#[test]
fn plastic_lengths_are_validated() {
    let mut bad = tiny_plastic();
    bad.task = TaskSpec::ToyPlastic {
        lengths: vec![15],
        solve_error: 0.025,
        solve_window: 20,
    };
    assert!(bad.validate().is_err());
}

#[test]
fn every_learner_kind_runs() {
    let cfg = tiny_plastic();
    for learner in [
        LearnerSpec::BpLambda { lambda: 0.7 },
        LearnerSpec::NstepSg { n: 2 },
        LearnerSpec::Tbptt { n: 2 },
        LearnerSpec::NoBptt,
        LearnerSpec::Oracle,
    ] {
        let r = run_seed(&cfg.with_learner(learner), 3, None);
        assert!(r.error.is_none(), "{}: {:?}", r.learner, r.error);
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.loss.is_finite()));
    }
}

#[test]
fn alignment_logged_only_with_a_synthesiser() {
    let mut cfg = tiny_plastic();
    cfg.align = true;
    let with = run_seed(&cfg, 0, None);
    assert!(with.rows[0].cosines.iter().all(Option::is_some));
    assert_eq!(with.rows.last().unwrap().cosines.len(), 9);
    let without = run_seed(&cfg.with_learner(LearnerSpec::NoBptt), 0, None);
    assert!(without.rows[0].cosines.iter().all(Option::is_none));
}

#[test]
fn frozen_network_stays_fixed() {
    let mut cfg = load("toy_fixed");
    cfg.model.units = 5;
    cfg.epochs = 2;
    cfg.batches_per_epoch = Some(4);
    cfg.seeds = vec![0];
    // A frozen network never changes the loss on the fixed episode.
    for learner in [LearnerSpec::BpLambda { lambda: 1.0 }, LearnerSpec::NoBptt] {
        let r = run_seed(&cfg.with_learner(learner), 0, None);
        assert_eq!(r.rows[0].loss, r.rows[1].loss, "{}", r.learner);
    }
}

#[test]
fn copy_repeat_respects_batch_budget() {
    let mut cfg = load("copy_repeat");
    cfg.model.units = 4;
    cfg.hyper.batch_size = 4;
    cfg.task = TaskSpec::CopyRepeat {
        solve_bits: 0.15,
        budget: Budget::Batches(7),
    };
    let r = run_seed(&cfg, 0, None);
    assert!(r.error.is_none());
    assert_eq!(r.rows.len(), 7);
    assert!(r.rows.iter().all(|row| row.metric.unwrap() >= 0.0));
}

#[test]
fn missing_mnist_data_is_an_error() {
    let mut cfg = load("seq_mnist");
    cfg.task = TaskSpec::SeqMnist {
        data_dir: Some(PathBuf::from("/nonexistent/mnist")),
        train_limit: None,
    };
    let err = run_seeds(&cfg).unwrap_err().to_string();
    assert!(err.contains("/nonexistent/mnist"), "{err}");
}

#[test]
fn outputs_carry_config_hash_and_summary() {
    let cfg = tiny_plastic();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("sub/run_0.5");
    let results = run_seeds(&cfg).unwrap();
    let summary = write_outputs(&cfg, &results, &stem).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("sub/run_0.5.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# config_hash={} config={}", cfg.hash(), cfg.to_json())
    );
    assert_eq!(lines.next().unwrap(), "seed,learner,epoch,batch,length,loss,metric");
    assert_eq!(lines.count(), 2 * 2);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sub/run_0.5.summary.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], cfg.hash());
    assert_eq!(json["seeds"].as_array().unwrap().len(), 2);
    assert_eq!(summary.metric, "solved_length");
}

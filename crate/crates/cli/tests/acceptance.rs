//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! straight to stderr (bypassing the test harness capture).
//!
//! Criteria 1–5 and 10 are exact numerical properties and fail the test when
//! red. Criteria 6–9 are desk-scale training outcomes: they are reported,
//! and fail the test only with `BPL_ACCEPTANCE_STRICT=1`.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use bplambda::CellKind;
use bplambda_cli::config::{Budget, ExperimentConfig, LearnerSpec, TaskSpec};
use bplambda_cli::runner::{run_seed, run_seeds, SeedResult};
use bplambda_cli::verify;
use bplambda_cli::write_csv;

struct Outcome {
    id: usize,
    pass: bool,
}

fn report(id: usize, pass: bool, detail: impl AsRef<str>) -> Outcome {
    let line = format!(
        "criterion {id:>2}: {} {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    Outcome { id, pass }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::load(&root().join("configs").join(format!("{name}.json"))).unwrap();
    c.desk_scale = true;
    c.effective()
}

fn run_learner(cfg: &ExperimentConfig, learner: LearnerSpec) -> (Vec<SeedResult>, f64) {
    let start = Instant::now();
    let res = run_seeds(&cfg.with_learner(learner)).unwrap();
    (res, start.elapsed().as_secs_f64())
}

fn errors(results: &[&[SeedResult]]) -> Vec<String> {
    results
        .iter()
        .flat_map(|r| r.iter())
        .filter_map(|r| r.error.as_ref().map(|e| format!("{} seed {}: {e}", r.learner, r.seed)))
        .collect()
}

fn records_pass(records: &[bplambda::theory::CheckRecord]) -> (bool, String) {
    let pass = records.iter().all(|r| r.pass);
    let worst = records
        .iter()
        .map(|r| format!("{}={:.2e}", r.name, r.deviation))
        .collect::<Vec<_>>()
        .join(" ");
    (pass, worst)
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut records = Vec::new();
    for kind in [CellKind::Linear, CellKind::Tanh, CellKind::Lstm] {
        records.extend(verify::check_jacobians(kind, 100).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = records_pass(&records);
    report(
        1,
        pass && secs < 10.0,
        format!("jacobians, 3 cells x 100 draws in {secs:.1}s: {detail}"),
    )
}

fn criterion2() -> Outcome {
    let (pass, detail) = records_pass(&verify::check_targets(20).unwrap());
    report(2, pass, format!("targets on 20 systems: {detail}"))
}

fn criterion3() -> Outcome {
    let (pass, detail) = records_pass(&verify::check_recursive_identity(10).unwrap());
    report(3, pass, format!("recursive identity: {detail}"))
}

fn criterion4() -> Outcome {
    let (pass, detail) = records_pass(&verify::check_lemmas(3).unwrap());
    report(4, pass, format!("lemma suite: {detail}"))
}

fn criterion5() -> Outcome {
    let recs = verify::check_theorem1().unwrap();
    let (pass, _) = records_pass(&recs);
    let detail = recs
        .iter()
        .map(|r| format!("{}={:.2e}", r.name, r.deviation))
        .collect::<Vec<_>>()
        .join(" ");
    report(5, pass, format!("BP vs online lambda-SG at alpha=1e-5: {detail}"))
}

/// t = 1 cosine per logged epoch.
fn first_cosines(r: &SeedResult) -> Vec<f64> {
    r.rows
        .iter()
        .map(|row| row.cosines.first().copied().flatten().unwrap_or(f64::NAN))
        .collect()
}

fn criterion6() -> Outcome {
    let cfg = config("toy_fixed");
    let mut ok = true;
    let mut parts = Vec::new();
    for &seed in &cfg.seeds {
        let bp1 = run_seed(&cfg.with_learner(LearnerSpec::BpLambda { lambda: 1.0 }), seed, None);
        let bp0 = run_seed(&cfg.with_learner(LearnerSpec::BpLambda { lambda: 0.0 }), seed, None);
        if let Some(e) = bp1.error.as_ref().or(bp0.error.as_ref()) {
            ok = false;
            parts.push(format!("seed {seed}: {e}"));
            continue;
        }
        let last = &bp1.rows.last().unwrap().cosines;
        let worst = last.iter().map(|c| c.unwrap_or(f64::NAN)).fold(f64::INFINITY, f64::min);
        let (c1, c0) = (first_cosines(&bp1), first_cosines(&bp0));
        let converged = |e: usize| c1[e] > 0.99 && c0[e] > 0.99;
        let ordered = (0..c1.len()).take_while(|&e| !converged(e)).all(|e| c0[e] < c1[e]);
        let per_seed = bp1.wall_seconds + bp0.wall_seconds;
        ok &= worst > 0.95 && ordered && per_seed <= 180.0;
        parts.push(format!(
            "seed {seed}: min cos BP(1)={worst:.4}, final t=1 BP(0)={:.3}, BP(0)<BP(1) at t=1 every epoch={ordered}, {per_seed:.0}s",
            c0.last().unwrap()
        ));
    }
    report(6, ok, format!("toy fixed, T=10: {}", parts.join("; ")))
}

fn criterion7() -> Outcome {
    let cfg = config("toy_plastic");
    let start = Instant::now();
    let learners = [
        LearnerSpec::BpLambda { lambda: 1.0 },
        LearnerSpec::BpLambda { lambda: 0.5 },
        LearnerSpec::BpLambda { lambda: 0.0 },
        LearnerSpec::NoBptt,
    ];
    let runs: Vec<Vec<SeedResult>> = learners.iter().map(|&l| run_learner(&cfg, l).0).collect();
    let secs = start.elapsed().as_secs_f64();
    let errs = errors(&runs.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let solved: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.iter().map(|s| s.final_metric).collect())
        .collect();
    let n = cfg.seeds.len();
    let holds = (0..n)
        .filter(|&i| solved[0][i] >= solved[1][i] && solved[1][i] >= solved[2][i] && solved[2][i] >= solved[3][i])
        .count();
    let ties = (0..n).filter(|&i| solved.iter().all(|s| s[i] == 0.0)).count();
    let pass = errs.is_empty() && 2 * holds > n && secs < 1800.0;
    report(
        7,
        pass,
        format!(
            "toy plastic solved-T per seed BP(1)={:?} BP(0.5)={:?} BP(0)={:?} no-BPTT={:?}; chain holds on {holds}/{n} ({ties} all-zero ties); {secs:.0}s {errs:?}",
            solved[0], solved[1], solved[2], solved[3]
        ),
    )
}

fn criterion8() -> Outcome {
    let mut cfg = config("seq_mnist");
    let dir = root().join("data/mnist");
    if let TaskSpec::SeqMnist { data_dir, .. } = &mut cfg.task {
        *data_dir = Some(dir.clone());
    }
    if !dir.join("train-images-idx3-ubyte").exists() && !dir.join("train-images-idx3-ubyte.gz").exists() {
        return report(8, false, format!("no MNIST data in {}", dir.display()));
    }
    let start = Instant::now();
    let (bp1, _) = run_learner(&cfg, LearnerSpec::BpLambda { lambda: 1.0 });
    let (bp0, _) = run_learner(&cfg, LearnerSpec::BpLambda { lambda: 0.0 });
    let (nb, _) = run_learner(&cfg, LearnerSpec::NoBptt);
    let secs = start.elapsed().as_secs_f64();
    let errs = errors(&[&bp1, &bp0, &nb]);
    let mean = |r: &[SeedResult]| r.iter().map(|s| s.final_metric).sum::<f64>() / r.len() as f64;
    let (a1, a0, an) = (mean(&bp1), mean(&bp0), mean(&nb));
    let pass = errs.is_empty() && a1 >= an + 0.05 && a1 > a0 && secs < 1200.0;
    report(
        8,
        pass,
        format!(
            "seq MNIST test accuracy BP(1)={a1:.3} BP(0)={a0:.3} no-BPTT={an:.3} ({} seeds, {secs:.0}s) {errs:?}",
            cfg.seeds.len()
        ),
    )
}

fn criterion9() -> Outcome {
    let cfg = config("copy_repeat");
    let (bp1, t1) = run_learner(&cfg, LearnerSpec::BpLambda { lambda: 1.0 });
    let (bp0, t0) = run_learner(&cfg, LearnerSpec::BpLambda { lambda: 0.0 });
    let (nb, tn) = run_learner(&cfg, LearnerSpec::NoBptt);
    let errs = errors(&[&bp1, &bp0, &nb]);
    let len = |r: &[SeedResult]| r.iter().map(|s| s.final_metric).collect::<Vec<_>>();
    let (l1, l0, ln) = (len(&bp1), len(&bp0), len(&nb));
    let n = cfg.seeds.len();
    let holds = (0..n).filter(|&i| l1[i] >= l0[i] && l1[i] >= ln[i]).count();
    let ties = (0..n).filter(|&i| l1[i] == 0.0 && l0[i] == 0.0 && ln[i] == 0.0).count();
    let budget = match &cfg.task {
        TaskSpec::CopyRepeat { budget, .. } => *budget,
        _ => unreachable!(),
    };
    let within = [t1, t0, tn].iter().all(|&t| t <= 900.0);
    let pass = errs.is_empty() && 2 * holds > n && within;
    report(
        9,
        pass,
        format!(
            "copy-repeat solved length BP(1)={l1:?} BP(0)={l0:?} no-BPTT={ln:?}; holds on {holds}/{n} ({ties} all-zero ties); budget {budget:?}, wall {t1:.0}/{t0:.0}/{tn:.0}s {errs:?}"
        ),
    )
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let results = run_seeds(cfg).unwrap();
    let mut out = Vec::new();
    write_csv(cfg, &results, &mut out).unwrap();
    out
}

fn criterion10() -> Outcome {
    let mut fixed = config("toy_fixed");
    fixed.epochs = 3;
    fixed.batches_per_epoch = Some(50);
    fixed.seeds = vec![0, 1];
    let mut plastic = config("toy_plastic");
    plastic.epochs = 3;
    plastic.batches_per_epoch = Some(5);
    plastic.align = true;
    let mut copy = config("copy_repeat");
    copy.task = TaskSpec::CopyRepeat {
        solve_bits: 0.15,
        budget: Budget::Batches(40),
    };
    copy.hyper.batch_size = 10;
    let mut parts = Vec::new();
    let mut ok = true;
    for cfg in [fixed, plastic.with_learner(LearnerSpec::NstepSg { n: 3 }), copy] {
        let (a, b) = (csv_bytes(&cfg), csv_bytes(&cfg));
        ok &= a == b && !a.is_empty();
        parts.push(format!("{} {} bytes identical={}", cfg.name, a.len(), a == b));
    }
    report(10, ok, parts.join(", "))
}

#[test]
fn acceptance_criteria() {
    let outcomes = vec![
        criterion1(),
        criterion2(),
        criterion3(),
        criterion4(),
        criterion5(),
        criterion6(),
        criterion7(),
        criterion8(),
        criterion9(),
        criterion10(),
    ];
    let strict = std::env::var("BPL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let red: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.pass && (strict || matches!(o.id, 1..=5 | 10)))
        .map(|o| o.id)
        .collect();
    assert!(red.is_empty(), "failing criteria: {red:?}");
}

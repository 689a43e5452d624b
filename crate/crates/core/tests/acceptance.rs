//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Data-dependent criteria run the preset grids in `configs/` on their
//! synthetic fixture. Criteria 1, 2 and 9 check correctness and always fail
//! the test when violated. The directional criteria 3 to 8 are reported; set
//! `ACCEPTANCE_STRICT=1` to make any FAIL line fail the test as well.

mod common;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssl_lab::config::{ExperimentKind, RunConfig, DEFAULT_LEAKAGE_HOLDOUT};
use ssl_lab::experiments::{
    aggregate, average_precision, leakage_delta, run_grid, unlabeled_sweep, AggregateRow, LeakageRow, MethodId,
    SplitGrid,
};

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
    hard: bool,
}

fn preset(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let t = started.elapsed();
    (t < limit, format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn mean_map(rows: &[AggregateRow], method: MethodId, n: usize, fraction: f64) -> f64 {
    rows.iter()
        .find(|r| r.method == method && r.n_labeled == n && r.unlabeled_fraction == fraction && !r.leak)
        .unwrap_or_else(|| panic!("no cell for {method} n={n} f={fraction}"))
        .map_mean
}

fn c1_solver_oracles() -> Outcome {
    let started = Instant::now();
    let linear = common::linear_objective_gaps().into_iter().fold(0.0, f64::max);
    let smo = common::smo_objective_gaps().into_iter().fold(0.0, f64::max);
    let ridge = common::manifold_ridge_deviation();
    let (fast, time) = within(Duration::from_secs(10), started);
    Outcome {
        id: 1,
        name: "solver oracles",
        pass: linear <= 1e-4 && smo <= 1e-4 && ridge <= 1e-8 && fast,
        detail: format!("dual-CD gap {linear:.2e}, SMO gap {smo:.2e}, ridge deviation {ridge:.2e}, {time}"),
        hard: true,
    }
}

fn c2_ap_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut checked, mut mismatches) = (0, 0);
    while checked < 1000 {
        let n = rng.gen_range(1..=20);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 * 0.125).collect();
        let relevance: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        if !relevance.contains(&true) {
            continue;
        }
        if average_precision(&scores, &relevance).unwrap() != common::ap_by_enumeration(&scores, &relevance) {
            mismatches += 1;
        }
        checked += 1;
    }
    let (fast, time) = within(Duration::from_secs(5), started);
    Outcome {
        id: 2,
        name: "AP oracle",
        pass: mismatches == 0 && fast,
        detail: format!("{mismatches} mismatches in {checked} rankings, {time}"),
        hard: true,
    }
}

fn c3_leakage() -> Outcome {
    let started = Instant::now();
    let cfg = preset("fig1.cfg");
    assert_eq!(cfg.kind, ExperimentKind::Leakage);
    let data = cfg.load_dataset().unwrap();
    let holdout = cfg.holdout.unwrap_or(DEFAULT_LEAKAGE_HOLDOUT);
    let study = leakage_delta(&cfg.methods, &data, &cfg.n_labeled, &cfg.fractions, &cfg.seeds, holdout).unwrap();
    // mean over fractions and seeds
    let mean_delta = |rows: &[LeakageRow], m: MethodId, n: usize| {
        let sel: Vec<f64> = rows.iter().filter(|r| r.method == m && r.n_labeled == n).map(|r| r.delta_mean).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let mut pass = true;
    let mut detail = String::new();
    for m in [MethodId::SvmChi2, MethodId::Enpro] {
        let (d1, d2, d20) = (mean_delta(&study.rows, m, 1), mean_delta(&study.rows, m, 2), mean_delta(&study.rows, m, 20));
        pass &= d1 >= 0.0 && d2 >= 0.0 && d1 >= d20 && d2 >= d20;
        let _ = write!(detail, "{m}: delta@1 {d1:+.4} @2 {d2:+.4} @20 {d20:+.4}; ");
    }
    let (fast, time) = within(Duration::from_secs(300), started);
    Outcome { id: 3, name: "leakage effect", pass: pass && fast, detail: detail + &time, hard: false }
}

struct Fig2 {
    rows: Vec<AggregateRow>,
    elapsed: Duration,
}

fn run_fig2() -> Fig2 {
    let started = Instant::now();
    let cfg = preset("fig2.cfg");
    assert_eq!(cfg.kind, ExperimentKind::Grid);
    let data = cfg.load_dataset().unwrap();
    let grid = SplitGrid {
        n_labeled: cfg.n_labeled.clone(),
        fractions: cfg.fractions.clone(),
        leak: cfg.leak.clone(),
        seeds: cfg.seeds.clone(),
        holdout: cfg.holdout,
    };
    let records = run_grid(&cfg.methods, &data, &grid).unwrap();
    Fig2 { rows: aggregate(&records), elapsed: started.elapsed() }
}

fn c4_chi2_baselines(f: &Fig2) -> Outcome {
    let m = |id, n| mean_map(&f.rows, id, n, 1.0);
    let mut pass = true;
    let mut detail = String::new();
    for n in [5, 10] {
        let (chi2, lin, enpro) = (m(MethodId::SvmChi2, n), m(MethodId::SvmLinear, n), m(MethodId::Enpro, n));
        pass &= chi2 >= lin && chi2 >= enpro - 0.02;
        let _ = write!(detail, "n={n}: svm_chi2 {chi2:.4} svm_linear {lin:.4} enpro {enpro:.4}; ");
    }
    let fast = f.elapsed < Duration::from_secs(300);
    let _ = write!(detail, "{:.1}s of 300s", f.elapsed.as_secs_f64());
    Outcome { id: 4, name: "chi2 baselines", pass: pass && fast, detail, hard: false }
}

fn c5_sigmoid(f: &Fig2) -> Outcome {
    let gain = mean_map(&f.rows, MethodId::Enpro, 5, 1.0) - mean_map(&f.rows, MethodId::EnproNosigmoid, 5, 1.0);
    Outcome {
        id: 5,
        name: "sigmoid ablation",
        pass: gain >= 0.02,
        detail: format!("enpro - enpro_nosigmoid at n=5: {gain:+.4} (need >= 0.02)"),
        hard: false,
    }
}

fn c6_uniform(f: &Fig2) -> Outcome {
    let mut pass = true;
    let mut detail = String::new();
    for n in [5, 10] {
        let d = mean_map(&f.rows, MethodId::EnproUniform, n, 1.0) - mean_map(&f.rows, MethodId::Enpro, n, 1.0);
        pass &= d >= -0.02;
        let _ = write!(detail, "n={n}: enpro_uniform - enpro {d:+.4}; ");
    }
    Outcome { id: 6, name: "uniform sampler", pass, detail, hard: false }
}

fn c7_sweep() -> Outcome {
    let started = Instant::now();
    let cfg = preset("fig3.cfg");
    assert_eq!(cfg.kind, ExperimentKind::Sweep);
    let data = cfg.load_dataset().unwrap();
    let records =
        unlabeled_sweep(&cfg.methods, &data, &cfg.n_labeled, &cfg.fractions, &cfg.seeds, cfg.holdout).unwrap();
    let rows = aggregate(&records);
    let lap = mean_map(&rows, MethodId::LapsvmChi2, 2, 1.0) - mean_map(&rows, MethodId::LapsvmChi2, 2, 0.1);
    let enpro = mean_map(&rows, MethodId::Enpro, 2, 1.0) - mean_map(&rows, MethodId::Enpro, 2, 0.1);
    let (fast, time) = within(Duration::from_secs(600), started);
    Outcome {
        id: 7,
        name: "unlabeled sweep",
        pass: lap >= 0.02 && enpro.abs() <= 0.03 && fast,
        detail: format!("lapsvm_chi2 gain {lap:+.4} (>= 0.02), enpro change {enpro:+.4} (|.| <= 0.03), {time}"),
        hard: false,
    }
}

fn c8_variance(f: &Fig2) -> Outcome {
    let worst = f.rows.iter().max_by(|a, b| a.map_std.total_cmp(&b.map_std)).unwrap();
    Outcome {
        id: 8,
        name: "seed variance",
        pass: f.rows.iter().all(|r| r.map_std < 0.02),
        detail: format!(
            "largest std {:.4} ({} n={}) over {} cells",
            worst.map_std,
            worst.method,
            worst.n_labeled,
            f.rows.len()
        ),
        hard: false,
    }
}

const DETERMINISM_CONFIG: &str = r#"
[dataset]
classes = 4
per_class = 30
groups = [8, 12]
noise = 0.3
manifold_strength = 0.8
seed = 5

[experiment]
kind = "grid"
methods = ["svm_linear", "svm_chi2", "lapsvm_chi2", "enpro", "enpro_uniform", "enpro_nosigmoid"]
n_labeled = [2]
fractions = [0.5]
leak = [false, true]
seeds = [0, 1]
holdout = 0.5

[defaults]
hypotheses = 20
"#;

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("det.cfg");
    std::fs::write(&cfg, DETERMINISM_CONFIG).unwrap();
    let run = |out: &str, jobs: &str| -> PathBuf {
        let status = Command::new(env!("CARGO_BIN_EXE_ssl-lab"))
            .args(["--jobs", jobs, "run"])
            .arg(&cfg)
            .args(["--out", out])
            .current_dir(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
        dir.path().join(out)
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    let files = ["runs.csv", "aggregate.csv", "runs.csv.manifest.json", "aggregate.csv.manifest.json"];
    let differing: Vec<&str> =
        files.into_iter().filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap()).collect();
    Outcome {
        id: 9,
        name: "determinism",
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} files byte-identical across two runs", files.len())
        } else {
            format!("differing: {differing:?}")
        },
        hard: true,
    }
}

#[test]
fn acceptance() {
    let mut outcomes = vec![c1_solver_oracles(), c2_ap_oracle(), c3_leakage()];
    let fig2 = run_fig2();
    outcomes.extend([c4_chi2_baselines(&fig2), c5_sigmoid(&fig2), c6_uniform(&fig2), c7_sweep(), c8_variance(&fig2)]);
    outcomes.push(c9_determinism());

    for o in &outcomes {
        println!("{} C{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let blocking: Vec<u8> = outcomes.iter().filter(|o| !o.pass && (o.hard || strict)).map(|o| o.id).collect();
    assert!(blocking.is_empty(), "failing criteria: {blocking:?}");
}

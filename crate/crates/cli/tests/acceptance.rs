//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line (visible with `cargo test -- --nocapture`).
//!
//! The desk-scale campaign shared by the trend criteria is built once and
//! reused; its construction wall time is what the campaign runtime gate
//! checks, independent of test-thread scheduling.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, LazyLock};
use std::time::Instant;

use poisonforge_core::bilevel::{finite_difference_gradient, AttackState};
use poisonforge_core::bounds;
use poisonforge_core::dataset::init_poison;
use poisonforge_core::harness::{self, CampaignSpec, CellRecord, LambdaSpec, SplitSizes};
use poisonforge_core::localopt::OptimizerConfig;
use poisonforge_core::oracle::{brute_force, OracleConfig};
use poisonforge_core::ridge;
use poisonforge_core::strategies::{run_ifcf, Method, StrategyConfig};
use poisonforge_core::testkit;
use poisonforge_core::FeatureSchema;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poisonforge"))
}

// ---------------------------------------------------------------------------
// Criterion 1: lower-level exactness against the normal-equations oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_lower_level_exactness() {
    let started = Instant::now();
    let lambdas = [0.01, 0.1, 1.0];
    let mut checked = 0;
    for i in 0..200u64 {
        let n = 5 + (i as usize * 7) % 46; // 5..=50
        let m = (i as usize) % 6; // 0..=5
        let t = if m == 0 {
            1 + (i as usize / 2) % 3
        } else {
            (i as usize / 2) % 4 // 0..=3
        };
        let q = (i as usize) % 4; // 0..=3
        let lambda = lambdas[(i % 3) as usize];
        let (train, poison) = testkit::random_instance(1000 + i, n, m, t, q);
        let params = ridge::fit(&train, &poison, lambda).unwrap();
        let flat = params.to_flat();
        let oracle = testkit::normal_equations_fit(&train, &poison, lambda);
        assert_eq!(flat.len(), oracle.len());
        for (j, (a, b)) in flat.iter().zip(&oracle).enumerate() {
            assert!(
                (a - b).abs() <= 1e-8,
                "instance {i} component {j}: fit {a} vs oracle {b}"
            );
        }
        let residual = ridge::kkt_residual(&params, &train, &poison, lambda).unwrap();
        assert!(residual <= 1e-8, "instance {i}: kkt residual {residual}");
        checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 1 took {elapsed:.1}s (budget 10s)");
    println!("[criterion 1] PASS: {checked} instances matched the normal-equations oracle to 1e-8 (kkt <= 1e-8) in {elapsed:.2}s");
}

// ---------------------------------------------------------------------------
// Criterion 2: hypergradients vs central finite differences
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_hypergradient_correctness() {
    let started = Instant::now();
    let lambdas = [0.01, 0.1, 1.0];
    let mut max_rel: f64 = 0.0;
    for i in 0..50u64 {
        let n = 8 + (i as usize * 5) % 43;
        let m = 1 + (i as usize) % 5;
        let t = (i as usize) % 4;
        let q = 1 + (i as usize) % 3;
        let lambda = lambdas[(i % 3) as usize];
        let (train, poison) = testkit::random_instance(2000 + i, n, m, t, q);
        let train = Arc::new(train);
        let active: Vec<(usize, usize)> = (0..q)
            .flat_map(|k| (0..m).map(move |v| (k, v)))
            .collect();
        let state = AttackState::new(Arc::clone(&train), poison.clone(), lambda).unwrap();
        let implicit = state.hypergradient(&active).unwrap();
        let fd = finite_difference_gradient(&train, &poison, lambda, &active, 1e-5).unwrap();
        for (g, f) in implicit.iter().zip(&fd) {
            let rel = (g - f).abs() / f.abs().max(1e-6);
            max_rel = max_rel.max(rel);
            assert!(
                rel <= 1e-4,
                "instance {i}: implicit {g} vs central difference {f} (rel {rel:.2e})"
            );
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 2 took {elapsed:.1}s (budget 30s)");
    println!("[criterion 2] PASS: 50 instances, max relative gradient error {max_rel:.2e} <= 1e-4 in {elapsed:.2}s");
}

// ---------------------------------------------------------------------------
// Criterion 3: coefficient/intercept bound soundness fuzz
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_bound_soundness_fuzz() {
    let started = Instant::now();
    // fixed synthetic dataset: n = 30, m = 4, t = 2
    let (train, _) = testkit::random_instance(3000, 30, 4, 2, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut direct_intercept_findings = 0usize;
    let mut trials = 0usize;
    for q in [3usize, 6] {
        let mut poison = init_poison(&train, q as f64 / 30.0, 11).unwrap();
        assert_eq!(poison.n_samples(), q);
        for lambda in [0.1, 1.0] {
            let b = bounds::compute_bounds(&train, q, lambda).unwrap();
            for _ in 0..500 {
                testkit::randomize_poison_features(&mut rng, &mut poison);
                let params = ridge::fit(&train, &poison, lambda).unwrap();
                let w = params.max_abs_weight();
                assert!(
                    w <= b.weight_bound,
                    "q={q} lambda={lambda}: |w| = {w} breaks bound {}",
                    b.weight_bound
                );
                // intercept under the mean-centered parameterization
                let c_mc = bounds::mean_centered_intercept(&train, &poison);
                assert!(
                    c_mc >= b.intercept_lo && c_mc <= b.intercept_hi,
                    "q={q} lambda={lambda}: mean-centered intercept {c_mc} outside [{}, {}]",
                    b.intercept_lo,
                    b.intercept_hi
                );
                // the direct fit's intercept is a finding, not a failure
                if params.c < b.intercept_lo || params.c > b.intercept_hi {
                    direct_intercept_findings += 1;
                }
                trials += 1;
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 3 took {elapsed:.1}s (budget 60s)");
    println!(
        "[criterion 3] PASS: {trials} poison sets, 100% weight-bound and mean-centered intercept containment \
         ({direct_intercept_findings} direct-fit intercept findings logged) in {elapsed:.2}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: local optimizer + flips vs the brute-force oracle
// ---------------------------------------------------------------------------

struct ToyRuns {
    trajectories: Vec<Vec<f64>>,
    gaps: Vec<f64>,
    elapsed: f64,
}

static TOY_RUNS: LazyLock<ToyRuns> = LazyLock::new(|| {
    let started = Instant::now();
    let mut trajectories = Vec::new();
    let mut gaps = Vec::new();
    for i in 0..10u64 {
        // q = 1, m = 2, t = 1 with n(1) = 2, n = 8
        let (train, poison) = testkit::random_instance(4000 + i, 8, 2, 1, 1);
        assert_eq!(train.schema().cardinality(0), 2);
        let train = Arc::new(train);
        let lambda = 0.1;
        let oracle = brute_force(&train, &poison, lambda, &OracleConfig::default()).unwrap();
        assert_eq!(oracle.evaluations, 21u128 * 21 * 2);

        let config = StrategyConfig {
            method: Method::Ifcf,
            batch_fraction: 1.0,
            epochs: 2,
            optimizer: OptimizerConfig {
                multistart: 5,
                ..OptimizerConfig::default()
            },
            seed: 100 + i,
        };
        let outcome = run_ifcf(&train, poison, lambda, &config).unwrap();
        gaps.push(oracle.objective - outcome.objective);
        trajectories.push(outcome.trajectory);
    }
    ToyRuns {
        trajectories,
        gaps,
        elapsed: started.elapsed().as_secs_f64(),
    }
});

#[test]
fn criterion_4_optimizer_matches_oracle() {
    let runs = &*TOY_RUNS;
    for (i, gap) in runs.gaps.iter().enumerate() {
        assert!(
            *gap <= 1e-3,
            "instance {i}: oracle is {gap} above the optimizer (tolerance 1e-3)"
        );
    }
    assert!(
        runs.elapsed < 120.0,
        "criterion 4 took {:.1}s (budget 120s)",
        runs.elapsed
    );
    let worst = runs.gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "[criterion 4] PASS: 10 toy instances within 1e-3 of the 21-point-grid oracle (worst gap {worst:.2e}) in {:.2}s",
        runs.elapsed
    );
}

// ---------------------------------------------------------------------------
// Criteria 6 + 7 shared desk-scale campaign
// ---------------------------------------------------------------------------

/// Synthetic benchmark: 160 rows, 8 numerics, 5 categoricals with 3 labels
/// each, linear response with categorical effects and mild noise.
fn write_campaign_fixture(dir: &Path) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let m = 8;
    let labels = ["p", "q", "r"];
    let mut header: Vec<String> = (0..m).map(|j| format!("x{j}")).collect();
    for j in 0..5 {
        header.push(format!("c{j}"));
    }
    header.push("y".into());
    let mut csv = header.join(",");
    csv.push('\n');

    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.3..0.5)).collect();
    let cat_effects: Vec<[f64; 3]> = (0..5)
        .map(|_| [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)])
        .collect();
    for _ in 0..160 {
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cats: Vec<usize> = (0..5).map(|_| rng.gen_range(0..3)).collect();
        let mut y = 0.35 + rng.gen_range(-0.05..0.05);
        for (w, v) in weights.iter().zip(&x) {
            y += w * v;
        }
        for (effects, &z) in cat_effects.iter().zip(&cats) {
            y += effects[z];
        }
        let y = y.clamp(0.0, 1.0);
        let mut line = String::new();
        for v in &x {
            write!(line, "{v:.6},").unwrap();
        }
        for &z in &cats {
            write!(line, "{},", labels[z]).unwrap();
        }
        writeln!(line, "{y:.6}").unwrap();
        csv.push_str(&line);
    }

    let schema = FeatureSchema::new(
        (0..m).map(|j| format!("x{j}")).collect(),
        (0..5)
            .map(|j| poisonforge_core::CategoricalSpec {
                name: format!("c{j}"),
                labels: labels.iter().map(|s| s.to_string()).collect(),
            })
            .collect(),
        "y".into(),
    )
    .unwrap();

    let data = dir.join("bench.csv");
    let schema_path = dir.join("bench.schema.json");
    std::fs::write(&data, csv).unwrap();
    std::fs::write(&schema_path, schema.to_json()).unwrap();
    (
        data.to_string_lossy().into_owned(),
        schema_path.to_string_lossy().into_owned(),
    )
}

struct Campaign {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    data_path: String,
    schema_path: String,
    records_cv: Vec<CellRecord>,
    records_sweep: Vec<CellRecord>,
    build_seconds: f64,
}

const RATES: [f64; 5] = [0.04, 0.08, 0.12, 0.16, 0.2];
const SEEDS: std::ops::Range<u64> = 0..10;

static CAMPAIGN: LazyLock<Campaign> = LazyLock::new(|| {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (data_path, schema_path) = write_campaign_fixture(dir.path());
    let base = CampaignSpec {
        data_path: data_path.clone(),
        schema_path: schema_path.clone(),
        methods: vec![Method::Ias, Method::Sas, Method::Ifcf],
        rates: RATES.to_vec(),
        seeds: SEEDS.collect(),
        lambdas: vec![LambdaSpec::Cv],
        batch_fractions: vec![0.25],
        epochs: 2,
        split: SplitSizes {
            train: 100,
            val: 0,
            test: 60,
        },
        optimizer: OptimizerConfig::default(),
        cv_folds: 10,
        threads: 4,
    };
    let records_cv = harness::run_campaign(&base).unwrap();
    let sweep = CampaignSpec {
        methods: vec![Method::Ias, Method::Sas],
        rates: vec![0.2],
        lambdas: vec![LambdaSpec::Fixed(0.01), LambdaSpec::Fixed(10.0)],
        ..base
    };
    let records_sweep = harness::run_campaign(&sweep).unwrap();
    Campaign {
        dir,
        data_path,
        schema_path,
        records_cv,
        records_sweep,
        build_seconds: started.elapsed().as_secs_f64(),
    }
});

fn mean_poisoned_train(records: &[CellRecord], method: Method, rate: f64) -> f64 {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.rate == rate && r.status == "ok")
        .map(|r| r.mse_poisoned_train.unwrap())
        .collect();
    assert!(!values.is_empty(), "no ok cells for {method} at rate {rate}");
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn criterion_6_paper_trends_at_desk_scale() {
    let campaign = &*CAMPAIGN;
    let records = &campaign.records_cv;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    assert_eq!(failed, 0, "campaign had failed cells");

    // (a) mean MSE(SAS) >= mean MSE(IAS) at every rate
    for &rate in &RATES {
        let ias = mean_poisoned_train(records, Method::Ias, rate);
        let sas = mean_poisoned_train(records, Method::Sas, rate);
        assert!(
            sas >= ias - 1e-15,
            "rate {rate}: mean SAS {sas} < mean IAS {ias}"
        );
    }

    // (b) IFCF >= SAS on every single run (same seed and rate)
    for &rate in &RATES {
        for seed in SEEDS {
            let value = |method: Method| {
                records
                    .iter()
                    .find(|r| r.method == method && r.rate == rate && r.seed == seed)
                    .and_then(|r| r.mse_poisoned_train)
                    .unwrap()
            };
            let sas = value(Method::Sas);
            let ifcf = value(Method::Ifcf);
            assert!(
                ifcf >= sas - 1e-15,
                "seed {seed} rate {rate}: IFCF {ifcf} < SAS {sas}"
            );
        }
    }

    // (c) poisoned MSE non-decreasing in the poisoning rate, per seed & method
    for method in [Method::Ias, Method::Sas, Method::Ifcf] {
        for seed in SEEDS {
            let mut last = f64::NEG_INFINITY;
            for &rate in &RATES {
                let v = records
                    .iter()
                    .find(|r| r.method == method && r.rate == rate && r.seed == seed)
                    .and_then(|r| r.mse_poisoned_train)
                    .unwrap();
                assert!(
                    v >= last - 1e-15,
                    "{method} seed {seed}: MSE dropped from {last} to {v} at rate {rate}"
                );
                last = v;
            }
        }
    }

    assert!(
        campaign.build_seconds < 900.0,
        "campaign took {:.0}s (budget 900s)",
        campaign.build_seconds
    );
    println!(
        "[criterion 6] PASS: SAS >= IAS in the mean at all 5 rates; IFCF >= SAS on all {} runs; \
         MSE monotone in r per seed and method; campaign built in {:.1}s",
        RATES.len() * SEEDS.count(),
        campaign.build_seconds
    );
}

#[test]
fn criterion_7_lambda_sweep_shrinks_the_gap() {
    let campaign = &*CAMPAIGN;
    let gap = |lambda: LambdaSpec| -> f64 {
        let records: Vec<&CellRecord> = campaign
            .records_sweep
            .iter()
            .filter(|r| r.lambda == lambda && r.status == "ok")
            .collect();
        let mean = |method: Method| {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.mse_poisoned_train.unwrap())
                .collect();
            assert_eq!(v.len(), SEEDS.count());
            v.iter().sum::<f64>() / v.len() as f64
        };
        mean(Method::Sas) - mean(Method::Ias)
    };
    let gap_small = gap(LambdaSpec::Fixed(0.01));
    let gap_large = gap(LambdaSpec::Fixed(10.0));
    assert!(
        gap_large <= gap_small + 1e-12,
        "gap at lambda=10 ({gap_large}) exceeds gap at lambda=0.01 ({gap_small})"
    );
    println!(
        "[criterion 7] PASS: SAS-IAS gap {gap_large:.3e} at lambda=10 <= {gap_small:.3e} at lambda=0.01 (10-seed means)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: monotone trajectories across criteria 4 and 6 runs
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_monotone_trajectories() {
    let mut checked = 0usize;
    let mut events = 0usize;
    // criterion 4 runs: every IFCF event is an accepted strict improvement
    for traj in &TOY_RUNS.trajectories {
        for w in traj.windows(2) {
            assert!(w[1] > w[0], "toy trajectory not strictly increasing: {traj:?}");
            events += 1;
        }
        checked += 1;
    }
    // criterion 6 runs (all methods): non-decreasing everywhere
    for record in CAMPAIGN
        .records_cv
        .iter()
        .chain(&CAMPAIGN.records_sweep)
        .filter(|r| r.status == "ok")
    {
        assert!(!record.trajectory.is_empty(), "missing trajectory");
        for w in record.trajectory.windows(2) {
            assert!(
                w[1] >= w[0],
                "{} seed {} rate {}: trajectory dipped from {} to {}",
                record.method,
                record.seed,
                record.rate,
                w[0],
                w[1]
            );
            events += 1;
        }
        // accepted events on the monotone strategies are strict improvements
        if record.method != Method::Ias {
            for w in record.trajectory.windows(2) {
                assert!(
                    w[1] > w[0],
                    "{} seed {} rate {} lambda {}: accepted event did not strictly improve ({} -> {}), trajectory {:?}",
                    record.method,
                    record.seed,
                    record.rate,
                    record.lambda,
                    w[0],
                    w[1],
                    record.trajectory
                );
            }
        }
        checked += 1;
    }
    println!(
        "[criterion 5] PASS: {checked} trajectories / {events} recorded steps, zero monotonicity violations"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: determinism and serialization through the real binary
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_determinism_and_round_trip() {
    let campaign = &*CAMPAIGN;
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let status = bin()
            .current_dir(dir.path())
            .args([
                "attack",
                "--data",
                &campaign.data_path,
                "--schema",
                &campaign.schema_path,
                "--method",
                "ifcf",
                "--rate",
                "0.12",
                "--lambda",
                "cv",
                "--batch-frac",
                "0.25",
                "--seed",
                "5",
                "--train",
                "100",
                "--val",
                "0",
                "--test",
                "60",
                "--save-poison",
                "--out",
                out,
            ])
            .status()
            .unwrap();
        assert!(status.success());
        dir.path().join(out).join("attack_ifcf_r0.12_lcv_b0.25_s5.json")
    };
    let a_path = run("a");
    let b_path = run("b");

    let a_bytes = std::fs::read_to_string(&a_path).unwrap();
    let b_bytes = std::fs::read_to_string(&b_path).unwrap();
    let mut a: serde_json::Value = serde_json::from_str(&a_bytes).unwrap();
    let mut b: serde_json::Value = serde_json::from_str(&b_bytes).unwrap();
    a.as_object_mut().unwrap().remove("timing");
    b.as_object_mut().unwrap().remove("timing");
    assert_eq!(a, b, "identical invocations produced different records");

    // file round trip: parse and re-serialize to the exact same bytes
    let parsed = harness::AttackResult::from_json(&a_bytes).unwrap();
    assert_eq!(parsed.to_json(), a_bytes);
    println!("[criterion 8] PASS: repeated attack invocations value-identical (timing aside); result file round-trips byte-identically");
}

// ---------------------------------------------------------------------------
// Criterion 9 (conditional on network): public-dataset smoke run
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_public_dataset_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let fetch = bin()
        .current_dir(dir.path())
        .args(["fetch-data", "--dataset", "house", "--out", "data"])
        .output()
        .unwrap();
    if fetch.status.code() == Some(3) {
        println!(
            "[criterion 9] SKIP: network unavailable ({})",
            String::from_utf8_lossy(&fetch.stderr).trim()
        );
        return;
    }
    assert!(
        fetch.status.success(),
        "fetch-data failed: {}",
        String::from_utf8_lossy(&fetch.stderr)
    );

    let out = bin()
        .current_dir(dir.path())
        .args([
            "attack",
            "--data",
            "data/house.csv",
            "--schema",
            "data/house.schema.cat5.json",
            "--method",
            "ifcf",
            "--rate",
            "0.2",
            "--lambda",
            "cv",
            "--out",
            "res",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "attack failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("row: house train 20"), "missing table row: {stdout}");

    let record: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("res/attack_ifcf_r0.2_lcv_b0.1_s42.json"))
            .unwrap(),
    )
    .unwrap();
    let clean = record["mse"]["unpoisoned_train"].as_f64().unwrap();
    let poisoned = record["mse"]["poisoned_train"].as_f64().unwrap();
    assert!(
        poisoned > clean,
        "poisoning did not increase training MSE ({poisoned} <= {clean})"
    );
    println!(
        "[criterion 9] PASS: house/cat5 ifcf r=0.2: clean {clean:.6} -> poisoned {poisoned:.6}"
    );
}

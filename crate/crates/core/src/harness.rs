//! Experiment pipeline: run specs, result records, campaign runner, table
//! formatting, and schema inference for one-hot encoded public datasets.
//!
//! One attack run is: load → split (seeded) → scale with training stats →
//! pick λ (fixed or cross-validated) → initialize the poison set → run the
//! strategy → evaluate on train and test. Everything a run needs is in its
//! [`RunSpec`], so any result is reproducible from its config echo alone.


use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, SpectralReadings, VariableBounds};
use crate::dataset::{self, Dataset, PoisonSet, RawTable, ScalingStats};
use crate::error::{Error, Result};
use crate::localopt::OptimizerConfig;
use crate::ridge;
use crate::schema::{CategoricalSpec, FeatureSchema};
use crate::strategies::{self, Method, StrategyConfig};

/// Deterministic sub-stream derivation from the master seed.
pub fn subseed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const STREAM_SPLIT: u64 = 1;
const STREAM_CV: u64 = 2;
const STREAM_POISON: u64 = 3;
const STREAM_STRATEGY: u64 = 4;

/// Regularization choice: a fixed positive value or cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Cv,
    Fixed(f64),
}

impl std::str::FromStr for LambdaSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(LambdaSpec::Cv);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Argument(format!("lambda must be 'cv' or a positive real, got '{s}'")))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Argument(format!("lambda must be positive, got {v}")));
        }
        Ok(LambdaSpec::Fixed(v))
    }
}

impl std::fmt::Display for LambdaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaSpec::Cv => write!(f, "cv"),
            LambdaSpec::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for LambdaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaSpec::Cv => s.serialize_str("cv"),
            LambdaSpec::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(LambdaSpec::Fixed(v)),
            Repr::Str(s) if s.eq_ignore_ascii_case("cv") => Ok(LambdaSpec::Cv),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "lambda must be 'cv' or a number, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    /// The split used throughout the experiments: 300/250/500.
    pub fn paper_default() -> Self {
        SplitSizes {
            train: 300,
            val: 250,
            test: 500,
        }
    }
}

/// Full description of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub data_path: String,
    pub schema_path: String,
    pub method: Method,
    pub rate: f64,
    pub lambda: LambdaSpec,
    pub batch_fraction: f64,
    pub epochs: usize,
    pub seed: u64,
    pub split: SplitSizes,
    pub optimizer: OptimizerConfig,
    pub cv_folds: usize,
    pub save_poison: bool,
    pub strict_bounds: bool,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::Argument(format!(
                "rate must be in (0,1], got {}",
                self.rate
            )));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "batch fraction must be in (0,1], got {}",
                self.batch_fraction
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be >= 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Argument("cv folds must be >= 2".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub unpoisoned_train: f64,
    pub unpoisoned_test: f64,
    pub poisoned_train: f64,
    pub poisoned_test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub bounds: VariableBounds,
    pub readings: SpectralReadings,
    /// Observed bound violations by the direct-system fit. Findings, not
    /// failures, unless `strict_bounds` is set.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub cv_seconds: f64,
    pub attack_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonRecord {
    pub num: Vec<Vec<f64>>,
    pub cat: Vec<Vec<usize>>,
    pub y: Vec<f64>,
    pub origin_indices: Vec<usize>,
}

impl PoisonRecord {
    fn from_poison(p: &PoisonSet) -> Self {
        let m = p.schema().num_numerical();
        let t = p.schema().num_categorical();
        PoisonRecord {
            num: (0..p.n_samples())
                .map(|k| (0..m).map(|j| p.num()[(k, j)]).collect())
                .collect(),
            cat: (0..p.n_samples())
                .map(|k| (0..t).map(|j| p.cat(k, j)).collect())
                .collect(),
            y: p.y().iter().copied().collect(),
            origin_indices: p.origin_indices().to_vec(),
        }
    }
}

/// One attack run's full result record. Serialized as JSON; the `timing`
/// block is the only part that varies between identical reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub config: RunSpec,
    pub lambda_used: f64,
    pub mse: MseReport,
    pub trajectory: Vec<f64>,
    /// IAS only: per-stage objectives on the growing dataset (diagnostic).
    pub stage_objectives: Vec<f64>,
    pub accepted_events: usize,
    pub sas_phase_objective: Option<f64>,
    pub bounds: BoundsReport,
    pub warnings: Vec<String>,
    pub poison: Option<PoisonRecord>,
    pub timing: TimingReport,
}

impl AttackResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::Argument(format!("invalid result record: {e}")))
    }
}

/// The split, scaled datasets a run operates on.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub stats: ScalingStats,
    pub warnings: Vec<String>,
}

/// Split raw rows by a seeded shuffle, then scale every part with the
/// training statistics (validation/test values are clamped into [0,1]).
pub fn prepare_split(raw: &RawTable, sizes: SplitSizes, seed: u64) -> Result<PreparedSplit> {
    let (train_idx, val_idx, test_idx) = dataset::split_indices(
        raw.n_rows(),
        (sizes.train, sizes.val, sizes.test),
        seed,
    )?;
    let raw_train = raw.subset(&train_idx);
    let raw_val = raw.subset(&val_idx);
    let raw_test = raw.subset(&test_idx);
    let (train, stats, warnings) = dataset::encode_and_scale(&raw_train, None)?;
    let (val, _, _) = dataset::encode_and_scale(&raw_val, Some(&stats))?;
    let (test, _, _) = dataset::encode_and_scale(&raw_test, Some(&stats))?;
    Ok(PreparedSplit {
        train,
        val,
        test,
        stats,
        warnings,
    })
}

/// Run one attack from its spec, loading everything from disk.
pub fn run_attack(spec: &RunSpec) -> Result<AttackResult> {
    spec.validate()?;
    let schema = FeatureSchema::load(&spec.schema_path)?;
    let raw = dataset::load_csv(&spec.data_path, &schema)?;
    run_attack_on_raw(spec, &raw)
}

/// Run one attack on an already-loaded raw table (shared by the campaign
/// runner so the CSV is parsed once).
pub fn run_attack_on_raw(spec: &RunSpec, raw: &RawTable) -> Result<AttackResult> {
    spec.validate()?;
    let started = Instant::now();
    let prepared = prepare_split(raw, spec.split, subseed(spec.seed, STREAM_SPLIT))?;
    let train = Arc::new(prepared.train);

    let cv_started = Instant::now();
    let lambda_used = match spec.lambda {
        LambdaSpec::Fixed(v) => v,
        LambdaSpec::Cv => ridge::cv_lambda(
            &train,
            &ridge::lambda_grid_default(),
            spec.cv_folds,
            subseed(spec.seed, STREAM_CV),
        )?,
    };
    let cv_seconds = cv_started.elapsed().as_secs_f64();

    let poison = dataset::init_poison(&train, spec.rate, subseed(spec.seed, STREAM_POISON))?;
    let q = poison.n_samples();
    let (var_bounds, readings) = bounds::compute_bounds_with_readings(&train, q, lambda_used)?;

    let empty = PoisonSet::empty(Arc::clone(train.schema()));
    let clean_params = ridge::fit(&train, &empty, lambda_used)?;
    let unpoisoned_train = ridge::mse(&clean_params, &train)?;
    let unpoisoned_test = ridge::mse(&clean_params, &prepared.test)?;

    let strategy_config = StrategyConfig {
        method: spec.method,
        batch_fraction: spec.batch_fraction,
        epochs: spec.epochs,
        optimizer: spec.optimizer.clone(),
        seed: subseed(spec.seed, STREAM_STRATEGY),
    };
    let attack_started = Instant::now();
    let outcome = strategies::run(&train, poison, lambda_used, &strategy_config)?;
    let attack_seconds = attack_started.elapsed().as_secs_f64();

    let poisoned_train = outcome.objective;
    let poisoned_test = ridge::mse(&outcome.params, &prepared.test)?;

    let mut violations = Vec::new();
    let max_w = outcome.params.max_abs_weight();
    if max_w > var_bounds.weight_bound {
        violations.push(format!(
            "max |w| = {max_w} exceeds weight bound {}",
            var_bounds.weight_bound
        ));
    }
    let c = outcome.params.c;
    if c < var_bounds.intercept_lo || c > var_bounds.intercept_hi {
        violations.push(format!(
            "direct-fit intercept {c} outside [{}, {}] (mean-centered interval)",
            var_bounds.intercept_lo, var_bounds.intercept_hi
        ));
    }
    if spec.strict_bounds && !violations.is_empty() {
        return Err(Error::Argument(format!(
            "bounds violated: {}",
            violations.join("; ")
        )));
    }

    Ok(AttackResult {
        config: spec.clone(),
        lambda_used,
        mse: MseReport {
            unpoisoned_train,
            unpoisoned_test,
            poisoned_train,
            poisoned_test,
        },
        trajectory: outcome.trajectory,
        stage_objectives: outcome.stage_objectives,
        accepted_events: outcome.accepted_events,
        sas_phase_objective: outcome.sas_phase_objective,
        bounds: BoundsReport {
            bounds: var_bounds,
            readings,
            violations,
        },
        warnings: prepared.warnings,
        poison: spec.save_poison.then(|| PoisonRecord::from_poison(&outcome.poison)),
        timing: TimingReport {
            cv_seconds,
            attack_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

// ---------------------------------------------------------------------------
// Campaign runner
// ---------------------------------------------------------------------------

/// Cross-product campaign description. The first method is the baseline all
/// Δ% values are computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub data_path: String,
    pub schema_path: String,
    pub methods: Vec<Method>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<LambdaSpec>,
    pub batch_fractions: Vec<f64>,
    pub epochs: usize,
    pub split: SplitSizes,
    pub optimizer: OptimizerConfig,
    pub cv_folds: usize,
    pub threads: usize,
}

/// One campaign cell's outcome. `Err` cells record the failure and the
/// campaign continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Method,
    pub rate: f64,
    pub lambda: LambdaSpec,
    pub batch_fraction: f64,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub lambda_used: Option<f64>,
    pub mse_unpoisoned_train: Option<f64>,
    pub mse_poisoned_train: Option<f64>,
    pub mse_unpoisoned_test: Option<f64>,
    pub mse_poisoned_test: Option<f64>,
    #[serde(skip)]
    pub attack_seconds: Option<f64>,
    #[serde(skip)]
    pub trajectory: Vec<f64>,
}

impl CampaignSpec {
    fn cell_spec(&self, method: Method, rate: f64, lambda: LambdaSpec, bf: f64, seed: u64) -> RunSpec {
        RunSpec {
            data_path: self.data_path.clone(),
            schema_path: self.schema_path.clone(),
            method,
            rate,
            lambda,
            batch_fraction: bf,
            epochs: self.epochs,
            seed,
            split: self.split,
            optimizer: self.optimizer.clone(),
            cv_folds: self.cv_folds,
            save_poison: false,
            strict_bounds: false,
        }
    }

    /// All cells in deterministic order: lambda, batch fraction, rate,
    /// seed, then method (the order the tables group by).
    pub fn cells(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &lambda in &self.lambdas {
            for &bf in &self.batch_fractions {
                for &rate in &self.rates {
                    for &seed in &self.seeds {
                        for &method in &self.methods {
                            out.push(self.cell_spec(method, rate, lambda, bf, seed));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Run every cell, in a worker pool of `spec.threads` threads, collecting
/// records in deterministic cell order. Cell failures are recorded, not
/// propagated.
pub fn run_campaign(spec: &CampaignSpec) -> Result<Vec<CellRecord>> {
    let schema = FeatureSchema::load(&spec.schema_path)?;
    let raw = dataset::load_csv(&spec.data_path, &schema)?;
    let cells = spec.cells();

    let run_cell = |cell: &RunSpec| -> CellRecord {
        let base = CellRecord {
            method: cell.method,
            rate: cell.rate,
            lambda: cell.lambda,
            batch_fraction: cell.batch_fraction,
            seed: cell.seed,
            status: "ok".into(),
            error: None,
            lambda_used: None,
            mse_unpoisoned_train: None,
            mse_poisoned_train: None,
            mse_unpoisoned_test: None,
            mse_poisoned_test: None,
            attack_seconds: None,
            trajectory: Vec::new(),
        };
        match run_attack_on_raw(cell, &raw) {
            Ok(result) => CellRecord {
                lambda_used: Some(result.lambda_used),
                mse_unpoisoned_train: Some(result.mse.unpoisoned_train),
                mse_poisoned_train: Some(result.mse.poisoned_train),
                mse_unpoisoned_test: Some(result.mse.unpoisoned_test),
                mse_poisoned_test: Some(result.mse.poisoned_test),
                attack_seconds: Some(result.timing.attack_seconds),
                trajectory: result.trajectory,
                ..base
            },
            Err(err) => CellRecord {
                status: "error".into(),
                error: Some(err.to_string()),
                ..base
            },
        }
    };

    if spec.threads <= 1 {
        Ok(cells.iter().map(run_cell).collect())
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?;
        Ok(pool.install(|| cells.par_iter().map(run_cell).collect()))
    }
}

// ---------------------------------------------------------------------------
// Campaign persistence: results / timings / summary / figure CSVs
// ---------------------------------------------------------------------------

const RESULTS_HEADER: [&str; 11] = [
    "method",
    "rate",
    "lambda",
    "batch_fraction",
    "seed",
    "status",
    "lambda_used",
    "mse_unpoisoned_train",
    "mse_poisoned_train",
    "mse_unpoisoned_test",
    "mse_poisoned_test",
];

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Deterministic campaign table: one row per cell, no wall-clock columns
/// (identical reruns produce byte-identical output). Cell errors appear as
/// a 12th `error` column.
pub fn results_csv_string(records: &[CellRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = RESULTS_HEADER.to_vec();
    header.push("error");
    w.write_record(&header).expect("csv write");
    for r in records {
        w.write_record(&[
            r.method.to_string(),
            r.rate.to_string(),
            r.lambda.to_string(),
            r.batch_fraction.to_string(),
            r.seed.to_string(),
            r.status.clone(),
            opt_f64(r.lambda_used),
            opt_f64(r.mse_unpoisoned_train),
            opt_f64(r.mse_poisoned_train),
            opt_f64(r.mse_unpoisoned_test),
            opt_f64(r.mse_poisoned_test),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

/// Parse a results CSV back into records (timing and trajectories are not
/// persisted there and come back empty).
pub fn parse_results_csv(text: &str) -> Result<Vec<CellRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Argument(format!("bad results csv: {e}")))?;
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        let parse_opt = |i: usize| -> Result<Option<f64>> {
            let s = get(i);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::Argument(format!("bad float '{s}': {e}")))
            }
        };
        out.push(CellRecord {
            method: get(0).parse()?,
            rate: get(1)
                .parse()
                .map_err(|e| Error::Argument(format!("bad rate: {e}")))?,
            lambda: get(2).parse()?,
            batch_fraction: get(3)
                .parse()
                .map_err(|e| Error::Argument(format!("bad batch fraction: {e}")))?,
            seed: get(4)
                .parse()
                .map_err(|e| Error::Argument(format!("bad seed: {e}")))?,
            status: get(5),
            lambda_used: parse_opt(6)?,
            mse_unpoisoned_train: parse_opt(7)?,
            mse_poisoned_train: parse_opt(8)?,
            mse_unpoisoned_test: parse_opt(9)?,
            mse_poisoned_test: parse_opt(10)?,
            error: {
                let e = get(11);
                (!e.is_empty()).then_some(e)
            },
            attack_seconds: None,
            trajectory: Vec::new(),
        });
    }
    Ok(out)
}

/// Wall-clock sidecar, keyed like the results table. Not byte-stable.
pub fn timings_csv_string(records: &[CellRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "rate", "lambda", "batch_fraction", "seed", "attack_seconds"])
        .expect("csv write");
    for r in records {
        w.write_record(&[
            r.method.to_string(),
            r.rate.to_string(),
            r.lambda.to_string(),
            r.batch_fraction.to_string(),
            r.seed.to_string(),
            opt_f64(r.attack_seconds),
        ])
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

/// Merge a timings sidecar into parsed records (best effort by cell key).
pub fn attach_timings(records: &mut [CellRecord], timings_csv: &str) {
    let mut rdr = csv::ReaderBuilder::new().from_reader(timings_csv.as_bytes());
    for row in rdr.records().flatten() {
        let key: Vec<&str> = (0..5).map(|i| row.get(i).unwrap_or("")).collect();
        let secs: Option<f64> = row.get(5).and_then(|s| s.parse().ok());
        for r in records.iter_mut() {
            if r.method.to_string() == key[0]
                && r.rate.to_string() == key[1]
                && r.lambda.to_string() == key[2]
                && r.batch_fraction.to_string() == key[3]
                && r.seed.to_string() == key[4]
            {
                r.attack_seconds = secs;
            }
        }
    }
}

/// Per-(method, rate, lambda, batch fraction) aggregation over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rate: f64,
    pub lambda: LambdaSpec,
    pub batch_fraction: f64,
    pub n_ok: usize,
    pub mean_mse_train: f64,
    pub mean_mse_test: f64,
    pub mean_unpoisoned_train: f64,
    pub mean_unpoisoned_test: f64,
    pub mean_seconds: Option<f64>,
    /// Δ% against the baseline method in the same (rate, lambda, batch)
    /// group; `None` on the baseline itself or when the baseline failed.
    pub delta_train_pct: Option<f64>,
    pub delta_test_pct: Option<f64>,
}

type GroupKey = (String, u64, u64, String); // (lambda, batch bits, rate bits, method)

fn cell_key(r: &CellRecord) -> GroupKey {
    (
        r.lambda.to_string(),
        r.batch_fraction.to_bits(),
        r.rate.to_bits(),
        r.method.to_string(),
    )
}

/// Aggregate ok-cells into summary rows (first-appearance order) and fill
/// Δ% columns against `baseline`.
pub fn summarize(records: &[CellRecord], baseline: Method) -> Vec<SummaryRow> {
    struct Acc {
        row: SummaryRow,
        sum_train: f64,
        sum_test: f64,
        sum_up_train: f64,
        sum_up_test: f64,
        sum_secs: f64,
        n_secs: usize,
    }
    let mut groups: Vec<(GroupKey, Acc)> = Vec::new();
    for r in records {
        if r.status != "ok" {
            continue;
        }
        let key = cell_key(r);
        let acc = match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, acc)) => acc,
            None => {
                groups.push((
                    key,
                    Acc {
                        row: SummaryRow {
                            method: r.method,
                            rate: r.rate,
                            lambda: r.lambda,
                            batch_fraction: r.batch_fraction,
                            n_ok: 0,
                            mean_mse_train: 0.0,
                            mean_mse_test: 0.0,
                            mean_unpoisoned_train: 0.0,
                            mean_unpoisoned_test: 0.0,
                            mean_seconds: None,
                            delta_train_pct: None,
                            delta_test_pct: None,
                        },
                        sum_train: 0.0,
                        sum_test: 0.0,
                        sum_up_train: 0.0,
                        sum_up_test: 0.0,
                        sum_secs: 0.0,
                        n_secs: 0,
                    },
                ));
                &mut groups.last_mut().unwrap().1
            }
        };
        acc.row.n_ok += 1;
        acc.sum_train += r.mse_poisoned_train.unwrap_or(f64::NAN);
        acc.sum_test += r.mse_poisoned_test.unwrap_or(f64::NAN);
        acc.sum_up_train += r.mse_unpoisoned_train.unwrap_or(f64::NAN);
        acc.sum_up_test += r.mse_unpoisoned_test.unwrap_or(f64::NAN);
        if let Some(s) = r.attack_seconds {
            acc.sum_secs += s;
            acc.n_secs += 1;
        }
    }

    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|(_, acc)| {
            let n = acc.row.n_ok as f64;
            SummaryRow {
                mean_mse_train: acc.sum_train / n,
                mean_mse_test: acc.sum_test / n,
                mean_unpoisoned_train: acc.sum_up_train / n,
                mean_unpoisoned_test: acc.sum_up_test / n,
                mean_seconds: (acc.n_secs > 0).then(|| acc.sum_secs / acc.n_secs as f64),
                ..acc.row
            }
        })
        .collect();

    // Δ% against the baseline within each (lambda, batch, rate) group
    let baselines: Vec<(String, u64, u64, f64, f64)> = rows
        .iter()
        .filter(|r| r.method == baseline)
        .map(|r| {
            (
                r.lambda.to_string(),
                r.batch_fraction.to_bits(),
                r.rate.to_bits(),
                r.mean_mse_train,
                r.mean_mse_test,
            )
        })
        .collect();
    for row in &mut rows {
        if row.method == baseline {
            continue;
        }
        if let Some((_, _, _, bt, bs)) = baselines.iter().find(|(l, b, rt, _, _)| {
            *l == row.lambda.to_string()
                && *b == row.batch_fraction.to_bits()
                && *rt == row.rate.to_bits()
        }) {
            row.delta_train_pct = Some(delta_pct(*bt, row.mean_mse_train));
            row.delta_test_pct = Some(delta_pct(*bs, row.mean_mse_test));
        }
    }
    rows
}

pub fn summary_csv_string(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "rate",
        "lambda",
        "batch_fraction",
        "n_ok",
        "mean_mse_unpoisoned_train",
        "mean_mse_poisoned_train",
        "mean_mse_unpoisoned_test",
        "mean_mse_poisoned_test",
        "delta_train_pct",
        "delta_test_pct",
    ])
    .expect("csv write");
    for r in rows {
        w.write_record(&[
            r.method.to_string(),
            r.rate.to_string(),
            r.lambda.to_string(),
            r.batch_fraction.to_string(),
            r.n_ok.to_string(),
            r.mean_unpoisoned_train.to_string(),
            r.mean_mse_train.to_string(),
            r.mean_unpoisoned_test.to_string(),
            r.mean_mse_test.to_string(),
            opt_f64(r.delta_train_pct),
            opt_f64(r.delta_test_pct),
        ])
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

/// Plot data for the λ sweep: x = lambda, series = (method, rate),
/// y = mean poisoned MSE over seeds.
pub fn figure_lambda_csv(records: &[CellRecord], baseline: Method) -> String {
    figure_csv(records, baseline, "lambda", |r| r.lambda.to_string())
}

/// Plot data for the batch-size sweep: x = batch fraction.
pub fn figure_batch_csv(records: &[CellRecord], baseline: Method) -> String {
    figure_csv(records, baseline, "batch_fraction", |r| {
        r.batch_fraction.to_string()
    })
}

fn figure_csv(
    records: &[CellRecord],
    baseline: Method,
    x_name: &str,
    x_of: impl Fn(&SummaryRow) -> String,
) -> String {
    let rows = summarize(records, baseline);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([x_name, "rate", "method", "mean_mse_train", "mean_mse_test"])
        .expect("csv write");
    for r in &rows {
        w.write_record(&[
            x_of(r),
            r.rate.to_string(),
            r.method.to_string(),
            r.mean_mse_train.to_string(),
            r.mean_mse_test.to_string(),
        ])
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

/// Per-run scatter plus geometric-mean improvement rows. Run rows carry the
/// per-seed MSEs and their ratio to the baseline run with the same seed;
/// `geomean` rows carry the geometric average of those ratios.
pub fn figure_runs_csv(records: &[CellRecord], baseline: Method) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kind",
        "lambda",
        "batch_fraction",
        "rate",
        "seed",
        "method",
        "mse_train",
        "mse_test",
        "ratio_train_vs_base",
        "ratio_test_vs_base",
    ])
    .expect("csv write");

    let base_of = |r: &CellRecord| -> Option<(f64, f64)> {
        records
            .iter()
            .find(|b| {
                b.method == baseline
                    && b.status == "ok"
                    && b.seed == r.seed
                    && b.rate == r.rate
                    && b.lambda == r.lambda
                    && b.batch_fraction == r.batch_fraction
            })
            .and_then(|b| Some((b.mse_poisoned_train?, b.mse_poisoned_test?)))
    };

    // run rows
    for r in records.iter().filter(|r| r.status == "ok") {
        let (ratio_train, ratio_test) = match (r.method != baseline, base_of(r)) {
            (true, Some((bt, bs))) => (
                r.mse_poisoned_train.map(|v| v / bt),
                r.mse_poisoned_test.map(|v| v / bs),
            ),
            _ => (None, None),
        };
        w.write_record(&[
            "run".to_string(),
            r.lambda.to_string(),
            r.batch_fraction.to_string(),
            r.rate.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
            opt_f64(r.mse_poisoned_train),
            opt_f64(r.mse_poisoned_test),
            opt_f64(ratio_train),
            opt_f64(ratio_test),
        ])
        .expect("csv write");
    }

    // geometric means per (lambda, batch, rate, method != baseline)
    let mut keys: Vec<GroupKey> = Vec::new();
    for r in records.iter().filter(|r| r.status == "ok") {
        if r.method == baseline {
            continue;
        }
        let key = cell_key(r);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for key in keys {
        let members: Vec<&CellRecord> = records
            .iter()
            .filter(|r| r.status == "ok" && cell_key(r) == key)
            .collect();
        let mut log_train = Vec::new();
        let mut log_test = Vec::new();
        for r in &members {
            if let Some((bt, bs)) = base_of(r) {
                if let (Some(t), Some(s)) = (r.mse_poisoned_train, r.mse_poisoned_test) {
                    log_train.push((t / bt).ln());
                    log_test.push((s / bs).ln());
                }
            }
        }
        if log_train.is_empty() {
            continue;
        }
        let geo = |logs: &[f64]| (logs.iter().sum::<f64>() / logs.len() as f64).exp();
        let sample = members[0];
        w.write_record(&[
            "geomean".to_string(),
            sample.lambda.to_string(),
            sample.batch_fraction.to_string(),
            sample.rate.to_string(),
            String::new(),
            sample.method.to_string(),
            String::new(),
            String::new(),
            geo(&log_train).to_string(),
            geo(&log_test).to_string(),
        ])
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

/// Side-by-side method comparison in the style of the MSE_IAS/MSE_SAS
/// tables: one row per rate, 4-decimal MSEs, 2-decimal Δ.
pub fn render_pair_table(rows: &[SummaryRow], base: Method, new: Method) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6}  {:>12}  {:>12}  {:>8}\n",
        "r(%)",
        format!("MSE_{base}"),
        format!("MSE_{new}"),
        "delta(%)"
    ));
    for b in rows.iter().filter(|r| r.method == base) {
        if let Some(n) = rows.iter().find(|r| {
            r.method == new
                && r.rate == b.rate
                && r.lambda == b.lambda
                && r.batch_fraction == b.batch_fraction
        }) {
            out.push_str(&format!(
                "{:>6.1}  {:>12}  {:>12}  {:>8}\n",
                b.rate * 100.0,
                format_mse4(b.mean_mse_train),
                format_mse4(n.mean_mse_train),
                format_delta(b.mean_mse_train, n.mean_mse_train),
            ));
        }
    }
    out
}

/// Train/test comparison with wall times in the style of the benchmark
/// tables: 6-decimal MSEs, optional mean times, 2-decimal Δ.
pub fn render_benchmark_table(rows: &[SummaryRow], base: Method, new: Method) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6}  {:>6}  {:>12} {:>9}  {:>12} {:>9}  {:>8}\n",
        "type",
        "r(%)",
        format!("MSE_{base}"),
        "time(s)",
        format!("MSE_{new}"),
        "time(s)",
        "delta(%)"
    ));
    let fmt_time = |t: Option<f64>| t.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    for split in ["train", "test"] {
        for b in rows.iter().filter(|r| r.method == base) {
            let Some(n) = rows.iter().find(|r| {
                r.method == new
                    && r.rate == b.rate
                    && r.lambda == b.lambda
                    && r.batch_fraction == b.batch_fraction
            }) else {
                continue;
            };
            let (bm, nm) = match split {
                "train" => (b.mean_mse_train, n.mean_mse_train),
                _ => (b.mean_mse_test, n.mean_mse_test),
            };
            let (btime, ntime) = if split == "train" {
                (fmt_time(b.mean_seconds), fmt_time(n.mean_seconds))
            } else {
                ("-".into(), "-".into())
            };
            out.push_str(&format!(
                "{:>6}  {:>6.1}  {:>12} {:>9}  {:>12} {:>9}  {:>8}\n",
                split,
                b.rate * 100.0,
                format_mse6(bm),
                btime,
                format_mse6(nm),
                ntime,
                format_delta(bm, nm),
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Improvement percentages and table formatting
// ---------------------------------------------------------------------------

/// Improvement percentage of a new MSE over a baseline: 100·(new/base − 1).
/// Positive values mean the attack got stronger.
pub fn delta_pct(base: f64, new: f64) -> f64 {
    100.0 * (new / base - 1.0)
}

/// Δ% rendered to two decimals, computed from full precision inputs.
pub fn format_delta(base: f64, new: f64) -> String {
    format!("{:.2}", delta_pct(base, new))
}

pub fn format_mse4(v: f64) -> String {
    format!("{v:.4}")
}

pub fn format_mse6(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------------------
// One-hot schema inference (for fetched pre-encoded datasets)
// ---------------------------------------------------------------------------

/// A table decoded from one-hot form back to label form, ready to be
/// written as (CSV, schema) pairs this crate can load.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedTable {
    pub schema: FeatureSchema,
    /// Output header: numerical names, categorical names, response.
    pub headers: Vec<String>,
    /// Row-major cells as strings (numerics formatted, labels, response).
    pub rows: Vec<Vec<String>>,
}

/// Detect one-hot blocks in a numeric matrix and rebuild a label-form
/// table. A block is a maximal run of ≥2 binary columns whose row sums hit
/// exactly 1 on every row; remaining columns are numerical. Block and label
/// names come from shared `name_label` header prefixes when present.
pub fn decode_onehot_table(
    headers: &[String],
    rows: &[Vec<f64>],
    response: usize,
) -> Result<DecodedTable> {
    let ncols = headers.len();
    if response >= ncols {
        return Err(Error::Argument(format!(
            "response column {response} out of range ({ncols} columns)"
        )));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Argument("ragged rows in one-hot table".into()));
    }

    let feature_cols: Vec<usize> = (0..ncols).filter(|&c| c != response).collect();
    let is_binary =
        |c: usize| rows.iter().all(|r| r[c] == 0.0 || r[c] == 1.0);

    // detect contiguous SOS-1 blocks over the feature columns
    let mut numeric_cols: Vec<usize> = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < feature_cols.len() {
        let col = feature_cols[i];
        if !is_binary(col) {
            numeric_cols.push(col);
            i += 1;
            continue;
        }
        // try to grow a block from here until every row sums to exactly 1
        let mut sums = vec![0.0; rows.len()];
        let mut j = i;
        let mut closed = None;
        while j < feature_cols.len() && is_binary(feature_cols[j]) {
            for (r, row) in rows.iter().enumerate() {
                sums[r] += row[feature_cols[j]];
            }
            if sums.iter().any(|&s| s > 1.0) {
                break;
            }
            if j > i && sums.iter().all(|&s| s == 1.0) {
                closed = Some(j);
                break;
            }
            j += 1;
        }
        match closed {
            Some(end) => {
                blocks.push(feature_cols[i..=end].to_vec());
                i = end + 1;
            }
            None => {
                numeric_cols.push(col);
                i += 1;
            }
        }
    }

    // order features by first column to keep the original layout
    let mut numeric_named: Vec<(usize, String)> = numeric_cols
        .iter()
        .map(|&c| (c, headers[c].clone()))
        .collect();
    numeric_named.sort_by_key(|(c, _)| *c);

    let mut cat_specs: Vec<(usize, CategoricalSpec, Vec<usize>)> = Vec::new();
    for (bi, block) in blocks.iter().enumerate() {
        let names: Vec<&str> = block.iter().map(|&c| headers[c].as_str()).collect();
        let (feature_name, labels) = split_block_names(&names, bi);
        cat_specs.push((
            block[0],
            CategoricalSpec {
                name: feature_name,
                labels,
            },
            block.clone(),
        ));
    }
    cat_specs.sort_by_key(|(c, _, _)| *c);

    let schema = FeatureSchema::new(
        numeric_named.iter().map(|(_, n)| n.clone()).collect(),
        cat_specs.iter().map(|(_, s, _)| s.clone()).collect(),
        headers[response].clone(),
    )?;

    let mut out_headers: Vec<String> = schema.numerical.clone();
    out_headers.extend(schema.categorical.iter().map(|c| c.name.clone()));
    out_headers.push(schema.response.clone());

    let mut out_rows = Vec::with_capacity(rows.len());
    for row in rows {
        let mut cells = Vec::with_capacity(out_headers.len());
        for &(c, _) in &numeric_named {
            cells.push(format!("{}", row[c]));
        }
        for (_, spec, cols) in &cat_specs {
            let hot = cols
                .iter()
                .position(|&c| row[c] == 1.0)
                .expect("block detection guarantees exactly one 1");
            cells.push(spec.labels[hot].clone());
        }
        cells.push(format!("{}", row[response]));
        out_rows.push(cells);
    }

    Ok(DecodedTable {
        schema,
        headers: out_headers,
        rows: out_rows,
    })
}

/// Derive a feature name and label names for a one-hot block from its
/// column headers: a shared `prefix_label` convention is used when every
/// header splits that way, otherwise a synthetic `cat<i>` name with the
/// full column names as labels.
fn split_block_names(names: &[&str], block_index: usize) -> (String, Vec<String>) {
    let split: Vec<Option<(&str, &str)>> = names.iter().map(|n| n.rsplit_once('_')).collect();
    if split.iter().all(|s| s.is_some()) {
        let prefixes: Vec<&str> = split.iter().map(|s| s.unwrap().0).collect();
        if prefixes.windows(2).all(|w| w[0] == w[1]) {
            let labels: Vec<String> = split
                .iter()
                .map(|s| s.unwrap().1.to_string())
                .collect();
            let mut unique = labels.clone();
            unique.sort();
            unique.dedup();
            if unique.len() == labels.len() {
                return (prefixes[0].to_string(), labels);
            }
        }
    }
    (
        format!("cat{block_index}"),
        names.iter().map(|n| n.to_string()).collect(),
    )
}

/// Keep all numerical features and the first `n_categorical` categorical
/// blocks (dataset column order), as in the reduced-feature experiments.
pub fn subset_schema(schema: &FeatureSchema, n_categorical: usize) -> FeatureSchema {
    FeatureSchema {
        numerical: schema.numerical.clone(),
        categorical: schema
            .categorical
            .iter()
            .take(n_categorical)
            .cloned()
            .collect(),
        response: schema.response.clone(),
    }
}

//! `poisonforge` — generate and benchmark data-poisoning attacks against
//! ridge regression on tabular data with mixed feature types.
//!
//! Subcommands: `fetch-data`, `attack`, `benchmark`, `report`.
//! Exit codes: 0 success, 2 argument/contract error, 3 I/O or network error.

mod fetch;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use poisonforge_core::error::Error as CoreError;
use poisonforge_core::harness::{self, CampaignSpec, LambdaSpec, RunSpec, SplitSizes};
use poisonforge_core::localopt::OptimizerConfig;
use poisonforge_core::strategies::Method;

#[derive(Parser)]
#[command(name = "poisonforge", version, about = "Data-poisoning attacks for ridge regression with categorical features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one poisoning attack and write a JSON result record
    Attack(AttackArgs),
    /// Run a cross-product attack campaign; write CSV tables and plot data
    Benchmark(BenchmarkArgs),
    /// Print comparison tables from a campaign output directory
    Report(ReportArgs),
    /// Download the public datasets; emit decoded CSVs and schema files
    FetchData(FetchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV data file (header row, one column per raw feature)
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON file (numerical / categorical / response)
    #[arg(long)]
    schema: PathBuf,
    /// Training split size
    #[arg(long, default_value_t = 300)]
    train: usize,
    /// Validation split size (loaded and echoed; not consumed by attacks)
    #[arg(long, default_value_t = 250)]
    val: usize,
    /// Test split size
    #[arg(long, default_value_t = 500)]
    test: usize,
}

#[derive(Args)]
struct OptimizerArgs {
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1)]
    multistart: usize,
}

impl OptimizerArgs {
    fn to_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            multistart: self.multistart,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Attack strategy: ias, sas, or ifcf
    #[arg(long)]
    method: String,
    /// Poisoning rate in (0,1] (fraction of the training split)
    #[arg(long)]
    rate: f64,
    /// Regularization: a positive real or the literal `cv`
    #[arg(long, default_value = "cv")]
    lambda: String,
    /// Batch fraction for the shifting/iterative solves
    #[arg(long = "batch-frac", default_value_t = 0.1)]
    batch_frac: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Flip/SAS epochs (ifcf only)
    #[arg(long, default_value_t = 2)]
    epochs: usize,
    /// Folds for lambda cross-validation
    #[arg(long = "cv-folds", default_value_t = 10)]
    cv_folds: usize,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// Output directory for the result record
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Include the final poison set in the result record
    #[arg(long = "save-poison")]
    save_poison: bool,
    /// Treat coefficient-bound violations as hard failures
    #[arg(long = "strict-bounds")]
    strict_bounds: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated methods; the first is the Δ% baseline
    #[arg(long, default_value = "ias,sas,ifcf")]
    methods: String,
    /// Comma-separated poisoning rates
    #[arg(long, default_value = "0.04,0.08,0.12,0.16,0.2")]
    rates: String,
    /// Seeds: comma list (`1,2,3`) or range (`0..10`)
    #[arg(long, default_value = "0..10")]
    seeds: String,
    /// Comma-separated lambdas (`cv` or positive reals)
    #[arg(long, default_value = "cv")]
    lambdas: String,
    /// Comma-separated batch fractions
    #[arg(long = "batch-fracs", default_value = "0.1")]
    batch_fracs: String,
    #[arg(long, default_value_t = 2)]
    epochs: usize,
    #[arg(long = "cv-folds", default_value_t = 10)]
    cv_folds: usize,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// Worker pool size for campaign cells
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Campaign output directory containing results.csv
    #[arg(long = "in", default_value = "results")]
    input: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    /// Destination directory (default: $POISONFORGE_DATA_DIR or ./data)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Which dataset to fetch: house, healthcare, or all
    #[arg(long, default_value = "all")]
    dataset: String,
    /// Response column name (default: last column)
    #[arg(long)]
    response: Option<String>,
    /// Preferred categorical features for the 5/10-feature subset schemas
    #[arg(long = "cat-features")]
    cat_features: Option<String>,
    /// Override the House Price dataset URL
    #[arg(long = "url-house")]
    url_house: Option<String>,
    /// Override the Healthcare dataset URL
    #[arg(long = "url-healthcare")]
    url_healthcare: Option<String>,
}

/// An error annotated with its machine-readable kind and exit code.
#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    fn new(kind: &'static str, exit: u8, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            exit,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let (kind, exit) = match &err {
            CoreError::Io(_) => ("io", 3),
            CoreError::Schema(_) => ("schema", 2),
            CoreError::Parse { .. } => ("parse", 2),
            CoreError::Argument(_) => ("argument", 2),
            CoreError::RankDeficient(_) => ("rank_deficient", 2),
            CoreError::Numeric(_) => ("numeric", 2),
            CoreError::StaleState(_) => ("contract", 2),
            CoreError::EnumerationBudget { .. } => ("budget", 2),
        };
        CliError::new(kind, exit, err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::new("io", 3, err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Attack(args) => cmd_attack(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Report(args) => cmd_report(args),
        Command::FetchData(args) => fetch::cmd_fetch_data(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": { "kind": err.kind, "message": err.message }
            });
            eprintln!("{record}");
            ExitCode::from(err.exit)
        }
    }
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    Method::from_str(s).map_err(CliError::from)
}

fn parse_lambda(s: &str) -> Result<LambdaSpec, CliError> {
    LambdaSpec::from_str(s).map_err(CliError::from)
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    items.map_err(|_| CliError::new("argument", 2, format!("cannot parse {what} list '{s}'")))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::new("argument", 2, format!("bad seed range '{s}'")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::new("argument", 2, format!("bad seed range '{s}'")))?;
        if hi <= lo {
            return Err(CliError::new("argument", 2, format!("empty seed range '{s}'")));
        }
        Ok((lo..hi).collect())
    } else {
        parse_list(s, "seed")
    }
}

fn data_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn cmd_attack(args: AttackArgs) -> Result<(), CliError> {
    let spec = RunSpec {
        data_path: args.data.data.to_string_lossy().into_owned(),
        schema_path: args.data.schema.to_string_lossy().into_owned(),
        method: parse_method(&args.method)?,
        rate: args.rate,
        lambda: parse_lambda(&args.lambda)?,
        batch_fraction: args.batch_frac,
        epochs: args.epochs,
        seed: args.seed,
        split: SplitSizes {
            train: args.data.train,
            val: args.data.val,
            test: args.data.test,
        },
        optimizer: args.optimizer.to_config(),
        cv_folds: args.cv_folds,
        save_poison: args.save_poison,
        strict_bounds: args.strict_bounds,
    };
    let result = harness::run_attack(&spec)?;

    std::fs::create_dir_all(&args.out)?;
    let file = args.out.join(format!(
        "attack_{}_r{}_l{}_b{}_s{}.json",
        spec.method, spec.rate, spec.lambda, spec.batch_fraction, spec.seed
    ));
    std::fs::write(&file, result.to_json())?;

    let stem = data_stem(&args.data.data);
    println!(
        "attack {} on {stem}: rate={} lambda={} seed={}",
        spec.method, spec.rate, result.lambda_used, spec.seed
    );
    println!(
        "  train mse: clean {} -> poisoned {} (delta {}%)",
        harness::format_mse6(result.mse.unpoisoned_train),
        harness::format_mse6(result.mse.poisoned_train),
        harness::format_delta(result.mse.unpoisoned_train, result.mse.poisoned_train),
    );
    println!(
        "  test  mse: clean {} -> poisoned {} (delta {}%)",
        harness::format_mse6(result.mse.unpoisoned_test),
        harness::format_mse6(result.mse.poisoned_test),
        harness::format_delta(result.mse.unpoisoned_test, result.mse.poisoned_test),
    );
    // benchmark-table formatted rows (dataset, split, r%, MSE, time)
    println!(
        "  row: {stem} train {:.0} {} {:.2}",
        spec.rate * 100.0,
        harness::format_mse6(result.mse.poisoned_train),
        result.timing.attack_seconds,
    );
    println!(
        "  row: {stem} test {:.0} {} -",
        spec.rate * 100.0,
        harness::format_mse6(result.mse.poisoned_test),
    );
    if !result.bounds.violations.is_empty() {
        println!("  bounds findings: {}", result.bounds.violations.join("; "));
    }
    println!("  wrote {}", file.display());
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|m| parse_method(m.trim()))
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(CliError::new("argument", 2, "no methods given"));
    }
    let lambdas: Vec<LambdaSpec> = args
        .lambdas
        .split(',')
        .map(|l| parse_lambda(l.trim()))
        .collect::<Result<_, _>>()?;
    let spec = CampaignSpec {
        data_path: args.data.data.to_string_lossy().into_owned(),
        schema_path: args.data.schema.to_string_lossy().into_owned(),
        methods: methods.clone(),
        rates: parse_list(&args.rates, "rate")?,
        seeds: parse_seeds(&args.seeds)?,
        lambdas,
        batch_fractions: parse_list(&args.batch_fracs, "batch fraction")?,
        epochs: args.epochs,
        split: SplitSizes {
            train: args.data.train,
            val: args.data.val,
            test: args.data.test,
        },
        optimizer: args.optimizer.to_config(),
        cv_folds: args.cv_folds,
        threads: args.threads.max(1),
    };
    let records = harness::run_campaign(&spec)?;

    std::fs::create_dir_all(&args.out)?;
    let baseline = methods[0];
    std::fs::write(args.out.join("results.csv"), harness::results_csv_string(&records))?;
    std::fs::write(args.out.join("timings.csv"), harness::timings_csv_string(&records))?;
    let rows = harness::summarize(&records, baseline);
    std::fs::write(args.out.join("summary.csv"), harness::summary_csv_string(&rows))?;
    std::fs::write(
        args.out.join("fig_lambda_sweep.csv"),
        harness::figure_lambda_csv(&records, baseline),
    )?;
    std::fs::write(
        args.out.join("fig_batch_sweep.csv"),
        harness::figure_batch_csv(&records, baseline),
    )?;
    std::fs::write(
        args.out.join("fig_runs.csv"),
        harness::figure_runs_csv(&records, baseline),
    )?;

    let failed = records.iter().filter(|r| r.status != "ok").count();
    println!(
        "campaign: {} cells, {} failed; wrote {}",
        records.len(),
        failed,
        args.out.display()
    );
    for r in records.iter().filter(|r| r.status != "ok") {
        println!(
            "  failed cell method={} rate={} lambda={} seed={}: {}",
            r.method,
            r.rate,
            r.lambda,
            r.seed,
            r.error.as_deref().unwrap_or("unknown")
        );
    }
    print_tables(&rows, &methods);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let results_path = args.input.join("results.csv");
    let text = std::fs::read_to_string(&results_path).map_err(|e| {
        CliError::new(
            "io",
            3,
            format!("cannot read {}: {e}", results_path.display()),
        )
    })?;
    let mut records = harness::parse_results_csv(&text)?;
    if let Ok(timings) = std::fs::read_to_string(args.input.join("timings.csv")) {
        harness::attach_timings(&mut records, &timings);
    }
    // method order = first appearance; the first method is the baseline
    let mut methods: Vec<Method> = Vec::new();
    for r in &records {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    if methods.is_empty() {
        return Err(CliError::new("argument", 2, "results.csv has no rows"));
    }
    let rows = harness::summarize(&records, methods[0]);
    print_tables(&rows, &methods);
    Ok(())
}

fn print_tables(rows: &[harness::SummaryRow], methods: &[Method]) {
    let baseline = methods[0];
    // group sections by (lambda, batch fraction)
    let mut groups: Vec<(String, f64)> = Vec::new();
    for r in rows {
        let key = (r.lambda.to_string(), r.batch_fraction);
        if !groups.iter().any(|g| *g == key) {
            groups.push(key);
        }
    }
    for (lambda, bf) in groups {
        let section: Vec<harness::SummaryRow> = rows
            .iter()
            .filter(|r| r.lambda.to_string() == lambda && r.batch_fraction == bf)
            .cloned()
            .collect();
        println!("\n== lambda={lambda} batch_fraction={bf} ==");
        for &method in methods.iter().filter(|&&m| m != baseline) {
            println!("\n{baseline} vs {method} (train mse, mean over seeds):");
            print!("{}", harness::render_pair_table(&section, baseline, method));
            println!("\nbenchmark table ({baseline} vs {method}):");
            print!(
                "{}",
                harness::render_benchmark_table(&section, baseline, method)
            );
        }
    }
}

//! `npss`: subset scanning of activation matrices from the command line.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on data or computation
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use npss::eval::{benchmark_runtime, run_experiment, save_eval_csv, save_timing_csv, ExperimentSpec};
use npss::io::{
    load_matrix_auto, save_indicator, save_individual, save_matrix, save_result, write_atomic,
    IndividualReport, MatrixFormat,
};
use npss::synth::{generate, SynthSpec};
use npss::{
    individual_scan, negate_for_lower_tail, scan, ActivationMatrix, AlphaGrid, AlphaPolicy,
    BackgroundModel, ScanConfig, ScanMode, ScoreFunction,
};

const AFTER_HELP: &str = "\
File formats:
  activations  CSV, UTF-8, one sample per line, comma separated, LF or CRLF.
               A header row is detected by a non-numeric first token; a header
               starting with `id` marks a leading row-identifier column.
               Binary format version 1 is detected by its magic bytes:
               \"NPSS\", u32 version, u64 rows, u64 cols, rows*cols f64, all
               little-endian.
  labels       one 0/1 per line.
  report       JSON object with mode, score_function, score, row_subset,
               col_subset, restarts, iterations_per_restart, restart_scores,
               alpha_at_max, wall_time_seconds, seed.

Environment:
  NPSS_THREADS  worker threads when --threads is not given.";

#[derive(Parser, Debug)]
#[command(name = "npss", version, about = "Non-parametric subset scanning of activation matrices", after_help = AFTER_HELP)]
struct Cli {
    /// Worker threads for restarts, trials and p-value columns [default: all cores]
    #[arg(long, global = true, env = "NPSS_THREADS")]
    threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute empirical p-values of test activations against a background
    Pvalues(PvaluesArgs),
    /// Find the most anomalous subset of samples and nodes
    Scan(ScanArgs),
    /// Run the contaminated-vs-clean evaluation protocol
    Eval(EvalArgs),
    /// Generate synthetic background, real and fake activation pools
    Synth(SynthArgs),
    /// Time the scan and the full pipeline over test-set sizes
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Score function: bj (Berk-Jones) or hc (Higher-Criticism)
    #[arg(long, default_value = "bj", value_parser = parse_score)]
    score: ScoreFunction,

    /// Largest significance threshold considered
    #[arg(long, default_value_t = 0.5)]
    alpha_max: f64,

    /// Threshold candidates: `data` (observed p-values) or a grid size
    #[arg(long, default_value = "data", value_parser = parse_grid)]
    alpha_grid: AlphaGrid,

    /// Random restarts per scan
    #[arg(long, default_value_t = 10)]
    restarts: usize,

    /// Maximum ascent rounds per restart
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,

    /// Seed for all random choices
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScoreArgs {
    fn config(&self, mode: ScanMode) -> anyhow::Result<ScanConfig> {
        let alpha_policy = AlphaPolicy::new(self.alpha_grid, self.alpha_max).context("--alpha-max/--alpha-grid")?;
        let config = ScanConfig {
            score_function: self.score,
            alpha_policy,
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            seed: self.seed,
            mode,
            ..ScanConfig::default()
        };
        config.validate().context("--restarts/--max-iterations")?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct PvaluesArgs {
    /// Background activations (Z x J)
    #[arg(long)]
    background: PathBuf,
    /// Test activations (M x J)
    #[arg(long)]
    test: PathBuf,
    /// Output CSV of p-values (M x J)
    #[arg(long)]
    out: PathBuf,
    /// Negate activations first, to scan for lower-than-expected values
    #[arg(long)]
    lower_tail: bool,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    background: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Scan mode: group or individual
    #[arg(long, default_value = "group", value_parser = parse_mode)]
    mode: ScanMode,
    #[command(flatten)]
    score: ScoreArgs,
    /// Report path (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Also write the node subset as a 0/1 vector, one line per node
    #[arg(long)]
    emit_indicator: Option<PathBuf>,
    /// Write 0 for timing fields so repeated runs are byte-identical
    #[arg(long)]
    no_timing: bool,
    /// Negate activations first, to scan for lower-than-expected values
    #[arg(long)]
    lower_tail: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    background: PathBuf,
    #[arg(long)]
    real_pool: PathBuf,
    #[arg(long)]
    fake_pool: PathBuf,
    /// Comma-separated fake proportions
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.5")]
    proportions: Vec<f64>,
    /// Rows per test set
    #[arg(long, default_value_t = 100)]
    size: usize,
    /// Contaminated test sets per proportion
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// All-real test sets forming the negative score distribution
    #[arg(long, default_value_t = 100)]
    clean_trials: usize,
    /// Also report per-image AUC from individual scanning
    #[arg(long)]
    individual: bool,
    #[command(flatten)]
    score: ScoreArgs,
    /// Report CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    #[arg(long, default_value_t = 10)]
    anomalous: usize,
    /// Mean shift on planted nodes, in standard deviations
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    shift: f64,
    #[arg(long, default_value_t = 500)]
    z: usize,
    #[arg(long, default_value_t = 1000)]
    real: usize,
    #[arg(long, default_value_t = 1000)]
    fake: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Writes background.csv, real.csv, fake.csv and planted_nodes.txt
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    background: PathBuf,
    #[arg(long)]
    fake_pool: PathBuf,
    /// Ascending comma-separated test-set sizes
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[command(flatten)]
    score: ScoreArgs,
    /// Timing table CSV path
    #[arg(long)]
    out: PathBuf,
}

fn parse_score(s: &str) -> Result<ScoreFunction, String> {
    s.parse().map_err(|e: npss::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<ScanMode, String> {
    s.parse().map_err(|e: npss::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<AlphaGrid, String> {
    if s == "data" {
        return Ok(AlphaGrid::DataDriven);
    }
    match s.parse::<usize>() {
        Ok(size) if size >= 2 => Ok(AlphaGrid::Linear { size }),
        _ => Err(format!("expected 'data' or a grid size >= 2, got '{s}'")),
    }
}

fn load(path: &Path, flag: &str) -> anyhow::Result<ActivationMatrix> {
    load_matrix_auto(path).with_context(|| format!("{flag} {}", path.display()))
}

fn load_oriented(path: &Path, flag: &str, lower_tail: bool) -> anyhow::Result<ActivationMatrix> {
    let m = load(path, flag)?;
    Ok(if lower_tail { negate_for_lower_tail(&m) } else { m })
}

fn run_pvalues(args: &PvaluesArgs) -> anyhow::Result<()> {
    let background = load_oriented(&args.background, "--background", args.lower_tail)?;
    let test = load_oriented(&args.test, "--test", args.lower_tail)?;
    let pvals = BackgroundModel::new(&background)
        .context("--background")?
        .pvalues(&test)
        .context("--test")?;
    save_matrix(&pvals.to_matrix(), &args.out, MatrixFormat::Csv)
        .with_context(|| format!("--out {}", args.out.display()))?;
    println!(
        "pvalues rows={} cols={} background={}",
        pvals.rows(),
        pvals.cols(),
        pvals.background_size()
    );
    Ok(())
}

fn run_scan(args: &ScanArgs) -> anyhow::Result<()> {
    let config = args.score.config(args.mode)?;
    let background = load_oriented(&args.background, "--background", args.lower_tail)?;
    let test = load_oriented(&args.test, "--test", args.lower_tail)?;
    let start = Instant::now();
    let pvals = BackgroundModel::new(&background)
        .context("--background")?
        .pvalues(&test)
        .context("--test")?;
    let out_ctx = || format!("--out {}", args.out.display());

    match args.mode {
        ScanMode::Group => {
            let mut result = scan(&pvals, &config)?;
            let seconds = start.elapsed().as_secs_f64();
            if args.no_timing {
                result.wall_time_seconds = 0.0;
            }
            save_result(&result, &args.out).with_context(out_ctx)?;
            if let Some(path) = &args.emit_indicator {
                save_indicator(&result.col_subset, pvals.cols(), path)
                    .with_context(|| format!("--emit-indicator {}", path.display()))?;
            }
            println!(
                "score={} rows={} cols={} seconds={:.3}",
                result.score,
                result.row_subset.len(),
                result.col_subset.len(),
                if args.no_timing { 0.0 } else { seconds }
            );
        }
        ScanMode::Individual => {
            let rows = individual_scan(&pvals, &config)?;
            let seconds = start.elapsed().as_secs_f64();
            let best = rows
                .iter()
                .max_by(|a, b| a.score.total_cmp(&b.score).then(b.row.cmp(&a.row)))
                .expect("at least one row");
            println!(
                "score={} rows=1 cols={} seconds={:.3}",
                best.score,
                best.col_subset.len(),
                if args.no_timing { 0.0 } else { seconds }
            );
            if args.emit_indicator.is_some() {
                log::warn!("--emit-indicator is ignored in individual mode");
            }
            let report = IndividualReport {
                mode: ScanMode::Individual,
                score_function: config.score_function,
                alpha_max: config.alpha_policy.alpha_max(),
                wall_time_seconds: if args.no_timing { 0.0 } else { seconds },
                seed: config.seed,
                rows,
            };
            save_individual(&report, &args.out).with_context(out_ctx)?;
        }
    }
    Ok(())
}

fn run_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let spec = ExperimentSpec {
        proportions: args.proportions.clone(),
        test_set_size: args.size,
        trials_per_condition: args.trials,
        clean_trials: args.clean_trials,
        scan: args.score.config(ScanMode::Group)?,
        individual: args.individual,
        seed: args.score.seed,
    };
    spec.validate().context("--proportions/--size/--trials")?;
    let background = load(&args.background, "--background")?;
    let real = load(&args.real_pool, "--real-pool")?;
    let fake = load(&args.fake_pool, "--fake-pool")?;
    let start = Instant::now();
    let report = run_experiment(&spec, &real, &fake, &background)?;
    save_eval_csv(&report, &args.out).with_context(|| format!("--out {}", args.out.display()))?;
    for c in &report.conditions {
        info!(
            "proportion {}: auc {:.4} precision {:.3}±{:.3} recall {:.3}±{:.3}",
            c.proportion, c.auc, c.precision.mean, c.precision.std, c.recall.mean, c.recall.std
        );
    }
    let aucs: Vec<String> = report
        .conditions
        .iter()
        .map(|c| format!("{}:{:.4}", c.proportion, c.auc))
        .collect();
    println!("auc {} seconds={:.3}", aucs.join(" "), start.elapsed().as_secs_f64());
    Ok(())
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        z_background: args.z,
        real_pool: args.real,
        fake_pool: args.fake,
        nodes: args.nodes,
        anomalous_nodes: args.anomalous,
        shift: args.shift,
        seed: args.seed,
    };
    spec.validate().context("--nodes/--anomalous/--shift")?;
    let data = generate(&spec)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("--out-dir {}", args.out_dir.display()))?;
    let files = [
        ("background.csv", &data.background),
        ("real.csv", &data.real_pool),
        ("fake.csv", &data.fake_pool),
    ];
    for (name, m) in files {
        let path = args.out_dir.join(name);
        save_matrix(m, &path, MatrixFormat::Csv).with_context(|| format!("--out-dir {}", path.display()))?;
    }
    let nodes: String = data.anomalous_nodes.iter().map(|n| format!("{n}\n")).collect();
    let path = args.out_dir.join("planted_nodes.txt");
    write_atomic(&path, nodes.as_bytes()).with_context(|| format!("--out-dir {}", path.display()))?;
    println!(
        "synth nodes={} planted={:?} out_dir={}",
        args.nodes,
        data.anomalous_nodes,
        args.out_dir.display()
    );
    Ok(())
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    if args.sizes.is_empty() || args.sizes.windows(2).any(|w| w[0] > w[1]) {
        bail!("--sizes must be ascending");
    }
    let config = args.score.config(ScanMode::Group)?;
    let background = load(&args.background, "--background")?;
    let fake = load(&args.fake_pool, "--fake-pool")?;
    let table = benchmark_runtime(&args.sizes, &background, &fake, &config, args.repetitions)?;
    save_timing_csv(&table, &args.out).with_context(|| format!("--out {}", args.out.display()))?;
    for row in &table {
        println!(
            "images={} scan={:.4}±{:.4}s total={:.4}±{:.4}s",
            row.images, row.scan_seconds.mean, row.scan_seconds.std, row.total_seconds.mean, row.total_seconds.std
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("--threads")?;
    }
    match &cli.command {
        Command::Pvalues(a) => run_pvalues(a),
        Command::Scan(a) => run_scan(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

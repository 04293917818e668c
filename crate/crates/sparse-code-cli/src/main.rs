//! Command-line front end: generate inputs, run straggler simulations,
//! estimate recovery thresholds, analyze degree distributions, and design
//! new ones. Every subcommand is deterministic under --seed and emits
//! machine-readable output (JSON on stdout, optional CSV files).

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sparse_code::matrix::rational_to_f64;
use sparse_code::{
    aggregate, decodability_check, decodability_check_strengthened, estimate_recovery_threshold,
    generate_random_sparse, optimize_distribution, perfect_matching_probability, run_experiment,
    sequential_matching_probability, trials_csv, DegreeDistribution, ExperimentConfig,
    OptimizerConfig, Scheme, SimConfig, TimeModel, ValueLaw, WorkerModel,
};
use sparse_code_cli::mtx;

#[derive(Parser)]
#[command(
    name = "sparse-code",
    version,
    about = "Coded sparse matrix multiplication: simulation, analysis, and design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random sparse matrix in Matrix Market format.
    Gen(GenArgs),
    /// Simulate uncoded/sparse/polynomial schemes under stragglers.
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of the minimal decodable prefix length.
    Threshold(ThresholdArgs),
    /// Exact numbers for a degree distribution (matching, decodability).
    Analyze(AnalyzeArgs),
    /// Design a minimal-mean degree distribution under the constraints.
    Optimize(OptimizeArgs),
}

// ---------------------------------------------------------------------------
// Shared argument blocks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DistKind {
    /// Wave soliton (the library's default sampling law).
    Wave,
    /// Robust soliton with --rsd-c / --rsd-delta.
    Robust,
    /// Degree 1 always (the uncoded coupon-collector baseline).
    Single,
}

#[derive(Args)]
struct DistArgs {
    /// Built-in distribution family.
    #[arg(long, value_enum, conflicts_with = "dist_file")]
    dist: Option<DistKind>,
    /// JSON file with exact probabilities (bare, or `optimize` output).
    #[arg(long)]
    dist_file: Option<PathBuf>,
    /// Robust soliton spike parameter c.
    #[arg(long, default_value_t = 0.03)]
    rsd_c: f64,
    /// Robust soliton failure parameter delta.
    #[arg(long, default_value_t = 0.5)]
    rsd_delta: f64,
}

impl DistArgs {
    fn load(&self, d: Option<usize>) -> Result<DegreeDistribution> {
        if let Some(path) = &self.dist_file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            return parse_dist_file(&text)
                .with_context(|| format!("{} is not a distribution file", path.display()));
        }
        let Some(d) = d else {
            bail!("a dimension is required with a built-in distribution");
        };
        let dist = match self.dist.unwrap_or(DistKind::Wave) {
            DistKind::Wave => DegreeDistribution::wave_soliton(d)?,
            DistKind::Robust => DegreeDistribution::robust_soliton(d, self.rsd_c, self.rsd_delta)?,
            DistKind::Single => {
                let zero = sparse_code::BigRational::from_integer(0.into());
                let mut probs = vec![zero; d];
                probs[0] = sparse_code::BigRational::from_integer(1.into());
                DegreeDistribution::from_probs(probs)?
            }
        };
        Ok(dist)
    }
}

/// Accepts either a bare distribution or the payload `optimize` prints,
/// so designs can be fed back without editing the file.
fn parse_dist_file(text: &str) -> Result<DegreeDistribution> {
    if let Ok(dist) = serde_json::from_str::<DegreeDistribution>(text) {
        return Ok(dist);
    }
    let value: serde_json::Value = serde_json::from_str(text)?;
    if let Some(inner) = value.get("distribution") {
        return Ok(serde_json::from_value(inner.clone())?);
    }
    bail!("expected a degree distribution or an optimizer payload");
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ValueKind {
    /// All stored entries are 1.
    One,
    /// Uniform nonzero integers in --lo ..= --hi.
    Int,
}

fn value_law(kind: ValueKind, lo: i64, hi: i64) -> ValueLaw {
    match kind {
        ValueKind::One => ValueLaw::One,
        ValueKind::Int => ValueLaw::UniformInt { lo, hi },
    }
}

// ---------------------------------------------------------------------------
// Subcommand arguments
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Exact number of nonzero entries.
    #[arg(long)]
    nnz: usize,
    #[arg(long, value_enum, default_value_t = ValueKind::Int)]
    values: ValueKind,
    #[arg(long, default_value_t = -3, allow_hyphen_values = true)]
    lo: i64,
    #[arg(long, default_value_t = 3, allow_hyphen_values = true)]
    hi: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (Matrix Market).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SchemeKind {
    Uncoded,
    Sparse,
    Polynomial,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TimeKind {
    /// Time tracks measured flop and byte counts.
    Deterministic,
    /// Shifted-exponential draw per task.
    ShiftedExp,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeKind,
    #[command(flatten)]
    dist: DistArgs,
    /// Column splits of A (grid rows).
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Column splits of B (grid columns).
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Worker count.
    #[arg(long = "N", visible_alias = "workers", default_value_t = 20)]
    num_workers: usize,
    #[arg(long, default_value_t = 0)]
    stragglers: usize,
    #[arg(long, default_value_t = 8.0)]
    slowdown: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Left input (Matrix Market); with --input-b, replaces generation.
    #[arg(long, requires = "input_b")]
    input_a: Option<PathBuf>,
    /// Right input (Matrix Market).
    #[arg(long, requires = "input_a")]
    input_b: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    rows: usize,
    #[arg(long, default_value_t = 400)]
    cols: usize,
    /// Nonzeros per generated input.
    #[arg(long, default_value_t = 4000)]
    nnz: usize,
    #[arg(long, value_enum, default_value_t = ValueKind::Int)]
    values: ValueKind,
    #[arg(long, default_value_t = -3, allow_hyphen_values = true)]
    lo: i64,
    #[arg(long, default_value_t = 3, allow_hyphen_values = true)]
    hi: i64,
    #[arg(long, value_enum, default_value_t = TimeKind::Deterministic)]
    time_model: TimeKind,
    #[arg(long, default_value_t = 1e9)]
    flop_rate: f64,
    #[arg(long, default_value_t = 1e8)]
    byte_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Consume this many results beyond the first decodable prefix.
    #[arg(long, default_value_t = 0)]
    extra_rows: usize,
    /// Draw one task set and replay it in every trial.
    #[arg(long)]
    reuse_encoding: bool,
    /// Skip checking decoded outputs against the direct product.
    #[arg(long)]
    no_verify: bool,
    /// Per-trial CSV path.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Summary JSON path (stdout always gets it too).
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    dist: DistArgs,
    /// Number of blocks (the distribution dimension).
    #[arg(long)]
    mn: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the minimal-K histogram as CSV.
    #[arg(long)]
    hist_out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(
    ArgGroup::new("action")
        .required(true)
        .multiple(true)
        .args(["matching", "k_rows", "strengthened"])
))]
struct AnalyzeArgs {
    #[command(flatten)]
    dist: DistArgs,
    /// Dimension for built-in families (files carry their own).
    #[arg(long)]
    d: Option<usize>,
    /// Print matching probabilities (exact enumeration when d <= 5).
    #[arg(long)]
    matching: bool,
    /// Evaluate the plain decodability inequality for this many rows.
    #[arg(long)]
    k_rows: Option<usize>,
    /// Evaluate the strengthened decodability inequality.
    #[arg(long)]
    strengthened: bool,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    c0: f64,
    #[arg(long, default_value_t = 2)]
    b: usize,
    #[arg(long, default_value_t = 200)]
    grid: usize,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Distribution dimension (number of blocks).
    #[arg(long)]
    d: usize,
    /// Matching-probability floor.
    #[arg(long, default_value_t = 0.15)]
    p_m: f64,
    /// Decodability exponent widening.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Decodability strengthening coefficient.
    #[arg(long, default_value_t = 0.1)]
    c0: f64,
    /// Tolerated unrecovered-block budget.
    #[arg(long, default_value_t = 2)]
    b: usize,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Highest degree allowed to carry mass (default min(d, 40)).
    #[arg(long)]
    max_support: Option<usize>,
    /// Also write the JSON payload here.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn main() {
    // Rust ignores SIGPIPE, which turns `sparse-code ... | head` into a
    // broken-pipe panic. Restore the conventional kill-on-pipe-close.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Err(code) = configure_threads() {
        std::process::exit(code);
    }
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

/// SPARSE_CODE_THREADS caps the rayon pool for every parallel section.
fn configure_threads() -> Result<(), i32> {
    let Ok(raw) = std::env::var("SPARSE_CODE_THREADS") else {
        return Ok(());
    };
    let threads: usize = match raw.trim().parse() {
        Ok(t) if t >= 1 => t,
        _ => {
            eprintln!("error: SPARSE_CODE_THREADS must be a positive integer, got '{raw}'");
            return Err(2);
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .ok();
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => run_gen(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Threshold(args) => run_threshold(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Optimize(args) => run_optimize(args),
    }
}

fn run_gen(args: GenArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let matrix = generate_random_sparse(
        args.rows,
        args.cols,
        args.nnz,
        value_law(args.values, args.lo, args.hi),
        &mut rng,
    )?;
    mtx::write_matrix_market(&args.out, &matrix)?;
    println!(
        "wrote {} ({} x {}, {} nonzeros)",
        args.out.display(),
        matrix.rows(),
        matrix.cols(),
        matrix.nnz()
    );
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let (a, b) = match (&args.input_a, &args.input_b) {
        (Some(pa), Some(pb)) => (mtx::load_matrix_market(pa)?, mtx::load_matrix_market(pb)?),
        _ => {
            let law = value_law(args.values, args.lo, args.hi);
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            rng.set_stream(u64::MAX - 1);
            let a = generate_random_sparse(args.rows, args.cols, args.nnz, law, &mut rng)?;
            rng.set_stream(u64::MAX - 2);
            let b = generate_random_sparse(args.rows, args.cols, args.nnz, law, &mut rng)?;
            (a, b)
        }
    };
    let scheme = match args.scheme {
        SchemeKind::Uncoded => Scheme::Uncoded,
        SchemeKind::Polynomial => Scheme::Polynomial,
        SchemeKind::Sparse => Scheme::Sparse {
            dist: args.dist.load(Some(args.m * args.n))?,
        },
    };
    let time_model = match args.time_model {
        TimeKind::Deterministic => TimeModel::Deterministic {
            flop_rate: args.flop_rate,
            byte_rate: args.byte_rate,
        },
        TimeKind::ShiftedExp => TimeModel::ShiftedExponential {
            shift: args.shift,
            rate: args.rate,
        },
    };
    let config = ExperimentConfig {
        scheme,
        m: args.m,
        n: args.n,
        model: WorkerModel {
            n_workers: args.num_workers,
            straggler_count: args.stragglers,
            slowdown: args.slowdown,
            time_model,
        },
        trials: args.trials,
        seed: args.seed,
        sim: SimConfig {
            extra_rows: args.extra_rows,
            reuse_encoding: args.reuse_encoding,
            verify: !args.no_verify,
        },
    };
    let results = run_experiment(&config, &a, &b)?;
    let summary = aggregate(&results)?.to_json();
    println!("{summary}");
    if let Some(path) = &args.csv_out {
        fs::write(path, trials_csv(&results))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.json_out {
        fs::write(path, &summary).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn run_threshold(args: ThresholdArgs) -> Result<()> {
    let dist = args.dist.load(Some(args.mn))?;
    let summary = estimate_recovery_threshold(&dist, args.mn, 1, args.trials, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(path) = &args.hist_out {
        fs::write(path, summary.histogram_csv())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let dist = args.dist.load(args.d)?;
    if args.matching {
        let mean = dist.mean_degree();
        println!("mean degree: {} = {}", mean, rational_to_f64(&mean));
        let sequential = sequential_matching_probability(&dist);
        println!(
            "sequential matching estimate: {} = {}",
            sequential,
            rational_to_f64(&sequential)
        );
        if dist.d() <= 5 {
            let exact = perfect_matching_probability(&dist);
            println!(
                "exact matching probability: {} = {}",
                exact,
                rational_to_f64(&exact)
            );
        } else {
            println!(
                "exact matching probability: skipped (enumeration is exponential; d = {} > 5)",
                dist.d()
            );
        }
    }
    if let Some(k_rows) = args.k_rows {
        let report = decodability_check(&dist, k_rows, args.b, args.grid)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    if args.strengthened {
        let report = decodability_check_strengthened(&dist, args.c, args.c0, args.b, args.grid)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

fn run_optimize(args: OptimizeArgs) -> Result<()> {
    let config = OptimizerConfig {
        d: args.d,
        p_m: args.p_m,
        c: args.c,
        c0: args.c0,
        b: args.b,
        grid_points: args.grid,
        max_support: args.max_support.unwrap_or(args.d.min(40)),
    };
    let (dist, report) = optimize_distribution(&config)?;
    let payload = serde_json::json!({
        "schema": "sparse-code/v1",
        "distribution": dist,
        "report": report,
    });
    let text = serde_json::to_string_pretty(&payload)?;
    println!("{text}");
    if let Some(path) = &args.out {
        fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

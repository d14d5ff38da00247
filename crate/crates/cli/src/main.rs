use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cramp_cli::error::{CliError, CliResult};
use cramp_cli::io::{load_labels, load_matrix, select_top_genes, LoadOptions, Orientation};
use cramp_cli::report::{file_digest, AnalysisReport, Provenance, SCHEMA_VERSION};
use cramp_cli::workflow::{
    compare_groups, run_one_sample_method, run_two_sample_method, split_type1_study, MethodSpec,
    RunOptions,
};
use cramp_core::{empirical_critical_value, BaseTest, CrampConfig};

#[derive(Parser)]
#[command(
    name = "cramp",
    version,
    about = "Covariance-matrix hypothesis tests for high-dimensional data via random projections"
)]
struct Cli {
    /// Worker threads (overrides the CRAMP_THREADS environment variable;
    /// results do not depend on the thread count)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-sample covariance tests (identity / sphericity) on a data matrix
    Test1(Test1Args),
    /// Two-sample covariance equality tests on a pair of data matrices
    Test2(Test2Args),
    /// Run a simulation grid described by a TOML config
    Simulate(SimulateArgs),
    /// Precompute and cache an empirical null distribution
    Nulldist(NulldistArgs),
    /// Gene-expression workflow: top-gene filter, group comparison,
    /// within-group split stability
    Genes(GenesArgs),
}

#[derive(Args, Clone)]
struct ProcFlags {
    /// Projected dimension
    #[arg(short = 'k', long = "proj-dim", default_value_t = 5)]
    proj_dim: usize,
    /// Number of projections averaged per test
    #[arg(short = 'K', long = "projections", default_value_t = 100)]
    projections: usize,
    /// Null replicates behind the empirical critical value
    #[arg(long = "null-reps", default_value_t = 1000)]
    null_reps: usize,
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Replicates for monte-carlo calibrated baselines (-mc methods)
    #[arg(long = "mc-reps", default_value_t = 200)]
    mc_reps: usize,
    /// Directory for cached null distributions
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
}

impl ProcFlags {
    fn run_options(&self) -> RunOptions {
        RunOptions {
            k: self.proj_dim,
            projections: self.projections,
            null_replicates: self.null_reps,
            alpha: self.alpha,
            seed: self.seed,
            mc_replicates: self.mc_reps,
            cache_dir: self.cache_dir.clone(),
        }
    }

    fn options_json(&self) -> serde_json::Value {
        serde_json::json!({
            "k": self.proj_dim,
            "projections": self.projections,
            "null_replicates": self.null_reps,
            "mc_replicates": self.mc_reps,
        })
    }
}

#[derive(Args, Clone)]
struct IoFlags {
    /// Field delimiter (single character, or "tab")
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// Table has no header row
    #[arg(long = "no-header")]
    no_header: bool,
    /// Table orientation: samples-x-genes or genes-x-samples
    #[arg(long, default_value = "samples-x-genes")]
    orientation: String,
}

impl IoFlags {
    fn load_options(&self) -> CliResult<LoadOptions> {
        let delimiter = match self.delimiter.as_str() {
            "tab" | "\\t" => '\t',
            s if s.chars().count() == 1 => s.chars().next().unwrap(),
            other => {
                return Err(CliError::Config(format!(
                    "delimiter must be one character, got '{other}'"
                )))
            }
        };
        Ok(LoadOptions {
            delimiter,
            orientation: Orientation::parse(&self.orientation)?,
            header: !self.no_header,
        })
    }
}

#[derive(Args, Clone)]
struct OutputFlags {
    /// Write the report here instead of stdout
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Output format: json or csv
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct Test1Args {
    /// Input data matrix (rows are observations unless --orientation says otherwise)
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Methods to run: lrt-identity, lrt-sphericity, john, nagao, lw, lw-mc,
    /// syk-u, syk-v, czz-u, czz-v, cramp-lrt-identity, cramp-lrt-sphericity,
    /// cramp-john, cramp-nagao, cramp-lw
    #[arg(long, short = 'm', value_delimiter = ',', required = true)]
    method: Vec<String>,
    #[command(flatten)]
    proc: ProcFlags,
    #[command(flatten)]
    io: IoFlags,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct Test2Args {
    /// First group data matrix
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Second group data matrix
    #[arg(long)]
    input2: PathBuf,
    /// Methods to run: box-m, wald, schott[-mc], syk[-mc], lc[-mc], clx[-mc],
    /// cramp-box-m, cramp-wald
    #[arg(long, short = 'm', value_delimiter = ',', required = true)]
    method: Vec<String>,
    #[command(flatten)]
    proc: ProcFlags,
    #[command(flatten)]
    io: IoFlags,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML grid description
    #[arg(long, short = 'c')]
    config: PathBuf,
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct NulldistArgs {
    #[arg(long)]
    n: usize,
    /// Second group size (two-sample bases)
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: usize,
    /// Base test: lrt-identity, lrt-sphericity, john, nagao, lw, box-m, wald
    #[arg(long)]
    base: String,
    #[command(flatten)]
    proc: ProcFlags,
}

#[derive(Args)]
struct GenesArgs {
    /// Expression matrix
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Group label file, one label per input sample row
    #[arg(long)]
    labels: PathBuf,
    /// Keep this many genes with the highest minimal intensity
    #[arg(long = "top-genes")]
    top_genes: Option<usize>,
    /// Compare these two groups (both required together)
    #[arg(long = "group-a")]
    group_a: Option<String>,
    #[arg(long = "group-b")]
    group_b: Option<String>,
    /// Run the split stability study within this group
    #[arg(long = "split-group")]
    split_group: Option<String>,
    #[arg(long = "split-reps", default_value_t = 200)]
    split_reps: usize,
    /// Draw two subsamples of this size instead of equal halves
    #[arg(long = "subsample-size")]
    subsample_size: Option<usize>,
    /// Two-sample methods for both workflows
    #[arg(long, value_delimiter = ',', default_value = "cramp-box-m,cramp-wald")]
    methods: Vec<String>,
    #[command(flatten)]
    proc: ProcFlags,
    #[command(flatten)]
    io: IoFlags,
    #[command(flatten)]
    out: OutputFlags,
}

fn emit(report: &AnalysisReport, out: &OutputFlags) -> CliResult<()> {
    let body = match out.format.as_str() {
        "json" => report.to_json(),
        "csv" => report.to_csv().map_err(|e| CliError::Data(e.to_string()))?,
        other => return Err(CliError::Config(format!("unknown format '{other}'"))),
    };
    match &out.output {
        Some(path) => std::fs::write(path, body.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{body}"),
    }
    Ok(())
}

fn parse_methods(ids: &[String]) -> CliResult<Vec<MethodSpec>> {
    ids.iter().map(|id| MethodSpec::parse(id)).collect()
}

fn run_test1(args: Test1Args) -> CliResult<()> {
    let methods = parse_methods(&args.method)?;
    let loaded = load_matrix(&args.input, &args.io.load_options()?)?;
    let data = loaded.matrix.dataset_from_rows(&(0..loaded.matrix.n_samples()).collect::<Vec<_>>())?;
    let opts = args.proc.run_options();
    let mut results = Vec::new();
    for spec in methods {
        results.push(run_one_sample_method(spec, &data, &opts)?);
    }
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            command: "test1".into(),
            seed: args.proc.seed,
            alpha: args.proc.alpha,
            input_digest: file_digest(&args.input)?,
            input2_digest: None,
            labels_digest: None,
            options: serde_json::json!({
                "methods": args.method,
                "proc": args.proc.options_json(),
            }),
        },
        results,
        bootstrap: None,
        dropped_samples: loaded.dropped_samples,
    };
    emit(&report, &args.out)
}

fn run_test2(args: Test2Args) -> CliResult<()> {
    let methods = parse_methods(&args.method)?;
    let io = args.io.load_options()?;
    let a = load_matrix(&args.input, &io)?;
    let b = load_matrix(&args.input2, &io)?;
    let x = a.matrix.dataset_from_rows(&(0..a.matrix.n_samples()).collect::<Vec<_>>())?;
    let y = b.matrix.dataset_from_rows(&(0..b.matrix.n_samples()).collect::<Vec<_>>())?;
    let opts = args.proc.run_options();
    let mut results = Vec::new();
    for spec in methods {
        results.push(run_two_sample_method(spec, &x, &y, &opts)?);
    }
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            command: "test2".into(),
            seed: args.proc.seed,
            alpha: args.proc.alpha,
            input_digest: file_digest(&args.input)?,
            input2_digest: Some(file_digest(&args.input2)?),
            labels_digest: None,
            options: serde_json::json!({
                "methods": args.method,
                "proc": args.proc.options_json(),
            }),
        },
        results,
        bootstrap: None,
        dropped_samples: a.dropped_samples + b.dropped_samples,
    };
    emit(&report, &args.out)
}

fn run_simulate(args: SimulateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cells = cramp_cli::grid::parse_grid(&text)?;
    let rows = cramp_core::run_study_with(&cells, args.cache_dir.as_deref(), |row| {
        eprintln!(
            "cell done: {} {} n={} p={} -> {}",
            row.method,
            row.metric,
            row.n,
            row.p,
            row.value.map_or_else(
                || row.error.clone().unwrap_or_default(),
                |v| format!("{v:.4}")
            )
        );
    });
    let body = match args.out.format.as_str() {
        "json" => serde_json::to_string_pretty(&rows).expect("rows serialize"),
        "csv" => cramp_cli::grid::rows_to_csv(&rows).map_err(|e| CliError::Data(e.to_string()))?,
        other => return Err(CliError::Config(format!("unknown format '{other}'"))),
    };
    match &args.out.output {
        Some(path) => std::fs::write(path, body.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{body}"),
    }
    Ok(())
}

fn run_nulldist(args: NulldistArgs) -> CliResult<()> {
    let base = BaseTest::from_id(&args.base)?;
    let cache = args.proc.cache_dir.clone().ok_or_else(|| {
        CliError::Config("nulldist needs --cache-dir to store the distribution".into())
    })?;
    let cfg = CrampConfig::new(
        args.proc.proj_dim,
        args.proc.projections,
        args.proc.null_reps,
        args.proc.alpha,
        args.proc.seed,
        base,
        cramp_core::sim::hypothesis_for_base(base),
    );
    let (q, sample) = empirical_critical_value(args.n, args.m, args.p, &cfg, Some(&cache))?;
    println!(
        "{}",
        serde_json::json!({
            "q_alpha": q,
            "alpha": args.proc.alpha,
            "null_replicates": sample.len(),
            "cache_dir": cache,
        })
    );
    Ok(())
}

fn run_genes(args: GenesArgs) -> CliResult<()> {
    let methods = parse_methods(&args.methods)?;
    let io = args.io.load_options()?;
    let loaded = load_matrix(&args.input, &io)?;
    let mut matrix = loaded.matrix;
    let labels = load_labels(&args.labels)?;
    // labels align with the file's sample rows; drop the ones whose samples
    // were rejected for missing values
    let kept_labels: Vec<String> = if labels.len() == loaded.kept_samples.len() {
        labels
    } else {
        loaded
            .kept_samples
            .iter()
            .map(|&i| {
                labels.get(i).cloned().ok_or_else(|| {
                    CliError::Data(format!(
                        "label file has {} entries, input had {} samples",
                        labels.len(),
                        loaded.kept_samples.len() + loaded.dropped_samples
                    ))
                })
            })
            .collect::<CliResult<Vec<_>>>()?
    };
    matrix.assign_labels(kept_labels)?;
    if let Some(p) = args.top_genes {
        matrix = select_top_genes(&matrix, p)?;
    }
    let opts = args.proc.run_options();
    let mut results = Vec::new();
    let mut bootstrap = None;
    match (&args.group_a, &args.group_b) {
        (Some(a), Some(b)) => {
            results = compare_groups(&matrix, a, b, &methods, &opts)?;
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Config(
                "--group-a and --group-b must be given together".into(),
            ))
        }
    }
    if let Some(group) = &args.split_group {
        bootstrap = Some(split_type1_study(
            &matrix,
            group,
            args.split_reps,
            &methods,
            &opts,
            args.subsample_size,
        )?);
    }
    if results.is_empty() && bootstrap.is_none() {
        return Err(CliError::Config(
            "nothing to do: give --group-a/--group-b and/or --split-group".into(),
        ));
    }
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            command: "genes".into(),
            seed: args.proc.seed,
            alpha: args.proc.alpha,
            input_digest: file_digest(&args.input)?,
            input2_digest: None,
            labels_digest: Some(file_digest(&args.labels)?),
            options: serde_json::json!({
                "methods": args.methods,
                "top_genes": args.top_genes,
                "group_a": args.group_a,
                "group_b": args.group_b,
                "split_group": args.split_group,
                "split_reps": args.split_reps,
                "subsample_size": args.subsample_size,
                "proc": args.proc.options_json(),
            }),
        },
        results,
        bootstrap,
        dropped_samples: loaded.dropped_samples,
    };
    emit(&report, &args.out)
}

fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("CRAMP_THREADS").ok().and_then(|v| v.parse::<usize>().ok())
    })
    .filter(|&t| t > 0)
}

fn run() -> CliResult<()> {
    let cli = Cli::parse();
    if let Some(t) = resolve_threads(cli.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Test1(args) => run_test1(args),
        Command::Test2(args) => run_test2(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Nulldist(args) => run_nulldist(args),
        Command::Genes(args) => run_genes(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

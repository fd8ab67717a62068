use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use hcspinn::problems::{PdeOracleConfig, ReferenceSource};
use hcspinn::training::{Phase, TelemetryRecord};
use hcspinn_harness::config::{config_files, parse_override, Entry};
use hcspinn_harness::run::{builtin_reference, comparison_table, run_benchmark_with, ComparisonRow};
use hcspinn_harness::{compare_modes, ingest_reference, relative_l2, EvalGrid, HarnessError, Result, RunConfig, RunReport};

#[derive(Parser)]
#[command(name = "hcspinn", version, about = "Hard-constrained sequential PINN benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its artifacts.
    Run(RunArgs),
    /// Train hard and soft modes with shared seeds and tabulate both.
    Compare(RunArgs),
    /// Run every config file in a directory.
    Sweep(SweepArgs),
    /// Write a reference solution as a grid file.
    Oracle(OracleArgs),
    /// Validate a grid file, optionally scoring it against the built-in reference.
    Ingest(IngestArgs),
    /// Summarize a results ledger.
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    batch_type: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    adam_step: Option<f64>,
    #[arg(long)]
    adam_iters: Option<usize>,
    #[arg(long)]
    lbfgs_iters: Option<usize>,
    #[arg(long)]
    lambda_i: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn entries(&self) -> Result<Vec<Entry>> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push(Entry::new(k, v));
            }
        };
        put("nt", self.nt.map(|v| v.to_string()));
        put("mode", self.mode.clone());
        put("depth", self.depth.map(|v| v.to_string()));
        put("width", self.width.map(|v| v.to_string()));
        put("batch_type", self.batch_type.clone());
        put("batch_size", self.batch_size.map(|v| v.to_string()));
        put("adam_step", self.adam_step.map(|v| v.to_string()));
        put("adam_iters", self.adam_iters.map(|v| v.to_string()));
        put("lbfgs_iters", self.lbfgs_iters.map(|v| v.to_string()));
        put("lambda_i", self.lambda_i.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        for s in &self.set {
            out.push(parse_override(s)?);
        }
        Ok(out)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Config file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Problem name when no config file is given.
    #[arg(long)]
    problem: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render PNG heat maps (needs the `png` feature).
    #[arg(long)]
    png: bool,
    #[arg(long, short)]
    quiet: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut entries = self.overrides.entries()?;
        if let Some(out) = &self.out {
            entries.push(Entry::new("output", out.display().to_string()));
        }
        match (&self.config, &self.problem) {
            (Some(path), None) => RunConfig::load(path, &entries),
            (None, Some(p)) => {
                entries.insert(0, Entry::new("problem", p.clone()));
                RunConfig::from_entries(&entries)
            }
            _ => Err(HarnessError::config("give exactly one of --config or --problem")),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Directory of `*.cfg` files.
    #[arg(long, default_value = "crates/harness/defaults")]
    defaults: PathBuf,
    /// Only configs whose file name contains this text.
    #[arg(long)]
    filter: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
    /// Root directory; each run writes to a subdirectory named after it.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    problem: String,
    /// Problem constants, as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Pseudospectral grid size.
    #[arg(long, default_value_t = 512)]
    nx: usize,
    /// Pseudospectral time step.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Keep the oracle's own spatial grid instead of the evaluation grid.
    #[arg(long)]
    native: bool,
}

#[derive(Args)]
struct IngestArgs {
    file: PathBuf,
    /// Score the file against this problem's built-in reference.
    #[arg(long)]
    problem: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Ledger file or a directory containing `ledger.csv`.
    #[arg(default_value = "runs")]
    path: PathBuf,
}

fn progress(quiet: bool) -> impl FnMut(&TelemetryRecord) {
    move |r: &TelemetryRecord| {
        if quiet {
            return;
        }
        if let (Phase::Adam, Some(eval)) = (r.phase, r.eval_loss) {
            if r.iteration.is_multiple_of(1000) {
                eprintln!("window {:>2}  adam {:>6}  eval loss {eval:.3e}", r.window, r.iteration);
            }
        }
    }
}

fn finish(report: &RunReport) -> Result<()> {
    let l2 = report.relative_l2.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}"));
    println!(
        "{}  relative_l2 {l2}  time {:.1}s  -> {}",
        report.config.label(),
        report.wall_time_seconds,
        report.config.output_dir.display()
    );
    match &report.failure {
        Some(f) => Err(HarnessError::Training {
            window: f.window,
            message: f.message.clone(),
        }),
        None => Ok(()),
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let config = args.config()?;
    let report = run_benchmark_with(&config, &mut progress(args.quiet))?;
    render(&report, args.png)?;
    finish(&report)
}

#[cfg(feature = "png")]
fn render(report: &RunReport, png: bool) -> Result<()> {
    if png {
        hcspinn_harness::artifacts::render_images(report, &report.config.output_dir)?;
    }
    Ok(())
}

#[cfg(not(feature = "png"))]
fn render(_: &RunReport, png: bool) -> Result<()> {
    if png {
        return Err(HarnessError::config("built without the `png` feature"));
    }
    Ok(())
}

fn compare(args: &RunArgs) -> Result<()> {
    let config = args.config()?;
    let cmp = compare_modes(&config)?;
    render(&cmp.hard, args.png)?;
    render(&cmp.soft, args.png)?;
    let table = comparison_table(&[cmp.row()]);
    let path = config.output_dir.join("compare.csv");
    std::fs::write(&path, &table).map_err(|e| HarnessError::io(&path, e))?;
    print!("{table}");
    finish(&cmp.hard)?;
    finish(&cmp.soft)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let overrides = args.overrides.entries()?;
    let mut configs = Vec::new();
    for path in config_files(&args.defaults)? {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if args.filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let mut c = RunConfig::load(&path, &overrides)?;
        c.output_dir = args.out.join(c.label());
        configs.push(c);
    }
    if configs.is_empty() {
        return Err(HarnessError::config("no config matched"));
    }
    let next = AtomicUsize::new(0);
    let first_error: Mutex<Option<HarnessError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(c) = configs.get(i) else { break };
                let result = run_benchmark_with(c, &mut |_| {}).and_then(|r| finish(&r));
                if let Err(e) = result {
                    eprintln!("{}: {e}", c.label());
                    first_error.lock().unwrap().get_or_insert(e);
                }
            });
        }
    });
    match first_error.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let mut entries = vec![Entry::new("problem", args.problem.clone())];
    for s in &args.set {
        entries.push(parse_override(s)?);
    }
    let spec = RunConfig::from_entries(&entries)?.problem_spec()?;
    let grid = EvalGrid::for_problem(&spec);
    let reference = if args.native && spec.reference == ReferenceSource::PseudospectralOracle {
        PdeOracleConfig {
            nx: args.nx,
            dt: args.dt,
            nt_out: grid.t.len(),
        }
        .solve(&spec)?
    } else if spec.reference == ReferenceSource::PseudospectralOracle {
        let (a, b) = spec.spatial_domain.unwrap_or((0.0, 1.0));
        PdeOracleConfig {
            nx: args.nx,
            dt: args.dt,
            nt_out: grid.t.len(),
        }
        .solve(&spec)?
        .resample_periodic(b - a, &grid.x)?
    } else {
        builtin_reference(&spec, &grid)?
    };
    reference.save(&args.out)?;
    println!(
        "{} nx={} nt_grid={} provenance={} -> {}",
        reference.problem,
        reference.grid_x.len(),
        reference.grid_t.len(),
        reference.provenance.as_str(),
        args.out.display()
    );
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let r = ingest_reference(&args.file)?;
    println!(
        "ok problem={} nx={} nt_grid={} provenance={}",
        r.problem,
        r.grid_x.len(),
        r.grid_t.len(),
        r.provenance.as_str()
    );
    if let Some(p) = &args.problem {
        let spec = RunConfig::from_entries(&[Entry::new("problem", p.clone())])?.problem_spec()?;
        let grid = EvalGrid::for_problem(&spec);
        let aligned = hcspinn_harness::run::align_reference(r, &spec, &grid)?;
        let builtin = builtin_reference(&spec, &grid)?;
        println!("relative_l2 vs built-in {:.4e}", relative_l2(&aligned.values, &builtin)?);
    }
    Ok(())
}

struct LedgerRow {
    problem: String,
    nt: usize,
    mode: String,
    error: Option<f64>,
    seconds: f64,
    seed: String,
}

fn read_ledger(path: &Path) -> Result<Vec<LedgerRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || HarnessError::config(format!("{}: malformed ledger line {}", path.display(), i + 1));
        if f.len() != 6 {
            return Err(bad());
        }
        rows.push(LedgerRow {
            problem: f[0].to_string(),
            nt: f[1].parse().map_err(|_| bad())?,
            mode: f[2].to_string(),
            error: f[3].parse().ok(),
            seconds: f[4].parse().map_err(|_| bad())?,
            seed: f[5].to_string(),
        });
    }
    Ok(rows)
}

fn report(args: &ReportArgs) -> Result<()> {
    let path = if args.path.is_dir() { args.path.join("ledger.csv") } else { args.path.clone() };
    let rows = read_ledger(&path)?;
    let mut keys: Vec<(String, usize, String)> = rows.iter().map(|r| (r.problem.clone(), r.nt, r.seed.clone())).collect();
    keys.sort();
    keys.dedup();
    let mut last_problem = String::new();
    for (problem, nt, seed) in keys {
        if problem != last_problem {
            println!("\n{problem}");
            last_problem = problem.clone();
        }
        // the newest entry wins when a run was repeated
        let pick = |mode: &str| {
            rows.iter()
                .rev()
                .find(|r| r.problem == problem && r.nt == nt && r.seed == seed && r.mode == mode)
        };
        let (h, s) = (pick("hard"), pick("soft"));
        let row = ComparisonRow {
            nt,
            hcs_error: h.and_then(|r| r.error),
            hcs_time: h.map_or(f64::NAN, |r| r.seconds),
            scs_error: s.and_then(|r| r.error),
            scs_time: s.map_or(f64::NAN, |r| r.seconds),
        };
        let table = comparison_table(&[row]);
        let line = table.lines().nth(1).unwrap_or_default();
        println!("  seed {seed}  {line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Ingest(a) => ingest(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

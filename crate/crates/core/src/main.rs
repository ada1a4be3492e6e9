use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;

use qudit_sense::config::{parse_config, Experiment, ExperimentConfig, Format, Threads};
use qudit_sense::experiments::{run_experiment, Outcome};
use qudit_sense::output::{write_table, Metadata};
use qudit_sense::Error;

/// Spin-s Ising chain quantum sensing experiments.
#[derive(Debug, Parser)]
#[command(name = "qudit-sense", version)]
struct Cli {
    /// table1, table2, fig1, fig2, fig3, fig4, fig5, sweep or validate
    experiment: Experiment,
    /// TOML config; omitted keys take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core
    #[arg(long)]
    threads: Option<usize>,
    /// csv, json or both; overrides `output.format`
    #[arg(long)]
    format: Option<String>,
}

enum Failure {
    Usage(String),
    Run(Error),
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let origin = cli.config.as_ref().map_or("<defaults>".to_string(), |p| p.display().to_string());
    let mut cfg = parse_config(&text).map_err(|e| Failure::Usage(format!("{origin}: {e}")))?;
    if let Some(seed) = cli.seed {
        // the seed is echoed into TOML headers, whose integers are i64
        if seed > i64::MAX as u64 {
            return Err(Failure::Usage(format!("seed must be at most {}", i64::MAX)));
        }
        cfg.seed = seed;
    }
    match cli.threads {
        Some(0) => cfg.threads = Threads::Auto,
        Some(n) => cfg.threads = Threads::Fixed(n),
        None => {}
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = Some(out.clone());
    }
    if let Some(f) = &cli.format {
        cfg.output.format = match f.as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            "both" => Format::Both,
            other => return Err(Failure::Usage(format!("unknown format {other:?}"))),
        };
    }
    Ok(cfg)
}

fn print_checks(outcome: &Outcome) {
    let width = outcome.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &outcome.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:width$}  value={:.3e}  tol={:.1e}  {}", c.name, c.value, c.tolerance, c.detail);
    }
    let failed = outcome.checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", outcome.checks.len());
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let cfg = load(&cli)?;
    let dir = cfg
        .output
        .dir
        .clone()
        .ok_or_else(|| Failure::Usage("no output directory: pass --out or set output.dir".into()))?;
    let threads = match cfg.threads {
        Threads::Auto => 0,
        Threads::Fixed(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;

    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let outcome = pool.install(|| run_experiment(cli.experiment, &cfg)).map_err(Failure::Run)?;
    let meta = Metadata {
        experiment: cli.experiment.to_string(),
        seed: cfg.seed,
        threads: match cfg.threads {
            Threads::Auto => format!("auto ({})", pool.current_num_threads()),
            Threads::Fixed(n) => n.to_string(),
        },
        wall_time_s: clock.elapsed().as_secs_f64(),
        started_unix,
        config: cfg.clone(),
    };
    for table in &outcome.tables {
        for path in write_table(&dir, table, &meta, cfg.output.format).map_err(Failure::Run)? {
            eprintln!("wrote {}", path.display());
        }
    }
    if cli.experiment == Experiment::Validate {
        print_checks(&outcome);
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    // kernel-level threading changes blocking and rounding; parallelism lives in the scans
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

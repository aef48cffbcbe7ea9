use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flocksim::harness::{self, Format, Scenario};
use flocksim::{FlockError, Result};

#[derive(Parser)]
#[command(name = "flocksim", version, about = "Monte Carlo ensembles for the stochastic Cucker-Smale model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write reports.
    Simulate {
        /// Built-in scenario name (or its S<k> prefix), or a scenario file.
        #[arg(long)]
        scenario: String,
        /// Override the number of paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV per path.
        #[arg(long)]
        dump_paths: bool,
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<String>,
    },
    /// List the built-in scenarios.
    ListScenarios {
        /// Print each scenario in file form.
        #[arg(long)]
        full: bool,
    },
    /// Run the acceptance suite and print the pass/fail table.
    Check {
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Restrict to these criteria (1-9).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load_scenario(spec: &str) -> Result<Scenario> {
    if let Some(s) = harness::builtin(spec) {
        return Ok(s);
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| FlockError::Config(format!("`{spec}` is neither a built-in scenario nor a readable file: {e}")))?;
    text.parse()
}

fn simulate(
    scenario: &str,
    paths: Option<usize>,
    seed: Option<u64>,
    workers: usize,
    out: PathBuf,
    dump: bool,
    formats: &[String],
) -> Result<bool> {
    let mut s = load_scenario(scenario)?;
    if let Some(n) = paths {
        s.n_paths = n;
    }
    if let Some(seed) = seed {
        s.master_seed = seed;
    }
    let formats = formats.iter().map(|f| f.parse()).collect::<Result<Vec<Format>>>()?;
    let run = harness::execute(&s, workers)?;
    let files = harness::emit_report(&run.stats, &run.manifest, &formats, &out)?;
    if dump {
        harness::dump_paths(&run.results, &out)?;
    }
    let st = &run.stats;
    println!("{}: {} paths, seed {}, {:.1}s", s.name, st.n_paths, s.master_seed, run.manifest.wall_time_s);
    let c = &st.collision_frequency;
    println!("  collisions: {} (95% upper {:.2e})", c.count, c.hi);
    if let Some(f) = &st.event_frequency {
        println!("  P(A) = {:.4} [{:.4}, {:.4}], {} indeterminate", f.estimate, f.lo, f.hi, st.indeterminate);
    }
    for f in &st.fits {
        println!("  fit {:?}: rate {:.4}, r^2 {:.4}", f.model, f.rate, f.r_squared);
    }
    for c in &run.manifest.criteria {
        println!("  {} {}  {}", if c.passed { "PASS" } else { "FAIL" }, c.expectation, c.detail);
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(run.manifest.passed())
}

fn check(workers: usize, only: &[usize]) -> Result<bool> {
    let wanted = |k: usize| only.is_empty() || only.contains(&k);
    let mut all = true;
    for (i, s) in harness::builtin_scenarios().iter().enumerate() {
        if !wanted(i + 1) {
            continue;
        }
        let line = harness::run_criterion(i + 1, s, workers)?;
        all &= line.passed;
        println!("{line}");
    }
    if wanted(9) {
        let line = harness::property_line();
        all &= line.passed;
        println!("{line}");
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { scenario, paths, seed, workers, out, dump_paths, format } => {
            simulate(&scenario, paths, seed, workers, out, dump_paths, &format)
        }
        Command::ListScenarios { full } => {
            for s in harness::builtin_scenarios() {
                if full {
                    println!("{s}");
                } else {
                    println!(
                        "{:<20} N={} d={} kernel={} noise={} paths={} T={}",
                        s.name, s.cfg.n, s.cfg.d, s.cfg.kernel, s.cfg.noise, s.n_paths, s.horizon
                    );
                }
            }
            Ok(true)
        }
        Command::Check { workers, only } => check(workers, &only),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

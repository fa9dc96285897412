use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use flowlab_cli::acceptance::{run_criterion, CRITERIA};
use flowlab_cli::{exit, exit_code, list_scenarios, run, ScenarioConfig, ScenarioId};

#[derive(Parser)]
#[command(name = "lab", version, about = "Numerical checks of flow-based characteristic class identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the scenarios with their topics and criteria.
    List,
    /// Run one scenario and write its report.
    Run {
        scenario: String,
        /// TOML configuration; scenario defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Caps the number of worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Report path; `.csv` selects the flat table, anything else JSON.
        /// Overrides `output_path`; without either the JSON goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run acceptance criteria, one line each.
    Check {
        /// Run all thirteen criteria.
        #[arg(long)]
        all: bool,
        /// Criterion numbers to run.
        criteria: Vec<u32>,
        /// Print every check.
        #[arg(short, long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::List => {
            list();
            exit::PASS
        }
        Command::Run { scenario, config, seed, jobs, out } => run_scenario(&scenario, config.as_deref(), seed, jobs, out),
        Command::Check { all, criteria, verbose } => check(all, &criteria, verbose),
    };
    ExitCode::from(code as u8)
}

fn list() {
    for info in list_scenarios() {
        let criteria: Vec<String> = info.criteria.iter().map(|c| c.to_string()).collect();
        println!("{:<22} {:<40} criteria {:<6} {}", info.name, info.anchor, criteria.join(","), info.summary);
    }
}

fn config_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("config error: {msg}");
    exit::CONFIG
}

fn run_scenario(scenario: &str, config: Option<&Path>, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) -> i32 {
    let Some(id) = ScenarioId::parse(scenario) else {
        return config_error(format!("unknown scenario {scenario}; see `lab list`"));
    };
    let mut cfg = match config {
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => return config_error(e),
        },
        None => ScenarioConfig::default_for(id),
    };
    if cfg.scenario != id {
        return config_error(format!("scenario: configuration is for {}, not {id}", cfg.scenario));
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(j) = jobs {
        if j == 0 {
            return config_error("--jobs must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let report = run(&cfg);
    let target = out.or_else(|| cfg.output_path.clone());
    if let Err(e) = emit(&report, target.as_deref()) {
        eprintln!("error: {e:#}");
        return exit::FAILED;
    }
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    eprintln!("{}: {}/{} checks passed in {:.1}s", report.scenario, report.checks.len() - failed, report.checks.len(), report.timing);
    exit_code(&report)
}

fn emit(report: &flowlab_cli::Report, target: Option<&Path>) -> anyhow::Result<()> {
    match target {
        None => {
            // A closed pipe (`lab run ... | head`) is not an error of the run.
            let _ = writeln!(std::io::stdout().lock(), "{}", report.to_json()?);
            Ok(())
        }
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
            let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            report.write_csv(f)
        }
        Some(p) => report.write_json(p).with_context(|| format!("writing {}", p.display())),
    }
}

fn check(all: bool, criteria: &[u32], verbose: bool) -> i32 {
    if !all && criteria.is_empty() {
        return config_error("give criterion numbers or --all");
    }
    if let Some(bad) = criteria.iter().find(|n| !CRITERIA.contains(n)) {
        return config_error(format!("no criterion {bad}; criteria are 1 to 13"));
    }
    let numbers: Vec<u32> = if all { CRITERIA.collect() } else { criteria.to_vec() };
    let mut failed = 0;
    for n in numbers {
        let outcome = run_criterion(n);
        println!("{}", outcome.line());
        if verbose || !outcome.pass() {
            for r in &outcome.records {
                println!(
                    "    {} {}: computed {:.12e} expected {:.12e} gap {:.3e} tol {:.1e}",
                    if r.pass { "ok  " } else { "FAIL" },
                    r.name,
                    r.computed,
                    r.expected,
                    r.gap(),
                    r.tolerance
                );
            }
        }
        if !outcome.pass() {
            failed += 1;
        }
    }
    if failed == 0 {
        exit::PASS
    } else {
        exit::FAILED
    }
}

//! `fracns`: runs scenario configs and writes reports.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on usage,
//! config or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fracns_core::experiments::{default_scenario, emit_report, run_scenario, Report, Scenario, Suite};

#[derive(Parser)]
#[command(name = "fracns", version, about = "Verification suites for mild solutions of fractional Navier-Stokes")]
struct Cli {
    /// Write reports here instead of the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate index admissibility.
    CheckParams { config: Option<PathBuf> },
    /// Kernel bound and homogeneity checks.
    KernelVerify { config: Option<PathBuf> },
    /// Evaluate one norm of one field.
    Norms { config: Option<PathBuf> },
    /// Picard solve with amplitude sweep.
    Solve { config: Option<PathBuf> },
    /// One of the two counterexamples.
    Counterexample { which: Which, config: Option<PathBuf> },
    /// Run a group of suites on their reference configs.
    Suite { which: Group },
    /// Run whatever suite the config names.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    All,
}

fn load(path: &Path) -> Result<Scenario, String> {
    Scenario::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn scenario_for(suite: Suite, config: Option<&Path>) -> Result<Scenario, String> {
    let Some(path) = config else {
        return Ok(default_scenario(suite));
    };
    let scn = load(path)?;
    if scn.suite != suite {
        return Err(format!(
            "{}: config is for suite {}, command expects {}",
            path.display(),
            scn.suite.name(),
            suite.name()
        ));
    }
    Ok(scn)
}

fn run_one(scn: &Scenario, out: Option<&Path>) -> Result<Report, String> {
    let report = run_scenario(scn).map_err(|e| format!("{}: {e}", scn.name))?;
    let dir = out.unwrap_or(&scn.output.dir);
    let files = emit_report(&report, dir, &scn.output.formats).map_err(|e| format!("{}: {e}", dir.display()))?;
    for c in &report.checks {
        println!("{} {:<4} {} = {:.6e} (target {})", report.name, verdict(c.passed), c.name, c.value, c.target);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(report)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on bad usage; 2 is reserved for failed checks here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = cli.out.as_deref();
    let (suites, config): (Vec<Suite>, Option<PathBuf>) = match cli.cmd {
        Cmd::Run { config } => match load(&config) {
            Ok(scn) => (vec![scn.suite], Some(config)),
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(1);
            }
        },
        Cmd::CheckParams { config } => (vec![Suite::CheckParams], config),
        Cmd::KernelVerify { config } => (vec![Suite::KernelVerify], config),
        Cmd::Norms { config } => (vec![Suite::Norms], config),
        Cmd::Solve { config } => (vec![Suite::Solve], config),
        Cmd::Counterexample { which: Which::A, config } => (vec![Suite::CounterexampleA], config),
        Cmd::Counterexample { which: Which::B, config } => (vec![Suite::CounterexampleB], config),
        Cmd::Suite { which: Group::All } => (Suite::ALL.to_vec(), None),
    };
    let mut all_passed = true;
    for suite in suites {
        let report = scenario_for(suite, config.as_deref()).and_then(|scn| run_one(&scn, out));
        match report {
            Ok(r) => {
                println!("{}: {}", r.name, verdict(r.passed));
                all_passed &= r.passed;
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(1);
            }
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

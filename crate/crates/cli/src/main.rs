use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use cosmowave::cli_io::{
    load_config, read_sweep_csv, write_json, write_oracle_csv, write_sweep_csv, write_sweep_dat, write_trace_csv,
    write_trace_dat, ConfigError, RunConfig, RunSummary,
};
use cosmowave::experiments::{compare_to_theory, run_sweep, CompareOptions, Engine, ExperimentError};
use cosmowave::ode_oracle::{integrate_reduced_ode, OdeError, OdeProblem};
use cosmowave::pde_solver::{run, InitialData, Outcome, PdeError, ProblemSpec};
use cosmowave::selftest::run_selftest;
use cosmowave::theory::{classify, RegimeReport, TheoryError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_COMPARISON: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "cosmowave", version, about = "Wave equations with time-dependent speed and damping")]
struct Cli {
    /// Suppress informational output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the regime report for a configuration.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one PDE instance; writes trace.csv, trace.dat and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ε-sweep of a configuration; writes sweep.csv, sweep.dat and sweep.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_engine)]
        engine: Option<Engine>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the reduced ODE for the configured ε; writes oracle.csv.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a sweep CSV against a regime report; exit 3 when a check fails.
    Compare {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Configuration the sweep came from, to verify it matches the report.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Allowed relative deviation of fitted exponents.
        #[arg(long, default_value_t = 0.15)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in worked examples.
    Selftest,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse()
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(m: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: m.to_string(),
        }
    }

    fn runtime(m: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: m.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::validation(e)
    }
}

impl From<TheoryError> for Failure {
    fn from(e: TheoryError) -> Self {
        match e {
            TheoryError::InvalidInput(_)
            | TheoryError::InconsistentForm(_)
            | TheoryError::UnsupportedNonlinearity(_) => Failure::validation(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::InvalidSpec(_)
            | PdeError::GridTooCoarse { .. }
            | PdeError::InvalidGrid(_)
            | PdeError::NonPositiveData { .. } => Failure::validation(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<OdeError> for Failure {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::InvalidProblem(_) => Failure::validation(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSweep(_) | ExperimentError::MismatchedSpec(_) => Failure::validation(e),
            _ => Failure::runtime(e),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn output_dir(out: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    write_json(std::io::stdout().lock(), value).map_err(Failure::runtime)
}

fn classify_cmd(config: &Path, out: &Option<PathBuf>, quiet: bool) -> CmdResult {
    let cfg = load_config(config)?;
    let pr = &cfg.problem;
    let report = classify(&pr.profile, pr.n, pr.p, pr.nonlinearity, pr.data.r)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Failure::runtime)?;
        write_json(create(dir, "report.json")?, &report).map_err(Failure::runtime)?;
    }
    if !quiet || out.is_none() {
        print_json(&report)?;
    }
    Ok(0)
}

fn simulate_cmd(config: &Path, out: &Option<PathBuf>, quiet: bool) -> CmdResult {
    let cfg = load_config(config)?;
    let res = run(&cfg.problem, cfg.grid, cfg.stop)?;
    let dir = output_dir(out, &cfg)?;
    write_trace_csv(create(&dir, "trace.csv")?, &res.trace).map_err(Failure::runtime)?;
    write_trace_dat(create(&dir, "trace.dat")?, &res.trace).map_err(Failure::runtime)?;
    let summary = RunSummary::new(&res, &cfg.problem);
    write_json(create(&dir, "summary.json")?, &summary).map_err(Failure::runtime)?;
    if !quiet {
        print_json(&summary)?;
    }
    Ok(match res.outcome {
        Outcome::Unstable { t } => {
            eprintln!("error: the discrete solution became non-finite at t = {t}");
            EXIT_RUNTIME
        }
        _ => 0,
    })
}

fn sweep_cmd(config: &Path, engine: Option<Engine>, out: &Option<PathBuf>, quiet: bool) -> CmdResult {
    let cfg = load_config(config)?;
    let sweep_cfg = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::validation("the configuration has no [sweep] section"))?;
    let engine = engine.unwrap_or(sweep_cfg.engine);
    let sweep = run_sweep(&cfg.problem, &sweep_cfg.epsilons, &cfg.engine_settings(engine))?;
    let dir = output_dir(out, &cfg)?;
    write_sweep_csv(create(&dir, "sweep.csv")?, &sweep).map_err(Failure::runtime)?;
    write_sweep_dat(create(&dir, "sweep.dat")?, &sweep).map_err(Failure::runtime)?;
    write_json(create(&dir, "sweep.json")?, &sweep).map_err(Failure::runtime)?;
    for p in &sweep.points {
        if let Some(e) = &p.error {
            eprintln!("warning: ε = {}: {e}", p.epsilon);
        }
    }
    if !quiet {
        let mut stdout = std::io::stdout().lock();
        write_sweep_csv(&mut stdout, &sweep).map_err(Failure::runtime)?;
        stdout.flush().map_err(Failure::runtime)?;
    }
    Ok(0)
}

fn oracle_cmd(config: &Path, out: &Option<PathBuf>, quiet: bool) -> CmdResult {
    let cfg = load_config(config)?;
    let problem = OdeProblem::from_spec(&cfg.problem)?;
    let t_cap = cfg.sweep.as_ref().map_or(1e300, |s| s.t_cap);
    let res = integrate_reduced_ode(&problem, t_cap)?;
    let dir = output_dir(out, &cfg)?;
    write_oracle_csv(create(&dir, "oracle.csv")?, &res.trace).map_err(Failure::runtime)?;
    let summary = json!({
        "outcome": res.outcome,
        "blowup_time": res.blowup_time(),
        "steps": res.steps,
        "problem": problem,
        "dynamics": "lower-bound dynamics",
    });
    write_json(create(&dir, "oracle.json")?, &summary).map_err(Failure::runtime)?;
    if !quiet {
        print_json(&summary)?;
    }
    Ok(0)
}

fn compare_cmd(
    sweep: &Path,
    report: &Path,
    config: &Option<PathBuf>,
    tolerance: f64,
    out: &Option<PathBuf>,
    quiet: bool,
) -> CmdResult {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Failure::validation("--tolerance must be positive"));
    }
    let text = std::fs::read_to_string(report)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", report.display())))?;
    let report: RegimeReport = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("{} is not a regime report: {e}", report.display())))?;
    let spec = match config {
        Some(path) => load_config(path)?.problem,
        None => {
            let i = &report.inputs;
            ProblemSpec {
                n: i.n,
                p: i.p,
                nonlinearity: i.nonlinearity,
                epsilon: 0.0,
                data: InitialData::bump(i.r, 0.0, 1.0),
                profile: i.profile.clone(),
            }
        }
    };
    let file = File::open(sweep).map_err(|e| Failure::validation(format!("cannot read {}: {e}", sweep.display())))?;
    let sweep = read_sweep_csv(file, spec).map_err(Failure::validation)?;
    let opts = CompareOptions {
        slope_tolerance: tolerance,
        ..CompareOptions::default()
    };
    let cmp = compare_to_theory(&sweep, &report, opts)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Failure::runtime)?;
        write_json(create(dir, "comparison.json")?, &cmp).map_err(Failure::runtime)?;
    }
    if !quiet {
        print_json(&cmp)?;
    }
    Ok(if cmp.pass { 0 } else { EXIT_COMPARISON })
}

fn selftest_cmd(quiet: bool) -> CmdResult {
    // Failing examples report through their results, not the panic hook.
    std::panic::set_hook(Box::new(|_| {}));
    let results = run_selftest();
    let _ = std::panic::take_hook();
    let failed = results.iter().filter(|c| !c.passed).count();
    for c in &results {
        if !quiet || !c.passed {
            println!(
                "{} {}::{}: {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.module,
                c.operation,
                c.detail
            );
        }
    }
    if !quiet {
        println!("{} of {} examples passed", results.len() - failed, results.len());
    }
    Ok(if failed == 0 { 0 } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let q = cli.quiet;
    let result = match &cli.command {
        Command::Classify { config, out } => classify_cmd(config, out, q),
        Command::Simulate { config, out } => simulate_cmd(config, out, q),
        Command::Sweep { config, engine, out } => sweep_cmd(config, *engine, out, q),
        Command::Oracle { config, out } => oracle_cmd(config, out, q),
        Command::Compare {
            sweep,
            report,
            config,
            tolerance,
            out,
        } => compare_cmd(sweep, report, config, *tolerance, out, q),
        Command::Selftest => selftest_cmd(q),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

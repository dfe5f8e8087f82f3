//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 pipeline error, 4 a checked property failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pxwell::config::Config;
use pxwell::exponent::ExponentField;
use pxwell::io::{read_field, write_ode_sweep, write_quotients};
use pxwell::norms::luxemburg_norm;
use pxwell::runner::{self, build_grid, Agreement, Mode};
use pxwell::{ode, poincare, Error};

#[derive(Parser)]
#[command(name = "pxwell", version, about = "Potential-well experiments for p(x)-Laplacian diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (INI)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; each run writes to <out>/<run-id>/
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Overrides the seed of the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline including time integration
    Simulate,
    /// Estimates and verdict without time integration
    Classify,
    /// Embedding and depth estimates only
    Depth,
    /// Luxemburg norm of a CSV field
    Norm,
    /// Closed-form envelopes of the scalar comparison inequality against RK4
    OdeVerify,
    /// Radial modular Poincaré counterexample sweep
    Poincare,
    /// Summary table of every stored run record
    Report,
}

enum Failure {
    Config(String),
    Pipeline(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Pipeline(other.to_string()),
        }
    }
}

fn need_config(cli: &Cli) -> Result<&Path, Failure> {
    cli.config
        .as_deref()
        .ok_or_else(|| Failure::Config("this subcommand needs --config <path>".into()))
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn pipeline(cli: &Cli, mode: Mode) -> Result<(), Failure> {
    let arts = runner::run(need_config(cli)?, &cli.out, cli.seed, mode)?;
    let rec = &arts.record;
    say(cli, format!("run {} -> {}", rec.id, cli.out.join(&rec.id).display()));
    if let Some(est) = &rec.estimates {
        say(cli, format!("B0 ≥ {:.6e} [{}]", est.b0.constant, est.b0.id));
        say(cli, format!("B  ≥ {:.6e} [{}]", est.b.constant, est.b.id));
        if let Some(d) = &est.depth {
            say(cli, format!("depth ≤ {:.6e} [{}]", d.upper, d.id));
        }
    }
    if let Some(v) = &rec.verdict {
        say(cli, format!("verdict: {:?} / {:?} ({})", v.regime, v.prediction, v.criterion));
    }
    if let Some(o) = &rec.outcome {
        say(cli, format!("outcome: {o:?} after {} steps", rec.steps.unwrap_or(0)));
    }
    for e in &rec.envelopes {
        say(cli, format!("envelope {}: pass={} worst ratio {:.3e}", e.name, e.pass, e.worst_ratio));
    }
    if let Some(err) = &rec.stage_error {
        return Err(Failure::Pipeline(format!("stage {}: {}", err.stage, err.message)));
    }
    if rec.agreement == Some(Agreement::Contradiction) {
        return Err(Failure::Check("verdict contradicts the simulated outcome".into()));
    }
    Ok(())
}

fn norm(cli: &Cli) -> Result<(), Failure> {
    let path = need_config(cli)?;
    let cfg = Config::load(path)?;
    let settings = cfg
        .norm
        .as_ref()
        .ok_or_else(|| Failure::Config(format!("{}: missing [norm] section", path.display())))?;
    let grid = build_grid(&cfg)?;
    let q = ExponentField::build(&settings.exponent.parse()?, &grid, "q")?;
    let base = path.parent().unwrap_or(Path::new("."));
    let f = read_field(&base.join(&settings.field), &grid)?;
    let res = luxemburg_norm(&f, &q, settings.tol)?;
    say(cli, format!("value = {:.15e}", res.value));
    say(cli, format!("iterations = {}", res.iterations));
    say(cli, format!("residual = {:.3e}", res.residual));
    Ok(())
}

fn ode_verify(cli: &Cli) -> Result<(), Failure> {
    let rows = ode::sweep()?;
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let path = cli.out.join("ode_sweep.csv");
    write_ode_sweep(&path, &rows)?;
    let worst = rows
        .iter()
        .map(|v| v.max_violation / (1.0 + v.scale))
        .fold(f64::NEG_INFINITY, f64::max);
    let failed = rows.iter().filter(|v| !v.pass).count();
    say(cli, format!("{} cells, {failed} failed, worst scaled violation {worst:.3e} -> {}", rows.len(), path.display()));
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} cells exceed the envelope")));
    }
    Ok(())
}

fn poincare_sweep(cli: &Cli) -> Result<(), Failure> {
    let rep = poincare::quotient_sweep(&[1e2, 1e3, 1e4, 1e6], poincare::DEFAULT_NODES)?;
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let path = cli.out.join("quotients.csv");
    write_quotients(&path, &rep.rows)?;
    for r in &rep.rows {
        say(cli, format!("ε = {:>8.1e}  quotient = {:.6e}  bound = {:.6e}", r.eps, r.quotient, r.envelope));
    }
    say(cli, format!("∫u over the ball = {:.3e}; table -> {}", rep.profile_integral, path.display()));
    if !rep.pass() {
        return Err(Failure::Check(format!("sweep failed: {rep:?}")));
    }
    Ok(())
}

fn report(cli: &Cli) -> Result<(), Failure> {
    let rows = runner::report(&cli.out)?;
    for r in &rows {
        say(cli, format!("{:<24} {:<14} {:<12} {:<13} {}", r.id, r.regime, r.prediction, r.agreement, r.outcome));
    }
    say(cli, format!("{} records -> {}", rows.len(), cli.out.join("summary.csv").display()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate => pipeline(&cli, Mode::Simulate),
        Command::Classify => pipeline(&cli, Mode::Classify),
        Command::Depth => pipeline(&cli, Mode::Depth),
        Command::Norm => norm(&cli),
        Command::OdeVerify => ode_verify(&cli),
        Command::Poincare => poincare_sweep(&cli),
        Command::Report => report(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(m)) => {
            eprintln!("pipeline error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(4)
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nemthsim::harness::{
    builtin_scenario, epsilon_sweep, galerkin_refinement, oracle_compare_state, random_admissible_state,
    SweepOptions, ORACLE_TOLERANCE, SCENARIO_NAMES,
};
use nemthsim::io::{audit_dir, emit_refinement_csv, emit_sweep_csv, execute_run, parse_config, RunConfig};
use nemthsim::Error;

#[derive(Parser)]
#[command(name = "nemthsim", version, about = "Non-isothermal nematic liquid crystal flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a built-in scenario (see `list-scenarios`).
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, writing diagnostics and snapshots to a directory.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularization sweep against the limit system.
    SweepEps {
        #[command(flatten)]
        source: Source,
        /// Strictly decreasing widths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        eps_list: Vec<f64>,
        /// CSV path; defaults to `<output.dir>/sweep.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Steps between director samples.
        #[arg(long, default_value_t = 10)]
        sample_stride: usize,
        /// Also rerun every width at half the step.
        #[arg(long)]
        refinement: bool,
    },
    /// Galerkin size refinement, comparing every m with 2m.
    Galerkin {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', required = true)]
        m_list: Vec<usize>,
        /// CSV path; defaults to `<output.dir>/galerkin.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the invariants of a run directory.
    Audit {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Compare one coupled step against the dense-matrix implementation.
    Oracle {
        #[command(flatten)]
        source: Source,
        /// Additional random admissible states, seeded from the config.
        #[arg(long, default_value_t = 0)]
        random: u64,
    },
    /// Print the built-in scenario names.
    ListScenarios,
}

/// A failure with its exit code: 1 for a broken invariant or failed run,
/// 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidGrid(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn violation(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn load(source: &Source) -> Result<RunConfig, Failure> {
    match (&source.config, &source.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure {
                code: 2,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            Ok(parse_config(&text)?)
        }
        (None, Some(name)) => Ok(RunConfig::from_scenario(builtin_scenario(name)?)),
        (None, None) => unreachable!("clap requires a source"),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::from)?;
    }
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { source, out } => {
            let cfg = load(&source)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let rep = execute_run(&cfg, &dir)?;
            let recs = &rep.output.records;
            let (first, last) = (recs.first().expect("initial record"), recs.last().expect("final record"));
            println!("scenario   {}", cfg.scenario.name);
            println!("t          {}", last.t);
            println!("E_total    {:.12e} -> {:.12e}", first.e_total, last.e_total);
            println!("E_mech     {:.12e} -> {:.12e}", first.e_mech(), last.e_mech());
            println!("min θ      {:.12e}", recs.iter().map(|r| r.min_theta).fold(f64::INFINITY, f64::min));
            println!("max |d|    {:.12e}", recs.iter().map(|r| r.max_norm_d).fold(0.0, f64::max));
            println!("snapshots  {} in {}", rep.snapshots, dir.display());
            if !rep.violations.is_empty() {
                return Err(violation(rep.violations.join("\n")));
            }
            Ok(())
        }
        Command::SweepEps {
            source,
            eps_list,
            out,
            sample_stride,
            refinement,
        } => {
            let cfg = load(&source)?;
            let options = SweepOptions {
                sample_stride,
                refinement_column: refinement,
                ..SweepOptions::default()
            };
            let res = epsilon_sweep(&cfg.scenario, &eps_list, options)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("sweep.csv"));
            write_file(&path, &emit_sweep_csv(&res))?;
            println!("{:>10} {:>14} {:>14} {:>14} {:>14}", "eps", "mean ∫F", "max||d|-1|", "‖∇(d-d0)‖", "sup E_mech");
            for m in &res.members {
                println!(
                    "{:>10} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                    m.eps, m.penalty_avg, m.max_unit_defect, m.grad_diff_avg, m.mech_sup
                );
            }
            println!("bound rhs  {:.12e}", res.members.first().map_or(f64::NAN, |m| m.bound_rhs));
            println!("decay order of mean ∫F  {:.3}", res.penalty_decay_order());
            println!("written    {}", path.display());
            let mut problems = res.failures();
            let rhs = res.members.first().map_or(0.0, |m| m.bound_rhs);
            if !res.energy_bound_holds(1e-9 * rhs.abs()) {
                problems.push("energy bound violated".into());
            }
            if !problems.is_empty() {
                return Err(violation(problems.join("\n")));
            }
            Ok(())
        }
        Command::Galerkin { source, m_list, out } => {
            let cfg = load(&source)?;
            let rows = galerkin_refinement(&cfg.scenario, &m_list)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("galerkin.csv"));
            write_file(&path, &emit_refinement_csv(&rows))?;
            println!("{:>6} {:>16} {:>16}", "m", "‖u_m - u_2m‖", "envelope excess");
            let mut problems = Vec::new();
            for r in &rows {
                println!("{:>6} {:>16.6e} {:>16.6e}", r.m, r.diff, r.envelope_excess_m.max(r.envelope_excess_2m));
                if let Some(f) = &r.failure {
                    problems.push(format!("m = {}: {f}", r.m));
                }
                if r.envelope_excess_m > 0.0 || r.envelope_excess_2m > 0.0 {
                    problems.push(format!("m = {}: energy envelope exceeded", r.m));
                }
            }
            println!("written    {}", path.display());
            if !problems.is_empty() {
                return Err(violation(problems.join("\n")));
            }
            Ok(())
        }
        Command::Audit { dir } => {
            let rep = audit_dir(&dir).map_err(|e| match e {
                Error::Io(_) | Error::Config { .. } => Failure {
                    code: 2,
                    message: format!("{} is not a readable run directory: {e}", dir.display()),
                },
                other => other.into(),
            })?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if !rep.passed() {
                let names: Vec<_> = rep.failures().map(|c| c.name).collect();
                return Err(violation(format!("failed invariants: {}", names.join(", "))));
            }
            Ok(())
        }
        Command::Oracle { source, random } => {
            let cfg = load(&source)?;
            let coeffs = cfg.scenario.coefficients.build()?;
            let params = cfg.step_params();
            let state = cfg.scenario.initial_state()?;
            let mut worst = 0.0f64;
            let mut report = |label: String, s: &nemthsim::State| -> Result<(), Failure> {
                let rep = oracle_compare_state(s, &coeffs, &params)?;
                println!(
                    "{label:<12} u {:.3e}  p {:.3e}  d {:.3e}  θ {:.3e}",
                    rep.velocity, rep.pressure, rep.director, rep.temperature
                );
                worst = worst.max(rep.max());
                Ok(())
            };
            report("initial".into(), &state)?;
            for i in 0..random {
                let mut s = random_admissible_state(state.grid(), 0.5, cfg.seed.wrapping_add(i))?;
                s.eps = state.eps;
                report(format!("random {i}"), &s)?;
            }
            if !(worst < ORACLE_TOLERANCE) {
                return Err(violation(format!("oracle discrepancy {worst:.3e} exceeds {ORACLE_TOLERANCE:.0e}")));
            }
            Ok(())
        }
        Command::ListScenarios => {
            for name in SCENARIO_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

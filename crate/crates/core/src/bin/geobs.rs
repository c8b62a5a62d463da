use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use geobs::analysis::{check_contraction_bound, check_speed_bounds, check_trap_region, BoundReport};
use geobs::scenario::{
    read_trace_diagnostics, run_scenario, run_sweep, write_outputs, write_sweep_summary, RunResult, RunStatus,
    ScenarioConfig, SweepConfig, SweepParameter,
};
use geobs::{GeoError, Result};

const EXIT_ERROR: u8 = 1;
const EXIT_DIVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "geobs", version, about = "Reduced-order velocity observer on Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Lambda,
    Dt,
    NoiseFraction,
}

impl From<Param> for SweepParameter {
    fn from(p: Param) -> Self {
        match p {
            Param::Lambda => SweepParameter::Lambda,
            Param::Dt => SweepParameter::Dt,
            Param::NoiseFraction => SweepParameter::NoiseFraction,
        }
    }
}

#[derive(clap::Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "GEOBS_OUT_DIR", default_value = "geobs-out")]
    out_dir: PathBuf,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace, report and plot data.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the time step.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run a parameter sweep and write `sweep_summary.csv`.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Swept parameter; defaults to the scenario's sweep section.
        #[arg(long, value_enum)]
        param: Option<Param>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
    },
    /// Re-run the bound checks on a saved trace.
    Check {
        trace: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Upper sectional curvature bound `A`.
        #[arg(long, allow_hyphen_values = true)]
        curvature: f64,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the built-in sphere experiment.
    PaperSphere {
        #[command(flatten)]
        out: OutArgs,
        /// Disable the measurement noise.
        #[arg(long)]
        no_noise: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run { out, .. } | Command::Sweep { out, .. } | Command::PaperSphere { out, .. } => out.quiet,
        Command::Check { quiet, .. } => *quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run { scenario, out, seed, dt } => {
            let mut cfg = ScenarioConfig::from_file(&scenario)?;
            if cfg.name.is_none() {
                cfg.name = scenario.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
            if let Some(seed) = seed {
                if let Some(n) = cfg.noise.as_mut() {
                    n.seed = seed;
                }
            }
            if let Some(dt) = dt {
                cfg.dt = dt;
            }
            run_one(&cfg, &out)
        }
        Command::PaperSphere { out, no_noise, seed } => {
            let mut cfg = ScenarioConfig::sphere_preset();
            if no_noise {
                cfg = cfg.without_noise();
            }
            if let (Some(seed), Some(n)) = (seed, cfg.noise.as_mut()) {
                n.seed = seed;
            }
            run_one(&cfg, &out)
        }
        Command::Sweep { scenario, out, param, values } => {
            let mut cfg = ScenarioConfig::from_file(&scenario)?;
            if cfg.name.is_none() {
                cfg.name = scenario.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
            match (param, values) {
                (Some(p), Some(values)) => {
                    cfg.sweep = Some(SweepConfig {
                        parameter: p.into(),
                        values,
                    })
                }
                (None, None) => {}
                (Some(p), None) => match cfg.sweep.as_mut() {
                    Some(s) => s.parameter = p.into(),
                    None => return Err(GeoError::invalid("--param needs --values")),
                },
                (None, Some(values)) => match cfg.sweep.as_mut() {
                    Some(s) => s.values = values,
                    None => {
                        cfg.sweep = Some(SweepConfig {
                            parameter: SweepParameter::Lambda,
                            values,
                        })
                    }
                },
            }
            sweep(&cfg, &out)
        }
        Command::Check {
            trace,
            lambda,
            curvature,
            quiet,
        } => check(&trace, lambda, curvature, quiet),
    }
}

fn run_dir(base: &Path, cfg: &ScenarioConfig) -> PathBuf {
    base.join(cfg.name.as_deref().unwrap_or("run"))
}

fn run_one(cfg: &ScenarioConfig, out: &OutArgs) -> Result<u8> {
    let result = run_scenario(cfg)?;
    let dir = run_dir(&out.out_dir, cfg);
    let files = write_outputs(&result, cfg, &dir)?;
    if !out.quiet {
        print_run(&result);
        for f in files {
            println!("wrote {}", f.display());
        }
    }
    Ok(result.exit_code() as u8)
}

fn print_run(result: &RunResult) {
    let s = &result.summary;
    println!("scenario      {}", s.name.as_deref().unwrap_or("-"));
    println!("status        {:?}", s.status);
    println!("converged     {}", s.converged);
    println!("D(0)          {:.6e}", s.initial_d_xi);
    println!("D(end)        {:.6e}", s.final_d_xi);
    if let Some(b) = &s.breach {
        println!("breach        t = {} ({}, value {:.6})", b.t, b.bound, b.value);
    }
    if let Some(h) = &s.handoff {
        println!("handoff       t = {} v_hat = {:?}", h.t, h.v_hat);
    }
    print!("{}", result.report.summary_table());
}

fn sweep(cfg: &ScenarioConfig, out: &OutArgs) -> Result<u8> {
    let runs = run_sweep(cfg)?;
    let base = run_dir(&out.out_dir, cfg);
    for (_, r) in &runs {
        let run_cfg = ScenarioConfig {
            name: r.summary.name.clone(),
            ..cfg.clone()
        };
        write_outputs(r, &run_cfg, &run_dir(&base, &run_cfg))?;
    }
    let rows: Vec<_> = runs.iter().map(|(row, _)| row.clone()).collect();
    let path = write_sweep_summary(&rows, &base)?;
    if !out.quiet {
        println!("{:>12} {:>10} {:>10} {:>14} {:>14}", "value", "status", "converged", "D(0)", "D(end)");
        for row in &rows {
            println!(
                "{:>12.6} {:>10} {:>10} {:>14.6e} {:>14.6e}",
                row.value,
                format!("{:?}", row.status),
                row.converged,
                row.initial_d_xi,
                row.final_d_xi
            );
        }
        println!("wrote {}", path.display());
    }
    let diverged = rows.iter().any(|r| r.status == RunStatus::Diverged);
    Ok(if diverged { EXIT_DIVERGED } else { 0 })
}

fn check(trace: &Path, lambda: f64, curvature: f64, quiet: bool) -> Result<u8> {
    let diags = read_trace_diagnostics(trace)?;
    let mut report: BoundReport = check_contraction_bound(&diags, lambda)?;
    match check_speed_bounds(&diags, lambda, curvature) {
        Ok(r) => report.merge(r),
        Err(GeoError::BoundInapplicable(why)) => report.notes.push(format!("speed bounds inapplicable: {why}")),
        Err(e) => return Err(e),
    }
    if curvature > 0.0 && curvature.is_finite() {
        let speed = diags.first().map_or(0.0, |d| d.qdot_norm);
        report.merge(check_trap_region(&diags, lambda, curvature, speed)?);
    }
    if !quiet {
        print!("{}", report.summary_table());
    }
    Ok(if report.all_satisfied() { 0 } else { EXIT_DIVERGED })
}

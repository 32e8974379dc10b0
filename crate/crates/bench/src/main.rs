use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use strom_bench::config::{parse_config_with, Method, Preset, ProblemKind, Propagation, RunConfig};
use strom_bench::convergence::run_convergence;
use strom_bench::pipeline::{build_problem, build_solver, train};
use strom_bench::propagate::{run_mc, run_sg};
use strom_bench::report::{
    emit_results, write_basis_csv, write_manifest, write_moments_csv, write_pce_csv, write_trajectory_csv, Report,
};
use strom_bench::timing::{run_speedup, run_timing};
use strom_bench::BenchError;
use strom_core::fom::fom_solve;
use strom_core::rom::{reconstruct, rom_solve};

#[derive(Parser)]
#[command(name = "strom", version, about = "Reduced-order model experiments for parametrized advection-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file (or a previous run's manifest.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Propagation seed; overrides propagation.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the small desk-scale preset.
    #[arg(long, global = true)]
    desk: bool,
    /// Parameter vector for single solves, comma separated (default: distribution mean).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Option<Vec<f64>>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the full-order model at one parameter.
    Fom,
    /// Collect snapshots and compute the trial basis.
    Train,
    /// Build the reduced model and solve it at one parameter.
    Rom,
    /// Monte Carlo moments at the largest sample count.
    Mc,
    /// Stochastic Galerkin expansion at the largest degree.
    Sg,
    /// Stage timings per grid point.
    BenchTiming,
    /// FOM over ROM time per sample count.
    BenchSpeedup,
    /// Moment errors against the reference.
    BenchConvergence,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fom => "fom",
            Command::Train => "train",
            Command::Rom => "rom",
            Command::Mc => "mc",
            Command::Sg => "sg",
            Command::BenchTiming => "bench-timing",
            Command::BenchSpeedup => "bench-speedup",
            Command::BenchConvergence => "bench-convergence",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, BenchError> {
    let preset = cli.desk.then_some(Preset::Desk);
    let mut cfg = match &cli.config {
        Some(path) => parse_config_with(path, preset)?,
        None => RunConfig::defaults(ProblemKind::OneD, preset.unwrap_or(Preset::Paper)),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(s) = cli.seed {
        match &mut cfg.propagation {
            Propagation::Mc { seed, .. } => *seed = s,
            Propagation::Sg { .. } => {
                return Err(BenchError::Usage("--seed applies to Monte Carlo propagation only".into()))
            }
        }
    }
    Ok(cfg)
}

fn parameter(cli: &Cli, cfg: &RunConfig) -> Result<Vec<f64>, BenchError> {
    let mu = cli.mu.clone().unwrap_or_else(|| cfg.distribution.mean());
    if mu.len() != cfg.distribution.dim() {
        return Err(BenchError::Usage(format!(
            "--mu needs {} values, got {}",
            cfg.distribution.dim(),
            mu.len()
        )));
    }
    Ok(mu)
}

fn run(cli: &Cli) -> Result<(), BenchError> {
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    let command = cli.command.name();
    match cli.command {
        Command::Fom => {
            let ivp = build_problem(&cfg)?;
            let mu = parameter(cli, &cfg)?;
            write_trajectory_csv(&out.join("trajectory.csv"), &fom_solve(&ivp, &mu)?)?;
            write_manifest(&out, &cfg, command, json!({"mu": mu}))?;
        }
        Command::Train => {
            let ivp = build_problem(&cfg)?;
            let trained = train(&cfg, &ivp)?;
            write_basis_csv(&out.join("basis.csv"), &trained.model.basis)?;
            write_manifest(
                &out,
                &cfg,
                command,
                json!({
                    "k": trained.model.k(),
                    "energy_captured": trained.model.basis.energy_captured,
                    "offline_fom_s": trained.offline_fom_s,
                    "find_trial_subspace_s": trained.find_trial_subspace_s,
                }),
            )?;
        }
        Command::Rom => {
            if !cfg.method.is_rom() {
                return Err(BenchError::Usage("`rom` needs a reduced method in method.name".into()));
            }
            let ivp = build_problem(&cfg)?;
            let mu = parameter(cli, &cfg)?;
            let model = train(&cfg, &ivp)?.model;
            let traj = reconstruct(&model, &rom_solve(&model, &mu)?)?;
            let truth = fom_solve(&ivp, &mu)?;
            let err = (&traj.states - &truth.states).norm() / truth.states.norm();
            write_trajectory_csv(&out.join("trajectory.csv"), &traj)?;
            write_manifest(&out, &cfg, command, json!({"mu": mu, "k": model.k(), "relative_error_vs_fom": err}))?;
        }
        Command::Mc => {
            let Propagation::Mc { n_samples, seed, .. } = &cfg.propagation else {
                return Err(BenchError::Usage("`mc` needs propagation.kind = \"mc\"".into()));
            };
            let n = *n_samples.iter().max().expect("validated nonempty");
            let ivp = build_problem(&cfg)?;
            let (solver, _) = build_solver(&cfg, &ivp)?;
            let run = run_mc(&cfg, &solver, n, *seed, cfg.error_field)?;
            write_moments_csv(&out.join("moments.csv"), &run.moments)?;
            write_manifest(&out, &cfg, command, json!({"n_samples": n, "solve_seconds": run.solve_seconds}))?;
        }
        Command::Sg => {
            let Propagation::Sg { degrees, .. } = &cfg.propagation else {
                return Err(BenchError::Usage("`sg` needs propagation.kind = \"sg\"".into()));
            };
            let p = *degrees.iter().max().expect("validated nonempty");
            let ivp = build_problem(&cfg)?;
            let (solver, _) = build_solver(&cfg, &ivp)?;
            let sg = run_sg(&cfg, &ivp, &solver, p)?;
            write_pce_csv(&out.join("pce.csv"), &sg.solution.final_pce()?)?;
            write_moments_csv(&out.join("moments.csv"), &sg.solution.moments(cfg.error_field)?)?;
            write_manifest(&out, &cfg, command, json!({"degree": p, "n_psi": sg.basis.len()}))?;
        }
        Command::BenchTiming => {
            let reports = run_timing(&cfg)?;
            emit_results(Report::Timing(&reports), &cfg, command, &out)?;
        }
        Command::BenchSpeedup => {
            if !cfg.method.is_rom() {
                return Err(BenchError::Usage("`bench-speedup` needs a reduced method in method.name".into()));
            }
            let mut fom_cfg = cfg.clone();
            fom_cfg.method = Method::Fom;
            let report = run_speedup(&fom_cfg, &cfg)?;
            emit_results(Report::Speedup(&report), &cfg, command, &out)?;
        }
        Command::BenchConvergence => {
            let report = run_convergence(&cfg)?;
            emit_results(Report::Errors(&report), &cfg, command, &out)?;
        }
    }
    log::info!("{command}: results in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use annuli::config::RunConfig;
use annuli::runner::{self, SolveKind};
use annuli::Error;

/// Least-energy solutions of semilinear elliptic problems on annuli via
/// dimension reduction: solvers, λ-sweeps, and verification suites.
#[derive(Parser)]
#[command(name = "annuli", version, about)]
struct Cli {
    /// Flat key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Positive,
    Nodal,
}

impl From<KindArg> for SolveKind {
    fn from(k: KindArg) -> SolveKind {
        match k {
            KindArg::Positive => SolveKind::Positive,
            KindArg::Nodal => SolveKind::Nodal,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the change-of-variables and operator identity suites.
    VerifyReduction {
        /// Test hook: inject a corrupted transform (the suite must fail).
        #[arg(long, hide = true)]
        corrupt_transform: bool,
    },
    /// Compute one least-energy solution and write its artifacts.
    Solve {
        #[arg(long, value_enum, default_value = "positive")]
        kind: KindArg,
    },
    /// Run the full λ-sweep with per-λ diagnostics and trend flags.
    Sweep,
    /// Shoot the radial ground-state profile and report its energy.
    GroundState,
    /// Linearized spectrum, Morse index, and Φᵏ quadratic forms at a solution.
    Spectrum {
        #[arg(long, value_enum, default_value = "positive")]
        kind: KindArg,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let mut cfg = RunConfig::default();
            cfg.apply_env()?;
            cfg
        }
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("usage: annuli [--config PATH] [--out DIR] [--seed N] [--workers N] <command>");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<bool, Error> {
    match &cli.command {
        Command::VerifyReduction { corrupt_transform } => {
            let report = runner::cmd_verify_reduction(cfg, *corrupt_transform)?;
            for c in &report.checks {
                println!(
                    "{}: {} — {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(report.all_passed())
        }
        Command::Solve { kind } => {
            let summary = runner::cmd_solve(cfg, (*kind).into())?;
            println!(
                "solve {:?}: lambda={} converged={} iters={} residual={:.3e} energy={:.8} morse={:?}",
                summary.kind,
                summary.lambda,
                summary.converged,
                summary.iterations,
                summary.residual_norm,
                summary.energy.total,
                summary.morse_index
            );
            Ok(summary.converged)
        }
        Command::Sweep => {
            let artifact = runner::cmd_sweep(cfg)?;
            for row in &artifact.rows {
                println!(
                    "lambda={}: status={} peak_gap={:.5} sqrt_lambda_d={:.4} energy_ratio={:.4} mu1={:.2} phi_neg={}",
                    row.lambda,
                    row.status,
                    row.peak_gap,
                    row.peak.scaled_distance,
                    row.energy_ratio,
                    row.mu1,
                    row.phi_negative_count
                );
            }
            match &artifact.summary.flags {
                Some(flags) => {
                    println!("trend flags: {flags:?}");
                    Ok(artifact.summary.all_rows_ok && flags.all_pass())
                }
                None => {
                    println!("trend flags: not applicable (fewer than 3 sweep points)");
                    Ok(artifact.summary.all_rows_ok)
                }
            }
        }
        Command::GroundState => {
            let s = runner::cmd_ground_state(cfg)?;
            println!(
                "ground state: N={} p={} z0={:.8} I={:.8} sqrt(2R1)I={:.8}",
                s.n_dim, s.p, s.z0, s.energy, s.limit_energy_inner
            );
            Ok(true)
        }
        Command::Spectrum { kind } => {
            let s = runner::cmd_spectrum(cfg, (*kind).into())?;
            println!(
                "spectrum {:?}: lambda={} mu1={:.6} (bound {:.3}) morse={:?} negatives={} phi_neg_count={}",
                s.kind, s.lambda, s.mu1, s.mu1_bound, s.morse_index, s.count_negative, s.phi_negative_count
            );
            println!("eigenvalues: {:?}", s.eigenvalues);
            Ok(true)
        }
    }
}

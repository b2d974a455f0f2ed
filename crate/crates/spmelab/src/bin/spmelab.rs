//! Thin command-line front end: one subcommand per experiment kind.
//!
//! Exit codes: 0 pass, 2 bound violation, 3 solver failure, 4 config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spmelab::harness::{
    self, default_config, exit_code, load_config, ExperimentConfig, ExperimentKind, Verdict,
};
use spmelab::Error;

#[derive(Parser)]
#[command(
    name = "spmelab",
    about = "Degenerate-diffusion laboratory: simulate rough-signal-driven porous-medium equations and verify their propagation bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML experiment configuration (built-in defaults when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one trajectory and serialize it.
    Simulate(CommonArgs),
    /// Zero data in a ball with a constant boundary level; verify every
    /// hole-filling bound against the measured vanish radius.
    HoleFill(CommonArgs),
    /// Compactly supported data under homogeneous Dirichlet conditions;
    /// verify both finite-speed containment claims.
    Propagation(CommonArgs),
    /// Bump-grid entropy ladder with the exponent fit.
    Entropy(CommonArgs),
    /// Evaluate bound records only; no solve.
    BoundsOnly(CommonArgs),
    /// Run the release-gate smoke suites.
    Validate(CommonArgs),
}

fn resolve(kind: ExperimentKind, args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => default_config(kind),
    };
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config is for '{}' but the subcommand is '{}'",
            cfg.kind.name(),
            kind.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.noise.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass | Verdict::Inconclusive => exit_code::PASS,
        Verdict::Fail => exit_code::BOUND_VIOLATION,
    }
}

fn run(kind: ExperimentKind, args: &CommonArgs) -> i32 {
    let cfg = match resolve(kind, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit_code::CONFIG_ERROR;
        }
    };
    let out_dir = PathBuf::from(&cfg.output.dir);
    let outcome: Result<i32, Error> = (|| {
        Ok(match kind {
            ExperimentKind::Simulate => {
                let rep = harness::run_simulate(&cfg, Some(&out_dir))?;
                println!(
                    "simulate: {} snapshots, sup {:.4e}, report in {}",
                    rep.snapshots,
                    rep.sup_norm,
                    out_dir.display()
                );
                verdict_code(rep.verdict)
            }
            ExperimentKind::HoleFill => {
                let rep = harness::run_hole_fill(&cfg, Some(&out_dir))?;
                for s in &rep.seeds {
                    println!(
                        "hole-fill seed {}: {:?} ({} bound checks)",
                        s.seed,
                        s.verdict,
                        s.checks.len()
                    );
                }
                verdict_code(rep.verdict)
            }
            ExperimentKind::Propagation => {
                let rep = harness::run_propagation(&cfg, Some(&out_dir))?;
                for s in &rep.seeds {
                    println!(
                        "propagation seed {}: {:?} ({} horizon checks, {} radius checks)",
                        s.seed,
                        s.verdict,
                        s.horizon_checks.len(),
                        s.radius_check.checks
                    );
                }
                verdict_code(rep.verdict)
            }
            ExperimentKind::Entropy => {
                let rep = harness::run_entropy(&cfg, Some(&out_dir))?;
                for c in &rep.cases {
                    println!(
                        "entropy case {}: fitted slope {:.4} vs theoretical {:.4}",
                        c.case, c.fit.slope, c.fit.theoretical
                    );
                }
                verdict_code(rep.verdict)
            }
            ExperimentKind::BoundsOnly => {
                let records = harness::run_bounds_only(&cfg, Some(&out_dir))?;
                for r in &records {
                    println!(
                        "bound {:?}: T* = {:.6e}{}",
                        r.kind,
                        r.t_star,
                        if r.clamped { " (clamped)" } else { "" }
                    );
                }
                exit_code::PASS
            }
            ExperimentKind::Validate => {
                let rep = harness::run_validate(&cfg, Some(&out_dir))?;
                for s in &rep.suites {
                    println!(
                        "suite {:<28} {}  {}",
                        s.name,
                        if s.pass { "pass" } else { "FAIL" },
                        s.detail
                    );
                }
                verdict_code(rep.verdict)
            }
        })
    })();
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::Parse { .. } => {
                    exit_code::CONFIG_ERROR
                }
                Error::SolverDivergence { .. } | Error::NumericalBlowup { .. } => {
                    exit_code::SOLVER_FAILURE
                }
                _ => exit_code::SOLVER_FAILURE,
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Simulate(a) => run(ExperimentKind::Simulate, a),
        Command::HoleFill(a) => run(ExperimentKind::HoleFill, a),
        Command::Propagation(a) => run(ExperimentKind::Propagation, a),
        Command::Entropy(a) => run(ExperimentKind::Entropy, a),
        Command::BoundsOnly(a) => run(ExperimentKind::BoundsOnly, a),
        Command::Validate(a) => run(ExperimentKind::Validate, a),
    };
    ExitCode::from(code as u8)
}

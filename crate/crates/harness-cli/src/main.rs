use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pme_cli::config::{self, ExperimentConfig};
use pme_cli::experiments::{self, MeshGenShape};
use pme_cli::HarnessError;

/// Moving-mesh finite element experiments for the porous medium equation.
#[derive(Parser)]
#[command(name = "pme", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Abort on assumption violations instead of flagging and continuing.
    #[arg(long)]
    strict: bool,
    /// Gauss quadrature order (overrides `[scheme] quad_order`).
    #[arg(long = "quad-order")]
    quad_order: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment, writing diag.csv, summary.json and snapshots.
    Run(CommonArgs),
    /// Alias of `run`; the waiting-time estimate is part of summary.json.
    WaitingTime(CommonArgs),
    /// Mesh refinement study against the exact Barenblatt profile.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated refinement levels (1D: cells; 2D: disk rings).
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// Total-mass drift table over refinement levels (1D, m = 2).
    MassTable {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// Write a mesh file.
    MeshGen {
        #[command(subcommand)]
        shape: MeshGenCmd,
    },
}

#[derive(Subcommand)]
enum MeshGenCmd {
    /// Concentric-ring disk triangulation.
    Disk {
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        rings: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Structured right-triangle split of a rectangle.
    Square {
        #[arg(long, default_value_t = -1.5)]
        x0: f64,
        #[arg(long, default_value_t = 1.5)]
        x1: f64,
        #[arg(long, default_value_t = -1.5)]
        y0: f64,
        #[arg(long, default_value_t = 1.5)]
        y1: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mesh fitted to the horseshoe support (even radial divisions).
    Horseshoe {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| {
        HarnessError::Config(config::ConfigError::invalid(format!(
            "cannot read {}: {e}",
            common.config.display()
        )))
    })?;
    let mut cfg = config::parse_config(&text)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(q) = common.quad_order {
        cfg.scheme.quad_order = q;
    }
    config::validate(&cfg)?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Run(common) | Cmd::WaitingTime(common) => {
            let cfg = load_config(&common)?;
            let summary = experiments::cmd_run(&cfg, common.strict)?;
            println!(
                "run finished: t = {}, mass drift = {:.3e}, waiting time = {}",
                summary.final_t,
                summary.mass_drift,
                summary
                    .waiting_time
                    .map(|t| format!("{t:.6}"))
                    .unwrap_or_else(|| "none".into()),
            );
            if let Some(stop) = &summary.stopped {
                println!("stopped early: {stop}");
            }
            println!("artifacts in {}", cfg.output.dir.display());
            Ok(())
        }
        Cmd::Converge { common, levels } => {
            let cfg = load_config(&common)?;
            let summary = experiments::cmd_converge(&cfg, &levels, common.strict)?;
            println!("level\tN\ttau\terr_l2\torder");
            for l in &summary.levels {
                println!(
                    "{}\t{}\t{:.3e}\t{:.6e}\t{}",
                    l.level,
                    l.n,
                    l.tau,
                    l.err_l2,
                    l.order.map(|o| format!("{o:.4}")).unwrap_or_else(|| "-".into()),
                );
            }
            println!("artifacts in {}", cfg.output.dir.display());
            Ok(())
        }
        Cmd::MassTable { common, levels } => {
            let cfg = load_config(&common)?;
            let summary = experiments::cmd_mass_table(&cfg, &levels, common.strict)?;
            println!("N\ttau\tmass_error\torder");
            for l in &summary.levels {
                println!(
                    "{}\t{:.3e}\t{:.6e}\t{}",
                    l.n,
                    l.tau,
                    l.mass_error,
                    l.order.map(|o| format!("{o:.4}")).unwrap_or_else(|| "-".into()),
                );
            }
            println!("artifacts in {}", cfg.output.dir.display());
            Ok(())
        }
        Cmd::MeshGen { shape } => {
            let (shape, out) = match shape {
                MeshGenCmd::Disk { radius, rings, out } => {
                    (MeshGenShape::Disk { radius, rings }, out)
                }
                MeshGenCmd::Square { x0, x1, y0, y1, n, out } => {
                    (MeshGenShape::Square { x0, x1, y0, y1, n }, out)
                }
                MeshGenCmd::Horseshoe { n, out } => (MeshGenShape::Horseshoe { n }, out),
            };
            let (vertices, cells) = experiments::cmd_mesh_gen(&shape, &out)?;
            println!("wrote {} ({vertices} vertices, {cells} cells)", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

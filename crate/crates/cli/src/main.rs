//! Command-line driver: run simulations, generate meshes, query the CFL
//! bound, audit energy logs, and execute the built-in rupture scenario.

use clap::{Parser, Subcommand};
use dynfrac_core::energy::{parse_csv, recheck_csv};
use dynfrac_core::io::config::{parse_config, MeshSource};
use dynfrac_core::mesh::{generate_rect_mesh, write_mesh_string};
use dynfrac_core::schemes::cfl_timestep;
use dynfrac_core::sim::{build_simulation, evaluate_fig1, fig1_config_text, run_simulation};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dynfrac", about = "2-D dynamic phase-field fracture simulations", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a config file.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a rectangle mesh and write it in the ASCII mesh format.
    MeshGen {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long)]
        lx: f64,
        #[arg(long)]
        ly: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the CFL time-step bound for a config.
    Cfl { config: PathBuf },
    /// Recompute the balance residual of an energy CSV; nonzero exit above
    /// the 1e-8 threshold.
    CheckEnergy { csv: PathBuf },
    /// Run a built-in verification scenario.
    Scenario {
        /// Scenario name (currently: fig1).
        name: String,
        /// Output directory.
        #[arg(long, default_value = "fig1_out")]
        out: PathBuf,
    },
}

const ENERGY_CHECK_THRESHOLD: f64 = 1e-8;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> dynfrac_core::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = parse_config(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let built = build_simulation(&cfg, base)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&built.output.dir));
            let summary = run_simulation(&built, Some(&out_dir))?;
            println!(
                "{} steps to t = {:.6}; {} snapshots in {}",
                summary.n_steps,
                summary.final_state.t,
                summary.snapshots_written,
                out_dir.display()
            );
            println!("final energy-balance residual: {:.3e}", summary.max_residual);
            Ok(ExitCode::SUCCESS)
        }
        Command::MeshGen { nx, ny, lx, ly, out } => {
            let mesh = generate_rect_mesh(nx, ny, lx, ly)?;
            std::fs::write(&out, write_mesh_string(&mesh))?;
            println!(
                "wrote {} nodes, {} triangles to {}",
                mesh.n_nodes(),
                mesh.n_triangles(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Cfl { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = parse_config(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let built = build_simulation(&cfg, base)?;
            let bound = cfl_timestep(&built.mesh, &built.law);
            let safety = built.scheme_cfg.cfl_safety;
            println!("CFL bound: {bound:.6e} s");
            println!("recommended tau = {safety} x bound = {:.6e} s", safety * bound);
            println!("configured tau: {:.6e} s", built.scheme_cfg.tau);
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckEnergy { csv } => {
            let text = std::fs::read_to_string(&csv)?;
            let rows = parse_csv(&text)?;
            let worst = recheck_csv(&rows);
            println!("{} rows, worst balance residual {worst:.3e}", rows.len());
            if worst > ENERGY_CHECK_THRESHOLD {
                eprintln!("balance residual exceeds {ENERGY_CHECK_THRESHOLD:.0e}");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario { name, out } => {
            if name != "fig1" {
                eprintln!("unknown scenario `{name}` (available: fig1)");
                return Ok(ExitCode::FAILURE);
            }
            let cfg = parse_config(fig1_config_text())?;
            let built = build_simulation(&cfg, Path::new("."))?;
            println!(
                "running fig1: {}x{} cells, tau = {}, {} steps",
                match cfg.mesh {
                    MeshSource::Rect { nx, .. } => nx,
                    _ => 0,
                },
                match cfg.mesh {
                    MeshSource::Rect { ny, .. } => ny,
                    _ => 0,
                },
                built.scheme_cfg.tau,
                (built.t_end / built.scheme_cfg.tau).round() as usize
            );
            let summary = run_simulation(&built, Some(&out))?;
            let lx = match cfg.mesh {
                MeshSource::Rect { lx, .. } => lx,
                _ => 1.0,
            };
            let report = evaluate_fig1(&built.mesh, &summary, built.law.eps_pf, lx);
            for (msg, ok) in &report.checks {
                println!("[{}] {msg}", if *ok { "PASS" } else { "FAIL" });
            }
            if report.passed() {
                println!("scenario fig1: all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("scenario fig1: checks failed");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

use clap::{Parser, Subcommand};
use dtsim::netsim::LinkModel;
use dtsim::perfmodel::{cycles_from_rate, fit_cost_model};
use dtsim_cli::bathymetry::{to_model_grid, BathymetryRaster};
use dtsim_cli::config::{KernelKind, Overrides, ScenarioConfig};
use dtsim_cli::metrics::{block_bounds, RunShape};
use dtsim_cli::scenario::{run_scenario, stage_cost};
use dtsim_cli::snapshot::Snapshot;
use dtsim_cli::sweep::{run_sweep, SweepConfig};
use dtsim_cli::CliError;
use serde::Deserialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dtsim", version, about = "Stencil runs on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        /// Scenario TOML file.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the Cartesian product of the `[axes]` table of a sweep file.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Results directory; completed cells are skipped.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit the cycle polynomial to a CSV with columns `n,steps_per_second`.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = dtsim::perfmodel::DEFAULT_CLOCK_HZ)]
        clock_hz: f64,
        #[arg(long, default_value_t = 9.0)]
        flops_per_point: f64,
    },
    /// Print the rate bounds of a worker block over a list of sides.
    Bounds {
        #[arg(long, value_enum, default_value_t = KernelKind::Heat5)]
        kernel: KernelKind,
        #[arg(short, long, value_delimiter = ',', default_values_t = [2, 4, 8, 16, 32, 64])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1e-6)]
        latency: f64,
        #[arg(long, default_value_t = 50e9)]
        bandwidth: f64,
        #[arg(long, default_value_t = dtsim::perfmodel::DEFAULT_CLOCK_HZ)]
        clock_hz: f64,
    },
    /// Area-average a raster onto the global model grid and write `b` and
    /// the land mask as a snapshot (`<output>.f32` plus `<output>.txt`).
    Resample {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long, default_value_t = 0.0)]
        sea_level: f64,
    },
}

#[derive(Deserialize)]
struct RateRow {
    n: f64,
    steps_per_second: f64,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = ScenarioConfig::resolve(config.as_deref(), &overrides)?;
            let r = run_scenario(&cfg)?;
            let s = &r.summary;
            println!(
                "{} {} {}x{} n={} steps={}: {:.6e} steps/s (bound {:.6e}, {}), {:.6e} flop/s",
                s.kernel,
                s.method,
                s.workers_x,
                s.workers_y,
                s.n,
                s.steps,
                s.steps_per_second,
                s.predicted_steps_per_second,
                s.limiter,
                s.flops_per_second
            );
            if let Some(h) = r.hump {
                println!(
                    "hump: radius {:.0} m, volume {:.4e} m^3 (grid {:.4e}), energy {:.4e} J",
                    h.radius_m, h.analytic_volume, h.grid_volume, h.analytic_energy
                );
            }
            if let Some(d) = r.mass_drift {
                println!("relative mass drift {d:.3e}");
            }
            println!("{} snapshots in {}", r.snapshots.len(), cfg.output.dir.display());
        }
        Command::Sweep { config, out } => {
            let sweep = SweepConfig::load(&config)?;
            let (rows, ran) = run_sweep(&sweep, &out)?;
            println!("{} cells ({} run, {} resumed); results in {}", rows.len(), ran, rows.len() - ran, out.join("results.csv").display());
        }
        Command::Fit {
            input,
            clock_hz,
            flops_per_point,
        } => {
            let mut r = csv::Reader::from_path(&input).map_err(|e| CliError::format(&input, e.to_string()))?;
            let mut samples = Vec::new();
            for row in r.deserialize::<RateRow>() {
                let row = row.map_err(|e| CliError::format(&input, e.to_string()))?;
                samples.push((row.n, cycles_from_rate(row.steps_per_second, clock_hz)));
            }
            let fit = fit_cost_model(&samples, clock_hz, flops_per_point).map_err(|e| CliError::Config(e.to_string()))?;
            let m = fit.model;
            println!("a0 = {:.6}\na1 = {:.6}\na2 = {:.6}", m.a0, m.a1, m.a2);
            println!("rms residual = {:.6e} cycles\nasymptotic utilization = {:.4}", fit.rms_residual, m.asymptotic_utilization());
        }
        Command::Bounds {
            kernel,
            n,
            latency,
            bandwidth,
            clock_hz,
        } => {
            let link = LinkModel::new(latency, bandwidth).map_err(|e| CliError::Config(e.to_string()))?;
            let cost = stage_cost(kernel, clock_hz);
            let swe = kernel == KernelKind::Swe;
            println!("n,compute_rate,latency_rate,bandwidth_rate,effective,limiter");
            for side in n {
                if side < 2 * kernel.radius() {
                    return Err(CliError::Config(format!("n = {side} is below 2r = {}", 2 * kernel.radius())));
                }
                let shape = RunShape {
                    n: side,
                    workers: 1,
                    radius: kernel.radius(),
                    stages: if swe { 2 } else { 1 },
                    fields: if swe { dtsim::kernels::swe::FIELDS } else { 1 },
                    bytes_per_value: 4,
                    flops_per_point: cost.flops_per_point,
                };
                let b = block_bounds(&shape, side, &cost, &link);
                println!(
                    "{side},{:e},{:e},{:e},{:e},{}",
                    b.compute_rate,
                    b.latency_rate,
                    b.bandwidth_rate,
                    b.effective,
                    b.limiter()
                );
            }
        }
        Command::Resample {
            input,
            output,
            nx,
            ny,
            sea_level,
        } => {
            let raster = BathymetryRaster::load(&input)?;
            let m = to_model_grid(&raster, nx, ny, sea_level).map_err(|e| CliError::format(&input, e))?;
            let lat = dtsim::kernels::swe::MAX_LATITUDE_DEG;
            let snap = Snapshot {
                nx,
                ny,
                step: 0,
                time: 0.0,
                bounds: [0.0, -lat, 360.0, lat],
                fields: vec![
                    ("b".into(), m.b),
                    ("land".into(), m.land.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()),
                ],
            };
            let dir = output.parent().map(PathBuf::from).unwrap_or_default();
            let stem = output
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CliError::Config(format!("bad output path {}", output.display())))?;
            let path = snap.write(&dir, stem, 0)?;
            println!("wrote {nx} x {ny} model grid to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Scenario configuration.
//!
//! A scenario is a TOML file whose keys all have defaults; command-line
//! flags are applied on top through [`Overrides`], so the precedence is
//! flag > file > default.

use crate::CliError;
use dtsim::engine::Method;
use dtsim::netsim::LinkModel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Highest gravity-wave Courant number accepted at load.
pub const MAX_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Heat5,
    Heat9,
    Swe,
}

impl KernelKind {
    pub fn radius(self) -> usize {
        1
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Heat5 => "heat5",
            KernelKind::Heat9 => "heat9",
            KernelKind::Swe => "swe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Translation,
    Static,
    Ghost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Iterations between ghost exchanges.
    pub steps_between: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            kind: MethodKind::Translation,
            steps_between: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub workers_x: usize,
    pub workers_y: usize,
    /// Points per worker side.
    pub n: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            workers_x: 2,
            workers_y: 2,
            n: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Seconds.
    pub latency: f64,
    /// Bytes per second; `inf` for no serialization cost.
    pub bandwidth: f64,
    /// Vertical links; the horizontal values when absent.
    pub vertical_latency: Option<f64>,
    pub vertical_bandwidth: Option<f64>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            latency: 1e-6,
            bandwidth: 50e9,
            vertical_latency: None,
            vertical_bandwidth: None,
        }
    }
}

impl LinkConfig {
    pub fn horizontal(&self) -> Result<LinkModel, CliError> {
        LinkModel::new(self.latency, self.bandwidth).map_err(|e| CliError::Config(format!("link: {e}")))
    }

    pub fn vertical(&self) -> Result<LinkModel, CliError> {
        LinkModel::new(
            self.vertical_latency.unwrap_or(self.latency),
            self.vertical_bandwidth.unwrap_or(self.bandwidth),
        )
        .map_err(|e| CliError::Config(format!("vertical link: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Full steps between snapshots; 0 writes only the final state.
    pub snapshot_every: usize,
    /// Iterations between telemetry samples.
    pub telemetry_every: usize,
    /// Fields written to snapshots (by name); empty for all.
    pub fields: Vec<String>,
    /// Also write a CSV next to each snapshot when the grid has at most
    /// this many points.
    pub csv_max_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
            telemetry_every: 1,
            fields: Vec::new(),
            csv_max_points: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathymetryConfig {
    /// ESRI ASCII grid (`.asc`) or flat binary raster (`.bin`). Absent:
    /// the seeded synthetic Earth-like raster.
    pub path: Option<PathBuf>,
    pub synthetic_cols: usize,
    pub synthetic_rows: usize,
    /// Elevation of the reference sphere (m).
    pub sea_level: f64,
}

impl Default for BathymetryConfig {
    fn default() -> Self {
        Self {
            path: None,
            synthetic_cols: 1024,
            synthetic_rows: 512,
            sea_level: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumpConfig {
    pub enabled: bool,
    pub lat: f64,
    pub lon: f64,
    /// m^2.
    pub area: f64,
    /// m.
    pub peak: f64,
}

impl Default for HumpConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lat: 0.0,
            lon: 200.0,
            area: 3.0e10,
            peak: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelKind,
    /// Full time steps (two stages each for SWE).
    pub steps: usize,
    /// SWE time step (s).
    pub dt: f64,
    /// Heat diffusion number.
    pub diffusivity: f64,
    /// Seed of the synthetic initial conditions and bathymetry.
    pub seed: u64,
    /// Node clock for the cost model (Hz).
    pub clock_hz: f64,
    pub method: MethodConfig,
    pub geometry: GeometryConfig,
    pub link: LinkConfig,
    pub output: OutputConfig,
    pub bathymetry: BathymetryConfig,
    pub hump: HumpConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Heat5,
            steps: 100,
            dt: 60.0,
            diffusivity: 0.2,
            seed: 1,
            clock_hz: dtsim::perfmodel::DEFAULT_CLOCK_HZ,
            method: MethodConfig::default(),
            geometry: GeometryConfig::default(),
            link: LinkConfig::default(),
            output: OutputConfig::default(),
            bathymetry: BathymetryConfig::default(),
            hump: HumpConfig::default(),
        }
    }
}

/// Flag values; `None` leaves the file or default value in place.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,
    #[arg(long, value_enum)]
    pub method: Option<MethodKind>,
    /// Iterations between ghost exchanges.
    #[arg(long)]
    pub ghost_steps: Option<usize>,
    #[arg(long)]
    pub workers_x: Option<usize>,
    #[arg(long)]
    pub workers_y: Option<usize>,
    /// Points per worker side.
    #[arg(short = 'n', long)]
    pub n: Option<usize>,
    /// Link latency (s).
    #[arg(long)]
    pub latency: Option<f64>,
    /// Link bandwidth (bytes/s).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub telemetry_every: Option<usize>,
    #[arg(long)]
    pub bathymetry: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.kernel, self.kernel);
        set!(o.method, self.method.kind);
        set!(o.ghost_steps, self.method.steps_between);
        set!(o.workers_x, self.geometry.workers_x);
        set!(o.workers_y, self.geometry.workers_y);
        set!(o.n, self.geometry.n);
        set!(o.latency, self.link.latency);
        set!(o.bandwidth, self.link.bandwidth);
        set!(o.steps, self.steps);
        set!(o.dt, self.dt);
        set!(o.seed, self.seed);
        set!(o.snapshot_every, self.output.snapshot_every);
        set!(o.telemetry_every, self.output.telemetry_every);
        set!(o.out, self.output.dir);
        if o.bathymetry.is_some() {
            self.bathymetry.path = o.bathymetry.clone();
        }
    }

    /// Defaults, then the file (if any), then the flags.
    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn engine_method(&self) -> Method {
        match self.method.kind {
            MethodKind::Translation => Method::translation(),
            MethodKind::Static => Method::Static,
            MethodKind::Ghost => Method::Ghost {
                steps_between: self.method.steps_between,
            },
        }
    }

    /// Engine iterations: SWE runs two stages per step.
    pub fn iterations(&self) -> usize {
        match self.kernel {
            KernelKind::Swe => 2 * self.steps,
            _ => self.steps,
        }
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.geometry.workers_x * self.geometry.n, self.geometry.workers_y * self.geometry.n)
    }

    /// Checks that need no data; the CFL check runs once the bathymetry is
    /// known.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let g = &self.geometry;
        if g.workers_x == 0 || g.workers_y == 0 {
            return bad("worker counts must be at least 1".into());
        }
        let r = self.kernel.radius();
        if g.n < 2 * r {
            return bad(format!(
                "n = {} is smaller than the communication width 2r = {} of kernel {}",
                g.n,
                2 * r,
                self.kernel.name()
            ));
        }
        if self.method.kind == MethodKind::Ghost {
            let p = self.method.steps_between;
            if p == 0 {
                return bad("ghost steps_between must be at least 1".into());
            }
            if r * p > g.n {
                return bad(format!("ghost width r*p = {} exceeds n = {}", r * p, g.n));
            }
        }
        if self.output.telemetry_every == 0 {
            return bad("telemetry_every must be at least 1".into());
        }
        self.link.horizontal()?;
        self.link.vertical()?;
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return bad(format!("clock_hz must be positive, got {}", self.clock_hz));
        }
        match self.kernel {
            KernelKind::Swe => {
                if !(self.dt.is_finite() && self.dt > 0.0) {
                    return bad(format!("dt must be positive, got {}", self.dt));
                }
                let h = &self.hump;
                if h.enabled && !(h.area > 0.0 && h.peak >= 0.0 && h.area.is_finite() && h.peak.is_finite()) {
                    return bad("hump area must be positive and peak non-negative".into());
                }
                if let Some(p) = &self.bathymetry.path {
                    if !p.is_file() {
                        return bad(format!("bathymetry file {} does not exist", p.display()));
                    }
                }
            }
            _ => {
                if !(self.diffusivity.is_finite() && self.diffusivity > 0.0 && self.diffusivity <= 0.25) {
                    return bad(format!("diffusivity must lie in (0, 0.25], got {}", self.diffusivity));
                }
            }
        }
        Ok(())
    }
}

/// Reject an SWE time step above [`MAX_CFL`] for the deepest water.
pub fn check_cfl(params: &dtsim::kernels::swe::SweParams, max_depth: f64) -> Result<f64, CliError> {
    let cfl = params.cfl(max_depth);
    if cfl > MAX_CFL {
        let limit = params.dt * MAX_CFL / cfl;
        return Err(CliError::Config(format!(
            "CFL number {cfl:.3} exceeds {MAX_CFL} for depth {max_depth:.0} m; use dt <= {limit:.3} s"
        )));
    }
    Ok(cfl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_file_default() {
        let file = "steps = 7\n[geometry]\nn = 16\nworkers_x = 3\n";
        let mut cfg = ScenarioConfig::from_toml(file).unwrap();
        assert_eq!(cfg.steps, 7);
        assert_eq!(cfg.geometry.n, 16);
        assert_eq!(cfg.geometry.workers_y, GeometryConfig::default().workers_y);
        cfg.apply(&Overrides {
            n: Some(8),
            ..Default::default()
        });
        assert_eq!(cfg.geometry.n, 8);
        assert_eq!(cfg.geometry.workers_x, 3);
        assert_eq!(cfg.steps, 7);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ScenarioConfig {
            kernel: KernelKind::Swe,
            ..Default::default()
        };
        cfg.method.kind = MethodKind::Ghost;
        cfg.link.bandwidth = f64::INFINITY;
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_block_narrower_than_halo() {
        let mut cfg = ScenarioConfig::default();
        cfg.geometry.n = 1;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("2r = 2"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ScenarioConfig::from_toml("stepz = 3").is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.link.latency = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig {
            kernel: KernelKind::Swe,
            ..Default::default()
        };
        cfg.bathymetry.path = Some("/nonexistent/raster.asc".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cfl_gate() {
        let p = dtsim::kernels::swe::SweParams::planar(4, 1000.0, 10.0);
        // c = sqrt(9.8 * 1000) ~ 99 m/s -> cfl ~ 0.99
        assert!(check_cfl(&p, 1000.0).is_err());
        assert!(check_cfl(&p, 100.0).is_ok());
    }
}

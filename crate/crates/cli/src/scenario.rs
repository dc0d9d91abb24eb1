//! Build initial conditions from a config and drive the engine, writing
//! snapshots and metrics as the run progresses.

use crate::bathymetry::{to_model_grid, BathymetryRaster};
use crate::config::{check_cfl, KernelKind, ScenarioConfig};
use crate::hump::{place_impact_hump, HumpReport, ImpactHump};
use crate::metrics::{bound_curve, emit_metrics, summarize, write_rows, RunShape, Summary, SummaryInput};
use crate::snapshot::Snapshot;
use crate::CliError;
use dtsim::engine::{run, RunConfig, RunOutput};
use dtsim::grid::TorusGeometry;
use dtsim::kernels::linear::LinearStencilKernel;
use dtsim::kernels::swe::{self, SweKernel, SweParams, SweState};
use dtsim::kernels::Kernel;
use dtsim::netsim::{LinkModel, Sample};
use dtsim::perfmodel::CostModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Initial state and kernel of a scenario, before any stepping.
pub enum Prepared {
    Heat {
        kernel: LinearStencilKernel,
        field: Vec<f32>,
    },
    Swe {
        kernel: Box<SweKernel>,
        state: SweState,
        hump: Option<HumpReport>,
        cfl: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub summary: Summary,
    pub hump: Option<HumpReport>,
    pub cfl: Option<f64>,
    /// `(final - initial) / initial` water mass, SWE only.
    pub mass_drift: Option<f64>,
    pub snapshots: Vec<PathBuf>,
    pub fields: Vec<Vec<f32>>,
}

/// Uniform `[0, 1)` field from the scenario seed.
pub fn seeded_field(len: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f32>()).collect()
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared, CliError> {
    let (gx, gy) = cfg.extent();
    match cfg.kernel {
        KernelKind::Heat5 | KernelKind::Heat9 => {
            let a = cfg.diffusivity as f32;
            let kernel = if cfg.kernel == KernelKind::Heat5 {
                LinearStencilKernel::heat5(a)
            } else {
                LinearStencilKernel::heat9(a)
            };
            Ok(Prepared::Heat {
                kernel,
                field: seeded_field(gx * gy, cfg.seed),
            })
        }
        KernelKind::Swe => {
            let b = &cfg.bathymetry;
            let raster = match &b.path {
                Some(p) => BathymetryRaster::load(p)?,
                None => BathymetryRaster::synthetic(b.synthetic_cols, b.synthetic_rows, cfg.seed),
            };
            let src = b.path.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
            let model = to_model_grid(&raster, gx, gy, b.sea_level).map_err(|m| CliError::format(&src, m))?;
            let params = SweParams::global(gx, gy, cfg.dt);
            let mut state = SweState::at_rest(gx, gy, &model.b, &model.land, 0.0);
            state.close_clamp_rows();
            let hump = if cfg.hump.enabled {
                let h = ImpactHump {
                    lat: cfg.hump.lat,
                    lon: cfg.hump.lon,
                    area: cfg.hump.area,
                    peak: cfg.hump.peak,
                };
                Some(place_impact_hump(&mut state, &params, &h)?)
            } else {
                None
            };
            let cfl = check_cfl(&params, state.max_depth())?;
            Ok(Prepared::Swe {
                kernel: Box::new(SweKernel::new(params)?),
                state,
                hump,
                cfl,
            })
        }
    }
}

/// Cycle cost of one engine iteration for `kind`.
pub fn stage_cost(kind: KernelKind, clock_hz: f64) -> CostModel {
    let base = match kind {
        KernelKind::Heat5 => CostModel::heat5(),
        KernelKind::Heat9 => CostModel::heat9(),
        KernelKind::Swe => CostModel::swe().scaled(0.5),
    };
    CostModel { clock_hz, ..base }
}

/// Append `next` to `acc` as if the two runs were one.
fn merge(acc: &mut Option<RunOutput>, next: RunOutput) {
    let Some(a) = acc else {
        *acc = Some(next);
        return;
    };
    let (di, dt) = (a.iterations as u64, a.final_time);
    for (t, n) in a.telemetry.iter_mut().zip(next.telemetry) {
        t.extend(n.into_iter().filter(|s| s.iteration > 0).map(|s| Sample {
            iteration: s.iteration + di,
            time: s.time + dt,
        }));
    }
    for (l, n) in a.links.iter_mut().zip(&next.links) {
        l.sent_messages += n.sent_messages;
        l.sent_bytes += n.sent_bytes;
        l.delivered_messages += n.delivered_messages;
        l.delivered_bytes += n.delivered_bytes;
    }
    a.iterations += next.iterations;
    a.final_time += next.final_time;
    a.max_skew = a.max_skew.max(next.max_skew);
    a.fields = next.fields;
}

struct Driver<'a, K: Kernel> {
    cfg: &'a ScenarioConfig,
    kernel: &'a K,
    geometry: TorusGeometry,
    run_cfg: RunConfig,
    names: Vec<String>,
    bounds: [f64; 4],
    snapshots: Vec<PathBuf>,
}

impl<K: Kernel> Driver<'_, K> {
    fn snapshot(&mut self, step: usize, fields: &[Vec<f32>]) -> Result<(), CliError> {
        let (nx, ny) = self.cfg.extent();
        let wanted = &self.cfg.output.fields;
        let mut out = Vec::new();
        for (name, f) in self.names.iter().zip(fields) {
            if wanted.is_empty() || wanted.contains(name) {
                out.push((name.clone(), f.clone()));
            }
        }
        let snap = Snapshot {
            nx,
            ny,
            step,
            time: step as f64 * self.cfg.dt,
            bounds: self.bounds,
            fields: out,
        };
        let path = snap.write(&self.cfg.output.dir, &format!("snap_{step:06}"), self.cfg.output.csv_max_points)?;
        self.snapshots.push(path);
        Ok(())
    }

    /// Run all steps, restarting the engine at every snapshot boundary.
    fn drive(&mut self, initial: Vec<Vec<f32>>) -> Result<RunOutput, CliError> {
        let stages = self.kernel.stages();
        let every = self.cfg.output.snapshot_every;
        let snapshots = every > 0;
        if snapshots {
            self.snapshot(0, &initial)?;
        }
        let chunk = if snapshots { every } else { self.cfg.steps.max(1) };
        let mut fields = initial;
        let mut acc: Option<RunOutput> = None;
        let mut done = 0;
        while done < self.cfg.steps || acc.is_none() {
            let steps = chunk.min(self.cfg.steps - done);
            let rc = RunConfig {
                iterations: steps * stages,
                ..self.run_cfg.clone()
            };
            let out = run(self.kernel, &self.geometry, &fields, &rc)?;
            done += steps;
            fields = out.fields.clone();
            merge(&mut acc, out);
            if snapshots && steps > 0 {
                self.snapshot(done, &fields)?;
            }
        }
        if !snapshots {
            self.snapshot(done, &fields)?;
        }
        Ok(acc.expect("at least one chunk runs"))
    }
}

/// Run a validated scenario end to end and write its outputs under
/// `cfg.output.dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, CliError> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let geometry =
        TorusGeometry::new(g.workers_x, g.workers_y, g.n).map_err(|e| CliError::Config(e.to_string()))?;
    let horizontal: LinkModel = cfg.link.horizontal()?;
    let cost = stage_cost(cfg.kernel, cfg.clock_hz);
    let mut run_cfg = RunConfig::new(cfg.engine_method(), 0).with_cost(cost);
    run_cfg.horizontal = horizontal;
    run_cfg.vertical = cfg.link.vertical()?;
    run_cfg.telemetry_every = cfg.output.telemetry_every;
    let (gx, gy) = cfg.extent();
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let cfg_path = dir.join("scenario.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| CliError::io(&cfg_path, e))?;

    let prepared = prepare(cfg)?;
    let (out, flops, snapshots, hump, cfl, mass_drift) = match &prepared {
        Prepared::Heat { kernel, field } => {
            let mut d = Driver {
                cfg,
                kernel,
                geometry,
                run_cfg,
                names: vec!["value".into()],
                bounds: [0.0, 0.0, gx as f64, gy as f64],
                snapshots: Vec::new(),
            };
            let out = d.drive(vec![field.clone()])?;
            (out, kernel.flops_per_point() as f64, d.snapshots, None, None, None)
        }
        Prepared::Swe {
            kernel,
            state,
            hump,
            cfl,
        } => {
            let lat = swe::MAX_LATITUDE_DEG;
            let mut d = Driver {
                cfg,
                kernel: kernel.as_ref(),
                geometry,
                run_cfg,
                names: swe::FIELD_NAMES.iter().map(|s| s.to_string()).collect(),
                bounds: [0.0, -lat, 360.0, lat],
                snapshots: Vec::new(),
            };
            let out = d.drive(state.fields.clone())?;
            let params = kernel.params();
            let m0 = state.mass(params);
            let end = SweState {
                nx: gx,
                ny: gy,
                fields: out.fields.clone(),
            };
            let drift = (end.mass(params) - m0) / m0;
            let (even, odd) = swe::measured_flops(kernel);
            (out, (even + odd) as f64 / 2.0, d.snapshots, *hump, Some(*cfl), Some(drift))
        }
    };

    let shape = RunShape {
        n: g.n,
        workers: g.workers_x * g.workers_y,
        radius: cfg.kernel.radius(),
        stages: if cfg.kernel == KernelKind::Swe { 2 } else { 1 },
        fields: out.fields.len(),
        bytes_per_value: 4,
        flops_per_point: flops,
    };
    let summary = summarize(
        &out,
        &shape,
        &SummaryInput {
            kernel: cfg.kernel.name(),
            method: cfg.engine_method().name(),
            workers_x: g.workers_x,
            workers_y: g.workers_y,
            steps: cfg.steps,
            link: horizontal,
            cost,
        },
    );
    let axis: Vec<usize> = (1..=7).map(|k| 1 << k).chain([g.n]).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    emit_metrics(dir, &out, &shape, &summary, &bound_curve(&shape, &axis, &cost, &horizontal))?;
    if let Some(h) = &hump {
        write_rows(&dir.join("hump.csv"), std::slice::from_ref(h))?;
    }
    Ok(ScenarioResult {
        summary,
        hump,
        cfl,
        mass_drift,
        snapshots,
        fields: out.fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MethodKind;

    fn heat(dir: &std::path::Path) -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.geometry.n = 8;
        c.steps = 12;
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn chunked_run_matches_single_run() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let one = run_scenario(&heat(a.path())).unwrap();
        let mut cfg = heat(b.path());
        cfg.output.snapshot_every = 5;
        let many = run_scenario(&cfg).unwrap();
        assert_eq!(one.fields, many.fields);
        assert_eq!(many.snapshots.len(), 4);
        let last = Snapshot::read(many.snapshots.last().unwrap()).unwrap();
        assert_eq!(last.step, 12);
        assert_eq!(last.fields[0].1, many.fields[0]);
    }

    #[test]
    fn methods_agree_on_heat() {
        let mut results = Vec::new();
        for kind in [MethodKind::Translation, MethodKind::Static, MethodKind::Ghost] {
            let d = tempfile::tempdir().unwrap();
            let mut cfg = heat(d.path());
            cfg.method.kind = kind;
            cfg.method.steps_between = 2;
            results.push(run_scenario(&cfg).unwrap().fields);
        }
        assert_eq!(results[0], results[1]);
        assert_eq!(results[0], results[2]);
    }

    #[test]
    fn metrics_files_are_written() {
        let d = tempfile::tempdir().unwrap();
        let r = run_scenario(&heat(d.path())).unwrap();
        for f in ["workers.csv", "links.csv", "summary.csv", "bounds.csv", "scenario.toml"] {
            assert!(d.path().join(f).is_file(), "{f}");
        }
        assert!(r.summary.steps_per_second > 0.0);
        assert!(r.summary.flops_per_second > 0.0);
    }
}

//! Cartesian parameter sweeps.
//!
//! A sweep file is a scenario file with an extra `[axes]` table. Each
//! cell runs in its own directory under the sweep output; a cell whose
//! `summary.csv` already exists is read back instead of rerun.

use crate::config::{MethodKind, ScenarioConfig};
use crate::metrics::{write_rows, Summary};
use crate::scenario::run_scenario;
use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub latency: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub n: Vec<usize>,
    /// `[workers_x, workers_y]` pairs.
    pub workers: Vec<[usize; 2]>,
    pub method: Vec<MethodKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: ScenarioConfig,
    pub axes: SweepAxes,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let axes = match table.remove("axes") {
            Some(v) => v.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("axes: {e}")))?,
            None => SweepAxes::default(),
        };
        let base = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(Self { base, axes })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Every cell of the product, in a fixed order (latency outermost,
    /// method innermost). Empty axes keep the base value.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let b = &self.base;
        let a = &self.axes;
        let mut out = Vec::new();
        for &lat in &axis(&a.latency, b.link.latency) {
            for &bw in &axis(&a.bandwidth, b.link.bandwidth) {
                for &n in &axis(&a.n, b.geometry.n) {
                    for &[wx, wy] in &axis(&a.workers, [b.geometry.workers_x, b.geometry.workers_y]) {
                        for &m in &axis(&a.method, b.method.kind) {
                            let mut c = b.clone();
                            c.link.latency = lat;
                            c.link.bandwidth = bw;
                            c.geometry.n = n;
                            c.geometry.workers_x = wx;
                            c.geometry.workers_y = wy;
                            c.method.kind = m;
                            out.push(c);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Directory name of a cell; it encodes every swept value.
pub fn cell_name(c: &ScenarioConfig) -> String {
    format!(
        "{}_{}_w{}x{}_n{}_lat{:e}_bw{:e}",
        c.kernel.name(),
        c.engine_method().name(),
        c.geometry.workers_x,
        c.geometry.workers_y,
        c.geometry.n,
        c.link.latency,
        c.link.bandwidth
    )
}

fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .next()
        .ok_or_else(|| CliError::format(path, "no summary row"))?
        .map_err(|e| CliError::format(path, e.to_string()))
}

/// Run (or resume) every cell and write `results.csv` under `out`.
/// Returns the rows and the number of cells actually executed.
pub fn run_sweep(sweep: &SweepConfig, out: &Path) -> Result<(Vec<Summary>, usize), CliError> {
    let cells = sweep.cells();
    for c in &cells {
        c.validate().map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("cell {}: {m}", cell_name(c))),
            other => other,
        })?;
    }
    let mut rows = Vec::with_capacity(cells.len());
    let mut executed = 0;
    for mut c in cells {
        let dir = out.join(cell_name(&c));
        let done = dir.join("summary.csv");
        if done.is_file() {
            rows.push(read_summary(&done)?);
            continue;
        }
        c.output.dir = dir;
        rows.push(run_scenario(&c)?.summary);
        executed += 1;
    }
    write_rows(&out.join("results.csv"), &rows)?;
    Ok((rows, executed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_parse_beside_scenario_keys() {
        let s = SweepConfig::from_toml("steps = 3\n[geometry]\nn = 8\n[axes]\nlatency = [0.0, 1e-5]\nworkers = [[1, 1], [2, 2]]\n")
            .unwrap();
        assert_eq!(s.base.steps, 3);
        assert_eq!(s.cells().len(), 4);
        assert!(SweepConfig::from_toml("[axes]\nbogus = [1]\n").is_err());
    }

    #[test]
    fn empty_axes_give_one_cell() {
        let s = SweepConfig::from_toml("").unwrap();
        let cells = s.cells();
        assert_eq!(cells, vec![ScenarioConfig::default()]);
    }

    #[test]
    fn cell_names_are_distinct() {
        let s = SweepConfig::from_toml("[axes]\nlatency = [1e-6, 1e-5]\nn = [8, 16]\nmethod = [\"static\", \"translation\"]\n").unwrap();
        let names: std::collections::HashSet<String> = s.cells().iter().map(cell_name).collect();
        assert_eq!(names.len(), 8);
    }
}

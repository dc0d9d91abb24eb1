//! End-to-end behaviour of the scenario runner and the `dtsim` binary.

use dtsim_cli::config::{KernelKind, Overrides, ScenarioConfig};
use dtsim_cli::hump::{place_impact_hump, ImpactHump};
use dtsim_cli::snapshot::Snapshot;
use dtsim_cli::sweep::{run_sweep, SweepConfig};
use dtsim::kernels::swe::{SweParams, SweState};
use std::path::Path;
use std::process::Command;

fn dtsim(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dtsim")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn flag_beats_file_beats_default() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "s.toml", "steps = 7\nseed = 3\n[geometry]\nn = 12\n");
    let o = Overrides {
        steps: Some(9),
        ..Default::default()
    };
    let c = ScenarioConfig::resolve(Some(Path::new(&f)), &o).unwrap();
    assert_eq!(c.steps, 9);
    assert_eq!(c.seed, 3);
    assert_eq!(c.geometry.n, 12);
    assert_eq!(c.geometry.workers_x, ScenarioConfig::default().geometry.workers_x);
}

#[test]
fn run_writes_snapshots_and_metrics() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    let (code, stdout, stderr) = dtsim(&[
        "run",
        "--kernel",
        "heat9",
        "-n",
        "8",
        "--steps",
        "6",
        "--snapshot-every",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("steps/s"));
    for f in ["snap_000000.f32", "snap_000003.txt", "snap_000006.csv", "summary.csv", "links.csv", "bounds.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let s = Snapshot::read(&out.join("snap_000006.f32")).unwrap();
    assert_eq!((s.nx, s.ny, s.step), (16, 16, 6));
}

#[test]
fn exit_codes_follow_error_category() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let o = out.to_str().unwrap();
    let (code, _, err) = dtsim(&["run", "-n", "1", "--out", o]);
    assert_eq!(code, 2);
    assert!(err.contains("2r = 2"), "{err}");
    let (code, _, _) = dtsim(&["run", "--config", d.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code, 3);
    let bad = write(d.path(), "bad.toml", "steps = \"many\"\n");
    assert_eq!(dtsim(&["run", "--config", &bad]).0, 2);
    let junk = write(d.path(), "junk.asc", "ncols 3\nnrows\n");
    assert_eq!(dtsim(&["resample", &junk, d.path().join("r").to_str().unwrap(), "--nx", "8", "--ny", "4"]).0, 3);
    // dt far above the CFL limit is caught at load
    assert_eq!(dtsim(&["run", "--kernel", "swe", "-n", "16", "--dt", "5000", "--steps", "1", "--out", o]).0, 2);
}

#[test]
fn bounds_and_fit_subcommands() {
    let (code, out, _) = dtsim(&["bounds", "-n", "2,8,32", "--latency", "1e-9"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
    let d = tempfile::tempdir().unwrap();
    let model = dtsim::perfmodel::CostModel::heat5();
    let mut csv = String::from("n,steps_per_second\n");
    for n in [4.0, 8.0, 16.0, 32.0, 64.0] {
        csv += &format!("{n},{}\n", 1.0 / model.seconds(n));
    }
    let f = write(d.path(), "rates.csv", &csv);
    let (code, out, err) = dtsim(&["fit", &f]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("a0 = 105.0000") && out.contains("a1 = 3.7400") && out.contains("a2 = 6.7200"), "{out}");
}

#[test]
fn resample_subcommand_writes_model_grid() {
    let d = tempfile::tempdir().unwrap();
    let mut asc = String::from("ncols 36\nnrows 18\nxllcorner 0\nyllcorner -90\ncellsize 10\nNODATA_value -9999\n");
    for _ in 0..18 {
        asc += &vec!["-3000"; 36].join(" ");
        asc.push('\n');
    }
    let f = write(d.path(), "flat.asc", &asc);
    let target = d.path().join("grid");
    let (code, _, err) = dtsim(&["resample", &f, target.to_str().unwrap(), "--nx", "18", "--ny", "8"]);
    assert_eq!(code, 0, "{err}");
    let s = Snapshot::read(&d.path().join("grid.f32")).unwrap();
    assert!(s.fields[0].1.iter().all(|&b| b == -3000.0));
    assert!(s.fields[1].1.iter().all(|&l| l == 0.0));
}

fn two_by_two_sweep() -> SweepConfig {
    let text = "steps = 24\n[geometry]\nn = 8\n[output]\ntelemetry_every = 2\n[axes]\nlatency = [1e-7, 1e-5]\nn = [8, 16]\n";
    SweepConfig::from_toml(text).unwrap()
}

#[test]
fn sweep_is_cartesian_resumable_and_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let s = two_by_two_sweep();
    let (rows, ran) = run_sweep(&s, d.path()).unwrap();
    assert_eq!((rows.len(), ran), (4, 4));
    let first = std::fs::read(d.path().join("results.csv")).unwrap();
    let (again, ran) = run_sweep(&s, d.path()).unwrap();
    assert_eq!(ran, 0);
    assert_eq!(again, rows);
    assert_eq!(std::fs::read(d.path().join("results.csv")).unwrap(), first);

    let fresh = tempfile::tempdir().unwrap();
    let (rerun, _) = run_sweep(&s, fresh.path()).unwrap();
    assert_eq!(rerun, rows);
    assert_eq!(std::fs::read(fresh.path().join("results.csv")).unwrap(), first);
}

#[test]
fn sweep_binary_with_empty_axes_runs_once() {
    let d = tempfile::tempdir().unwrap();
    let f = write(d.path(), "one.toml", "steps = 4\n[geometry]\nn = 4\n");
    let out = d.path().join("res");
    let (code, stdout, err) = dtsim(&["sweep", "--config", &f, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("1 cells"), "{stdout}");
}

#[test]
fn strong_scale_axis_is_monotone_and_matches_model() {
    let d = tempfile::tempdir().unwrap();
    let text = "steps = 400\n[link]\nlatency = 1e-9\nbandwidth = 1e15\n[geometry]\nworkers_x = 2\nworkers_y = 2\n[axes]\nn = [2, 4, 8, 16, 32, 64]\n";
    let (rows, _) = run_sweep(&SweepConfig::from_toml(text).unwrap(), d.path()).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(r.limiter, "compute");
        let e = (r.steps_per_second - r.predicted_steps_per_second).abs() / r.predicted_steps_per_second;
        assert!(e < 0.05, "n = {}: {} vs {}", r.n, r.steps_per_second, r.predicted_steps_per_second);
    }
    assert!(rows.windows(2).all(|w| w[1].steps_per_second < w[0].steps_per_second));
}

#[test]
fn configured_hump_volume_is_near_reference() {
    let nx = 1024;
    let ny = 512;
    let st0 = SweState::at_rest(nx, ny, &vec![-4000.0; nx * ny], &vec![false; nx * ny], 0.0);
    let mut st = st0.clone();
    let p = SweParams::global(nx, ny, 10.0);
    let c = ScenarioConfig::default().hump;
    let rep = place_impact_hump(&mut st, &p, &ImpactHump { lat: c.lat, lon: c.lon, area: c.area, peak: c.peak }).unwrap();
    let reference = 5.8e12;
    assert!((rep.analytic_volume - reference).abs() / reference < 0.10);
    assert!((rep.grid_volume - reference).abs() / reference < 0.10, "{rep:?}");
    let mass = (st.mass(&p) - st0.mass(&p)) * p.radius * p.radius * p.dlon * p.dlat;
    assert!((mass - rep.grid_volume).abs() / rep.grid_volume < 1e-3);
    assert_eq!(ScenarioConfig::default().kernel, KernelKind::Heat5);
}

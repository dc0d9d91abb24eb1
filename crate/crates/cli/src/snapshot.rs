//! Field snapshots: raw little-endian `f32` data plus a `key = value`
//! text header, with an optional CSV copy for small grids.

use crate::CliError;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub step: usize,
    /// Simulated model time (s).
    pub time: f64,
    /// `(west, south, east, north)` in degrees, or the index box for
    /// non-geographic grids.
    pub bounds: [f64; 4],
    /// `(name, row-major values)`.
    pub fields: Vec<(String, Vec<f32>)>,
}

impl Snapshot {
    fn header(&self) -> String {
        let names: Vec<&str> = self.fields.iter().map(|(n, _)| n.as_str()).collect();
        let b = self.bounds;
        format!(
            "format = f32le\nnx = {}\nny = {}\nstep = {}\ntime = {:e}\nbounds = {:e} {:e} {:e} {:e}\nfields = {}\n",
            self.nx,
            self.ny,
            self.step,
            self.time,
            b[0],
            b[1],
            b[2],
            b[3],
            names.join(",")
        )
    }

    /// Write `<stem>.f32` and `<stem>.txt` (and `<stem>.csv` when the grid
    /// has at most `csv_max_points` points) into `dir`; returns the data
    /// path.
    pub fn write(&self, dir: &Path, stem: &str, csv_max_points: usize) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let data = dir.join(format!("{stem}.f32"));
        let mut bytes = Vec::with_capacity(4 * self.nx * self.ny * self.fields.len());
        for (name, v) in &self.fields {
            if v.len() != self.nx * self.ny {
                return Err(CliError::format(&data, format!("field {name} has {} values", v.len())));
            }
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        fs::write(&data, bytes).map_err(|e| CliError::io(&data, e))?;
        let head = dir.join(format!("{stem}.txt"));
        fs::write(&head, self.header()).map_err(|e| CliError::io(&head, e))?;
        if self.nx * self.ny <= csv_max_points {
            self.write_csv(&dir.join(format!("{stem}.csv")))?;
        }
        Ok(data)
    }

    fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["x".to_string(), "y".to_string()];
        head.extend(self.fields.iter().map(|(n, _)| n.clone()));
        w.write_record(&head)?;
        for y in 0..self.ny {
            for x in 0..self.nx {
                let mut rec = vec![x.to_string(), y.to_string()];
                rec.extend(self.fields.iter().map(|(_, v)| v[y * self.nx + x].to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    /// Read back a snapshot from its `.f32` or `.txt` path.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let data = path.with_extension("f32");
        let head = path.with_extension("txt");
        let text = fs::read_to_string(&head).map_err(|e| CliError::io(&head, e))?;
        let bad = |m: String| CliError::format(&head, m);
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed line {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        if get("format")? != "f32le" {
            return Err(bad("unsupported format".into()));
        }
        let num = |k: &str| -> Result<usize, CliError> { get(k)?.parse().map_err(|_| bad(format!("bad {k}"))) };
        let (nx, ny, step) = (num("nx")?, num("ny")?, num("step")?);
        let time: f64 = get("time")?.parse().map_err(|_| bad("bad time".into()))?;
        let bv: Vec<f64> = get("bounds")?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad bounds".into()))?;
        let bounds: [f64; 4] = bv.try_into().map_err(|_| bad("bounds needs 4 values".into()))?;
        let names: Vec<String> = get("fields")?.split(',').filter(|s| !s.is_empty()).map(String::from).collect();
        let bytes = fs::read(&data).map_err(|e| CliError::io(&data, e))?;
        let per = 4 * nx * ny;
        if bytes.len() != per * names.len() {
            return Err(CliError::format(
                &data,
                format!("expected {} bytes, found {}", per * names.len(), bytes.len()),
            ));
        }
        let fields = names
            .into_iter()
            .zip(bytes.chunks_exact(per.max(1)))
            .map(|(n, c)| (n, c.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect()))
            .collect();
        Ok(Self {
            nx,
            ny,
            step,
            time,
            bounds,
            fields,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(nx: usize, ny: usize) -> Snapshot {
        let f = |k: f32| (0..nx * ny).map(|i| k * i as f32 - 0.1).collect();
        Snapshot {
            nx,
            ny,
            step: 7,
            time: 420.0,
            bounds: [0.0, -85.0, 360.0, 85.0],
            fields: vec![("h".into(), f(1.5)), ("u".into(), f(-1e-7))],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = sample(5, 3);
        s.fields[0].1[2] = f32::MIN_POSITIVE / 3.0;
        s.fields[1].1[4] = -0.0;
        let path = s.write(dir.path(), "snap_000007", 0).unwrap();
        let back = Snapshot::read(&path).unwrap();
        assert_eq!(back.nx, 5);
        for ((_, a), (_, b)) in s.fields.iter().zip(&back.fields) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.fields[0].0, "h");
        assert_eq!((back.step, back.time, back.bounds), (s.step, s.time, s.bounds));
        assert!(!dir.path().join("snap_000007.csv").exists());
    }

    #[test]
    fn csv_written_for_small_grids() {
        let dir = tempfile::tempdir().unwrap();
        sample(4, 2).write(dir.path(), "s", 8).unwrap();
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("x,y,h,u"));
    }

    #[test]
    fn truncated_data_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = sample(4, 2).write(dir.path(), "s", 0).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, bytes).unwrap();
        assert_eq!(Snapshot::read(&p).unwrap_err().exit_code(), 3);
    }
}

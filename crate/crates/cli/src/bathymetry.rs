//! Elevation rasters: ESRI ASCII grids, a flat binary equivalent, a seeded
//! synthetic Earth-like raster, and area-average resampling onto the model
//! grid.

use crate::CliError;
use dtsim::kernels::swe::{SweParams, MAX_LATITUDE_DEG};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

const BINARY_MAGIC: &[u8; 8] = b"DTBATHY1";

/// Row-major elevations (m, negative below sea level). Row 0 is the
/// northernmost row, as in ESRI ASCII grids.
#[derive(Debug, Clone, PartialEq)]
pub struct BathymetryRaster {
    pub cols: usize,
    pub rows: usize,
    /// Longitude of the western edge (degrees).
    pub xll: f64,
    /// Latitude of the southern edge (degrees).
    pub yll: f64,
    /// Cell side (degrees).
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f32>,
}

/// Cell-centred target grid: node `(i, j)` sits at
/// `(lon0 + i dlon, lat0 + j dlat)` and owns the cell of that size around
/// it. Row 0 is the southernmost row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGrid {
    pub nx: usize,
    pub ny: usize,
    pub lon0: f64,
    pub lat0: f64,
    pub dlon: f64,
    pub dlat: f64,
}

impl TargetGrid {
    /// The grid of [`SweParams::global`].
    pub fn global(nx: usize, ny: usize) -> Self {
        let p = SweParams::global(nx, ny, 1.0);
        Self {
            nx,
            ny,
            lon0: 0.0,
            lat0: p.latitudes[0].to_degrees(),
            dlon: p.dlon.to_degrees(),
            dlat: p.dlat.to_degrees(),
        }
    }
}

impl BathymetryRaster {
    pub fn validate(&self) -> Result<(), String> {
        if self.cols == 0 || self.rows == 0 {
            return Err("raster has no cells".into());
        }
        if self.values.len() != self.cols * self.rows {
            return Err(format!(
                "expected {} x {} = {} values, found {}",
                self.cols,
                self.rows,
                self.cols * self.rows,
                self.values.len()
            ));
        }
        if !(self.cellsize.is_finite() && self.cellsize > 0.0) {
            return Err(format!("cellsize must be positive, got {}", self.cellsize));
        }
        if !(self.xll.is_finite() && self.yll.is_finite()) {
            return Err("corner coordinates must be finite".into());
        }
        let top = self.yll + self.rows as f64 * self.cellsize;
        if self.yll < -90.0 - 1e-9 || top > 90.0 + 1e-9 {
            return Err(format!("latitude span [{}, {top}] leaves [-90, 90]", self.yll));
        }
        Ok(())
    }

    /// Latitude bounds clamped to the model band.
    pub fn clamped_lat_bounds(&self) -> (f64, f64) {
        let top = self.yll + self.rows as f64 * self.cellsize;
        (self.yll.max(-MAX_LATITUDE_DEG), top.min(MAX_LATITUDE_DEG))
    }

    pub fn is_nodata(&self, v: f32) -> bool {
        v.is_nan() || (v as f64 - self.nodata).abs() <= 1e-6 * self.nodata.abs().max(1.0)
    }

    pub fn parse_ascii(text: &str) -> Result<Self, String> {
        let mut tokens = text.split_whitespace().peekable();
        let (mut cols, mut rows, mut xll, mut yll, mut cell) = (None, None, None, None, None);
        let mut nodata = -9999.0;
        let (mut x_center, mut y_center) = (false, false);
        while let Some(&tok) = tokens.peek() {
            if tok.parse::<f64>().is_ok() {
                break;
            }
            let key = tok.to_ascii_lowercase();
            tokens.next();
            let val = tokens.next().ok_or_else(|| format!("header key {tok} has no value"))?;
            let num = || val.parse::<f64>().map_err(|_| format!("header {tok}: bad number {val}"));
            match key.as_str() {
                "ncols" => cols = Some(val.parse::<usize>().map_err(|_| format!("ncols: bad count {val}"))?),
                "nrows" => rows = Some(val.parse::<usize>().map_err(|_| format!("nrows: bad count {val}"))?),
                "xllcorner" => xll = Some(num()?),
                "yllcorner" => yll = Some(num()?),
                "xllcenter" => {
                    xll = Some(num()?);
                    x_center = true;
                }
                "yllcenter" => {
                    yll = Some(num()?);
                    y_center = true;
                }
                "cellsize" => cell = Some(num()?),
                "nodata_value" => nodata = num()?,
                _ => return Err(format!("unknown header key {tok}")),
            }
        }
        let missing = |k: &str| format!("header is missing {k}");
        let cols = cols.ok_or_else(|| missing("ncols"))?;
        let rows = rows.ok_or_else(|| missing("nrows"))?;
        let cellsize = cell.ok_or_else(|| missing("cellsize"))?;
        let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
        if x_center {
            xll -= 0.5 * cellsize;
        }
        if y_center {
            yll -= 0.5 * cellsize;
        }
        let values = tokens
            .map(|t| t.parse::<f32>().map_err(|_| format!("bad value {t}")))
            .collect::<Result<Vec<_>, _>>()?;
        let r = Self {
            cols,
            rows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn to_ascii(&self) -> String {
        let mut s = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
            self.cols, self.rows, self.xll, self.yll, self.cellsize, self.nodata
        );
        for row in self.values.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    /// Magic, `u64` cols and rows, `f64` xll, yll, cellsize and nodata,
    /// then the values as `f32`; all little-endian.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + 4 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        for v in [self.xll, self.yll, self.cellsize, self.nodata] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 56 || &bytes[..8] != BINARY_MAGIC {
            return Err("not a binary raster (bad magic or truncated header)".into());
        }
        let u = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let (cols, rows) = (u(8) as usize, u(16) as usize);
        let body = &bytes[56..];
        let count = cols.checked_mul(rows).ok_or("raster dimensions overflow")?;
        if body.len() != 4 * count {
            return Err(format!("expected {} value bytes, found {}", 4 * count, body.len()));
        }
        let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let r = Self {
            cols,
            rows,
            xll: f(24),
            yll: f(32),
            cellsize: f(40),
            nodata: f(48),
            values,
        };
        r.validate()?;
        Ok(r)
    }

    /// Read an ASCII grid or a binary raster, told apart by the magic.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::io(path, e))?;
        let parsed = if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes)
        } else {
            std::str::from_utf8(&bytes)
                .map_err(|_| "neither a binary raster nor UTF-8 text".to_string())
                .and_then(Self::parse_ascii)
        };
        parsed.map_err(|m| CliError::format(path, m))
    }

    /// Write ASCII for `.asc` paths and binary otherwise.
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let bytes = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("asc")) {
            self.to_ascii().into_bytes()
        } else {
            self.to_binary()
        };
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| CliError::io(path, e))
    }

    /// Area average onto `target`, weighting each raster cell by its
    /// longitude-latitude overlap with the target cell. Longitudes wrap
    /// when the raster spans 360 degrees. Target cells with no valid data
    /// come out as `0.0` (land). Refuses targets finer than the raster.
    pub fn resample(&self, target: &TargetGrid) -> Result<Vec<f32>, String> {
        let tol = 1e-9;
        if target.dlon < self.cellsize * (1.0 - tol) || target.dlat < self.cellsize * (1.0 - tol) {
            return Err(format!(
                "target spacing {:.4} x {:.4} deg is finer than the raster's {:.4} deg; supply a finer raster",
                target.dlon, target.dlat, self.cellsize
            ));
        }
        let global_lon = (self.cols as f64 * self.cellsize - 360.0).abs() < 1e-6;
        let top = self.yll + self.rows as f64 * self.cellsize;
        let mut out = vec![0.0f32; target.nx * target.ny];
        for j in 0..target.ny {
            let lat_c = target.lat0 + j as f64 * target.dlat;
            let (la, lb) = ((lat_c - 0.5 * target.dlat).max(-90.0), (lat_c + 0.5 * target.dlat).min(90.0));
            // raster rows counted from the south edge
            let r0 = ((la - self.yll) / self.cellsize).floor().max(0.0) as isize;
            let r1 = ((lb - self.yll) / self.cellsize).ceil().min(self.rows as f64) as isize;
            for i in 0..target.nx {
                let lon_c = target.lon0 + i as f64 * target.dlon;
                let (oa, ob) = (lon_c - 0.5 * target.dlon, lon_c + 0.5 * target.dlon);
                let mut rel_a = oa - self.xll;
                if global_lon {
                    rel_a = rel_a.rem_euclid(360.0);
                }
                let c0 = (rel_a / self.cellsize).floor() as isize;
                let c1 = ((rel_a + (ob - oa)) / self.cellsize).ceil() as isize;
                let (mut sum, mut weight) = (0.0f64, 0.0f64);
                for rs in r0..r1.max(r0) {
                    let ya = self.yll + rs as f64 * self.cellsize;
                    let wy = (lb.min(ya + self.cellsize) - la.max(ya)).max(0.0);
                    if wy <= 0.0 || ya >= top {
                        continue;
                    }
                    let row = self.rows - 1 - rs as usize;
                    for cs in c0..c1 {
                        let col = if global_lon {
                            cs.rem_euclid(self.cols as isize) as usize
                        } else if cs < 0 || cs >= self.cols as isize {
                            continue;
                        } else {
                            cs as usize
                        };
                        let xa = cs as f64 * self.cellsize;
                        let wx = ((rel_a + (ob - oa)).min(xa + self.cellsize) - rel_a.max(xa)).max(0.0);
                        let v = self.values[row * self.cols + col];
                        if wx > 0.0 && !self.is_nodata(v) {
                            sum += wx * wy * v as f64;
                            weight += wx * wy;
                        }
                    }
                }
                out[j * target.nx + i] = if weight > 0.0 { (sum / weight) as f32 } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Seeded Earth-like raster spanning the globe: abyssal plains around
    /// 4.5 km deep, mid-ocean ridges, continental blobs with shelves, and
    /// polar land.
    pub fn synthetic(cols: usize, rows: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cellsize = 360.0 / cols as f64;
        let continents: Vec<(f64, f64, f64, f64)> = (0..7)
            .map(|_| {
                let lat: f64 = rng.random_range(-55.0..65.0);
                let lon: f64 = rng.random_range(0.0..360.0);
                let radius: f64 = rng.random_range(12.0..35.0);
                let height: f64 = rng.random_range(5500.0..7500.0);
                (lat.to_radians(), lon.to_radians(), radius.to_radians(), height)
            })
            .collect();
        let ridges: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| (rng.random_range(1.0..4.0), rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(600.0..1400.0)))
            .collect();
        let mut values = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            let lat = (90.0 - (r as f64 + 0.5) * (180.0 / rows as f64)).to_radians();
            for c in 0..cols {
                let lon = ((c as f64 + 0.5) * cellsize).to_radians();
                let mut z = -4500.0;
                for &(clat, clon, rad, h) in &continents {
                    let cosd = lat.sin() * clat.sin() + lat.cos() * clat.cos() * (lon - clon).cos();
                    let d = cosd.clamp(-1.0, 1.0).acos();
                    z += h * (-(d / rad).powi(4)).exp();
                }
                for &(k, phase, amp) in &ridges {
                    z += amp * (k * lon + phase + 2.0 * lat).sin() * lat.cos();
                }
                if lat.to_degrees().abs() > 72.0 {
                    z = z.max(200.0);
                }
                values.push(z as f32);
            }
        }
        Self {
            cols,
            rows,
            xll: 0.0,
            yll: -90.0,
            cellsize,
            nodata: -99999.0,
            values,
        }
    }
}

/// Model-grid bathymetry: `b` relative to the reference sphere and the
/// land predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBathymetry {
    pub nx: usize,
    pub ny: usize,
    pub b: Vec<f32>,
    pub land: Vec<bool>,
}

/// Resample onto the global model grid; land is elevation >= sea level.
pub fn to_model_grid(raster: &BathymetryRaster, nx: usize, ny: usize, sea_level: f64) -> Result<ModelBathymetry, String> {
    let elev = raster.resample(&TargetGrid::global(nx, ny))?;
    let b: Vec<f32> = elev.iter().map(|&e| (e as f64 - sea_level) as f32).collect();
    let land = b.iter().map(|&v| v >= 0.0).collect();
    Ok(ModelBathymetry { nx, ny, b, land })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(cols: usize, rows: usize, cellsize: f64, xll: f64, yll: f64, f: impl Fn(usize, usize) -> f32) -> BathymetryRaster {
        let mut values = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(c, r));
            }
        }
        BathymetryRaster {
            cols,
            rows,
            xll,
            yll,
            cellsize,
            nodata: -9999.0,
            values,
        }
    }

    // 36 x 17 nodes at 10 degrees: cells [-5, 355) x [-90, 80)
    fn aligned_target() -> TargetGrid {
        TargetGrid {
            nx: 36,
            ny: 17,
            lon0: 0.0,
            lat0: -85.0,
            dlon: 10.0,
            dlat: 10.0,
        }
    }

    #[test]
    fn constant_ocean_has_no_land() {
        let r = raster(36, 18, 10.0, 0.0, -90.0, |_, _| -3000.0);
        let m = to_model_grid(&r, 36, 17, 0.0).unwrap();
        assert!(m.land.iter().all(|&l| !l));
        assert!(m.b.iter().all(|&b| b == -3000.0));
    }

    #[test]
    fn checkerboard_at_grid_resolution_is_identity() {
        let t = aligned_target();
        // rows counted from the north; 17 rows cover [-90, 80)
        let r = raster(36, 17, 10.0, -5.0, -90.0, |c, r| if (c + (16 - r)) % 2 == 0 { 100.0 } else { -100.0 });
        let out = r.resample(&t).unwrap();
        for j in 0..17 {
            for i in 0..36 {
                let want = if (i + j) % 2 == 0 { 100.0 } else { -100.0 };
                assert_eq!(out[j * 36 + i], want, "({i}, {j})");
            }
        }
    }

    #[test]
    fn halving_a_ramp_gives_four_cell_means() {
        let t = aligned_target();
        let ramp = |c: usize, r: usize| (3 * c + 7 * r) as f32;
        let r = raster(72, 34, 5.0, -5.0, -90.0, ramp);
        let out = r.resample(&t).unwrap();
        for j in 0..17 {
            for i in 0..36 {
                // north-first rows of the 2x2 block above target row j
                let (r0, c0) = (33 - (2 * j + 1), 2 * i);
                let mean = (ramp(c0, r0) + ramp(c0 + 1, r0) + ramp(c0, r0 + 1) + ramp(c0 + 1, r0 + 1)) / 4.0;
                assert_eq!(out[j * 36 + i], mean, "({i}, {j})");
            }
        }
    }

    #[test]
    fn longitude_wraps_on_global_rasters() {
        let r = raster(36, 18, 10.0, 0.0, -90.0, |c, _| c as f32);
        let t = TargetGrid {
            nx: 1,
            ny: 1,
            lon0: 0.0,
            lat0: 0.0,
            dlon: 20.0,
            dlat: 10.0,
        };
        // cell [-10, 10) covers raster columns 35 and 0
        assert_eq!(r.resample(&t).unwrap()[0], 17.5);
    }

    #[test]
    fn nodata_is_skipped_and_empty_cells_are_land() {
        let mut r = raster(36, 18, 10.0, 0.0, -90.0, |_, _| -1000.0);
        r.values.iter_mut().for_each(|v| *v = -9999.0);
        let m = to_model_grid(&r, 36, 17, 0.0).unwrap();
        assert!(m.land.iter().all(|&l| l));
    }

    #[test]
    fn upsampling_is_refused() {
        let r = raster(36, 18, 10.0, 0.0, -90.0, |_, _| -1.0);
        assert!(r.resample(&TargetGrid::global(72, 34)).is_err());
    }

    #[test]
    fn ascii_and_binary_round_trip() {
        let r = raster(5, 3, 0.5, 10.0, -20.0, |c, r| c as f32 * 1.25 - r as f32 * 300.5);
        assert_eq!(BathymetryRaster::parse_ascii(&r.to_ascii()).unwrap(), r);
        assert_eq!(BathymetryRaster::from_binary(&r.to_binary()).unwrap(), r);
    }

    #[test]
    fn malformed_headers() {
        assert!(BathymetryRaster::parse_ascii("ncols 2\nnrows 1\nxllcorner 0\ncellsize 1\n1 2").is_err());
        assert!(BathymetryRaster::parse_ascii("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3").is_err());
        assert!(BathymetryRaster::parse_ascii("ncols x\n").is_err());
        assert!(BathymetryRaster::parse_ascii("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nbogus 3\n1").is_err());
        let centred = BathymetryRaster::parse_ascii("ncols 1\nnrows 1\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\n7").unwrap();
        assert_eq!((centred.xll, centred.yll), (0.0, 0.0));
        assert!(BathymetryRaster::from_binary(b"DTBATHY1").is_err());
    }

    #[test]
    fn synthetic_is_seeded_and_earth_like() {
        let a = BathymetryRaster::synthetic(256, 128, 3);
        assert_eq!(a, BathymetryRaster::synthetic(256, 128, 3));
        assert_ne!(a, BathymetryRaster::synthetic(256, 128, 4));
        let land = a.values.iter().filter(|&&v| v >= 0.0).count() as f64 / a.values.len() as f64;
        assert!((0.15..0.5).contains(&land), "land share {land}");
        let deep = a.values.iter().filter(|&&v| v < -3000.0).count() as f64 / a.values.len() as f64;
        assert!(deep > 0.3, "deep share {deep}");
    }
}

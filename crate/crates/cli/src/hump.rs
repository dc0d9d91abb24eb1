//! Raised-cosine impact hump.
//!
//! `h(d) = peak * (1 + cos(pi d / R)) / 2` for great-circle distance
//! `d < R`. The configured area is the equivalent-column area
//! `volume / peak`; the footprint radius follows from
//! `pi R^2 (1/2 - 2/pi^2) = area`.

use crate::CliError;
use dtsim::kernels::swe::{apply_land_mask, SweParams, SweState, H};
use serde::Serialize;
use std::f64::consts::PI;

pub const SEAWATER_DENSITY: f64 = 1025.0;
/// `int h dA / (peak pi R^2)` for the raised cosine.
pub const VOLUME_FACTOR: f64 = 0.5 - 2.0 / (PI * PI);
/// `int h^2 dA / (peak^2 pi R^2)` for the raised cosine.
pub const SQUARE_FACTOR: f64 = (0.75 - 4.0 / (PI * PI)) / 2.0;
/// Joules per megaton of TNT.
pub const MEGATON_TNT: f64 = 4.184e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactHump {
    /// Degrees.
    pub lat: f64,
    /// Degrees.
    pub lon: f64,
    /// Equivalent-column area (m^2).
    pub area: f64,
    /// Peak height above the surface (m).
    pub peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HumpReport {
    pub radius_m: f64,
    /// Closed-form volume of the profile (m^3).
    pub analytic_volume: f64,
    /// Volume added to the grid, summed over water cells (m^3).
    pub grid_volume: f64,
    /// `rho g / 2 int h^2 dA` of the profile (J).
    pub analytic_energy: f64,
    /// Same, summed over water cells (J).
    pub grid_energy: f64,
    pub cells: usize,
}

impl ImpactHump {
    pub fn radius(&self) -> f64 {
        (self.area / (PI * VOLUME_FACTOR)).sqrt()
    }

    pub fn height_at(&self, d: f64) -> f64 {
        let r = self.radius();
        if d >= r {
            0.0
        } else {
            self.peak * 0.5 * (1.0 + (PI * d / r).cos())
        }
    }

    pub fn analytic_volume(&self) -> f64 {
        self.peak * self.area
    }

    pub fn analytic_energy(&self, gravity: f64) -> f64 {
        let r = self.radius();
        0.5 * SEAWATER_DENSITY * gravity * self.peak * self.peak * PI * r * r * SQUARE_FACTOR
    }
}

fn great_circle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let s = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * s.sqrt().min(1.0).asin()
}

/// Raise `h` by the hump profile over water and report the added volume
/// and potential energy. Errors when the grid node nearest the centre is
/// land.
pub fn place_impact_hump(state: &mut SweState, params: &SweParams, hump: &ImpactHump) -> Result<HumpReport, CliError> {
    let (nx, ny) = (state.nx, state.ny);
    let lat0 = params.latitudes[0];
    let (clat, clon) = (hump.lat.to_radians(), hump.lon.to_radians());
    let j = ((clat - lat0) / params.dlat).round();
    if !(0.0..ny as f64).contains(&j) {
        return Err(CliError::Config(format!("hump latitude {} is outside the grid", hump.lat)));
    }
    let i = (clon / params.dlon).round().rem_euclid(nx as f64) as usize;
    if state.is_land(j as usize * nx + i) {
        return Err(CliError::Config(format!("hump centre ({}, {}) lies on land", hump.lat, hump.lon)));
    }
    let mut report = HumpReport {
        radius_m: hump.radius(),
        analytic_volume: hump.analytic_volume(),
        grid_volume: 0.0,
        analytic_energy: hump.analytic_energy(params.gravity),
        grid_energy: 0.0,
        cells: 0,
    };
    if hump.peak == 0.0 {
        return Ok(report);
    }
    for (y, &lat) in params.latitudes.iter().enumerate() {
        let cell_area = params.radius * params.radius * lat.cos() * params.dlon * params.dlat;
        for x in 0..nx {
            let k = y * nx + x;
            if state.is_land(k) {
                continue;
            }
            let d = params.radius * great_circle(clat, clon, lat, x as f64 * params.dlon);
            let dh = hump.height_at(d);
            if dh > 0.0 {
                state.fields[H][k] += dh as f32;
                report.grid_volume += dh * cell_area;
                report.grid_energy += 0.5 * SEAWATER_DENSITY * params.gravity * dh * dh * cell_area;
                report.cells += 1;
            }
        }
    }
    state.refresh_centers();
    apply_land_mask(state);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ocean(nx: usize, ny: usize) -> (SweState, SweParams) {
        let st = SweState::at_rest(nx, ny, &vec![-4000.0; nx * ny], &vec![false; nx * ny], 0.0);
        (st, SweParams::global(nx, ny, 10.0))
    }

    #[test]
    fn profile_factors_match_quadrature() {
        let h = ImpactHump {
            lat: 0.0,
            lon: 0.0,
            area: 3.0e10,
            peak: 200.0,
        };
        let r = h.radius();
        let steps = 200_000;
        let (mut v, mut e) = (0.0, 0.0);
        for k in 0..steps {
            let d = (k as f64 + 0.5) * r / steps as f64;
            let ring = 2.0 * PI * d * r / steps as f64;
            v += h.height_at(d) * ring;
            e += h.height_at(d).powi(2) * ring;
        }
        assert!((v - h.analytic_volume()).abs() / v < 1e-9);
        let e = 0.5 * SEAWATER_DENSITY * 9.80665 * e;
        assert!((e - h.analytic_energy(9.80665)).abs() / e < 1e-9);
    }

    #[test]
    fn zero_height_leaves_state_unchanged() {
        let (mut st, p) = ocean(64, 32);
        let before = st.clone();
        let rep = place_impact_hump(&mut st, &p, &ImpactHump { lat: 10.0, lon: 40.0, area: 3.0e10, peak: 0.0 }).unwrap();
        assert_eq!(st, before);
        assert_eq!(rep.grid_volume, 0.0);
    }

    #[test]
    fn grid_volume_converges_to_profile() {
        let hump = ImpactHump {
            lat: 0.0,
            lon: 180.0,
            area: 3.0e10,
            peak: 200.0,
        };
        let (mut st, p) = ocean(1024, 512);
        let rep = place_impact_hump(&mut st, &p, &hump).unwrap();
        assert!((rep.grid_volume - rep.analytic_volume).abs() / rep.analytic_volume < 0.05, "{rep:?}");
        let peak = st.fields[H].iter().cloned().fold(f32::MIN, f32::max);
        assert!(peak > 150.0 && peak <= 200.0);
    }

    #[test]
    fn centre_on_land_is_rejected() {
        let (mut st, p) = ocean(36, 18);
        let land: Vec<bool> = (0..36 * 18).map(|i| i % 36 < 18).collect();
        st = SweState::at_rest(36, 18, &st.fields[dtsim::kernels::swe::B], &land, 0.0);
        let err = place_impact_hump(&mut st, &p, &ImpactHump { lat: 0.0, lon: 30.0, area: 1e10, peak: 10.0 }).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(place_impact_hump(&mut st, &p, &ImpactHump { lat: 0.0, lon: 270.0, area: 1e10, peak: 10.0 }).is_ok());
    }
}

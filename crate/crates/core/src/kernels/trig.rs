//! Per-row latitude tables for the spherical metric terms.

use super::KernelError;
use serde::{Deserialize, Serialize};

/// Latitudes closer than this to a pole are rejected.
const POLE_GUARD: f64 = 1e-6;

/// Sine, cosine, secant, tangent and Coriolis parameter for each row.
/// Values are evaluated in `f64` and rounded once to `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigRows {
    pub sin: Vec<f32>,
    pub cos: Vec<f32>,
    pub sec: Vec<f32>,
    pub tan: Vec<f32>,
    pub coriolis: Vec<f32>,
}

impl TrigRows {
    pub fn build(latitudes: &[f64], omega: f64) -> Result<Self, KernelError> {
        let mut t = TrigRows {
            sin: Vec::with_capacity(latitudes.len()),
            cos: Vec::with_capacity(latitudes.len()),
            sec: Vec::with_capacity(latitudes.len()),
            tan: Vec::with_capacity(latitudes.len()),
            coriolis: Vec::with_capacity(latitudes.len()),
        };
        for &lat in latitudes {
            if !lat.is_finite() || lat.abs() >= std::f64::consts::FRAC_PI_2 - POLE_GUARD {
                return Err(KernelError::PoleIncluded(lat));
            }
            let (s, c) = lat.sin_cos();
            t.sin.push(s as f32);
            t.cos.push(c as f32);
            t.sec.push((1.0 / c) as f32);
            t.tan.push((s / c) as f32);
            t.coriolis.push((2.0 * omega * s) as f32);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.sin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sin.is_empty()
    }
}

/// Tables for grid rows and for the cell-centre rows half a spacing above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTables {
    pub grid: TrigRows,
    pub center: TrigRows,
}

/// Build grid-row and centre-row tables. `latitudes` are grid-row
/// latitudes in radians; centre rows sit at `lat + dtheta / 2`.
pub fn build_trig_tables(latitudes: &[f64], dtheta: f64, omega: f64) -> Result<TrigTables, KernelError> {
    let centers: Vec<f64> = latitudes.iter().map(|l| l + 0.5 * dtheta).collect();
    Ok(TrigTables {
        grid: TrigRows::build(latitudes, omega)?,
        center: TrigRows::build(&centers, omega)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn equator_and_sixty_degrees() {
        let t = TrigRows::build(&[0.0, 60f64.to_radians()], 0.0).unwrap();
        assert_eq!((t.sin[0], t.cos[0], t.sec[0]), (0.0, 1.0, 1.0));
        assert!((t.sin[1] - 3f32.sqrt() / 2.0).abs() <= f32::EPSILON);
        assert!((t.cos[1] - 0.5).abs() <= f32::EPSILON);
        assert!((t.sec[1] - 2.0).abs() <= 2.0 * f32::EPSILON);
    }

    #[test]
    fn poles_are_rejected() {
        let pole = std::f64::consts::FRAC_PI_2;
        assert!(matches!(TrigRows::build(&[0.1, pole], 0.0), Err(KernelError::PoleIncluded(_))));
        assert!(TrigRows::build(&[-pole], 0.0).is_err());
        // a centre row pushed onto the pole is caught too
        assert!(build_trig_tables(&[pole - 0.01], 0.02, 0.0).is_err());
    }

    #[test]
    fn tables_match_direct_evaluation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let lats: Vec<f64> = (0..1000)
            .map(|_| rng.random_range(-85.0f64..85.0).to_radians())
            .collect();
        let t = TrigRows::build(&lats, 7.2921e-5).unwrap();
        let mut worst = 0.0f64;
        for (i, &l) in lats.iter().enumerate() {
            worst = worst
                .max((t.sin[i] as f64 - l.sin()).abs())
                .max((t.cos[i] as f64 - l.cos()).abs())
                .max((t.sec[i] as f64 - 1.0 / l.cos()).abs());
        }
        assert!(worst <= 1e-6, "worst {worst}");
    }
}

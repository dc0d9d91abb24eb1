//! Shallow-water equations on a latitude-longitude grid.
//!
//! Two-step Richtmyer Lax-Wendroff: the even stage predicts cell-centre
//! values at `t + dt/2` from the four surrounding grid points, the odd
//! stage corrects the grid points over the full `dt` with centred
//! differences of the four surrounding centres. Momentum is advanced in
//! advective form. Depth `s = h - b` is advanced through the flux form
//! `s_t + (1 / (a cos)) [ (s u)_lon + (s v cos)_lat ] = 0`, which expands
//! to the advective continuity equation and keeps `sum(s cos)` telescoping.
//!
//! Cell centre `(x + 1/2, y + 1/2)` is stored at grid index `(x, y)`.
//! Every field travels with its grid point, including the constant ones.

use super::trig::{build_trig_tables, TrigTables};
use super::{periodic, Kernel, KernelError, Neighborhood, Scalar};
use serde::{Deserialize, Serialize};

pub const U: usize = 0;
pub const V: usize = 1;
pub const H: usize = 2;
pub const B: usize = 3;
pub const BC: usize = 4;
pub const LAND: usize = 5;
pub const CU: usize = 6;
pub const CV: usize = 7;
pub const CH: usize = 8;
pub const FIELDS: usize = 9;

pub const FIELD_NAMES: [&str; FIELDS] = ["u", "v", "h", "b", "b_center", "land", "u_center", "v_center", "h_center"];

pub const GRAVITY: f64 = 9.80665;
pub const EARTH_RADIUS: f64 = 6.371e6;
pub const EARTH_OMEGA: f64 = 7.2921e-5;
/// Latitude clamp for the Mercator-style grid.
pub const MAX_LATITUDE_DEG: f64 = 85.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweParams {
    pub gravity: f64,
    pub radius: f64,
    pub omega: f64,
    pub dt: f64,
    /// Longitude spacing (rad).
    pub dlon: f64,
    /// Latitude spacing (rad).
    pub dlat: f64,
    /// Latitude of each grid row (rad).
    pub latitudes: Vec<f64>,
}

impl SweParams {
    /// Global grid: `nx` columns spanning 360 degrees of longitude and `ny`
    /// rows from -85 degrees upward, spaced so the last cell-centre row sits
    /// at +85. Rows wrap on the torus; see [`SweState::close_clamp_rows`].
    pub fn global(nx: usize, ny: usize, dt: f64) -> Self {
        let lat0 = -MAX_LATITUDE_DEG.to_radians();
        let dlat = 2.0 * MAX_LATITUDE_DEG.to_radians() / ny.max(1) as f64;
        Self {
            gravity: GRAVITY,
            radius: EARTH_RADIUS,
            omega: EARTH_OMEGA,
            dt,
            dlon: 2.0 * std::f64::consts::PI / nx as f64,
            dlat,
            latitudes: (0..ny).map(|j| lat0 + j as f64 * dlat).collect(),
        }
    }

    /// A non-rotating equatorial patch: every row sits at latitude zero, so
    /// the metric terms vanish and the grid is Cartesian with spacing
    /// `dx` metres in both directions.
    pub fn planar(ny: usize, dx: f64, dt: f64) -> Self {
        Self {
            gravity: GRAVITY,
            radius: EARTH_RADIUS,
            omega: 0.0,
            dt,
            dlon: dx / EARTH_RADIUS,
            dlat: dx / EARTH_RADIUS,
            latitudes: vec![0.0; ny],
        }
    }

    /// Smallest physical grid spacing (m) over all rows.
    pub fn min_spacing(&self) -> f64 {
        let min_cos = self
            .latitudes
            .iter()
            .map(|l| l.cos())
            .fold(f64::INFINITY, f64::min);
        (self.radius * self.dlon * min_cos).min(self.radius * self.dlat)
    }

    /// Gravity-wave Courant number for the deepest water column.
    pub fn cfl(&self, max_depth: f64) -> f64 {
        (self.gravity * max_depth.max(0.0)).sqrt() * self.dt / self.min_spacing()
    }

    fn validate(&self) -> Result<(), KernelError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.gravity) || !pos(self.radius) || !pos(self.dt) || !pos(self.dlon) || !pos(self.dlat) {
            return Err(KernelError::BadParameter("g, a, dt and spacings must be positive"));
        }
        if self.latitudes.is_empty() {
            return Err(KernelError::BadParameter("no latitude rows"));
        }
        Ok(())
    }
}

/// Kernel constants in binary32, ready for the point update.
#[derive(Debug, Clone)]
pub struct SweKernel {
    params: SweParams,
    tables: TrigTables,
    g: f32,
    inv_a: f32,
    dt: f32,
    half_dt: f32,
    k_lon: f32,
    k_lat: f32,
}

impl SweKernel {
    pub fn new(params: SweParams) -> Result<Self, KernelError> {
        params.validate()?;
        let tables = build_trig_tables(&params.latitudes, params.dlat, params.omega)?;
        Ok(Self {
            g: params.gravity as f32,
            inv_a: (1.0 / params.radius) as f32,
            dt: params.dt as f32,
            half_dt: (0.5 * params.dt) as f32,
            k_lon: (0.5 / params.dlon) as f32,
            k_lat: (0.5 / params.dlat) as f32,
            tables,
            params,
        })
    }

    pub fn params(&self) -> &SweParams {
        &self.params
    }

    pub fn tables(&self) -> &TrigTables {
        &self.tables
    }

    pub fn rows(&self) -> usize {
        self.tables.grid.len()
    }

    /// Predictor: centre values at `t + dt/2` from corners
    /// `(0,0) (1,0) (0,1) (1,1)`.
    #[inline]
    fn even<S: Scalar, N: Neighborhood<S>>(&self, nb: &N, gy: usize, out: &mut [S]) {
        for f in [U, V, H, B, BC, LAND] {
            out[f] = nb.at(f, 0, 0);
        }
        const CORNERS: [(isize, isize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
        let land = CORNERS.map(|(dx, dy)| nb.at(LAND, dx, dy).to_f32() > 0.5);
        let h = CORNERS.map(|(dx, dy)| nb.at(H, dx, dy));
        if land.iter().any(|&l| l) {
            let zero = S::from_f32(0.0);
            out[CU] = zero;
            out[CV] = zero;
            out[CH] = shore_height(&h, &land);
            return;
        }
        let u = CORNERS.map(|(dx, dy)| nb.at(U, dx, dy));
        let v = CORNERS.map(|(dx, dy)| nb.at(V, dx, dy));
        let b = CORNERS.map(|(dx, dy)| nb.at(B, dx, dy));

        let rows = self.rows();
        let c0 = S::from_f32(self.tables.grid.cos[gy]);
        let c1 = S::from_f32(self.tables.grid.cos[(gy + 1) % rows]);
        let cos = [c0, c0, c1, c1];
        let sec = S::from_f32(self.tables.center.sec[gy]);
        let tan = S::from_f32(self.tables.center.tan[gy]);
        let fc = S::from_f32(self.tables.center.coriolis[gy]);

        let (ru, rv, rs) = self.tendencies(&u, &v, &h, &b, &cos, sec, tan, fc);
        let half = S::from_f32(self.half_dt);
        out[CU] = avg(&u) - half * ru;
        out[CV] = avg(&v) - half * rv;
        out[CH] = avg(&h) - half * rs;
    }

    /// Corrector: grid point at `t + dt` from centres SW, SE, NW, NE.
    #[inline]
    fn odd<S: Scalar, N: Neighborhood<S>>(&self, nb: &N, gy: usize, out: &mut [S]) {
        for f in [B, BC, LAND, CU, CV, CH] {
            out[f] = nb.at(f, 0, 0);
        }
        let u0 = nb.at(U, 0, 0);
        let v0 = nb.at(V, 0, 0);
        let h0 = nb.at(H, 0, 0);
        if nb.at(LAND, 0, 0).to_f32() > 0.5 {
            let zero = S::from_f32(0.0);
            out[U] = zero;
            out[V] = zero;
            out[H] = h0;
            return;
        }
        const CENTERS: [(isize, isize); 4] = [(-1, -1), (0, -1), (-1, 0), (0, 0)];
        let u = CENTERS.map(|(dx, dy)| nb.at(CU, dx, dy));
        let v = CENTERS.map(|(dx, dy)| nb.at(CV, dx, dy));
        let h = CENTERS.map(|(dx, dy)| nb.at(CH, dx, dy));
        let b = CENTERS.map(|(dx, dy)| nb.at(BC, dx, dy));

        let rows = self.rows();
        let below = (gy + rows - 1) % rows;
        let c0 = S::from_f32(self.tables.center.cos[below]);
        let c1 = S::from_f32(self.tables.center.cos[gy]);
        let cos = [c0, c0, c1, c1];
        let sec = S::from_f32(self.tables.grid.sec[gy]);
        let tan = S::from_f32(self.tables.grid.tan[gy]);
        let fc = S::from_f32(self.tables.grid.coriolis[gy]);

        let (ru, rv, rs) = self.tendencies(&u, &v, &h, &b, &cos, sec, tan, fc);
        let dt = S::from_f32(self.dt);
        out[U] = u0 - dt * ru;
        out[V] = v0 - dt * rv;
        out[H] = h0 - dt * rs;
    }

    /// Right-hand sides of the three equations at the middle of a 2x2
    /// stencil ordered `(0,0) (1,0) (0,1) (1,1)`. Coefficients are the
    /// stencil averages.
    #[allow(clippy::too_many_arguments)]
    #[inline(always)]
    fn tendencies<S: Scalar>(
        &self,
        u: &[S; 4],
        v: &[S; 4],
        h: &[S; 4],
        b: &[S; 4],
        cos: &[S; 4],
        sec: S,
        tan: S,
        fc: S,
    ) -> (S, S, S) {
        let kx = S::from_f32(self.k_lon);
        let ky = S::from_f32(self.k_lat);
        let ia = S::from_f32(self.inv_a);
        let g = S::from_f32(self.g);
        let d_lon = |q: &[S; 4]| ((q[1] + q[3]) - (q[0] + q[2])) * kx;
        let d_lat = |q: &[S; 4]| ((q[2] + q[3]) - (q[0] + q[1])) * ky;

        let ub = avg(u);
        let vb = avg(v);
        let m = sec * ia;
        let mu = ub * m;
        let mv = vb * ia;
        let cor = fc + ub * tan * ia;

        let ru = mu * d_lon(u) + mv * d_lat(u) - cor * vb + g * m * d_lon(h);
        let rv = mu * d_lon(v) + mv * d_lat(v) + cor * ub + g * ia * d_lat(h);

        let s = [h[0] - b[0], h[1] - b[1], h[2] - b[2], h[3] - b[3]];
        let fx = [s[0] * u[0], s[1] * u[1], s[2] * u[2], s[3] * u[3]];
        let fy = [
            s[0] * v[0] * cos[0],
            s[1] * v[1] * cos[1],
            s[2] * v[2] * cos[2],
            s[3] * v[3] * cos[3],
        ];
        let rs = m * (d_lon(&fx) + d_lat(&fy));
        (ru, rv, rs)
    }
}

#[inline(always)]
fn avg<S: Scalar>(q: &[S; 4]) -> S {
    (q[0] + q[1] + q[2] + q[3]) * S::from_f32(0.25)
}

/// Surface height at a centre touching land: the mean over its water
/// corners, so the pressure gradient seen from the water side is the
/// interior value. Centres with no water corner average everything.
fn shore_height<S: Scalar>(h: &[S; 4], land: &[bool; 4]) -> S {
    let mut sum = S::from_f32(0.0);
    let mut count = 0u8;
    for k in 0..4 {
        if !land[k] {
            sum = sum + h[k];
            count += 1;
        }
    }
    match count {
        0 => avg(h),
        1 => sum,
        c => sum / S::from_f32(c as f32),
    }
}

impl Kernel for SweKernel {
    fn name(&self) -> &str {
        "swe"
    }

    fn field_count(&self) -> usize {
        FIELDS
    }

    fn stages(&self) -> usize {
        2
    }

    #[inline]
    fn update_point<S: Scalar, N: Neighborhood<S>>(
        &self,
        stage: usize,
        nb: &N,
        _gx: usize,
        gy: usize,
        out: &mut [S],
    ) {
        if stage.is_multiple_of(2) {
            self.even(nb, gy, out)
        } else {
            self.odd(nb, gy, out)
        }
    }
}

/// Global shallow-water state: one row-major `nx x ny` array per field.
#[derive(Debug, Clone, PartialEq)]
pub struct SweState {
    pub nx: usize,
    pub ny: usize,
    pub fields: Vec<Vec<f32>>,
}

impl SweState {
    /// Water at rest with surface `h = level` over bathymetry `b` (both
    /// relative to the reference sphere). Land points get `h = b`.
    pub fn at_rest(nx: usize, ny: usize, b: &[f32], land: &[bool], level: f32) -> Self {
        assert_eq!(b.len(), nx * ny);
        assert_eq!(land.len(), nx * ny);
        let mut fields = vec![vec![0.0f32; nx * ny]; FIELDS];
        for i in 0..nx * ny {
            fields[B][i] = b[i];
            fields[LAND][i] = if land[i] { 1.0 } else { 0.0 };
            fields[H][i] = if land[i] { b[i] } else { level.max(b[i]) };
        }
        fields[BC] = center_average(b, nx, ny);
        let mut st = Self { nx, ny, fields };
        st.refresh_centers();
        st
    }

    /// Turn the first and last rows into land so the row wrap between the
    /// two clamp latitudes carries no water.
    pub fn close_clamp_rows(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        for y in [0, ny - 1] {
            for x in 0..nx {
                self.fields[LAND][y * nx + x] = 1.0;
            }
        }
        apply_land_mask(self);
        self.refresh_centers();
    }

    pub fn field(&self, f: usize) -> &[f32] {
        &self.fields[f]
    }

    /// Re-seed the centre fields from grid values (plain 2x2 averages);
    /// only meaningful as an initial condition.
    pub fn refresh_centers(&mut self) {
        self.fields[CU] = center_average(&self.fields[U], self.nx, self.ny);
        self.fields[CV] = center_average(&self.fields[V], self.nx, self.ny);
        self.fields[CH] = center_average(&self.fields[H], self.nx, self.ny);
    }

    pub fn is_land(&self, i: usize) -> bool {
        self.fields[LAND][i] > 0.5
    }

    /// `sum(s * cos(lat))` over water points, in `f64`.
    pub fn mass(&self, params: &SweParams) -> f64 {
        let mut m = 0.0;
        for y in 0..self.ny {
            let c = params.latitudes[y].cos();
            for x in 0..self.nx {
                let i = y * self.nx + x;
                if !self.is_land(i) {
                    m += (self.fields[H][i] as f64 - self.fields[B][i] as f64) * c;
                }
            }
        }
        m
    }

    pub fn max_depth(&self) -> f64 {
        (0..self.nx * self.ny)
            .filter(|&i| !self.is_land(i))
            .map(|i| (self.fields[H][i] - self.fields[B][i]) as f64)
            .fold(0.0, f64::max)
    }
}

/// 2x2 average to the centre at `(x + 1/2, y + 1/2)`, periodic.
pub fn center_average(q: &[f32], nx: usize, ny: usize) -> Vec<f32> {
    let mut out = vec![0.0; nx * ny];
    for y in 0..ny {
        let y1 = (y + 1) % ny;
        for x in 0..nx {
            let x1 = (x + 1) % nx;
            out[y * nx + x] =
                (q[y * nx + x] + q[y * nx + x1] + q[y1 * nx + x] + q[y1 * nx + x1]) * 0.25;
        }
    }
    out
}

/// No-slip shoreline rule: zero velocity on land and zero depth there.
pub fn apply_land_mask(state: &mut SweState) {
    for i in 0..state.nx * state.ny {
        if state.is_land(i) {
            state.fields[U][i] = 0.0;
            state.fields[V][i] = 0.0;
            state.fields[CU][i] = 0.0;
            state.fields[CV][i] = 0.0;
            state.fields[H][i] = state.fields[B][i];
        }
    }
}

/// Predictor stage on a periodic global state; returns the state whose
/// centre fields hold the half-step estimates.
pub fn swe_half_step_even(kernel: &SweKernel, state: &SweState) -> Result<SweState, KernelError> {
    let fields = periodic::step(kernel, 0, &state.fields, state.nx, state.ny)?;
    Ok(SweState {
        nx: state.nx,
        ny: state.ny,
        fields,
    })
}

/// Corrector stage; `intermediate` must come from [`swe_half_step_even`].
pub fn swe_half_step_odd(kernel: &SweKernel, intermediate: &SweState) -> Result<SweState, KernelError> {
    let fields = periodic::step(kernel, 1, &intermediate.fields, intermediate.nx, intermediate.ny)?;
    Ok(SweState {
        nx: intermediate.nx,
        ny: intermediate.ny,
        fields,
    })
}

/// Full time steps on a periodic global state.
pub fn swe_steps(kernel: &SweKernel, state: &SweState, steps: usize) -> Result<SweState, KernelError> {
    let fields = periodic::run(kernel, &state.fields, state.nx, state.ny, 2 * steps)?;
    Ok(SweState {
        nx: state.nx,
        ny: state.ny,
        fields,
    })
}

/// Arithmetic operations per water point for the (even, odd) stages,
/// counted by running the generic update on an instrumented scalar.
pub fn measured_flops(kernel: &SweKernel) -> (u64, u64) {
    struct Sample;
    impl Neighborhood<super::Counted> for Sample {
        fn at(&self, field: usize, dx: isize, dy: isize) -> super::Counted {
            let v = match field {
                LAND => 0.0,
                B | BC => -100.0,
                _ => 0.1 * (field as f32 + 1.0) + 0.01 * (dx + 2 * dy) as f32,
            };
            super::Counted(v)
        }
    }
    let row = kernel.rows() / 2;
    let mut out = [super::Counted(0.0); FIELDS];
    let (_, even) = super::count_flops(|| kernel.update_point(0, &Sample, 0, row, &mut out));
    let (_, odd) = super::count_flops(|| kernel.update_point(1, &Sample, 0, row, &mut out));
    (even, odd)
}

//! Vectors, angle conventions, the scan-direction grid, the room and
//! incidence geometry.
//!
//! Beam directions use a nadir-referenced convention: elevation 0° points
//! straight down from the ceiling and elevation 90° is horizontal.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that a step size divides a full turn.
const STEP_DIVISIBILITY_TOL: f64 = 1e-9;

/// Slack (degrees) on cell boundaries so exact half-step positions are
/// inclusive despite rounding in `acos`/`atan2`.
const CELL_EDGE_SLACK_DEG: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("azimuth {0}° outside [0, 360)")]
    AzimuthRange(f64),
    #[error("elevation {0}° outside [0, 90]")]
    ElevationRange(f64),
    #[error("{what} step {step}° does not evenly divide {span}°")]
    StepNotDivisible {
        what: &'static str,
        step: f64,
        span: f64,
    },
    #[error("room dimensions must be positive, got {0} x {1} x {2} m")]
    RoomDimensions(f64, f64, f64),
    #[error("transmitter and receiver positions coincide")]
    Coincident,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);
    pub const DOWN: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A beam direction in degrees. Elevation is measured from nadir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl SphericalDirection {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self, GeometryError> {
        if !(0.0..360.0).contains(&azimuth_deg) {
            return Err(GeometryError::AzimuthRange(azimuth_deg));
        }
        if !(0.0..=90.0).contains(&elevation_deg) {
            return Err(GeometryError::ElevationRange(elevation_deg));
        }
        Ok(Self {
            azimuth_deg,
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }
}

/// Unit vector `(sin θe cos φa, sin θe sin φa, −cos θe)`.
pub fn direction_from_angles(s: SphericalDirection) -> Vec3 {
    let (sin_el, cos_el) = s.elevation_deg.to_radians().sin_cos();
    let (sin_az, cos_az) = s.azimuth_deg.to_radians().sin_cos();
    Vec3::new(sin_el * cos_az, sin_el * sin_az, -cos_el)
}

/// Nadir-referenced `(azimuth, elevation)` of an arbitrary nonzero vector,
/// azimuth wrapped into `[0, 360)`. The azimuth is `None` when the vector
/// is (numerically) vertical and therefore has no defined azimuth.
pub fn angles_of(v: Vec3) -> Option<(Option<f64>, f64)> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    let horizontal = v.x.hypot(v.y);
    let elevation = horizontal.atan2(-v.z).to_degrees();
    let azimuth = if horizontal <= 1e-12 * n {
        None
    } else {
        Some(v.y.atan2(v.x).to_degrees().rem_euclid(360.0))
    };
    Some((azimuth, elevation))
}

/// The ordered set of beam directions swept by the emitter.
///
/// Column `j = el_index * n_azimuth + az_index` points along
/// `(az_index * azimuth_step, el_index * elevation_step)`. Elevations run
/// over `[0, 90)` so the horizontal ring is excluded; the elevation-0 ring
/// keeps all of its (identical) nadir columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGrid {
    directions: Vec<Vec3>,
    azimuth_step_deg: f64,
    elevation_step_deg: f64,
    n_azimuth: usize,
    n_elevation: usize,
}

fn step_count(what: &'static str, step: f64, span: f64) -> Result<usize, GeometryError> {
    let err = GeometryError::StepNotDivisible { what, step, span };
    if !(step > 0.0 && step <= span && step.is_finite()) {
        return Err(err);
    }
    let ratio = span / step;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > STEP_DIVISIBILITY_TOL * ratio.max(1.0) {
        return Err(err);
    }
    Ok(rounded as usize)
}

impl BeamGrid {
    pub fn build(azimuth_step_deg: f64, elevation_step_deg: f64) -> Result<Self, GeometryError> {
        let n_azimuth = step_count("azimuth", azimuth_step_deg, 360.0)?;
        let n_elevation = step_count("elevation", elevation_step_deg, 90.0)?;
        let mut directions = Vec::with_capacity(n_azimuth * n_elevation);
        for el in 0..n_elevation {
            for az in 0..n_azimuth {
                let s = SphericalDirection {
                    azimuth_deg: az as f64 * azimuth_step_deg,
                    elevation_deg: el as f64 * elevation_step_deg,
                };
                directions.push(direction_from_angles(s));
            }
        }
        Ok(Self {
            directions,
            azimuth_step_deg,
            elevation_step_deg,
            n_azimuth,
            n_elevation,
        })
    }

    /// The default 1° × 1° sweep (32,400 beams).
    pub fn one_degree() -> Self {
        Self::build(1.0, 1.0).expect("1 degree divides both spans")
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec3 {
        self.directions[j]
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn azimuth_step_deg(&self) -> f64 {
        self.azimuth_step_deg
    }

    pub fn elevation_step_deg(&self) -> f64 {
        self.elevation_step_deg
    }

    pub fn n_azimuth(&self) -> usize {
        self.n_azimuth
    }

    pub fn n_elevation(&self) -> usize {
        self.n_elevation
    }

    pub fn index(&self, el_index: usize, az_index: usize) -> usize {
        el_index * self.n_azimuth + az_index
    }

    /// Nominal `(azimuth, elevation)` in degrees of column `j`.
    pub fn angles(&self, j: usize) -> (f64, f64) {
        let el = j / self.n_azimuth;
        let az = j % self.n_azimuth;
        (
            az as f64 * self.azimuth_step_deg,
            el as f64 * self.elevation_step_deg,
        )
    }

    /// Columns whose angular cell contains direction `v`: the nominal beam
    /// angles are within half a step of `v` in both elevation and (wrapped)
    /// azimuth. A vertical `v` has no azimuth and matches every azimuth on
    /// its elevation ring. Result is sorted ascending.
    pub fn cells_containing(&self, v: Vec3) -> Vec<usize> {
        let Some((azimuth, elevation)) = angles_of(v) else {
            return Vec::new();
        };
        let half_el = 0.5 * self.elevation_step_deg + CELL_EDGE_SLACK_DEG;
        let half_az = 0.5 * self.azimuth_step_deg + CELL_EDGE_SLACK_DEG;

        let el_lo = ((elevation - half_el) / self.elevation_step_deg).ceil().max(0.0) as usize;
        let el_hi = ((elevation + half_el) / self.elevation_step_deg).floor();
        if el_hi < 0.0 {
            return Vec::new();
        }
        let el_hi = (el_hi as usize).min(self.n_elevation.saturating_sub(1));

        let az_indices: Vec<usize> = match azimuth {
            None => (0..self.n_azimuth).collect(),
            Some(az) => {
                let lo = ((az - half_az) / self.azimuth_step_deg).ceil() as i64;
                let hi = ((az + half_az) / self.azimuth_step_deg).floor() as i64;
                let mut idx: Vec<usize> = (lo..=hi)
                    .map(|k| k.rem_euclid(self.n_azimuth as i64) as usize)
                    .collect();
                idx.sort_unstable();
                idx.dedup();
                idx
            }
        };

        let mut hits = Vec::new();
        for el in el_lo..=el_hi {
            if el >= self.n_elevation {
                break;
            }
            hits.extend(az_indices.iter().map(|&az| self.index(el, az)));
        }
        hits
    }
}

/// Rectangular room with the emitter at the ceiling center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    width_m: f64,
    depth_m: f64,
    height_m: f64,
    emitter_pos: Vec3,
}

impl Room {
    pub fn new(width_m: f64, depth_m: f64, height_m: f64) -> Result<Self, GeometryError> {
        let ok = [width_m, depth_m, height_m]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !ok {
            return Err(GeometryError::RoomDimensions(width_m, depth_m, height_m));
        }
        Ok(Self {
            width_m,
            depth_m,
            height_m,
            emitter_pos: Vec3::new(width_m / 2.0, depth_m / 2.0, height_m),
        })
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn depth_m(&self) -> f64 {
        self.depth_m
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn emitter_pos(&self) -> Vec3 {
        self.emitter_pos
    }

    /// Walls and floor are inclusive; the ceiling plane is not.
    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..=self.width_m).contains(&p.x)
            && (0.0..=self.depth_m).contains(&p.y)
            && (0.0..self.height_m).contains(&p.z)
    }
}

impl Default for Room {
    fn default() -> Self {
        Room::new(1.0, 1.0, 3.0).expect("positive dimensions")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverState {
    pub position: Vec3,
    /// Unit normal of the photodetector surface.
    pub normal: Vec3,
    /// Full field-of-view cone angle in degrees.
    pub fov_deg: f64,
}

impl ReceiverState {
    pub fn upright(position: Vec3, fov_deg: f64) -> Self {
        Self {
            position,
            normal: Vec3::UP,
            fov_deg,
        }
    }
}

/// `cos ψ = d·n / |d|` with `d` pointing from the receiver to the
/// transmitter, clamped to `[-1, 1]`.
pub fn incidence_cosine(tx_pos: Vec3, rx: &ReceiverState) -> Result<f64, GeometryError> {
    let d = tx_pos - rx.position;
    let dist = d.norm();
    if dist == 0.0 {
        return Err(GeometryError::Coincident);
    }
    Ok((d.dot(rx.normal) / dist).clamp(-1.0, 1.0))
}

/// True iff the incidence angle is within half of the full FoV cone
/// (boundary inclusive).
pub fn in_fov(cos_psi: f64, fov_deg: f64) -> bool {
    let limit = (0.5 * fov_deg).to_radians().cos();
    cos_psi >= limit - 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn direction_examples() {
        let s = |az, el| SphericalDirection::new(az, el).unwrap();
        assert!(close(direction_from_angles(s(0.0, 0.0)), Vec3::DOWN, 1e-15));
        assert!(close(
            direction_from_angles(s(0.0, 90.0)),
            Vec3::new(1.0, 0.0, 0.0),
            1e-15
        ));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(
            direction_from_angles(s(90.0, 45.0)),
            Vec3::new(0.0, h, -h),
            1e-15
        ));
    }

    #[test]
    fn spherical_direction_rejects_out_of_range() {
        assert!(SphericalDirection::new(360.0, 0.0).is_err());
        assert!(SphericalDirection::new(-0.1, 0.0).is_err());
        assert!(SphericalDirection::new(0.0, 90.1).is_err());
        assert!(SphericalDirection::new(359.9, 90.0).is_ok());
    }

    #[test]
    fn default_grid_size_and_first_column() {
        let g = BeamGrid::one_degree();
        assert_eq!(g.len(), 32_400);
        assert_eq!(g.column(0), Vec3::DOWN);
        for u in g.directions() {
            assert!((u.norm() - 1.0).abs() <= 1e-12);
            assert!(u.z <= 0.0);
        }
    }

    #[test]
    fn coarse_grid_matches_hand_enumeration() {
        let g = BeamGrid::build(90.0, 45.0).unwrap();
        assert_eq!(g.len(), 8);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            Vec3::DOWN,
            Vec3::DOWN,
            Vec3::DOWN,
            Vec3::DOWN,
            Vec3::new(h, 0.0, -h),
            Vec3::new(0.0, h, -h),
            Vec3::new(-h, 0.0, -h),
            Vec3::new(0.0, -h, -h),
        ];
        for (j, e) in expected.iter().enumerate() {
            assert!(close(g.column(j), *e, 1e-15), "column {j}");
            assert!((g.column(j).norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_divisible_steps_rejected() {
        assert!(matches!(
            BeamGrid::build(7.0, 1.0),
            Err(GeometryError::StepNotDivisible { what: "azimuth", .. })
        ));
        assert!(BeamGrid::build(1.0, 0.7).is_err());
        assert!(BeamGrid::build(0.0, 1.0).is_err());
        assert!(BeamGrid::build(0.5, 0.25).is_ok());
    }

    #[test]
    fn grid_lattice_is_injective_off_nadir() {
        let g = BeamGrid::build(2.0, 2.0).unwrap();
        let off_nadir = &g.directions()[g.n_azimuth()..];
        for (i, a) in off_nadir.iter().enumerate() {
            for b in &off_nadir[i + 1..] {
                assert!((*a - *b).norm() > 1e-9);
            }
        }
    }

    #[test]
    fn cell_lookup_matches_brute_force() {
        let g = BeamGrid::one_degree();
        let probes = [
            Vec3::new(0.3, -0.2, -1.0),
            Vec3::new(-0.01, 0.004, -1.0),
            Vec3::new(1.0, 1e-4, -0.4),
            Vec3::new(0.0, 0.0, -2.0),
            Vec3::new(0.2, 0.7, -0.05),
        ];
        for v in probes {
            let (az, el) = angles_of(v).unwrap();
            let brute: Vec<usize> = (0..g.len())
                .filter(|&j| {
                    let (baz, bel) = g.angles(j);
                    let el_ok = (bel - el).abs() <= 0.5 + 1e-9;
                    let az_ok = az.is_none_or(|az| {
                        let diff = (baz - az).rem_euclid(360.0);
                        diff.min(360.0 - diff) <= 0.5 + 1e-9
                    });
                    el_ok && az_ok
                })
                .collect();
            assert_eq!(g.cells_containing(v), brute, "probe {v:?}");
        }
    }

    #[test]
    fn straight_down_hits_whole_nadir_ring() {
        let g = BeamGrid::one_degree();
        let hits = g.cells_containing(Vec3::new(0.0, 0.0, -1.5));
        assert_eq!(hits, (0..360).collect::<Vec<_>>());
    }

    #[test]
    fn room_emitter_at_ceiling_center() {
        let r = Room::default();
        assert_eq!(r.emitter_pos(), Vec3::new(0.5, 0.5, 3.0));
        assert!(r.contains(Vec3::new(0.0, 1.0, 0.0)));
        assert!(!r.contains(Vec3::new(0.5, 0.5, 3.0)));
        assert!(!r.contains(Vec3::new(1.01, 0.5, 1.0)));
        assert!(Room::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn incidence_examples() {
        let tx = Vec3::new(0.5, 0.5, 3.0);
        let below = ReceiverState::upright(Vec3::new(0.5, 0.5, 1.0), 120.0);
        assert_eq!(incidence_cosine(tx, &below).unwrap(), 1.0);

        let sideways = ReceiverState {
            normal: Vec3::new(1.0, 0.0, 0.0),
            ..below
        };
        assert!(incidence_cosine(tx, &sideways).unwrap().abs() < 1e-15);

        let off = ReceiverState::upright(Vec3::new(0.5, 1.0, 1.5), 120.0);
        let expected = 1.5 / (1.5f64 * 1.5 + 0.5 * 0.5).sqrt();
        assert!((incidence_cosine(tx, &off).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.9487).abs() < 1e-4);

        let same = ReceiverState::upright(tx, 120.0);
        assert_eq!(incidence_cosine(tx, &same), Err(GeometryError::Coincident));
    }

    #[test]
    fn incidence_sign_convention() {
        let tx = Vec3::new(0.5, 0.5, 3.0);
        let rx = ReceiverState::upright(Vec3::new(0.2, 0.9, 0.4), 120.0);
        let c = incidence_cosine(tx, &rx).unwrap();
        let reversed = rx.position - tx;
        let c_rev = reversed.dot(rx.normal) / reversed.norm();
        assert!((c + c_rev).abs() < 1e-15);
    }

    #[test]
    fn fov_gate() {
        assert!(in_fov(1.0, 120.0));
        assert!(!in_fov(0.0, 120.0));
        assert!(in_fov(0.5, 120.0));
        assert!(!in_fov(0.49, 120.0));
        assert!(in_fov(0.0, 180.0));
    }
}

//! Coordinate frame, planar array layout, user placement and pointing vectors.
//!
//! The array lies in the x-y plane centred at the origin; every element's
//! reference boresight is the +z axis. Angles are radians throughout.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the array frame, in meters.
pub type Position3 = Point3<f64>;

const UNIT_NORM_TOL: f64 = 1e-12;
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Uniform planar array geometry.
///
/// Element counts are usually odd so that one element sits on the origin;
/// even counts are accepted and laid out on half-integer offsets, which keeps
/// the array centred (the 4 x 4 default layout needs this).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_x: usize,
    pub n_y: usize,
    pub spacing_delta: f64,
    pub element_area: f64,
    pub wavelength: f64,
}

impl ArrayConfig {
    pub fn new(n_x: usize, n_y: usize, spacing_delta: f64, element_area: f64, wavelength: f64) -> Result<Self> {
        let cfg = Self {
            n_x,
            n_y,
            spacing_delta,
            element_area,
            wavelength,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::InvalidParameter(
                "array needs at least one element per axis".into(),
            ));
        }
        if !(self.spacing_delta > 0.0 && self.spacing_delta.is_finite()) {
            return Err(Error::InvalidParameter("spacing must be positive".into()));
        }
        if !(self.element_area > 0.0 && self.element_area.is_finite()) {
            return Err(Error::InvalidParameter("element area must be positive".into()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        // sqrt(A) <= spacing, with a relative slack for A = spacing^2 exactly.
        if self.element_area.sqrt() > self.spacing_delta * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "element side {} exceeds spacing {}",
                self.element_area.sqrt(),
                self.spacing_delta
            )));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Array occupation ratio `A / spacing^2`, in (0, 1].
    pub fn occupation_ratio(&self) -> f64 {
        self.element_area / (self.spacing_delta * self.spacing_delta)
    }

    pub fn is_odd(&self) -> bool {
        self.n_x % 2 == 1 && self.n_y % 2 == 1
    }

    /// Position of the element with 0-based column `ix` and row `iy`.
    pub fn element_position(&self, ix: usize, iy: usize) -> Result<Position3> {
        if ix >= self.n_x || iy >= self.n_y {
            return Err(Error::Range(format!(
                "element ({ix}, {iy}) outside {} x {} array",
                self.n_x, self.n_y
            )));
        }
        let ox = ix as f64 - (self.n_x as f64 - 1.0) / 2.0;
        let oy = iy as f64 - (self.n_y as f64 - 1.0) / 2.0;
        Ok(Position3::new(ox * self.spacing_delta, oy * self.spacing_delta, 0.0))
    }

    /// All element positions in linear order (row-major, rows along y).
    ///
    /// Linear index `iy * n_x + ix` is the 0-based form of the usual
    /// `(n_y - 1) N_x + n_x` numbering.
    pub fn positions(&self) -> Vec<Position3> {
        let mut out = Vec::with_capacity(self.num_elements());
        for iy in 0..self.n_y {
            for ix in 0..self.n_x {
                let ox = ix as f64 - (self.n_x as f64 - 1.0) / 2.0;
                let oy = iy as f64 - (self.n_y as f64 - 1.0) / 2.0;
                out.push(Position3::new(ox * self.spacing_delta, oy * self.spacing_delta, 0.0));
            }
        }
        out
    }

    /// Linear 0-based index of the element at signed offsets, for odd arrays.
    pub fn linear_index(&self, n_x_idx: i64, n_y_idx: i64) -> Result<usize> {
        self.check_signed(n_x_idx, n_y_idx)?;
        let half_x = (self.n_x as i64 - 1) / 2;
        let half_y = (self.n_y as i64 - 1) / 2;
        Ok(((n_y_idx + half_y) as usize) * self.n_x + (n_x_idx + half_x) as usize)
    }

    fn check_signed(&self, n_x_idx: i64, n_y_idx: i64) -> Result<()> {
        if !self.is_odd() {
            return Err(Error::Range(
                "signed element indices need odd element counts; use element_position".into(),
            ));
        }
        let half_x = (self.n_x as i64 - 1) / 2;
        let half_y = (self.n_y as i64 - 1) / 2;
        if n_x_idx.abs() > half_x || n_y_idx.abs() > half_y {
            return Err(Error::Range(format!(
                "offset ({n_x_idx}, {n_y_idx}) outside |n_x| <= {half_x}, |n_y| <= {half_y}"
            )));
        }
        Ok(())
    }
}

/// Reference position of the element at signed offsets `(n_x_idx, n_y_idx)`.
pub fn antenna_position(n_x_idx: i64, n_y_idx: i64, cfg: &ArrayConfig) -> Result<Position3> {
    cfg.check_signed(n_x_idx, n_y_idx)?;
    Ok(Position3::new(
        n_x_idx as f64 * cfg.spacing_delta,
        n_y_idx as f64 * cfg.spacing_delta,
        0.0,
    ))
}

/// Spherical placement of a user relative to the array centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    pub range_r: f64,
    pub zenith_psi: f64,
    pub azimuth_phi: f64,
}

impl UserPlacement {
    pub fn new(range_r: f64, zenith_psi: f64, azimuth_phi: f64) -> Result<Self> {
        let p = Self {
            range_r,
            zenith_psi,
            azimuth_phi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_r > 0.0 && self.range_r.is_finite()) {
            return Err(Error::InvalidParameter("user range must be positive".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.zenith_psi) {
            return Err(Error::InvalidParameter("user zenith outside [0, pi]".into()));
        }
        let half = std::f64::consts::FRAC_PI_2;
        if !(-half..=half).contains(&self.azimuth_phi) {
            return Err(Error::InvalidParameter("user azimuth outside [-pi/2, pi/2]".into()));
        }
        Ok(())
    }
}

/// Cartesian position `r [sin psi sin phi, cos psi, sin psi cos phi]`.
pub fn user_position(p: &UserPlacement) -> Position3 {
    let (sp, cp) = p.zenith_psi.sin_cos();
    let (sf, cf) = p.azimuth_phi.sin_cos();
    Position3::new(p.range_r * sp * sf, p.range_r * cp, p.range_r * sp * cf)
}

pub fn distance(a: &Position3, b: &Position3) -> f64 {
    (a - b).norm()
}

/// Unit boresight direction of one antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingVector(Vector3<f64>);

impl PointingVector {
    /// The reference orientation `e3`.
    pub fn boresight() -> Self {
        Self(Vector3::z())
    }

    /// Normalises `v`; fails on a zero or non-finite vector.
    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate("cannot normalise zero pointing vector".into()));
        }
        Ok(Self(v / n))
    }

    /// Wraps an already-unit vector, checking the norm.
    pub fn from_unit(v: Vector3<f64>) -> Result<Self> {
        if (v.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Contract(format!("pointing vector norm {} is not 1", v.norm())));
        }
        Ok(Self(v))
    }

    pub fn from_angles(theta_z: f64, theta_a: f64) -> Self {
        pointing_from_angles(theta_z, theta_a)
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_vector(self) -> Vector3<f64> {
        self.0
    }

    /// Angle to the +z axis, in [0, pi].
    pub fn zenith(&self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).acos()
    }

    /// Azimuth from +x in the x-y plane; 0 at the poles.
    pub fn azimuth(&self) -> f64 {
        if self.0.x == 0.0 && self.0.y == 0.0 {
            0.0
        } else {
            self.0.y.atan2(self.0.x)
        }
    }

    pub fn dot(&self, other: &Vector3<f64>) -> f64 {
        self.0.dot(other)
    }

    /// Angle in radians between two pointing vectors.
    pub fn angle_to(&self, other: &PointingVector) -> f64 {
        // atan2 form stays accurate for nearly parallel vectors.
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

/// `[sin tz cos ta, sin tz sin ta, cos tz]`.
pub fn pointing_from_angles(theta_z: f64, theta_a: f64) -> PointingVector {
    let (sz, cz) = theta_z.sin_cos();
    let (sa, ca) = theta_a.sin_cos();
    PointingVector(Vector3::new(sz * ca, sz * sa, cz))
}

/// True iff the zenith of `f` does not exceed `theta_max` (inclusive, 1e-12 slack).
pub fn is_feasible_pointing(f: &PointingVector, theta_max: f64) -> bool {
    f.zenith() <= theta_max + FEASIBILITY_SLACK
}

/// Moves `v` onto the spherical cap `zenith <= theta_max` along its own azimuth.
///
/// Vectors inside the cap are only normalised. A zero vector maps to `e3`.
pub fn project_to_cap(v: &Vector3<f64>, theta_max: f64) -> PointingVector {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return PointingVector::boresight();
    }
    let u = v / n;
    let p = PointingVector(u);
    if p.zenith() <= theta_max {
        p
    } else {
        pointing_from_angles(theta_max, p.azimuth())
    }
}

//! Single-user free-space analysis: closed-form optimal pointing, exact
//! array sums, their integral approximations and the closed-form SNRs for
//! linear and planar arrays.
//!
//! Unless noted otherwise the user sits on the array's broadside axis at
//! range `r`, and `delta = spacing / r`. All results are linear SNRs.

use std::f64::consts::PI;

use log::warn;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::channel::{pow_plus, GainPattern};
use crate::error::{Error, Result};
use crate::geometry::{pointing_from_angles, ArrayConfig, PointingVector, Position3};
use crate::quadrature::{integrate, integrate_2d, QuadConfig};

/// Closed forms assume `delta << 1`; above this they carry a warning.
pub const DELTA_VALIDITY_LIMIT: f64 = 0.1;

/// Boresight maximising `f . u` over the cap `zenith <= theta_max`.
pub fn optimal_pointing(antenna_pos: &Position3, user_pos: &Position3, theta_max: f64) -> Result<PointingVector> {
    let d = user_pos - antenna_pos;
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::Degenerate("user coincides with the antenna".into()));
    }
    let u = d / n;
    let zenith = u.z.clamp(-1.0, 1.0).acos();
    if zenith <= theta_max {
        return PointingVector::from_vector(u);
    }
    Ok(pointing_from_angles(theta_max, u.y.atan2(u.x)))
}

/// `cos(eps)` of the element at offsets `(ox, oy)` (in units of the spacing)
/// for an on-axis user and optimal pointing.
pub fn boresight_offset_cos(ox: f64, oy: f64, delta_ratio: f64, theta_max: f64) -> f64 {
    let rho = (ox * ox + oy * oy).sqrt() * delta_ratio;
    (rho.atan() - theta_max).max(0.0).cos()
}

/// Linear array, on-axis user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaAnalysisInput {
    pub n_x: usize,
    pub delta_ratio: f64,
    pub theta_max: f64,
    pub snr_scale: f64,
    pub occupation_xi: f64,
    pub directivity_p: f64,
}

impl UlaAnalysisInput {
    /// Cosine pattern (`p = 1/2`), the case the closed forms cover.
    pub fn new(n_x: usize, delta_ratio: f64, theta_max: f64, snr_scale: f64, occupation_xi: f64) -> Self {
        Self {
            n_x,
            delta_ratio,
            theta_max,
            snr_scale,
            occupation_xi,
            directivity_p: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_ratio > 0.0 && self.delta_ratio.is_finite()) {
            return Err(Error::InvalidParameter("delta must be positive".into()));
        }
        check_theta(self.theta_max)?;
        if !(self.occupation_xi > 0.0 && self.occupation_xi <= 1.0) {
            return Err(Error::InvalidParameter("occupation ratio outside (0, 1]".into()));
        }
        if !(self.snr_scale >= 0.0 && self.snr_scale.is_finite()) {
            return Err(Error::InvalidParameter("SNR scale must be >= 0".into()));
        }
        GainPattern::new(self.directivity_p)?;
        if self.validity_warning() {
            warn!(
                "delta = {} is not small; closed forms may be inaccurate",
                self.delta_ratio
            );
        }
        Ok(())
    }

    pub fn validity_warning(&self) -> bool {
        self.delta_ratio >= DELTA_VALIDITY_LIMIT
    }

    /// Largest odd element count whose elements all lie in the inner area.
    pub fn inner_count(&self) -> f64 {
        let t = self.theta_max.tan();
        if !t.is_finite() || t / self.delta_ratio > 1e15 {
            return f64::INFINITY;
        }
        2.0 * (t / self.delta_ratio).floor() + 1.0
    }

    pub fn span_angle(&self) -> f64 {
        span_angle(self.n_x, self.delta_ratio)
    }
}

/// Planar array, on-axis user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaBoundsInput {
    pub n_x: usize,
    pub n_y: usize,
    pub spacing: f64,
    pub range_r: f64,
    pub directivity_p: f64,
    pub theta_max: f64,
    pub snr_scale: f64,
    pub occupation_xi: f64,
}

impl UpaBoundsInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.range_r > 0.0) {
            return Err(Error::InvalidParameter("spacing and range must be positive".into()));
        }
        check_theta(self.theta_max)?;
        if !(self.occupation_xi > 0.0 && self.occupation_xi <= 1.0) {
            return Err(Error::InvalidParameter("occupation ratio outside (0, 1]".into()));
        }
        if !(self.snr_scale >= 0.0 && self.snr_scale.is_finite()) {
            return Err(Error::InvalidParameter("SNR scale must be >= 0".into()));
        }
        GainPattern::new(self.directivity_p)?;
        if self.validity_warning() {
            warn!("delta = {} is not small; closed forms may be inaccurate", self.delta());
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.spacing / self.range_r
    }

    pub fn validity_warning(&self) -> bool {
        self.delta() >= DELTA_VALIDITY_LIMIT
    }

    fn g0(&self) -> f64 {
        2.0 * (2.0 * self.directivity_p + 1.0)
    }

    /// Radius of the inscribed disk of the array aperture.
    pub fn r_lb(&self) -> f64 {
        0.5 * (self.n_x.min(self.n_y) as f64) * self.spacing
    }

    /// Radius of the circumscribed disk of the array aperture.
    pub fn r_ub(&self) -> f64 {
        0.5 * (self.n_x as f64 * self.spacing).hypot(self.n_y as f64 * self.spacing)
    }
}

impl From<&UlaAnalysisInput> for UpaBoundsInput {
    fn from(u: &UlaAnalysisInput) -> Self {
        Self {
            n_x: u.n_x,
            n_y: 1,
            spacing: u.delta_ratio,
            range_r: 1.0,
            directivity_p: u.directivity_p,
            theta_max: u.theta_max,
            snr_scale: u.snr_scale,
            occupation_xi: u.occupation_xi,
        }
    }
}

fn check_theta(theta_max: f64) -> Result<()> {
    if !(0.0..=PI / 2.0).contains(&theta_max) {
        return Err(Error::InvalidParameter("theta_max outside [0, pi/2]".into()));
    }
    Ok(())
}

fn require_cosine_pattern(p: f64) -> Result<()> {
    if p != 0.5 {
        return Err(Error::Precondition(format!(
            "closed form holds for p = 1/2 only, got p = {p}"
        )));
    }
    Ok(())
}

/// Angle subtended at the user between the array centre and one end.
pub fn span_angle(n_x: usize, delta_ratio: f64) -> f64 {
    (n_x as f64 * delta_ratio / 2.0).atan()
}

/// Exact double sum over the elements for an on-axis user.
pub fn snr_sum_exact(input: &UpaBoundsInput) -> Result<f64> {
    input.validate()?;
    let delta = input.delta();
    let p = input.directivity_p;
    let cx = (input.n_x as f64 - 1.0) / 2.0;
    let cy = (input.n_y as f64 - 1.0) / 2.0;
    let mut acc = 0.0;
    for iy in 0..input.n_y {
        let oy = iy as f64 - cy;
        for ix in 0..input.n_x {
            let ox = ix as f64 - cx;
            let rho2 = (ox * ox + oy * oy) * delta * delta;
            let c = boresight_offset_cos(ox, oy, delta, input.theta_max);
            acc += pow_plus(c, 2.0 * p) / (1.0 + rho2);
        }
    }
    Ok(input.snr_scale * input.g0() * input.occupation_xi * delta * delta / (4.0 * PI) * acc)
}

/// Exact sum for a linear array.
pub fn snr_sum_exact_ula(input: &UlaAnalysisInput) -> Result<f64> {
    input.validate()?;
    snr_sum_exact(&UpaBoundsInput::from(input))
}

fn hinge_integrand(rho: f64, theta_max: f64, p: f64) -> f64 {
    pow_plus((rho.atan() - theta_max).max(0.0).cos(), 2.0 * p) / (1.0 + rho * rho)
}

/// Continuous-aperture approximation of [`snr_sum_exact`].
///
/// With a single row the 1D line integral is used; otherwise the aperture
/// integral over the rectangle, with the inner-area circle as a panel edge.
pub fn snr_integral(input: &UpaBoundsInput, cfg: &QuadConfig) -> Result<f64> {
    input.validate()?;
    let delta = input.delta();
    let p = input.directivity_p;
    let th = input.theta_max;
    let hinge = th.tan();
    let pref = input.snr_scale * input.g0() * input.occupation_xi / (4.0 * PI);
    let half_x = input.n_x as f64 * delta / 2.0;
    if input.n_x == 0 || input.n_y == 0 {
        return Ok(0.0);
    }
    if input.n_y == 1 {
        let r = integrate(|s| hinge_integrand(s, th, p), 0.0, half_x, &[hinge], cfg)?;
        return Ok(pref * delta * 2.0 * r.value);
    }
    let half_y = input.n_y as f64 * delta / 2.0;
    let r = integrate_2d(
        |x, y| hinge_integrand(x.hypot(y), th, p),
        (0.0, half_x),
        (0.0, half_y),
        &[hinge],
        |x| {
            if x < hinge {
                vec![(hinge * hinge - x * x).sqrt()]
            } else {
                Vec::new()
            }
        },
        cfg,
    )?;
    Ok(pref * 4.0 * r.value)
}

/// Closed-form SNR of a linear array as a function of the span angle.
///
/// Branches on whether the span angle fits in the inner area.
pub fn gamma_of_span(span: f64, input: &UlaAnalysisInput) -> f64 {
    let pref = 2.0 * input.snr_scale * input.occupation_xi * input.delta_ratio / PI;
    if span <= input.theta_max {
        pref * span
    } else {
        pref * (input.theta_max + (span - input.theta_max).sin())
    }
}

/// Closed-form maximum SNR of a linear array with cosine pattern.
///
/// Branches on the element count against the inner-area count.
pub fn theorem1_snr(input: &UlaAnalysisInput) -> Result<f64> {
    input.validate()?;
    require_cosine_pattern(input.directivity_p)?;
    let pref = 2.0 * input.snr_scale * input.occupation_xi * input.delta_ratio / PI;
    let span = input.span_angle();
    if input.n_x as f64 <= input.inner_count() {
        Ok(pref * span)
    } else {
        Ok(pref * (input.theta_max + (span - input.theta_max).sin()))
    }
}

/// Large-array limit `(2 xi delta / pi) P (theta + cos theta)`.
pub fn asymptotic_ula(theta_max: f64, snr_scale: f64, xi: f64, delta_ratio: f64) -> f64 {
    2.0 * xi * delta_ratio / PI * snr_scale * asymptotic_ratio(theta_max)
}

/// Ratio of the rotatable to fixed large-array SNRs, `theta + cos theta`.
pub fn asymptotic_ratio(theta_max: f64) -> f64 {
    theta_max + theta_max.cos()
}

/// Span angles to the two array ends for a user at azimuth `phi`.
///
/// Returns `(d1, d2, x0)` where `d1` is the angle to the `-L/2` end, `d2` to
/// the `+L/2` end and `x0 = tan(phi)` is the foot of the perpendicular, all
/// measured from the user's perpendicular onto the array axis in units of
/// the perpendicular distance.
fn offaxis_span_angles(n_x: usize, delta_ratio: f64, phi: f64) -> (f64, f64, f64) {
    let c = phi.cos();
    let half = n_x as f64 * delta_ratio / 2.0 / c;
    let x0 = phi.tan();
    (((x0 + half).abs()).atan(), ((half - x0).abs()).atan(), x0)
}

/// Closed-form SNR of a linear array for a user at azimuth `phi` in the
/// x-z plane.
pub fn lemma1_snr(input: &UlaAnalysisInput, azimuth_phi: f64) -> Result<f64> {
    input.validate()?;
    require_cosine_pattern(input.directivity_p)?;
    if !(azimuth_phi.abs() < PI / 2.0) {
        return Err(Error::Domain(format!(
            "azimuth {azimuth_phi} must lie strictly inside (-pi/2, pi/2)"
        )));
    }
    let (d1, d2, x0) = offaxis_span_angles(input.n_x, input.delta_ratio, azimuth_phi);
    let half = input.n_x as f64 * input.delta_ratio / 2.0 / azimuth_phi.cos();
    let g1 = gamma_of_span(d1, input);
    let g2 = gamma_of_span(d2, input);
    let combo = if x0 < -half {
        g2 - g1
    } else if x0 > half {
        g1 - g2
    } else {
        g1 + g2
    };
    Ok(combo / (2.0 * azimuth_phi.cos()))
}

/// `P sum_n A G(eps_n) / (4 pi d_n^2)` with every element pointed optimally
/// at `user_pos`. Valid for any user position; `theta_max = 0` gives the
/// fixed-orientation array.
pub fn optimal_pointing_snr(
    cfg: &ArrayConfig,
    user_pos: &Position3,
    pattern: &GainPattern,
    theta_max: f64,
    snr_scale: f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for w in cfg.positions() {
        let f = optimal_pointing(&w, user_pos, theta_max)?;
        let d: Vector3<f64> = user_pos - w;
        let r2 = d.norm_squared();
        acc += pattern.gain_from_cos(f.dot(&(d / r2.sqrt()))) / r2;
    }
    Ok(snr_scale * cfg.element_area / (4.0 * PI) * acc)
}

/// Continuous-aperture counterpart of [`optimal_pointing_snr`] for any user
/// in front of the array: the element sum becomes an integral over the
/// aperture with density `1 / spacing` per axis.
pub fn aperture_integral(
    cfg: &ArrayConfig,
    user_pos: &Position3,
    pattern: &GainPattern,
    theta_max: f64,
    snr_scale: f64,
    quad: &QuadConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_theta(theta_max)?;
    if !(user_pos.z > 0.0) {
        return Err(Error::Domain("user must lie in front of the array (z > 0)".into()));
    }
    let density = |x: f64, y: f64| {
        let d = Vector3::new(user_pos.x - x, user_pos.y - y, user_pos.z);
        let r2 = d.norm_squared();
        let zenith = (d.z / r2.sqrt()).clamp(-1.0, 1.0).acos();
        pattern.gain_from_cos((zenith - theta_max).max(0.0).cos()) / r2
    };
    let delta = cfg.spacing_delta;
    let hx = cfg.n_x as f64 * delta / 2.0;
    let hy = cfg.n_y as f64 * delta / 2.0;
    let integral = if cfg.n_y == 1 {
        integrate(|x| density(x, 0.0), -hx, hx, &[user_pos.x], quad)?.value / delta
    } else {
        integrate_2d(density, (-hx, hx), (-hy, hy), &[user_pos.x], |_| vec![user_pos.y], quad)?.value / (delta * delta)
    };
    Ok(snr_scale * cfg.element_area / (4.0 * PI) * integral)
}

/// Planar-array approximation when the whole aperture is in the inner area.
pub fn lemma2_snr(input: &UpaBoundsInput) -> Result<f64> {
    input.validate()?;
    let diag = (input.n_x as f64 * input.spacing).hypot(input.n_y as f64 * input.spacing);
    if diag > 2.0 * input.range_r * input.theta_max.tan() * (1.0 + 1e-12) {
        return Err(Error::Precondition(
            "aperture diagonal exceeds the inner-area diameter".into(),
        ));
    }
    if input.theta_max > PI / 4.0 {
        return Err(Error::Precondition("theta_max must not exceed pi/4".into()));
    }
    let delta = input.delta();
    Ok(input.snr_scale * input.g0() * PI * input.occupation_xi * delta * delta * (input.n_x * input.n_y) as f64 / 64.0)
}

/// Disk SNR `G(R, p, theta_max)` evaluated by quadrature of its outer-area
/// integral.
pub fn g_function_quadrature(radius: f64, input: &UpaBoundsInput, cfg: &QuadConfig) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter("radius must be >= 0".into()));
    }
    let r = input.range_r;
    let th = input.theta_max;
    let p = input.directivity_p;
    let d = radius.min(r * th.tan());
    let inner = 0.5 * (d / r).powi(2).ln_1p();
    let lo = (d / r).atan() - th;
    let hi = (radius / r).atan() - th;
    let outer = if hi > lo {
        integrate(|e: f64| pow_plus(e.cos(), 2.0 * p) * (e + th).tan(), lo, hi, &[], cfg)?.value
    } else {
        0.0
    };
    Ok(input.snr_scale * input.g0() * input.occupation_xi / 2.0 * (inner + outer))
}

/// Closed form of `G(R, 1/2, theta_max)`.
///
/// Written in terms of `t = R / r` (`sec + tan = t + sqrt(1 + t^2)`), so large
/// `R / r` neither overflows nor loses the logarithmic growth.
pub fn lemma3_closed_form(radius: f64, range_r: f64, theta_max: f64, snr_scale: f64, xi: f64) -> Result<f64> {
    if !(radius >= 0.0) || !(range_r > 0.0) {
        return Err(Error::InvalidParameter("need R >= 0 and r > 0".into()));
    }
    check_theta(theta_max)?;
    let t = radius / range_r;
    let h = t.hypot(1.0);
    if radius <= range_r * theta_max.tan() {
        let log_sec2 = if t < 1e8 { (t * t).ln_1p() } else { 2.0 * h.ln() };
        return Ok(snr_scale * xi * log_sec2);
    }
    let (s, c) = theta_max.sin_cos();
    let cos_diff = (c + t * s) / h;
    let log_term = t.asinh() + ((1.0 - s) / c).ln();
    Ok(2.0 * snr_scale * xi * (1.0 - c.ln() - cos_diff + s * log_term))
}

/// `G(R, p, theta_max)`, closed form at `p = 1/2` and quadrature otherwise.
pub fn g_function(radius: f64, input: &UpaBoundsInput, cfg: &QuadConfig) -> Result<f64> {
    if input.directivity_p == 0.5 {
        lemma3_closed_form(
            radius,
            input.range_r,
            input.theta_max,
            input.snr_scale,
            input.occupation_xi,
        )
    } else {
        g_function_quadrature(radius, input, cfg)
    }
}

/// Lower and upper SNR bounds from the inscribed and circumscribed disks.
pub fn theorem2_bounds(input: &UpaBoundsInput, cfg: &QuadConfig) -> Result<(f64, f64)> {
    input.validate()?;
    Ok((
        g_function(input.r_lb(), input, cfg)?,
        g_function(input.r_ub(), input, cfg)?,
    ))
}

//! Directional gain pattern, near-field multipath channels and SINR.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::beamforming::BeamformingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{user_position, ArrayConfig, PointingVector, Position3, UserPlacement};

/// Projections below this are raised to `p - 1` as if they were this value.
pub const GRADIENT_PROJECTION_FLOOR: f64 = 1e-9;

const BEAMFORMER_NORM_TOL: f64 = 1e-9;

/// `x dBm` in watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `cos^{2p}` pattern with peak gain `G0 = 2(2p + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPattern {
    directivity_p: f64,
    peak_gain_g0: f64,
}

impl GainPattern {
    pub fn new(directivity_p: f64) -> Result<Self> {
        if !(directivity_p >= 0.0 && directivity_p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "directivity factor must be finite and >= 0, got {directivity_p}"
            )));
        }
        Ok(Self {
            directivity_p,
            peak_gain_g0: 2.0 * (2.0 * directivity_p + 1.0),
        })
    }

    pub fn p(&self) -> f64 {
        self.directivity_p
    }

    pub fn g0(&self) -> f64 {
        self.peak_gain_g0
    }

    /// Gain for a given cosine of the off-boresight angle.
    pub fn gain_from_cos(&self, cos_eps: f64) -> f64 {
        self.peak_gain_g0 * pow_plus(cos_eps, 2.0 * self.directivity_p)
    }
}

/// `x^q` for `x > 0`, zero otherwise (including `q = 0`).
///
/// The zero branch at `x <= 0` is the back-hemisphere clamp of the pattern:
/// `cos(eps) = 0` means `eps = pi/2`, which lies outside the open front lobe.
pub(crate) fn pow_plus(x: f64, q: f64) -> f64 {
    if x > 0.0 {
        if q == 1.0 {
            x
        } else if q == 0.5 {
            x.sqrt()
        } else {
            x.powf(q)
        }
    } else {
        0.0
    }
}

/// `d/dx x^p` on the positive branch, with `x` floored for `p < 1`.
fn dpow_plus(x: f64, p: f64) -> f64 {
    if x <= 0.0 || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let xe = if p < 1.0 { x.max(GRADIENT_PROJECTION_FLOOR) } else { x };
    p * xe.powf(p - 1.0)
}

pub fn directional_gain(pattern: &GainPattern, epsilon: f64) -> f64 {
    if (0.0..PI / 2.0).contains(&epsilon) {
        pattern.gain_from_cos(epsilon.cos().max(f64::MIN_POSITIVE))
    } else {
        0.0
    }
}

fn unit_direction(from: &Position3, to: &Position3) -> Result<(Vector3<f64>, f64)> {
    let d = to - from;
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::Domain("coincident points have no direction".into()));
    }
    Ok((d / n, n))
}

/// Friis power gain from a user to one element, including directional gain.
pub fn power_gain_user(
    f: &PointingVector,
    antenna_pos: &Position3,
    user_pos: &Position3,
    cfg: &ArrayConfig,
    pattern: &GainPattern,
) -> Result<f64> {
    let (dir, r) = unit_direction(antenna_pos, user_pos)?;
    Ok(cfg.element_area / (4.0 * PI * r * r) * pattern.gain_from_cos(f.dot(&dir)))
}

/// A point-like scatterer cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Position3,
    pub rcs_sigma: f64,
    pub phase_chi: f64,
}

impl Scatterer {
    pub fn validate(&self) -> Result<()> {
        if !(self.rcs_sigma > 0.0 && self.rcs_sigma.is_finite()) {
            return Err(Error::InvalidParameter("scatterer RCS must be positive".into()));
        }
        if !self.position.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("scatterer position must be finite".into()));
        }
        if !self.phase_chi.is_finite() {
            return Err(Error::InvalidParameter("scatterer phase must be finite".into()));
        }
        Ok(())
    }
}

pub fn power_gain_scatterer(
    f: &PointingVector,
    antenna_pos: &Position3,
    scatterer: &Scatterer,
    cfg: &ArrayConfig,
    pattern: &GainPattern,
) -> Result<f64> {
    power_gain_user(f, antenna_pos, &scatterer.position, cfg, pattern)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub placement: UserPlacement,
    pub power_w: f64,
}

/// Everything that determines the channels apart from the pointing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub users: Vec<User>,
    pub scatterers: Vec<Scatterer>,
    pub noise_power_w: f64,
    pub pattern: GainPattern,
    pub theta_max: f64,
    pub csi_error_power_w: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        if self.users.is_empty() {
            return Err(Error::InvalidParameter("scenario needs at least one user".into()));
        }
        for u in &self.users {
            u.placement.validate()?;
            if !(u.power_w > 0.0 && u.power_w.is_finite()) {
                return Err(Error::InvalidParameter("transmit power must be positive".into()));
            }
        }
        for s in &self.scatterers {
            s.validate()?;
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return Err(Error::InvalidParameter("noise power must be positive".into()));
        }
        if !(self.csi_error_power_w >= 0.0 && self.csi_error_power_w.is_finite()) {
            return Err(Error::InvalidParameter("CSI error power must be >= 0".into()));
        }
        if !(0.0..=PI / 2.0).contains(&self.theta_max) {
            return Err(Error::InvalidParameter("theta_max outside [0, pi/2]".into()));
        }
        Ok(())
    }

    pub fn num_antennas(&self) -> usize {
        self.array.num_elements()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn user_positions(&self) -> Vec<Position3> {
        self.users.iter().map(|u| user_position(&u.placement)).collect()
    }

    /// Effective transmit SNRs `P_k / (sigma^2 + e^2)`.
    pub fn snr_scales(&self) -> Vec<f64> {
        let denom = self.noise_power_w + self.csi_error_power_w;
        self.users.iter().map(|u| u.power_w / denom).collect()
    }

    /// Same scenario with a different gain pattern.
    pub fn with_pattern(&self, pattern: GainPattern) -> Self {
        Self {
            pattern,
            ..self.clone()
        }
    }

    pub fn with_theta_max(&self, theta_max: f64) -> Self {
        Self {
            theta_max,
            ..self.clone()
        }
    }

    /// All antennas at the reference orientation.
    pub fn boresight_pointing(&self) -> Vec<PointingVector> {
        vec![PointingVector::boresight(); self.num_antennas()]
    }
}

/// LoS entry for element `n_idx` and user `user`, built from the power gain.
pub fn los_channel(f: &PointingVector, n_idx: usize, user: usize, scenario: &Scenario) -> Result<Complex64> {
    let positions = scenario.array.positions();
    let w = positions
        .get(n_idx)
        .ok_or_else(|| Error::Range(format!("antenna {n_idx} out of range")))?;
    let u = user_position(
        &scenario
            .users
            .get(user)
            .ok_or_else(|| Error::Range(format!("user {user} out of range")))?
            .placement,
    );
    let g = power_gain_user(f, w, &u, &scenario.array, &scenario.pattern)?;
    let r = (u - w).norm();
    Ok(Complex64::from_polar(
        g.sqrt(),
        -2.0 * PI * r / scenario.array.wavelength,
    ))
}

/// NLoS entry: sum of single-bounce scatterer paths.
pub fn nlos_channel(f: &PointingVector, n_idx: usize, user: usize, scenario: &Scenario) -> Result<Complex64> {
    let positions = scenario.array.positions();
    let w = positions
        .get(n_idx)
        .ok_or_else(|| Error::Range(format!("antenna {n_idx} out of range")))?;
    let u = user_position(
        &scenario
            .users
            .get(user)
            .ok_or_else(|| Error::Range(format!("user {user} out of range")))?
            .placement,
    );
    let lambda = scenario.array.wavelength;
    let mut acc = Complex64::new(0.0, 0.0);
    for s in &scenario.scatterers {
        let g = power_gain_scatterer(f, w, s, &scenario.array, &scenario.pattern)?;
        let d = (s.position - w).norm();
        let t = (u - s.position).norm();
        if !(t > 0.0) {
            return Err(Error::Domain("scatterer coincides with a user".into()));
        }
        acc += Complex64::from_polar((s.rcs_sigma * g).sqrt() / t, -2.0 * PI * (d + t) / lambda + s.phase_chi);
    }
    Ok(acc)
}

/// Channels of all users for a given pointing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// N x K, column k is user k's channel.
    pub entries: DMatrix<Complex64>,
    pub pointing: Vec<PointingVector>,
}

impl ChannelMatrix {
    pub fn num_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.entries.ncols()
    }

    pub fn column(&self, k: usize) -> DVector<Complex64> {
        self.entries.column(k).into_owned()
    }
}

/// Pointing-independent channel coefficients.
///
/// Each entry is
/// `h_{k,n}(f) = alpha_{k,n} (f.u_{k,n})_+^p + sum_q beta_{k,n,q} (f.c_{q,n})_+^p`,
/// which is the power-gain form with the square root taken analytically.
#[derive(Debug, Clone)]
pub struct ChannelGeometry {
    p: f64,
    n: usize,
    k: usize,
    q: usize,
    /// Indexed `[k * n + idx]`.
    alpha: Vec<Complex64>,
    u_hat: Vec<Vector3<f64>>,
    /// Indexed `[(k * q + s) * n + idx]`.
    beta: Vec<Complex64>,
    /// Indexed `[s * n + idx]`.
    c_hat: Vec<Vector3<f64>>,
}

impl ChannelGeometry {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_pattern(scenario, &scenario.pattern)
    }

    pub fn with_pattern(scenario: &Scenario, pattern: &GainPattern) -> Result<Self> {
        scenario.validate()?;
        let cfg = &scenario.array;
        let positions = cfg.positions();
        let users = scenario.user_positions();
        let n = positions.len();
        let k = users.len();
        let q = scenario.scatterers.len();
        let lambda = cfg.wavelength;
        let amp = (cfg.element_area * pattern.g0() / (4.0 * PI)).sqrt();

        let mut alpha = Vec::with_capacity(k * n);
        let mut u_hat = Vec::with_capacity(k * n);
        for u in &users {
            for w in &positions {
                let (dir, r) = unit_direction(w, u)?;
                alpha.push(Complex64::from_polar(amp / r, -2.0 * PI * r / lambda));
                u_hat.push(dir);
            }
        }

        let mut c_hat = Vec::with_capacity(q * n);
        let mut d_qn = Vec::with_capacity(q * n);
        for s in &scenario.scatterers {
            for w in &positions {
                let (dir, d) = unit_direction(w, &s.position)?;
                c_hat.push(dir);
                d_qn.push(d);
            }
        }

        let mut beta = Vec::with_capacity(k * q * n);
        for u in &users {
            for (si, s) in scenario.scatterers.iter().enumerate() {
                let t = (u - s.position).norm();
                if !(t > 0.0) {
                    return Err(Error::Domain("scatterer coincides with a user".into()));
                }
                for idx in 0..n {
                    let d = d_qn[si * n + idx];
                    beta.push(Complex64::from_polar(
                        s.rcs_sigma.sqrt() * amp / (d * t),
                        -2.0 * PI * (d + t) / lambda + s.phase_chi,
                    ));
                }
            }
        }

        Ok(Self {
            p: pattern.p(),
            n,
            k,
            q,
            alpha,
            u_hat,
            beta,
            c_hat,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.n
    }

    pub fn num_users(&self) -> usize {
        self.k
    }

    pub fn num_scatterers(&self) -> usize {
        self.q
    }

    pub fn directivity(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self, k: usize, n: usize) -> Complex64 {
        self.alpha[k * self.n + n]
    }

    pub fn user_direction(&self, k: usize, n: usize) -> &Vector3<f64> {
        &self.u_hat[k * self.n + n]
    }

    pub fn beta(&self, k: usize, q: usize, n: usize) -> Complex64 {
        self.beta[(k * self.q + q) * self.n + n]
    }

    pub fn scatterer_direction(&self, q: usize, n: usize) -> &Vector3<f64> {
        &self.c_hat[q * self.n + n]
    }

    pub fn entry(&self, k: usize, n: usize, f: &Vector3<f64>) -> Complex64 {
        let mut h = self.alpha(k, n) * pow_plus(f.dot(self.user_direction(k, n)), self.p);
        for q in 0..self.q {
            h += self.beta(k, q, n) * pow_plus(f.dot(self.scatterer_direction(q, n)), self.p);
        }
        h
    }

    /// Gradient of `h_{k,n}` with respect to the real 3-vector `f`.
    ///
    /// Returned as the complex vector `dh/df`; terms with a non-positive
    /// projection contribute nothing.
    pub fn entry_gradient(&self, k: usize, n: usize, f: &Vector3<f64>) -> Vector3<Complex64> {
        let u = self.user_direction(k, n);
        let mut g = u.map(|c| Complex64::new(c, 0.0)) * (self.alpha(k, n) * dpow_plus(f.dot(u), self.p));
        for q in 0..self.q {
            let c = self.scatterer_direction(q, n);
            let s = self.beta(k, q, n) * dpow_plus(f.dot(c), self.p);
            g += c.map(|x| Complex64::new(x, 0.0)) * s;
        }
        g
    }

    /// `m_{k,n} = alpha u + sum beta c`, the linear form valid at `p = 1`
    /// when every projection is non-negative.
    pub fn linear_coefficient(&self, k: usize, n: usize) -> Vector3<Complex64> {
        let mut m = self.user_direction(k, n).map(|c| Complex64::new(c, 0.0)) * self.alpha(k, n);
        for q in 0..self.q {
            m += self.scatterer_direction(q, n).map(|c| Complex64::new(c, 0.0)) * self.beta(k, q, n);
        }
        m
    }

    pub fn channel_matrix(&self, pointing: &[PointingVector]) -> Result<ChannelMatrix> {
        if pointing.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "expected {} pointing vectors, got {}",
                self.n,
                pointing.len()
            )));
        }
        let entries = DMatrix::from_fn(self.n, self.k, |n, k| self.entry(k, n, pointing[n].as_vector()));
        Ok(ChannelMatrix {
            entries,
            pointing: pointing.to_vec(),
        })
    }
}

/// `h_k(F)` for every user, as an N x K matrix.
pub fn build_channel_matrix(pointing: &[PointingVector], scenario: &Scenario) -> Result<ChannelMatrix> {
    for f in pointing {
        PointingVector::from_unit(*f.as_vector())?;
    }
    ChannelGeometry::new(scenario)?.channel_matrix(pointing)
}

fn check_beamformers(v: &BeamformingMatrix, h: &ChannelMatrix) -> Result<()> {
    if v.columns.ncols() != h.num_users() || v.columns.nrows() != h.num_antennas() {
        return Err(Error::InvalidParameter(format!(
            "beamformer is {}x{}, channel is {}x{}",
            v.columns.nrows(),
            v.columns.ncols(),
            h.num_antennas(),
            h.num_users()
        )));
    }
    for (k, col) in v.columns.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > BEAMFORMER_NORM_TOL {
            return Err(Error::Contract(format!("beamformer {k} has norm {norm}, expected 1")));
        }
    }
    Ok(())
}

/// Per-user SINR for explicit SNR scales `P_k / noise`.
pub fn sinr_with_scales(v: &BeamformingMatrix, h: &ChannelMatrix, scales: &[f64]) -> Result<Vec<f64>> {
    check_beamformers(v, h)?;
    if scales.len() != h.num_users() {
        return Err(Error::InvalidParameter("one SNR scale per user required".into()));
    }
    // G[k, j] = v_k^H h_j
    let g = v.columns.adjoint() * &h.entries;
    Ok((0..h.num_users())
        .map(|k| {
            let mut interference = 0.0;
            for j in 0..h.num_users() {
                if j != k {
                    interference += scales[j] * g[(k, j)].norm_sqr();
                }
            }
            scales[k] * g[(k, k)].norm_sqr() / (interference + 1.0)
        })
        .collect())
}

/// Per-user SINR; uses `P_k / (sigma^2 + e^2)` when CSI error is present.
pub fn sinr_per_user(v: &BeamformingMatrix, h: &ChannelMatrix, scenario: &Scenario) -> Result<Vec<f64>> {
    sinr_with_scales(v, h, &scenario.snr_scales())
}

pub fn min_sinr(sinrs: &[f64]) -> f64 {
    sinrs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Unit-power QPSK symbols, K x T.
pub fn qpsk_symbols(k: usize, t: usize, seed: u64) -> DMatrix<Complex64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(k, t, |_, _| {
        let re = if rng.random::<bool>() { a } else { -a };
        let im = if rng.random::<bool>() { a } else { -a };
        Complex64::new(re, im)
    })
}

/// Samples of one uplink block.
#[derive(Debug, Clone)]
pub struct UplinkBlock {
    /// N x T received samples.
    pub received: DMatrix<Complex64>,
    /// K x T beamformer outputs `v_k^H y`.
    pub outputs: DMatrix<Complex64>,
}

/// Draws `y = sum_k h_k sqrt(P_k) s_k + n` for each symbol column.
///
/// The noise variance is `sigma^2 + e^2`, so the CSI error is modelled as extra
/// noise exactly as in [`sinr_per_user`].
pub fn simulate_uplink(
    h: &ChannelMatrix,
    scenario: &Scenario,
    v: &BeamformingMatrix,
    symbols: &DMatrix<Complex64>,
    noise_seed: u64,
) -> Result<UplinkBlock> {
    check_beamformers(v, h)?;
    if symbols.nrows() != h.num_users() {
        return Err(Error::InvalidParameter("one symbol row per user required".into()));
    }
    let amps = DMatrix::from_diagonal(&DVector::from_iterator(
        h.num_users(),
        scenario.users.iter().map(|u| Complex64::new(u.power_w.sqrt(), 0.0)),
    ));
    let mut received = &h.entries * amps * symbols;
    let noise_var = scenario.noise_power_w + scenario.csi_error_power_w;
    if noise_var > 0.0 {
        let sd = (noise_var / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        for y in received.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *y += Complex64::new(sd * re, sd * im);
        }
    }
    let outputs = v.columns.adjoint() * &received;
    Ok(UplinkBlock { received, outputs })
}

/// Sample SINR of each user from a simulated block with known symbols.
pub fn empirical_sinr(
    h: &ChannelMatrix,
    scenario: &Scenario,
    v: &BeamformingMatrix,
    symbols: &DMatrix<Complex64>,
    block: &UplinkBlock,
) -> Vec<f64> {
    let g = v.columns.adjoint() * &h.entries;
    let t = symbols.ncols() as f64;
    (0..h.num_users())
        .map(|k| {
            let gain = g[(k, k)] * scenario.users[k].power_w.sqrt();
            let mut sig = 0.0;
            let mut rest = 0.0;
            for col in 0..symbols.ncols() {
                let desired = gain * symbols[(k, col)];
                sig += desired.norm_sqr();
                rest += (block.outputs[(k, col)] - desired).norm_sqr();
            }
            (sig / t) / (rest / t)
        })
        .collect()
}

//! Benchmark schemes and the effective-rate metric.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{mrc, BeamformingMatrix};
use crate::channel::{min_sinr, sinr_with_scales, ChannelGeometry, GainPattern, Scenario};
use crate::error::{Error, Result};
use crate::geometry::PointingVector;
use crate::opt_ao::{
    ao_optimize, evaluate_pointing, fixed_solution, AoConfig, BeamformerKind, Solution, SolutionStatus,
};
use crate::opt_two_stage::two_stage_optimize;
use crate::single_user::optimal_pointing;

pub const DEFAULT_ARRAY_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    AoMmse,
    AoZf,
    TwoStage,
    RandomOrientation,
    ArrayWise,
    FixedOrientation,
    Isotropic,
    ClosedFormSingleUser,
}

impl SchemeId {
    pub const ALL: [SchemeId; 8] = [
        SchemeId::AoMmse,
        SchemeId::AoZf,
        SchemeId::TwoStage,
        SchemeId::RandomOrientation,
        SchemeId::ArrayWise,
        SchemeId::FixedOrientation,
        SchemeId::Isotropic,
        SchemeId::ClosedFormSingleUser,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::AoMmse => "ao_mmse",
            SchemeId::AoZf => "ao_zf",
            SchemeId::TwoStage => "two_stage",
            SchemeId::RandomOrientation => "random_orientation",
            SchemeId::ArrayWise => "array_wise",
            SchemeId::FixedOrientation => "fixed_orientation",
            SchemeId::Isotropic => "isotropic",
            SchemeId::ClosedFormSingleUser => "closed_form_single_user",
        }
    }

    /// Whether the scheme rotates antennas and pays the rotation overhead.
    pub fn rotates(self) -> bool {
        !matches!(self, SchemeId::FixedOrientation | SchemeId::Isotropic)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub overhead_ra: f64,
    pub overhead_fixed: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            overhead_ra: 0.05,
            overhead_fixed: 0.0,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        for o in [self.overhead_ra, self.overhead_fixed] {
            if !(0.0..1.0).contains(&o) {
                return Err(Error::InvalidParameter("overhead must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn overhead(&self, scheme: SchemeId) -> f64 {
        if scheme.rotates() {
            self.overhead_ra
        } else {
            self.overhead_fixed
        }
    }
}

/// `(1 - overhead) log2(1 + sinr)` in bit/s/Hz.
pub fn effective_rate(min_sinr: f64, cfg: &RateConfig, scheme: SchemeId) -> Result<f64> {
    if !(min_sinr >= 0.0) {
        return Err(Error::Domain("SINR must be non-negative".into()));
    }
    cfg.validate()?;
    Ok((1.0 - cfg.overhead(scheme)) * min_sinr.log2_1p())
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

fn mmse_solution(scenario: &Scenario, geom: &ChannelGeometry, pointing: Vec<PointingVector>) -> Result<Solution> {
    let (v, sinrs) = evaluate_pointing(geom, &pointing, &scenario.snr_scales(), BeamformerKind::Mmse)?;
    let eta = min_sinr(&sinrs);
    Ok(Solution {
        pointing,
        beamformers: v,
        sinrs,
        eta_trace: vec![eta],
        iterations: 0,
        status: SolutionStatus::Converged,
        warning: None,
    })
}

/// Draws a boresight uniformly in solid angle over the cap.
pub fn sample_cap<R: Rng>(rng: &mut R, theta_max: f64) -> PointingVector {
    let c = theta_max.cos();
    let cz: f64 = 1.0 - rng.random::<f64>() * (1.0 - c);
    let az = rng.random::<f64>() * std::f64::consts::TAU;
    PointingVector::from_angles(cz.clamp(-1.0, 1.0).acos(), az)
}

/// Independent cap-uniform pointing per antenna with MMSE beamforming.
pub fn random_orientation(scenario: &Scenario, seed: u64) -> Result<Solution> {
    let geom = ChannelGeometry::new(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pointing = (0..scenario.num_antennas())
        .map(|_| sample_cap(&mut rng, scenario.theta_max))
        .collect();
    mmse_solution(scenario, &geom, pointing)
}

/// One common pointing for the whole array, by exhaustive search over a
/// `resolution x resolution` grid of the cap.
pub fn array_wise(scenario: &Scenario, resolution: usize) -> Result<Solution> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    let geom = ChannelGeometry::new(scenario)?;
    let scales = scenario.snr_scales();
    let n = scenario.num_antennas();
    let mut best: Option<(f64, PointingVector)> = None;
    for i in 0..resolution {
        let tz = scenario.theta_max * i as f64 / (resolution - 1) as f64;
        // The pole needs only one azimuth.
        let azimuths = if i == 0 { 1 } else { resolution };
        for j in 0..azimuths {
            let f = PointingVector::from_angles(tz, std::f64::consts::TAU * j as f64 / resolution as f64);
            let (_, s) = evaluate_pointing(&geom, &vec![f; n], &scales, BeamformerKind::Mmse)?;
            let eta = min_sinr(&s);
            if best.is_none_or(|(b, _)| eta > b) {
                best = Some((eta, f));
            }
        }
    }
    let (_, f) = best.expect("grid is non-empty");
    mmse_solution(scenario, &geom, vec![f; n])
}

pub fn fixed_orientation(scenario: &Scenario) -> Result<Solution> {
    fixed_solution(scenario, BeamformerKind::Mmse)
}

/// Isotropic elements (`p = 0`) with MMSE beamforming.
pub fn isotropic(scenario: &Scenario) -> Result<Solution> {
    let iso = scenario.with_pattern(GainPattern::new(0.0)?);
    fixed_solution(&iso, BeamformerKind::Mmse)
}

/// Per-antenna closed-form pointing toward the only user with MRC.
pub fn closed_form_single_user(scenario: &Scenario) -> Result<Solution> {
    if scenario.num_users() != 1 {
        return Err(Error::Precondition("closed form needs exactly one user".into()));
    }
    let user = scenario.user_positions()[0];
    let pointing: Vec<PointingVector> = scenario
        .array
        .positions()
        .iter()
        .map(|w| optimal_pointing(w, &user, scenario.theta_max))
        .collect::<Result<_>>()?;
    let h = ChannelGeometry::new(scenario)?.channel_matrix(&pointing)?;
    let v = BeamformingMatrix::from_columns(vec![mrc(&h.column(0))?])?;
    let sinrs = sinr_with_scales(&v, &h, &scenario.snr_scales())?;
    let eta = min_sinr(&sinrs);
    Ok(Solution {
        pointing,
        beamformers: v,
        sinrs,
        eta_trace: vec![eta],
        iterations: 0,
        status: SolutionStatus::Converged,
        warning: None,
    })
}

/// Settings shared by all schemes of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSettings {
    pub ao: AoConfig,
    pub array_grid: usize,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        Self {
            ao: AoConfig::default(),
            array_grid: DEFAULT_ARRAY_GRID,
        }
    }
}

/// Runs one scheme; `seed` only affects the random orientation.
pub fn run_scheme(scheme: SchemeId, scenario: &Scenario, seed: u64, settings: &SchemeSettings) -> Result<Solution> {
    match scheme {
        SchemeId::AoMmse => ao_optimize(
            scenario,
            &AoConfig {
                beamformer: BeamformerKind::Mmse,
                ..settings.ao.clone()
            },
        ),
        SchemeId::AoZf => ao_optimize(
            scenario,
            &AoConfig {
                beamformer: BeamformerKind::Zf,
                ..settings.ao.clone()
            },
        ),
        SchemeId::TwoStage => two_stage_optimize(scenario),
        SchemeId::RandomOrientation => random_orientation(scenario, seed),
        SchemeId::ArrayWise => array_wise(scenario, settings.array_grid),
        SchemeId::FixedOrientation => fixed_orientation(scenario),
        SchemeId::Isotropic => isotropic(scenario),
        SchemeId::ClosedFormSingleUser => closed_form_single_user(scenario),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{directional_gain, Scatterer, User};
    use crate::geometry::{ArrayConfig, UserPlacement};
    use crate::quadrature::{integrate_2d, QuadConfig};
    use nalgebra::{Point3, Vector3};
    use std::f64::consts::PI;

    fn scenario(seed: u64, k: usize, q: usize) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = 0.125;
        let array = ArrayConfig::new(3, 3, lambda / 2.0, lambda * lambda / (4.0 * PI), lambda).unwrap();
        let users = (0..k)
            .map(|_| User {
                placement: UserPlacement::new(rng.random_range(30.0..50.0), PI / 2.0, rng.random_range(-1.2..1.2))
                    .unwrap(),
                power_w: 0.01,
            })
            .collect();
        let scatterers = (0..q)
            .map(|_| Scatterer {
                position: Point3::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(20.0..45.0),
                ),
                rcs_sigma: rng.random_range(0.5..1.5),
                phase_chi: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        Scenario {
            array,
            users,
            scatterers,
            noise_power_w: 1e-11,
            pattern: GainPattern::new(1.0).unwrap(),
            theta_max: PI / 6.0,
            csi_error_power_w: 0.0,
        }
    }

    #[test]
    fn effective_rate_arithmetic() {
        let cfg = RateConfig::default();
        assert_eq!(effective_rate(0.0, &cfg, SchemeId::AoMmse).unwrap(), 0.0);
        assert!((effective_rate(1.0, &cfg, SchemeId::FixedOrientation).unwrap() - 1.0).abs() < 1e-15);
        assert!((effective_rate(3.0, &cfg, SchemeId::AoMmse).unwrap() - 1.9).abs() < 1e-14);
        assert!(effective_rate(-1.0, &cfg, SchemeId::AoMmse).is_err());
    }

    #[test]
    fn overhead_assignment() {
        let cfg = RateConfig::default();
        for s in SchemeId::ALL {
            let expect = if matches!(s, SchemeId::FixedOrientation | SchemeId::Isotropic) {
                0.0
            } else {
                0.05
            };
            assert_eq!(cfg.overhead(s), expect);
            assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
        }
        assert!("bogus".parse::<SchemeId>().is_err());
    }

    #[test]
    fn cap_sampling_mean_height() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = PI / 6.0;
        let mean: f64 = (0..100_000)
            .map(|_| sample_cap(&mut rng, theta).as_vector().z)
            .sum::<f64>()
            / 1e5;
        let expect = (1.0 + theta.cos()) / 2.0;
        assert!((mean - expect).abs() <= 0.01 * expect);
    }

    #[test]
    fn random_orientation_properties() {
        let sc = scenario(2, 3, 2);
        let a = random_orientation(&sc, 5).unwrap();
        let b = random_orientation(&sc, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.pointing.iter().all(|f| f.zenith() <= sc.theta_max + 1e-12));
        let z = sc.with_theta_max(0.0);
        let r = random_orientation(&z, 9).unwrap();
        let f = fixed_orientation(&z).unwrap();
        assert!((r.min_sinr() - f.min_sinr()).abs() <= 1e-12 * f.min_sinr());
    }

    #[test]
    fn array_wise_properties() {
        let sc = scenario(3, 3, 2);
        let coarse = array_wise(&sc, 3).unwrap();
        let fine = array_wise(&sc, 5).unwrap();
        let fixed = fixed_orientation(&sc).unwrap();
        // The 5-point grid contains the 3-point grid.
        assert!(fine.min_sinr() >= coarse.min_sinr() * (1.0 - 1e-12));
        assert!(coarse.min_sinr() >= fixed.min_sinr() * (1.0 - 1e-12));
        let f0 = fine.pointing[0];
        assert!(fine.pointing.iter().all(|f| *f == f0));
        assert!(array_wise(&sc, 1).is_err());
    }

    #[test]
    fn array_wise_on_axis_user_picks_boresight() {
        let mut sc = scenario(4, 1, 0);
        sc.users[0].placement = UserPlacement::new(40.0, PI / 2.0, 0.0).unwrap();
        let s = array_wise(&sc, 16).unwrap();
        assert!(s.pointing[0].zenith() < 1e-12);
    }

    #[test]
    fn fixed_orientation_is_boresight_and_seed_free() {
        let sc = scenario(5, 2, 2);
        let s = fixed_orientation(&sc).unwrap();
        assert!(s.pointing.iter().all(|f| f.zenith() == 0.0));
        let settings = SchemeSettings::default();
        let a = run_scheme(SchemeId::FixedOrientation, &sc, 1, &settings).unwrap();
        let b = run_scheme(SchemeId::FixedOrientation, &sc, 2, &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn isotropic_channels_ignore_pointing() {
        let sc = scenario(6, 2, 3).with_pattern(GainPattern::new(0.0).unwrap());
        let geom = ChannelGeometry::new(&sc).unwrap();
        let a = geom.channel_matrix(&sc.boresight_pointing()).unwrap();
        let b = geom
            .channel_matrix(&vec![PointingVector::from_angles(0.4, 1.0); 9])
            .unwrap();
        assert!((a.entries - b.entries).iter().all(|d| d.norm() < 1e-18));
        let p = GainPattern::new(0.0).unwrap();
        assert_eq!(p.g0(), 2.0);
        assert_eq!(directional_gain(&p, 0.3), 2.0);
        assert_eq!(directional_gain(&p, 2.0), 0.0);
        let s = isotropic(&scenario(6, 2, 3)).unwrap();
        assert!(s.min_sinr() > 0.0);
    }

    #[test]
    fn isotropic_power_conservation() {
        let p = GainPattern::new(0.0).unwrap();
        let cfg = QuadConfig::default();
        let v = integrate_2d(
            |t: f64, _a: f64| directional_gain(&p, t) * t.sin(),
            (0.0, PI),
            (0.0, 2.0 * PI),
            &[PI / 2.0],
            |_| vec![],
            &cfg,
        )
        .unwrap();
        assert!((v.value - 4.0 * PI).abs() <= 1e-9 * 4.0 * PI);
    }

    #[test]
    fn ao_dominates_grid_and_fixed() {
        let sc = scenario(7, 3, 4);
        let settings = SchemeSettings {
            array_grid: 8,
            ..SchemeSettings::default()
        };
        let ao = run_scheme(SchemeId::AoMmse, &sc, 0, &settings).unwrap();
        let fixed = run_scheme(SchemeId::FixedOrientation, &sc, 0, &settings).unwrap();
        let grid = run_scheme(SchemeId::ArrayWise, &sc, 0, &settings).unwrap();
        assert!(ao.min_sinr() >= fixed.min_sinr());
        assert!(ao.min_sinr() >= grid.min_sinr());
    }

    #[test]
    fn closed_form_single_user_is_optimal_pointing() {
        let sc = scenario(8, 1, 0);
        let s = closed_form_single_user(&sc).unwrap();
        let u = sc.user_positions()[0];
        for (w, f) in sc.array.positions().iter().zip(&s.pointing) {
            let d: Vector3<f64> = (u - w).normalize();
            assert!(f.dot(&d) >= PointingVector::boresight().dot(&d));
        }
        assert!(closed_form_single_user(&scenario(8, 2, 0)).is_err());
    }
}

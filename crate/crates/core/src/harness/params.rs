//! System defaults, scenario generation and scenario digests.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{dbm_to_watts, GainPattern, Scatterer, Scenario, User};
use crate::error::{Error, Result};
use crate::geometry::{user_position, ArrayConfig, UserPlacement};

/// Physical parameters shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParameters {
    pub wavelength_m: f64,
    pub noise_power_dbm: f64,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Effective element area; `lambda^2 / (4 pi)` when absent.
    pub element_area_m2: Option<f64>,
    pub n_x: usize,
    pub n_y: usize,
    pub power_dbm: f64,
    pub theta_max_rad: f64,
    pub directivity_p: f64,
    /// CSI error power; zero when absent.
    pub csi_error_dbm: Option<f64>,
}

impl Default for SystemParameters {
    fn default() -> Self {
        Self {
            wavelength_m: 0.125,
            noise_power_dbm: -80.0,
            spacing_wavelengths: 0.5,
            element_area_m2: None,
            n_x: 4,
            n_y: 4,
            power_dbm: 10.0,
            theta_max_rad: PI / 6.0,
            directivity_p: 1.0,
            csi_error_dbm: None,
        }
    }
}

/// The default system: 2.4 GHz, -80 dBm noise, half-wavelength 4 x 4 UPA,
/// 10 dBm users and a pi/6 rotation cap.
pub fn default_parameters() -> SystemParameters {
    SystemParameters::default()
}

impl SystemParameters {
    pub fn element_area(&self) -> f64 {
        self.element_area_m2
            .unwrap_or(self.wavelength_m * self.wavelength_m / (4.0 * PI))
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_wavelengths * self.wavelength_m
    }

    pub fn array(&self) -> Result<ArrayConfig> {
        ArrayConfig::new(
            self.n_x,
            self.n_y,
            self.spacing(),
            self.element_area(),
            self.wavelength_m,
        )
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn power_w(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    /// `P / sigma^2`.
    pub fn snr_scale(&self) -> f64 {
        self.power_w() / self.noise_power_w()
    }

    pub fn occupation_ratio(&self) -> f64 {
        self.element_area() / self.spacing().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.wavelength_m,
            self.noise_power_dbm,
            self.spacing_wavelengths,
            self.power_dbm,
            self.theta_max_rad,
            self.directivity_p,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("system parameters must be finite".into()));
        }
        if !(self.wavelength_m > 0.0 && self.spacing_wavelengths > 0.0) {
            return Err(Error::Config("wavelength and spacing must be positive".into()));
        }
        if !(0.0..=PI / 2.0).contains(&self.theta_max_rad) {
            return Err(Error::Config("theta_max_rad must lie in [0, pi/2]".into()));
        }
        GainPattern::new(self.directivity_p)?;
        self.array()?;
        Ok(())
    }

    /// Scenario with the given users and scatterers under these parameters.
    pub fn scenario(&self, placements: &[UserPlacement], scatterers: Vec<Scatterer>) -> Result<Scenario> {
        let sc = Scenario {
            array: self.array()?,
            users: placements
                .iter()
                .map(|p| User {
                    placement: *p,
                    power_w: self.power_w(),
                })
                .collect(),
            scatterers,
            noise_power_w: self.noise_power_w(),
            pattern: GainPattern::new(self.directivity_p)?,
            theta_max: self.theta_max_rad,
            csi_error_power_w: self.csi_error_dbm.map_or(0.0, dbm_to_watts),
        };
        sc.validate()?;
        Ok(sc)
    }
}

/// Random user and scatterer layout of the multi-user experiments.
///
/// Users sit at zenith `psi` on evenly spaced azimuths across the front
/// half-space. Each scatterer is attached round-robin to a user and drawn
/// uniformly in a ball around it, rejecting points at or below `min_height_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiUserLayout {
    pub num_users: usize,
    pub zenith_psi: f64,
    /// Explicit azimuths; evenly spaced over (-pi/2, pi/2) when absent.
    pub azimuths: Option<Vec<f64>>,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub num_scatterers: usize,
    pub cluster_radius_m: f64,
    pub min_height_m: f64,
    pub rcs_min: f64,
    pub rcs_max: f64,
}

impl Default for MultiUserLayout {
    fn default() -> Self {
        Self {
            num_users: 4,
            zenith_psi: PI / 2.0,
            azimuths: None,
            range_min_m: 30.0,
            range_max_m: 50.0,
            num_scatterers: 8,
            cluster_radius_m: 5.0,
            min_height_m: 0.5,
            rcs_min: 0.5,
            rcs_max: 1.5,
        }
    }
}

impl MultiUserLayout {
    /// `-pi/2 + (2k + 1) pi / (2K)`, i.e. `{+-pi/8, +-3pi/8}` for four users.
    pub fn user_azimuths(&self) -> Vec<f64> {
        match &self.azimuths {
            Some(a) => a.clone(),
            None => (0..self.num_users)
                .map(|k| -PI / 2.0 + (2 * k + 1) as f64 * PI / (2 * self.num_users) as f64)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::Config("at least one user is required".into()));
        }
        if self.user_azimuths().len() != self.num_users {
            return Err(Error::Config("one azimuth per user is required".into()));
        }
        if !(self.range_min_m > 0.0 && self.range_min_m <= self.range_max_m) {
            return Err(Error::Config("user range interval is invalid".into()));
        }
        if !(self.cluster_radius_m > 0.0 && self.rcs_min > 0.0 && self.rcs_min <= self.rcs_max) {
            return Err(Error::Config("scatterer parameters are invalid".into()));
        }
        Ok(())
    }
}

/// Multi-user scenario with the default parameters and layout.
pub fn generate_multiuser_scenario(seed: u64) -> Result<Scenario> {
    generate_multiuser_scenario_with(&default_parameters(), &MultiUserLayout::default(), seed)
}

pub fn generate_multiuser_scenario_with(
    params: &SystemParameters,
    layout: &MultiUserLayout,
    seed: u64,
) -> Result<Scenario> {
    layout.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let placements = layout
        .user_azimuths()
        .into_iter()
        .map(|phi| {
            let r = if layout.range_min_m < layout.range_max_m {
                rng.random_range(layout.range_min_m..layout.range_max_m)
            } else {
                layout.range_min_m
            };
            UserPlacement::new(r, layout.zenith_psi, phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let users: Vec<_> = placements.iter().map(user_position).collect();

    let mut scatterers = Vec::with_capacity(layout.num_scatterers);
    for q in 0..layout.num_scatterers {
        let centre = users[q % users.len()];
        let rad = layout.cluster_radius_m;
        let mut tries = 0;
        let position = loop {
            tries += 1;
            if tries > 100_000 {
                return Err(Error::Config("no scatterer position above the minimum height".into()));
            }
            let d = Vector3::new(
                rng.random_range(-rad..rad),
                rng.random_range(-rad..rad),
                rng.random_range(-rad..rad),
            );
            if d.norm() > rad {
                continue;
            }
            let p: Point3<f64> = centre + d;
            if p.z > layout.min_height_m {
                break p;
            }
        };
        let rcs_sigma = if layout.rcs_min < layout.rcs_max {
            rng.random_range(layout.rcs_min..layout.rcs_max)
        } else {
            layout.rcs_min
        };
        scatterers.push(Scatterer {
            position,
            rcs_sigma,
            phase_chi: rng.random_range(0.0..2.0 * PI),
        });
    }
    params.scenario(&placements, scatterers)
}

/// SHA-256 over the exact bit patterns of every scenario quantity.
pub fn scenario_digest(scenario: &Scenario) -> String {
    let mut h = Sha256::new();
    let mut put = |x: f64| h.update(x.to_le_bytes());
    let a = &scenario.array;
    put(a.n_x as f64);
    put(a.n_y as f64);
    put(a.spacing_delta);
    put(a.element_area);
    put(a.wavelength);
    put(scenario.users.len() as f64);
    for u in &scenario.users {
        put(u.placement.range_r);
        put(u.placement.zenith_psi);
        put(u.placement.azimuth_phi);
        put(u.power_w);
    }
    put(scenario.scatterers.len() as f64);
    for s in &scenario.scatterers {
        put(s.position.x);
        put(s.position.y);
        put(s.position.z);
        put(s.rcs_sigma);
        put(s.phase_chi);
    }
    put(scenario.noise_power_w);
    put(scenario.pattern.p());
    put(scenario.theta_max);
    put(scenario.csi_error_power_w);
    hex::encode(h.finalize())
}

/// Seed of trial `index` under `base`: one SplitMix64 output.
pub fn splitmix(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

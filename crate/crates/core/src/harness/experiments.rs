//! Experiment definitions, Monte-Carlo trial runner and CSV export.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{parse_schemes, RunConfig};
use super::params::{generate_multiuser_scenario_with, scenario_digest, splitmix, MultiUserLayout, SystemParameters};
use super::stats::{mean, std_error};
use crate::baselines::{effective_rate, run_scheme, RateConfig, SchemeId, SchemeSettings};
use crate::channel::{linear_to_db, watts_to_dbm, GainPattern};
use crate::error::{Error, Result};
use crate::geometry::{user_position, ArrayConfig, UserPlacement};
use crate::single_user::{asymptotic_ula, lemma1_snr, optimal_pointing_snr, theorem1_snr, UlaAnalysisInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    UlaSweep,
    UpaDirectivity,
    AzimuthSweep,
    Convergence,
    PowerSweep,
    ThetaMaxSweep,
    MultiuserDirectivity,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::UlaSweep,
        ExperimentId::UpaDirectivity,
        ExperimentId::AzimuthSweep,
        ExperimentId::Convergence,
        ExperimentId::PowerSweep,
        ExperimentId::ThetaMaxSweep,
        ExperimentId::MultiuserDirectivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::UlaSweep => "ula_sweep",
            ExperimentId::UpaDirectivity => "upa_directivity",
            ExperimentId::AzimuthSweep => "azimuth_sweep",
            ExperimentId::Convergence => "convergence",
            ExperimentId::PowerSweep => "power_sweep",
            ExperimentId::ThetaMaxSweep => "theta_max_sweep",
            ExperimentId::MultiuserDirectivity => "multiuser_directivity",
        }
    }

    pub fn is_single_user(self) -> bool {
        matches!(
            self,
            ExperimentId::UlaSweep | ExperimentId::UpaDirectivity | ExperimentId::AzimuthSweep
        )
    }

    /// Name of the swept quantity as written in the CSV header.
    pub fn sweep_label(self) -> &'static str {
        match self {
            ExperimentId::UlaSweep => "n_x",
            ExperimentId::UpaDirectivity | ExperimentId::MultiuserDirectivity => "directivity_p",
            ExperimentId::AzimuthSweep => "azimuth_rad",
            ExperimentId::Convergence => "array_side",
            ExperimentId::PowerSweep => "power_dbm",
            ExperimentId::ThetaMaxSweep => "theta_max_rad",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            ExperimentId::UlaSweep => [1, 3, 5, 11, 21, 51, 101, 201, 301, 401, 501].map(f64::from).to_vec(),
            ExperimentId::UpaDirectivity => vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0],
            ExperimentId::AzimuthSweep => (-8..=8).map(|i| i as f64 * PI / 18.0).collect(),
            ExperimentId::Convergence => vec![2.0, 3.0, 4.0, 5.0],
            ExperimentId::PowerSweep => vec![0.0, 5.0, 10.0, 15.0, 20.0],
            ExperimentId::ThetaMaxSweep => vec![0.0, PI / 10.0, PI / 6.0, 3.0 * PI / 10.0, 2.0 * PI / 5.0],
            ExperimentId::MultiuserDirectivity => vec![0.5, 1.0, 2.0, 4.0, 6.0, 8.0],
        }
    }

    pub fn default_schemes(self) -> Vec<SchemeId> {
        use SchemeId::*;
        match self {
            ExperimentId::Convergence => vec![AoMmse],
            ExperimentId::PowerSweep => vec![AoMmse, AoZf, TwoStage, FixedOrientation],
            ExperimentId::ThetaMaxSweep | ExperimentId::MultiuserDirectivity => {
                vec![AoMmse, ArrayWise, RandomOrientation, FixedOrientation, Isotropic]
            }
            _ => vec![],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Single-user geometry of the analysis experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleUserSetup {
    pub range_m: f64,
    pub zenith_psi: f64,
    /// User azimuth of the ULA sweep.
    pub ula_azimuth: f64,
    /// User azimuth of the UPA directivity sweep.
    pub upa_azimuth: f64,
    pub directivity_p: f64,
}

impl Default for SingleUserSetup {
    fn default() -> Self {
        Self {
            range_m: 15.0,
            zenith_psi: PI / 2.0,
            ula_azimuth: 5.0 * PI / 12.0,
            upa_azimuth: PI / 7.0,
            directivity_p: 0.5,
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub schemes: Vec<SchemeId>,
    pub output: Option<PathBuf>,
    pub params: SystemParameters,
    pub layout: MultiUserLayout,
    pub single_user: SingleUserSetup,
    pub settings: SchemeSettings,
    pub rate: RateConfig,
}

impl ExperimentSpec {
    /// Defaults for `id` with 100 trials.
    pub fn new(id: ExperimentId) -> Self {
        Self::from_config(id, &RunConfig::default()).expect("default configuration is valid")
    }

    pub fn from_config(id: ExperimentId, cfg: &RunConfig) -> Result<Self> {
        let schemes = match &cfg.experiment.schemes {
            Some(s) => parse_schemes(s)?,
            None => id.default_schemes(),
        };
        let spec = Self {
            id,
            grid: cfg.experiment.grid.clone().unwrap_or_else(|| id.default_grid()),
            trials: cfg.experiment.trials.unwrap_or(100),
            base_seed: cfg.experiment.base_seed.unwrap_or(1),
            schemes,
            output: None,
            params: cfg.system.clone(),
            layout: cfg.layout.clone(),
            single_user: cfg.single_user.clone(),
            settings: cfg.scheme_settings(),
            rate: cfg.rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.grid.is_empty() || self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid must be non-empty and finite".into()));
        }
        if !self.id.is_single_user() && self.schemes.is_empty() {
            return Err(Error::Config("scheme list is empty".into()));
        }
        if self.id == ExperimentId::UlaSweep && self.grid.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return Err(Error::Config("ula_sweep grid must hold positive integers".into()));
        }
        if self.id == ExperimentId::Convergence && self.grid.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return Err(Error::Config("convergence grid must hold positive integers".into()));
        }
        self.params.validate()?;
        self.layout.validate()
    }

    /// System parameters at one sweep point.
    pub fn params_at(&self, value: f64) -> SystemParameters {
        let mut p = self.params.clone();
        match self.id {
            ExperimentId::Convergence => {
                p.n_x = value as usize;
                p.n_y = value as usize;
            }
            ExperimentId::PowerSweep => p.power_dbm = value,
            ExperimentId::ThetaMaxSweep => p.theta_max_rad = value,
            ExperimentId::MultiuserDirectivity => p.directivity_p = value,
            _ => {}
        }
        p
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        splitmix(self.base_seed, trial as u64)
    }
}

/// Result of one scheme on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: SchemeId,
    /// `Err` holds the failure message; failed runs are excluded from means.
    pub result: std::result::Result<SchemeValues, String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeValues {
    pub min_sinr: f64,
    pub effective_rate: f64,
    pub iterations: usize,
    /// Effective rate after each outer iteration (one entry for one-shot schemes).
    pub rate_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub digest: String,
    pub outcomes: Vec<SchemeOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, scheme: SchemeId) -> Option<&SchemeValues> {
        self.outcomes
            .iter()
            .find(|o| o.scheme == scheme)
            .and_then(|o| o.result.as_ref().ok())
    }
}

fn run_one(spec: &ExperimentSpec, value: f64, trial: usize) -> TrialRecord {
    let seed = spec.trial_seed(trial);
    let params = spec.params_at(value);
    let scenario = match generate_multiuser_scenario_with(&params, &spec.layout, seed) {
        Ok(s) => s,
        Err(e) => {
            return TrialRecord {
                sweep_value: value,
                trial,
                seed,
                digest: String::new(),
                outcomes: spec
                    .schemes
                    .iter()
                    .map(|s| SchemeOutcome {
                        scheme: *s,
                        result: Err(e.to_string()),
                        wall_time_s: 0.0,
                    })
                    .collect(),
            }
        }
    };
    let outcomes = spec
        .schemes
        .iter()
        .map(|&scheme| {
            let t0 = Instant::now();
            let result = run_scheme(scheme, &scenario, splitmix(seed, 0x5EED), &spec.settings).and_then(|sol| {
                let rate = |s: f64| effective_rate(s.max(0.0), &spec.rate, scheme);
                Ok(SchemeValues {
                    min_sinr: sol.min_sinr(),
                    effective_rate: rate(sol.min_sinr())?,
                    iterations: sol.iterations,
                    rate_trace: sol.eta_trace.iter().map(|e| rate(*e)).collect::<Result<_>>()?,
                })
            });
            SchemeOutcome {
                scheme,
                result: result.map_err(|e| e.to_string()),
                wall_time_s: t0.elapsed().as_secs_f64(),
            }
        })
        .collect();
    TrialRecord {
        sweep_value: value,
        trial,
        seed,
        digest: scenario_digest(&scenario),
        outcomes,
    }
}

/// All trials of one sweep point, in trial order regardless of scheduling.
pub fn run_trials(spec: &ExperimentSpec, value: f64) -> Vec<TrialRecord> {
    (0..spec.trials)
        .into_par_iter()
        .map(|i| run_one(spec, value, i))
        .collect()
}

/// Tabular experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub records: Vec<TrialRecord>,
}

impl ExperimentOutput {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn single_user_rows(spec: &ExperimentSpec) -> Result<Vec<Vec<String>>> {
    let su = &spec.single_user;
    let p = &spec.params;
    let pattern = GainPattern::new(su.directivity_p)?;
    let snr = p.snr_scale();
    let mut rows = Vec::new();
    let mut push = |x: f64, series: &str, v: f64| {
        rows.push(vec![
            spec.id.name().to_string(),
            num(x),
            series.to_string(),
            num(v),
            num(linear_to_db(v)),
            num(watts_to_dbm(v * p.noise_power_w())),
        ]);
    };
    for &x in &spec.grid {
        match spec.id {
            ExperimentId::UlaSweep => {
                let n_x = x as usize;
                let cfg = ArrayConfig::new(n_x, 1, p.spacing(), p.element_area(), p.wavelength_m)?;
                let user = UserPlacement::new(su.range_m, su.zenith_psi, su.ula_azimuth)?;
                let delta = p.spacing() / su.range_m;
                let mut input = UlaAnalysisInput::new(n_x, delta, p.theta_max_rad, snr, p.occupation_ratio());
                input.directivity_p = su.directivity_p;
                // The closed forms cover the cosine pattern only.
                let closed = if su.directivity_p != 0.5 {
                    None
                } else if su.ula_azimuth == 0.0 {
                    Some(theorem1_snr(&input)?)
                } else {
                    Some(lemma1_snr(&input, su.ula_azimuth)?)
                };
                let pos = user_position(&user);
                let ra = optimal_pointing_snr(&cfg, &pos, &pattern, p.theta_max_rad, snr)?;
                let fixed = optimal_pointing_snr(&cfg, &pos, &pattern, 0.0, snr)?;
                let eff = delta / su.ula_azimuth.cos();
                if let Some(c) = closed {
                    push(x, "ra_closed_form", c);
                }
                push(x, "ra_exact", ra);
                push(x, "fixed_exact", fixed);
                push(
                    x,
                    "ra_asymptote",
                    asymptotic_ula(p.theta_max_rad, snr, p.occupation_ratio(), eff),
                );
                push(
                    x,
                    "fixed_asymptote",
                    asymptotic_ula(0.0, snr, p.occupation_ratio(), eff),
                );
            }
            ExperimentId::UpaDirectivity | ExperimentId::AzimuthSweep => {
                let (pp, phi) = if spec.id == ExperimentId::UpaDirectivity {
                    (x, su.upa_azimuth)
                } else {
                    (su.directivity_p, x)
                };
                let pattern = GainPattern::new(pp)?;
                let cfg = p.array()?;
                let pos = user_position(&UserPlacement::new(su.range_m, su.zenith_psi, phi)?);
                push(
                    x,
                    "ra_exact",
                    optimal_pointing_snr(&cfg, &pos, &pattern, p.theta_max_rad, snr)?,
                );
                push(x, "fixed_exact", optimal_pointing_snr(&cfg, &pos, &pattern, 0.0, snr)?);
                if spec.id == ExperimentId::UpaDirectivity {
                    let iso = GainPattern::new(0.0)?;
                    push(x, "isotropic_exact", optimal_pointing_snr(&cfg, &pos, &iso, 0.0, snr)?);
                }
            }
            _ => unreachable!("multi-user experiment"),
        }
    }
    Ok(rows)
}

/// Runs the experiment and writes the CSV when `spec.output` is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let out = if spec.id.is_single_user() {
        ExperimentOutput {
            header: [
                "experiment",
                spec.id.sweep_label(),
                "series",
                "snr_linear",
                "snr_db",
                "received_power_dbm",
            ]
            .map(String::from)
            .to_vec(),
            rows: single_user_rows(spec)?,
            records: vec![],
        }
    } else {
        multi_user_output(spec)
    };
    if let Some(path) = &spec.output {
        out.write_csv(path)?;
    }
    Ok(out)
}

fn multi_user_output(spec: &ExperimentSpec) -> ExperimentOutput {
    let trace_len = spec.settings.ao.max_outer_iters + 1;
    let mut header: Vec<String> = [
        "experiment",
        spec.id.sweep_label(),
        "scheme",
        "status",
        "trials",
        "ok_trials",
        "mean_min_sinr",
        "mean_min_sinr_db",
        "stderr_min_sinr",
        "mean_rate",
        "stderr_rate",
        "mean_iterations",
    ]
    .map(String::from)
    .to_vec();
    if spec.id == ExperimentId::Convergence {
        header.extend((0..trace_len).map(|i| format!("rate_iter_{i}")));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &x in &spec.grid {
        let recs = run_trials(spec, x);
        for &scheme in &spec.schemes {
            let ok: Vec<&SchemeValues> = recs.iter().filter_map(|r| r.outcome(scheme)).collect();
            let sinr: Vec<f64> = ok.iter().map(|v| v.min_sinr).collect();
            let rate: Vec<f64> = ok.iter().map(|v| v.effective_rate).collect();
            let iters: Vec<f64> = ok.iter().map(|v| v.iterations as f64).collect();
            let status = if ok.len() == recs.len() {
                "ok"
            } else if ok.is_empty() {
                "failed"
            } else {
                "partial"
            };
            let mut row = vec![
                spec.id.name().to_string(),
                num(x),
                scheme.name().to_string(),
                status.to_string(),
                recs.len().to_string(),
                ok.len().to_string(),
                num(mean(&sinr)),
                num(linear_to_db(mean(&sinr))),
                num(std_error(&sinr)),
                num(mean(&rate)),
                num(std_error(&rate)),
                num(mean(&iters)),
            ];
            if spec.id == ExperimentId::Convergence {
                for i in 0..trace_len {
                    let at: Vec<f64> = ok.iter().map(|v| v.rate_trace[i.min(v.rate_trace.len() - 1)]).collect();
                    row.push(num(mean(&at)));
                }
            }
            rows.push(row);
        }
        records.extend(recs);
    }
    ExperimentOutput { header, rows, records }
}

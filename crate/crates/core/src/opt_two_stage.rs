//! Two-stage design: pointing from a semidefinite relaxation of the ZF SNR
//! under the unit-directivity linear channel, then ZF receive beamforming on
//! the true channels.

use log::warn;
use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;

use crate::beamforming::zf_diagnostics;
use crate::channel::{min_sinr, sinr_with_scales, ChannelGeometry, GainPattern, Scenario};
use crate::error::{Error, Result};
use crate::geometry::PointingVector;
use crate::opt_ao::{beamformers, fixed_solution, BeamformerKind, Solution, SolutionStatus};
use crate::solvers::{rank_one_extract, solve_sdp, SdpProblem, SdpSolution};

/// Smallest weight handed to the relaxation.
const MIN_WEIGHT: f64 = 1e-9;

/// Per-antenna coefficients `m_{k,n}` with `h_{k,n}(f) = f^T m_{k,n}` at `p = 1`.
#[derive(Debug, Clone)]
pub struct LinearChannelSurrogate {
    /// Indexed `[k][n]`.
    pub m: Vec<Vec<Vector3<Complex64>>>,
}

impl LinearChannelSurrogate {
    pub fn num_users(&self) -> usize {
        self.m.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.m.first().map_or(0, Vec::len)
    }

    /// Unclamped linear channels, N x K.
    pub fn channel(&self, pointing: &[PointingVector]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.num_antennas(), self.num_users(), |n, k| {
            let f = pointing[n].as_vector();
            self.m[k][n].x * f.x + self.m[k][n].y * f.y + self.m[k][n].z * f.z
        })
    }
}

pub fn build_surrogate(scenario: &Scenario) -> Result<LinearChannelSurrogate> {
    let geom = ChannelGeometry::with_pattern(scenario, &GainPattern::new(1.0)?)?;
    let m = (0..geom.num_users())
        .map(|k| {
            (0..geom.num_antennas())
                .map(|n| geom.linear_coefficient(k, n))
                .collect()
        })
        .collect();
    Ok(LinearChannelSurrogate { m })
}

/// ZF SNR weights `rho_k = 1 - rho_ZF,k` at the reference orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct StageWeights {
    pub rho: Vec<f64>,
    /// Set when the reference channel was rank deficient and `rho = 1` was used.
    pub fallback: bool,
}

pub fn stage_weights(scenario: &Scenario) -> Result<StageWeights> {
    let geom = ChannelGeometry::with_pattern(scenario, &GainPattern::new(1.0)?)?;
    let h = geom.channel_matrix(&scenario.boresight_pointing())?;
    match zf_diagnostics(&h, &scenario.snr_scales()) {
        Ok(d) => Ok(StageWeights {
            rho: d.snr_loss_rho.iter().map(|r| (1.0 - r).clamp(0.0, 1.0)).collect(),
            fallback: false,
        }),
        Err(Error::Rank(_)) | Err(Error::Degenerate(_)) => {
            warn!("reference channel is rank deficient; using unit ZF weights");
            Ok(StageWeights {
                rho: vec![1.0; scenario.num_users()],
                fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Everything produced by one two-stage run.
#[derive(Debug, Clone)]
pub struct TwoStageReport {
    pub solution: Solution,
    pub weights: StageWeights,
    /// `None` when the relaxation failed and the fixed orientation was used.
    pub sdp: Option<SdpSolution>,
    /// Relaxed objective of the extracted rank-one pointing.
    pub extracted_objective: Option<f64>,
    /// Largest `|f^T m - h|` between surrogate and clamped unit-directivity
    /// channels at the extracted pointing.
    pub surrogate_mismatch: Option<f64>,
}

fn sdp_problem(scenario: &Scenario, surrogate: &LinearChannelSurrogate, weights: &StageWeights) -> SdpProblem {
    let scales = scenario.snr_scales();
    SdpProblem {
        weights: weights
            .rho
            .iter()
            .zip(&scales)
            .map(|(r, s)| r.max(MIN_WEIGHT) * s)
            .collect(),
        coefficients: surrogate.m.clone(),
        theta_max: scenario.theta_max,
    }
}

fn rank_one_blocks(pointing: &[PointingVector]) -> Vec<Matrix3<f64>> {
    pointing
        .iter()
        .map(|f| f.as_vector() * f.as_vector().transpose())
        .collect()
}

/// Runs both stages and keeps the intermediate results.
pub fn two_stage_detailed(scenario: &Scenario) -> Result<TwoStageReport> {
    scenario.validate()?;
    if scenario.num_antennas() < scenario.num_users() {
        return Err(Error::Precondition("two-stage design needs N >= K".into()));
    }
    let surrogate = build_surrogate(scenario)?;
    let weights = stage_weights(scenario)?;
    let problem = sdp_problem(scenario, &surrogate, &weights);

    let stage1 = solve_sdp(&problem).and_then(|sol| {
        let pointing = rank_one_extract(&sol.blocks, scenario.theta_max)?;
        Ok((sol, pointing))
    });
    let (sdp, pointing) = match stage1 {
        Ok(v) => v,
        Err(e) => {
            warn!("relaxation failed ({e}); using the fixed orientation");
            let mut fixed = fixed_solution(scenario, BeamformerKind::Zf)?;
            fixed.status = SolutionStatus::Fallback;
            fixed.warning = Some(format!("relaxation failed: {e}"));
            return Ok(TwoStageReport {
                solution: fixed,
                weights,
                sdp: None,
                extracted_objective: None,
                surrogate_mismatch: None,
            });
        }
    };
    let extracted_objective = problem.objective(&rank_one_blocks(&pointing));

    let unit = ChannelGeometry::with_pattern(scenario, &GainPattern::new(1.0)?)?.channel_matrix(&pointing)?;
    let mismatch = (surrogate.channel(&pointing) - &unit.entries)
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max);

    let geom = ChannelGeometry::new(scenario)?;
    let h = geom.channel_matrix(&pointing)?;
    let scales = scenario.snr_scales();
    let (v, zf_fallback) = beamformers(&h, &scales, BeamformerKind::Zf)?;
    let sinrs = sinr_with_scales(&v, &h, &scales)?;
    let eta = min_sinr(&sinrs);
    let (status, warning) = if zf_fallback {
        (
            SolutionStatus::Fallback,
            Some("ZF rank deficient; MMSE used".to_string()),
        )
    } else {
        (SolutionStatus::Converged, None)
    };
    Ok(TwoStageReport {
        solution: Solution {
            pointing,
            beamformers: v,
            sinrs,
            eta_trace: vec![eta],
            iterations: 1,
            status,
            warning,
        },
        weights,
        sdp: Some(sdp),
        extracted_objective: Some(extracted_objective),
        surrogate_mismatch: Some(mismatch),
    })
}

pub fn two_stage_optimize(scenario: &Scenario) -> Result<Solution> {
    two_stage_detailed(scenario).map(|r| r.solution)
}

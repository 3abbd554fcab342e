//! Alternating optimisation of receive beamformers and antenna pointing.
//!
//! Each outer iteration fixes the pointing matrix and computes the
//! beamformers, then fixes the beamformers and takes one SCA step on the
//! pointing. The SCA candidate is normalised per antenna and accepted
//! through a backtracking search on the true max-min SINR, so the objective
//! trace never decreases.

use log::warn;
use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamforming::{mmse_matrix, zf_matrix, BeamformingMatrix};
use crate::channel::{min_sinr, sinr_with_scales, ChannelGeometry, ChannelMatrix, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{is_feasible_pointing, PointingVector};
use crate::single_user::optimal_pointing;
use crate::solvers::{solve_sca_subproblem, ScaSubproblem};

const BACKTRACK_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPointing {
    AllE3,
    TowardStrongestUser,
    Provided(Vec<PointingVector>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerKind {
    Mmse,
    Zf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    pub epsilon_converge: f64,
    pub max_outer_iters: usize,
    /// SCA subproblems per outer iteration.
    pub sca_inner_iters: usize,
    pub init_pointing: InitPointing,
    pub beamformer: BeamformerKind,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            epsilon_converge: 1e-3,
            max_outer_iters: 30,
            sca_inner_iters: 1,
            init_pointing: InitPointing::AllE3,
            beamformer: BeamformerKind::Mmse,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_converge > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.sca_inner_iters == 0 {
            return Err(Error::InvalidParameter("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Converged,
    MaxIterations,
    /// A fallback configuration was returned; see `Solution::warning`.
    Fallback,
}

/// Pointing, beamformers and resulting SINRs of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub pointing: Vec<PointingVector>,
    pub beamformers: BeamformingMatrix,
    pub sinrs: Vec<f64>,
    pub eta_trace: Vec<f64>,
    pub iterations: usize,
    pub status: SolutionStatus,
    pub warning: Option<String>,
}

impl Solution {
    pub fn min_sinr(&self) -> f64 {
        min_sinr(&self.sinrs)
    }
}

/// Beamformers for `h`; ZF falls back to MMSE when the interferers are rank
/// deficient. The flag reports whether the fallback was used.
pub fn beamformers(h: &ChannelMatrix, scales: &[f64], kind: BeamformerKind) -> Result<(BeamformingMatrix, bool)> {
    match kind {
        BeamformerKind::Mmse => Ok((mmse_matrix(h, scales)?, false)),
        BeamformerKind::Zf => match zf_matrix(h) {
            Ok(v) => Ok((v, false)),
            Err(Error::Rank(_)) | Err(Error::Degenerate(_)) => Ok((mmse_matrix(h, scales)?, true)),
            Err(e) => Err(e),
        },
    }
}

/// Evaluates a pointing matrix: beamformers, SINRs and objective.
pub fn evaluate_pointing(
    geom: &ChannelGeometry,
    pointing: &[PointingVector],
    scales: &[f64],
    kind: BeamformerKind,
) -> Result<(BeamformingMatrix, Vec<f64>)> {
    let h = geom.channel_matrix(pointing)?;
    let (v, _) = beamformers(&h, scales, kind)?;
    let s = sinr_with_scales(&v, &h, scales)?;
    Ok((v, s))
}

/// Fixed-orientation solution with the given beamformer.
pub fn fixed_solution(scenario: &Scenario, kind: BeamformerKind) -> Result<Solution> {
    let geom = ChannelGeometry::new(scenario)?;
    let pointing = scenario.boresight_pointing();
    let (v, sinrs) = evaluate_pointing(&geom, &pointing, &scenario.snr_scales(), kind)?;
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

/// First-order model of the SINR constraints around `f_ref` for fixed `v`.
pub fn linearize(f_ref: &[PointingVector], v: &BeamformingMatrix, scenario: &Scenario) -> Result<ScaSubproblem> {
    let geom = ChannelGeometry::new(scenario)?;
    linearize_with(&geom, f_ref, v, &scenario.snr_scales(), scenario.theta_max)
}

/// As [`linearize`] with precomputed channel geometry.
pub fn linearize_with(
    geom: &ChannelGeometry,
    f_ref: &[PointingVector],
    v: &BeamformingMatrix,
    scales: &[f64],
    theta_max: f64,
) -> Result<ScaSubproblem> {
    let n = geom.num_antennas();
    let k = geom.num_users();
    if f_ref.len() != n || v.columns.nrows() != n || v.columns.ncols() != k || scales.len() != k {
        return Err(Error::InvalidParameter("dimension mismatch in linearize".into()));
    }
    let h = geom.channel_matrix(f_ref)?;
    // g[(k, j)] = v_k^H h_j
    let g = v.columns.adjoint() * &h.entries;
    let grads: Vec<Vec<Vector3<Complex64>>> = (0..k)
        .map(|j| {
            (0..n)
                .map(|a| geom.entry_gradient(j, a, f_ref[a].as_vector()))
                .collect()
        })
        .collect();
    // d(v_k^H h_j)/df_n = conj(v_{k,n}) dh_{j,n}/df_n, so
    // d|v_k^H h_j|^2/df_n = 2 Re(conj(v_k^H h_j) conj(v_{k,n}) dh_{j,n}/df_n).
    let power_grad = |kk: usize, j: usize, a: usize| -> Vector3<f64> {
        let c = g[(kk, j)].conj() * v.columns[(a, kk)].conj();
        grads[j][a].map(|d| 2.0 * (c * d).re)
    };

    let mut lambda0 = Vec::with_capacity(k);
    let mut lambda_grad = Vec::with_capacity(k);
    let mut gamma0 = Vec::with_capacity(k);
    let mut gamma_grad = Vec::with_capacity(k);
    let mut eta_ref = f64::INFINITY;
    for kk in 0..k {
        let signal = g[(kk, kk)].norm_sqr();
        let interference: f64 = (0..k)
            .filter(|j| *j != kk)
            .map(|j| scales[j] * g[(kk, j)].norm_sqr())
            .sum();
        lambda0.push(signal);
        lambda_grad.push((0..n).map(|a| power_grad(kk, kk, a)).collect());
        gamma0.push(interference.ln_1p());
        gamma_grad.push(
            (0..n)
                .map(|a| {
                    (0..k)
                        .filter(|j| *j != kk)
                        .map(|j| power_grad(kk, j, a) * scales[j])
                        .sum::<Vector3<f64>>()
                        / (interference + 1.0)
                })
                .collect(),
        );
        eta_ref = eta_ref.min(scales[kk] * signal / (interference + 1.0));
    }
    if !(eta_ref > 0.0) {
        return Err(Error::Domain("reference SINR is zero".into()));
    }
    Ok(ScaSubproblem {
        f_ref: f_ref.iter().map(|f| *f.as_vector()).collect(),
        lambda0,
        lambda_grad,
        gamma0,
        gamma_grad,
        eta_ref,
        theta_max,
        snr_scales: scales.to_vec(),
    })
}

fn initial_pointing(scenario: &Scenario, geom: &ChannelGeometry, init: &InitPointing) -> Result<Vec<PointingVector>> {
    match init {
        InitPointing::AllE3 => Ok(scenario.boresight_pointing()),
        InitPointing::TowardStrongestUser => {
            let h = geom.channel_matrix(&scenario.boresight_pointing())?;
            let scales = scenario.snr_scales();
            let strongest = (0..h.num_users())
                .max_by(|a, b| {
                    let pa = scales[*a] * h.column(*a).norm_squared();
                    let pb = scales[*b] * h.column(*b).norm_squared();
                    pa.total_cmp(&pb)
                })
                .unwrap_or(0);
            let user = scenario.user_positions()[strongest];
            scenario
                .array
                .positions()
                .iter()
                .map(|w| optimal_pointing(w, &user, scenario.theta_max))
                .collect()
        }
        InitPointing::Provided(f) => {
            if f.len() != scenario.num_antennas() {
                return Err(Error::InvalidParameter("provided pointing has the wrong length".into()));
            }
            if let Some(i) = f.iter().position(|p| !is_feasible_pointing(p, scenario.theta_max)) {
                return Err(Error::Infeasible(format!("provided pointing {i} is outside the cap")));
            }
            Ok(f.clone())
        }
    }
}

fn normalise(v: &Vector3<f64>) -> Result<PointingVector> {
    PointingVector::from_vector(*v)
}

/// Runs the alternating optimisation.
pub fn ao_optimize(scenario: &Scenario, config: &AoConfig) -> Result<Solution> {
    config.validate()?;
    scenario.validate()?;
    let geom = ChannelGeometry::new(scenario)?;
    let scales = scenario.snr_scales();
    let kind = config.beamformer;

    let mut pointing = initial_pointing(scenario, &geom, &config.init_pointing)?;
    let (mut v, mut sinrs) = evaluate_pointing(&geom, &pointing, &scales, kind)?;
    let mut eta = min_sinr(&sinrs);
    let mut trace = vec![eta];
    let mut status = SolutionStatus::MaxIterations;
    let mut iterations = 0;

    for outer in 0..config.max_outer_iters {
        iterations = outer + 1;
        let eta_prev = eta;
        for _ in 0..config.sca_inner_iters {
            let step = linearize_with(&geom, &pointing, &v, &scales, scenario.theta_max).and_then(|sub| {
                let start: Vec<Vector3<f64>> = pointing.iter().map(|f| *f.as_vector()).collect();
                solve_sca_subproblem(&sub, &start, sub.eta_ref)
            });
            let (candidate, _, _) = match step {
                Ok(s) => s,
                Err(e) if outer == 0 => {
                    warn!("SCA failed at the first iterate ({e}); using the fixed orientation");
                    let mut fixed = fixed_solution(scenario, kind)?;
                    fixed.status = SolutionStatus::Fallback;
                    fixed.warning = Some(format!("SCA failed at the first iterate: {e}"));
                    return Ok(fixed);
                }
                Err(e) => {
                    warn!("SCA failed at iteration {outer} ({e}); keeping the last iterate");
                    break;
                }
            };
            // Backtrack between the current and candidate pointing on the
            // true objective.
            let mut s = 1.0;
            for _ in 0..=BACKTRACK_STEPS {
                let trial: Result<Vec<PointingVector>> = pointing
                    .iter()
                    .zip(&candidate)
                    .map(|(f, c)| normalise(&(f.as_vector() * (1.0 - s) + c * s)))
                    .collect();
                if let Ok(trial) = trial {
                    let (tv, ts) = evaluate_pointing(&geom, &trial, &scales, kind)?;
                    let te = min_sinr(&ts);
                    if te >= eta {
                        pointing = trial;
                        v = tv;
                        sinrs = ts;
                        eta = te;
                        break;
                    }
                }
                s *= 0.5;
            }
        }
        trace.push(eta);
        if ((eta - eta_prev) / eta_prev).abs() <= config.epsilon_converge {
            status = SolutionStatus::Converged;
            break;
        }
    }

    Ok(Solution {
        pointing,
        beamformers: v,
        sinrs,
        eta_trace: trace,
        iterations,
        status,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{GainPattern, Scatterer, User};
    use crate::geometry::{ArrayConfig, UserPlacement};
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn scenario(seed: u64, k: usize, q: usize, p: f64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = 0.125;
        let array = ArrayConfig::new(3, 3, lambda / 2.0, lambda * lambda / (4.0 * PI), lambda).unwrap();
        let users = (0..k)
            .map(|_| User {
                placement: UserPlacement::new(
                    rng.random_range(10.0..30.0),
                    rng.random_range(0.2..1.3),
                    rng.random_range(-1.2..1.2),
                )
                .unwrap(),
                power_w: 0.01,
            })
            .collect();
        let scatterers = (0..q)
            .map(|_| Scatterer {
                position: Point3::new(
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-8.0..8.0),
                    rng.random_range(3.0..20.0),
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
            pattern: GainPattern::new(p).unwrap(),
            theta_max: PI / 6.0,
            csi_error_power_w: 0.0,
        }
    }

    fn random_feasible_pointing(rng: &mut ChaCha8Rng, n: usize, theta: f64) -> Vec<PointingVector> {
        (0..n)
            .map(|_| {
                let cz: f64 = rng.random_range(theta.cos()..1.0);
                PointingVector::from_angles(cz.acos(), rng.random_range(0.0..2.0 * PI))
            })
            .collect()
    }

    #[test]
    fn linearization_is_exact_at_the_reference() {
        let sc = scenario(1, 3, 4, 1.0);
        let geom = ChannelGeometry::new(&sc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_feasible_pointing(&mut rng, 9, sc.theta_max);
        let (v, sinrs) = evaluate_pointing(&geom, &f, &sc.snr_scales(), BeamformerKind::Mmse).unwrap();
        let sub = linearize(&f, &v, &sc).unwrap();
        let h = geom.channel_matrix(&f).unwrap();
        let fx: Vec<Vector3<f64>> = f.iter().map(|p| *p.as_vector()).collect();
        for k in 0..3 {
            let a = (v.column(k).adjoint() * h.column(k))[0];
            assert!((sub.lambda(k, &fx) - a.norm_sqr()).abs() <= 1e-15 * a.norm_sqr().max(1e-300));
            assert!((sub.phi(k, &fx).unwrap() - sinrs[k].ln()).abs() < 1e-12);
        }
        assert!((sub.eta_ref - min_sinr(&sinrs)).abs() <= 1e-12 * sub.eta_ref);
        assert!((sub.eta_at(&fx).unwrap() - sub.eta_ref).abs() <= 1e-12 * sub.eta_ref);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (seed, p) in [(3u64, 0.5), (4, 1.0), (5, 2.0)] {
            let sc = scenario(seed, 3, 4, p);
            let geom = ChannelGeometry::new(&sc).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_feasible_pointing(&mut rng, 9, sc.theta_max);
            let (v, _) = evaluate_pointing(&geom, &f, &sc.snr_scales(), BeamformerKind::Mmse).unwrap();
            let sub = linearize(&f, &v, &sc).unwrap();
            let scales = sc.snr_scales();
            let power = |x: &[Vector3<f64>], k: usize, j: usize| -> f64 {
                let mut a = Complex64::new(0.0, 0.0);
                for (n, xn) in x.iter().enumerate() {
                    a += v.columns[(n, k)].conj() * geom.entry(j, n, xn);
                }
                a.norm_sqr()
            };
            let gamma = |x: &[Vector3<f64>], k: usize| -> f64 {
                (0..3)
                    .filter(|j| *j != k)
                    .map(|j| scales[j] * power(x, k, j))
                    .sum::<f64>()
                    .ln_1p()
            };
            let h = 1e-6;
            for k in 0..3 {
                let (mut el, mut nl, mut eg, mut ng) = (0.0, 0.0, 0.0, 0.0);
                for n in 0..9 {
                    for c in 0..3 {
                        let x0: Vec<Vector3<f64>> = f.iter().map(|q| *q.as_vector()).collect();
                        let shifted = |m: f64| {
                            let mut x = x0.clone();
                            x[n][c] += m * h;
                            x
                        };
                        let stencil = |g: &dyn Fn(&[Vector3<f64>]) -> f64| {
                            (-g(&shifted(2.0)) + 8.0 * g(&shifted(1.0)) - 8.0 * g(&shifted(-1.0)) + g(&shifted(-2.0)))
                                / (12.0 * h)
                        };
                        let fd = stencil(&|x| power(x, k, k));
                        el += (fd - sub.lambda_grad[k][n][c]).powi(2);
                        nl += sub.lambda_grad[k][n][c].powi(2);
                        let fd = stencil(&|x| gamma(x, k));
                        eg += (fd - sub.gamma_grad[k][n][c]).powi(2);
                        ng += sub.gamma_grad[k][n][c].powi(2);
                    }
                }
                assert!(el.sqrt() <= 1e-4 * nl.sqrt(), "lambda p={p} k={k}");
                assert!(eg.sqrt() <= 1e-4 * ng.sqrt(), "gamma p={p} k={k}");
            }
        }
    }

    #[test]
    fn los_only_unit_directivity_gradient_is_alpha_u() {
        let sc = scenario(6, 2, 0, 1.0);
        let geom = ChannelGeometry::new(&sc).unwrap();
        let f = Vector3::new(0.1, 0.2, 0.97).normalize();
        for k in 0..2 {
            for n in 0..9 {
                let g = geom.entry_gradient(k, n, &f);
                let expect = geom.user_direction(k, n).map(|c| Complex64::new(c, 0.0)) * geom.alpha(k, n);
                assert!((g - expect).norm() <= 1e-15 * expect.norm());
            }
        }
    }

    #[test]
    fn trace_is_monotone_and_final_value_consistent() {
        for seed in 0..5 {
            let sc = scenario(seed + 10, 3, 4, 1.0);
            let sol = ao_optimize(&sc, &AoConfig::default()).unwrap();
            for w in sol.eta_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            let geom = ChannelGeometry::new(&sc).unwrap();
            let h = geom.channel_matrix(&sol.pointing).unwrap();
            let s = sinr_with_scales(&sol.beamformers, &h, &sc.snr_scales()).unwrap();
            let eta = min_sinr(&s);
            assert!((eta - sol.eta_trace.last().unwrap()).abs() <= 1e-6 * eta);
            for f in &sol.pointing {
                assert!((f.as_vector().norm() - 1.0).abs() < 1e-12);
                assert!(is_feasible_pointing(f, sc.theta_max));
            }
            assert!(sol.min_sinr() >= sol.eta_trace[0]);
        }
    }

    #[test]
    fn improves_on_fixed_orientation() {
        let sc = scenario(21, 3, 4, 1.0);
        let fixed = fixed_solution(&sc, BeamformerKind::Mmse).unwrap();
        let sol = ao_optimize(&sc, &AoConfig::default()).unwrap();
        assert!(sol.min_sinr() > fixed.min_sinr());
    }

    #[test]
    fn loose_tolerance_stops_after_one_iteration() {
        let sc = scenario(7, 2, 2, 1.0);
        let cfg = AoConfig {
            epsilon_converge: 1.0,
            ..AoConfig::default()
        };
        let sol = ao_optimize(&sc, &cfg).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.status, SolutionStatus::Converged);
    }

    #[test]
    fn mmse_step_beats_random_beamformers() {
        let sc = scenario(8, 3, 4, 1.0);
        let sol = ao_optimize(&sc, &AoConfig::default()).unwrap();
        let geom = ChannelGeometry::new(&sc).unwrap();
        let h = geom.channel_matrix(&sol.pointing).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let cols = (0..3)
                .map(|_| {
                    let c = nalgebra::DVector::from_fn(9, |_, _| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    });
                    c.normalize()
                })
                .collect();
            let rv = BeamformingMatrix::from_columns(cols).unwrap();
            let s = sinr_with_scales(&rv, &h, &sc.snr_scales()).unwrap();
            assert!(min_sinr(&s) <= sol.min_sinr() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_cap_reduces_to_fixed_orientation() {
        let sc = scenario(9, 3, 4, 1.0).with_theta_max(0.0);
        let fixed = fixed_solution(&sc, BeamformerKind::Mmse).unwrap();
        let sol = ao_optimize(&sc, &AoConfig::default()).unwrap();
        assert!((sol.min_sinr() - fixed.min_sinr()).abs() <= 1e-9 * fixed.min_sinr());
    }

    #[test]
    fn toward_strongest_user_and_provided_inits() {
        let sc = scenario(12, 2, 2, 1.0);
        let cfg = AoConfig {
            init_pointing: InitPointing::TowardStrongestUser,
            ..AoConfig::default()
        };
        let sol = ao_optimize(&sc, &cfg).unwrap();
        assert!(sol.pointing.iter().all(|f| is_feasible_pointing(f, sc.theta_max)));
        let bad = AoConfig {
            init_pointing: InitPointing::Provided(vec![PointingVector::from_angles(1.0, 0.0); 9]),
            ..AoConfig::default()
        };
        assert!(matches!(ao_optimize(&sc, &bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zf_variant_runs() {
        let sc = scenario(13, 3, 4, 1.0);
        let cfg = AoConfig {
            beamformer: BeamformerKind::Zf,
            ..AoConfig::default()
        };
        let sol = ao_optimize(&sc, &cfg).unwrap();
        let h = ChannelGeometry::new(&sc)
            .unwrap()
            .channel_matrix(&sol.pointing)
            .unwrap();
        let g = sol.beamformers.columns.adjoint() * &h.entries;
        for k in 0..3 {
            for j in 0..3 {
                if j != k {
                    assert!(g[(k, j)].norm() <= 1e-9 * h.column(j).norm());
                }
            }
        }
    }

    #[test]
    fn invalid_config() {
        let sc = scenario(1, 1, 0, 1.0);
        let cfg = AoConfig {
            max_outer_iters: 0,
            ..AoConfig::default()
        };
        assert!(ao_optimize(&sc, &cfg).is_err());
    }
}

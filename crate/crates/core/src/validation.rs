//! Acceptance checks for the analysis, the solvers and the optimizers.
//!
//! Every check returns a [`CriterionResult`]; nothing here panics on a failed
//! check, so callers decide how to report it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI, TAU};
use std::fmt;
use std::time::Instant;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{sample_cap, SchemeId};
use crate::beamforming::{mmse, woodbury_mmse, zf_diagnostics, zf_matrix};
use crate::channel::{linear_to_db, sinr_with_scales, ChannelGeometry, GainPattern, Scenario};
use crate::error::Result;
use crate::geometry::{user_position, ArrayConfig, PointingVector, UserPlacement};
use crate::harness::stats::{mean, paired_greater};
use crate::harness::{
    default_parameters, generate_multiuser_scenario, generate_multiuser_scenario_with, run_trials, splitmix,
    ExperimentId, ExperimentSpec, MultiUserLayout, TrialRecord,
};
use crate::opt_ao::{ao_optimize, evaluate_pointing, linearize_with, AoConfig, BeamformerKind, SolutionStatus};
use crate::opt_two_stage::{two_stage_detailed, two_stage_optimize};
use crate::quadrature::{integrate_2d, QuadConfig};
use crate::single_user::{
    asymptotic_ratio, asymptotic_ula, g_function_quadrature, lemma1_snr, lemma3_closed_form, optimal_pointing,
    optimal_pointing_snr, snr_integral, theorem1_snr, theorem2_bounds, UlaAnalysisInput, UpaBoundsInput,
};

/// Seeds of the multi-user checks, shared with the default experiment seed.
const BASE_SEED: u64 = 1;
const SCENARIOS: usize = 100;
const ALPHA: f64 = 0.05;

/// Identifiers and names, in run order.
pub const CRITERIA: [(usize, &str); 11] = [
    (1, "ula_closed_form"),
    (2, "asymptotic_gain"),
    (3, "upa_bounds"),
    (4, "power_conservation"),
    (5, "beamformer_algebra"),
    (6, "ao_monotone_convergence"),
    (7, "single_user_optimizers"),
    (8, "scheme_ordering"),
    (9, "theta_max_trend"),
    (10, "sca_gradients"),
    (11, "relaxation_validity"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<24} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed_s
        )
    }
}

/// Runs one check by id; `None` for an unknown id.
pub fn run_criterion(id: usize) -> Option<CriterionResult> {
    let name = CRITERIA.iter().find(|(i, _)| *i == id)?.1;
    let check: fn() -> Result<(bool, String)> = match id {
        1 => ula_closed_form,
        2 => asymptotic_gain,
        3 => upa_bounds,
        4 => power_conservation,
        5 => beamformer_algebra,
        6 => ao_monotone_convergence,
        7 => single_user_optimizers,
        8 => scheme_ordering,
        9 => theta_max_trend,
        10 => sca_gradients,
        11 => relaxation_validity,
        _ => return None,
    };
    let t0 = Instant::now();
    let (passed, detail) = match check() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(CriterionResult {
        id,
        name,
        passed,
        detail,
        elapsed_s: t0.elapsed().as_secs_f64(),
    })
}

/// Runs every check in order, calling `report` after each one.
pub fn run_all(mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter_map(|(id, _)| {
            let r = run_criterion(*id)?;
            report(&r);
            Some(r)
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn scenario_seed(i: usize) -> u64 {
    splitmix(BASE_SEED, i as u64)
}

/// Closed-form linear-array SNR against the direct element sum.
fn ula_closed_form() -> Result<(bool, String)> {
    let t0 = Instant::now();
    let (spacing, range, theta) = (0.0625, 15.0, FRAC_PI_6);
    let xi = 1.0 / PI;
    let phi = 5.0 * PI / 12.0;
    let pattern = GainPattern::new(0.5)?;
    let off = user_position(&UserPlacement::new(range, FRAC_PI_2, phi)?);
    let on = user_position(&UserPlacement::new(range, FRAC_PI_2, 0.0)?);
    let (mut worst_off, mut worst_on) = (0.0f64, 0.0f64);
    for n in (1..=501).step_by(2) {
        let cfg = ArrayConfig::new(n, 1, spacing, xi * spacing * spacing, 2.0 * spacing)?;
        let input = UlaAnalysisInput::new(n, spacing / range, theta, 1.0, xi);
        let direct = optimal_pointing_snr(&cfg, &off, &pattern, theta, 1.0)?;
        worst_off = worst_off.max(rel(lemma1_snr(&input, phi)?, direct));
        let direct = optimal_pointing_snr(&cfg, &on, &pattern, theta, 1.0)?;
        worst_on = worst_on.max(rel(theorem1_snr(&input)?, direct));
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        worst_off <= 0.02 && worst_on <= 0.01 && secs < 5.0,
        format!("off-axis max rel err {worst_off:.2e} (<= 2e-2), on-axis {worst_on:.2e} (<= 1e-2), {secs:.2} s"),
    ))
}

/// Large-array gain of rotation and convergence of the element sums.
fn asymptotic_gain() -> Result<(bool, String)> {
    let ratio_db = linear_to_db(asymptotic_ratio(FRAC_PI_6));
    let (spacing, range, theta) = (0.0625, 15.0, FRAC_PI_6);
    let xi = 1.0 / PI;
    let pattern = GainPattern::new(0.5)?;
    let n = 100_000;
    let cfg = ArrayConfig::new(n, 1, spacing, xi * spacing * spacing, 2.0 * spacing)?;
    let mut worst = 0.0f64;
    for phi in [0.0, 5.0 * PI / 12.0] {
        let user = user_position(&UserPlacement::new(range, FRAC_PI_2, phi)?);
        let delta = spacing / range / f64::cos(phi);
        let ra = optimal_pointing_snr(&cfg, &user, &pattern, theta, 1.0)?;
        let fixed = optimal_pointing_snr(&cfg, &user, &pattern, 0.0, 1.0)?;
        worst = worst
            .max(rel(ra, asymptotic_ula(theta, 1.0, xi, delta)))
            .max(rel(fixed, asymptotic_ula(0.0, 1.0, xi, delta)));
    }
    Ok((
        (ratio_db - 1.4289).abs() <= 0.005 && worst <= 0.01,
        format!("ratio {ratio_db:.4} dB (1.4289 +- 0.005), limits at N = 1e5 within {worst:.2e} (<= 1e-2)"),
    ))
}

/// Inscribed/circumscribed disk bounds and the disk closed form.
fn upa_bounds() -> Result<(bool, String)> {
    let t0 = Instant::now();
    let quad = QuadConfig::with_rel_tol(1e-6);
    let tight = QuadConfig::with_rel_tol(1e-12);
    let mut ok = true;
    let mut worst_closed = 0.0f64;
    let mut margins = Vec::new();
    for n in [4, 16, 64] {
        let input = UpaBoundsInput {
            n_x: n,
            n_y: n,
            spacing: 0.0625,
            range_r: 15.0,
            directivity_p: 0.5,
            theta_max: FRAC_PI_6,
            snr_scale: 1.0,
            occupation_xi: 1.0 / PI,
        };
        let snr = snr_integral(&input, &quad)?;
        let (lb, ub) = theorem2_bounds(&input, &quad)?;
        ok &= lb <= snr && snr <= ub;
        margins.push(format!("{n}x{n}: {:.3}<=1<={:.3}", lb / snr, ub / snr));
        for radius in [input.r_lb(), input.r_ub(), 20.0, 200.0] {
            let closed = lemma3_closed_form(radius, input.range_r, input.theta_max, 1.0, input.occupation_xi)?;
            let numeric = g_function_quadrature(radius, &input, &tight)?;
            worst_closed = worst_closed.max(rel(closed, numeric));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        ok && worst_closed <= 1e-8 && secs < 10.0,
        format!(
            "{}; disk closed form rel err {worst_closed:.1e} (<= 1e-8), {secs:.2} s",
            margins.join(", ")
        ),
    ))
}

/// Integral of the gain pattern over the sphere with a tilted boresight.
fn power_conservation() -> Result<(bool, String)> {
    let (a, b) = (0.7f64, 0.4f64);
    let f = Vector3::new(a.sin() * b.cos(), a.sin() * b.sin(), a.cos());
    let cfg = QuadConfig::with_rel_tol(1e-10);
    let mut worst = 0.0f64;
    for p in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let pattern = GainPattern::new(p)?;
        let total = integrate_2d(
            |az, zen| {
                let u = Vector3::new(zen.sin() * az.cos(), zen.sin() * az.sin(), zen.cos());
                pattern.gain_from_cos(f.dot(&u)) * zen.sin()
            },
            (0.0, TAU),
            (0.0, PI),
            &[],
            // Zenith at which the great circle f . u = 0 crosses this meridian.
            |az| vec![f.z.atan2(-(f.x * az.cos() + f.y * az.sin()))],
            &cfg,
        )?
        .value;
        worst = worst.max(rel(total, 4.0 * PI));
    }
    Ok((
        worst <= 1e-6,
        format!("max rel deviation from 4 pi {worst:.1e} (<= 1e-6)"),
    ))
}

fn random_pointing(n: usize, theta_max: f64, seed: u64) -> Vec<PointingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_cap(&mut rng, theta_max)).collect()
}

/// Woodbury against direct MMSE; ZF nulling and its SNR identity.
fn beamformer_algebra() -> Result<(bool, String)> {
    let (mut wb, mut cross, mut snr) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..SCENARIOS {
        let sc = generate_multiuser_scenario(scenario_seed(i))?;
        let geom = ChannelGeometry::new(&sc)?;
        let h = geom.channel_matrix(&random_pointing(sc.num_antennas(), sc.theta_max, i as u64))?;
        let scales = sc.snr_scales();
        for k in 0..sc.num_users() {
            let direct = mmse(&h, k, &scales)?;
            let (w, _) = woodbury_mmse(&h, k, &scales)?;
            wb = wb.max((direct - w).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let v = zf_matrix(&h)?;
        let g = v.columns.adjoint() * &h.entries;
        for k in 0..sc.num_users() {
            for j in 0..sc.num_users() {
                if j != k {
                    cross = cross.max(g[(k, j)].norm() / h.column(j).norm());
                }
            }
        }
        let sinrs = sinr_with_scales(&v, &h, &scales)?;
        let diag = zf_diagnostics(&h, &scales)?;
        for (s, d) in sinrs.iter().zip(&diag.zf_snr) {
            snr = snr.max(rel(*s, *d));
        }
    }
    Ok((
        wb <= 1e-10 && cross <= 1e-9 && snr <= 1e-9,
        format!(
            "{SCENARIOS} instances: Woodbury {wb:.1e} (<= 1e-10), ZF leakage {cross:.1e} (<= 1e-9), ZF SNR {snr:.1e} (<= 1e-9)"
        ),
    ))
}

/// Monotone objective traces and convergence within the iteration budget.
fn ao_monotone_convergence() -> Result<(bool, String)> {
    let cfg = AoConfig::default();
    let runs: Vec<_> = (0..SCENARIOS)
        .into_par_iter()
        .map(|i| generate_multiuser_scenario(scenario_seed(i)).and_then(|sc| ao_optimize(&sc, &cfg)))
        .collect();
    let (mut errors, mut decreasing, mut converged) = (0, 0, 0);
    for r in &runs {
        match r {
            Ok(sol) => {
                if sol.eta_trace.windows(2).any(|w| w[1] < w[0] - 1e-9) {
                    decreasing += 1;
                }
                if sol.status == SolutionStatus::Converged && sol.iterations <= cfg.max_outer_iters {
                    converged += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    let need = (SCENARIOS * 95).div_ceil(100);
    Ok((
        errors == 0 && decreasing == 0 && converged >= need,
        format!(
            "{converged}/{SCENARIOS} converged within {} iterations (>= {need}), {decreasing} non-monotone traces, {errors} errors",
            cfg.max_outer_iters
        ),
    ))
}

/// Best per-antenna power gain over a polar grid of the cap.
fn grid_best(geom: &ChannelGeometry, n: usize, theta_max: f64, res: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..res {
        let zen = theta_max * i as f64 / (res - 1) as f64;
        for j in 0..res {
            let f = PointingVector::from_angles(zen, TAU * j as f64 / res as f64);
            best = best.max(geom.entry(0, n, f.as_vector()).norm_sqr());
        }
    }
    best
}

/// Single-user, LoS-only recovery of the per-antenna optimum by both optimizers.
fn single_user_optimizers() -> Result<(bool, String)> {
    let placements = [(15.0, FRAC_PI_2, 0.2), (15.0, FRAC_PI_2, 1.0), (20.0, 1.1, -0.7)];
    let mut cases = Vec::new();
    for &(nx, ny) in &[(1, 1), (2, 1), (2, 2)] {
        for &(r, psi, phi) in &placements {
            for p in [0.5, 1.0, 2.0] {
                cases.push((nx, ny, r, psi, phi, p));
            }
        }
    }
    let outcomes: Vec<Result<(f64, f64)>> = cases
        .par_iter()
        .map(|&(nx, ny, r, psi, phi, p)| {
            let params = crate::harness::SystemParameters {
                n_x: nx,
                n_y: ny,
                directivity_p: p,
                ..default_parameters()
            };
            let placement = UserPlacement::new(r, psi, phi)?;
            let sc = params.scenario(&[placement], Vec::new())?;
            let geom = ChannelGeometry::new(&sc)?;
            let user = user_position(&placement);
            let ao = ao_optimize(&sc, &AoConfig::default())?;
            let ts = two_stage_optimize(&sc)?;
            let (mut angle, mut gain) = (0.0f64, 0.0f64);
            for (n, pos) in sc.array.positions().iter().enumerate() {
                let expected = optimal_pointing(pos, &user, sc.theta_max)?;
                let best = grid_best(&geom, n, sc.theta_max, 512);
                for sol in [&ao, &ts] {
                    angle = angle.max(sol.pointing[n].angle_to(&expected));
                    gain = gain.max(rel(geom.entry(0, n, sol.pointing[n].as_vector()).norm_sqr(), best));
                }
            }
            Ok((angle, gain))
        })
        .collect();
    let (mut angle, mut gain) = (0.0f64, 0.0f64);
    for o in outcomes {
        let (a, g) = o?;
        angle = angle.max(a);
        gain = gain.max(g);
    }
    let angle_deg = angle.to_degrees();
    Ok((
        angle_deg <= 1.0 && gain <= 1e-3,
        format!(
            "{} cases: max pointing error {angle_deg:.2e} deg (<= 1), max gap to grid optimum {gain:.1e} (<= 1e-3)",
            cases.len()
        ),
    ))
}

/// Effective rates of `schemes` on trials where every scheme succeeded.
fn paired_rates(records: &[TrialRecord], schemes: &[SchemeId]) -> (Vec<Vec<f64>>, usize) {
    let mut out = vec![Vec::new(); schemes.len()];
    let mut dropped = 0;
    for rec in records {
        let vals: Option<Vec<f64>> = schemes
            .iter()
            .map(|s| rec.outcome(*s).map(|v| v.effective_rate))
            .collect();
        match vals {
            Some(v) => {
                for (col, x) in out.iter_mut().zip(v) {
                    col.push(x);
                }
            }
            None => dropped += 1,
        }
    }
    (out, dropped)
}

/// Ordering of the schemes by effective rate at the default operating point.
fn scheme_ordering() -> Result<(bool, String)> {
    use SchemeId::*;
    let schemes = vec![AoMmse, AoZf, TwoStage, FixedOrientation, ArrayWise];
    let mut spec = ExperimentSpec::new(ExperimentId::PowerSweep);
    spec.schemes = schemes.clone();
    spec.trials = SCENARIOS;
    spec.base_seed = BASE_SEED;
    let records = run_trials(&spec, spec.params.power_dbm);
    let (rates, dropped) = paired_rates(&records, &schemes);
    let col = |s: SchemeId| &rates[schemes.iter().position(|x| *x == s).expect("scheme listed")];
    let mut ok = dropped == 0;
    let mut parts = Vec::new();
    for (a, b) in [
        (AoMmse, TwoStage),
        (TwoStage, FixedOrientation),
        (AoMmse, AoZf),
        (AoMmse, ArrayWise),
    ] {
        let t = paired_greater(col(a), col(b));
        ok &= t.significant(ALPHA);
        parts.push(format!("{a}>{b} p={:.1e}", t.p_value));
    }
    let means: Vec<String> = schemes.iter().map(|s| format!("{s}={:.3}", mean(col(*s)))).collect();
    Ok((
        ok,
        format!(
            "n={}, dropped {dropped}; {}; means {}",
            records.len() - dropped,
            parts.join(", "),
            means.join(" ")
        ),
    ))
}

/// Rate of the optimized design against the rotation range.
fn theta_max_trend() -> Result<(bool, String)> {
    use SchemeId::*;
    let schemes = vec![AoMmse, RandomOrientation, FixedOrientation];
    let mut spec = ExperimentSpec::new(ExperimentId::ThetaMaxSweep);
    spec.schemes = schemes.clone();
    spec.trials = SCENARIOS;
    spec.base_seed = BASE_SEED;
    let grid = [0.0, PI / 10.0, FRAC_PI_6, 3.0 * PI / 10.0, 2.0 * PI / 5.0];
    let mut ao = Vec::new();
    let mut ok = true;
    let mut dropped = 0;
    let mut random_vs_fixed = None;
    for (i, &theta) in grid.iter().enumerate() {
        let records = run_trials(&spec, theta);
        let (rates, d) = paired_rates(&records, &schemes);
        dropped += d;
        if i == 2 {
            random_vs_fixed = Some(paired_greater(&rates[1], &rates[2]));
        }
        ao.push(rates[0].clone());
    }
    ok &= dropped == 0;
    let mut worst_drop = 1.0f64;
    for w in ao.windows(2) {
        if w[0].len() != w[1].len() {
            ok = false;
            continue;
        }
        let decrease = paired_greater(&w[0], &w[1]);
        ok &= !decrease.significant(ALPHA);
        worst_drop = worst_drop.min(decrease.p_value);
    }
    let rf = random_vs_fixed.expect("pi/6 is on the grid");
    ok &= rf.significant(ALPHA);
    let means: Vec<String> = ao.iter().map(|r| format!("{:.3}", mean(r))).collect();
    Ok((
        ok,
        format!(
            "ao_mmse means [{}], smallest decrease p={worst_drop:.2} (>= {ALPHA}); random>fixed at pi/6 p={:.1e}; dropped {dropped}",
            means.join(", "),
            rf.p_value
        ),
    ))
}

/// Worst relative error of the linearized gradients of one scenario.
fn gradient_error(sc: &Scenario, seed: u64) -> Result<f64> {
    let geom = ChannelGeometry::new(sc)?;
    let scales = sc.snr_scales();
    let f = random_pointing(sc.num_antennas(), sc.theta_max, seed);
    let (v, _) = evaluate_pointing(&geom, &f, &scales, BeamformerKind::Mmse)?;
    let sub = linearize_with(&geom, &f, &v, &scales, sc.theta_max)?;
    let x0: Vec<Vector3<f64>> = f.iter().map(|q| *q.as_vector()).collect();
    let users = sc.num_users();
    let power = |x: &[Vector3<f64>], k: usize, j: usize| {
        let mut a = Complex64::new(0.0, 0.0);
        for (n, xn) in x.iter().enumerate() {
            a += v.columns[(n, k)].conj() * geom.entry(j, n, xn);
        }
        a.norm_sqr()
    };
    let gamma = |x: &[Vector3<f64>], k: usize| {
        (0..users)
            .filter(|j| *j != k)
            .map(|j| scales[j] * power(x, k, j))
            .sum::<f64>()
            .ln_1p()
    };
    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..users {
        let (mut el, mut nl, mut eg, mut ng) = (0.0, 0.0, 0.0, 0.0);
        for n in 0..x0.len() {
            for c in 0..3 {
                let at = |m: f64| {
                    let mut x = x0.clone();
                    x[n][c] += m * h;
                    x
                };
                let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
                let stencil =
                    |g: &dyn Fn(&[Vector3<f64>]) -> f64| (-g(&p2) + 8.0 * g(&p1) - 8.0 * g(&m1) + g(&m2)) / (12.0 * h);
                let d = stencil(&|x| power(x, k, k)) - sub.lambda_grad[k][n][c];
                el += d * d;
                nl += sub.lambda_grad[k][n][c].powi(2);
                let d = stencil(&|x| gamma(x, k)) - sub.gamma_grad[k][n][c];
                eg += d * d;
                ng += sub.gamma_grad[k][n][c].powi(2);
            }
        }
        worst = worst.max((el / nl).sqrt()).max((eg / ng).sqrt());
    }
    Ok(worst)
}

/// Analytic SINR-term gradients against finite differences.
fn sca_gradients() -> Result<(bool, String)> {
    let layout = MultiUserLayout::default();
    let count = 50;
    let errors: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .flat_map_iter(|i| [0.5, 1.0, 2.0].map(move |p| (i, p)))
        .map(|(i, p)| {
            let params = crate::harness::SystemParameters {
                directivity_p: p,
                ..default_parameters()
            };
            let sc = generate_multiuser_scenario_with(&params, &layout, scenario_seed(i))?;
            gradient_error(&sc, 1000 + i as u64)
        })
        .collect();
    let mut worst = 0.0f64;
    for e in errors {
        worst = worst.max(e?);
    }
    Ok((
        worst <= 1e-4,
        format!("{count} scenarios x p in {{0.5, 1, 2}}: max rel gradient error {worst:.1e} (<= 1e-4)"),
    ))
}

/// Semidefinite, unit-trace relaxed solutions dominating the extracted point.
///
/// The solver returns a primal value `omega` and a dual bound that bracket the
/// exact relaxed optimum. The extracted point is compared with the dual bound,
/// and the bracket is required to be narrow so the comparison has teeth.
fn relaxation_validity() -> Result<(bool, String)> {
    let reports: Vec<_> = (0..SCENARIOS)
        .into_par_iter()
        .map(|i| generate_multiuser_scenario(scenario_seed(i)).and_then(|sc| two_stage_detailed(&sc)))
        .collect();
    let (mut min_eig, mut trace_err, mut gap, mut dominance, mut primal) =
        (f64::INFINITY, 0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    let mut missing = 0;
    for r in reports {
        let r = r?;
        let (Some(sdp), Some(extracted)) = (&r.sdp, r.extracted_objective) else {
            missing += 1;
            continue;
        };
        min_eig = min_eig.min(sdp.lifted().symmetric_eigen().eigenvalues.min());
        for b in &sdp.blocks {
            trace_err = trace_err.max((b.trace() - 1.0).abs());
        }
        gap = gap.max((sdp.dual_bound - sdp.omega) / sdp.omega.abs());
        dominance = dominance.min((sdp.dual_bound - extracted) / sdp.omega.abs());
        primal = primal.min((sdp.omega - extracted) / sdp.omega.abs());
    }
    Ok((
        missing == 0 && min_eig >= -1e-8 && trace_err <= 1e-8 && gap <= 1e-6 && dominance >= 0.0,
        format!(
            "{SCENARIOS} runs, {missing} without relaxation: min eigenvalue {min_eig:.1e} (>= -1e-8), trace err {trace_err:.1e} (<= 1e-8), rel gap {gap:.1e} (<= 1e-6), min (bound - extracted)/omega {dominance:.1e} (>= 0), min (omega - extracted)/omega {primal:.1e}"
        ),
    ))
}

//! Convex pointing subproblem of one successive-convex-approximation step.
//!
//! With the desired-signal power `Lambda_k` and the log-interference
//! `Gamma_k` linearised at a reference pointing matrix, the subproblem is
//!
//! ```text
//! max eta  s.t.  ln(P_k Lambda_k(F)) - Gamma_k(F) >= ln eta_i + (eta - eta_i) / eta_i,
//!                ||f_n|| <= 1,  f_n . e3 >= cos(theta_max).
//! ```
//!
//! Eliminating `eta` leaves `max_F min_k phi_k(F)` with concave `phi_k`,
//! which is solved in epigraph form by a log-barrier Newton method.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{SolverReport, SolverStatus};
use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const CAP_LOCK: f64 = 1e-6;

/// Linearised constraint data at a reference pointing matrix.
#[derive(Debug, Clone)]
pub struct ScaSubproblem {
    pub f_ref: Vec<Vector3<f64>>,
    /// `|v_k^H h_k(F_ref)|^2`.
    pub lambda0: Vec<f64>,
    /// `d Lambda_k / d f_n`, indexed `[k][n]`.
    pub lambda_grad: Vec<Vec<Vector3<f64>>>,
    /// `ln(sum_{j != k} P_j |v_k^H h_j(F_ref)|^2 + 1)`.
    pub gamma0: Vec<f64>,
    /// `d Gamma_k / d f_n`, indexed `[k][n]`.
    pub gamma_grad: Vec<Vec<Vector3<f64>>>,
    /// Reference objective `eta_i > 0`.
    pub eta_ref: f64,
    pub theta_max: f64,
    pub snr_scales: Vec<f64>,
}

impl ScaSubproblem {
    pub fn num_users(&self) -> usize {
        self.lambda0.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.f_ref.len()
    }

    fn validate(&self) -> Result<()> {
        let k = self.num_users();
        let n = self.num_antennas();
        if k == 0 || n == 0 {
            return Err(Error::InvalidParameter("empty subproblem".into()));
        }
        if self.lambda_grad.len() != k
            || self.gamma0.len() != k
            || self.gamma_grad.len() != k
            || self.snr_scales.len() != k
            || self.lambda_grad.iter().chain(&self.gamma_grad).any(|g| g.len() != n)
        {
            return Err(Error::InvalidParameter("inconsistent subproblem dimensions".into()));
        }
        if !(self.eta_ref > 0.0 && self.eta_ref.is_finite()) {
            return Err(Error::Domain("reference objective must be positive".into()));
        }
        Ok(())
    }

    fn delta_dot(&self, grads: &[Vector3<f64>], x: &[Vector3<f64>]) -> f64 {
        grads
            .iter()
            .zip(x.iter().zip(&self.f_ref))
            .map(|(g, (f, f0))| g.dot(&(f - f0)))
            .sum()
    }

    /// Linearised desired-signal power of user `k` at `x`.
    pub fn lambda(&self, k: usize, x: &[Vector3<f64>]) -> f64 {
        self.lambda0[k] + self.delta_dot(&self.lambda_grad[k], x)
    }

    /// Linearised log-interference of user `k` at `x`.
    pub fn gamma(&self, k: usize, x: &[Vector3<f64>]) -> f64 {
        self.gamma0[k] + self.delta_dot(&self.gamma_grad[k], x)
    }

    /// `ln(P_k Lambda_k) - Gamma_k`, or `None` where `Lambda_k <= 0`.
    pub fn phi(&self, k: usize, x: &[Vector3<f64>]) -> Option<f64> {
        let l = self.lambda(k, x);
        (l > 0.0).then(|| (self.snr_scales[k] * l).ln() - self.gamma(k, x))
    }

    /// Objective value implied by the epigraph level `t`.
    pub fn eta_from_level(&self, t: f64) -> f64 {
        self.eta_ref * (1.0 + t - self.eta_ref.ln())
    }

    /// Largest `eta` the linearised constraints allow at `x`.
    pub fn eta_at(&self, x: &[Vector3<f64>]) -> Option<f64> {
        let mut t = f64::INFINITY;
        for k in 0..self.num_users() {
            t = t.min(self.phi(k, x)?);
        }
        Some(self.eta_from_level(t))
    }

    /// Largest violation of the ball and cap constraints.
    pub fn max_violation(&self, x: &[Vector3<f64>]) -> f64 {
        let c = self.theta_max.cos();
        x.iter()
            .map(|f| (f.norm() - 1.0).max(c - f.z).max(0.0))
            .fold(0.0, f64::max)
    }
}

struct Barrier<'a> {
    p: &'a ScaSubproblem,
    cos_max: f64,
    n: usize,
    k: usize,
}

impl Barrier<'_> {
    fn unpack(&self, z: &DVector<f64>) -> (Vec<Vector3<f64>>, f64) {
        let x = (0..self.n)
            .map(|i| Vector3::new(z[3 * i], z[3 * i + 1], z[3 * i + 2]))
            .collect();
        (x, z[3 * self.n])
    }

    /// Barrier value `-tau t + B(z)`, or `None` outside the domain.
    fn value(&self, z: &DVector<f64>, tau: f64) -> Option<f64> {
        let (x, t) = self.unpack(z);
        let mut v = -tau * t;
        for k in 0..self.k {
            let s = self.p.phi(k, &x)? - t;
            if s <= 0.0 {
                return None;
            }
            v -= s.ln();
        }
        for f in &x {
            let b = 1.0 - f.norm_squared();
            let c = f.z - self.cos_max;
            if b <= 0.0 || c <= 0.0 {
                return None;
            }
            v -= b.ln() + c.ln();
        }
        Some(v)
    }

    fn grad_hess(&self, z: &DVector<f64>, tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let dim = 3 * self.n + 1;
        let (x, t) = self.unpack(z);
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        g[dim - 1] = -tau;
        for k in 0..self.k {
            let lam = self.p.lambda(k, &x);
            let s = (self.p.snr_scales[k] * lam).ln() - self.p.gamma(k, &x) - t;
            // grad s = (gL / lam - gG, -1); hess s = (-gL gL^T / lam^2, 0)
            let mut ds = DVector::zeros(dim);
            let mut dl = DVector::zeros(dim);
            for n in 0..self.n {
                let gl = self.p.lambda_grad[k][n];
                let gg = self.p.gamma_grad[k][n];
                for c in 0..3 {
                    ds[3 * n + c] = gl[c] / lam - gg[c];
                    dl[3 * n + c] = gl[c] / lam;
                }
            }
            ds[dim - 1] = -1.0;
            g -= &ds / s;
            h += &ds * ds.transpose() / (s * s) + &dl * dl.transpose() / s;
        }
        for (n, f) in x.iter().enumerate() {
            let b = 1.0 - f.norm_squared();
            let c = f.z - self.cos_max;
            let o = 3 * n;
            for i in 0..3 {
                g[o + i] += 2.0 * f[i] / b;
                h[(o + i, o + i)] += 2.0 / b;
                for j in 0..3 {
                    h[(o + i, o + j)] += 4.0 * f[i] * f[j] / (b * b);
                }
            }
            g[o + 2] -= 1.0 / c;
            h[(o + 2, o + 2)] += 1.0 / (c * c);
        }
        (g, h)
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let mut reg = 0.0;
    let scale = h.diagonal().amax().max(1.0);
    for _ in 0..8 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            return Some(-ch.solve(g));
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
    }
    None
}

/// Solves the linearised pointing subproblem.
///
/// `start` must satisfy the ball and cap constraints. The returned pointing
/// vectors satisfy `||f_n|| <= 1` (not necessarily with equality) and the
/// cap; the returned `eta` never falls below `eta_start`: when the barrier
/// optimum does not improve on it, `start` is returned unchanged.
pub fn solve_sca_subproblem(
    p: &ScaSubproblem,
    start: &[Vector3<f64>],
    eta_start: f64,
) -> Result<(Vec<Vector3<f64>>, f64, SolverReport)> {
    p.validate()?;
    if start.len() != p.num_antennas() {
        return Err(Error::InvalidParameter("start has the wrong number of antennas".into()));
    }
    let start_violation = p.max_violation(start);
    if start_violation > FEAS_TOL {
        return Err(Error::Infeasible(format!(
            "start violates the constraints by {start_violation:e}"
        )));
    }
    for k in 0..p.num_users() {
        if !(p.lambda(k, start) > 0.0) {
            return Err(Error::Domain(format!(
                "linearised signal power of user {k} is not positive at the start"
            )));
        }
    }
    let unchanged = |iterations| {
        (
            start.to_vec(),
            eta_start,
            SolverReport {
                status: SolverStatus::Optimal,
                objective: eta_start,
                iterations,
                max_violation: start_violation,
            },
        )
    };
    if p.theta_max < CAP_LOCK {
        // The cap leaves no interior; every antenna is pinned to e3.
        return Ok(unchanged(0));
    }

    let n = p.num_antennas();
    let k = p.num_users();
    let cos_max = p.theta_max.cos();
    let centre = Vector3::new(0.0, 0.0, 0.5 * (1.0 + cos_max));
    let barrier = Barrier { p, cos_max, n, k };

    // Strictly interior start: pull the reference toward the cap centre.
    let mut shrink = 1e-3;
    let x0 = loop {
        let x: Vec<Vector3<f64>> = start.iter().map(|f| f * (1.0 - shrink) + centre * shrink).collect();
        if (0..k).all(|j| p.phi(j, &x).is_some()) {
            break x;
        }
        shrink *= 0.1;
        if shrink < 1e-12 {
            return Err(Error::Domain("no interior start with positive signal power".into()));
        }
    };
    let t0 = (0..k).map(|j| p.phi(j, &x0).unwrap()).fold(f64::INFINITY, f64::min) - 1.0;
    let mut z = DVector::zeros(3 * n + 1);
    for (i, f) in x0.iter().enumerate() {
        z.fixed_rows_mut::<3>(3 * i).copy_from(f);
    }
    z[3 * n] = t0;

    let m = (k + 2 * n) as f64;
    let mut tau = 1.0;
    let mut iterations = 0;
    let mut status = SolverStatus::Optimal;
    let max_newton = 200;
    loop {
        for _ in 0..max_newton {
            let (g, h) = barrier.grad_hess(&z, tau);
            let dz = match newton_direction(&g, &h) {
                Some(d) => d,
                None => {
                    status = SolverStatus::MaxIter;
                    break;
                }
            };
            let decrement = -g.dot(&dz);
            if decrement / 2.0 <= 1e-12 {
                break;
            }
            iterations += 1;
            let f0 = barrier.value(&z, tau).expect("iterate stays in the domain");
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-14 {
                let trial = &z + &dz * step;
                if let Some(v) = barrier.value(&trial, tau) {
                    if v <= f0 - 0.25 * step * decrement {
                        z = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if m / tau <= 1e-9 {
            break;
        }
        if iterations > 2000 {
            status = SolverStatus::MaxIter;
            break;
        }
        tau *= 10.0;
    }

    let (x, _) = barrier.unpack(&z);
    let eta = match p.eta_at(&x) {
        Some(e) => e,
        None => return Ok(unchanged(iterations)),
    };
    if eta < eta_start {
        return Ok(unchanged(iterations));
    }
    let max_violation = p.max_violation(&x);
    Ok((
        x,
        eta,
        SolverReport {
            status,
            objective: eta,
            iterations,
            max_violation,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pointing_from_angles, project_to_cap};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Single-user subproblem with the given signal gradients; interference
    /// is absent so the optimum is separable per antenna.
    fn single_user(grads: Vec<Vector3<f64>>, theta: f64) -> ScaSubproblem {
        let n = grads.len();
        let f_ref = vec![Vector3::z(); n];
        let lambda0 = 1.0;
        ScaSubproblem {
            f_ref,
            lambda0: vec![lambda0],
            lambda_grad: vec![grads],
            gamma0: vec![0.0],
            gamma_grad: vec![vec![Vector3::zeros(); n]],
            eta_ref: 10.0,
            theta_max: theta,
            snr_scales: vec![10.0],
        }
    }

    #[test]
    fn separable_optimum_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = 0.5;
        let grads: Vec<Vector3<f64>> = (0..4)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..1.5),
                ) * 0.1
            })
            .collect();
        let p = single_user(grads.clone(), theta);
        let start = p.f_ref.clone();
        let (x, eta, report) = solve_sca_subproblem(&p, &start, p.eta_ref).unwrap();
        assert_eq!(report.status, SolverStatus::Optimal);
        assert!(report.max_violation <= 1e-9);
        for (n, g) in grads.iter().enumerate() {
            // Brute force the linear objective over the cap.
            let mut best = f64::NEG_INFINITY;
            let mut arg = Vector3::z();
            for i in 0..=400 {
                let tz = theta * i as f64 / 400.0;
                for j in 0..400 {
                    let f = pointing_from_angles(tz, 2.0 * PI * j as f64 / 400.0).into_vector();
                    if g.dot(&f) > best {
                        best = g.dot(&f);
                        arg = f;
                    }
                }
            }
            let got = x[n];
            assert!((got.normalize() - arg).norm() < 0.02, "antenna {n}");
            assert!(g.dot(&got) >= best - 1e-5);
            let exact = project_to_cap(g, theta).into_vector();
            assert!((got - exact).norm() < 1e-6);
        }
        assert!(eta > p.eta_ref);
    }

    #[test]
    fn fixed_point_is_returned() {
        // Gradient along e3 with e3 already optimal: nothing to gain.
        let p = single_user(vec![Vector3::z(); 3], 0.4);
        let start = p.f_ref.clone();
        let (x, eta, _) = solve_sca_subproblem(&p, &start, p.eta_ref).unwrap();
        assert!((eta - p.eta_ref).abs() <= 1e-9 * p.eta_ref);
        for f in x {
            assert!((f - Vector3::z()).norm() < 1e-4);
        }
    }

    #[test]
    fn zero_cap_pins_the_start() {
        let p = single_user(vec![Vector3::x(); 2], 0.0);
        let start = p.f_ref.clone();
        let (x, eta, _) = solve_sca_subproblem(&p, &start, p.eta_ref).unwrap();
        assert_eq!(x, start);
        assert_eq!(eta, p.eta_ref);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let p = single_user(vec![Vector3::x(); 2], 0.3);
        let start = vec![Vector3::x(); 2];
        assert!(matches!(
            solve_sca_subproblem(&p, &start, 1.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn nonpositive_signal_is_a_domain_error() {
        let mut p = single_user(vec![Vector3::x(); 2], 0.3);
        p.lambda0 = vec![0.0];
        let start = p.f_ref.clone();
        assert!(matches!(solve_sca_subproblem(&p, &start, 1.0), Err(Error::Domain(_))));
    }

    fn two_user(seed: u64) -> ScaSubproblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3;
        let mut v = || {
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        ScaSubproblem {
            f_ref: vec![Vector3::z(); n],
            lambda0: vec![2.0, 3.0],
            lambda_grad: vec![(0..n).map(|_| v() * 0.5).collect(), (0..n).map(|_| v() * 0.5).collect()],
            gamma0: vec![0.4, 0.2],
            gamma_grad: vec![(0..n).map(|_| v() * 0.1).collect(), (0..n).map(|_| v() * 0.1).collect()],
            eta_ref: 1.5,
            theta_max: 0.6,
            snr_scales: vec![1.0, 1.0],
        }
    }

    proptest! {
        #[test]
        fn result_is_feasible_and_not_worse(seed in 0u64..500) {
            let p = two_user(seed);
            let start = p.f_ref.clone();
            let eta_start = p.eta_at(&start).unwrap();
            let (x, eta, report) = solve_sca_subproblem(&p, &start, eta_start).unwrap();
            prop_assert!(report.max_violation <= 1e-9);
            prop_assert!(x.iter().all(|f| f.norm() <= 1.0 + 1e-9));
            prop_assert!(eta >= eta_start - 1e-9);
            prop_assert!((p.eta_at(&x).unwrap() - eta).abs() <= 1e-9 * eta.abs().max(1.0));
        }

        #[test]
        fn barrier_optimum_beats_random_feasible_points(seed in 0u64..200) {
            let p = two_user(seed);
            let start = p.f_ref.clone();
            let (_, eta, _) = solve_sca_subproblem(&p, &start, p.eta_at(&start).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            for _ in 0..200 {
                let x: Vec<Vector3<f64>> = (0..3).map(|_| {
                    let cz: f64 = rng.random_range(p.theta_max.cos()..=1.0);
                    pointing_from_angles(cz.acos(), rng.random_range(0.0..2.0 * PI)).into_vector()
                }).collect();
                if p.max_violation(&x) <= 0.0 {
                    if let Some(e) = p.eta_at(&x) {
                        prop_assert!(e <= eta * (1.0 + 1e-6) + 1e-9);
                    }
                }
            }
        }
    }
}

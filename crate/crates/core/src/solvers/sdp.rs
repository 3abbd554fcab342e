//! Semidefinite relaxation of the max-min ZF SNR pointing problem.
//!
//! With `X_n = f_n f_n^T` lifted to a 3x3 PSD block, the relaxation reads
//!
//! ```text
//! max omega  s.t.  w_k sum_n <W_{k,n}, X_n> >= omega,   W_{k,n} = Re(m_{k,n} m_{k,n}^H),
//!                  (X_n)_zz >= cos^2(theta_max),  tr X_n = 1,  X_n PSD.
//! ```
//!
//! It is solved as a standard-form block SDP (N 3x3 blocks plus a diagonal
//! block for omega and the slacks) by an infeasible primal-dual
//! path-following method with the HKM direction and Mehrotra correction.

use nalgebra::{Complex, DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::{SolverReport, SolverStatus};
use crate::error::{Error, Result};

const CAP_LOCK: f64 = 1e-6;
const MAX_ITERS: usize = 150;
const TOL: f64 = 1e-10;

/// Data of the relaxed pointing problem.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    /// Per-user weights `rho_k P_k` (ZF SNR loss times SNR scale).
    pub weights: Vec<f64>,
    /// Linear channel coefficients `m_{k,n}`, indexed `[k][n]`.
    pub coefficients: Vec<Vec<Vector3<Complex<f64>>>>,
    pub theta_max: f64,
}

impl SdpProblem {
    pub fn num_users(&self) -> usize {
        self.weights.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_antennas();
        if self.num_users() == 0 || n == 0 {
            return Err(Error::InvalidParameter("empty SDP".into()));
        }
        if self.coefficients.len() != self.num_users() || self.coefficients.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter("inconsistent SDP dimensions".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Domain("SDP weights must be positive".into()));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.theta_max) {
            return Err(Error::Domain("theta_max outside [0, pi/2]".into()));
        }
        Ok(())
    }

    /// Unweighted block `Re(m_{k,n} m_{k,n}^H)`.
    pub fn block(&self, k: usize, n: usize) -> Matrix3<f64> {
        let m = &self.coefficients[k][n];
        let re = m.map(|c| c.re);
        let im = m.map(|c| c.im);
        re * re.transpose() + im * im.transpose()
    }

    /// `w_k sum_n <W_{k,n}, X_n>` for every user.
    pub fn user_values(&self, blocks: &[Matrix3<f64>]) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| {
                self.weights[k]
                    * blocks
                        .iter()
                        .enumerate()
                        .map(|(n, x)| self.block(k, n).dot(x))
                        .sum::<f64>()
            })
            .collect()
    }

    /// Smallest weighted user value for the given blocks.
    pub fn objective(&self, blocks: &[Matrix3<f64>]) -> f64 {
        self.user_values(blocks).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Largest violation of the PSD, trace and cap constraints.
    pub fn max_violation(&self, blocks: &[Matrix3<f64>]) -> f64 {
        let c2 = self.theta_max.cos().powi(2);
        blocks
            .iter()
            .map(|x| {
                let min_eig = SymmetricEigen::new(*x).eigenvalues.min();
                (x.trace() - 1.0).abs().max(c2 - x[(2, 2)]).max(-min_eig).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn scale(&self) -> f64 {
        let mut s: f64 = 0.0;
        for k in 0..self.num_users() {
            for n in 0..self.num_antennas() {
                s = s.max(self.weights[k] * self.block(k, n).trace());
            }
        }
        s
    }
}

/// Output of [`solve_sdp`].
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// PSD, unit-trace blocks `X_n`.
    pub blocks: Vec<Matrix3<f64>>,
    /// Relaxed objective `min_k w_k sum_n <W_{k,n}, X_n>`.
    pub omega: f64,
    /// Dual multipliers in constraint order: users, caps, traces. They refer
    /// to the internally scaled problem, see [`SdpSolution::scale`].
    pub dual_y: Option<DVector<f64>>,
    /// Upper bound on the relaxed optimum certified by `dual_y`.
    pub dual_bound: f64,
    /// Factor dividing every weight in the internal problem.
    pub scale: f64,
    pub report: SolverReport,
}

impl SdpSolution {
    /// The full `3N x 3N` block-diagonal lifted matrix.
    pub fn lifted(&self) -> DMatrix<f64> {
        let n = self.blocks.len();
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for (i, b) in self.blocks.iter().enumerate() {
            m.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(b);
        }
        m
    }
}

/// Standard form: min <C, X> s.t. <A_i, X> = b_i, X = diag(X_1..X_N, x_lp) PSD.
/// The LP part holds `[omega, s_1..s_K, u_1..u_N]`.
struct StandardForm {
    k: usize,
    n: usize,
    /// Scaled user blocks `[k][n]`.
    w: Vec<Vec<Matrix3<f64>>>,
    b: DVector<f64>,
}

#[derive(Clone)]
struct Point {
    xb: Vec<Matrix3<f64>>,
    xl: DVector<f64>,
    zb: Vec<Matrix3<f64>>,
    zl: DVector<f64>,
    y: DVector<f64>,
}

fn ezz() -> Matrix3<f64> {
    let mut e = Matrix3::zeros();
    e[(2, 2)] = 1.0;
    e
}

impl StandardForm {
    fn m(&self) -> usize {
        self.k + 2 * self.n
    }

    fn lp_len(&self) -> usize {
        1 + self.k + self.n
    }

    /// Nonzero constraint matrices touching block `n`.
    fn block_terms(&self, n: usize) -> Vec<(usize, Matrix3<f64>)> {
        let mut t: Vec<(usize, Matrix3<f64>)> = (0..self.k).map(|k| (k, self.w[k][n])).collect();
        t.push((self.k + n, ezz()));
        t.push((self.k + self.n + n, Matrix3::identity()));
        t
    }

    /// Nonzero LP coefficients of constraint `i`.
    fn lp_terms(&self, i: usize) -> Vec<(usize, f64)> {
        if i < self.k {
            vec![(0, -1.0), (1 + i, -1.0)]
        } else if i < self.k + self.n {
            vec![(1 + self.k + (i - self.k), -1.0)]
        } else {
            vec![]
        }
    }

    fn c_lp(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.lp_len());
        c[0] = -1.0;
        c
    }

    fn apply(&self, xb: &[Matrix3<f64>], xl: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.m());
        for (n, x) in xb.iter().enumerate() {
            for (i, a) in self.block_terms(n) {
                r[i] += a.dot(x);
            }
        }
        for i in 0..self.m() {
            for (j, a) in self.lp_terms(i) {
                r[i] += a * xl[j];
            }
        }
        r
    }

    fn adjoint(&self, y: &DVector<f64>) -> (Vec<Matrix3<f64>>, DVector<f64>) {
        let blocks = (0..self.n)
            .map(|n| self.block_terms(n).iter().map(|(i, a)| a * y[*i]).sum())
            .collect();
        let mut lp = DVector::zeros(self.lp_len());
        for i in 0..self.m() {
            for (j, a) in self.lp_terms(i) {
                lp[j] += a * y[i];
            }
        }
        (blocks, lp)
    }

    /// Dual slack `C - A*(y)`.
    fn slack(&self, y: &DVector<f64>) -> (Vec<Matrix3<f64>>, DVector<f64>) {
        let (ab, al) = self.adjoint(y);
        (ab.into_iter().map(|a| -a).collect(), self.c_lp() - al)
    }
}

fn sym(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest step keeping `x + a dx` PSD, capped at 1.
fn block_step(x: &Matrix3<f64>, dx: &Matrix3<f64>) -> f64 {
    let l = match x.cholesky() {
        Some(c) => c.l(),
        None => return 0.0,
    };
    let li = l.try_inverse().unwrap_or_else(Matrix3::zeros);
    let s = sym(&(li * dx * li.transpose()));
    let lo = SymmetricEigen::new(s).eigenvalues.min();
    if lo >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lo
    }
}

fn lp_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dxb: Vec<Matrix3<f64>>,
    dxl: DVector<f64>,
    dzb: Vec<Matrix3<f64>>,
    dzl: DVector<f64>,
    dy: DVector<f64>,
}

impl StandardForm {
    /// HKM direction for the target `X Z -> sigma mu I - corr`.
    fn direction(
        &self,
        p: &Point,
        zinv: &[Matrix3<f64>],
        schur: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        rd: &(Vec<Matrix3<f64>>, DVector<f64>),
        target_b: &[Matrix3<f64>],
        target_l: &DVector<f64>,
    ) -> Direction {
        // G = target Z^{-1}; rhs = b - A(G) + A(X Rd Z^{-1})
        let gb: Vec<Matrix3<f64>> = target_b.iter().zip(zinv).map(|(t, zi)| t * zi).collect();
        let gl = target_l.component_div(&p.zl);
        let hb: Vec<Matrix3<f64>> = (0..self.n).map(|n| p.xb[n] * rd.0[n] * zinv[n]).collect();
        let hl = p.xl.component_mul(&rd.1).component_div(&p.zl);
        let gbs: Vec<Matrix3<f64>> = gb.iter().map(sym).collect();
        let hbs: Vec<Matrix3<f64>> = hb.iter().map(sym).collect();
        let rhs = &self.b - self.apply(&gbs, &gl) + self.apply(&hbs, &hl);
        let dy = schur.solve(&rhs);
        let (ab, al) = self.adjoint(&dy);
        let dzb: Vec<Matrix3<f64>> = (0..self.n).map(|n| rd.0[n] - ab[n]).collect();
        let dzl = &rd.1 - al;
        let dxb = (0..self.n)
            .map(|n| sym(&(gb[n] - p.xb[n] - p.xb[n] * dzb[n] * zinv[n])))
            .collect();
        let dxl = &gl - &p.xl - p.xl.component_mul(&dzl).component_div(&p.zl);
        Direction { dxb, dxl, dzb, dzl, dy }
    }
}

/// Solves the relaxation; blocks are returned PSD with unit trace.
pub fn solve_sdp(problem: &SdpProblem) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.num_antennas();
    let k = problem.num_users();
    if problem.theta_max < CAP_LOCK {
        // Only X_n = e3 e3^T is feasible.
        let blocks = vec![ezz(); n];
        let omega = problem.objective(&blocks);
        return Ok(SdpSolution {
            blocks,
            omega,
            dual_y: None,
            dual_bound: omega,
            scale: 1.0,
            report: SolverReport {
                status: SolverStatus::Optimal,
                objective: omega,
                iterations: 0,
                max_violation: 0.0,
            },
        });
    }
    let scale = problem.scale();
    if !(scale > 0.0) {
        return Err(Error::Degenerate("all channel coefficients vanish".into()));
    }
    let w = (0..k)
        .map(|u| {
            (0..n)
                .map(|a| problem.block(u, a) * (problem.weights[u] / scale))
                .collect()
        })
        .collect();
    let c2 = problem.theta_max.cos().powi(2);
    let mut b = DVector::zeros(k + 2 * n);
    for a in 0..n {
        b[k + a] = c2;
        b[k + n + a] = 1.0;
    }
    let sf = StandardForm { k, n, w, b };
    let m = sf.m();
    let dim = (3 * n + sf.lp_len()) as f64;

    let mut p = Point {
        xb: vec![Matrix3::identity() / 3.0; n],
        xl: DVector::from_element(sf.lp_len(), 1.0),
        zb: vec![Matrix3::identity(); n],
        zl: DVector::from_element(sf.lp_len(), 1.0),
        y: DVector::zeros(m),
    };
    let b_norm = 1.0 + sf.b.norm();
    let mut status = SolverStatus::MaxIter;
    let mut iterations = 0;

    for it in 0..MAX_ITERS {
        iterations = it;
        let rp = &sf.b - sf.apply(&p.xb, &p.xl);
        let (sb, sl) = sf.slack(&p.y);
        let rd: (Vec<Matrix3<f64>>, DVector<f64>) = ((0..n).map(|a| sb[a] - p.zb[a]).collect(), &sl - &p.zl);
        let gap: f64 = p.xb.iter().zip(&p.zb).map(|(x, z)| x.dot(z)).sum::<f64>() + p.xl.dot(&p.zl);
        let mu = gap / dim;
        let pobj = -p.xl[0];
        let dobj = sf.b.dot(&p.y);
        let rd_norm = (rd.0.iter().map(|r| r.norm_squared()).sum::<f64>() + rd.1.norm_squared()).sqrt();
        if rp.norm() / b_norm <= TOL
            && rd_norm / 2.0 <= TOL
            && (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()) <= TOL
        {
            status = SolverStatus::Optimal;
            break;
        }

        let zinv: Vec<Matrix3<f64>> = match p.zb.iter().map(|z| z.try_inverse()).collect::<Option<_>>() {
            Some(v) => v,
            None => break,
        };
        let mut schur = DMatrix::zeros(m, m);
        for a in 0..n {
            let terms = sf.block_terms(a);
            let prods: Vec<Matrix3<f64>> = terms.iter().map(|(_, aj)| p.xb[a] * aj * zinv[a]).collect();
            for (i, ai) in &terms {
                for ((j, _), pj) in terms.iter().zip(&prods) {
                    schur[(*i, *j)] += ai.dot(pj);
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                let ti = sf.lp_terms(i);
                let tj = sf.lp_terms(j);
                for (ci, ai) in &ti {
                    for (cj, aj) in &tj {
                        if ci == cj {
                            schur[(i, j)] += ai * aj * p.xl[*ci] / p.zl[*ci];
                        }
                    }
                }
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let chol = match schur.clone().cholesky() {
            Some(c) => c,
            None => {
                let mut reg = schur;
                let eps = 1e-14 * reg.diagonal().amax().max(1.0);
                for i in 0..m {
                    reg[(i, i)] += eps;
                }
                match reg.cholesky() {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        // Predictor.
        let zero_b = vec![Matrix3::zeros(); n];
        let zero_l = DVector::zeros(sf.lp_len());
        let aff = sf.direction(&p, &zinv, &chol, &rd, &zero_b, &zero_l);
        let ap = (0..n)
            .map(|a| block_step(&p.xb[a], &aff.dxb[a]))
            .fold(lp_step(&p.xl, &aff.dxl), f64::min)
            .min(1.0);
        let ad = (0..n)
            .map(|a| block_step(&p.zb[a], &aff.dzb[a]))
            .fold(lp_step(&p.zl, &aff.dzl), f64::min)
            .min(1.0);
        let gap_aff: f64 = (0..n)
            .map(|a| (p.xb[a] + aff.dxb[a] * ap).dot(&(p.zb[a] + aff.dzb[a] * ad)))
            .sum::<f64>()
            + (&p.xl + &aff.dxl * ap).dot(&(&p.zl + &aff.dzl * ad));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let tb: Vec<Matrix3<f64>> = (0..n)
            .map(|a| Matrix3::identity() * (sigma * mu) - aff.dxb[a] * aff.dzb[a])
            .collect();
        let tl = DVector::from_element(sf.lp_len(), sigma * mu) - aff.dxl.component_mul(&aff.dzl);
        let d = sf.direction(&p, &zinv, &chol, &rd, &tb, &tl);
        let ap = (0.95
            * (0..n)
                .map(|a| block_step(&p.xb[a], &d.dxb[a]))
                .fold(lp_step(&p.xl, &d.dxl), f64::min))
        .min(1.0);
        let ad = (0.95
            * (0..n)
                .map(|a| block_step(&p.zb[a], &d.dzb[a]))
                .fold(lp_step(&p.zl, &d.dzl), f64::min))
        .min(1.0);
        for a in 0..n {
            p.xb[a] = sym(&(p.xb[a] + d.dxb[a] * ap));
            p.zb[a] = sym(&(p.zb[a] + d.dzb[a] * ad));
        }
        p.xl += &d.dxl * ap;
        p.zl += &d.dzl * ad;
        p.y += &d.dy * ad;
    }

    // Polish: clip tiny negative eigenvalues and restore unit trace.
    let blocks: Vec<Matrix3<f64>> =
        p.xb.iter()
            .map(|x| {
                let e = SymmetricEigen::new(sym(x));
                let vals = e.eigenvalues.map(|v| v.max(0.0));
                let y = e.eigenvectors * Matrix3::from_diagonal(&vals) * e.eigenvectors.transpose();
                sym(&y) / y.trace()
            })
            .collect();
    let omega = problem.objective(&blocks);
    let dual_bound = -sf.b.dot(&p.y) * scale;
    let max_violation = problem.max_violation(&blocks);
    Ok(SdpSolution {
        blocks,
        omega,
        dual_y: Some(p.y),
        dual_bound,
        scale,
        report: SolverReport {
            status,
            objective: omega,
            iterations,
            max_violation,
        },
    })
}

/// Dual slack `Z = C - A*(y)` of the scaled problem, rebuilt from `y` alone.
/// Returns the PSD blocks and the diagonal LP part `[omega, s.., u..]`.
pub fn dual_slack(problem: &SdpProblem, scale: f64, y: &DVector<f64>) -> (Vec<Matrix3<f64>>, DVector<f64>) {
    let k = problem.num_users();
    let n = problem.num_antennas();
    let w = (0..k)
        .map(|u| {
            (0..n)
                .map(|a| problem.block(u, a) * (problem.weights[u] / scale))
                .collect()
        })
        .collect();
    let sf = StandardForm {
        k,
        n,
        w,
        b: DVector::zeros(k + 2 * n),
    };
    sf.slack(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, k: usize, n: usize, theta: f64) -> SdpProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let coefficients = (0..k)
            .map(|_| (0..n).map(|_| Vector3::new(c(), c(), c())).collect())
            .collect();
        let weights = (0..k).map(|i| 1e3 * (1.0 + i as f64)).collect();
        SdpProblem {
            weights,
            coefficients,
            theta_max: theta,
        }
    }

    fn check_certificate(problem: &SdpProblem, sol: &SdpSolution) {
        let y = sol.dual_y.as_ref().unwrap();
        let (zb, zl) = dual_slack(problem, sol.scale, y);
        for z in &zb {
            assert!(SymmetricEigen::new(*z).eigenvalues.min() >= -1e-7);
        }
        assert!(zl.min() >= -1e-7);
        let gap = (sol.dual_bound - sol.omega) / sol.omega.abs().max(1e-300);
        assert!(gap.abs() <= 1e-4, "duality gap {gap}");
    }

    #[test]
    fn random_instances_are_certified() {
        for seed in 0..10 {
            let problem = random_problem(seed, 3, 5, 0.6);
            let sol = solve_sdp(&problem).unwrap();
            assert_eq!(sol.report.status, SolverStatus::Optimal, "seed {seed}");
            assert!(sol.report.max_violation <= 1e-8);
            check_certificate(&problem, &sol);
            let lifted = sol.lifted();
            assert!(SymmetricEigen::new(lifted).eigenvalues.min() >= -1e-12);
        }
    }

    #[test]
    fn single_user_single_antenna_matches_closed_form() {
        // max <W, X> over unit-trace PSD X with X_zz >= c^2: the optimum is
        // rank one and a grid over the cap attains it.
        let problem = random_problem(3, 1, 1, 0.5);
        let sol = solve_sdp(&problem).unwrap();
        let w = problem.block(0, 0) * problem.weights[0];
        let mut best: f64 = 0.0;
        for i in 0..=300 {
            let tz = 0.5 * i as f64 / 300.0;
            for j in 0..600 {
                let ta = std::f64::consts::TAU * j as f64 / 600.0;
                let f = Vector3::new(tz.sin() * ta.cos(), tz.sin() * ta.sin(), tz.cos());
                best = best.max(f.dot(&(w * f)));
            }
        }
        assert!(sol.omega >= best * (1.0 - 1e-6));
        assert!(sol.omega <= best * (1.0 + 1e-3));
    }

    #[test]
    fn relaxation_dominates_feasible_rank_one_points() {
        let problem = random_problem(11, 2, 4, 0.4);
        let sol = solve_sdp(&problem).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let blocks: Vec<Matrix3<f64>> = (0..4)
                .map(|_| {
                    let cz: f64 = rng.random_range(0.4f64.cos()..=1.0);
                    let tz = cz.acos();
                    let ta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let f = Vector3::new(tz.sin() * ta.cos(), tz.sin() * ta.sin(), tz.cos());
                    f * f.transpose()
                })
                .collect();
            assert!(problem.objective(&blocks) <= sol.omega * (1.0 + 1e-6));
        }
    }

    #[test]
    fn zero_cap_gives_boresight() {
        let problem = random_problem(1, 2, 3, 0.0);
        let sol = solve_sdp(&problem).unwrap();
        for b in &sol.blocks {
            assert_eq!(*b, ezz());
        }
    }

    #[test]
    fn invalid_inputs() {
        let mut p = random_problem(1, 2, 3, 0.3);
        p.weights[0] = 0.0;
        assert!(solve_sdp(&p).is_err());
        let mut p = random_problem(1, 2, 3, 0.3);
        p.coefficients[1].pop();
        assert!(solve_sdp(&p).is_err());
    }
}

//! Linear receive beamformers: MRC, MMSE (direct and Woodbury) and ZF.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-9;
/// Singular values below this fraction of the largest are treated as zero.
pub const ZF_RANK_TOL: f64 = 1e-12;

/// K unit-norm receive vectors stored as the columns of an N x K matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix {
    pub columns: DMatrix<Complex64>,
}

impl BeamformingMatrix {
    pub fn from_columns(cols: Vec<DVector<Complex64>>) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::InvalidParameter("no beamforming vectors".into()));
        }
        for (k, c) in cols.iter().enumerate() {
            if (c.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::Contract(format!("beamformer {k} is not unit norm")));
            }
        }
        Ok(Self {
            columns: DMatrix::from_columns(&cols),
        })
    }

    pub fn column(&self, k: usize) -> DVector<Complex64> {
        self.columns.column(k).into_owned()
    }
}

fn normalize(v: DVector<Complex64>) -> Result<DVector<Complex64>> {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Degenerate("beamformer direction has zero norm".into()));
    }
    Ok(v.unscale(n))
}

fn check_user(h: &ChannelMatrix, k: usize) -> Result<()> {
    if k >= h.num_users() {
        return Err(Error::Range(format!("user {k} out of range")));
    }
    Ok(())
}

fn check_scales(h: &ChannelMatrix, scales: &[f64]) -> Result<()> {
    if scales.len() != h.num_users() {
        return Err(Error::InvalidParameter("one SNR scale per user required".into()));
    }
    if scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("SNR scales must be finite and >= 0".into()));
    }
    Ok(())
}

/// Interferer matrix: every column of `H` except `k`.
fn interferers(h: &ChannelMatrix, k: usize) -> DMatrix<Complex64> {
    h.entries.clone().remove_column(k)
}

/// Maximum-ratio combiner `h / ||h||`.
pub fn mrc(h: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    normalize(h.clone())
}

/// `C_k = sum_{j != k} P_j h_j h_j^H + I`.
fn interference_covariance(h: &ChannelMatrix, k: usize, scales: &[f64]) -> DMatrix<Complex64> {
    let n = h.num_antennas();
    let mut c = DMatrix::<Complex64>::identity(n, n);
    for j in 0..h.num_users() {
        if j != k {
            let hj = h.entries.column(j);
            c += (hj * hj.adjoint()) * Complex64::new(scales[j], 0.0);
        }
    }
    c
}

/// MMSE combiner `C_k^{-1} h_k / ||C_k^{-1} h_k||` via an LU solve.
pub fn mmse(h: &ChannelMatrix, k: usize, scales: &[f64]) -> Result<DVector<Complex64>> {
    check_user(h, k)?;
    check_scales(h, scales)?;
    let c = interference_covariance(h, k, scales);
    let x = c
        .lu()
        .solve(&h.column(k))
        .ok_or_else(|| Error::Solver("interference covariance is singular".into()))?;
    normalize(x)
}

pub fn mmse_matrix(h: &ChannelMatrix, scales: &[f64]) -> Result<BeamformingMatrix> {
    let cols = (0..h.num_users())
        .map(|k| mmse(h, k, scales))
        .collect::<Result<Vec<_>>>()?;
    BeamformingMatrix::from_columns(cols)
}

/// Whether the Woodbury route had to fall back to the direct solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WoodburyInfo {
    pub used_fallback: bool,
}

/// MMSE combiner through the matrix inversion lemma.
///
/// `C_k^{-1} h = h - H (P^{-1} + H^H H)^{-1} H^H h` with `H` the interferer
/// matrix, so only a (K-1) x (K-1) system is solved. Zero scales drop the
/// corresponding interferer.
pub fn woodbury_mmse(h: &ChannelMatrix, k: usize, scales: &[f64]) -> Result<(DVector<Complex64>, WoodburyInfo)> {
    check_user(h, k)?;
    check_scales(h, scales)?;
    let hk = h.column(k);
    let active: Vec<usize> = (0..h.num_users()).filter(|&j| j != k && scales[j] > 0.0).collect();
    if active.is_empty() {
        return Ok((normalize(hk)?, WoodburyInfo { used_fallback: false }));
    }
    let ht = DMatrix::from_columns(&active.iter().map(|&j| h.entries.column(j)).collect::<Vec<_>>());
    let mut inner = ht.adjoint() * &ht;
    for (i, &j) in active.iter().enumerate() {
        inner[(i, i)] += Complex64::new(1.0 / scales[j], 0.0);
    }
    let rhs = ht.adjoint() * &hk;
    let solved = inner.clone().cholesky().map(|ch| ch.solve(&rhs));
    match solved {
        Some(y) if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
            let x = &hk - &ht * y;
            Ok((normalize(x)?, WoodburyInfo { used_fallback: false }))
        }
        _ => Ok((mmse(h, k, scales)?, WoodburyInfo { used_fallback: true })),
    }
}

/// Orthonormal basis of the column space of `m`, after rank thresholding.
fn column_space(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if m.ncols() == 0 {
        return Ok(DMatrix::zeros(m.nrows(), 0));
    }
    if m.ncols() > m.nrows() {
        return Err(Error::Rank(format!(
            "{} interferers cannot be nulled with {} antennas",
            m.ncols(),
            m.nrows()
        )));
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Solver("SVD did not return U".into()))?;
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::Rank("interferer matrix is zero".into()));
    }
    let rank = svd.singular_values.iter().filter(|s| **s > ZF_RANK_TOL * smax).count();
    if rank < m.ncols() {
        return Err(Error::Rank(format!(
            "interferer matrix has rank {rank} < {}",
            m.ncols()
        )));
    }
    // Singular values come out sorted in descending order, so the leading
    // columns of U span the range.
    Ok(u.columns(0, rank).into_owned())
}

/// Zero-forcing combiner: `h_k` projected off the interferer span.
pub fn zf(h: &ChannelMatrix, k: usize) -> Result<DVector<Complex64>> {
    check_user(h, k)?;
    let q = column_space(&interferers(h, k))?;
    let hk = h.column(k);
    let proj = &hk - &q * (q.adjoint() * &hk);
    if proj.norm() <= 1e-12 * hk.norm() {
        return Err(Error::Degenerate(format!(
            "user {k}'s channel lies in the interferer span"
        )));
    }
    normalize(proj)
}

pub fn zf_matrix(h: &ChannelMatrix) -> Result<BeamformingMatrix> {
    let cols = (0..h.num_users()).map(|k| zf(h, k)).collect::<Result<Vec<_>>>()?;
    BeamformingMatrix::from_columns(cols)
}

/// SNR loss factors and resulting ZF SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfDiagnostics {
    pub snr_loss_rho: Vec<f64>,
    pub zf_snr: Vec<f64>,
}

/// `rho_k = h^H H (H^H H)^{-1} H^H h / ||h||^2` and `P_k ||h_k||^2 (1 - rho_k)`.
pub fn zf_diagnostics(h: &ChannelMatrix, scales: &[f64]) -> Result<ZfDiagnostics> {
    check_scales(h, scales)?;
    let mut rho = Vec::with_capacity(h.num_users());
    let mut snr = Vec::with_capacity(h.num_users());
    for k in 0..h.num_users() {
        let q = column_space(&interferers(h, k))?;
        let hk = h.column(k);
        let norm2 = hk.norm_squared();
        if !(norm2 > 0.0) {
            return Err(Error::Degenerate(format!("user {k} has a zero channel")));
        }
        let r = ((q.adjoint() * &hk).norm_squared() / norm2).clamp(0.0, 1.0);
        rho.push(r);
        snr.push(scales[k] * norm2 * (1.0 - r));
    }
    Ok(ZfDiagnostics {
        snr_loss_rho: rho,
        zf_snr: snr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sinr_with_scales;
    use crate::geometry::PointingVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wrap(entries: DMatrix<Complex64>) -> ChannelMatrix {
        let n = entries.nrows();
        ChannelMatrix {
            entries,
            pointing: vec![PointingVector::boresight(); n],
        }
    }

    fn random_channel(n: usize, k: usize, seed: u64) -> ChannelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        wrap(DMatrix::from_fn(n, k, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e-3
        }))
    }

    fn scales(k: usize) -> Vec<f64> {
        (0..k).map(|j| 1e6 * (1.0 + j as f64)).collect()
    }

    fn phase_distance(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
        // Distance after removing the best common phase.
        let c = b.dotc(a);
        let ph = if c.norm() > 0.0 {
            c / c.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        (a - b * ph).camax()
    }

    #[test]
    fn mrc_examples() {
        let h = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_eq!(mrc(&h).unwrap(), h);
        assert!(matches!(mrc(&DVector::zeros(3)), Err(Error::Degenerate(_))));
        let h = random_channel(8, 1, 1).column(0);
        let v = mrc(&h).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        assert!((v.dotc(&h).norm_sqr() - h.norm_squared()).abs() < 1e-12 * h.norm_squared());
    }

    #[test]
    fn single_user_beamformers_are_mrc() {
        let h = random_channel(6, 1, 2);
        let m = mrc(&h.column(0)).unwrap();
        assert!(phase_distance(&mmse(&h, 0, &[1e6]).unwrap(), &m) < 1e-14);
        assert!(phase_distance(&zf(&h, 0).unwrap(), &m) < 1e-14);
    }

    #[test]
    fn woodbury_matches_direct() {
        for seed in 0..20 {
            let h = random_channel(16, 4, seed);
            let s = scales(4);
            for k in 0..4 {
                let (w, info) = woodbury_mmse(&h, k, &s).unwrap();
                assert!(!info.used_fallback);
                assert!(phase_distance(&w, &mmse(&h, k, &s).unwrap()) <= 1e-10);
            }
        }
    }

    #[test]
    fn woodbury_two_users_uses_scalar_inner() {
        let h = random_channel(5, 2, 7);
        let s = [2e5, 3e5];
        let h0 = h.column(0);
        let h1 = h.column(1);
        let inner = 1.0 / s[1] + h1.norm_squared();
        let x = &h0 - &h1 * (h1.dotc(&h0) / inner);
        let expected = mrc(&x).unwrap();
        assert!(phase_distance(&woodbury_mmse(&h, 0, &s).unwrap().0, &expected) < 1e-13);
    }

    #[test]
    fn woodbury_without_interference_is_mrc() {
        let mut h = random_channel(5, 3, 8);
        h.entries.column_mut(1).fill(Complex64::new(0.0, 0.0));
        h.entries.column_mut(2).fill(Complex64::new(0.0, 0.0));
        let (w, _) = woodbury_mmse(&h, 0, &scales(3)).unwrap();
        assert!(phase_distance(&w, &mrc(&h.column(0)).unwrap()) < 1e-14);
    }

    #[test]
    fn zf_nulls_interference() {
        let h = random_channel(16, 4, 9);
        for k in 0..4 {
            let v = zf(&h, k).unwrap();
            for j in 0..4 {
                if j != k {
                    assert!(v.dotc(&h.column(j)).norm() <= 1e-9 * h.column(j).norm());
                }
            }
        }
    }

    #[test]
    fn zf_on_orthogonal_channels_is_mrc() {
        let mut e = DMatrix::zeros(4, 2);
        e[(0, 0)] = Complex64::new(0.3, 0.1);
        e[(1, 0)] = Complex64::new(-0.2, 0.5);
        e[(2, 1)] = Complex64::new(1.0, 0.0);
        let h = wrap(e);
        assert!(phase_distance(&zf(&h, 0).unwrap(), &mrc(&h.column(0)).unwrap()) < 1e-14);
        let d = zf_diagnostics(&h, &[1.0, 1.0]).unwrap();
        assert!(d.snr_loss_rho.iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn zf_errors() {
        let h = random_channel(2, 4, 10);
        assert!(matches!(zf(&h, 0), Err(Error::Rank(_))));

        let mut e = random_channel(4, 3, 11).entries;
        let c1 = e.column(1).into_owned();
        e.set_column(2, &(c1 * Complex64::new(0.0, 2.0)));
        assert!(matches!(zf(&wrap(e), 0), Err(Error::Rank(_))));

        let mut e = random_channel(4, 2, 12).entries;
        let c1 = e.column(1).into_owned();
        e.set_column(0, &(c1 * Complex64::new(0.5, -1.0)));
        let h = wrap(e);
        assert!(matches!(zf(&h, 0), Err(Error::Degenerate(_))));
        let d = zf_diagnostics(&h, &[1.0, 1.0]).unwrap();
        assert!((d.snr_loss_rho[0] - 1.0).abs() < 1e-12);
        assert!(d.zf_snr[0].abs() < 1e-12 * h.column(0).norm_squared());
    }

    #[test]
    fn zf_snr_matches_sinr_route() {
        for seed in 0..10 {
            let h = random_channel(16, 4, 100 + seed);
            let s = scales(4);
            let d = zf_diagnostics(&h, &s).unwrap();
            let v = zf_matrix(&h).unwrap();
            let sinr = sinr_with_scales(&v, &h, &s).unwrap();
            for k in 0..4 {
                assert!(((d.zf_snr[k] - sinr[k]) / sinr[k]).abs() <= 1e-9);
                assert!((0.0..=1.0).contains(&d.snr_loss_rho[k]));
            }
        }
    }

    proptest! {
        #[test]
        fn mmse_dominates(seed in 0u64..10_000, n in 4usize..10, k in 2usize..4) {
            let h = random_channel(n, k, seed);
            let s = scales(k);
            let vm = sinr_with_scales(&mmse_matrix(&h, &s).unwrap(), &h, &s).unwrap();
            let vz = sinr_with_scales(&zf_matrix(&h).unwrap(), &h, &s).unwrap();
            let mr = BeamformingMatrix::from_columns((0..k).map(|j| mrc(&h.column(j)).unwrap()).collect()).unwrap();
            let vr = sinr_with_scales(&mr, &h, &s).unwrap();
            for j in 0..k {
                prop_assert!(vm[j] >= vz[j] * (1.0 - 1e-9));
                prop_assert!(vm[j] >= vr[j] * (1.0 - 1e-9));
                prop_assert!(vr[j] >= 0.0);
            }
        }

        #[test]
        fn phase_rotation_is_harmless(seed in 0u64..10_000, phase in 0.0f64..std::f64::consts::TAU) {
            let h = random_channel(6, 3, seed);
            let s = scales(3);
            let mut rotated = h.clone();
            let rot = Complex64::from_polar(1.0, phase);
            let c = rotated.entries.column(1).into_owned() * rot;
            rotated.entries.set_column(1, &c);
            let v0 = mmse(&h, 1, &s).unwrap();
            let v1 = mmse(&rotated, 1, &s).unwrap();
            prop_assert!((&v1 - &v0 * rot).camax() < 1e-10);
            let a = sinr_with_scales(&mmse_matrix(&h, &s).unwrap(), &h, &s).unwrap();
            let b = sinr_with_scales(&mmse_matrix(&rotated, &s).unwrap(), &rotated, &s).unwrap();
            for j in 0..3 {
                prop_assert!(((a[j] - b[j]) / a[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn beamformers_are_unit_norm(seed in 0u64..10_000) {
            let h = random_channel(8, 3, seed);
            let s = scales(3);
            for k in 0..3 {
                prop_assert!((mmse(&h, k, &s).unwrap().norm() - 1.0).abs() < 1e-12);
                prop_assert!((woodbury_mmse(&h, k, &s).unwrap().0.norm() - 1.0).abs() < 1e-12);
                prop_assert!((zf(&h, k).unwrap().norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}

//! Pointing recovery from lifted 3x3 blocks.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{project_to_cap, PointingVector};

/// Takes the principal eigenvector of each block as the pointing of that
/// antenna, flipped into the upper hemisphere and pulled back into the cap
/// along its azimuth when it lies outside.
pub fn rank_one_extract(blocks: &[Matrix3<f64>], theta_max: f64) -> Result<Vec<PointingVector>> {
    blocks
        .iter()
        .enumerate()
        .map(|(n, b)| {
            let e = SymmetricEigen::new((b + b.transpose()) * 0.5);
            let i = e.eigenvalues.imax();
            if !(e.eigenvalues[i] > 0.0) {
                return Err(Error::Degenerate(format!("block {n} has no positive eigenvalue")));
            }
            let mut v = e.eigenvectors.column(i).into_owned();
            if v.z < 0.0 {
                v = -v;
            }
            Ok(project_to_cap(&v, theta_max))
        })
        .collect()
}

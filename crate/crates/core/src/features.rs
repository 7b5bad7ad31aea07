//! Explicit exponential feature maps `phi(x) = [exp(j 2 pi k.x)]_{k in support}`.
//!
//! Only practical in low dimension; the kernel engine computes the same inner
//! products without materializing these vectors, and the tests use this
//! module as its oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::{wrap_coord, FourierCoeffs, Point, PointCloud, SupportSet, MAX_SUPPORT_LEN};

/// Diagonal feature weight `exp(-pi^2 sigma^2 |k|^2)` for each frequency.
pub fn feature_weights(support: &SupportSet, sigma: f64) -> Vec<f64> {
    let s2 = PI * PI * sigma * sigma;
    support.squared_norms().into_iter().map(|k2| (-s2 * k2).exp()).collect()
}

/// Feature map of a single point.
pub fn feature_map(x: &Point, support: &SupportSet) -> Result<Vec<Complex64>> {
    if x.dim() != support.dim() {
        return Err(invalid(format!(
            "point dimension {} does not match support dimension {}",
            x.dim(),
            support.dim()
        )));
    }
    Ok(feature_column(x.as_slice(), support))
}

pub(crate) fn feature_column(x: &[f64], support: &SupportSet) -> Vec<Complex64> {
    let wrapped: Vec<f64> = x.iter().map(|&v| wrap_coord(v)).collect();
    support
        .iter()
        .map(|k| {
            let phase: f64 = k.iter().zip(&wrapped).map(|(&kd, &xd)| kd as f64 * xd).sum();
            Complex64::from_polar(1.0, 2.0 * PI * phase)
        })
        .collect()
}

/// Feature matrix `Phi(X)`, `|support| x N`, optionally with diagonal
/// Gaussian weights on the rows.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    support: SupportSet,
    values: DMatrix<Complex64>,
    sigma: Option<f64>,
}

impl FeatureMatrix {
    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn is_weighted(&self) -> bool {
        self.sigma.is_some()
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    /// `Phi^H Phi`, the `N x N` Gram matrix of feature inner products.
    pub fn gram(&self) -> DMatrix<Complex64> {
        self.values.adjoint() * &self.values
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.values.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Count of singular values above `tau * s_1`.
    pub fn numerical_rank(&self, tau: f64) -> usize {
        let s = self.singular_values();
        let top = s.first().copied().unwrap_or(0.0);
        s.iter().filter(|&&v| v > tau * top).count()
    }
}

/// Stack feature maps of every point of `cloud` as columns.
pub fn feature_matrix(cloud: &PointCloud, support: &SupportSet, sigma: Option<f64>) -> Result<FeatureMatrix> {
    if cloud.dim() != support.dim() {
        return Err(invalid(format!(
            "cloud dimension {} does not match support dimension {}",
            cloud.dim(),
            support.dim()
        )));
    }
    let entries = support.len().saturating_mul(cloud.len());
    if entries > MAX_SUPPORT_LEN {
        return Err(crate::Error::CapacityExceeded {
            what: "explicit feature matrix",
            requested: entries,
            cap: MAX_SUPPORT_LEN,
        });
    }
    let mut values = DMatrix::zeros(support.len(), cloud.len());
    for (i, x) in cloud.points().enumerate() {
        values.set_column(i, &nalgebra::DVector::from_vec(feature_column(x, support)));
    }
    if let Some(s) = sigma {
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid(format!("feature weight sigma must be positive, got {s}")));
        }
        for (r, w) in feature_weights(support, s).into_iter().enumerate() {
            values.row_mut(r).iter_mut().for_each(|v| *v *= w);
        }
    }
    Ok(FeatureMatrix {
        support: support.clone(),
        values,
        sigma,
    })
}

/// `|| c^T Phi(X) ||_2`, i.e. the 2-norm of `psi` sampled at every point.
pub fn annihilation_residual(cloud: &PointCloud, coeffs: &FourierCoeffs) -> Result<f64> {
    if cloud.dim() != coeffs.dim() {
        return Err(invalid(format!(
            "cloud dimension {} does not match coefficient dimension {}",
            cloud.dim(),
            coeffs.dim()
        )));
    }
    Ok(cloud.points().map(|x| coeffs.eval(x).norm_sqr()).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cube_support, wrap_point};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn map_at_origin_is_ones() {
        let s = cube_support(3, 1).unwrap();
        let phi = feature_map(&wrap_point(&[0.0, 0.0, 0.0]).unwrap(), &s).unwrap();
        assert!(phi.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn map_analytic_values() {
        let s = cube_support(1, 1).unwrap();
        let phi = feature_map(&wrap_point(&[0.5]).unwrap(), &s).unwrap();
        // wrapped to -0.5: exp(j pi), 1, exp(-j pi)
        for (got, want) in phi.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-15);
        }
        let s2 = cube_support(2, 1).unwrap();
        let phi = feature_map(&wrap_point(&[0.25, 0.0]).unwrap(), &s2).unwrap();
        let idx = s2.index_of(&[1, 0]).unwrap();
        assert!((phi[idx] - c(0.0, 1.0)).norm() < 1e-15);
        assert!(feature_map(&wrap_point(&[0.1]).unwrap(), &s2).is_err());
    }

    #[test]
    fn weighted_rows() {
        let s = cube_support(2, 2).unwrap();
        let cloud = PointCloud::from_points(&[vec![0.1, -0.3], vec![0.4, 0.2]]).unwrap();
        let plain = feature_matrix(&cloud, &s, None).unwrap();
        let weighted = feature_matrix(&cloud, &s, Some(0.15)).unwrap();
        let w = feature_weights(&s, 0.15);
        let zero = s.index_of(&[0, 0]).unwrap();
        assert_eq!(w[zero], 1.0);
        for (r, wr) in w.iter().enumerate() {
            for j in 0..2 {
                let want = plain.values()[(r, j)] * wr;
                assert!((weighted.values()[(r, j)] - want).norm() < 1e-15);
            }
        }
        assert!(plain.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn single_point_at_origin() {
        let s = cube_support(2, 1).unwrap();
        let cloud = PointCloud::from_points(&[vec![0.0, 0.0]]).unwrap();
        let f = feature_matrix(&cloud, &s, None).unwrap();
        assert_eq!(f.values().shape(), (9, 1));
        assert!(f.values().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn constant_potential_residual() {
        let coeffs = FourierCoeffs::from_terms(2, &[(vec![0, 0], c(1.0, 0.0))]).unwrap();
        let cloud =
            PointCloud::from_points(&[vec![0.1, 0.2], vec![-0.3, 0.4], vec![0.0, 0.0], vec![0.2, 0.2]]).unwrap();
        let r = annihilation_residual(&cloud, &coeffs).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
    }
}

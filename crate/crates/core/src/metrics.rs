//! Error measures and evaluation reports.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{wrap_coord, FourierCoeffs, PointCloud};
use crate::surface::levelset_of_coeffs;

/// Default marching-squares resolution for curve distances.
pub const DEFAULT_GRID_RES: usize = 512;

/// Torus distance from every point to the nearest vertex of the zero set
/// of `truth`, traced at `grid_res`.
pub fn curve_distance(cloud: &PointCloud, truth: &FourierCoeffs, grid_res: usize) -> Result<Vec<f64>> {
    if cloud.dim() != 2 || truth.dim() != 2 {
        return Err(Error::Unsupported("curve distances need n = 2".into()));
    }
    let vertices: Vec<[f64; 2]> = levelset_of_coeffs(truth, grid_res)?
        .into_iter()
        .flat_map(|p| p.vertices)
        .collect();
    if vertices.is_empty() {
        return Err(Error::NoZeroSet);
    }
    Ok(cloud
        .points()
        .map(|p| {
            vertices
                .iter()
                .map(|v| {
                    let dx = wrap_coord(p[0] - v[0]);
                    let dy = wrap_coord(p[1] - v[1]);
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect())
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn check_shapes(x: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<()> {
    if x.shape() != truth.shape() {
        return Err(invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            x.shape(),
            truth.shape()
        )));
    }
    Ok(())
}

/// `|X - X_true|_F / |X_true|_F`.
pub fn relative_error(x: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    check_shapes(x, truth)?;
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(invalid("relative error is undefined for a zero reference"));
    }
    Ok((x - truth).norm() / denom)
}

/// Root mean square entry difference.
pub fn rmse(x: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    check_shapes(x, truth)?;
    if x.is_empty() {
        return Ok(0.0);
    }
    Ok(((x - truth).norm_squared() / x.len() as f64).sqrt())
}

/// Summary written next to every recovery output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: Option<f64>,
    pub rel_error: Option<f64>,
    pub baseline_rel_error: Option<f64>,
    pub mean_curve_dist: Option<f64>,
    pub input_mean_curve_dist: Option<f64>,
    pub eig_profile: Vec<f64>,
    pub runtime_ms: u64,
    pub outer_iters: usize,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_surface, ShapeSpec};
    use num_complex::Complex64;

    #[test]
    fn relative_error_basics() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
        assert!((relative_error(&(&t * 2.0), &t).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&t, &DMatrix::zeros(2, 2)).is_err());
        assert!(relative_error(&t, &DMatrix::zeros(2, 3)).is_err());
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn on_curve_points_are_close() {
        let shape = ShapeSpec::cos_curve(1.0);
        let cloud = sample_surface(&shape, 50, 2).unwrap();
        let d = curve_distance(&cloud, &shape.coeffs().unwrap(), 512).unwrap();
        assert!(d.iter().all(|&v| v < 2.0 / 512.0));
    }

    #[test]
    fn far_point_is_far() {
        let shape = ShapeSpec::cos_curve(1.0);
        // the corner region around (1/2, 1/2) holds no zero crossings
        let cloud = PointCloud::from_points(&[vec![-0.5, -0.5]]).unwrap();
        let d = curve_distance(&cloud, &shape.coeffs().unwrap(), 512).unwrap();
        assert!(d[0] > 0.05);
    }

    #[test]
    fn no_zero_set() {
        let coeffs = FourierCoeffs::from_terms(2, &[(vec![0, 0], Complex64::new(1.0, 0.0))]).unwrap();
        let cloud = PointCloud::from_points(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(curve_distance(&cloud, &coeffs, 64), Err(Error::NoZeroSet)));
    }
}

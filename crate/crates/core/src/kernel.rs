//! Shift-invariant kernels on the torus, Gram matrix assembly and spectral
//! rank diagnostics.
//!
//! For a cube support the Dirichlet kernel reproduces the explicit feature
//! inner products exactly, `K_ij = phi(x_i)^H phi(x_j)`, so nothing in the
//! recovery path ever builds a feature vector.

use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{wrap_coord, KernelSpec, PointCloud};
use crate::linalg::sym_eigen_desc;

/// Largest point count accepted for dense Gram assembly.
pub const MAX_GRAM_POINTS: usize = 5000;

/// One-dimensional Dirichlet kernel `sin((2K+1) pi r) / sin(pi r)`, with the
/// removable singularity at integer `r` evaluated exactly.
#[inline]
pub fn dirichlet_1d(r: f64, half_width: usize) -> f64 {
    let r = wrap_coord(r);
    let m = (2 * half_width + 1) as f64;
    if r == 0.0 {
        return m;
    }
    (m * PI * r).sin() / (PI * r).sin()
}

#[inline]
fn image_layers(sigma: f64) -> i64 {
    (6.0 * sigma).ceil() as i64 + 1
}

/// One-dimensional periodized Gaussian `sum_m exp(-(r+m)^2 / (2 sigma^2))`.
#[inline]
pub fn periodized_gaussian_1d(r: f64, sigma: f64) -> f64 {
    let r = wrap_coord(r);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let m_max = image_layers(sigma);
    (-m_max..=m_max)
        .map(|m| {
            let t = r + m as f64;
            (-t * t * inv).exp()
        })
        .sum()
}

/// Derivative of [`periodized_gaussian_1d`] with respect to `r`.
#[inline]
pub fn periodized_gaussian_1d_deriv(r: f64, sigma: f64) -> f64 {
    let r = wrap_coord(r);
    let s2 = sigma * sigma;
    let m_max = image_layers(sigma);
    (-m_max..=m_max)
        .map(|m| {
            let t = r + m as f64;
            -t / s2 * (-t * t / (2.0 * s2)).exp()
        })
        .sum()
}

/// Evaluate `kappa(r)` for a displacement `r`.
pub fn kernel_eval(r: &[f64], spec: &KernelSpec) -> f64 {
    match spec {
        KernelSpec::Dirichlet { support } => {
            debug_assert_eq!(r.len(), support.dim());
            r.iter().map(|&rd| dirichlet_1d(rd, support.half_width())).product()
        }
        KernelSpec::PeriodizedGaussian { sigma } => r.iter().map(|&rd| periodized_gaussian_1d(rd, *sigma)).product(),
        KernelSpec::Gaussian { sigma } => {
            let d2: f64 = r.iter().map(|v| v * v).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
    }
}

/// Gradient of `kappa` with respect to the displacement `r`.
pub fn kernel_gradient(r: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    match spec {
        KernelSpec::Dirichlet { .. } => Err(Error::Unsupported(
            "gradients of the Dirichlet kernel are not provided".into(),
        )),
        KernelSpec::PeriodizedGaussian { sigma } => {
            let vals: Vec<f64> = r.iter().map(|&rd| periodized_gaussian_1d(rd, *sigma)).collect();
            Ok((0..r.len())
                .map(|d| {
                    let others: f64 = vals
                        .iter()
                        .enumerate()
                        .filter(|&(e, _)| e != d)
                        .map(|(_, v)| v)
                        .product();
                    periodized_gaussian_1d_deriv(r[d], *sigma) * others
                })
                .collect())
        }
        KernelSpec::Gaussian { sigma } => {
            let k = kernel_eval(r, spec);
            let s2 = sigma * sigma;
            Ok(r.iter().map(|&rd| -rd / s2 * k).collect())
        }
    }
}

/// Symmetric `N x N` kernel matrix `K_ij = kappa(x_j - x_i)`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    spec: KernelSpec,
}

impl GramMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(sym_eigen_desc(&self.values)?.0)
    }

    /// Wrap an existing symmetric matrix (for example a test fixture).
    pub fn from_values(values: DMatrix<f64>, spec: KernelSpec) -> Result<Self> {
        if !values.is_square() {
            return Err(invalid("Gram matrix must be square"));
        }
        Ok(Self { values, spec })
    }
}

/// Assemble the Gram matrix of a point cloud.
pub fn gram_matrix(cloud: &PointCloud, spec: &KernelSpec) -> Result<GramMatrix> {
    let values = gram_of_columns(cloud.matrix(), spec)?;
    Ok(GramMatrix {
        values,
        spec: spec.clone(),
    })
}

/// Gram matrix of the columns of `x`, which need not be wrapped.
pub fn gram_of_columns(x: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if let KernelSpec::Dirichlet { support } = spec {
        if support.dim() != x.nrows() {
            return Err(invalid(format!(
                "kernel support dimension {} does not match point dimension {}",
                support.dim(),
                x.nrows()
            )));
        }
    }
    let n_pts = x.ncols();
    if n_pts > MAX_GRAM_POINTS {
        return Err(Error::CapacityExceeded {
            what: "Gram matrix points",
            requested: n_pts,
            cap: MAX_GRAM_POINTS,
        });
    }
    let rows = upper_rows(x, spec);
    let mut out = DMatrix::zeros(n_pts, n_pts);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

fn upper_row(x: &DMatrix<f64>, spec: &KernelSpec, i: usize) -> Vec<f64> {
    let n = x.nrows();
    let data = x.as_slice();
    let xi = &data[i * n..(i + 1) * n];
    let mut diff = vec![0.0; n];
    (i..x.ncols())
        .map(|j| {
            let xj = &data[j * n..(j + 1) * n];
            for d in 0..n {
                diff[d] = xj[d] - xi[d];
            }
            kernel_eval(&diff, spec)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn upper_rows(x: &DMatrix<f64>, spec: &KernelSpec) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    (0..x.ncols()).into_par_iter().map(|i| upper_row(x, spec, i)).collect()
}

#[cfg(not(feature = "parallel"))]
fn upper_rows(x: &DMatrix<f64>, spec: &KernelSpec) -> Vec<Vec<f64>> {
    (0..x.ncols()).map(|i| upper_row(x, spec, i)).collect()
}

/// Descending eigenvalues with thresholded rank counts.
#[derive(Debug, Clone, Serialize)]
pub struct RankProfile {
    pub eigenvalues: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// `ranks[t]` counts eigenvalues strictly above `thresholds[t] * lambda_max`.
    pub ranks: Vec<usize>,
}

pub fn kernel_rank_profile(gram: &GramMatrix, thresholds: &[f64]) -> Result<RankProfile> {
    let eigenvalues = gram.eigenvalues()?;
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let ranks = thresholds
        .iter()
        .map(|&tau| eigenvalues.iter().filter(|&&s| s > tau * top).count())
        .collect();
    Ok(RankProfile {
        eigenvalues,
        thresholds: thresholds.to_vec(),
        ranks,
    })
}

/// Median Euclidean distance over all distinct pairs of columns.
pub fn median_pairwise_distance(x: &DMatrix<f64>) -> f64 {
    let n_pts = x.ncols();
    let mut d: Vec<f64> = Vec::with_capacity(n_pts * n_pts.saturating_sub(1) / 2);
    for i in 0..n_pts {
        for j in i + 1..n_pts {
            d.push((x.column(i) - x.column(j)).norm());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    if d.len().is_multiple_of(2) {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{feature_matrix, feature_weights};
    use crate::geometry::cube_support;

    fn lcg_cloud(n: usize, count: usize, seed: u64) -> PointCloud {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let pts: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                    })
                    .collect()
            })
            .collect();
        PointCloud::from_points(&pts).unwrap()
    }

    #[test]
    fn dirichlet_values() {
        let s = cube_support(2, 2).unwrap();
        assert_eq!(kernel_eval(&[0.0, 0.0], &KernelSpec::dirichlet(s)), 25.0);
        let s1 = cube_support(1, 1).unwrap();
        let v = kernel_eval(&[0.5], &KernelSpec::dirichlet(s1));
        assert!((v + 1.0).abs() < 1e-14);
        // integer displacement is the removable singularity
        assert_eq!(dirichlet_1d(1.0, 3), 7.0);
    }

    #[test]
    fn gaussian_peak_ratio() {
        let spec = KernelSpec::periodized_gaussian(0.15);
        let ratio = kernel_eval(&[0.0, 0.0], &spec) / kernel_eval(&[0.5, 0.5], &spec);
        assert!(ratio > 1e3, "ratio {ratio}");
    }

    #[test]
    fn dirichlet_gram_matches_features() {
        let cloud = lcg_cloud(2, 30, 3);
        for k in 0..4 {
            let s = cube_support(2, k).unwrap();
            let g = gram_matrix(&cloud, &KernelSpec::dirichlet(s.clone())).unwrap();
            let f = feature_matrix(&cloud, &s, None).unwrap().gram();
            let err = g
                .values()
                .iter()
                .zip(f.iter())
                .map(|(a, b)| (a - b.re).abs().max(b.im.abs()))
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "k={k} err={err}");
        }
    }

    #[test]
    fn gaussian_gram_matches_weighted_features() {
        let cloud = lcg_cloud(2, 20, 9);
        for sigma in [0.1, 0.15, 0.25] {
            let kmax = (3.0 / (PI * sigma)).ceil() as usize + 2;
            let s = cube_support(2, kmax).unwrap();
            let f = feature_matrix(&cloud, &s, Some(sigma)).unwrap().gram();
            let g = gram_matrix(&cloud, &KernelSpec::periodized_gaussian(sigma)).unwrap();
            // weighted maps carry no Gaussian normalization
            let scale = (sigma * (2.0 * PI).sqrt()).powi(2);
            let err = g
                .values()
                .iter()
                .zip(f.iter())
                .map(|(a, b)| (a / scale - b.re).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "sigma={sigma} err={err}");
            assert_eq!(feature_weights(&s, sigma).len(), s.len());
        }
    }

    #[test]
    fn single_point_gram() {
        let cloud = PointCloud::from_points(&[vec![0.2, -0.1]]).unwrap();
        let spec = KernelSpec::periodized_gaussian(0.2);
        let g = gram_matrix(&cloud, &spec).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.values()[(0, 0)], kernel_eval(&[0.0, 0.0], &spec));
    }

    #[test]
    fn shift_invariance_and_psd() {
        let cloud = lcg_cloud(2, 40, 5);
        let shifted = PointCloud::new(cloud.matrix().map(|v| v + 0.137)).unwrap();
        for spec in [
            KernelSpec::dirichlet(cube_support(2, 2).unwrap()),
            KernelSpec::periodized_gaussian(0.15),
        ] {
            let a = gram_matrix(&cloud, &spec).unwrap();
            let b = gram_matrix(&shifted, &spec).unwrap();
            assert!((a.values() - b.values()).amax() < 1e-12);
            let ev = a.eigenvalues().unwrap();
            assert!(*ev.last().unwrap() >= -1e-9 * ev[0]);
            let diag = a.values()[(0, 0)];
            assert!(a.values().diagonal().iter().all(|&d| d == diag));
        }
    }

    #[test]
    fn generic_points_have_full_rank() {
        let cloud = lcg_cloud(2, 20, 11);
        let spec = KernelSpec::dirichlet(cube_support(2, 2).unwrap());
        let prof = kernel_rank_profile(&gram_matrix(&cloud, &spec).unwrap(), &[1e-8]).unwrap();
        assert_eq!(prof.ranks, vec![20]);
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let spec = KernelSpec::periodized_gaussian(0.2);
        let r = [0.13, -0.31];
        let g = kernel_gradient(&r, &spec).unwrap();
        let h = 1e-6;
        for d in 0..2 {
            let mut p = r;
            let mut m = r;
            p[d] += h;
            m[d] -= h;
            let fd = (kernel_eval(&p, &spec) - kernel_eval(&m, &spec)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-7);
        }
        assert!(kernel_gradient(&r, &KernelSpec::dirichlet(cube_support(2, 1).unwrap())).is_err());
    }

    #[test]
    fn median_distance() {
        let x = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        assert_eq!(median_pairwise_distance(&x), 2.0);
    }
}

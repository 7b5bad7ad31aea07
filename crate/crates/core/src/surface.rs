//! Potential-function fitting by the minimum-eigenvector problem
//! `min c^H Q c, |c| = 1`, potential evaluation, and 2-D level-set
//! extraction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::features::{feature_matrix, feature_weights};
use crate::geometry::{wrap_coord, FourierCoeffs, Point, PointCloud, SupportSet};
use crate::linalg::herm_eigen_asc;

/// Default relative eigenvalue threshold for the null space of noiseless data.
pub const DEFAULT_FIT_TOL: f64 = 1e-8;

/// Default Gaussian feature-weight width for spurious-zero suppression.
pub const DEFAULT_FIT_SIGMA: f64 = 0.15;

/// `Q = sum_i phi(x_i) phi(x_i)^H` over the (optionally weighted) feature maps.
pub fn gram_q(cloud: &PointCloud, support: &SupportSet, sigma: Option<f64>) -> Result<DMatrix<Complex64>> {
    let phi = feature_matrix(cloud, support, sigma)?;
    Ok(phi.values() * phi.values().adjoint())
}

/// A fitted bandlimited potential.
#[derive(Debug, Clone)]
pub struct SurfaceModel {
    coeffs: FourierCoeffs,
    sigma: Option<f64>,
    weights: Vec<f64>,
    nullspace: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
}

impl SurfaceModel {
    /// Wrap known coefficients as a model with a one-vector null space.
    pub fn from_coeffs(coeffs: FourierCoeffs, sigma: Option<f64>) -> Self {
        let coeffs = coeffs.normalized();
        let weights = match sigma {
            Some(s) => feature_weights(coeffs.support(), s),
            None => vec![1.0; coeffs.support().len()],
        };
        let nullspace = DMatrix::from_column_slice(coeffs.values().len(), 1, coeffs.values());
        Self {
            coeffs,
            sigma,
            weights,
            nullspace,
            eigenvalues: Vec::new(),
        }
    }

    /// Unit-norm minimizer of `c^H Q c`, in the (possibly weighted) feature basis.
    pub fn coeffs(&self) -> &FourierCoeffs {
        &self.coeffs
    }

    pub fn is_weighted(&self) -> bool {
        self.sigma.is_some()
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn support(&self) -> &SupportSet {
        self.coeffs.support()
    }

    pub fn nullspace_dim(&self) -> usize {
        self.nullspace.ncols()
    }

    /// Orthonormal null-space coefficient vectors as columns.
    pub fn nullspace_basis(&self) -> &DMatrix<Complex64> {
        &self.nullspace
    }

    /// Eigenvalues of `Q`, ascending. Empty for models built from coefficients.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn effective(&self, values: &[Complex64]) -> FourierCoeffs {
        let v = values.iter().zip(&self.weights).map(|(c, w)| c * w).collect();
        FourierCoeffs::new(self.coeffs.support().clone(), v).expect("support length is fixed")
    }

    /// Coefficients of `psi` in the plain exponential basis (feature weights applied).
    pub fn effective_coeffs(&self) -> FourierCoeffs {
        self.effective(self.coeffs.values())
    }

    /// Copy whose coefficients are phase-aligned and projected onto the
    /// conjugate-symmetric subspace, so `psi` is real-valued.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        out.coeffs = self.coeffs.symmetrized();
        out
    }
}

/// Fit a potential to a point cloud. `tol` is relative to the largest
/// eigenvalue of `Q`.
pub fn fit_surface(cloud: &PointCloud, support: &SupportSet, sigma: Option<f64>, tol: f64) -> Result<SurfaceModel> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let q = gram_q(cloud, support, sigma)?;
    let (eigenvalues, vectors) = herm_eigen_asc(&q)?;
    let top = eigenvalues.last().copied().unwrap_or(0.0);
    // psi(x) = c^T phi(x) = u^H phi(x) for an eigenvector u, hence c = conj(u).
    let null_count = eigenvalues.iter().take_while(|&&s| s <= tol * top).count();
    let nullspace = DMatrix::from_fn(vectors.nrows(), null_count, |r, c| vectors[(r, c)].conj());
    let first: Vec<Complex64> = vectors.column(0).iter().map(|v| v.conj()).collect();
    let coeffs = FourierCoeffs::new(support.clone(), first)?;
    let weights = match sigma {
        Some(s) => feature_weights(support, s),
        None => vec![1.0; support.len()],
    };
    Ok(SurfaceModel {
        coeffs,
        sigma,
        weights,
        nullspace,
        eigenvalues,
    })
}

/// Evaluate the model potential at each grid point.
pub fn eval_potential(model: &SurfaceModel, grid: &[Point]) -> Result<Vec<Complex64>> {
    let eff = model.effective_coeffs();
    grid.iter()
        .map(|p| {
            if p.dim() != eff.dim() {
                Err(invalid("grid point dimension does not match the model"))
            } else {
                Ok(eff.eval(p.as_slice()))
            }
        })
        .collect()
}

/// `sum_d |psi_d(x)|^2` over every null-space potential.
pub fn sos_potential(model: &SurfaceModel, grid: &[Point]) -> Result<Vec<f64>> {
    if model.nullspace_dim() == 0 {
        return Err(Error::NoNullspace);
    }
    let potentials: Vec<FourierCoeffs> = model
        .nullspace
        .column_iter()
        .map(|col| model.effective(col.as_slice()))
        .collect();
    grid.iter()
        .map(|p| {
            if p.dim() != model.support().dim() {
                return Err(invalid("grid point dimension does not match the model"));
            }
            Ok(potentials.iter().map(|c| c.eval(p.as_slice()).norm_sqr()).sum())
        })
        .collect()
}

/// Open or closed curve through level-set crossings. Closed curves repeat
/// their first vertex at the end.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Polyline {
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
}

/// Node coordinates `-1/2 + i / res` for `i = 0..=res`.
fn grid_axis(res: usize) -> Vec<f64> {
    (0..=res).map(|i| -0.5 + i as f64 / res as f64).collect()
}

/// `psi` sampled on the tensor grid `xs x ys`, returned with `x` as the slow index.
pub fn eval_grid_2d(coeffs: &FourierCoeffs, xs: &[f64], ys: &[f64]) -> Result<Vec<Complex64>> {
    if coeffs.dim() != 2 {
        return Err(Error::Unsupported("grid evaluation needs a 2-D potential".into()));
    }
    let hw = coeffs.support().half_width() as i64;
    let side = (2 * hw + 1) as usize;
    let phases = |coords: &[f64]| -> Vec<Vec<Complex64>> {
        coords
            .iter()
            .map(|&t| {
                let t = wrap_coord(t);
                (-hw..=hw)
                    .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * t))
                    .collect()
            })
            .collect()
    };
    let ex = phases(xs);
    let ey = phases(ys);
    let vals = coeffs.values();
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for ex_i in &ex {
        // inner[k2] = sum_k1 c[k1, k2] e^{j 2 pi k1 x}
        let inner: Vec<Complex64> = (0..side)
            .map(|k2| (0..side).map(|k1| vals[k1 * side + k2] * ex_i[k1]).sum())
            .collect();
        for ey_j in &ey {
            out.push(inner.iter().zip(ey_j).map(|(a, b)| a * b).sum());
        }
    }
    Ok(out)
}

/// Zero crossings of `Re psi` for explicit coefficients.
pub fn levelset_of_coeffs(coeffs: &FourierCoeffs, grid_res: usize) -> Result<Vec<Polyline>> {
    if coeffs.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "level-set extraction needs n = 2, got n = {}",
            coeffs.dim()
        )));
    }
    if grid_res < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let axis = grid_axis(grid_res);
    let field: Vec<f64> = eval_grid_2d(coeffs, &axis, &axis)?.into_iter().map(|v| v.re).collect();
    Ok(marching_squares(&field, &axis))
}

/// Zero set of the model potential by marching squares on `Re psi` after
/// phase alignment.
pub fn extract_levelset_2d(model: &SurfaceModel, grid_res: usize) -> Result<Vec<Polyline>> {
    if model.support().dim() != 2 {
        return Err(Error::Unsupported(format!(
            "level-set extraction needs n = 2, got n = {}",
            model.support().dim()
        )));
    }
    levelset_of_coeffs(&model.symmetrized().effective_coeffs(), grid_res)
}

/// Contours of `sos(x) = threshold` for models with several null vectors.
pub fn extract_sos_levelset(model: &SurfaceModel, grid_res: usize, threshold: f64) -> Result<Vec<Polyline>> {
    if model.support().dim() != 2 {
        return Err(Error::Unsupported("level-set extraction needs n = 2".into()));
    }
    if model.nullspace_dim() == 0 {
        return Err(Error::NoNullspace);
    }
    if grid_res < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let axis = grid_axis(grid_res);
    let mut field = vec![-threshold; axis.len() * axis.len()];
    for col in model.nullspace.column_iter() {
        let eff = model.effective(col.as_slice());
        for (f, v) in field.iter_mut().zip(eval_grid_2d(&eff, &axis, &axis)?) {
            *f += v.norm_sqr();
        }
    }
    Ok(marching_squares(&field, &axis))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    /// Between nodes (i, j) and (i + 1, j).
    AlongX(usize, usize),
    /// Between nodes (i, j) and (i, j + 1).
    AlongY(usize, usize),
}

fn marching_squares(field: &[f64], axis: &[f64]) -> Vec<Polyline> {
    let m = axis.len();
    let at = |i: usize, j: usize| field[i * m + j];
    let inside = |v: f64| v >= 0.0;

    let mut crossing: HashMap<EdgeKey, [f64; 2]> = HashMap::new();
    let mut cross = |key: EdgeKey| -> Option<EdgeKey> {
        let (a, b, pa, pb) = match key {
            EdgeKey::AlongX(i, j) => (at(i, j), at(i + 1, j), [axis[i], axis[j]], [axis[i + 1], axis[j]]),
            EdgeKey::AlongY(i, j) => (at(i, j), at(i, j + 1), [axis[i], axis[j]], [axis[i], axis[j + 1]]),
        };
        if inside(a) == inside(b) {
            return None;
        }
        crossing.entry(key).or_insert_with(|| {
            let t = a / (a - b);
            [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
        });
        Some(key)
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..m - 1 {
        for j in 0..m - 1 {
            let bottom = cross(EdgeKey::AlongX(i, j));
            let right = cross(EdgeKey::AlongY(i + 1, j));
            let top = cross(EdgeKey::AlongX(i, j + 1));
            let left = cross(EdgeKey::AlongY(i, j));
            let hits: Vec<EdgeKey> = [bottom, right, top, left].into_iter().flatten().collect();
            match hits.len() {
                2 => segments.push((hits[0], hits[1])),
                4 => {
                    let (b, r, t, l) = (hits[0], hits[1], hits[2], hits[3]);
                    let center = 0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1));
                    if inside(center) == inside(at(i, j)) {
                        segments.push((b, r));
                        segments.push((t, l));
                    } else {
                        segments.push((b, l));
                        segments.push((r, t));
                    }
                }
                _ => {}
            }
        }
    }

    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        incident.entry(a).or_default().push(s);
        incident.entry(b).or_default().push(s);
    }

    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let walk = |start_seg: usize, start_key: EdgeKey, used: &mut Vec<bool>| -> (Vec<EdgeKey>, bool) {
        let mut keys = vec![start_key];
        let mut seg = start_seg;
        let mut key = start_key;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            key = if a == key { b } else { a };
            keys.push(key);
            if key == start_key {
                return (keys, true);
            }
            match incident[&key].iter().find(|&&s| !used[s]) {
                Some(&next) => seg = next,
                None => return (keys, false),
            }
        }
    };

    // open chains first, starting from their dangling ends
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        let start = if incident[&a].len() == 1 {
            Some(a)
        } else if incident[&b].len() == 1 {
            Some(b)
        } else {
            None
        };
        if let Some(k) = start {
            let (keys, closed) = walk(s, k, &mut used);
            out.push(Polyline {
                vertices: keys.iter().map(|k| crossing[k]).collect(),
                closed,
            });
        }
    }
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let (keys, closed) = walk(s, segments[s].0, &mut used);
        out.push(Polyline {
            vertices: keys.iter().map(|k| crossing[k]).collect(),
            closed,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cube_support, wrap_point};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cos_curve() -> FourierCoeffs {
        FourierCoeffs::from_terms(
            2,
            &[
                (vec![0, 0], c(-1.0)),
                (vec![1, 0], c(0.5)),
                (vec![-1, 0], c(0.5)),
                (vec![0, 1], c(0.5)),
                (vec![0, -1], c(0.5)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn q_of_origin_is_ones() {
        let cloud = PointCloud::from_points(&[vec![0.0]]).unwrap();
        let q = gram_q(&cloud, &cube_support(1, 1).unwrap(), None).unwrap();
        assert!(q.iter().all(|v| (v - c(1.0)).norm() < 1e-15));
    }

    #[test]
    fn q_diagonal_counts_points() {
        let cloud = PointCloud::from_points(&[vec![0.1, 0.3], vec![-0.2, 0.05], vec![0.4, -0.4]]).unwrap();
        let q = gram_q(&cloud, &cube_support(2, 2).unwrap(), None).unwrap();
        assert!(q.diagonal().iter().all(|v| (v - c(3.0)).norm() < 1e-13));
    }

    #[test]
    fn constant_model_evaluates_to_one() {
        let coeffs = FourierCoeffs::from_terms(2, &[(vec![0, 0], c(1.0))]).unwrap();
        let model = SurfaceModel::from_coeffs(coeffs, None);
        let grid: Vec<Point> = [[0.1, 0.2], [-0.4, 0.3]]
            .iter()
            .map(|p| wrap_point(p).unwrap())
            .collect();
        let v = eval_potential(&model, &grid).unwrap();
        assert!(v.iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        let sos = sos_potential(&model, &grid).unwrap();
        for (s, z) in sos.iter().zip(&v) {
            assert!((s - z.norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_eval_matches_pointwise() {
        let coeffs = cos_curve().symmetrized();
        let xs = [-0.3, 0.0, 0.21];
        let ys = [0.1, -0.45];
        let g = eval_grid_2d(&coeffs, &xs, &ys).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                assert!((g[i * ys.len() + j] - coeffs.eval(&[x, y])).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn cos_curve_levelset_is_closed() {
        let polys = levelset_of_coeffs(&cos_curve(), 256).unwrap();
        assert_eq!(polys.len(), 1);
        assert!(polys[0].closed);
        for v in &polys[0].vertices {
            assert!(cos_curve().eval(v).norm() < 1e-2);
        }
    }

    #[test]
    fn no_zero_no_curves() {
        let coeffs =
            FourierCoeffs::from_terms(2, &[(vec![0, 0], c(10.0)), (vec![1, 0], c(0.3)), (vec![-1, 0], c(0.3))])
                .unwrap();
        assert!(levelset_of_coeffs(&coeffs, 64).unwrap().is_empty());
    }

    #[test]
    fn sine_zero_lines() {
        // sin(2 pi x) = (e^{j2pi x} - e^{-j2pi x}) / 2j
        let coeffs = FourierCoeffs::from_terms(
            2,
            &[
                (vec![1, 0], Complex64::new(0.0, -0.5)),
                (vec![-1, 0], Complex64::new(0.0, 0.5)),
            ],
        )
        .unwrap();
        let polys = levelset_of_coeffs(&coeffs, 128).unwrap();
        assert!(!polys.is_empty());
        for p in &polys {
            for v in &p.vertices {
                let d = v[0].abs().min((v[0].abs() - 0.5).abs());
                assert!(d < 1e-2, "vertex {v:?}");
            }
        }
    }

    #[test]
    fn levelset_needs_2d() {
        let coeffs = FourierCoeffs::from_terms(1, &[(vec![0], c(1.0))]).unwrap();
        let model = SurfaceModel::from_coeffs(coeffs, None);
        assert!(matches!(extract_levelset_2d(&model, 32), Err(Error::Unsupported(_))));
    }

    #[test]
    fn empty_nullspace_is_an_error() {
        let cloud = PointCloud::from_points(
            &(0..40)
                .map(|i| vec![(i as f64 * 0.137) % 1.0, (i as f64 * 0.291) % 1.0])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let model = fit_surface(&cloud, &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
        assert_eq!(model.nullspace_dim(), 0);
        let grid = vec![wrap_point(&[0.0, 0.0]).unwrap()];
        assert!(matches!(sos_potential(&model, &grid), Err(Error::NoNullspace)));
    }
}

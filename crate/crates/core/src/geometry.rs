//! Core domain types: torus points, point clouds, cube frequency supports,
//! Fourier coefficient vectors and kernel specifications.
//!
//! Coordinates live on the unit torus `[-1/2, 1/2)^n`. Every kernel and
//! feature map in this crate is 1-periodic, so wrapping is lossless.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Largest frequency support (number of frequency vectors) any constructor
/// will build. Explicit feature matrices beyond this size must go through
/// the kernel path instead.
pub const MAX_SUPPORT_LEN: usize = 1_000_000;

/// Map a scalar coordinate into `[-1/2, 1/2)` by subtracting the nearest
/// integer.
#[inline]
pub fn wrap_coord(x: f64) -> f64 {
    let mut r = x - (x + 0.5).floor();
    if r >= 0.5 {
        r -= 1.0;
    }
    if r < -0.5 {
        r = -0.5;
    }
    r
}

/// A point on the unit torus, coordinates in `[-1/2, 1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }
}

/// Canonicalize torus coordinates.
pub fn wrap_point(p: &[f64]) -> Result<Point> {
    if p.is_empty() {
        return Err(invalid("point must have at least one coordinate"));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite coordinate {bad}")));
    }
    Ok(Point {
        coords: p.iter().map(|&v| wrap_coord(v)).collect(),
    })
}

/// `n x N` matrix whose columns are points on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: DMatrix<f64>,
}

impl PointCloud {
    /// Build a cloud from an `n x N` matrix, wrapping every coordinate.
    pub fn new(mut data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(invalid("point cloud needs dimension n >= 1"));
        }
        if data.ncols() == 0 {
            return Err(Error::EmptyCloud);
        }
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(invalid("point cloud contains non-finite values"));
            }
            *v = wrap_coord(*v);
        }
        Ok(Self { data })
    }

    /// Build a cloud from a list of points of equal dimension.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyCloud)?;
        let n = first.len();
        if points.iter().any(|p| p.len() != n) {
            return Err(invalid("points have inconsistent dimensions"));
        }
        let data = DMatrix::from_fn(n, points.len(), |d, i| points[i][d]);
        Self::new(data)
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.data.as_slice()[i * n..(i + 1) * n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.as_slice().chunks_exact(self.dim())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Centered cube of integer frequency vectors `{-K..K}^n` in lexicographic
/// order (first coordinate most significant).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SupportShape", into = "SupportShape")]
pub struct SupportSet {
    dim: usize,
    half_width: usize,
    freqs: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct SupportShape {
    dim: usize,
    half_width: usize,
}

impl TryFrom<SupportShape> for SupportSet {
    type Error = Error;

    fn try_from(s: SupportShape) -> Result<Self> {
        cube_support(s.dim, s.half_width)
    }
}

impl From<SupportSet> for SupportShape {
    fn from(s: SupportSet) -> Self {
        SupportShape {
            dim: s.dim,
            half_width: s.half_width,
        }
    }
}

/// Build the centered cube `{-K..K}^n`.
pub fn cube_support(n: usize, half_width: usize) -> Result<SupportSet> {
    if n == 0 {
        return Err(invalid("support dimension must be >= 1"));
    }
    let side = 2 * half_width + 1;
    let len = u32::try_from(n)
        .ok()
        .and_then(|e| side.checked_pow(e))
        .filter(|&l| l <= MAX_SUPPORT_LEN)
        .ok_or(Error::CapacityExceeded {
            what: "frequency support",
            requested: side.saturating_pow(n.min(64) as u32),
            cap: MAX_SUPPORT_LEN,
        })?;

    let k = half_width as i64;
    let mut freqs = Vec::with_capacity(len * n);
    let mut cur = vec![-k; n];
    for _ in 0..len {
        freqs.extend_from_slice(&cur);
        // odometer increment, last coordinate fastest
        for d in (0..n).rev() {
            if cur[d] < k {
                cur[d] += 1;
                break;
            }
            cur[d] = -k;
        }
    }
    Ok(SupportSet {
        dim: n,
        half_width,
        freqs,
    })
}

impl SupportSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.freqs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Frequency vector at position `idx` of the lexicographic ordering.
    pub fn freq(&self, idx: usize) -> &[i64] {
        &self.freqs[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.freqs.chunks_exact(self.dim)
    }

    /// Position of `k` in the ordering, if it lies in the cube.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let hw = self.half_width as i64;
        let side = 2 * hw + 1;
        let mut idx = 0i64;
        for &kd in k {
            if kd.abs() > hw {
                return None;
            }
            idx = idx * side + (kd + hw);
        }
        Some(idx as usize)
    }

    /// Position of `-k` given the position of `k`.
    #[inline]
    pub fn negated_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Squared Euclidean norm of every frequency vector, in order.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.iter().map(|k| k.iter().map(|&v| (v * v) as f64).sum()).collect()
    }
}

/// Number of integer shifts `t` with `lambda + t` contained in `gamma`.
pub fn translate_count(gamma: &SupportSet, lambda: &SupportSet) -> Result<usize> {
    if gamma.dim != lambda.dim {
        return Err(invalid(format!(
            "support dimensions differ: {} vs {}",
            gamma.dim, lambda.dim
        )));
    }
    if lambda.half_width > gamma.half_width {
        return Ok(0);
    }
    let per_dim = 2 * (gamma.half_width - lambda.half_width) + 1;
    Ok(per_dim.pow(gamma.dim as u32))
}

/// Fourier coefficients `c_k` of a bandlimited potential
/// `psi(r) = sum_k c_k exp(j 2 pi k.r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    support: SupportSet,
    values: Vec<Complex64>,
    conjugate_symmetric: bool,
}

impl FourierCoeffs {
    pub fn new(support: SupportSet, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(invalid(format!(
                "{} coefficients for a support of size {}",
                values.len(),
                support.len()
            )));
        }
        Ok(Self {
            support,
            values,
            conjugate_symmetric: false,
        })
    }

    /// Build coefficients flagged conjugate-symmetric, so that `psi` is real.
    /// Fails if `c_{-k} != conj(c_k)` beyond rounding.
    pub fn new_symmetric(support: SupportSet, values: Vec<Complex64>) -> Result<Self> {
        let mut c = Self::new(support, values)?;
        let scale = c.norm().max(1.0);
        if c.symmetry_defect() > 1e-12 * scale {
            return Err(invalid("coefficients are not conjugate-symmetric"));
        }
        c.conjugate_symmetric = true;
        Ok(c)
    }

    /// Build from sparse `(k, c_k)` terms, embedded in the smallest cube that
    /// holds them. Repeated frequencies are summed.
    pub fn from_terms(dim: usize, terms: &[(Vec<i64>, Complex64)]) -> Result<Self> {
        let hw = terms
            .iter()
            .flat_map(|(k, _)| k.iter().map(|v| v.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        let support = cube_support(dim, hw)?;
        let mut values = vec![Complex64::new(0.0, 0.0); support.len()];
        for (k, c) in terms {
            let idx = support
                .index_of(k)
                .ok_or_else(|| invalid(format!("frequency {k:?} has wrong dimension")))?;
            values[idx] += c;
        }
        let mut out = Self::new(support, values)?;
        let scale = out.norm().max(1.0);
        out.conjugate_symmetric = out.symmetry_defect() <= 1e-12 * scale;
        Ok(out)
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn is_conjugate_symmetric(&self) -> bool {
        self.conjugate_symmetric
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max_k |c_{-k} - conj(c_k)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let len = self.values.len();
        (0..len)
            .map(|i| (self.values[len - 1 - i] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Unit-norm copy. Zero vectors are returned unchanged.
    pub fn normalized(&self) -> Self {
        let nrm = self.norm();
        let mut out = self.clone();
        if nrm > 0.0 {
            out.values.iter_mut().for_each(|c| *c /= nrm);
        }
        out
    }

    /// Remove the arbitrary global phase of an eigenvector and project onto
    /// the conjugate-symmetric subspace, making `psi` real-valued. The norm
    /// is preserved.
    pub fn symmetrized(&self) -> Self {
        let len = self.values.len();
        // For c = e^{i theta} s with s symmetric: sum_k c_k c_{-k} = e^{2 i theta} sum |s_k|^2.
        let acc: Complex64 = (0..len).map(|i| self.values[i] * self.values[len - 1 - i]).sum();
        let rot = if acc.norm() > 0.0 {
            (acc / acc.norm()).sqrt().conj()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let rotated: Vec<Complex64> = self.values.iter().map(|c| c * rot).collect();
        let mut values: Vec<Complex64> = (0..len)
            .map(|i| 0.5 * (rotated[i] + rotated[len - 1 - i].conj()))
            .collect();
        let before = self.norm();
        let after = values.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if after > 0.0 {
            values.iter_mut().for_each(|c| *c *= before / after);
        }
        Self {
            support: self.support.clone(),
            values,
            conjugate_symmetric: true,
        }
    }

    /// Zero-pad into a larger cube of the same dimension.
    pub fn embed(&self, support: &SupportSet) -> Result<Self> {
        if support.dim() != self.dim() || support.half_width() < self.support.half_width() {
            return Err(invalid("target support must contain the coefficient support"));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); support.len()];
        for (k, c) in self.support.iter().zip(&self.values) {
            // index_of cannot fail: the target cube contains every frequency
            values[support.index_of(k).expect("embedded frequency")] = *c;
        }
        Ok(Self {
            support: support.clone(),
            values,
            conjugate_symmetric: self.conjugate_symmetric,
        })
    }

    /// Evaluate `psi(x)`.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        debug_assert_eq!(x.len(), self.dim());
        self.support
            .iter()
            .zip(&self.values)
            .map(|(k, c)| {
                let phase: f64 = k.iter().zip(x).map(|(&kd, &xd)| kd as f64 * wrap_coord(xd)).sum();
                c * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum()
    }
}

/// Absolute normalized correlation `|<a, b>| / (|a| |b|)`, invariant to a
/// global phase. Both vectors must share a support.
pub fn coefficient_correlation(a: &FourierCoeffs, b: &FourierCoeffs) -> Result<f64> {
    if a.support() != b.support() {
        return Err(invalid("coefficient supports differ"));
    }
    let inner: Complex64 = a.values().iter().zip(b.values()).map(|(x, y)| x.conj() * y).sum();
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return Err(invalid("zero coefficient vector"));
    }
    Ok(inner.norm() / denom)
}

/// Shift-invariant kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Sum of exponentials over a cube support (Dirichlet kernel).
    Dirichlet { support: SupportSet },
    /// Gaussian of width `sigma` wrapped onto the unit torus; the limit of
    /// exponential maps weighted by `exp(-pi^2 sigma^2 |k|^2)`.
    PeriodizedGaussian { sigma: f64 },
    /// Plain radial Gaussian `exp(-|r|^2 / (2 sigma^2))`, for image-scale
    /// clouds whose natural width exceeds the torus period.
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn dirichlet(support: SupportSet) -> Self {
        KernelSpec::Dirichlet { support }
    }

    pub fn periodized_gaussian(sigma: f64) -> Self {
        KernelSpec::PeriodizedGaussian { sigma }
    }

    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::Gaussian { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Dirichlet { support } if support.is_empty() => Err(invalid("Dirichlet support is empty")),
            KernelSpec::PeriodizedGaussian { sigma } | KernelSpec::Gaussian { sigma }
                if !(sigma.is_finite() && *sigma > 0.0) =>
            {
                Err(invalid(format!("kernel sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Width parameter of the Gaussian families.
    pub fn sigma(&self) -> Option<f64> {
        match self {
            KernelSpec::Dirichlet { .. } => None,
            KernelSpec::PeriodizedGaussian { sigma } | KernelSpec::Gaussian { sigma } => Some(*sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_point(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(wrap_point(&[0.75]).unwrap().as_slice(), &[-0.25]);
        assert_eq!(wrap_point(&[-0.5, 1.5]).unwrap().as_slice(), &[-0.5, -0.5]);
        assert!(matches!(wrap_point(&[f64::NAN]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cube_sizes_and_order() {
        let s = cube_support(1, 1).unwrap();
        assert_eq!(s.iter().map(|k| k[0]).collect::<Vec<_>>(), vec![-1, 0, 1]);
        assert_eq!(cube_support(2, 1).unwrap().len(), 9);
        let s = cube_support(2, 2).unwrap();
        assert_eq!(s.len(), 25);
        assert_eq!(s.freq(0), &[-2, -2]);
        assert_eq!(s.freq(1), &[-2, -1]);
        assert_eq!(s.freq(24), &[2, 2]);
        for i in 0..s.len() {
            assert_eq!(s.index_of(s.freq(i)), Some(i));
            let neg: Vec<i64> = s.freq(i).iter().map(|v| -v).collect();
            assert_eq!(s.index_of(&neg), Some(s.negated_index(i)));
        }
    }

    #[test]
    fn cube_capacity() {
        assert!(matches!(cube_support(10, 5), Err(Error::CapacityExceeded { .. })));
        assert!(matches!(cube_support(400, 1), Err(Error::CapacityExceeded { .. })));
    }

    fn brute_force_translations(gamma: &SupportSet, lambda: &SupportSet) -> usize {
        let n = gamma.dim();
        let range = (gamma.half_width() + lambda.half_width()) as i64 + 1;
        let side = (2 * range + 1) as usize;
        let mut count = 0;
        for flat in 0..side.pow(n as u32) {
            let mut t = vec![0i64; n];
            let mut rem = flat;
            for td in t.iter_mut() {
                *td = (rem % side) as i64 - range;
                rem /= side;
            }
            let fits = lambda.iter().all(|k| {
                let shifted: Vec<i64> = k.iter().zip(&t).map(|(a, b)| a + b).collect();
                gamma.index_of(&shifted).is_some()
            });
            if fits {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn translate_count_examples() {
        let g = cube_support(2, 2).unwrap();
        let l = cube_support(2, 1).unwrap();
        assert_eq!(brute_force_translations(&g, &l), 9);
        assert_eq!(translate_count(&g, &l).unwrap(), 9);
        assert_eq!(translate_count(&l, &l).unwrap(), 1);
        let g1 = cube_support(1, 2).unwrap();
        let l1 = cube_support(1, 1).unwrap();
        assert_eq!(brute_force_translations(&g1, &l1), 3);
        assert_eq!(translate_count(&g1, &l1).unwrap(), 3);
        assert!(translate_count(&g1, &l).is_err());
    }

    #[test]
    fn translate_count_matches_enumeration() {
        for n in 1..=3 {
            for kg in 0..=4 {
                for kl in 0..=kg {
                    let g = cube_support(n, kg).unwrap();
                    let l = cube_support(n, kl).unwrap();
                    assert_eq!(
                        translate_count(&g, &l).unwrap(),
                        brute_force_translations(&g, &l),
                        "n={n} kg={kg} kl={kl}"
                    );
                }
            }
        }
    }

    #[test]
    fn symmetrize_removes_global_phase() {
        let c = FourierCoeffs::from_terms(
            1,
            &[
                (vec![-1], Complex64::new(0.5, 0.0)),
                (vec![0], Complex64::new(-1.0, 0.0)),
                (vec![1], Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap();
        assert!(c.is_conjugate_symmetric());
        let rotated = FourierCoeffs::new(
            c.support().clone(),
            c.values().iter().map(|v| v * Complex64::from_polar(1.0, 0.7)).collect(),
        )
        .unwrap();
        let s = rotated.symmetrized();
        assert!(s.symmetry_defect() < 1e-14);
        assert!((coefficient_correlation(&s, &c).unwrap() - 1.0).abs() < 1e-12);
        for x in [-0.4, -0.1, 0.2, 0.33] {
            assert!(s.eval(&[x]).im.abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_spec_json_shape() {
        let spec = KernelSpec::dirichlet(cube_support(2, 1).unwrap());
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"dirichlet","support":{"dim":2,"half_width":1}}"#);
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let g: KernelSpec = serde_json::from_str(r#"{"family":"periodized_gaussian","sigma":0.15}"#).unwrap();
        assert_eq!(g, KernelSpec::periodized_gaussian(0.15));
        assert!(KernelSpec::gaussian(0.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(v in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
            let once = wrap_point(&v).unwrap();
            let twice = wrap_point(once.as_slice()).unwrap();
            prop_assert_eq!(&once, &twice);
            for &c in once.as_slice() {
                prop_assert!((-0.5..0.5).contains(&c));
            }
        }

        #[test]
        fn cube_has_expected_size(n in 1usize..4, k in 0usize..5) {
            let s = cube_support(n, k).unwrap();
            prop_assert_eq!(s.len(), (2 * k + 1).pow(n as u32));
            prop_assert!(s.iter().all(|f| f.iter().all(|v| v.unsigned_abs() as usize <= k)));
        }
    }
}

//! Ground-truth generators: analytic level-set shapes, noise, and a toy
//! dynamic image series driven by two phases.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul};

use crate::error::{invalid, Error, Result};
use crate::geometry::{wrap_coord, FourierCoeffs, PointCloud};

/// Sparse trigonometric polynomial in `dim` variables, keyed by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    terms: BTreeMap<Vec<i64>, Complex64>,
}

impl TrigPoly {
    pub fn constant(dim: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; dim], Complex64::new(c, 0.0));
        Self { dim, terms }
    }

    fn axis_pair(dim: usize, axis: usize, plus: Complex64, minus: Complex64) -> Self {
        let mut k = vec![0; dim];
        k[axis] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(k.clone(), plus);
        k[axis] = -1;
        terms.insert(k, minus);
        Self { dim, terms }
    }

    /// `cos(2 pi (x_axis - shift))`.
    pub fn cos(dim: usize, axis: usize, shift: f64) -> Self {
        let p = Complex64::from_polar(0.5, -2.0 * PI * shift);
        Self::axis_pair(dim, axis, p, p.conj())
    }

    /// `sin(2 pi x_axis)`.
    pub fn sin(dim: usize, axis: usize) -> Self {
        Self::axis_pair(dim, axis, Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5))
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in self.terms.values_mut() {
            *v *= s;
        }
        self
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                let phase: f64 = k.iter().zip(x).map(|(&kd, &xd)| kd as f64 * xd).sum();
                c * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum()
    }

    pub fn to_coeffs(&self) -> Result<FourierCoeffs> {
        let terms: Vec<(Vec<i64>, Complex64)> = self
            .terms
            .iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(k, c)| (k.clone(), *c))
            .collect();
        FourierCoeffs::from_terms(self.dim, &terms)
    }
}

impl Add for TrigPoly {
    type Output = TrigPoly;
    fn add(mut self, rhs: TrigPoly) -> TrigPoly {
        assert_eq!(self.dim, rhs.dim, "trig polynomial dimensions differ");
        for (k, c) in rhs.terms {
            *self.terms.entry(k).or_default() += c;
        }
        self
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: &TrigPoly) -> TrigPoly {
        assert_eq!(self.dim, rhs.dim, "trig polynomial dimensions differ");
        let mut terms: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let k: Vec<i64> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                *terms.entry(k).or_default() += ca * cb;
            }
        }
        TrigPoly { dim: self.dim, terms }
    }
}

/// Planar shapes with closed-form bandlimited potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// `cos 2 pi x + cos 2 pi y - level`.
    CosCurve { level: f64 },
    /// Product of two shifted cos-curve ovals centered at `(+-0.12, 0)`.
    TwoCircleUnion,
    /// `(u^2 + v^2)^2 - a^2 (u^2 - v^2)` with `u = sin 2 pi x`, `v = sin 2 pi y`, `a = 0.8`.
    Lemniscate,
}

const CIRCLE_SHIFT: f64 = 0.12;
const CIRCLE_LEVEL: f64 = 1.6;
const LEMNISCATE_A: f64 = 0.8;

impl ShapeSpec {
    pub fn cos_curve(level: f64) -> Self {
        ShapeSpec::CosCurve { level }
    }

    /// Parse a command-line shape name.
    pub fn from_name(name: &str, level: f64) -> Result<Self> {
        match name {
            "cos-curve" | "cos_curve" => Ok(ShapeSpec::CosCurve { level }),
            "two-circle-union" | "two_circle_union" => Ok(ShapeSpec::TwoCircleUnion),
            "lemniscate" => Ok(ShapeSpec::Lemniscate),
            other => Err(invalid(format!(
                "unknown shape `{other}` (expected cos-curve, two-circle-union or lemniscate)"
            ))),
        }
    }

    /// Closed-form real potential.
    pub fn psi(&self, x: &[f64]) -> f64 {
        let (c, s) = (|t: f64| (2.0 * PI * t).cos(), |t: f64| (2.0 * PI * t).sin());
        match self {
            ShapeSpec::CosCurve { level } => c(x[0]) + c(x[1]) - level,
            ShapeSpec::TwoCircleUnion => {
                let oval = |shift: f64| c(x[0] - shift) + c(x[1]) - CIRCLE_LEVEL;
                oval(CIRCLE_SHIFT) * oval(-CIRCLE_SHIFT)
            }
            ShapeSpec::Lemniscate => {
                let (u2, v2) = (s(x[0]).powi(2), s(x[1]).powi(2));
                (u2 + v2).powi(2) - LEMNISCATE_A * LEMNISCATE_A * (u2 - v2)
            }
        }
    }

    pub fn trig_poly(&self) -> TrigPoly {
        match self {
            ShapeSpec::CosCurve { level } => {
                TrigPoly::cos(2, 0, 0.0) + TrigPoly::cos(2, 1, 0.0) + TrigPoly::constant(2, -level)
            }
            ShapeSpec::TwoCircleUnion => {
                let oval = |shift: f64| {
                    TrigPoly::cos(2, 0, shift) + TrigPoly::cos(2, 1, 0.0) + TrigPoly::constant(2, -CIRCLE_LEVEL)
                };
                &oval(CIRCLE_SHIFT) * &oval(-CIRCLE_SHIFT)
            }
            ShapeSpec::Lemniscate => {
                let u = TrigPoly::sin(2, 0);
                let v = TrigPoly::sin(2, 1);
                let u2 = &u * &u;
                let v2 = &v * &v;
                let r2 = u2.clone() + v2.clone();
                &r2 * &r2 + (u2 + v2.scale(-1.0)).scale(-LEMNISCATE_A * LEMNISCATE_A)
            }
        }
    }

    /// Fourier coefficients of the potential on the smallest enclosing cube.
    pub fn coeffs(&self) -> Result<FourierCoeffs> {
        self.trig_poly().to_coeffs()
    }
}

const LINE_SAMPLES: usize = 2048;
const MAX_EMPTY_LINES: usize = 10_000;

/// `N` points on the zero set of `shape`, each refined by bisection along a
/// random horizontal or vertical line.
pub fn sample_surface(shape: &ShapeSpec, n_points: usize, seed: u64) -> Result<PointCloud> {
    if n_points == 0 {
        return Err(Error::EmptyCloud);
    }
    let coeffs = shape.coeffs()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n_points);
    let mut empty = 0;
    let grid: Vec<f64> = (0..=LINE_SAMPLES)
        .map(|i| -0.5 + i as f64 / LINE_SAMPLES as f64)
        .collect();
    while points.len() < n_points {
        let axis = rng.random_range(0..2usize);
        let fixed = rng.random_range(-0.5..0.5);
        let at = |t: f64| {
            let mut p = [fixed, fixed];
            p[axis] = t;
            p
        };
        let f = |t: f64| shape.psi(&at(t));
        let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        let brackets: Vec<usize> = (0..LINE_SAMPLES)
            .filter(|&i| vals[i] == 0.0 || vals[i].signum() != vals[i + 1].signum())
            .collect();
        if brackets.is_empty() {
            empty += 1;
            if empty >= MAX_EMPTY_LINES {
                return Err(Error::NoZeroSet);
            }
            continue;
        }
        empty = 0;
        let i = brackets[rng.random_range(0..brackets.len())];
        let (mut lo, mut hi) = (grid[i], grid[i + 1]);
        let mut flo = vals[i];
        let mut root = lo;
        if flo != 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            root = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
        }
        let p = at(wrap_coord(root));
        if coeffs.eval(&p).norm() < 1e-12 {
            points.push(p.to_vec());
        }
    }
    PointCloud::from_points(&points)
}

/// Add i.i.d. Gaussian noise to every coordinate and re-wrap.
pub fn add_noise(cloud: &PointCloud, std: f64, seed: u64) -> Result<PointCloud> {
    if !(std.is_finite() && std >= 0.0) {
        return Err(invalid(format!("noise std must be non-negative, got {std}")));
    }
    if std == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = cloud.matrix().clone();
    for v in m.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    PointCloud::new(m)
}

/// A disk whose vertical position follows a slow phase and whose radius
/// follows a fast phase, rendered with a sigmoid edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynSeriesSpec {
    /// `(h, w)` in pixels.
    pub frame_shape: (usize, usize),
    pub num_frames: usize,
    /// Radius phase frequency, cycles per frame.
    pub cardiac_freq: f64,
    /// Position phase frequency, cycles per frame.
    pub resp_freq: f64,
    /// Vertical center excursion in pixels.
    pub drift: f64,
    /// Radius excursion in pixels.
    pub radius_amp: f64,
    pub radius0: f64,
    /// Sigmoid edge width in pixels.
    pub edge: f64,
    /// Disk intensity over a zero background.
    pub amplitude: f64,
}

impl Default for DynSeriesSpec {
    fn default() -> Self {
        Self {
            frame_shape: (32, 32),
            num_frames: 64,
            cardiac_freq: 0.173,
            resp_freq: 0.031,
            drift: 2.0,
            radius_amp: 1.5,
            radius0: 6.0,
            edge: 1.5,
            amplitude: 0.4,
        }
    }
}

impl DynSeriesSpec {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.frame_shape;
        if h == 0 || w == 0 || self.num_frames == 0 {
            return Err(invalid("series needs non-empty frames and at least one frame"));
        }
        if !(self.edge.is_finite() && self.edge > 0.0) {
            return Err(invalid("edge width must be positive"));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.amplitude.abs() < 0.5) {
            return Err(invalid("amplitude must keep intensities inside (-1/2, 1/2)"));
        }
        let fields = [
            self.cardiac_freq,
            self.resp_freq,
            self.drift,
            self.radius_amp,
            self.radius0,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(invalid("series parameters must be finite"));
        }
        Ok(())
    }

    /// `(cardiac, respiratory)` phase values of frame `t`.
    pub fn phases(&self, t: usize) -> (f64, f64) {
        let t = t as f64;
        (
            (2.0 * PI * self.cardiac_freq * t).sin(),
            (2.0 * PI * self.resp_freq * t).sin(),
        )
    }

    /// Render one frame, row-major, from the two phase values.
    pub fn render(&self, cardiac: f64, resp: f64) -> Vec<f64> {
        let (h, w) = self.frame_shape;
        let cy = self.drift * resp;
        let radius = self.radius0 + self.radius_amp * cardiac;
        let mut out = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let dy = y as f64 - (h as f64 - 1.0) / 2.0 - cy;
                let dx = x as f64 - (w as f64 - 1.0) / 2.0;
                let d = dy.hypot(dx);
                out.push(self.amplitude / (1.0 + ((d - radius) / self.edge).exp()));
            }
        }
        out
    }
}

/// `(h w) x num_frames` matrix of vectorized frames.
pub fn make_dynamic_series(spec: &DynSeriesSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (h, w) = spec.frame_shape;
    let mut m = DMatrix::zeros(h * w, spec.num_frames);
    for t in 0..spec.num_frames {
        let (c, r) = spec.phases(t);
        m.set_column(t, &nalgebra::DVector::from_vec(spec.render(c, r)));
    }
    Ok(m)
}

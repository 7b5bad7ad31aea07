//! Linear measurement operators `A` acting on `n x N` clouds.
//!
//! Measurements are complex for every operator kind. Clouds are real, so `A`
//! is real-linear and the adjoint is taken with respect to the real inner
//! product `<a, b> = Re sum conj(a_i) b_i`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// Frequency masks for one frame, row-major over `(fy, fx)` in FFT index order.
pub type FrameMask = Vec<bool>;

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Identity,
    /// Column-major `n x N` selection mask.
    EntryMask(Vec<bool>),
    /// Per-column k-space masks on `h x w` frames.
    FourierMask {
        frame_shape: (usize, usize),
        masks: Vec<FrameMask>,
    },
}

#[derive(Clone)]
struct FftPlans {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl FftPlans {
    fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        }
    }
}

/// A measurement operator with a fixed input shape `n x N`.
#[derive(Clone)]
pub struct MeasurementOp {
    kind: OpKind,
    n: usize,
    cols: usize,
    out_dim: usize,
    plans: Option<FftPlans>,
}

impl fmt::Debug for MeasurementOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementOp")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("cols", &self.cols)
            .field("out_dim", &self.out_dim)
            .finish()
    }
}

impl MeasurementOp {
    pub fn identity(n: usize, cols: usize) -> Self {
        Self {
            kind: OpKind::Identity,
            n,
            cols,
            out_dim: n * cols,
            plans: None,
        }
    }

    /// `mask` is column-major with `n * cols` entries.
    pub fn entry_mask(n: usize, cols: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n * cols {
            return Err(invalid(format!(
                "entry mask has {} entries, expected {}",
                mask.len(),
                n * cols
            )));
        }
        let out_dim = mask.iter().filter(|&&m| m).count();
        Ok(Self {
            kind: OpKind::EntryMask(mask),
            n,
            cols,
            out_dim,
            plans: None,
        })
    }

    /// One k-space mask per column; frames are `h x w`, stored row-major.
    pub fn fourier_mask(frame_shape: (usize, usize), masks: Vec<FrameMask>) -> Result<Self> {
        let (h, w) = frame_shape;
        if h == 0 || w == 0 {
            return Err(invalid("frame shape must be non-empty"));
        }
        if masks.is_empty() {
            return Err(invalid("Fourier operator needs at least one frame mask"));
        }
        if let Some(bad) = masks.iter().find(|m| m.len() != h * w) {
            return Err(invalid(format!(
                "frame mask has {} entries, expected {}",
                bad.len(),
                h * w
            )));
        }
        let out_dim = masks.iter().flatten().filter(|&&m| m).count();
        Ok(Self {
            n: h * w,
            cols: masks.len(),
            out_dim,
            plans: Some(FftPlans::new(h, w)),
            kind: OpKind::FourierMask { frame_shape, masks },
        })
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    /// Expected input shape `(n, N)`.
    pub fn input_shape(&self) -> (usize, usize) {
        (self.n, self.cols)
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != (self.n, self.cols) {
            return Err(invalid(format!(
                "operator expects a {}x{} cloud, got {}x{}",
                self.n,
                self.cols,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// `A(X)`.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<Vec<Complex64>> {
        self.check_input(x)?;
        let mut out = Vec::with_capacity(self.out_dim);
        match &self.kind {
            OpKind::Identity => out.extend(x.iter().map(|&v| Complex64::new(v, 0.0))),
            OpKind::EntryMask(mask) => out.extend(
                x.iter()
                    .zip(mask)
                    .filter(|(_, &m)| m)
                    .map(|(&v, _)| Complex64::new(v, 0.0)),
            ),
            OpKind::FourierMask { frame_shape, masks } => {
                let plans = self.plans.as_ref().expect("Fourier operator has plans");
                let mut buf = vec![Complex64::default(); self.n];
                for (col, mask) in x.column_iter().zip(masks) {
                    for (b, &v) in buf.iter_mut().zip(col.iter()) {
                        *b = Complex64::new(v, 0.0);
                    }
                    fft2(&mut buf, *frame_shape, plans, true);
                    out.extend(buf.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v));
                }
            }
        }
        Ok(out)
    }

    /// `A*(y)`, zero-filling unmeasured positions.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<DMatrix<f64>> {
        if y.len() != self.out_dim {
            return Err(invalid(format!(
                "measurement vector has length {}, expected {}",
                y.len(),
                self.out_dim
            )));
        }
        let mut out = DMatrix::zeros(self.n, self.cols);
        match &self.kind {
            OpKind::Identity => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v.re;
                }
            }
            OpKind::EntryMask(mask) => {
                let mut it = y.iter();
                for (o, &m) in out.iter_mut().zip(mask) {
                    if m {
                        *o = it.next().expect("length checked").re;
                    }
                }
            }
            OpKind::FourierMask { frame_shape, masks } => {
                let plans = self.plans.as_ref().expect("Fourier operator has plans");
                let mut it = y.iter();
                let mut buf = vec![Complex64::default(); self.n];
                for (mut col, mask) in out.column_iter_mut().zip(masks) {
                    for (b, &m) in buf.iter_mut().zip(mask) {
                        *b = if m {
                            *it.next().expect("length checked")
                        } else {
                            Complex64::default()
                        };
                    }
                    fft2(&mut buf, *frame_shape, plans, false);
                    for (o, v) in col.iter_mut().zip(&buf) {
                        *o = v.re;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `A*(A(X))` without materializing the measurement vector.
    pub fn normal(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        Ok(match &self.kind {
            OpKind::Identity => x.clone(),
            OpKind::EntryMask(mask) => {
                let mut out = x.clone();
                for (o, &m) in out.iter_mut().zip(mask) {
                    if !m {
                        *o = 0.0;
                    }
                }
                out
            }
            OpKind::FourierMask { frame_shape, masks } => {
                let plans = self.plans.as_ref().expect("Fourier operator has plans");
                let mut out = DMatrix::zeros(self.n, self.cols);
                let mut buf = vec![Complex64::default(); self.n];
                for ((mut o, col), mask) in out.column_iter_mut().zip(x.column_iter()).zip(masks) {
                    for (b, &v) in buf.iter_mut().zip(col.iter()) {
                        *b = Complex64::new(v, 0.0);
                    }
                    fft2(&mut buf, *frame_shape, plans, true);
                    for (b, &m) in buf.iter_mut().zip(mask) {
                        if !m {
                            *b = Complex64::default();
                        }
                    }
                    fft2(&mut buf, *frame_shape, plans, false);
                    for (dst, v) in o.iter_mut().zip(&buf) {
                        *dst = v.re;
                    }
                }
                out
            }
        })
    }
}

/// In-place unitary 2-D DFT of a row-major `h x w` frame.
fn fft2(buf: &mut [Complex64], (h, w): (usize, usize), plans: &FftPlans, forward: bool) {
    let (row, col) = if forward {
        (&plans.row_fwd, &plans.col_fwd)
    } else {
        (&plans.row_inv, &plans.col_inv)
    };
    row.process(buf);
    let mut t = vec![Complex64::default(); h * w];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = buf[y * w + x];
        }
    }
    col.process(&mut t);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    for y in 0..h {
        for x in 0..w {
            buf[y * w + x] = t[x * h + y] * scale;
        }
    }
}

/// Signed frequency of FFT index `k` on an axis of length `len`.
pub fn signed_freq(k: usize, len: usize) -> i64 {
    if k >= len.div_ceil(2) {
        k as i64 - len as i64
    } else {
        k as i64
    }
}

/// FFT index of a signed frequency.
pub fn freq_index(f: i64, len: usize) -> usize {
    f.rem_euclid(len as i64) as usize
}

/// Centered `c x c` low-frequency block as a frame mask.
pub fn center_mask(frame_shape: (usize, usize), center_size: usize) -> Result<FrameMask> {
    let (h, w) = frame_shape;
    if center_size == 0 || center_size > h.min(w) {
        return Err(invalid(format!(
            "center size {center_size} must lie in 1..={}",
            h.min(w)
        )));
    }
    let lo = -((center_size / 2) as i64);
    let hi = lo + center_size as i64;
    let mut mask = vec![false; h * w];
    for fy in lo..hi {
        for fx in lo..hi {
            mask[freq_index(fy, h) * w + freq_index(fx, w)] = true;
        }
    }
    Ok(mask)
}

/// Fourier operator keeping the same centered block in every frame.
pub fn center_kspace_op(frame_shape: (usize, usize), frames: usize, center_size: usize) -> Result<MeasurementOp> {
    let mask = center_mask(frame_shape, center_size)?;
    MeasurementOp::fourier_mask(frame_shape, vec![mask; frames])
}

/// Per-frame random masks: the centered block plus extra samples drawn
/// without replacement with density proportional to `1 / (1 + |f|)`.
pub fn variable_density_masks(
    frame_shape: (usize, usize),
    frames: usize,
    center_size: usize,
    samples_per_frame: usize,
    seed: u64,
) -> Result<Vec<FrameMask>> {
    let (h, w) = frame_shape;
    let base = center_mask(frame_shape, center_size)?;
    let fixed = base.iter().filter(|&&m| m).count();
    if samples_per_frame < fixed || samples_per_frame > h * w {
        return Err(invalid(format!("samples per frame must lie in {fixed}..={}", h * w)));
    }
    let free: Vec<usize> = (0..h * w).filter(|&i| !base[i]).collect();
    let weights: Vec<f64> = free
        .iter()
        .map(|&i| {
            let fy = signed_freq(i / w, h) as f64;
            let fx = signed_freq(i % w, w) as f64;
            1.0 / (1.0 + fy.hypot(fx))
        })
        .collect();
    let extra = samples_per_frame - fixed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames)
        .map(|_| {
            let mut mask = base.clone();
            let picks = rand::seq::index::sample_weighted(&mut rng, free.len(), |i| weights[i], extra)
                .map_err(|e| invalid(format!("mask sampling failed: {e}")))?;
            for p in picks.iter() {
                mask[free[p]] = true;
            }
            Ok(mask)
        })
        .collect()
}

/// Real inner product of measurement vectors.
pub fn measurement_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

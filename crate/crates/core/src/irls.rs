//! Kernel nuclear-norm recovery by iteratively reweighted least squares.
//!
//! Each outer iteration forms `Q = (K(X) + gamma I)^{-1/2}` from the Gram
//! matrix, linearizes `trace(K(X) Q)` into the graph Laplacian penalty
//! `trace(X L X^T)`, and solves the resulting quadratic problem. Feature
//! vectors are never formed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{KernelSpec, PointCloud};
use crate::kernel::{gram_of_columns, kernel_gradient, median_pairwise_distance, GramMatrix};
use crate::linalg::{conjugate_gradient, spectral_apply, sym_eigen_desc};
use crate::operators::MeasurementOp;

/// Solver settings. Every field has a default so partial JSON configs work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrlsConfig {
    /// Regularization weight for single-stage recovery.
    pub lambda: f64,
    pub kernel: KernelSpec,
    /// When set, the kernel width is this multiple of the median pairwise
    /// distance of the initial iterate.
    pub auto_sigma: Option<f64>,
    /// Initial `gamma`; defaults to `0.01 * lambda_max(K(X0))`.
    pub gamma0: Option<f64>,
    pub gamma_decay: f64,
    /// Floor for `gamma`; defaults to `1e-8 * lambda_max(K(X0))`.
    pub gamma_min: Option<f64>,
    pub outer_iters: usize,
    /// Early exit once `|X_new - X| / |X|` drops below this.
    pub rel_change_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Step halvings allowed when a subproblem solution raises the surrogate.
    pub max_backtracks: usize,
    pub lambda_stage1: f64,
    pub lambda_stage2: f64,
    pub seed: u64,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            lambda: 0.02,
            kernel: KernelSpec::periodized_gaussian(0.15),
            auto_sigma: None,
            gamma0: None,
            gamma_decay: 2.0,
            gamma_min: None,
            outer_iters: 30,
            rel_change_tol: 1e-6,
            cg_tol: 1e-8,
            cg_max_iters: 2000,
            max_backtracks: 30,
            lambda_stage1: 1e-2,
            lambda_stage2: 1e-3,
            seed: 0,
        }
    }
}

impl IrlsConfig {
    /// Settings for image-series recovery: plain Gaussian kernel with width
    /// `0.5 * median distance`.
    pub fn image_series() -> Self {
        Self {
            kernel: KernelSpec::gaussian(1.0),
            auto_sigma: Some(0.5),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be non-negative, got {v}")))
            }
        };
        nonneg("lambda", self.lambda)?;
        nonneg("lambda_stage1", self.lambda_stage1)?;
        nonneg("lambda_stage2", self.lambda_stage2)?;
        self.kernel.validate()?;
        if let Some(s) = self.auto_sigma {
            positive("auto_sigma", s)?;
        }
        if let Some(g) = self.gamma0 {
            positive("gamma0", g)?;
        }
        if let Some(g) = self.gamma_min {
            positive("gamma_min", g)?;
        }
        if !(self.gamma_decay.is_finite() && self.gamma_decay > 1.0) {
            return Err(invalid("gamma_decay must exceed 1"));
        }
        if self.outer_iters == 0 {
            return Err(invalid("outer_iters must be at least 1"));
        }
        nonneg("rel_change_tol", self.rel_change_tol)?;
        positive("cg_tol", self.cg_tol)?;
        if self.cg_max_iters == 0 {
            return Err(invalid("cg_max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `|A(X) - b|^2` after the update.
    pub data_term: f64,
    /// `trace(K(X) Q)` after the update, `Q` fixed at this iteration's value.
    pub surrogate: f64,
    /// Surrogate objective `data + lambda * trace(K Q)` before the update.
    pub objective_before: f64,
    /// Same objective after the update.
    pub objective_after: f64,
    /// `sum_i (s_i + gamma)^{1/2}` over Gram eigenvalues after the update.
    pub nuclear_estimate: f64,
    pub gamma: f64,
    pub backtracks: usize,
    pub cg_iterations: usize,
    pub cg_converged: bool,
    pub laplacian_clipped: bool,
    pub rel_change: f64,
}

/// Iterate, reweighting matrices and history of a recovery run.
#[derive(Debug, Clone)]
pub struct IrlsState {
    pub x: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub history: Vec<IterationRecord>,
}

impl IrlsState {
    /// True when some subproblem solve stopped before reaching `cg_tol`.
    pub fn convergence_warning(&self) -> bool {
        self.history.iter().any(|r| !r.cg_converged)
    }

    /// Final iterate as a torus point cloud (coordinates wrapped).
    pub fn cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.x.clone())
    }
}

fn gram_eigen(g: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (mut s, u) = sym_eigen_desc(g)?;
    for v in &mut s {
        *v = v.max(0.0);
    }
    Ok((s, u))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("gamma must be positive, got {gamma}")))
    }
}

/// `(G + gamma I)^{-1/2}` with negative eigenvalues of `G` clipped to zero.
pub fn q_update(gram: &GramMatrix, gamma: f64) -> Result<DMatrix<f64>> {
    check_gamma(gamma)?;
    let (s, u) = gram_eigen(gram.values())?;
    Ok(spectral_apply(&s, &u, |v| (v + gamma).powf(-0.5)))
}

/// `sum_i (s_i + gamma)^{1/2}` over the clipped eigenvalues of `G`.
pub fn nuclear_norm_estimate(gram: &GramMatrix, gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(invalid(format!("gamma must be non-negative, got {gamma}")));
    }
    let (s, _) = gram_eigen(gram.values())?;
    Ok(s.iter().map(|v| (v + gamma).sqrt()).sum())
}

fn kernel_sigma(spec: &KernelSpec) -> Result<f64> {
    match spec {
        KernelSpec::Dirichlet { .. } => Err(Error::Unsupported("Laplacian weights need a Gaussian kernel".into())),
        KernelSpec::PeriodizedGaussian { sigma } | KernelSpec::Gaussian { sigma } => Ok(*sigma),
    }
}

/// Weights and Laplacian from a Gram matrix and reweighting matrix.
/// Returns `(W, L, clipped)`; `clipped` reports a PSD repair of `L`.
fn laplacian_from(k: &DMatrix<f64>, q: &DMatrix<f64>, sigma: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, bool)> {
    let n_pts = k.nrows();
    let qs = (q + q.transpose()) * 0.5;
    let s2 = sigma * sigma;
    // f'(t)/t = -f(t)/sigma^2 for a Gaussian profile
    let w = DMatrix::from_fn(
        n_pts,
        n_pts,
        |i, j| if i == j { 0.0 } else { -k[(i, j)] * qs[(i, j)] / s2 },
    );
    let mut l = -&w;
    for i in 0..n_pts {
        l[(i, i)] = w.row(i).sum();
    }
    let scale = l.amax();
    let mut clipped = false;
    if scale > 0.0 {
        let (vals, vecs) = sym_eigen_desc(&l)?;
        if vals.last().is_some_and(|&m| m < -1e-9 * scale) {
            clipped = true;
            l = spectral_apply(&vals, &vecs, |v| v.max(0.0));
            for i in 0..n_pts {
                let off: f64 = (0..n_pts).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
                l[(i, i)] = -off;
            }
        }
    }
    Ok((w, l, clipped))
}

/// Graph weights `W_ij = f'(d_ij)/d_ij * Q_ij` (zero diagonal) and
/// Laplacian `L = D - W` for a Gaussian kernel.
pub fn build_laplacian(x: &DMatrix<f64>, q: &DMatrix<f64>, spec: &KernelSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sigma = kernel_sigma(spec)?;
    if q.shape() != (x.ncols(), x.ncols()) {
        return Err(invalid("Q must be N x N"));
    }
    let k = gram_of_columns(x, spec)?;
    let (w, l, _) = laplacian_from(&k, q, sigma)?;
    Ok((w, l))
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `trace(K(X) Q)` for symmetric `Q`.
pub fn surrogate_value(x: &DMatrix<f64>, q: &DMatrix<f64>, spec: &KernelSpec) -> Result<f64> {
    Ok(trace_product(&gram_of_columns(x, spec)?, q))
}

/// Analytic gradient of `trace(K(X) Q)` with respect to every coordinate.
pub fn surrogate_gradient(x: &DMatrix<f64>, q: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let (n, n_pts) = x.shape();
    if q.shape() != (n_pts, n_pts) {
        return Err(invalid("Q must be N x N"));
    }
    let mut grad = DMatrix::zeros(n, n_pts);
    let mut r = vec![0.0; n];
    for i in 0..n_pts {
        for j in 0..n_pts {
            if i == j || q[(i, j)] == 0.0 {
                continue;
            }
            for d in 0..n {
                r[d] = x[(d, i)] - x[(d, j)];
            }
            let g = kernel_gradient(&r, spec)?;
            let qij = q[(i, j)] + q[(j, i)];
            for d in 0..n {
                grad[(d, i)] += qij * g[d];
            }
        }
    }
    Ok(grad)
}

/// Largest deviation between the analytic gradient and central differences
/// with the given step.
pub fn surrogate_gradient_check(x: &DMatrix<f64>, q: &DMatrix<f64>, spec: &KernelSpec, step: f64) -> Result<f64> {
    let analytic = surrogate_gradient(x, q, spec)?;
    let mut worst = 0.0_f64;
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let plus = surrogate_value(&probe, q, spec)?;
        probe[idx] = orig - step;
        let minus = surrogate_value(&probe, q, spec)?;
        probe[idx] = orig;
        worst = worst.max(((plus - minus) / (2.0 * step) - analytic[idx]).abs());
    }
    Ok(worst)
}

/// Result of one quadratic subproblem solve.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: DMatrix<f64>,
    pub cg_iterations: usize,
    pub converged: bool,
}

fn solve_with_adjoint(
    op: &MeasurementOp,
    atb: &DMatrix<f64>,
    l: &DMatrix<f64>,
    lambda: f64,
    warm: &DMatrix<f64>,
    cg_tol: f64,
    cg_max_iters: usize,
) -> Result<SubproblemSolution> {
    let n_pts = atb.ncols();
    if l.shape() != (n_pts, n_pts) {
        return Err(invalid("Laplacian must be N x N"));
    }
    if matches!(op.kind(), crate::operators::OpKind::Identity) {
        let m = DMatrix::identity(n_pts, n_pts) + l * lambda;
        let rhs = atb.transpose();
        let sol = match m.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => m
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NumericalFailure("I + lambda L is singular".into()))?,
        };
        return Ok(SubproblemSolution {
            x: sol.transpose(),
            cg_iterations: 0,
            converged: true,
        });
    }
    let mut failure = None;
    let out = conjugate_gradient(
        |y| match op.normal(y) {
            Ok(ny) => ny + (y * l) * lambda,
            Err(e) => {
                failure.get_or_insert(e);
                DMatrix::zeros(y.nrows(), y.ncols())
            }
        },
        atb,
        warm,
        cg_tol,
        cg_max_iters,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SubproblemSolution {
        x: out.x,
        cg_iterations: out.iterations,
        converged: out.converged,
    })
}

/// Minimize `|A(X) - b|^2 + lambda trace(X L X^T)`. The identity operator is
/// solved in closed form, others by conjugate gradient from `warm`.
pub fn solve_subproblem(
    op: &MeasurementOp,
    b: &[Complex64],
    l: &DMatrix<f64>,
    lambda: f64,
    warm: &DMatrix<f64>,
    cfg: &IrlsConfig,
) -> Result<SubproblemSolution> {
    let atb = op.adjoint(b)?;
    if warm.shape() != atb.shape() {
        return Err(invalid("warm start shape does not match the operator"));
    }
    solve_with_adjoint(op, &atb, l, lambda, warm, cfg.cg_tol, cfg.cg_max_iters)
}

fn data_term(op: &MeasurementOp, x: &DMatrix<f64>, b: &[Complex64]) -> Result<f64> {
    Ok(op.forward(x)?.iter().zip(b).map(|(a, y)| (a - y).norm_sqr()).sum())
}

/// Kernel with the width resolved against `x0` when `auto_sigma` is set.
pub fn resolve_kernel(cfg: &IrlsConfig, x0: &DMatrix<f64>) -> Result<KernelSpec> {
    let Some(mult) = cfg.auto_sigma else {
        return Ok(cfg.kernel.clone());
    };
    let sigma = mult * median_pairwise_distance(x0);
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::IllPosed(
            "automatic kernel width is zero: all initial points coincide".into(),
        ));
    }
    match &cfg.kernel {
        KernelSpec::Gaussian { .. } => Ok(KernelSpec::gaussian(sigma)),
        KernelSpec::PeriodizedGaussian { .. } => Ok(KernelSpec::periodized_gaussian(sigma)),
        KernelSpec::Dirichlet { .. } => Err(Error::Unsupported(
            "automatic width applies to Gaussian kernels only".into(),
        )),
    }
}

/// IRLS with regularization weight `lambda`, starting from `x0`.
pub fn irls_with_lambda(
    op: &MeasurementOp,
    b: &[Complex64],
    x0: &DMatrix<f64>,
    cfg: &IrlsConfig,
    lambda: f64,
) -> Result<IrlsState> {
    cfg.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    if op.out_dim() == 0 && lambda == 0.0 {
        return Err(Error::IllPosed("no measurements and no regularization".into()));
    }
    if x0.shape() != op.input_shape() {
        return Err(invalid("initial iterate shape does not match the operator"));
    }
    let spec = resolve_kernel(cfg, x0)?;
    let sigma = kernel_sigma(&spec)?;
    let atb = op.adjoint(b)?;

    let mut x = x0.clone();
    let mut k = gram_of_columns(&x, &spec)?;
    let (mut eig_s, mut eig_u) = gram_eigen(&k)?;
    let lmax = eig_s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut gamma = cfg.gamma0.unwrap_or(0.01 * lmax);
    let gamma_min = cfg.gamma_min.unwrap_or(1e-8 * lmax).min(gamma);
    let mut history = Vec::with_capacity(cfg.outer_iters);
    let mut data = data_term(op, &x, b)?;

    for iter in 0..cfg.outer_iters {
        let q = spectral_apply(&eig_s, &eig_u, |v| (v + gamma).powf(-0.5));
        let (_, l, clipped) = laplacian_from(&k, &q, sigma)?;
        let before = data + lambda * trace_product(&k, &q);
        let sol = solve_with_adjoint(op, &atb, &l, lambda, &x, cfg.cg_tol, cfg.cg_max_iters)?;

        let step = &sol.x - &x;
        let mut t = 1.0;
        let mut backtracks = 0;
        let (mut cand, mut cand_k, mut cand_data, mut after);
        loop {
            cand = &x + &step * t;
            cand_k = gram_of_columns(&cand, &spec)?;
            cand_data = data_term(op, &cand, b)?;
            after = cand_data + lambda * trace_product(&cand_k, &q);
            if after <= before || backtracks >= cfg.max_backtracks {
                break;
            }
            t *= 0.5;
            backtracks += 1;
        }
        if after > before {
            cand = x.clone();
            cand_k = k.clone();
            cand_data = data;
            after = before;
        }

        let x_norm = x.norm();
        let rel_change = (&cand - &x).norm() / if x_norm > 0.0 { x_norm } else { 1.0 };
        x = cand;
        k = cand_k;
        data = cand_data;
        (eig_s, eig_u) = gram_eigen(&k)?;
        history.push(IterationRecord {
            iter,
            data_term: data,
            surrogate: trace_product(&k, &q),
            objective_before: before,
            objective_after: after,
            nuclear_estimate: eig_s.iter().map(|v| (v + gamma).sqrt()).sum(),
            gamma,
            backtracks,
            cg_iterations: sol.cg_iterations,
            cg_converged: sol.converged,
            laplacian_clipped: clipped,
            rel_change,
        });
        gamma = (gamma / cfg.gamma_decay).max(gamma_min);
        if rel_change < cfg.rel_change_tol {
            break;
        }
    }

    let q = spectral_apply(&eig_s, &eig_u, |v| (v + gamma).powf(-0.5));
    let (w, laplacian, _) = laplacian_from(&k, &q, sigma)?;
    Ok(IrlsState {
        x,
        q,
        w,
        laplacian,
        gamma,
        kernel: spec,
        history,
    })
}

/// IRLS recovery with `cfg.lambda`.
pub fn irls_recover(op: &MeasurementOp, b: &[Complex64], x0: &DMatrix<f64>, cfg: &IrlsConfig) -> Result<IrlsState> {
    irls_with_lambda(op, b, x0, cfg, cfg.lambda)
}

/// Output of the two-stage protocol.
#[derive(Debug, Clone)]
pub struct TwoStepResult {
    pub x: DMatrix<f64>,
    /// IRLS run on the low-frequency data that produced the frozen Laplacian.
    pub stage1: IrlsState,
    pub cg_iterations: usize,
    pub cg_converged: bool,
}

/// Estimate the Laplacian by IRLS on low-frequency measurements
/// (`lambda_stage1`), freeze it, then solve once on the full data
/// (`lambda_stage2`) starting from the zero-filled adjoint.
pub fn two_step_recover(
    op_center: &MeasurementOp,
    b_center: &[Complex64],
    op_full: &MeasurementOp,
    b_full: &[Complex64],
    cfg: &IrlsConfig,
) -> Result<TwoStepResult> {
    if op_center.input_shape() != op_full.input_shape() {
        return Err(invalid("center and full operators disagree on the cloud shape"));
    }
    let x0 = op_center.adjoint(b_center)?;
    let stage1 = irls_with_lambda(op_center, b_center, &x0, cfg, cfg.lambda_stage1)?;
    let atb = op_full.adjoint(b_full)?;
    let sol = solve_with_adjoint(
        op_full,
        &atb,
        &stage1.laplacian,
        cfg.lambda_stage2,
        &atb,
        cfg.cg_tol,
        cfg.cg_max_iters,
    )?;
    Ok(TwoStepResult {
        x: sol.x,
        stage1,
        cg_iterations: sol.cg_iterations,
        cg_converged: sol.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram(values: DMatrix<f64>) -> GramMatrix {
        GramMatrix::from_values(values, KernelSpec::gaussian(1.0)).unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, n_pts: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n_pts, |_, _| rng.random_range(-0.5..0.5))
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn q_of_identity_and_zero() {
        let q = q_update(&gram(DMatrix::identity(4, 4)), 3.0).unwrap();
        assert!((q - DMatrix::identity(4, 4) * 0.5).amax() < 1e-14);
        let q = q_update(&gram(DMatrix::zeros(3, 3)), 4.0).unwrap();
        assert!((q - DMatrix::identity(3, 3) * 0.5).amax() < 1e-14);
        assert!(q_update(&gram(DMatrix::zeros(3, 3)), 0.0).is_err());
    }

    #[test]
    fn q_squared_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let g = &a * a.transpose();
        let q = q_update(&gram(g.clone()), 0.3).unwrap();
        let prod = &q * &q * (g + DMatrix::identity(6, 6) * 0.3);
        assert!((prod - DMatrix::identity(6, 6)).amax() < 1e-8);
    }

    #[test]
    fn nuclear_estimates() {
        let g = gram(DMatrix::identity(5, 5));
        assert!((nuclear_norm_estimate(&g, 0.0).unwrap() - 5.0).abs() < 1e-12);
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0]);
        let g = gram(&v * v.transpose());
        assert!((nuclear_norm_estimate(&g, 0.0).unwrap() - 3.0).abs() < 1e-7);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_cloud(&mut rng, 2, 12);
        let q = random_sym(&mut rng, 12);
        let (w, l) = build_laplacian(&x, &q, &KernelSpec::periodized_gaussian(0.2)).unwrap();
        assert!(w.diagonal().iter().all(|&v| v == 0.0));
        assert!((&l - l.transpose()).amax() < 1e-14);
        let ones = DMatrix::from_element(12, 1, 1.0);
        assert!((&l * ones).amax() < 1e-12);
    }

    #[test]
    fn laplacian_with_negative_unit_offdiagonals_is_affinity_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_cloud(&mut rng, 2, 6);
        let spec = KernelSpec::gaussian(0.3);
        let q = DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { -1.0 });
        let (w, _) = build_laplacian(&x, &q, &spec).unwrap();
        let k = gram_of_columns(&x, &spec).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 0.0 } else { k[(i, j)] / 0.09 };
                assert!((w[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coincident_points_have_finite_weight() {
        let x = DMatrix::from_column_slice(2, 2, &[0.1, 0.1, 0.1, 0.1]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 1.0]);
        let spec = KernelSpec::periodized_gaussian(0.2);
        let (w, _) = build_laplacian(&x, &q, &spec).unwrap();
        let k0 = crate::kernel::kernel_eval(&[0.0, 0.0], &spec);
        assert!((w[(0, 1)] - k0 * 0.4 / 0.04).abs() < 1e-12);
        assert!(build_laplacian(
            &x,
            &q,
            &KernelSpec::dirichlet(crate::geometry::cube_support(2, 1).unwrap())
        )
        .is_err());
    }

    #[test]
    fn gradient_is_twice_x_times_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_cloud(&mut rng, 2, 10) * 0.5;
        let q = random_sym(&mut rng, 10);
        let spec = KernelSpec::gaussian(0.2);
        let grad = surrogate_gradient(&x, &q, &spec).unwrap();
        let k = gram_of_columns(&x, &spec).unwrap();
        let (_, l, clipped) = laplacian_from(&k, &q, 0.2).unwrap();
        if !clipped {
            assert!((grad - &x * l * 2.0).amax() < 1e-10);
        }
    }

    #[test]
    fn gradient_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_cloud(&mut rng, 2, 5);
        let spec = KernelSpec::periodized_gaussian(0.2);
        let g = surrogate_gradient(&x, &DMatrix::zeros(5, 5), &spec).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let single = random_cloud(&mut rng, 2, 1);
        let g = surrogate_gradient(&single, &DMatrix::from_element(1, 1, 2.0), &spec).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_lambda_identity_returns_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = random_cloud(&mut rng, 2, 7);
        let op = MeasurementOp::identity(2, 7);
        let y = op.forward(&b).unwrap();
        let l = random_sym(&mut rng, 7);
        let sol = solve_subproblem(&op, &y, &l, 0.0, &DMatrix::zeros(2, 7), &IrlsConfig::default()).unwrap();
        assert!((sol.x - b).amax() < 1e-14);
    }

    #[test]
    fn large_lambda_averages_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = random_cloud(&mut rng, 2, 6);
        let op = MeasurementOp::identity(2, 6);
        let y = op.forward(&b).unwrap();
        let l = DMatrix::from_fn(6, 6, |i, j| if i == j { 5.0 } else { -1.0 });
        let sol = solve_subproblem(&op, &y, &l, 1e8, &b, &IrlsConfig::default()).unwrap();
        for d in 0..2 {
            let mean = b.row(d).mean();
            assert!(sol.x.row(d).iter().all(|v| (v - mean).abs() < 1e-6));
        }
    }

    #[test]
    fn ill_posed_without_data() {
        let op = MeasurementOp::entry_mask(2, 3, vec![false; 6]).unwrap();
        let cfg = IrlsConfig {
            lambda: 0.0,
            ..IrlsConfig::default()
        };
        let out = irls_recover(&op, &[], &DMatrix::zeros(2, 3), &cfg);
        assert!(matches!(out, Err(Error::IllPosed(_))));
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let cfg: IrlsConfig = serde_json::from_str(r#"{"lambda": 0.5}"#).unwrap();
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.outer_iters, 30);
        assert!(serde_json::from_str::<IrlsConfig>(r#"{"lambda_typo": 1}"#).is_err());
        assert!(IrlsConfig {
            gamma_decay: 1.0,
            ..IrlsConfig::default()
        }
        .validate()
        .is_err());
    }
}

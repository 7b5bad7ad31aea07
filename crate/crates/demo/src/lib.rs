//! Browser demo bindings.
//!
//! Every entry point regenerates its cloud from `(shape, level, n, noise,
//! seed)`, so the page only keeps slider values. Results are JSON strings.

use lskr::{
    add_noise, coefficient_correlation, cube_support, extract_levelset_2d, fit_surface, gram_matrix, irls_recover,
    sample_surface, IrlsConfig, KernelSpec, MeasurementOp, PointCloud, Polyline, ShapeSpec,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const GRID_RES: usize = 160;

#[derive(Serialize)]
struct FitView {
    points: Vec<[f64; 2]>,
    curves: Vec<Polyline>,
    truth: Vec<Polyline>,
    nullspace_dim: usize,
    correlation: Option<f64>,
}

#[derive(Serialize)]
struct DenoiseView {
    noisy: Vec<[f64; 2]>,
    denoised: Vec<[f64; 2]>,
    truth: Vec<Polyline>,
    objective: Vec<f64>,
}

#[derive(Serialize)]
struct SpectrumView {
    eigenvalues: Vec<f64>,
}

fn cloud_points(cloud: &PointCloud) -> Vec<[f64; 2]> {
    cloud.points().map(|p| [p[0], p[1]]).collect()
}

fn make_cloud(shape: &ShapeSpec, n: usize, noise: f64, seed: u64) -> lskr::Result<PointCloud> {
    let clean = sample_surface(shape, n, seed)?;
    if noise > 0.0 {
        add_noise(&clean, noise, seed.wrapping_add(1))
    } else {
        Ok(clean)
    }
}

fn truth_curves(shape: &ShapeSpec) -> lskr::Result<Vec<Polyline>> {
    lskr::surface::levelset_of_coeffs(&shape.coeffs()?, GRID_RES)
}

/// Sample a shape, fit the smallest-eigenvalue trigonometric polynomial on
/// `{-k..k}^2` and trace its zero set.
pub fn fit_json(shape: &str, level: f64, n: usize, noise: f64, seed: u64, k: usize) -> lskr::Result<String> {
    let shape = ShapeSpec::from_name(shape, level)?;
    let cloud = make_cloud(&shape, n, noise, seed)?;
    let support = cube_support(2, k)?;
    let model = fit_surface(&cloud, &support, None, lskr::surface::DEFAULT_FIT_TOL)?;
    let truth = shape.coeffs()?;
    let correlation = if truth.support().len() <= support.len() {
        Some(coefficient_correlation(model.coeffs(), &truth.embed(&support)?)?)
    } else {
        None
    };
    let view = FitView {
        points: cloud_points(&cloud),
        curves: extract_levelset_2d(&model, GRID_RES)?,
        truth: truth_curves(&shape)?,
        nullspace_dim: model.nullspace_dim(),
        correlation,
    };
    Ok(serde_json::to_string(&view)?)
}

/// Run the kernel denoiser on a noisy sample of a shape.
#[allow(clippy::too_many_arguments)]
pub fn denoise_json(
    shape: &str,
    level: f64,
    n: usize,
    noise: f64,
    seed: u64,
    lambda: f64,
    sigma: f64,
    iters: usize,
) -> lskr::Result<String> {
    let shape = ShapeSpec::from_name(shape, level)?;
    let cloud = make_cloud(&shape, n, noise, seed)?;
    let cfg = IrlsConfig {
        lambda,
        kernel: KernelSpec::periodized_gaussian(sigma),
        outer_iters: iters,
        ..IrlsConfig::default()
    };
    let op = MeasurementOp::identity(2, cloud.len());
    let b = op.forward(cloud.matrix())?;
    let state = irls_recover(&op, &b, cloud.matrix(), &cfg)?;
    let view = DenoiseView {
        noisy: cloud_points(&cloud),
        denoised: cloud_points(&state.cloud()?),
        truth: truth_curves(&shape)?,
        objective: state.history.iter().map(|r| r.objective_after).collect(),
    };
    Ok(serde_json::to_string(&view)?)
}

/// Descending Gram eigenvalues of a sampled shape. `kernel` is `dirichlet`
/// (uses `k`) or `gaussian` (periodized, uses `sigma`).
#[allow(clippy::too_many_arguments)]
pub fn spectrum_json(
    shape: &str,
    level: f64,
    n: usize,
    noise: f64,
    seed: u64,
    kernel: &str,
    k: usize,
    sigma: f64,
) -> lskr::Result<String> {
    let shape = ShapeSpec::from_name(shape, level)?;
    let cloud = make_cloud(&shape, n, noise, seed)?;
    let spec = match kernel {
        "dirichlet" => KernelSpec::dirichlet(cube_support(2, k)?),
        "gaussian" => KernelSpec::periodized_gaussian(sigma),
        other => return Err(lskr::Error::InvalidInput(format!("unknown kernel '{other}'"))),
    };
    let view = SpectrumView {
        eigenvalues: gram_matrix(&cloud, &spec)?.eigenvalues()?,
    };
    Ok(serde_json::to_string(&view)?)
}

fn js(r: lskr::Result<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn fit(shape: &str, level: f64, n: usize, noise: f64, seed: u32, k: usize) -> Result<String, JsError> {
    js(fit_json(shape, level, n, noise, seed.into(), k))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn denoise(
    shape: &str,
    level: f64,
    n: usize,
    noise: f64,
    seed: u32,
    lambda: f64,
    sigma: f64,
    iters: usize,
) -> Result<String, JsError> {
    js(denoise_json(shape, level, n, noise, seed.into(), lambda, sigma, iters))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn spectrum(
    shape: &str,
    level: f64,
    n: usize,
    noise: f64,
    seed: u32,
    kernel: &str,
    k: usize,
    sigma: f64,
) -> Result<String, JsError> {
    js(spectrum_json(shape, level, n, noise, seed.into(), kernel, k, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn fit_view_has_curves() {
        let v = parse(fit_json("cos-curve", 1.0, 50, 0.0, 1, 1).unwrap());
        assert_eq!(v["points"].as_array().unwrap().len(), 50);
        assert_eq!(v["nullspace_dim"], 1);
        assert!(!v["curves"].as_array().unwrap().is_empty());
        assert!(v["correlation"].as_f64().unwrap() > 0.999);
    }

    #[test]
    fn denoise_view_keeps_point_count() {
        let v = parse(denoise_json("cos-curve", 1.0, 40, 0.03, 2, 0.02, 0.15, 3).unwrap());
        assert_eq!(v["denoised"].as_array().unwrap().len(), 40);
        assert!(v["objective"].as_array().unwrap().len() <= 3);
    }

    #[test]
    fn spectrum_rejects_unknown_kernel() {
        assert!(spectrum_json("lemniscate", 1.0, 30, 0.0, 3, "cauchy", 2, 0.1).is_err());
        let v = parse(spectrum_json("lemniscate", 1.0, 30, 0.0, 3, "dirichlet", 2, 0.1).unwrap());
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 30);
    }
}

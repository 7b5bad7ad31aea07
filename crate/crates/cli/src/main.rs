use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use lskr::io;
use lskr::irls::resolve_kernel;
use lskr::kernel::gram_of_columns;
use lskr::metrics::{mean, rmse, DEFAULT_GRID_RES};
use lskr::operators::{center_mask, MeasurementOp};
use lskr::{
    add_noise, coefficient_correlation, cube_support, curve_distance, extract_levelset_2d, fit_surface, gram_matrix,
    irls_recover, kernel_rank_profile, make_dynamic_series, relative_error, sample_surface, two_step_recover,
    variable_density_masks, DynSeriesSpec, EvalReport, FourierCoeffs, IrlsConfig, KernelSpec, PointCloud, ShapeSpec,
};

mod config;

#[derive(Parser)]
#[command(
    name = "lskr",
    version,
    about = "Point-cloud fitting, denoising and recovery on bandlimited level sets"
)]
struct Cli {
    /// Treat solver convergence warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a shape or render a dynamic image series.
    Gen(GenArgs),
    /// Fit a bandlimited potential to a 2-D cloud.
    Fit(FitArgs),
    /// Denoise a 2-D cloud by kernel nuclear-norm IRLS.
    Denoise(DenoiseArgs),
    /// Recover an undersampled image series.
    Recover(RecoverArgs),
    /// Gram-matrix eigenvalue profile of a cloud.
    Spectrum(SpectrumArgs),
}

#[derive(Args, Serialize, Deserialize)]
struct GenArgs {
    /// cos-curve, two-circle-union or lemniscate.
    #[arg(long, conflicts_with = "series")]
    shape: Option<String>,
    /// Level of the cos-curve shape.
    #[arg(long, default_value_t = 1.0)]
    level: f64,
    /// Number of points.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Gaussian noise standard deviation added after sampling.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Render the dynamic series instead of a shape.
    #[arg(long)]
    series: bool,
    #[arg(long, default_value_t = 64)]
    frames: usize,
    /// Frame side length in pixels.
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "lskr-out")]
    out: PathBuf,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct FitArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Half width K of the cube support {-K..K}^2.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Gaussian feature-weight width; omit for unweighted maps.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = lskr::surface::DEFAULT_FIT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_RES)]
    grid_res: usize,
    /// Reference coefficients JSON for a correlation score.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "lskr-out")]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct DenoiseArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    /// Periodized Gaussian kernel width.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Reference coefficients JSON for curve distances.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GRID_RES)]
    grid_res: usize,
    #[arg(long, default_value = "lskr-out")]
    out: PathBuf,
    /// Solver settings, partial objects allowed.
    #[arg(skip)]
    irls: Option<Value>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct RecoverArgs {
    /// Ground-truth series CSV (one row per frame).
    #[arg(long)]
    series: PathBuf,
    /// Frame side length; frames are square.
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// k-space samples per frame.
    #[arg(long, default_value_t = 128)]
    samples: usize,
    /// Side of the always-sampled low-frequency block.
    #[arg(long, default_value_t = 9)]
    center: usize,
    /// Estimate the Laplacian on the center block, then solve once.
    #[arg(long)]
    two_step: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "lskr-out")]
    out: PathBuf,
    #[arg(skip)]
    irls: Option<Value>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct SpectrumArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// dirichlet, periodized-gaussian or gaussian.
    #[arg(long, default_value = "dirichlet")]
    kernel: String,
    /// Dirichlet half width.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.15)]
    sigma: f64,
    #[arg(long, default_value = "lskr-out")]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Spectrum(a) => cmd_spectrum(a),
    };
    match result {
        Ok(warnings) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            if cli.strict && !warnings.is_empty() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("LSKR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .with_context(|| format!("LSKR_THREADS=`{v}` is not a count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

struct OutDir(PathBuf);

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.0.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<()> {
        self.write(name, &(serde_json::to_string_pretty(v)? + "\n"))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    io::cloud_from_csv(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_coeffs(path: &Path) -> Result<FourierCoeffs> {
    io::coeffs_from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_gen(args: GenArgs) -> Result<Vec<String>> {
    let args = config::apply_file(&args, args.config.as_deref())?;
    let out = OutDir::create(&args.out)?;
    out.write_json("config.json", &args)?;
    if args.series {
        let spec = DynSeriesSpec {
            frame_shape: (args.size, args.size),
            num_frames: args.frames,
            ..DynSeriesSpec::default()
        };
        let m = make_dynamic_series(&spec)?;
        out.write("series.csv", &io::cloud_to_csv(&m))?;
        out.write_json("series.json", &spec)?;
        return Ok(Vec::new());
    }
    let Some(name) = args.shape.as_deref() else {
        bail!("gen needs --shape <name> or --series");
    };
    let shape = ShapeSpec::from_name(name, args.level)?;
    let clean = sample_surface(&shape, args.n, args.seed)?;
    let noisy = add_noise(&clean, args.noise, args.seed.wrapping_add(1))?;
    out.write("clean.csv", &io::cloud_to_csv(clean.matrix()))?;
    out.write("cloud.csv", &io::cloud_to_csv(noisy.matrix()))?;
    out.write_json("shape.json", &shape)?;
    out.write("coeffs.json", &io::coeffs_to_json(&shape.coeffs()?)?)?;
    Ok(Vec::new())
}

fn cmd_fit(args: FitArgs) -> Result<Vec<String>> {
    let args = config::apply_file(&args, args.config.as_deref())?;
    let cloud = PointCloud::new(read_matrix(&args.cloud)?)?;
    let out = OutDir::create(&args.out)?;
    out.write_json("config.json", &args)?;
    let start = Instant::now();
    let support = cube_support(cloud.dim(), args.k)?;
    let model = fit_surface(&cloud, &support, args.sigma, args.tol)?;
    out.write("coeffs.json", &io::coeffs_to_json(model.coeffs())?)?;
    out.write("eigenvalues.csv", &io::eigenvalues_to_csv(model.eigenvalues()))?;
    let mut warnings = Vec::new();
    if cloud.dim() == 2 {
        out.write(
            "levelset.csv",
            &io::polylines_to_csv(&extract_levelset_2d(&model, args.grid_res)?),
        )?;
    } else {
        warnings.push("level-set curves are only traced for 2-D clouds".to_string());
    }
    let correlation = match &args.truth {
        Some(p) => {
            let truth = read_coeffs(p)?;
            let truth = if truth.support().len() <= support.len() {
                truth.embed(&support)?
            } else {
                truth
            };
            let fitted = if model.is_weighted() {
                model.effective_coeffs()
            } else {
                model.coeffs().clone()
            };
            Some(coefficient_correlation(&fitted, &truth)?)
        }
        None => None,
    };
    out.write_json(
        "report.json",
        &json!({
            "nullspace_dim": model.nullspace_dim(),
            "support_size": support.len(),
            "correlation": correlation,
            "runtime_ms": start.elapsed().as_millis() as u64,
            "warnings": warnings,
        }),
    )?;
    Ok(warnings)
}

fn cmd_denoise(args: DenoiseArgs) -> Result<Vec<String>> {
    let args = config::apply_file(&args, args.config.as_deref())?;
    let cloud = PointCloud::new(read_matrix(&args.cloud)?)?;
    let mut cfg: IrlsConfig = config::overlay(&IrlsConfig::default(), args.irls.as_ref())?;
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(s) = args.sigma {
        cfg.kernel = KernelSpec::periodized_gaussian(s);
    }
    if let Some(i) = args.iters {
        cfg.outer_iters = i;
    }
    let out = OutDir::create(&args.out)?;
    out.write_json("config.json", &json!({ "args": &args, "irls": &cfg }))?;

    let start = Instant::now();
    let (n, n_pts) = (cloud.dim(), cloud.len());
    let op = MeasurementOp::identity(n, n_pts);
    let b = op.forward(cloud.matrix())?;
    let state = irls_recover(&op, &b, cloud.matrix(), &cfg)?;
    let result = state.cloud()?;
    out.write("denoised.csv", &io::cloud_to_csv(result.matrix()))?;
    out.write("history.csv", &io::history_to_csv(&state.history))?;

    let mut report = EvalReport {
        rmse: Some(rmse(result.matrix(), cloud.matrix())?),
        outer_iters: state.history.len(),
        eig_profile: gram_matrix(&result, &state.kernel)?.eigenvalues()?,
        ..EvalReport::default()
    };
    if let Some(p) = &args.truth {
        let truth = read_coeffs(p)?;
        report.input_mean_curve_dist = Some(mean(&curve_distance(&cloud, &truth, args.grid_res)?));
        report.mean_curve_dist = Some(mean(&curve_distance(&result, &truth, args.grid_res)?));
    }
    if state.convergence_warning() {
        report
            .warnings
            .push("a subproblem solve stopped before reaching cg_tol".into());
    }
    report.runtime_ms = start.elapsed().as_millis() as u64;
    out.write_json("report.json", &report)?;
    Ok(report.warnings)
}

fn cmd_recover(args: RecoverArgs) -> Result<Vec<String>> {
    let args = config::apply_file(&args, args.config.as_deref())?;
    let truth = read_matrix(&args.series)?;
    let frame = (args.size, args.size);
    if truth.nrows() != args.size * args.size {
        bail!(
            "series rows have {} pixels, expected {} for --size {}",
            truth.nrows(),
            args.size * args.size,
            args.size
        );
    }
    let mut cfg: IrlsConfig = config::overlay(&IrlsConfig::image_series(), args.irls.as_ref())?;
    if let Some(l) = args.lambda {
        if args.two_step {
            cfg.lambda_stage2 = l;
        } else {
            cfg.lambda = l;
        }
    }
    if let Some(i) = args.iters {
        cfg.outer_iters = i;
    }
    let out = OutDir::create(&args.out)?;
    out.write_json("config.json", &json!({ "args": &args, "irls": &cfg }))?;

    let start = Instant::now();
    let frames = truth.ncols();
    let masks = variable_density_masks(frame, frames, args.center, args.samples, args.seed)?;
    out.write("masks.csv", &io::masks_to_csv(frame, &masks))?;
    let op = MeasurementOp::fourier_mask(frame, masks)?;
    let b = op.forward(&truth)?;
    out.write("measurements.csv", &io::measurements_to_csv(&b))?;
    let zero_filled = op.adjoint(&b)?;
    out.write("zero_filled.csv", &io::cloud_to_csv(&zero_filled))?;

    let mut warnings = Vec::new();
    let (x, history, kernel) = if args.two_step {
        let op_c = MeasurementOp::fourier_mask(frame, vec![center_mask(frame, args.center)?; frames])?;
        let b_c = op_c.forward(&truth)?;
        let res = two_step_recover(&op_c, &b_c, &op, &b, &cfg)?;
        if res.stage1.convergence_warning() || !res.cg_converged {
            warnings.push("a subproblem solve stopped before reaching cg_tol".to_string());
        }
        (res.x, res.stage1.history, res.stage1.kernel)
    } else {
        let kernel = resolve_kernel(&cfg, &zero_filled)?;
        let state = irls_recover(&op, &b, &zero_filled, &cfg)?;
        if state.convergence_warning() {
            warnings.push("a subproblem solve stopped before reaching cg_tol".to_string());
        }
        (state.x, state.history, kernel)
    };
    out.write("recovered.csv", &io::cloud_to_csv(&x))?;
    out.write("history.csv", &io::history_to_csv(&history))?;

    let report = EvalReport {
        rmse: Some(rmse(&x, &truth)?),
        rel_error: Some(relative_error(&x, &truth)?),
        baseline_rel_error: Some(relative_error(&zero_filled, &truth)?),
        eig_profile: lskr::GramMatrix::from_values(gram_of_columns(&x, &kernel)?, kernel.clone())?.eigenvalues()?,
        runtime_ms: start.elapsed().as_millis() as u64,
        outer_iters: history.len(),
        warnings,
        ..EvalReport::default()
    };
    out.write_json("report.json", &report)?;
    Ok(report.warnings)
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<Vec<String>> {
    let args = config::apply_file(&args, args.config.as_deref())?;
    let cloud = PointCloud::new(read_matrix(&args.cloud)?)?;
    let spec = match args.kernel.as_str() {
        "dirichlet" => KernelSpec::dirichlet(cube_support(cloud.dim(), args.k)?),
        "periodized-gaussian" | "periodized_gaussian" => KernelSpec::periodized_gaussian(args.sigma),
        "gaussian" => KernelSpec::gaussian(args.sigma),
        other => bail!("unknown kernel `{other}` (expected dirichlet, periodized-gaussian or gaussian)"),
    };
    let out = OutDir::create(&args.out)?;
    out.write_json("config.json", &args)?;
    let profile = kernel_rank_profile(&gram_matrix(&cloud, &spec)?, &[1e-4, 1e-8, 1e-12])?;
    out.write("eigenvalues.csv", &io::eigenvalues_to_csv(&profile.eigenvalues))?;
    out.write_json("report.json", &json!({ "points": cloud.len(), "profile": profile }))?;
    Ok(Vec::new())
}

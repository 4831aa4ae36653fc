//! `slvq`: quasi-stationary analysis of two-type stochastic Lotka-Volterra
//! systems from the command line.
//!
//! Subcommands: `validate`, `spectrum`, `simulate`, `yaglom`, `classify`,
//! `scan`, `diagnose`. Exit codes: 0 success, 1 configuration/validation
//! problems (the message names the violated condition), 2 runtime failures
//! (no convergence, blow-up, cross-check failure, I/O).

mod config;
mod output;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use output::RunWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use slvq_core::conditioning::{
    fleming_viot, histogram_tv, sample_from_density, ConditioningError, FvConfig,
};
use slvq_core::harness::{dirichlet_exit_times, DirichletBox, SlvBoundaryKernel};
use slvq_core::model::{
    hypothesis_diagnostics, validate_params, Axis, DiagnosticsConfig, KolmogorovModel, ModelError,
};
use slvq_core::regimes::{
    run_regime_pipeline, scan_phase_transition, PipelineConfig, RegimeError, ScanConfig,
};
use slvq_core::sde::{fit_killing_rate, SdeError, SurvivalCurve};
use slvq_core::spectral::{
    auto_axis_spec, conditioned_tv_trajectory, fit_log_decay, mollified_point, solve_on_grid,
    solve_qsd_1d, solve_qsd_2d, AxisSpec, EvolveOptions, Grid, ScalarPotential, SolveOptions,
    SpectralError, SpectralResult,
};

#[derive(Parser)]
#[command(
    name = "slvq",
    version,
    about = "QSD solver and simulator for two-type stochastic Lotka-Volterra systems"
)]
struct Cli {
    /// JSON config: either a full experiment document or the bare
    /// eight-coefficient parameter object.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (defaults to $SLVQ_OUT_DIR or ./slvq_out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Rayon thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate parameters and report the interaction regime.
    Validate,
    /// Eigensolve: killing rates and QSD density (1D or 2D).
    Spectrum {
        /// Swap in the analytic test harness (Brownian motion on (0, pi)^dim).
        #[arg(long)]
        harness: Option<String>,
        /// Harness dimension.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Solve the single-axis problem for this axis (1 or 2) instead of 2D.
        #[arg(long)]
        axis: Option<u8>,
        /// Re-solve on stretched domains and flag truncation sensitivity.
        #[arg(long)]
        check_truncation: bool,
    },
    /// Absorbed trajectories and the survival curve of a stopping time.
    Simulate {
        #[arg(long)]
        harness: Option<String>,
    },
    /// Fleming-Viot particle estimate of the Yaglom limit plus the evolved
    /// conditioned law.
    Yaglom {
        #[arg(long)]
        harness: Option<String>,
    },
    /// Full regime pipeline: rates, exit splits, classification, mixture QSD.
    Classify {
        /// Skip the Fleming-Viot cross-check.
        #[arg(long)]
        no_fv: bool,
    },
    /// Phase-transition scan of the symmetric cooperative family.
    Scan,
    /// Hypothesis diagnostics: growth exponents and the
    /// ultracontractivity series.
    Diagnose,
}

enum CliError {
    Config(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidGrid { .. } => CliError::Config(e.to_string()),
            SpectralError::Model(m) => CliError::Validation(m.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SdeError> for CliError {
    fn from(e: SdeError) -> Self {
        match e {
            SdeError::InvalidConfig { .. } | SdeError::InvalidStart { .. } => {
                CliError::Config(e.to_string())
            }
            SdeError::Model(m) => CliError::Validation(m.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ConditioningError> for CliError {
    fn from(e: ConditioningError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RegimeError> for CliError {
    fn from(e: RegimeError) -> Self {
        match e {
            RegimeError::Spectral(s) => s.into(),
            RegimeError::Conditioning(c) => c.into(),
            RegimeError::Sde(s) => s.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("a --config file is required".into()))?;
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read config: {e}")))?;
    let mut cfg = ExperimentConfig::parse(&bytes).map_err(CliError::Config)?;
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    Ok((cfg, bytes))
}

fn resolve_out_dir(cli: &Cli, cfg: &ExperimentConfig, command: &str) -> PathBuf {
    if let Some(dir) = &cli.out_dir {
        return dir.clone();
    }
    if let Some(dir) = &cfg.out_dir {
        return PathBuf::from(dir);
    }
    let base = std::env::var("SLVQ_OUT_DIR").unwrap_or_else(|_| "slvq_out".into());
    Path::new(&base).join(command)
}

fn writer_for(
    cli: &Cli,
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    command: &str,
) -> Result<RunWriter, CliError> {
    let dir = resolve_out_dir(cli, cfg, command);
    Ok(RunWriter::new(&dir, command, config_bytes, cfg.sim.seed)?)
}

fn model_from(cfg: &ExperimentConfig) -> Result<KolmogorovModel, CliError> {
    Ok(KolmogorovModel::new(validate_params(&cfg.params)?))
}

fn axis_spec_from(section: &config::GridSection, model: &KolmogorovModel) -> AxisSpec {
    let auto = auto_axis_spec(model, section.n);
    AxisSpec {
        eps_lo: section.eps_lo,
        l_hi: section.l_hi.unwrap_or(auto.l_hi),
        n: section.n,
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate => cmd_validate(cli),
        Command::Spectrum {
            harness,
            dim,
            axis,
            check_truncation,
        } => cmd_spectrum(cli, harness.as_deref(), *dim, *axis, *check_truncation),
        Command::Simulate { harness } => cmd_simulate(cli, harness.as_deref()),
        Command::Yaglom { harness } => cmd_yaglom(cli, harness.as_deref()),
        Command::Classify { no_fv } => cmd_classify(cli, *no_fv),
        Command::Scan => cmd_scan(cli),
        Command::Diagnose => cmd_diagnose(cli),
    }
}

#[derive(serde::Serialize)]
struct ValidationReport<'a> {
    params: &'a slvq_core::model::RawParams,
    regime: slvq_core::model::Regime,
    alpha: f64,
    c12_normalized: f64,
    c21_normalized: f64,
}

fn cmd_validate(cli: &Cli) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let params = validate_params(&cfg.params)?;
    let report = ValidationReport {
        params: &cfg.params,
        regime: params.regime(),
        alpha: params.alpha(),
        c12_normalized: params.c12(),
        c21_normalized: params.c21(),
    };
    println!(
        "valid: regime {:?}, alpha = {}",
        params.regime(),
        params.alpha()
    );
    let mut w = writer_for(cli, &cfg, &bytes, "validate")?;
    w.write_json("validation.json", &report)?;
    w.finish()?;
    Ok(())
}

fn ensure_harness_name(name: &str) -> Result<(), CliError> {
    if name == "dirichlet" {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "unknown harness '{name}' (available: dirichlet)"
        )))
    }
}

/// Emits a spectral result: JSON summary plus the node dump.
fn emit_spectral(
    w: &mut RunWriter,
    res: &SpectralResult,
    model: Option<&KolmogorovModel>,
) -> Result<(), CliError> {
    w.write_json("spectral_result.json", res)?;
    let grid = &res.grid;
    let dim = grid.dim();
    let mut header: Vec<&str> = if dim == 2 {
        vec!["x1", "x2", "psi1", "eta1", "nu1"]
    } else {
        vec!["x", "psi1", "eta1", "nu1"]
    };
    if model.is_some() {
        if dim == 2 {
            header.extend_from_slice(&["z1", "z2", "nu1_z"]);
        } else {
            header.extend_from_slice(&["z", "nu1_z"]);
        }
    }
    let rows = (0..grid.len()).map(|i| {
        let x = grid.coords(i);
        let mut row = if dim == 2 {
            vec![x[0], x[1]]
        } else {
            vec![x[0]]
        };
        row.push(res.psi1[i]);
        row.push(res.eta1[i]);
        row.push(res.qsd_density[i]);
        if let Some(m) = model {
            // density transported to population coordinates:
            // z = gamma x^2 / 4, dz = (gamma x / 2) dx
            let p = m.params();
            let g1 = p.gamma(Axis::One);
            if dim == 2 {
                let g2 = p.gamma(Axis::Two);
                row.push(g1 * x[0] * x[0] / 4.0);
                row.push(g2 * x[1] * x[1] / 4.0);
                row.push(res.qsd_density[i] * (2.0 / (g1 * x[0])) * (2.0 / (g2 * x[1])));
            } else {
                row.push(g1 * x[0] * x[0] / 4.0);
                row.push(res.qsd_density[i] * 2.0 / (g1 * x[0]));
            }
        }
        row
    });
    w.write_csv("qsd_nodes.csv", &header, rows)?;
    Ok(())
}

fn cmd_spectrum(
    cli: &Cli,
    harness: Option<&str>,
    dim: usize,
    axis: Option<u8>,
    check_truncation: bool,
) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let opts = SolveOptions {
        check_truncation,
        ..SolveOptions::default()
    };
    let mut w = writer_for(cli, &cfg, &bytes, "spectrum")?;
    let res = if let Some(name) = harness {
        ensure_harness_name(name)?;
        if !(dim == 1 || dim == 2) {
            return Err(CliError::Config(format!(
                "harness dim must be 1 or 2, got {dim}"
            )));
        }
        let field = DirichletBox::new(dim, std::f64::consts::PI);
        let spec = AxisSpec::new(0.0, std::f64::consts::PI, cfg.grid.n).map_err(CliError::from)?;
        let grid = if dim == 1 {
            Grid::new_1d(spec)
        } else {
            Grid::square(spec)
        };
        let res = solve_on_grid(&field, &grid, cfg.k, &opts)?;
        emit_spectral(&mut w, &res, None)?;
        res
    } else {
        let model = model_from(&cfg)?;
        match axis {
            Some(a) => {
                let axis = match a {
                    1 => Axis::One,
                    2 => Axis::Two,
                    _ => return Err(CliError::Config(format!("axis must be 1 or 2, got {a}"))),
                };
                let section = cfg.grid_1d.unwrap_or(cfg.grid);
                let grid = Grid::new_1d(axis_spec_from(&section, &model));
                let res = solve_qsd_1d(&model, axis, &grid, cfg.k, &opts)?;
                emit_spectral(&mut w, &res, Some(&model))?;
                res
            }
            None => {
                let grid = Grid::square(axis_spec_from(&cfg.grid, &model));
                let res = solve_qsd_2d(&model, &grid, cfg.k, &opts)?;
                emit_spectral(&mut w, &res, Some(&model))?;
                res
            }
        }
    };
    println!(
        "lambda = {:?}{}",
        res.lambda,
        res.truncation
            .map(|t| format!(
                " (truncation shift {:.2e}{})",
                t.rel_shift,
                if t.unstable { ", UNSTABLE" } else { "" }
            ))
            .unwrap_or_default()
    );
    w.finish()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct SurvivalSummary {
    stopping: slvq_core::sde::StoppingKind,
    n_paths: usize,
    fit_lambda: Option<f64>,
    fit_stderr: Option<f64>,
    fit_window: (f64, f64),
    fit_error: Option<String>,
    exit_axis1: usize,
    exit_axis2: usize,
}

fn cmd_simulate(cli: &Cli, harness: Option<&str>) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let sim = cfg.sim.to_sim_config();
    sim.validate().map_err(CliError::from)?;
    let mut w = writer_for(cli, &cfg, &bytes, "simulate")?;
    let t_grid: Vec<f64> = (0..200).map(|i| i as f64 * sim.t_max / 200.0).collect();
    let window = (0.05 * sim.t_max, 0.95 * sim.t_max);

    let (curve, exits) = if let Some(name) = harness {
        ensure_harness_name(name)?;
        let field = DirichletBox::new(1, std::f64::consts::PI);
        let exit_times = dirichlet_exit_times(&field, [std::f64::consts::FRAC_PI_2, 0.0], &sim);
        (SurvivalCurve::from_exit_times(&exit_times, &t_grid), (0, 0))
    } else {
        let model = model_from(&cfg)?;
        let stops = slvq_core::sde::batch_stops(&model, cfg.sim.x0, &sim)?;
        let exit_times: Vec<Option<f64>> = stops
            .iter()
            .map(|(s, _)| cfg.sim.stopping.pick(s))
            .collect();
        let a1 = stops
            .iter()
            .filter(|(_, a)| *a == Some(slvq_core::sde::ExitAxis::Axis1))
            .count();
        let a2 = stops
            .iter()
            .filter(|(_, a)| *a == Some(slvq_core::sde::ExitAxis::Axis2))
            .count();
        if cfg.record_paths > 0 {
            let n_rec = cfg.record_paths.min(sim.n_paths);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for p in 0..n_rec {
                let rec = slvq_core::sde::simulate_path(&model, cfg.sim.x0, &sim, p as u64)?;
                for (t, x) in rec.times.iter().zip(&rec.states) {
                    rows.push(vec![p as f64, *t, x[0], x[1]]);
                }
            }
            w.write_csv("paths.csv", &["path", "t", "x1", "x2"], rows.into_iter())?;
        }
        (
            SurvivalCurve::from_exit_times(&exit_times, &t_grid),
            (a1, a2),
        )
    };

    let fit = fit_killing_rate(&curve, window);
    let summary = match &fit {
        Ok((lambda, stderr)) => SurvivalSummary {
            stopping: cfg.sim.stopping,
            n_paths: curve.n_paths,
            fit_lambda: Some(*lambda),
            fit_stderr: Some(*stderr),
            fit_window: window,
            fit_error: None,
            exit_axis1: exits.0,
            exit_axis2: exits.1,
        },
        Err(e) => SurvivalSummary {
            stopping: cfg.sim.stopping,
            n_paths: curve.n_paths,
            fit_lambda: None,
            fit_stderr: None,
            fit_window: window,
            fit_error: Some(e.to_string()),
            exit_axis1: exits.0,
            exit_axis2: exits.1,
        },
    };
    w.write_csv(
        "survival.csv",
        &["t", "value", "stderr"],
        curve
            .times
            .iter()
            .zip(&curve.survival)
            .zip(&curve.stderr)
            .map(|((&t, &s), &e)| vec![t, s, e]),
    )?;
    w.write_json("survival_summary.json", &summary)?;
    if let Ok((lambda, stderr)) = fit {
        println!("fitted killing rate: {lambda} +- {stderr}");
    } else {
        println!("survival curve emitted; fit unavailable in the window");
    }
    w.finish()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct YaglomSummary {
    lambda1: f64,
    lambda2: Option<f64>,
    lambda_fv: f64,
    tv_fv_vs_spectral: f64,
    tv_decay_exponent: Option<f64>,
    spectral_gap: Option<f64>,
    n_particles: usize,
}

fn cmd_yaglom(cli: &Cli, harness: Option<&str>) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let mut w = writer_for(cli, &cfg, &bytes, "yaglom")?;
    let sim = cfg.sim.to_sim_config();

    // assemble the field + kernels for either the model or the harness
    let model = if harness.is_some() {
        None
    } else {
        Some(model_from(&cfg)?)
    };
    if let Some(name) = harness {
        ensure_harness_name(name)?;
    }

    let (solve_grid, hist_grid): (Grid, Grid) = match &model {
        Some(m) => {
            let spec = axis_spec_from(&cfg.grid, m);
            let hist = AxisSpec {
                eps_lo: spec.eps_lo,
                l_hi: spec.l_hi,
                n: cfg.fv.hist_n,
            };
            (Grid::square(spec), Grid::square(hist))
        }
        None => {
            let spec = AxisSpec::new(0.0, std::f64::consts::PI, cfg.grid.n)?;
            let hist = AxisSpec {
                eps_lo: 0.0,
                l_hi: std::f64::consts::PI,
                n: cfg.fv.hist_n,
            };
            (Grid::new_1d(spec), Grid::new_1d(hist))
        }
    };

    let opts = SolveOptions::default();
    let (res, res_hist) = match &model {
        Some(m) => (
            solve_qsd_2d(m, &solve_grid, cfg.k.max(1), &opts)?,
            solve_qsd_2d(m, &hist_grid, 1, &opts)?,
        ),
        None => {
            let field = DirichletBox::new(1, std::f64::consts::PI);
            (
                solve_on_grid(&field, &solve_grid, cfg.k.max(2), &opts)?,
                solve_on_grid(&field, &hist_grid, 1, &opts)?,
            )
        }
    };
    let lambda1 = res.lambda[0];

    let init = sample_from_density(
        &res.qsd_density,
        &solve_grid,
        cfg.fv.n_particles,
        sim.seed ^ 0x5c4e_11aa,
    );
    let fv_cfg = FvConfig {
        n_particles: cfg.fv.n_particles,
        dt: sim.dt,
        t_burn: cfg.fv.t_burn_over_lambda / lambda1,
        t_sample: cfg.fv.t_sample_over_lambda / lambda1,
        seed: sim.seed,
    };
    let fv = match &model {
        Some(m) => {
            let kernel = SlvBoundaryKernel::new(*m, &sim);
            fleming_viot(&kernel, &init, &fv_cfg, &hist_grid)?
        }
        None => {
            let kernel = DirichletBox::new(1, std::f64::consts::PI);
            fleming_viot(&kernel, &init, &fv_cfg, &hist_grid)?
        }
    };
    let tv_fv = histogram_tv(&fv.histogram, &res_hist.qsd_density, &hist_grid);

    // conditioned-law evolution from a mollified point at the density mode
    let mode = res
        .qsd_density
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let rho0 = mollified_point(
        &solve_grid,
        solve_grid.coords(mode),
        3.0 * solve_grid.axis(0).h(),
    );
    let gap = res.lambda.get(1).map(|l2| l2 - lambda1);
    let t_end = gap.map_or(8.0 / lambda1, |g| 14.0 / g);
    let evolve_opts = EvolveOptions {
        dt: (t_end / 4000.0).min(5e-3),
        record_every: 20,
    };
    let harness_field = DirichletBox::new(1, std::f64::consts::PI);
    let field: &dyn ScalarPotential = match &model {
        Some(m) => m,
        None => &harness_field,
    };
    let (times, tvs, masses) = conditioned_tv_trajectory(
        field,
        &solve_grid,
        &rho0,
        &res.qsd_density,
        t_end,
        &evolve_opts,
    )?;
    let tv_exponent = fit_log_decay(&times, &tvs, 1e-8, 1e-3).map(|(r, _)| r);

    let summary = YaglomSummary {
        lambda1,
        lambda2: res.lambda.get(1).copied(),
        lambda_fv: fv.lambda_fv,
        tv_fv_vs_spectral: tv_fv,
        tv_decay_exponent: tv_exponent,
        spectral_gap: gap,
        n_particles: cfg.fv.n_particles,
    };
    w.write_json("yaglom.json", &summary)?;
    let dim = hist_grid.dim();
    let header: Vec<&str> = if dim == 2 {
        vec!["x1", "x2", "mass"]
    } else {
        vec!["x", "mass"]
    };
    w.write_csv(
        "fv_histogram.csv",
        &header,
        (0..hist_grid.len()).map(|i| {
            let x = hist_grid.coords(i);
            let mut row = if dim == 2 {
                vec![x[0], x[1]]
            } else {
                vec![x[0]]
            };
            row.push(fv.histogram[i]);
            row
        }),
    )?;
    w.write_csv(
        "tv_trajectory.csv",
        &["t", "tv", "mass"],
        times
            .iter()
            .zip(&tvs)
            .zip(&masses)
            .map(|((&t, &tv), &m)| vec![t, tv, m]),
    )?;
    println!(
        "lambda1 = {lambda1}, lambda_fv = {} (TV to spectral QSD: {tv_fv:.4})",
        fv.lambda_fv
    );
    w.finish()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct MixtureSummary {
    classification: slvq_core::regimes::Classification,
    proof_weights: slvq_core::regimes::MixtureWeights,
    theorem_weights: slvq_core::regimes::MixtureWeights,
}

fn cmd_classify(cli: &Cli, no_fv: bool) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let model = model_from(&cfg)?;
    let mut w = writer_for(cli, &cfg, &bytes, "classify")?;
    let pipeline_cfg = PipelineConfig {
        n_2d: cfg.grid.n,
        n_1d: cfg.grid_1d.map_or(1200, |g| g.n),
        grid_2d: None,
        grid_1d: None,
        exit_paths: cfg.exit_paths,
        sim: cfg.sim.to_sim_config(),
        fv_particles: if no_fv {
            None
        } else {
            Some(cfg.fv.n_particles)
        },
        fv_t_sample_over_lambda: cfg.fv.t_sample_over_lambda,
        ..PipelineConfig::default()
    };
    let out = run_regime_pipeline(&model, &pipeline_cfg)?;
    w.write_json("regime_report.json", &out.report)?;
    w.write_json(
        "mixture.json",
        &MixtureSummary {
            classification: out.report.classification,
            proof_weights: out.mixture_proof.weights,
            theorem_weights: out.mixture_theorem.weights,
        },
    )?;
    if let Some((grid, nu)) = &out.mixture_proof.nu11 {
        w.write_csv(
            "mixture_axis1.csv",
            &["x", "nu"],
            (0..grid.len()).map(|i| vec![grid.coords(i)[0], nu[i]]),
        )?;
    }
    if let Some((grid, nu)) = &out.mixture_proof.nu12 {
        w.write_csv(
            "mixture_axis2.csv",
            &["x", "nu"],
            (0..grid.len()).map(|i| vec![grid.coords(i)[0], nu[i]]),
        )?;
    }
    if let Some((grid, nu)) = &out.mixture_proof.nu1 {
        w.write_csv(
            "mixture_interior.csv",
            &["x1", "x2", "nu"],
            (0..grid.len()).map(|i| {
                let x = grid.coords(i);
                vec![x[0], x[1], nu[i]]
            }),
        )?;
    }
    println!(
        "classification: {:?} (lambda1 = {}, axis rates = {}, {})",
        out.report.classification, out.report.lambda1, out.report.lambda11, out.report.lambda12
    );
    w.finish()?;
    Ok(())
}

fn cmd_scan(cli: &Cli) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let mut w = writer_for(cli, &cfg, &bytes, "scan")?;
    let scan_cfg = ScanConfig {
        n_2d: cfg.scan.n_2d,
        n_1d: cfg.scan.n_1d,
        c_tol: cfg.scan.c_tol,
        solve: SolveOptions::default(),
    };
    let result = scan_phase_transition(&cfg.scan.c_values, &scan_cfg)?;
    w.write_csv(
        "scan.csv",
        &["c", "lambda1", "lambda_axis", "gap"],
        result
            .points
            .iter()
            .map(|p| vec![p.c, p.lambda1, p.lambda_axis, p.gap]),
    )?;
    w.write_json("scan.json", &result)?;
    match result.crossing {
        Some((lo, hi)) => println!("phase transition bracketed: c_c in ({lo}, {hi})"),
        None => println!("no crossing in the scanned range"),
    }
    w.finish()?;
    Ok(())
}

fn cmd_diagnose(cli: &Cli) -> Result<(), CliError> {
    let (cfg, bytes) = load_config(cli)?;
    let model = model_from(&cfg)?;
    let mut w = writer_for(cli, &cfg, &bytes, "diagnose")?;
    let diag_cfg = DiagnosticsConfig {
        radii: cfg.diagnostics.radii.clone(),
        samples_per_shell: cfg.diagnostics.samples_per_shell,
        eps_trunc: cfg.diagnostics.eps_trunc,
        series_k_max: cfg.diagnostics.series_k_max,
        betas: cfg.diagnostics.betas.clone(),
    };
    let report = hypothesis_diagnostics(&model, &diag_cfg)?;
    w.write_json("diagnostics.json", &report)?;
    w.write_csv(
        "shells.csv",
        &["radius", "g_bar", "v_bar"],
        report
            .shells
            .iter()
            .map(|s| vec![s.radius, s.g_bar, s.v_bar]),
    )?;
    println!(
        "G growth exponent: {:?}, V growth exponent: {:?}, inf G = {}",
        report.g_growth_exponent, report.v_growth_exponent, report.g_lower_bound
    );
    w.finish()?;
    Ok(())
}

//! Long-time conditioned behaviour: compares the interior killing rate
//! `lambda1` against the single-type axis rates `lambda_{1,1}`,
//! `lambda_{1,2}`, classifies the regime, and composes the mixture QSD of
//! the process conditioned on non-extinction.
//!
//! The comparisons decide everything: if `lambda1` exceeds some axis rate,
//! the interior empties first on its own time scale and the conditioned law
//! concentrates on the boundary, surviving type the one with the smaller
//! axis rate. If `lambda1` is below both axis rates, the interior persists
//! and the limit law is a three-component mixture with axis weights
//! `c_j K / (lambda_{1,i} - lambda1)`, where `c_j` is the probability under
//! the interior QSD that coordinate `j` is the dead one at the boundary
//! exit. Two conventions for the factor `K` are in circulation, differing
//! by `lambda1`; both are computed on every run so Monte Carlo can
//! discriminate, with `K = lambda1` ([`FormulaVariant::Proof`]) as default.

use crate::conditioning::{
    exit_statistics, fleming_viot, sample_from_density, ConditioningError, ExitStats, FvConfig,
};
use crate::harness::SlvBoundaryKernel;
use crate::model::{Axis, KolmogorovModel};
use crate::sde::{SdeError, SimConfig};
use crate::spectral::{
    auto_axis_spec, solve_qsd_1d, solve_qsd_2d, AxisSpec, Grid, SolveOptions, SpectralError,
    SpectralResult,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegimeError {
    #[error("killing rates must be positive, got ({lambda1}, {lambda11}, {lambda12})")]
    NonPositiveRate {
        lambda1: f64,
        lambda11: f64,
        lambda12: f64,
    },
    #[error("coexistence weights need lambda_1,i > lambda_1 strictly (lambda1 = {lambda1}, axis rate = {axis_rate})")]
    RateOrderViolation { lambda1: f64, axis_rate: f64 },
    #[error("negative mixture weight from exit splits ({c1}, {c2})")]
    NegativeWeight { c1: f64, c2: f64 },
    #[error("spectral/particle cross-check failed: lambda1 = {lambda1}, lambda_fv = {lambda_fv} (tol 10%)")]
    CrossCheckFailure { lambda1: f64, lambda_fv: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
    #[error(transparent)]
    Sde(#[from] SdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// `lambda1 > lambda_{1,i}` for some `i` and type 1 has the smaller
    /// axis rate: only type 1 survives on the intermediate time scale.
    BoundaryType1Dominant,
    BoundaryType2Dominant,
    /// Boundary regime with axis rates equal within tolerance.
    BoundarySymmetric,
    /// `lambda1 < min(lambda_{1,1}, lambda_{1,2})`: positive probability of
    /// coexistence in the conditioned limit.
    Coexistence,
    /// `lambda1` within tolerance of the smaller axis rate: the unresolved
    /// equality case, reported as such and never coerced.
    Degenerate,
}

/// Regime decision from the three killing rates; all comparisons relative.
pub fn classify(
    lambda1: f64,
    lambda11: f64,
    lambda12: f64,
    rel_tol: f64,
) -> Result<Classification, RegimeError> {
    if !(lambda1 > 0.0 && lambda11 > 0.0 && lambda12 > 0.0) {
        return Err(RegimeError::NonPositiveRate {
            lambda1,
            lambda11,
            lambda12,
        });
    }
    let min_axis = lambda11.min(lambda12);
    if lambda1 < min_axis * (1.0 - rel_tol) {
        return Ok(Classification::Coexistence);
    }
    if lambda1 > lambda11 * (1.0 + rel_tol) || lambda1 > lambda12 * (1.0 + rel_tol) {
        let max_axis = lambda11.max(lambda12);
        if (lambda11 - lambda12).abs() <= rel_tol * max_axis {
            return Ok(Classification::BoundarySymmetric);
        }
        return Ok(if lambda12 > lambda11 {
            Classification::BoundaryType1Dominant
        } else {
            Classification::BoundaryType2Dominant
        });
    }
    Ok(Classification::Degenerate)
}

/// Which form of the coexistence axis weights to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormulaVariant {
    /// Weights `c_j lambda1 / (lambda_{1,i} - lambda1)` (default).
    Proof,
    /// Weights `c_j / (lambda_{1,i} - lambda1)`.
    Theorem,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MixtureWeights {
    /// Mass of the `nu_{1,1} (x) delta_0` component (type 1 alone).
    pub axis1: f64,
    /// Mass of the `delta_0 (x) nu_{1,2}` component (type 2 alone).
    pub axis2: f64,
    /// Mass of the interior component `nu_1`.
    pub interior: f64,
}

/// Mixture QSD: weights plus the component densities on their grids.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureQSD {
    pub variant: FormulaVariant,
    pub weights: MixtureWeights,
    pub classification: Classification,
    /// Axis-1 component density (1D grid), when available.
    pub nu11: Option<(Grid, Vec<f64>)>,
    pub nu12: Option<(Grid, Vec<f64>)>,
    /// Interior component density (2D grid), when available.
    pub nu1: Option<(Grid, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateTriple {
    pub lambda1: f64,
    pub lambda11: f64,
    pub lambda12: f64,
}

/// Composes the mixture QSD for a classified regime.
///
/// Boundary regimes put everything on the surviving axis (split by the exit
/// probabilities when the axis rates tie); coexistence mixes the three
/// components with the variant's weights. The degenerate case follows the
/// boundary convention, which is what the equality case is conjectured to
/// do, and keeps its `Degenerate` tag.
#[allow(clippy::too_many_arguments)]
pub fn compose_qsd(
    classification: Classification,
    rates: RateTriple,
    c1: f64,
    c2: f64,
    nu1: Option<(Grid, Vec<f64>)>,
    nu11: Option<(Grid, Vec<f64>)>,
    nu12: Option<(Grid, Vec<f64>)>,
    variant: FormulaVariant,
) -> Result<MixtureQSD, RegimeError> {
    if c1 < 0.0 || c2 < 0.0 {
        return Err(RegimeError::NegativeWeight { c1, c2 });
    }
    let weights = match classification {
        Classification::BoundaryType1Dominant => MixtureWeights {
            axis1: 1.0,
            axis2: 0.0,
            interior: 0.0,
        },
        Classification::BoundaryType2Dominant => MixtureWeights {
            axis1: 0.0,
            axis2: 1.0,
            interior: 0.0,
        },
        Classification::BoundarySymmetric | Classification::Degenerate => {
            let total = c1 + c2;
            if total <= 0.0 {
                return Err(RegimeError::NegativeWeight { c1, c2 });
            }
            MixtureWeights {
                axis1: c2 / total,
                axis2: c1 / total,
                interior: 0.0,
            }
        }
        Classification::Coexistence => {
            for axis_rate in [rates.lambda11, rates.lambda12] {
                if axis_rate <= rates.lambda1 {
                    return Err(RegimeError::RateOrderViolation {
                        lambda1: rates.lambda1,
                        axis_rate,
                    });
                }
            }
            let k = match variant {
                FormulaVariant::Proof => rates.lambda1,
                FormulaVariant::Theorem => 1.0,
            };
            let w1 = c2 * k / (rates.lambda11 - rates.lambda1);
            let w2 = c1 * k / (rates.lambda12 - rates.lambda1);
            let total = w1 + w2 + 1.0;
            MixtureWeights {
                axis1: w1 / total,
                axis2: w2 / total,
                interior: 1.0 / total,
            }
        }
    };
    Ok(MixtureQSD {
        variant,
        weights,
        classification,
        nu11,
        nu12,
        nu1,
    })
}

/// Grid/sample-size provenance recorded in a report.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub grid_2d: Vec<AxisSpec>,
    pub grid_1d: AxisSpec,
    pub n_exit_paths: usize,
    pub seed: u64,
    pub fv_particles: Option<usize>,
    pub truncation_rel_shift: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub lambda1: f64,
    pub lambda11: f64,
    pub lambda12: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_stderr: f64,
    pub classification: Classification,
    pub rel_tol_used: f64,
    /// Fleming-Viot cross-check of lambda1, when enabled.
    pub lambda_fv: Option<f64>,
    pub provenance: Provenance,
}

/// Full pipeline configuration. Grids default to the automatic truncation.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub n_2d: usize,
    pub n_1d: usize,
    pub grid_2d: Option<Grid>,
    pub grid_1d: Option<Grid>,
    pub exit_paths: usize,
    pub sim: SimConfig,
    /// Classification tolerance before numerical-uncertainty widening.
    pub rel_tol: f64,
    pub solve: SolveOptions,
    /// Fleming-Viot cross-check (particle count); disabled when `None`.
    pub fv_particles: Option<usize>,
    pub fv_t_sample_over_lambda: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_2d: 160,
            n_1d: 1200,
            grid_2d: None,
            grid_1d: None,
            exit_paths: 4000,
            sim: SimConfig {
                dt: 5e-4,
                ..SimConfig::default()
            },
            rel_tol: 0.02,
            solve: SolveOptions::default(),
            fv_particles: Some(2000),
            fv_t_sample_over_lambda: 40.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: RegimeReport,
    /// Mixture under the default weight convention.
    pub mixture_proof: MixtureQSD,
    /// Mixture under the alternative convention, kept for comparison.
    pub mixture_theorem: MixtureQSD,
    pub spectral_2d: SpectralResult,
    pub spectral_axis1: SpectralResult,
    pub spectral_axis2: SpectralResult,
    pub exit_stats: ExitStats,
}

/// Orchestrates the spectral solves, the exit-split estimation, the
/// classification and the mixture composition, cross-checking `lambda1`
/// against a Fleming-Viot rate when enabled.
pub fn run_regime_pipeline(
    model: &KolmogorovModel,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, RegimeError> {
    let grid_2d = cfg
        .grid_2d
        .clone()
        .unwrap_or_else(|| Grid::square(auto_axis_spec(model, cfg.n_2d)));
    let grid_1d = cfg
        .grid_1d
        .clone()
        .unwrap_or_else(|| Grid::new_1d(auto_axis_spec(model, cfg.n_1d)));

    let spectral_2d = solve_qsd_2d(model, &grid_2d, 1, &cfg.solve)?;
    let spectral_axis1 = solve_qsd_1d(model, Axis::One, &grid_1d, 1, &cfg.solve)?;
    let spectral_axis2 = solve_qsd_1d(model, Axis::Two, &grid_1d, 1, &cfg.solve)?;
    let lambda1 = spectral_2d.lambda[0];
    let lambda11 = spectral_axis1.lambda[0];
    let lambda12 = spectral_axis2.lambda[0];

    // exit splits from QSD starts; horizon long enough that censoring has
    // negligible probability under the exponential exit law
    let exit_cfg = SimConfig {
        t_max: ((cfg.exit_paths as f64).ln() + 12.0) / lambda1,
        ..cfg.sim
    };
    let exit_stats = exit_statistics(
        model,
        &spectral_2d.qsd_density,
        &grid_2d,
        cfg.exit_paths,
        &exit_cfg,
    )?;

    let lambda_fv = match cfg.fv_particles {
        Some(n_particles) => {
            let init = sample_from_density(
                &spectral_2d.qsd_density,
                &grid_2d,
                n_particles,
                cfg.sim.seed ^ 0x5c4e_11aa,
            );
            let kernel = SlvBoundaryKernel::new(*model, &cfg.sim);
            let hist = Grid::square(AxisSpec {
                eps_lo: grid_2d.axis(0).eps_lo,
                l_hi: grid_2d.axis(0).l_hi,
                n: 32,
            });
            let fv = fleming_viot(
                &kernel,
                &init,
                &FvConfig {
                    n_particles,
                    dt: cfg.sim.dt,
                    t_burn: 5.0 / lambda1,
                    t_sample: cfg.fv_t_sample_over_lambda / lambda1,
                    seed: cfg.sim.seed,
                },
                &hist,
            )?;
            if (fv.lambda_fv - lambda1).abs() > 0.10 * lambda1 {
                return Err(RegimeError::CrossCheckFailure {
                    lambda1,
                    lambda_fv: fv.lambda_fv,
                });
            }
            Some(fv.lambda_fv)
        }
        None => None,
    };

    // widen the classification tolerance by the measured grid sensitivity
    let trunc_shift = spectral_2d.truncation.map(|t| t.rel_shift);
    let rel_tol_used = cfg.rel_tol + trunc_shift.unwrap_or(0.0);
    let classification = classify(lambda1, lambda11, lambda12, rel_tol_used)?;

    let rates = RateTriple {
        lambda1,
        lambda11,
        lambda12,
    };
    let components = |_: ()| {
        (
            Some((grid_2d.clone(), spectral_2d.qsd_density.clone())),
            Some((grid_1d.clone(), spectral_axis1.qsd_density.clone())),
            Some((grid_1d.clone(), spectral_axis2.qsd_density.clone())),
        )
    };
    let (nu1, nu11, nu12) = components(());
    let mixture_proof = compose_qsd(
        classification,
        rates,
        exit_stats.c1_hat,
        exit_stats.c2_hat,
        nu1,
        nu11,
        nu12,
        FormulaVariant::Proof,
    )?;
    let (nu1, nu11, nu12) = components(());
    let mixture_theorem = compose_qsd(
        classification,
        rates,
        exit_stats.c1_hat,
        exit_stats.c2_hat,
        nu1,
        nu11,
        nu12,
        FormulaVariant::Theorem,
    )?;

    let report = RegimeReport {
        lambda1,
        lambda11,
        lambda12,
        c1: exit_stats.c1_hat,
        c2: exit_stats.c2_hat,
        c_stderr: exit_stats.stderr,
        classification,
        rel_tol_used,
        lambda_fv,
        provenance: Provenance {
            grid_2d: (0..grid_2d.dim()).map(|d| *grid_2d.axis(d)).collect(),
            grid_1d: *grid_1d.axis(0),
            n_exit_paths: cfg.exit_paths,
            seed: cfg.sim.seed,
            fv_particles: cfg.fv_particles,
            truncation_rel_shift: trunc_shift,
        },
    };
    Ok(PipelineOutput {
        report,
        mixture_proof,
        mixture_theorem,
        spectral_2d,
        spectral_axis1,
        spectral_axis2,
        exit_stats,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanPoint {
    pub c: f64,
    pub lambda1: f64,
    pub lambda_axis: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    /// Single-type rate of the symmetric family (c-independent).
    pub lambda_axis: f64,
    /// Bracket `(c_lo, c_hi)` of the phase transition, when found.
    pub crossing: Option<(f64, f64)>,
    pub extra_solves: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanConfig {
    pub n_2d: usize,
    pub n_1d: usize,
    /// Bisection stops when the bracket is this wide.
    pub c_tol: f64,
    pub solve: SolveOptions,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            n_2d: 160,
            n_1d: 1200,
            c_tol: 1e-2,
            solve: SolveOptions::default(),
        }
    }
}

fn symmetric_cooperative_model(c: f64) -> Result<KolmogorovModel, RegimeError> {
    let raw = crate::model::RawParams::all_ones_with_cross(-c, -c);
    let params = crate::model::validate_params(&raw)
        .map_err(|e| RegimeError::Spectral(SpectralError::Model(e)))?;
    Ok(KolmogorovModel::new(params))
}

fn lambda1_of_c(c: f64, cfg: &ScanConfig) -> Result<f64, RegimeError> {
    let model = symmetric_cooperative_model(c)?;
    let grid = Grid::square(auto_axis_spec(&model, cfg.n_2d));
    let res = solve_qsd_2d(&model, &grid, 1, &cfg.solve)?;
    Ok(res.lambda[0])
}

/// Scans the symmetric weak-cooperation family (all coefficients one,
/// `c12 = c21 = -c`) over `c_values` and brackets the phase transition
/// `lambda1(c) = lambda_axis` by bisection when the scan crosses it.
pub fn scan_phase_transition(
    c_values: &[f64],
    cfg: &ScanConfig,
) -> Result<ScanResult, RegimeError> {
    for &c in c_values {
        assert!(
            c > 0.0 && c < 1.0,
            "the symmetric family needs 0 < c < 1, got {c}"
        );
    }
    // axis dynamics do not involve c: solve once
    let model0 = symmetric_cooperative_model(c_values[0])?;
    let grid_1d = Grid::new_1d(auto_axis_spec(&model0, cfg.n_1d));
    let lambda_axis = solve_qsd_1d(&model0, Axis::One, &grid_1d, 1, &cfg.solve)?.lambda[0];

    let mut points = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let lambda1 = lambda1_of_c(c, cfg)?;
        points.push(ScanPoint {
            c,
            lambda1,
            lambda_axis,
            gap: lambda1 - lambda_axis,
        });
    }

    let mut crossing = None;
    let mut extra_solves = 0usize;
    for w in points.windows(2) {
        if w[0].gap > 0.0 && w[1].gap <= 0.0 {
            let (mut lo, mut hi) = (w[0].c, w[1].c);
            while hi - lo > cfg.c_tol {
                let mid = 0.5 * (lo + hi);
                let gap_mid = lambda1_of_c(mid, cfg)? - lambda_axis;
                extra_solves += 1;
                if gap_mid > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossing = Some((lo, hi));
            break;
        }
    }
    Ok(ScanResult {
        points,
        lambda_axis,
        crossing,
        extra_solves,
    })
}

//! Numerical checks of the spectral hypotheses.
//!
//! Estimates, by dense low-discrepancy sampling of the quadrant,
//!
//! * `Gbar(R) = inf { G(x) : |x| >= R, x in D }` (expected growth `R^6`),
//! * `Vbar(R) = sup { V(x) : |x| <= R, x in D, x^i >= eps }` (growth `<= R^4`),
//! * a finite lower bound `-C` for `G` over the sampled quadrant,
//!
//! and evaluates partial sums of the ultracontractivity series
//! `sum_k exp( (Vbar(k+1) - beta k^{-3/2} Gbar(k)) / 2 )`, flagging apparent
//! divergence. The series converging for every `beta > 0` is the sufficient
//! condition for uniqueness of the quasi-stationary distribution.

use super::{KolmogorovModel, ModelError};
use rayon::prelude::*;
use serde::Serialize;

/// Hard cap on total point evaluations per diagnostics run.
const SAMPLE_BUDGET_CAP: u64 = 2_000_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsConfig {
    /// Shell radii for the Gbar / Vbar tables, ascending.
    pub radii: Vec<f64>,
    /// Low-discrepancy samples per shell.
    pub samples_per_shell: usize,
    /// Axis clearance: samples keep `x^i >= eps_trunc`.
    pub eps_trunc: f64,
    /// Truncation order of the ultracontractivity series.
    pub series_k_max: usize,
    /// Values of beta at which the series is evaluated.
    pub betas: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            radii: vec![5.0, 10.0, 20.0, 35.0, 50.0],
            samples_per_shell: 1_000_000,
            eps_trunc: 1e-3,
            series_k_max: 30,
            betas: vec![0.01, 0.1, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShellEstimate {
    pub radius: f64,
    /// Estimated `inf { G(x) : |x| >= radius }`.
    pub g_bar: f64,
    /// Estimated `sup { V(x) : |x| <= radius }`.
    pub v_bar: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesCheck {
    pub beta: f64,
    pub partial_sum: f64,
    /// Ratio of the last two terms; `>= 1` means the tail has not started
    /// decaying within the truncation.
    pub tail_ratio: f64,
    /// Index beyond which the terms are predicted to decay, extrapolated
    /// from the fitted growth exponents. `None` when the exponents predict
    /// no decay at all.
    pub predicted_crossover: Option<f64>,
    /// True when the tail is still growing at the truncation and the fitted
    /// exponents predict no eventual decay (`g_exp - 3/2 <= v_exp`).
    pub apparently_divergent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub shells: Vec<ShellEstimate>,
    /// Log-log slope of `Gbar(R)` over the requested radii (positive values only).
    pub g_growth_exponent: Option<f64>,
    /// Log-log slope of `Vbar(R)` over the requested radii.
    pub v_growth_exponent: Option<f64>,
    /// Empirical infimum of `G` over the whole sampled quadrant (the `-C` bound).
    pub g_lower_bound: f64,
    pub series: Vec<SeriesCheck>,
    pub samples_per_shell: usize,
}

/// Radical-inverse Halton point in a given base.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Infimum of G and supremum of V over the annulus `r_lo <= |x| <= r_hi`
/// restricted to `x^i >= eps`, from `n` Halton samples in polar coordinates.
fn annulus_extrema(
    model: &KolmogorovModel,
    r_lo: f64,
    r_hi: f64,
    eps: f64,
    n: usize,
    index_offset: u64,
) -> (f64, f64) {
    let chunk = 8192usize;
    let n_chunks = n.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let end = (start + chunk).min(n);
            let mut g_min = f64::INFINITY;
            let mut v_max = f64::NEG_INFINITY;
            for k in start..end {
                let i = index_offset + k as u64 + 1;
                // area-uniform radius, uniform angle
                let u1 = halton(i, 2);
                let u2 = halton(i, 3);
                let rho = (r_lo * r_lo + u1 * (r_hi * r_hi - r_lo * r_lo)).sqrt();
                let theta = u2 * std::f64::consts::FRAC_PI_2;
                let x = [rho * theta.cos(), rho * theta.sin()];
                if x[0] < eps || x[1] < eps {
                    continue;
                }
                let g = model.g_raw(x);
                if g < g_min {
                    g_min = g;
                }
                let v = model.v_raw(x);
                if v > v_max {
                    v_max = v;
                }
            }
            (g_min, v_max)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        )
}

/// Ordinary least-squares slope of `ln y` against `ln x` over pairs with `y > 0`.
fn log_log_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

pub fn hypothesis_diagnostics(
    model: &KolmogorovModel,
    cfg: &DiagnosticsConfig,
) -> Result<HypothesisReport, ModelError> {
    // Merged shell ladder: integer radii for the series plus the user radii.
    let mut ladder: Vec<f64> = (1..=cfg.series_k_max + 1).map(|k| k as f64).collect();
    for &r in &cfg.radii {
        if r > 0.0 && !ladder.iter().any(|&l| (l - r).abs() < 1e-12) {
            ladder.push(r);
        }
    }
    ladder.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Two extension annuli beyond the largest radius so the suffix infimum
    // sees the region where G has turned around and grows.
    let r_max = *ladder.last().unwrap();
    let mut edges = vec![cfg.eps_trunc * std::f64::consts::SQRT_2];
    edges.extend(ladder.iter().copied());
    edges.push(1.5 * r_max);
    edges.push(2.25 * r_max);

    let n_shells = edges.len() - 1;
    let requested = (n_shells as u64).saturating_mul(cfg.samples_per_shell as u64);
    if requested > SAMPLE_BUDGET_CAP {
        return Err(ModelError::SamplingBudgetExceeded {
            requested,
            cap: SAMPLE_BUDGET_CAP,
        });
    }

    // Per-annulus extrema, then suffix-min for Gbar and prefix-max for Vbar
    // so the nested-set monotonicities hold by construction.
    let mut ann_g = vec![f64::INFINITY; n_shells];
    let mut ann_v = vec![f64::NEG_INFINITY; n_shells];
    for s in 0..n_shells {
        let (g, v) = annulus_extrema(
            model,
            edges[s],
            edges[s + 1],
            cfg.eps_trunc,
            cfg.samples_per_shell,
            (s as u64) * cfg.samples_per_shell as u64,
        );
        ann_g[s] = g;
        ann_v[s] = v;
    }
    let mut suffix_g = vec![f64::INFINITY; n_shells + 1];
    for s in (0..n_shells).rev() {
        suffix_g[s] = suffix_g[s + 1].min(ann_g[s]);
    }
    let mut prefix_v = vec![f64::NEG_INFINITY; n_shells + 1];
    for s in 0..n_shells {
        prefix_v[s + 1] = prefix_v[s].max(ann_v[s]);
    }

    // Gbar(r) for a ladder radius r = edges[s+1..]: suffix over shells >= s+1;
    // Vbar(r): prefix over shells up to s+1.
    let estimate_at = |r: f64| -> ShellEstimate {
        let s = edges
            .iter()
            .position(|&e| (e - r).abs() < 1e-12)
            .expect("ladder radius must be a shell edge");
        ShellEstimate {
            radius: r,
            g_bar: suffix_g[s],
            v_bar: prefix_v[s],
        }
    };

    let shells: Vec<ShellEstimate> = cfg.radii.iter().map(|&r| estimate_at(r)).collect();
    let g_lower_bound = suffix_g[0];

    let g_pairs: Vec<(f64, f64)> = shells.iter().map(|s| (s.radius, s.g_bar)).collect();
    let v_pairs: Vec<(f64, f64)> = shells.iter().map(|s| (s.radius, s.v_bar)).collect();

    // series terms: t_k = exp((Vbar(k+1) - beta k^{-3/2} Gbar(k)) / 2)
    let g_exponent = log_log_slope(&g_pairs);
    let v_exponent = log_log_slope(&v_pairs);
    let ladder_est: Vec<ShellEstimate> = (1..=cfg.series_k_max + 1)
        .map(|k| estimate_at(k as f64))
        .collect();
    let mut series = Vec::new();
    for &beta in &cfg.betas {
        let mut partial = 0.0;
        let mut last = f64::NAN;
        let mut prev = f64::NAN;
        for k in 1..=cfg.series_k_max {
            let a_k = ladder_est[k - 1].g_bar;
            let b_k1 = ladder_est[k].v_bar;
            let gamma_k = (k as f64).powf(-1.5);
            let log_t = 0.5 * (b_k1 - beta * gamma_k * a_k);
            let t = log_t.min(700.0).exp();
            partial += t;
            prev = last;
            last = t;
        }
        let tail_ratio = if prev > 0.0 {
            last / prev
        } else {
            f64::INFINITY
        };
        // The terms grow while Vbar(k) ~ k^p dominates beta k^{q - 3/2} Gbar
        // and decay after the crossover; extrapolate it from the fitted
        // power laws. No crossover means the series genuinely diverges.
        let predicted_crossover = match (g_exponent, v_exponent) {
            (Some(q), Some(p)) if q - 1.5 > p => {
                let r_ref = shells.last().map_or(1.0, |s| s.radius);
                let g_ref = shells.last().map_or(1.0, |s| s.g_bar.max(1e-300));
                let v_ref = shells.last().map_or(1.0, |s| s.v_bar.max(1e-300));
                // solve v_ref (k/r)^p = beta k^{-3/2} g_ref (k/r)^q for k
                let log_k = ((v_ref / (beta * g_ref)).ln() + (q - p) * r_ref.ln()) / (q - 1.5 - p);
                Some(log_k.exp())
            }
            _ => None,
        };
        let growing_at_truncation = tail_ratio >= 1.0 || tail_ratio.is_nan();
        series.push(SeriesCheck {
            beta,
            partial_sum: partial,
            tail_ratio,
            predicted_crossover,
            apparently_divergent: growing_at_truncation && predicted_crossover.is_none(),
        });
    }

    Ok(HypothesisReport {
        shells,
        g_growth_exponent: g_exponent,
        v_growth_exponent: v_exponent,
        g_lower_bound,
        series,
        samples_per_shell: cfg.samples_per_shell,
    })
}

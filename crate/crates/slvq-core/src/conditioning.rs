//! Monte Carlo oracle for the conditioned process: Fleming-Viot particle
//! estimation of the Yaglom limit and killing rate, sampling from grid
//! densities, and exit-split estimation from the interior QSD.
//!
//! The Fleming-Viot rule is the classic one: a particle absorbed at the
//! boundary is instantly relocated to the position of a surviving particle
//! chosen uniformly at random. Particle propagation within a step is
//! parallel with per-particle RNG streams; relocation is a serialized pass
//! in particle-index order drawing from a dedicated resampling stream, so
//! runs are reproducible independently of thread scheduling.

use crate::model::KolmogorovModel;
use crate::sde::{ExitAxis, SimConfig};
use crate::spectral::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("ensemble collapse at t = {t}: every particle was absorbed in one step")]
    Collapse { t: f64 },
    #[error("{censored} of {total} paths failed to exit by t_max; increase t_max")]
    CensoredExit { censored: usize, total: usize },
    #[error("insufficient tail for the survival fit")]
    InsufficientTail(#[from] crate::sde::SdeError),
}

/// Outcome of one propagation step of a killed process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Alive,
    Absorbed { axis: Option<ExitAxis> },
}

/// A killed Markov step kernel: advances a state by one time step or
/// reports absorption.
pub trait KilledKernel: Sync {
    fn dim(&self) -> usize;
    fn advance(&self, x: &mut [f64; 2], dt: f64, rng: &mut ChaCha8Rng) -> StepOutcome;
}

/// Interacting particle ensemble approximating the conditioned law.
pub struct ParticleEnsemble {
    positions: Vec<[f64; 2]>,
    rngs: Vec<ChaCha8Rng>,
    resample_rng: ChaCha8Rng,
    absorption_events: u64,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(init: &[[f64; 2]], seed: u64) -> Self {
        let rngs = (0..init.len())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        let mut resample_rng = ChaCha8Rng::seed_from_u64(seed);
        resample_rng.set_stream(u64::MAX);
        ParticleEnsemble {
            positions: init.to_vec(),
            rngs,
            resample_rng,
            absorption_events: 0,
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn absorption_events(&self) -> u64 {
        self.absorption_events
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// One synchronous step: parallel propagation, then serialized
    /// uniform-among-survivors relocation in particle-index order.
    /// Returns the number of absorptions.
    pub fn step(&mut self, kernel: &dyn KilledKernel, dt: f64) -> Result<usize, ConditioningError> {
        const CHUNK: usize = 64;
        let mut outcomes = vec![StepOutcome::Alive; self.positions.len()];
        self.positions
            .par_chunks_mut(CHUNK)
            .zip(self.rngs.par_chunks_mut(CHUNK))
            .zip(outcomes.par_chunks_mut(CHUNK))
            .for_each(|((xs, rngs), outs)| {
                for ((x, rng), out) in xs.iter_mut().zip(rngs).zip(outs) {
                    *out = kernel.advance(x, dt, rng);
                }
            });
        self.time += dt;
        let survivors: Vec<usize> = (0..self.positions.len())
            .filter(|&i| outcomes[i] == StepOutcome::Alive)
            .collect();
        let absorbed: Vec<usize> = (0..self.positions.len())
            .filter(|&i| outcomes[i] != StepOutcome::Alive)
            .collect();
        if absorbed.is_empty() {
            return Ok(0);
        }
        if survivors.is_empty() {
            return Err(ConditioningError::Collapse { t: self.time });
        }
        let donor_positions: Vec<[f64; 2]> = survivors.iter().map(|&i| self.positions[i]).collect();
        for &i in &absorbed {
            let pick = self.resample_rng.random_range(0..donor_positions.len());
            self.positions[i] = donor_positions[pick];
        }
        self.absorption_events += absorbed.len() as u64;
        Ok(absorbed.len())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FvConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FvResult {
    /// Absorptions during sampling / (n_particles * t_sample).
    pub lambda_fv: f64,
    /// Pooled occupation histogram on the histogram grid, cell masses
    /// summing to one.
    pub histogram: Vec<f64>,
    pub absorption_events: u64,
    pub n_particles: usize,
    pub t_sample: f64,
}

/// Runs the Fleming-Viot ensemble and pools positions over the sampling
/// window into a histogram on `hist_grid`.
pub fn fleming_viot(
    kernel: &dyn KilledKernel,
    init: &[[f64; 2]],
    cfg: &FvConfig,
    hist_grid: &Grid,
) -> Result<FvResult, ConditioningError> {
    assert!(cfg.n_particles >= 100, "need at least 100 particles");
    assert_eq!(init.len(), cfg.n_particles);
    let mut ensemble = ParticleEnsemble::new(init, cfg.seed);
    let burn_steps = (cfg.t_burn / cfg.dt).round() as usize;
    let sample_steps = (cfg.t_sample / cfg.dt).round() as usize;
    for _ in 0..burn_steps {
        ensemble.step(kernel, cfg.dt)?;
    }
    let mut histogram = vec![0.0f64; hist_grid.len()];
    let mut events = 0u64;
    for _ in 0..sample_steps {
        events += ensemble.step(kernel, cfg.dt)? as u64;
        for x in ensemble.positions() {
            histogram[hist_grid.nearest_node(*x)] += 1.0;
        }
    }
    let total: f64 = histogram.iter().sum();
    for h in &mut histogram {
        *h /= total;
    }
    Ok(FvResult {
        lambda_fv: events as f64 / (cfg.n_particles as f64 * cfg.t_sample),
        histogram,
        absorption_events: events,
        n_particles: cfg.n_particles,
        t_sample: cfg.t_sample,
    })
}

/// Total variation distance between a cell-mass histogram and a node
/// density on the same grid.
pub fn histogram_tv(histogram: &[f64], density: &[f64], grid: &Grid) -> f64 {
    let vol = grid.cell_volume();
    0.5 * histogram
        .iter()
        .zip(density)
        .map(|(h, d)| (h - d * vol).abs())
        .sum::<f64>()
}

/// Inverse-CDF sampling from a normalized density on a grid, with uniform
/// jitter inside each cell.
pub fn sample_from_density(density: &[f64], grid: &Grid, n: usize, seed: u64) -> Vec<[f64; 2]> {
    assert_eq!(density.len(), grid.len());
    let mut cdf = Vec::with_capacity(density.len());
    let mut acc = 0.0;
    for &d in density {
        acc += d.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let mut lo = 0usize;
            let mut hi = cdf.len() - 1;
            while lo < hi {
                let mid = (lo + hi) / 2;
                if cdf[mid] < u {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            let node = grid.coords(lo);
            let mut x = [0.0; 2];
            for d in 0..grid.dim() {
                let h = grid.axis(d).h();
                x[d] = node[d] + (rng.random::<f64>() - 0.5) * h;
            }
            x
        })
        .collect()
}

/// Empirical exit-split probabilities from the interior QSD.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExitStats {
    /// Probability that coordinate 1 is the dead one at the boundary exit.
    pub c1_hat: f64,
    /// Probability that coordinate 2 is the dead one.
    pub c2_hat: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// Draws starts from the QSD density, simulates to the boundary and tallies
/// the exit axis. Censored paths are an error: raise `t_max`.
pub fn exit_statistics(
    model: &KolmogorovModel,
    qsd_density: &[f64],
    grid: &Grid,
    n_paths: usize,
    cfg: &SimConfig,
) -> Result<ExitStats, ConditioningError> {
    let exits = exit_axes_from_density(model, qsd_density, grid, n_paths, cfg)?;
    let c1 = exits.iter().filter(|(_, a)| *a == ExitAxis::Axis2).count() as f64 / n_paths as f64;
    let c2 = 1.0 - c1;
    Ok(ExitStats {
        c1_hat: c1,
        c2_hat: c2,
        stderr: (c1 * (1.0 - c1) / n_paths as f64).sqrt(),
        n_paths,
    })
}

fn exit_axes_from_density(
    model: &KolmogorovModel,
    qsd_density: &[f64],
    grid: &Grid,
    n_paths: usize,
    cfg: &SimConfig,
) -> Result<Vec<(f64, ExitAxis)>, ConditioningError> {
    let starts = sample_from_density(qsd_density, grid, n_paths, cfg.seed);
    let kernel = crate::harness::SlvBoundaryKernel::new(*model, cfg);
    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let results: Vec<Option<(f64, ExitAxis)>> = starts
        .par_iter()
        .enumerate()
        .map(|(p, start)| {
            let mut rng = cfg.path_rng(p as u64);
            let mut x = *start;
            for step in 1..=n_steps {
                if let StepOutcome::Absorbed { axis } =
                    crate::conditioning::KilledKernel::advance(&kernel, &mut x, cfg.dt, &mut rng)
                {
                    return Some((
                        step as f64 * cfg.dt,
                        axis.expect("boundary kernel reports the exit axis"),
                    ));
                }
            }
            None
        })
        .collect();
    let censored = results.iter().filter(|r| r.is_none()).count();
    if censored > 0 {
        return Err(ConditioningError::CensoredExit {
            censored,
            total: n_paths,
        });
    }
    Ok(results.into_iter().flatten().collect())
}

/// Kolmogorov-Smirnov distance of a sample to the exponential law with the
/// given rate.
pub fn ks_distance_to_exponential(times: &[f64], rate: f64) -> f64 {
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in sorted.iter().enumerate() {
        let f = 1.0 - (-rate * t).exp();
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Killing-rate check from QSD starts: survival fit of the boundary-exit
/// time (log-linear from zero under the QSD) plus the KS distance of the
/// exit times to the fitted exponential law.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QsdSurvivalCheck {
    pub lambda: f64,
    pub stderr: f64,
    pub ks_distance: f64,
    pub n_paths: usize,
}

pub fn survival_rate_from_nu1(
    model: &KolmogorovModel,
    qsd_density: &[f64],
    grid: &Grid,
    n_paths: usize,
    cfg: &SimConfig,
) -> Result<QsdSurvivalCheck, ConditioningError> {
    let exits = exit_axes_from_density(model, qsd_density, grid, n_paths, cfg)?;
    let times: Vec<Option<f64>> = exits.iter().map(|(t, _)| Some(*t)).collect();
    let t_mean = exits.iter().map(|(t, _)| t).sum::<f64>() / n_paths as f64;
    let grid_t: Vec<f64> = (0..60).map(|i| i as f64 * t_mean / 15.0).collect();
    let curve = crate::sde::SurvivalCurve::from_exit_times(&times, &grid_t);
    let (lambda, stderr) = crate::sde::fit_killing_rate(&curve, (0.0, f64::INFINITY))?;
    let raw: Vec<f64> = exits.iter().map(|(t, _)| *t).collect();
    Ok(QsdSurvivalCheck {
        lambda,
        stderr,
        ks_distance: ks_distance_to_exponential(&raw, lambda),
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::AxisSpec;

    fn grid_1d(n: usize, lo: f64, hi: f64) -> Grid {
        Grid::new_1d(AxisSpec::new(lo, hi, n).unwrap())
    }

    #[test]
    fn sample_point_mass_lands_in_cell() {
        let grid = grid_1d(50, 0.0, 5.0);
        let mut density = vec![0.0; 50];
        density[20] = 1.0 / grid.cell_volume();
        let pts = sample_from_density(&density, &grid, 500, 9);
        let node = grid.coords(20)[0];
        let h = grid.axis(0).h();
        for p in pts {
            assert!((p[0] - node).abs() <= h / 2.0 + 1e-12);
        }
    }

    #[test]
    fn sample_uniform_passes_chi_square() {
        // 1% level with k - 1 degrees of freedom (Wilson-Hilferty quantile)
        let k = 100usize;
        let grid = grid_1d(k, 0.0, 1.0);
        let density = vec![1.0; k];
        let n = 100_000usize;
        let pts = sample_from_density(&density, &grid, n, 31);
        let mut counts = vec![0usize; k];
        for p in &pts {
            counts[grid.nearest_node(*p)] += 1;
        }
        let expected = n as f64 / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let df = (k - 1) as f64;
        let z = 2.326347874;
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} over critical {crit}");
    }

    #[test]
    fn sample_mean_matches_density_mean() {
        let grid = grid_1d(200, 0.0, 4.0);
        // triangular density peaked at 1
        let mut density: Vec<f64> = (0..200)
            .map(|i| {
                let x = grid.coords(i)[0];
                (1.0 - (x - 1.0).abs()).max(0.0)
            })
            .collect();
        let total: f64 = density.iter().sum::<f64>() * grid.cell_volume();
        for d in &mut density {
            *d /= total;
        }
        let mean_density: f64 = (0..200)
            .map(|i| grid.coords(i)[0] * density[i])
            .sum::<f64>()
            * grid.cell_volume();
        let n = 100_000usize;
        let pts = sample_from_density(&density, &grid, n, 5);
        let mean_sample: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let sd: f64 = (pts
            .iter()
            .map(|p| (p[0] - mean_sample).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        let stderr = sd / (n as f64).sqrt();
        assert!(
            (mean_sample - mean_density).abs() < 3.0 * stderr,
            "mean {mean_sample} vs {mean_density} (stderr {stderr})"
        );
    }

    #[test]
    fn ks_of_exact_exponential_sample_is_small() {
        // inverse-CDF quantile points of Exp(2)
        let n = 10_000;
        let times: Vec<f64> = (0..n)
            .map(|i| -((1.0 - (i as f64 + 0.5) / n as f64).ln()) / 2.0)
            .collect();
        let d = ks_distance_to_exponential(&times, 2.0);
        assert!(d < 1e-3, "KS {d}");
    }

    #[test]
    fn ensemble_conserves_particle_count() {
        let harness = crate::harness::DirichletBox::new(1, std::f64::consts::PI);
        let init: Vec<[f64; 2]> = (0..200)
            .map(|i| [0.5 + 2.0 * (i as f64 / 200.0), 0.0])
            .collect();
        let mut ens = ParticleEnsemble::new(&init, 3);
        for _ in 0..2000 {
            ens.step(&harness, 1e-3).unwrap();
            assert_eq!(ens.len(), 200);
            for p in ens.positions() {
                assert!(p[0] > 0.0 && p[0] < std::f64::consts::PI);
            }
        }
        assert!(ens.absorption_events() > 0);
    }

    #[test]
    fn ensemble_collapse_detected() {
        // box so small that every particle dies in the first step
        let harness = crate::harness::DirichletBox::new(1, 1e-9);
        let init: Vec<[f64; 2]> = (0..100).map(|_| [5e-10, 0.0]).collect();
        let mut ens = ParticleEnsemble::new(&init, 3);
        assert!(matches!(
            ens.step(&harness, 1.0),
            Err(ConditioningError::Collapse { .. })
        ));
    }

    #[test]
    fn fv_reproducible() {
        let harness = crate::harness::DirichletBox::new(1, std::f64::consts::PI);
        let grid = grid_1d(24, 0.0, std::f64::consts::PI);
        let init: Vec<[f64; 2]> = (0..150)
            .map(|i| [0.3 + 2.5 * (i as f64 / 150.0), 0.0])
            .collect();
        let cfg = FvConfig {
            n_particles: 150,
            dt: 1e-3,
            t_burn: 0.5,
            t_sample: 1.0,
            seed: 77,
        };
        let a = fleming_viot(&harness, &init, &cfg, &grid).unwrap();
        let b = fleming_viot(&harness, &init, &cfg, &grid).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.absorption_events, b.absorption_events);
    }
}

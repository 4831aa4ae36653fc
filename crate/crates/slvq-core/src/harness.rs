//! Analytic regression harness: Brownian motion killed at the boundary of a
//! box (`V = 0`, `G = 0`). The Dirichlet Laplacian on `(0, pi)^d` has known
//! eigenvalues `(k1^2 + ... + kd^2)/2`, which pins down both the spectral
//! pipeline and the Monte Carlo killing-rate estimators.

use crate::conditioning::{KilledKernel, StepOutcome};
use crate::sde::{ExitAxis, SimConfig};
use crate::spectral::ScalarPotential;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Box `(0, l)^dim` with zero potential.
#[derive(Debug, Clone, Copy)]
pub struct DirichletBox {
    dim: usize,
    l: f64,
}

impl DirichletBox {
    pub fn new(dim: usize, l: f64) -> Self {
        assert!(dim == 1 || dim == 2);
        assert!(l > 0.0);
        DirichletBox { dim, l }
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    fn inside(&self, x: [f64; 2]) -> bool {
        (0..self.dim).all(|i| x[i] > 0.0 && x[i] < self.l)
    }
}

impl ScalarPotential for DirichletBox {
    fn dim(&self) -> usize {
        self.dim
    }
    fn v(&self, _x: [f64; 2]) -> f64 {
        0.0
    }
    fn g(&self, _x: [f64; 2]) -> f64 {
        0.0
    }
}

impl KilledKernel for DirichletBox {
    fn dim(&self) -> usize {
        self.dim
    }

    fn advance(&self, x: &mut [f64; 2], dt: f64, rng: &mut ChaCha8Rng) -> StepOutcome {
        let sqrt_dt = dt.sqrt();
        for item in x.iter_mut().take(self.dim) {
            *item += sqrt_dt * rng.sample::<f64, _>(StandardNormal);
        }
        if self.inside(*x) {
            StepOutcome::Alive
        } else {
            StepOutcome::Absorbed { axis: None }
        }
    }
}

/// Exit times of killed Brownian paths from `x0`, `None` when censored at
/// `t_max`.
pub fn dirichlet_exit_times(
    harness: &DirichletBox,
    x0: [f64; 2],
    cfg: &SimConfig,
) -> Vec<Option<f64>> {
    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = cfg.path_rng(p as u64);
            let mut x = x0;
            for step in 1..=n_steps {
                if let StepOutcome::Absorbed { .. } = harness.advance(&mut x, cfg.dt, &mut rng) {
                    return Some(step as f64 * cfg.dt);
                }
            }
            None
        })
        .collect()
}

/// Boundary-exit kernel of the two-type model, shared by the Fleming-Viot
/// ensemble and the exit-split estimator. Absorption means the first axis
/// hit (exit of the open quadrant), detected in Z coordinates.
#[derive(Debug, Clone, Copy)]
pub struct SlvBoundaryKernel {
    model: crate::model::KolmogorovModel,
    scheme: crate::sde::Scheme,
    abs_threshold: f64,
}

impl SlvBoundaryKernel {
    pub fn new(model: crate::model::KolmogorovModel, cfg: &SimConfig) -> Self {
        SlvBoundaryKernel {
            model,
            scheme: cfg.scheme,
            abs_threshold: cfg.abs_threshold,
        }
    }

    pub fn model(&self) -> &crate::model::KolmogorovModel {
        &self.model
    }
}

impl KilledKernel for SlvBoundaryKernel {
    fn dim(&self) -> usize {
        2
    }

    fn advance(&self, x: &mut [f64; 2], dt: f64, rng: &mut ChaCha8Rng) -> StepOutcome {
        let p = self.model.params();
        let sqrt_dt = dt.sqrt();
        let dw = [
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ];
        match self.scheme {
            crate::sde::Scheme::EulerZ => {
                let z = crate::model::x_to_z(*x, p).expect("live state in the quadrant");
                let drift = self.model.drift_slvp(z);
                let diff = self.model.diffusion_slvp(z);
                let mut z_next = [0.0; 2];
                for i in 0..2 {
                    z_next[i] = (z[i] + drift[i] * dt + diff[i] * sqrt_dt * dw[i]).max(0.0);
                }
                let hit = [
                    z_next[0] <= self.abs_threshold,
                    z_next[1] <= self.abs_threshold,
                ];
                if hit[0] || hit[1] {
                    let axis = if hit[0] && hit[1] {
                        if z_next[0] <= z_next[1] {
                            ExitAxis::Axis2
                        } else {
                            ExitAxis::Axis1
                        }
                    } else if hit[0] {
                        ExitAxis::Axis2
                    } else {
                        ExitAxis::Axis1
                    };
                    return StepOutcome::Absorbed { axis: Some(axis) };
                }
                *x = crate::model::z_to_x(z_next, p).expect("nonnegative");
                StepOutcome::Alive
            }
            crate::sde::Scheme::EulerX => {
                let thr = [
                    2.0 * (self.abs_threshold / p.gamma(crate::model::Axis::One)).sqrt(),
                    2.0 * (self.abs_threshold / p.gamma(crate::model::Axis::Two)).sqrt(),
                ];
                let drift = self.model.drift_slvkp_raw(*x);
                let mut next = *x;
                for i in 0..2 {
                    next[i] += drift[i] * dt + sqrt_dt * dw[i];
                }
                let hit = [next[0] <= thr[0], next[1] <= thr[1]];
                if hit[0] || hit[1] {
                    let axis = if hit[0] && hit[1] {
                        if next[0] <= next[1] {
                            ExitAxis::Axis2
                        } else {
                            ExitAxis::Axis1
                        }
                    } else if hit[0] {
                        ExitAxis::Axis2
                    } else {
                        ExitAxis::Axis1
                    };
                    return StepOutcome::Absorbed { axis: Some(axis) };
                }
                *x = next;
                StepOutcome::Alive
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{fit_killing_rate, SurvivalCurve};
    use std::f64::consts::PI;

    #[test]
    fn brownian_exit_rate_is_half() {
        // Dirichlet Laplacian on (0, pi): lambda1 = 1/2
        let harness = DirichletBox::new(1, PI);
        let cfg = SimConfig {
            dt: 2e-4,
            t_max: 30.0,
            n_paths: 4000,
            seed: 2024,
            ..SimConfig::default()
        };
        let exits = dirichlet_exit_times(&harness, [PI / 2.0, 0.0], &cfg);
        let grid: Vec<f64> = (0..120).map(|i| i as f64 * 0.1).collect();
        let curve = SurvivalCurve::from_exit_times(&exits, &grid);
        let (rate, stderr) = fit_killing_rate(&curve, (1.0, 9.0)).unwrap();
        assert!(
            (rate - 0.5).abs() < 0.05,
            "rate {rate} +- {stderr} vs exact 0.5"
        );
    }
}

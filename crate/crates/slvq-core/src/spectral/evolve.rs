//! Crank-Nicolson evolution of the killed law.
//!
//! In the Schrodinger gauge the killed density solves `d psi/dt = -A psi`;
//! the diffusion-picture density is `p = psi e^{-V}`, its integral is the
//! survival mass and `p / mass` the conditioned law. Starting exactly from
//! the discrete ground state the conditioned law is stationary to rounding,
//! and from any start it converges to it at rate `lambda2 - lambda1`.
//!
//! Two implicit-Euler half steps (Rannacher smoothing) open the march so
//! that stiff modes excited by rough initial data are damped instead of
//! ringing through the trapezoidal rule.

use super::{build_operator, Grid, ScalarPotential, SpectralError};
use crate::linalg::{cg_solve, BandedCholesky, CsrMatrix};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Record every this many steps (the initial state is always recorded).
    pub record_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 5e-3,
            record_every: 10,
        }
    }
}

/// Conditioned densities and survival mass at recorded instants.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionedLawTrajectory {
    pub times: Vec<f64>,
    /// Normalized conditioned density (diffusion picture) per instant.
    pub densities: Vec<Vec<f64>>,
    /// Raw survival mass per instant.
    pub survival_mass: Vec<f64>,
}

/// Total variation distance between two densities on the same grid.
pub fn tv_distance(a: &[f64], b: &[f64], cell_volume: f64) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * cell_volume
}

/// Gaussian bump of width `sigma` centred at `x0`, normalized on the grid.
pub fn mollified_point(grid: &Grid, x0: [f64; 2], sigma: f64) -> Vec<f64> {
    let n = grid.len();
    let mut rho: Vec<f64> = (0..n)
        .map(|i| {
            let x = grid.coords(i);
            let mut d2 = (x[0] - x0[0]).powi(2);
            if grid.dim() == 2 {
                d2 += (x[1] - x0[1]).powi(2);
            }
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = rho.iter().sum::<f64>() * grid.cell_volume();
    for x in &mut rho {
        *x /= total;
    }
    rho
}

enum CnSolver {
    Banded(BandedCholesky),
    Cg(f64),
}

struct CnMarch<'a> {
    a: &'a CsrMatrix,
    solver: CnSolver,
    dt: f64,
}

impl<'a> CnMarch<'a> {
    fn new(a: &'a CsrMatrix, dt: f64) -> Result<Self, SpectralError> {
        // M = I + (dt/2) A; scaled form (2/dt) I + A factors once
        let shift = 2.0 / dt;
        let solver = if BandedCholesky::band_bytes(a.dim(), a.half_bandwidth()) <= (320usize << 20)
        {
            CnSolver::Banded(BandedCholesky::factor(a, shift)?)
        } else {
            CnSolver::Cg(shift)
        };
        Ok(CnMarch { a, solver, dt })
    }

    /// `y = M^{-1} x` with `M = I + (dt/2) A`.
    fn solve_m(&self, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
        let scale = 2.0 / self.dt;
        match &self.solver {
            CnSolver::Banded(f) => {
                let mut y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                f.solve_in_place(&mut y);
                Ok(y)
            }
            CnSolver::Cg(shift) => {
                let y = cg_solve(self.a, *shift, x, 1e-13, 20 * self.a.dim() + 1000)?;
                Ok(y.iter().map(|v| v * scale).collect())
            }
        }
    }

    /// Implicit Euler half step: `psi <- (I + (dt/2) A)^{-1} psi`.
    fn implicit_half_step(&self, psi: &mut Vec<f64>) -> Result<(), SpectralError> {
        *psi = self.solve_m(psi)?;
        Ok(())
    }

    /// Crank-Nicolson step: `psi <- M^{-1} (2 psi - M psi)`.
    fn cn_step(&self, psi: &mut Vec<f64>) -> Result<(), SpectralError> {
        let n = psi.len();
        let mut a_psi = vec![0.0; n];
        self.a.matvec(psi, &mut a_psi);
        let rhs: Vec<f64> = psi
            .iter()
            .zip(&a_psi)
            .map(|(p, ap)| p - 0.5 * self.dt * ap)
            .collect();
        *psi = self.solve_m(&rhs)?;
        Ok(())
    }
}

/// Marches the killed law and hands every recorded (time, conditioned
/// density, mass) to the observer.
fn march<F>(
    field: &dyn ScalarPotential,
    grid: &Grid,
    initial_density: &[f64],
    t_end: f64,
    opts: &EvolveOptions,
    mut observe: F,
) -> Result<(), SpectralError>
where
    F: FnMut(f64, &[f64], f64),
{
    assert_eq!(initial_density.len(), grid.len());
    let a = build_operator(field, grid);
    let march = CnMarch::new(&a, opts.dt)?;
    let n = grid.len();
    let vol = grid.cell_volume();
    let exp_v: Vec<f64> = (0..n).map(|i| (-field.v(grid.coords(i))).exp()).collect();

    // diffusion density -> Schrodinger gauge, 0 entries stay 0
    let mut psi: Vec<f64> = initial_density
        .iter()
        .zip(&exp_v)
        .map(|(&p, &ev)| if p == 0.0 { 0.0 } else { p / ev })
        .collect();

    let mut cond = vec![0.0; n];
    let mut emit = |t: f64, psi: &[f64], cond: &mut Vec<f64>| -> Result<(), SpectralError> {
        let mut mass = 0.0;
        for i in 0..n {
            cond[i] = psi[i] * exp_v[i];
            mass += cond[i];
        }
        let mass = mass * vol;
        if mass <= 0.0 {
            return Err(SpectralError::StepUnstable { mass });
        }
        let mut max = 0.0f64;
        for c in cond.iter() {
            max = max.max(c.abs());
        }
        for c in cond.iter_mut() {
            *c /= mass;
            if *c < 0.0 {
                if *c < -1e-10 * max / mass {
                    return Err(SpectralError::StepUnstable { mass: *c });
                }
                *c = 0.0;
            }
        }
        observe(t, cond, mass);
        Ok(())
    };

    emit(0.0, &psi, &mut cond)?;
    let n_steps = (t_end / opts.dt).round() as usize;
    for step in 1..=n_steps {
        if step == 1 {
            // Rannacher opening: two implicit-Euler half steps
            march.implicit_half_step(&mut psi)?;
            march.implicit_half_step(&mut psi)?;
        } else {
            march.cn_step(&mut psi)?;
        }
        if step % opts.record_every == 0 || step == n_steps {
            emit(step as f64 * opts.dt, &psi, &mut cond)?;
        }
    }
    Ok(())
}

/// Full trajectory of the conditioned law (stores every recorded density).
pub fn evolve_conditioned_law(
    field: &dyn ScalarPotential,
    grid: &Grid,
    initial_density: &[f64],
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<ConditionedLawTrajectory, SpectralError> {
    let mut traj = ConditionedLawTrajectory {
        times: Vec::new(),
        densities: Vec::new(),
        survival_mass: Vec::new(),
    };
    march(
        field,
        grid,
        initial_density,
        t_end,
        opts,
        |t, cond, mass| {
            traj.times.push(t);
            traj.densities.push(cond.to_vec());
            traj.survival_mass.push(mass);
        },
    )?;
    Ok(traj)
}

/// Recorded instants with the TV distance to a reference and the survival
/// mass: `(times, tv, mass)`.
pub type TvTrajectory = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Memory-light variant: records only the TV distance to a reference
/// density and the survival mass.
pub fn conditioned_tv_trajectory(
    field: &dyn ScalarPotential,
    grid: &Grid,
    initial_density: &[f64],
    reference: &[f64],
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<TvTrajectory, SpectralError> {
    let mut times = Vec::new();
    let mut tvs = Vec::new();
    let mut masses = Vec::new();
    let vol = grid.cell_volume();
    march(
        field,
        grid,
        initial_density,
        t_end,
        opts,
        |t, cond, mass| {
            times.push(t);
            tvs.push(tv_distance(cond, reference, vol));
            masses.push(mass);
        },
    )?;
    Ok((times, tvs, masses))
}

/// Least-squares slope of `ln(value)` against `t` over the instants where
/// `value` lies in `[lo, hi]`. Returns the decay rate (positive for decay)
/// and the number of points used.
pub fn fit_log_decay(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<(f64, usize)> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > lo && v < hi)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some((-sxy / sxx, pts.len()))
    }
}

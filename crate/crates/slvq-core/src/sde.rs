//! Absorbed Euler-Maruyama simulation of the population system.
//!
//! Trajectories can be stepped either in population coordinates (`EULER_Z`,
//! the default: the square-root diffusion vanishes at the axes, so clamping
//! at zero is the natural absorbing discretization) or in Kolmogorov
//! coordinates (`EULER_X`, unit diffusion with the singular `-1/(2x)`
//! drift). Absorption is always detected in Z coordinates: a coordinate is
//! dead once `z <= abs_threshold`.
//!
//! Every path owns a counter-based RNG stream derived from `(seed, path
//! index)`, so path counts and thread scheduling never reshuffle existing
//! paths.

use crate::model::{Axis, KolmogorovModel, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// State norm beyond which the integration aborts: the parameters are
/// outside the proven regime or the step size is too large.
pub const BLOWUP_NORM: f64 = 1e9;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("blow-up: |state| = {norm:.3e} at t = {t} (bad parameters or dt too large)")]
    BlowUp { t: f64, norm: f64 },
    #[error("invalid start: ({x1}, {x2})")]
    InvalidStart { x1: f64, x2: f64 },
    #[error("invalid simulation config: {reason}")]
    InvalidConfig { reason: String },
    #[error("insufficient tail: {points} usable survival points in the fit window, need {needed}")]
    InsufficientTail { points: usize, needed: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "EULER_Z")]
    EulerZ,
    #[serde(rename = "EULER_X")]
    EulerX,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Axis-hit detection level in Z coordinates.
    pub abs_threshold: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_max: 50.0,
            abs_threshold: 1e-8,
            seed: 1,
            n_paths: 1000,
            scheme: Scheme::EulerZ,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SdeError> {
        if self.dt.is_nan() || self.t_max.is_nan() || self.dt <= 0.0 || self.dt >= self.t_max {
            return Err(SdeError::InvalidConfig {
                reason: format!(
                    "need 0 < dt < t_max, got dt = {}, t_max = {}",
                    self.dt, self.t_max
                ),
            });
        }
        if self.abs_threshold.is_nan() || self.abs_threshold <= 0.0 {
            return Err(SdeError::InvalidConfig {
                reason: "abs_threshold must be positive".into(),
            });
        }
        if self.n_paths == 0 {
            return Err(SdeError::InvalidConfig {
                reason: "n_paths must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Counter-based stream for one path.
    pub fn path_rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng
    }
}

/// Which half-axis was hit at the boundary exit. `Axis1` is the half-axis
/// `{x2 = 0}` (type 2 extinct first), `Axis2` is `{x1 = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitAxis {
    Axis1,
    Axis2,
}

/// Stopping times of one trajectory; `None` means not reached by `t_max`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StoppingTimes {
    /// First hit of `{x2 = 0}`.
    pub t1: Option<f64>,
    /// First hit of `{x1 = 0}`.
    pub t2: Option<f64>,
    /// Exit of the open quadrant, `min(t1, t2)`.
    pub t_boundary: Option<f64>,
    /// Hit of the origin (both coordinates dead).
    pub t0: Option<f64>,
}

/// One simulated trajectory in X coordinates, sampled at a uniform stride.
#[derive(Debug, Clone, Serialize)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub stops: StoppingTimes,
    pub exit_axis: Option<ExitAxis>,
}

/// Internal stepping state: X and Z views of the current point plus
/// absorption flags. The Z view is the authority for absorption.
struct Walker<'a> {
    model: &'a KolmogorovModel,
    scheme: Scheme,
    /// X-image of the absorption threshold per coordinate.
    x_thr: [f64; 2],
    z_thr: f64,
    x: [f64; 2],
    z: [f64; 2],
    dead: [bool; 2],
}

impl<'a> Walker<'a> {
    fn new(model: &'a KolmogorovModel, cfg: &SimConfig, x0: [f64; 2]) -> Result<Self, SdeError> {
        if !(x0[0] >= 0.0 && x0[1] >= 0.0) || !x0[0].is_finite() || !x0[1].is_finite() {
            return Err(SdeError::InvalidStart {
                x1: x0[0],
                x2: x0[1],
            });
        }
        let p = model.params();
        let x_thr = [
            2.0 * (cfg.abs_threshold / p.gamma(Axis::One)).sqrt(),
            2.0 * (cfg.abs_threshold / p.gamma(Axis::Two)).sqrt(),
        ];
        let z = crate::model::x_to_z(x0, p)?;
        let mut w = Walker {
            model,
            scheme: cfg.scheme,
            x_thr,
            z_thr: cfg.abs_threshold,
            x: x0,
            z,
            dead: [false, false],
        };
        // starting on an axis is allowed: the surviving coordinate follows
        // the single-axis dynamics
        for i in 0..2 {
            if w.z[i] <= w.z_thr {
                w.kill(i);
            }
        }
        Ok(w)
    }

    fn kill(&mut self, i: usize) {
        self.dead[i] = true;
        self.x[i] = 0.0;
        self.z[i] = 0.0;
    }

    /// One Euler step with the two given standard normal increments.
    /// Returns the coordinates (if any) newly absorbed during this step.
    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, dt: f64, dw: [f64; 2]) -> [bool; 2] {
        let sqrt_dt = dt.sqrt();
        let mut newly = [false, false];
        match self.scheme {
            Scheme::EulerZ => {
                let drift = self.model.drift_slvp(self.z);
                let diff = self.model.diffusion_slvp(self.z);
                for i in 0..2 {
                    if self.dead[i] {
                        continue;
                    }
                    let mut z_next = self.z[i] + drift[i] * dt + diff[i] * sqrt_dt * dw[i];
                    if z_next < 0.0 {
                        z_next = 0.0;
                    }
                    self.z[i] = z_next;
                    if z_next <= self.z_thr {
                        newly[i] = true;
                    }
                }
                for i in 0..2 {
                    if newly[i] {
                        self.kill(i);
                    }
                }
                self.sync_x();
            }
            Scheme::EulerX => {
                let drift = self.drift_x();
                for i in 0..2 {
                    if self.dead[i] {
                        continue;
                    }
                    let x_next = self.x[i] + drift[i] * dt + sqrt_dt * dw[i];
                    self.x[i] = x_next;
                    if x_next <= self.x_thr[i] {
                        newly[i] = true;
                    }
                }
                for i in 0..2 {
                    if newly[i] {
                        self.kill(i);
                    }
                }
                self.sync_z();
            }
        }
        newly
    }

    /// Kolmogorov drift respecting absorbed coordinates: a live coordinate
    /// with a dead partner follows the single-axis dynamics exactly.
    fn drift_x(&self) -> [f64; 2] {
        let mut b = [0.0; 2];
        match (self.dead[0], self.dead[1]) {
            (false, false) => b = self.model.drift_slvkp_raw(self.x),
            (false, true) => b[0] = self.model.drift_h(self.x[0], Axis::One).unwrap(),
            (true, false) => b[1] = self.model.drift_h(self.x[1], Axis::Two).unwrap(),
            (true, true) => {}
        }
        b
    }

    fn sync_x(&mut self) {
        let p = self.model.params();
        for (i, axis) in [Axis::One, Axis::Two].into_iter().enumerate() {
            self.x[i] = if self.dead[i] {
                0.0
            } else {
                2.0 * (self.z[i] / p.gamma(axis)).sqrt()
            };
        }
    }

    fn sync_z(&mut self) {
        let p = self.model.params();
        for (i, axis) in [Axis::One, Axis::Two].into_iter().enumerate() {
            self.z[i] = if self.dead[i] {
                0.0
            } else {
                p.gamma(axis) * self.x[i] * self.x[i] / 4.0
            };
        }
    }

    fn norm(&self) -> f64 {
        match self.scheme {
            Scheme::EulerZ => self.z[0].abs().max(self.z[1].abs()),
            Scheme::EulerX => self.x[0].abs().max(self.x[1].abs()),
        }
    }

    fn all_dead(&self) -> bool {
        self.dead[0] && self.dead[1]
    }
}

/// One explicit Euler-Maruyama step of a scalar SDE; exposed for harness
/// processes and tests.
pub fn step_euler(state: f64, drift: f64, diffusion: f64, dt: f64, noise: f64) -> f64 {
    state + drift * dt + diffusion * dt.sqrt() * noise
}

/// Simulates one trajectory from `x0` (X coordinates), resolving all
/// stopping times or censoring them at `t_max`. After the boundary hit the
/// surviving coordinate continues as the single-axis dynamics until the
/// origin.
pub fn simulate_path(
    model: &KolmogorovModel,
    x0: [f64; 2],
    cfg: &SimConfig,
    path_index: u64,
) -> Result<PathRecord, SdeError> {
    cfg.validate()?;
    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let stride = (n_steps / 2048).max(1);
    let mut rng = cfg.path_rng(path_index);
    let mut walker = Walker::new(model, cfg, x0)?;
    let mut record = PathRecord {
        times: Vec::with_capacity(n_steps / stride + 2),
        states: Vec::with_capacity(n_steps / stride + 2),
        stops: StoppingTimes::default(),
        exit_axis: None,
    };
    let note_deaths = |w: &Walker, newly: [bool; 2], t: f64, rec: &mut PathRecord| {
        // newly[i] refers to coordinate i+1 dying: coordinate 2 dead => T1
        if newly[1] && rec.stops.t1.is_none() {
            rec.stops.t1 = Some(t);
        }
        if newly[0] && rec.stops.t2.is_none() {
            rec.stops.t2 = Some(t);
        }
        if rec.stops.t_boundary.is_none() && (newly[0] || newly[1]) {
            rec.stops.t_boundary = Some(t);
            rec.exit_axis = Some(if newly[1] && newly[0] {
                // both crossed within one step: attribute to the deeper one
                if w.z[0] <= w.z[1] {
                    ExitAxis::Axis2
                } else {
                    ExitAxis::Axis1
                }
            } else if newly[1] {
                ExitAxis::Axis1
            } else {
                ExitAxis::Axis2
            });
        }
        if w.all_dead() && rec.stops.t0.is_none() {
            rec.stops.t0 = Some(t);
            // reaching the origin closes the remaining half-axis hits
            if rec.stops.t1.is_none() {
                rec.stops.t1 = Some(t);
            }
            if rec.stops.t2.is_none() {
                rec.stops.t2 = Some(t);
            }
        }
    };

    // a start on the boundary resolves stopping times at t = 0
    if walker.dead[0] || walker.dead[1] {
        let dead = walker.dead;
        note_deaths(&walker, dead, 0.0, &mut record);
    }
    record.times.push(0.0);
    record.states.push(walker.x);

    for step in 1..=n_steps {
        let t = step as f64 * cfg.dt;
        let dw = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let newly = walker.step(cfg.dt, dw);
        if walker.norm() > BLOWUP_NORM {
            return Err(SdeError::BlowUp {
                t,
                norm: walker.norm(),
            });
        }
        note_deaths(&walker, newly, t, &mut record);
        if step % stride == 0 || walker.all_dead() {
            record.times.push(t);
            record.states.push(walker.x);
        }
        if walker.all_dead() {
            break;
        }
    }
    Ok(record)
}

/// Stopping-time summary of a batch of paths, simulated in parallel with
/// per-path streams. States are not stored.
pub fn batch_stops(
    model: &KolmogorovModel,
    x0: [f64; 2],
    cfg: &SimConfig,
) -> Result<Vec<(StoppingTimes, Option<ExitAxis>)>, SdeError> {
    cfg.validate()?;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let rec = simulate_lean(model, x0, cfg, p as u64)?;
            Ok(rec)
        })
        .collect()
}

/// Path run that tracks stopping times only.
fn simulate_lean(
    model: &KolmogorovModel,
    x0: [f64; 2],
    cfg: &SimConfig,
    path_index: u64,
) -> Result<(StoppingTimes, Option<ExitAxis>), SdeError> {
    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let mut rng = cfg.path_rng(path_index);
    let mut walker = Walker::new(model, cfg, x0)?;
    let mut stops = StoppingTimes::default();
    let mut exit_axis = None;
    let mut handle = |w: &Walker, newly: [bool; 2], t: f64| {
        if newly[1] && stops.t1.is_none() {
            stops.t1 = Some(t);
        }
        if newly[0] && stops.t2.is_none() {
            stops.t2 = Some(t);
        }
        if stops.t_boundary.is_none() && (newly[0] || newly[1]) {
            stops.t_boundary = Some(t);
            exit_axis = Some(if newly[1] && newly[0] {
                if w.z[0] <= w.z[1] {
                    ExitAxis::Axis2
                } else {
                    ExitAxis::Axis1
                }
            } else if newly[1] {
                ExitAxis::Axis1
            } else {
                ExitAxis::Axis2
            });
        }
        if w.all_dead() && stops.t0.is_none() {
            stops.t0 = Some(t);
            if stops.t1.is_none() {
                stops.t1 = Some(t);
            }
            if stops.t2.is_none() {
                stops.t2 = Some(t);
            }
        }
    };
    if walker.dead[0] || walker.dead[1] {
        let dead = walker.dead;
        handle(&walker, dead, 0.0);
    }
    for step in 1..=n_steps {
        if walker.all_dead() {
            break;
        }
        let t = step as f64 * cfg.dt;
        let dw = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let newly = walker.step(cfg.dt, dw);
        if walker.norm() > BLOWUP_NORM {
            return Err(SdeError::BlowUp {
                t,
                norm: walker.norm(),
            });
        }
        handle(&walker, newly, t);
    }
    Ok((stops, exit_axis))
}

/// Single-axis trajectory of the decoupled `H` dynamics started at `h0 > 0`,
/// absorbed at the origin; returns the absorption time or `None` (censored).
pub fn simulate_h_exit(
    model: &KolmogorovModel,
    axis: Axis,
    h0: f64,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<Option<f64>, SdeError> {
    if h0.is_nan() || h0 <= 0.0 {
        return Err(SdeError::InvalidStart { x1: h0, x2: h0 });
    }
    let p = model.params();
    let thr = 2.0 * (cfg.abs_threshold / p.gamma(axis)).sqrt();
    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let mut rng = cfg.path_rng(path_index);
    let sqrt_dt = cfg.dt.sqrt();
    let mut u = h0;
    for step in 1..=n_steps {
        let dw: f64 = rng.sample(StandardNormal);
        let drift = model.drift_h(u, axis).expect("alive state is positive");
        u += drift * cfg.dt + sqrt_dt * dw;
        if u <= thr {
            return Ok(Some(step as f64 * cfg.dt));
        }
        if u > BLOWUP_NORM {
            return Err(SdeError::BlowUp {
                t: step as f64 * cfg.dt,
                norm: u,
            });
        }
    }
    Ok(None)
}

/// Which stopping time a survival estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoppingKind {
    T0,
    TBoundary,
    T1,
    T2,
}

impl StoppingKind {
    pub fn pick(self, s: &StoppingTimes) -> Option<f64> {
        match self {
            StoppingKind::T0 => s.t0,
            StoppingKind::TBoundary => s.t_boundary,
            StoppingKind::T1 => s.t1,
            StoppingKind::T2 => s.t2,
        }
    }
}

/// Empirical survival function with binomial standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
}

impl SurvivalCurve {
    /// Builds the curve from absorption times (`None` = censored beyond the
    /// grid). Grid times must not exceed the simulation horizon.
    pub fn from_exit_times(exit_times: &[Option<f64>], t_grid: &[f64]) -> SurvivalCurve {
        let n = exit_times.len();
        let mut survival = Vec::with_capacity(t_grid.len());
        let mut stderr = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let alive = exit_times
                .iter()
                .filter(|e| e.is_none_or(|s| s > t))
                .count();
            let p = alive as f64 / n as f64;
            survival.push(p);
            stderr.push((p * (1.0 - p) / n as f64).sqrt());
        }
        SurvivalCurve {
            times: t_grid.to_vec(),
            survival,
            stderr,
            n_paths: n,
        }
    }
}

/// Estimates the survival function of one stopping time by Monte Carlo.
pub fn estimate_survival(
    model: &KolmogorovModel,
    x0: [f64; 2],
    stopping: StoppingKind,
    cfg: &SimConfig,
    t_grid: &[f64],
) -> Result<SurvivalCurve, SdeError> {
    let stops = batch_stops(model, x0, cfg)?;
    let exits: Vec<Option<f64>> = stops.iter().map(|(s, _)| stopping.pick(s)).collect();
    Ok(SurvivalCurve::from_exit_times(&exits, t_grid))
}

/// Weighted least-squares fit of `-log(survival)` against `t` over a window.
/// Weights are the inverse delta-method variances `n s / (1 - s)`.
pub fn fit_killing_rate(curve: &SurvivalCurve, window: (f64, f64)) -> Result<(f64, f64), SdeError> {
    let n = curve.n_paths as f64;
    let floor = 10.0 / n;
    let mut pts: Vec<(f64, f64, f64)> = Vec::new(); // (t, -ln s, weight)
    for (&t, &s) in curve.times.iter().zip(&curve.survival) {
        if t < window.0 || t > window.1 || s <= floor {
            continue;
        }
        let var = (1.0 - s).max(0.5 / n) / (n * s);
        pts.push((t, -s.ln(), 1.0 / var));
    }
    if pts.len() < 5 {
        return Err(SdeError::InsufficientTail {
            points: pts.len(),
            needed: 5,
        });
    }
    let wsum: f64 = pts.iter().map(|p| p.2).sum();
    let mt: f64 = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum;
    let my: f64 = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / wsum;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(SdeError::InsufficientTail {
            points: pts.len(),
            needed: 5,
        });
    }
    Ok((sxy / sxx, (1.0 / sxx).sqrt()))
}

/// Opponent process for the pathwise comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Opponent {
    /// Decoupled single-axis dynamics; dominates `X` under competition.
    H,
    /// Dynamics without the singular repulsion; dominates `X` in general.
    U,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CouplingReport {
    pub opponent: Opponent,
    pub n_paths: usize,
    /// Largest positive excursion of `X^i - opponent^i` seen while both
    /// processes were in the domain.
    pub max_excursion: f64,
    /// Discretization tolerance `5 sqrt(dt)` for the ordering.
    pub tol_cmp: f64,
}

/// Simulates `X` and the opponent with identical Brownian increments from
/// the same start and reports the worst ordering violation.
pub fn coupled_comparison(
    model: &KolmogorovModel,
    x0: [f64; 2],
    cfg: &SimConfig,
    opponent: Opponent,
) -> Result<CouplingReport, SdeError> {
    cfg.validate()?;
    if !(x0[0] > 0.0 && x0[1] > 0.0) {
        return Err(SdeError::InvalidStart {
            x1: x0[0],
            x2: x0[1],
        });
    }
    let p = model.params();
    let x_thr = [
        2.0 * (cfg.abs_threshold / p.gamma(Axis::One)).sqrt(),
        2.0 * (cfg.abs_threshold / p.gamma(Axis::Two)).sqrt(),
    ];
    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let sqrt_dt = cfg.dt.sqrt();
    let excursions: Result<Vec<f64>, SdeError> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = cfg.path_rng(path as u64);
            let mut x = x0;
            let mut o = x0;
            let mut worst = 0.0f64;
            for step in 1..=n_steps {
                let dw = [
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ];
                let bx = model.drift_slvkp_raw(x);
                let bo = match opponent {
                    Opponent::H => [
                        model.drift_h(o[0], Axis::One).unwrap(),
                        model.drift_h(o[1], Axis::Two).unwrap(),
                    ],
                    Opponent::U => model.drift_u(o),
                };
                for i in 0..2 {
                    x[i] += bx[i] * cfg.dt + sqrt_dt * dw[i];
                    o[i] += bo[i] * cfg.dt + sqrt_dt * dw[i];
                }
                let norm = x[0].abs().max(x[1].abs()).max(o[0].abs()).max(o[1].abs());
                if norm > BLOWUP_NORM {
                    return Err(SdeError::BlowUp {
                        t: step as f64 * cfg.dt,
                        norm,
                    });
                }
                let x_exited = x[0] <= x_thr[0] || x[1] <= x_thr[1];
                let o_exited = match opponent {
                    Opponent::H => o[0] <= x_thr[0] || o[1] <= x_thr[1],
                    Opponent::U => false,
                };
                if x_exited || o_exited {
                    break;
                }
                for i in 0..2 {
                    worst = worst.max(x[i] - o[i]);
                }
            }
            Ok(worst)
        })
        .collect();
    let max_excursion = excursions?.into_iter().fold(0.0, f64::max);
    Ok(CouplingReport {
        opponent,
        n_paths: cfg.n_paths,
        max_excursion,
        tol_cmp: 5.0 * cfg.dt.sqrt(),
    })
}

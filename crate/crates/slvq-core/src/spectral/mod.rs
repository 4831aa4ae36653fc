//! Spectral pipeline: discretization of the transformed operator
//! `Ltilde = 1/2 laplacian - 1/2 G` on truncated 1D/2D domains with
//! Dirichlet boundary, smallest eigenpairs, QSD densities and the evolution
//! of the conditioned law.
//!
//! All densities are reported in the diffusion picture (values of `d nu/dx`
//! at grid nodes); the Schrodinger gauge `psi = e^{-V} eta` is internal.

mod evolve;

pub use evolve::{
    conditioned_tv_trajectory, evolve_conditioned_law, fit_log_decay, mollified_point, tv_distance,
    ConditionedLawTrajectory, EvolveOptions,
};

use crate::linalg::{self, BandedCholesky, CsrMatrix, LinalgError};
use crate::model::{Axis, AxisModel, KolmogorovModel, ModelError};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;
/// Relative shift of lambda1 under domain doubling / eps halving above which
/// the truncation is flagged unstable.
pub const TRUNCATION_FLAG_TOL: f64 = 5e-3;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },
    #[error(transparent)]
    Eigen(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("truncated domain is unstable: lambda1 moved by {rel_shift:.3e} (tol {tol:.1e})")]
    TruncationUnstable { rel_shift: f64, tol: f64 },
    #[error("time step unstable: negative mass {mass:.3e} beyond -1e-10")]
    StepUnstable { mass: f64 },
}

/// Scalar potential data needed to assemble the transformed operator:
/// the Schrodinger term `G` and the potential `V` for gauge conversions.
pub trait ScalarPotential: Sync {
    fn dim(&self) -> usize;
    fn v(&self, x: [f64; 2]) -> f64;
    fn g(&self, x: [f64; 2]) -> f64;
}

impl ScalarPotential for KolmogorovModel {
    fn dim(&self) -> usize {
        2
    }
    fn v(&self, x: [f64; 2]) -> f64 {
        KolmogorovModel::v(self, x).expect("grid node inside the open quadrant")
    }
    fn g(&self, x: [f64; 2]) -> f64 {
        KolmogorovModel::g(self, x).expect("grid node inside the open quadrant")
    }
}

/// 1D view of one axis of the model (the decoupled `H` dynamics).
impl ScalarPotential for AxisModel {
    fn dim(&self) -> usize {
        1
    }
    fn v(&self, x: [f64; 2]) -> f64 {
        AxisModel::v(self, x[0])
    }
    fn g(&self, x: [f64; 2]) -> f64 {
        AxisModel::g(self, x[0])
    }
}

/// Per-axis truncation: interior nodes `eps_lo + (i+1) h`, `h = (l_hi - eps_lo)/(n+1)`,
/// with Dirichlet rows eliminated at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisSpec {
    pub eps_lo: f64,
    pub l_hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(eps_lo: f64, l_hi: f64, n: usize) -> Result<Self, SpectralError> {
        if eps_lo.is_nan() || l_hi.is_nan() || eps_lo < 0.0 || l_hi <= eps_lo || n < 8 {
            return Err(SpectralError::InvalidGrid {
                reason: format!("need 0 <= eps_lo < l_hi and n >= 8, got ({eps_lo}, {l_hi}, {n})"),
            });
        }
        Ok(AxisSpec { eps_lo, l_hi, n })
    }

    pub fn h(&self) -> f64 {
        (self.l_hi - self.eps_lo) / (self.n as f64 + 1.0)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.eps_lo + (i as f64 + 1.0) * self.h()
    }
}

/// Uniform tensor grid of dimension 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    axes: Vec<AxisSpec>,
}

impl Grid {
    pub fn new_1d(spec: AxisSpec) -> Grid {
        Grid { axes: vec![spec] }
    }

    pub fn new_2d(spec1: AxisSpec, spec2: AxisSpec) -> Grid {
        Grid {
            axes: vec![spec1, spec2],
        }
    }

    /// Square 2D grid with the same spec on both axes.
    pub fn square(spec: AxisSpec) -> Grid {
        Grid::new_2d(spec, spec)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, d: usize) -> &AxisSpec {
        &self.axes[d]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.h()).product()
    }

    /// Coordinates of a flat node index (row-major; unused axis is 0).
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        match self.axes.len() {
            1 => [self.axes[0].node(flat), 0.0],
            2 => {
                let n2 = self.axes[1].n;
                [self.axes[0].node(flat / n2), self.axes[1].node(flat % n2)]
            }
            _ => unreachable!("grids are 1D or 2D"),
        }
    }

    /// Flat index of the node nearest to `x`, clamping outside points into
    /// the edge cells.
    pub fn nearest_node(&self, x: [f64; 2]) -> usize {
        let clamp_axis = |a: &AxisSpec, v: f64| -> usize {
            let i = ((v - a.eps_lo) / a.h() - 1.0).round();
            i.clamp(0.0, a.n as f64 - 1.0) as usize
        };
        match self.axes.len() {
            1 => clamp_axis(&self.axes[0], x[0]),
            2 => {
                let i1 = clamp_axis(&self.axes[0], x[0]);
                let i2 = clamp_axis(&self.axes[1], x[1]);
                i1 * self.axes[1].n + i2
            }
            _ => unreachable!(),
        }
    }
}

/// Assembles the sparse symmetric matrix `A ~ -Ltilde`: second differences
/// with Dirichlet rows eliminated plus `G/2` on the diagonal.
pub fn build_operator(field: &dyn ScalarPotential, grid: &Grid) -> CsrMatrix {
    assert_eq!(field.dim(), grid.dim(), "field and grid dimension mismatch");
    match grid.dim() {
        1 => {
            let a = grid.axis(0);
            let inv_h2 = 1.0 / (a.h() * a.h());
            let n = a.n;
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(3);
                if i > 0 {
                    row.push((i - 1, -0.5 * inv_h2));
                }
                row.push((i, inv_h2 + 0.5 * field.g([a.node(i), 0.0])));
                if i + 1 < n {
                    row.push((i + 1, -0.5 * inv_h2));
                }
                rows.push(row);
            }
            CsrMatrix::from_rows(rows)
        }
        2 => {
            let (a1, a2) = (grid.axis(0), grid.axis(1));
            let (inv_h1, inv_h2) = (1.0 / (a1.h() * a1.h()), 1.0 / (a2.h() * a2.h()));
            let (n1, n2) = (a1.n, a2.n);
            let mut rows = Vec::with_capacity(n1 * n2);
            for i1 in 0..n1 {
                let x1 = a1.node(i1);
                for i2 in 0..n2 {
                    let x2 = a2.node(i2);
                    let idx = i1 * n2 + i2;
                    let mut row = Vec::with_capacity(5);
                    if i1 > 0 {
                        row.push((idx - n2, -0.5 * inv_h1));
                    }
                    if i2 > 0 {
                        row.push((idx - 1, -0.5 * inv_h2));
                    }
                    row.push((idx, inv_h1 + inv_h2 + 0.5 * field.g([x1, x2])));
                    if i2 + 1 < n2 {
                        row.push((idx + 1, -0.5 * inv_h2));
                    }
                    if i1 + 1 < n1 {
                        row.push((idx + n2, -0.5 * inv_h1));
                    }
                    rows.push(row);
                }
            }
            CsrMatrix::from_rows(rows)
        }
        _ => unreachable!(),
    }
}

pub use crate::linalg::smallest_eigenpairs;

/// Truncation-sensitivity check attached to a solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationCheck {
    pub lambda1_base: f64,
    pub lambda1_domain_doubled: f64,
    pub lambda1_eps_halved: f64,
    pub rel_shift: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveOptions {
    pub tol_eig: f64,
    /// Re-solve with doubled upper truncation and halved lower truncation
    /// (same spacing) and flag lambda1 shifts above [`TRUNCATION_FLAG_TOL`].
    pub check_truncation: bool,
    /// Return an error (rather than only flagging) when unstable.
    pub fail_on_unstable: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_eig: DEFAULT_EIG_TOL,
            check_truncation: false,
            fail_on_unstable: false,
        }
    }
}

/// Eigenpairs and derived QSD data on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub grid: Grid,
    /// Ascending eigenvalues of `-Ltilde` (killing rates).
    pub lambda: Vec<f64>,
    /// Ground state of the Schrodinger operator, positive, L2(dx)-normalized.
    pub psi1: Vec<f64>,
    /// Ground state of the diffusion semigroup, `eta1 = e^V psi1`.
    pub eta1: Vec<f64>,
    /// Discrete integral of eta1 against mu: `sum psi1 e^{-V} h^d`.
    pub mass_eta1_mu: f64,
    /// QSD density `d nu1/dx` at nodes, normalized to `sum nu h^d = 1`.
    pub qsd_density: Vec<f64>,
    /// Eigen residual norms.
    pub residuals: Vec<f64>,
    pub truncation: Option<TruncationCheck>,
}

fn lambda1_on(field: &dyn ScalarPotential, grid: &Grid, tol: f64) -> Result<f64, SpectralError> {
    let a = build_operator(field, grid);
    let eig = linalg::smallest_eigenpairs(&a, 1, tol)?;
    Ok(eig.values[0])
}

/// Shared solve: operator, eigenpairs, positivity polish of the ground
/// state, gauge conversions.
pub fn solve_on_grid(
    field: &dyn ScalarPotential,
    grid: &Grid,
    k: usize,
    opts: &SolveOptions,
) -> Result<SpectralResult, SpectralError> {
    let a = build_operator(field, grid);
    let mut eig = linalg::smallest_eigenpairs(&a, k, opts.tol_eig)?;

    // Ground-state positivity: the resolvent of an M-matrix is entrywise
    // positive, so inverse iteration from |psi| keeps strict positivity;
    // two polish steps push the tail sign noise out.
    let lambda1 = eig.values[0];
    let gap = eig.values.get(1).copied().unwrap_or(lambda1.abs() * 2.0) - lambda1;
    let sigma = lambda1 - 0.1 * gap.abs().max(1e-8 * lambda1.abs().max(1.0));
    {
        let psi = &mut eig.vectors[0];
        for x in psi.iter_mut() {
            *x = x.abs();
        }
        let band_ok = BandedCholesky::band_bytes(a.dim(), a.half_bandwidth()) <= (320usize << 20);
        if band_ok {
            if let Ok(factor) = BandedCholesky::factor(&a, -sigma) {
                for _ in 0..2 {
                    factor.solve_in_place(psi);
                    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for x in psi.iter_mut() {
                        *x /= norm;
                    }
                }
            }
        }
        // underflow guard for the far tail
        for x in psi.iter_mut() {
            if *x <= 0.0 {
                *x = f64::MIN_POSITIVE;
            }
        }
    }

    // Rayleigh quotient of the polished vector
    let n = grid.len();
    let mut av = vec![0.0; n];
    a.matvec(&eig.vectors[0], &mut av);
    let lambda1 = eig.vectors[0]
        .iter()
        .zip(&av)
        .map(|(x, y)| x * y)
        .sum::<f64>();
    eig.values[0] = lambda1;
    eig.residuals[0] = av
        .iter()
        .zip(&eig.vectors[0])
        .map(|(y, x)| (y - lambda1 * x).powi(2))
        .sum::<f64>()
        .sqrt();

    let vol = grid.cell_volume();
    let scale = 1.0 / (eig.vectors[0].iter().map(|x| x * x).sum::<f64>() * vol).sqrt();
    let psi1: Vec<f64> = eig.vectors[0].iter().map(|x| x * scale).collect();

    let v_nodes: Vec<f64> = (0..n).map(|i| field.v(grid.coords(i))).collect();
    let eta1: Vec<f64> = psi1
        .iter()
        .zip(&v_nodes)
        .map(|(&p, &v)| (v + p.ln()).min(700.0).exp())
        .collect();
    let weights: Vec<f64> = psi1
        .iter()
        .zip(&v_nodes)
        .map(|(&p, &v)| p * (-v).exp())
        .collect();
    let mass_eta1_mu = weights.iter().sum::<f64>() * vol;
    let qsd_density: Vec<f64> = weights.iter().map(|w| w / mass_eta1_mu).collect();

    let truncation = if opts.check_truncation {
        let wider: Vec<AxisSpec> = (0..grid.dim())
            .map(|d| {
                let ax = grid.axis(d);
                let h = ax.h();
                let l2 = ax.eps_lo + 2.0 * (ax.l_hi - ax.eps_lo);
                let n2 = ((l2 - ax.eps_lo) / h).round() as usize - 1;
                AxisSpec {
                    eps_lo: ax.eps_lo,
                    l_hi: ax.eps_lo + (n2 as f64 + 1.0) * h,
                    n: n2,
                }
            })
            .collect();
        let lam_wide = lambda1_on(field, &Grid { axes: wider }, opts.tol_eig)?;
        let lam_low = if grid.axis(0).eps_lo > 0.0 {
            let lower: Vec<AxisSpec> = (0..grid.dim())
                .map(|d| {
                    let ax = grid.axis(d);
                    let h = ax.h();
                    let eps2 = ax.eps_lo / 2.0;
                    let n2 = ((ax.l_hi - eps2) / h).round() as usize - 1;
                    AxisSpec {
                        eps_lo: ax.l_hi - (n2 as f64 + 1.0) * h,
                        l_hi: ax.l_hi,
                        n: n2,
                    }
                })
                .collect();
            lambda1_on(field, &Grid { axes: lower }, opts.tol_eig)?
        } else {
            lambda1
        };
        let rel_shift = (lam_wide - lambda1).abs().max((lam_low - lambda1).abs())
            / lambda1.abs().max(f64::MIN_POSITIVE);
        let check = TruncationCheck {
            lambda1_base: lambda1,
            lambda1_domain_doubled: lam_wide,
            lambda1_eps_halved: lam_low,
            rel_shift,
            unstable: rel_shift > TRUNCATION_FLAG_TOL,
        };
        if check.unstable && opts.fail_on_unstable {
            return Err(SpectralError::TruncationUnstable {
                rel_shift,
                tol: TRUNCATION_FLAG_TOL,
            });
        }
        Some(check)
    } else {
        None
    };

    Ok(SpectralResult {
        grid: grid.clone(),
        lambda: eig.values,
        psi1,
        eta1,
        mass_eta1_mu,
        qsd_density,
        residuals: eig.residuals,
        truncation,
    })
}

fn require_positive_eps(grid: &Grid) -> Result<(), SpectralError> {
    for d in 0..grid.dim() {
        if grid.axis(d).eps_lo <= 0.0 {
            return Err(SpectralError::InvalidGrid {
                reason: "model grids need eps_lo > 0 (nodes off the axes)".into(),
            });
        }
    }
    Ok(())
}

/// QSD of the two-type interior problem (killing at the quadrant boundary).
pub fn solve_qsd_2d(
    model: &KolmogorovModel,
    grid: &Grid,
    k: usize,
    opts: &SolveOptions,
) -> Result<SpectralResult, SpectralError> {
    if grid.dim() != 2 {
        return Err(SpectralError::InvalidGrid {
            reason: "solve_qsd_2d needs a 2D grid".into(),
        });
    }
    require_positive_eps(grid)?;
    solve_on_grid(model, grid, k, opts)
}

/// QSD of the single-axis logistic Feller dynamics (killing at the origin).
pub fn solve_qsd_1d(
    model: &KolmogorovModel,
    axis: Axis,
    grid: &Grid,
    k: usize,
    opts: &SolveOptions,
) -> Result<SpectralResult, SpectralError> {
    if grid.dim() != 1 {
        return Err(SpectralError::InvalidGrid {
            reason: "solve_qsd_1d needs a 1D grid".into(),
        });
    }
    require_positive_eps(grid)?;
    let axis_model = model.axis_model(axis);
    solve_on_grid(&axis_model, grid, k, opts)
}

/// Upper truncation for a model: the smallest radius at which the density
/// weight `e^-V` has fallen below 1e-12 of its peak along both the axes and
/// the diagonal, with a 15% safety margin (floor 8).
pub fn auto_upper_truncation(model: &KolmogorovModel) -> f64 {
    let drop = 27.7; // ln(1e12)
    let scan = |f: &dyn Fn(f64) -> f64| -> f64 {
        let mut vmin = f64::INFINITY;
        let mut u = 0.05;
        while u < 400.0 {
            let val = f(u);
            vmin = vmin.min(val);
            if val - vmin > drop {
                return u;
            }
            u *= 1.02;
        }
        400.0
    };
    let mut l: f64 = 0.0;
    for axis in [Axis::One, Axis::Two] {
        let am = model.axis_model(axis);
        l = l.max(scan(&|u| am.v(u)));
    }
    l = l.max(scan(&|u| model.v([u, u]).unwrap_or(f64::INFINITY)));
    (l * 1.15).max(8.0)
}

/// Default grid spec for a model axis: `eps_lo = 1e-3`, automatic upper
/// truncation, `n` interior nodes.
pub fn auto_axis_spec(model: &KolmogorovModel, n: usize) -> AxisSpec {
    AxisSpec {
        eps_lo: 1e-3,
        l_hi: auto_upper_truncation(model),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DirichletBox;
    use crate::model::{validate_params, RawParams};
    use std::f64::consts::PI;

    fn harness_grid(n: usize) -> Grid {
        Grid::new_1d(AxisSpec::new(0.0, PI, n).unwrap())
    }

    #[test]
    fn operator_stencil_entries() {
        let field = DirichletBox::new(1, PI);
        let grid = harness_grid(8);
        let a = build_operator(&field, &grid);
        let h = PI / 9.0;
        assert!((a.get(3, 3) - 1.0 / (h * h)).abs() < 1e-12);
        assert!((a.get(3, 4) + 0.5 / (h * h)).abs() < 1e-12);
        assert_eq!(a.symmetry_error(), 0.0);
    }

    #[test]
    fn operator_stencil_n3_values() {
        // h = pi/4: diagonal 16/pi^2, off-diagonal -8/pi^2
        let field = DirichletBox::new(1, PI);
        let grid = Grid::new_1d(AxisSpec {
            eps_lo: 0.0,
            l_hi: PI,
            n: 3,
        });
        let a = build_operator(&field, &grid);
        assert!((a.get(1, 1) - 16.0 / (PI * PI)).abs() < 1e-12);
        assert!((a.get(1, 0) + 8.0 / (PI * PI)).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_1d_eigenvalues_converge() {
        let field = DirichletBox::new(1, PI);
        for (n, tol) in [(100usize, 2e-4), (400, 2e-5)] {
            let res = solve_on_grid(&field, &harness_grid(n), 2, &SolveOptions::default()).unwrap();
            assert!((res.lambda[0] - 0.5).abs() < tol, "{}", res.lambda[0]);
            assert!((res.lambda[1] - 2.0).abs() < 8.0 * tol, "{}", res.lambda[1]);
        }
    }

    #[test]
    fn dirichlet_grid_convergence_is_second_order() {
        let field = DirichletBox::new(1, PI);
        let err = |n: usize| {
            let res = solve_on_grid(&field, &harness_grid(n), 1, &SolveOptions::default()).unwrap();
            (res.lambda[0] - 0.5).abs()
        };
        let ratio = err(50) / err(100);
        assert!(
            (ratio - 4.0).abs() < 0.5,
            "expected ~4x error drop, got {ratio}"
        );
    }

    #[test]
    fn dirichlet_2d_ground_state() {
        let field = DirichletBox::new(2, PI);
        let grid = Grid::square(AxisSpec::new(0.0, PI, 40).unwrap());
        let res = solve_on_grid(&field, &grid, 1, &SolveOptions::default()).unwrap();
        assert!((res.lambda[0] - 1.0).abs() < 2e-3, "{}", res.lambda[0]);
        assert!(res.psi1.iter().all(|&x| x > 0.0));
        // V = 0: qsd density equals psi / (sum psi h^2)
        let vol = grid.cell_volume();
        let total: f64 = res.qsd_density.iter().sum::<f64>() * vol;
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn qsd_1d_all_ones_axis() {
        let model = KolmogorovModel::new(validate_params(&RawParams::independent_ones()).unwrap());
        let grid = Grid::new_1d(AxisSpec::new(1e-3, 8.0, 600).unwrap());
        let res = solve_qsd_1d(&model, Axis::One, &grid, 2, &SolveOptions::default()).unwrap();
        assert!(res.lambda[0] > 0.0);
        assert!(res.lambda[1] > res.lambda[0]);
        assert!(res.psi1.iter().all(|&x| x > 0.0));
        let vol = grid.cell_volume();
        let total: f64 = res.qsd_density.iter().sum::<f64>() * vol;
        assert!((total - 1.0).abs() < 1e-10);
        // nu1 values equal psi e^{-V} / normalizer
        let x_mid = grid.coords(300);
        let am = model.axis_model(Axis::One);
        let w = res.psi1[300] * (-am.v(x_mid[0])).exp();
        assert!(
            (res.qsd_density[300] - w / res.mass_eta1_mu).abs()
                <= 1e-12 * res.qsd_density[300].abs().max(1.0)
        );
        // symmetric axes give identical rates
        let res2 = solve_qsd_1d(&model, Axis::Two, &grid, 1, &SolveOptions::default()).unwrap();
        assert!((res.lambda[0] - res2.lambda[0]).abs() < 1e-10);
    }

    #[test]
    fn detailed_balance_of_discrete_generator() {
        // mu_i q_ij == mu_j q_ji for the mu-weighted generator induced by A
        let model = KolmogorovModel::new(validate_params(&RawParams::independent_ones()).unwrap());
        let grid = Grid::square(AxisSpec::new(0.5, 4.0, 12).unwrap());
        let a = build_operator(&model, &grid);
        for i in 0..grid.len() {
            let xi = grid.coords(i);
            let vi = ScalarPotential::v(&model, xi);
            for (j, aij) in a.row(i) {
                if j == i {
                    continue;
                }
                let xj = grid.coords(j);
                let vj = ScalarPotential::v(&model, xj);
                // q_ij = -a_ij e^{v_i - v_j}; mu_i = e^{-2 v_i}
                let lhs = (-2.0 * vi).exp() * (-aij) * (vi - vj).exp();
                let rhs = (-2.0 * vj).exp() * (-a.get(j, i)) * (vj - vi).exp();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300),
                    "detailed balance off at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn truncation_flag_fires_on_tight_domain() {
        let model = KolmogorovModel::new(validate_params(&RawParams::independent_ones()).unwrap());
        let opts = SolveOptions {
            check_truncation: true,
            ..SolveOptions::default()
        };
        // comfortable domain: stable
        let good = solve_qsd_1d(
            &model,
            Axis::One,
            &Grid::new_1d(AxisSpec::new(1e-3, 8.0, 400).unwrap()),
            1,
            &opts,
        )
        .unwrap();
        assert!(!good.truncation.unwrap().unstable);
        // domain cut through the bulk of the QSD: unstable
        let bad = solve_qsd_1d(
            &model,
            Axis::One,
            &Grid::new_1d(AxisSpec::new(1e-3, 2.2, 200).unwrap()),
            1,
            &opts,
        )
        .unwrap();
        assert!(bad.truncation.unwrap().unstable);
        let strict = SolveOptions {
            check_truncation: true,
            fail_on_unstable: true,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_qsd_1d(
                &model,
                Axis::One,
                &Grid::new_1d(AxisSpec::new(1e-3, 2.2, 200).unwrap()),
                1,
                &strict,
            ),
            Err(SpectralError::TruncationUnstable { .. })
        ));
    }

    #[test]
    fn auto_truncation_all_ones_is_about_eight() {
        let model = KolmogorovModel::new(validate_params(&RawParams::independent_ones()).unwrap());
        let l = auto_upper_truncation(&model);
        assert!((6.0..10.0).contains(&l), "L = {l}");
    }

    #[test]
    fn model_grid_requires_positive_eps() {
        let model = KolmogorovModel::new(validate_params(&RawParams::independent_ones()).unwrap());
        let grid = Grid::new_1d(AxisSpec::new(0.0, 8.0, 100).unwrap());
        assert!(matches!(
            solve_qsd_1d(&model, Axis::One, &grid, 1, &SolveOptions::default()),
            Err(SpectralError::InvalidGrid { .. })
        ));
    }
}

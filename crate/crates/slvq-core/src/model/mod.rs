//! Model parameters, coordinate changes and closed-form scalar fields.
//!
//! The two-type population process `Z` lives in the closed quadrant and
//! solves
//!
//! ```text
//! dZ1 = sqrt(gamma1 Z1) dB1 + (r1 Z1 - c11 Z1^2 - c12 Z1 Z2) dt
//! dZ2 = sqrt(gamma2 Z2) dB2 + (r2 Z2 - c21 Z1 Z2 - c22 Z2^2) dt
//! ```
//!
//! Under the balance condition `c12 gamma2 = c21 gamma1` the rescaled
//! process `X^i = 2 sqrt(Z^i / gamma_i)` is a Kolmogorov diffusion
//! `dX = dB - grad V(X) dt` with the explicit potential `V` implemented
//! here, together with everything derived from it: `grad V`, `laplacian V`,
//! the Schrodinger term `G = |grad V|^2 - laplacian V`, the degree-4
//! polynomial `Q` of the reference measure `mu = e^{-2V} dx`, and the drifts
//! of the auxiliary processes `H` (decoupled single-axis dynamics) and `U`
//! (dynamics without the singular repulsion term) used in comparison
//! arguments.

mod diagnostics;

pub use diagnostics::{
    hypothesis_diagnostics, DiagnosticsConfig, HypothesisReport, SeriesCheck, ShellEstimate,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance of the balance check `|c12 g2 - c21 g1| <= tol * scale`.
pub const BALANCE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("positivity violation: {name} = {value} must be strictly positive")]
    PositivityViolation { name: &'static str, value: f64 },
    #[error("balance violation: c12*gamma2 = {lhs} but c21*gamma1 = {rhs}")]
    BalanceViolation { lhs: f64, rhs: f64 },
    #[error("sign mismatch: c12 = {c12} and c21 = {c21} have opposite signs")]
    SignMismatch { c12: f64, c21: f64 },
    #[error("strong cooperation: alpha < 0 with c11*c22 - c12*c21 = {det} <= 0, no weak cooperation bound")]
    StrongCooperation { det: f64 },
    #[error("negative input: component {index} is {value}")]
    NegativeInput { index: usize, value: f64 },
    #[error("domain error: point ({x1}, {x2}) is outside the open quadrant")]
    DomainError { x1: f64, x2: f64 },
    #[error("sampling budget exceeded: {requested} point evaluations requested, cap is {cap}")]
    SamplingBudgetExceeded { requested: u64, cap: u64 },
}

/// The eight raw ecological coefficients as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub r1: f64,
    pub r2: f64,
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
}

impl RawParams {
    /// All coefficients equal to one except the cross terms.
    pub fn all_ones_with_cross(c12: f64, c21: f64) -> Self {
        RawParams {
            gamma1: 1.0,
            gamma2: 1.0,
            r1: 1.0,
            r2: 1.0,
            c11: 1.0,
            c12,
            c21,
            c22: 1.0,
        }
    }

    /// The decoupled reference set: every coefficient 1, no interaction.
    pub fn independent_ones() -> Self {
        Self::all_ones_with_cross(0.0, 0.0)
    }
}

/// Interaction regime recorded at validation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `c12, c21 > 0`: each type suppresses the other.
    Competition,
    /// `alpha < 0` with `c11 c22 - c12 c21 > 0`: mutual benefit, weak enough
    /// that the quartic Lyapunov form stays positive.
    Cooperative,
    /// `c12 = c21 = 0`: the two axes evolve independently.
    Independent,
}

/// Coordinate axis of the two-type system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    One,
    Two,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::One => 0,
            Axis::Two => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::One => Axis::Two,
            Axis::Two => Axis::One,
        }
    }
}

/// Validated parameter set. Construction goes through [`validate_params`],
/// which normalizes the cross coefficients so that `c12 gamma2` and
/// `c21 gamma1` agree with the stored `alpha = c12 gamma2 / 16` to rounding
/// error; every downstream evaluator uses `alpha` for the cross terms so the
/// assembled operators stay exactly symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LVParams {
    gamma1: f64,
    gamma2: f64,
    r1: f64,
    r2: f64,
    c11: f64,
    c12: f64,
    c21: f64,
    c22: f64,
    alpha: f64,
    regime: Regime,
}

impl LVParams {
    pub fn gamma(&self, axis: Axis) -> f64 {
        match axis {
            Axis::One => self.gamma1,
            Axis::Two => self.gamma2,
        }
    }

    pub fn r(&self, axis: Axis) -> f64 {
        match axis {
            Axis::One => self.r1,
            Axis::Two => self.r2,
        }
    }

    /// Intra-specific coefficient `c_ii`.
    pub fn c_self(&self, axis: Axis) -> f64 {
        match axis {
            Axis::One => self.c11,
            Axis::Two => self.c22,
        }
    }

    pub fn c12(&self) -> f64 {
        self.c12
    }

    pub fn c21(&self) -> f64 {
        self.c21
    }

    /// `alpha = c12 gamma2 / 16 = c21 gamma1 / 16`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            r1: self.r1,
            r2: self.r2,
            c11: self.c11,
            c12: self.c12,
            c21: self.c21,
            c22: self.c22,
        }
    }
}

/// Validates the eight raw coefficients and returns the normalized parameter
/// set with its regime tag.
pub fn validate_params(raw: &RawParams) -> Result<LVParams, ModelError> {
    let positives = [
        ("gamma1", raw.gamma1),
        ("gamma2", raw.gamma2),
        ("r1", raw.r1),
        ("r2", raw.r2),
        ("c11", raw.c11),
        ("c22", raw.c22),
    ];
    for (name, value) in positives {
        if value.is_nan() || value <= 0.0 || !value.is_finite() {
            return Err(ModelError::PositivityViolation { name, value });
        }
    }
    if !raw.c12.is_finite() || !raw.c21.is_finite() {
        return Err(ModelError::SignMismatch {
            c12: raw.c12,
            c21: raw.c21,
        });
    }
    if raw.c12 * raw.c21 < 0.0 {
        return Err(ModelError::SignMismatch {
            c12: raw.c12,
            c21: raw.c21,
        });
    }
    let lhs = raw.c12 * raw.gamma2;
    let rhs = raw.c21 * raw.gamma1;
    if (lhs - rhs).abs() > BALANCE_REL_TOL * lhs.abs().max(1.0) {
        return Err(ModelError::BalanceViolation { lhs, rhs });
    }

    // Normalize: alpha is the mean of the two nearly equal products, and the
    // stored cross coefficients are re-derived from it.
    let alpha = (lhs + rhs) / 32.0;
    let (c12, c21) = if alpha == 0.0 {
        (0.0, 0.0)
    } else {
        (16.0 * alpha / raw.gamma2, 16.0 * alpha / raw.gamma1)
    };

    let det = raw.c11 * raw.c22 - c12 * c21;
    if alpha < 0.0 && det <= 0.0 {
        return Err(ModelError::StrongCooperation { det });
    }

    let regime = if alpha > 0.0 {
        Regime::Competition
    } else if alpha < 0.0 {
        Regime::Cooperative
    } else {
        Regime::Independent
    };

    Ok(LVParams {
        gamma1: raw.gamma1,
        gamma2: raw.gamma2,
        r1: raw.r1,
        r2: raw.r2,
        c11: raw.c11,
        c12,
        c21,
        c22: raw.c22,
        alpha,
        regime,
    })
}

/// `x^i = 2 sqrt(z^i / gamma_i)`: population sizes to Kolmogorov coordinates.
pub fn z_to_x(z: [f64; 2], p: &LVParams) -> Result<[f64; 2], ModelError> {
    for (index, &value) in z.iter().enumerate() {
        if value < 0.0 {
            return Err(ModelError::NegativeInput { index, value });
        }
    }
    Ok([
        2.0 * (z[0] / p.gamma1).sqrt(),
        2.0 * (z[1] / p.gamma2).sqrt(),
    ])
}

/// `z^i = gamma_i (x^i)^2 / 4`: inverse of [`z_to_x`].
pub fn x_to_z(x: [f64; 2], p: &LVParams) -> Result<[f64; 2], ModelError> {
    for (index, &value) in x.iter().enumerate() {
        if value < 0.0 {
            return Err(ModelError::NegativeInput { index, value });
        }
    }
    Ok([p.gamma1 * x[0] * x[0] / 4.0, p.gamma2 * x[1] * x[1] / 4.0])
}

/// Quartic Lyapunov form `q(u, v) = c11 g1 u^2 + c22 g2 v^2 + 32 alpha u v`
/// evaluated at squared coordinates. Positive on the open quadrant exactly
/// when competition holds or the weak-cooperation determinant is positive.
pub fn quartic_q(u: f64, v: f64, p: &LVParams) -> f64 {
    p.c11 * p.gamma1 * u * u + p.c22 * p.gamma2 * v * v + 32.0 * p.alpha * u * v
}

/// Callable bundle of all closed-form fields of the Kolmogorov picture.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KolmogorovModel {
    params: LVParams,
}

impl KolmogorovModel {
    pub fn new(params: LVParams) -> Self {
        KolmogorovModel { params }
    }

    pub fn params(&self) -> &LVParams {
        &self.params
    }

    fn check_interior(&self, x: [f64; 2]) -> Result<(), ModelError> {
        if x[0] > 0.0 && x[1] > 0.0 && x[0].is_finite() && x[1].is_finite() {
            Ok(())
        } else {
            Err(ModelError::DomainError { x1: x[0], x2: x[1] })
        }
    }

    /// Potential of the gradient drift:
    /// `V = 1/2 sum_i (log x^i + c_ii g_i (x^i)^4/16 - r_i (x^i)^2/2) + alpha (x^1 x^2)^2`.
    pub fn v(&self, x: [f64; 2]) -> Result<f64, ModelError> {
        self.check_interior(x)?;
        Ok(self.v_raw(x))
    }

    pub(crate) fn v_raw(&self, x: [f64; 2]) -> f64 {
        let p = &self.params;
        let mut v = 0.0;
        for axis in [Axis::One, Axis::Two] {
            let u = x[axis.index()];
            let u2 = u * u;
            v += 0.5
                * (u.ln() + p.c_self(axis) * p.gamma(axis) * u2 * u2 / 16.0 - p.r(axis) * u2 / 2.0);
        }
        v + p.alpha * (x[0] * x[0]) * (x[1] * x[1])
    }

    pub fn grad_v(&self, x: [f64; 2]) -> Result<[f64; 2], ModelError> {
        self.check_interior(x)?;
        Ok(self.grad_v_raw(x))
    }

    pub(crate) fn grad_v_raw(&self, x: [f64; 2]) -> [f64; 2] {
        let p = &self.params;
        let mut g = [0.0; 2];
        for axis in [Axis::One, Axis::Two] {
            let i = axis.index();
            let u = x[i];
            let w = x[axis.other().index()];
            g[i] = 0.5 / u + p.c_self(axis) * p.gamma(axis) * u * u * u / 8.0 - p.r(axis) * u / 2.0
                + 2.0 * p.alpha * u * w * w;
        }
        g
    }

    pub fn laplacian_v(&self, x: [f64; 2]) -> Result<f64, ModelError> {
        self.check_interior(x)?;
        Ok(self.laplacian_v_raw(x))
    }

    pub(crate) fn laplacian_v_raw(&self, x: [f64; 2]) -> f64 {
        let p = &self.params;
        let mut lap = 0.0;
        for axis in [Axis::One, Axis::Two] {
            let u = x[axis.index()];
            let w = x[axis.other().index()];
            lap += -0.5 / (u * u) + 3.0 * p.c_self(axis) * p.gamma(axis) * u * u / 8.0
                - p.r(axis) / 2.0
                + 2.0 * p.alpha * w * w;
        }
        lap
    }

    /// Schrodinger term `G = |grad V|^2 - laplacian V` of the transformed
    /// operator `1/2 laplacian - 1/2 G`. Bounded below on the quadrant and
    /// growing at the axes and at infinity under the validated regimes.
    pub fn g(&self, x: [f64; 2]) -> Result<f64, ModelError> {
        self.check_interior(x)?;
        Ok(self.g_raw(x))
    }

    pub(crate) fn g_raw(&self, x: [f64; 2]) -> f64 {
        let grad = self.grad_v_raw(x);
        grad[0] * grad[0] + grad[1] * grad[1] - self.laplacian_v_raw(x)
    }

    /// Degree-4 polynomial of the reference measure:
    /// `Q = sum_i (c_ii g_i (x^i)^4/16 - r_i (x^i)^2/2) + 2 alpha (x^1 x^2)^2`.
    pub fn q_poly(&self, x: [f64; 2]) -> f64 {
        let p = &self.params;
        let mut q = 0.0;
        for axis in [Axis::One, Axis::Two] {
            let u = x[axis.index()];
            let u2 = u * u;
            q += p.c_self(axis) * p.gamma(axis) * u2 * u2 / 16.0 - p.r(axis) * u2 / 2.0;
        }
        q + 2.0 * p.alpha * (x[0] * x[0]) * (x[1] * x[1])
    }

    /// Density of `mu(dx) = e^{-2V} dx = (x^1 x^2)^{-1} e^{-Q} dx`.
    pub fn mu_density(&self, x: [f64; 2]) -> Result<f64, ModelError> {
        self.check_interior(x)?;
        Ok((-2.0 * self.v_raw(x)).exp())
    }

    /// Drift of the Kolmogorov process `X` written out coefficient by
    /// coefficient; identical to `-grad V` under the stored normalization.
    pub fn drift_slvkp(&self, x: [f64; 2]) -> Result<[f64; 2], ModelError> {
        self.check_interior(x)?;
        Ok(self.drift_slvkp_raw(x))
    }

    pub(crate) fn drift_slvkp_raw(&self, x: [f64; 2]) -> [f64; 2] {
        let p = &self.params;
        let cross = [p.c12 * p.gamma2, p.c21 * p.gamma1];
        let mut b = [0.0; 2];
        for axis in [Axis::One, Axis::Two] {
            let i = axis.index();
            let u = x[i];
            let w = x[axis.other().index()];
            b[i] = p.r(axis) * u / 2.0
                - p.c_self(axis) * p.gamma(axis) * u * u * u / 8.0
                - cross[i] * u * w * w / 8.0
                - 0.5 / u;
        }
        b
    }

    /// Drift of the population process `Z` in original coordinates.
    pub fn drift_slvp(&self, z: [f64; 2]) -> [f64; 2] {
        let p = &self.params;
        [
            p.r1 * z[0] - p.c11 * z[0] * z[0] - p.c12 * z[0] * z[1],
            p.r2 * z[1] - p.c21 * z[0] * z[1] - p.c22 * z[1] * z[1],
        ]
    }

    /// Diffusion coefficient of `Z`: `sqrt(gamma_i z^i)` per coordinate.
    pub fn diffusion_slvp(&self, z: [f64; 2]) -> [f64; 2] {
        [
            (self.params.gamma1 * z[0].max(0.0)).sqrt(),
            (self.params.gamma2 * z[1].max(0.0)).sqrt(),
        ]
    }

    /// Drift of the decoupled single-axis process
    /// `dH = dB + (r u/2 - c g u^3/8 - 1/(2u)) dt`.
    pub fn drift_h(&self, u: f64, axis: Axis) -> Result<f64, ModelError> {
        if u.is_nan() || u <= 0.0 {
            return Err(ModelError::DomainError { x1: u, x2: u });
        }
        let p = &self.params;
        Ok(p.r(axis) * u / 2.0 - p.c_self(axis) * p.gamma(axis) * u * u * u / 8.0 - 0.5 / u)
    }

    /// Drift of the comparison process `U`: the Kolmogorov drift without the
    /// singular `-1/(2x)` repulsion. Defined on all of the plane.
    pub fn drift_u(&self, x: [f64; 2]) -> [f64; 2] {
        let p = &self.params;
        let mut b = [0.0; 2];
        for axis in [Axis::One, Axis::Two] {
            let i = axis.index();
            let u = x[i];
            let w = x[axis.other().index()];
            b[i] = p.r(axis) * u / 2.0
                - p.c_self(axis) * p.gamma(axis) * u * u * u / 8.0
                - 2.0 * p.alpha * u * w * w;
        }
        b
    }

    /// One-dimensional axis model of the `H` dynamics, used by the 1D
    /// spectral pipeline.
    pub fn axis_model(&self, axis: Axis) -> AxisModel {
        AxisModel {
            r: self.params.r(axis),
            c_gamma: self.params.c_self(axis) * self.params.gamma(axis),
        }
    }
}

/// Single-axis Kolmogorov model: potential derived from the drift of the
/// decoupled process, `V'(u) = 1/(2u) + c g u^3/8 - r u/2`, so that
/// `-V' = drift_h` holds identically.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxisModel {
    r: f64,
    c_gamma: f64,
}

impl AxisModel {
    pub fn v(&self, u: f64) -> f64 {
        0.5 * (u.ln() + self.c_gamma * u * u * u * u / 16.0 - self.r * u * u / 2.0)
    }

    pub fn dv(&self, u: f64) -> f64 {
        0.5 / u + self.c_gamma * u * u * u / 8.0 - self.r * u / 2.0
    }

    pub fn d2v(&self, u: f64) -> f64 {
        -0.5 / (u * u) + 3.0 * self.c_gamma * u * u / 8.0 - self.r / 2.0
    }

    /// `G(u) = V'(u)^2 - V''(u)`.
    pub fn g(&self, u: f64) -> f64 {
        let dv = self.dv(u);
        dv * dv - self.d2v(u)
    }
}

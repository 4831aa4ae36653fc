//! Quasi-stationary analysis of two-type stochastic Lotka-Volterra diffusions.
//!
//! The crate solves for quasi-stationary distributions (QSDs), killing rates
//! and long-time conditioned behaviour of the two-type stochastic
//! Lotka-Volterra system along two independent routes and cross-validates
//! them against each other:
//!
//! * a **spectral** route: the generator of the killed process is conjugated
//!   into a Schrodinger operator, discretised with second-order finite
//!   differences on a truncated domain and solved with shift-invert Lanczos
//!   ([`spectral`]);
//! * a **Monte Carlo** route: absorbed Euler-Maruyama trajectories
//!   ([`sde`]) together with a Fleming-Viot particle approximation of the
//!   conditioned law ([`conditioning`]).
//!
//! On top of both sits [`regimes`], which compares the interior killing rate
//! against the single-type axis rates, classifies the long-time conditioned
//! behaviour (dominant trait vs. coexistence) and composes the mixture QSD.

pub mod conditioning;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod regimes;
pub mod sde;
pub mod spectral;

pub use model::{validate_params, KolmogorovModel, LVParams, RawParams, Regime};

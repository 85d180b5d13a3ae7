//! Finite-volume simulation of scalar balance laws `u_t + div f(u) = sigma(u) dW/dt` with
//! multiplicative Brownian forcing, together with the functionals used to study them:
//! entropy pairs and residuals, BV and translation moduli, Monte Carlo aggregation, and
//! numerical checks of mollifier-based comparison inequalities.

pub mod besov;
pub mod entropy;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod kernel;
pub mod model;
pub mod noise;
pub mod quadrature;
pub mod solver;
pub mod weight;

pub use error::{Result, SblError};
pub use grid::{Field, Grid};
pub use model::{FluxKind, FluxModel, InitialData, NoiseKind, NoiseModel, Problem};
pub use noise::{sample_path, BrownianPath};
pub use solver::{solve, FluxScheme, SolverConfig, Trajectory};
pub use weight::WeightFunction;

//! Spectral laboratory for nonlinear Schrodinger equations with
//! multiplicative noise driven by continuous square-integrable martingales.
//!
//! The equation
//!
//! ```text
//! i dX = Delta X dt + lambda |X|^(alpha-1) X dt
//!        - (i/2) sum_j |mu_j|^2 |e_j|^2 X d<M_j> + i X dM,
//! M(t, xi) = sum_j mu_j e_j(xi) M_j(t)
//! ```
//!
//! is integrated on a periodic grid either directly, or after the change of
//! variables `X = e^M y`, which turns it into a random equation with a
//! damping potential. Diagnostics compare the discrete trajectories against
//! the mass identity, the energy identity and the exponential decay rate
//! `omega = 2 alpha_0 sum_j (Re mu_j)^2`.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the double-precision types used by the harness.

pub mod diagnostics;
pub mod error;
pub mod format;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod noise;
pub mod picard;
pub mod rescaling;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub use num_complex::Complex;

pub type Grid = grid::GridSpec<f64>;
pub type Field = grid::ComplexField<f64>;
pub type Transforms = grid::Fourier<f64>;
pub type Model = noise::NoiseModel<f64>;
pub type Path = noise::MartingalePath<f64>;
pub type Density = noise::DensitySpec<f64>;
pub type Params = integrator::SimParams<f64>;
pub type Record = integrator::SolutionRecord<f64>;
pub type Potential = rescaling::RescaledPotential<f64>;

pub type Grid32 = grid::GridSpec<f32>;
pub type Field32 = grid::ComplexField<f32>;
pub type Model32 = noise::NoiseModel<f32>;
pub type Record32 = integrator::SolutionRecord<f32>;

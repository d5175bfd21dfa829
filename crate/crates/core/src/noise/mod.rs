//! Driving martingales, the assembled noise field and assumption checks.

mod density;
mod field;
mod model;
mod path;
mod profile;
pub mod rng;
mod validate;

pub use density::{DensityKind, DensitySpec};
pub use field::{noise_field, noise_field_with_derivatives, noise_increment_field, NoiseFieldParts};
pub use model::{AssumptionFlags, NoiseComponent, NoiseModel};
pub use path::{lln_ratio, sample_martingale, sample_martingale_indexed, MartingalePath};
pub use profile::{ProfileKind, SpatialProfile};
pub use validate::{validate_assumptions, AssumptionCheck, AssumptionReport};

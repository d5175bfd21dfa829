//! Split-step integration of the original and the rescaled equation.

mod flows;
mod params;
mod record;
mod simulate;

pub use flows::{damping_step, noise_step_direct, nonlinear_phase_step, step, Stepper};
pub use params::{Scheme, SimParams, Splitting, DEFAULT_SNAPSHOTS};
pub use record::{field_dump, read_field_dump, FieldDump, Snapshot, SolutionRecord};
pub use simulate::{simulate, simulate_with_path};

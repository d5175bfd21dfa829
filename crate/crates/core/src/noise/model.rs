use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

use super::density::DensitySpec;
use super::profile::SpatialProfile;

/// One term `mu_j e_j(xi) M_j(t)` of the noise field.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseComponent<T> {
    pub mu: Complex<T>,
    pub profile: SpatialProfile<T>,
    pub density: DensitySpec<T>,
}

/// Flags recorded by [`super::validate_assumptions`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    pub h1: bool,
    pub h3: bool,
    pub h4: bool,
}

/// Coefficients, profiles and densities of the driving noise, bound to the
/// grid the profiles were sampled on.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel<T> {
    grid: Arc<GridSpec<T>>,
    components: Vec<NoiseComponent<T>>,
    flags: AssumptionFlags,
}

impl<T: Real> NoiseModel<T> {
    pub fn new(grid: Arc<GridSpec<T>>, components: Vec<NoiseComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::arg("components", "noise model needs N >= 1".to_string()));
        }
        for (j, c) in components.iter().enumerate() {
            if c.profile.values().len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "profile of component {} sampled on a different grid",
                    j + 1
                )));
            }
            if !(c.mu.re.is_finite() && c.mu.im.is_finite()) {
                return Err(Error::arg("mu", format!("component {} has a non-finite coefficient", j + 1)));
            }
        }
        Ok(Self {
            grid,
            components,
            flags: AssumptionFlags::default(),
        })
    }

    /// Spatially homogeneous model `e_j = 1` with the given coefficients and densities.
    pub fn homogeneous(grid: Arc<GridSpec<T>>, terms: Vec<(Complex<T>, DensitySpec<T>)>) -> Result<Self> {
        let components = terms
            .into_iter()
            .map(|(mu, density)| NoiseComponent {
                mu,
                profile: SpatialProfile::constant_one(&grid),
                density,
            })
            .collect();
        Self::new(grid, components)
    }

    pub fn grid(&self) -> &Arc<GridSpec<T>> {
        &self.grid
    }

    pub fn components(&self) -> &[NoiseComponent<T>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn flags(&self) -> AssumptionFlags {
        self.flags
    }

    pub fn set_flags(&mut self, flags: AssumptionFlags) {
        self.flags = flags;
    }

    /// All profiles are `e_j = 1`.
    pub fn is_spatially_homogeneous(&self) -> bool {
        self.components.iter().all(|c| c.profile.is_constant_one())
    }

    /// Every coefficient is zero (deterministic equation).
    pub fn is_silent(&self) -> bool {
        self.components.iter().all(|c| c.mu == Complex::new(T::zero(), T::zero()))
    }

    /// Common lower bound `alpha_0 = min_j inf V_j`.
    pub fn alpha0(&self) -> T {
        self.components
            .iter()
            .map(|c| c.density.lower_bound())
            .fold(T::infinity(), |a, b| a.min(b))
    }

    pub fn check_grid(&self, grid: &GridSpec<T>) -> Result<()> {
        if *self.grid == *grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "noise profiles were sampled on a different grid".to_string(),
            ))
        }
    }
}

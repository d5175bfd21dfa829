//! Real spatial profiles `e_j(xi)` sampled on a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileKind<T> {
    /// `e(xi) = 1`, the spatially homogeneous case.
    ConstantOne,
    /// `amplitude * exp(-|xi - center|^2 / width^2)`.
    GaussianBump {
        amplitude: T,
        #[serde(default)]
        center: Vec<T>,
        width: T,
    },
    /// Row-major samples, one per grid point.
    Tabulated { values: Vec<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialProfile<T> {
    kind: ProfileKind<T>,
    values: Vec<T>,
}

impl<T: Real> SpatialProfile<T> {
    pub fn constant_one(grid: &GridSpec<T>) -> Self {
        Self {
            kind: ProfileKind::ConstantOne,
            values: vec![T::one(); grid.len()],
        }
    }

    pub fn sample(kind: ProfileKind<T>, grid: &GridSpec<T>) -> Result<Self> {
        let values = match &kind {
            ProfileKind::ConstantOne => vec![T::one(); grid.len()],
            ProfileKind::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                if !(*width > T::zero()) {
                    return Err(Error::arg("width", format!("must be positive (got {width})")));
                }
                if !center.is_empty() && center.len() != grid.dimension() {
                    return Err(Error::GridMismatch(format!(
                        "profile center has {} coordinates, grid dimension is {}",
                        center.len(),
                        grid.dimension()
                    )));
                }
                let w2 = *width * *width;
                (0..grid.len())
                    .map(|flat| {
                        let x = grid.position(flat);
                        let r2: T = (0..grid.dimension())
                            .map(|a| {
                                let c = center.get(a).copied().unwrap_or_else(T::zero);
                                (x[a] - c) * (x[a] - c)
                            })
                            .sum();
                        *amplitude * (-r2 / w2).exp()
                    })
                    .collect()
            }
            ProfileKind::Tabulated { values } => {
                if values.len() != grid.len() {
                    return Err(Error::GridMismatch(format!(
                        "tabulated profile has {} samples, grid has {} points",
                        values.len(),
                        grid.len()
                    )));
                }
                values.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("profile", "profile values must be finite".to_string()));
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> &ProfileKind<T> {
        &self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self.kind, ProfileKind::ConstantOne)
    }
}

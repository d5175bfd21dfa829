use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which equation is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// The original equation for `X`.
    Direct,
    /// The rescaled equation for `y`, reconstructing `X = e^M y`.
    Rescaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    Lie,
    Strang,
}

fn default_splitting() -> Splitting {
    Splitting::Strang
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams<T> {
    /// Sign of the nonlinearity: -1, 0 (linear run) or +1.
    pub lambda: i32,
    /// Power of the nonlinearity; ignored when `lambda = 0`.
    pub alpha: T,
    pub dt: T,
    pub t_final: T,
    /// Snapshot stride; defaults to `ceil(K / 512)`.
    #[serde(default)]
    pub save_every: Option<usize>,
    pub scheme: Scheme,
    #[serde(default = "default_splitting")]
    pub splitting: Splitting,
    /// Keep full fields at snapshot times (memory heavy).
    #[serde(default)]
    pub save_fields: bool,
}

/// Default number of snapshots per run.
pub const DEFAULT_SNAPSHOTS: usize = 512;

impl<T: Real> SimParams<T> {
    pub fn new(lambda: i32, alpha: T, dt: T, t_final: T, scheme: Scheme) -> Self {
        Self {
            lambda,
            alpha,
            dt,
            t_final,
            save_every: None,
            scheme,
            splitting: Splitting::Strang,
            save_fields: false,
        }
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    pub fn with_save_every(mut self, every: usize) -> Self {
        self.save_every = Some(every);
        self
    }

    pub fn with_saved_fields(mut self) -> Self {
        self.save_fields = true;
        self
    }

    /// Upper end of the mass-subcritical band, `1 + 4/d`.
    pub fn alpha_ceiling(dimension: usize) -> T {
        T::one() + T::lit(4.0) / T::from_usize_lossy(dimension)
    }

    /// Checks the parameter invariants for a `dimension`-dimensional run.
    pub fn validate(&self, dimension: usize) -> Result<()> {
        if !(-1..=1).contains(&self.lambda) {
            return Err(Error::arg("lambda", format!("must be -1, 0 or 1 (got {})", self.lambda)));
        }
        if self.lambda != 0 {
            let ceiling = Self::alpha_ceiling(dimension);
            if !(self.alpha > T::one() && self.alpha < ceiling) {
                return Err(Error::arg(
                    "alpha",
                    format!("must lie in (1, {ceiling}) for d = {dimension} (got {})", self.alpha),
                ));
            }
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::arg("dt", format!("must be positive (got {})", self.dt)));
        }
        if !(self.t_final > T::zero()) || !self.t_final.is_finite() {
            return Err(Error::arg("t_final", format!("must be positive (got {})", self.t_final)));
        }
        let ratio = self.t_final / self.dt;
        let k = ratio.round();
        if k < T::one() || (ratio - k).abs() > T::lit(1e-6) * k.max(T::one()) {
            return Err(Error::arg(
                "t_final",
                format!("t_final / dt = {ratio} is not an integer"),
            ));
        }
        if self.save_every == Some(0) {
            return Err(Error::arg("save_every", "must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Number of steps `K = T / dt`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn snapshot_stride(&self) -> usize {
        self.save_every
            .unwrap_or_else(|| self.steps().div_ceil(DEFAULT_SNAPSHOTS).max(1))
    }
}

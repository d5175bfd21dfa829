//! Assumption checks for a noise model.
//!
//! The decay condition on the profiles is asymptotic and cannot be decided
//! from samples. It is checked on the grid as a proxy: the weighted quantity
//! `zeta(xi) (|e| + |grad e| + |Delta e|)` must be non-increasing, bin by
//! bin, across the outer quarter of the radial range `[0.75 L, L]`.

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::grid::{ComplexField, Fourier};
use crate::scalar::Real;

use super::model::{AssumptionFlags, NoiseModel};

/// Radial bins used by the decay proxy.
const SHELL_BINS: usize = 8;
/// Inner radius of the shell as a fraction of the half-length.
const SHELL_START: f64 = 0.75;
/// Bin-to-bin increases below this fraction of the global maximum are
/// treated as roundoff.
const SHELL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub pass: bool,
    pub witnesses: Vec<String>,
}

impl AssumptionCheck {
    fn new() -> Self {
        Self {
            pass: true,
            witnesses: Vec::new(),
        }
    }

    fn fail(&mut self, witness: String) {
        self.pass = false;
        self.witnesses.push(witness);
    }

    fn note(&mut self, witness: String) {
        self.witnesses.push(witness);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub horizon: f64,
    pub h1: AssumptionCheck,
    pub h3: AssumptionCheck,
    pub h4: AssumptionCheck,
}

impl AssumptionReport {
    pub fn flags(&self) -> AssumptionFlags {
        AssumptionFlags {
            h1: self.h1.pass,
            h3: self.h3.pass,
            h4: self.h4.pass,
        }
    }
}

/// Weight `1 + |xi|^2`, with the extra `log(3 + |xi|^2)^2` factor in 2D.
fn zeta<T: Real>(dimension: usize, r2: T) -> T {
    let base = T::one() + r2;
    if dimension == 2 {
        let l = (T::lit(3.0) + r2).ln();
        base * l * l
    } else {
        base
    }
}

fn decay_proxy<T: Real>(model: &NoiseModel<T>, j: usize, fourier: &Fourier<T>) -> Result<(), String> {
    let grid = Arc::clone(model.grid());
    let profile = &model.components()[j].profile;
    let field = ComplexField::from_values(
        Arc::clone(&grid),
        profile
            .values()
            .iter()
            .map(|&e| Complex::new(e, T::zero()))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let grad = fourier.gradient(&field).map_err(|e| e.to_string())?;
    let lap = fourier.laplacian(&field).map_err(|e| e.to_string())?;
    let d = grid.dimension();
    let weighted: Vec<T> = (0..grid.len())
        .map(|i| {
            let g2: T = grad.iter().map(|g| g.values()[i].norm_sqr()).sum();
            let q = profile.values()[i].abs() + g2.sqrt() + lap.values()[i].norm();
            zeta(d, grid.radius_sq(i)) * q
        })
        .collect();
    let global = weighted.iter().copied().fold(T::zero(), T::max);
    let r_max = grid.half_length();
    let r_min = r_max * T::lit(SHELL_START);
    let width = (r_max - r_min) / T::from_usize_lossy(SHELL_BINS);
    let mut bins = vec![None::<T>; SHELL_BINS];
    for (i, &w) in weighted.iter().enumerate() {
        let r = grid.radius_sq(i).sqrt();
        if r < r_min || r > r_max {
            continue;
        }
        let b = ((r - r_min) / width)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(SHELL_BINS - 1);
        bins[b] = Some(bins[b].map_or(w, |m: T| m.max(w)));
    }
    let maxima: Vec<T> = bins.into_iter().flatten().collect();
    let tol = global * T::lit(SHELL_TOLERANCE);
    for (b, pair) in maxima.windows(2).enumerate() {
        if pair[1] > pair[0] + tol {
            return Err(format!(
                "component {}: weighted profile grows across the outer shell (bin {} -> {}: {:.3e} -> {:.3e})",
                j + 1,
                b,
                b + 1,
                pair[0].to_f64_lossy(),
                pair[1].to_f64_lossy()
            ));
        }
    }
    Ok(())
}

/// Checks the profile-decay proxy, the density bound and the homogeneous
/// non-degenerate regime over `[0, horizon]`. Failures are witnesses in the
/// report, never errors.
pub fn validate_assumptions<T: Real>(model: &NoiseModel<T>, horizon: T) -> AssumptionReport {
    let fourier = Fourier::new(Arc::clone(model.grid()));
    let mut h1 = AssumptionCheck::new();
    let mut h3 = AssumptionCheck::new();
    let mut h4 = AssumptionCheck::new();
    h1.note("finite-grid proxy: zeta-weighted profile non-increasing over the outer 25% radial shell".into());

    for (j, comp) in model.components().iter().enumerate() {
        let idx = j + 1;
        if let Err(w) = decay_proxy(model, j, &fourier) {
            h1.fail(w);
        }

        let density = &comp.density;
        if !density.upper_bound().is_finite() {
            h3.fail(format!("V_{idx} has no finite upper bound"));
        } else if !density.covers(horizon) {
            h3.fail(format!(
                "V_{idx} defined only up to {} < horizon {}",
                density.horizon().unwrap_or_else(T::infinity),
                horizon
            ));
        } else {
            h3.note(format!("||V_{idx}||_inf <= {}", density.upper_bound()));
        }

        if comp.mu.re == T::zero() {
            h4.fail(format!("Re mu_{idx} = 0"));
        }
        if !comp.profile.is_constant_one() {
            h4.fail(format!("e_{idx} is not identically 1"));
        }
        if !(density.lower_bound() > T::zero()) {
            h4.fail(format!("alpha_0 of V_{idx} is {} (needs > 0)", density.lower_bound()));
        }
    }
    if model.is_spatially_homogeneous() && !h1.pass {
        h1.note("constant profiles reduce the rescaled operator to the Laplacian; the decay condition is not needed".into());
    }
    if h4.pass {
        h4.note(format!("alpha_0 = {}", model.alpha0()));
    }
    AssumptionReport {
        horizon: horizon.to_f64_lossy(),
        h1,
        h3,
        h4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::noise::density::{DensityKind, DensitySpec};
    use crate::noise::model::NoiseComponent;
    use crate::noise::profile::{ProfileKind, SpatialProfile};

    fn grid(d: usize) -> Arc<GridSpec<f64>> {
        Arc::new(GridSpec::new(d, if d == 1 { 128 } else { 64 }, 8.0).unwrap())
    }

    #[test]
    fn homogeneous_unit_model() {
        let model = NoiseModel::homogeneous(
            grid(1),
            vec![(Complex::new(1.0, 0.0), DensitySpec::constant(1.0).unwrap())],
        )
        .unwrap();
        let r = validate_assumptions(&model, 10.0);
        assert!(r.h4.pass);
        assert!(!r.h1.pass);
        assert!(r.h3.pass);
    }

    #[test]
    fn purely_imaginary_mu_fails_h4() {
        let model = NoiseModel::homogeneous(
            grid(1),
            vec![(Complex::new(0.0, 1.0), DensitySpec::constant(1.0).unwrap())],
        )
        .unwrap();
        let r = validate_assumptions(&model, 1.0);
        assert!(!r.h4.pass);
        assert!(r.h4.witnesses.iter().any(|w| w == "Re mu_1 = 0"));
    }

    #[test]
    fn gaussian_profile_passes_decay_proxy() {
        for d in [1, 2] {
            let g = grid(d);
            let profile = SpatialProfile::sample(
                ProfileKind::GaussianBump {
                    amplitude: 1.0,
                    center: vec![],
                    width: 1.0,
                },
                &g,
            )
            .unwrap();
            let model = NoiseModel::new(
                Arc::clone(&g),
                vec![NoiseComponent {
                    mu: Complex::new(1.0, 0.0),
                    profile,
                    density: DensitySpec::constant(1.0).unwrap(),
                }],
            )
            .unwrap();
            let r = validate_assumptions(&model, 1.0);
            assert!(r.h1.pass, "d={d}: {:?}", r.h1.witnesses);
            assert!(!r.h4.pass);
        }
    }

    #[test]
    fn zero_lower_bound_and_short_horizon() {
        let d = DensitySpec::new(
            DensityKind::Tabulated {
                times: vec![0.0, 1.0],
                values: vec![0.0, 1.0],
            },
            None,
            None,
        )
        .unwrap();
        let model = NoiseModel::homogeneous(grid(1), vec![(Complex::new(1.0, 0.0), d)]).unwrap();
        let r = validate_assumptions(&model, 2.0);
        assert!(!r.h4.pass);
        assert!(!r.h3.pass);
    }
}

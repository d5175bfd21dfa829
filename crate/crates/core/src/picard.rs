//! Fixed-point iteration of the mild form of the rescaled equation in the
//! spatially homogeneous regime, where the evolution family is the free
//! group `U(t) = exp(-i Delta t)`:
//!
//! ```text
//! F(y)(t) = U(t) x - int_0^t U(t - s) [ gamma(s) y(s)
//!           + i lambda e^((alpha-1) Re M(s)) |y(s)|^(alpha-1) y(s) ] ds,
//! gamma(s) = (1/2) sum_j (|mu_j|^2 + mu_j^2) V_j(s).
//! ```
//!
//! Time integrals use the trapezoid rule on uniform nodes, with free
//! transport between nodes, and distances are measured in
//! `sup_t ||.||_2 + ||.||_{L^q(0,tau; L^(alpha+1))}`.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Fourier};
use crate::integrator::SimParams;
use crate::noise::{MartingalePath, NoiseModel};
use crate::scalar::Real;

/// Ratios above one for this many consecutive iterations end the run.
pub const NO_CONTRACTION_RUN: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PicardConfig<T> {
    pub horizon: T,
    /// Number of time intervals; the quadrature uses `nodes + 1` points.
    pub nodes: usize,
    pub max_iterations: usize,
    pub tolerance: T,
    /// Weights of the sup-L2 and Strichartz parts of the mixed norm.
    #[serde(default = "unit_weights")]
    pub norm_weights: [T; 2],
}

fn unit_weights<T: Real>() -> [T; 2] {
    [T::one(), T::one()]
}

impl<T: Real> PicardConfig<T> {
    pub fn new(horizon: T, nodes: usize) -> Self {
        Self {
            horizon,
            nodes,
            max_iterations: 50,
            tolerance: T::lit(1e-8),
            norm_weights: unit_weights(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::arg("horizon", format!("must be positive (got {})", self.horizon)));
        }
        if self.nodes < 8 {
            return Err(Error::arg("nodes", format!("need at least 8 (got {})", self.nodes)));
        }
        if self.max_iterations == 0 {
            return Err(Error::arg("max_iterations", "must be >= 1"));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::arg("tolerance", "must be positive"));
        }
        if self.norm_weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::arg("norm_weights", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn node_spacing(&self) -> T {
        self.horizon / T::from_usize_lossy(self.nodes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStatus {
    Converged,
    NoContraction,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport<T> {
    pub ratios: Vec<T>,
    pub distances: Vec<T>,
    pub converged: bool,
    pub gamma_tau: T,
    pub q: T,
    pub status: PicardStatus,
    pub iterations: usize,
    /// `||y - F(y)||` for the returned iterate.
    pub residual: T,
    pub horizon: T,
    pub nodes: usize,
    #[serde(skip)]
    pub trajectory: Vec<ComplexField<T>>,
}

impl<T: Real> PicardReport<T> {
    pub fn max_ratio(&self) -> T {
        self.ratios.iter().copied().fold(T::zero(), T::max)
    }

    /// Iterate at the horizon.
    pub fn final_state(&self) -> &ComplexField<T> {
        self.trajectory.last().expect("trajectory has nodes + 1 entries")
    }
}

/// `q = 4(alpha + 1) / (d (alpha - 1))`.
pub fn strichartz_exponent<T: Real>(dimension: usize, alpha: T) -> Result<T> {
    let ceiling = SimParams::<T>::alpha_ceiling(dimension);
    if dimension == 0 || !(alpha > T::one() && alpha < ceiling) {
        return Err(Error::arg(
            "alpha",
            format!("must lie in (1, {ceiling}) for d = {dimension} (got {alpha})"),
        ));
    }
    let d = T::from_usize_lossy(dimension);
    Ok(T::lit(4.0) * (alpha + T::one()) / (d * (alpha - T::one())))
}

fn trapezoid_weights<T: Real>(points: usize, h: T) -> impl Iterator<Item = T> {
    (0..points).map(move |i| if i == 0 || i + 1 == points { h * T::lit(0.5) } else { h })
}

/// `sup_i ||y_i||_2` plus the trapezoid `L^q(0, tau; L^(alpha+1))` norm,
/// each scaled by its weight.
pub fn mixed_norm<T: Real>(trajectory: &[ComplexField<T>], horizon: T, q: T, alpha: T, weights: [T; 2]) -> Result<T> {
    if trajectory.len() < 2 {
        return Err(Error::arg("trajectory", "needs at least two nodes"));
    }
    let h = horizon / T::from_usize_lossy(trajectory.len() - 1);
    let sup = trajectory.iter().map(|y| y.norm_l2()).fold(T::zero(), T::max);
    let mut acc = T::zero();
    for (y, w) in trajectory.iter().zip(trapezoid_weights(trajectory.len(), h)) {
        acc += w * y.norm_lp(alpha + T::one())?.powf(q);
    }
    Ok(weights[0] * sup + weights[1] * acc.powf(T::one() / q))
}

/// `int_0^tau U(tau - s) f(s) ds` for forcing sampled at `nodes + 1`
/// uniform points.
pub fn duhamel_apply<T: Real>(
    forcing: &[ComplexField<T>],
    fourier: &Fourier<T>,
    horizon: T,
    nodes: usize,
) -> Result<ComplexField<T>> {
    let mut all = duhamel_trajectory(forcing, fourier, horizon, nodes)?;
    Ok(all.pop().expect("nonempty"))
}

/// The Duhamel integral at every node.
pub fn duhamel_trajectory<T: Real>(
    forcing: &[ComplexField<T>],
    fourier: &Fourier<T>,
    horizon: T,
    nodes: usize,
) -> Result<Vec<ComplexField<T>>> {
    if forcing.len() != nodes + 1 {
        return Err(Error::arg(
            "forcing",
            format!("expected {} samples for {} nodes, got {}", nodes + 1, nodes, forcing.len()),
        ));
    }
    if forcing.iter().any(|f| **f.grid() != **fourier.grid()) {
        return Err(Error::GridMismatch("forcing sampled on a different grid".to_string()));
    }
    let h = horizon / T::from_usize_lossy(nodes);
    let half = Complex::new(h * T::lit(0.5), T::zero());
    let prop = fourier.propagator(h);
    let mut scratch = fourier.scratch();
    let grid = Arc::clone(fourier.grid());
    let mut acc = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut out = Vec::with_capacity(nodes + 1);
    out.push(ComplexField::zeros(Arc::clone(&grid)));
    for i in 0..nodes {
        for (a, f) in acc.iter_mut().zip(forcing[i].values()) {
            *a += f * half;
        }
        fourier.apply_propagator(&mut acc, &prop, &mut scratch);
        for (a, f) in acc.iter_mut().zip(forcing[i + 1].values()) {
            *a += f * half;
        }
        out.push(ComplexField::from_values(Arc::clone(&grid), acc.clone())?);
    }
    Ok(out)
}

struct MildMap<'a, T: Real> {
    fourier: Fourier<T>,
    free: Vec<ComplexField<T>>,
    gamma: Vec<Complex<T>>,
    weight: Vec<T>,
    lambda: i32,
    alpha: T,
    config: &'a PicardConfig<T>,
}

impl<T: Real> MildMap<'_, T> {
    fn apply(&self, y: &[ComplexField<T>]) -> Result<Vec<ComplexField<T>>> {
        let lam = T::lit(self.lambda as f64);
        let forcing: Vec<ComplexField<T>> = y
            .iter()
            .enumerate()
            .map(|(i, yi)| {
                let values = yi
                    .values()
                    .iter()
                    .map(|&v| {
                        let power = if self.lambda == 0 {
                            T::zero()
                        } else {
                            v.norm_sqr().powf((self.alpha - T::one()) * T::lit(0.5))
                        };
                        v * self.gamma[i] + v * Complex::new(T::zero(), lam * self.weight[i] * power)
                    })
                    .collect();
                ComplexField::from_values(Arc::clone(yi.grid()), values)
            })
            .collect::<Result<_>>()?;
        let integral = duhamel_trajectory(&forcing, &self.fourier, self.config.horizon, self.config.nodes)?;
        self.free.iter().zip(&integral).map(|(u, i)| u.sub(i)).collect()
    }

    fn distance(&self, a: &[ComplexField<T>], b: &[ComplexField<T>], q: T) -> Result<T> {
        let diff: Vec<ComplexField<T>> = a.iter().zip(b).map(|(x, y)| x.sub(y)).collect::<Result<_>>()?;
        mixed_norm(&diff, self.config.horizon, q, self.alpha, self.config.norm_weights)
    }
}

/// Iterates `y_{m+1} = F(y_m)` from the free trajectory `y_1(t) = U(t) x`.
///
/// The noise enters through `Re M`, linearly interpolated from `path` at the
/// quadrature nodes, and through the densities `V_j`.
pub fn picard_iterate<T: Real>(
    x: &ComplexField<T>,
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    config: &PicardConfig<T>,
    lambda: i32,
    alpha: T,
) -> Result<PicardReport<T>> {
    config.validate()?;
    model.check_grid(x.grid())?;
    path.check_model(model)?;
    if !model.is_spatially_homogeneous() {
        return Err(Error::AssumptionVeto(
            "mild iteration uses the free group and needs spatially homogeneous noise".to_string(),
        ));
    }
    if !(-1..=1).contains(&lambda) {
        return Err(Error::arg("lambda", format!("must be -1, 0 or 1 (got {lambda})")));
    }
    let grid = Arc::clone(x.grid());
    let q = strichartz_exponent(grid.dimension(), alpha)?;
    if x.norm_l2() == T::zero() {
        return Err(Error::arg("x", "initial data must be nonzero"));
    }
    if path.horizon() < config.horizon * (T::one() - T::lit(1e-12)) {
        return Err(Error::arg(
            "horizon",
            format!("path ends at {} before the horizon {}", path.horizon(), config.horizon),
        ));
    }
    let fourier = Fourier::new(Arc::clone(&grid));
    let h = config.node_spacing();
    let times: Vec<T> = (0..=config.nodes).map(|i| h * T::from_usize_lossy(i)).collect();
    let half = T::lit(0.5);
    let gamma = times
        .iter()
        .map(|&t| {
            model.components().iter().fold(Complex::new(T::zero(), T::zero()), |acc, c| {
                acc + (Complex::new(c.mu.norm_sqr(), T::zero()) + c.mu * c.mu) * (half * c.density.eval(t))
            })
        })
        .collect();
    let m_at = |t: T| -> Complex<T> {
        model
            .components()
            .iter()
            .enumerate()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (j, c)| acc + c.mu * path.interpolate(j, t))
    };
    let weight = times.iter().map(|&t| ((alpha - T::one()) * m_at(t).re).exp()).collect();
    let free = times
        .iter()
        .map(|&t| fourier.free_propagator_apply(x, t))
        .collect::<Result<Vec<_>>>()?;

    // gamma_tau from the path samples inside [0, tau] and the interpolated endpoint.
    let mut sup_m = m_at(config.horizon).norm();
    for k in 0..=path.steps() {
        if path.time(k) > config.horizon {
            break;
        }
        sup_m = sup_m.max(m_at(path.time(k)).norm());
    }
    let gamma_tau = ((alpha - T::one()) * sup_m).exp();

    let map = MildMap {
        fourier,
        free: free.clone(),
        gamma,
        weight,
        lambda,
        alpha,
        config,
    };
    let mut y = free;
    let mut distances: Vec<T> = Vec::new();
    let mut ratios: Vec<T> = Vec::new();
    let mut status = PicardStatus::MaxIterations;
    let mut run_above_one = 0;
    for _ in 0..config.max_iterations {
        let next = map.apply(&y)?;
        let d = map.distance(&next, &y, q)?;
        if !d.is_finite() {
            return Err(Error::NumericalAbort {
                index: distances.len(),
                reason: "iterate distance is not finite".to_string(),
            });
        }
        if let Some(&prev) = distances.last() {
            let r = if prev == T::zero() { T::zero() } else { d / prev };
            ratios.push(r);
            run_above_one = if r > T::one() { run_above_one + 1 } else { 0 };
        }
        distances.push(d);
        y = next;
        if d <= config.tolerance {
            status = PicardStatus::Converged;
            break;
        }
        if run_above_one >= NO_CONTRACTION_RUN {
            status = PicardStatus::NoContraction;
            break;
        }
    }
    let residual = map.distance(&map.apply(&y)?, &y, q)?;
    Ok(PicardReport {
        ratios,
        converged: status == PicardStatus::Converged,
        iterations: distances.len(),
        distances,
        gamma_tau,
        q,
        status,
        residual,
        horizon: config.horizon,
        nodes: config.nodes,
        trajectory: y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::noise::{sample_martingale, DensitySpec};

    fn grid() -> Arc<GridSpec<f64>> {
        Arc::new(GridSpec::new(1, 64, 8.0).unwrap())
    }

    fn gaussian(g: &Arc<GridSpec<f64>>) -> ComplexField<f64> {
        let f = ComplexField::from_fn(Arc::clone(g), |x| Complex::new((-x[0] * x[0]).exp(), 0.0));
        let n = f.norm_l2();
        f.scaled(Complex::new(1.0 / n, 0.0))
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(strichartz_exponent(1, 3.0).unwrap(), 8.0);
        assert_eq!(strichartz_exponent(2, 2.0).unwrap(), 6.0);
        let q = strichartz_exponent(1, 5.0 - 1e-6).unwrap();
        assert!(q > 6.0);
        assert!(strichartz_exponent(1, 5.0).is_err());
        assert!(strichartz_exponent(3, 1.0).is_err());
    }

    #[test]
    fn duhamel_examples() {
        let g = grid();
        let fourier = Fourier::new(Arc::clone(&g));
        let zeros: Vec<_> = (0..9).map(|_| ComplexField::zeros(Arc::clone(&g))).collect();
        let out = duhamel_apply(&zeros, &fourier, 1.0, 8).unwrap();
        assert_eq!(out.max_modulus(), 0.0);

        let ones: Vec<_> = (0..9)
            .map(|_| ComplexField::from_fn(Arc::clone(&g), |_| Complex::new(1.0, 0.0)))
            .collect();
        let out = duhamel_apply(&ones, &fourier, 1.0, 8).unwrap();
        assert!(out.values().iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-13));

        let base = gaussian(&g);
        let tau = 0.7;
        let free: Vec<_> = (0..=16)
            .map(|i| fourier.free_propagator_apply(&base, tau * i as f64 / 16.0).unwrap())
            .collect();
        let out = duhamel_apply(&free, &fourier, tau, 16).unwrap();
        let expect = fourier.free_propagator_apply(&base, tau).unwrap().scaled(Complex::new(tau, 0.0));
        assert!(out.sub(&expect).unwrap().norm_l2() < 1e-13);
        assert!(duhamel_apply(&free, &fourier, tau, 8).is_err());
    }

    #[test]
    fn trivial_map_converges_at_once() {
        let g = grid();
        let model = NoiseModel::homogeneous(
            Arc::clone(&g),
            vec![(Complex::new(0.0, 0.0), DensitySpec::constant(1.0).unwrap())],
        )
        .unwrap();
        let path = sample_martingale(&model, 1e-3, 100, 4).unwrap();
        let r = picard_iterate(&gaussian(&g), &model, &path, &PicardConfig::new(0.1, 16), 0, 3.0).unwrap();
        assert!(r.converged);
        assert_eq!(r.distances, vec![0.0]);
        assert!(r.ratios.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_damped_problem_matches_closed_form() {
        // One correction of the linear map is the Duhamel formula; the
        // fixed point is e^{-t} U(t) x.
        let g = grid();
        let model = NoiseModel::homogeneous(
            Arc::clone(&g),
            vec![(Complex::new(1.0, 0.0), DensitySpec::constant(1.0).unwrap())],
        )
        .unwrap();
        let path = sample_martingale(&model, 1e-3, 200, 4).unwrap();
        let x = gaussian(&g);
        let fourier = Fourier::new(Arc::clone(&g));
        let exact = fourier.free_propagator_apply(&x, 0.2).unwrap().scaled(Complex::new((-0.2f64).exp(), 0.0));
        let mut errs = Vec::new();
        for nodes in [16, 32, 64] {
            let r = picard_iterate(&x, &model, &path, &PicardConfig::new(0.2, nodes), 0, 3.0).unwrap();
            assert!(r.converged);
            errs.push(r.final_state().sub(&exact).unwrap().norm_l2());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn rejects_varying_profiles() {
        use crate::noise::{NoiseComponent, ProfileKind, SpatialProfile};
        let g = grid();
        let profile = SpatialProfile::sample(
            ProfileKind::GaussianBump { amplitude: 1.0, center: vec![], width: 1.0 },
            &g,
        )
        .unwrap();
        let model = NoiseModel::new(
            Arc::clone(&g),
            vec![NoiseComponent { mu: Complex::new(1.0, 0.0), profile, density: DensitySpec::constant(1.0).unwrap() }],
        )
        .unwrap();
        let path = sample_martingale(&model, 1e-3, 100, 4).unwrap();
        let r = picard_iterate(&gaussian(&g), &model, &path, &PicardConfig::new(0.05, 16), 1, 3.0);
        assert!(matches!(r, Err(Error::AssumptionVeto(_))));
    }
}

//! Sampled martingale paths.
//!
//! Each component is realised as a time-changed Brownian motion
//! `M_j(t) = B_j(Q_j(t))` with `Q_j(t) = int_0^t V_j`. On the grid
//! `t_k = k dt` the increments are `dM_j(k) = sqrt(dQ_j(k)) z_{j,k}` where
//! `dQ_j(k)` is the exact integral of `V_j` over `[t_k, t_{k+1}]` and the
//! `z_{j,k}` are independent standard normals, so the sampled values have
//! exactly the law of the continuous martingale at the grid times.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::scalar::Real;

use super::model::NoiseModel;
use super::rng::{stream_seed, NormalStream};

#[derive(Clone, Debug, PartialEq)]
pub struct MartingalePath<T> {
    dt: T,
    steps: usize,
    values: Vec<Vec<T>>,
    increments: Vec<Vec<T>>,
    qv: Vec<Vec<T>>,
    dq: Vec<Vec<T>>,
}

/// Samples path `0` of the ensemble seeded by `seed`.
pub fn sample_martingale<T: Real>(
    model: &NoiseModel<T>,
    dt: T,
    steps: usize,
    seed: u64,
) -> Result<MartingalePath<T>> {
    sample_martingale_indexed(model, dt, steps, seed, 0)
}

/// Samples path `path_index` of the ensemble seeded by `master`.
pub fn sample_martingale_indexed<T: Real>(
    model: &NoiseModel<T>,
    dt: T,
    steps: usize,
    master: u64,
    path_index: u64,
) -> Result<MartingalePath<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::arg("dt", format!("time step must be positive (got {dt})")));
    }
    if steps == 0 {
        return Err(Error::arg("steps", "need at least one step".to_string()));
    }
    let horizon = dt * T::from_usize_lossy(steps);
    let n = model.len();
    let mut values = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n);
    let mut qv = Vec::with_capacity(n);
    let mut dqs = Vec::with_capacity(n);
    for (j, comp) in model.components().iter().enumerate() {
        let density = &comp.density;
        if !density.covers(horizon) {
            return Err(Error::arg(
                "steps",
                format!(
                    "requested horizon {} exceeds density horizon {} of component {}",
                    horizon,
                    density.horizon().unwrap_or_else(T::infinity),
                    j + 1
                ),
            ));
        }
        let mut stream = NormalStream::new(stream_seed(master, path_index, j as u64));
        let mut m = Vec::with_capacity(steps + 1);
        let mut q = Vec::with_capacity(steps + 1);
        let mut dm = Vec::with_capacity(steps);
        let mut dq = Vec::with_capacity(steps);
        m.push(T::zero());
        q.push(T::zero());
        for k in 0..steps {
            let t0 = dt * T::from_usize_lossy(k);
            let t1 = dt * T::from_usize_lossy(k + 1);
            let cell = density.integral(t0, t1);
            if cell < T::zero() {
                return Err(Error::NumericalAbort {
                    index: k,
                    reason: format!("density of component {} integrates negative", j + 1),
                });
            }
            let z = T::lit(stream.next_normal());
            let inc = cell.sqrt() * z;
            dm.push(inc);
            dq.push(cell);
            m.push(m[k] + inc);
            q.push(q[k] + cell);
        }
        values.push(m);
        increments.push(dm);
        qv.push(q);
        dqs.push(dq);
    }
    Ok(MartingalePath {
        dt,
        steps,
        values,
        increments,
        qv,
        dq: dqs,
    })
}

impl<T: Real> MartingalePath<T> {
    /// Builds a path from explicit increments (tests and replays).
    pub fn from_increments(dt: T, increments: Vec<Vec<T>>, dq: Vec<Vec<T>>) -> Result<Self> {
        let steps = increments.first().map_or(0, |v| v.len());
        if steps == 0 || increments.len() != dq.len() {
            return Err(Error::arg("increments", "inconsistent path data".to_string()));
        }
        if increments.iter().chain(&dq).any(|v| v.len() != steps) {
            return Err(Error::arg("increments", "components have different lengths".to_string()));
        }
        if dq.iter().flatten().any(|&v| v < T::zero()) {
            return Err(Error::arg("dq", "quadratic variation increments must be >= 0".to_string()));
        }
        let cumulate = |inc: &Vec<T>| {
            let mut out = Vec::with_capacity(steps + 1);
            out.push(T::zero());
            for (k, &d) in inc.iter().enumerate() {
                out.push(out[k] + d);
            }
            out
        };
        Ok(Self {
            dt,
            steps,
            values: increments.iter().map(cumulate).collect(),
            qv: dq.iter().map(cumulate).collect(),
            increments,
            dq,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn time(&self, k: usize) -> T {
        self.dt * T::from_usize_lossy(k)
    }

    pub fn horizon(&self) -> T {
        self.time(self.steps)
    }

    /// `M_j(t_k)`.
    pub fn value(&self, j: usize, k: usize) -> T {
        self.values[j][k]
    }

    /// `M_j(t_{k+1}) - M_j(t_k)`.
    pub fn increment(&self, j: usize, k: usize) -> T {
        self.increments[j][k]
    }

    /// Cumulative quadratic variation `Q_j(t_k)`.
    pub fn qv(&self, j: usize, k: usize) -> T {
        self.qv[j][k]
    }

    /// `Q_j(t_{k+1}) - Q_j(t_k)`.
    pub fn dq(&self, j: usize, k: usize) -> T {
        self.dq[j][k]
    }

    pub fn values(&self, j: usize) -> &[T] {
        &self.values[j]
    }

    pub fn increments(&self, j: usize) -> &[T] {
        &self.increments[j]
    }

    pub fn qv_series(&self, j: usize) -> &[T] {
        &self.qv[j]
    }

    /// Realized quadratic variation `sum_k dM_j(k)^2`.
    pub fn realized_qv(&self, j: usize) -> T {
        self.increments[j].iter().map(|&d| d * d).sum()
    }

    /// Linear interpolation of `M_j` at time `t` (clamped to the path).
    pub fn interpolate(&self, j: usize, t: T) -> T {
        let s = (t / self.dt).max(T::zero());
        let k = s.floor().to_usize().unwrap_or(0).min(self.steps);
        if k >= self.steps {
            return self.values[j][self.steps];
        }
        let w = s - T::from_usize_lossy(k);
        self.values[j][k] + (self.values[j][k + 1] - self.values[j][k]) * w
    }

    /// Same path observed on a grid `factor` times coarser; increments and
    /// quadratic-variation cells are summed, so coarse and fine runs share
    /// one Brownian realisation.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::arg(
                "factor",
                format!("{} steps are not divisible by {}", self.steps, factor),
            ));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let steps = self.steps / factor;
        let sum_cells = |v: &Vec<T>| -> Vec<T> {
            v.chunks(factor).map(|c| c.iter().copied().sum()).collect()
        };
        let sub = |v: &Vec<T>| -> Vec<T> { v.iter().step_by(factor).copied().collect() };
        Ok(Self {
            dt: self.dt * T::from_usize_lossy(factor),
            steps,
            values: self.values.iter().map(sub).collect(),
            increments: self.increments.iter().map(sum_cells).collect(),
            qv: self.qv.iter().map(sub).collect(),
            dq: self.dq.iter().map(sum_cells).collect(),
        })
    }

    /// `Re M(t_k) = sum_j Re(mu_j) M_j(t_k)`, the profile-free real part.
    pub fn re_m(&self, model: &NoiseModel<T>, k: usize) -> T {
        model
            .components()
            .iter()
            .enumerate()
            .map(|(j, c)| c.mu.re * self.values[j][k])
            .sum()
    }

    pub fn check_model(&self, model: &NoiseModel<T>) -> Result<()> {
        if self.components() != model.len() {
            return Err(Error::arg(
                "path",
                format!(
                    "path has {} components, model has {}",
                    self.components(),
                    model.len()
                ),
            ));
        }
        Ok(())
    }

    /// CSV with header `t,M_1..M_N,Q_1..Q_N`.
    pub fn to_csv(&self) -> String {
        let n = self.components();
        let mut out = String::from("t");
        for j in 1..=n {
            let _ = write!(out, ",M_{j}");
        }
        for j in 1..=n {
            let _ = write!(out, ",Q_{j}");
        }
        out.push('\n');
        for k in 0..=self.steps {
            out.push_str(&fmt17(self.time(k).to_f64_lossy()));
            for j in 0..n {
                out.push(',');
                out.push_str(&fmt17(self.values[j][k].to_f64_lossy()));
            }
            for j in 0..n {
                out.push(',');
                out.push_str(&fmt17(self.qv[j][k].to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }
}

/// `Re M(t_k) / t_k`; tends to zero almost surely by the martingale law of
/// large numbers.
pub fn lln_ratio<T: Real>(model: &NoiseModel<T>, path: &MartingalePath<T>, k: usize) -> Result<T> {
    path.check_model(model)?;
    if k == 0 {
        return Err(Error::arg("t_k", "ratio undefined at t = 0".to_string()));
    }
    if k > path.steps() {
        return Err(Error::arg("t_k", format!("index {k} beyond the path")));
    }
    Ok(path.re_m(model, k) / path.time(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::noise::density::{DensityKind, DensitySpec};
    use num_complex::Complex;
    use std::sync::Arc;

    fn grid() -> Arc<GridSpec<f64>> {
        Arc::new(GridSpec::new(1, 8, 1.0).unwrap())
    }

    fn model_with(density: DensitySpec<f64>, mu: Complex<f64>) -> NoiseModel<f64> {
        NoiseModel::homogeneous(grid(), vec![(mu, density)]).unwrap()
    }

    fn unit_model() -> NoiseModel<f64> {
        model_with(DensitySpec::constant(1.0).unwrap(), Complex::new(1.0, 0.0))
    }

    #[test]
    fn realized_qv_concentrates() {
        // std of the realized QV is sqrt(2 dt) ~ 0.014; [0.95, 1.05] is 3.5 sigma.
        let model = unit_model();
        let mut inside = 0;
        let seeds = 200;
        for seed in 0..seeds {
            let p = sample_martingale(&model, 1e-4, 10_000, seed).unwrap();
            let qv = p.realized_qv(0);
            if (0.95..=1.05).contains(&qv) {
                inside += 1;
            }
        }
        assert!(inside as f64 >= 0.99 * seeds as f64, "{inside}/{seeds}");
    }

    #[test]
    fn linear_density_total_qv() {
        let d = DensitySpec::new(
            DensityKind::Tabulated {
                times: vec![0.0, 1.0],
                values: vec![1.0, 2.0],
            },
            None,
            None,
        )
        .unwrap();
        let model = model_with(d, Complex::new(1.0, 0.0));
        let p = sample_martingale(&model, 1e-3, 1000, 3).unwrap();
        assert!((p.qv(0, 1000) - 1.5).abs() < 1e-12);
        assert!(sample_martingale(&model, 1e-3, 1100, 3).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let model = unit_model();
        let a = sample_martingale(&model, 1e-3, 500, 11).unwrap();
        let b = sample_martingale(&model, 1e-3, 500, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        let c = sample_martingale(&model, 1e-3, 500, 12).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.value(0, 0), 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let model = unit_model();
        assert!(sample_martingale(&model, 0.0, 10, 1).is_err());
        assert!(sample_martingale(&model, 1e-3, 0, 1).is_err());
    }

    #[test]
    fn zero_density_gives_zero_path_and_ratio() {
        let model = model_with(DensitySpec::constant(0.0).unwrap(), Complex::new(1.0, 0.0));
        let p = sample_martingale(&model, 1e-2, 100, 5).unwrap();
        assert!(p.values(0).iter().all(|&v| v == 0.0));
        assert_eq!(lln_ratio(&model, &p, 100).unwrap(), 0.0);
        assert!(lln_ratio(&model, &p, 0).is_err());
    }

    #[test]
    fn lln_ratio_is_small_at_long_horizon() {
        // Re M(T)/T ~ N(0, 1/T); at T = 100 the 3-sigma bound is 0.3.
        let model = unit_model();
        let (dt, steps) = (0.05, 2000);
        let mut inside = 0;
        for seed in 0..300 {
            let p = sample_martingale(&model, dt, steps, seed).unwrap();
            if lln_ratio(&model, &p, steps).unwrap().abs() <= 0.3 {
                inside += 1;
            }
        }
        assert!(inside as f64 >= 0.99 * 300.0);
    }

    #[test]
    fn lln_ratio_spread_halves_at_four_times_horizon() {
        let model = unit_model();
        let dt = 0.25;
        let std_at = |steps: usize| {
            let r: Vec<f64> = (0..500)
                .map(|s| {
                    let p = sample_martingale(&model, dt, steps, 1000 + s).unwrap();
                    lln_ratio(&model, &p, steps).unwrap()
                })
                .collect();
            let m = r.iter().sum::<f64>() / r.len() as f64;
            (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt()
        };
        let s1 = std_at(400);
        let s4 = std_at(1600);
        let ratio = s1 / s4;
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn coarsen_sums_cells() {
        let model = unit_model();
        let p = sample_martingale(&model, 1e-3, 1000, 9).unwrap();
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.steps(), 250);
        assert!((c.dt() - 4e-3).abs() < 1e-18);
        assert!((c.value(0, 250) - p.value(0, 1000)).abs() < 1e-12);
        assert!((c.increment(0, 3) - (p.value(0, 16) - p.value(0, 12))).abs() < 1e-12);
        assert!(p.coarsen(3).is_err());
    }

    #[test]
    fn component_independence() {
        let g = grid();
        let d = DensitySpec::constant(1.0).unwrap();
        let model = NoiseModel::homogeneous(
            g,
            vec![(Complex::new(1.0, 0.0), d.clone()), (Complex::new(0.5, 0.0), d)],
        )
        .unwrap();
        let p = sample_martingale(&model, 1e-3, 100_000, 77).unwrap();
        let (a, b) = (p.increments(0), p.increments(1));
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
        let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() <= 0.02, "corr {corr}");
    }

    #[test]
    fn realized_qv_error_scales_like_sqrt_dt() {
        let model = unit_model();
        let mean_abs_err = |dt: f64, steps: usize| {
            (0..400)
                .map(|s| {
                    let p = sample_martingale(&model, dt, steps, 5000 + s).unwrap();
                    (p.realized_qv(0) - p.qv(0, steps)).abs()
                })
                .sum::<f64>()
                / 400.0
        };
        let e1 = mean_abs_err(2e-3, 500);
        let e2 = mean_abs_err(1e-3, 1000);
        let ratio = e1 / e2;
        assert!((ratio - 2f64.sqrt()).abs() < 0.25, "ratio {ratio}");
    }

    proptest::proptest! {
        #[test]
        fn qv_bounds_hold(mean in 0.5f64..3.0, amp_frac in 0.0f64..0.9, seed in 0u64..1000) {
            let amp = mean * amp_frac;
            let d = DensitySpec::new(
                DensityKind::Sinusoid { mean, amplitude: amp, frequency: 2.0, phase: 0.3 },
                None,
                None,
            ).unwrap();
            let (lo, hi) = (d.lower_bound(), d.upper_bound());
            let model = model_with(d, Complex::new(1.0, 0.0));
            let p = sample_martingale(&model, 1e-2, 300, seed).unwrap();
            let q = p.qv_series(0);
            proptest::prop_assert!(q.windows(2).all(|w| w[1] >= w[0]));
            let t = p.horizon();
            proptest::prop_assert!(q[300] <= hi * t * (1.0 + 1e-12));
            proptest::prop_assert!(q[300] >= lo * t * (1.0 - 1e-12));
        }
    }
}

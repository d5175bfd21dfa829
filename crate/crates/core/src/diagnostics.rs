//! Discrete residuals of the mass and energy identities, the decay rate
//! `omega`, log-linear decay fits and envelope checks.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::integrator::{Scheme, SolutionRecord};
use crate::noise::{lln_ratio, NoiseModel};
use crate::scalar::Real;

/// Masses below this are treated as underflowed and end a decay fit.
pub const MASS_FLOOR: f64 = 1e-300;

/// Fraction of the horizon skipped at the start of a default decay fit.
pub const BURN_IN: f64 = 0.1;

/// Relative slack of the Gronwall envelope check.
pub const ENVELOPE_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualSeries<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub max_abs: T,
    /// Convergence order across refinements; set by [`with_refinement_order`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<T>,
}

impl<T: Real> ResidualSeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Self {
        let max_abs = values.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        Self {
            times,
            values,
            max_abs,
            order: None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,residual\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt17(t.to_f64_lossy()), fmt17(v.to_f64_lossy()));
        }
        out
    }
}

/// Least-squares slope of `log error` against `log dt`.
pub fn fit_order<T: Real>(dts: &[T], errors: &[T]) -> Result<T> {
    if dts.len() != errors.len() || dts.len() < 2 {
        return Err(Error::arg("errors", "need matching ladders of length >= 2"));
    }
    if dts.iter().chain(errors).any(|v| !(*v > T::zero())) {
        return Err(Error::arg("errors", "log-log fit needs positive values"));
    }
    let xs: Vec<T> = dts.iter().map(|v| v.ln()).collect();
    let ys: Vec<T> = errors.iter().map(|v| v.ln()).collect();
    Ok(least_squares(&xs, &ys).0)
}

/// Slope and intercept of the least-squares line.
fn least_squares<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Attaches the order fitted from the max residual of each refinement;
/// fewer than three refinements leave the order unset.
pub fn with_refinement_order<T: Real>(series: &mut [ResidualSeries<T>], dts: &[T]) -> Result<Option<T>> {
    if series.len() != dts.len() {
        return Err(Error::arg("dts", "one step size per series"));
    }
    if series.len() < 3 {
        return Ok(None);
    }
    let maxes: Vec<T> = series.iter().map(|s| s.max_abs).collect();
    let order = fit_order(dts, &maxes)?;
    for s in series.iter_mut() {
        s.order = Some(order);
    }
    Ok(Some(order))
}

/// `R(t_k) = ||X(t_k)||^2 - ||x||^2 - 2 sum_j sum_{i<k} w_j(i) dM_j(i)` with
/// `w_j(i) = int Re(mu_j) e_j |X(t_i)|^2`: the left-endpoint stochastic sum
/// driven by the same increments as the run.
pub fn mass_identity_residual<T: Real>(record: &SolutionRecord<T>, model: &NoiseModel<T>) -> Result<ResidualSeries<T>> {
    if record.scheme() != Scheme::Direct {
        return Err(Error::arg("record", "mass identity residual needs a direct-scheme record"));
    }
    record.path.check_model(model)?;
    let steps = record.steps();
    if record.ito_weights.len() != model.len() || record.ito_weights.iter().any(|w| w.len() != steps) {
        return Err(Error::arg("record", "missing per-step stochastic-integral weights"));
    }
    let two = T::lit(2.0);
    let mut sum = T::zero();
    let mut values = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        values.push(record.mass_x[k] - record.mass_x[0] - two * sum);
        if k < steps {
            for j in 0..model.len() {
                sum += record.ito_weights[j][k] * record.path.increment(j, k);
            }
        }
    }
    Ok(ResidualSeries::new(record.times.clone(), values))
}

/// Quadrature for the time integral in the energy identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyQuadrature {
    /// `int_{t_i}^{t_{i+1}} V E ds ~ E(t_i) dQ(i)`.
    LeftEndpoint,
    /// Integrates `E' = -2 a V E` exactly across each cell from `E(t_i)`:
    /// `E(t_i) (1 - exp(-2 sum_j a_j^2 dQ_j(i)))`.
    ExactExponential,
}

/// Residual of `E_0(t) = ||x||^2 - 2 sum_j (Re mu_j)^2 int_0^t V_j E_0 ds`.
pub fn energy_identity_residual<T: Real>(
    record: &SolutionRecord<T>,
    model: &NoiseModel<T>,
    quadrature: EnergyQuadrature,
) -> Result<ResidualSeries<T>> {
    if record.scheme() != Scheme::Rescaled {
        return Err(Error::arg("record", "energy identity residual needs a rescaled-scheme record"));
    }
    if !model.is_spatially_homogeneous() {
        return Err(Error::AssumptionVeto("energy identity is stated for homogeneous noise".to_string()));
    }
    record.path.check_model(model)?;
    let a2: Vec<T> = model.components().iter().map(|c| c.mu.re * c.mu.re).collect();
    let two = T::lit(2.0);
    let e = &record.mass_y;
    let steps = record.steps();
    let mut integral = T::zero();
    let mut values = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        values.push(e[k] - e[0] + integral);
        if k < steps {
            let rate: T = a2.iter().enumerate().map(|(j, &a)| a * record.path.dq(j, k)).sum();
            integral += match quadrature {
                EnergyQuadrature::LeftEndpoint => two * rate * e[k],
                EnergyQuadrature::ExactExponential => -e[k] * (-two * rate).exp_m1(),
            };
        }
    }
    Ok(ResidualSeries::new(record.times.clone(), values))
}

/// `omega = 2 alpha_0 sum_j (Re mu_j)^2`, defined only in the homogeneous
/// non-degenerate regime.
pub fn omega<T: Real>(model: &NoiseModel<T>) -> Result<T> {
    for (j, c) in model.components().iter().enumerate() {
        if c.mu.re == T::zero() {
            return Err(Error::AssumptionVeto(format!(
                "omega undefined: Re mu_{} = 0 (purely imaginary coefficient)",
                j + 1
            )));
        }
        if !c.profile.is_constant_one() {
            return Err(Error::AssumptionVeto(format!("omega undefined: e_{} is not identically 1", j + 1)));
        }
    }
    let alpha0 = model.alpha0();
    if !(alpha0 > T::zero()) {
        return Err(Error::AssumptionVeto(format!("omega undefined: alpha_0 = {alpha0}")));
    }
    let s: T = model.components().iter().map(|c| c.mu.re * c.mu.re).sum();
    Ok(T::lit(2.0) * alpha0 * s)
}

/// Time window `[start, end]` of a decay fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
}

impl FitWindow {
    pub fn with_burn_in(horizon: f64) -> Self {
        Self {
            start: BURN_IN * horizon,
            end: horizon,
        }
    }
}

/// Least-squares fit of `log E` on a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Window actually used, after underflow truncation.
    pub window: FitWindow,
    pub points: usize,
}

pub fn decay_fit<T: Real>(times: &[T], masses: &[T], window: FitWindow) -> Result<LogLinearFit> {
    if times.len() != masses.len() || times.is_empty() {
        return Err(Error::arg("mass_series", "times and masses must have equal nonzero length"));
    }
    let first = times[0].to_f64_lossy();
    let last = times[times.len() - 1].to_f64_lossy();
    let eps = 1e-9 * (last - first).abs().max(1.0);
    if !(window.start < window.end) || window.start < first - eps || window.end > last + eps {
        return Err(Error::arg(
            "fit_window",
            format!("[{}, {}] outside the series range [{first}, {last}]", window.start, window.end),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, m) in times.iter().zip(masses) {
        let (t, m) = (t.to_f64_lossy(), m.to_f64_lossy());
        if t < window.start - eps || t > window.end + eps {
            continue;
        }
        if m.is_nan() || m < 0.0 {
            return Err(Error::arg("mass_series", format!("mass {m} at t = {t} is not positive")));
        }
        if m < MASS_FLOOR {
            break;
        }
        xs.push(t);
        ys.push(m.ln());
    }
    if xs.len() < 2 {
        return Err(Error::arg("mass_series", "fewer than two usable points in the fit window"));
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    Ok(LogLinearFit {
        slope,
        intercept,
        window: FitWindow {
            start: xs[0],
            end: xs[xs.len() - 1],
        },
        points: xs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub omega: f64,
    /// Slope of `log E_0` over the fit window.
    pub fitted_slope: f64,
    /// `(1/T) log(||X(T)||^2 / ||x||^2)`.
    pub lyapunov: f64,
    /// `Re M(T) / T`.
    pub lln_ratio: f64,
    /// `fitted_slope + omega`; nonpositive when the fit respects the bound.
    pub margin: f64,
    pub fit_window: FitWindow,
    /// `(1/T) log(E_0(T) / E_0(0))`; adding `2 lln_ratio` gives `lyapunov`.
    pub lyapunov_rescaled: f64,
}

/// Endpoint quotient with the underflow floor: if the series drops below
/// the floor the last representable time is used instead.
fn endpoint_rate<T: Real>(times: &[T], masses: &[T]) -> Result<(f64, usize)> {
    let m0 = masses[0].to_f64_lossy();
    if !(m0 > 0.0) {
        return Err(Error::arg("mass_series", "initial mass must be positive"));
    }
    let mut k = masses.len() - 1;
    while k > 0 && !(masses[k].to_f64_lossy() >= MASS_FLOOR) {
        k -= 1;
    }
    if k == 0 {
        return Err(Error::arg("mass_series", "mass underflows immediately"));
    }
    let t = (times[k] - times[0]).to_f64_lossy();
    Ok(((masses[k].to_f64_lossy() / m0).ln() / t, k))
}

pub fn decay_report<T: Real>(
    record: &SolutionRecord<T>,
    model: &NoiseModel<T>,
    window: Option<FitWindow>,
) -> Result<DecayReport> {
    let omega = omega(model)?.to_f64_lossy();
    let horizon = record.horizon().to_f64_lossy();
    let window = window.unwrap_or_else(|| FitWindow::with_burn_in(horizon));
    let fit = decay_fit(&record.times, &record.mass_y, window)?;
    let (lyapunov, _) = endpoint_rate(&record.times, &record.mass_x)?;
    let (lyapunov_rescaled, _) = endpoint_rate(&record.times, &record.mass_y)?;
    let lln = lln_ratio(model, &record.path, record.steps())?.to_f64_lossy();
    Ok(DecayReport {
        omega,
        fitted_slope: fit.slope,
        lyapunov,
        lln_ratio: lln,
        margin: fit.slope + omega,
        fit_window: fit.window,
        lyapunov_rescaled,
    })
}

/// Largest relative deviation from `||X||^2 = e^{2 Re M} ||y||^2` over the
/// saved snapshots.
pub fn bridge_deviation<T: Real>(record: &SolutionRecord<T>, model: &NoiseModel<T>) -> Result<f64> {
    if !model.is_spatially_homogeneous() {
        return Err(Error::AssumptionVeto("bridge identity needs homogeneous noise".to_string()));
    }
    let mut worst = 0.0f64;
    for s in &record.snapshots {
        let lhs = s.mass_x.to_f64_lossy();
        let rhs = (2.0 * record.re_m[s.index].to_f64_lossy()).exp() * s.mass_y.to_f64_lossy();
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Steps with `E_0(t_k) > e^{-omega t_k} E_0(0) (1 + 1e-8)`.
    pub envelope_violations: usize,
    /// Steps with `E_0(t_{k+1}) > E_0(t_k)`.
    pub monotone_violations: usize,
    /// Largest `E_0(t_k) / (e^{-omega t_k} E_0(0))`.
    pub max_envelope_ratio: f64,
}

impl EnvelopeReport {
    pub fn clean(&self) -> bool {
        self.envelope_violations == 0 && self.monotone_violations == 0
    }
}

/// Checks the Gronwall envelope and monotonicity of `E_0` at every step.
pub fn envelope_check<T: Real>(record: &SolutionRecord<T>, model: &NoiseModel<T>) -> Result<EnvelopeReport> {
    let omega = omega(model)?.to_f64_lossy();
    let e0 = record.mass_y[0].to_f64_lossy();
    let t0 = record.times[0].to_f64_lossy();
    let mut report = EnvelopeReport {
        envelope_violations: 0,
        monotone_violations: 0,
        max_envelope_ratio: 0.0,
    };
    for (k, (t, e)) in record.times.iter().zip(&record.mass_y).enumerate() {
        let e = e.to_f64_lossy();
        let bound = (-omega * (t.to_f64_lossy() - t0)).exp() * e0;
        if bound > 0.0 {
            report.max_envelope_ratio = report.max_envelope_ratio.max(e / bound);
        }
        if e > bound * (1.0 + ENVELOPE_SLACK) {
            report.envelope_violations += 1;
        }
        if k > 0 && e > record.mass_y[k - 1].to_f64_lossy() {
            report.monotone_violations += 1;
        }
    }
    Ok(report)
}

/// Linearly interpolated quantile (the "type 7" rule) of unsorted data.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

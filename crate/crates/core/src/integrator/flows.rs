//! Exactly solvable sub-flows and their splitting composition.
//!
//! Every piece except the Laplacian is a pointwise ODE with a closed-form
//! solution:
//!
//! * nonlinear phase: `y <- y exp(-i lambda w |y|^(alpha-1) dt)` with weight
//!   `w = e^((alpha-1) Re M)` in the rescaled equation and `w = 1` in the
//!   direct one; `|y|` is invariant along this flow.
//! * damping (rescaled): `y <- y exp(-(1/2) sum_j (|mu_j|^2 + mu_j^2) e_j^2 dQ_j)`.
//! * noise (direct): `X <- X exp(dM(xi) - (1/2) sum_j (mu_j^2 + |mu_j|^2) e_j^2 dQ_j)`,
//!   the Ito exponential of the multiplicative noise plus its correction.
//!
//! so all discretisation error comes from the splitting itself.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, FftScratch, Fourier, Propagator};
use crate::noise::{MartingalePath, NoiseModel};
use crate::rescaling::OVERFLOW_GUARD;
use crate::scalar::Real;

use super::params::{Scheme, SimParams, Splitting};

#[inline]
fn modulus_power<T: Real>(v: Complex<T>, alpha: T) -> T {
    let n2 = v.norm_sqr();
    if alpha == T::lit(3.0) {
        n2
    } else {
        n2.powf((alpha - T::one()) * T::lit(0.5))
    }
}

/// Phase rotation in place; `weight` multiplies the nonlinearity pointwise
/// or, when it has length one, uniformly.
pub(crate) fn phase_in_place<T: Real>(values: &mut [Complex<T>], dt: T, lambda: i32, alpha: T, weight: &[T]) {
    if lambda == 0 || dt == T::zero() {
        return;
    }
    let lam = T::lit(lambda as f64);
    let uniform = weight.len() == 1;
    for (i, v) in values.iter_mut().enumerate() {
        let w = if uniform { weight[0] } else { weight[i] };
        let theta = -lam * w * modulus_power(*v, alpha) * dt;
        *v = *v * Complex::from_polar(T::one(), theta);
    }
}

/// Exact flow of `dy = -i lambda e^((alpha-1) Re M) |y|^(alpha-1) y dt`.
pub fn nonlinear_phase_step<T: Real>(
    y: &ComplexField<T>,
    dt: T,
    lambda: i32,
    alpha: T,
    re_m: &[T],
) -> Result<ComplexField<T>> {
    if dt < T::zero() {
        return Err(Error::arg("dt", "phase step needs dt >= 0".to_string()));
    }
    if re_m.len() != y.values().len() && re_m.len() != 1 {
        return Err(Error::GridMismatch("Re M field has the wrong length".to_string()));
    }
    let weight: Vec<T> = re_m.iter().map(|&m| ((alpha - T::one()) * m).exp()).collect();
    let mut out = y.clone();
    phase_in_place(out.values_mut(), dt, lambda, alpha, &weight);
    Ok(out)
}

fn check_exponent<T: Real>(re: T, k: usize) -> Result<()> {
    if re.abs() > T::lit(OVERFLOW_GUARD) || re.is_nan() {
        return Err(Error::NumericalAbort {
            index: k,
            reason: format!("exponent {re} exceeds the overflow guard"),
        });
    }
    Ok(())
}

fn check_step<T: Real>(model: &NoiseModel<T>, path: &MartingalePath<T>, k: usize) -> Result<()> {
    path.check_model(model)?;
    if k >= path.steps() {
        return Err(Error::arg("k", format!("increment index {k} beyond path of {} steps", path.steps())));
    }
    Ok(())
}

/// Per-point coefficient `(1/2)(|mu_j|^2 + mu_j^2) e_j^2`, or its scalar
/// value for homogeneous models.
fn damping_coefficients<T: Real>(model: &NoiseModel<T>, homogeneous: bool) -> Vec<Vec<Complex<T>>> {
    let half = T::lit(0.5);
    model
        .components()
        .iter()
        .map(|c| {
            let base = (Complex::new(c.mu.norm_sqr(), T::zero()) + c.mu * c.mu) * half;
            if homogeneous {
                vec![base]
            } else {
                c.profile.values().iter().map(|&e| base * (e * e)).collect()
            }
        })
        .collect()
}

fn mu_profiles<T: Real>(model: &NoiseModel<T>, homogeneous: bool) -> Vec<Vec<Complex<T>>> {
    model
        .components()
        .iter()
        .map(|c| {
            if homogeneous {
                vec![c.mu]
            } else {
                c.profile.values().iter().map(|&e| c.mu * e).collect()
            }
        })
        .collect()
}

/// Exact damping flow of the rescaled equation over the increment `k`.
pub fn damping_step<T: Real>(
    y: &ComplexField<T>,
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    k: usize,
) -> Result<ComplexField<T>> {
    check_step(model, path, k)?;
    model.check_grid(y.grid())?;
    let coeffs = damping_coefficients(model, false);
    let mut out = y.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let mut expo = Complex::new(T::zero(), T::zero());
        for (j, c) in coeffs.iter().enumerate() {
            expo -= c[i] * path.dq(j, k);
        }
        check_exponent(expo.re, k)?;
        *v = *v * expo.exp();
    }
    Ok(out)
}

/// Exact noise-plus-correction flow of the direct equation over increment `k`.
pub fn noise_step_direct<T: Real>(
    x: &ComplexField<T>,
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    k: usize,
) -> Result<ComplexField<T>> {
    check_step(model, path, k)?;
    model.check_grid(x.grid())?;
    let coeffs = damping_coefficients(model, false);
    let mus = mu_profiles(model, false);
    let mut out = x.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let mut expo = Complex::new(T::zero(), T::zero());
        for j in 0..coeffs.len() {
            expo += mus[j][i] * path.increment(j, k) - coeffs[j][i] * path.dq(j, k);
        }
        check_exponent(expo.re, k)?;
        *v = *v * expo.exp();
    }
    Ok(out)
}

/// Reusable stepping machinery for one (model, params) pair.
pub struct Stepper<'a, T: Real> {
    fourier: Arc<Fourier<T>>,
    model: &'a NoiseModel<T>,
    params: SimParams<T>,
    homogeneous: bool,
    coeffs: Vec<Vec<Complex<T>>>,
    mus: Vec<Vec<Complex<T>>>,
    half: Propagator<T>,
    full: Propagator<T>,
    scratch: FftScratch<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(fourier: Arc<Fourier<T>>, model: &'a NoiseModel<T>, params: &SimParams<T>) -> Result<Self> {
        model.check_grid(fourier.grid())?;
        params.validate(fourier.grid().dimension())?;
        let homogeneous = model.is_spatially_homogeneous();
        if params.scheme == Scheme::Rescaled && !homogeneous {
            return Err(Error::AssumptionVeto(
                "rescaled scheme needs spatially homogeneous noise (all e_j = 1); use scheme = direct".to_string(),
            ));
        }
        let half = fourier.propagator(params.dt * T::lit(0.5));
        let full = fourier.propagator(params.dt);
        let scratch = fourier.scratch();
        Ok(Self {
            coeffs: damping_coefficients(model, homogeneous),
            mus: mu_profiles(model, homogeneous),
            fourier,
            model,
            params: params.clone(),
            homogeneous,
            half,
            full,
            scratch,
        })
    }

    pub fn params(&self) -> &SimParams<T> {
        &self.params
    }

    pub fn fourier(&self) -> &Arc<Fourier<T>> {
        &self.fourier
    }

    fn linear(&mut self, values: &mut [Complex<T>], half: bool) {
        let prop = if half { &self.half } else { &self.full };
        self.fourier.apply_propagator(values, prop, &mut self.scratch);
    }

    /// Multiplicative sub-flow (noise for the direct scheme, damping for
    /// the rescaled one) over increment `k`.
    fn multiplicative(&mut self, values: &mut [Complex<T>], path: &MartingalePath<T>, k: usize) -> Result<()> {
        let direct = self.params.scheme == Scheme::Direct;
        let n_comp = self.coeffs.len();
        if self.homogeneous {
            let mut expo = Complex::new(T::zero(), T::zero());
            for j in 0..n_comp {
                expo -= self.coeffs[j][0] * path.dq(j, k);
                if direct {
                    expo += self.mus[j][0] * path.increment(j, k);
                }
            }
            check_exponent(expo.re, k)?;
            let factor = expo.exp();
            values.iter_mut().for_each(|v| *v = *v * factor);
            return Ok(());
        }
        for (i, v) in values.iter_mut().enumerate() {
            let mut expo = Complex::new(T::zero(), T::zero());
            for j in 0..n_comp {
                expo -= self.coeffs[j][i] * path.dq(j, k);
                if direct {
                    expo += self.mus[j][i] * path.increment(j, k);
                }
            }
            check_exponent(expo.re, k)?;
            *v = *v * expo.exp();
        }
        Ok(())
    }

    /// Nonlinearity weight at the start of step `k`.
    fn phase_weight(&self, path: &MartingalePath<T>, k: usize) -> T {
        match self.params.scheme {
            Scheme::Direct => T::one(),
            Scheme::Rescaled => ((self.params.alpha - T::one()) * path.re_m(self.model, k)).exp(),
        }
    }

    /// Advances `state` from `t_k` to `t_{k+1}`.
    ///
    /// Strang: half linear, half phase, full noise/damping, half phase,
    /// half linear. Lie: linear, phase, noise/damping.
    pub fn step(&mut self, state: &mut [Complex<T>], path: &MartingalePath<T>, k: usize) -> Result<()> {
        if k >= path.steps() {
            return Err(Error::arg("k", format!("step {k} beyond path of {} steps", path.steps())));
        }
        let dt = self.params.dt;
        let (lambda, alpha) = (self.params.lambda, self.params.alpha);
        let w = [self.phase_weight(path, k)];
        match self.params.splitting {
            Splitting::Strang => {
                let h = dt * T::lit(0.5);
                self.linear(state, true);
                phase_in_place(state, h, lambda, alpha, &w);
                self.multiplicative(state, path, k)?;
                phase_in_place(state, h, lambda, alpha, &w);
                self.linear(state, true);
            }
            Splitting::Lie => {
                self.linear(state, false);
                phase_in_place(state, dt, lambda, alpha, &w);
                self.multiplicative(state, path, k)?;
            }
        }
        Ok(())
    }
}

/// One step of the configured composition; allocates a fresh stepper.
pub fn step<T: Real>(
    state: &ComplexField<T>,
    path: &MartingalePath<T>,
    k: usize,
    params: &SimParams<T>,
    model: &NoiseModel<T>,
) -> Result<ComplexField<T>> {
    let fourier = Arc::new(Fourier::new(Arc::clone(state.grid())));
    let mut stepper = Stepper::new(fourier, model, params)?;
    let mut out = state.clone();
    stepper.step(out.values_mut(), path, k)?;
    Ok(out)
}

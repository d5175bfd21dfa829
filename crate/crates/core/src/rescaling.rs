//! The change of variables `X = e^M y` and the potential fields of the
//! rescaled equation
//!
//! ```text
//! dy = -i (Delta + b . grad + c) y dt - gamma y dt
//!      - lambda i e^((alpha-1) Re M) |y|^(alpha-1) y dt,
//! b = 2 grad M,   c = sum_j (d_j M)^2 + Delta M,
//! gamma = (1/2) sum_j (|mu_j|^2 + mu_j^2) e_j^2 V_j(t).
//! ```

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Fourier};
use crate::noise::{noise_field_with_derivatives, MartingalePath, NoiseModel};
use crate::scalar::Real;

/// Largest `|Re M|` accepted before `exp` leaves the double range.
pub const OVERFLOW_GUARD: f64 = 700.0;

pub(crate) fn guard<T: Real>(m: &ComplexField<T>) -> Result<()> {
    let limit = T::lit(OVERFLOW_GUARD);
    let worst = m
        .values()
        .iter()
        .map(|v| v.re.abs())
        .fold(T::zero(), T::max);
    if worst > limit || worst.is_nan() {
        return Err(Error::Overflow {
            max_re_m: worst.to_f64_lossy(),
        });
    }
    Ok(())
}

fn pointwise_exp_mul<T: Real>(
    field: &ComplexField<T>,
    m: &ComplexField<T>,
    sign: T,
) -> Result<ComplexField<T>> {
    field.check_same_grid(m)?;
    guard(m)?;
    let values = field
        .values()
        .iter()
        .zip(m.values())
        .map(|(v, mm)| v * (mm * sign).exp())
        .collect();
    ComplexField::from_values(Arc::clone(field.grid()), values)
}

/// `y = e^{-M} X`.
pub fn to_rescaled<T: Real>(x: &ComplexField<T>, m: &ComplexField<T>) -> Result<ComplexField<T>> {
    pointwise_exp_mul(x, m, -T::one())
}

/// `X = e^{M} y`.
pub fn from_rescaled<T: Real>(y: &ComplexField<T>, m: &ComplexField<T>) -> Result<ComplexField<T>> {
    pointwise_exp_mul(y, m, T::one())
}

/// Potential fields at one time level.
#[derive(Clone, Debug)]
pub struct RescaledPotential<T> {
    /// Advection field `b = 2 grad M`, one component per axis.
    pub b: Vec<ComplexField<T>>,
    /// `c = sum_j (d_j M)^2 + Delta M`.
    pub c: ComplexField<T>,
    /// Damping coefficient `gamma`.
    pub gamma: ComplexField<T>,
}

impl<T: Real> RescaledPotential<T> {
    /// `Delta y + b . grad y + c y`, evaluated spectrally.
    pub fn apply_operator(&self, y: &ComplexField<T>, fourier: &Fourier<T>) -> Result<ComplexField<T>> {
        let mut out = fourier.laplacian(y)?;
        let grad = fourier.gradient(y)?;
        for (b, g) in self.b.iter().zip(&grad) {
            for ((o, bv), gv) in out.values_mut().iter_mut().zip(b.values()).zip(g.values()) {
                *o += bv * gv;
            }
        }
        for ((o, cv), yv) in out.values_mut().iter_mut().zip(self.c.values()).zip(y.values()) {
            *o += cv * yv;
        }
        Ok(out)
    }
}

/// Potential fields `(b, c, gamma)` at time `t_k`.
pub fn potential_fields<T: Real>(
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    k: usize,
    fourier: &Fourier<T>,
) -> Result<RescaledPotential<T>> {
    let parts = noise_field_with_derivatives(model, path, k, fourier)?;
    let grid = Arc::clone(model.grid());
    let two = T::lit(2.0);
    let b = parts.gradient.iter().map(|g| g.scaled(Complex::new(two, T::zero()))).collect();
    let mut c = parts.laplacian.clone();
    for g in &parts.gradient {
        for (cv, gv) in c.values_mut().iter_mut().zip(g.values()) {
            *cv += gv * gv;
        }
    }
    let t = path.time(k);
    let half = T::lit(0.5);
    let mut gamma = ComplexField::zeros(Arc::clone(&grid));
    for comp in model.components() {
        let coeff = (Complex::new(comp.mu.norm_sqr(), T::zero()) + comp.mu * comp.mu)
            * (half * comp.density.eval(t));
        for (g, &e) in gamma.values_mut().iter_mut().zip(comp.profile.values()) {
            *g += coeff * (e * e);
        }
    }
    Ok(RescaledPotential { b, c, gamma })
}

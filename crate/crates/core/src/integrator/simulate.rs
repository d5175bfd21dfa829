use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Fourier};
use crate::noise::{sample_martingale, MartingalePath, NoiseModel};
use crate::rescaling::OVERFLOW_GUARD;
use crate::scalar::Real;

use super::flows::Stepper;
use super::params::{Scheme, SimParams};
use super::record::{Snapshot, SolutionRecord};

/// Samples path `0` for `seed` and integrates from `initial`.
pub fn simulate<T: Real>(
    model: &NoiseModel<T>,
    params: &SimParams<T>,
    initial: &ComplexField<T>,
    seed: u64,
) -> Result<SolutionRecord<T>> {
    params.validate(initial.grid().dimension())?;
    let path = sample_martingale(model, params.dt, params.steps(), seed)?;
    let mut record = simulate_with_path(model, params, initial, &path)?;
    record.seed = Some(seed);
    Ok(record)
}

/// Per-point real part `Re M(t_k, xi)` and complex `M(t_k, xi)`.
struct NoiseLevel<T> {
    m: Vec<Complex<T>>,
}

impl<T: Real> NoiseLevel<T> {
    fn at(model: &NoiseModel<T>, path: &MartingalePath<T>, k: usize, homogeneous: bool) -> Self {
        let len = if homogeneous { 1 } else { model.grid().len() };
        let mut m = vec![Complex::new(T::zero(), T::zero()); len];
        for (j, c) in model.components().iter().enumerate() {
            let mj = path.value(j, k);
            if homogeneous {
                m[0] += c.mu * mj;
            } else {
                for (v, &e) in m.iter_mut().zip(c.profile.values()) {
                    *v += c.mu * (e * mj);
                }
            }
        }
        Self { m }
    }

    fn max_abs_re(&self) -> T {
        self.m.iter().map(|v| v.re.abs()).fold(T::zero(), T::max)
    }

    fn get(&self, i: usize) -> Complex<T> {
        if self.m.len() == 1 {
            self.m[0]
        } else {
            self.m[i]
        }
    }
}

fn apply_exp<T: Real>(values: &[Complex<T>], level: &NoiseLevel<T>, sign: T) -> Vec<Complex<T>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v * (level.get(i) * sign).exp())
        .collect()
}

fn weighted_mass<T: Real>(values: &[Complex<T>], level: &NoiseLevel<T>, sign: T, cell: T) -> T {
    let two = T::lit(2.0);
    let s: T = values
        .iter()
        .enumerate()
        .map(|(i, v)| v.norm_sqr() * (two * sign * level.get(i).re).exp())
        .sum();
    s * cell
}

/// Integrates along a given path; the path must match the step size and
/// step count of `params`.
pub fn simulate_with_path<T: Real>(
    model: &NoiseModel<T>,
    params: &SimParams<T>,
    initial: &ComplexField<T>,
    path: &MartingalePath<T>,
) -> Result<SolutionRecord<T>> {
    let start = Instant::now();
    let grid = Arc::clone(initial.grid());
    model.check_grid(&grid)?;
    path.check_model(model)?;
    params.validate(grid.dimension())?;
    let steps = params.steps();
    if path.steps() != steps || (path.dt() - params.dt).abs() > T::lit(1e-9) * params.dt {
        return Err(Error::arg(
            "path",
            format!("path has {} steps of {}, params need {} of {}", path.steps(), path.dt(), steps, params.dt),
        ));
    }
    if !initial.is_finite() {
        return Err(Error::NumericalAbort {
            index: 0,
            reason: "initial data is not finite".to_string(),
        });
    }
    let fourier = Arc::new(Fourier::new(Arc::clone(&grid)));
    let mut stepper = Stepper::new(Arc::clone(&fourier), model, params)?;
    let homogeneous = model.is_spatially_homogeneous();
    let cell = grid.cell_volume();
    let stride = params.snapshot_stride();
    let one = T::one();

    let n_comp = model.len();
    let mut times = Vec::with_capacity(steps + 1);
    let mut mass_x = Vec::with_capacity(steps + 1);
    let mut mass_y = Vec::with_capacity(steps + 1);
    let mut re_m = Vec::with_capacity(steps + 1);
    let mut ito_weights = vec![Vec::with_capacity(steps); n_comp];
    let mut snapshots = Vec::new();
    let re_profiles: Vec<Vec<T>> = model
        .components()
        .iter()
        .map(|c| c.profile.values().iter().map(|&e| c.mu.re * e).collect())
        .collect();

    // Rescaled runs start from y(0) = x since M(0) = 0.
    let mut state = initial.values().to_vec();
    for k in 0..=steps {
        let level = NoiseLevel::at(model, path, k, homogeneous);
        let worst = level.max_abs_re();
        if worst > T::lit(OVERFLOW_GUARD) || worst.is_nan() {
            return Err(Error::NumericalAbort {
                index: k,
                reason: format!("|Re M| = {worst} exceeds the overflow guard {OVERFLOW_GUARD}"),
            });
        }
        let state_mass: T = state.iter().map(|v| v.norm_sqr()).sum::<T>() * cell;
        if !state_mass.is_finite() {
            return Err(Error::NumericalAbort {
                index: k,
                reason: "state is no longer finite".to_string(),
            });
        }
        let (mx, my) = match (params.scheme, homogeneous) {
            (Scheme::Rescaled, _) => (state_mass * (T::lit(2.0) * level.m[0].re).exp(), state_mass),
            (Scheme::Direct, true) => (state_mass, state_mass * (-T::lit(2.0) * level.m[0].re).exp()),
            (Scheme::Direct, false) => (state_mass, weighted_mass(&state, &level, -one, cell)),
        };
        times.push(path.time(k));
        mass_x.push(mx);
        mass_y.push(my);
        re_m.push(path.re_m(model, k));

        let x_values = |s: &[Complex<T>]| -> Vec<Complex<T>> {
            match params.scheme {
                Scheme::Direct => s.to_vec(),
                Scheme::Rescaled => apply_exp(s, &level, one),
            }
        };
        if k < steps {
            if homogeneous {
                for (j, c) in model.components().iter().enumerate() {
                    ito_weights[j].push(c.mu.re * mx);
                }
            } else {
                let x = x_values(&state);
                for j in 0..n_comp {
                    let w: T = x
                        .iter()
                        .zip(&re_profiles[j])
                        .map(|(v, &r)| r * v.norm_sqr())
                        .sum();
                    ito_weights[j].push(w * cell);
                }
            }
        }

        if k % stride == 0 || k == steps {
            let x_field = ComplexField::from_values(Arc::clone(&grid), x_values(&state))?;
            let y_vals = match params.scheme {
                Scheme::Rescaled => state.clone(),
                Scheme::Direct => apply_exp(&state, &level, -one),
            };
            let y_field = ComplexField::from_values(Arc::clone(&grid), y_vals)?;
            if !x_field.is_finite() {
                return Err(Error::NumericalAbort {
                    index: k,
                    reason: "reconstructed field is not finite".to_string(),
                });
            }
            snapshots.push(Snapshot {
                index: k,
                time: path.time(k),
                mass_x: x_field.mass(),
                mass_y: y_field.mass(),
                x: params.save_fields.then(|| x_field.clone()),
                y: params.save_fields.then(|| y_field.clone()),
            });
        }
        if k < steps {
            stepper.step(&mut state, path, k)?;
        }
    }

    let last = NoiseLevel::at(model, path, steps, homogeneous);
    let (final_x, final_y) = match params.scheme {
        Scheme::Rescaled => (apply_exp(&state, &last, one), state),
        Scheme::Direct => {
            let y = apply_exp(&state, &last, -one);
            (state, y)
        }
    };
    let final_x = ComplexField::from_values(Arc::clone(&grid), final_x)?;
    let final_y = ComplexField::from_values(Arc::clone(&grid), final_y)?;
    let tail_fraction = match params.scheme {
        Scheme::Direct => fourier.spectral_tail_fraction(&final_x),
        Scheme::Rescaled => fourier.spectral_tail_fraction(&final_y),
    };
    Ok(SolutionRecord {
        params: params.clone(),
        seed: None,
        times,
        mass_x,
        mass_y,
        re_m,
        ito_weights,
        snapshots,
        initial: initial.clone(),
        final_x,
        final_y,
        path: path.clone(),
        wall_time: start.elapsed().as_secs_f64(),
        tail_fraction,
    })
}

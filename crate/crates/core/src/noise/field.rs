//! Assembly of the spatial noise field `M(t, xi) = sum_j mu_j e_j(xi) M_j(t)`.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Fourier};
use crate::scalar::Real;

use super::model::NoiseModel;
use super::path::MartingalePath;

/// Noise field with its spectral gradient and Laplacian.
#[derive(Clone, Debug)]
pub struct NoiseFieldParts<T> {
    pub field: ComplexField<T>,
    pub gradient: Vec<ComplexField<T>>,
    pub laplacian: ComplexField<T>,
}

fn combine<T: Real>(model: &NoiseModel<T>, weights: impl Fn(usize) -> T) -> ComplexField<T> {
    let grid = Arc::clone(model.grid());
    let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for (j, comp) in model.components().iter().enumerate() {
        let w = weights(j);
        if w == T::zero() {
            continue;
        }
        let coeff = comp.mu * w;
        for (v, &e) in values.iter_mut().zip(comp.profile.values()) {
            *v += coeff * e;
        }
    }
    ComplexField::from_values(grid, values).expect("field sized from model grid")
}

fn check_index<T: Real>(model: &NoiseModel<T>, path: &MartingalePath<T>, k: usize, last: usize) -> Result<()> {
    path.check_model(model)?;
    if k > last {
        return Err(Error::arg("k", format!("time index {k} outside path range 0..={last}")));
    }
    Ok(())
}

/// `M(t_k, .)`.
pub fn noise_field<T: Real>(
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    k: usize,
) -> Result<ComplexField<T>> {
    check_index(model, path, k, path.steps())?;
    Ok(combine(model, |j| path.value(j, k)))
}

/// `M(t_{k+1}, .) - M(t_k, .)`.
pub fn noise_increment_field<T: Real>(
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    k: usize,
) -> Result<ComplexField<T>> {
    if path.steps() == 0 {
        return Err(Error::arg("k", "path has no increments".to_string()));
    }
    check_index(model, path, k, path.steps() - 1)?;
    Ok(combine(model, |j| path.increment(j, k)))
}

/// `M(t_k, .)` together with `grad M` and `Delta M`, differentiated
/// spectrally from the assembled field. Homogeneous models return exact zeros.
pub fn noise_field_with_derivatives<T: Real>(
    model: &NoiseModel<T>,
    path: &MartingalePath<T>,
    k: usize,
    fourier: &Fourier<T>,
) -> Result<NoiseFieldParts<T>> {
    model.check_grid(fourier.grid())?;
    let field = noise_field(model, path, k)?;
    let grid = Arc::clone(model.grid());
    if model.is_spatially_homogeneous() {
        return Ok(NoiseFieldParts {
            gradient: (0..grid.dimension())
                .map(|_| ComplexField::zeros(Arc::clone(&grid)))
                .collect(),
            laplacian: ComplexField::zeros(grid),
            field,
        });
    }
    let gradient = fourier.gradient(&field)?;
    let laplacian = fourier.laplacian(&field)?;
    Ok(NoiseFieldParts {
        field,
        gradient,
        laplacian,
    })
}

//! Periodic spectral grid, discrete Fourier transforms, operator symbols and
//! discrete norms.
//!
//! The physical domain is the torus `[-L, L)^d` sampled at `n` points per
//! axis with spacing `h = 2L/n`. Values are stored row-major (the last axis
//! varies fastest). Wavenumbers follow the FFT ordering
//! `k_m = pi m / L` for `m = 0, 1, ..., n/2 - 1, -n/2, ..., -1`, so the entry
//! at array position `n/2` is the Nyquist mode `-pi n / (2L)`.
//!
//! Norms use the rectangle rule `h^d sum |v_i|^p`, which is exact for
//! trigonometric polynomials below the Nyquist frequency.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Supported spatial dimensions.
pub const MAX_DIMENSION: usize = 3;

/// Fraction of wavenumbers (per axis, from the top) that counts as the
/// spectral tail in [`Fourier::spectral_tail_fraction`].
pub const TAIL_BAND: f64 = 0.1;

/// Tail mass above which a field is flagged as under-resolved.
pub const TAIL_WARNING_THRESHOLD: f64 = 1e-8;

/// Uniform periodic grid on `[-L, L)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<T> {
    dimension: usize,
    points: usize,
    half_length: T,
    spacing: T,
    cell_volume: T,
    wavenumbers: Vec<T>,
}

impl<T: Real> GridSpec<T> {
    /// Builds a grid with `points` samples per axis on `[-half_length, half_length)^dimension`.
    pub fn new(dimension: usize, points: usize, half_length: T) -> Result<Self> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(Error::Grid(format!(
                "dimension must be 1, 2 or 3 (got {dimension})"
            )));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "points per axis must be a power of two >= 4 (got {points})"
            )));
        }
        if !(half_length > T::zero()) || !half_length.is_finite() {
            return Err(Error::Grid(format!(
                "half-length must be positive and finite (got {half_length})"
            )));
        }
        let n = T::from_usize_lossy(points);
        let spacing = (half_length + half_length) / n;
        let cell_volume = spacing.powi(dimension as i32);
        let half = points / 2;
        let base = T::PI() / half_length;
        let wavenumbers = (0..points)
            .map(|i| {
                let m = if i < half {
                    i as f64
                } else {
                    i as f64 - points as f64
                };
                base * T::lit(m)
            })
            .collect();
        Ok(Self {
            dimension,
            points,
            half_length,
            spacing,
            cell_volume,
            wavenumbers,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_length(&self) -> T {
        self.half_length
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    /// Per-axis indices of a flat row-major index.
    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIMENSION] {
        let mut idx = [0usize; MAX_DIMENSION];
        let mut rem = flat;
        for axis in (0..self.dimension).rev() {
            idx[axis] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    /// Physical coordinate of grid index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> T {
        -self.half_length + self.spacing * T::from_usize_lossy(i)
    }

    /// Physical position of a flat index (unused axes are zero).
    pub fn position(&self, flat: usize) -> [T; MAX_DIMENSION] {
        let idx = self.unravel(flat);
        let mut x = [T::zero(); MAX_DIMENSION];
        for axis in 0..self.dimension {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Squared Euclidean distance of a flat index from the origin.
    pub fn radius_sq(&self, flat: usize) -> T {
        self.position(flat).iter().map(|&c| c * c).sum()
    }

    /// Wavevector of a flat spectral index.
    pub fn wavevector(&self, flat: usize) -> [T; MAX_DIMENSION] {
        let idx = self.unravel(flat);
        let mut k = [T::zero(); MAX_DIMENSION];
        for axis in 0..self.dimension {
            k[axis] = self.wavenumbers[idx[axis]];
        }
        k
    }

    /// Fourier symbol of the Laplacian, `-|k|^2`, in row-major spectral order.
    pub fn laplacian_symbol(&self) -> Vec<T> {
        (0..self.len())
            .map(|flat| {
                -self
                    .wavevector(flat)
                    .iter()
                    .map(|&k| k * k)
                    .sum::<T>()
            })
            .collect()
    }

    /// True when `flat` is a Nyquist mode along `axis`.
    pub fn is_nyquist(&self, flat: usize, axis: usize) -> bool {
        self.unravel(flat)[axis] == self.points / 2
    }
}

/// Complex amplitudes on a grid; the state at a single time.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField<T> {
    values: Vec<Complex<T>>,
    grid: Arc<GridSpec<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn zeros(grid: Arc<GridSpec<T>>) -> Self {
        let values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        Self { values, grid }
    }

    pub fn from_values(grid: Arc<GridSpec<T>>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { values, grid })
    }

    /// Samples `f` at every grid position.
    pub fn from_fn(
        grid: Arc<GridSpec<T>>,
        f: impl Fn([T; MAX_DIMENSION]) -> Complex<T>,
    ) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { values, grid }
    }

    pub fn grid(&self) -> &Arc<GridSpec<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&mut self, factor: Complex<T>) {
        self.values.iter_mut().for_each(|v| *v = *v * factor);
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self - other`, erroring on grid mismatch.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            values,
            grid: Arc::clone(&self.grid),
        })
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "fields live on different grids".to_string(),
            ))
        }
    }

    /// Squared discrete L2 norm, `h^d sum |v|^2`.
    pub fn mass(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).sum::<T>() * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> T {
        self.mass().sqrt()
    }

    /// Discrete L^p norm; `p = inf` gives the maximum modulus.
    pub fn norm_lp(&self, p: T) -> Result<T> {
        if p.is_nan() || p < T::one() {
            return Err(Error::arg("p", format!("L^p norm needs p >= 1 (got {p})")));
        }
        if p.is_infinite() {
            return Ok(self.max_modulus());
        }
        if p == T::lit(2.0) {
            return Ok(self.norm_l2());
        }
        let sum: T = self.values.iter().map(|v| v.norm().powf(p)).sum();
        Ok((sum * self.grid.cell_volume()).powf(T::one() / p))
    }

    pub fn max_modulus(&self) -> T {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

pub fn norm_l2<T: Real>(field: &ComplexField<T>) -> T {
    field.norm_l2()
}

pub fn norm_lp<T: Real>(field: &ComplexField<T>, p: T) -> Result<T> {
    field.norm_lp(p)
}

/// Builds a grid; thin wrapper over [`GridSpec::new`].
pub fn make_grid<T: Real>(dimension: usize, points: usize, half_length: T) -> Result<GridSpec<T>> {
    GridSpec::new(dimension, points, half_length)
}

/// Precomputed Fourier multiplier `exp(i |k|^2 dt)` of the free group
/// generated by `i dX = Delta X dt`.
#[derive(Clone, Debug)]
pub struct Propagator<T> {
    dt: T,
    multipliers: Vec<Complex<T>>,
}

impl<T: Real> Propagator<T> {
    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn multipliers(&self) -> &[Complex<T>] {
        &self.multipliers
    }
}

/// FFT plans bound to a grid.
///
/// Plans are immutable after construction; transforms take caller-owned
/// scratch space so a `Fourier` can be shared between threads.
#[derive(Clone)]
pub struct Fourier<T: Real> {
    grid: Arc<GridSpec<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    symbol: Vec<T>,
}

impl<T: Real> std::fmt::Debug for Fourier<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

/// Reusable buffers for strided multi-axis transforms.
#[derive(Debug, Default)]
pub struct FftScratch<T> {
    line: Vec<Complex<T>>,
    work: Vec<Complex<T>>,
}

impl<T: Real> Fourier<T> {
    pub fn new(grid: Arc<GridSpec<T>>) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft(grid.points(), FftDirection::Forward);
        let inverse = planner.plan_fft(grid.points(), FftDirection::Inverse);
        let symbol = grid.laplacian_symbol();
        Self {
            grid,
            forward,
            inverse,
            symbol,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec<T>> {
        &self.grid
    }

    pub fn laplacian_symbol(&self) -> &[T] {
        &self.symbol
    }

    pub fn scratch(&self) -> FftScratch<T> {
        let n = self.grid.points();
        let zero = Complex::new(T::zero(), T::zero());
        let work_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        FftScratch {
            line: vec![zero; n],
            work: vec![zero; work_len],
        }
    }

    fn transform(&self, data: &mut [Complex<T>], plan: &dyn Fft<T>, scratch: &mut FftScratch<T>) {
        let n = self.grid.points();
        let d = self.grid.dimension();
        debug_assert_eq!(data.len(), self.grid.len());
        if scratch.line.len() != n || scratch.work.len() < plan.get_inplace_scratch_len() {
            *scratch = self.scratch();
        }
        // Last axis is contiguous: all lines in one batched call.
        plan.process_with_scratch(data, &mut scratch.work);
        for axis in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for m in 0..n {
                        scratch.line[m] = data[base + m * stride];
                    }
                    plan.process_with_scratch(&mut scratch.line, &mut scratch.work);
                    for m in 0..n {
                        data[base + m * stride] = scratch.line[m];
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward_in_place(&self, data: &mut [Complex<T>], scratch: &mut FftScratch<T>) {
        self.transform(data, self.forward.as_ref(), scratch);
    }

    /// Inverse transform in place, normalized so that inverse(forward(v)) = v.
    pub fn inverse_in_place(&self, data: &mut [Complex<T>], scratch: &mut FftScratch<T>) {
        self.transform(data, self.inverse.as_ref(), scratch);
        let norm = T::one() / T::from_usize_lossy(self.grid.len());
        data.iter_mut().for_each(|v| *v = v.scale(norm));
    }

    pub fn forward(&self, field: &ComplexField<T>) -> Vec<Complex<T>> {
        let mut data = field.values().to_vec();
        self.forward_in_place(&mut data, &mut self.scratch());
        data
    }

    pub fn inverse(&self, spectrum: Vec<Complex<T>>) -> Result<ComplexField<T>> {
        let mut data = spectrum;
        if data.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "spectrum has {} modes but grid has {}",
                data.len(),
                self.grid.len()
            )));
        }
        self.inverse_in_place(&mut data, &mut self.scratch());
        ComplexField::from_values(Arc::clone(&self.grid), data)
    }

    /// L2 norm evaluated from the spectrum via Parseval.
    pub fn spectral_norm_l2(&self, spectrum: &[Complex<T>]) -> T {
        let total = T::from_usize_lossy(self.grid.len());
        let s: T = spectrum.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume() / total).sqrt()
    }

    pub fn propagator(&self, dt: T) -> Propagator<T> {
        let multipliers = self
            .symbol
            .iter()
            .map(|&s| Complex::from_polar(T::one(), -s * dt))
            .collect();
        Propagator { dt, multipliers }
    }

    /// Applies a precomputed propagator in place.
    pub fn apply_propagator(
        &self,
        data: &mut [Complex<T>],
        propagator: &Propagator<T>,
        scratch: &mut FftScratch<T>,
    ) {
        self.forward_in_place(data, scratch);
        data.iter_mut()
            .zip(&propagator.multipliers)
            .for_each(|(v, m)| *v = *v * m);
        self.inverse_in_place(data, scratch);
    }

    /// Exact free Schrodinger flow over `dt` (negative `dt` runs backwards).
    pub fn free_propagator_apply(&self, field: &ComplexField<T>, dt: T) -> Result<ComplexField<T>> {
        self.check_grid(field)?;
        if dt == T::zero() {
            return Ok(field.clone());
        }
        let mut out = field.clone();
        let prop = self.propagator(dt);
        self.apply_propagator(out.values_mut(), &prop, &mut self.scratch());
        Ok(out)
    }

    /// Spectral Laplacian of a field.
    pub fn laplacian(&self, field: &ComplexField<T>) -> Result<ComplexField<T>> {
        self.check_grid(field)?;
        let mut spec = self.forward(field);
        spec.iter_mut()
            .zip(&self.symbol)
            .for_each(|(v, &s)| *v = v.scale(s));
        self.inverse(spec)
    }

    /// Spectral partial derivative along `axis`; the Nyquist mode is zeroed.
    pub fn derivative(&self, field: &ComplexField<T>, axis: usize) -> Result<ComplexField<T>> {
        self.check_grid(field)?;
        if axis >= self.grid.dimension() {
            return Err(Error::arg("axis", format!("axis {axis} out of range")));
        }
        let mut spec = self.forward(field);
        for (flat, v) in spec.iter_mut().enumerate() {
            if self.grid.is_nyquist(flat, axis) {
                *v = Complex::new(T::zero(), T::zero());
            } else {
                let k = self.grid.wavevector(flat)[axis];
                *v = *v * Complex::new(T::zero(), k);
            }
        }
        self.inverse(spec)
    }

    /// All first partial derivatives.
    pub fn gradient(&self, field: &ComplexField<T>) -> Result<Vec<ComplexField<T>>> {
        (0..self.grid.dimension())
            .map(|axis| self.derivative(field, axis))
            .collect()
    }

    /// Fraction of spectral mass carried by modes in the top
    /// [`TAIL_BAND`] of any axis' wavenumber range.
    pub fn spectral_tail_fraction(&self, field: &ComplexField<T>) -> T {
        let spec = self.forward(field);
        let half = self.grid.points() / 2;
        let cutoff = ((1.0 - TAIL_BAND) * half as f64).ceil() as usize;
        let d = self.grid.dimension();
        let mut total = T::zero();
        let mut tail = T::zero();
        for (flat, v) in spec.iter().enumerate() {
            let w = v.norm_sqr();
            total += w;
            let idx = self.grid.unravel(flat);
            let in_tail = idx[..d].iter().any(|&i| {
                let m = if i < half { i } else { self.grid.points() - i };
                m >= cutoff
            });
            if in_tail {
                tail += w;
            }
        }
        if total > T::zero() {
            tail / total
        } else {
            T::zero()
        }
    }

    fn check_grid(&self, field: &ComplexField<T>) -> Result<()> {
        if Arc::ptr_eq(field.grid(), &self.grid) || **field.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "field grid differs from transform grid".to_string(),
            ))
        }
    }
}

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::grid::ComplexField;
use crate::noise::MartingalePath;
use crate::scalar::Real;

use super::params::{Scheme, SimParams};

/// State at one saved time.
#[derive(Clone, Debug)]
pub struct Snapshot<T> {
    pub index: usize,
    pub time: T,
    /// `||X||^2` of the reconstructed field.
    pub mass_x: T,
    /// `||y||^2` with `y = e^{-M} X`.
    pub mass_y: T,
    pub x: Option<ComplexField<T>>,
    pub y: Option<ComplexField<T>>,
}

/// Trajectory of one run.
///
/// Scalar series are kept at every step `k = 0..=K`; fields only at
/// snapshot times and only when requested.
#[derive(Clone, Debug)]
pub struct SolutionRecord<T> {
    pub params: SimParams<T>,
    pub seed: Option<u64>,
    pub times: Vec<T>,
    pub mass_x: Vec<T>,
    pub mass_y: Vec<T>,
    /// `sum_j Re(mu_j) M_j(t_k)`.
    pub re_m: Vec<T>,
    /// `ito_weights[j][k] = int Re(mu_j) e_j |X(t_k)|^2`, `k < K`.
    pub ito_weights: Vec<Vec<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub initial: ComplexField<T>,
    pub final_x: ComplexField<T>,
    pub final_y: ComplexField<T>,
    pub path: MartingalePath<T>,
    pub wall_time: f64,
    pub tail_fraction: T,
}

impl<T: Real> SolutionRecord<T> {
    pub fn scheme(&self) -> Scheme {
        self.params.scheme
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.times[self.steps()]
    }

    pub fn tail_warning(&self) -> bool {
        self.tail_fraction.to_f64_lossy() > crate::grid::TAIL_WARNING_THRESHOLD
    }

    /// CSV at snapshot times: `t,mass_X,mass_y,ReM,Q_1..Q_N`.
    pub fn to_csv(&self) -> String {
        let n = self.path.components();
        let mut out = String::from("t,mass_X,mass_y,ReM");
        for j in 1..=n {
            let _ = write!(out, ",Q_{j}");
        }
        out.push('\n');
        for s in &self.snapshots {
            let k = s.index;
            let _ = write!(
                out,
                "{},{},{},{}",
                fmt17(s.time.to_f64_lossy()),
                fmt17(s.mass_x.to_f64_lossy()),
                fmt17(s.mass_y.to_f64_lossy()),
                fmt17(self.re_m[k].to_f64_lossy())
            );
            for j in 0..n {
                out.push(',');
                out.push_str(&fmt17(self.path.qv(j, k).to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }
}

/// Binary field dump: little-endian `u64 d`, `u64 n`, `f64 L`, `f64 t`,
/// then `n^d` complex values as interleaved `f64` real and imaginary parts
/// in row-major order.
pub fn field_dump<T: Real>(field: &ComplexField<T>, time: T) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(32 + 16 * field.values().len());
    out.extend_from_slice(&(grid.dimension() as u64).to_le_bytes());
    out.extend_from_slice(&(grid.points() as u64).to_le_bytes());
    out.extend_from_slice(&grid.half_length().to_f64_lossy().to_le_bytes());
    out.extend_from_slice(&time.to_f64_lossy().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
        out.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
    }
    out
}

/// Parsed header and payload of a [`field_dump`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub dimension: usize,
    pub points: usize,
    pub half_length: f64,
    pub time: f64,
    pub values: Vec<(f64, f64)>,
}

pub fn read_field_dump(bytes: &[u8]) -> Result<FieldDump> {
    let bad = |reason: &str| Error::arg("dump", reason.to_string());
    if bytes.len() < 32 {
        return Err(bad("truncated header"));
    }
    let word = |i: usize| <[u8; 8]>::try_from(&bytes[8 * i..8 * i + 8]).unwrap();
    let dimension = u64::from_le_bytes(word(0)) as usize;
    let points = u64::from_le_bytes(word(1)) as usize;
    let half_length = f64::from_le_bytes(word(2));
    let time = f64::from_le_bytes(word(3));
    let count = points
        .checked_pow(dimension as u32)
        .ok_or_else(|| bad("header size overflows"))?;
    if bytes.len() != 32 + 16 * count {
        return Err(bad("payload length does not match header"));
    }
    let values = (0..count)
        .map(|i| (f64::from_le_bytes(word(4 + 2 * i)), f64::from_le_bytes(word(5 + 2 * i))))
        .collect();
    Ok(FieldDump {
        dimension,
        points,
        half_length,
        time,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use num_complex::Complex;
    use std::sync::Arc;

    #[test]
    fn dump_round_trip() {
        let g = Arc::new(GridSpec::new(2, 4, 1.5).unwrap());
        let f = ComplexField::from_fn(Arc::clone(&g), |x| Complex::new(x[0], -x[1]));
        let bytes = field_dump(&f, 0.25);
        assert_eq!(bytes.len(), 32 + 16 * 16);
        let d = read_field_dump(&bytes).unwrap();
        assert_eq!((d.dimension, d.points, d.half_length, d.time), (2, 4, 1.5, 0.25));
        for (a, b) in d.values.iter().zip(f.values()) {
            assert_eq!(*a, (b.re, b.im));
        }
        assert!(read_field_dump(&bytes[..40]).is_err());
    }
}

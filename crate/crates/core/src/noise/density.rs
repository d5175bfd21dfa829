//! Quadratic-variation densities `V_j(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Functional form of a density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityKind<T> {
    Constant {
        value: T,
    },
    /// `values[i]` on `[breaks[i], breaks[i+1])`; `breaks[0] = 0`, the last
    /// break is the horizon.
    PiecewiseConstant {
        breaks: Vec<T>,
        values: Vec<T>,
    },
    /// Linear interpolation between `(times[i], values[i])`; `times[0] = 0`,
    /// the last time is the horizon.
    Tabulated {
        times: Vec<T>,
        values: Vec<T>,
    },
    /// `mean + amplitude * sin(frequency * s + phase)`.
    Sinusoid {
        mean: T,
        amplitude: T,
        frequency: T,
        #[serde(default)]
        phase: T,
    },
}

/// A validated density with its lower bound `alpha_0` and upper bound `V_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySpec<T> {
    kind: DensityKind<T>,
    lower: T,
    upper: T,
}

impl<T: Real> DensitySpec<T> {
    pub fn constant(value: T) -> Result<Self> {
        Self::new(DensityKind::Constant { value }, None, None)
    }

    /// Validates the payload. Declared bounds, when given, must bracket the
    /// density over its whole horizon; otherwise the exact extrema are used.
    pub fn new(kind: DensityKind<T>, declared_lower: Option<T>, declared_upper: Option<T>) -> Result<Self> {
        let (min, max) = extrema(&kind)?;
        if min < T::zero() {
            return Err(Error::arg(
                "density",
                format!("density takes the negative value {min}"),
            ));
        }
        let lower = match declared_lower {
            Some(l) if l < T::zero() => {
                return Err(Error::arg("lower_bound", format!("must be >= 0 (got {l})")))
            }
            Some(l) if l > min => {
                return Err(Error::arg(
                    "lower_bound",
                    format!("declared {l} exceeds the density minimum {min}"),
                ))
            }
            Some(l) => l,
            None => min,
        };
        let upper = match declared_upper {
            Some(u) if !u.is_finite() => {
                return Err(Error::arg("upper_bound", "must be finite".to_string()))
            }
            Some(u) if u < max => {
                return Err(Error::arg(
                    "upper_bound",
                    format!("declared {u} is below the density maximum {max}"),
                ))
            }
            Some(u) => u,
            None => max,
        };
        Ok(Self { kind, lower, upper })
    }

    pub fn kind(&self) -> &DensityKind<T> {
        &self.kind
    }

    /// Declared lower bound `alpha_0`.
    pub fn lower_bound(&self) -> T {
        self.lower
    }

    /// Declared upper bound `V_max`.
    pub fn upper_bound(&self) -> T {
        self.upper
    }

    /// Last time at which the density is defined; `None` means unbounded.
    pub fn horizon(&self) -> Option<T> {
        match &self.kind {
            DensityKind::Constant { .. } | DensityKind::Sinusoid { .. } => None,
            DensityKind::PiecewiseConstant { breaks, .. } => breaks.last().copied(),
            DensityKind::Tabulated { times, .. } => times.last().copied(),
        }
    }

    pub fn covers(&self, t: T) -> bool {
        match self.horizon() {
            None => true,
            Some(h) => t <= h * (T::one() + T::epsilon() * T::lit(16.0)),
        }
    }

    pub fn eval(&self, t: T) -> T {
        match &self.kind {
            DensityKind::Constant { value } => *value,
            DensityKind::PiecewiseConstant { breaks, values } => {
                let i = interval_index(breaks, t);
                values[i]
            }
            DensityKind::Tabulated { times, values } => {
                let i = interval_index(times, t);
                let (t0, t1) = (times[i], times[i + 1]);
                let w = (t - t0) / (t1 - t0);
                values[i] + (values[i + 1] - values[i]) * w
            }
            DensityKind::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            } => *mean + *amplitude * (*frequency * t + *phase).sin(),
        }
    }

    /// Exact integral of the density over `[a, b]`.
    pub fn integral(&self, a: T, b: T) -> T {
        if b <= a {
            return T::zero();
        }
        match &self.kind {
            DensityKind::Constant { value } => *value * (b - a),
            DensityKind::PiecewiseConstant { breaks, values } => {
                let mut acc = T::zero();
                for (i, &v) in values.iter().enumerate() {
                    let lo = breaks[i].max(a);
                    let hi = if i + 1 == values.len() {
                        b
                    } else {
                        breaks[i + 1].min(b)
                    };
                    if hi > lo {
                        acc += v * (hi - lo);
                    }
                }
                acc
            }
            DensityKind::Tabulated { times, .. } => {
                let mut acc = T::zero();
                let half = T::lit(0.5);
                for i in 0..times.len() - 1 {
                    let lo = times[i].max(a);
                    let hi = if i + 2 == times.len() {
                        b
                    } else {
                        times[i + 1].min(b)
                    };
                    if hi > lo {
                        acc += (self.eval(lo) + self.eval(hi)) * half * (hi - lo);
                    }
                }
                acc
            }
            DensityKind::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            } => {
                if *frequency == T::zero() {
                    (*mean + *amplitude * phase.sin()) * (b - a)
                } else {
                    *mean * (b - a)
                        - *amplitude / *frequency
                            * ((*frequency * b + *phase).cos() - (*frequency * a + *phase).cos())
                }
            }
        }
    }
}

fn interval_index<T: Real>(nodes: &[T], t: T) -> usize {
    let last = nodes.len() - 2;
    match nodes.iter().rposition(|&x| x <= t) {
        Some(i) => i.min(last),
        None => 0,
    }
}

fn check_nodes<T: Real>(name: &'static str, nodes: &[T]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::arg(name, "needs at least two nodes".to_string()));
    }
    if nodes[0] != T::zero() {
        return Err(Error::arg(name, "first node must be 0".to_string()));
    }
    if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg(name, "nodes must be finite and strictly increasing".to_string()));
    }
    Ok(())
}

fn finite_values<T: Real>(values: &[T]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("values", "density values must be finite".to_string()));
    }
    Ok(())
}

/// Exact minimum and maximum over the density's horizon.
fn extrema<T: Real>(kind: &DensityKind<T>) -> Result<(T, T)> {
    let fold = |v: &[T]| {
        v.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
    };
    match kind {
        DensityKind::Constant { value } => {
            finite_values(&[*value])?;
            Ok((*value, *value))
        }
        DensityKind::PiecewiseConstant { breaks, values } => {
            check_nodes("breaks", breaks)?;
            finite_values(values)?;
            if breaks.len() != values.len() + 1 {
                return Err(Error::arg(
                    "values",
                    format!(
                        "piecewise density needs {} values for {} breaks (got {})",
                        breaks.len() - 1,
                        breaks.len(),
                        values.len()
                    ),
                ));
            }
            Ok(fold(values))
        }
        DensityKind::Tabulated { times, values } => {
            check_nodes("times", times)?;
            finite_values(values)?;
            if times.len() != values.len() {
                return Err(Error::arg(
                    "values",
                    format!("{} times but {} values", times.len(), values.len()),
                ));
            }
            Ok(fold(values))
        }
        DensityKind::Sinusoid {
            mean,
            amplitude,
            frequency,
            phase,
        } => {
            finite_values(&[*mean, *amplitude, *frequency, *phase])?;
            if *frequency == T::zero() {
                let v = *mean + *amplitude * phase.sin();
                Ok((v, v))
            } else {
                Ok((*mean - amplitude.abs(), *mean + amplitude.abs()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(d: &DensitySpec<f64>, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = d.eval(a) + d.eval(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * d.eval(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn linear_density_integral() {
        let d = DensitySpec::new(
            DensityKind::Tabulated {
                times: vec![0.0, 1.0],
                values: vec![1.0, 2.0],
            },
            None,
            None,
        )
        .unwrap();
        assert!((d.integral(0.0, 1.0) - 1.5f64).abs() < 1e-15);
        assert_eq!(d.lower_bound(), 1.0);
        assert_eq!(d.upper_bound(), 2.0);
        assert_eq!(d.horizon(), Some(1.0));
    }

    #[test]
    fn sinusoid_integral_matches_quadrature() {
        let d = DensitySpec::new(
            DensityKind::Sinusoid {
                mean: 1.5,
                amplitude: 0.5,
                frequency: 1.0,
                phase: 0.0,
            },
            None,
            None,
        )
        .unwrap();
        for (a, b) in [(0.0, 1.0), (0.3, 7.9), (2.0, 2.001)] {
            let exact = d.integral(a, b);
            let q = simpson(&d, a, b, 2000);
            assert!((exact - q).abs() < 1e-10, "{a} {b}");
        }
        assert_eq!(d.lower_bound(), 1.0);
        assert_eq!(d.upper_bound(), 2.0);
        assert_eq!(d.horizon(), None);
    }

    #[test]
    fn piecewise_integral_spans_breaks() {
        let d = DensitySpec::new(
            DensityKind::PiecewiseConstant {
                breaks: vec![0.0, 1.0, 3.0],
                values: vec![2.0, 0.5],
            },
            None,
            None,
        )
        .unwrap();
        assert!((d.integral(0.5, 2.0) - 1.5f64).abs() < 1e-15);
        assert_eq!(d.eval(0.999), 2.0);
        assert_eq!(d.eval(1.0), 0.5);
        assert_eq!(d.eval(3.0), 0.5);
        assert!(d.covers(3.0));
        assert!(!d.covers(3.1));
    }

    #[test]
    fn rejects_negative_and_inconsistent() {
        assert!(DensitySpec::constant(-1.0).is_err());
        assert!(DensitySpec::new(
            DensityKind::Tabulated {
                times: vec![0.0, 1.0],
                values: vec![1.0, -0.1]
            },
            None,
            None
        )
        .is_err());
        assert!(DensitySpec::new(DensityKind::Constant { value: 1.0 }, Some(2.0), None).is_err());
        assert!(DensitySpec::new(DensityKind::Constant { value: 1.0 }, None, Some(0.5)).is_err());
        assert!(DensitySpec::new(
            DensityKind::PiecewiseConstant {
                breaks: vec![0.0, 1.0],
                values: vec![1.0, 2.0]
            },
            None,
            None
        )
        .is_err());
        let d = DensitySpec::new(DensityKind::Constant { value: 1.0 }, Some(0.5), Some(3.0)).unwrap();
        assert_eq!((d.lower_bound(), d.upper_bound()), (0.5, 3.0));
    }
}

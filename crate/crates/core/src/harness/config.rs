//! JSON run configuration.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{EnergyQuadrature, FitWindow};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec};
use crate::integrator::SimParams;
use crate::noise::{DensityKind, DensitySpec, NoiseComponent, NoiseModel, ProfileKind, SpatialProfile};
use crate::picard::PicardConfig;

/// Version of the configuration layout understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Simulate,
    Ensemble,
    Picard,
    Convergence,
    Validate,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Simulate => "simulate",
            RunKind::Ensemble => "ensemble",
            RunKind::Picard => "picard",
            RunKind::Convergence => "convergence",
            RunKind::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dimension: usize,
    pub points: usize,
    pub half_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `amplitude exp(-|xi - center|^2 / (2 width^2) + i k . xi)`, optionally
    /// rescaled to a prescribed L2 norm.
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        wavevector: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l2_norm: Option<f64>,
    },
    /// `amplitude exp(i k . xi)`.
    PlaneWave {
        wavevector: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    /// `[re, im]`.
    pub mu: [f64; 2],
    #[serde(default = "constant_profile")]
    pub profile: ProfileKind<f64>,
    pub density: DensityKind<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
}

fn constant_profile() -> ProfileKind<f64> {
    ProfileKind::ConstantOne
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<FitWindow>,
    /// Write mass/energy identity residuals.
    #[serde(default = "yes")]
    pub residuals: bool,
    /// Request a decay fit (needs the homogeneous non-degenerate regime).
    #[serde(default)]
    pub decay_fit: bool,
    #[serde(default = "left_endpoint")]
    pub energy_quadrature: EnergyQuadrature,
}

fn left_endpoint() -> EnergyQuadrature {
    EnergyQuadrature::LeftEndpoint
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            fit_window: None,
            residuals: true,
            decay_fit: false,
            energy_quadrature: EnergyQuadrature::LeftEndpoint,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub paths: usize,
    /// A path passes when its Lyapunov estimate is at most `-omega + tolerance`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// Errors against a finer reference run of the configured scheme.
    Reference,
    /// Distance between direct and rescaled runs on the same path.
    SchemeEquivalence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub dts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
    #[serde(default = "reference_mode")]
    pub mode: ConvergenceMode,
}

fn reference_mode() -> ConvergenceMode {
    ConvergenceMode::Reference
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    pub horizon: f64,
    pub nodes: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_picard_tolerance")]
    pub tolerance: f64,
    #[serde(default = "unit_pair")]
    pub norm_weights: [f64; 2],
    /// Step of the integrator run used as a cross-check.
    #[serde(default = "default_compare_dt")]
    pub compare_dt: f64,
}

fn default_iterations() -> usize {
    50
}

fn default_picard_tolerance() -> f64 {
    1e-8
}

fn unit_pair() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_compare_dt() -> f64 {
    1e-4
}

impl PicardSection {
    pub fn picard_config(&self) -> PicardConfig<f64> {
        PicardConfig {
            horizon: self.horizon,
            nodes: self.nodes,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            norm_weights: self.norm_weights,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RunKind>,
    pub grid: GridConfig,
    pub initial: InitialCondition,
    pub noise: Vec<ComponentConfig>,
    pub sim: SimParams<f64>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
}

/// Grid, model, initial data and parameters built from a validated config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: Arc<GridSpec<f64>>,
    pub model: NoiseModel<f64>,
    pub initial: ComplexField<f64>,
    pub params: SimParams<f64>,
}

fn keyed(key: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let key = key.into();
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

impl RunConfig {
    /// Parses JSON; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path.is_empty() || path == "." { "<root>".to_string() } else { path };
            Error::config(key, e.into_inner().to_string())
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (this build reads {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Resolves the run kind from the config and an optional override
    /// (the CLI subcommand); a conflict is a config error.
    /// Validation may be requested on any config; other kinds must agree
    /// with the config's `kind` when both are given.
    pub fn resolve_kind(&self, requested: Option<RunKind>) -> Result<RunKind> {
        match (self.kind, requested) {
            (_, Some(RunKind::Validate)) => Ok(RunKind::Validate),
            (Some(a), Some(b)) if a != b => Err(Error::config(
                "kind",
                format!("config declares `{}` but `{}` was requested", a.name(), b.name()),
            )),
            (_, Some(k)) | (Some(k), None) => Ok(k),
            (None, None) => Err(Error::config("kind", "no run kind given")),
        }
    }

    pub fn build(&self) -> Result<Setup> {
        let g = &self.grid;
        let grid = Arc::new(GridSpec::new(g.dimension, g.points, g.half_length).map_err(keyed("grid"))?);
        self.sim.validate(g.dimension).map_err(|e| match e {
            Error::InvalidArgument { name, reason } => Error::config(format!("sim.{name}"), reason),
            other => keyed("sim")(other),
        })?;
        if self.noise.is_empty() {
            return Err(Error::config("noise", "at least one component is required"));
        }
        let mut components = Vec::with_capacity(self.noise.len());
        for (j, c) in self.noise.iter().enumerate() {
            let density = DensitySpec::new(c.density.clone(), c.lower_bound, c.upper_bound)
                .map_err(keyed(format!("noise[{j}].density")))?;
            let profile = SpatialProfile::sample(c.profile.clone(), &grid).map_err(keyed(format!("noise[{j}].profile")))?;
            components.push(NoiseComponent {
                mu: Complex::new(c.mu[0], c.mu[1]),
                profile,
                density,
            });
        }
        let model = NoiseModel::new(Arc::clone(&grid), components).map_err(keyed("noise"))?;
        let initial = self.initial_field(&grid)?;
        Ok(Setup {
            grid,
            model,
            initial,
            params: self.sim.clone(),
        })
    }

    fn initial_field(&self, grid: &Arc<GridSpec<f64>>) -> Result<ComplexField<f64>> {
        let d = grid.dimension();
        let coords = |v: &[f64], key: &str| -> Result<[f64; 3]> {
            if !v.is_empty() && v.len() != d {
                return Err(Error::config(
                    format!("initial.{key}"),
                    format!("has {} entries, grid dimension is {d}", v.len()),
                ));
            }
            let mut out = [0.0; 3];
            out[..v.len()].copy_from_slice(v);
            Ok(out)
        };
        let field = match &self.initial {
            InitialCondition::Gaussian {
                center,
                width,
                amplitude,
                wavevector,
                l2_norm,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::config("initial.width", "must be positive"));
                }
                let c = coords(center, "center")?;
                let k = coords(wavevector, "wavevector")?;
                let w2 = 2.0 * width * width;
                let f = ComplexField::from_fn(Arc::clone(grid), |x| {
                    let r2: f64 = (0..d).map(|a| (x[a] - c[a]) * (x[a] - c[a])).sum();
                    let phase: f64 = (0..d).map(|a| k[a] * x[a]).sum();
                    Complex::from_polar(amplitude * (-r2 / w2).exp(), phase)
                });
                match l2_norm {
                    Some(target) => {
                        if !(*target > 0.0) {
                            return Err(Error::config("initial.l2_norm", "must be positive"));
                        }
                        let n = f.norm_l2();
                        if !(n > 0.0) {
                            return Err(Error::config("initial.amplitude", "initial data vanishes on the grid"));
                        }
                        f.scaled(Complex::new(target / n, 0.0))
                    }
                    None => f,
                }
            }
            InitialCondition::PlaneWave { wavevector, amplitude } => {
                if wavevector.len() != d {
                    return Err(Error::config("initial.wavevector", format!("needs {d} entries")));
                }
                let k = coords(wavevector, "wavevector")?;
                ComplexField::from_fn(Arc::clone(grid), |x| {
                    let phase: f64 = (0..d).map(|a| k[a] * x[a]).sum();
                    Complex::from_polar(*amplitude, phase)
                })
            }
        };
        if !field.is_finite() {
            return Err(Error::config("initial", "initial data is not finite"));
        }
        Ok(field)
    }

    /// Checks the sections required by `kind`.
    pub fn validate_for(&self, kind: RunKind) -> Result<Setup> {
        let setup = self.build()?;
        match kind {
            RunKind::Ensemble => {
                let e = self
                    .ensemble
                    .as_ref()
                    .ok_or_else(|| Error::config("ensemble", "section required for ensemble runs"))?;
                if e.paths == 0 {
                    return Err(Error::config("ensemble.paths", "ensemble size must be >= 1"));
                }
            }
            RunKind::Picard => {
                let p = self
                    .picard
                    .as_ref()
                    .ok_or_else(|| Error::config("picard", "section required for picard runs"))?;
                p.picard_config().validate().map_err(|e| match e {
                    Error::InvalidArgument { name, reason } => Error::config(format!("picard.{name}"), reason),
                    other => other,
                })?;
                if !(p.compare_dt > 0.0) {
                    return Err(Error::config("picard.compare_dt", "must be positive"));
                }
            }
            RunKind::Convergence => {
                let c = self
                    .convergence
                    .as_ref()
                    .ok_or_else(|| Error::config("convergence", "section required for convergence runs"))?;
                check_ladder(&c.dts)?;
                if let Some(r) = c.reference_dt {
                    let finest = c.dts.iter().copied().fold(f64::INFINITY, f64::min);
                    if !(r > 0.0) || r > finest / 8.0 * (1.0 + 1e-12) {
                        return Err(Error::config(
                            "convergence.reference_dt",
                            format!("must be at least 8x finer than the finest step {finest}"),
                        ));
                    }
                }
            }
            RunKind::Simulate | RunKind::Validate => {}
        }
        Ok(setup)
    }
}

/// At least three steps in strict geometric progression.
pub fn check_ladder(dts: &[f64]) -> Result<()> {
    let key = "convergence.dts";
    if dts.len() < 3 {
        return Err(Error::config(key, format!("need at least 3 step sizes (got {})", dts.len())));
    }
    if dts.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::config(key, "step sizes must be positive"));
    }
    let ratio = dts[0] / dts[1];
    if (ratio - 1.0).abs() < 1e-12 {
        return Err(Error::config(key, "step sizes must differ"));
    }
    for (i, w) in dts.windows(2).enumerate() {
        let r = w[0] / w[1];
        if (r - ratio).abs() > 1e-9 * ratio {
            return Err(Error::config(
                key,
                format!("not geometric: ratio {r} at position {} differs from {ratio}", i + 1),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"{
        "schema_version": 1,
        "kind": "simulate",
        "grid": {"dimension": 1, "points": 64, "half_length": 8.0},
        "initial": {"type": "gaussian", "width": 1.0, "l2_norm": 1.0},
        "noise": [{"mu": [1.0, 0.5], "density": {"kind": "constant", "value": 1.0}}],
        "sim": {"lambda": 1, "alpha": 3.0, "dt": 0.01, "t_final": 0.5, "scheme": "rescaled"},
        "seed": 7
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        let setup = cfg.build().unwrap();
        assert!((setup.initial.norm_l2() - 1.0).abs() < 1e-14);
        assert_eq!(setup.model.len(), 1);
    }

    #[test]
    fn errors_name_keys() {
        let bad = SAMPLE.replace("\"points\": 64", "\"points\": 60");
        let e = RunConfig::from_json(&bad).unwrap().build().unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "grid"), "{e}");
        let bad = SAMPLE.replace("\"alpha\": 3.0", "\"alpha\": 6.0");
        let e = RunConfig::from_json(&bad).unwrap().build().unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "sim.alpha"), "{e}");
        let bad = SAMPLE.replace("\"value\": 1.0", "\"value\": \"x\"");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert!(e.to_string().contains("noise[0].density"), "{e}");
        let bad = SAMPLE.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config { key, .. }) if key == "schema_version"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn ladders() {
        assert!(check_ladder(&[4e-3, 2e-3, 1e-3]).is_ok());
        assert!(check_ladder(&[4e-3, 2e-3]).is_err());
        assert!(check_ladder(&[4e-3, 2e-3, 0.5e-3]).is_err());
        assert!(check_ladder(&[1e-3, 1e-3, 1e-3]).is_err());
    }

    #[test]
    fn kind_resolution() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.resolve_kind(None).unwrap(), RunKind::Simulate);
        assert!(cfg.resolve_kind(Some(RunKind::Ensemble)).is_err());
        assert_eq!(cfg.resolve_kind(Some(RunKind::Validate)).unwrap(), RunKind::Validate);
    }
}

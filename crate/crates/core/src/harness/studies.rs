//! Step-size refinement studies and the Picard cross-check.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{bridge_deviation, fit_order};
use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::grid::ComplexField;
use crate::integrator::{simulate_with_path, Scheme, SimParams, Splitting};
use crate::noise::{sample_martingale, MartingalePath};
use crate::picard::{picard_iterate, PicardReport};

use super::config::{check_ladder, ConvergenceConfig, ConvergenceMode, PicardSection, Setup};

/// Errors below this fraction of the solution norm count as roundoff.
pub const EXACT_FLOOR: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub mode: ConvergenceMode,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
    /// Log-log slope; absent when the errors sit at the roundoff floor.
    pub order: Option<f64>,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_deviation: Option<f64>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dt,error\n");
        for (d, e) in self.dts.iter().zip(&self.errors) {
            let _ = writeln!(out, "{},{}", fmt17(*d), fmt17(*e));
        }
        out
    }
}

fn factor(coarse: f64, fine: f64) -> Result<usize> {
    let r = coarse / fine;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-9 * k {
        return Err(Error::config(
            "convergence.dts",
            format!("step {coarse} is not an integer multiple of {fine}"),
        ));
    }
    Ok(k as usize)
}

fn with_dt(params: &SimParams<f64>, dt: f64, scheme: Scheme) -> SimParams<f64> {
    SimParams {
        dt,
        scheme,
        save_every: None,
        save_fields: false,
        ..params.clone()
    }
}

fn final_state(setup: &Setup, params: &SimParams<f64>, path: &MartingalePath<f64>) -> Result<(ComplexField<f64>, Option<f64>)> {
    let record = simulate_with_path(&setup.model, params, &setup.initial, path)?;
    let bridge = match params.scheme {
        Scheme::Rescaled => Some(bridge_deviation(&record, &setup.model)?),
        Scheme::Direct => None,
    };
    Ok((record.final_x, bridge))
}

fn summarize(mode: ConvergenceMode, dts: Vec<f64>, errors: Vec<f64>, scale: f64, reference_dt: Option<f64>, bridge: Option<f64>) -> Result<ConvergenceTable> {
    let exact = errors.iter().all(|&e| e <= EXACT_FLOOR * scale.max(f64::MIN_POSITIVE));
    let order = if exact { None } else { Some(fit_order(&dts, &errors)?) };
    Ok(ConvergenceTable {
        mode,
        dts,
        errors,
        reference_dt,
        order,
        exact,
        bridge_deviation: bridge,
    })
}

/// Pathwise L2 errors at the final time; every run observes one fine path.
pub fn convergence_study(setup: &Setup, config: &ConvergenceConfig, seed: u64) -> Result<ConvergenceTable> {
    check_ladder(&config.dts)?;
    let finest = config.dts.iter().copied().fold(f64::INFINITY, f64::min);
    match config.mode {
        ConvergenceMode::Reference => {
            let ref_dt = config.reference_dt.unwrap_or(finest / 8.0);
            let ref_params = with_dt(&setup.params, ref_dt, setup.params.scheme);
            ref_params.validate(setup.grid.dimension())?;
            let fine = sample_martingale(&setup.model, ref_dt, ref_params.steps(), seed)?;
            let mut jobs: Vec<(f64, usize)> = vec![(ref_dt, 1)];
            for &dt in &config.dts {
                jobs.push((dt, factor(dt, ref_dt)?));
            }
            let states = jobs
                .par_iter()
                .map(|&(dt, f)| {
                    let params = with_dt(&setup.params, dt, setup.params.scheme);
                    final_state(setup, &params, &fine.coarsen(f)?).map(|s| s.0)
                })
                .collect::<Result<Vec<_>>>()?;
            let reference = &states[0];
            let errors = states[1..]
                .iter()
                .map(|s| s.sub(reference).map(|d| d.norm_l2()))
                .collect::<Result<Vec<_>>>()?;
            summarize(config.mode, config.dts.clone(), errors, reference.norm_l2(), Some(ref_dt), None)
        }
        ConvergenceMode::SchemeEquivalence => {
            let base = with_dt(&setup.params, finest, Scheme::Direct);
            base.validate(setup.grid.dimension())?;
            let fine = sample_martingale(&setup.model, finest, base.steps(), seed)?;
            let rows = config
                .dts
                .par_iter()
                .map(|&dt| {
                    let path = fine.coarsen(factor(dt, finest)?)?;
                    let (xd, _) = final_state(setup, &with_dt(&setup.params, dt, Scheme::Direct), &path)?;
                    let (xr, bridge) = final_state(setup, &with_dt(&setup.params, dt, Scheme::Rescaled), &path)?;
                    Ok((xd.sub(&xr)?.norm_l2(), bridge.unwrap_or(0.0), xd.norm_l2()))
                })
                .collect::<Result<Vec<_>>>()?;
            let errors = rows.iter().map(|r| r.0).collect();
            let bridge = rows.iter().map(|r| r.1).fold(0.0, f64::max);
            let scale = rows.iter().map(|r| r.2).fold(0.0, f64::max);
            summarize(config.mode, config.dts.clone(), errors, scale, None, Some(bridge))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardStudy {
    #[serde(flatten)]
    pub report: PicardReport<f64>,
    /// `||y_picard(tau) - y_integrator(tau)||_2` on the shared path.
    pub integrator_distance: f64,
    pub compare_dt: f64,
}

/// Picard iteration on a path sampled at `compare_dt`, checked against the
/// rescaled integrator run on the same path.
pub fn picard_study(setup: &Setup, section: &PicardSection, seed: u64) -> Result<PicardStudy> {
    let config = section.picard_config();
    let steps_f = section.horizon / section.compare_dt;
    let steps = steps_f.round();
    if steps < 1.0 || (steps_f - steps).abs() > 1e-6 * steps {
        return Err(Error::config(
            "picard.compare_dt",
            format!("horizon / compare_dt = {steps_f} is not an integer"),
        ));
    }
    let steps = steps as usize;
    let path = sample_martingale(&setup.model, section.compare_dt, steps, seed)?;
    let (lambda, alpha) = (setup.params.lambda, setup.params.alpha);
    let report = picard_iterate(&setup.initial, &setup.model, &path, &config, lambda, alpha)?;
    let params = SimParams::new(lambda, alpha, section.compare_dt, section.horizon, Scheme::Rescaled)
        .with_splitting(Splitting::Strang);
    let record = simulate_with_path(&setup.model, &params, &setup.initial, &path)?;
    let integrator_distance = report.final_state().sub(&record.final_y)?.norm_l2();
    Ok(PicardStudy {
        report,
        integrator_distance,
        compare_dt: section.compare_dt,
    })
}

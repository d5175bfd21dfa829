use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{decay_report, envelope_check, omega, quantile, DecayReport, EnvelopeReport, FitWindow};
use crate::error::Result;
use crate::format::fmt17;
use crate::integrator::{simulate_with_path, Scheme};
use crate::noise::rng::path_seed;
use crate::noise::sample_martingale_indexed;

use super::config::{EnsembleConfig, Setup};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantileSummary {
    pub min: f64,
    pub q01: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub q99: f64,
    pub max: f64,
}

impl QuantileSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let q = |p| quantile(values, p);
        Some(Self {
            min: q(0.0)?,
            q01: q(0.01)?,
            q05: q(0.05)?,
            q25: q(0.25)?,
            median: q(0.5)?,
            q75: q(0.75)?,
            q95: q(0.95)?,
            q99: q(0.99)?,
            max: q(1.0)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    Ok,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathOutcome {
    pub index: usize,
    pub path_seed: u64,
    pub status: PathStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub paths: usize,
    pub master_seed: u64,
    pub omega: f64,
    pub tolerance: f64,
    /// Share of all paths with Lyapunov estimate `<= -omega + tolerance`.
    pub fraction_passing: f64,
    pub aborted: usize,
    /// Paths with at least one envelope or monotonicity violation.
    pub envelope_violations: usize,
    pub lyapunov: Option<QuantileSummary>,
    pub lln_ratio: Option<QuantileSummary>,
    pub fitted_slope: Option<QuantileSummary>,
    pub per_path: Vec<PathOutcome>,
}

impl EnsembleReport {
    pub fn lyapunov_estimates(&self) -> Vec<f64> {
        self.per_path.iter().filter_map(|p| p.decay.map(|d| d.lyapunov)).collect()
    }

    /// One row per path: `index,status,lyapunov,lln_ratio,fitted_slope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,status,lyapunov,lln_ratio,fitted_slope\n");
        for p in &self.per_path {
            let status = match p.status {
                PathStatus::Ok => "ok",
                PathStatus::Aborted => "aborted",
            };
            match p.decay {
                Some(d) => {
                    let _ = writeln!(
                        out,
                        "{},{status},{},{},{}",
                        p.index,
                        fmt17(d.lyapunov),
                        fmt17(d.lln_ratio),
                        fmt17(d.fitted_slope)
                    );
                }
                None => {
                    let _ = writeln!(out, "{},{status},,,", p.index);
                }
            }
        }
        out
    }
}

fn run_path(setup: &Setup, master: u64, index: usize, window: Option<FitWindow>) -> Result<(DecayReport, Option<EnvelopeReport>)> {
    let params = &setup.params;
    let path = sample_martingale_indexed(&setup.model, params.dt, params.steps(), master, index as u64)?;
    let record = simulate_with_path(&setup.model, params, &setup.initial, &path)?;
    let decay = decay_report(&record, &setup.model, window)?;
    let envelope = match params.scheme {
        Scheme::Rescaled => Some(envelope_check(&record, &setup.model)?),
        Scheme::Direct => None,
    };
    Ok((decay, envelope))
}

/// Runs every path of the ensemble on the current rayon pool. Results are
/// ordered by path index, so the report does not depend on scheduling.
pub fn run_ensemble(setup: &Setup, config: &EnsembleConfig, master: u64, window: Option<FitWindow>) -> Result<EnsembleReport> {
    let omega = omega(&setup.model)?;
    let per_path: Vec<PathOutcome> = (0..config.paths)
        .into_par_iter()
        .map(|i| {
            let base = PathOutcome {
                index: i,
                path_seed: path_seed(master, i as u64),
                status: PathStatus::Ok,
                error: None,
                decay: None,
                envelope: None,
            };
            match run_path(setup, master, i, window) {
                Ok((decay, envelope)) => PathOutcome {
                    decay: Some(decay),
                    envelope,
                    ..base
                },
                Err(e) => PathOutcome {
                    status: PathStatus::Aborted,
                    error: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect();

    let decays: Vec<DecayReport> = per_path.iter().filter_map(|p| p.decay).collect();
    let lyap: Vec<f64> = decays.iter().map(|d| d.lyapunov).collect();
    let lln: Vec<f64> = decays.iter().map(|d| d.lln_ratio).collect();
    let slopes: Vec<f64> = decays.iter().map(|d| d.fitted_slope).collect();
    let passing = lyap.iter().filter(|&&l| l <= -omega + config.tolerance).count();
    Ok(EnsembleReport {
        paths: config.paths,
        master_seed: master,
        omega,
        tolerance: config.tolerance,
        fraction_passing: passing as f64 / config.paths as f64,
        aborted: per_path.iter().filter(|p| p.status == PathStatus::Aborted).count(),
        envelope_violations: per_path
            .iter()
            .filter(|p| p.envelope.is_some_and(|e| !e.clean()))
            .count(),
        lyapunov: QuantileSummary::of(&lyap),
        lln_ratio: QuantileSummary::of(&lln),
        fitted_slope: QuantileSummary::of(&slopes),
        per_path,
    })
}

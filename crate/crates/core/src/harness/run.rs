use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{
    bridge_deviation, decay_report, energy_identity_residual, mass_identity_residual, omega,
};
use crate::error::{Error, Result};
use crate::integrator::{field_dump, simulate, Scheme};
use crate::noise::{validate_assumptions, AssumptionFlags};

use super::config::{RunConfig, RunKind, Setup};
use super::ensemble::run_ensemble;
use super::io::{read_text, OutputDir};
use super::studies::{convergence_study, picard_study};

/// Command-line level overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub kind: Option<RunKind>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads; `None` keeps the rayon default.
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub kind: RunKind,
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
    /// Human-readable warnings (never written to the output directory).
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct SimulateSummary {
    scheme: Scheme,
    steps: usize,
    seed: u64,
    final_mass_x: f64,
    final_mass_y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_mass_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_energy_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bridge_deviation: Option<f64>,
    tail_fraction: f64,
    tail_warning: bool,
    assumptions: AssumptionFlags,
}

/// Reads a config file and runs it.
pub fn run_file(config_path: &Path, options: &RunOptions) -> Result<RunOutcome> {
    let text = read_text(config_path)?;
    let config = RunConfig::from_json(&text)?;
    run(&config, options)
}

pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome> {
    let start = Instant::now();
    let kind = config.resolve_kind(options.kind)?;
    let mut effective = config.clone();
    effective.kind = Some(kind);
    if let Some(seed) = options.seed {
        effective.seed = seed;
    }
    let out_root = match (&options.out, &effective.output) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(Error::config("output", "no output directory (use --out)")),
    };
    effective.output = None;
    let mut setup = effective.validate_for(kind)?;

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = options.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::config("threads", e.to_string()))?
    };

    let mut out = OutputDir::create(&out_root)?;
    out.text("config.json", &effective.to_json())?;
    let mut warnings = Vec::new();
    let report = validate_assumptions(&setup.model, setup.params.t_final);
    setup.model.set_flags(report.flags());

    match kind {
        RunKind::Validate => out.json("assumptions.json", &report)?,
        RunKind::Simulate => simulate_kind(&effective, &setup, &mut out, &mut warnings)?,
        RunKind::Ensemble => {
            let cfg = effective.ensemble.as_ref().expect("validated");
            let window = effective.diagnostics.fit_window;
            let rep = pool.install(|| run_ensemble(&setup, cfg, effective.seed, window))?;
            if rep.aborted > 0 {
                warnings.push(format!("{} of {} paths aborted", rep.aborted, rep.paths));
            }
            out.json("ensemble.json", &rep)?;
            out.text("lyapunov.csv", &rep.to_csv())?;
        }
        RunKind::Picard => {
            let section = effective.picard.as_ref().expect("validated");
            let study = picard_study(&setup, section, effective.seed)?;
            if !study.report.converged {
                warnings.push(format!("picard iteration ended with status {:?}", study.report.status));
            }
            out.json("picard.json", &study)?;
        }
        RunKind::Convergence => {
            let cfg = effective.convergence.as_ref().expect("validated");
            let table = pool.install(|| convergence_study(&setup, cfg, effective.seed))?;
            out.json("convergence.json", &table)?;
            out.text("convergence.csv", &table.to_csv())?;
        }
    }
    Ok(RunOutcome {
        kind,
        out: out.root().to_path_buf(),
        files: out.into_written(),
        wall_time: start.elapsed().as_secs_f64(),
        warnings,
    })
}

fn simulate_kind(config: &RunConfig, setup: &Setup, out: &mut OutputDir, warnings: &mut Vec<String>) -> Result<()> {
    let diag = &config.diagnostics;
    if diag.decay_fit {
        omega(&setup.model)?;
    }
    let record = simulate(&setup.model, &setup.params, &setup.initial, config.seed)?;
    let homogeneous = setup.model.is_spatially_homogeneous();
    out.text("record.csv", &record.to_csv())?;
    out.text("path.csv", &record.path.to_csv())?;
    let mut summary = SimulateSummary {
        scheme: record.scheme(),
        steps: record.steps(),
        seed: config.seed,
        final_mass_x: *record.mass_x.last().expect("nonempty"),
        final_mass_y: *record.mass_y.last().expect("nonempty"),
        max_mass_residual: None,
        max_energy_residual: None,
        bridge_deviation: None,
        tail_fraction: record.tail_fraction,
        tail_warning: record.tail_warning(),
        assumptions: setup.model.flags(),
    };
    if homogeneous {
        summary.bridge_deviation = Some(bridge_deviation(&record, &setup.model)?);
    }
    if diag.residuals {
        match record.scheme() {
            Scheme::Direct => {
                let r = mass_identity_residual(&record, &setup.model)?;
                summary.max_mass_residual = Some(r.max_abs);
                out.text("residual_mass.csv", &r.to_csv())?;
            }
            Scheme::Rescaled => {
                let r = energy_identity_residual(&record, &setup.model, diag.energy_quadrature)?;
                summary.max_energy_residual = Some(r.max_abs);
                out.text("residual_energy.csv", &r.to_csv())?;
            }
        }
    }
    if diag.decay_fit {
        out.json("decay.json", &decay_report(&record, &setup.model, diag.fit_window)?)?;
    }
    if record.tail_warning() {
        warnings.push(format!(
            "spectral tail carries {:.3e} of the mass; the grid may be under-resolved",
            record.tail_fraction
        ));
    }
    for s in &record.snapshots {
        if let Some(x) = &s.x {
            out.bytes(&format!("fields/X_{:06}.bin", s.index), &field_dump(x, s.time))?;
        }
        if let (Some(y), Scheme::Rescaled) = (&s.y, record.scheme()) {
            out.bytes(&format!("fields/y_{:06}.bin", s.index), &field_dump(y, s.time))?;
        }
    }
    out.json("summary.json", &summary)?;
    Ok(())
}

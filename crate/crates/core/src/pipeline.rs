//! Experiment orchestration: theory, simulation or both, plus the report.

use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::config::{config_hash, resolved_config, Experiment, Mode};
use crate::error::{Error, Result};
use crate::harness::{max_delta_db, ConventionComparison, MetricsReport, Provenance, StabilitySummary};
use crate::network::DataKind;
use crate::report::{emit_report, write};
use crate::sim::{run_ensemble, steady_state_from_curves, EnsembleResult, NodeMetrics};
use crate::theory::{theoretical_bias, theoretical_metrics, TheoryContext};

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    /// Single-engine run finished.
    Complete,
    /// Theory and simulation agree within tolerance.
    Pass,
    /// Theory and simulation disagree beyond tolerance.
    ToleranceFailed { max_delta_db: f64 },
    /// The theory is not defined (unstable profile) or the simulation diverged.
    Unstable(String),
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Complete | Status::Pass => 0,
            Status::ToleranceFailed { .. } => 2,
            Status::Unstable(_) => 3,
        }
    }
}

/// Process exit code for an error that stopped the run early.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidProfile(_) | Error::Validation(_) | Error::Domain(_) => 4,
        e if e.is_instability() => 3,
        _ => 1,
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: MetricsReport,
    pub ensemble: Option<EnsembleResult>,
    pub status: Status,
}

fn finite(m: &NodeMetrics) -> bool {
    m.msd.is_finite() && m.emse.is_finite() && m.mse.is_finite()
}

/// Runs the engines selected by `exp.run.mode` and assembles the report.
pub fn run_experiment(exp: &Experiment) -> Result<Outcome> {
    let profile = &exp.profile;
    let mode = exp.run.mode;
    let convention = exp.run.pi_convention;
    let mut unstable: Option<String> = None;

    let mut theory = None;
    let mut bias_theory = None;
    if mode != Mode::Sim {
        match TheoryContext::new(profile, convention).and_then(|ctx| ctx.metrics()) {
            Ok(m) => {
                theory = Some(m);
                bias_theory = Some(theoretical_bias(profile)?);
            }
            Err(e) if e.is_instability() => unstable = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }

    let mut ensemble = None;
    let mut sim = None;
    let mut bias_sim: Option<Vec<DVector<f64>>> = None;
    if mode != Mode::Theory {
        let res = run_ensemble(profile, &exp.sim)?;
        let m = steady_state_from_curves(&res, exp.sim.tail)?;
        if let Some(k) = m.iter().position(|x| !finite(x)) {
            unstable.get_or_insert_with(|| Error::Diverged { node: k + 1 }.to_string());
        }
        bias_sim = Some(res.mean_weight_error.clone());
        sim = Some(m);
        ensemble = Some(res);
    }

    let mut report = MetricsReport::new(profile.len(), theory.as_deref(), sim.as_deref(), exp.run.tolerance_db)?;
    report.set_bias(bias_theory.as_deref(), bias_sim.as_deref());
    report.stability = Some(StabilitySummary::of(profile)?);
    if let (Some(t), Some(s)) = (&theory, &sim) {
        let alternate = convention.other();
        if let Ok(alt) = theoretical_metrics(profile, alternate) {
            let alt_max = max_delta_db(&alt, s);
            report.convention = Some(ConventionComparison {
                primary: convention,
                primary_max_delta_db: max_delta_db(t, s),
                alternate,
                alternate_theory: alt,
                alternate_max_delta_db: alt_max,
                alternate_pass: alt_max <= exp.run.tolerance_db,
            });
        }
    }
    report.provenance = Some(Provenance {
        seed: exp.sim.master_seed,
        config_hash: config_hash(exp),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: mode.as_str().to_string(),
        pi_convention: convention,
        gamma: profile.gamma,
        data: match profile.data {
            DataKind::Real => "real",
            DataKind::Complex => "complex",
        }
        .to_string(),
        iterations: exp.sim.iterations,
        runs: exp.sim.runs,
        tail: exp.sim.tail,
    });

    let status = match (unstable, report.max_delta_db) {
        (Some(msg), _) => Status::Unstable(msg),
        (None, Some(d)) if d <= exp.run.tolerance_db => Status::Pass,
        (None, Some(d)) => Status::ToleranceFailed { max_delta_db: d },
        (None, None) => Status::Complete,
    };
    Ok(Outcome { report, ensemble, status })
}

/// Writes the report, the curves (when simulated) and `resolved_config.json`.
pub fn write_outputs(exp: &Experiment, outcome: &Outcome, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = emit_report(&outcome.report, outcome.ensemble.as_ref(), output_dir)?;
    let path = output_dir.join("resolved_config.json");
    let mut text = serde_json::to_string_pretty(&resolved_config(exp)).expect("config serialises");
    text.push('\n');
    write(&path, &text)?;
    written.push(path);
    Ok(written)
}

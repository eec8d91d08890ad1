//! Configuration, experiment runs and report emission.

mod config;
mod plot;
mod run;

pub use config::{
    default_analyses, load_config, parse_config, ExperimentConfig, ModelId, ModelParams, SiSpec, SourceSpec,
    TheoryKind, TheorySpec,
};
pub use plot::{chsh_csv, emit_plot_data, si_rows_csv, sweep_csv, PlotData, SweepPoint};
pub use run::{
    analyze, build_source, correlator_sweep, multi_seed, run_experiment, run_experiment_with_threads, simulate,
    theory_distribution, threads_from_env, Analysis, ChshSection, RepeatSummary, RunOutput, THREADS_ENV,
};

use serde_json::{json, Value};

use crate::analysis::{chsh, si_test, Policy};
use crate::error::Result;
use crate::ontic::{AngleTable, Stage};
use crate::trial::{Ensemble, LabelScheme};

/// Parses `a0,a1;b0,b1` (angles per wing separated by `;`).
pub fn parse_angle_table(text: &str) -> Result<AngleTable> {
    let (a, b) = text.split_once(';').ok_or_else(|| {
        crate::Error::InvalidParameter(format!("angle table {text:?} must look like a0,a1;b0,b1"))
    })?;
    let wing = |s: &str| -> Result<Vec<crate::ontic::Angle>> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
    };
    AngleTable::new(wing(a)?, wing(b)?)
}

/// Every sense-1 test that applies to a log: each recorded stage against
/// each label scheme, plus CHSH when `table` is given. Tests whose
/// preconditions fail are listed with the error instead.
pub fn report_all(ensemble: &Ensemble, table: Option<&AngleTable>, policy: Policy) -> Value {
    let trials = ensemble.trials();
    let stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| trials.iter().any(|t| t.snapshot(*s).is_some()))
        .collect();
    let schemes = [
        LabelScheme::Wing(crate::ontic::Wing::A),
        LabelScheme::Wing(crate::ontic::Wing::B),
        LabelScheme::Joint,
    ];
    let mut tests = Vec::new();
    for stage in stages {
        for scheme in schemes {
            let name = format!("{stage}@{scheme}");
            tests.push(match si_test(trials, stage, scheme, policy) {
                Ok(r) => json!({"name": name, "report": serde_json::to_value(r).unwrap()}),
                Err(e) => json!({"name": name, "error": {"code": e.code(), "message": e.to_string()}}),
            });
        }
    }
    let chsh_value = table.map(|t| match chsh(trials, t, 1) {
        Ok(est) => serde_json::to_value(est).unwrap(),
        Err(e) => json!({"error": {"code": e.code(), "message": e.to_string()}}),
    });
    json!({
        "model_id": ensemble.meta.model_id,
        "seed": ensemble.meta.seed,
        "trials": ensemble.len(),
        "config_digest": ensemble.meta.config_digest,
        "log_sha256": ensemble.digest(),
        "si": tests,
        "chsh": chsh_value,
    })
}

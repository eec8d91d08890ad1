//! Toy theories behind one trial-generation interface.
//!
//! Each model is a pure function of `(parameters, seed, trial_index)`; all
//! randomness comes from [`derive_trial_randomness`](crate::settings::derive_trial_randomness)
//! streams or a [`SettingSource`](crate::settings::SettingSource) indexed by
//! the trial.
//!
//! | model          | stages emitted                                             |
//! |----------------|------------------------------------------------------------|
//! | local-hv       | preparation (total λ)                                      |
//! | goblin-1       | preparation (total λ)                                      |
//! | goblin-2/3     | preparation (partial λ on the two chosen observables)      |
//! | zigzag         | causal-step-1, source-temporal, causal-step-3              |
//! | all-at-once    | preparation (λ₀ = ∅), post-measurement (partial λ)         |
//! | fluke          | post-measurement                                           |
//! | galton         | preparation (initial condition), post-measurement (box)    |
//! | drug-trial     | preparation (responder class)                              |

mod all_at_once;
mod branching;
mod exceptionalist;
mod fluke;
mod galton;
mod goblin;
mod local_hv;
mod zigzag;

pub use all_at_once::AllAtOnce;
pub use branching::{enumerate_branches, Branch, BranchEnumeration, BranchSummary, MAX_BRANCH_QUBITS};
pub use exceptionalist::{run_exceptionalist, DrugTrial, ExceptionalistRun, NON_RESPONDER, RESPONDER};
pub use fluke::{coin_theory, entanglement_mixture_theory, run_fluke, FlukeCondition, FlukeMode, FlukeModel, HEADS, TAILS};
pub use galton::{box_theory, box_token, parse_bits, run_galton, GaltonBoard, GaltonMode, GaltonResult, MAX_SWEEP_ROWS};
pub use goblin::{
    derive_goblin1_tables, lambda_index_outcome, nomic_exclusion_violations, Goblin, GoblinTables, GoblinVariant,
};
pub use local_hv::LocalHv;
pub use zigzag::Zigzag;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::JointTable;
use crate::error::{Error, Result};
use crate::ontic::{AngleTable, JointSetting, Observable, OnticState, Outcome, Stage};
use crate::settings::TrialStream;
use crate::trial::{Ensemble, EnsembleMeta, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalStructure {
    LocalHv,
    /// λ → G → X
    Goblin1,
    /// λ ← G → X
    Goblin2,
    /// X → G → λ
    Goblin3,
    Zigzag,
    Fluke,
    Branching,
    Galton,
    AllAtOnce,
    Exceptionalist,
}

pub trait TrialModel: Sync {
    fn model_id(&self) -> &str;
    fn causal_structure(&self) -> CausalStructure;
    /// Stages this model snapshots on every trial.
    fn stages(&self) -> &'static [Stage];
    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord>;
}

/// Runs `f` on a pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trials `range` of `model` in parallel, returned in index order.
pub fn generate_trials(model: &dyn TrialModel, range: std::ops::Range<u64>, seed: u64) -> Result<Vec<TrialRecord>> {
    range.into_par_iter().map(|i| model.run_trial(i, seed)).collect()
}

pub fn generate(model: &dyn TrialModel, n_trials: u64, seed: u64, config_digest: &str) -> Result<Ensemble> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    let trials = generate_trials(model, 0..n_trials, seed)?;
    Ensemble::new(
        EnsembleMeta {
            model_id: model.model_id().to_string(),
            seed,
            config_digest: config_digest.to_string(),
        },
        trials,
    )
}

pub(crate) fn observables(joint: &JointSetting) -> (Observable, Observable) {
    (
        joint.a.observable().expect("models use angle settings"),
        joint.b.observable().expect("models use angle settings"),
    )
}

/// Draws `(a, b)` from the joint outcome table of one cell.
pub(crate) fn sample_cell(cell: &[[f64; 2]; 2], stream: &mut TrialStream) -> (Outcome, Outcome) {
    let k = stream.categorical(&[cell[0][0], cell[0][1], cell[1][0], cell[1][1]]);
    let o = |i: usize| if i == 0 { Outcome::Plus } else { Outcome::Minus };
    (o(k / 2), o(k % 2))
}

pub(crate) fn partial_lambda(joint: &JointSetting, a: Outcome, b: Outcome) -> OnticState {
    let (oa, ob) = observables(joint);
    OnticState::assignment([(oa, a), (ob, b)])
}

/// Table indices of a joint setting drawn from `table`.
pub(crate) fn cell_indices(table: &AngleTable, joint: &JointSetting) -> Result<(usize, usize)> {
    let find = |wing, s: crate::ontic::Setting| {
        s.angle_value()
            .and_then(|a| table.index_of(wing, &a, 1e-9))
            .ok_or_else(|| Error::InvalidParameter(format!("setting {} is not in the angle table", s.token())))
    };
    Ok((find(crate::ontic::Wing::A, joint.a)?, find(crate::ontic::Wing::B, joint.b)?))
}

pub(crate) fn validate_joint_table(pq: &JointTable) -> Result<()> {
    for row in pq {
        for cell in row {
            let flat = [cell[0][0], cell[0][1], cell[1][0], cell[1][1]];
            if flat.iter().any(|&p| !(p >= -1e-15) || !p.is_finite()) {
                return Err(Error::InvalidParameter("joint table has a negative entry".into()));
            }
            let s: f64 = flat.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("joint table cell sums to {s}, not 1")));
            }
        }
    }
    Ok(())
}

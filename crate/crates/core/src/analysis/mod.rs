//! SI analyzer (both senses), Bell statistics and ontic audits.

mod bell;
mod distribution;
mod si;

pub use bell::{
    chsh, chsh_exact, chsh_from_counts, joint_fit_p_values, outcome_counts, quantum_joint_table, ChshEstimate,
    Correlator, JointTable, OutcomeCounts, CHSH_SIGNS,
};
pub use distribution::{build_distribution, tv_distance, Distribution, FrequencyDistribution};
pub use si::{chi_square_gof, si_test, si_test_theory, LabelRow, Policy, Sense, SiReport, Verdict, ENSEMBLE_ROW};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ontic::Stage;
use crate::trial::TrialRecord;

/// How many trials assign values to observables that were not measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterfactualAudit {
    pub stage: Stage,
    pub trials: u64,
    /// Trials whose λ assigns any unmeasured observable.
    pub with_unmeasured: u64,
    /// Trials whose λ is defined on exactly the measured observables.
    pub exactly_measured: u64,
    pub fraction_with_unmeasured: f64,
}

pub fn counterfactual_audit(trials: &[TrialRecord], stage: Stage) -> Result<CounterfactualAudit> {
    let (mut with_unmeasured, mut exactly) = (0u64, 0u64);
    let mut n = 0u64;
    for t in trials {
        let state = t.snapshot(stage).ok_or(Error::MissingSnapshot {
            trial_index: t.trial_index,
            stage,
        })?;
        let measured: std::collections::BTreeSet<_> = [t.setting_a, t.setting_b]
            .into_iter()
            .flatten()
            .filter_map(|s| s.observable())
            .collect();
        let defined = state.definedness();
        if defined.iter().any(|o| !measured.contains(o)) {
            with_unmeasured += 1;
        }
        if defined == measured {
            exactly += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    Ok(CounterfactualAudit {
        stage,
        trials: n,
        with_unmeasured,
        exactly_measured: exactly,
        fraction_with_unmeasured: with_unmeasured as f64 / n as f64,
    })
}

/// Trials whose outcomes disagree with the values λ assigns to the measured
/// observables at `stage`. Trials without a total assignment are skipped.
pub fn outcome_mismatches(trials: &[TrialRecord], stage: Stage) -> Vec<u64> {
    trials
        .iter()
        .filter(|t| {
            let Some(state) = t.snapshot(stage) else { return false };
            let check = |s: Option<crate::ontic::Setting>, o: Option<crate::ontic::Outcome>| {
                match (s.and_then(|s| s.observable()), o) {
                    (Some(obs), Some(o)) => state.value_of(&obs).is_some_and(|v| v != o),
                    _ => false,
                }
            };
            check(t.setting_a, t.outcome_a) || check(t.setting_b, t.outcome_b)
        })
        .map(|t| t.trial_index)
        .collect()
}

use super::{CausalStructure, TrialModel};
use crate::error::Result;
use crate::ontic::{AngleTable, Observable, OnticState, Outcome, Stage, Wing};
use crate::settings::{derive_trial_randomness, SettingSource};
use crate::trial::TrialRecord;

/// Local deterministic hidden variables: λ is a uniform total assignment over
/// every observable in the table, drawn independently of the settings.
#[derive(Debug, Clone)]
pub struct LocalHv {
    observables: Vec<Observable>,
    source: SettingSource,
}

impl LocalHv {
    pub fn new(table: AngleTable, source: SettingSource) -> LocalHv {
        let mut observables: Vec<Observable> = table
            .a
            .iter()
            .map(|&angle| Observable { wing: Wing::A, angle })
            .chain(table.b.iter().map(|&angle| Observable { wing: Wing::B, angle }))
            .collect();
        observables.sort();
        observables.dedup();
        LocalHv { observables, source }
    }
}

impl TrialModel for LocalHv {
    fn model_id(&self) -> &str {
        "local-hv"
    }

    fn causal_structure(&self) -> CausalStructure {
        CausalStructure::LocalHv
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::Preparation]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let mut rng = derive_trial_randomness(seed, trial_index, "local-hv-lambda");
        let lambda = OnticState::assignment(
            self.observables
                .iter()
                .map(|&o| (o, if rng.bernoulli(0.5) { Outcome::Plus } else { Outcome::Minus })),
        );
        let joint = self.source.joint_at(trial_index)?;
        let value = |s: crate::ontic::Setting| {
            lambda
                .value_of(&s.observable().expect("angle setting"))
                .expect("λ is total over the table")
        };
        let (a, b) = (value(joint.a), value(joint.b));
        Ok(TrialRecord::new(trial_index, "local-hv")
            .with_settings(joint)
            .with_outcomes(a, b)
            .with_snapshot(Stage::Preparation, lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcomes_match_lambda() {
        let t = AngleTable::chsh();
        let m = LocalHv::new(t.clone(), SettingSource::seeded_prng(3, t));
        let trials: Vec<_> = (0..200).map(|i| m.run_trial(i, 11).unwrap()).collect();
        assert!(crate::analysis::outcome_mismatches(&trials, Stage::Preparation).is_empty());
        assert_eq!(trials[0].snapshot(Stage::Preparation).unwrap().definedness().len(), 4);
    }
}

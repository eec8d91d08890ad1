use super::{cell_indices, partial_lambda, sample_cell, validate_joint_table, CausalStructure, TrialModel};
use crate::analysis::JointTable;
use crate::error::Result;
use crate::ontic::{AngleTable, OnticState, Stage};
use crate::settings::{derive_trial_randomness, SettingSource};
use crate::trial::TrialRecord;

/// Invariant-set style model: settings come first, then one joint draw of
/// both outcomes. λ₀ is empty; λ is defined only on the measured pair.
#[derive(Debug, Clone)]
pub struct AllAtOnce {
    table: AngleTable,
    pq: JointTable,
    source: SettingSource,
}

impl AllAtOnce {
    pub fn new(table: AngleTable, pq: JointTable, source: SettingSource) -> Result<AllAtOnce> {
        validate_joint_table(&pq)?;
        Ok(AllAtOnce { table, pq, source })
    }
}

impl TrialModel for AllAtOnce {
    fn model_id(&self) -> &str {
        "all-at-once"
    }

    fn causal_structure(&self) -> CausalStructure {
        CausalStructure::AllAtOnce
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::Preparation, Stage::PostMeasurement]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let joint = self.source.joint_at(trial_index)?;
        let (ia, ib) = cell_indices(&self.table, &joint)?;
        let mut rng = derive_trial_randomness(seed, trial_index, "invariant-set");
        let (a, b) = sample_cell(&self.pq[ia][ib], &mut rng);
        Ok(TrialRecord::new(trial_index, "all-at-once")
            .with_settings(joint)
            .with_outcomes(a, b)
            .with_snapshot(Stage::Preparation, OnticState::Empty)
            .with_snapshot(Stage::PostMeasurement, partial_lambda(&joint, a, b)))
    }
}

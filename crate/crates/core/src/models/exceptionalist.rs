use super::{generate, CausalStructure, Goblin, GoblinVariant, TrialModel};
use crate::analysis::JointTable;
use crate::error::{Error, Result};
use crate::ontic::{OnticState, Setting, Stage, Wing};
use crate::settings::{derive_trial_randomness, SettingSource};
use crate::trial::{Ensemble, TrialRecord};

pub const RESPONDER: &str = "responder";
pub const NON_RESPONDER: &str = "non-responder";

/// Drug trial whose group assignment is the A-wing index of draw `i` of a
/// shared setting source. The latent class is independent of the assignment.
#[derive(Debug, Clone)]
pub struct DrugTrial {
    responder_rate: f64,
    source: SettingSource,
}

impl DrugTrial {
    pub fn new(responder_rate: f64, source: SettingSource) -> Result<DrugTrial> {
        if !(responder_rate > 0.0 && responder_rate < 1.0) {
            return Err(Error::InvalidParameter(format!("responder rate {responder_rate} must be in (0, 1)")));
        }
        Ok(DrugTrial { responder_rate, source })
    }
}

impl TrialModel for DrugTrial {
    fn model_id(&self) -> &str {
        "exceptionalist-drug"
    }

    fn causal_structure(&self) -> CausalStructure {
        CausalStructure::Exceptionalist
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::Preparation]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let (group, _) = self.source.indices_at(trial_index)?;
        let responder = derive_trial_randomness(seed, trial_index, "drug-responder").bernoulli(self.responder_rate);
        let mut record = TrialRecord::new(trial_index, "exceptionalist-drug")
            .with_snapshot(Stage::Preparation, OnticState::classical(if responder { RESPONDER } else { NON_RESPONDER })?);
        record.setting_a = Some(Setting::indexed(Wing::A, group as u8));
        Ok(record)
    }
}

#[derive(Debug, Clone)]
pub struct ExceptionalistRun {
    pub drug: Ensemble,
    pub bell: Ensemble,
}

/// Both arms from one shared source: the drug arm reads the A index of each
/// draw, the Bell arm is a goblin-2 model whose settings are the same draws.
pub fn run_exceptionalist(
    n_trials: u64,
    seed: u64,
    responder_rate: f64,
    pq: JointTable,
    source: SettingSource,
    config_digest: &str,
) -> Result<ExceptionalistRun> {
    let drug_model = DrugTrial::new(responder_rate, source.clone())?;
    let bell_model = Goblin::new(GoblinVariant::Two, source.angle_table.clone(), pq, source)?
        .with_model_id("exceptionalist-bell");
    Ok(ExceptionalistRun {
        drug: generate(&drug_model, n_trials, seed, config_digest)?,
        bell: generate(&bell_model, n_trials, seed, config_digest)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::AngleTable;

    #[test]
    fn arms_share_the_stream() {
        let t = AngleTable::chsh();
        let pq = crate::analysis::quantum_joint_table(&t, crate::quantum::Convention::Singlet).unwrap();
        let run = run_exceptionalist(200, 7, 0.3, pq, SettingSource::seeded_prng(9, t.clone()), "").unwrap();
        for (d, b) in run.drug.trials().iter().zip(run.bell.trials()) {
            let group = match d.setting_a.unwrap().kind {
                crate::ontic::SettingKind::Indexed(k) => k as usize,
                _ => unreachable!(),
            };
            let a = b.setting_a.unwrap().angle_value().unwrap();
            assert_eq!(t.index_of(Wing::A, &a, 1e-9), Some(group));
        }
    }

    #[test]
    fn rate_is_validated() {
        let t = AngleTable::chsh();
        assert!(DrugTrial::new(1.0, SettingSource::seeded_prng(1, t)).is_err());
    }
}

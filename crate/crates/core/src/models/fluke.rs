use std::str::FromStr;

use serde::Serialize;

use super::{cell_indices, generate_trials, partial_lambda, sample_cell, validate_joint_table, CausalStructure, TrialModel};
use crate::analysis::{Distribution, JointTable};
use crate::error::{Error, Result};
use crate::ontic::{AngleTable, OnticState, Outcome, Stage};
use crate::settings::{derive_trial_randomness, SettingSource};
use crate::trial::{Ensemble, EnsembleMeta, TrialRecord, FLAG_CORRELATION_OBEYED, FLAG_FLUKE_BRANCH};

pub const HEADS: &str = "H";
pub const TAILS: &str = "T";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlukeMode {
    Coin,
    Entanglement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlukeCondition {
    None,
    PostSelectObeyed,
    ForceAllHeads,
}

impl FromStr for FlukeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<FlukeMode> {
        match s {
            "coin" => Ok(FlukeMode::Coin),
            "entanglement" => Ok(FlukeMode::Entanglement),
            _ => Err(Error::InvalidParameter(format!("unknown fluke mode {s:?}"))),
        }
    }
}

impl FromStr for FlukeCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<FlukeCondition> {
        match s {
            "none" => Ok(FlukeCondition::None),
            "post-select-obeyed" => Ok(FlukeCondition::PostSelectObeyed),
            "force-all-heads" => Ok(FlukeCondition::ForceAllHeads),
            _ => Err(Error::InvalidParameter(format!("unknown fluke condition {s:?}"))),
        }
    }
}

/// Fluke postulates. Coin trials log `H`/`T` at post-measurement.
/// Entanglement trials obey the quantum joint with probability ½ and
/// otherwise give independent uniform outcomes.
#[derive(Debug, Clone)]
pub struct FlukeModel {
    mode: FlukeMode,
    condition: FlukeCondition,
    table: AngleTable,
    pq: JointTable,
    source: SettingSource,
}

impl FlukeModel {
    pub fn new(
        mode: FlukeMode,
        condition: FlukeCondition,
        table: AngleTable,
        pq: JointTable,
        source: SettingSource,
    ) -> Result<FlukeModel> {
        match (mode, condition) {
            (FlukeMode::Coin, FlukeCondition::PostSelectObeyed) => {
                return Err(Error::InvalidParameter("post-select-obeyed applies to entanglement flukes".into()))
            }
            (FlukeMode::Entanglement, FlukeCondition::ForceAllHeads) => {
                return Err(Error::InvalidParameter("force-all-heads applies to coin flukes".into()))
            }
            _ => {}
        }
        validate_joint_table(&pq)?;
        Ok(FlukeModel {
            mode,
            condition,
            table,
            pq,
            source,
        })
    }

    pub fn coin(condition: FlukeCondition) -> Result<FlukeModel> {
        let table = AngleTable::chsh();
        let pq = crate::analysis::quantum_joint_table(&table, crate::quantum::Convention::Singlet)?;
        let source = SettingSource::seeded_prng(0, table.clone());
        FlukeModel::new(FlukeMode::Coin, condition, table, pq, source)
    }

    pub fn mode(&self) -> FlukeMode {
        self.mode
    }

    pub fn condition(&self) -> FlukeCondition {
        self.condition
    }
}

impl TrialModel for FlukeModel {
    fn model_id(&self) -> &str {
        match self.mode {
            FlukeMode::Coin => "fluke-coin",
            FlukeMode::Entanglement => "fluke-entanglement",
        }
    }

    fn causal_structure(&self) -> CausalStructure {
        CausalStructure::Fluke
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::PostMeasurement]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let id = self.model_id();
        match self.mode {
            FlukeMode::Coin => {
                let heads = derive_trial_randomness(seed, trial_index, "coin").bernoulli(0.5);
                let record = TrialRecord::new(trial_index, id);
                if self.condition == FlukeCondition::ForceAllHeads {
                    Ok(record
                        .with_snapshot(Stage::PostMeasurement, OnticState::classical(HEADS)?)
                        .with_flag(FLAG_FLUKE_BRANCH))
                } else {
                    let face = if heads { HEADS } else { TAILS };
                    Ok(record.with_snapshot(Stage::PostMeasurement, OnticState::classical(face)?))
                }
            }
            FlukeMode::Entanglement => {
                let joint = self.source.joint_at(trial_index)?;
                let (ia, ib) = cell_indices(&self.table, &joint)?;
                let obey = derive_trial_randomness(seed, trial_index, "fluke-branch").bernoulli(0.5);
                let mut rng = derive_trial_randomness(seed, trial_index, "fluke-outcomes");
                let (a, b) = if obey {
                    sample_cell(&self.pq[ia][ib], &mut rng)
                } else {
                    let coin = |u: f64| if u < 0.5 { Outcome::Plus } else { Outcome::Minus };
                    (coin(rng.next_unit()), coin(rng.next_unit()))
                };
                let mut record = TrialRecord::new(trial_index, id)
                    .with_settings(joint)
                    .with_outcomes(a, b)
                    .with_snapshot(Stage::PostMeasurement, partial_lambda(&joint, a, b));
                if obey {
                    record = record.with_flag(FLAG_CORRELATION_OBEYED);
                }
                Ok(record)
            }
        }
    }
}

/// Generates `n_trials` trials and applies the model's condition.
/// Post-selection keeps the obeyed trials with their original indices.
pub fn run_fluke(model: &FlukeModel, n_trials: u64, seed: u64, config_digest: &str) -> Result<Ensemble> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    let mut trials = generate_trials(model, 0..n_trials, seed)?;
    if model.condition == FlukeCondition::PostSelectObeyed {
        trials.retain(|t| t.has_flag(FLAG_CORRELATION_OBEYED));
        if trials.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
    }
    Ensemble::new(
        EnsembleMeta {
            model_id: model.model_id().to_string(),
            seed,
            config_digest: config_digest.to_string(),
        },
        trials,
    )
}

/// Fair-coin generating distribution.
pub fn coin_theory() -> Distribution {
    Distribution::from_pairs([(HEADS, 0.5), (TAILS, 0.5)]).expect("valid distribution")
}

/// Post-measurement token distribution for uniform settings when a fraction
/// `obey` of trials follows `pq` and the rest are uniform:
/// `P = 1/(|A||B|) · (obey · P_Q + (1 − obey)/4)`.
pub fn entanglement_mixture_theory(table: &AngleTable, pq: &JointTable, obey: f64) -> Result<Distribution> {
    if !table.is_two_by_two() {
        return Err(Error::InvalidParameter("mixture theory needs a 2×2 angle table".into()));
    }
    if !(0.0..=1.0).contains(&obey) {
        return Err(Error::InvalidParameter(format!("obey fraction {obey} outside [0, 1]")));
    }
    let mut pairs = Vec::with_capacity(16);
    for ia in 0..2 {
        for ib in 0..2 {
            let joint = table.joint(ia, ib)?;
            for (ka, a) in crate::quantum::OUTCOMES.into_iter().enumerate() {
                for (kb, b) in crate::quantum::OUTCOMES.into_iter().enumerate() {
                    let p = 0.25 * (obey * pq[ia][ib][ka][kb] + (1.0 - obey) * 0.25);
                    pairs.push((partial_lambda(&joint, a, b).canonical_encoding(), p));
                }
            }
        }
    }
    Distribution::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_condition_is_rejected() {
        assert!(FlukeModel::coin(FlukeCondition::PostSelectObeyed).is_err());
    }

    #[test]
    fn forced_heads_are_flagged() {
        let m = FlukeModel::coin(FlukeCondition::ForceAllHeads).unwrap();
        let e = run_fluke(&m, 20, 1, "").unwrap();
        assert!(e.trials().iter().all(|t| t.has_flag(FLAG_FLUKE_BRANCH)
            && t.snapshot(Stage::PostMeasurement).unwrap().canonical_encoding() == HEADS));
    }

    #[test]
    fn post_selection_keeps_indices() {
        let t = AngleTable::chsh();
        let pq = crate::analysis::quantum_joint_table(&t, crate::quantum::Convention::Singlet).unwrap();
        let m = FlukeModel::new(
            FlukeMode::Entanglement,
            FlukeCondition::PostSelectObeyed,
            t.clone(),
            pq,
            SettingSource::seeded_prng(1, t),
        )
        .unwrap();
        let e = run_fluke(&m, 100, 3, "").unwrap();
        assert!(e.len() < 100 && !e.is_empty());
        assert!(e.trials().iter().all(|t| t.has_flag(FLAG_CORRELATION_OBEYED)));
    }
}

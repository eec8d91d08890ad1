//! Nomic-exclusion goblin theories.
//!
//! Total assignments over `(a₀, a₁, b₀, b₁)` are indexed `0..16`; bit `k` of
//! the index is set when observable `k` takes the value −1.

use serde::Serialize;

use super::{cell_indices, partial_lambda, sample_cell, validate_joint_table, CausalStructure, TrialModel};
use crate::analysis::JointTable;
use crate::error::{Error, Result};
use crate::ontic::{AngleTable, JointSetting, Observable, OnticState, Outcome, Stage, Wing};
use crate::settings::{derive_trial_randomness, SettingSource};
use crate::trial::TrialRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GoblinVariant {
    One,
    Two,
    Three,
}

impl GoblinVariant {
    pub fn from_number(n: u8) -> Result<GoblinVariant> {
        match n {
            1 => Ok(GoblinVariant::One),
            2 => Ok(GoblinVariant::Two),
            3 => Ok(GoblinVariant::Three),
            _ => Err(Error::InvalidParameter(format!("goblin variant must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            GoblinVariant::One => 1,
            GoblinVariant::Two => 2,
            GoblinVariant::Three => 3,
        }
    }
}

/// Value of observable `k` (0..4) under total assignment `lambda` (0..16).
pub fn lambda_index_outcome(lambda: usize, k: usize) -> Outcome {
    if (lambda >> k) & 1 == 0 {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoblinTables {
    /// `(a₀, a₁, b₀, b₁)`.
    pub observables: [Observable; 4],
    pub lambda_prior: [f64; 16],
    /// `w[λ][2·i_A + i_B]`; `None` where `q(λ) = 0`.
    pub setting_weights: [Option<[f64; 4]>; 16],
}

impl GoblinTables {
    pub fn assignment(&self, lambda: usize) -> OnticState {
        OnticState::assignment((0..4).map(|k| (self.observables[k], lambda_index_outcome(lambda, k))))
    }

    /// `Σ_λ q(λ) w(X,Y|λ)` per joint setting.
    pub fn setting_marginal(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (l, w) in self.setting_weights.iter().enumerate() {
            if let Some(w) = w {
                for s in 0..4 {
                    m[s] += self.lambda_prior[l] * w[s];
                }
            }
        }
        m
    }

    /// `P(a, b | X, Y)` implied by the tables.
    pub fn reproduced_joint(&self) -> JointTable {
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        let marginal = self.setting_marginal();
        for (l, w) in self.setting_weights.iter().enumerate() {
            let Some(w) = w else { continue };
            for ia in 0..2 {
                for ib in 0..2 {
                    let a = crate::quantum::outcome_index(lambda_index_outcome(l, ia));
                    let b = crate::quantum::outcome_index(lambda_index_outcome(l, 2 + ib));
                    out[ia][ib][a][b] += self.lambda_prior[l] * w[2 * ia + ib] / marginal[2 * ia + ib];
                }
            }
        }
        out
    }

    /// Exact `ρ(λ | X, Y)` over λ indices.
    pub fn conditional(&self, ia: usize, ib: usize) -> [f64; 16] {
        let s = 2 * ia + ib;
        let mut out = [0.0; 16];
        let marginal = self.setting_marginal()[s];
        for (l, w) in self.setting_weights.iter().enumerate() {
            if let Some(w) = w {
                out[l] = self.lambda_prior[l] * w[s] / marginal;
            }
        }
        out
    }

    /// Joint settings with zero weight under `lambda`.
    pub fn excluded_settings(&self, lambda: usize) -> Vec<usize> {
        match &self.setting_weights[lambda] {
            Some(w) => (0..4).filter(|&s| w[s] == 0.0).collect(),
            None => (0..4).collect(),
        }
    }
}

/// `P(λ,X,Y) = ¼ · P_Q(λ_X, λ_Y | X,Y) · ¼`, then `q = Σ_{X,Y} P` and `w = P / q`.
pub fn derive_goblin1_tables(table: &AngleTable, pq: &JointTable) -> Result<GoblinTables> {
    if !table.is_two_by_two() {
        return Err(Error::InvalidParameter("goblin tables need a 2×2 angle table".into()));
    }
    validate_joint_table(pq)?;
    let observables = [
        Observable { wing: Wing::A, angle: table.a[0] },
        Observable { wing: Wing::A, angle: table.a[1] },
        Observable { wing: Wing::B, angle: table.b[0] },
        Observable { wing: Wing::B, angle: table.b[1] },
    ];
    let mut joint = [[0.0; 4]; 16];
    for (l, row) in joint.iter_mut().enumerate() {
        for ia in 0..2 {
            for ib in 0..2 {
                let a = crate::quantum::outcome_index(lambda_index_outcome(l, ia));
                let b = crate::quantum::outcome_index(lambda_index_outcome(l, 2 + ib));
                row[2 * ia + ib] = 0.25 * pq[ia][ib][a][b].max(0.0) * 0.25;
            }
        }
    }
    let mut lambda_prior = [0.0; 16];
    let mut setting_weights = [None; 16];
    for l in 0..16 {
        let q: f64 = joint[l].iter().sum();
        lambda_prior[l] = q;
        if q > 0.0 {
            setting_weights[l] = Some(joint[l].map(|p| p / q));
        }
    }
    Ok(GoblinTables {
        observables,
        lambda_prior,
        setting_weights,
    })
}

/// Goblin theory 1, 2 or 3 over a 2×2 table.
///
/// Variant 1 draws λ from `q` and the goblin picks settings from `w(·|λ)`.
/// Variants 2 and 3 take settings from `source` and emit a partial λ on the
/// two chosen observables; variant 3 requires a deterministic-counter source.
#[derive(Debug, Clone)]
pub struct Goblin {
    variant: GoblinVariant,
    model_id: String,
    table: AngleTable,
    pq: JointTable,
    tables: GoblinTables,
    source: SettingSource,
    debug_exclusions: bool,
}

impl Goblin {
    pub fn new(variant: GoblinVariant, table: AngleTable, pq: JointTable, source: SettingSource) -> Result<Goblin> {
        let tables = derive_goblin1_tables(&table, &pq)?;
        if variant == GoblinVariant::Three && source.kind != crate::settings::SourceKind::DeterministicCounter {
            return Err(Error::InvalidParameter(
                "goblin-3 predicts settings and needs a deterministic-counter source".into(),
            ));
        }
        Ok(Goblin {
            variant,
            model_id: format!("goblin-{}", variant.number()),
            table,
            pq,
            tables,
            source,
            debug_exclusions: false,
        })
    }

    /// Adds an `excluded:<joint>` flag per counterfactually excluded setting.
    pub fn with_debug_exclusions(mut self, on: bool) -> Goblin {
        self.debug_exclusions = on;
        self
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Goblin {
        self.model_id = id.into();
        self
    }

    pub fn tables(&self) -> &GoblinTables {
        &self.tables
    }

    fn joint(&self, s: usize) -> Result<JointSetting> {
        self.table.joint(s / 2, s % 2)
    }
}

impl TrialModel for Goblin {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn causal_structure(&self) -> CausalStructure {
        match self.variant {
            GoblinVariant::One => CausalStructure::Goblin1,
            GoblinVariant::Two => CausalStructure::Goblin2,
            GoblinVariant::Three => CausalStructure::Goblin3,
        }
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::Preparation]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let mut record = TrialRecord::new(trial_index, &self.model_id);
        let excluded: Vec<usize>;
        match self.variant {
            GoblinVariant::One => {
                let mut rng = derive_trial_randomness(seed, trial_index, "goblin-lambda");
                let lambda = rng.categorical(&self.tables.lambda_prior);
                let w = self.tables.setting_weights[lambda].expect("sampled λ has positive prior");
                let s = derive_trial_randomness(seed, trial_index, "goblin-settings").categorical(&w);
                let joint = self.joint(s)?;
                let (ia, ib) = (s / 2, s % 2);
                record = record
                    .with_settings(joint)
                    .with_outcomes(lambda_index_outcome(lambda, ia), lambda_index_outcome(lambda, 2 + ib))
                    .with_snapshot(Stage::Preparation, self.tables.assignment(lambda));
                excluded = self.tables.excluded_settings(lambda);
            }
            GoblinVariant::Two | GoblinVariant::Three => {
                let joint = self.source.joint_at(trial_index)?;
                let (ia, ib) = cell_indices(&self.table, &joint)?;
                let mut rng = derive_trial_randomness(seed, trial_index, "goblin-outcomes");
                let (a, b) = sample_cell(&self.pq[ia][ib], &mut rng);
                record = record
                    .with_settings(joint)
                    .with_outcomes(a, b)
                    .with_snapshot(Stage::Preparation, partial_lambda(&joint, a, b));
                excluded = (0..4).filter(|&s| s != 2 * ia + ib).collect();
            }
        }
        if self.debug_exclusions {
            for s in excluded {
                record = record.with_flag(format!("excluded:{}", self.joint(s)?.token()));
            }
        }
        Ok(record)
    }
}

/// Trials pairing their total λ with a joint setting the tables exclude.
pub fn nomic_exclusion_violations(trials: &[TrialRecord], tables: &GoblinTables, table: &AngleTable) -> Vec<u64> {
    trials
        .iter()
        .filter(|t| {
            let (Some(state), Some(joint)) = (t.snapshot(Stage::Preparation), t.joint_setting()) else {
                return false;
            };
            let Ok((ia, ib)) = cell_indices(table, &joint) else { return true };
            let mut lambda = 0usize;
            for (k, obs) in tables.observables.iter().enumerate() {
                match state.value_of(obs) {
                    Some(Outcome::Minus) => lambda |= 1 << k,
                    Some(Outcome::Plus) => {}
                    // partial λ: only the measured pair is defined
                    None => return false,
                }
            }
            match &tables.setting_weights[lambda] {
                Some(w) => w[2 * ia + ib] == 0.0,
                None => true,
            }
        })
        .map(|t| t.trial_index)
        .collect()
}

use super::{CausalStructure, TrialModel};
use crate::error::Result;
use crate::ontic::{LocalQuantum, OnticState, Stage};
use crate::quantum::{born_sample, make_singlet, partner_state, reduce_first, Convention, DensityMatrix, TwoQubitState};
use crate::settings::{derive_trial_randomness, SettingSource};
use crate::trial::{TrialRecord, FLAG_POST_MEASUREMENT_ALICE};

/// Retrocausal zig-zag: source → Alice → back to the source → Bob.
///
/// λ₁ is the reduced state of qubit 1 (maximally mixed, constant). Alice's
/// Born outcome prepares Bob's particle in `λ₂ = partner_state(Ψ, X, a)`.
///
/// Snapshots: `causal-step-1 = [λ₁]`, `source-temporal = [λ₁, λ₂]` and
/// `causal-step-3 = [λ₁, λ₂]` with the trial flagged post-measurement for Alice.
#[derive(Debug, Clone)]
pub struct Zigzag {
    singlet: TwoQubitState,
    lambda1: DensityMatrix,
    source: SettingSource,
    convention: Convention,
}

impl Zigzag {
    pub fn new(source: SettingSource, convention: Convention) -> Result<Zigzag> {
        let singlet = make_singlet();
        let lambda1 = reduce_first(&singlet)?;
        Ok(Zigzag {
            singlet,
            lambda1,
            source,
            convention,
        })
    }
}

impl TrialModel for Zigzag {
    fn model_id(&self) -> &str {
        "zigzag"
    }

    fn causal_structure(&self) -> CausalStructure {
        CausalStructure::Zigzag
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::CausalStep1, Stage::SourceTemporal, Stage::CausalStep3]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let joint = self.source.joint_at(trial_index)?;
        let (x, y) = (
            joint.a.angle_value().expect("angle setting").radians(),
            joint.b.angle_value().expect("angle setting").radians(),
        );
        let ua = derive_trial_randomness(seed, trial_index, "alice-born").next_unit();
        let alice = born_sample(&self.lambda1, x, ua)?;
        let lambda2 = partner_state(&self.singlet, x, alice.outcome)?;
        let ub = derive_trial_randomness(seed, trial_index, "bob-born").next_unit();
        let bob = born_sample(&lambda2, y, ub)?;

        let l1 = LocalQuantum::Mixed(self.lambda1);
        let both = OnticState::Quantum(vec![l1, LocalQuantum::Pure(lambda2)]);
        Ok(TrialRecord::new(trial_index, "zigzag")
            .with_settings(joint)
            .with_outcomes(alice.outcome, self.convention.apply_b(bob.outcome))
            .with_snapshot(Stage::CausalStep1, OnticState::Quantum(vec![l1]))
            .with_snapshot(Stage::SourceTemporal, both.clone())
            .with_snapshot(Stage::CausalStep3, both)
            .with_flag(FLAG_POST_MEASUREMENT_ALICE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::AngleTable;

    #[test]
    fn partner_tokens_are_finite() {
        let t = AngleTable::chsh();
        let m = Zigzag::new(SettingSource::seeded_prng(2, t), Convention::Singlet).unwrap();
        let mut tokens = std::collections::BTreeSet::new();
        for i in 0..400 {
            let r = m.run_trial(i, 4).unwrap();
            assert_eq!(r.snapshot(Stage::CausalStep1).unwrap().canonical_encoding(), "Q:mixed");
            tokens.insert(r.snapshot(Stage::SourceTemporal).unwrap().canonical_encoding());
        }
        // Two Alice angles × two outcomes.
        let expected: std::collections::BTreeSet<String> =
            ["Q:mixed|Q:basis0:eig-", "Q:mixed|Q:basis0:eig+", "Q:mixed|Q:basis45:eig-", "Q:mixed|Q:basis45:eig+"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        assert_eq!(tokens, expected);
    }
}

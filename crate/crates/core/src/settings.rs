//! Setting sources and per-trial randomness streams.
//!
//! Everything random in a run is a pure function of the master seed and a
//! trial index, so trials can be generated in any order or in parallel.
//!
//! Mixing function (SplitMix64 finalizer, bit-exact):
//!
//! ```text
//! mix64(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!            z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!            return z ^ (z >> 31)                 (wrapping u64 arithmetic)
//! ```

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::ontic::{AngleTable, JointSetting, Wing};

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Top 53 bits of a word as a uniform double in `[0, 1)`.
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` by multiply-shift; exact for powers of two.
pub fn index_from_word(word: u64, n: usize) -> usize {
    ((word as u128 * n as u128) >> 64) as usize
}

fn fnv1a64(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// A SplitMix64 sequence of uniform doubles.
#[derive(Debug, Clone)]
pub struct TrialStream {
    state: u64,
}

impl TrialStream {
    pub fn next_word(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    pub fn next_unit(&mut self) -> f64 {
        unit_f64(self.next_word())
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_unit() < p
    }

    /// Index drawn from a discrete distribution by inverse CDF.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let u = self.next_unit() * weights.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

impl Iterator for TrialStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_unit())
    }
}

/// Deterministic randomness for one purpose of one trial.
///
/// `state₀ = mix64(mix64(mix64(seed + γ) ^ fnv1a64(stream)) ^ (trial_index · γ))`,
/// then SplitMix64 steps from `state₀`.
pub fn derive_trial_randomness(seed: u64, trial_index: u64, stream: &str) -> TrialStream {
    let s = mix64(seed.wrapping_add(GOLDEN_GAMMA));
    let s = mix64(s ^ fnv1a64(stream));
    TrialStream {
        state: mix64(s ^ trial_index.wrapping_mul(GOLDEN_GAMMA)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// ChaCha8 keyed by the seed; joint draw `c` reads words `2c, 2c+1`.
    SeededPrng,
    /// Word `k` of joint draw `c` is `mix64(seed + γ·(2c + k + 1))`.
    DeterministicCounter,
    /// Pre-recorded joint settings, consumed in order.
    Replay(Arc<Vec<JointSetting>>),
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::SeededPrng => "seeded-prng",
            SourceKind::DeterministicCounter => "deterministic-counter",
            SourceKind::Replay(_) => "replay",
        }
    }
}

/// A value-semantic source of joint settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingSource {
    pub kind: SourceKind,
    pub seed: u64,
    pub counter: u64,
    pub angle_table: AngleTable,
}

impl SettingSource {
    pub fn seeded_prng(seed: u64, angle_table: AngleTable) -> SettingSource {
        SettingSource {
            kind: SourceKind::SeededPrng,
            seed,
            counter: 0,
            angle_table,
        }
    }

    pub fn deterministic_counter(seed: u64, angle_table: AngleTable) -> SettingSource {
        SettingSource {
            kind: SourceKind::DeterministicCounter,
            seed,
            counter: 0,
            angle_table,
        }
    }

    pub fn replay(settings: Vec<JointSetting>, angle_table: AngleTable) -> SettingSource {
        SettingSource {
            kind: SourceKind::Replay(Arc::new(settings)),
            seed: 0,
            counter: 0,
            angle_table,
        }
    }

    /// Replay file: one joint token per line, `#` starts a comment.
    pub fn parse_replay(text: &str) -> Result<Vec<JointSetting>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            out.push(JointSetting::parse_token(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }

    pub fn with_counter(&self, counter: u64) -> SettingSource {
        SettingSource {
            counter,
            ..self.clone()
        }
    }

    /// The two raw words of joint draw `counter`.
    pub fn raw_words(&self, counter: u64) -> Result<[u64; 2]> {
        match &self.kind {
            SourceKind::SeededPrng => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_word_pos(counter as u128 * 4);
                Ok([rng.next_u64(), rng.next_u64()])
            }
            SourceKind::DeterministicCounter => {
                let base = counter.wrapping_mul(2);
                Ok([
                    mix64(self.seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(base.wrapping_add(1)))),
                    mix64(self.seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(base.wrapping_add(2)))),
                ])
            }
            SourceKind::Replay(_) => Err(Error::InvalidParameter("replay sources have no raw words".into())),
        }
    }

    /// Table indices `(i_A, i_B)` of joint draw `counter`.
    pub fn indices_at(&self, counter: u64) -> Result<(usize, usize)> {
        match &self.kind {
            SourceKind::Replay(list) => {
                let j = list.get(counter as usize).ok_or(Error::EntropyExhausted {
                    available: list.len(),
                    requested: counter,
                })?;
                let find = |wing, s: crate::ontic::Setting| {
                    s.resolve(&self.angle_table)
                        .ok()
                        .and_then(|s| s.angle_value())
                        .and_then(|a| self.angle_table.index_of(wing, &a, 1e-9))
                        .ok_or_else(|| {
                            Error::InvalidParameter(format!("replayed setting {} not in the angle table", s.token()))
                        })
                };
                Ok((find(Wing::A, j.a)?, find(Wing::B, j.b)?))
            }
            _ => {
                let [w0, w1] = self.raw_words(counter)?;
                Ok((
                    index_from_word(w0, self.angle_table.a.len()),
                    index_from_word(w1, self.angle_table.b.len()),
                ))
            }
        }
    }

    /// Joint draw `counter`, independent of the source's own counter.
    pub fn joint_at(&self, counter: u64) -> Result<JointSetting> {
        match &self.kind {
            SourceKind::Replay(list) => {
                let j = list.get(counter as usize).ok_or(Error::EntropyExhausted {
                    available: list.len(),
                    requested: counter,
                })?;
                Ok(JointSetting {
                    a: j.a.resolve(&self.angle_table)?,
                    b: j.b.resolve(&self.angle_table)?,
                })
            }
            _ => {
                let (ia, ib) = self.indices_at(counter)?;
                self.angle_table.joint(ia, ib)
            }
        }
    }

    /// Draws one joint setting and returns the advanced source.
    pub fn next_joint_setting(&self) -> Result<(JointSetting, SettingSource)> {
        let joint = self.joint_at(self.counter)?;
        Ok((joint, self.with_counter(self.counter + 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::chi_square_gof;

    #[test]
    fn mix64_reference_values() {
        // First outputs of SplitMix64 seeded with 0.
        let mut s = TrialStream { state: 0 };
        assert_eq!(s.next_word(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(s.next_word(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn counter_source_is_reproducible() {
        let src = SettingSource::deterministic_counter(1, AngleTable::chsh());
        let (j1, next1) = src.next_joint_setting().unwrap();
        let (j2, next2) = src.next_joint_setting().unwrap();
        assert_eq!(j1, j2);
        assert_eq!(next1.counter, 1);
        assert_eq!(next1, next2);
        assert_eq!(src.joint_at(5).unwrap(), src.with_counter(5).next_joint_setting().unwrap().0);
    }

    #[test]
    fn replay_then_exhausted() {
        let list = SettingSource::parse_replay("# comment\nA0×B22.5\n\n").unwrap();
        let src = SettingSource::replay(list, AngleTable::chsh());
        let (j, next) = src.next_joint_setting().unwrap();
        assert_eq!(j.token(), "A0×B22.5");
        assert!(matches!(next.next_joint_setting(), Err(Error::EntropyExhausted { .. })));
        assert_eq!(src.indices_at(0).unwrap(), (0, 0));
    }

    #[test]
    fn replay_parse_error_names_line() {
        match SettingSource::parse_replay("A0×B22.5\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    fn joint_counts(src: &SettingSource, n: u64) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for c in 0..n {
            let (ia, ib) = src.indices_at(c).unwrap();
            counts[2 * ia + ib] += 1;
        }
        counts
    }

    #[test]
    fn prng_joint_settings_are_uniform() {
        for src in [
            SettingSource::seeded_prng(7, AngleTable::chsh()),
            SettingSource::deterministic_counter(7, AngleTable::chsh()),
        ] {
            let counts = joint_counts(&src, 100_000);
            for &c in &counts {
                assert!((c as f64 / 1e5 - 0.25).abs() < 0.01, "{counts:?}");
            }
            let (_, p) = chi_square_gof(&counts, &[0.25; 4]);
            assert!(p > 1e-3, "{counts:?} p={p}");
        }
    }

    #[test]
    fn trial_streams() {
        let a: Vec<f64> = derive_trial_randomness(9, 4, "alice-born").take(8).collect();
        let b: Vec<f64> = derive_trial_randomness(9, 4, "alice-born").take(8).collect();
        let c: Vec<f64> = derive_trial_randomness(9, 4, "bob-born").take(8).collect();
        let d: Vec<f64> = derive_trial_randomness(9, 5, "alice-born").take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        let n = 1_000_000u64;
        let mean: f64 = (0..n).map(|i| derive_trial_randomness(3, i, "u").next_unit()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
        let mut s = derive_trial_randomness(3, 0, "seq");
        let mean: f64 = (0..n).map(|_| s.next_unit()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut s = derive_trial_randomness(1, 1, "cat");
        for _ in 0..1000 {
            let i = s.categorical(&[0.0, 0.5, 0.0, 0.5]);
            assert!(i == 1 || i == 3);
        }
    }
}

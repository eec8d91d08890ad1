use serde::Serialize;

use super::{CausalStructure, TrialModel};
use crate::analysis::Distribution;
use crate::error::{Error, Result};
use crate::ontic::{OnticState, Stage};
use crate::settings::derive_trial_randomness;
use crate::trial::TrialRecord;

pub const MAX_SWEEP_ROWS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GaltonMode {
    /// One ball from the given initial condition (bit `i` = bounce right at row `i`).
    Single(Vec<bool>),
    /// Every initial condition once.
    SweepExhaustive,
    /// Uniformly drawn initial conditions.
    SweepSampled { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaltonResult {
    Box(u32),
    /// Counts per box `0..=rows`.
    Distribution(Vec<u64>),
}

fn check_rows(rows: u32) -> Result<()> {
    if rows == 0 || rows > 64 {
        return Err(Error::InvalidParameter(format!("galton rows must be in 1..=64, got {rows}")));
    }
    Ok(())
}

/// Parses an initial condition written as `0`/`1` characters.
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::InvalidParameter(format!("initial condition {text:?} must be 0/1 characters"))),
        })
        .collect()
}

fn random_ic(rows: u32, seed: u64, index: u64) -> u64 {
    let mut rng = derive_trial_randomness(seed, index, "galton-ic");
    let w = rng.next_word();
    if rows == 64 {
        w
    } else {
        w & ((1u64 << rows) - 1)
    }
}

pub fn run_galton(rows: u32, mode: &GaltonMode) -> Result<GaltonResult> {
    check_rows(rows)?;
    match mode {
        GaltonMode::Single(bits) => {
            if bits.len() != rows as usize {
                return Err(Error::InvalidParameter(format!(
                    "initial condition has {} bits for {rows} rows",
                    bits.len()
                )));
            }
            Ok(GaltonResult::Box(bits.iter().filter(|&&b| b).count() as u32))
        }
        GaltonMode::SweepExhaustive => {
            if rows > MAX_SWEEP_ROWS {
                return Err(Error::InvalidParameter(format!(
                    "exhaustive sweep supports at most {MAX_SWEEP_ROWS} rows"
                )));
            }
            let mut counts = vec![0u64; rows as usize + 1];
            for ic in 0u64..(1 << rows) {
                counts[ic.count_ones() as usize] += 1;
            }
            Ok(GaltonResult::Distribution(counts))
        }
        GaltonMode::SweepSampled { samples, seed } => {
            let mut counts = vec![0u64; rows as usize + 1];
            for i in 0..*samples {
                counts[random_ic(rows, *seed, i).count_ones() as usize] += 1;
            }
            Ok(GaltonResult::Distribution(counts))
        }
    }
}

pub fn box_token(b: u32) -> String {
    format!("box{b}")
}

/// Binomial(rows, ½) over box tokens, the typicality measure's prediction.
pub fn box_theory(rows: u32) -> Result<Distribution> {
    check_rows(rows)?;
    let total = 0.5f64.powi(rows as i32);
    let mut c = 1.0f64;
    let mut pairs = Vec::new();
    for k in 0..=rows {
        pairs.push((box_token(k), c * total));
        c = c * (rows - k) as f64 / (k + 1) as f64;
    }
    Distribution::from_pairs(pairs)
}

/// One ball per trial with a uniformly drawn initial condition.
/// Preparation holds the initial condition, post-measurement the box.
#[derive(Debug, Clone)]
pub struct GaltonBoard {
    rows: u32,
}

impl GaltonBoard {
    pub fn new(rows: u32) -> Result<GaltonBoard> {
        check_rows(rows)?;
        Ok(GaltonBoard { rows })
    }
}

impl TrialModel for GaltonBoard {
    fn model_id(&self) -> &str {
        "galton"
    }

    fn causal_structure(&self) -> CausalStructure {
        CausalStructure::Galton
    }

    fn stages(&self) -> &'static [Stage] {
        &[Stage::Preparation, Stage::PostMeasurement]
    }

    fn run_trial(&self, trial_index: u64, seed: u64) -> Result<TrialRecord> {
        let ic = random_ic(self.rows, seed, trial_index);
        let bits: String = (0..self.rows).map(|i| if (ic >> i) & 1 == 1 { '1' } else { '0' }).collect();
        Ok(TrialRecord::new(trial_index, "galton")
            .with_snapshot(Stage::Preparation, OnticState::classical(format!("ic{bits}"))?)
            .with_snapshot(Stage::PostMeasurement, OnticState::classical(box_token(ic.count_ones()))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_paths() {
        assert_eq!(run_galton(10, &GaltonMode::Single(vec![false; 10])).unwrap(), GaltonResult::Box(0));
        assert_eq!(run_galton(4, &GaltonMode::Single(parse_bits("1011").unwrap())).unwrap(), GaltonResult::Box(3));
        assert!(run_galton(4, &GaltonMode::Single(vec![true; 3])).is_err());
    }

    #[test]
    fn theory_sums_to_one() {
        let d = box_theory(12).unwrap();
        assert!((d.prob("box6") - 924.0 / 4096.0).abs() < 1e-15);
    }
}

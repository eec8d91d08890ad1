//! Bell statistics over a 2×2 angle table.
//!
//! The CHSH combination used throughout is
//! `S = E(a₀,b₀) − E(a₀,b₁) + E(a₁,b₀) + E(a₁,b₁)`, which reaches `|S| = 2√2`
//! on the singlet at `a = (0, π/4)`, `b = (π/8, 3π/8)`.

use serde::Serialize;

use super::si::chi_square_gof;
use crate::error::{Error, Result};
use crate::ontic::{AngleTable, Outcome, Wing};
use crate::quantum::{outcome_index, singlet_joint_probabilities, Convention};
use crate::trial::TrialRecord;

/// Sign of each correlator in the CHSH sum, indexed `[i_A][i_B]`.
pub const CHSH_SIGNS: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];

/// Tolerance for matching logged setting angles to table entries.
const TABLE_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlator {
    pub setting: (usize, usize),
    pub label: &'static str,
    pub e: f64,
    pub se: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshEstimate {
    pub correlators: Vec<Correlator>,
    pub s: f64,
    pub s_se: f64,
}

impl ChshEstimate {
    pub fn correlator(&self, ia: usize, ib: usize) -> &Correlator {
        &self.correlators[2 * ia + ib]
    }
}

/// Joint outcome counts per table cell: `counts[i_A][i_B][2·a + b]` with
/// outcome index 0 for `+1`.
pub type OutcomeCounts = [[[u64; 4]; 2]; 2];

/// Table indices of a trial's settings, if it has resolved angle settings
/// and both outcomes.
fn cell_of(t: &TrialRecord, table: &AngleTable) -> Result<Option<(usize, usize, Outcome, Outcome)>> {
    let (Some(js), Some(a), Some(b)) = (t.joint_setting(), t.outcome_a, t.outcome_b) else {
        return Ok(None);
    };
    let find = |wing: Wing, s: crate::ontic::Setting| -> Result<usize> {
        let s = s.resolve(table)?;
        let angle = s.angle_value().expect("resolved setting has an angle");
        table.index_of(wing, &angle, TABLE_MATCH_TOLERANCE).ok_or_else(|| {
            Error::InvalidParameter(format!("trial {}: setting {} is not in the angle table", t.trial_index, s.token()))
        })
    };
    Ok(Some((find(Wing::A, js.a)?, find(Wing::B, js.b)?, a, b)))
}

pub fn outcome_counts(trials: &[TrialRecord], table: &AngleTable) -> Result<OutcomeCounts> {
    if !table.is_two_by_two() {
        return Err(Error::InvalidParameter("Bell statistics need a 2×2 angle table".into()));
    }
    let mut counts: OutcomeCounts = [[[0; 4]; 2]; 2];
    for t in trials {
        if let Some((ia, ib, a, b)) = cell_of(t, table)? {
            counts[ia][ib][2 * outcome_index(a) + outcome_index(b)] += 1;
        }
    }
    Ok(counts)
}

const CELL_LABELS: [[&str; 2]; 2] = [["a0b0", "a0b1"], ["a1b0", "a1b1"]];

/// Empirical CHSH estimate. Every cell must hold at least `min_per_cell` trials.
pub fn chsh(trials: &[TrialRecord], table: &AngleTable, min_per_cell: u64) -> Result<ChshEstimate> {
    let counts = outcome_counts(trials, table)?;
    chsh_from_counts(&counts, min_per_cell.max(1))
}

pub fn chsh_from_counts(counts: &OutcomeCounts, min_per_cell: u64) -> Result<ChshEstimate> {
    let mut correlators = Vec::with_capacity(4);
    let (mut s, mut var) = (0.0, 0.0);
    for ia in 0..2 {
        for ib in 0..2 {
            let c = counts[ia][ib];
            let n: u64 = c.iter().sum();
            if n < min_per_cell {
                return Err(Error::MissingSettingCell(format!(
                    "{} has {n} trials, need {min_per_cell}",
                    CELL_LABELS[ia][ib]
                )));
            }
            let same = (c[0] + c[3]) as f64;
            let nf = n as f64;
            let e = (2.0 * same - nf) / nf;
            // Products are ±1, so the sample variance is n(1 − E²)/(n − 1).
            let se = if n > 1 {
                ((nf * (1.0 - e * e) / (nf - 1.0)).max(0.0) / nf).sqrt()
            } else {
                0.0
            };
            s += CHSH_SIGNS[ia][ib] * e;
            var += se * se;
            correlators.push(Correlator {
                setting: (ia, ib),
                label: CELL_LABELS[ia][ib],
                e,
                se,
                n,
            });
        }
    }
    Ok(ChshEstimate {
        correlators,
        s,
        s_se: var.sqrt(),
    })
}

/// Exact joint probabilities per cell, `[i_A][i_B][a][b]`.
pub type JointTable = [[[[f64; 2]; 2]; 2]; 2];

/// CHSH S of an exactly specified distribution (no sampling).
pub fn chsh_exact(joint: &JointTable) -> f64 {
    let mut s = 0.0;
    for ia in 0..2 {
        for ib in 0..2 {
            let p = joint[ia][ib];
            let e = p[0][0] - p[0][1] - p[1][0] + p[1][1];
            s += CHSH_SIGNS[ia][ib] * e;
        }
    }
    s
}

/// Singlet joint probabilities over a 2×2 table.
pub fn quantum_joint_table(table: &AngleTable, convention: Convention) -> Result<JointTable> {
    if !table.is_two_by_two() {
        return Err(Error::InvalidParameter("quantum joint table needs a 2×2 angle table".into()));
    }
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for (ia, row) in out.iter_mut().enumerate() {
        for (ib, cell) in row.iter_mut().enumerate() {
            *cell = singlet_joint_probabilities(table.a[ia].radians(), table.b[ib].radians(), convention);
        }
    }
    Ok(out)
}

/// Per-cell chi-square p-values of the empirical joint outcomes against
/// `joint`, indexed like the table.
pub fn joint_fit_p_values(counts: &OutcomeCounts, joint: &JointTable) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for ia in 0..2 {
        for ib in 0..2 {
            let p = joint[ia][ib];
            let probs = [p[0][0], p[0][1], p[1][0], p[1][1]];
            out[ia][ib] = chi_square_gof(&counts[ia][ib], &probs).1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::Angle;

    #[test]
    fn quantum_s_is_two_root_two() {
        let j = quantum_joint_table(&AngleTable::chsh(), Convention::Singlet).unwrap();
        assert!((chsh_exact(&j) + 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let j = quantum_joint_table(&AngleTable::chsh(), Convention::CorrelatedPairs).unwrap();
        assert!((chsh_exact(&j) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_table_obeys_two() {
        let z = Angle::from_radians(0.0).unwrap();
        let table = AngleTable::new(vec![z, z], vec![z, z]).unwrap();
        let j = quantum_joint_table(&table, Convention::Singlet).unwrap();
        let s = chsh_exact(&j);
        assert!((s + 2.0).abs() < 1e-12);
        assert!(s.abs() <= 2.0 + 1e-12);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let mut counts: OutcomeCounts = [[[10; 4]; 2]; 2];
        counts[1][1] = [0; 4];
        assert!(matches!(chsh_from_counts(&counts, 1), Err(Error::MissingSettingCell(_))));
    }

    #[test]
    fn correlator_standard_error() {
        let mut counts: OutcomeCounts = [[[0; 4]; 2]; 2];
        for ia in 0..2 {
            for ib in 0..2 {
                counts[ia][ib] = [30, 20, 20, 30];
            }
        }
        let est = chsh_from_counts(&counts, 1).unwrap();
        let c = est.correlator(0, 0);
        assert!((c.e - 0.2).abs() < 1e-12);
        // Oracle: sample std of 60 (+1)s and 40 (−1)s over √100.
        let mean = 0.2;
        let var = (60.0 * (1.0f64 - mean).powi(2) + 40.0 * (-1.0f64 - mean).powi(2)) / 99.0;
        assert!((c.se - (var / 100.0).sqrt()).abs() < 1e-12);
        assert!((est.s - 0.4).abs() < 1e-12);
    }
}

//! Statistical-independence tests.
//!
//! Sense 1 compares each labeled sub-ensemble ρ(λ|Z) with the pooled
//! ensemble ρ(λ). Sense 2 compares the ensemble (and optionally each
//! sub-ensemble) with a theory's declared generating distribution.
//!
//! A row violates SI when its chi-square p-value is below `alpha`, its TV
//! distance exceeds `tau` and it holds at least `n_min` trials.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::distribution::{tv_distance, Distribution, FrequencyDistribution};
use crate::error::{Error, Result};
use crate::ontic::Stage;
use crate::trial::{label_by_setting, LabelScheme, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Policy {
    pub alpha: f64,
    pub tau: f64,
    pub n_min: u64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            alpha: 1e-3,
            tau: 0.01,
            n_min: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Obeyed,
    Violated,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Obeyed => "OBEYED",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    EnsembleRelative,
    TheoryRelative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRow {
    pub label: String,
    pub n: u64,
    pub tv: f64,
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    pub distribution: FrequencyDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiReport {
    pub stage: Stage,
    pub label_scheme: Option<LabelScheme>,
    pub sense: Sense,
    pub ensemble_distribution: FrequencyDistribution,
    pub per_label: Vec<LabelRow>,
    pub verdict: Verdict,
    pub policy: Policy,
    pub notes: Vec<String>,
}

impl SiReport {
    pub fn max_tv(&self) -> f64 {
        self.per_label.iter().map(|r| r.tv).fold(0.0, f64::max)
    }

    pub fn row(&self, label: &str) -> Option<&LabelRow> {
        self.per_label.iter().find(|r| r.label == label)
    }
}

/// Pearson goodness of fit of `observed` against `probs`. Cells with
/// expected count below 5 are pooled into one cell (folded into the smallest
/// remaining cell if still below 5). Returns `(statistic, p-value)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    let (stat, df) = chi_square_stat(observed, probs);
    (stat, chi_square_p(stat, df))
}

fn chi_square_p(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if stat.is_infinite() {
        return 0.0;
    }
    ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
}

fn chi_square_stat(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut small_obs, mut small_exp, mut any_small) = (0.0, 0.0, false);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n * p;
        if e == 0.0 {
            if o > 0 {
                return (f64::INFINITY, observed.len().saturating_sub(1).max(1));
            }
            continue;
        }
        if e < 5.0 {
            small_obs += o as f64;
            small_exp += e;
            any_small = true;
        } else {
            cells.push((o as f64, e));
        }
    }
    if any_small {
        if small_exp < 5.0 && !cells.is_empty() {
            let idx = (0..cells.len())
                .min_by(|&i, &j| cells[i].1.total_cmp(&cells[j].1))
                .expect("nonempty");
            cells[idx].0 += small_obs;
            cells[idx].1 += small_exp;
        } else {
            cells.push((small_obs, small_exp));
        }
    }
    if cells.len() < 2 {
        return (0.0, 0);
    }
    let stat = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, cells.len() - 1)
}

fn row_against(label: String, sub: FrequencyDistribution, reference: &Distribution) -> Result<LabelRow> {
    let keys: Vec<&String> = reference.iter().map(|(k, _)| k).collect();
    let observed: Vec<u64> = keys.iter().map(|k| sub.count(k)).collect();
    let probs: Vec<f64> = keys.iter().map(|k| reference.prob(k)).collect();
    let outside: u64 = sub.total - observed.iter().sum::<u64>();
    let (chi_square, df, p_value) = if outside > 0 {
        (f64::INFINITY, keys.len().max(1), 0.0)
    } else {
        let (s, df) = chi_square_stat(&observed, &probs);
        (s, df, chi_square_p(s, df))
    };
    let tv = tv_distance(&sub.frequencies()?, reference);
    Ok(LabelRow {
        label,
        n: sub.total,
        tv,
        chi_square,
        df,
        p_value,
        distribution: sub,
    })
}

fn verdict_for(rows: &[LabelRow], policy: &Policy) -> Verdict {
    let violated = rows
        .iter()
        .any(|r| r.n >= policy.n_min && r.p_value < policy.alpha && r.tv > policy.tau);
    if violated {
        Verdict::Violated
    } else if rows.iter().any(|r| r.n < policy.n_min) {
        Verdict::Inconclusive
    } else {
        Verdict::Obeyed
    }
}

fn token_at(t: &TrialRecord, stage: Stage) -> Result<String> {
    t.snapshot(stage)
        .map(|s| s.canonical_encoding())
        .ok_or(Error::MissingSnapshot {
            trial_index: t.trial_index,
            stage,
        })
}

fn group_by_label(
    trials: &[TrialRecord],
    stage: Stage,
    scheme: LabelScheme,
) -> Result<BTreeMap<String, FrequencyDistribution>> {
    let mut groups: BTreeMap<String, FrequencyDistribution> = BTreeMap::new();
    for t in trials {
        let z = label_by_setting(t, scheme)?;
        groups.entry(z).or_default().add(token_at(t, stage)?, 1);
    }
    Ok(groups)
}

/// Sense-1 test: is each ρ(λ|Z) representative of the pooled ρ(λ)?
pub fn si_test(trials: &[TrialRecord], stage: Stage, scheme: LabelScheme, policy: Policy) -> Result<SiReport> {
    if trials.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let groups = group_by_label(trials, stage, scheme)?;
    if groups.len() < 2 {
        return Err(Error::SingleLabel { found: groups.len() });
    }
    let pooled = groups
        .values()
        .cloned()
        .fold(FrequencyDistribution::default(), FrequencyDistribution::merge);
    let reference = pooled.frequencies()?;
    let mut notes = Vec::new();
    let (per_label, verdict) = if pooled.counts.len() == 1 {
        notes.push("single-token ensemble: every sub-ensemble equals the ensemble".to_string());
        let rows = groups
            .into_iter()
            .map(|(label, sub)| LabelRow {
                label,
                n: sub.total,
                tv: 0.0,
                chi_square: 0.0,
                df: 0,
                p_value: 1.0,
                distribution: sub,
            })
            .collect();
        (rows, Verdict::Obeyed)
    } else {
        let rows = groups
            .into_iter()
            .map(|(label, sub)| row_against(label, sub, &reference))
            .collect::<Result<Vec<_>>>()?;
        let v = verdict_for(&rows, &policy);
        (rows, v)
    };
    Ok(SiReport {
        stage,
        label_scheme: Some(scheme),
        sense: Sense::EnsembleRelative,
        ensemble_distribution: pooled,
        per_label,
        verdict,
        policy,
        notes,
    })
}

/// Label of the whole-ensemble row in sense-2 reports.
pub const ENSEMBLE_ROW: &str = "*";

/// Sense-2 test: is the ensemble representative of the theory's generating
/// distribution? With a label scheme, each sub-ensemble is tested too.
pub fn si_test_theory(
    trials: &[TrialRecord],
    stage: Stage,
    theory: &Distribution,
    scheme: Option<LabelScheme>,
    policy: Policy,
) -> Result<SiReport> {
    if trials.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut whole = FrequencyDistribution::default();
    for t in trials {
        whole.add(token_at(t, stage)?, 1);
    }
    let mut notes = Vec::new();
    let outside: Vec<&String> = whole.counts.keys().filter(|k| theory.prob(k) == 0.0).collect();
    if !outside.is_empty() {
        notes.push(format!(
            "tokens outside the theory support: {}",
            outside.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
    }
    let mut rows = vec![row_against(ENSEMBLE_ROW.to_string(), whole.clone(), theory)?];
    if let Some(scheme) = scheme {
        for (label, sub) in group_by_label(trials, stage, scheme)? {
            rows.push(row_against(label, sub, theory)?);
        }
    }
    let verdict = if outside.is_empty() {
        verdict_for(&rows, &policy)
    } else {
        Verdict::Violated
    };
    Ok(SiReport {
        stage,
        label_scheme: scheme,
        sense: Sense::TheoryRelative,
        ensemble_distribution: whole,
        per_label: rows,
        verdict,
        policy,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::{AngleTable, OnticState, Wing};

    #[test]
    fn chi_square_reference_value() {
        // Same fixture as a published x² implementation: 2.41791…, p = 0.49031…
        let (x2, p) = chi_square_gof(&[28, 31, 40, 35], &[0.25; 4]);
        assert!((x2 - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((p - 0.490_309_306_965_388_3).abs() < 1e-9);
    }

    #[test]
    fn small_cells_are_pooled() {
        let (_, df) = chi_square_stat(&[50, 48, 1, 1], &[0.49, 0.49, 0.01, 0.01]);
        assert_eq!(df, 1);
        let (_, df) = chi_square_stat(&[100], &[1.0]);
        assert_eq!(df, 0);
    }

    fn trial(i: u64, ia: usize, tok: &str) -> TrialRecord {
        TrialRecord::new(i, "m")
            .with_settings(AngleTable::chsh().joint(ia, 0).unwrap())
            .with_snapshot(Stage::Preparation, OnticState::classical(tok).unwrap())
    }

    #[test]
    fn single_label_is_an_error() {
        let trials: Vec<_> = (0..10).map(|i| trial(i, 0, "x")).collect();
        assert!(matches!(
            si_test(&trials, Stage::Preparation, LabelScheme::Wing(Wing::A), Policy::default()),
            Err(Error::SingleLabel { found: 1 })
        ));
    }

    #[test]
    fn perfectly_correlated_labels_violate() {
        let trials: Vec<_> = (0..4000).map(|i| trial(i, (i % 2) as usize, if i % 2 == 0 { "x" } else { "y" })).collect();
        let r = si_test(&trials, Stage::Preparation, LabelScheme::Wing(Wing::A), Policy::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!((r.max_tv() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn small_sub_ensembles_are_inconclusive() {
        let trials: Vec<_> = (0..100).map(|i| trial(i, (i % 2) as usize, if i % 3 == 0 { "x" } else { "y" })).collect();
        let r = si_test(&trials, Stage::Preparation, LabelScheme::Wing(Wing::A), Policy::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn theory_support_violation() {
        let trials: Vec<_> = (0..10).map(|i| trial(i, 0, "z")).collect();
        let theory = Distribution::from_pairs([("x", 0.5), ("y", 0.5)]).unwrap();
        let r = si_test_theory(&trials, Stage::Preparation, &theory, None, Policy::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(r.notes.len(), 1);
    }
}

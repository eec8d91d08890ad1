use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ontic::Stage;
use crate::trial::TrialRecord;

/// Counts of canonical ontic tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FrequencyDistribution {
    pub total: u64,
    pub counts: BTreeMap<String, u64>,
}

impl FrequencyDistribution {
    pub fn from_tokens<I, S>(tokens: I) -> FrequencyDistribution
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut d = FrequencyDistribution::default();
        for t in tokens {
            d.add(t.into(), 1);
        }
        d
    }

    pub fn add(&mut self, token: String, count: u64) {
        *self.counts.entry(token).or_insert(0) += count;
        self.total += count;
    }

    /// Associative, commutative merge of partial tables.
    pub fn merge(mut self, other: FrequencyDistribution) -> FrequencyDistribution {
        for (k, v) in other.counts {
            self.add(k, v);
        }
        self
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn frequency(&self, token: &str) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(token) as f64 / self.total as f64
        }
    }

    pub fn frequencies(&self) -> Result<Distribution> {
        if self.total == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let n = self.total as f64;
        Ok(Distribution {
            probs: self.counts.iter().map(|(k, &v)| (k.clone(), v as f64 / n)).collect(),
        })
    }
}

/// A normalized distribution over tokens: an ensemble's ρ or a theory's
/// generating distribution.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Distribution {
    probs: BTreeMap<String, f64>,
}

impl Distribution {
    /// Validates non-negativity and unit mass (within 1e−9).
    pub fn new(probs: BTreeMap<String, f64>) -> Result<Distribution> {
        if probs.values().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("distribution has a negative or non-finite entry".into()));
        }
        let mass: f64 = probs.values().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("distribution mass {mass} is not 1")));
        }
        Ok(Distribution { probs })
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Distribution>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut probs = BTreeMap::new();
        for (k, p) in pairs {
            *probs.entry(k.into()).or_insert(0.0) += p;
        }
        Distribution::new(probs)
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.probs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &String> {
        self.probs.iter().filter(|(_, &p)| p > 0.0).map(|(k, _)| k)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `½ Σ |p − q|` over the union of keys.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> f64 {
    let mut sum = 0.0;
    for (k, &pk) in &p.probs {
        sum += (pk - q.prob(k)).abs();
    }
    for (k, &qk) in &q.probs {
        if !p.probs.contains_key(k) {
            sum += qk;
        }
    }
    (0.5 * sum).clamp(0.0, 1.0)
}

/// Token counts at `stage` over the trials selected by `filter`.
pub fn build_distribution<F>(trials: &[TrialRecord], stage: Stage, filter: F) -> Result<FrequencyDistribution>
where
    F: Fn(&TrialRecord) -> bool,
{
    let mut d = FrequencyDistribution::default();
    for t in trials.iter().filter(|t| filter(t)) {
        let state = t.snapshot(stage).ok_or(Error::MissingSnapshot {
            trial_index: t.trial_index,
            stage,
        })?;
        d.add(state.canonical_encoding(), 1);
    }
    if d.total == 0 {
        return Err(Error::EmptyEnsemble);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontic::OnticState;

    #[test]
    fn build_distribution_cases() {
        let trials: Vec<TrialRecord> = ["t1", "t1", "t2", "t2"]
            .iter()
            .enumerate()
            .map(|(i, tok)| {
                TrialRecord::new(i as u64, "m").with_snapshot(Stage::Preparation, OnticState::classical(*tok).unwrap())
            })
            .collect();
        let d = build_distribution(&trials, Stage::Preparation, |_| true).unwrap();
        let f = d.frequencies().unwrap();
        assert_eq!(f.prob("t1"), 0.5);
        assert_eq!(f.prob("t2"), 0.5);
        assert!(matches!(
            build_distribution(&trials, Stage::Preparation, |_| false),
            Err(Error::EmptyEnsemble)
        ));
        assert!(matches!(
            build_distribution(&trials, Stage::PostMeasurement, |_| true),
            Err(Error::MissingSnapshot { trial_index: 0, .. })
        ));
    }

    #[test]
    fn tv_cases() {
        let p = Distribution::from_pairs([("h", 1.0)]).unwrap();
        let q = Distribution::from_pairs([("h", 0.5), ("t", 0.5)]).unwrap();
        let r = Distribution::from_pairs([("x", 1.0)]).unwrap();
        assert_eq!(tv_distance(&q, &q), 0.0);
        assert_eq!(tv_distance(&p, &r), 1.0);
        assert_eq!(tv_distance(&p, &q), 0.5);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::from_pairs([("a", 0.6), ("b", 0.6)]).is_err());
        assert!(Distribution::from_pairs([("a", -0.1), ("b", 1.1)]).is_err());
    }

    #[test]
    fn merge_is_order_independent() {
        let a = FrequencyDistribution::from_tokens(["x", "y", "x"]);
        let b = FrequencyDistribution::from_tokens(["y", "z"]);
        assert_eq!(a.clone().merge(b.clone()), b.merge(a));
    }
}

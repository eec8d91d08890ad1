use std::collections::BTreeMap;

use proptest::prelude::*;

use si_bell::analysis::{si_test, tv_distance, Distribution, FrequencyDistribution, Policy};
use si_bell::models::{generate, Goblin, GoblinVariant, LocalHv, Zigzag};
use si_bell::ontic::{Angle, AngleTable, Observable, OnticState, Outcome, Setting, Stage, Wing};
use si_bell::quantum::Convention;
use si_bell::settings::SettingSource;
use si_bell::trial::{Ensemble, LabelScheme, TrialRecord};

fn dist_strategy() -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, 1..6).prop_map(|w| {
        let total: f64 = w.iter().sum();
        Distribution::from_pairs(w.iter().enumerate().map(|(i, x)| (format!("s{i}"), x / total))).unwrap()
    })
}

fn assignment_strategy() -> impl Strategy<Value = OnticState> {
    prop::collection::btree_map((any::<bool>(), 0i64..8), any::<bool>(), 1..6).prop_map(|m| {
        OnticState::assignment(m.into_iter().map(|((wa, k), plus)| {
            let obs = Observable {
                wing: if wa { Wing::A } else { Wing::B },
                angle: Angle::from_pi_fraction(k, 8).unwrap(),
            };
            (obs, if plus { Outcome::Plus } else { Outcome::Minus })
        }))
    })
}

fn zigzag_ensemble(seed: u64, n: u64) -> Ensemble {
    let t = AngleTable::chsh();
    let m = Zigzag::new(SettingSource::seeded_prng(seed, t), Convention::Singlet).unwrap();
    generate(&m, n, seed, "digest").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tv_is_a_metric(p in dist_strategy(), q in dist_strategy(), r in dist_strategy()) {
        prop_assert!(tv_distance(&p, &p).abs() < 1e-12);
        prop_assert!((tv_distance(&p, &q) - tv_distance(&q, &p)).abs() < 1e-12);
        prop_assert!(tv_distance(&p, &r) <= tv_distance(&p, &q) + tv_distance(&q, &r) + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv_distance(&p, &q)));
    }

    #[test]
    fn assignment_encoding_round_trips(s in assignment_strategy()) {
        let token = s.canonical_encoding();
        let back = OnticState::parse_encoding(&token).unwrap();
        prop_assert_eq!(back.canonical_encoding(), token);
        prop_assert_eq!(back.definedness(), s.definedness());
    }

    #[test]
    fn encoding_is_injective(a in assignment_strategy(), b in assignment_strategy()) {
        let same_map = a.definedness() == b.definedness()
            && a.definedness().iter().all(|o| a.value_of(o) == b.value_of(o));
        prop_assert_eq!(same_map, a.canonical_encoding() == b.canonical_encoding());
    }

    #[test]
    fn frequency_merge_is_order_independent(
        xs in prop::collection::vec(0u8..5, 0..40),
        ys in prop::collection::vec(0u8..5, 0..40),
    ) {
        let d = |v: &[u8]| FrequencyDistribution::from_tokens(v.iter().map(|x| format!("t{x}")));
        prop_assert_eq!(d(&xs).merge(d(&ys)), d(&ys).merge(d(&xs)));
        let all: Vec<u8> = xs.iter().chain(&ys).copied().collect();
        prop_assert_eq!(d(&xs).merge(d(&ys)), d(&all));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn log_round_trips(seed in any::<u64>(), n in 1u64..60) {
        let e = zigzag_ensemble(seed, n);
        let text = e.to_log();
        let back = Ensemble::parse_log(&text).unwrap();
        prop_assert_eq!(back.to_log(), text);
        prop_assert_eq!(back.digest(), e.digest());
        prop_assert_eq!(back, e);
    }

    #[test]
    fn goblin_log_round_trips(seed in any::<u64>()) {
        let t = AngleTable::chsh();
        let pq = si_bell::analysis::quantum_joint_table(&t, Convention::Singlet).unwrap();
        let m = Goblin::new(GoblinVariant::Two, t.clone(), pq, SettingSource::seeded_prng(seed, t)).unwrap();
        let e = generate(&m, 30, seed, "").unwrap();
        prop_assert_eq!(Ensemble::parse_log(&e.to_log()).unwrap(), e);
    }

    #[test]
    fn si_verdict_ignores_trial_order(seed in any::<u64>(), rot in 0usize..2000) {
        let t = AngleTable::chsh();
        let m = LocalHv::new(t.clone(), SettingSource::seeded_prng(seed, t));
        let e = generate(&m, 2000, seed, "").unwrap();
        let mut shuffled = e.trials().to_vec();
        shuffled.rotate_left(rot);
        shuffled.reverse();
        let p = Policy::default();
        let a = si_test(e.trials(), Stage::Preparation, LabelScheme::Joint, p).unwrap();
        let b = si_test(&shuffled, Stage::Preparation, LabelScheme::Joint, p).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert!((a.max_tv() - b.max_tv()).abs() < 1e-12);
    }

    #[test]
    fn si_verdict_ignores_label_names(seed in any::<u64>()) {
        let e = zigzag_ensemble(seed, 3000);
        // Replace each angle setting by an opaque index; the partition is unchanged.
        let relabel = |s: Option<Setting>, w: Wing| s.map(|s| {
            let idx = AngleTable::chsh().index_of(w, &s.angle_value().unwrap(), 1e-9).unwrap();
            Setting::indexed(w, 1 - idx as u8)
        });
        let renamed: Vec<TrialRecord> = e.trials().iter().map(|t| {
            let mut t = t.clone();
            t.setting_a = relabel(t.setting_a, Wing::A);
            t.setting_b = relabel(t.setting_b, Wing::B);
            t
        }).collect();
        let p = Policy::default();
        for (stage, scheme) in [
            (Stage::SourceTemporal, LabelScheme::Wing(Wing::A)),
            (Stage::CausalStep1, LabelScheme::Joint),
        ] {
            let a = si_test(e.trials(), stage, scheme, p).unwrap();
            let b = si_test(&renamed, stage, scheme, p).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
            let tvs = |r: &si_bell::analysis::SiReport| {
                let mut v: Vec<u64> = r.per_label.iter().map(|x| (x.tv * 1e12).round() as u64).collect();
                v.sort();
                v
            };
            prop_assert_eq!(tvs(&a), tvs(&b));
        }
    }
}

#[test]
fn distribution_rejects_non_normalized() {
    let mut m = BTreeMap::new();
    m.insert("x".to_string(), 0.7);
    assert!(Distribution::new(m).is_err());
}

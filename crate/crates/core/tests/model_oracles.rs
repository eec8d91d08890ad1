//! Model-level statistical checks against closed-form or brute-force references.

use si_bell::analysis::{
    chsh, counterfactual_audit, outcome_counts, outcome_mismatches, quantum_joint_table, si_test, si_test_theory,
    Policy, Verdict, ENSEMBLE_ROW,
};
use si_bell::models::{
    box_theory, coin_theory, derive_goblin1_tables, entanglement_mixture_theory, generate, nomic_exclusion_violations,
    run_exceptionalist, run_fluke, run_galton, AllAtOnce, FlukeCondition, FlukeMode, FlukeModel, GaltonBoard,
    GaltonMode, GaltonResult, Goblin, GoblinVariant, LocalHv, TrialModel, Zigzag, RESPONDER,
};
use si_bell::ontic::{Angle, AngleTable, Observable, Outcome, Stage, Wing};
use si_bell::quantum::{
    born_probability_plus, make_singlet, partner_state, reduce_first, Convention, QubitState, TwoQubitState,
};
use si_bell::settings::{derive_trial_randomness, SettingSource};
use si_bell::trial::LabelScheme;

fn pq_closed(alpha: f64, beta: f64, a: f64, b: f64) -> f64 {
    (1.0 - a * b * (2.0 * (alpha - beta)).cos()) / 4.0
}

fn chsh_setup() -> (AngleTable, si_bell::analysis::JointTable) {
    let t = AngleTable::chsh();
    let pq = quantum_joint_table(&t, Convention::Singlet).unwrap();
    (t, pq)
}

#[test]
fn quantum_table_matches_closed_form() {
    let (t, pq) = chsh_setup();
    for ia in 0..2 {
        for ib in 0..2 {
            for (ka, a) in [1.0, -1.0].into_iter().enumerate() {
                for (kb, b) in [1.0, -1.0].into_iter().enumerate() {
                    let want = pq_closed(t.a[ia].radians(), t.b[ib].radians(), a, b);
                    assert!((pq[ia][ib][ka][kb] - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn zigzag_factorization_equals_direct_born() {
    // P(a) from ρ̂₁ times P(b | a) from the partner state, against the
    // direct two-qubit Born rule on the singlet.
    let psi = make_singlet();
    let rho = reduce_first(&psi).unwrap();
    let grid: Vec<f64> = (0..24).map(|k| k as f64 * std::f64::consts::PI / 24.0).collect();
    for &x in &grid {
        for &y in &grid {
            for a in [Outcome::Plus, Outcome::Minus] {
                for b in [Outcome::Plus, Outcome::Minus] {
                    let pa = born_probability_plus(&rho, x).unwrap();
                    let pa = if a == Outcome::Plus { pa } else { 1.0 - pa };
                    let phi = partner_state(&psi, x, a).unwrap();
                    let pb = born_probability_plus(&phi, y).unwrap();
                    let pb = if b == Outcome::Plus { pb } else { 1.0 - pb };
                    let direct = psi.product_probability(&QubitState::eigenstate(x, a), &QubitState::eigenstate(y, b));
                    assert!((pa * pb - direct).abs() < 1e-12, "x={x} y={y}");
                }
            }
        }
    }
}

#[test]
fn bell_phi_plus_reduces_to_mixed() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |r: f64| num_complex::Complex64::new(r, 0.0);
    let phi = TwoQubitState::new([c(h), c(0.0), c(0.0), c(h)]).unwrap();
    let rho = reduce_first(&phi).unwrap();
    assert!(rho.is_maximally_mixed(1e-12));
}

#[test]
fn partner_orthogonal_to_alice_eigenstate_on_grid() {
    let psi = make_singlet();
    for k in 0..64 {
        let theta = k as f64 * std::f64::consts::PI / 64.0;
        let phi = partner_state(&psi, theta, Outcome::Plus).unwrap();
        let e = QubitState::eigenstate(theta, Outcome::Plus);
        assert!(e.inner(&phi).norm() < 1e-12);
        assert!((phi.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zigzag_correlator_converges_for_most_seeds() {
    // |Ê − E| ≤ 5/√N per cell over many seeds.
    let (t, _) = chsh_setup();
    let n = 4000u64;
    let (mut ok, mut total) = (0, 0);
    for seed in 0..50u64 {
        let m = Zigzag::new(SettingSource::seeded_prng(seed, t.clone()), Convention::Singlet).unwrap();
        let ens = generate(&m, n, seed, "").unwrap();
        let est = chsh(ens.trials(), &t, 1).unwrap();
        for c in &est.correlators {
            let (ia, ib) = c.setting;
            let exact = -(2.0 * (t.a[ia].radians() - t.b[ib].radians())).cos();
            total += 1;
            if (c.e - exact).abs() <= 5.0 / (c.n as f64).sqrt() {
                ok += 1;
            }
        }
    }
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
}

#[test]
fn correlated_pairs_convention_flips_sign() {
    let (t, _) = chsh_setup();
    let m = Zigzag::new(SettingSource::seeded_prng(3, t.clone()), Convention::CorrelatedPairs).unwrap();
    let est = chsh(generate(&m, 40_000, 3, "").unwrap().trials(), &t, 1).unwrap();
    assert!((est.s - 2.0 * 2f64.sqrt()).abs() < 0.08, "S = {}", est.s);
}

/// Exact TV between ρ(λ|X,Y) and ρ(λ) from the goblin tables, against the
/// empirical per-label TV.
#[test]
fn goblin1_label_tv_matches_table_conditionals() {
    let (t, pq) = chsh_setup();
    let g = derive_goblin1_tables(&t, &pq).unwrap();
    let m = Goblin::new(GoblinVariant::One, t.clone(), pq, SettingSource::seeded_prng(1, t.clone())).unwrap();
    let ens = generate(&m, 100_000, 5, "").unwrap();
    let r = si_test(ens.trials(), Stage::Preparation, LabelScheme::Joint, Policy::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    for ia in 0..2 {
        for ib in 0..2 {
            // ρ(λ | X, Y) = q(λ) w(X,Y|λ) / ¼ by brute force.
            let mut tv = 0.0;
            for l in 0..16 {
                let w = g.setting_weights[l].map(|w| w[2 * ia + ib]).unwrap_or(0.0);
                let cond = g.lambda_prior[l] * w / 0.25;
                tv += (cond - g.lambda_prior[l]).abs();
            }
            tv *= 0.5;
            let label = t.joint(ia, ib).unwrap().token();
            let row = r.row(&label).unwrap();
            assert!((row.tv - tv).abs() < 0.02, "{label}: {} vs {tv}", row.tv);
        }
    }
}

#[test]
fn goblin_outcomes_follow_lambda_and_exclusion_holds() {
    let z = Angle::from_radians(0.0).unwrap();
    let q = Angle::from_pi_fraction(1, 4).unwrap();
    // Equal-angle pair (0, 0) in the table: strict exclusion.
    let t = AngleTable::new(vec![z, q], vec![z, q]).unwrap();
    let pq = quantum_joint_table(&t, Convention::Singlet).unwrap();
    let g = derive_goblin1_tables(&t, &pq).unwrap();
    assert!(g.setting_weights.iter().flatten().any(|w| w.contains(&0.0)));
    let m = Goblin::new(GoblinVariant::One, t.clone(), pq, SettingSource::seeded_prng(1, t.clone())).unwrap();
    let ens = generate(&m, 20_000, 2, "").unwrap();
    assert!(nomic_exclusion_violations(ens.trials(), &g, &t).is_empty());
    assert!(outcome_mismatches(ens.trials(), Stage::Preparation).is_empty());
    // Perfect anticorrelation at equal angles.
    let counts = outcome_counts(ens.trials(), &t).unwrap();
    assert_eq!(counts[0][0][0] + counts[0][0][3], 0);
}

#[test]
fn goblin3_settings_equal_bare_counter_source() {
    let (t, pq) = chsh_setup();
    let src = SettingSource::deterministic_counter(99, t.clone());
    let m = Goblin::new(GoblinVariant::Three, t.clone(), pq, src.clone()).unwrap();
    let mut bare = src;
    for i in 0..500 {
        let (joint, next) = bare.next_joint_setting().unwrap();
        bare = next;
        assert_eq!(m.run_trial(i, 1).unwrap().joint_setting(), Some(joint));
    }
}

#[test]
fn local_hv_equal_angles_uncorrelated() {
    // Enumeration: uniform λ gives E(θ, θ) = Σ λ_A λ_B / 16 = 0.
    let mut e = 0.0;
    for l in 0..16u32 {
        let v = |k: u32| if (l >> k) & 1 == 0 { 1.0 } else { -1.0 };
        e += v(0) * v(2) / 16.0;
    }
    assert_eq!(e, 0.0);
    let z = Angle::from_radians(0.0).unwrap();
    let t = AngleTable::new(vec![z], vec![z]).unwrap();
    let m = LocalHv::new(t.clone(), SettingSource::seeded_prng(1, t));
    let ens = generate(&m, 40_000, 1, "").unwrap();
    let prod: f64 = ens
        .trials()
        .iter()
        .map(|r| (r.outcome_a.unwrap().value() * r.outcome_b.unwrap().value()) as f64)
        .sum::<f64>()
        / 40_000.0;
    assert!(prod.abs() < 5.0 / 200.0);
}

#[test]
fn local_hv_stays_below_two() {
    let (t, _) = chsh_setup();
    let m = LocalHv::new(t.clone(), SettingSource::seeded_prng(4, t.clone()));
    let ens = generate(&m, 100_000, 4, "").unwrap();
    assert!(chsh(ens.trials(), &t, 1).unwrap().s.abs() <= 2.05);
    assert!(outcome_mismatches(ens.trials(), Stage::Preparation).is_empty());
}

#[test]
fn fair_coin_frequency_within_binomial_band() {
    let e = run_fluke(&FlukeModel::coin(FlukeCondition::None).unwrap(), 1_000_000, 12, "").unwrap();
    let heads = e
        .trials()
        .iter()
        .filter(|t| t.snapshot(Stage::PostMeasurement).unwrap().canonical_encoding() == "H")
        .count() as f64
        / 1e6;
    // 0.002 is four standard deviations of a fair binomial at n = 10⁶.
    assert!((heads - 0.5).abs() < 0.002, "{heads}");
    let r = si_test_theory(e.trials(), Stage::PostMeasurement, &coin_theory(), None, Policy::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Obeyed);
}

#[test]
fn post_selected_fluke_matches_quantum_theory() {
    let (t, pq) = chsh_setup();
    let m = FlukeModel::new(
        FlukeMode::Entanglement,
        FlukeCondition::PostSelectObeyed,
        t.clone(),
        pq,
        SettingSource::seeded_prng(2, t.clone()),
    )
    .unwrap();
    let e = run_fluke(&m, 100_000, 2, "").unwrap();
    let quantum = entanglement_mixture_theory(&t, &pq, 1.0).unwrap();
    let r = si_test_theory(e.trials(), Stage::PostMeasurement, &quantum, None, Policy::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Obeyed);
    // The unconditioned ensemble is the mixture.
    let m = FlukeModel::new(FlukeMode::Entanglement, FlukeCondition::None, t.clone(), pq, SettingSource::seeded_prng(2, t.clone()))
        .unwrap();
    let e = run_fluke(&m, 100_000, 2, "").unwrap();
    let mixture = entanglement_mixture_theory(&t, &pq, 0.5).unwrap();
    let r = si_test_theory(e.trials(), Stage::PostMeasurement, &mixture, None, Policy::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Obeyed);
    assert!(r.row(ENSEMBLE_ROW).unwrap().tv < 0.01);
}

#[test]
fn galton_sampled_mean_is_half_rows() {
    let GaltonResult::Distribution(counts) =
        run_galton(12, &GaltonMode::SweepSampled { samples: 100_000, seed: 3 }).unwrap()
    else {
        panic!()
    };
    let n: u64 = counts.iter().sum();
    let mean = counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / n as f64;
    assert!((mean - 6.0).abs() < 0.05, "{mean}");
}

#[test]
fn galton_board_log_matches_binomial_theory() {
    let m = GaltonBoard::new(10).unwrap();
    let e = generate(&m, 50_000, 8, "").unwrap();
    let r = si_test_theory(e.trials(), Stage::PostMeasurement, &box_theory(10).unwrap(), None, Policy::default())
        .unwrap();
    assert_eq!(r.verdict, Verdict::Obeyed);
}

#[test]
fn all_at_once_lambda_is_exactly_measured() {
    let (t, pq) = chsh_setup();
    let m = AllAtOnce::new(t.clone(), pq, SettingSource::seeded_prng(4, t.clone())).unwrap();
    let e = generate(&m, 10_000, 4, "").unwrap();
    let audit = counterfactual_audit(e.trials(), Stage::PostMeasurement).unwrap();
    assert_eq!(audit.fraction_with_unmeasured, 0.0);
    assert_eq!(audit.exactly_measured, 10_000);
    let r = si_test(e.trials(), Stage::Preparation, LabelScheme::Joint, Policy::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Obeyed);
    assert_eq!(r.ensemble_distribution.counts.keys().collect::<Vec<_>>(), vec!["∅"]);
    // Local HV, by contrast, assigns the unmeasured pair on every trial.
    let lhv = LocalHv::new(t.clone(), SettingSource::seeded_prng(4, t));
    let e = generate(&lhv, 1000, 4, "").unwrap();
    assert_eq!(counterfactual_audit(e.trials(), Stage::Preparation).unwrap().fraction_with_unmeasured, 1.0);
}

#[test]
fn exceptionalist_responder_rate_per_group() {
    let (t, pq) = chsh_setup();
    let run = run_exceptionalist(100_000, 21, 0.3, pq, SettingSource::seeded_prng(21, t), "").unwrap();
    for group in ["A#0", "A#1"] {
        let sub: Vec<_> = run
            .drug
            .trials()
            .iter()
            .filter(|t| t.setting_a.unwrap().token() == group)
            .collect();
        let rate = sub
            .iter()
            .filter(|t| t.snapshot(Stage::Preparation).unwrap().canonical_encoding() == RESPONDER)
            .count() as f64
            / sub.len() as f64;
        // Binomial sd at n ≈ 5·10⁴ is about 0.002.
        assert!((rate - 0.3).abs() < 0.005, "{group}: {rate}");
    }
}

#[test]
fn trial_streams_are_uniform() {
    let mut sum = 0.0;
    let mut s = derive_trial_randomness(77, 0, "uniformity");
    for _ in 0..1_000_000 {
        sum += s.next_unit();
    }
    assert!((sum / 1e6 - 0.5).abs() < 0.002);
}

#[test]
fn observables_decode_goblin_lambda() {
    let (t, pq) = chsh_setup();
    let g = derive_goblin1_tables(&t, &pq).unwrap();
    let a0 = Observable { wing: Wing::A, angle: t.a[0] };
    assert_eq!(g.assignment(0).value_of(&a0), Some(Outcome::Plus));
    assert_eq!(g.assignment(1).value_of(&a0), Some(Outcome::Minus));
}

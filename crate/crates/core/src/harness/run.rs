use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ModelId, SiSpec, SourceSpec, TheoryKind, TheorySpec};
use super::plot::{chsh_csv, si_rows_csv, sweep_csv, SweepPoint};
use crate::analysis::{
    chsh, chsh_exact, counterfactual_audit, joint_fit_p_values, outcome_counts, outcome_mismatches,
    quantum_joint_table, si_test, si_test_theory, ChshEstimate, Distribution, JointTable, SiReport, Verdict,
};
use crate::error::{Error, Result};
use crate::models::{
    box_theory, coin_theory, entanglement_mixture_theory, enumerate_branches, generate, nomic_exclusion_violations,
    run_exceptionalist, run_fluke, run_galton, with_threads, AllAtOnce, FlukeModel, GaltonBoard, GaltonMode,
    GaltonResult, Goblin, GoblinVariant, LocalHv, TrialModel, Zigzag,
};
use crate::ontic::{Angle, AngleTable, Stage};
use crate::quantum::exact_correlator;
use crate::settings::{mix64, SettingSource};
use crate::trial::{encoding_collisions, Ensemble, TrialRecord};

/// Worker-count override for trial generation.
pub const THREADS_ENV: &str = "SI_BELL_SIM_THREADS";

/// Worker count from `SI_BELL_SIM_THREADS`; 0 lets rayon decide.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    /// Files written, relative to `dir`, in write order.
    pub files: Vec<PathBuf>,
    pub report: Value,
}

pub fn build_source(config: &ExperimentConfig, table: &AngleTable) -> Result<SettingSource> {
    let seed = config.effective_source_seed();
    Ok(match &config.source {
        SourceSpec::SeededPrng => SettingSource::seeded_prng(seed, table.clone()),
        SourceSpec::DeterministicCounter => SettingSource::deterministic_counter(seed, table.clone()),
        SourceSpec::Replay(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SettingSource::replay(SettingSource::parse_replay(&text)?, table.clone())
        }
    })
}

fn joint_table(config: &ExperimentConfig) -> Result<JointTable> {
    quantum_joint_table(&config.table, config.convention)
}

fn goblin_variant(id: ModelId) -> Option<GoblinVariant> {
    match id {
        ModelId::Goblin1 => Some(GoblinVariant::One),
        ModelId::Goblin2 => Some(GoblinVariant::Two),
        ModelId::Goblin3 => Some(GoblinVariant::Three),
        _ => None,
    }
}

fn build_goblin(config: &ExperimentConfig, variant: GoblinVariant) -> Result<Goblin> {
    let source = build_source(config, &config.table)?;
    Ok(Goblin::new(variant, config.table.clone(), joint_table(config)?, source)?
        .with_debug_exclusions(config.params.debug_exclusions))
}

fn build_fluke(config: &ExperimentConfig) -> Result<FlukeModel> {
    // Coin flukes carry no settings; the table only satisfies the constructor.
    let table = if config.table.is_two_by_two() { config.table.clone() } else { AngleTable::chsh() };
    let pq = quantum_joint_table(&table, config.convention)?;
    let source = build_source(config, &table)?;
    FlukeModel::new(config.params.fluke_mode, config.params.fluke_condition, table, pq, source)
}

fn build_model(config: &ExperimentConfig) -> Result<Box<dyn TrialModel>> {
    if let Some(v) = goblin_variant(config.model) {
        return Ok(Box::new(build_goblin(config, v)?));
    }
    Ok(match config.model {
        ModelId::LocalHv => Box::new(LocalHv::new(config.table.clone(), build_source(config, &config.table)?)),
        ModelId::Zigzag => Box::new(Zigzag::new(build_source(config, &config.table)?, config.convention)?),
        ModelId::AllAtOnce => Box::new(AllAtOnce::new(
            config.table.clone(),
            joint_table(config)?,
            build_source(config, &config.table)?,
        )?),
        ModelId::Galton => Box::new(GaltonBoard::new(config.params.rows)?),
        ModelId::Fluke => Box::new(build_fluke(config)?),
        other => {
            return Err(Error::InvalidParameter(format!("{} has no single-ensemble model", other.name())));
        }
    })
}

/// The ensemble of a single-arm model.
pub fn simulate(config: &ExperimentConfig) -> Result<Ensemble> {
    let digest = config.digest();
    if config.model == ModelId::Fluke {
        return run_fluke(&build_fluke(config)?, config.trials, config.seed, &digest);
    }
    let model = build_model(config)?;
    generate(model.as_ref(), config.trials, config.seed, &digest)
}

pub fn theory_distribution(kind: TheoryKind, config: &ExperimentConfig) -> Result<Distribution> {
    match kind {
        TheoryKind::Coin => Ok(coin_theory()),
        TheoryKind::Mixture => entanglement_mixture_theory(&config.table, &joint_table(config)?, 0.5),
        TheoryKind::Quantum => entanglement_mixture_theory(&config.table, &joint_table(config)?, 1.0),
        TheoryKind::Galton => box_theory(config.params.rows),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshSection {
    pub estimate: ChshEstimate,
    pub exact_s: f64,
    /// Per-cell chi-square p-values against the quantum joint, `[i_A][i_B]`.
    pub joint_fit_p_values: [[f64; 2]; 2],
}

/// Analyses of one ensemble.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub si: Vec<(String, SiReport)>,
    pub si_theory: Vec<(String, SiReport)>,
    pub chsh: Option<ChshSection>,
    pub audits: Value,
}

impl Analysis {
    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.si
            .iter()
            .chain(&self.si_theory)
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.verdict)
    }
}

fn context(name: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{name}: {m}")),
        other => other,
    }
}

pub fn analyze(config: &ExperimentConfig, trials: &[TrialRecord], si: &[SiSpec], th: &[TheorySpec]) -> Result<Analysis> {
    let mut si_out = Vec::new();
    for req in si {
        let r = si_test(trials, req.stage, req.scheme, config.policy).map_err(|e| context(&req.name(), e))?;
        si_out.push((req.name(), r));
    }
    let mut th_out = Vec::new();
    for req in th {
        let theory = theory_distribution(req.theory, config)?;
        let r = si_test_theory(trials, req.stage, &theory, req.scheme, config.policy)
            .map_err(|e| context(&req.name(), e))?;
        th_out.push((req.name(), r));
    }
    let chsh_section = if config.chsh {
        let estimate = chsh(trials, &config.table, config.min_per_cell)?;
        let pq = joint_table(config)?;
        let counts = outcome_counts(trials, &config.table)?;
        Some(ChshSection {
            estimate,
            exact_s: chsh_exact(&pq),
            joint_fit_p_values: joint_fit_p_values(&counts, &pq),
        })
    } else {
        None
    };
    Ok(Analysis {
        si: si_out,
        si_theory: th_out,
        chsh: chsh_section,
        audits: audits(config, trials)?,
    })
}

fn audits(config: &ExperimentConfig, trials: &[TrialRecord]) -> Result<Value> {
    let mut a = serde_json::Map::new();
    a.insert("encoding_collisions".into(), json!(encoding_collisions(trials).len()));
    let lambda_stage = match config.model {
        ModelId::AllAtOnce | ModelId::Fluke => Some(Stage::PostMeasurement),
        m if m.is_bell() && m != ModelId::Zigzag => Some(Stage::Preparation),
        _ => None,
    };
    if let Some(stage) = lambda_stage {
        if trials.iter().all(|t| t.setting_a.is_some() && t.setting_b.is_some()) {
            a.insert("counterfactual".into(), serde_json::to_value(counterfactual_audit(trials, stage)?).unwrap());
            a.insert("outcome_mismatches".into(), json!(outcome_mismatches(trials, stage).len()));
        }
    }
    if goblin_variant(config.model).is_some() && config.table.is_two_by_two() {
        let tables = crate::models::derive_goblin1_tables(&config.table, &joint_table(config)?)?;
        a.insert(
            "nomic_exclusion_violations".into(),
            json!(nomic_exclusion_violations(trials, &tables, &config.table).len()),
        );
    }
    Ok(Value::Object(a))
}

fn analysis_json(a: &Analysis) -> Value {
    let reports = |v: &[(String, SiReport)]| -> Value {
        Value::Array(
            v.iter()
                .map(|(n, r)| json!({"name": n, "report": serde_json::to_value(r).unwrap()}))
                .collect(),
        )
    };
    json!({
        "si": reports(&a.si),
        "si_theory": reports(&a.si_theory),
        "chsh": a.chsh.as_ref().map(|c| serde_json::to_value(c).unwrap()),
        "audits": a.audits,
    })
}

fn ensemble_json(e: &Ensemble) -> Value {
    json!({
        "model_id": e.meta.model_id,
        "seed": e.meta.seed,
        "trials": e.len(),
        "config_digest": e.meta.config_digest,
        "log_sha256": e.digest(),
    })
}

/// Correlator against `Δ = β − α` for `Δ ∈ {0, π/8, π/4, 3π/8, π/2}`.
/// Each point runs the model on `a = (0, π/4)`, `b = (Δ, Δ + π/4)` and pools
/// the two diagonal cells, which both sit at separation `Δ`.
pub fn correlator_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let quarter = Angle::from_pi_fraction(1, 4)?;
    let mut out = Vec::new();
    for k in 0..5i64 {
        let delta = Angle::from_pi_fraction(k, 8)?;
        let b1 = Angle::from_radians(delta.radians() + quarter.radians())?;
        let mut c = config.clone();
        c.table = AngleTable::new(vec![Angle::from_pi_fraction(0, 1)?, quarter], vec![delta, b1])?;
        c.trials = config.sweep_trials;
        c.seed = mix64(config.seed ^ (k as u64 + 1));
        if matches!(c.source, SourceSpec::Replay(_)) {
            c.source = SourceSpec::SeededPrng;
        }
        if c.model == ModelId::Exceptionalist {
            c.model = ModelId::Goblin2;
        }
        // k = 4 is Δ = π/2, whose float radians differ from the 4π/8 angle.
        let d = k as f64 * std::f64::consts::PI / 8.0;
        let ens = simulate(&c)?;
        let counts = outcome_counts(ens.trials(), &c.table)?;
        let (mut n, mut same) = (0u64, 0u64);
        for i in 0..2 {
            let cell = counts[i][i];
            n += cell.iter().sum::<u64>();
            same += cell[0] + cell[3];
        }
        if n == 0 {
            return Err(Error::MissingSettingCell(format!("sweep point {k}: no diagonal trials")));
        }
        let nf = n as f64;
        let e = (2.0 * same as f64 - nf) / nf;
        let se = if n > 1 { (nf * (1.0 - e * e) / (nf - 1.0)).max(0.0).sqrt() / nf.sqrt() } else { 0.0 };
        out.push(SweepPoint {
            delta: d,
            n,
            e,
            se,
            quantum_e: exact_correlator(0.0, d, config.convention),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RepeatSummary {
    pub test: String,
    pub seeds: Vec<u64>,
    pub violated: u32,
    pub obeyed: u32,
    pub inconclusive: u32,
}

/// Repeats the configured tests for `seed, seed+1, …, seed+K`.
pub fn multi_seed(config: &ExperimentConfig) -> Result<Vec<RepeatSummary>> {
    let seeds: Vec<u64> = (0..=config.repeat_seeds as u64).map(|k| config.seed.wrapping_add(k)).collect();
    let mut rows: Vec<RepeatSummary> = Vec::new();
    for &seed in &seeds {
        let c = config.clone().with_seed(seed);
        let named: Vec<(String, Verdict)> = if c.model == ModelId::Exceptionalist {
            let (drug, bell) = exceptionalist_analyses(&c)?;
            drug.si
                .iter()
                .map(|(n, r)| (format!("drug:{n}"), r.verdict))
                .chain(bell.si.iter().map(|(n, r)| (format!("bell:{n}"), r.verdict)))
                .collect()
        } else {
            let ens = simulate(&c)?;
            let mut quiet = c.clone();
            quiet.chsh = false;
            let a = analyze(&quiet, ens.trials(), &c.si, &c.si_theory)?;
            a.si.iter().chain(&a.si_theory).map(|(n, r)| (n.clone(), r.verdict)).collect()
        };
        for (name, v) in named {
            let row = match rows.iter_mut().position(|r| r.test == name) {
                Some(i) => &mut rows[i],
                None => {
                    rows.push(RepeatSummary {
                        test: name,
                        seeds: seeds.clone(),
                        violated: 0,
                        obeyed: 0,
                        inconclusive: 0,
                    });
                    rows.last_mut().unwrap()
                }
            };
            match v {
                Verdict::Violated => row.violated += 1,
                Verdict::Obeyed => row.obeyed += 1,
                Verdict::Inconclusive => row.inconclusive += 1,
            }
        }
    }
    Ok(rows)
}

fn drug_spec() -> SiSpec {
    SiSpec {
        stage: Stage::Preparation,
        scheme: crate::trial::LabelScheme::Wing(crate::ontic::Wing::A),
    }
}

fn exceptionalist_run(config: &ExperimentConfig) -> Result<crate::models::ExceptionalistRun> {
    run_exceptionalist(
        config.trials,
        config.seed,
        config.params.responder_rate,
        joint_table(config)?,
        build_source(config, &config.table)?,
        &config.digest(),
    )
}

fn exceptionalist_analyses(config: &ExperimentConfig) -> Result<(Analysis, Analysis)> {
    let run = exceptionalist_run(config)?;
    let mut drug_cfg = config.clone();
    drug_cfg.chsh = false;
    let drug = analyze(&drug_cfg, run.drug.trials(), &[drug_spec()], &[])?;
    let bell = analyze(config, run.bell.trials(), &config.si, &config.si_theory)?;
    Ok((drug, bell))
}

/// Responder frequency per assignment group.
fn responder_rates(trials: &[TrialRecord]) -> Value {
    let mut groups: std::collections::BTreeMap<String, (u64, u64)> = Default::default();
    for t in trials {
        let g = t.setting_a.map(|s| s.token()).unwrap_or_default();
        let r = t
            .snapshot(Stage::Preparation)
            .is_some_and(|s| s.canonical_encoding() == crate::models::RESPONDER);
        let e = groups.entry(g).or_default();
        e.0 += 1;
        e.1 += r as u64;
    }
    Value::Object(
        groups
            .into_iter()
            .map(|(g, (n, r))| (g, json!({"n": n, "responders": r, "rate": r as f64 / n as f64})))
            .collect(),
    )
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, rel: impl AsRef<Path>, contents: &str) -> Result<()> {
        let path = self.dir.join(rel.as_ref());
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(rel.as_ref().to_path_buf());
        Ok(())
    }

    fn analysis_csvs(&mut self, prefix: &str, a: &Analysis) -> Result<()> {
        for (name, r) in a.si.iter().chain(&a.si_theory) {
            let file = format!("{prefix}si_{}.csv", name.replace('@', "_"));
            self.write(file, &si_rows_csv(r))?;
        }
        if let Some(c) = &a.chsh {
            self.write(format!("{prefix}chsh.csv"), &chsh_csv(&c.estimate))?;
        }
        Ok(())
    }
}

fn model_json(config: &ExperimentConfig) -> Value {
    json!({
        "id": config.model.name(),
        "convention": config.convention.name(),
        "angles_a": config.table.a.iter().map(Angle::token).collect::<Vec<_>>(),
        "angles_b": config.table.b.iter().map(Angle::token).collect::<Vec<_>>(),
        "source": match &config.source {
            SourceSpec::SeededPrng => "seeded-prng",
            SourceSpec::DeterministicCounter => "deterministic-counter",
            SourceSpec::Replay(_) => "replay",
        },
        "source_seed": config.effective_source_seed(),
    })
}

fn notes(config: &ExperimentConfig) -> Vec<&'static str> {
    let mut n = Vec::new();
    if config.model == ModelId::Fluke && config.params.fluke_mode == crate::models::FlukeMode::Entanglement {
        n.push("fluke violate branch draws independent uniform outcomes");
    }
    if config.repeat_seeds > 0 {
        n.push("multi-seed counts carry no multiple-comparison correction; expect about alpha × runs × labels false violations");
    }
    n
}

/// Runs the configured experiment and writes every output under
/// `config.output_dir`: `trials.tsv`, `report.json` and CSV plot data.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    run_experiment_with_threads(config, threads_from_env())
}

pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<RunOutput> {
    let config = config.clone();
    with_threads(threads, move || run_inner(&config))?
}

fn run_inner(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut w = Writer {
        dir: config.output_dir.clone(),
        files: Vec::new(),
    };
    let mut report = serde_json::Map::new();
    report.insert("config_digest".into(), json!(config.digest()));
    report.insert("seed".into(), json!(config.seed));
    report.insert("model".into(), model_json(config));
    report.insert("policy".into(), serde_json::to_value(config.policy).unwrap());
    report.insert("notes".into(), json!(notes(config)));

    match config.model {
        ModelId::Branching => {
            let e = enumerate_branches(config.params.branches, config.params.epsilon)?;
            let s = e.summary();
            let mut csv = String::from("heads,weight\n");
            for (k, wgt) in s.weight_by_heads.iter().enumerate() {
                csv.push_str(&format!("{k},{wgt}\n"));
            }
            w.write("branches.csv", &csv)?;
            report.insert("branching".into(), serde_json::to_value(s).unwrap());
        }
        ModelId::Exceptionalist => {
            let run = exceptionalist_run(config)?;
            run.drug.write(&w.dir.join("drug").join("trials.tsv"))?;
            w.files.push(PathBuf::from("drug/trials.tsv"));
            run.bell.write(&w.dir.join("bell").join("trials.tsv"))?;
            w.files.push(PathBuf::from("bell/trials.tsv"));
            let mut drug_cfg = config.clone();
            drug_cfg.chsh = false;
            let drug = analyze(&drug_cfg, run.drug.trials(), &[drug_spec()], &[])?;
            let bell = analyze(config, run.bell.trials(), &config.si, &config.si_theory)?;
            w.analysis_csvs("drug/", &drug)?;
            w.analysis_csvs("bell/", &bell)?;
            let mut drug_json = analysis_json(&drug);
            drug_json["ensemble"] = ensemble_json(&run.drug);
            drug_json["responder_rates"] = responder_rates(run.drug.trials());
            let mut bell_json = analysis_json(&bell);
            bell_json["ensemble"] = ensemble_json(&run.bell);
            report.insert("arms".into(), json!({"drug": drug_json, "bell": bell_json}));
        }
        _ => {
            let ens = simulate(config)?;
            ens.write(&w.dir.join("trials.tsv"))?;
            w.files.push(PathBuf::from("trials.tsv"));
            let a = analyze(config, ens.trials(), &config.si, &config.si_theory)?;
            w.analysis_csvs("", &a)?;
            let mut body = analysis_json(&a);
            body["ensemble"] = ensemble_json(&ens);
            if config.model == ModelId::Galton {
                let rows = config.params.rows;
                let sweep = if rows <= crate::models::MAX_SWEEP_ROWS {
                    run_galton(rows, &GaltonMode::SweepExhaustive)?
                } else {
                    run_galton(rows, &GaltonMode::SweepSampled { samples: config.trials, seed: config.seed })?
                };
                let mut galton = serde_json::Map::new();
                galton.insert("rows".into(), json!(rows));
                galton.insert("sweep".into(), serde_json::to_value(&sweep).unwrap());
                if let Some(ic) = &config.params.initial_condition {
                    if let GaltonResult::Box(b) = run_galton(rows, &GaltonMode::Single(ic.clone()))? {
                        galton.insert("single_box".into(), json!(b));
                    }
                }
                if let GaltonResult::Distribution(counts) = &sweep {
                    let mut csv = String::from("box,count\n");
                    for (k, c) in counts.iter().enumerate() {
                        csv.push_str(&format!("{k},{c}\n"));
                    }
                    w.write("galton_boxes.csv", &csv)?;
                }
                body["galton"] = Value::Object(galton);
            }
            report.insert("analysis".into(), body);
        }
    }

    if config.sweep {
        if !config.model.is_bell()
            || (config.model == ModelId::Fluke && config.params.fluke_mode == crate::models::FlukeMode::Coin)
        {
            return Err(Error::InvalidParameter(format!("sweep needs a Bell model, not {}", config.model.name())));
        }
        let points = correlator_sweep(config)?;
        w.write("sweep.csv", &sweep_csv(&points))?;
        report.insert("sweep".into(), serde_json::to_value(&points).unwrap());
    }
    if config.repeat_seeds > 0 && config.model != ModelId::Branching {
        report.insert("multi_seed".into(), serde_json::to_value(multi_seed(config)?).unwrap());
    }

    let report = Value::Object(report);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    w.write("report.json", &text)?;
    Ok(RunOutput {
        dir: w.dir,
        files: w.files,
        report,
    })
}

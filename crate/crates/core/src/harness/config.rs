//! Line-based experiment config.
//!
//! ```text
//! # comment
//! [model]
//! id = zigzag
//! trials = 100000
//! seed = 42
//! [analysis]
//! si = source-temporal@A, causal-step-1@A
//! ```
//!
//! Every problem found is reported with its line number; parsing never stops
//! at the first error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::Policy;
use crate::error::{ConfigError, Error, Result};
use crate::models::{FlukeCondition, FlukeMode};
use crate::ontic::{Angle, AngleTable, Stage};
use crate::quantum::Convention;
use crate::trial::{sha256_hex, LabelScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    LocalHv,
    Goblin1,
    Goblin2,
    Goblin3,
    Zigzag,
    AllAtOnce,
    Fluke,
    Galton,
    Branching,
    Exceptionalist,
}

impl ModelId {
    pub const ALL: [ModelId; 10] = [
        ModelId::LocalHv,
        ModelId::Goblin1,
        ModelId::Goblin2,
        ModelId::Goblin3,
        ModelId::Zigzag,
        ModelId::AllAtOnce,
        ModelId::Fluke,
        ModelId::Galton,
        ModelId::Branching,
        ModelId::Exceptionalist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::LocalHv => "local-hv",
            ModelId::Goblin1 => "goblin-1",
            ModelId::Goblin2 => "goblin-2",
            ModelId::Goblin3 => "goblin-3",
            ModelId::Zigzag => "zigzag",
            ModelId::AllAtOnce => "all-at-once",
            ModelId::Fluke => "fluke",
            ModelId::Galton => "galton",
            ModelId::Branching => "branching",
            ModelId::Exceptionalist => "exceptionalist",
        }
    }

    /// Models whose trials carry Bell settings and outcomes.
    pub fn is_bell(self) -> bool {
        !matches!(self, ModelId::Galton | ModelId::Branching)
    }
}

impl FromStr for ModelId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<ModelId, String> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model id {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    SeededPrng,
    DeterministicCounter,
    Replay(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryKind {
    /// Fair coin over `H`/`T`.
    Coin,
    /// Half quantum joint, half uniform outcomes, uniform settings.
    Mixture,
    /// Quantum joint with uniform settings.
    Quantum,
    /// Binomial(rows, ½) over galton boxes.
    Galton,
}

impl TheoryKind {
    pub fn name(self) -> &'static str {
        match self {
            TheoryKind::Coin => "coin",
            TheoryKind::Mixture => "mixture",
            TheoryKind::Quantum => "quantum",
            TheoryKind::Galton => "galton",
        }
    }
}

impl FromStr for TheoryKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<TheoryKind, String> {
        match s {
            "coin" => Ok(TheoryKind::Coin),
            "mixture" => Ok(TheoryKind::Mixture),
            "quantum" => Ok(TheoryKind::Quantum),
            "galton" => Ok(TheoryKind::Galton),
            _ => Err(format!("unknown theory {s:?}")),
        }
    }
}

/// A sense-1 test: `stage@scheme`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiSpec {
    pub stage: Stage,
    pub scheme: LabelScheme,
}

impl SiSpec {
    pub fn name(&self) -> String {
        format!("{}@{}", self.stage, self.scheme)
    }
}

/// A sense-2 test: `stage@theory`, optionally per label with `stage@theory@scheme`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TheorySpec {
    pub stage: Stage,
    pub theory: TheoryKind,
    pub scheme: Option<LabelScheme>,
}

impl TheorySpec {
    pub fn name(&self) -> String {
        match self.scheme {
            Some(s) => format!("{}@{}@{}", self.stage, self.theory.name(), s),
            None => format!("{}@{}", self.stage, self.theory.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub fluke_mode: FlukeMode,
    pub fluke_condition: FlukeCondition,
    pub rows: u32,
    pub initial_condition: Option<Vec<bool>>,
    pub branches: u32,
    pub epsilon: f64,
    pub responder_rate: f64,
    pub debug_exclusions: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            fluke_mode: FlukeMode::Coin,
            fluke_condition: FlukeCondition::None,
            rows: 10,
            initial_condition: None,
            branches: 20,
            epsilon: 0.1,
            responder_rate: 0.3,
            debug_exclusions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelId,
    pub trials: u64,
    pub seed: u64,
    pub convention: Convention,
    pub table: AngleTable,
    pub params: ModelParams,
    pub source: SourceSpec,
    /// `None` follows the master seed.
    pub source_seed: Option<u64>,
    pub si: Vec<SiSpec>,
    pub si_theory: Vec<TheorySpec>,
    pub policy: Policy,
    pub chsh: bool,
    pub min_per_cell: u64,
    pub sweep: bool,
    pub sweep_trials: u64,
    pub repeat_seeds: u32,
    pub output_dir: PathBuf,
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "id",
            "trials",
            "seed",
            "convention",
            "angles_a",
            "angles_b",
            "fluke_mode",
            "fluke_condition",
            "rows",
            "initial_condition",
            "branches",
            "epsilon",
            "responder_rate",
            "debug_exclusions",
        ],
    ),
    ("source", &["kind", "seed", "replay"]),
    (
        "analysis",
        &["si", "si_theory", "alpha", "tau", "n_min", "chsh", "min_per_cell", "sweep", "sweep_trials", "repeat_seeds"],
    ),
    ("output", &["dir"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Collector {
    errors: Vec<ConfigError>,
    entries: BTreeMap<(String, String), Entry>,
}

impl Collector {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ConfigError { line, message: message.into() });
    }

    fn raw(&self, section: &str, key: &str) -> Option<(usize, &str)> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| (e.line, e.value.as_str()))
    }

    fn get<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        let (line, value) = self.raw(section, key)?;
        let value = value.to_string();
        match parse(&value) {
            Ok(v) => Some(v),
            Err(m) => {
                self.err(line, format!("{section}.{key}: {m}"));
                None
            }
        }
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.raw(section, key).map(|(l, _)| l).unwrap_or(0)
    }
}

fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    s.replace('_', "").parse::<u64>().map_err(|_| format!("expected a non-negative integer, got {s:?}"))
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("expected a number, got {s:?}"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

fn parse_angles(s: &str) -> std::result::Result<Vec<Angle>, String> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err("expected at least one angle".into());
    }
    items
        .iter()
        .map(|t| Angle::from_str(t).map_err(|_| format!("malformed angle {t:?}")))
        .collect()
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(item).collect()
}

fn parse_si(s: &str) -> std::result::Result<SiSpec, String> {
    let (stage, scheme) = s.split_once('@').ok_or_else(|| format!("expected stage@label, got {s:?}"))?;
    Ok(SiSpec {
        stage: Stage::from_str(stage).map_err(|e| e.to_string())?,
        scheme: LabelScheme::from_str(scheme).map_err(|e| e.to_string())?,
    })
}

fn parse_theory(s: &str) -> std::result::Result<TheorySpec, String> {
    let parts: Vec<&str> = s.split('@').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(format!("expected stage@theory[@label], got {s:?}"));
    }
    Ok(TheorySpec {
        stage: Stage::from_str(parts[0]).map_err(|e| e.to_string())?,
        theory: TheoryKind::from_str(parts[1])?,
        scheme: match parts.get(2) {
            Some(l) => Some(LabelScheme::from_str(l).map_err(|e| e.to_string())?),
            None => None,
        },
    })
}

/// Parses and validates a config. All problems come back together in
/// [`Error::Config`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut c = Collector {
        errors: Vec::new(),
        entries: BTreeMap::new(),
    };
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim();
            if KEYS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                c.err(line, format!("unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            c.err(line, format!("expected key = value, got {body:?}"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            c.err(line, format!("key {key:?} outside a known section"));
            continue;
        };
        let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            c.err(line, format!("unknown key {sec}.{key}"));
            continue;
        }
        let slot = (sec.clone(), key.to_string());
        if let Some(prev) = c.entries.get(&slot) {
            let prev = prev.line;
            c.err(line, format!("duplicate key {sec}.{key} (first set on line {prev})"));
            continue;
        }
        c.entries.insert(slot, Entry { line, value: value.to_string() });
    }

    let model = match c.raw("model", "id") {
        None => {
            c.err(0, "missing required key model.id");
            None
        }
        Some(_) => c.get("model", "id", ModelId::from_str),
    };
    let trials = match c.get("model", "trials", parse_u64) {
        Some(0) => {
            let line = c.line_of("model", "trials");
            c.err(line, "trials must be ≥ 1");
            None
        }
        Some(n) => Some(n),
        None if c.raw("model", "trials").is_none() && model != Some(ModelId::Branching) => {
            c.err(0, "missing required key model.trials");
            None
        }
        None => None,
    };
    let seed = c.get("model", "seed", parse_u64);
    if seed.is_none() && c.raw("model", "seed").is_none() {
        c.err(0, "missing required key model.seed");
    }
    let convention = c
        .get("model", "convention", |s| Convention::from_str(s).map_err(|e| e.to_string()))
        .unwrap_or(Convention::Singlet);
    let chsh = AngleTable::chsh();
    let angles_a = c.get("model", "angles_a", parse_angles).unwrap_or(chsh.a.clone());
    let angles_b = c.get("model", "angles_b", parse_angles).unwrap_or(chsh.b.clone());
    let table = AngleTable { a: angles_a, b: angles_b };

    let mut params = ModelParams::default();
    if let Some(v) = c.get("model", "fluke_mode", |s| FlukeMode::from_str(s).map_err(|e| e.to_string())) {
        params.fluke_mode = v;
    }
    if let Some(v) = c.get("model", "fluke_condition", |s| FlukeCondition::from_str(s).map_err(|e| e.to_string())) {
        params.fluke_condition = v;
    }
    if let Some(v) = c.get("model", "rows", |s| {
        parse_u64(s).and_then(|r| if (1..=64).contains(&r) { Ok(r as u32) } else { Err("rows must be in 1..=64".into()) })
    }) {
        params.rows = v;
    }
    params.initial_condition = c.get("model", "initial_condition", |s| {
        crate::models::parse_bits(s).map_err(|e| e.to_string())
    });
    if let Some(v) = c.get("model", "branches", |s| {
        parse_u64(s).and_then(|n| {
            if (1..=crate::models::MAX_BRANCH_QUBITS as u64).contains(&n) {
                Ok(n as u32)
            } else {
                Err(format!("branches must be in 1..={}", crate::models::MAX_BRANCH_QUBITS))
            }
        })
    }) {
        params.branches = v;
    }
    if let Some(v) = c.get("model", "epsilon", |s| {
        parse_f64(s).and_then(|e| if e >= 0.0 { Ok(e) } else { Err("epsilon must be ≥ 0".into()) })
    }) {
        params.epsilon = v;
    }
    if let Some(v) = c.get("model", "responder_rate", |s| {
        parse_f64(s).and_then(|q| if q > 0.0 && q < 1.0 { Ok(q) } else { Err("responder_rate must be in (0, 1)".into()) })
    }) {
        params.responder_rate = v;
    }
    if let Some(v) = c.get("model", "debug_exclusions", parse_bool) {
        params.debug_exclusions = v;
    }

    let kind = c.get("source", "kind", |s| match s {
        "seeded-prng" | "deterministic-counter" | "replay" => Ok(s.to_string()),
        _ => Err(format!("unknown source kind {s:?}")),
    });
    let replay = c.raw("source", "replay").map(|(_, v)| PathBuf::from(v));
    let source = match (kind.as_deref(), replay) {
        (Some("replay"), Some(p)) => SourceSpec::Replay(p),
        (Some("replay"), None) => {
            let line = c.line_of("source", "kind");
            c.err(line, "source.kind = replay needs source.replay = <path>");
            SourceSpec::SeededPrng
        }
        (Some("deterministic-counter"), _) => SourceSpec::DeterministicCounter,
        (Some(_), _) => SourceSpec::SeededPrng,
        (None, Some(p)) => SourceSpec::Replay(p),
        (None, None) if model == Some(ModelId::Goblin3) => SourceSpec::DeterministicCounter,
        (None, None) => SourceSpec::SeededPrng,
    };
    let source_seed = c.get("source", "seed", parse_u64);

    let si = c.get("analysis", "si", |s| parse_list(s, parse_si));
    let si_theory = c.get("analysis", "si_theory", |s| parse_list(s, parse_theory));
    let mut policy = Policy::default();
    if let Some(a) = c.get("analysis", "alpha", |s| {
        parse_f64(s).and_then(|a| if a > 0.0 && a < 1.0 { Ok(a) } else { Err("alpha must be in (0, 1)".into()) })
    }) {
        policy.alpha = a;
    }
    if let Some(t) = c.get("analysis", "tau", |s| {
        parse_f64(s).and_then(|t| if (0.0..=1.0).contains(&t) { Ok(t) } else { Err("tau must be in [0, 1]".into()) })
    }) {
        policy.tau = t;
    }
    if let Some(n) = c.get("analysis", "n_min", parse_u64) {
        policy.n_min = n;
    }
    let chsh_flag = c.get("analysis", "chsh", parse_bool);
    let min_per_cell = c.get("analysis", "min_per_cell", parse_u64).unwrap_or(1);
    let sweep = c.get("analysis", "sweep", parse_bool).unwrap_or(false);
    let sweep_trials = match c.get("analysis", "sweep_trials", parse_u64) {
        Some(0) => {
            let line = c.line_of("analysis", "sweep_trials");
            c.err(line, "sweep_trials must be ≥ 1");
            100_000
        }
        Some(n) => n,
        None => 100_000,
    };
    let repeat_seeds = c
        .get("analysis", "repeat_seeds", |s| {
            parse_u64(s).and_then(|n| u32::try_from(n).map_err(|_| "repeat_seeds too large".to_string()))
        })
        .unwrap_or(0);
    let output_dir = c.raw("output", "dir").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from("out"));

    // Cross-field checks.
    if let Some(m) = model {
        let needs_2x2 = matches!(
            m,
            ModelId::Goblin1 | ModelId::Goblin2 | ModelId::Goblin3 | ModelId::AllAtOnce | ModelId::Exceptionalist
        ) || (m == ModelId::Fluke && params.fluke_mode == FlukeMode::Entanglement);
        if needs_2x2 && !table.is_two_by_two() {
            let line = c.line_of("model", "angles_a").max(c.line_of("model", "angles_b"));
            c.err(line, format!("{} needs exactly two angles per wing", m.name()));
        }
        if m == ModelId::Goblin3 && source != SourceSpec::DeterministicCounter {
            let line = c.line_of("source", "kind");
            c.err(line, "goblin-3 needs source.kind = deterministic-counter");
        }
        if m == ModelId::Fluke {
            match (params.fluke_mode, params.fluke_condition) {
                (FlukeMode::Coin, FlukeCondition::PostSelectObeyed) | (FlukeMode::Entanglement, FlukeCondition::ForceAllHeads) => {
                    let line = c.line_of("model", "fluke_condition");
                    c.err(line, "fluke_condition does not apply to this fluke_mode");
                }
                _ => {}
            }
        }
        if m == ModelId::Galton {
            if let Some(ic) = &params.initial_condition {
                if ic.len() != params.rows as usize {
                    let line = c.line_of("model", "initial_condition");
                    c.err(line, format!("initial_condition has {} bits for {} rows", ic.len(), params.rows));
                }
            }
        }
        if chsh_flag == Some(true) && !(m.is_bell() && table.is_two_by_two()) {
            let line = c.line_of("analysis", "chsh");
            c.err(line, format!("chsh needs a Bell model with a 2×2 angle table, not {}", m.name()));
        }
    }

    if !c.errors.is_empty() {
        c.errors.sort_by_key(|e| e.line);
        return Err(Error::Config(c.errors));
    }
    let model = model.expect("checked above");
    let (default_si, default_theory) = default_analyses(model, &params);
    let coin_like = model == ModelId::Fluke && params.fluke_mode == FlukeMode::Coin;
    Ok(ExperimentConfig {
        model,
        trials: trials.unwrap_or(1),
        seed: seed.expect("checked above"),
        convention,
        table: table.clone(),
        params,
        source,
        source_seed,
        si: si.unwrap_or(default_si),
        si_theory: si_theory.unwrap_or(default_theory),
        policy,
        chsh: chsh_flag.unwrap_or(model.is_bell() && !coin_like && table.is_two_by_two()),
        min_per_cell,
        sweep,
        sweep_trials,
        repeat_seeds,
        output_dir,
    })
}

/// Tests run when the config names none.
pub fn default_analyses(model: ModelId, params: &ModelParams) -> (Vec<SiSpec>, Vec<TheorySpec>) {
    let si = |stage, scheme| SiSpec { stage, scheme };
    let th = |stage, theory| TheorySpec { stage, theory, scheme: None };
    match model {
        ModelId::LocalHv | ModelId::Goblin1 | ModelId::Goblin2 | ModelId::Goblin3 | ModelId::Exceptionalist => {
            (vec![si(Stage::Preparation, LabelScheme::Joint)], vec![])
        }
        ModelId::Zigzag => (
            vec![
                si(Stage::SourceTemporal, LabelScheme::Wing(crate::ontic::Wing::A)),
                si(Stage::CausalStep1, LabelScheme::Wing(crate::ontic::Wing::A)),
                si(Stage::CausalStep3, LabelScheme::Wing(crate::ontic::Wing::B)),
            ],
            vec![],
        ),
        ModelId::AllAtOnce => (vec![si(Stage::Preparation, LabelScheme::Joint)], vec![]),
        ModelId::Fluke => match params.fluke_mode {
            FlukeMode::Coin => (vec![], vec![th(Stage::PostMeasurement, TheoryKind::Coin)]),
            FlukeMode::Entanglement => (vec![], vec![th(Stage::PostMeasurement, TheoryKind::Mixture)]),
        },
        ModelId::Galton => (vec![], vec![th(Stage::PostMeasurement, TheoryKind::Galton)]),
        ModelId::Branching => (vec![], vec![]),
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config(&text)?;
    if let SourceSpec::Replay(p) = &config.source {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                config.source = SourceSpec::Replay(dir.join(p));
            }
        }
    }
    Ok(config)
}

fn join_angles(angles: &[Angle]) -> String {
    angles.iter().map(Angle::token).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn with_seed(mut self, seed: u64) -> ExperimentConfig {
        self.seed = seed;
        self
    }

    pub fn effective_source_seed(&self) -> u64 {
        self.source_seed.unwrap_or(self.seed)
    }

    /// Normalized rendering of every field that affects outputs. The output
    /// directory is excluded.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "model.id={}", self.model.name());
        let _ = writeln!(s, "model.trials={}", self.trials);
        let _ = writeln!(s, "model.seed={}", self.seed);
        let _ = writeln!(s, "model.convention={}", self.convention.name());
        let _ = writeln!(s, "model.angles_a={}", join_angles(&self.table.a));
        let _ = writeln!(s, "model.angles_b={}", join_angles(&self.table.b));
        let _ = writeln!(s, "model.fluke_mode={:?}", p.fluke_mode);
        let _ = writeln!(s, "model.fluke_condition={:?}", p.fluke_condition);
        let _ = writeln!(s, "model.rows={}", p.rows);
        let ic: Option<String> = p
            .initial_condition
            .as_ref()
            .map(|b| b.iter().map(|&x| if x { '1' } else { '0' }).collect());
        let _ = writeln!(s, "model.initial_condition={}", ic.unwrap_or_default());
        let _ = writeln!(s, "model.branches={}", p.branches);
        let _ = writeln!(s, "model.epsilon={:?}", p.epsilon);
        let _ = writeln!(s, "model.responder_rate={:?}", p.responder_rate);
        let _ = writeln!(s, "model.debug_exclusions={}", p.debug_exclusions);
        let source = match &self.source {
            SourceSpec::SeededPrng => "seeded-prng".to_string(),
            SourceSpec::DeterministicCounter => "deterministic-counter".to_string(),
            SourceSpec::Replay(path) => {
                let content = std::fs::read(path).map(|b| sha256_hex(&b)).unwrap_or_default();
                format!("replay:{content}")
            }
        };
        let _ = writeln!(s, "source.kind={source}");
        let _ = writeln!(s, "source.seed={}", self.effective_source_seed());
        let si: Vec<String> = self.si.iter().map(SiSpec::name).collect();
        let th: Vec<String> = self.si_theory.iter().map(TheorySpec::name).collect();
        let _ = writeln!(s, "analysis.si={}", si.join(","));
        let _ = writeln!(s, "analysis.si_theory={}", th.join(","));
        let _ = writeln!(s, "analysis.alpha={:?}", self.policy.alpha);
        let _ = writeln!(s, "analysis.tau={:?}", self.policy.tau);
        let _ = writeln!(s, "analysis.n_min={}", self.policy.n_min);
        let _ = writeln!(s, "analysis.chsh={}", self.chsh);
        let _ = writeln!(s, "analysis.min_per_cell={}", self.min_per_cell);
        let _ = writeln!(s, "analysis.sweep={}", self.sweep);
        let _ = writeln!(s, "analysis.sweep_trials={}", self.sweep_trials);
        let _ = writeln!(s, "analysis.repeat_seeds={}", self.repeat_seeds);
        s
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[model]\nid = zigzag\ntrials = 1000\nseed = 42\n").unwrap();
        assert_eq!(c.model, ModelId::Zigzag);
        assert_eq!(c.table, AngleTable::chsh());
        assert_eq!(c.convention, Convention::Singlet);
        assert_eq!(c.source, SourceSpec::SeededPrng);
        assert_eq!(c.si.len(), 3);
        assert!(c.chsh);
        assert_eq!(c.policy, Policy::default());
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn pi_multiples_parse() {
        let c = parse_config("[model]\nid = local-hv\ntrials = 10\nseed = 1\nangles_a = 0.3π, 0\nangles_b = 0\n").unwrap();
        assert!((c.table.a[0].radians() - 0.942_477_796_076_937_9).abs() < 1e-12);
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "[model]\nid = nope\ntrials = 0\nseed = x\nangles_a = banana\n[bogus]\n";
        let Err(Error::Config(errs)) = parse_config(text) else { panic!("expected config errors") };
        let lines: Vec<usize> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 5, 6]);
        assert!(errs.iter().any(|e| e.message == "trials must be ≥ 1"));
        assert!(errs.iter().any(|e| e.message.contains("unknown model id")));
        assert!(errs.iter().any(|e| e.message.contains("malformed angle")));
    }

    #[test]
    fn missing_keys_are_reported() {
        let Err(Error::Config(errs)) = parse_config("[model]\nid = zigzag\n") else { panic!() };
        assert!(errs.iter().any(|e| e.message.contains("model.trials")));
        assert!(errs.iter().any(|e| e.message.contains("model.seed")));
    }

    #[test]
    fn goblin3_defaults_to_counter_source() {
        let c = parse_config("[model]\nid = goblin-3\ntrials = 10\nseed = 1\n").unwrap();
        assert_eq!(c.source, SourceSpec::DeterministicCounter);
        assert!(parse_config("[model]\nid = goblin-3\ntrials = 10\nseed = 1\n[source]\nkind = seeded-prng\n").is_err());
    }

    #[test]
    fn digest_ignores_output_dir() {
        let a = parse_config("[model]\nid = zigzag\ntrials = 10\nseed = 1\n[output]\ndir = x\n").unwrap();
        let b = parse_config("[model]\nid = zigzag\ntrials = 10\nseed = 1\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), b.clone().with_seed(2).digest());
    }
}

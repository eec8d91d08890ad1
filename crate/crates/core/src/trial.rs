//! Trial records, ensembles and the tab-separated trial log.
//!
//! Log layout, UTF-8, one record per line after a `#`-prefixed header:
//!
//! ```text
//! #si-bell-log	v1
//! #model_id	zigzag
//! #seed	42
//! #trials	3
//! #config_digest	9f2c…
//! 0	zigzag	A0	B22.5	+1	-1	causal-step-1=Q:mixed;source-temporal=Q:mixed|Q:basis0:eig-	post-measurement-alice
//! ```
//!
//! Fields: trial_index, model_id, settingA, settingB, outcomeA, outcomeB,
//! snapshots (`stage=encoding` pairs joined by `;`), flags (joined by `,`).
//! An absent value or an empty list is written as `_`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ontic::{JointSetting, OnticState, Outcome, Setting, Stage, StageSnapshot, Wing};

pub const FLAG_CORRELATION_OBEYED: &str = "correlation-obeyed";
pub const FLAG_FLUKE_BRANCH: &str = "fluke-branch";
pub const FLAG_NOMICALLY_EXCLUDED: &str = "nomically-excluded";
pub const FLAG_POST_MEASUREMENT_ALICE: &str = "post-measurement-alice";

const ABSENT: &str = "_";
const LOG_MAGIC: &str = "#si-bell-log\tv1";

/// One experimental run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub model_id: String,
    pub setting_a: Option<Setting>,
    pub setting_b: Option<Setting>,
    pub outcome_a: Option<Outcome>,
    pub outcome_b: Option<Outcome>,
    pub snapshots: Vec<StageSnapshot>,
    pub flags: BTreeSet<String>,
}

impl TrialRecord {
    pub fn new(trial_index: u64, model_id: impl Into<String>) -> TrialRecord {
        TrialRecord {
            trial_index,
            model_id: model_id.into(),
            setting_a: None,
            setting_b: None,
            outcome_a: None,
            outcome_b: None,
            snapshots: Vec::new(),
            flags: BTreeSet::new(),
        }
    }

    pub fn with_settings(mut self, joint: JointSetting) -> Self {
        self.setting_a = Some(joint.a);
        self.setting_b = Some(joint.b);
        self
    }

    pub fn with_outcomes(mut self, a: Outcome, b: Outcome) -> Self {
        self.outcome_a = Some(a);
        self.outcome_b = Some(b);
        self
    }

    pub fn with_snapshot(mut self, stage: Stage, state: OnticState) -> Self {
        self.snapshots.push(StageSnapshot { stage, state });
        self
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.insert(flag.into());
        self
    }

    pub fn snapshot(&self, stage: Stage) -> Option<&OnticState> {
        self.snapshots.iter().find(|s| s.stage == stage).map(|s| &s.state)
    }

    pub fn setting(&self, wing: Wing) -> Option<Setting> {
        match wing {
            Wing::A => self.setting_a,
            Wing::B => self.setting_b,
        }
    }

    pub fn joint_setting(&self) -> Option<JointSetting> {
        Some(JointSetting {
            a: self.setting_a?,
            b: self.setting_b?,
        })
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.contains(flag)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("trial {}: {m}", self.trial_index)));
        if !valid_field(&self.model_id) {
            return bad(format!("invalid model id {:?}", self.model_id));
        }
        let mut seen = BTreeSet::new();
        for s in &self.snapshots {
            if !seen.insert(s.stage) {
                return bad(format!("duplicate snapshot at stage {}", s.stage));
            }
        }
        for f in &self.flags {
            if !valid_field(f) || f.contains(',') || f.contains(';') {
                return bad(format!("invalid flag {f:?}"));
            }
        }
        if self.has_flag(FLAG_NOMICALLY_EXCLUDED) && (self.outcome_a.is_some() || self.outcome_b.is_some()) {
            return bad("nomically excluded trial carries outcomes".into());
        }
        Ok(())
    }

    fn to_line(&self) -> String {
        let setting = |s: Option<Setting>| s.map_or_else(|| ABSENT.to_string(), |s| s.token());
        let outcome = |o: Option<Outcome>| match o {
            Some(Outcome::Plus) => "+1",
            Some(Outcome::Minus) => "-1",
            None => ABSENT,
        };
        let snapshots = if self.snapshots.is_empty() {
            ABSENT.to_string()
        } else {
            self.snapshots
                .iter()
                .map(|s| format!("{}={}", s.stage, s.state.canonical_encoding()))
                .collect::<Vec<_>>()
                .join(";")
        };
        let flags = if self.flags.is_empty() {
            ABSENT.to_string()
        } else {
            self.flags.iter().cloned().collect::<Vec<_>>().join(",")
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.trial_index,
            self.model_id,
            setting(self.setting_a),
            setting(self.setting_b),
            outcome(self.outcome_a),
            outcome(self.outcome_b),
            snapshots,
            flags
        )
    }

    fn from_line(line: &str, line_no: usize) -> Result<TrialRecord> {
        let err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 tab-separated fields, found {}", fields.len())));
        }
        let trial_index: u64 = fields[0].parse().map_err(|_| err(format!("bad trial index {:?}", fields[0])))?;
        let setting = |f: &str| -> Result<Option<Setting>> {
            if f == ABSENT {
                Ok(None)
            } else {
                Setting::parse_token(f).map(Some).map_err(|e| err(e.to_string()))
            }
        };
        let outcome = |f: &str| -> Result<Option<Outcome>> {
            match f {
                "+1" => Ok(Some(Outcome::Plus)),
                "-1" => Ok(Some(Outcome::Minus)),
                ABSENT => Ok(None),
                other => Err(err(format!("bad outcome {other:?}"))),
            }
        };
        let mut snapshots = Vec::new();
        if fields[6] != ABSENT {
            for item in fields[6].split(';') {
                let (stage, enc) = item.split_once('=').ok_or_else(|| err(format!("bad snapshot {item:?}")))?;
                let stage: Stage = stage.parse().map_err(|e: Error| err(e.to_string()))?;
                let state = OnticState::parse_encoding(enc).map_err(|e| err(e.to_string()))?;
                snapshots.push(StageSnapshot { stage, state });
            }
        }
        let flags = if fields[7] == ABSENT {
            BTreeSet::new()
        } else {
            fields[7].split(',').map(str::to_string).collect()
        };
        let record = TrialRecord {
            trial_index,
            model_id: fields[1].to_string(),
            setting_a: setting(fields[2])?,
            setting_b: setting(fields[3])?,
            outcome_a: outcome(fields[4])?,
            outcome_b: outcome(fields[5])?,
            snapshots,
            flags,
        };
        record.validate().map_err(|e| err(e.to_string()))?;
        Ok(record)
    }
}

fn valid_field(s: &str) -> bool {
    !s.is_empty() && s != ABSENT && !s.chars().any(|c| c.is_whitespace())
}

/// How trials are split into sub-ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum LabelScheme {
    Wing(Wing),
    Joint,
}

impl LabelScheme {
    pub fn name(self) -> &'static str {
        match self {
            LabelScheme::Wing(Wing::A) => "A",
            LabelScheme::Wing(Wing::B) => "B",
            LabelScheme::Joint => "AB",
        }
    }
}

impl std::fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" | "X" => Ok(LabelScheme::Wing(Wing::A)),
            "B" | "b" | "Y" => Ok(LabelScheme::Wing(Wing::B)),
            "AB" | "joint" | "XY" => Ok(LabelScheme::Joint),
            other => Err(Error::InvalidParameter(format!("unknown label scheme {other:?}"))),
        }
    }
}

/// The label token `Z` of a trial: its setting on one wing, or both.
pub fn label_by_setting(trial: &TrialRecord, scheme: LabelScheme) -> Result<String> {
    let unlabeled = || Error::UnlabeledTrial {
        trial_index: trial.trial_index,
    };
    match scheme {
        LabelScheme::Wing(w) => trial.setting(w).map(|s| s.token()).ok_or_else(unlabeled),
        LabelScheme::Joint => trial.joint_setting().map(|j| j.token()).ok_or_else(unlabeled),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleMeta {
    pub model_id: String,
    pub seed: u64,
    pub config_digest: String,
}

/// An ordered collection of trials from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub meta: EnsembleMeta,
    trials: Vec<TrialRecord>,
}

impl Ensemble {
    /// Sorts by trial index and rejects duplicates.
    pub fn new(meta: EnsembleMeta, mut trials: Vec<TrialRecord>) -> Result<Ensemble> {
        trials.sort_by_key(|t| t.trial_index);
        if let Some(w) = trials.windows(2).find(|w| w[0].trial_index == w[1].trial_index) {
            return Err(Error::InvalidParameter(format!("duplicate trial index {}", w[0].trial_index)));
        }
        for t in &trials {
            t.validate()?;
        }
        Ok(Ensemble { meta, trials })
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn to_log(&self) -> String {
        let mut out = String::with_capacity(64 * (self.trials.len() + 5));
        out.push_str(LOG_MAGIC);
        out.push('\n');
        let _ = writeln!(out, "#model_id\t{}", self.meta.model_id);
        let _ = writeln!(out, "#seed\t{}", self.meta.seed);
        let _ = writeln!(out, "#trials\t{}", self.trials.len());
        let _ = writeln!(out, "#config_digest\t{}", self.meta.config_digest);
        for t in &self.trials {
            out.push_str(&t.to_line());
            out.push('\n');
        }
        out
    }

    pub fn parse_log(text: &str) -> Result<Ensemble> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == LOG_MAGIC => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing trial log header".into(),
                })
            }
        }
        let mut header = BTreeMap::new();
        let mut trials = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once('\t').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("bad header line {line:?}"),
                })?;
                header.insert(k.to_string(), (v.to_string(), line_no));
            } else if !line.is_empty() {
                trials.push(TrialRecord::from_line(line, line_no)?);
            }
        }
        let get = |k: &str| {
            header.get(k).map(|(v, _)| v.clone()).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing header {k}"),
            })
        };
        let seed = get("seed")?.parse().map_err(|_| Error::Parse {
            line: header["seed"].1,
            message: "bad seed".into(),
        })?;
        let count: usize = get("trials")?.parse().map_err(|_| Error::Parse {
            line: header["trials"].1,
            message: "bad trial count".into(),
        })?;
        if count != trials.len() {
            return Err(Error::Parse {
                line: header["trials"].1,
                message: format!("header declares {count} trials, found {}", trials.len()),
            });
        }
        let meta = EnsembleMeta {
            model_id: get("model_id")?,
            seed,
            config_digest: get("config_digest")?,
        };
        Ensemble::new(meta, trials)
    }

    /// Writes the log, creating parent directories as needed.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_log()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Ensemble> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ensemble::parse_log(&text)
    }

    /// SHA-256 of the serialized log.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_log().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Ontic tokens that two different states mapped onto; empty when the
/// encoding was injective over the log.
pub fn encoding_collisions(trials: &[TrialRecord]) -> Vec<String> {
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    let mut collisions = BTreeSet::new();
    for t in trials {
        for s in &t.snapshots {
            let token = s.state.canonical_encoding();
            let fingerprint = format!("{:?}", structural_key(&s.state));
            match seen.get(&token) {
                Some(prev) if *prev != fingerprint => {
                    collisions.insert(token);
                }
                Some(_) => {}
                None => {
                    seen.insert(token, fingerprint);
                }
            }
        }
    }
    collisions.into_iter().collect()
}

/// A representation independent of the token writer, for the collision audit.
fn structural_key(state: &OnticState) -> Vec<String> {
    use crate::ontic::LocalQuantum;
    match state {
        OnticState::Empty => vec![],
        OnticState::Assignment(map) => map
            .iter()
            .map(|(o, v)| format!("{:?}{:.9}{}", o.wing, o.angle.radians(), v.value()))
            .collect(),
        OnticState::Quantum(parts) => parts
            .iter()
            .map(|p| match p {
                LocalQuantum::Mixed(rho) => {
                    let m = rho.entries();
                    format!("rho{:.9}{:.9}{:.9}", m[0][0].re, m[0][1].re, m[0][1].im)
                }
                LocalQuantum::Pure(psi) => {
                    let [a, b] = psi.phase_normalized().amplitudes();
                    format!("psi{:.9}{:.9}{:.9}{:.9}", a.re, a.im, b.re, b.im)
                }
            })
            .collect(),
        OnticState::Classical(s) => vec![format!("c{s}")],
    }
}

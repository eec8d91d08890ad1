//! Domain vocabulary: angles, settings, outcomes, ontic states and the
//! canonical text tokens used to tabulate them.
//!
//! Every ontic state has exactly one canonical token. Frequency tables,
//! trial logs and reports are all keyed by these tokens, so two states are
//! considered the same state iff their tokens are equal.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, QubitState};

/// Tolerance used when snapping angles onto the canonical interval.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Token of the empty ontic state.
pub const EMPTY_TOKEN: &str = "∅";

/// Measurement wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Wing {
    A,
    B,
}

impl Wing {
    pub fn letter(self) -> char {
        match self {
            Wing::A => 'A',
            Wing::B => 'B',
        }
    }

    fn from_letter(c: char) -> Option<Wing> {
        match c {
            'A' => Some(Wing::A),
            'B' => Some(Wing::B),
            _ => None,
        }
    }
}

impl fmt::Display for Wing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A polarizer-style angle, canonicalized into `[0, π)`.
///
/// When the angle came from an exact rational multiple of π the fraction is
/// kept, and the radians are always recomputed from it so equal fractions
/// give bit-identical radians.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Angle {
    radians: f64,
    pi_fraction: Option<(i64, i64)>,
}

impl Angle {
    pub fn from_radians(radians: f64) -> Result<Angle> {
        if !radians.is_finite() {
            return Err(Error::InvalidParameter(format!("angle {radians} is not finite")));
        }
        let mut r = radians.rem_euclid(PI);
        if r < ANGLE_TOLERANCE || PI - r < ANGLE_TOLERANCE {
            r = 0.0;
        }
        Ok(Angle {
            radians: r,
            pi_fraction: None,
        })
    }

    /// The angle `π · num / den`.
    pub fn from_pi_fraction(num: i64, den: i64) -> Result<Angle> {
        if den == 0 {
            return Err(Error::InvalidParameter("angle fraction with zero denominator".into()));
        }
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        num = num.rem_euclid(den);
        let g = gcd(num, den);
        num /= g;
        den /= g;
        Ok(Angle {
            radians: PI * num as f64 / den as f64,
            pi_fraction: Some((num, den)),
        })
    }

    /// Exact construction from a decimal degree string such as `22.5`.
    pub fn from_degrees_str(text: &str) -> Result<Angle> {
        let (num, den) = parse_decimal(text)
            .ok_or_else(|| Error::InvalidParameter(format!("malformed degree value {text:?}")))?;
        Angle::from_pi_fraction(num, den.checked_mul(180).ok_or_else(|| {
            Error::InvalidParameter(format!("degree value {text:?} has too many digits"))
        })?)
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    pub fn pi_fraction(&self) -> Option<(i64, i64)> {
        self.pi_fraction
    }

    pub fn degrees(&self) -> f64 {
        match self.pi_fraction {
            Some((n, d)) => 180.0 * n as f64 / d as f64,
            None => self.radians.to_degrees(),
        }
    }

    /// Degree rendering used in tokens: at most nine decimals, no trailing zeros.
    pub fn token(&self) -> String {
        let deg = round9(self.degrees());
        // 180 can appear after rounding an angle just below π.
        format_decimal(if deg >= 180.0 { deg - 180.0 } else { deg })
    }

    pub fn approx_eq(&self, other: &Angle, tol: f64) -> bool {
        let d = (self.radians - other.radians).abs();
        d <= tol || (PI - d) <= tol
    }
}

impl PartialEq for Angle {
    fn eq(&self, other: &Self) -> bool {
        self.radians.to_bits() == other.radians.to_bits()
    }
}

impl Eq for Angle {}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.radians.total_cmp(&other.radians)
    }
}

impl FromStr for Angle {
    type Err = Error;

    /// Accepts plain radians (`0.94`), degrees (`22.5deg`, `22.5°`) and
    /// multiples of π (`pi/8`, `3pi/8`, `0.3π`, `3*pi/8`, `-pi/4`).
    fn from_str(s: &str) -> Result<Angle> {
        let text: String = s.trim().replace('π', "pi").chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidParameter(format!("malformed angle {s:?}"));
        if text.is_empty() {
            return Err(bad());
        }
        if let Some(deg) = text.strip_suffix("deg").or_else(|| text.strip_suffix('°')) {
            return Angle::from_degrees_str(deg).map_err(|_| bad());
        }
        if let Some(pos) = text.find("pi") {
            let coef = text[..pos].trim_end_matches('*');
            let rest = &text[pos + 2..];
            let (cn, cd) = match coef {
                "" | "+" => (1, 1),
                "-" => (-1, 1),
                c => parse_decimal(c).ok_or_else(bad)?,
            };
            let div = if rest.is_empty() {
                1
            } else {
                let d = rest.strip_prefix('/').ok_or_else(bad)?;
                d.parse::<i64>().map_err(|_| bad())?
            };
            if div == 0 {
                return Err(bad());
            }
            return Angle::from_pi_fraction(cn, cd.checked_mul(div).ok_or_else(bad)?);
        }
        let r: f64 = text.parse().map_err(|_| bad())?;
        Angle::from_radians(r)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token())
    }
}

/// How a setting is specified on its wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SettingKind {
    Angle(Angle),
    /// A bare binary index; resolved to an angle through an [`AngleTable`].
    Indexed(u8),
}

/// A measurement setting on one wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Setting {
    pub wing: Wing,
    pub kind: SettingKind,
}

impl Setting {
    pub fn angle(wing: Wing, angle: Angle) -> Setting {
        Setting {
            wing,
            kind: SettingKind::Angle(angle),
        }
    }

    pub fn indexed(wing: Wing, index: u8) -> Setting {
        Setting {
            wing,
            kind: SettingKind::Indexed(index),
        }
    }

    pub fn angle_value(&self) -> Option<Angle> {
        match self.kind {
            SettingKind::Angle(a) => Some(a),
            SettingKind::Indexed(_) => None,
        }
    }

    /// Resolve an indexed setting against a table; angle settings pass through.
    pub fn resolve(&self, table: &AngleTable) -> Result<Setting> {
        match self.kind {
            SettingKind::Angle(_) => Ok(*self),
            SettingKind::Indexed(i) => Ok(Setting::angle(self.wing, table.angle(self.wing, i as usize)?)),
        }
    }

    pub fn observable(&self) -> Option<Observable> {
        self.angle_value().map(|angle| Observable { wing: self.wing, angle })
    }

    /// `A0`, `B22.5` for angle settings; `A#1` for indexed ones.
    pub fn token(&self) -> String {
        match self.kind {
            SettingKind::Angle(a) => format!("{}{}", self.wing, a.token()),
            SettingKind::Indexed(i) => format!("{}#{}", self.wing, i),
        }
    }

    pub fn parse_token(token: &str) -> Result<Setting> {
        let bad = || Error::InvalidParameter(format!("malformed setting token {token:?}"));
        let mut chars = token.chars();
        let wing = chars.next().and_then(Wing::from_letter).ok_or_else(bad)?;
        let rest = chars.as_str();
        if let Some(idx) = rest.strip_prefix('#') {
            let i: u8 = idx.parse().map_err(|_| bad())?;
            return Ok(Setting::indexed(wing, i));
        }
        Ok(Setting::angle(wing, Angle::from_degrees_str(rest).map_err(|_| bad())?))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token())
    }
}

/// One setting per wing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointSetting {
    pub a: Setting,
    pub b: Setting,
}

impl JointSetting {
    pub fn token(&self) -> String {
        format!("{}×{}", self.a.token(), self.b.token())
    }

    /// Parses `A0×B22.5`; an ASCII `x` separator is also accepted.
    pub fn parse_token(token: &str) -> Result<JointSetting> {
        let token = token.trim();
        let (a, b) = token
            .split_once('×')
            .or_else(|| token.split_once('x'))
            .ok_or_else(|| Error::InvalidParameter(format!("malformed joint setting {token:?}")))?;
        let a = Setting::parse_token(a)?;
        let b = Setting::parse_token(b)?;
        if a.wing != Wing::A || b.wing != Wing::B {
            return Err(Error::InvalidParameter(format!("joint setting {token:?} must be A×B")));
        }
        Ok(JointSetting { a, b })
    }
}

/// Per-wing list of angles selected by binary (or small integer) indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTable {
    pub a: Vec<Angle>,
    pub b: Vec<Angle>,
}

impl AngleTable {
    pub fn new(a: Vec<Angle>, b: Vec<Angle>) -> Result<AngleTable> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidParameter("angle table needs at least one angle per wing".into()));
        }
        Ok(AngleTable { a, b })
    }

    /// Alice (0, π/4), Bob (π/8, 3π/8).
    pub fn chsh() -> AngleTable {
        let f = |n, d| Angle::from_pi_fraction(n, d).expect("nonzero denominator");
        AngleTable {
            a: vec![f(0, 1), f(1, 4)],
            b: vec![f(1, 8), f(3, 8)],
        }
    }

    pub fn wing(&self, wing: Wing) -> &[Angle] {
        match wing {
            Wing::A => &self.a,
            Wing::B => &self.b,
        }
    }

    pub fn angle(&self, wing: Wing, index: usize) -> Result<Angle> {
        self.wing(wing).get(index).copied().ok_or_else(|| {
            Error::InvalidParameter(format!("wing {wing} has no angle at index {index}"))
        })
    }

    pub fn is_two_by_two(&self) -> bool {
        self.a.len() == 2 && self.b.len() == 2
    }

    /// Index of the table entry matching `angle` within `tol` radians.
    pub fn index_of(&self, wing: Wing, angle: &Angle, tol: f64) -> Option<usize> {
        self.wing(wing).iter().position(|a| a.approx_eq(angle, tol))
    }

    pub fn joint(&self, ia: usize, ib: usize) -> Result<JointSetting> {
        Ok(JointSetting {
            a: Setting::angle(Wing::A, self.angle(Wing::A, ia)?),
            b: Setting::angle(Wing::B, self.angle(Wing::B, ib)?),
        })
    }
}

/// A ±1 measurement outcome. Absorbed is `+1`, transmitted is `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Result<Outcome> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            _ => Err(Error::InvalidParameter(format!("outcome must be ±1, got {v}"))),
        }
    }

    pub fn negate(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn sign(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }

    fn from_sign(c: &str) -> Option<Outcome> {
        match c {
            "+" => Some(Outcome::Plus),
            "-" => Some(Outcome::Minus),
            _ => None,
        }
    }
}

/// A measurable quantity: a wing together with an angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observable {
    pub wing: Wing,
    pub angle: Angle,
}

impl Observable {
    pub fn token(&self) -> String {
        format!("{}{}", self.wing, self.angle.token())
    }
}

/// A local quantum ontic state.
#[derive(Debug, Clone, Copy)]
pub enum LocalQuantum {
    Mixed(DensityMatrix),
    Pure(QubitState),
}

impl LocalQuantum {
    fn encode(&self) -> String {
        match self {
            LocalQuantum::Mixed(rho) => {
                if rho.is_maximally_mixed(1e-9) {
                    "Q:mixed".to_string()
                } else {
                    let m = rho.entries();
                    format!(
                        "Q:rho:{},{},{}",
                        format_decimal(round9(m[0][0].re)),
                        format_decimal(round9(m[0][1].re)),
                        format_decimal(round9(m[0][1].im))
                    )
                }
            }
            LocalQuantum::Pure(psi) => encode_pure(psi),
        }
    }

    fn decode(token: &str) -> Result<LocalQuantum> {
        let bad = || Error::InvalidParameter(format!("malformed quantum token {token:?}"));
        let body = token.strip_prefix("Q:").ok_or_else(bad)?;
        if body == "mixed" {
            return Ok(LocalQuantum::Mixed(DensityMatrix::maximally_mixed()));
        }
        if let Some(rest) = body.strip_prefix("rho:") {
            let v = parse_floats(rest).ok_or_else(bad)?;
            if v.len() != 3 {
                return Err(bad());
            }
            return Ok(LocalQuantum::Mixed(DensityMatrix::from_bloch_entries(v[0], v[1], v[2])?));
        }
        if let Some(rest) = body.strip_prefix("basis") {
            let (deg, sign) = rest.split_once(":eig").ok_or_else(bad)?;
            let angle = Angle::from_degrees_str(deg).map_err(|_| bad())?;
            let outcome = Outcome::from_sign(sign).ok_or_else(bad)?;
            return Ok(LocalQuantum::Pure(QubitState::eigenstate(angle.radians(), outcome)));
        }
        if let Some(rest) = body.strip_prefix("psi:") {
            let v = parse_floats(rest).ok_or_else(bad)?;
            if v.len() != 4 {
                return Err(bad());
            }
            return Ok(LocalQuantum::Pure(QubitState::from_parts(v[0], v[1], v[2], v[3])?));
        }
        Err(bad())
    }
}

fn encode_pure(psi: &QubitState) -> String {
    let psi = psi.phase_normalized();
    let [a0, a1] = psi.amplitudes();
    if a0.im.abs() < 1e-9 && a1.im.abs() < 1e-9 {
        // A real unit vector is fixed by its direction modulo π. Directions
        // in [0°, 90°) are +1 eigenstates of that angle, the rest are −1
        // eigenstates of the angle 90° below.
        let mut deg = round9(a1.re.atan2(a0.re).to_degrees()).rem_euclid(180.0);
        if deg >= 180.0 {
            deg -= 180.0;
        }
        let (basis, sign) = if deg >= 90.0 { (deg - 90.0, '-') } else { (deg, '+') };
        format!("Q:basis{}:eig{}", format_decimal(round9(basis)), sign)
    } else {
        format!(
            "Q:psi:{},{},{},{}",
            format_decimal(round9(a0.re)),
            format_decimal(round9(a0.im)),
            format_decimal(round9(a1.re)),
            format_decimal(round9(a1.im))
        )
    }
}

/// The λ of a trial at one stage.
#[derive(Debug, Clone)]
pub enum OnticState {
    /// No values assigned at all.
    Empty,
    /// Outcome values for some (possibly all) observables.
    Assignment(BTreeMap<Observable, Outcome>),
    /// One or more local quantum states, ordered by subsystem.
    Quantum(Vec<LocalQuantum>),
    /// A classical symbol such as a coin face or a trial subject class.
    Classical(String),
}

impl OnticState {
    pub fn assignment<I: IntoIterator<Item = (Observable, Outcome)>>(items: I) -> OnticState {
        OnticState::Assignment(items.into_iter().collect())
    }

    pub fn classical(symbol: impl Into<String>) -> Result<OnticState> {
        let symbol = symbol.into();
        let ok = !symbol.is_empty()
            && symbol != "_"
            && symbol.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid classical symbol {symbol:?}")));
        }
        Ok(OnticState::Classical(symbol))
    }

    /// Observables that carry a value in this state.
    pub fn definedness(&self) -> BTreeSet<Observable> {
        match self {
            OnticState::Assignment(map) => map.keys().copied().collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn value_of(&self, obs: &Observable) -> Option<Outcome> {
        match self {
            OnticState::Assignment(map) => map.get(obs).copied(),
            _ => None,
        }
    }

    /// Deterministic, injective token for this state.
    pub fn canonical_encoding(&self) -> String {
        match self {
            OnticState::Empty => EMPTY_TOKEN.to_string(),
            OnticState::Assignment(map) if map.is_empty() => EMPTY_TOKEN.to_string(),
            OnticState::Assignment(map) => map
                .iter()
                .map(|(obs, v)| format!("{}:{}", obs.token(), v.sign()))
                .collect::<Vec<_>>()
                .join("|"),
            OnticState::Quantum(parts) => parts.iter().map(LocalQuantum::encode).collect::<Vec<_>>().join("|"),
            OnticState::Classical(s) => s.clone(),
        }
    }

    /// Inverse of [`canonical_encoding`](Self::canonical_encoding).
    pub fn parse_encoding(token: &str) -> Result<OnticState> {
        if token == EMPTY_TOKEN {
            return Ok(OnticState::Empty);
        }
        if token.starts_with("Q:") {
            let parts = token.split('|').map(LocalQuantum::decode).collect::<Result<Vec<_>>>()?;
            return Ok(OnticState::Quantum(parts));
        }
        if token.contains(':') {
            let bad = || Error::InvalidParameter(format!("malformed assignment token {token:?}"));
            let mut map = BTreeMap::new();
            for item in token.split('|') {
                let (obs, sign) = item.rsplit_once(':').ok_or_else(bad)?;
                let setting = Setting::parse_token(obs)?;
                let observable = setting.observable().ok_or_else(bad)?;
                let outcome = Outcome::from_sign(sign).ok_or_else(bad)?;
                if map.insert(observable, outcome).is_some() {
                    return Err(bad());
                }
            }
            return Ok(OnticState::Assignment(map));
        }
        OnticState::classical(token)
    }
}

impl PartialEq for OnticState {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_encoding() == other.canonical_encoding()
    }
}

/// Where in a model's causal or temporal sequence a snapshot was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Preparation,
    SourceTemporal,
    CausalStep1,
    CausalStep3,
    PostMeasurement,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Preparation,
        Stage::SourceTemporal,
        Stage::CausalStep1,
        Stage::CausalStep3,
        Stage::PostMeasurement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preparation => "preparation",
            Stage::SourceTemporal => "source-temporal",
            Stage::CausalStep1 => "causal-step-1",
            Stage::CausalStep3 => "causal-step-3",
            Stage::PostMeasurement => "post-measurement",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSnapshot {
    pub stage: Stage,
    pub state: OnticState,
}

pub(crate) fn round9(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn format_decimal(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// `"-12.375"` → `(-12375, 1000)`.
fn parse_decimal(text: &str) -> Option<(i64, i64)> {
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let digits = format!("{int}{frac}");
    let mut num: i64 = digits.parse().ok()?;
    if neg {
        num = -num;
    }
    let den = 10i64.checked_pow(frac.len() as u32)?;
    Some((num, den))
}

fn parse_floats(text: &str) -> Option<Vec<f64>> {
    text.split(',').map(|v| v.parse::<f64>().ok()).collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(wing: Wing, deg: &str) -> Observable {
        Observable {
            wing,
            angle: Angle::from_degrees_str(deg).unwrap(),
        }
    }

    #[test]
    fn assignment_encoding_sorts_by_wing_then_angle() {
        let state = OnticState::assignment([
            (obs(Wing::B, "67.5"), Outcome::Minus),
            (obs(Wing::A, "45"), Outcome::Minus),
            (obs(Wing::B, "22.5"), Outcome::Plus),
            (obs(Wing::A, "0"), Outcome::Plus),
        ]);
        assert_eq!(state.canonical_encoding(), "A0:+|A45:-|B22.5:+|B67.5:-");
    }

    #[test]
    fn empty_state_encodes_as_empty_set() {
        assert_eq!(OnticState::Empty.canonical_encoding(), "∅");
        assert!(OnticState::Empty.definedness().is_empty());
    }

    #[test]
    fn partner_state_token() {
        let one = QubitState::basis(1);
        assert_eq!(OnticState::Quantum(vec![LocalQuantum::Pure(one)]).canonical_encoding(), "Q:basis0:eig-");
        let minus_zero = QubitState::basis(0).scaled(-1.0);
        assert_eq!(OnticState::Quantum(vec![LocalQuantum::Pure(minus_zero)]).canonical_encoding(), "Q:basis0:eig+");
    }

    #[test]
    fn angles_canonicalize_mod_pi() {
        let a: Angle = "9pi/8".parse().unwrap();
        assert_eq!(a.pi_fraction(), Some((1, 8)));
        assert_eq!(a, "pi/8".parse().unwrap());
        assert_eq!(Angle::from_radians(PI - 1e-13).unwrap().radians(), 0.0);
        assert_eq!("202.5deg".parse::<Angle>().unwrap().token(), "22.5");
    }

    #[test]
    fn angle_text_forms() {
        let a: Angle = "0.3π".parse().unwrap();
        assert!((a.radians() - 0.942_477_796_076_938).abs() < 1e-12);
        assert_eq!("3*pi/8".parse::<Angle>().unwrap(), "3pi/8".parse().unwrap());
        assert_eq!("-pi/4".parse::<Angle>().unwrap().token(), "135");
        assert!((("0.5".parse::<Angle>().unwrap()).radians() - 0.5).abs() < 1e-15);
        assert!("pi/0".parse::<Angle>().is_err());
        assert!("abc".parse::<Angle>().is_err());
        assert!("1e3deg".parse::<Angle>().is_err());
    }

    #[test]
    fn setting_tokens_round_trip() {
        for tok in ["A0", "B22.5", "A#1", "B67.5"] {
            assert_eq!(Setting::parse_token(tok).unwrap().token(), tok);
        }
        let j = JointSetting::parse_token("A0×B22.5").unwrap();
        assert_eq!(j.token(), "A0×B22.5");
        assert_eq!(JointSetting::parse_token("A0xB22.5").unwrap(), j);
        assert!(JointSetting::parse_token("B0×A22.5").is_err());
    }

    #[test]
    fn encodings_parse_back() {
        for tok in [
            "∅",
            "A0:+|A45:-|B22.5:+|B67.5:-",
            "Q:mixed",
            "Q:basis0:eig-",
            "Q:mixed|Q:basis45:eig+",
            "responder",
            "B22.5:-",
        ] {
            let state = OnticState::parse_encoding(tok).unwrap();
            assert_eq!(state.canonical_encoding(), tok);
        }
        assert!(OnticState::parse_encoding("A0:+|A0:-").is_err());
        assert!(OnticState::classical("has space").is_err());
    }
}

//! Weighted 14-parameter patient prioritisation.
//!
//! Each parameter is mapped to a risk in `[0, 1]` by a piecewise-linear rule
//! from [`RiskModel`], multiplied by its weight from [`WeightTable`], and the
//! products are summed. Height and weight are scored through BMI, each
//! carrying half of the BMI risk. Both tables live in a versioned JSON
//! config ([`TriageConfig`]) so they can be recalibrated without code
//! changes.

mod store;

pub use store::{PatientStore, UpsertOutcome};

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("unknown parameter: {0}")]
    UnknownParameter(String),
    #[error("{0} is scored through bmi; use risk_level(\"bmi\", ...)")]
    DerivedParameter(Parameter),
    #[error("invalid value {value} for {param}")]
    InvalidValue { param: String, value: f64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("unsupported config schema_version {0}")]
    UnsupportedSchema(u32),
    #[error("duplicate patient id: {0}")]
    DuplicateId(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("missing criteria: search needs a name or an age")]
    MissingCriteria,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The fourteen scored parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Age,
    Gender,
    Height,
    Weight,
    HeartRate,
    RespiratoryRate,
    Spo2,
    BodyTemp,
    Cough,
    SoreThroat,
    BreathingDifficulty,
    Fatigue,
    PreexistingConditions,
    Pregnancy,
}

impl Parameter {
    pub const ALL: [Parameter; 14] = [
        Parameter::Age,
        Parameter::Gender,
        Parameter::Height,
        Parameter::Weight,
        Parameter::HeartRate,
        Parameter::RespiratoryRate,
        Parameter::Spo2,
        Parameter::BodyTemp,
        Parameter::Cough,
        Parameter::SoreThroat,
        Parameter::BreathingDifficulty,
        Parameter::Fatigue,
        Parameter::PreexistingConditions,
        Parameter::Pregnancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Age => "age",
            Parameter::Gender => "gender",
            Parameter::Height => "height",
            Parameter::Weight => "weight",
            Parameter::HeartRate => "heart_rate",
            Parameter::RespiratoryRate => "respiratory_rate",
            Parameter::Spo2 => "spo2",
            Parameter::BodyTemp => "body_temp",
            Parameter::Cough => "cough",
            Parameter::SoreThroat => "sore_throat",
            Parameter::BreathingDifficulty => "breathing_difficulty",
            Parameter::Fatigue => "fatigue",
            Parameter::PreexistingConditions => "preexisting_conditions",
            Parameter::Pregnancy => "pregnancy",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            Parameter::Cough
                | Parameter::SoreThroat
                | Parameter::BreathingDifficulty
                | Parameter::Fatigue
                | Parameter::PreexistingConditions
                | Parameter::Pregnancy
        )
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| TriageError::UnknownParameter(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Other,
}

fn epoch() -> DateTime<Utc> {
    DateTime::UNIX_EPOCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub name: String,
    /// Years.
    pub age: u32,
    pub gender: Gender,
    /// Centimetres.
    pub height: f64,
    /// Kilograms.
    pub weight: f64,
    pub heart_rate: f64,
    pub respiratory_rate: f64,
    pub spo2: f64,
    /// Degrees Celsius.
    pub body_temp: f64,
    pub cough: u8,
    pub sore_throat: u8,
    pub breathing_difficulty: u8,
    pub fatigue: u8,
    pub preexisting_conditions: u8,
    pub pregnancy: u8,
    #[serde(default)]
    pub prescription_note: String,
    #[serde(default = "epoch")]
    pub created_at: DateTime<Utc>,
    #[serde(default = "epoch")]
    pub updated_at: DateTime<Utc>,
}

impl PatientRecord {
    /// A healthy adult with every risk at zero.
    pub fn healthy(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            age: 30,
            gender: Gender::Other,
            height: 170.0,
            weight: 65.0,
            heart_rate: 72.0,
            respiratory_rate: 16.0,
            spo2: 98.0,
            body_temp: 36.8,
            cough: 0,
            sore_throat: 0,
            breathing_difficulty: 0,
            fatigue: 0,
            preexisting_conditions: 0,
            pregnancy: 0,
            prescription_note: String::new(),
            created_at: epoch(),
            updated_at: epoch(),
        }
    }

    pub fn validate(&self) -> Result<(), TriageError> {
        let bad = |msg: String| Err(TriageError::InvalidRecord(msg));
        if self.id.trim().is_empty() {
            return bad("id must not be empty".into());
        }
        if self.age > 130 {
            return bad(format!("age {} outside [0, 130]", self.age));
        }
        let ranges = [
            ("height", self.height, 30.0, 260.0),
            ("weight", self.weight, 1.0, 400.0),
            ("spo2", self.spo2, 0.0, 100.0),
            ("body_temp", self.body_temp, 30.0, 45.0),
            ("heart_rate", self.heart_rate, 0.0, 350.0),
            ("respiratory_rate", self.respiratory_rate, 0.0, 120.0),
        ];
        for (name, v, lo, hi) in ranges {
            if !(v.is_finite() && v >= lo && v <= hi) {
                return bad(format!("{name} {v} outside [{lo}, {hi}]"));
            }
        }
        for p in Parameter::ALL.into_iter().filter(|p| p.is_binary()) {
            let v = self.binary(p);
            if v > 1 {
                return bad(format!("{p} must be 0 or 1, got {v}"));
            }
        }
        Ok(())
    }

    fn binary(&self, p: Parameter) -> u8 {
        match p {
            Parameter::Cough => self.cough,
            Parameter::SoreThroat => self.sore_throat,
            Parameter::BreathingDifficulty => self.breathing_difficulty,
            Parameter::Fatigue => self.fatigue,
            Parameter::PreexistingConditions => self.preexisting_conditions,
            Parameter::Pregnancy => self.pregnancy,
            _ => unreachable!("{p} is not binary"),
        }
    }

    /// kg / m^2.
    pub fn bmi(&self) -> f64 {
        let m = self.height / 100.0;
        self.weight / (m * m)
    }
}

/// Linear ramp from risk 0 at `zero_at` to risk 1 at `one_at`, clamped.
/// Either direction is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub zero_at: f64,
    pub one_at: f64,
}

impl Ramp {
    pub fn eval(&self, v: f64) -> f64 {
        ((v - self.zero_at) / (self.one_at - self.zero_at)).clamp(0.0, 1.0)
    }
}

/// Zero risk inside `[low_zero, high_zero]`, ramping to 1 at `low_one` below
/// and `high_one` above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low_one: f64,
    pub low_zero: f64,
    pub high_zero: f64,
    pub high_one: f64,
}

impl Band {
    pub fn eval(&self, v: f64) -> f64 {
        if v < self.low_zero {
            ((self.low_zero - v) / (self.low_zero - self.low_one)).clamp(0.0, 1.0)
        } else if v > self.high_zero {
            ((v - self.high_zero) / (self.high_one - self.high_zero)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub age: Ramp,
    pub spo2: Ramp,
    pub heart_rate: Band,
    pub respiratory_rate: Band,
    pub body_temp: Ramp,
    pub bmi: Band,
}

impl Default for RiskModel {
    fn default() -> Self {
        Self {
            age: Ramp {
                zero_at: 40.0,
                one_at: 80.0,
            },
            spo2: Ramp {
                zero_at: 95.0,
                one_at: 85.0,
            },
            heart_rate: Band {
                low_one: 40.0,
                low_zero: 60.0,
                high_zero: 100.0,
                high_one: 140.0,
            },
            respiratory_rate: Band {
                low_one: 6.0,
                low_zero: 12.0,
                high_zero: 20.0,
                high_one: 30.0,
            },
            body_temp: Ramp {
                zero_at: 37.2,
                one_at: 39.5,
            },
            bmi: Band {
                low_one: 15.0,
                low_zero: 18.5,
                high_zero: 30.0,
                high_one: 40.0,
            },
        }
    }
}

impl RiskModel {
    /// Risk for a single named input. Accepts every parameter name except
    /// `height` and `weight`, plus `bmi`. Gender carries no risk.
    pub fn risk_level(&self, name: &str, value: f64) -> Result<f64, TriageError> {
        if !value.is_finite() {
            return Err(TriageError::InvalidValue {
                param: name.to_string(),
                value,
            });
        }
        if name == "bmi" {
            return Ok(self.bmi.eval(value));
        }
        let param: Parameter = name.parse()?;
        if param.is_binary() {
            return if value == 0.0 || value == 1.0 {
                Ok(value)
            } else {
                Err(TriageError::InvalidValue {
                    param: name.to_string(),
                    value,
                })
            };
        }
        Ok(match param {
            Parameter::Age => self.age.eval(value),
            Parameter::Gender => 0.0,
            Parameter::HeartRate => self.heart_rate.eval(value),
            Parameter::RespiratoryRate => self.respiratory_rate.eval(value),
            Parameter::Spo2 => self.spo2.eval(value),
            Parameter::BodyTemp => self.body_temp.eval(value),
            Parameter::Height | Parameter::Weight => {
                return Err(TriageError::DerivedParameter(param))
            }
            _ => unreachable!("binary parameters handled above"),
        })
    }

    /// Risk of every parameter for a record.
    pub fn risks(&self, r: &PatientRecord) -> BTreeMap<Parameter, f64> {
        let half_bmi = 0.5 * self.bmi.eval(r.bmi());
        Parameter::ALL
            .into_iter()
            .map(|p| {
                let risk = match p {
                    Parameter::Age => self.age.eval(f64::from(r.age)),
                    Parameter::Gender => 0.0,
                    Parameter::Height | Parameter::Weight => half_bmi,
                    Parameter::HeartRate => self.heart_rate.eval(r.heart_rate),
                    Parameter::RespiratoryRate => self.respiratory_rate.eval(r.respiratory_rate),
                    Parameter::Spo2 => self.spo2.eval(r.spo2),
                    Parameter::BodyTemp => self.body_temp.eval(r.body_temp),
                    binary => f64::from(r.binary(binary)),
                };
                (p, risk)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightTable(pub BTreeMap<Parameter, f64>);

impl Default for WeightTable {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl WeightTable {
    pub fn uniform(w: f64) -> Self {
        Self(Parameter::ALL.into_iter().map(|p| (p, w)).collect())
    }

    /// All weights zero except the given ones.
    pub fn only(pairs: &[(Parameter, f64)]) -> Self {
        let mut t = Self::uniform(0.0);
        for &(p, w) in pairs {
            t.0.insert(p, w);
        }
        t
    }

    pub fn get(&self, p: Parameter) -> f64 {
        self.0.get(&p).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self(self.0.iter().map(|(&p, &w)| (p, w * k)).collect())
    }

    pub fn validate(&self) -> Result<(), TriageError> {
        for p in Parameter::ALL {
            match self.0.get(&p) {
                None => return Err(TriageError::InvalidWeights(format!("missing {p}"))),
                Some(w) if !(w.is_finite() && *w >= 0.0) => {
                    return Err(TriageError::InvalidWeights(format!("{p} = {w}")))
                }
                _ => {}
            }
        }
        if self.0.values().sum::<f64>() <= 0.0 {
            return Err(TriageError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(())
    }
}

/// Weights plus risk mapping, as stored in the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageConfig {
    pub schema_version: u32,
    pub weights: WeightTable,
    #[serde(default)]
    pub risk: RiskModel,
}

impl Default for TriageConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            weights: WeightTable::default(),
            risk: RiskModel::default(),
        }
    }
}

impl TriageConfig {
    pub fn with_weights(weights: WeightTable) -> Self {
        Self {
            weights,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TriageError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(TriageError::UnsupportedSchema(self.schema_version));
        }
        self.weights.validate()
    }

    pub fn from_json(text: &str) -> Result<Self, TriageError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TriageError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageScore {
    pub patient_id: String,
    pub score: f64,
    /// Weighted risk per parameter; each lies in `[0, weight]`.
    pub contributions: BTreeMap<Parameter, f64>,
}

pub fn score(record: &PatientRecord, config: &TriageConfig) -> Result<TriageScore, TriageError> {
    record.validate()?;
    config.validate()?;
    let contributions: BTreeMap<Parameter, f64> = config
        .risk
        .risks(record)
        .into_iter()
        .map(|(p, r)| (p, config.weights.get(p) * r))
        .collect();
    Ok(TriageScore {
        patient_id: record.id.clone(),
        score: contributions.values().sum(),
        contributions,
    })
}

/// Highest score first; ties go to the older record, then the smaller id.
pub fn rank(
    records: &[PatientRecord],
    config: &TriageConfig,
) -> Result<Vec<TriageScore>, TriageError> {
    Ok(rank_records(records, config)?
        .into_iter()
        .map(|r| r.triage)
        .collect())
}

/// A record with its score, as listed on the triage board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPatient {
    pub patient: PatientRecord,
    pub triage: TriageScore,
}

pub fn rank_records(
    records: &[PatientRecord],
    config: &TriageConfig,
) -> Result<Vec<RankedPatient>, TriageError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(TriageError::DuplicateId(r.id.clone()));
        }
    }
    let mut ranked = records
        .iter()
        .map(|r| {
            Ok(RankedPatient {
                triage: score(r, config)?,
                patient: r.clone(),
            })
        })
        .collect::<Result<Vec<_>, TriageError>>()?;
    ranked.sort_by(rank_order);
    Ok(ranked)
}

fn rank_order(a: &RankedPatient, b: &RankedPatient) -> Ordering {
    b.triage
        .score
        .total_cmp(&a.triage.score)
        .then_with(|| a.patient.created_at.cmp(&b.patient.created_at))
        .then_with(|| a.patient.id.cmp(&b.patient.id))
}

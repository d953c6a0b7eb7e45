//! Adapters between reliability levels and the per-component combination of
//! fault types.
//!
//! Measures carry a tag and a time unit. Every adapter kind has a fixed input
//! and output tag, so a chain can be checked statically before any analysis
//! runs (see [`check_chain`]).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::aging::{self, AgingError, AgingParams};
use crate::reliability::ReliabilityFunction;
use crate::softerror::{self, SoftErrorError};
use crate::thermal::{self, PowerTrace, TemperatureProfile, ThermalError, ThermalParams};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error)]
pub enum CompositionError {
    #[error("{adapter} expects {expected} [{expected_unit}], got {found} [{found_unit}]")]
    TagMismatch {
        adapter: &'static str,
        expected: MeasureTag,
        expected_unit: TimeUnit,
        found: MeasureTag,
        found_unit: TimeUnit,
    },
    #[error("{adapter} needs {what}")]
    MissingContext {
        adapter: &'static str,
        what: &'static str,
    },
    #[error("invalid {tag} measure: {message}")]
    BadMeasure { tag: MeasureTag, message: String },
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Aging(#[from] AgingError),
    #[error(transparent)]
    SoftError(#[from] SoftErrorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasureTag {
    PowerTrace,
    TemperatureProfile,
    FailureRate,
    FitRate,
    Derating,
    Reliability,
}

impl fmt::Display for MeasureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    Hours,
}

impl TimeUnit {
    fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Hours => SECONDS_PER_HOUR,
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeUnit::Seconds => "seconds",
            TimeUnit::Hours => "hours",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureValue {
    PowerTrace(PowerTrace),
    TemperatureProfile(TemperatureProfile),
    /// Failures per `time_unit`.
    FailureRate(f64),
    /// Derated FIT (failures per 10^9 hours).
    FitRate(f64),
    Derating(f64),
    Reliability(ReliabilityFunction),
}

/// A tagged value exchanged between analysis levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    value: MeasureValue,
    time_unit: TimeUnit,
}

impl Measure {
    pub fn new(value: MeasureValue, time_unit: TimeUnit) -> Result<Self, CompositionError> {
        let m = Self { value, time_unit };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), CompositionError> {
        let bad = |message: String| {
            Err(CompositionError::BadMeasure {
                tag: self.tag(),
                message,
            })
        };
        match &self.value {
            MeasureValue::PowerTrace(p) => p.validate().or_else(|e| bad(e.to_string())),
            MeasureValue::TemperatureProfile(p) => {
                if p.samples.is_empty() || p.samples.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    bad("temperatures must be finite and > 0 K".into())
                } else {
                    Ok(())
                }
            }
            MeasureValue::FailureRate(l) if !(l.is_finite() && *l > 0.0) => {
                bad(format!("rate {l} must be > 0"))
            }
            MeasureValue::FitRate(f) if !(f.is_finite() && *f >= 0.0) => {
                bad(format!("FIT {f} must be >= 0"))
            }
            MeasureValue::Derating(d) if !(0.0..=1.0).contains(d) => {
                bad(format!("derating {d} outside [0, 1]"))
            }
            MeasureValue::Reliability(r) => r.validate().or_else(|e| bad(e.to_string())),
            _ => Ok(()),
        }
    }

    pub fn power_trace(trace: PowerTrace) -> Result<Self, CompositionError> {
        Self::new(MeasureValue::PowerTrace(trace), TimeUnit::Seconds)
    }

    pub fn failure_rate(rate: f64, unit: TimeUnit) -> Result<Self, CompositionError> {
        Self::new(MeasureValue::FailureRate(rate), unit)
    }

    pub fn fit_rate(fit: f64) -> Result<Self, CompositionError> {
        Self::new(MeasureValue::FitRate(fit), TimeUnit::Hours)
    }

    pub fn reliability(r: ReliabilityFunction) -> Result<Self, CompositionError> {
        Self::new(MeasureValue::Reliability(r), TimeUnit::Hours)
    }

    pub fn tag(&self) -> MeasureTag {
        match self.value {
            MeasureValue::PowerTrace(_) => MeasureTag::PowerTrace,
            MeasureValue::TemperatureProfile(_) => MeasureTag::TemperatureProfile,
            MeasureValue::FailureRate(_) => MeasureTag::FailureRate,
            MeasureValue::FitRate(_) => MeasureTag::FitRate,
            MeasureValue::Derating(_) => MeasureTag::Derating,
            MeasureValue::Reliability(_) => MeasureTag::Reliability,
        }
    }

    pub fn time_unit(&self) -> TimeUnit {
        self.time_unit
    }

    pub fn value(&self) -> &MeasureValue {
        &self.value
    }

    pub fn into_reliability(self) -> Option<ReliabilityFunction> {
        match self.value {
            MeasureValue::Reliability(r) => Some(r),
            _ => None,
        }
    }
}

/// Declarative transformation between adjacent levels.
#[derive(Debug, Clone, PartialEq)]
pub enum Adapter {
    PowerToTemperature,
    TemperatureToFailureRate,
    /// Weibull with the given shape, or the component's aging shape when
    /// absent.
    FailureRateToReliability {
        beta: Option<f64>,
    },
    FitToReliability,
    TimeUnitBridge {
        from: TimeUnit,
        to: TimeUnit,
    },
    CompetingRisksCombine,
}

/// Input or output signature of an adapter: a tag and, where the adapter
/// cares, a time unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Port {
    pub tag: MeasureTag,
    pub unit: TimeUnit,
}

impl Port {
    pub const fn new(tag: MeasureTag, unit: TimeUnit) -> Self {
        Self { tag, unit }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.tag, self.unit)
    }
}

impl Adapter {
    pub fn name(&self) -> &'static str {
        match self {
            Adapter::PowerToTemperature => "PowerToTemperature",
            Adapter::TemperatureToFailureRate => "TemperatureToFailureRate",
            Adapter::FailureRateToReliability { .. } => "FailureRateToReliability",
            Adapter::FitToReliability => "FitToReliability",
            Adapter::TimeUnitBridge { .. } => "TimeUnitBridge",
            Adapter::CompetingRisksCombine => "CompetingRisksCombine",
        }
    }

    pub fn input(&self) -> Port {
        use MeasureTag::*;
        use TimeUnit::*;
        match self {
            Adapter::PowerToTemperature => Port::new(PowerTrace, Seconds),
            Adapter::TemperatureToFailureRate => Port::new(TemperatureProfile, Seconds),
            Adapter::FailureRateToReliability { .. } => Port::new(FailureRate, Hours),
            Adapter::FitToReliability => Port::new(FitRate, Hours),
            Adapter::TimeUnitBridge { from, .. } => Port::new(FailureRate, *from),
            Adapter::CompetingRisksCombine => Port::new(Reliability, Hours),
        }
    }

    pub fn output(&self) -> Port {
        use MeasureTag::*;
        use TimeUnit::*;
        match self {
            Adapter::PowerToTemperature => Port::new(TemperatureProfile, Seconds),
            Adapter::TemperatureToFailureRate => Port::new(FailureRate, Hours),
            Adapter::FailureRateToReliability { .. } => Port::new(Reliability, Hours),
            Adapter::FitToReliability => Port::new(Reliability, Hours),
            Adapter::TimeUnitBridge { to, .. } => Port::new(FailureRate, *to),
            Adapter::CompetingRisksCombine => Port::new(Reliability, Hours),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum AdapterRepr {
    PowerToTemperature,
    TemperatureToFailureRate,
    FailureRateToReliability {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    FitToReliability,
    TimeUnitBridge {
        from: TimeUnit,
        to: TimeUnit,
    },
    CompetingRisksCombine,
}

impl Serialize for Adapter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            Adapter::FailureRateToReliability { beta: Some(b) } => {
                AdapterRepr::FailureRateToReliability { beta: Some(*b) }
            }
            Adapter::TimeUnitBridge { from, to } => AdapterRepr::TimeUnitBridge {
                from: *from,
                to: *to,
            },
            other => return s.serialize_str(other.name()),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Adapter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        let repr: AdapterRepr = match v {
            serde_json::Value::String(name) => {
                serde_json::from_value(serde_json::json!({ "kind": name }))
            }
            serde_json::Value::Object(map) => {
                let allowed: &[&str] = match map.get("kind").and_then(|k| k.as_str()) {
                    Some("FailureRateToReliability") => &["kind", "beta"],
                    Some("TimeUnitBridge") => &["kind", "from", "to"],
                    _ => &["kind"],
                };
                if let Some(extra) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
                    return Err(D::Error::custom(format!("unknown adapter field `{extra}`")));
                }
                serde_json::from_value(serde_json::Value::Object(map))
            }
            other => serde_json::from_value(other),
        }
        .map_err(D::Error::custom)?;
        Ok(match repr {
            AdapterRepr::PowerToTemperature => Adapter::PowerToTemperature,
            AdapterRepr::TemperatureToFailureRate => Adapter::TemperatureToFailureRate,
            AdapterRepr::FailureRateToReliability { beta } => {
                if let Some(b) = beta {
                    if !(b.is_finite() && b > 0.0) {
                        return Err(D::Error::custom(format!("beta must be > 0, got {b}")));
                    }
                }
                Adapter::FailureRateToReliability { beta }
            }
            AdapterRepr::FitToReliability => Adapter::FitToReliability,
            AdapterRepr::TimeUnitBridge { from, to } => Adapter::TimeUnitBridge { from, to },
            AdapterRepr::CompetingRisksCombine => Adapter::CompetingRisksCombine,
        })
    }
}

/// Component data an adapter may draw on.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdapterContext<'a> {
    pub thermal: Option<&'a ThermalParams>,
    pub aging: Option<&'a AgingParams>,
    /// Weibull shape used when neither the adapter nor the aging payload
    /// gives one.
    pub default_beta: Option<f64>,
    /// The other fault type's reliability, for `CompetingRisksCombine`.
    pub partner: Option<&'a ReliabilityFunction>,
}

fn tag_mismatch(adapter: &Adapter, m: &Measure) -> CompositionError {
    let want = adapter.input();
    CompositionError::TagMismatch {
        adapter: adapter.name(),
        expected: want.tag,
        expected_unit: want.unit,
        found: m.tag(),
        found_unit: m.time_unit,
    }
}

pub fn apply_adapter(
    adapter: &Adapter,
    m: &Measure,
    ctx: &AdapterContext<'_>,
) -> Result<Measure, CompositionError> {
    let want = adapter.input();
    if m.tag() != want.tag || m.time_unit != want.unit {
        return Err(tag_mismatch(adapter, m));
    }
    let missing = |what| CompositionError::MissingContext {
        adapter: adapter.name(),
        what,
    };
    let value = match (adapter, &m.value) {
        (Adapter::PowerToTemperature, MeasureValue::PowerTrace(trace)) => {
            let params = ctx.thermal.ok_or_else(|| missing("thermal parameters"))?;
            MeasureValue::TemperatureProfile(thermal::simulate_temperature(trace, params)?)
        }
        (Adapter::TemperatureToFailureRate, MeasureValue::TemperatureProfile(profile)) => {
            let params = ctx.aging.ok_or_else(|| missing("aging parameters"))?;
            MeasureValue::FailureRate(aging::failure_rate_from_profile(profile, params)?)
        }
        (Adapter::FailureRateToReliability { beta }, MeasureValue::FailureRate(rate)) => {
            let beta = beta
                .or_else(|| ctx.aging.and_then(|a| a.weibull_beta))
                .or(ctx.default_beta)
                .ok_or_else(|| missing("a Weibull shape"))?;
            MeasureValue::Reliability(aging::weibull_from_mttf(1.0 / rate, beta)?)
        }
        (Adapter::FitToReliability, MeasureValue::FitRate(fit)) => MeasureValue::Reliability(
            softerror::exponential_reliability(softerror::fit_to_rate(*fit))?,
        ),
        (Adapter::TimeUnitBridge { from, to }, MeasureValue::FailureRate(rate)) => {
            // rate per `from` -> rate per `to`
            MeasureValue::FailureRate(rate * to.seconds() / from.seconds())
        }
        (Adapter::CompetingRisksCombine, MeasureValue::Reliability(r)) => {
            let partner = ctx
                .partner
                .ok_or_else(|| missing("the other fault type's reliability"))?;
            MeasureValue::Reliability(combine_competing_risks(r.clone(), partner.clone()))
        }
        _ => return Err(tag_mismatch(adapter, m)),
    };
    Measure::new(value, adapter.output().unit)
}

/// Runs a chain, returning every intermediate measure (the input first).
pub fn apply_chain(
    chain: &[Adapter],
    input: Measure,
    ctx: &AdapterContext<'_>,
) -> Result<Vec<Measure>, CompositionError> {
    let mut trail = vec![input];
    for adapter in chain {
        let next = apply_adapter(adapter, trail.last().unwrap(), ctx)?;
        trail.push(next);
    }
    Ok(trail)
}

/// The component survives iff neither fault type has struck, with the two
/// modes independent.
pub fn combine_competing_risks(
    r_perm: ReliabilityFunction,
    r_trans: ReliabilityFunction,
) -> ReliabilityFunction {
    ReliabilityFunction::Product {
        factors: vec![r_perm, r_trans],
    }
}

/// Where in a chain a tag stops lining up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMismatch {
    /// Index of the adapter whose input does not match; `chain.len()` when
    /// the chain's final output differs from the target.
    pub position: usize,
    pub expected: Port,
    pub found: Port,
}

/// Statically checks that `chain` maps `source` to `target`.
pub fn check_chain(source: Port, chain: &[Adapter], target: Port) -> Option<ChainMismatch> {
    let mut current = source;
    for (position, adapter) in chain.iter().enumerate() {
        let want = adapter.input();
        if want != current {
            return Some(ChainMismatch {
                position,
                expected: want,
                found: current,
            });
        }
        current = adapter.output();
    }
    (current != target).then_some(ChainMismatch {
        position: chain.len(),
        expected: target,
        found: current,
    })
}

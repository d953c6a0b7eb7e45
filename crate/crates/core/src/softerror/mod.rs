//! Transient-fault leaf analysis: logic-masking derating and SER.

mod inject;
mod netlist;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use inject::{
    exhaustive_derating, inject_campaign, wilson_interval, z_score, ExhaustiveResult,
    InjectionResult, Workload, MAX_EXHAUSTIVE_INPUTS,
};
pub use netlist::{Gate, GateKind, Netlist, NetlistError};

use crate::reliability::ReliabilityFunction;

/// FIT counts failures per 10^9 device-hours.
pub const FIT_HOURS: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoftErrorError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("campaign needs at least one trial")]
    ZeroTrials,
    #[error("workload contains no vectors")]
    EmptyWorkload,
    #[error("workload line {line}: {message}")]
    Workload { line: usize, message: String },
    #[error("{inputs} inputs exceed the exhaustive limit of {max}")]
    TooManyInputs { inputs: usize, max: usize },
    #[error("FIT for '{node}' must be finite and >= 0, got {value}")]
    BadFit { node: String, value: f64 },
    #[error("no derating given for node '{0}' with nonzero FIT")]
    MissingDerating(String),
    #[error("derating for '{node}' must lie in [0, 1], got {value}")]
    BadDerating { node: String, value: f64 },
    #[error("failure rate must be finite and >= 0, got {0}")]
    BadRate(f64),
}

/// Raw (un-derated) soft-error rates per net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerParams {
    #[serde(default)]
    pub fit_per_node: BTreeMap<String, f64>,
    #[serde(default)]
    pub default_fit: f64,
    /// Optional workload file (one binary vector per line).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
}

impl SerParams {
    pub fn validate(&self) -> Result<(), SoftErrorError> {
        let check = |node: &str, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(SoftErrorError::BadFit {
                    node: node.to_string(),
                    value,
                })
            }
        };
        check("<default>", self.default_fit)?;
        self.fit_per_node.iter().try_for_each(|(n, &v)| check(n, v))
    }

    pub fn fit(&self, node: &str) -> f64 {
        self.fit_per_node
            .get(node)
            .copied()
            .unwrap_or(self.default_fit)
    }

    /// Nets of `netlist` with nonzero raw FIT, in net order. Fails if a FIT
    /// entry names a net the netlist does not have.
    pub fn active_nodes<'a>(&self, netlist: &'a Netlist) -> Result<Vec<&'a str>, SoftErrorError> {
        self.validate()?;
        if let Some(unknown) = self
            .fit_per_node
            .keys()
            .find(|k| netlist.net_index(k).is_none())
        {
            return Err(SoftErrorError::UnknownNode(unknown.clone()));
        }
        Ok(netlist
            .net_names()
            .iter()
            .map(String::as_str)
            .filter(|n| self.fit(n) > 0.0)
            .collect())
    }
}

/// Σ FIT(node) · derating(node), still in FIT units.
pub fn derated_fit(
    netlist: &Netlist,
    ser: &SerParams,
    deratings: &BTreeMap<String, f64>,
) -> Result<f64, SoftErrorError> {
    let mut total = 0.0;
    for node in ser.active_nodes(netlist)? {
        let d = *deratings
            .get(node)
            .ok_or_else(|| SoftErrorError::MissingDerating(node.to_string()))?;
        if !(0.0..=1.0).contains(&d) {
            return Err(SoftErrorError::BadDerating {
                node: node.to_string(),
                value: d,
            });
        }
        total += ser.fit(node) * d;
    }
    Ok(total)
}

pub fn fit_to_rate(fit: f64) -> f64 {
    fit / FIT_HOURS
}

/// Per-hour transient failure rate of a component.
pub fn transient_failure_rate(
    netlist: &Netlist,
    ser: &SerParams,
    deratings: &BTreeMap<String, f64>,
) -> Result<f64, SoftErrorError> {
    Ok(fit_to_rate(derated_fit(netlist, ser, deratings)?))
}

/// Memoryless survival for a constant upset rate; a zero rate gives the
/// constant-1 function.
pub fn exponential_reliability(lambda: f64) -> Result<ReliabilityFunction, SoftErrorError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SoftErrorError::BadRate(lambda));
    }
    if lambda == 0.0 {
        return Ok(ReliabilityFunction::always_one());
    }
    ReliabilityFunction::exponential(lambda).map_err(|_| SoftErrorError::BadRate(lambda))
}

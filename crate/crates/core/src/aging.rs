//! Electromigration aging: temperature profile to permanent-fault reliability.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::reliability::{ReliabilityError, ReliabilityFunction};
use crate::thermal::TemperatureProfile;

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV_PER_K: f64 = 8.617e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgingError {
    #[error("temperature must be finite and > 0 K, got {0}")]
    BadTemperature(f64),
    #[error("aging parameter {name} out of range: {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("temperature profile is empty")]
    EmptyProfile,
    #[error("mttf and beta must be finite and > 0, got mttf={mttf}, beta={beta}")]
    BadWeibullInput { mttf: f64, beta: f64 },
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

/// Black's-equation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgingParams {
    /// Scale, hours·(A/cm²)^n.
    pub a_const: f64,
    /// A/cm².
    pub j_density: f64,
    /// Current-density exponent. Zero is accepted and removes the J term.
    pub n_exp: f64,
    /// Activation energy, eV.
    pub ea_ev: f64,
    /// Weibull shape of the lifetime distribution. When absent the caller
    /// supplies a default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weibull_beta: Option<f64>,
}

impl AgingParams {
    pub fn validate(&self) -> Result<(), AgingError> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(AgingError::BadParam { name, value })
            }
        };
        positive("a_const", self.a_const)?;
        positive("j_density", self.j_density)?;
        positive("ea_ev", self.ea_ev)?;
        if !(self.n_exp.is_finite() && self.n_exp >= 0.0) {
            return Err(AgingError::BadParam {
                name: "n_exp",
                value: self.n_exp,
            });
        }
        if let Some(beta) = self.weibull_beta {
            positive("weibull_beta", beta)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermanentFaultResult {
    /// Per hour.
    pub lambda_eff: f64,
    pub mttf_hours: f64,
    pub reliability: ReliabilityFunction,
}

/// MTTF in hours: `A · J^(-n) · exp(Ea / (k_B · T))`.
pub fn black_mttf(temperature: f64, params: &AgingParams) -> Result<f64, AgingError> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(AgingError::BadTemperature(temperature));
    }
    params.validate()?;
    Ok(black_mttf_unchecked(temperature, params))
}

fn black_mttf_unchecked(temperature: f64, p: &AgingParams) -> f64 {
    p.a_const * p.j_density.powf(-p.n_exp) * (p.ea_ev / (BOLTZMANN_EV_PER_K * temperature)).exp()
}

/// Time-averaged failure rate over a uniform-step profile, treating the
/// window as a stationary representative workload.
pub fn failure_rate_from_profile(
    profile: &TemperatureProfile,
    params: &AgingParams,
) -> Result<f64, AgingError> {
    if profile.samples.is_empty() {
        return Err(AgingError::EmptyProfile);
    }
    params.validate()?;
    let mut sum = 0.0;
    for &t in &profile.samples {
        if !(t.is_finite() && t > 0.0) {
            return Err(AgingError::BadTemperature(t));
        }
        sum += 1.0 / black_mttf_unchecked(t, params);
    }
    Ok(sum / profile.samples.len() as f64)
}

/// Weibull survival function whose mean equals `mttf`.
pub fn weibull_from_mttf(mttf: f64, beta: f64) -> Result<ReliabilityFunction, AgingError> {
    let ok = |x: f64| x.is_finite() && x > 0.0;
    if !(ok(mttf) && ok(beta)) {
        return Err(AgingError::BadWeibullInput { mttf, beta });
    }
    let eta = mttf / gamma(1.0 + 1.0 / beta);
    Ok(ReliabilityFunction::weibull(eta, beta)?)
}

/// Full permanent-fault leaf analysis for one component.
pub fn permanent_fault_analysis(
    profile: &TemperatureProfile,
    params: &AgingParams,
    beta: f64,
) -> Result<PermanentFaultResult, AgingError> {
    let lambda_eff = failure_rate_from_profile(profile, params)?;
    let mttf_hours = 1.0 / lambda_eff;
    let reliability = weibull_from_mttf(mttf_hours, beta)?;
    Ok(PermanentFaultResult {
        lambda_eff,
        mttf_hours,
        reliability,
    })
}

//! Survival functions R(t) passed up the analysis hierarchy.
//!
//! Every per-component analysis ends in a [`ReliabilityFunction`] measured in
//! hours. Parametric forms are evaluated in closed form; sampled curves are
//! interpolated log-linearly (piecewise constant hazard), and products model
//! independent competing failure modes.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::quadrature;

/// Quadrature horizon: integrate until R(T*) drops below this value.
pub const MTTF_TAIL_THRESHOLD: f64 = 1e-9;
/// Upper bound on the quadrature horizon, in hours.
pub const MTTF_HORIZON_CAP_HOURS: f64 = 1e9;
/// Relative tolerance requested from the adaptive integrator.
pub const MTTF_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("exponential rate must be finite and > 0, got {0}")]
    BadRate(f64),
    #[error("weibull parameters must be finite and > 0, got eta={eta}, beta={beta}")]
    BadWeibull { eta: f64, beta: f64 },
    #[error("sampled curve: {0}")]
    BadSamples(String),
    #[error("product must have at least one factor")]
    EmptyProduct,
    #[error("reliability evaluated at negative or non-finite time {0}")]
    BadTime(f64),
}

/// Piecewise-exponential survival curve through `(times[i], values[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampled", into = "RawSampled")]
pub struct SampledCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampled {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawSampled> for SampledCurve {
    type Error = ReliabilityError;
    fn try_from(raw: RawSampled) -> Result<Self, Self::Error> {
        SampledCurve::new(raw.times, raw.values)
    }
}

impl From<SampledCurve> for RawSampled {
    fn from(c: SampledCurve) -> Self {
        RawSampled {
            times: c.times,
            values: c.values,
        }
    }
}

impl SampledCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, ReliabilityError> {
        let bad = |m: &str| Err(ReliabilityError::BadSamples(m.to_string()));
        if times.is_empty() {
            return bad("at least one sample required");
        }
        if times.len() != values.len() {
            return bad("times and values differ in length");
        }
        if times[0] != 0.0 {
            return bad("first time must be 0");
        }
        if values[0] != 1.0 {
            return bad("first value must be 1");
        }
        if times.iter().any(|t| !t.is_finite()) {
            return bad("times must be finite");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be strictly increasing");
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("values must lie in [0, 1]");
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return bad("values must be non-increasing");
        }
        Ok(Self { times, values })
    }

    /// The constant-1 curve: a single sample and zero hazard everywhere.
    pub fn always_one() -> Self {
        Self {
            times: vec![0.0],
            values: vec![1.0],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Hazard of the last segment, used for extrapolation. Zero for a
    /// single-sample curve.
    fn tail_hazard(&self) -> f64 {
        let n = self.times.len();
        if n < 2 {
            return 0.0;
        }
        segment_hazard(
            self.values[n - 2],
            self.values[n - 1],
            self.times[n - 1] - self.times[n - 2],
        )
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        let last = n - 1;
        if t >= self.times[last] {
            let v = self.values[last];
            let h = self.tail_hazard();
            if v == 0.0 {
                return 0.0;
            }
            return v * (-h * (t - self.times[last])).exp();
        }
        // first index with times[i] > t; t lies in [times[i-1], times[i])
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        if v1 == 0.0 {
            // log-linear is undefined into zero; fall back to linear
            return v0 * (t1 - t) / (t1 - t0);
        }
        let frac = (t - t0) / (t1 - t0);
        v0 * (frac * (v1 / v0).ln()).exp()
    }

    fn mttf(&self) -> Mttf {
        let mut total = 0.0;
        for i in 1..self.times.len() {
            let (v0, v1) = (self.values[i - 1], self.values[i]);
            let dt = self.times[i] - self.times[i - 1];
            total += segment_integral(v0, v1, dt);
        }
        let v_last = *self.values.last().unwrap();
        if v_last > 0.0 {
            let h = self.tail_hazard();
            if h <= 0.0 {
                return Mttf::Unbounded;
            }
            total += v_last / h;
        }
        Mttf::Hours(total)
    }

    /// Inverse of the survival function: smallest t with R(t) <= u.
    fn inverse(&self, u: f64) -> f64 {
        let n = self.times.len();
        // segment i spans [times[i-1], times[i]] with values[i-1] >= u > values[i]
        for i in 1..n {
            let (v0, v1) = (self.values[i - 1], self.values[i]);
            if v1 < u {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                if v1 == 0.0 {
                    return t0 + (t1 - t0) * (v0 - u) / v0;
                }
                let frac = (u / v0).ln() / (v1 / v0).ln();
                return t0 + frac * (t1 - t0);
            }
        }
        let v_last = self.values[n - 1];
        let h = self.tail_hazard();
        if h <= 0.0 {
            return f64::INFINITY;
        }
        self.times[n - 1] + (v_last / u).ln() / h
    }
}

fn segment_hazard(v0: f64, v1: f64, dt: f64) -> f64 {
    if v1 == 0.0 {
        f64::INFINITY
    } else {
        (v0 / v1).ln() / dt
    }
}

fn segment_integral(v0: f64, v1: f64, dt: f64) -> f64 {
    if v1 == 0.0 {
        0.5 * v0 * dt
    } else if v1 == v0 {
        v0 * dt
    } else {
        let h = (v0 / v1).ln() / dt;
        (v0 - v1) / h
    }
}

/// Mean time to failure. A survival function with positive mass at infinity
/// has no finite mean and is reported as `Unbounded`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mttf {
    Hours(f64),
    Unbounded,
}

impl Mttf {
    pub fn hours(self) -> Option<f64> {
        match self {
            Mttf::Hours(h) => Some(h),
            Mttf::Unbounded => None,
        }
    }
}

impl Serialize for Mttf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Mttf::Hours(h) => s.serialize_f64(*h),
            Mttf::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

/// A survival function of time in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReliabilityFunction {
    Exponential { lambda: f64 },
    Weibull { eta: f64, beta: f64 },
    Sampled { curve: SampledCurve },
    Product { factors: Vec<ReliabilityFunction> },
}

impl ReliabilityFunction {
    pub fn exponential(lambda: f64) -> Result<Self, ReliabilityError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ReliabilityError::BadRate(lambda));
        }
        Ok(Self::Exponential { lambda })
    }

    pub fn weibull(eta: f64, beta: f64) -> Result<Self, ReliabilityError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(eta) && ok(beta)) {
            return Err(ReliabilityError::BadWeibull { eta, beta });
        }
        Ok(Self::Weibull { eta, beta })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self, ReliabilityError> {
        Ok(Self::Sampled {
            curve: SampledCurve::new(times, values)?,
        })
    }

    pub fn always_one() -> Self {
        Self::Sampled {
            curve: SampledCurve::always_one(),
        }
    }

    pub fn product(factors: Vec<ReliabilityFunction>) -> Result<Self, ReliabilityError> {
        if factors.is_empty() {
            return Err(ReliabilityError::EmptyProduct);
        }
        Ok(Self::Product { factors })
    }

    /// Re-checks the invariants of a value that may have been built
    /// directly (e.g. deserialized).
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        match self {
            Self::Exponential { lambda } => Self::exponential(*lambda).map(|_| ()),
            Self::Weibull { eta, beta } => Self::weibull(*eta, *beta).map(|_| ()),
            Self::Sampled { curve } => {
                SampledCurve::new(curve.times.clone(), curve.values.clone()).map(|_| ())
            }
            Self::Product { factors } => {
                if factors.is_empty() {
                    return Err(ReliabilityError::EmptyProduct);
                }
                factors.iter().try_for_each(|f| f.validate())
            }
        }
    }

    /// R(t) for `t` in hours.
    pub fn eval(&self, t: f64) -> Result<f64, ReliabilityError> {
        if t.is_nan() || t < 0.0 {
            return Err(ReliabilityError::BadTime(t));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let r = match self {
            Self::Exponential { lambda } => (-lambda * t).exp(),
            Self::Weibull { eta, beta } => (-(t / eta).powf(*beta)).exp(),
            Self::Sampled { curve } => curve.eval(t),
            Self::Product { factors } => factors.iter().map(|f| f.eval_unchecked(t)).product(),
        };
        r.clamp(0.0, 1.0)
    }

    /// lim R(t) as t grows without bound.
    pub fn limit_at_infinity(&self) -> f64 {
        match self {
            Self::Exponential { .. } | Self::Weibull { .. } => 0.0,
            Self::Sampled { curve } => {
                if curve.tail_hazard() > 0.0 {
                    0.0
                } else {
                    *curve.values.last().unwrap()
                }
            }
            Self::Product { factors } => factors.iter().map(|f| f.limit_at_infinity()).product(),
        }
    }

    pub fn mttf(&self) -> Mttf {
        match self {
            Self::Exponential { lambda } => Mttf::Hours(1.0 / lambda),
            Self::Weibull { eta, beta } => Mttf::Hours(eta * gamma(1.0 + 1.0 / beta)),
            Self::Sampled { curve } => curve.mttf(),
            Self::Product { .. } => {
                mttf_by_quadrature(|t| self.eval_unchecked(t), self.limit_at_infinity())
            }
        }
    }

    /// Draws a failure time by inverse-CDF sampling. Products draw each
    /// factor independently and take the earliest failure.
    pub fn sample_failure_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { lambda } => {
                let u: f64 = rng.sample(Open01);
                -u.ln() / lambda
            }
            Self::Weibull { eta, beta } => {
                let u: f64 = rng.sample(Open01);
                eta * (-u.ln()).powf(1.0 / beta)
            }
            Self::Sampled { curve } => {
                let u: f64 = rng.sample(Open01);
                curve.inverse(u)
            }
            Self::Product { factors } => factors
                .iter()
                .map(|f| f.sample_failure_time(rng))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// MTTF of an arbitrary survival function by adaptive quadrature of
/// `surv` over [0, T*], where T* is the first doubling of a start horizon at
/// which the survival drops below [`MTTF_TAIL_THRESHOLD`] (capped at
/// [`MTTF_HORIZON_CAP_HOURS`]). `limit` is lim R(t); a positive limit means
/// the mean is infinite.
pub fn mttf_by_quadrature<F: Fn(f64) -> f64>(surv: F, limit: f64) -> Mttf {
    if limit > 0.0 {
        return Mttf::Unbounded;
    }
    let mut horizon = 1e-3;
    while surv(horizon) >= MTTF_TAIL_THRESHOLD && horizon < MTTF_HORIZON_CAP_HOURS {
        horizon = (horizon * 2.0).min(MTTF_HORIZON_CAP_HOURS);
    }
    Mttf::Hours(quadrature::integrate_survival(&surv, horizon, MTTF_REL_TOL))
}

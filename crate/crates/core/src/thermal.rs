//! Lumped-RC compact thermal model: power trace in, temperature profile out.
//!
//! Each component is a single thermal node with resistance `r_th` to ambient
//! and capacitance `c_th`. Power is piecewise constant over a step, so every
//! step is advanced with the exact exponential solution of
//! `C dT/dt = P - (T - T_amb) / R`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("power trace is empty")]
    EmptyTrace,
    #[error("power sample {index} is not finite or negative: {value}")]
    BadPower { index: usize, value: f64 },
    #[error("timestep must be finite and > 0, got {0}")]
    BadTimestep(f64),
    #[error("thermal parameter {name} must be finite and > 0, got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("trace line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    /// K/W
    pub r_th: f64,
    /// J/K
    pub c_th: f64,
    /// K
    pub t_ambient: f64,
    /// K
    pub t_initial: f64,
}

impl ThermalParams {
    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, value) in [
            ("r_th", self.r_th),
            ("c_th", self.c_th),
            ("t_ambient", self.t_ambient),
            ("t_initial", self.t_initial),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ThermalError::BadParam { name, value });
            }
        }
        Ok(())
    }

    /// Thermal time constant in seconds.
    pub fn tau(&self) -> f64 {
        self.r_th * self.c_th
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub component_id: String,
    pub dt_seconds: f64,
    pub samples: Vec<f64>,
}

impl PowerTrace {
    pub fn new(
        component_id: impl Into<String>,
        dt_seconds: f64,
        samples: Vec<f64>,
    ) -> Result<Self, ThermalError> {
        let trace = Self {
            component_id: component_id.into(),
            dt_seconds,
            samples,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if self.samples.is_empty() {
            return Err(ThermalError::EmptyTrace);
        }
        if !(self.dt_seconds.is_finite() && self.dt_seconds > 0.0) {
            return Err(ThermalError::BadTimestep(self.dt_seconds));
        }
        for (index, &value) in self.samples.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ThermalError::BadPower { index, value });
            }
        }
        Ok(())
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Reads a `time_s,power_w` trace. Times must start at 0 and be uniformly
    /// spaced; the spacing becomes the timestep, so at least two rows are
    /// needed.
    pub fn read_csv<R: Read>(
        component_id: impl Into<String>,
        reader: R,
    ) -> Result<Self, ThermalError> {
        let (dt, samples) = read_uniform_series(reader, ["time_s", "power_w"])?;
        Self::new(component_id, dt, samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ThermalError> {
        write_series(
            writer,
            ["time_s", "power_w"],
            self.dt_seconds,
            0,
            &self.samples,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureProfile {
    pub component_id: String,
    pub dt_seconds: f64,
    /// Kelvin; sample k is the temperature at the end of step k.
    pub samples: Vec<f64>,
}

impl TemperatureProfile {
    pub fn peak(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes `time_s,temp_k`. Row k carries the end-of-step time (k+1)·dt.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ThermalError> {
        write_series(
            writer,
            ["time_s", "temp_k"],
            self.dt_seconds,
            1,
            &self.samples,
        )
    }
}

pub fn steady_state_temperature(power: f64, params: &ThermalParams) -> Result<f64, ThermalError> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(ThermalError::BadPower {
            index: 0,
            value: power,
        });
    }
    Ok(params.t_ambient + params.r_th * power)
}

pub fn simulate_temperature(
    trace: &PowerTrace,
    params: &ThermalParams,
) -> Result<TemperatureProfile, ThermalError> {
    trace.validate()?;
    params.validate()?;
    let decay = (-trace.dt_seconds / params.tau()).exp();
    let mut temp = params.t_initial;
    let samples = trace
        .samples
        .iter()
        .map(|&p| {
            let steady = params.t_ambient + params.r_th * p;
            temp = steady + (temp - steady) * decay;
            temp
        })
        .collect();
    Ok(TemperatureProfile {
        component_id: trace.component_id.clone(),
        dt_seconds: trace.dt_seconds,
        samples,
    })
}

fn read_uniform_series<R: Read>(
    reader: R,
    header: [&str; 2],
) -> Result<(f64, Vec<f64>), ThermalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(ThermalError::Format {
            line: 1,
            message: format!(
                "expected header {}, found {}",
                header.join(","),
                found.join(",")
            ),
        });
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let field = |k: usize| -> Result<f64, ThermalError> {
            let raw = record.get(k).unwrap_or("");
            raw.parse::<f64>().map_err(|_| ThermalError::Format {
                line,
                message: format!("cannot parse '{raw}' as a number"),
            })
        };
        if record.len() != 2 {
            return Err(ThermalError::Format {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let t = field(0)?;
        if !t.is_finite() {
            return Err(ThermalError::Format {
                line,
                message: "time is not finite".into(),
            });
        }
        times.push(t);
        values.push(field(1)?);
    }
    if times.len() < 2 {
        return Err(ThermalError::Format {
            line: times.len() + 1,
            message: "at least two rows are needed to fix the timestep".into(),
        });
    }
    if times[0] != 0.0 {
        return Err(ThermalError::Format {
            line: 2,
            message: "first time must be 0".into(),
        });
    }
    let dt = times[1] - times[0];
    if dt.is_nan() || dt <= 0.0 {
        return Err(ThermalError::Format {
            line: 3,
            message: "times must be strictly increasing".into(),
        });
    }
    for (k, &t) in times.iter().enumerate() {
        let expected = k as f64 * dt;
        if (t - expected).abs() > 1e-9 * expected.max(dt) {
            return Err(ThermalError::Format {
                line: k + 2,
                message: format!("non-uniform time {t}, expected {expected}"),
            });
        }
    }
    Ok((dt, values))
}

fn write_series<W: Write>(
    writer: W,
    header: [&str; 2],
    dt: f64,
    offset: usize,
    samples: &[f64],
) -> Result<(), ThermalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for (k, v) in samples.iter().enumerate() {
        w.write_record([((k + offset) as f64 * dt).to_string(), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

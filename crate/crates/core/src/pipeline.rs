//! End-to-end analysis: leaf analyses per component, adapter chains up to
//! reliability functions, success-tree combination, report and curve output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::composition::{
    apply_chain, combine_competing_risks, AdapterContext, CompositionError, Measure, MeasureValue,
};
use crate::model::{check_measure_compatibility, CrnNode, SystemModel, Violation};
use crate::reliability::{Mttf, ReliabilityFunction};
use crate::softerror::{self, inject_campaign, InjectionResult, Netlist, Workload};
use crate::systemlevel::{
    self, uniform_grid, ComponentFunctions, MonteCarloCurve, SystemCurves, TreeError,
};
use crate::thermal::{steady_state_temperature, PowerTrace};

pub const DEFAULT_INJECTION_TRIALS: u64 = 10_000;
pub const DEFAULT_WEIBULL_BETA: f64 = 2.0;
pub const REPORT_FILE: &str = "report.json";
pub const CURVE_FILE: &str = "curves.csv";
pub const RATIO_CONVENTION: &str =
    "ratio = r_sys_perm / r_sys_trans; > 1 means transient faults dominate";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("adapter chains are incompatible:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Incompatible(Vec<Violation>),
    #[error("a seed is required for {0}")]
    MissingSeed(&'static str),
    #[error("component '{component}', stage {stage}: {cause}")]
    Stage {
        component: String,
        stage: &'static str,
        cause: String,
        input: bool,
    },
    #[error("system stage: {0}")]
    System(#[from] TreeError),
    #[error("writing outputs to {path}: {cause}")]
    Output { path: String, cause: String },
}

impl PipelineError {
    /// True when the failure traces back to the inputs rather than to the
    /// analysis itself.
    pub fn is_input_error(&self) -> bool {
        match self {
            PipelineError::Incompatible(_) | PipelineError::MissingSeed(_) => true,
            PipelineError::Stage { input, .. } => *input,
            PipelineError::System(_) | PipelineError::Output { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub injection_trials: u64,
    /// Monte Carlo cross-check samples; `None` skips the cross-check.
    pub mc_trials: Option<u64>,
    pub seed: Option<u64>,
    /// Overrides every component's Weibull shape.
    pub beta: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            injection_trials: DEFAULT_INJECTION_TRIALS,
            mc_trials: None,
            seed: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDerating {
    #[serde(flatten)]
    pub injection: InjectionResult,
    pub fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub level: u32,
    /// Kelvin, at the trace's mean power.
    pub steady_state_temp_k: Option<f64>,
    pub peak_temp_k: Option<f64>,
    pub lambda_eff_per_hour: Option<f64>,
    pub permanent_mttf_hours: Mttf,
    pub derated_fit: f64,
    pub transient_lambda_per_hour: f64,
    pub transient_mttf_hours: Mttf,
    pub deratings: Vec<NodeDerating>,
    pub combined_mttf_hours: Mttf,
    pub r_perm: ReliabilityFunction,
    pub r_trans: ReliabilityFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dominant {
    Permanent,
    Transient,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dominance {
    pub convention: &'static str,
    /// Dominant fault type at the first grid point where the curves differ.
    pub initial: Dominant,
    /// First grid time at which the ratio crosses 1, if any.
    pub crossover_hours: Option<f64>,
    /// Dominant fault type at the last grid point with a defined ratio.
    #[serde(rename = "final")]
    pub last: Dominant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSection {
    pub mttf_hours: Mttf,
    pub curve_file: &'static str,
    pub dominance: Dominance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MonteCarloSection {
    Skipped {
        reason: &'static str,
    },
    Ran {
        samples: u64,
        seed: u64,
        max_abs_deviation: f64,
        /// Grid points whose empirical value lies within three binomial
        /// standard errors of the analytic curve.
        fraction_within_3se: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub injection_trials: u64,
    pub mc_trials: Option<u64>,
    pub grid_points: usize,
    pub time_horizon_hours: f64,
    pub beta_override: Option<f64>,
    pub tool_version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub model: String,
    pub components: BTreeMap<String, ComponentReport>,
    pub system: SystemSection,
    pub monte_carlo: MonteCarloSection,
    pub run: RunMetadata,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub curves: SystemCurves,
    pub functions: BTreeMap<String, ComponentFunctions>,
    pub monte_carlo: Option<MonteCarloCurve>,
}

fn stage_err<'a>(
    component: &'a str,
    stage: &'static str,
    input: bool,
) -> impl Fn(String) -> PipelineError + 'a {
    move |cause| PipelineError::Stage {
        component: component.to_string(),
        stage,
        cause,
        input,
    }
}

fn read_file(
    model: &SystemModel,
    component: &str,
    stage: &'static str,
    path: &str,
) -> Result<String, PipelineError> {
    fs::read_to_string(model.resolve(path))
        .map_err(|e| stage_err(component, stage, true)(format!("{path}: {e}")))
}

/// Loads a component's netlist and workload as the pipeline does.
pub fn load_netlist(
    model: &SystemModel,
    node: &CrnNode,
) -> Result<(Netlist, Workload), PipelineError> {
    let p = node.payload.as_ref().expect("component payload");
    let text = read_file(model, &node.id, "netlist", &p.netlist)?;
    let netlist =
        Netlist::parse(&text).map_err(|e| stage_err(&node.id, "netlist", true)(e.to_string()))?;
    let workload = match &p.ser.workload {
        None => Workload::Uniform,
        Some(path) => {
            let text = read_file(model, &node.id, "workload", path)?;
            Workload::parse(&text, netlist.num_inputs())
                .map_err(|e| stage_err(&node.id, "workload", true)(e.to_string()))?
        }
    };
    Ok((netlist, workload))
}

fn chain_err<'a>(
    component: &'a str,
    stage: &'static str,
) -> impl Fn(CompositionError) -> PipelineError + 'a {
    move |e| stage_err(component, stage, false)(e.to_string())
}

fn analyze_component(
    model: &SystemModel,
    node: &CrnNode,
    options: &PipelineOptions,
) -> Result<(ComponentReport, ComponentFunctions), PipelineError> {
    let id = node.id.as_str();
    let p = node.payload.as_ref().expect("component payload");
    let chains = model.component_chains(id).ok_or_else(|| {
        stage_err(id, "adapters", true)("component edge has no fault-type chains".into())
    })?;

    // permanent path
    let trace_text = read_file(model, id, "power_trace", &p.power_trace)?;
    let trace = PowerTrace::read_csv(id, trace_text.as_bytes())
        .map_err(|e| stage_err(id, "power_trace", true)(e.to_string()))?;
    let mean_power = trace.mean_power();
    let aging = {
        let mut a = p.aging.clone();
        if let Some(b) = options.beta {
            a.weibull_beta = Some(b);
        }
        a
    };
    let ctx = AdapterContext {
        thermal: Some(&p.thermal),
        aging: Some(&aging),
        default_beta: Some(DEFAULT_WEIBULL_BETA),
        partner: None,
    };
    let source = Measure::power_trace(trace).map_err(chain_err(id, "power_trace"))?;
    let trail = apply_chain(&chains.permanent, source, &ctx).map_err(chain_err(id, "permanent"))?;
    let mut peak = None;
    let mut lambda_eff = None;
    for m in &trail {
        match m.value() {
            MeasureValue::TemperatureProfile(prof) => peak = Some(prof.peak()),
            MeasureValue::FailureRate(l) => lambda_eff = Some(*l),
            _ => {}
        }
    }
    let steady = if trail
        .iter()
        .any(|m| matches!(m.value(), MeasureValue::TemperatureProfile(_)))
    {
        Some(
            steady_state_temperature(mean_power, &p.thermal)
                .map_err(|e| stage_err(id, "thermal", false)(e.to_string()))?,
        )
    } else {
        None
    };
    let r_perm = trail
        .into_iter()
        .last()
        .and_then(Measure::into_reliability)
        .ok_or_else(|| {
            stage_err(id, "permanent", false)("chain did not end in a reliability function".into())
        })?;

    // transient path
    let (netlist, workload) = load_netlist(model, node)?;
    let active = p
        .ser
        .active_nodes(&netlist)
        .map_err(|e| stage_err(id, "ser", true)(e.to_string()))?;
    let seed = match (active.is_empty(), options.seed) {
        (true, s) => s.unwrap_or(0),
        (false, Some(s)) => s,
        (false, None) => return Err(PipelineError::MissingSeed("fault injection")),
    };
    let mut deratings = Vec::with_capacity(active.len());
    for net in &active {
        let r = inject_campaign(&netlist, net, options.injection_trials, seed, &workload)
            .map_err(|e| stage_err(id, "injection", false)(e.to_string()))?;
        deratings.push(NodeDerating {
            fit: p.ser.fit(net),
            injection: r,
        });
    }
    let derating_map: BTreeMap<String, f64> = deratings
        .iter()
        .map(|d| (d.injection.node.clone(), d.injection.derating))
        .collect();
    let derated_fit = softerror::derated_fit(&netlist, &p.ser, &derating_map)
        .map_err(|e| stage_err(id, "ser", false)(e.to_string()))?;
    let source = Measure::fit_rate(derated_fit).map_err(chain_err(id, "ser"))?;
    let r_trans = apply_chain(&chains.transient, source, &ctx)
        .map_err(chain_err(id, "transient"))?
        .into_iter()
        .last()
        .and_then(Measure::into_reliability)
        .ok_or_else(|| {
            stage_err(id, "transient", false)("chain did not end in a reliability function".into())
        })?;

    let r_combined = combine_competing_risks(r_perm.clone(), r_trans.clone());
    let report = ComponentReport {
        level: node.level,
        steady_state_temp_k: steady,
        peak_temp_k: peak,
        lambda_eff_per_hour: lambda_eff,
        permanent_mttf_hours: r_perm.mttf(),
        derated_fit,
        transient_lambda_per_hour: softerror::fit_to_rate(derated_fit),
        transient_mttf_hours: r_trans.mttf(),
        deratings,
        combined_mttf_hours: r_combined.mttf(),
        r_perm: r_perm.clone(),
        r_trans: r_trans.clone(),
    };
    Ok((
        report,
        ComponentFunctions {
            r_perm,
            r_trans,
            r_combined,
        },
    ))
}

/// Summarizes where the ratio sits relative to 1 over the grid.
pub fn dominance(curves: &SystemCurves) -> Dominance {
    let side = |r: f64| {
        if r > 1.0 {
            Dominant::Transient
        } else if r < 1.0 {
            Dominant::Permanent
        } else {
            Dominant::Neither
        }
    };
    let mut initial = Dominant::Neither;
    let mut last = Dominant::Neither;
    let mut crossover_hours = None;
    for (t, r) in curves.grid.iter().zip(&curves.ratio) {
        let Some(r) = r else { continue };
        let s = side(*r);
        if s == Dominant::Neither {
            continue;
        }
        if initial == Dominant::Neither {
            initial = s.clone();
        } else if s != last && crossover_hours.is_none() {
            crossover_hours = Some(*t);
        }
        last = s;
    }
    Dominance {
        convention: RATIO_CONVENTION,
        initial,
        crossover_hours,
        last,
    }
}

/// Compares an empirical curve against the analytic system curve.
pub fn monte_carlo_agreement(mc: &MonteCarloCurve, analytic: &[f64]) -> (f64, f64) {
    let n = mc.samples as f64;
    let mut max_dev: f64 = 0.0;
    let mut within = 0usize;
    for (&emp, &p) in mc.survival.iter().zip(analytic) {
        let dev = (emp - p).abs();
        max_dev = max_dev.max(dev);
        let se = (p * (1.0 - p) / n).sqrt();
        if dev <= 3.0 * se + 1e-12 {
            within += 1;
        }
    }
    (max_dev, within as f64 / analytic.len().max(1) as f64)
}

pub fn run_pipeline(
    model: &SystemModel,
    options: &PipelineOptions,
) -> Result<PipelineOutput, PipelineError> {
    let violations = check_measure_compatibility(model);
    if !violations.is_empty() {
        return Err(PipelineError::Incompatible(violations));
    }
    if options.mc_trials.is_some() && options.seed.is_none() {
        return Err(PipelineError::MissingSeed("the Monte Carlo cross-check"));
    }
    let components = model.components();
    let analyzed: Vec<(String, ComponentReport, ComponentFunctions)> = components
        .par_iter()
        .map(|node| analyze_component(model, node, options).map(|(r, f)| (node.id.clone(), r, f)))
        .collect::<Result<_, _>>()?;
    let mut reports = BTreeMap::new();
    let mut functions = BTreeMap::new();
    for (id, r, f) in analyzed {
        reports.insert(id.clone(), r);
        functions.insert(id, f);
    }

    let grid = uniform_grid(model.time_horizon_hours, model.grid_points);
    let curves = systemlevel::system_reliability_curves(&model.success_tree, &functions, &grid)?;

    let (monte_carlo, mc_section) = match options.mc_trials {
        None => (
            None,
            MonteCarloSection::Skipped {
                reason: "no --mc-trials given",
            },
        ),
        Some(n) => {
            let seed = options.seed.expect("checked above");
            let mc =
                systemlevel::monte_carlo_system(&model.success_tree, &functions, n, seed, &grid)?;
            let (max_abs_deviation, fraction_within_3se) =
                monte_carlo_agreement(&mc, &curves.r_sys);
            let section = MonteCarloSection::Ran {
                samples: n,
                seed,
                max_abs_deviation,
                fraction_within_3se,
            };
            (Some(mc), section)
        }
    };

    let report = Report {
        model: model.name.clone(),
        components: reports,
        system: SystemSection {
            mttf_hours: curves.mttf_sys,
            curve_file: CURVE_FILE,
            dominance: dominance(&curves),
        },
        monte_carlo: mc_section,
        run: RunMetadata {
            seed: options.seed,
            injection_trials: options.injection_trials,
            mc_trials: options.mc_trials,
            grid_points: model.grid_points,
            time_horizon_hours: model.time_horizon_hours,
            beta_override: options.beta,
            tool_version: env!("CARGO_PKG_VERSION"),
        },
    };
    Ok(PipelineOutput {
        report,
        curves,
        functions,
        monte_carlo,
    })
}

impl PipelineOutput {
    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn curve_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.curves.write_csv(&mut buf).expect("in-memory write");
        buf
    }

    /// Writes the report and curve file into `dir`. Both are staged in
    /// temporary files and only renamed into place once both are complete.
    pub fn write_to(&self, dir: &Path) -> Result<(), PipelineError> {
        let out_err = |e: std::io::Error| PipelineError::Output {
            path: dir.display().to_string(),
            cause: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(out_err)?;
        let mut report = tempfile::NamedTempFile::new_in(dir).map_err(out_err)?;
        report
            .write_all(self.report_json().as_bytes())
            .map_err(out_err)?;
        let mut curves = tempfile::NamedTempFile::new_in(dir).map_err(out_err)?;
        curves.write_all(&self.curve_csv()).map_err(out_err)?;
        report.as_file().sync_all().map_err(out_err)?;
        curves.as_file().sync_all().map_err(out_err)?;
        curves
            .persist(dir.join(CURVE_FILE))
            .map_err(|e| out_err(e.error))?;
        report
            .persist(dir.join(REPORT_FILE))
            .map_err(|e| out_err(e.error))?;
        Ok(())
    }
}

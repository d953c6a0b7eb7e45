use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use cra_core::model::load_system_file;
use cra_core::pipeline::{run_pipeline, PipelineOptions, DEFAULT_INJECTION_TRIALS};
use cra_core::softerror::{exhaustive_derating, inject_campaign, Netlist, Workload};
use cra_core::systemlevel::{brute_force_probability, tree_probability, SuccessTree};
use cra_core::thermal::{
    simulate_temperature, steady_state_temperature, PowerTrace, ThermalParams,
};

#[derive(Parser, Debug)]
#[command(
    name = "cra",
    version,
    about = "Cross-layer reliability analysis of permanent and transient faults"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline on a system model and write report.json and curves.csv.
    Analyze {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Monte Carlo cross-check samples; omitted means skipped.
        #[arg(long)]
        mc_trials: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_INJECTION_TRIALS)]
        injection_trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Weibull shape for every component, overriding the model.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Simulate a component's temperature from a power trace.
    Thermal {
        #[arg(long)]
        trace: PathBuf,
        /// Thermal resistance, K/W.
        #[arg(long)]
        rth: f64,
        /// Thermal capacitance, J/K.
        #[arg(long)]
        cth: f64,
        /// Ambient temperature, K.
        #[arg(long)]
        tamb: f64,
        /// Initial temperature, K; defaults to ambient.
        #[arg(long)]
        tinit: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the logic derating of one node by fault injection.
    Inject {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Enumerate every input vector instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        /// Input vectors file; uniform random inputs when omitted.
        #[arg(long)]
        workload: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a success tree under independent event probabilities.
    TreeEval {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        probs: PathBuf,
        /// Sum over all event states instead of using the decision diagram.
        #[arg(long)]
        brute_force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// A failed command: exit status 1 for bad input, 2 for analysis failures.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, body: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, body).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(body)
                .map_err(|e| Failure::runtime(format!("stdout: {e}")))
        }
    }
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    emit(out, text.as_bytes())
}

fn analyze(
    system: &Path,
    out: &Path,
    mc_trials: Option<u64>,
    injection_trials: u64,
    seed: Option<u64>,
    beta: Option<f64>,
) -> Result<(), Failure> {
    if let Some(b) = beta {
        if !(b.is_finite() && b > 0.0) {
            return Err(Failure::input(format!("--beta must be > 0, got {b}")));
        }
    }
    if injection_trials == 0 {
        return Err(Failure::input("--injection-trials must be > 0"));
    }
    let model = load_system_file(system).map_err(Failure::input)?;
    let options = PipelineOptions {
        injection_trials,
        mc_trials,
        seed,
        beta,
    };
    let output = run_pipeline(&model, &options).map_err(|e| {
        if e.is_input_error() {
            Failure::input(e)
        } else {
            Failure::runtime(e)
        }
    })?;
    output.write_to(out).map_err(Failure::runtime)?;
    eprintln!(
        "wrote {} and {}",
        out.join("report.json").display(),
        out.join("curves.csv").display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn thermal(
    trace: &Path,
    rth: f64,
    cth: f64,
    tamb: f64,
    tinit: Option<f64>,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let params = ThermalParams {
        r_th: rth,
        c_th: cth,
        t_ambient: tamb,
        t_initial: tinit.unwrap_or(tamb),
    };
    params.validate().map_err(Failure::input)?;
    let id = trace
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace")
        .to_string();
    let trace = PowerTrace::read_csv(id, read(trace)?.as_bytes())
        .map_err(|e| Failure::input(format!("{}: {e}", trace.display())))?;
    let profile = simulate_temperature(&trace, &params).map_err(Failure::runtime)?;
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            profile.write_csv(&mut buf).map_err(Failure::runtime)?;
            emit(out, &buf)
        }
        Format::Json => {
            let steady =
                steady_state_temperature(trace.mean_power(), &params).map_err(Failure::runtime)?;
            emit_json(
                out,
                &json!({
                    "component_id": profile.component_id,
                    "dt_seconds": profile.dt_seconds,
                    "steady_state_temp_k": steady,
                    "peak_temp_k": profile.peak(),
                    "temperature_k": profile.samples,
                }),
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn inject(
    netlist: &Path,
    node: &str,
    trials: Option<u64>,
    seed: Option<u64>,
    exhaustive: bool,
    workload: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let parsed = Netlist::parse(&read(netlist)?)
        .map_err(|e| Failure::input(format!("{}: {e}", netlist.display())))?;
    if exhaustive {
        if workload.is_some() {
            return Err(Failure::input(
                "--exhaustive enumerates every input vector and takes no --workload",
            ));
        }
        let r = exhaustive_derating(&parsed, node).map_err(Failure::input)?;
        return emit_json(out, &serde_json::to_value(r).expect("serializable"));
    }
    let trials = trials
        .ok_or_else(|| Failure::input("--trials is required unless --exhaustive is given"))?;
    let seed = seed.ok_or_else(|| Failure::input("--seed is required for fault injection"))?;
    let workload = match workload {
        None => Workload::Uniform,
        Some(path) => Workload::parse(&read(path)?, parsed.num_inputs())
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
    };
    let r = inject_campaign(&parsed, node, trials, seed, &workload).map_err(Failure::input)?;
    emit_json(out, &serde_json::to_value(r).expect("serializable"))
}

fn tree_eval(
    tree: &Path,
    probs: &Path,
    brute_force: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let t = SuccessTree::from_json(&read(tree)?)
        .map_err(|e| Failure::input(format!("{}: {e}", tree.display())))?;
    let p: BTreeMap<String, f64> = serde_json::from_str(&read(probs)?)
        .map_err(|e| Failure::input(format!("{}: {e}", probs.display())))?;
    let (method, value) = if brute_force {
        ("brute_force", brute_force_probability(&t, &p))
    } else {
        ("decision_diagram", tree_probability(&t, &p))
    };
    let value = value.map_err(Failure::input)?;
    emit_json(
        out,
        &json!({
            "method": method,
            "events": t.events(),
            "probability": value,
        }),
    )
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze {
            system,
            out,
            mc_trials,
            injection_trials,
            seed,
            beta,
        } => analyze(&system, &out, mc_trials, injection_trials, seed, beta),
        Command::Thermal {
            trace,
            rth,
            cth,
            tamb,
            tinit,
            format,
            out,
        } => thermal(&trace, rth, cth, tamb, tinit, format, out.as_deref()),
        Command::Inject {
            netlist,
            node,
            trials,
            seed,
            exhaustive,
            workload,
            out,
        } => inject(
            &netlist,
            &node,
            trials,
            seed,
            exhaustive,
            workload.as_deref(),
            out.as_deref(),
        ),
        Command::TreeEval {
            tree,
            probs,
            brute_force,
            out,
        } => tree_eval(&tree, &probs, brute_force, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

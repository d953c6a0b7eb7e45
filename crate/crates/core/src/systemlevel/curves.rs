use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::tree::{CompiledTree, SuccessTree, TreeError};
use crate::reliability::{mttf_by_quadrature, Mttf, ReliabilityFunction};
use crate::rng::{block_rng, blocks};

/// Both curves below this value make the dominance ratio meaningless.
pub const RATIO_FLOOR: f64 = 1e-15;

/// Reliability functions of one component, per fault type and combined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentFunctions {
    pub r_perm: ReliabilityFunction,
    pub r_trans: ReliabilityFunction,
    pub r_combined: ReliabilityFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemCurves {
    pub grid: Vec<f64>,
    pub r_sys: Vec<f64>,
    pub r_sys_perm: Vec<f64>,
    pub r_sys_trans: Vec<f64>,
    /// `r_sys_perm / r_sys_trans`; above 1 means transient faults are the
    /// more destructive type at that instant.
    pub ratio: Vec<Option<f64>>,
    pub mttf_sys: Mttf,
    pub component_mttf: BTreeMap<String, Mttf>,
}

/// `points` uniform samples on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = horizon / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        horizon
                    } else {
                        i as f64 * step
                    }
                })
                .collect()
        }
    }
}

fn lookup<'a>(
    compiled: &CompiledTree,
    components: &'a BTreeMap<String, ComponentFunctions>,
) -> Result<Vec<&'a ComponentFunctions>, TreeError> {
    compiled
        .events()
        .iter()
        .map(|e| {
            components
                .get(e)
                .ok_or_else(|| TreeError::MissingProbability(e.clone()))
        })
        .collect()
}

/// Clamp rounding noise so the curve never increases.
fn enforce_non_increasing(v: &mut [f64]) {
    for i in 1..v.len() {
        if v[i] > v[i - 1] {
            v[i] = v[i - 1];
        }
    }
}

fn curve<F: Fn(&ComponentFunctions) -> &ReliabilityFunction + Sync>(
    compiled: &CompiledTree,
    comps: &[&ComponentFunctions],
    grid: &[f64],
    pick: F,
) -> Vec<f64> {
    let mut v: Vec<f64> = grid
        .par_iter()
        .map(|&t| {
            let probs: Vec<f64> = comps.iter().map(|c| pick(c).eval_unchecked(t)).collect();
            compiled.probability(&probs)
        })
        .collect();
    enforce_non_increasing(&mut v);
    v
}

/// System MTTF by quadrature of the exact system survival function.
pub fn system_mttf(
    tree: &SuccessTree,
    components: &BTreeMap<String, ComponentFunctions>,
) -> Result<Mttf, TreeError> {
    let compiled = tree.compile();
    let comps = lookup(&compiled, components)?;
    let limits: Vec<f64> = comps
        .iter()
        .map(|c| c.r_combined.limit_at_infinity())
        .collect();
    let limit = compiled.probability(&limits);
    let surv = |t: f64| {
        let probs: Vec<f64> = comps
            .iter()
            .map(|c| c.r_combined.eval_unchecked(t))
            .collect();
        compiled.probability(&probs)
    };
    Ok(mttf_by_quadrature(surv, limit))
}

pub fn system_reliability_curves(
    tree: &SuccessTree,
    components: &BTreeMap<String, ComponentFunctions>,
    grid: &[f64],
) -> Result<SystemCurves, TreeError> {
    if let Some(&t) = grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(TreeError::BadGrid(t));
    }
    let compiled = tree.compile();
    let comps = lookup(&compiled, components)?;
    let r_sys = curve(&compiled, &comps, grid, |c| &c.r_combined);
    let r_sys_perm = curve(&compiled, &comps, grid, |c| &c.r_perm);
    let r_sys_trans = curve(&compiled, &comps, grid, |c| &c.r_trans);
    let ratio = r_sys_perm
        .iter()
        .zip(&r_sys_trans)
        .map(|(&p, &q)| {
            if p < RATIO_FLOOR && q < RATIO_FLOOR {
                None
            } else {
                Some(p / q)
            }
        })
        .collect();
    let component_mttf = components
        .iter()
        .filter(|(id, _)| compiled.events().contains(id))
        .map(|(id, c)| (id.clone(), c.r_combined.mttf()))
        .collect();
    Ok(SystemCurves {
        grid: grid.to_vec(),
        r_sys,
        r_sys_perm,
        r_sys_trans,
        ratio,
        mttf_sys: system_mttf(tree, components)?,
        component_mttf,
    })
}

impl SystemCurves {
    /// `t_hours,r_sys,r_sys_perm,r_sys_trans,ratio`; an absent ratio is an
    /// empty field.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_hours", "r_sys", "r_sys_perm", "r_sys_trans", "ratio"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                self.grid[i].to_string(),
                self.r_sys[i].to_string(),
                self.r_sys_perm[i].to_string(),
                self.r_sys_trans[i].to_string(),
                self.ratio[i].map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Empirical system survival curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloCurve {
    pub samples: u64,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Time at which the structure function first becomes false as components
/// fail in order; infinite if it never does.
fn system_failure_time(
    compiled: &CompiledTree,
    times: &[f64],
    order: &mut Vec<usize>,
    alive: &mut Vec<bool>,
) -> f64 {
    order.clear();
    order.extend(0..times.len());
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    alive.clear();
    alive.resize(times.len(), true);
    if !compiled.holds(alive) {
        return 0.0;
    }
    for &i in order.iter() {
        if times[i].is_infinite() {
            break;
        }
        alive[i] = false;
        if !compiled.holds(alive) {
            return times[i];
        }
    }
    f64::INFINITY
}

/// Simulates component lifetimes (permanent and transient failure times by
/// inverse-CDF, component fails at the earlier one) and reports the fraction
/// of samples whose system is still up at each grid time.
pub fn monte_carlo_system(
    tree: &SuccessTree,
    components: &BTreeMap<String, ComponentFunctions>,
    n_samples: u64,
    seed: u64,
    grid: &[f64],
) -> Result<MonteCarloCurve, TreeError> {
    let compiled = tree.compile();
    let comps = lookup(&compiled, components)?;
    let n = usize::try_from(n_samples).map_err(|_| TreeError::NoSamples)?;
    if n == 0 {
        return Err(TreeError::NoSamples);
    }
    let mut lifetimes: Vec<f64> = blocks(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .flat_map_iter(|(block, range)| {
            let mut rng = block_rng(seed, block);
            let mut times = vec![0.0; comps.len()];
            let (mut order, mut alive) = (Vec::new(), Vec::new());
            let mut out = Vec::with_capacity(range.len());
            for _ in range {
                for (slot, c) in times.iter_mut().zip(&comps) {
                    let perm = c.r_perm.sample_failure_time(&mut rng);
                    let trans = c.r_trans.sample_failure_time(&mut rng);
                    *slot = perm.min(trans);
                }
                out.push(system_failure_time(
                    &compiled, &times, &mut order, &mut alive,
                ));
            }
            out
        })
        .collect();
    lifetimes.sort_by(f64::total_cmp);
    let total = n as f64;
    let survival: Vec<f64> = grid
        .iter()
        .map(|&t| (n - lifetimes.partition_point(|&x| x <= t)) as f64 / total)
        .collect();
    let std_error = survival
        .iter()
        .map(|&p| (p * (1.0 - p) / total).sqrt())
        .collect();
    Ok(MonteCarloCurve {
        samples: n_samples,
        seed,
        grid: grid.to_vec(),
        survival,
        std_error,
    })
}

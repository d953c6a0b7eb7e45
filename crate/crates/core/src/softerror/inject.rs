//! Single-bit-flip fault injection and derating estimation.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::netlist::Netlist;
use super::SoftErrorError;
use crate::rng::{block_rng, blocks};

/// Largest input count accepted by [`exhaustive_derating`].
pub const MAX_EXHAUSTIVE_INPUTS: usize = 24;

/// Input vectors applied during a campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Workload {
    /// Every input bit independent and fair.
    Uniform,
    /// Vectors drawn uniformly (with replacement) from a fixed list.
    Vectors(Vec<Vec<bool>>),
}

impl Workload {
    /// One binary vector per line, leftmost character is the first declared
    /// input. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, width: usize) -> Result<Self, SoftErrorError> {
        let mut vectors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let bits = body
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(SoftErrorError::Workload {
                        line: i + 1,
                        message: format!("unexpected character '{other}'"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if bits.len() != width {
                return Err(SoftErrorError::Workload {
                    line: i + 1,
                    message: format!("vector has {} bits, expected {width}", bits.len()),
                });
            }
            vectors.push(bits);
        }
        if vectors.is_empty() {
            return Err(SoftErrorError::EmptyWorkload);
        }
        Ok(Workload::Vectors(vectors))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectionResult {
    pub node: String,
    pub trials: u64,
    pub errors: u64,
    pub derating: f64,
    pub ci95_half_width: f64,
}

impl InjectionResult {
    fn new(node: String, trials: u64, errors: u64) -> Self {
        let (lo, hi) = wilson_interval(errors, trials, 0.95);
        Self {
            node,
            trials,
            errors,
            derating: errors as f64 / trials as f64,
            ci95_half_width: 0.5 * (hi - lo),
        }
    }

    pub fn wilson(&self, confidence: f64) -> (f64, f64) {
        wilson_interval(self.errors, self.trials, confidence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustiveResult {
    pub node: String,
    pub vectors: u64,
    pub errors: u64,
    pub derating: f64,
}

/// Two-sided standard normal quantile for the given confidence level.
pub fn z_score(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(0.5 + 0.5 * confidence)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_score(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

fn lane_mask(lanes: usize) -> u64 {
    if lanes >= 64 {
        !0
    } else {
        (1u64 << lanes) - 1
    }
}

/// Flips `node` on every lane and returns the lanes where an output differs.
fn observe_flip(
    netlist: &Netlist,
    golden: &[u64],
    faulty: &mut Vec<u64>,
    node: usize,
    cone: &[usize],
) -> u64 {
    faulty.clear();
    faulty.extend_from_slice(golden);
    faulty[node] = !faulty[node];
    netlist.propagate_cone(faulty, cone);
    netlist
        .output_indices()
        .iter()
        .fold(0, |acc, &o| acc | (golden[o] ^ faulty[o]))
}

fn fill_inputs<R: Rng>(
    netlist: &Netlist,
    workload: &Workload,
    lanes: usize,
    rng: &mut R,
    nets: &mut [u64],
) {
    let width = netlist.num_inputs();
    nets[..width].iter_mut().for_each(|w| *w = 0);
    match workload {
        Workload::Uniform => {
            let words = width.div_ceil(64);
            for lane in 0..lanes {
                for w in 0..words {
                    let bits: u64 = rng.gen();
                    let span = (width - w * 64).min(64);
                    for i in 0..span {
                        nets[w * 64 + i] |= (bits >> i & 1) << lane;
                    }
                }
            }
        }
        Workload::Vectors(vectors) => {
            for lane in 0..lanes {
                let v = &vectors[rng.gen_range(0..vectors.len())];
                for (i, &b) in v.iter().enumerate() {
                    nets[i] |= (b as u64) << lane;
                }
            }
        }
    }
}

/// Monte Carlo injection campaign on one net. Trials are grouped into keyed
/// blocks and evaluated 64 at a time; the result depends only on the seed.
pub fn inject_campaign(
    netlist: &Netlist,
    node: &str,
    trials: u64,
    seed: u64,
    workload: &Workload,
) -> Result<InjectionResult, SoftErrorError> {
    let idx = netlist
        .net_index(node)
        .ok_or_else(|| SoftErrorError::UnknownNode(node.to_string()))?;
    if trials == 0 {
        return Err(SoftErrorError::ZeroTrials);
    }
    if let Workload::Vectors(v) = workload {
        if v.is_empty() {
            return Err(SoftErrorError::EmptyWorkload);
        }
        if v.iter().any(|x| x.len() != netlist.num_inputs()) {
            return Err(SoftErrorError::Workload {
                line: 0,
                message: format!("vectors must have {} bits", netlist.num_inputs()),
            });
        }
    }
    let cone = netlist.fanout_cone(idx);
    let n = usize::try_from(trials).map_err(|_| SoftErrorError::ZeroTrials)?;
    let errors: u64 = blocks(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(block, range)| {
            let mut rng = block_rng(seed, block);
            let mut golden = vec![0u64; netlist.num_nets()];
            let mut faulty = Vec::with_capacity(golden.len());
            let mut count = 0u64;
            let mut remaining = range.len();
            while remaining > 0 {
                let lanes = remaining.min(64);
                fill_inputs(netlist, workload, lanes, &mut rng, &mut golden);
                netlist.propagate(&mut golden);
                let diff = observe_flip(netlist, &golden, &mut faulty, idx, &cone);
                count += (diff & lane_mask(lanes)).count_ones() as u64;
                remaining -= lanes;
            }
            count
        })
        .sum();
    Ok(InjectionResult::new(node.to_string(), trials, errors))
}

/// Exact derating: the fraction of all 2^inputs vectors for which flipping
/// `node` changes some primary output.
pub fn exhaustive_derating(
    netlist: &Netlist,
    node: &str,
) -> Result<ExhaustiveResult, SoftErrorError> {
    let idx = netlist
        .net_index(node)
        .ok_or_else(|| SoftErrorError::UnknownNode(node.to_string()))?;
    let width = netlist.num_inputs();
    if width > MAX_EXHAUSTIVE_INPUTS {
        return Err(SoftErrorError::TooManyInputs {
            inputs: width,
            max: MAX_EXHAUSTIVE_INPUTS,
        });
    }
    let cone = netlist.fanout_cone(idx);
    let total: u64 = 1 << width;
    let words = total.div_ceil(64);
    // lane j of word w is vector w*64 + j; low 6 input bits come from the lane
    const LANE_PATTERNS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    let lanes = total.min(64) as usize;
    let errors: u64 = (0..words)
        .into_par_iter()
        .map_init(
            || (vec![0u64; netlist.num_nets()], Vec::new()),
            |(golden, faulty), w| {
                for (i, slot) in golden[..width].iter_mut().enumerate() {
                    *slot = if i < 6 {
                        LANE_PATTERNS[i]
                    } else if w >> (i - 6) & 1 == 1 {
                        !0
                    } else {
                        0
                    };
                }
                netlist.propagate(golden);
                let diff = observe_flip(netlist, golden, faulty, idx, &cone);
                (diff & lane_mask(lanes)).count_ones() as u64
            },
        )
        .sum();
    Ok(ExhaustiveResult {
        node: node.to_string(),
        vectors: total,
        errors,
        derating: errors as f64 / total as f64,
    })
}

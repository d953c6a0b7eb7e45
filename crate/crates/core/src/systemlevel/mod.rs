//! System-level combination: success trees, system curves and MTTF.

mod curves;
mod tree;

pub use curves::{
    monte_carlo_system, system_mttf, system_reliability_curves, uniform_grid, ComponentFunctions,
    MonteCarloCurve, SystemCurves, RATIO_FLOOR,
};
pub use tree::{
    brute_force_probability, tree_probability, CompiledTree, Gate, SuccessTree, TreeError,
    MAX_BRUTE_FORCE_EVENTS,
};

use crate::reliability::{Mttf, ReliabilityFunction};

/// Mean time to failure of a single reliability function.
pub fn mttf(r: &ReliabilityFunction) -> Mttf {
    r.mttf()
}

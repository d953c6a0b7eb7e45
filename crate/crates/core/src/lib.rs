//! Cross-layer reliability analysis of permanent and transient faults.
//!
//! Low-level analyses run per component: a compact thermal model feeds an
//! electromigration aging model (permanent faults), and logic-level fault
//! injection yields derated soft error rates (transient faults). Adapters
//! turn both results into survival functions, which are combined per
//! component as competing risks and then across components through a success
//! tree into system reliability curves, MTTF, and a fault-type dominance
//! ratio.

pub mod aging;
pub mod composition;
pub mod model;
pub mod pipeline;
pub mod quadrature;
pub mod reliability;
pub mod rng;
pub mod softerror;
pub mod systemlevel;
pub mod thermal;

pub use composition::{
    apply_adapter, combine_competing_risks, Adapter, Measure, MeasureTag, TimeUnit,
};
pub use model::{check_measure_compatibility, load_system, load_system_file, SystemModel};
pub use pipeline::{run_pipeline, PipelineOptions, Report};
pub use reliability::{Mttf, ReliabilityFunction};

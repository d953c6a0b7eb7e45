//! The analysis hierarchy: a tree of compositional reliability nodes loaded
//! from a JSON system description.
//!
//! ```json
//! {
//!   "name": "mpsoc",
//!   "time_horizon_hours": 5000,
//!   "grid_points": 512,
//!   "hierarchy": {"id": "sys", "kind": "System", "children": [
//!     {"id": "PU1", "kind": "Component", "thermal": {...}, "aging": {...},
//!      "power_trace": "pu1.csv", "netlist": "pu1.net", "ser": {...}}
//!   ]},
//!   "adapters": {"PU1": {"permanent": [...], "transient": [...]}},
//!   "success_tree": {"event": "PU1"}
//! }
//! ```
//!
//! Edges into a component carry two chains, one per fault type; edges into
//! any other node carry a single chain over reliability functions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aging::AgingParams;
use crate::composition::{check_chain, Adapter, MeasureTag, Port, TimeUnit};
use crate::softerror::SerParams;
use crate::systemlevel::{Gate, SuccessTree};
use crate::thermal::ThermalParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed system description: {0}")]
    Malformed(String),
    #[error("node '{node}', field '{field}': {message}")]
    Invalid {
        node: String,
        field: String,
        message: String,
    },
    #[error("node '{node}', field 'id': duplicate identifier")]
    Duplicate { node: String },
    #[error(
        "node '{node}', field 'success_tree': basic event '{event}' does not name a component"
    )]
    UnknownEvent { node: String, event: String },
    #[error("node '{node}', field '{field}': file '{path}' not found")]
    DanglingFile {
        node: String,
        field: String,
        path: String,
    },
    #[error("cannot read '{path}': {message}")]
    Io { path: String, message: String },
}

fn invalid(node: &str, field: &str, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        node: node.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    System,
    Subsystem,
    Component,
}

/// Inputs of both leaf analyses of a component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPayload {
    pub thermal: ThermalParams,
    pub aging: AgingParams,
    /// Path relative to the description file.
    pub power_trace: String,
    /// Path relative to the description file.
    pub netlist: String,
    pub ser: SerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrnNode {
    pub id: String,
    pub kind: NodeKind,
    /// 1 at the root, increasing downward.
    pub level: u32,
    pub children: Vec<CrnNode>,
    pub payload: Option<ComponentPayload>,
}

impl CrnNode {
    /// Pre-order walk yielding (parent id, node).
    pub fn walk(&self) -> Vec<(Option<&str>, &CrnNode)> {
        let mut out = Vec::new();
        let mut stack = vec![(None, self)];
        while let Some((parent, node)) = stack.pop() {
            out.push((parent, node));
            for child in node.children.iter().rev() {
                stack.push((Some(node.id.as_str()), child));
            }
        }
        out
    }
}

/// Adapter chains on one parent-child edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeChain {
    /// Reliability flowing up from a subsystem.
    Pass(Vec<Adapter>),
    /// Per fault type, starting from the component's leaf analyses.
    Component(ComponentChains),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentChains {
    pub permanent: Vec<Adapter>,
    pub transient: Vec<Adapter>,
}

impl ComponentChains {
    /// Power trace through the thermal and aging models, and derated FIT to
    /// an exponential.
    pub fn standard() -> Self {
        Self {
            permanent: vec![
                Adapter::PowerToTemperature,
                Adapter::TemperatureToFailureRate,
                Adapter::FailureRateToReliability { beta: None },
            ],
            transient: vec![Adapter::FitToReliability],
        }
    }
}

/// What the permanent leaf emits (its power trace).
pub const PERMANENT_SOURCE: Port = Port::new(MeasureTag::PowerTrace, TimeUnit::Seconds);
/// What the transient leaf emits (its derated FIT).
pub const TRANSIENT_SOURCE: Port = Port::new(MeasureTag::FitRate, TimeUnit::Hours);
/// What every parent consumes.
pub const UPWARD_MEASURE: Port = Port::new(MeasureTag::Reliability, TimeUnit::Hours);

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub time_horizon_hours: f64,
    pub grid_points: usize,
    pub root: CrnNode,
    /// Keyed by child id.
    pub adapters: BTreeMap<String, EdgeChain>,
    pub success_tree: SuccessTree,
    /// Directory that relative file references resolve against.
    pub base_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thermal: Option<ThermalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aging: Option<AgingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power_trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    netlist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ser: Option<SerParams>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    name: String,
    time_horizon_hours: f64,
    grid_points: usize,
    hierarchy: NodeDoc,
    adapters: BTreeMap<String, EdgeChain>,
    success_tree: SuccessTree,
}

fn check_identifier(id: &str, node_for_error: &str) -> Result<(), ModelError> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(invalid(
            node_for_error,
            "id",
            format!("'{id}' is not a whitespace-free token"),
        ));
    }
    Ok(())
}

fn convert_node(doc: NodeDoc, level: u32, is_root: bool) -> Result<CrnNode, ModelError> {
    check_identifier(&doc.id, &doc.id)?;
    let id = doc.id;
    match (doc.kind, is_root) {
        (NodeKind::System, false) => {
            return Err(invalid(&id, "kind", "System is only allowed at the root"))
        }
        (k, true) if k != NodeKind::System => {
            return Err(invalid(&id, "kind", "the root must be a System node"))
        }
        _ => {}
    }
    let payload_fields = [
        ("thermal", doc.thermal.is_some()),
        ("aging", doc.aging.is_some()),
        ("power_trace", doc.power_trace.is_some()),
        ("netlist", doc.netlist.is_some()),
        ("ser", doc.ser.is_some()),
    ];
    let payload = if doc.kind == NodeKind::Component {
        if !doc.children.is_empty() {
            return Err(invalid(&id, "children", "components are leaves"));
        }
        if let Some((field, _)) = payload_fields.iter().find(|(_, present)| !present) {
            return Err(invalid(&id, field, "required on components"));
        }
        let p = ComponentPayload {
            thermal: doc.thermal.unwrap(),
            aging: doc.aging.unwrap(),
            power_trace: doc.power_trace.unwrap(),
            netlist: doc.netlist.unwrap(),
            ser: doc.ser.unwrap(),
        };
        p.thermal
            .validate()
            .map_err(|e| invalid(&id, "thermal", e.to_string()))?;
        p.aging
            .validate()
            .map_err(|e| invalid(&id, "aging", e.to_string()))?;
        p.ser
            .validate()
            .map_err(|e| invalid(&id, "ser", e.to_string()))?;
        Some(p)
    } else {
        if let Some((field, _)) = payload_fields.iter().find(|(_, present)| *present) {
            return Err(invalid(&id, field, "only components carry analysis inputs"));
        }
        if doc.children.is_empty() {
            return Err(invalid(&id, "children", "needs at least one child"));
        }
        None
    };
    let children = doc
        .children
        .into_iter()
        .map(|c| convert_node(c, level + 1, false))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CrnNode {
        id,
        kind: doc.kind,
        level,
        children,
        payload,
    })
}

fn node_to_doc(node: &CrnNode) -> NodeDoc {
    let p = node.payload.as_ref();
    NodeDoc {
        id: node.id.clone(),
        kind: node.kind,
        children: node.children.iter().map(node_to_doc).collect(),
        thermal: p.map(|p| p.thermal.clone()),
        aging: p.map(|p| p.aging.clone()),
        power_trace: p.map(|p| p.power_trace.clone()),
        netlist: p.map(|p| p.netlist.clone()),
        ser: p.map(|p| p.ser.clone()),
    }
}

/// Parses and validates a system description. Relative file references are
/// resolved against `base_dir` and must exist.
pub fn load_system(document: &str, base_dir: impl AsRef<Path>) -> Result<SystemModel, ModelError> {
    let base_dir = base_dir.as_ref().to_path_buf();
    let model = parse_system(document, base_dir)?;
    for (_, node) in model.root.walk() {
        if let Some(p) = &node.payload {
            let mut refs = vec![("power_trace", &p.power_trace), ("netlist", &p.netlist)];
            if let Some(w) = &p.ser.workload {
                refs.push(("ser.workload", w));
            }
            for (field, path) in refs {
                if !model.resolve(path).is_file() {
                    return Err(ModelError::DanglingFile {
                        node: node.id.clone(),
                        field: field.to_string(),
                        path: path.clone(),
                    });
                }
            }
        }
    }
    Ok(model)
}

/// Reads and loads a description file; references resolve against its
/// directory.
pub fn load_system_file(path: impl AsRef<Path>) -> Result<SystemModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_system(&text, base)
}

/// Structural validation without touching the file system.
pub fn parse_system(document: &str, base_dir: PathBuf) -> Result<SystemModel, ModelError> {
    let doc: SystemDoc =
        serde_json::from_str(document).map_err(|e| ModelError::Malformed(e.to_string()))?;
    check_identifier(&doc.name, "<system>")
        .map_err(|_| invalid("<system>", "name", "must be a whitespace-free token"))?;
    if !(doc.time_horizon_hours.is_finite() && doc.time_horizon_hours > 0.0) {
        return Err(invalid(
            "<system>",
            "time_horizon_hours",
            "must be finite and > 0",
        ));
    }
    if doc.grid_points < 2 {
        return Err(invalid(
            "<system>",
            "grid_points",
            "needs at least 2 points",
        ));
    }
    let root = convert_node(doc.hierarchy, 1, true)?;

    let mut seen = BTreeSet::new();
    let mut components = BTreeSet::new();
    let nodes = root.walk();
    for (_, node) in &nodes {
        if !seen.insert(node.id.as_str()) {
            return Err(ModelError::Duplicate {
                node: node.id.clone(),
            });
        }
        if node.kind == NodeKind::Component {
            components.insert(node.id.as_str());
        }
    }

    for event in doc.success_tree.events() {
        if !components.contains(event) {
            return Err(ModelError::UnknownEvent {
                node: root.id.clone(),
                event: event.to_string(),
            });
        }
    }

    for (parent, node) in &nodes {
        if parent.is_none() {
            continue;
        }
        let chain = doc
            .adapters
            .get(&node.id)
            .ok_or_else(|| invalid(&node.id, "adapters", "edge to parent has no adapter chain"))?;
        let shape_ok = match (node.kind, chain) {
            (NodeKind::Component, EdgeChain::Component(_)) => true,
            (NodeKind::Component, EdgeChain::Pass(_)) => false,
            (_, EdgeChain::Pass(_)) => true,
            (_, EdgeChain::Component(_)) => false,
        };
        if !shape_ok {
            let want = if node.kind == NodeKind::Component {
                "an object with 'permanent' and 'transient' chains"
            } else {
                "a list of adapters"
            };
            return Err(invalid(&node.id, "adapters", format!("expected {want}")));
        }
    }
    if let Some(stray) = doc
        .adapters
        .keys()
        .find(|k| !seen.contains(k.as_str()) || *k == &root.id)
    {
        return Err(invalid(stray, "adapters", "does not name a non-root node"));
    }

    Ok(SystemModel {
        name: doc.name,
        time_horizon_hours: doc.time_horizon_hours,
        grid_points: doc.grid_points,
        root,
        adapters: doc.adapters,
        success_tree: doc.success_tree,
        base_dir,
    })
}

/// A parent-child edge whose adapters do not produce what the parent
/// consumes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub parent: String,
    pub child: String,
    /// `permanent` or `transient` for component edges, `reliability`
    /// otherwise.
    pub path: &'static str,
    /// Adapter index where the mismatch is detected; the chain length when
    /// the chain's result is wrong.
    pub position: usize,
    pub expected: String,
    pub found: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "edge {} -> {} ({} chain, step {}): expected {}, found {}",
            self.parent, self.child, self.path, self.position, self.expected, self.found
        )
    }
}

/// Checks every edge's adapter chain against the measure its child produces
/// and its parent consumes. Returned sorted.
pub fn check_measure_compatibility(model: &SystemModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (parent, node) in model.root.walk() {
        let Some(parent) = parent else { continue };
        let Some(chain) = model.adapters.get(&node.id) else {
            continue;
        };
        let mut check = |path, source, chain: &[Adapter]| {
            if let Some(m) = check_chain(source, chain, UPWARD_MEASURE) {
                out.push(Violation {
                    parent: parent.to_string(),
                    child: node.id.clone(),
                    path,
                    position: m.position,
                    expected: m.expected.to_string(),
                    found: m.found.to_string(),
                });
            }
        };
        match chain {
            EdgeChain::Component(c) => {
                check("permanent", PERMANENT_SOURCE, &c.permanent);
                check("transient", TRANSIENT_SOURCE, &c.transient);
            }
            EdgeChain::Pass(c) => check("reliability", UPWARD_MEASURE, c),
        }
    }
    out.sort();
    out
}

impl SystemModel {
    pub fn resolve(&self, path: &str) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn components(&self) -> Vec<&CrnNode> {
        self.root
            .walk()
            .into_iter()
            .map(|(_, n)| n)
            .filter(|n| n.kind == NodeKind::Component)
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.root.walk().len()
    }

    pub fn component_chains(&self, id: &str) -> Option<&ComponentChains> {
        match self.adapters.get(id)? {
            EdgeChain::Component(c) => Some(c),
            EdgeChain::Pass(_) => None,
        }
    }

    /// Serializes back to the description format.
    pub fn to_document(&self) -> String {
        let doc = SystemDoc {
            name: self.name.clone(),
            time_horizon_hours: self.time_horizon_hours,
            grid_points: self.grid_points,
            hierarchy: node_to_doc(&self.root),
            adapters: self.adapters.clone(),
            success_tree: self.success_tree.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }
}

/// Convenience for building trees in code.
pub fn and_of(ids: &[&str]) -> SuccessTree {
    SuccessTree::new(Gate::And(ids.iter().map(|i| Gate::event(*i)).collect()))
        .expect("non-empty AND")
}

//! Success trees and their exact evaluation.
//!
//! A tree is compiled once into a reduced ordered binary decision diagram
//! whose variable order is the depth-first first appearance of each basic
//! event. Probability evaluation is then one bottom-up pass over the diagram
//! nodes, which is exact even when events are shared between branches.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest number of distinct events accepted by [`brute_force_probability`].
pub const MAX_BRUTE_FORCE_EVENTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("gate {gate} has no inputs")]
    EmptyGate { gate: &'static str },
    #[error("KOFN threshold {k} outside 1..={n}")]
    BadThreshold { k: usize, n: usize },
    #[error("gate '{0}' is not one of AND, OR, KOFN")]
    UnknownGate(String),
    #[error("k is only allowed on KOFN gates")]
    UnexpectedK,
    #[error("KOFN gate needs k")]
    MissingK,
    #[error("no probability for basic event '{0}'")]
    MissingProbability(String),
    #[error("probability for '{event}' must lie in [0, 1], got {value}")]
    BadProbability { event: String, value: f64 },
    #[error("monte carlo needs at least one sample")]
    NoSamples,
    #[error("grid time must be finite and >= 0, got {0}")]
    BadGrid(f64),
    #[error("{events} distinct events exceed the enumeration limit of {max}")]
    TooManyEvents { events: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    And(Vec<Gate>),
    Or(Vec<Gate>),
    KofN { k: usize, inputs: Vec<Gate> },
    Event(String),
}

impl Gate {
    pub fn event(id: impl Into<String>) -> Self {
        Gate::Event(id.into())
    }

    fn validate(&self) -> Result<(), TreeError> {
        let (name, inputs) = match self {
            Gate::Event(_) => return Ok(()),
            Gate::And(c) => ("AND", c),
            Gate::Or(c) => ("OR", c),
            Gate::KofN { k, inputs } => {
                if *k < 1 || *k > inputs.len() {
                    return Err(if inputs.is_empty() {
                        TreeError::EmptyGate { gate: "KOFN" }
                    } else {
                        TreeError::BadThreshold {
                            k: *k,
                            n: inputs.len(),
                        }
                    });
                }
                ("KOFN", inputs)
            }
        };
        if inputs.is_empty() {
            return Err(TreeError::EmptyGate { gate: name });
        }
        inputs.iter().try_for_each(Gate::validate)
    }

    /// Structure function under the given component states.
    pub fn evaluate<F: Fn(&str) -> bool + Copy>(&self, up: F) -> bool {
        match self {
            Gate::Event(e) => up(e),
            Gate::And(c) => c.iter().all(|g| g.evaluate(up)),
            Gate::Or(c) => c.iter().any(|g| g.evaluate(up)),
            Gate::KofN { k, inputs } => inputs.iter().filter(|g| g.evaluate(up)).count() >= *k,
        }
    }

    fn collect_events<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Gate::Event(e) => {
                if !out.contains(&e.as_str()) {
                    out.push(e);
                }
            }
            Gate::And(c) | Gate::Or(c) | Gate::KofN { inputs: c, .. } => {
                c.iter().for_each(|g| g.collect_events(out))
            }
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum RawGate {
    Event {
        event: String,
    },
    Gate {
        gate: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        inputs: Vec<RawGate>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictEvent {
    event: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictGate {
    gate: String,
    #[serde(default)]
    k: Option<usize>,
    inputs: Vec<serde_json::Value>,
}

impl Gate {
    fn from_value(v: serde_json::Value) -> Result<Self, String> {
        if v.get("event").is_some() {
            let e: StrictEvent = serde_json::from_value(v).map_err(|e| e.to_string())?;
            return Ok(Gate::Event(e.event));
        }
        let g: StrictGate = serde_json::from_value(v).map_err(|e| e.to_string())?;
        let inputs = g
            .inputs
            .into_iter()
            .map(Gate::from_value)
            .collect::<Result<Vec<_>, _>>()?;
        match (g.gate.as_str(), g.k) {
            ("AND", None) => Ok(Gate::And(inputs)),
            ("OR", None) => Ok(Gate::Or(inputs)),
            ("KOFN", Some(k)) => Ok(Gate::KofN { k, inputs }),
            ("KOFN", None) => Err(TreeError::MissingK.to_string()),
            ("AND" | "OR", Some(_)) => Err(TreeError::UnexpectedK.to_string()),
            (other, _) => Err(TreeError::UnknownGate(other.to_string()).to_string()),
        }
    }

    fn to_raw(&self) -> RawGate {
        let gate = |name: &str, k, c: &[Gate]| RawGate::Gate {
            gate: name.to_string(),
            k,
            inputs: c.iter().map(Gate::to_raw).collect(),
        };
        match self {
            Gate::Event(e) => RawGate::Event { event: e.clone() },
            Gate::And(c) => gate("AND", None, c),
            Gate::Or(c) => gate("OR", None, c),
            Gate::KofN { k, inputs } => gate("KOFN", Some(*k), inputs),
        }
    }
}

/// A coherent structure function over component basic events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessTree {
    root: Gate,
}

impl SuccessTree {
    pub fn new(root: Gate) -> Result<Self, TreeError> {
        root.validate()?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Gate {
        &self.root
    }

    /// Distinct basic events in depth-first first-appearance order.
    pub fn events(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_events(&mut out);
        out
    }

    pub fn evaluate<F: Fn(&str) -> bool + Copy>(&self, up: F) -> bool {
        self.root.evaluate(up)
    }

    pub fn compile(&self) -> CompiledTree {
        CompiledTree::new(self)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let root = Gate::from_value(v)?;
        SuccessTree::new(root).map_err(|e| e.to_string())
    }
}

impl Serialize for SuccessTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.root.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SuccessTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let root = Gate::from_value(v).map_err(serde::de::Error::custom)?;
        SuccessTree::new(root).map_err(serde::de::Error::custom)
    }
}

const FALSE: u32 = 0;
const TRUE: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
}

struct Builder {
    /// (variable, low child, high child); entries 0 and 1 are the terminals.
    nodes: Vec<(u32, u32, u32)>,
    unique: HashMap<(u32, u32, u32), u32>,
    cache: HashMap<(Op, u32, u32), u32>,
}

impl Builder {
    fn new() -> Self {
        Self {
            nodes: vec![(u32::MAX, FALSE, FALSE), (u32::MAX, TRUE, TRUE)],
            unique: HashMap::new(),
            cache: HashMap::new(),
        }
    }

    fn var(&self, n: u32) -> u32 {
        self.nodes[n as usize].0
    }

    fn mk(&mut self, var: u32, lo: u32, hi: u32) -> u32 {
        if lo == hi {
            return lo;
        }
        if let Some(&id) = self.unique.get(&(var, lo, hi)) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push((var, lo, hi));
        self.unique.insert((var, lo, hi), id);
        id
    }

    fn apply(&mut self, op: Op, a: u32, b: u32) -> u32 {
        match (op, a, b) {
            (Op::And, FALSE, _) | (Op::And, _, FALSE) => return FALSE,
            (Op::And, TRUE, x) | (Op::And, x, TRUE) => return x,
            (Op::Or, TRUE, _) | (Op::Or, _, TRUE) => return TRUE,
            (Op::Or, FALSE, x) | (Op::Or, x, FALSE) => return x,
            _ => {}
        }
        if a == b {
            return a;
        }
        let key = (op, a.min(b), a.max(b));
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let (va, vb) = (self.var(a), self.var(b));
        let top = va.min(vb);
        let (a_lo, a_hi) = if va == top {
            (self.nodes[a as usize].1, self.nodes[a as usize].2)
        } else {
            (a, a)
        };
        let (b_lo, b_hi) = if vb == top {
            (self.nodes[b as usize].1, self.nodes[b as usize].2)
        } else {
            (b, b)
        };
        let lo = self.apply(op, a_lo, b_lo);
        let hi = self.apply(op, a_hi, b_hi);
        let r = self.mk(top, lo, hi);
        self.cache.insert(key, r);
        r
    }

    fn build(&mut self, gate: &Gate, order: &HashMap<&str, u32>) -> u32 {
        match gate {
            Gate::Event(e) => {
                let v = order[e.as_str()];
                self.mk(v, FALSE, TRUE)
            }
            Gate::And(c) | Gate::Or(c) => {
                let op = if matches!(gate, Gate::And(_)) {
                    Op::And
                } else {
                    Op::Or
                };
                let mut acc = if op == Op::And { TRUE } else { FALSE };
                for child in c {
                    let x = self.build(child, order);
                    acc = self.apply(op, acc, x);
                }
                acc
            }
            Gate::KofN { k, inputs } => {
                let kids: Vec<u32> = inputs.iter().map(|g| self.build(g, order)).collect();
                let mut memo = HashMap::new();
                self.at_least(*k, 0, &kids, &mut memo)
            }
        }
    }

    /// At least `k` of `kids[i..]` hold.
    fn at_least(
        &mut self,
        k: usize,
        i: usize,
        kids: &[u32],
        memo: &mut HashMap<(usize, usize), u32>,
    ) -> u32 {
        if k == 0 {
            return TRUE;
        }
        if kids.len() - i < k {
            return FALSE;
        }
        if let Some(&r) = memo.get(&(k, i)) {
            return r;
        }
        let with = self.at_least(k - 1, i + 1, kids, memo);
        let with = self.apply(Op::And, kids[i], with);
        let without = self.at_least(k, i + 1, kids, memo);
        let r = self.apply(Op::Or, with, without);
        memo.insert((k, i), r);
        r
    }
}

/// A success tree compiled to a decision diagram, ready for repeated
/// probability evaluation.
#[derive(Debug, Clone)]
pub struct CompiledTree {
    events: Vec<String>,
    nodes: Vec<(u32, u32, u32)>,
    root: u32,
}

impl CompiledTree {
    fn new(tree: &SuccessTree) -> Self {
        let events: Vec<String> = tree.events().into_iter().map(String::from).collect();
        let order: HashMap<&str, u32> = events
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_str(), i as u32))
            .collect();
        let mut b = Builder::new();
        let root = b.build(&tree.root, &order);
        // keep only nodes reachable from the root; ids stay topologically
        // ordered because the compacted list preserves creation order
        let mut live = vec![false; b.nodes.len()];
        live[FALSE as usize] = true;
        live[TRUE as usize] = true;
        live[root as usize] = true;
        for id in (2..=root as usize).rev() {
            if live[id] {
                let (_, lo, hi) = b.nodes[id];
                live[lo as usize] = true;
                live[hi as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; b.nodes.len()];
        let mut nodes = Vec::new();
        for (id, &(v, lo, hi)) in b.nodes.iter().enumerate().take(root.max(TRUE) as usize + 1) {
            if live[id] {
                remap[id] = nodes.len() as u32;
                let node = if id <= TRUE as usize {
                    (v, lo, hi)
                } else {
                    (v, remap[lo as usize], remap[hi as usize])
                };
                nodes.push(node);
            }
        }
        let root = remap[root as usize];
        Self {
            events,
            nodes,
            root,
        }
    }

    /// Events in variable order; `probability` expects probabilities in this
    /// order.
    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn diagram_size(&self) -> usize {
        self.nodes.len()
    }

    /// Probability that the structure function holds, given independent
    /// event probabilities in [`CompiledTree::events`] order. Children are
    /// always created before their parents, so one forward pass suffices.
    pub fn probability(&self, probs: &[f64]) -> f64 {
        debug_assert_eq!(probs.len(), self.events.len());
        let mut p = vec![0.0; self.nodes.len()];
        p[TRUE as usize] = 1.0;
        for id in 2..=self.root as usize {
            let (v, lo, hi) = self.nodes[id];
            let q = probs[v as usize];
            p[id] = q * p[hi as usize] + (1.0 - q) * p[lo as usize];
        }
        p[self.root as usize]
    }

    /// Structure function for a full state vector in variable order.
    pub fn holds(&self, up: &[bool]) -> bool {
        let mut n = self.root;
        while n > TRUE {
            let (v, lo, hi) = self.nodes[n as usize];
            n = if up[v as usize] { hi } else { lo };
        }
        n == TRUE
    }

    /// Looks up and checks event probabilities by name.
    pub fn ordered_probs(&self, probs: &BTreeMap<String, f64>) -> Result<Vec<f64>, TreeError> {
        self.events
            .iter()
            .map(|e| {
                let v = *probs
                    .get(e)
                    .ok_or_else(|| TreeError::MissingProbability(e.clone()))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(TreeError::BadProbability {
                        event: e.clone(),
                        value: v,
                    });
                }
                Ok(v)
            })
            .collect()
    }
}

/// Exact success probability under independent basic events.
pub fn tree_probability(
    tree: &SuccessTree,
    probs: &BTreeMap<String, f64>,
) -> Result<f64, TreeError> {
    let compiled = tree.compile();
    let ordered = compiled.ordered_probs(probs)?;
    Ok(compiled.probability(&ordered))
}

/// Sum over all 2^n event states of structure value times state probability.
pub fn brute_force_probability(
    tree: &SuccessTree,
    probs: &BTreeMap<String, f64>,
) -> Result<f64, TreeError> {
    let events = tree.events();
    if events.len() > MAX_BRUTE_FORCE_EVENTS {
        return Err(TreeError::TooManyEvents {
            events: events.len(),
            max: MAX_BRUTE_FORCE_EVENTS,
        });
    }
    let mut p = Vec::with_capacity(events.len());
    for e in &events {
        let v = *probs
            .get(*e)
            .ok_or_else(|| TreeError::MissingProbability(e.to_string()))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(TreeError::BadProbability {
                event: e.to_string(),
                value: v,
            });
        }
        p.push(v);
    }
    let position: HashMap<&str, usize> = events.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut total = 0.0;
    for state in 0u64..(1u64 << events.len()) {
        let up = |e: &str| state >> position[e] & 1 == 1;
        if tree.evaluate(up) {
            total += p
                .iter()
                .enumerate()
                .map(|(i, &q)| if state >> i & 1 == 1 { q } else { 1.0 - q })
                .product::<f64>();
        }
    }
    Ok(total)
}

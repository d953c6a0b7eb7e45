//! Combinational gate netlists: parsing and bit-parallel evaluation.
//!
//! Nets are numbered in declaration order: primary inputs first, then one net
//! per gate. Since a gate may only read nets defined on earlier lines, gate
//! order is already a topological order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown gate kind '{kind}'")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: net '{net}' is never defined")]
    Undeclared { line: usize, net: String },
    #[error("line {line}: net '{net}' already defined on line {first_line}")]
    Duplicate {
        line: usize,
        net: String,
        first_line: usize,
    },
    #[error("line {line}: net '{net}' is used before its definition on line {defined_line}")]
    ForwardReference {
        line: usize,
        net: String,
        defined_line: usize,
    },
    #[error("line {line}: {kind} expects {expected} input(s), found {found}")]
    Arity {
        line: usize,
        kind: GateKind,
        expected: &'static str,
        found: usize,
    },
    #[error("line {line}: output '{net}' declared twice")]
    DuplicateOutput { line: usize, net: String },
    #[error("netlist declares no outputs")]
    NoOutputs,
    #[error("assignment has {found} bits but the netlist has {expected} inputs")]
    AssignmentWidth { expected: usize, found: usize },
    #[error("unknown net '{0}'")]
    UnknownNet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Not,
    Xor,
    Nand,
    Nor,
    Buf,
}

impl GateKind {
    fn unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Xor => "XOR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Buf => "BUF",
        }
    }

    /// Evaluates the gate on 64 packed lanes.
    #[inline]
    fn eval(self, ins: &[usize], nets: &[u64]) -> u64 {
        let mut it = ins.iter().map(|&i| nets[i]);
        let first = it.next().unwrap_or(0);
        match self {
            GateKind::Buf => first,
            GateKind::Not => !first,
            GateKind::And => it.fold(first, |a, b| a & b),
            GateKind::Nand => !it.fold(first, |a, b| a & b),
            GateKind::Or => it.fold(first, |a, b| a | b),
            GateKind::Nor => !it.fold(first, |a, b| a | b),
            GateKind::Xor => it.fold(first, |a, b| a ^ b),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "AND" => GateKind::And,
            "OR" => GateKind::Or,
            "NOT" => GateKind::Not,
            "XOR" => GateKind::Xor,
            "NAND" => GateKind::Nand,
            "NOR" => GateKind::Nor,
            "BUF" => GateKind::Buf,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    /// Net indices.
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    names: Vec<String>,
    index: HashMap<String, usize>,
    num_inputs: usize,
    gates: Vec<Gate>,
    outputs: Vec<usize>,
}

enum Line<'a> {
    Input(&'a str),
    Gate {
        out: &'a str,
        kind: GateKind,
        ins: Vec<&'a str>,
    },
    Output(&'a str),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Line<'_>)>, NetlistError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = body.split_whitespace();
        let Some(head) = toks.next() else { continue };
        let rest: Vec<&str> = toks.collect();
        let syntax = |message: String| NetlistError::Syntax { line, message };
        let parsed = match head {
            "INPUT" | "OUTPUT" => {
                if rest.len() != 1 {
                    return Err(syntax(format!("{head} takes exactly one net name")));
                }
                if head == "INPUT" {
                    Line::Input(rest[0])
                } else {
                    Line::Output(rest[0])
                }
            }
            "GATE" => {
                if rest.len() < 2 {
                    return Err(syntax("GATE needs an output net and a kind".into()));
                }
                let kind = rest[1]
                    .parse::<GateKind>()
                    .map_err(|_| NetlistError::UnknownKind {
                        line,
                        kind: rest[1].to_string(),
                    })?;
                let ins = rest[2..].to_vec();
                let ok = if kind.unary() {
                    ins.len() == 1
                } else {
                    ins.len() >= 2
                };
                if !ok {
                    return Err(NetlistError::Arity {
                        line,
                        kind,
                        expected: if kind.unary() {
                            "exactly 1"
                        } else {
                            "at least 2"
                        },
                        found: ins.len(),
                    });
                }
                Line::Gate {
                    out: rest[0],
                    kind,
                    ins,
                }
            }
            other => return Err(syntax(format!("unknown directive '{other}'"))),
        };
        lines.push((line, parsed));
    }
    Ok(lines)
}

impl Netlist {
    /// Parses the line-oriented `INPUT` / `GATE` / `OUTPUT` format. `OUTPUT`
    /// lines may appear anywhere, but a gate may only read nets defined on
    /// earlier lines.
    pub fn parse(text: &str) -> Result<Self, NetlistError> {
        let lines = tokenize(text)?;

        // First pass: where is every net defined?
        let mut defined_at: HashMap<&str, usize> = HashMap::new();
        for (line, l) in &lines {
            let name = match l {
                Line::Input(n) => *n,
                Line::Gate { out, .. } => *out,
                Line::Output(_) => continue,
            };
            if let Some(&first_line) = defined_at.get(name) {
                return Err(NetlistError::Duplicate {
                    line: *line,
                    net: name.to_string(),
                    first_line,
                });
            }
            defined_at.insert(name, *line);
        }

        let mut names = Vec::new();
        let mut index = HashMap::new();
        // inputs are numbered ahead of gates regardless of interleaving
        for (_, l) in &lines {
            if let Line::Input(n) = l {
                index.insert(n.to_string(), names.len());
                names.push(n.to_string());
            }
        }
        let num_inputs = names.len();

        let mut gates = Vec::new();
        for (line, l) in &lines {
            if let Line::Gate { out, kind, ins } = l {
                let mut inputs = Vec::with_capacity(ins.len());
                for &net in ins {
                    if let Some(&defined_line) = defined_at.get(net) {
                        if defined_line >= *line {
                            return Err(NetlistError::ForwardReference {
                                line: *line,
                                net: net.to_string(),
                                defined_line,
                            });
                        }
                    }
                    match index.get(net) {
                        Some(&i) => inputs.push(i),
                        None => {
                            return Err(match defined_at.get(net) {
                                Some(&defined_line) => NetlistError::ForwardReference {
                                    line: *line,
                                    net: net.to_string(),
                                    defined_line,
                                },
                                None => NetlistError::Undeclared {
                                    line: *line,
                                    net: net.to_string(),
                                },
                            })
                        }
                    }
                }
                index.insert(out.to_string(), names.len());
                names.push(out.to_string());
                gates.push(Gate {
                    kind: *kind,
                    inputs,
                });
            }
        }

        let mut outputs = Vec::new();
        let mut seen_out: HashMap<usize, usize> = HashMap::new();
        for (line, l) in &lines {
            if let Line::Output(n) = l {
                let Some(&i) = index.get(*n) else {
                    return Err(NetlistError::Undeclared {
                        line: *line,
                        net: n.to_string(),
                    });
                };
                if seen_out.insert(i, *line).is_some() {
                    return Err(NetlistError::DuplicateOutput {
                        line: *line,
                        net: n.to_string(),
                    });
                }
                outputs.push(i);
            }
        }
        if outputs.is_empty() {
            return Err(NetlistError::NoOutputs);
        }

        Ok(Self {
            names,
            index,
            num_inputs,
            gates,
            outputs,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_nets(&self) -> usize {
        self.names.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_names(&self) -> &[String] {
        &self.names[..self.num_inputs]
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs
            .iter()
            .map(|&i| self.names[i].as_str())
            .collect()
    }

    pub fn net_names(&self) -> &[String] {
        &self.names
    }

    pub fn net_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub(crate) fn output_indices(&self) -> &[usize] {
        &self.outputs
    }

    /// Nets whose flip can be observed at all: those with a path to an
    /// output. Other nets are masked unconditionally.
    pub fn reaches_output(&self, net: usize) -> bool {
        let cone = self.fanout_cone(net);
        self.outputs
            .iter()
            .any(|&o| o == net || cone.iter().any(|&g| g + self.num_inputs == o))
    }

    /// Gate indices (ascending) transitively driven by `net`.
    pub(crate) fn fanout_cone(&self, net: usize) -> Vec<usize> {
        let mut affected = vec![false; self.names.len()];
        affected[net] = true;
        let mut cone = Vec::new();
        for (g, gate) in self.gates.iter().enumerate() {
            if gate.inputs.iter().any(|&i| affected[i]) {
                affected[g + self.num_inputs] = true;
                cone.push(g);
            }
        }
        cone
    }

    /// Golden simulation of 64 packed input vectors; `nets` must be sized to
    /// `num_nets` with the inputs already filled in.
    pub(crate) fn propagate(&self, nets: &mut [u64]) {
        for (g, gate) in self.gates.iter().enumerate() {
            nets[g + self.num_inputs] = gate.kind.eval(&gate.inputs, nets);
        }
    }

    pub(crate) fn propagate_cone(&self, nets: &mut [u64], cone: &[usize]) {
        for &g in cone {
            let gate = &self.gates[g];
            nets[g + self.num_inputs] = gate.kind.eval(&gate.inputs, nets);
        }
    }

    /// Values of every net for one input vector.
    pub fn evaluate_all(&self, assignment: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if assignment.len() != self.num_inputs {
            return Err(NetlistError::AssignmentWidth {
                expected: self.num_inputs,
                found: assignment.len(),
            });
        }
        let mut nets = vec![0u64; self.names.len()];
        for (slot, &bit) in nets.iter_mut().zip(assignment) {
            *slot = if bit { !0 } else { 0 };
        }
        self.propagate(&mut nets);
        Ok(nets.iter().map(|&w| w & 1 == 1).collect())
    }

    /// Primary output values for one input vector, in declaration order.
    pub fn evaluate(&self, assignment: &[bool]) -> Result<Vec<bool>, NetlistError> {
        let all = self.evaluate_all(assignment)?;
        Ok(self.outputs.iter().map(|&o| all[o]).collect())
    }

    /// Evaluates with input values given by name; every primary input must be
    /// present.
    pub fn evaluate_named(
        &self,
        values: &HashMap<String, bool>,
    ) -> Result<Vec<bool>, NetlistError> {
        let mut bits = Vec::with_capacity(self.num_inputs);
        for name in self.input_names() {
            match values.get(name) {
                Some(&b) => bits.push(b),
                None => return Err(NetlistError::UnknownNet(name.clone())),
            }
        }
        self.evaluate(&bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const FULL_ADDER: &str = "\
# full adder
INPUT a
INPUT b
INPUT cin
GATE x1 XOR a b
GATE s XOR x1 cin
GATE a1 AND a b
GATE a2 AND x1 cin
GATE cout OR a1 a2
OUTPUT s
OUTPUT cout
";

    #[test]
    fn minimal_and() {
        let n = Netlist::parse("INPUT a\nINPUT b\nGATE g1 AND a b\nOUTPUT g1\n").unwrap();
        assert_eq!(n.num_inputs(), 2);
        assert_eq!(n.gates().len(), 1);
        assert_eq!(n.evaluate(&[true, true]).unwrap(), vec![true]);
        assert_eq!(n.evaluate(&[true, false]).unwrap(), vec![false]);
    }

    #[test]
    fn full_adder_shape_and_truth_table() {
        let n = Netlist::parse(FULL_ADDER).unwrap();
        assert_eq!(
            (n.num_inputs(), n.gates().len(), n.output_names().len()),
            (3, 5, 2)
        );
        for v in 0u32..8 {
            let bits: Vec<bool> = (0..3).map(|i| v >> i & 1 == 1).collect();
            let sum = bits.iter().filter(|&&b| b).count();
            assert_eq!(n.evaluate(&bits).unwrap(), vec![sum & 1 == 1, sum >= 2]);
        }
    }

    #[test]
    fn xor_parity_chain() {
        let n = Netlist::parse("INPUT a\nINPUT b\nINPUT c\nGATE p XOR a b c\nOUTPUT p\n").unwrap();
        assert_eq!(n.evaluate(&[true, true, true]).unwrap(), vec![true]);
    }

    #[test]
    fn every_kind() {
        let src = "INPUT a\nINPUT b\nGATE n NOT a\nGATE bf BUF b\nGATE na NAND a b\nGATE no NOR a b\nGATE o OR a b\n\
                   OUTPUT n\nOUTPUT bf\nOUTPUT na\nOUTPUT no\nOUTPUT o\n";
        let n = Netlist::parse(src).unwrap();
        assert_eq!(
            n.evaluate(&[true, false]).unwrap(),
            vec![false, false, true, false, true]
        );
        assert_eq!(
            n.evaluate(&[false, false]).unwrap(),
            vec![true, false, true, true, false]
        );
    }

    #[test]
    fn forward_reference_names_both_lines() {
        let err =
            Netlist::parse("INPUT a\nGATE g1 AND a g2\nGATE g2 NOT a\nOUTPUT g1\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::ForwardReference {
                line: 2,
                net: "g2".into(),
                defined_line: 3
            }
        );
    }

    #[test]
    fn self_loop_is_forward_reference() {
        let err = Netlist::parse("INPUT a\nGATE g AND a g\nOUTPUT g\n").unwrap_err();
        assert!(
            matches!(err, NetlistError::ForwardReference { line: 2, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn parse_errors_carry_lines() {
        let cases: &[(&str, NetlistError)] = &[
            (
                "INPUT a\nGATE g AND a zz\nOUTPUT g\n",
                NetlistError::Undeclared {
                    line: 2,
                    net: "zz".into(),
                },
            ),
            (
                "INPUT a\nINPUT a\nOUTPUT a\n",
                NetlistError::Duplicate {
                    line: 2,
                    net: "a".into(),
                    first_line: 1,
                },
            ),
            (
                "INPUT a\nINPUT b\nGATE g NOT a b\nOUTPUT g\n",
                NetlistError::Arity {
                    line: 3,
                    kind: GateKind::Not,
                    expected: "exactly 1",
                    found: 2,
                },
            ),
            (
                "INPUT a\nGATE g AND a\nOUTPUT g\n",
                NetlistError::Arity {
                    line: 2,
                    kind: GateKind::And,
                    expected: "at least 2",
                    found: 1,
                },
            ),
            (
                "INPUT a\nGATE g MUX a a\nOUTPUT g\n",
                NetlistError::UnknownKind {
                    line: 2,
                    kind: "MUX".into(),
                },
            ),
            (
                "INPUT a\nOUTPUT b\n",
                NetlistError::Undeclared {
                    line: 2,
                    net: "b".into(),
                },
            ),
            ("INPUT a\n", NetlistError::NoOutputs),
            (
                "INPUT a\nOUTPUT a\nOUTPUT a\n",
                NetlistError::DuplicateOutput {
                    line: 3,
                    net: "a".into(),
                },
            ),
        ];
        for (src, want) in cases {
            assert_eq!(&Netlist::parse(src).unwrap_err(), want, "{src}");
        }
        assert!(matches!(
            Netlist::parse("WIRE a\n"),
            Err(NetlistError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn late_input_is_forward_reference() {
        let err = Netlist::parse("INPUT a\nGATE g AND a b\nINPUT b\nOUTPUT g\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::ForwardReference {
                line: 2,
                net: "b".into(),
                defined_line: 3
            }
        );
    }

    #[test]
    fn output_may_precede_definition() {
        let n = Netlist::parse("OUTPUT g # later\nINPUT a\nGATE g NOT a\n").unwrap();
        assert_eq!(n.evaluate(&[false]).unwrap(), vec![true]);
    }

    #[test]
    fn missing_input_bit() {
        let n = Netlist::parse(FULL_ADDER).unwrap();
        assert!(matches!(
            n.evaluate(&[true]),
            Err(NetlistError::AssignmentWidth {
                expected: 3,
                found: 1
            })
        ));
        let mut named = HashMap::new();
        named.insert("a".to_string(), true);
        assert!(n.evaluate_named(&named).is_err());
    }

    #[test]
    fn dangling_net_does_not_reach_output() {
        let n = Netlist::parse("INPUT a\nINPUT b\nGATE d NOT a\nGATE o BUF b\nOUTPUT o\n").unwrap();
        assert!(!n.reaches_output(n.net_index("d").unwrap()));
        assert!(!n.reaches_output(n.net_index("a").unwrap()));
        assert!(n.reaches_output(n.net_index("b").unwrap()));
    }
}

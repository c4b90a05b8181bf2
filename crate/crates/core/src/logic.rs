// SPDX-License-Identifier: Apache-2.0
//! Gate-level and majority-level logic representations.
//!
//! A [`Netlist`] is the AND/OR/NOT/XOR reference form of an operation. A
//! [`MajGraph`] is the majority-of-three form with complement flags living on
//! edges. Both evaluate bit-parallel (64 assignments per machine word), which
//! is what the exhaustive [`truth_table`] and [`equivalent`] checks use.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest input count accepted by exhaustive enumeration.
pub const MAX_TABLE_INPUTS: usize = 16;

/// Reference to a signal: a primary input, a constant, or an earlier node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ref {
    Input(usize),
    Const(bool),
    Node(usize),
}

impl Ref {
    fn word(self, inputs: &[u64], nodes: &[u64]) -> u64 {
        match self {
            Ref::Input(i) => inputs[i],
            Ref::Const(false) => 0,
            Ref::Const(true) => !0,
            Ref::Node(n) => nodes[n],
        }
    }

    fn check(self, inputs: usize, before: usize, what: &str) -> Result<()> {
        match self {
            Ref::Input(i) if i >= inputs => Err(Error::Malformed(format!(
                "{what} references input {i} but only {inputs} inputs exist"
            ))),
            Ref::Node(n) if n >= before => Err(Error::Malformed(format!(
                "{what} references node {n} which is not defined before it"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Not,
    Xor,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Not => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Xor => "XOR",
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AND" => Ok(GateKind::And),
            "OR" => Ok(GateKind::Or),
            "NOT" => Ok(GateKind::Not),
            "XOR" => Ok(GateKind::Xor),
            other => Err(Error::Malformed(format!("unknown gate kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub operands: Vec<Ref>,
}

/// Topologically ordered AND/OR/NOT/XOR circuit. Gate `i` is `Ref::Node(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    inputs: Vec<String>,
    gates: Vec<Gate>,
    outputs: Vec<Ref>,
}

impl Netlist {
    pub fn new(inputs: Vec<String>, gates: Vec<Gate>, outputs: Vec<Ref>) -> Result<Self> {
        for (i, g) in gates.iter().enumerate() {
            if g.operands.len() != g.kind.arity() {
                return Err(Error::Malformed(format!(
                    "gate {i} ({}) has {} operands, expected {}",
                    g.kind.name(),
                    g.operands.len(),
                    g.kind.arity()
                )));
            }
            for r in &g.operands {
                r.check(inputs.len(), i, &format!("gate {i}"))?;
            }
        }
        for r in &outputs {
            r.check(inputs.len(), gates.len(), "output")?;
        }
        Ok(Self {
            inputs,
            gates,
            outputs,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Ref] {
        &self.outputs
    }

    /// Parses the line-oriented text form (`inputs <n>`, `g<id> = KIND ...`,
    /// `outputs ...`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut input_count: Option<usize> = None;
        let mut ids: std::collections::HashMap<String, usize> = Default::default();
        let mut gates = Vec::new();
        let mut outputs: Option<Vec<Ref>> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line, msg };
            if outputs.is_some() {
                return Err(perr("content after `outputs` footer".into()));
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            let resolve = |tok: &str| -> Result<Ref> {
                match tok {
                    "0" => Ok(Ref::Const(false)),
                    "1" => Ok(Ref::Const(true)),
                    t if t.starts_with("in") => {
                        let i: usize = t[2..]
                            .parse()
                            .map_err(|_| perr(format!("bad input reference `{t}`")))?;
                        match input_count {
                            Some(n) if i < n => Ok(Ref::Input(i)),
                            _ => Err(perr(format!("input `{t}` out of range"))),
                        }
                    }
                    t if t.starts_with('g') => ids
                        .get(t)
                        .map(|&g| Ref::Node(g))
                        .ok_or_else(|| perr(format!("gate `{t}` used before definition"))),
                    t => Err(perr(format!("unknown operand `{t}`"))),
                }
            };
            match toks[0] {
                "inputs" => {
                    if input_count.is_some() || toks.len() != 2 {
                        return Err(perr("malformed `inputs` header".into()));
                    }
                    input_count = Some(
                        toks[1]
                            .parse()
                            .map_err(|_| perr(format!("bad input count `{}`", toks[1])))?,
                    );
                }
                "outputs" => {
                    if input_count.is_none() {
                        return Err(perr("`outputs` before `inputs` header".into()));
                    }
                    let refs = toks[1..]
                        .iter()
                        .map(|t| resolve(t))
                        .collect::<Result<_>>()?;
                    outputs = Some(refs);
                }
                name if name.starts_with('g') => {
                    if input_count.is_none() {
                        return Err(perr("gate before `inputs` header".into()));
                    }
                    if name[1..].parse::<u64>().is_err() {
                        return Err(perr(format!("bad gate id `{name}`")));
                    }
                    if toks.len() < 3 || toks[1] != "=" {
                        return Err(perr("expected `g<id> = KIND operands...`".into()));
                    }
                    let kind: GateKind = toks[2].parse().map_err(|e: Error| perr(e.to_string()))?;
                    let operands = toks[3..]
                        .iter()
                        .map(|t| resolve(t))
                        .collect::<Result<Vec<_>>>()?;
                    if operands.len() != kind.arity() {
                        return Err(perr(format!(
                            "{} takes {} operands, got {}",
                            kind.name(),
                            kind.arity(),
                            operands.len()
                        )));
                    }
                    if ids.insert(name.to_string(), gates.len()).is_some() {
                        return Err(perr(format!("gate `{name}` defined twice")));
                    }
                    gates.push(Gate { kind, operands });
                }
                other => return Err(perr(format!("unexpected token `{other}`"))),
            }
        }
        let n = input_count.ok_or(Error::Parse {
            line: 0,
            msg: "missing `inputs` header".into(),
        })?;
        let outputs = outputs.ok_or(Error::Parse {
            line: 0,
            msg: "missing `outputs` footer".into(),
        })?;
        Netlist::new((0..n).map(|i| format!("in{i}")).collect(), gates, outputs)
    }
}

fn fmt_netlist_ref(r: Ref) -> String {
    match r {
        Ref::Input(i) => format!("in{i}"),
        Ref::Const(b) => (b as u8).to_string(),
        Ref::Node(g) => format!("g{g}"),
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inputs {}", self.inputs.len())?;
        for (i, g) in self.gates.iter().enumerate() {
            write!(f, "g{i} = {}", g.kind.name())?;
            for r in &g.operands {
                write!(f, " {}", fmt_netlist_ref(*r))?;
            }
            writeln!(f)?;
        }
        write!(f, "outputs")?;
        for r in &self.outputs {
            write!(f, " {}", fmt_netlist_ref(*r))?;
        }
        writeln!(f)
    }
}

/// Majority operand: a reference plus an optional complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub target: Ref,
    pub complemented: bool,
}

impl Edge {
    pub const fn new(target: Ref, complemented: bool) -> Self {
        Self {
            target,
            complemented,
        }
    }

    pub const fn plain(target: Ref) -> Self {
        Self::new(target, false)
    }

    pub const fn zero() -> Self {
        Self::plain(Ref::Const(false))
    }

    pub const fn one() -> Self {
        Self::plain(Ref::Const(true))
    }

    pub fn input(i: usize) -> Self {
        Self::plain(Ref::Input(i))
    }

    pub fn node(n: usize) -> Self {
        Self::plain(Ref::Node(n))
    }

    #[must_use]
    pub fn not(self) -> Self {
        Self::new(self.target, !self.complemented)
    }

    fn word(self, inputs: &[u64], nodes: &[u64]) -> u64 {
        let w = self.target.word(inputs, nodes);
        if self.complemented {
            !w
        } else {
            w
        }
    }
}

impl std::ops::Not for Edge {
    type Output = Edge;

    fn not(self) -> Edge {
        Edge::not(self)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.complemented {
            write!(f, "~")?;
        }
        match self.target {
            Ref::Input(i) => write!(f, "i{i}"),
            Ref::Const(b) => write!(f, "{}", b as u8),
            Ref::Node(n) => write!(f, "n{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MajNode {
    pub operands: [Edge; 3],
}

/// Majority-inverter graph in topological order. Node `i` is `Ref::Node(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MajGraph {
    inputs: Vec<String>,
    nodes: Vec<MajNode>,
    outputs: Vec<Edge>,
}

impl MajGraph {
    pub fn new(inputs: Vec<String>, nodes: Vec<MajNode>, outputs: Vec<Edge>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            for e in &n.operands {
                e.target.check(inputs.len(), i, &format!("node {i}"))?;
            }
        }
        for e in &outputs {
            e.target.check(inputs.len(), nodes.len(), "output")?;
        }
        Ok(Self {
            inputs,
            nodes,
            outputs,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn nodes(&self) -> &[MajNode] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[Edge] {
        &self.outputs
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Longest input-to-output path counted in majority nodes.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.nodes.len()];
        let lvl = |level: &[usize], e: &Edge| match e.target {
            Ref::Node(n) => level[n],
            _ => 0,
        };
        for (i, n) in self.nodes.iter().enumerate() {
            level[i] = 1 + n.operands.iter().map(|e| lvl(&level, e)).max().unwrap_or(0);
        }
        self.outputs
            .iter()
            .map(|e| lvl(&level, e))
            .max()
            .unwrap_or(0)
    }

    /// Number of operand and output references to each node.
    pub fn fanout_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nodes.len()];
        let edges = self
            .nodes
            .iter()
            .flat_map(|n| n.operands.iter())
            .chain(self.outputs.iter());
        for e in edges {
            if let Ref::Node(n) = e.target {
                counts[n] += 1;
            }
        }
        counts
    }
}

impl fmt::Display for MajGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inputs {}", self.inputs.len())?;
        for (i, n) in self.nodes.iter().enumerate() {
            let [a, b, c] = n.operands;
            writeln!(f, "n{i} = MAJ {a} {b} {c}")?;
        }
        write!(f, "outputs")?;
        for e in &self.outputs {
            write!(f, " {e}")?;
        }
        writeln!(f)
    }
}

#[inline]
pub fn maj(a: u64, b: u64, c: u64) -> u64 {
    (a & b) | (b & c) | (a & c)
}

/// Anything that evaluates a fixed number of input bits to output bits.
pub trait LogicFn {
    fn input_count(&self) -> usize;
    fn output_count(&self) -> usize;

    /// Bit-parallel evaluation: bit `k` of every word is one assignment.
    fn eval_words(&self, inputs: &[u64]) -> Result<Vec<u64>>;

    fn eval(&self, assignment: &[bool]) -> Result<Vec<bool>> {
        let words: Vec<u64> = assignment.iter().map(|&b| if b { 1 } else { 0 }).collect();
        Ok(self
            .eval_words(&words)?
            .into_iter()
            .map(|w| w & 1 == 1)
            .collect())
    }
}

fn check_arity(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::InputArity { expected, got });
    }
    Ok(())
}

impl LogicFn for Netlist {
    fn input_count(&self) -> usize {
        self.inputs.len()
    }

    fn output_count(&self) -> usize {
        self.outputs.len()
    }

    fn eval_words(&self, inputs: &[u64]) -> Result<Vec<u64>> {
        check_arity(self.inputs.len(), inputs.len())?;
        let mut vals = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let a = g.operands[0].word(inputs, &vals);
            let v = match g.kind {
                GateKind::Not => !a,
                GateKind::And => a & g.operands[1].word(inputs, &vals),
                GateKind::Or => a | g.operands[1].word(inputs, &vals),
                GateKind::Xor => a ^ g.operands[1].word(inputs, &vals),
            };
            vals.push(v);
        }
        Ok(self.outputs.iter().map(|r| r.word(inputs, &vals)).collect())
    }
}

impl LogicFn for MajGraph {
    fn input_count(&self) -> usize {
        self.inputs.len()
    }

    fn output_count(&self) -> usize {
        self.outputs.len()
    }

    fn eval_words(&self, inputs: &[u64]) -> Result<Vec<u64>> {
        check_arity(self.inputs.len(), inputs.len())?;
        let mut vals = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let [a, b, c] = n.operands.map(|e| e.word(inputs, &vals));
            vals.push(maj(a, b, c));
        }
        Ok(self.outputs.iter().map(|e| e.word(inputs, &vals)).collect())
    }
}

pub fn eval_netlist(netlist: &Netlist, assignment: &[bool]) -> Result<Vec<bool>> {
    netlist.eval(assignment)
}

pub fn eval_majgraph(graph: &MajGraph, assignment: &[bool]) -> Result<Vec<bool>> {
    graph.eval(assignment)
}

/// Exhaustive truth table, stored one bitset per output. Row `r` assigns bit
/// `j` of `r` to input `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    input_count: usize,
    columns: Vec<Vec<u64>>,
}

impl TruthTable {
    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn output_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        1 << self.input_count
    }

    pub fn get(&self, row: usize, output: usize) -> bool {
        (self.columns[output][row / 64] >> (row % 64)) & 1 == 1
    }

    pub fn row(&self, row: usize) -> Vec<bool> {
        (0..self.columns.len()).map(|o| self.get(row, o)).collect()
    }

    /// One output's column as a bit vector, row 0 first.
    pub fn column(&self, output: usize) -> Vec<bool> {
        (0..self.row_count()).map(|r| self.get(r, output)).collect()
    }

    pub fn count_ones(&self, output: usize) -> usize {
        self.columns[output]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }
}

/// Input word `j` for chunk `k` of an exhaustive enumeration.
pub(crate) fn enumeration_word(j: usize, chunk: usize) -> u64 {
    const PATTERNS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    if j < 6 {
        PATTERNS[j]
    } else if (chunk >> (j - 6)) & 1 == 1 {
        !0
    } else {
        0
    }
}

pub fn truth_table<F: LogicFn + ?Sized>(f: &F) -> Result<TruthTable> {
    let n = f.input_count();
    if n > MAX_TABLE_INPUTS {
        return Err(Error::TooManyInputs {
            inputs: n,
            limit: MAX_TABLE_INPUTS,
        });
    }
    let chunks = if n <= 6 { 1 } else { 1 << (n - 6) };
    let mask = if n >= 6 { !0 } else { (1u64 << (1 << n)) - 1 };
    let mut columns = vec![Vec::with_capacity(chunks); f.output_count()];
    let mut words = vec![0u64; n];
    for chunk in 0..chunks {
        for (j, w) in words.iter_mut().enumerate() {
            *w = enumeration_word(j, chunk);
        }
        for (col, v) in columns.iter_mut().zip(f.eval_words(&words)?) {
            col.push(v & mask);
        }
    }
    Ok(TruthTable {
        input_count: n,
        columns,
    })
}

/// Exhaustive functional equivalence of two circuits with matching shapes.
pub fn equivalent<A: LogicFn + ?Sized, B: LogicFn + ?Sized>(a: &A, b: &B) -> Result<bool> {
    if a.input_count() != b.input_count() {
        return Err(Error::InputArity {
            expected: a.input_count(),
            got: b.input_count(),
        });
    }
    if a.output_count() != b.output_count() {
        return Err(Error::OutputArity {
            left: a.output_count(),
            right: b.output_count(),
        });
    }
    Ok(truth_table(a)? == truth_table(b)?)
}

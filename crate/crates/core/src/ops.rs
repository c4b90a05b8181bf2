// SPDX-License-Identifier: Apache-2.0
//! The operation library: gate-level builders, host reference semantics and
//! the compile/execute path through synthesis, scheduling and simulation.
//!
//! Operands are unsigned. Arithmetic wraps modulo `2^width`; `add` and `sub`
//! additionally produce a carry/borrow flag. `relu` alone reads its operand as
//! two's complement. Division by zero yields an all-ones quotient.

use std::fmt;
use std::str::FromStr;

use crate::codegen::{
    activation_count, allocate_rows, audit, schedule_with_stats, MicroProgram, RowMap,
    ScheduleStats, SubarrayConfig,
};
use crate::error::{Error, Result};
use crate::logic::{Gate, GateKind, MajGraph, Netlist, Ref};
use crate::subarray::{ExecutionReport, SubarrayState};
use crate::synthesis::{lower_to_maj, optimize, Effort, SynthesisReport};
use crate::transpose::{to_horizontal, to_vertical, HorizontalBlock};

/// Operand count used for the N-input kinds when none is given.
pub const DEFAULT_N_INPUTS: usize = 3;

/// Largest total input width verified exhaustively at compile time.
pub const EXHAUSTIVE_BITS: usize = 16;

/// Lanes checked at compile time when exhaustive verification is too large.
pub const SAMPLED_LANES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    AndN,
    OrN,
    XorN,
    Eq,
    Neq,
    Gt,
    Ge,
    Max,
    Min,
    Add,
    Sub,
    Mul,
    Div,
    IfThenElse,
    Bitcount,
    Relu,
}

impl OpKind {
    pub const ALL: [OpKind; 16] = [
        OpKind::AndN,
        OpKind::OrN,
        OpKind::XorN,
        OpKind::Eq,
        OpKind::Neq,
        OpKind::Gt,
        OpKind::Ge,
        OpKind::Max,
        OpKind::Min,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::IfThenElse,
        OpKind::Bitcount,
        OpKind::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::AndN => "and_n",
            OpKind::OrN => "or_n",
            OpKind::XorN => "xor_n",
            OpKind::Eq => "eq",
            OpKind::Neq => "neq",
            OpKind::Gt => "gt",
            OpKind::Ge => "ge",
            OpKind::Max => "max",
            OpKind::Min => "min",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::IfThenElse => "if_then_else",
            OpKind::Bitcount => "bitcount",
            OpKind::Relu => "relu",
        }
    }

    pub fn is_n_input(self) -> bool {
        matches!(self, OpKind::AndN | OpKind::OrN | OpKind::XorN)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown operation `{s}`")))
    }
}

/// An operation instance: kind, bit width and operand count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpSpec {
    pub kind: OpKind,
    pub width: usize,
    pub n_inputs: usize,
}

impl OpSpec {
    pub fn new(kind: OpKind, width: usize) -> Result<Self> {
        Self::with_inputs(
            kind,
            width,
            if kind.is_n_input() {
                DEFAULT_N_INPUTS
            } else {
                0
            },
        )
    }

    /// `n_inputs` is the operand count of the N-input kinds and ignored otherwise.
    pub fn with_inputs(kind: OpKind, width: usize, n_inputs: usize) -> Result<Self> {
        if !(1..=64).contains(&width) {
            return Err(Error::Unsupported(format!(
                "{kind} width {width} is outside 1..=64"
            )));
        }
        let n_inputs = if kind.is_n_input() {
            if n_inputs < 2 {
                return Err(Error::Unsupported(format!(
                    "{kind} needs at least 2 inputs, got {n_inputs}"
                )));
            }
            n_inputs
        } else {
            Self::fixed_operands(kind).len()
        };
        Ok(Self {
            kind,
            width,
            n_inputs,
        })
    }

    fn fixed_operands(kind: OpKind) -> &'static [u8] {
        // 0 = full width, 1 = single bit
        match kind {
            OpKind::IfThenElse => &[1, 0, 0],
            OpKind::Bitcount | OpKind::Relu => &[0],
            _ => &[0, 0],
        }
    }

    pub fn operand_widths(&self) -> Vec<usize> {
        if self.kind.is_n_input() {
            return vec![self.width; self.n_inputs];
        }
        Self::fixed_operands(self.kind)
            .iter()
            .map(|&k| if k == 1 { 1 } else { self.width })
            .collect()
    }

    pub fn input_bits(&self) -> usize {
        self.operand_widths().iter().sum()
    }

    /// Width of the main result.
    pub fn value_width(&self) -> usize {
        match self.kind {
            OpKind::Eq | OpKind::Neq | OpKind::Gt | OpKind::Ge => 1,
            OpKind::Bitcount => bitcount_width(self.width),
            _ => self.width,
        }
    }

    /// Whether a carry (add) or borrow (sub) bit follows the result.
    pub fn has_flag(&self) -> bool {
        matches!(self.kind, OpKind::Add | OpKind::Sub)
    }

    pub fn output_bits(&self) -> usize {
        self.value_width() + self.has_flag() as usize
    }

    /// First data row of operand `k` in the standard layout.
    pub fn input_base(&self, k: usize) -> usize {
        self.operand_widths()[..k].iter().sum()
    }

    /// First data row of the result in the standard layout.
    pub fn output_base(&self) -> usize {
        self.input_bits()
    }
}

impl fmt::Display for OpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.is_n_input() {
            write!(f, "{}[{}]/{}", self.kind, self.n_inputs, self.width)
        } else {
            write!(f, "{}/{}", self.kind, self.width)
        }
    }
}

/// `floor(log2 width) + 1`: bits needed to count up to `width`.
pub fn bitcount_width(width: usize) -> usize {
    (usize::BITS - width.leading_zeros()) as usize
}

fn mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Result of one lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lane {
    pub value: u64,
    /// Carry (add) or borrow (sub).
    pub flag: Option<bool>,
}

/// Host reference semantics for one lane. Operands are masked to their widths.
pub fn oracle(spec: &OpSpec, operands: &[u64]) -> Lane {
    let w = spec.width;
    let m = mask(w);
    let x = |i: usize| operands[i] & m;
    let bit = |b: bool| b as u64;
    let (value, flag) = match spec.kind {
        OpKind::AndN => ((0..spec.n_inputs).fold(m, |acc, i| acc & x(i)), None),
        OpKind::OrN => ((0..spec.n_inputs).fold(0, |acc, i| acc | x(i)), None),
        OpKind::XorN => ((0..spec.n_inputs).fold(0, |acc, i| acc ^ x(i)), None),
        OpKind::Eq => (bit(x(0) == x(1)), None),
        OpKind::Neq => (bit(x(0) != x(1)), None),
        OpKind::Gt => (bit(x(0) > x(1)), None),
        OpKind::Ge => (bit(x(0) >= x(1)), None),
        OpKind::Max => (x(0).max(x(1)), None),
        OpKind::Min => (x(0).min(x(1)), None),
        OpKind::Add => {
            let s = x(0) as u128 + x(1) as u128;
            (s as u64 & m, Some(s >> w != 0))
        }
        OpKind::Sub => (x(0).wrapping_sub(x(1)) & m, Some(x(0) < x(1))),
        OpKind::Mul => (x(0).wrapping_mul(x(1)) & m, None),
        OpKind::Div => (x(0).checked_div(x(1)).unwrap_or(m), None),
        OpKind::IfThenElse => {
            let c = operands[0] & 1;
            (if c == 1 { x(1) } else { x(2) }, None)
        }
        OpKind::Bitcount => (x(0).count_ones() as u64, None),
        OpKind::Relu => {
            let v = x(0);
            (if v >> (w - 1) & 1 == 1 { 0 } else { v }, None)
        }
    };
    Lane { value, flag }
}

/// Gate-level builder with local constant folding.
struct Builder {
    inputs: usize,
    gates: Vec<Gate>,
}

impl Builder {
    fn gate(&mut self, kind: GateKind, operands: Vec<Ref>) -> Ref {
        self.gates.push(Gate { kind, operands });
        Ref::Node(self.gates.len() - 1)
    }

    /// `Some(x)` if `r` is `NOT x`.
    fn negated(&self, r: Ref) -> Option<Ref> {
        match r {
            Ref::Node(g) if self.gates[g].kind == GateKind::Not => Some(self.gates[g].operands[0]),
            _ => None,
        }
    }

    fn complementary(&self, a: Ref, b: Ref) -> bool {
        self.negated(a) == Some(b) || self.negated(b) == Some(a)
    }

    fn not(&mut self, a: Ref) -> Ref {
        match a {
            Ref::Const(v) => Ref::Const(!v),
            _ => match self.negated(a) {
                Some(x) => x,
                None => self.gate(GateKind::Not, vec![a]),
            },
        }
    }

    fn and(&mut self, a: Ref, b: Ref) -> Ref {
        match (a, b) {
            (Ref::Const(false), _) | (_, Ref::Const(false)) => Ref::Const(false),
            (Ref::Const(true), x) | (x, Ref::Const(true)) => x,
            _ if a == b => a,
            _ if self.complementary(a, b) => Ref::Const(false),
            _ => self.gate(GateKind::And, vec![a, b]),
        }
    }

    fn or(&mut self, a: Ref, b: Ref) -> Ref {
        match (a, b) {
            (Ref::Const(true), _) | (_, Ref::Const(true)) => Ref::Const(true),
            (Ref::Const(false), x) | (x, Ref::Const(false)) => x,
            _ if a == b => a,
            _ if self.complementary(a, b) => Ref::Const(true),
            _ => self.gate(GateKind::Or, vec![a, b]),
        }
    }

    fn xor(&mut self, a: Ref, b: Ref) -> Ref {
        match (a, b) {
            (Ref::Const(false), x) | (x, Ref::Const(false)) => x,
            (Ref::Const(true), x) | (x, Ref::Const(true)) => self.not(x),
            _ if a == b => Ref::Const(false),
            _ if self.complementary(a, b) => Ref::Const(true),
            _ => self.gate(GateKind::Xor, vec![a, b]),
        }
    }

    fn mux(&mut self, s: Ref, x: Ref, y: Ref) -> Ref {
        if x == y {
            return x;
        }
        let hi = self.and(s, x);
        let ns = self.not(s);
        let lo = self.and(ns, y);
        self.or(hi, lo)
    }

    /// Sum bit and, if wanted, carry of `a + b + c`.
    fn full_add(&mut self, a: Ref, b: Ref, c: Ref, want_carry: bool) -> (Ref, Ref) {
        let t = self.xor(a, b);
        let s = self.xor(t, c);
        if !want_carry {
            return (s, Ref::Const(false));
        }
        let g = self.and(a, b);
        let p = self.and(t, c);
        (s, self.or(g, p))
    }

    /// Ripple-carry `a + b + cin` over `a.len()` bits.
    fn add(&mut self, a: &[Ref], b: &[Ref], cin: Ref, want_carry: bool) -> (Vec<Ref>, Ref) {
        let mut carry = cin;
        let mut sum = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let last = i + 1 == a.len();
            let (s, c) = self.full_add(a[i], b[i], carry, want_carry || !last);
            sum.push(s);
            carry = c;
        }
        (sum, carry)
    }

    /// `a - b` and the no-borrow flag (`a >= b`).
    fn sub(&mut self, a: &[Ref], b: &[Ref], want_flag: bool) -> (Vec<Ref>, Ref) {
        let nb: Vec<Ref> = b.iter().map(|&x| self.not(x)).collect();
        self.add(a, &nb, Ref::Const(true), want_flag)
    }

    /// Unsigned `a > b` (or `a >= b` when `or_equal`), scanned from the LSB.
    fn compare(&mut self, a: &[Ref], b: &[Ref], or_equal: bool) -> Ref {
        let mut r = Ref::Const(or_equal);
        for i in 0..a.len() {
            let nb = self.not(b[i]);
            let strict = self.and(a[i], nb);
            let diff = self.xor(a[i], b[i]);
            let same = self.not(diff);
            let keep = self.and(same, r);
            r = self.or(strict, keep);
        }
        r
    }

    fn equal(&mut self, a: &[Ref], b: &[Ref]) -> Ref {
        let mut r = Ref::Const(true);
        for i in 0..a.len() {
            let d = self.xor(a[i], b[i]);
            let s = self.not(d);
            r = self.and(r, s);
        }
        r
    }

    /// Drop gates that do not reach an output.
    fn finish(self, names: Vec<String>, outputs: Vec<Ref>) -> Netlist {
        let mut live = vec![false; self.gates.len()];
        for r in &outputs {
            if let Ref::Node(g) = r {
                live[*g] = true;
            }
        }
        for g in (0..self.gates.len()).rev() {
            if live[g] {
                for r in &self.gates[g].operands {
                    if let Ref::Node(x) = r {
                        live[*x] = true;
                    }
                }
            }
        }
        let mut remap = vec![usize::MAX; self.gates.len()];
        let mut gates = Vec::new();
        let fix = |remap: &[usize], r: Ref| match r {
            Ref::Node(g) => Ref::Node(remap[g]),
            other => other,
        };
        for (g, gate) in self.gates.into_iter().enumerate() {
            if live[g] {
                remap[g] = gates.len();
                gates.push(Gate {
                    kind: gate.kind,
                    operands: gate.operands.iter().map(|&r| fix(&remap, r)).collect(),
                });
            }
        }
        let outputs = outputs.into_iter().map(|r| fix(&remap, r)).collect();
        debug_assert_eq!(names.len(), self.inputs);
        Netlist::new(names, gates, outputs).expect("builder emits topologically ordered gates")
    }
}

/// Gate-level netlist of `spec`. Inputs are the operand bits LSB first,
/// operand after operand; outputs are the result bits LSB first, then the flag.
pub fn build_netlist(spec: &OpSpec) -> Netlist {
    let widths = spec.operand_widths();
    let letters = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let mut names = Vec::new();
    let mut operands: Vec<Vec<Ref>> = Vec::new();
    for (k, &w) in widths.iter().enumerate() {
        let base = names.len();
        let stem = match (spec.kind, k) {
            (OpKind::IfThenElse, 0) => "cond".to_string(),
            (OpKind::IfThenElse, k) => letters[k - 1].to_string(),
            _ if k < letters.len() => letters[k].to_string(),
            _ => format!("x{k}_"),
        };
        names.extend((0..w).map(|i| format!("{stem}{i}")));
        operands.push((base..base + w).map(Ref::Input).collect());
    }
    let mut b = Builder {
        inputs: names.len(),
        gates: Vec::new(),
    };
    let w = spec.width;
    let outputs: Vec<Ref> = match spec.kind {
        OpKind::AndN | OpKind::OrN | OpKind::XorN => (0..w)
            .map(|i| {
                let mut acc = operands[0][i];
                for op in &operands[1..] {
                    acc = match spec.kind {
                        OpKind::AndN => b.and(acc, op[i]),
                        OpKind::OrN => b.or(acc, op[i]),
                        _ => b.xor(acc, op[i]),
                    };
                }
                acc
            })
            .collect(),
        OpKind::Eq => vec![b.equal(&operands[0], &operands[1])],
        OpKind::Neq => {
            let e = b.equal(&operands[0], &operands[1]);
            vec![b.not(e)]
        }
        OpKind::Gt => vec![b.compare(&operands[0], &operands[1], false)],
        OpKind::Ge => vec![b.compare(&operands[0], &operands[1], true)],
        OpKind::Max | OpKind::Min => {
            let gt = b.compare(&operands[0], &operands[1], false);
            let (hi, lo) = if spec.kind == OpKind::Max {
                (0, 1)
            } else {
                (1, 0)
            };
            (0..w)
                .map(|i| b.mux(gt, operands[hi][i], operands[lo][i]))
                .collect()
        }
        OpKind::Add => {
            let (mut s, c) = b.add(&operands[0], &operands[1], Ref::Const(false), true);
            s.push(c);
            s
        }
        OpKind::Sub => {
            let (mut d, no_borrow) = b.sub(&operands[0], &operands[1], true);
            let borrow = b.not(no_borrow);
            d.push(borrow);
            d
        }
        OpKind::Mul => {
            let (a, m) = (&operands[0], &operands[1]);
            let mut acc: Vec<Ref> = (0..w).map(|j| b.and(a[j], m[0])).collect();
            for i in 1..w {
                let mut carry = Ref::Const(false);
                for j in i..w {
                    let pp = b.and(a[j - i], m[i]);
                    let (s, c) = b.full_add(acc[j], pp, carry, j + 1 < w);
                    acc[j] = s;
                    carry = c;
                }
            }
            acc
        }
        OpKind::Div => {
            let (a, d) = (&operands[0], &operands[1]);
            let mut divisor = d.clone();
            divisor.push(Ref::Const(false));
            let mut rem = vec![Ref::Const(false); w];
            let mut quotient = vec![Ref::Const(false); w];
            for i in (0..w).rev() {
                let mut shifted = vec![a[i]];
                shifted.extend_from_slice(&rem);
                let (diff, fits) = b.sub(&shifted, &divisor, true);
                quotient[i] = fits;
                if i > 0 {
                    rem = (0..w).map(|j| b.mux(fits, diff[j], shifted[j])).collect();
                }
            }
            quotient
        }
        OpKind::IfThenElse => (0..w)
            .map(|i| b.mux(operands[0][0], operands[1][i], operands[2][i]))
            .collect(),
        OpKind::Bitcount => {
            let out = bitcount_width(w);
            let mut nums: Vec<Vec<Ref>> = operands[0].iter().map(|&x| vec![x]).collect();
            while nums.len() > 1 {
                let mut next = Vec::with_capacity(nums.len().div_ceil(2));
                let mut it = nums.into_iter();
                while let Some(x) = it.next() {
                    match it.next() {
                        Some(y) => {
                            let len = x.len().max(y.len());
                            let pad = |mut v: Vec<Ref>| {
                                v.resize(len, Ref::Const(false));
                                v
                            };
                            let (mut s, c) = b.add(&pad(x), &pad(y), Ref::Const(false), len < out);
                            if len < out {
                                s.push(c);
                            }
                            next.push(s);
                        }
                        None => next.push(x),
                    }
                }
                nums = next;
            }
            let mut r = nums.pop().unwrap_or_default();
            r.resize(out, Ref::Const(false));
            r
        }
        OpKind::Relu => {
            let x = &operands[0];
            let keep = b.not(x[w - 1]);
            (0..w).map(|i| b.and(x[i], keep)).collect()
        }
    };
    b.finish(names, outputs)
}

/// Compile-time check performed on every compiled operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub lanes: usize,
    pub exhaustive: bool,
}

#[derive(Debug, Clone)]
pub struct CompiledOp {
    pub spec: OpSpec,
    pub effort: Effort,
    pub graph: MajGraph,
    pub program: MicroProgram,
    pub rowmap: RowMap,
    pub report: SynthesisReport,
    pub schedule: ScheduleStats,
    pub verification: Verification,
}

impl CompiledOp {
    pub fn activations(&self) -> u64 {
        activation_count(&self.program).total
    }
}

/// Synthesize, schedule and verify `spec`. The program is checked against
/// [`oracle`] by simulation: exhaustively when the operands total at most
/// [`EXHAUSTIVE_BITS`] bits, on [`SAMPLED_LANES`] pseudo-random lanes otherwise.
pub fn compile_op(spec: &OpSpec, cfg: &SubarrayConfig, effort: Effort) -> Result<CompiledOp> {
    cfg.validate()?;
    let netlist = build_netlist(spec);
    let naive = lower_to_maj(&netlist);
    let (graph, report) = optimize(&naive, effort);
    let rowmap = allocate_rows(&graph, cfg)?;
    let (program, schedule) =
        schedule_with_stats(&graph, &rowmap, cfg, spec.kind.name(), spec.width)?;
    audit(&graph, &rowmap, &program).map_err(|e| Error::Verification {
        op: spec.to_string(),
        width: spec.width,
        detail: format!("dataflow audit failed: {e}"),
    })?;
    let mut op = CompiledOp {
        spec: *spec,
        effort,
        graph,
        program,
        rowmap,
        report,
        schedule,
        verification: Verification {
            lanes: 0,
            exhaustive: false,
        },
    };
    op.verification = verify(&op, cfg)?;
    Ok(op)
}

fn verify(op: &CompiledOp, cfg: &SubarrayConfig) -> Result<Verification> {
    let spec = &op.spec;
    let bits = spec.input_bits();
    let exhaustive = bits <= EXHAUSTIVE_BITS;
    let lanes = if exhaustive {
        1usize << bits
    } else {
        SAMPLED_LANES
    };
    let widths = spec.operand_widths();
    let mut rng = SplitMix64(0x5eed ^ (spec.width as u64) << 8 ^ spec.kind as u64);
    let mut operands: Vec<Vec<u64>> = vec![Vec::with_capacity(lanes); widths.len()];
    for lane in 0..lanes {
        let mut packed = lane as u64;
        for (k, &w) in widths.iter().enumerate() {
            let v = if exhaustive {
                let v = packed & mask(w);
                packed = packed.checked_shr(w as u32).unwrap_or(0);
                v
            } else {
                rng.next() & mask(w)
            };
            operands[k].push(v);
        }
    }
    let mut wide = cfg.clone();
    wide.columns = lanes;
    let out = execute_program(spec, &op.program, &operands, &wide)?;
    for lane in 0..lanes {
        let args: Vec<u64> = operands.iter().map(|o| o[lane]).collect();
        let want = oracle(spec, &args);
        let got = Lane {
            value: out.values[lane],
            flag: out.flags.as_ref().map(|f| f[lane] == 1),
        };
        if got != want {
            return Err(Error::Verification {
                op: spec.to_string(),
                width: spec.width,
                detail: format!("operands {args:?}: program gives {got:?}, reference {want:?}"),
            });
        }
    }
    Ok(Verification { lanes, exhaustive })
}

/// Deterministic generator for compile-time sampling.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpOutput {
    pub values: Vec<u64>,
    /// Carry (add) or borrow (sub) per lane.
    pub flags: Option<Vec<u64>>,
    pub report: ExecutionReport,
}

/// Transpose operands in, run the compiled program, transpose the result out.
pub fn execute_op(
    op: &CompiledOp,
    operands: &[Vec<u64>],
    cfg: &SubarrayConfig,
) -> Result<OpOutput> {
    execute_program(&op.spec, &op.program, operands, cfg)
}

/// Run a program that uses the standard layout of `spec` (operands from `D0`,
/// result right after them) on a fresh subarray.
pub fn execute_program(
    spec: &OpSpec,
    program: &MicroProgram,
    operands: &[Vec<u64>],
    cfg: &SubarrayConfig,
) -> Result<OpOutput> {
    let widths = spec.operand_widths();
    if operands.len() != widths.len() {
        return Err(Error::Data(format!(
            "{} expects {} operands, got {}",
            spec,
            widths.len(),
            operands.len()
        )));
    }
    let lanes = operands[0].len();
    if let Some(o) = operands.iter().find(|o| o.len() != lanes) {
        return Err(Error::Data(format!(
            "operand lists differ in length ({lanes} vs {})",
            o.len()
        )));
    }
    if lanes > cfg.columns {
        return Err(Error::Capacity(format!(
            "{lanes} lanes exceed {} columns",
            cfg.columns
        )));
    }
    let needed = program
        .data_rows
        .max(spec.input_bits() + spec.output_bits());
    if needed > cfg.data_row_count {
        return Err(Error::Capacity(format!(
            "program needs {needed} data rows, configuration has {}",
            cfg.data_row_count
        )));
    }
    let mut state = SubarrayState::new(cfg)?;
    for (k, (values, &w)) in operands.iter().zip(&widths).enumerate() {
        if let Some(v) = values.iter().find(|&&v| v & !mask(w) != 0) {
            return Err(Error::Data(format!(
                "operand {k} value {v} does not fit in {w} bits"
            )));
        }
        to_vertical(
            &HorizontalBlock::new(values.clone(), w)?,
            &mut state,
            spec.input_base(k),
        )?;
    }
    let report = state.run_program(program)?;
    let base = spec.output_base();
    let values = to_horizontal(&state, base, spec.value_width(), lanes)?.values;
    let flags = if spec.has_flag() {
        Some(to_horizontal(&state, base + spec.value_width(), 1, lanes)?.values)
    } else {
        None
    };
    Ok(OpOutput {
        values,
        flags,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{eval_netlist, truth_table};

    fn spec(kind: OpKind, width: usize) -> OpSpec {
        OpSpec::new(kind, width).unwrap()
    }

    fn cfg64() -> SubarrayConfig {
        SubarrayConfig::with_rows(512, 64).unwrap()
    }

    fn eval_lane(n: &Netlist, s: &OpSpec, args: &[u64]) -> u64 {
        let mut bits = Vec::new();
        for (k, &w) in s.operand_widths().iter().enumerate() {
            bits.extend((0..w).map(|i| args[k] >> i & 1 == 1));
        }
        let out = eval_netlist(n, &bits).unwrap();
        out.iter().enumerate().map(|(i, &b)| (b as u64) << i).sum()
    }

    #[test]
    fn names_round_trip() {
        assert_eq!(OpKind::ALL.len(), 16);
        for k in OpKind::ALL {
            assert_eq!(k.name().parse::<OpKind>().unwrap(), k);
        }
        assert!("nosuch".parse::<OpKind>().is_err());
    }

    #[test]
    fn netlist_examples() {
        let eq = spec(OpKind::Eq, 4);
        assert_eq!(eval_lane(&build_netlist(&eq), &eq, &[7, 7]), 1);
        let relu = spec(OpKind::Relu, 4);
        assert_eq!(eval_lane(&build_netlist(&relu), &relu, &[0b1010]), 0);
        let bc = spec(OpKind::Bitcount, 8);
        assert_eq!(eval_lane(&build_netlist(&bc), &bc, &[0xFF]), 8);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle(&spec(OpKind::Div, 4), &[9, 0]).value, 15);
        assert_eq!(
            oracle(&spec(OpKind::Sub, 4), &[3, 5]),
            Lane {
                value: 14,
                flag: Some(true)
            }
        );
        assert_eq!(oracle(&spec(OpKind::XorN, 1), &[1, 1, 1]).value, 1);
        assert_eq!(
            oracle(&spec(OpKind::Add, 64), &[u64::MAX, 1]),
            Lane {
                value: 0,
                flag: Some(true)
            }
        );
        assert_eq!(oracle(&spec(OpKind::Relu, 1), &[1]).value, 0);
    }

    #[test]
    fn every_netlist_matches_oracle_at_width_3() {
        for kind in OpKind::ALL {
            let s = spec(kind, 3);
            let n = build_netlist(&s);
            let t = truth_table(&n).unwrap();
            let widths = s.operand_widths();
            for row in 0..t.row_count() {
                let mut args = Vec::new();
                let mut packed = row as u64;
                for &w in &widths {
                    args.push(packed & mask(w));
                    packed >>= w;
                }
                let want = oracle(&s, &args);
                let expect = want.value | want.flag.map_or(0, |f| (f as u64) << s.value_width());
                let got: u64 = t
                    .row(row)
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| (b as u64) << i)
                    .sum();
                assert_eq!(got, expect, "{s} {args:?}");
            }
        }
    }

    #[test]
    fn execute_examples() {
        let cfg = cfg64();
        let add = compile_op(&spec(OpKind::Add, 4), &cfg, Effort::Fixpoint).unwrap();
        assert!(add.verification.exhaustive);
        assert_eq!(add.verification.lanes, 256);
        let out = execute_op(&add, &[vec![5, 0, 15], vec![6, 0, 1]], &cfg).unwrap();
        assert_eq!(out.values, [11, 0, 0]);
        assert_eq!(out.flags, Some(vec![0, 0, 1]));

        let ite = compile_op(&spec(OpKind::IfThenElse, 8), &cfg, Effort::Fixpoint).unwrap();
        let out = execute_op(&ite, &[vec![1, 0], vec![9, 9], vec![4, 4]], &cfg).unwrap();
        assert_eq!(out.values, [9, 4]);

        let max = compile_op(&spec(OpKind::Max, 4), &cfg, Effort::Fixpoint).unwrap();
        assert_eq!(
            execute_op(&max, &[vec![3, 12], vec![7, 2]], &cfg)
                .unwrap()
                .values,
            [7, 12]
        );
    }

    #[test]
    fn lane_errors() {
        let cfg = cfg64();
        let add = compile_op(&spec(OpKind::Add, 4), &cfg, Effort::Single).unwrap();
        assert!(matches!(
            execute_op(&add, &[vec![1; 65], vec![1; 65]], &cfg),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            execute_op(&add, &[vec![1, 2], vec![1]], &cfg),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            execute_op(&add, &[vec![16], vec![1]], &cfg),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            execute_op(&add, &[vec![1]], &cfg),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(OpSpec::new(OpKind::Add, 0).is_err());
        assert!(OpSpec::new(OpKind::Add, 65).is_err());
        assert!(OpSpec::with_inputs(OpKind::AndN, 4, 1).is_err());
        let s = OpSpec::with_inputs(OpKind::OrN, 4, 5).unwrap();
        assert_eq!(s.operand_widths(), vec![4; 5]);
        assert_eq!(spec(OpKind::IfThenElse, 8).operand_widths(), vec![1, 8, 8]);
        assert_eq!(spec(OpKind::Bitcount, 32).value_width(), 6);
        assert_eq!(spec(OpKind::Bitcount, 1).value_width(), 1);
        assert_eq!(spec(OpKind::Add, 4).output_bits(), 5);
    }

    #[test]
    fn tiny_data_region_is_a_capacity_error() {
        let cfg = cfg64().with_data_rows(4).unwrap();
        assert!(matches!(
            compile_op(&spec(OpKind::Add, 4), &cfg, Effort::None),
            Err(Error::Capacity(_))
        ));
    }
}

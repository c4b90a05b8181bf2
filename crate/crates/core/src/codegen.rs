// SPDX-License-Identifier: Apache-2.0
//! Row allocation and μProgram generation.
//!
//! Layout of a subarray as seen by a program:
//!
//! * data rows `D0..D{k-1}`: operand bits (inputs first, then outputs, then a
//!   scratch region used for spills);
//! * compute rows `T0..T3`;
//! * dual-contact rows `DCC0`, `DCC1`, readable complemented as `~DCC0`,
//!   `~DCC1` when used as an AAP source;
//! * constant rows `C0` (zeros) and `C1` (ones).
//!
//! A TRA may name any three distinct rows of the compute/dual-contact group.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::logic::{Edge, MajGraph, Ref};

/// Rows outside the data region: four compute, two dual-contact, two constant.
pub const RESERVED_ROWS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubarrayConfig {
    pub total_rows: usize,
    pub columns: usize,
    /// Data rows occupy physical rows `0..data_row_count`.
    pub data_row_count: usize,
    /// Physical indices of `T0..T3`.
    pub compute_rows: [usize; 4],
    /// Physical indices of `DCC0`, `DCC1`.
    pub dcc_rows: [usize; 2],
    /// Physical indices of `C0`, `C1`.
    pub const_rows: [usize; 2],
}

impl Default for SubarrayConfig {
    fn default() -> Self {
        Self::with_rows(512, 65536).expect("default geometry is valid")
    }
}

impl SubarrayConfig {
    /// Standard geometry: the eight reserved rows sit at the top of the
    /// subarray and everything below them is data.
    pub fn with_rows(total_rows: usize, columns: usize) -> Result<Self> {
        if total_rows < RESERVED_ROWS {
            return Err(Error::Config(format!(
                "{total_rows} rows cannot hold the {RESERVED_ROWS} reserved rows"
            )));
        }
        let d = total_rows - RESERVED_ROWS;
        let cfg = Self {
            total_rows,
            columns,
            data_row_count: d,
            compute_rows: [d, d + 1, d + 2, d + 3],
            dcc_rows: [d + 4, d + 5],
            const_rows: [d + 6, d + 7],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Shrink the data region, keeping the reserved rows where they are.
    pub fn with_data_rows(mut self, data_row_count: usize) -> Result<Self> {
        self.data_row_count = data_row_count;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns == 0 {
            return Err(Error::Config("columns must be at least 1".into()));
        }
        if self.data_row_count + RESERVED_ROWS > self.total_rows {
            return Err(Error::Config(format!(
                "{} data rows plus {RESERVED_ROWS} reserved rows exceed {} total rows",
                self.data_row_count, self.total_rows
            )));
        }
        let reserved: Vec<usize> = self
            .compute_rows
            .iter()
            .chain(&self.dcc_rows)
            .chain(&self.const_rows)
            .copied()
            .collect();
        let mut seen = BTreeSet::new();
        for &r in &reserved {
            if r >= self.total_rows {
                return Err(Error::Config(format!(
                    "row {r} is outside the {}-row subarray",
                    self.total_rows
                )));
            }
            if r < self.data_row_count {
                return Err(Error::Config(format!("row {r} overlaps the data region")));
            }
            if !seen.insert(r) {
                return Err(Error::Config(format!(
                    "row {r} is assigned to two row groups"
                )));
            }
        }
        Ok(())
    }

    /// Physical index of a row token, checking that it exists.
    pub fn physical(&self, row: RowRef) -> Result<usize> {
        match row {
            RowRef::Data(i) if i < self.data_row_count => Ok(i),
            RowRef::Data(i) => Err(Error::InvalidRow(format!(
                "D{i} is outside the {}-row data region",
                self.data_row_count
            ))),
            RowRef::T(i) => Ok(self.compute_rows[i as usize]),
            RowRef::Dcc(i) | RowRef::NotDcc(i) => Ok(self.dcc_rows[i as usize]),
            RowRef::C0 => Ok(self.const_rows[0]),
            RowRef::C1 => Ok(self.const_rows[1]),
        }
    }
}

/// Row token as it appears in a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowRef {
    Data(usize),
    T(u8),
    Dcc(u8),
    /// Complemented wordline of a dual-contact row; valid only as an AAP source.
    NotDcc(u8),
    C0,
    C1,
}

impl RowRef {
    pub fn constant(value: bool) -> Self {
        if value {
            RowRef::C1
        } else {
            RowRef::C0
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(self, RowRef::C0 | RowRef::C1)
    }

    /// Member of the compute/dual-contact group a TRA may use.
    pub fn is_tra_operand(self) -> bool {
        matches!(self, RowRef::T(_) | RowRef::Dcc(_))
    }
}

impl fmt::Display for RowRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowRef::Data(i) => write!(f, "D{i}"),
            RowRef::T(i) => write!(f, "T{i}"),
            RowRef::Dcc(i) => write!(f, "DCC{i}"),
            RowRef::NotDcc(i) => write!(f, "~DCC{i}"),
            RowRef::C0 => write!(f, "C0"),
            RowRef::C1 => write!(f, "C1"),
        }
    }
}

impl FromStr for RowRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidRow(format!("unknown row token `{s}`"));
        let index = |digits: &str| -> Result<usize> {
            if digits.is_empty()
                || !digits.bytes().all(|b| b.is_ascii_digit())
                || (digits.len() > 1 && digits.starts_with('0'))
            {
                return Err(bad());
            }
            digits.parse().map_err(|_| bad())
        };
        match s {
            "T0" => Ok(RowRef::T(0)),
            "T1" => Ok(RowRef::T(1)),
            "T2" => Ok(RowRef::T(2)),
            "T3" => Ok(RowRef::T(3)),
            "DCC0" => Ok(RowRef::Dcc(0)),
            "DCC1" => Ok(RowRef::Dcc(1)),
            "~DCC0" => Ok(RowRef::NotDcc(0)),
            "~DCC1" => Ok(RowRef::NotDcc(1)),
            "C0" => Ok(RowRef::C0),
            "C1" => Ok(RowRef::C1),
            _ => match s.strip_prefix('D') {
                Some(rest) => Ok(RowRef::Data(index(rest)?)),
                None => Err(bad()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Aap { src: RowRef, dst: RowRef },
    Tra([RowRef; 3]),
}

impl Command {
    /// Rows activated by this command.
    pub fn activations(&self) -> u64 {
        match self {
            Command::Aap { .. } => 2,
            Command::Tra(_) => 3,
        }
    }

    /// Structural checks that do not depend on a configuration.
    pub fn check(&self) -> Result<()> {
        match *self {
            Command::Aap { src, dst } => {
                if dst.is_constant() {
                    return Err(Error::RowSafety(format!("AAP writes constant row {dst}")));
                }
                if matches!(dst, RowRef::NotDcc(_)) {
                    return Err(Error::InvalidRow(format!(
                        "{dst} is readable only as an AAP source"
                    )));
                }
                let same = match (src, dst) {
                    (RowRef::NotDcc(a), RowRef::Dcc(b)) => a == b,
                    _ => src == dst,
                };
                if same {
                    return Err(Error::InvalidRow(format!(
                        "AAP source and destination are both {dst}"
                    )));
                }
                Ok(())
            }
            Command::Tra(rows) => {
                for r in rows {
                    if r.is_constant() {
                        return Err(Error::RowSafety(format!("TRA overwrites constant row {r}")));
                    }
                    if !r.is_tra_operand() {
                        return Err(Error::InvalidRow(format!(
                            "TRA operand {r} is not a compute or dual-contact row"
                        )));
                    }
                }
                if rows[0] == rows[1] || rows[1] == rows[2] || rows[0] == rows[2] {
                    return Err(Error::InvalidRow(
                        "TRA operands must be three distinct rows".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Aap { src, dst } => write!(f, "AAP {src} {dst}"),
            Command::Tra([a, b, c]) => write!(f, "TRA {a} {b} {c}"),
        }
    }
}

pub const FORMAT_MAGIC: &str = "UP/1";

#[derive(Debug, Clone)]
pub struct MicroProgram {
    pub op: String,
    pub width: usize,
    /// Data rows the program touches (`D0..D{data_rows-1}`).
    pub data_rows: usize,
    pub commands: Vec<Command>,
    /// Source line of each command when the program was parsed from text.
    lines: Option<Vec<usize>>,
}

impl PartialEq for MicroProgram {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op
            && self.width == other.width
            && self.data_rows == other.data_rows
            && self.commands == other.commands
    }
}

impl Eq for MicroProgram {}

impl MicroProgram {
    pub fn new(
        op: impl Into<String>,
        width: usize,
        data_rows: usize,
        commands: Vec<Command>,
    ) -> Self {
        Self {
            op: op.into(),
            width,
            data_rows,
            commands,
            lines: None,
        }
    }

    /// Line number reported for command `index`: the source line when parsed,
    /// otherwise its position in the serialized form.
    pub fn line_of(&self, index: usize) -> usize {
        match &self.lines {
            Some(lines) => lines[index],
            None => index + 3,
        }
    }

    /// Check every command against `cfg`.
    pub fn validate(&self, cfg: &SubarrayConfig) -> Result<()> {
        for (i, c) in self.commands.iter().enumerate() {
            let wrap = |e| Error::Command {
                line: self.line_of(i),
                source: Box::new(e),
            };
            c.check().map_err(wrap)?;
            let rows: Vec<RowRef> = match *c {
                Command::Aap { src, dst } => vec![src, dst],
                Command::Tra(r) => r.to_vec(),
            };
            for r in rows {
                cfg.physical(r).map_err(wrap)?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let eof = |what: &str| Error::Parse {
            line: text.lines().count().max(1),
            msg: format!("unexpected end of input, expected {what}"),
        };
        let (n, magic) = lines.next().ok_or_else(|| eof(FORMAT_MAGIC))?;
        if magic != FORMAT_MAGIC {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected `{FORMAT_MAGIC}`, found `{magic}`"),
            });
        }
        let (n, header) = lines.next().ok_or_else(|| eof("header"))?;
        let (op, width, data_rows) =
            parse_header(header).map_err(|msg| Error::Parse { line: n, msg })?;
        let mut commands = Vec::new();
        let mut numbers = Vec::new();
        let mut ended = false;
        for (n, line) in lines {
            if ended {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("content after END: `{line}`"),
                });
            }
            if line == "END" {
                ended = true;
                continue;
            }
            let command = parse_command(line).map_err(|msg| Error::Parse { line: n, msg })?;
            commands.push(command);
            numbers.push(n);
        }
        if !ended {
            return Err(eof("END"));
        }
        Ok(Self {
            op,
            width,
            data_rows,
            commands,
            lines: Some(numbers),
        })
    }
}

fn parse_header(line: &str) -> std::result::Result<(String, usize, usize), String> {
    let (mut op, mut width, mut rows) = (None, None, None);
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("header field `{field}` is not key=value"))?;
        let number = || {
            value
                .parse::<usize>()
                .map_err(|_| format!("`{key}` expects an unsigned integer, found `{value}`"))
        };
        let slot_taken = match key {
            "op" => op.replace(value.to_string()).is_some(),
            "width" => width.replace(number()?).is_some(),
            "data_rows" => rows.replace(number()?).is_some(),
            _ => return Err(format!("unknown header key `{key}`")),
        };
        if slot_taken {
            return Err(format!("duplicate header key `{key}`"));
        }
    }
    let op = op
        .filter(|o| !o.is_empty())
        .ok_or("header is missing `op`")?;
    Ok((
        op,
        width.ok_or("header is missing `width`")?,
        rows.ok_or("header is missing `data_rows`")?,
    ))
}

fn parse_command(line: &str) -> std::result::Result<Command, String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let row = |t: &str| t.parse::<RowRef>().map_err(|e| e.to_string());
    match tokens.as_slice() {
        ["AAP", a, b] => Ok(Command::Aap {
            src: row(a)?,
            dst: row(b)?,
        }),
        ["TRA", a, b, c] => Ok(Command::Tra([row(a)?, row(b)?, row(c)?])),
        ["AAP", ..] => Err("AAP takes exactly two rows".into()),
        ["TRA", ..] => Err("TRA takes exactly three rows".into()),
        [other, ..] => Err(format!("unknown command `{other}`")),
        [] => unreachable!("blank lines are skipped"),
    }
}

impl fmt::Display for MicroProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{FORMAT_MAGIC}")?;
        writeln!(
            f,
            "op={} width={} data_rows={}",
            self.op, self.width, self.data_rows
        )?;
        for c in &self.commands {
            writeln!(f, "{c}")?;
        }
        writeln!(f, "END")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActivationCount {
    pub aap: u64,
    pub tra: u64,
    pub total: u64,
}

pub fn activation_count(program: &MicroProgram) -> ActivationCount {
    let aap = program
        .commands
        .iter()
        .filter(|c| matches!(c, Command::Aap { .. }))
        .count() as u64;
    let tra = program.commands.len() as u64 - aap;
    ActivationCount {
        aap,
        tra,
        total: 2 * aap + 3 * tra,
    }
}

/// Interval of node indices over which a node's value must be kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiveRange {
    pub def: usize,
    /// Last consuming node; equal to `def` when only outputs read the value.
    pub last_use: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowMap {
    /// Data row of each graph input.
    pub input_rows: Vec<usize>,
    /// Data row of each graph output.
    pub output_rows: Vec<usize>,
    /// Data rows available for spills.
    pub scratch: std::ops::Range<usize>,
    /// Live range of every node that contributes to an output.
    pub live_ranges: Vec<Option<LiveRange>>,
}

/// Who reads each node and which plain read may reuse the node's row in place.
struct Usage {
    reachable: Vec<bool>,
    last_use: Vec<Option<usize>>,
    /// `fused[c][j]`: operand `j` of node `c` is its source's final read.
    fused: Vec<[bool; 3]>,
}

impl Usage {
    fn of(graph: &MajGraph) -> Self {
        let n = graph.node_count();
        let mut reachable = vec![false; n];
        for e in graph.outputs() {
            if let Ref::Node(v) = e.target {
                reachable[v] = true;
            }
        }
        for c in (0..n).rev() {
            if reachable[c] {
                for e in graph.nodes()[c].operands {
                    if let Ref::Node(v) = e.target {
                        reachable[v] = true;
                    }
                }
            }
        }
        let mut last_use = vec![None; n];
        for c in (0..n).filter(|&c| reachable[c]) {
            for e in graph.nodes()[c].operands {
                if let Ref::Node(v) = e.target {
                    last_use[v] = Some(c);
                }
            }
        }
        let mut fused = vec![[false; 3]; n];
        for v in 0..n {
            if let Some(c) = last_use[v] {
                let ops = graph.nodes()[c].operands;
                if let Some(j) = ops.iter().position(|&e| e == Edge::node(v)) {
                    fused[c][j] = true;
                }
            }
        }
        Self {
            reachable,
            last_use,
            fused,
        }
    }
}

/// AAPs needed to place a value read through `e` into a compute row.
fn operand_aaps(e: Edge, fused: bool) -> u64 {
    match e.target {
        Ref::Const(_) => 1,
        _ if e.complemented => 2,
        Ref::Node(_) if fused => 0,
        _ => 1,
    }
}

/// Activation count the scheduler reaches when it never spills.
///
/// Each contributing node costs one TRA (3 activations) plus two activations
/// per AAP staging its operands: constants and plain inputs take one AAP, any
/// complemented operand takes two (through `DCC0`), and a plain node operand
/// takes one unless it is the node's last read, which uses the row in place.
/// Outputs cost one AAP, or two when complemented. The scheduled program
/// exceeds this only by its spill and reload AAPs.
pub fn estimate_cost_static(graph: &MajGraph) -> u64 {
    let usage = Usage::of(graph);
    let mut aaps = 0;
    let mut tras = 0;
    for (c, node) in graph.nodes().iter().enumerate() {
        if !usage.reachable[c] {
            continue;
        }
        tras += 1;
        for (j, &e) in node.operands.iter().enumerate() {
            aaps += operand_aaps(e, usage.fused[c][j]);
        }
    }
    for &e in graph.outputs() {
        aaps += operand_aaps(e, false);
    }
    2 * aaps + 3 * tras
}

pub fn allocate_rows(graph: &MajGraph, cfg: &SubarrayConfig) -> Result<RowMap> {
    cfg.validate()?;
    let n_in = graph.inputs().len();
    let n_out = graph.outputs().len();
    let need = n_in + n_out;
    if need > cfg.data_row_count {
        return Err(Error::Capacity(format!(
            "{need} data rows needed for {n_in} input and {n_out} output bits, {} available ({} short)",
            cfg.data_row_count,
            need - cfg.data_row_count
        )));
    }
    let usage = Usage::of(graph);
    let live_ranges = (0..graph.node_count())
        .map(|v| {
            usage.reachable[v].then(|| LiveRange {
                def: v,
                last_use: usage.last_use[v].unwrap_or(v),
            })
        })
        .collect();
    Ok(RowMap {
        input_rows: (0..n_in).collect(),
        output_rows: (n_in..need).collect(),
        scratch: need..cfg.data_row_count,
        live_ranges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScheduleStats {
    /// Values evicted from compute rows to scratch rows.
    pub spills: u64,
    /// In-place reads lost because the value had been evicted.
    pub reloads: u64,
}

impl ScheduleStats {
    /// Activations above [`estimate_cost_static`].
    pub fn spill_activations(&self) -> u64 {
        2 * (self.spills + self.reloads)
    }
}

pub fn schedule(graph: &MajGraph, rowmap: &RowMap, cfg: &SubarrayConfig) -> Result<MicroProgram> {
    schedule_with_stats(graph, rowmap, cfg, "graph", 1).map(|(p, _)| p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Home {
    Unset,
    T(u8),
    Data(usize),
}

impl Home {
    fn row(self) -> RowRef {
        match self {
            Home::T(i) => RowRef::T(i),
            Home::Data(d) => RowRef::Data(d),
            Home::Unset => unreachable!("value read before it was computed"),
        }
    }
}

struct Scheduler<'a> {
    graph: &'a MajGraph,
    rowmap: &'a RowMap,
    usage: Usage,
    commands: Vec<Command>,
    home: Vec<Home>,
    owner: [Option<usize>; 4],
    touched: Vec<u64>,
    clock: u64,
    free_scratch: BTreeSet<usize>,
    max_data_row: usize,
    stats: ScheduleStats,
}

enum Staging {
    InPlace(u8),
    Copy(RowRef),
    Complement(RowRef),
}

impl Scheduler<'_> {
    fn aap(&mut self, src: RowRef, dst: RowRef) {
        if let RowRef::Data(d) = dst {
            self.max_data_row = self.max_data_row.max(d + 1);
        }
        self.commands.push(Command::Aap { src, dst });
    }

    fn source(&self, e: Edge) -> RowRef {
        match e.target {
            Ref::Const(b) => RowRef::constant(b ^ e.complemented),
            Ref::Input(i) => RowRef::Data(self.rowmap.input_rows[i]),
            Ref::Node(v) => self.home[v].row(),
        }
    }

    fn emit_output(&mut self, k: usize) {
        let e = self.graph.outputs()[k];
        let dst = RowRef::Data(self.rowmap.output_rows[k]);
        let src = self.source(e);
        if e.complemented && !matches!(e.target, Ref::Const(_)) {
            self.aap(src, RowRef::Dcc(0));
            self.aap(RowRef::NotDcc(0), dst);
        } else {
            self.aap(src, dst);
        }
    }

    fn spill(&mut self, exclude: &[usize]) -> Result<()> {
        let victim = (0..4u8)
            .filter_map(|r| self.owner[r as usize].map(|v| (r, v)))
            .filter(|(_, v)| !exclude.contains(v))
            .min_by_key(|&(r, v)| (self.touched[v], r));
        let Some((r, v)) = victim else {
            return Err(Error::Capacity("no compute row can be freed".into()));
        };
        let Some(&slot) = self.free_scratch.iter().next() else {
            return Err(Error::Capacity(format!(
                "register pressure requires a spill but the scratch region ({} rows) is exhausted",
                self.rowmap.scratch.len()
            )));
        };
        self.free_scratch.remove(&slot);
        self.aap(RowRef::T(r), RowRef::Data(slot));
        self.owner[r as usize] = None;
        self.home[v] = Home::Data(slot);
        self.stats.spills += 1;
        Ok(())
    }

    fn release(&mut self, v: usize) {
        match self.home[v] {
            Home::T(r) if self.owner[r as usize] == Some(v) => self.owner[r as usize] = None,
            Home::Data(d) => {
                self.free_scratch.insert(d);
            }
            _ => {}
        }
        self.home[v] = Home::Unset;
    }

    fn node(&mut self, c: usize) -> Result<()> {
        let ops = self.graph.nodes()[c].operands;
        let fused = self.usage.fused[c];
        let in_place = |s: &Self, j: usize| -> Option<u8> {
            match (fused[j], ops[j].target) {
                (true, Ref::Node(v)) => match s.home[v] {
                    Home::T(r) => Some(r),
                    _ => None,
                },
                _ => None,
            }
        };
        let node_operands: Vec<usize> = ops
            .iter()
            .filter_map(|e| match e.target {
                Ref::Node(v) => Some(v),
                _ => None,
            })
            .collect();
        // make room: complemented operands need a non-DCC0 target and the
        // result must land in a compute row
        loop {
            let f = (0..3).filter(|&j| in_place(self, j).is_some()).count();
            let comp = ops
                .iter()
                .filter(|e| e.complemented && !matches!(e.target, Ref::Const(_)))
                .count();
            let free_t = self.owner.iter().filter(|o| o.is_none()).count();
            if comp <= free_t + 1 && (f > 0 || free_t >= 1) {
                break;
            }
            let pinned: Vec<usize> = (0..3)
                .filter(|&j| in_place(self, j).is_some())
                .filter_map(|j| match ops[j].target {
                    Ref::Node(v) => Some(v),
                    _ => None,
                })
                .collect();
            if self.spill(&node_operands).is_err() {
                self.spill(&pinned)?;
            }
        }
        let staging: Vec<Staging> = (0..3)
            .map(|j| {
                let e = ops[j];
                if let Some(r) = in_place(self, j) {
                    return Staging::InPlace(r);
                }
                if fused[j] {
                    self.stats.reloads += 1;
                }
                let src = self.source(e);
                if e.complemented && !matches!(e.target, Ref::Const(_)) {
                    Staging::Complement(src)
                } else {
                    Staging::Copy(src)
                }
            })
            .collect();
        let mut free_t: Vec<RowRef> = (0..4u8)
            .filter(|&r| self.owner[r as usize].is_none())
            .map(RowRef::T)
            .collect();
        free_t.reverse();
        let mut targets = [RowRef::C0; 3];
        let mut dcc1_used = false;
        for (j, s) in staging.iter().enumerate() {
            if let Staging::Complement(src) = *s {
                let t = free_t.pop().unwrap_or_else(|| {
                    dcc1_used = true;
                    RowRef::Dcc(1)
                });
                self.aap(src, RowRef::Dcc(0));
                self.aap(RowRef::NotDcc(0), t);
                targets[j] = t;
            }
        }
        let mut dcc0_used = false;
        for (j, s) in staging.iter().enumerate() {
            match *s {
                Staging::Copy(src) => {
                    let t = if let Some(t) = free_t.pop() {
                        t
                    } else if !dcc0_used {
                        dcc0_used = true;
                        RowRef::Dcc(0)
                    } else {
                        debug_assert!(!dcc1_used);
                        dcc1_used = true;
                        RowRef::Dcc(1)
                    };
                    self.aap(src, t);
                    targets[j] = t;
                }
                Staging::InPlace(r) => targets[j] = RowRef::T(r),
                Staging::Complement(_) => {}
            }
        }
        self.commands.push(Command::Tra(targets));
        self.clock += 1;
        for &v in &node_operands {
            self.touched[v] = self.clock;
            if self.usage.last_use[v] == Some(c) {
                self.release(v);
            }
        }
        for t in targets {
            if let RowRef::T(r) = t {
                if let Some(v) = self.owner[r as usize].take() {
                    unreachable!("TRA overwrote live value n{v}");
                }
            }
        }
        let r = targets
            .iter()
            .filter_map(|t| match t {
                RowRef::T(r) => Some(*r),
                _ => None,
            })
            .min()
            .expect("every TRA includes a compute row");
        self.owner[r as usize] = Some(c);
        self.home[c] = Home::T(r);
        self.touched[c] = self.clock;
        for k in 0..self.graph.outputs().len() {
            if self.graph.outputs()[k].target == Ref::Node(c) {
                self.emit_output(k);
            }
        }
        if self.usage.last_use[c].is_none() {
            self.release(c);
        }
        Ok(())
    }
}

/// Schedule a graph and report spill statistics alongside the program.
pub fn schedule_with_stats(
    graph: &MajGraph,
    rowmap: &RowMap,
    cfg: &SubarrayConfig,
    op: &str,
    width: usize,
) -> Result<(MicroProgram, ScheduleStats)> {
    cfg.validate()?;
    check_rowmap(graph, rowmap, cfg)?;
    let n = graph.node_count();
    let mut s = Scheduler {
        graph,
        rowmap,
        usage: Usage::of(graph),
        commands: Vec::new(),
        home: vec![Home::Unset; n],
        owner: [None; 4],
        touched: vec![0; n],
        clock: 0,
        free_scratch: rowmap.scratch.clone().collect(),
        max_data_row: rowmap
            .input_rows
            .iter()
            .chain(&rowmap.output_rows)
            .map(|&r| r + 1)
            .max()
            .unwrap_or(0),
        stats: ScheduleStats::default(),
    };
    for k in 0..graph.outputs().len() {
        if !matches!(graph.outputs()[k].target, Ref::Node(_)) {
            s.emit_output(k);
        }
    }
    for c in 0..n {
        if s.usage.reachable[c] {
            s.node(c)?;
        }
    }
    let program = MicroProgram::new(op, width, s.max_data_row, s.commands);
    Ok((program, s.stats))
}

fn check_rowmap(graph: &MajGraph, rowmap: &RowMap, cfg: &SubarrayConfig) -> Result<()> {
    let malformed = |m: String| Error::Malformed(format!("row map: {m}"));
    if rowmap.input_rows.len() != graph.inputs().len() {
        return Err(malformed(format!(
            "{} input rows for {} inputs",
            rowmap.input_rows.len(),
            graph.inputs().len()
        )));
    }
    if rowmap.output_rows.len() != graph.outputs().len() {
        return Err(malformed(format!(
            "{} output rows for {} outputs",
            rowmap.output_rows.len(),
            graph.outputs().len()
        )));
    }
    if rowmap.scratch.end > cfg.data_row_count {
        return Err(malformed(
            "scratch region extends past the data rows".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for &r in rowmap.input_rows.iter().chain(&rowmap.output_rows) {
        if r >= cfg.data_row_count {
            return Err(malformed(format!("row D{r} is outside the data region")));
        }
        if rowmap.scratch.contains(&r) {
            return Err(malformed(format!("row D{r} lies in the scratch region")));
        }
        if !seen.insert(r) {
            return Err(malformed(format!("row D{r} is assigned twice")));
        }
    }
    Ok(())
}

/// Normalized symbolic row content: constants carry their value, never a
/// complement flag.
fn norm(e: Edge) -> Edge {
    match e.target {
        Ref::Const(b) => Edge::plain(Ref::Const(b ^ e.complemented)),
        _ => e,
    }
}

fn trivial_maj(t: &[Edge; 3]) -> Option<Edge> {
    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        if t[a] == t[b] {
            return Some(t[a]);
        }
        if norm(!t[a]) == t[b] {
            return Some(t[c]);
        }
    }
    None
}

/// Symbolic dataflow audit.
///
/// Replays `program` over symbols instead of bits: every row holds the graph
/// edge it currently carries. Fails if a command reads a row that was never
/// written, a TRA combines operands into something that is not a node of the
/// graph, or an output row ends up holding the wrong value. A scheduler that
/// recycles a row while its value is still needed fails one of these checks.
pub fn audit(graph: &MajGraph, rowmap: &RowMap, program: &MicroProgram) -> Result<()> {
    let mut canon: Vec<Edge> = Vec::with_capacity(graph.node_count());
    let mut table: HashMap<[Edge; 3], Edge> = HashMap::new();
    let resolve = |canon: &[Edge], e: Edge| -> Edge {
        match e.target {
            Ref::Node(v) => norm(if e.complemented { !canon[v] } else { canon[v] }),
            _ => norm(e),
        }
    };
    let key = |mut t: [Edge; 3]| {
        t.sort();
        t
    };
    let find = |table: &HashMap<[Edge; 3], Edge>, t: [Edge; 3]| -> Option<Edge> {
        if let Some(e) = trivial_maj(&t) {
            return Some(e);
        }
        if let Some(&e) = table.get(&key(t)) {
            return Some(e);
        }
        table.get(&key(t.map(|e| norm(!e)))).map(|&e| norm(!e))
    };
    for (v, node) in graph.nodes().iter().enumerate() {
        let t = node.operands.map(|e| resolve(&canon, e));
        let e = find(&table, t).unwrap_or_else(|| {
            table.insert(key(t), Edge::node(v));
            Edge::node(v)
        });
        canon.push(e);
    }

    let mut rows: HashMap<RowRef, Edge> = HashMap::new();
    for (i, &r) in rowmap.input_rows.iter().enumerate() {
        rows.insert(RowRef::Data(r), Edge::input(i));
    }
    rows.insert(RowRef::C0, Edge::zero());
    rows.insert(RowRef::C1, Edge::one());
    for (i, c) in program.commands.iter().enumerate() {
        let fail = |msg: String| Error::Command {
            line: program.line_of(i),
            source: Box::new(Error::Malformed(msg)),
        };
        c.check().map_err(|e| Error::Command {
            line: program.line_of(i),
            source: Box::new(e),
        })?;
        let read = |rows: &HashMap<RowRef, Edge>, r: RowRef| -> Result<Edge> {
            let (base, neg) = match r {
                RowRef::NotDcc(k) => (RowRef::Dcc(k), true),
                other => (other, false),
            };
            rows.get(&base)
                .map(|&e| norm(if neg { !e } else { e }))
                .ok_or_else(|| fail(format!("{r} is read before it holds a value")))
        };
        match *c {
            Command::Aap { src, dst } => {
                let v = read(&rows, src)?;
                rows.insert(dst, v);
            }
            Command::Tra(ts) => {
                let t = [
                    read(&rows, ts[0])?,
                    read(&rows, ts[1])?,
                    read(&rows, ts[2])?,
                ];
                let v = find(&table, t).ok_or_else(|| {
                    fail(format!(
                        "TRA of {}, {}, {} does not compute any node of the graph",
                        t[0], t[1], t[2]
                    ))
                })?;
                for r in ts {
                    rows.insert(r, v);
                }
            }
        }
    }
    for (k, (&r, &e)) in rowmap.output_rows.iter().zip(graph.outputs()).enumerate() {
        let want = resolve(&canon, e);
        match rows.get(&RowRef::Data(r)) {
            Some(&got) if got == want => {}
            Some(&got) => {
                return Err(Error::Malformed(format!(
                    "output {k} (D{r}) holds {got}, expected {want}"
                )))
            }
            None => {
                return Err(Error::Malformed(format!(
                    "output {k} (D{r}) is never written"
                )))
            }
        }
    }
    Ok(())
}

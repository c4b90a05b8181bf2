// SPDX-License-Identifier: Apache-2.0
//! Majority/NOT synthesis.
//!
//! [`lower_to_maj`] performs the literal gate-by-gate translation of a
//! netlist. [`optimize`] then runs greedy rewriting passes over a
//! structurally hashed copy of the graph: 3-input cut resynthesis from an
//! exhaustive minimum-size database, the algebraic majority rules, and
//! complement propagation. Every candidate is scored in row activations
//! (see [`crate::codegen::estimate_cost_static`]); a pass that does not lower
//! the static estimate is discarded.

mod graph;
pub mod rules;

use rustc_hash::FxHashMap as HashMap;
use smallvec::{smallvec, SmallVec};
use std::collections::BTreeMap;

type Bindings = SmallVec<[[Option<Lit>; 5]; 4]>;
use std::fmt;

use crate::codegen::estimate_cost_static;
use crate::logic::{Edge, GateKind, MajGraph, MajNode, Netlist, Ref};
use graph::{dual, sorted, trivial, Lit, WorkGraph};
pub use rules::{rule_library, verify_rule_set, RewriteRule, RuleCheck, RuleForm, Template};

/// Upper bound on effort-2 passes.
pub const MAX_PASSES: usize = 64;

/// Cost the relaxed policy may give up for a shallower graph.
const RELAXED_SLACK: i64 = 2;

/// Consecutive non-improving passes a descent tolerates.
const PATIENCE: usize = 2;

/// Cuts kept per node during enumeration.
const CUTS_PER_NODE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Effort {
    /// Return the graph unchanged.
    None = 0,
    /// One greedy pass.
    Single = 1,
    /// Iterate passes to a fixpoint, at most [`MAX_PASSES`].
    Fixpoint = 2,
}

impl TryFrom<u8> for Effort {
    type Error = crate::Error;

    fn try_from(v: u8) -> crate::Result<Self> {
        match v {
            0 => Ok(Effort::None),
            1 => Ok(Effort::Single),
            2 => Ok(Effort::Fixpoint),
            other => Err(crate::Error::Unsupported(format!(
                "effort level {other} (expected 0, 1 or 2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisReport {
    pub node_count_before: usize,
    pub node_count_after: usize,
    pub depth_before: usize,
    pub depth_after: usize,
    pub estimated_activations_before: u64,
    pub estimated_activations_after: u64,
    /// Rule name to number of applications, in name order.
    pub rules_applied: Vec<(String, usize)>,
    pub passes: usize,
}

impl fmt::Display for SynthesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "nodes {} -> {}, depth {} -> {}, estimated activations {} -> {} ({} passes)",
            self.node_count_before,
            self.node_count_after,
            self.depth_before,
            self.depth_after,
            self.estimated_activations_before,
            self.estimated_activations_after,
            self.passes
        )?;
        for (name, count) in &self.rules_applied {
            writeln!(f, "  {name}: {count}")?;
        }
        Ok(())
    }
}

/// Literal translation: AND/OR become majority with a constant, NOT becomes an
/// edge complement, XOR becomes the three-node template
/// `M(M(a,b,1), ~M(a,b,0), 0)`.
pub fn lower_to_maj(netlist: &Netlist) -> MajGraph {
    let mut nodes: Vec<MajNode> = Vec::new();
    let mut gate_edges: Vec<Edge> = Vec::with_capacity(netlist.gates().len());
    let edge = |gate_edges: &[Edge], r: Ref| match r {
        Ref::Node(g) => gate_edges[g],
        other => Edge::plain(other),
    };
    let push = |nodes: &mut Vec<MajNode>, operands: [Edge; 3]| {
        nodes.push(MajNode { operands });
        Edge::node(nodes.len() - 1)
    };
    for g in netlist.gates() {
        let a = edge(&gate_edges, g.operands[0]);
        let e = match g.kind {
            GateKind::Not => !a,
            GateKind::And => push(
                &mut nodes,
                [a, edge(&gate_edges, g.operands[1]), Edge::zero()],
            ),
            GateKind::Or => push(
                &mut nodes,
                [a, edge(&gate_edges, g.operands[1]), Edge::one()],
            ),
            GateKind::Xor => {
                let b = edge(&gate_edges, g.operands[1]);
                let or = push(&mut nodes, [a, b, Edge::one()]);
                let and = push(&mut nodes, [a, b, Edge::zero()]);
                push(&mut nodes, [or, !and, Edge::zero()])
            }
        };
        gate_edges.push(e);
    }
    let outputs = netlist
        .outputs()
        .iter()
        .map(|&r| edge(&gate_edges, r))
        .collect();
    MajGraph::new(netlist.inputs().to_vec(), nodes, outputs)
        .expect("lowering preserves topological order")
}

/// Self-check of the whole rule library.
pub fn verify_rules() -> crate::Result<Vec<RuleCheck>> {
    verify_rule_set(&rule_library())
}

pub fn optimize(graph: &MajGraph, effort: Effort) -> (MajGraph, SynthesisReport) {
    let before = estimate_cost_static(graph);
    let mut current = graph.clone();
    let mut current_cost = before;
    let mut applied: BTreeMap<String, usize> = BTreeMap::new();
    let max_passes = match effort {
        Effort::None => 0,
        Effort::Single => 1,
        Effort::Fixpoint => MAX_PASSES,
    };
    let mut passes = 0;
    if effort == Effort::Single {
        let (next, cost, counts) = Policy::ALL
            .into_iter()
            .map(|policy| run_pass(&current, policy))
            .min_by_key(|(g, cost, _)| (*cost, g.node_count()))
            .expect("policies");
        passes = 1;
        if (cost, next.node_count()) < (current_cost, current.node_count()) {
            current = next;
            current_cost = cost;
            applied = counts;
        }
    }
    while effort == Effort::Fixpoint && passes < max_passes {
        // follow each policy to its own fixpoint and keep the cheaper end
        let best = Policy::ALL
            .into_iter()
            .map(|policy| descend(&current, current_cost, policy, max_passes - passes))
            .min_by_key(|d| (d.cost, d.graph.node_count()))
            .expect("policies");
        if best.passes == 0 {
            break;
        }
        passes += best.passes;
        current = best.graph;
        current_cost = best.cost;
        for (k, v) in best.counts {
            *applied.entry(k).or_default() += v;
        }
    }
    let report = SynthesisReport {
        node_count_before: graph.node_count(),
        node_count_after: current.node_count(),
        depth_before: graph.depth(),
        depth_after: current.depth(),
        estimated_activations_before: before,
        estimated_activations_after: current_cost,
        rules_applied: applied.into_iter().collect(),
        passes,
    };
    (current, report)
}

fn run_pass(graph: &MajGraph, policy: Policy) -> (MajGraph, u64, BTreeMap<String, usize>) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut w = WorkGraph::from_graph(graph);
    Optimizer::new(&mut w, &mut counts, policy).run_pass();
    let s = &w.stats;
    for (name, n) in [
        ("majority", s.majority),
        ("complementary_majority", s.complementary_majority),
        ("commutativity", s.strash_hits),
    ] {
        if n > 0 {
            *counts.entry(name.to_string()).or_default() += n;
        }
    }
    let next = w.to_graph();
    let cost = estimate_cost_static(&next);
    (next, cost, counts)
}

struct Descent {
    graph: MajGraph,
    cost: u64,
    counts: BTreeMap<String, usize>,
    passes: usize,
}

/// Repeat passes under one policy, tolerating up to [`PATIENCE`] passes in a
/// row that do not beat the best graph seen, and return that best graph.
fn descend(start: &MajGraph, start_cost: u64, policy: Policy, budget: usize) -> Descent {
    let mut best = Descent {
        graph: start.clone(),
        cost: start_cost,
        counts: BTreeMap::new(),
        passes: 0,
    };
    let mut graph = start.clone();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut stale = 0;
    let mut passes = 0;
    while passes < budget && stale < PATIENCE {
        let (next, cost, c) = run_pass(&graph, policy);
        passes += 1;
        if next == graph {
            break;
        }
        for (k, v) in c {
            *counts.entry(k).or_default() += v;
        }
        if (cost, next.node_count()) < (best.cost, best.graph.node_count()) {
            best = Descent {
                graph: next.clone(),
                cost,
                counts: counts.clone(),
                passes,
            };
            stale = 0;
        } else {
            stale += 1;
        }
        graph = next;
    }
    best
}

/// Cost, in activations, of reading `l` into a compute row.
fn lit_cost(l: Lit) -> i64 {
    if l.id() == 0 {
        1
    } else {
        1 + l.neg() as i64
    }
}

/// Activations charged to one majority node: its TRA plus operand staging.
fn node_cost(f: &[Lit; 3]) -> i64 {
    3 + 2 * f.iter().map(|&l| lit_cost(l)).sum::<i64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    Strict,
    Relaxed,
    /// Relaxed, plus up to [`RELAXED_SLACK`] cost for a shallower graph.
    Lenient,
}

impl Policy {
    const ALL: [Policy; 3] = [Policy::Strict, Policy::Relaxed, Policy::Lenient];

    fn slack(self) -> Option<i64> {
        match self {
            Policy::Strict => None,
            Policy::Relaxed => Some(0),
            Policy::Lenient => Some(RELAXED_SLACK),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Score {
    gain: i64,
    nodes: i64,
    /// Levels saved at the root.
    depth: i64,
}

impl Score {
    /// Equal-cost rewrites are taken when they shrink the graph. The relaxed
    /// policies also take rewrites that shrink the depth at no (or, when
    /// lenient, a small) cost: a shallower carry often frees a shared cone
    /// for the next rewrite.
    fn accepted(&self, policy: Policy) -> bool {
        self.gain > 0
            || (self.gain == 0 && self.nodes > 0)
            || policy
                .slack()
                .is_some_and(|slack| self.gain >= -slack && self.nodes >= 0 && self.depth > 0)
    }
}

/// Nodes that die when the root loses all its references.
struct Mffc {
    /// Sorted.
    members: Vec<u32>,
    cost: i64,
}

struct DryRun<'a> {
    w: &'a WorkGraph,
    root: u32,
    mffc: &'a Mffc,
    /// MFFC members the candidate keeps alive.
    revived: Vec<u32>,
    virt: Vec<([Lit; 3], u32)>,
    virt_levels: Vec<u32>,
    added_cost: i64,
}

impl DryRun<'_> {
    fn base(&self) -> u32 {
        self.w.nodes.len() as u32
    }

    fn level(&self, l: Lit) -> u32 {
        if l.id() >= self.base() {
            self.virt_levels[(l.id() - self.base()) as usize]
        } else {
            self.w.level(l)
        }
    }

    fn revivable(&self, id: u32) -> bool {
        self.mffc.members.binary_search(&id).is_ok() && !self.revived.contains(&id)
    }

    fn touch(&mut self, l: Lit) {
        if !self.revivable(l.id()) {
            return;
        }
        let mut stack: SmallVec<[u32; 16]> = smallvec![l.id()];
        while let Some(id) = stack.pop() {
            if self.revivable(id) {
                self.revived.push(id);
                stack.extend(self.w.nodes[id as usize].fanin.iter().map(|l| l.id()));
            }
        }
    }

    fn build(&mut self, t: &Template, leaves: &[Lit]) -> Option<Lit> {
        match t {
            Template::Var(i) => Some(leaves[*i as usize]),
            Template::Const(b) => Some(Lit::new(0, *b)),
            Template::Not(t) => self.build(t, leaves).map(Lit::not),
            Template::Maj(c) => {
                let a = self.build(&c[0], leaves)?;
                let b = self.build(&c[1], leaves)?;
                let d = self.build(&c[2], leaves)?;
                let f = sorted([a, b, d]);
                if let Some(t) = trivial(&f) {
                    return Some(t);
                }
                let base = self.base();
                if f.iter().all(|l| l.id() < base) {
                    if let Some(h) = self.w.lookup(&f) {
                        return if h.id() == self.root { None } else { Some(h) };
                    }
                }
                if let Some(&(_, v)) = self.virt.iter().find(|v| v.0 == f) {
                    return Some(Lit::new(v, false));
                }
                if let Some(&(_, v)) = self.virt.iter().find(|v| v.0 == dual(&f)) {
                    return Some(Lit::new(v, true));
                }
                let id = base + self.virt_levels.len() as u32;
                let level = 1 + f.iter().map(|&l| self.level(l)).max().unwrap_or(0);
                self.virt_levels.push(level);
                self.virt.push((f, id));
                self.added_cost += node_cost(&f);
                for l in f {
                    if l.id() < base {
                        self.touch(l);
                    }
                }
                Some(Lit::new(id, false))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cut {
    leaves: [u32; 3],
    len: u8,
}

impl Cut {
    fn leaves(&self) -> &[u32] {
        &self.leaves[..self.len as usize]
    }

    fn merge(a: &Cut, b: &Cut) -> Option<Cut> {
        let mut out = Cut {
            leaves: [0; 3],
            len: 0,
        };
        let (mut i, mut j) = (0, 0);
        let (x, y) = (a.leaves(), b.leaves());
        while i < x.len() || j < y.len() {
            let next = match (x.get(i), y.get(j)) {
                (Some(&p), Some(&q)) if p == q => {
                    i += 1;
                    j += 1;
                    p
                }
                (Some(&p), Some(&q)) if p < q => {
                    i += 1;
                    p
                }
                (Some(_), Some(&q)) => {
                    j += 1;
                    q
                }
                (Some(&p), None) => {
                    i += 1;
                    p
                }
                (None, Some(&q)) => {
                    j += 1;
                    q
                }
                (None, None) => unreachable!(),
            };
            if out.len == 3 {
                return None;
            }
            out.leaves[out.len as usize] = next;
            out.len += 1;
        }
        Some(out)
    }

    fn dominates(&self, other: &Cut) -> bool {
        self.leaves().iter().all(|l| other.leaves().contains(l))
    }
}

struct Optimizer<'a> {
    w: &'a mut WorkGraph,
    counts: &'a mut BTreeMap<String, usize>,
    algebraic: Vec<RewriteRule>,
    policy: Policy,
}

impl<'a> Optimizer<'a> {
    fn new(w: &'a mut WorkGraph, counts: &'a mut BTreeMap<String, usize>, policy: Policy) -> Self {
        let algebraic = rules::algebraic_rules()
            .into_iter()
            .filter(|r| r.searched)
            .collect();
        Self {
            w,
            counts,
            algebraic,
            policy,
        }
    }

    fn run_pass(&mut self) {
        let order = self.w.topo_order();
        let cuts = self.enumerate_cuts(&order);
        for &root in &order {
            if !self.w.alive(root) {
                continue;
            }
            self.try_flip(root);
            if !self.w.alive(root) {
                continue;
            }
            let Some((score, rule, template, leaves)) = self.best_candidate(root, cuts.get(&root))
            else {
                continue;
            };
            if !score.accepted(self.policy) {
                continue;
            }
            let first_new = self.w.nodes.len() as u32;
            let new = self.instantiate(&template, &leaves);
            if new.id() != root {
                self.w.substitute(root, new);
                *self.counts.entry(rule).or_default() += 1;
            }
            for id in first_new..self.w.nodes.len() as u32 {
                if self.w.alive(id) && self.w.nodes[id as usize].refs == 0 {
                    self.w.take_out(id);
                }
            }
        }
    }

    fn enumerate_cuts(&self, order: &[u32]) -> HashMap<u32, Vec<Cut>> {
        let mut cuts: HashMap<u32, Vec<Cut>> =
            HashMap::with_capacity_and_hasher(order.len(), Default::default());
        let unit = |id: u32| Cut {
            leaves: [id, 0, 0],
            len: 1,
        };
        let empty = Cut {
            leaves: [0; 3],
            len: 0,
        };
        for &id in order {
            let fanin = self.w.nodes[id as usize].fanin;
            let sets: Vec<Vec<Cut>> = fanin
                .iter()
                .map(|l| {
                    if l.id() == 0 {
                        vec![empty]
                    } else if !self.w.is_gate(l.id()) {
                        vec![unit(l.id())]
                    } else {
                        let mut v = cuts.get(&l.id()).cloned().unwrap_or_default();
                        v.push(unit(l.id()));
                        v
                    }
                })
                .collect();
            let mut found: Vec<Cut> = Vec::new();
            for a in &sets[0] {
                for b in &sets[1] {
                    let Some(ab) = Cut::merge(a, b) else { continue };
                    for c in &sets[2] {
                        let Some(abc) = Cut::merge(&ab, c) else {
                            continue;
                        };
                        if found.iter().any(|f| f.dominates(&abc)) {
                            continue;
                        }
                        found.retain(|f| !abc.dominates(f));
                        found.push(abc);
                    }
                }
            }
            found.sort_by_key(|c| (c.len, c.leaves));
            found.truncate(CUTS_PER_NODE);
            cuts.insert(id, found);
        }
        cuts
    }

    /// Truth table of `root` over `leaves`, or `None` if the cut no longer
    /// separates the root from the inputs.
    fn cone_function(&self, root: u32, leaves: &[u32]) -> Option<u8> {
        const VARS: [u8; 3] = [0xAA, 0xCC, 0xF0];
        fn walk(w: &WorkGraph, id: u32, leaves: &[u32], memo: &mut Vec<(u32, u8)>) -> Option<u8> {
            if id == 0 {
                return Some(0);
            }
            if let Some(i) = leaves.iter().position(|&l| l == id) {
                return Some(VARS[i]);
            }
            if !w.alive(id) || memo.len() > 64 {
                return None;
            }
            if let Some(&(_, v)) = memo.iter().find(|(m, _)| *m == id) {
                return Some(v);
            }
            let f = w.nodes[id as usize].fanin;
            let mut vals = [0u8; 3];
            for (v, l) in vals.iter_mut().zip(f) {
                let x = walk(w, l.id(), leaves, memo)?;
                *v = if l.neg() { !x } else { x };
            }
            let out = (vals[0] & vals[1]) | (vals[1] & vals[2]) | (vals[0] & vals[2]);
            memo.push((id, out));
            Some(out)
        }
        walk(self.w, root, leaves, &mut Vec::new())
    }

    fn mffc(&self, root: u32) -> Mffc {
        let mut dec: HashMap<u32, u32> = HashMap::default();
        let mut members = vec![root];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            for l in self.w.nodes[id as usize].fanin {
                let c = l.id();
                if !self.w.is_gate(c) {
                    continue;
                }
                let d = dec.entry(c).or_default();
                *d += 1;
                if *d == self.w.nodes[c as usize].refs {
                    members.push(c);
                    stack.push(c);
                }
            }
        }
        members.sort_unstable();
        let cost = members
            .iter()
            .map(|&m| node_cost(&self.w.nodes[m as usize].fanin))
            .sum();
        Mffc { members, cost }
    }

    /// Signed references to `root`: (complemented, count) pairs.
    fn uses(&self, root: u32) -> (i64, i64) {
        let (mut plain, mut neg) = (0, 0);
        let mut count = |l: Lit| {
            if l.id() == root {
                if l.neg() {
                    neg += 1;
                } else {
                    plain += 1;
                }
            }
        };
        for &o in &self.w.outputs {
            count(o);
        }
        let mut consumers = self.w.nodes[root as usize].fanout.clone();
        consumers.sort_unstable();
        consumers.dedup();
        for c in consumers {
            if self.w.alive(c) {
                for l in self.w.nodes[c as usize].fanin {
                    count(l);
                }
            }
        }
        (plain, neg)
    }

    fn score(
        &self,
        root: u32,
        mffc: &Mffc,
        uses: (i64, i64),
        t: &Template,
        leaves: &[Lit],
    ) -> Option<Score> {
        let mut dry = DryRun {
            w: self.w,
            root,
            mffc,
            revived: Vec::new(),
            virt: Vec::new(),
            virt_levels: Vec::new(),
            added_cost: 0,
        };
        let new = dry.build(t, leaves)?;
        if new.id() == root {
            return None;
        }
        if new.id() < dry.base() {
            dry.touch(new);
        }
        let kept: i64 = dry
            .revived
            .iter()
            .map(|&m| node_cost(&self.w.nodes[m as usize].fanin))
            .sum();
        let removed = mffc.cost - kept;
        let old_root = Lit::new(root, false);
        let use_delta = uses.0 * (lit_cost(new) - lit_cost(old_root))
            + uses.1 * (lit_cost(new.not()) - lit_cost(old_root.not()));
        Some(Score {
            gain: removed - dry.added_cost - 2 * use_delta,
            nodes: (mffc.members.len() - dry.revived.len()) as i64 - dry.virt_levels.len() as i64,
            depth: self.w.level(Lit::new(root, false)) as i64 - dry.level(new) as i64,
        })
    }

    fn best_candidate(
        &self,
        root: u32,
        cuts: Option<&Vec<Cut>>,
    ) -> Option<(Score, String, Template, Vec<Lit>)> {
        let mffc = self.mffc(root);
        let uses = self.uses(root);
        let mut best: Option<(Score, String, Template, Vec<Lit>)> = None;
        let mut consider = |score: Option<Score>, name: &str, t: &Template, leaves: &[Lit]| {
            if let Some(s) = score {
                if best.as_ref().is_none_or(|b| s > b.0) {
                    best = Some((s, name.to_string(), t.clone(), leaves.to_vec()));
                }
            }
        };
        let table = rules::resynthesis_table();
        for cut in cuts.into_iter().flatten() {
            let Some(f) = self.cone_function(root, cut.leaves()) else {
                continue;
            };
            let Some(rule) = &table[f as usize] else {
                continue;
            };
            let RuleForm::Resynthesis {
                implementations, ..
            } = &rule.form
            else {
                continue;
            };
            // the cone ignores missing variables, so any constant may stand in
            let mut leaves = [Lit::FALSE; 3];
            for (l, &id) in leaves.iter_mut().zip(cut.leaves()) {
                *l = Lit::new(id, false);
            }
            for t in implementations {
                consider(
                    self.score(root, &mffc, uses, t, &leaves),
                    &rule.name,
                    t,
                    &leaves,
                );
            }
        }
        for rule in &self.algebraic {
            let RuleForm::Algebraic { lhs, rhs } = &rule.form else {
                continue;
            };
            let mut matches = Bindings::new();
            let mut binding = [None; 5];
            self.match_template(lhs, Lit::new(root, false), &mut binding, &mut matches);
            for m in matches {
                let leaves: Vec<Lit> = m.iter().map(|b| b.unwrap_or(Lit::FALSE)).collect();
                consider(
                    self.score(root, &mffc, uses, rhs, &leaves),
                    &rule.name,
                    rhs,
                    &leaves,
                );
            }
        }
        best
    }

    fn match_template(
        &self,
        t: &Template,
        l: Lit,
        binding: &mut [Option<Lit>; 5],
        out: &mut Bindings,
    ) {
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        match t {
            Template::Var(i) => match binding[*i as usize] {
                Some(b) if b == l => out.push(*binding),
                Some(_) => {}
                None => {
                    let mut b = *binding;
                    b[*i as usize] = Some(l);
                    out.push(b);
                }
            },
            Template::Const(b) => {
                if l == Lit::new(0, *b) {
                    out.push(*binding);
                }
            }
            Template::Not(t) => self.match_template(t, l.not(), binding, out),
            Template::Maj(children) => {
                if !self.w.alive(l.id()) {
                    return;
                }
                // a complemented edge matches by self-duality
                let f = self.w.nodes[l.id() as usize].fanin.map(|x| x.xor(l.neg()));
                for p in PERMS {
                    let mut partial: Bindings = smallvec![*binding];
                    for (slot, child) in children.iter().enumerate() {
                        let mut next = Bindings::new();
                        for mut b in partial {
                            self.match_template(child, f[p[slot]], &mut b, &mut next);
                        }
                        partial = next;
                        if partial.is_empty() {
                            break;
                        }
                    }
                    for b in partial {
                        if !out.contains(&b) {
                            out.push(b);
                        }
                    }
                }
            }
        }
    }

    fn instantiate(&mut self, t: &Template, leaves: &[Lit]) -> Lit {
        match t {
            Template::Var(i) => leaves[*i as usize],
            Template::Const(b) => Lit::new(0, *b),
            Template::Not(t) => self.instantiate(t, leaves).not(),
            Template::Maj(c) => {
                let a = self.instantiate(&c[0], leaves);
                let b = self.instantiate(&c[1], leaves);
                let d = self.instantiate(&c[2], leaves);
                self.w.create_maj(a, b, d)
            }
        }
    }

    /// Complement propagation: flip a node when that removes complemented
    /// reads from its operands and consumers combined.
    fn try_flip(&mut self, root: u32) {
        let f = self.w.nodes[root as usize].fanin;
        let fanin_delta: i64 = f.iter().map(|&l| lit_cost(l.not()) - lit_cost(l)).sum();
        let (plain, neg) = self.uses(root);
        let use_delta = plain - neg;
        if fanin_delta + use_delta < 0 {
            self.w.flip(root);
            *self
                .counts
                .entry("inverter_propagation".into())
                .or_default() += 1;
        }
    }
}

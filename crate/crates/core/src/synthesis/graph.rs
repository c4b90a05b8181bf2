// SPDX-License-Identifier: Apache-2.0
//! Mutable, structurally hashed majority graph used during optimization.
//!
//! Signals are packed literals: `id << 1 | complement`. Id 0 is constant
//! false, ids `1..=inputs` are primary inputs, larger ids are majority
//! nodes. Nodes are never physically removed; substitution marks them dead.

use rustc_hash::FxHashMap as HashMap;

use crate::logic::{Edge, MajGraph, MajNode, Ref};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Lit(u32);

impl Lit {
    pub const FALSE: Lit = Lit(0);

    pub fn new(id: u32, neg: bool) -> Self {
        Lit(id << 1 | neg as u32)
    }

    pub fn id(self) -> u32 {
        self.0 >> 1
    }

    pub fn neg(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn not(self) -> Self {
        Lit(self.0 ^ 1)
    }

    pub fn xor(self, neg: bool) -> Self {
        Lit(self.0 ^ neg as u32)
    }
}

/// Result of the majority axioms on a sorted operand triple.
pub(crate) fn trivial(f: &[Lit; 3]) -> Option<Lit> {
    let [a, b, c] = *f;
    if a.id() == b.id() {
        return Some(if a == b { a } else { c });
    }
    if b.id() == c.id() {
        return Some(if b == c { b } else { a });
    }
    None
}

pub(crate) fn sorted(mut f: [Lit; 3]) -> [Lit; 3] {
    f.sort_unstable();
    f
}

pub(crate) fn dual(f: &[Lit; 3]) -> [Lit; 3] {
    sorted([f[0].not(), f[1].not(), f[2].not()])
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub fanin: [Lit; 3],
    pub refs: u32,
    pub fanout: Vec<u32>,
    pub dead: bool,
    pub level: u32,
}

/// Counters for rules the builder applies implicitly.
#[derive(Debug, Default, Clone)]
pub(crate) struct BuildStats {
    pub majority: usize,
    pub complementary_majority: usize,
    pub strash_hits: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct WorkGraph {
    pub input_names: Vec<String>,
    pub nodes: Vec<Node>,
    pub strash: HashMap<[Lit; 3], u32>,
    pub outputs: Vec<Lit>,
    pub stats: BuildStats,
}

impl WorkGraph {
    fn empty(input_names: Vec<String>) -> Self {
        let leaf = Node {
            fanin: [Lit::FALSE; 3],
            refs: 0,
            fanout: Vec::new(),
            dead: false,
            level: 0,
        };
        let nodes = vec![leaf; input_names.len() + 1];
        Self {
            input_names,
            nodes,
            strash: HashMap::default(),
            outputs: Vec::new(),
            stats: BuildStats::default(),
        }
    }

    pub fn from_graph(g: &MajGraph) -> Self {
        let mut w = Self::empty(g.inputs().to_vec());
        let mut map: Vec<Lit> = Vec::with_capacity(g.node_count());
        let lit = |map: &[Lit], e: &Edge| -> Lit {
            let base = match e.target {
                Ref::Const(b) => Lit::new(0, b),
                Ref::Input(i) => Lit::new(i as u32 + 1, false),
                Ref::Node(n) => map[n],
            };
            base.xor(e.complemented)
        };
        for n in g.nodes() {
            let [a, b, c] = n.operands.map(|e| lit(&map, &e));
            let l = w.create_maj(a, b, c);
            map.push(l);
        }
        for e in g.outputs() {
            let l = lit(&map, e);
            w.add_output(l);
        }
        w.sweep();
        w
    }

    pub fn input_count(&self) -> usize {
        self.input_names.len()
    }

    pub fn is_gate(&self, id: u32) -> bool {
        id as usize > self.input_count()
    }

    pub fn alive(&self, id: u32) -> bool {
        self.is_gate(id) && !self.nodes[id as usize].dead
    }

    pub fn level(&self, l: Lit) -> u32 {
        self.nodes[l.id() as usize].level
    }

    pub fn lookup(&self, f: &[Lit; 3]) -> Option<Lit> {
        if let Some(&n) = self.strash.get(f) {
            return Some(Lit::new(n, false));
        }
        self.strash.get(&dual(f)).map(|&n| Lit::new(n, true))
    }

    pub fn create_maj(&mut self, a: Lit, b: Lit, c: Lit) -> Lit {
        let f = sorted([a, b, c]);
        if let Some(t) = trivial(&f) {
            if f[0] == f[1] || f[1] == f[2] {
                self.stats.majority += 1;
            } else {
                self.stats.complementary_majority += 1;
            }
            return t;
        }
        if let Some(l) = self.lookup(&f) {
            self.stats.strash_hits += 1;
            return l;
        }
        let id = self.nodes.len() as u32;
        let level = 1 + f.iter().map(|l| self.level(*l)).max().unwrap_or(0);
        for l in f {
            let n = &mut self.nodes[l.id() as usize];
            n.refs += 1;
            n.fanout.push(id);
        }
        self.nodes.push(Node {
            fanin: f,
            refs: 0,
            fanout: Vec::new(),
            dead: false,
            level,
        });
        self.strash.insert(f, id);
        Lit::new(id, false)
    }

    fn add_output(&mut self, l: Lit) {
        self.nodes[l.id() as usize].refs += 1;
        self.outputs.push(l);
    }

    /// Kills every gate nothing references.
    pub fn sweep(&mut self) {
        for id in (self.input_count() as u32 + 1..self.nodes.len() as u32).rev() {
            if self.alive(id) && self.nodes[id as usize].refs == 0 {
                self.take_out(id);
            }
        }
    }

    pub fn take_out(&mut self, id: u32) {
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            if !self.alive(id) {
                continue;
            }
            let node = &mut self.nodes[id as usize];
            node.dead = true;
            node.fanout.clear();
            let fanin = node.fanin;
            if self.strash.get(&fanin) == Some(&id) {
                self.strash.remove(&fanin);
            }
            for l in fanin {
                let c = &mut self.nodes[l.id() as usize];
                c.refs -= 1;
                if c.refs == 0 && self.is_gate(l.id()) {
                    stack.push(l.id());
                }
            }
        }
    }

    /// Rewrites every reference to `old` through `map`, re-hashing consumers
    /// and collapsing any that become trivial or duplicate. Returns the
    /// follow-up substitutions this triggers.
    fn redirect(&mut self, old: u32, new: Lit, pending: &mut Vec<(u32, Lit)>) {
        let map = |l: Lit| if l.id() == old { new.xor(l.neg()) } else { l };
        for i in 0..self.outputs.len() {
            let o = self.outputs[i];
            if o.id() == old {
                self.nodes[old as usize].refs -= 1;
                self.nodes[new.id() as usize].refs += 1;
                self.outputs[i] = map(o);
            }
        }
        let mut consumers = std::mem::take(&mut self.nodes[old as usize].fanout);
        consumers.sort_unstable();
        consumers.dedup();
        consumers.retain(|&c| {
            self.alive(c) && self.nodes[c as usize].fanin.iter().any(|l| l.id() == old)
        });
        // Unhash every consumer before rehashing any. A flip rewrites `x` to
        // `~x` in place, so one consumer's new fanin can equal a sibling's
        // old, not yet updated, key.
        for &c in &consumers {
            let before = self.nodes[c as usize].fanin;
            if self.strash.get(&before) == Some(&c) {
                self.strash.remove(&before);
            }
        }
        let mut kept = Vec::new();
        for c in consumers {
            let before = self.nodes[c as usize].fanin;
            let mut hits = 0;
            let after = sorted(before.map(|l| {
                if l.id() == old {
                    hits += 1;
                }
                map(l)
            }));
            self.nodes[old as usize].refs -= hits;
            self.nodes[new.id() as usize].refs += hits;
            if new.id() != old {
                self.nodes[new.id() as usize].fanout.push(c);
            } else {
                kept.push(c);
            }
            self.nodes[c as usize].fanin = after;
            if let Some(t) = trivial(&after) {
                pending.push((c, t));
            } else if let Some(l) = self.lookup(&after) {
                pending.push((c, l));
            } else {
                self.strash.insert(after, c);
            }
        }
        if new.id() == old {
            self.nodes[old as usize].fanout = kept;
        }
    }

    /// Replaces node `old` by signal `new` everywhere, then removes whatever
    /// became unreferenced. `new` must not depend on `old`.
    pub fn substitute(&mut self, old: u32, new: Lit) {
        self.drain(vec![(old, new)]);
    }

    fn drain(&mut self, mut pending: Vec<(u32, Lit)>) {
        while let Some((old, mut new)) = pending.pop() {
            if !self.alive(old) {
                continue;
            }
            if self.is_gate(new.id()) && self.nodes[new.id() as usize].dead {
                // the replacement died in the cascade; re-derive from `old`
                let f = self.nodes[old as usize].fanin;
                if let Some(t) = trivial(&f) {
                    new = t;
                } else if let Some(l) = self.lookup(&f) {
                    new = l;
                } else {
                    self.strash.insert(f, old);
                    continue;
                }
            }
            if new.id() == old {
                continue;
            }
            self.redirect(old, new, &mut pending);
            if self.nodes[old as usize].refs == 0 {
                self.take_out(old);
            }
        }
    }

    /// Complements node `id` in place by self-duality: M(a,b,c) becomes
    /// ~M(~a,~b,~c), and every reference absorbs the outer complement.
    pub fn flip(&mut self, id: u32) {
        let f = self.nodes[id as usize].fanin;
        if self.strash.get(&f) == Some(&id) {
            self.strash.remove(&f);
        }
        let d = dual(&f);
        self.nodes[id as usize].fanin = d;
        self.strash.insert(d, id);
        let mut pending = Vec::new();
        self.redirect(id, Lit::new(id, true), &mut pending);
        self.drain(pending);
    }

    /// Live gates in a topological order that follows the outputs: a
    /// post-order depth-first walk, fanins visited in stored order.
    pub fn topo_order(&self) -> Vec<u32> {
        let mut order = Vec::new();
        let mut state = vec![0u8; self.nodes.len()];
        for o in &self.outputs {
            let root = o.id();
            if !self.is_gate(root) || state[root as usize] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root as usize] = 1;
            while let Some(&mut (id, ref mut next)) = stack.last_mut() {
                if *next < 3 {
                    let child = self.nodes[id as usize].fanin[*next].id();
                    *next += 1;
                    if self.is_gate(child) && state[child as usize] == 0 {
                        state[child as usize] = 1;
                        stack.push((child, 0));
                    }
                } else {
                    order.push(id);
                    stack.pop();
                }
            }
        }
        order
    }

    pub fn to_graph(&self) -> MajGraph {
        let order = self.topo_order();
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (i, &id) in order.iter().enumerate() {
            index[id as usize] = i;
        }
        let ni = self.input_count() as u32;
        let edge = |l: Lit| -> Edge {
            let id = l.id();
            if id == 0 {
                Edge::plain(Ref::Const(l.neg()))
            } else if id <= ni {
                Edge::new(Ref::Input(id as usize - 1), l.neg())
            } else {
                Edge::new(Ref::Node(index[id as usize]), l.neg())
            }
        };
        let nodes = order
            .iter()
            .map(|&id| MajNode {
                operands: self.nodes[id as usize].fanin.map(edge),
            })
            .collect();
        let outputs = self.outputs.iter().map(|&l| edge(l)).collect();
        MajGraph::new(self.input_names.clone(), nodes, outputs)
            .expect("export preserves topological order")
    }
}

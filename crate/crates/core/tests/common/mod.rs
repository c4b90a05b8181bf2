// SPDX-License-Identifier: Apache-2.0
//! Random circuit generators shared by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use pud_core::logic::{Edge, Gate, GateKind, MajGraph, MajNode, Netlist, Ref};

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Earlier signal chosen by `seed`: an input, a constant or a prior gate.
fn pick(seed: u32, inputs: usize, before: usize) -> Ref {
    let choices = inputs + before + 2;
    match (seed as usize) % choices {
        k if k < inputs => Ref::Input(k),
        k if k < inputs + before => Ref::Node(k - inputs),
        k => Ref::Const(k == inputs + before),
    }
}

/// Netlists with `inputs` in the given range and up to `max_gates` gates.
pub fn netlist(
    inputs: std::ops::RangeInclusive<usize>,
    max_gates: usize,
) -> impl Strategy<Value = Netlist> {
    (
        inputs,
        prop::collection::vec((0u8..4, any::<u32>(), any::<u32>()), 1..=max_gates),
        prop::collection::vec(any::<u32>(), 1..=4),
    )
        .prop_map(|(n, raw, outs)| {
            let gates: Vec<Gate> = raw
                .iter()
                .enumerate()
                .map(|(i, &(k, a, b))| {
                    let kind =
                        [GateKind::And, GateKind::Or, GateKind::Xor, GateKind::Not][k as usize];
                    let mut operands = vec![pick(a, n, i)];
                    if kind != GateKind::Not {
                        operands.push(pick(b, n, i));
                    }
                    Gate { kind, operands }
                })
                .collect();
            // favour late gates so most of the circuit is live
            let g = gates.len();
            let outputs = outs
                .iter()
                .map(|&s| {
                    if s % 4 == 0 {
                        pick(s / 4, n, g)
                    } else {
                        Ref::Node(g - 1 - (s as usize / 4) % g.min(3))
                    }
                })
                .collect();
            Netlist::new(names("in", n), gates, outputs).expect("generator builds valid netlists")
        })
}

fn edge(seed: u32, inputs: usize, before: usize) -> Edge {
    Edge::new(pick(seed >> 1, inputs, before), seed & 1 == 1)
}

/// Majority graphs with complemented edges anywhere.
pub fn majgraph(
    inputs: std::ops::RangeInclusive<usize>,
    max_nodes: usize,
) -> impl Strategy<Value = MajGraph> {
    (
        inputs,
        prop::collection::vec([any::<u32>(), any::<u32>(), any::<u32>()], 0..=max_nodes),
        prop::collection::vec(any::<u32>(), 1..=4),
    )
        .prop_map(|(n, raw, outs)| {
            let nodes: Vec<MajNode> = raw
                .iter()
                .enumerate()
                .map(|(i, s)| MajNode {
                    operands: s.map(|x| edge(x, n, i)),
                })
                .collect();
            let outputs = outs.iter().map(|&s| edge(s, n, nodes.len())).collect();
            MajGraph::new(names("x", n), nodes, outputs).expect("generator builds valid graphs")
        })
}

/// All `2^n` assignments of `n` inputs as bit vectors, LSB = input 0.
pub fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..1 << n).map(move |k| (0..n).map(|i| k >> i & 1 == 1).collect())
}

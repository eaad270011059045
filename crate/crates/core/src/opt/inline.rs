// SPDX-License-Identifier: Apache-2.0

//! Inline-versus-extract decisions for intermediate nodes.
//!
//! A node with evaluation cost `c` referenced `f` times stays materialized iff
//! `c * f > c + cost_node`; otherwise its expression is substituted into every
//! consumer and the node disappears. Decisions run producer first, so a
//! node's cost already includes whatever was inlined into it.

use super::CostParams;
use crate::expr::{expr_cost, NodeId};
use crate::graph::{NodeKind, RtlGraph};
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Clone, Debug, Default, Serialize)]
pub struct InlineReport {
    pub inlined: Vec<String>,
    pub kept: usize,
    pub cost_before: u64,
    pub cost_after: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InlinePolicy {
    /// Keep a node iff materializing it is cheaper.
    Cost,
    /// Inline every eligible node.
    All,
}

/// Total cost of a graph: every expression plus `cost_node` per materialized
/// intermediate node.
pub fn graph_cost(g: &RtlGraph, params: &CostParams) -> u64 {
    g.ids()
        .map(|id| {
            let node = g.node(id);
            let expr = node.expr.as_ref().map_or(0, |e| expr_cost(e, &params.weights));
            let extra = if node.kind == NodeKind::Wire { params.cost_node } else { 0 };
            expr + extra
        })
        .sum()
}

/// Keeping a node pays off when its repeated evaluation costs more than the
/// node itself plus one evaluation.
pub fn keep_node(cost: u64, fanout: u64, cost_node: u64) -> bool {
    cost * fanout > cost + cost_node
}

pub fn decide_inline(g: &mut RtlGraph, params: &CostParams) -> InlineReport {
    decide_inline_with(g, params, InlinePolicy::Cost)
}

pub fn decide_inline_with(g: &mut RtlGraph, params: &CostParams, policy: InlinePolicy) -> InlineReport {
    let mut report = InlineReport {
        cost_before: graph_cost(g, params),
        ..Default::default()
    };
    let Ok(order) = g.topo_order() else { return report };
    let mut pinned: BTreeSet<NodeId> = g.reset_groups.iter().map(|grp| grp.signal).collect();
    for id in g.ids() {
        if let Some(info) = &g.node(id).reset {
            pinned.insert(info.signal);
        }
    }
    for id in order {
        let node = g.node(id);
        if g.is_removed(id) || node.kind != NodeKind::Wire || pinned.contains(&id) {
            continue;
        }
        let Some(expr) = node.expr.clone() else { continue };
        let mut reads_memory = false;
        expr.for_each_ref(&mut |r| reads_memory |= matches!(g.node(r).kind, NodeKind::MemRead(_)));
        if reads_memory {
            continue;
        }
        let consumers = g.succs(id).to_vec();
        if consumers.is_empty() {
            continue;
        }
        let fanout: u64 = consumers
            .iter()
            .map(|c| g.node(*c).expr.as_ref().map_or(0, |e| e.count_refs_to(id)) as u64)
            .sum();
        let cost = expr_cost(&expr, &params.weights);
        if policy == InlinePolicy::Cost && keep_node(cost, fanout, params.cost_node) {
            report.kept += 1;
            continue;
        }
        report.inlined.push(node.name.clone());
        g.replace_refs(id, &expr);
        g.remove(id);
    }
    report.cost_after = graph_cost(g, params);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;

    #[test]
    fn keep_rule_examples() {
        // cost 5 used 3 times: 15 > 7
        assert!(keep_node(5, 3, 2));
        // a single use never pays for a node
        assert!(!keep_node(5, 1, 2));
        assert!(!keep_node(1, 3, 2));
    }

    fn graph() -> RtlGraph {
        load_graph(
            "circuit T :
  module T :
    input a : UInt<64>
    input b : UInt<64>
    output o1 : UInt<64>
    output o2 : UInt<64>
    output o3 : UInt<64>
    node once = xor(a, b)
    node shared = xor(and(a, b), or(a, not(b)))
    node cheap = not(a)
    o1 <= and(shared, once)
    o2 <= or(shared, cheap)
    o3 <= xor(shared, cheap)
",
        )
        .unwrap()
    }

    #[test]
    fn single_use_inlined_shared_kept() {
        let mut g = graph();
        let r = decide_inline(&mut g, &CostParams::default());
        assert!(r.inlined.contains(&"once".to_string()));
        assert!(r.inlined.contains(&"cheap".to_string()));
        assert!(g.find("shared").is_some());
        assert_eq!(r.kept, 1);
    }

    #[test]
    fn decision_beats_both_extremes() {
        for cost_node in [1, 2, 4, 8] {
            let params = CostParams {
                cost_node,
                ..Default::default()
            };
            let extract = graph_cost(&graph(), &params);
            let mut all = graph();
            decide_inline_with(&mut all, &params, InlinePolicy::All);
            let mut g = graph();
            let r = decide_inline(&mut g, &params);
            assert!(r.cost_after <= extract, "cost_node {cost_node}");
            assert!(r.cost_after <= graph_cost(&all, &params), "cost_node {cost_node}");
        }
    }
}

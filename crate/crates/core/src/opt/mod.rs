// SPDX-License-Identifier: Apache-2.0

//! Node-level optimization passes.
//!
//! The pipeline order is simplify, eliminate, inline, simplify again, then
//! reset grouping. Every pass keeps node ids stable (removed nodes are
//! tombstoned) so reports can name nodes; [`run_node_opt`] compacts at the end.

pub mod activation;
pub mod eliminate;
pub mod inline;
pub mod reset;
pub mod simplify;

pub use activation::{choose_activation_strategy, strategy_for, Strategy};
pub use eliminate::{eliminate_redundant, EliminateReport};
pub use inline::{decide_inline, InlineReport};
pub use reset::{build_reset_groups, ResetReport};
pub use simplify::{simplify_expressions, OneHotRewrite, SimplifyReport};

use crate::expr::CostWeights;
use crate::graph::RtlGraph;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostParams {
    /// Cost of materializing an intermediate node.
    pub cost_node: u64,
    /// Producers with at most this many successors activate without branching.
    pub activation_branchless_threshold: usize,
    pub weights: CostWeights,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            cost_node: 2,
            activation_branchless_threshold: 8,
            weights: CostWeights::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NodeOptToggles {
    pub simplify: bool,
    pub eliminate: bool,
    pub inline: bool,
    pub reset_opt: bool,
}

impl Default for NodeOptToggles {
    fn default() -> Self {
        Self {
            simplify: true,
            eliminate: true,
            inline: true,
            reset_opt: true,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct NodeOptReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub simplify: Vec<SimplifyReport>,
    pub eliminate: Option<EliminateReport>,
    pub inline: Option<InlineReport>,
    pub reset: Option<ResetReport>,
}

/// Runs the enabled node-level passes in order and compacts the graph.
pub fn run_node_opt(g: &mut RtlGraph, on: &NodeOptToggles, params: &CostParams) -> NodeOptReport {
    let mut report = NodeOptReport {
        nodes_before: g.node_count(),
        ..Default::default()
    };
    if on.simplify {
        report.simplify.push(simplify_expressions(g, &params.weights));
    }
    if on.eliminate {
        report.eliminate = Some(eliminate_redundant(g));
    }
    if on.inline {
        report.inline = Some(decide_inline(g, params));
    }
    if on.simplify {
        report.simplify.push(simplify_expressions(g, &params.weights));
    }
    if on.reset_opt {
        report.reset = Some(build_reset_groups(g));
    }
    if on.eliminate {
        // Folding after inlining can orphan more nodes.
        let late = eliminate_redundant(g);
        if let Some(e) = report.eliminate.as_mut() {
            e.absorb(late);
        }
    }
    g.compact();
    report.nodes_after = g.node_count();
    report
}

// SPDX-License-Identifier: Apache-2.0

//! Supernode construction: pre-grouping of strongly correlated nodes,
//! Kernighan-style refinement under a size cap, and active-bit layout.
//!
//! Only evaluated nodes are partitioned. Inputs and register reads change at
//! well-defined points (pokes and commits) and wake their consumers directly.

pub mod kernighan;
pub mod layout;
pub mod pregroup;

pub use kernighan::{initial_assignment, kernighan_refine, KernighanParams};
pub use layout::{plan_active_layout, ActiveLayout};
pub use pregroup::{pre_group, singleton_groups, FusionReason, PreGroup};

use crate::expr::NodeId;
use crate::graph::RtlGraph;
use serde::Serialize;

pub const DEFAULT_MAX_SUPERNODE_SIZE: usize = 35;

/// A DAG over dense indices `0..n`, the form the partitioner works on.
#[derive(Clone, Debug, Default)]
pub struct PartGraph {
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
    /// Graph node behind each index, when built from an [`RtlGraph`].
    pub nodes: Vec<NodeId>,
    /// Inputs and register reads feeding each node. They are not partitioned
    /// but still count as predecessors for pre-grouping.
    pub source_preds: Vec<Vec<NodeId>>,
}

impl PartGraph {
    /// Builds from an edge list; duplicate edges collapse.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for &(u, v) in edges {
            succs[u].push(v);
            preds[v].push(u);
        }
        for l in succs.iter_mut().chain(preds.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        Self {
            succs,
            preds,
            nodes: (0..n as u32).map(NodeId).collect(),
            source_preds: vec![Vec::new(); n],
        }
    }

    /// The evaluated nodes of `g`, indexed in topological order.
    pub fn from_rtl(g: &RtlGraph) -> Self {
        let order = g.topo_order().expect("partitioning needs an acyclic graph");
        let nodes: Vec<NodeId> = order.into_iter().filter(|&id| g.is_evaluated(id)).collect();
        let mut index = vec![usize::MAX; g.len()];
        for (i, id) in nodes.iter().enumerate() {
            index[id.index()] = i;
        }
        let mut edges = Vec::new();
        for (i, &id) in nodes.iter().enumerate() {
            for s in g.succs(id) {
                let j = index[s.index()];
                if j != usize::MAX {
                    edges.push((i, j));
                }
            }
        }
        let mut pg = Self::new(nodes.len(), &edges);
        pg.source_preds = nodes
            .iter()
            .map(|&id| {
                let mut s: Vec<NodeId> = g.preds(id).iter().copied().filter(|p| index[p.index()] == usize::MAX).collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        pg.nodes = nodes;
        pg
    }

    pub fn len(&self) -> usize {
        self.succs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succs.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    /// Topological order, smallest index first among ready nodes.
    pub fn topo_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
            (0..self.len()).filter(|&i| indeg[i] == 0).map(std::cmp::Reverse).collect();
        let mut out = Vec::with_capacity(self.len());
        while let Some(std::cmp::Reverse(u)) = heap.pop() {
            out.push(u);
            for &v in &self.succs[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    heap.push(std::cmp::Reverse(v));
                }
            }
        }
        assert_eq!(out.len(), self.len(), "partition graph has a cycle");
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Supernode {
    /// Member indices into the [`PartGraph`], in topological order.
    pub members: Vec<usize>,
    /// Downstream supernodes, deduplicated and sorted.
    pub succs: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SupernodePlan {
    /// Supernode of each partition-graph index.
    pub assignment: Vec<usize>,
    /// Supernodes in an order every inter-supernode edge respects.
    pub supernodes: Vec<Supernode>,
    pub layout: ActiveLayout,
}

impl SupernodePlan {
    /// Builds a plan from an assignment whose supernode ids already follow a
    /// topological order; empty ids are dropped.
    pub fn from_assignment(pg: &PartGraph, assignment: &[usize]) -> Self {
        let count = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); count];
        for u in pg.topo_order() {
            members[assignment[u]].push(u);
        }
        let mut renumber = vec![usize::MAX; count];
        let mut supernodes = Vec::new();
        for (old, m) in members.into_iter().enumerate() {
            if !m.is_empty() {
                renumber[old] = supernodes.len();
                supernodes.push(Supernode { members: m, succs: Vec::new() });
            }
        }
        let assignment: Vec<usize> = assignment.iter().map(|&s| renumber[s]).collect();
        for (u, succ) in pg.succs.iter().enumerate() {
            for &v in succ {
                let (a, b) = (assignment[u], assignment[v]);
                if a != b {
                    supernodes[a].succs.push(b);
                }
            }
        }
        for s in &mut supernodes {
            s.succs.sort_unstable();
            s.succs.dedup();
        }
        let layout = plan_active_layout(supernodes.len());
        Self {
            assignment,
            supernodes,
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.supernodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supernodes.is_empty()
    }

    /// Number of node-level edges crossing supernodes.
    pub fn cut_size(&self, pg: &PartGraph) -> usize {
        cut_size(pg, &self.assignment)
    }

    pub fn max_size(&self) -> usize {
        self.supernodes.iter().map(|s| s.members.len()).max().unwrap_or(0)
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self, pg: &PartGraph, max_size: usize) -> Result<(), String> {
        if self.assignment.len() != pg.len() {
            return Err("assignment does not cover every node".into());
        }
        let mut seen = vec![false; pg.len()];
        for (i, s) in self.supernodes.iter().enumerate() {
            if s.members.len() > max_size {
                return Err(format!("supernode {i} has {} members", s.members.len()));
            }
            for &m in &s.members {
                if std::mem::replace(&mut seen[m], true) || self.assignment[m] != i {
                    return Err(format!("node {m} is misassigned"));
                }
            }
        }
        if !contracted_is_acyclic(pg, &self.assignment, self.supernodes.len()) {
            return Err("supernode graph has a cycle".into());
        }
        Ok(())
    }

    /// Histogram of supernode sizes as (size, count), ascending by size.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for s in &self.supernodes {
            *h.entry(s.members.len()).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }
}

pub fn cut_size(pg: &PartGraph, assignment: &[usize]) -> usize {
    pg.succs
        .iter()
        .enumerate()
        .map(|(u, s)| s.iter().filter(|&&v| assignment[u] != assignment[v]).count())
        .sum()
}

pub fn contracted_is_acyclic(pg: &PartGraph, assignment: &[usize], count: usize) -> bool {
    let mut succs = vec![Vec::new(); count];
    let mut indeg = vec![0usize; count];
    for (u, s) in pg.succs.iter().enumerate() {
        for &v in s {
            let (a, b) = (assignment[u], assignment[v]);
            if a != b {
                succs[a].push(b);
                indeg[b] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..count).filter(|&i| indeg[i] == 0).collect();
    let mut done = 0;
    while let Some(a) = ready.pop() {
        done += 1;
        for &b in &succs[a] {
            indeg[b] -= 1;
            if indeg[b] == 0 {
                ready.push(b);
            }
        }
    }
    done == count
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionParams {
    pub max_size: usize,
    pub pre_group: bool,
    pub kernighan: bool,
    pub max_passes: usize,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            max_size: DEFAULT_MAX_SUPERNODE_SIZE,
            pre_group: true,
            kernighan: true,
            max_passes: 10,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PartitionReport {
    pub nodes: usize,
    pub edges: usize,
    pub pre_groups: usize,
    pub supernodes: usize,
    pub initial_cut: usize,
    pub cut: usize,
    pub passes: usize,
    pub size_histogram: Vec<(usize, usize)>,
}

/// Pre-groups (if enabled), packs, and refines (if enabled).
pub fn build_plan(pg: &PartGraph, p: &PartitionParams) -> (SupernodePlan, PartitionReport) {
    let max_size = p.max_size.max(1);
    let groups = if p.pre_group {
        pre_group(pg, max_size)
    } else {
        singleton_groups(pg.len())
    };
    let initial = initial_assignment(pg, &groups, max_size);
    let initial_cut = cut_size(pg, &initial);
    let (assignment, passes) = if p.kernighan {
        kernighan_refine(
            pg,
            &groups,
            initial,
            &KernighanParams {
                max_size,
                max_passes: p.max_passes,
            },
        )
    } else {
        (initial, 0)
    };
    let plan = SupernodePlan::from_assignment(pg, &assignment);
    let report = PartitionReport {
        nodes: pg.len(),
        edges: pg.edge_count(),
        pre_groups: groups.len(),
        supernodes: plan.len(),
        initial_cut,
        cut: plan.cut_size(pg),
        passes,
        size_histogram: plan.size_histogram(),
    };
    (plan, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_group_has_no_cut() {
        let pg = PartGraph::new(4, &[(0, 1), (1, 2), (1, 3)]);
        let (plan, r) = build_plan(&pg, &PartitionParams::default());
        assert_eq!(plan.len(), 1);
        assert_eq!(r.cut, 0);
        plan.validate(&pg, 35).unwrap();
    }

    #[test]
    fn plan_from_rtl_skips_sources() {
        let g = crate::frontend::load_graph(
            "circuit T :\n  module T :\n    input clock : Clock\n    input a : UInt<4>\n    output o : UInt<4>\n    reg r : UInt<4>, clock\n    r <= not(a)\n    o <= and(r, a)\n",
        )
        .unwrap();
        let pg = PartGraph::from_rtl(&g);
        let names: Vec<&str> = pg.nodes.iter().map(|&id| g.node(id).name.as_str()).collect();
        assert_eq!(names, vec!["o", "r$next"]);
    }

    #[test]
    fn empty_graph() {
        let pg = PartGraph::new(0, &[]);
        let (plan, _) = build_plan(&pg, &PartitionParams::default());
        assert!(plan.is_empty());
        assert_eq!(plan.layout.words, 0);
    }

    fn dag(n: usize, raw: &[(usize, usize)]) -> PartGraph {
        let mut edges: Vec<(usize, usize)> = raw
            .iter()
            .map(|&(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        PartGraph::new(n, &edges)
    }

    proptest::proptest! {
        #[test]
        fn plans_respect_invariants(
            n in 1usize..60,
            raw in proptest::collection::vec((0usize..60, 0usize..60), 0..150),
            cap in 1usize..12,
            pre in proptest::bool::ANY,
            refine in proptest::bool::ANY,
        ) {
            let pg = dag(n, &raw);
            let params = PartitionParams { max_size: cap, pre_group: pre, kernighan: refine, ..Default::default() };
            let (plan, report) = build_plan(&pg, &params);
            proptest::prop_assert_eq!(plan.validate(&pg, cap), Ok(()));
            proptest::prop_assert!(report.cut <= report.initial_cut);
            proptest::prop_assert_eq!(report.cut, cut_size(&pg, &plan.assignment));
            if pre {
                for g in pre_group(&pg, cap) {
                    let s = plan.assignment[g.members[0]];
                    proptest::prop_assert!(g.members.iter().all(|&m| plan.assignment[m] == s));
                }
            }
            // supernode ids follow a topological order of the contracted graph
            for (u, succs) in pg.succs.iter().enumerate() {
                for &v in succs {
                    proptest::prop_assert!(plan.assignment[u] <= plan.assignment[v]);
                }
            }
        }
    }

    #[test]
    fn pre_group_keeps_single_edge_pair_together() {
        // p0..p2 and a form a dense cluster, a -> b is the only edge out of it
        let edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (5, 6)];
        let pg = PartGraph::new(7, &edges);
        let with = PartitionParams {
            max_size: 4,
            ..Default::default()
        };
        let without = PartitionParams {
            pre_group: false,
            ..with
        };
        let (grouped, _) = build_plan(&pg, &with);
        let (plain, _) = build_plan(&pg, &without);
        assert_eq!(grouped.assignment[3], grouped.assignment[4]);
        assert_ne!(plain.assignment[3], plain.assignment[4]);
        assert!(plain.cut_size(&pg) < grouped.cut_size(&pg));
    }
}

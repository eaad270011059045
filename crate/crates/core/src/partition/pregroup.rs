// SPDX-License-Identifier: Apache-2.0

//! Fusing nodes that are almost always activated together, before
//! refinement gets a chance to separate them.

use super::PartGraph;
use crate::expr::NodeId;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FusionReason {
    OutDegreeOne,
    InDegreeOne,
    Siblings,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreGroup {
    /// Partition-graph indices, ascending.
    pub members: Vec<usize>,
    /// Rule behind the first fusion; `None` for a lone node.
    pub reason: Option<FusionReason>,
}

pub fn singleton_groups(n: usize) -> Vec<PreGroup> {
    (0..n)
        .map(|i| PreGroup {
            members: vec![i],
            reason: None,
        })
        .collect()
}

pub(super) struct Groups<'a> {
    pg: &'a PartGraph,
    parent: Vec<usize>,
    pub(super) members: Vec<Vec<usize>>,
    reason: Vec<Option<FusionReason>>,
    max_size: usize,
    mark: Vec<u32>,
    epoch: u32,
}

impl<'a> Groups<'a> {
    pub(super) fn new(pg: &'a PartGraph, max_size: usize) -> Self {
        let n = pg.len();
        Self {
            pg,
            parent: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
            reason: vec![None; n],
            max_size,
            mark: vec![0; n],
            epoch: 0,
        }
    }

    pub(super) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Whether `to` is reachable from `from` through at least one other group.
    fn reaches_indirectly(&mut self, from: usize, to: usize) -> bool {
        self.epoch += 1;
        let epoch = self.epoch;
        let mut stack = Vec::new();
        let starts: Vec<usize> = self.members[from]
            .iter()
            .flat_map(|&m| self.pg.succs[m].iter().copied())
            .collect();
        for v in starts {
            let r = self.find(v);
            if r != from && r != to && self.mark[r] != epoch {
                self.mark[r] = epoch;
                stack.push(r);
            }
        }
        while let Some(grp) = stack.pop() {
            let next: Vec<usize> = self.members[grp]
                .iter()
                .flat_map(|&m| self.pg.succs[m].iter().copied())
                .collect();
            for v in next {
                let r = self.find(v);
                if r == to {
                    return true;
                }
                if r != from && self.mark[r] != epoch {
                    self.mark[r] = epoch;
                    stack.push(r);
                }
            }
        }
        false
    }

    /// Merges two groups without checks; for replaying known-good groups.
    pub(super) fn join(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let moved = std::mem::take(&mut self.members[rb]);
        self.members[ra].extend(moved);
        self.parent[rb] = ra;
        ra
    }

    pub(super) fn fuse(&mut self, a: usize, b: usize, why: FusionReason) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb || self.members[ra].len() + self.members[rb].len() > self.max_size {
            return false;
        }
        if self.reaches_indirectly(ra, rb) || self.reaches_indirectly(rb, ra) {
            return false;
        }
        let (keep, gone) = if self.members[ra].len() >= self.members[rb].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let moved = std::mem::take(&mut self.members[gone]);
        self.members[keep].extend(moved);
        self.parent[gone] = keep;
        let r = self.reason[ra].or(self.reason[rb]).unwrap_or(why);
        self.reason[keep] = Some(r);
        true
    }
}

/// Applies the out-degree-one, in-degree-one and sibling rules in that order,
/// visiting nodes in topological order. A fusion is skipped when it would
/// exceed `max_size` or make the contracted graph cyclic.
pub fn pre_group(pg: &PartGraph, max_size: usize) -> Vec<PreGroup> {
    let mut gs = Groups::new(pg, max_size.max(1));
    let order = pg.topo_order();
    for &u in &order {
        if let [v] = pg.succs[u][..] {
            gs.fuse(u, v, FusionReason::OutDegreeOne);
        }
    }
    for &v in &order {
        if let ([u], []) = (&pg.preds[v][..], &pg.source_preds[v][..]) {
            gs.fuse(*u, v, FusionReason::InDegreeOne);
        }
    }
    let mut by_preds: BTreeMap<(&[usize], &[NodeId]), Vec<usize>> = BTreeMap::new();
    for &v in &order {
        if !pg.preds[v].is_empty() {
            by_preds
                .entry((&pg.preds[v][..], &pg.source_preds[v][..]))
                .or_default()
                .push(v);
        }
    }
    let mut sets: Vec<Vec<usize>> = by_preds.into_values().filter(|s| s.len() > 1).collect();
    sets.sort_by_key(|s| s[0]);
    for set in sets {
        for &v in &set[1..] {
            gs.fuse(set[0], v, FusionReason::Siblings);
        }
    }
    let mut out: Vec<PreGroup> = (0..pg.len())
        .filter(|&i| gs.parent[i] == i)
        .map(|r| {
            let mut members = gs.members[r].clone();
            members.sort_unstable();
            PreGroup {
                members,
                reason: gs.reason[r],
            }
        })
        .collect();
    out.sort_by_key(|g| g.members[0]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(groups: &[PreGroup]) -> Vec<Vec<usize>> {
        groups.iter().map(|g| g.members.clone()).collect()
    }

    #[test]
    fn chain_fuses_whole() {
        let pg = PartGraph::new(3, &[(0, 1), (1, 2)]);
        let g = pre_group(&pg, 35);
        assert_eq!(members(&g), vec![vec![0, 1, 2]]);
        assert_eq!(g[0].reason, Some(FusionReason::OutDegreeOne));
    }

    #[test]
    fn chain_respects_cap() {
        let pg = PartGraph::new(3, &[(0, 1), (1, 2)]);
        assert_eq!(members(&pre_group(&pg, 2)), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn fan_out_children_join_parent() {
        let pg = PartGraph::new(3, &[(0, 1), (0, 2)]);
        let g = pre_group(&pg, 35);
        assert_eq!(members(&g), vec![vec![0, 1, 2]]);
        assert_eq!(g[0].reason, Some(FusionReason::InDegreeOne));
    }

    #[test]
    fn siblings_with_same_preds() {
        // 0 and 1 both feed 2, 3 and 4; none of the first two rules applies
        let pg = PartGraph::new(5, &[(0, 2), (1, 2), (0, 3), (1, 3), (0, 4), (1, 4)]);
        let g = pre_group(&pg, 35);
        assert!(g.iter().any(|x| x.members == vec![2, 3, 4] && x.reason == Some(FusionReason::Siblings)));
    }

    #[test]
    fn fusion_never_creates_cycle() {
        // 0 -> 1 -> 2 and 0 -> 2: fusing 0 with 2 alone would trap 1
        let pg = PartGraph::new(4, &[(0, 1), (1, 2), (0, 2), (1, 3), (2, 3)]);
        for cap in 1..=4 {
            let groups = pre_group(&pg, cap);
            let mut assignment = vec![0; 4];
            for (i, g) in groups.iter().enumerate() {
                assert!(g.members.len() <= cap);
                for &m in &g.members {
                    assignment[m] = i;
                }
            }
            assert!(crate::partition::contracted_is_acyclic(&pg, &assignment, groups.len()));
        }
    }
}

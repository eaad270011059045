// SPDX-License-Identifier: Apache-2.0

//! The RTL dependency graph shared by every pass and both simulators.
//!
//! Registers are split into a read node (a source holding the committed
//! value) and a write node (a sink computing the next value), so the
//! combinational graph is acyclic. Edges are derived from expressions: there
//! is an edge `u -> v` exactly when `v`'s expression references `u`.

use crate::expr::{Expr, NodeId};
use crate::value::WideValue;
use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt::Write as _;
use thiserror::Error;

pub type MemId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum NodeKind {
    Input,
    Output,
    Wire,
    RegRead,
    RegWrite,
    /// Combinational read port; the expression is the address.
    MemRead(MemId),
    /// Write port; the expression packs `{enable, addr, data}`.
    MemWrite(MemId),
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Output => "output",
            NodeKind::Wire => "wire",
            NodeKind::RegRead => "regread",
            NodeKind::RegWrite => "regwrite",
            NodeKind::MemRead(_) => "memread",
            NodeKind::MemWrite(_) => "memwrite",
        }
    }

    /// Nodes whose value is produced outside the combinational sweep.
    pub fn is_source(&self) -> bool {
        matches!(self, NodeKind::Input | NodeKind::RegRead)
    }

    pub fn is_sink(&self) -> bool {
        matches!(self, NodeKind::Output | NodeKind::RegWrite | NodeKind::MemWrite(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResetInfo {
    pub signal: NodeId,
    pub init: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RtlNode {
    pub name: String,
    pub kind: NodeKind,
    pub width: u32,
    pub signed: bool,
    pub expr: Option<Expr>,
    /// Reset declared on the register; only set on `RegWrite` nodes.
    pub reset: Option<ResetInfo>,
    /// The other half of a register pair.
    pub partner: Option<NodeId>,
}

impl RtlNode {
    pub fn as_ref_expr(&self, id: NodeId) -> Expr {
        Expr::reference(id, self.width, self.signed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Memory {
    pub name: String,
    pub depth: u64,
    pub width: u32,
    pub addr_width: u32,
    pub readers: Vec<NodeId>,
    pub writers: Vec<NodeId>,
}

impl Memory {
    /// Splits a write-port value into `(enable, address, data)`.
    pub fn decode_write(&self, packed: &WideValue) -> (bool, u64, WideValue) {
        let dw = self.width;
        let aw = self.addr_width;
        let data = packed.slice(dw - 1, 0);
        let addr = packed.slice(dw + aw - 1, dw).low_u64();
        let en = packed.bit(dw + aw);
        (en, addr, data)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ResetMember {
    pub read: NodeId,
    pub write: NodeId,
    /// Evaluated with the values of the cycle in which reset is asserted.
    #[serde(skip)]
    pub init: Expr,
}

/// Registers sharing one reset signal, handled together on the slow path.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ResetGroup {
    pub signal: NodeId,
    pub members: Vec<ResetMember>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("combinational loop through: {}", .0.join(" -> "))]
    CombinationalLoop(Vec<String>),
}

#[derive(Clone, Debug, Default)]
pub struct RtlGraph {
    pub name: String,
    nodes: Vec<RtlNode>,
    removed: Vec<bool>,
    succs: Vec<Vec<NodeId>>,
    preds: Vec<Vec<NodeId>>,
    pub memories: Vec<Memory>,
    pub reset_groups: Vec<ResetGroup>,
    /// Inputs driven by the testbench `reset` command.
    pub reset_inputs: Vec<NodeId>,
    /// Nodes whose last uses were dropped by folding a constant-select mux;
    /// redundant-node elimination reports them as shorted.
    pub shorted_hint: BTreeSet<NodeId>,
}

impl RtlGraph {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_node(&mut self, node: RtlNode) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let expr = node.expr.clone();
        self.nodes.push(node);
        self.removed.push(false);
        self.succs.push(Vec::new());
        self.preds.push(Vec::new());
        if expr.as_ref().is_some_and(|e| e.refs().iter().all(|r| r.index() < self.nodes.len())) {
            self.set_expr(id, expr);
        }
        id
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &RtlNode {
        &self.nodes[id.index()]
    }

    #[inline]
    pub fn node_mut(&mut self, id: NodeId) -> &mut RtlNode {
        &mut self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32)
            .map(NodeId)
            .filter(|id| !self.removed[id.index()])
    }

    pub fn is_removed(&self, id: NodeId) -> bool {
        self.removed[id.index()]
    }

    /// Live node count.
    pub fn node_count(&self) -> usize {
        self.removed.iter().filter(|r| !**r).count()
    }

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(|s| s.len()).sum()
    }

    /// Tombstones a node and drops its incoming edges; ids stay valid until
    /// [`RtlGraph::compact`]. The node must have no remaining consumers.
    pub fn remove(&mut self, id: NodeId) {
        self.set_expr(id, None);
        self.removed[id.index()] = true;
    }

    pub fn succs(&self, id: NodeId) -> &[NodeId] {
        &self.succs[id.index()]
    }

    pub fn preds(&self, id: NodeId) -> &[NodeId] {
        &self.preds[id.index()]
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.ids().find(|id| self.node(*id).name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|id| self.node(*id).kind == NodeKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|id| self.node(*id).kind == NodeKind::Output)
    }

    /// Recomputes adjacency from expressions. Duplicate references collapse
    /// into one edge.
    pub fn rebuild_edges(&mut self) {
        let n = self.nodes.len();
        self.succs = vec![Vec::new(); n];
        self.preds = vec![Vec::new(); n];
        for v in 0..n {
            if self.removed[v] {
                continue;
            }
            if let Some(e) = &self.nodes[v].expr {
                let mut refs = e.refs();
                refs.sort_unstable();
                refs.dedup();
                for u in refs {
                    self.preds[v].push(u);
                    self.succs[u.index()].push(NodeId(v as u32));
                }
            }
        }
    }

    /// Drops removed nodes and renumbers the rest in their existing order.
    pub fn compact(&mut self) {
        let mut remap: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut next = 0u32;
        for (i, r) in self.removed.iter().enumerate() {
            if !r {
                remap[i] = Some(NodeId(next));
                next += 1;
            }
        }
        let map = |id: NodeId| remap[id.index()].unwrap_or_else(|| panic!("dangling reference to removed node {id}"));
        let old = std::mem::take(&mut self.nodes);
        let removed = std::mem::take(&mut self.removed);
        for (node, r) in old.into_iter().zip(removed) {
            if r {
                continue;
            }
            let mut node = node;
            node.expr = node.expr.map(|e| e.map_refs(&mut |id, w, s| Expr::reference(map(id), w, s)));
            if let Some(info) = node.reset.take() {
                node.reset = remap[info.signal.index()].map(|signal| ResetInfo {
                    signal,
                    init: info.init.map_refs(&mut |id, w, s| Expr::reference(map(id), w, s)),
                });
            }
            node.partner = node.partner.and_then(|p| remap[p.index()]);
            self.nodes.push(node);
            self.removed.push(false);
        }
        for m in &mut self.memories {
            m.readers = m.readers.iter().filter_map(|r| remap[r.index()]).collect();
            m.writers = m.writers.iter().filter_map(|w| remap[w.index()]).collect();
        }
        for g in &mut self.reset_groups {
            g.signal = map(g.signal);
            g.members.retain(|m| remap[m.read.index()].is_some());
            for m in &mut g.members {
                m.read = map(m.read);
                m.write = map(m.write);
                m.init = m.init.map_refs(&mut |id, w, s| Expr::reference(map(id), w, s));
            }
        }
        self.reset_groups.retain(|g| !g.members.is_empty());
        self.reset_inputs = self.reset_inputs.iter().filter_map(|r| remap[r.index()]).collect();
        self.shorted_hint = self.shorted_hint.iter().filter_map(|r| remap[r.index()]).collect();
        self.rebuild_edges();
    }

    /// Replaces a node's expression, keeping the edge lists in sync.
    pub fn set_expr(&mut self, id: NodeId, expr: Option<Expr>) {
        for p in std::mem::take(&mut self.preds[id.index()]) {
            let s = &mut self.succs[p.index()];
            if let Ok(pos) = s.binary_search(&id) {
                s.remove(pos);
            }
        }
        let mut refs = expr.as_ref().map(|e| e.refs()).unwrap_or_default();
        refs.sort_unstable();
        refs.dedup();
        for &p in &refs {
            let s = &mut self.succs[p.index()];
            if let Err(pos) = s.binary_search(&id) {
                s.insert(pos, id);
            }
        }
        self.preds[id.index()] = refs;
        self.nodes[id.index()].expr = expr;
    }

    /// Replaces every reference to `from` in expressions, reset info and
    /// reset groups. Requires up-to-date edges.
    pub fn replace_refs(&mut self, from: NodeId, to: &Expr) {
        for c in self.succs[from.index()].clone() {
            let e = self.nodes[c.index()].expr.as_ref().map(|e| e.substitute(from, to));
            self.set_expr(c, e);
        }
        for i in 0..self.nodes.len() {
            if self.removed[i] {
                continue;
            }
            let node = &mut self.nodes[i];
            if let Some(info) = &mut node.reset {
                if info.init.count_refs_to(from) > 0 {
                    info.init = info.init.substitute(from, to);
                }
                if info.signal == from {
                    match to.as_ref_id() {
                        Some(id) => info.signal = id,
                        None => node.reset = None,
                    }
                }
            }
        }
        for g in &mut self.reset_groups {
            if g.signal == from {
                g.signal = to.as_ref_id().expect("reset signal replaced by a non-reference");
            }
            for m in &mut g.members {
                if m.init.count_refs_to(from) > 0 {
                    m.init = m.init.substitute(from, to);
                }
            }
        }
    }

    /// Topological order over combinational edges; ties go to the node that
    /// appears first in source order.
    pub fn topo_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.preds[i].len()).collect();
        let mut heap: BinaryHeap<Reverse<u32>> = self
            .ids()
            .filter(|id| indeg[id.index()] == 0)
            .map(|id| Reverse(id.0))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(u)) = heap.pop() {
            let u = NodeId(u);
            order.push(u);
            for &v in &self.succs[u.index()] {
                indeg[v.index()] -= 1;
                if indeg[v.index()] == 0 {
                    heap.push(Reverse(v.0));
                }
            }
        }
        if order.len() == self.node_count() {
            Ok(order)
        } else {
            Err(GraphError::CombinationalLoop(self.find_cycle(&indeg)))
        }
    }

    /// Names of one cycle among nodes that never reached in-degree zero.
    fn find_cycle(&self, indeg: &[usize]) -> Vec<String> {
        let stuck = |id: NodeId| !self.removed[id.index()] && indeg[id.index()] > 0;
        let Some(start) = self.ids().find(|id| stuck(*id)) else {
            return Vec::new();
        };
        // walk predecessors inside the stuck set until a node repeats
        let mut seen = vec![usize::MAX; self.nodes.len()];
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if seen[cur.index()] != usize::MAX {
                let mut cycle: Vec<String> = path[seen[cur.index()]..]
                    .iter()
                    .map(|id: &NodeId| self.node(*id).name.clone())
                    .collect();
                cycle.reverse();
                return cycle;
            }
            seen[cur.index()] = path.len();
            path.push(cur);
            cur = match self.preds[cur.index()].iter().find(|p| stuck(**p)) {
                Some(p) => *p,
                None => return path.iter().map(|id| self.node(*id).name.clone()).collect(),
            };
        }
    }

    /// One line per node: `id kind width expr succ=[ids]`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for id in self.ids() {
            let n = self.node(id);
            let expr = n.expr.as_ref().map(|e| e.to_sexpr()).unwrap_or_else(|| "-".into());
            let succ: Vec<String> = self.succs(id).iter().map(|v| v.0.to_string()).collect();
            let _ = writeln!(
                s,
                "{} {} {}{} {} succ=[{}]",
                id.0,
                n.kind.name(),
                if n.signed { "s" } else { "" },
                n.width,
                expr,
                succ.join(",")
            );
        }
        s
    }

    /// Nodes that participate in the combinational sweep.
    pub fn is_evaluated(&self, id: NodeId) -> bool {
        !self.node(id).kind.is_source()
    }

    pub fn register_count(&self) -> usize {
        self.ids().filter(|id| self.node(*id).kind == NodeKind::RegRead).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::PrimOp;

    fn wire(g: &mut RtlGraph, name: &str, expr: Option<Expr>) -> NodeId {
        g.add_node(RtlNode {
            name: name.into(),
            kind: if expr.is_some() { NodeKind::Wire } else { NodeKind::Input },
            width: 4,
            signed: false,
            expr,
            reset: None,
            partner: None,
        })
    }

    fn r(id: NodeId) -> Expr {
        Expr::reference(id, 4, false)
    }

    fn not(e: Expr) -> Expr {
        Expr::prim(PrimOp::Not, vec![e]).unwrap()
    }

    #[test]
    fn chain_orders_in_dependency_order() {
        let mut g = RtlGraph::new("t");
        // declared out of order: c, b, a
        let c = wire(&mut g, "c", Some(r(NodeId(1))));
        let b = wire(&mut g, "b", Some(not(r(NodeId(2)))));
        let a = wire(&mut g, "a", None);
        g.rebuild_edges();
        assert_eq!(g.topo_order().unwrap(), vec![a, b, c]);
    }

    #[test]
    fn independent_nodes_keep_source_order() {
        let mut g = RtlGraph::new("t");
        let a = wire(&mut g, "a", None);
        let b = wire(&mut g, "b", None);
        g.rebuild_edges();
        assert_eq!(g.topo_order().unwrap(), vec![a, b]);
    }

    #[test]
    fn diamond() {
        let mut g = RtlGraph::new("t");
        let a = wire(&mut g, "a", None);
        let b = wire(&mut g, "b", Some(not(r(a))));
        let c = wire(&mut g, "c", Some(not(r(a))));
        let d = wire(&mut g, "d", Some(Expr::prim(PrimOp::And, vec![r(b), r(c)]).unwrap()));
        g.rebuild_edges();
        assert_eq!(g.topo_order().unwrap(), vec![a, b, c, d]);
        assert_eq!(g.succs(a), &[b, c]);
        assert_eq!(g.preds(d), &[b, c]);
    }

    #[test]
    fn loop_is_reported_by_name() {
        let mut g = RtlGraph::new("t");
        wire(&mut g, "a", Some(r(NodeId(1))));
        wire(&mut g, "b", Some(r(NodeId(0))));
        g.rebuild_edges();
        match g.topo_order() {
            Err(GraphError::CombinationalLoop(names)) => {
                let mut names = names;
                names.sort();
                assert_eq!(names, vec!["a", "b"]);
            }
            other => panic!("expected loop, got {other:?}"),
        }
    }

    #[test]
    fn compact_renumbers_references() {
        let mut g = RtlGraph::new("t");
        let a = wire(&mut g, "a", None);
        let dead = wire(&mut g, "dead", Some(not(r(a))));
        let c = wire(&mut g, "c", Some(not(r(a))));
        let _ = c;
        g.remove(dead);
        g.compact();
        assert_eq!(g.len(), 2);
        assert_eq!(g.node(NodeId(1)).name, "c");
        assert_eq!(g.node(NodeId(1)).expr.as_ref().unwrap().refs(), vec![NodeId(0)]);
        assert!(g.dump().starts_with("0 input 4 - succ=[1]\n1 wire 4 (not %0) succ=[]"));
    }
}

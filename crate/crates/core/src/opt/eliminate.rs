// SPDX-License-Identifier: Apache-2.0

//! Redundant node elimination: aliases, dead logic, paths shorted by constant
//! mux conditions, and registers nothing observable depends on.

use crate::expr::{Expr, ExprKind, NodeId, PrimOp};
use crate::graph::{NodeKind, RtlGraph};
use serde::Serialize;
use std::collections::HashMap;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EliminateReport {
    pub aliases: Vec<String>,
    pub dead: Vec<String>,
    pub shorted: Vec<String>,
    pub unused_registers: Vec<String>,
}

impl EliminateReport {
    pub fn removed(&self) -> usize {
        self.aliases.len() + self.dead.len() + self.shorted.len() + 2 * self.unused_registers.len()
    }

    pub fn absorb(&mut self, other: EliminateReport) {
        self.aliases.extend(other.aliases);
        self.dead.extend(other.dead);
        self.shorted.extend(other.shorted);
        self.unused_registers.extend(other.unused_registers);
    }
}

/// Removes redundant nodes (tombstoned; compaction is left to the caller).
/// Inputs and outputs are never removed. Running it twice removes nothing new.
pub fn eliminate_redundant(g: &mut RtlGraph) -> EliminateReport {
    let mut report = EliminateReport::default();
    fold_constant_muxes(g);
    collapse_aliases(g, &mut report);
    remove_unreachable(g, &mut report);
    report
}

fn fold_constant_muxes(g: &mut RtlGraph) {
    let ids: Vec<NodeId> = g.ids().collect();
    for id in ids {
        let Some(e) = g.node(id).expr.as_ref() else { continue };
        let mut dropped = Vec::new();
        if let Some(folded) = fold_mux(e, &mut dropped) {
            g.shorted_hint.extend(dropped);
            g.set_expr(id, Some(folded));
        }
    }
}

/// Replaces `mux(const, a, b)` by the selected arm anywhere in `e`.
fn fold_mux(e: &Expr, dropped: &mut Vec<NodeId>) -> Option<Expr> {
    let ExprKind::Prim(op, args) = &e.kind else { return None };
    let new_args: Vec<Option<Expr>> = args.iter().map(|a| fold_mux(a, dropped)).collect();
    let changed = new_args.iter().any(Option::is_some);
    let args: Vec<Expr> = new_args
        .into_iter()
        .zip(args)
        .map(|(n, a)| n.unwrap_or_else(|| a.clone()))
        .collect();
    if *op == PrimOp::Mux {
        if let Some(c) = args[0].as_const() {
            let (keep, drop) = if c.is_zero() { (2, 1) } else { (1, 2) };
            dropped.extend(args[drop].refs());
            let arm = args[keep].clone();
            return Some(if arm.width == e.width {
                arm
            } else if let Some(v) = arm.as_const() {
                Expr::constant(v.resize(e.width, arm.signed), arm.signed)
            } else {
                Expr::prim_unchecked(PrimOp::Pad(e.width), vec![arm])
            });
        }
    }
    changed.then(|| Expr {
        kind: ExprKind::Prim(*op, args),
        width: e.width,
        signed: e.signed,
    })
}

/// A wire whose expression is a bare reference of identical type is an alias.
fn collapse_aliases(g: &mut RtlGraph, report: &mut EliminateReport) {
    let ids: Vec<NodeId> = g.ids().collect();
    for id in ids {
        let node = g.node(id);
        if node.kind != NodeKind::Wire {
            continue;
        }
        let Some(e) = node.expr.as_ref() else { continue };
        let Some(target) = e.as_ref_id() else { continue };
        if e.width != node.width || e.signed != node.signed || target == id {
            continue;
        }
        let replacement = Expr::reference(target, e.width, e.signed);
        report.aliases.push(node.name.clone());
        g.replace_refs(id, &replacement);
        if g.shorted_hint.remove(&id) {
            g.shorted_hint.insert(target);
        }
        g.remove(id);
    }
}

fn remove_unreachable(g: &mut RtlGraph, report: &mut EliminateReport) {
    let mut live = vec![false; g.len()];
    let mut stack: Vec<NodeId> = g
        .ids()
        .filter(|&id| matches!(g.node(id).kind, NodeKind::Input | NodeKind::Output))
        .collect();
    stack.extend(g.reset_groups.iter().map(|grp| grp.signal));
    let mut init_refs: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for m in g.reset_groups.iter().flat_map(|grp| &grp.members) {
        init_refs.entry(m.read).or_default().extend(m.init.refs());
    }
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut live[id.index()], true) {
            continue;
        }
        stack.extend_from_slice(g.preds(id));
        let node = g.node(id);
        if let Some(info) = &node.reset {
            stack.push(info.signal);
            info.init.for_each_ref(&mut |r| stack.push(r));
        }
        match node.kind {
            NodeKind::RegRead => {
                stack.extend(node.partner);
                stack.extend(init_refs.get(&id).into_iter().flatten());
            }
            NodeKind::MemRead(m) => stack.extend_from_slice(&g.memories[m as usize].writers),
            _ => {}
        }
    }
    let dead: Vec<NodeId> = g.ids().filter(|id| !live[id.index()]).collect();
    for &id in &dead {
        let node = g.node(id);
        let name = node.name.clone();
        match node.kind {
            NodeKind::RegRead => report.unused_registers.push(name),
            NodeKind::RegWrite => {}
            _ if g.shorted_hint.contains(&id) => report.shorted.push(name),
            _ => report.dead.push(name),
        }
    }
    for &id in &dead {
        g.remove(id);
    }
    for m in &mut g.memories {
        m.readers.retain(|r| live[r.index()]);
        m.writers.retain(|w| live[w.index()]);
    }
}

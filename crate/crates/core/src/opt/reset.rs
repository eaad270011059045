// SPDX-License-Identifier: Apache-2.0

//! Moves synchronous reset out of register next-value logic. Each register
//! write `mux(rst, init, next)` becomes `next`; the register joins the group
//! of its reset signal, which the simulator checks once per cycle.

use crate::expr::{Expr, ExprKind, NodeId, PrimOp};
use crate::graph::{ResetGroup, ResetMember, RtlGraph};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ResetReport {
    /// (signal name, member count) per group.
    pub groups: Vec<(String, usize)>,
    /// Registers with reset info whose write did not have the expected shape.
    pub skipped: Vec<String>,
}

pub fn build_reset_groups(g: &mut RtlGraph) -> ResetReport {
    let mut report = ResetReport::default();
    let mut groups: BTreeMap<NodeId, Vec<ResetMember>> = BTreeMap::new();
    for grp in std::mem::take(&mut g.reset_groups) {
        groups.entry(grp.signal).or_default().extend(grp.members);
    }
    let writes: Vec<NodeId> = g.ids().filter(|&id| g.node(id).reset.is_some()).collect();
    for w in writes {
        let node = g.node(w);
        let info = node.reset.clone().unwrap();
        let Some(read) = node.partner else { continue };
        let next = node.expr.as_ref().and_then(|e| match &e.kind {
            ExprKind::Prim(PrimOp::Mux, a) if a[0].as_ref_id() == Some(info.signal) && a[1] == info.init => {
                Some(widen(a[2].clone(), e.width))
            }
            _ => None,
        });
        let Some(next) = next else {
            report.skipped.push(g.node(read).name.clone());
            continue;
        };
        if next.count_refs_to(info.signal) > 0 {
            // The next value itself depends on the reset line; leave it alone.
            report.skipped.push(g.node(read).name.clone());
            continue;
        }
        g.set_expr(w, Some(next));
        g.node_mut(w).reset = None;
        groups.entry(info.signal).or_default().push(ResetMember {
            read,
            write: w,
            init: widen(info.init, g.node(read).width),
        });
    }
    g.reset_groups = groups
        .into_iter()
        .map(|(signal, members)| ResetGroup { signal, members })
        .collect();
    report.groups = g
        .reset_groups
        .iter()
        .map(|grp| (g.node(grp.signal).name.clone(), grp.members.len()))
        .collect();
    report
}

fn widen(e: Expr, width: u32) -> Expr {
    if e.width >= width {
        return e;
    }
    match e.as_const() {
        Some(v) => Expr::constant(v.resize(width, e.signed), e.signed),
        None => Expr::prim_unchecked(PrimOp::Pad(width), vec![e]),
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Bit-level node splitting.
//!
//! A node assembled from concatenations whose consumers read only some of its
//! bits is replaced by one node per contiguous slice, so that a change in one
//! slice no longer wakes consumers of the others. Consumers that need the whole
//! value read a wire that concatenates the slices back together.

use crate::expr::{Expr, ExprKind, NodeId, PrimOp};
use crate::graph::{NodeKind, ResetInfo, ResetMember, RtlGraph, RtlNode};
use crate::value::WideValue;
use serde::Serialize;
use std::collections::BTreeSet;

pub const DEFAULT_MAX_SLICES: usize = 8;

/// Per node, slices as `(hi, lo)` pairs from the top bit down; a node that
/// stays whole has a single slice.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BitSliceLattice {
    pub slices: Vec<Vec<(u32, u32)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitDecision {
    pub node: String,
    pub width: u32,
    pub slices: Vec<(u32, u32)>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BitSplitReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub split: Vec<SplitDecision>,
}

/// Interior bit positions at which an expression falls apart into
/// independent pieces. Only cat, bits, mux, zero-extension and references
/// carry boundaries; every other operator mixes its operand bits.
fn def_cuts(e: &Expr, node_cuts: &[BTreeSet<u32>]) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    match &e.kind {
        ExprKind::Const(_) => {}
        ExprKind::Ref(id) => {
            if let Some(c) = node_cuts.get(id.index()) {
                out.extend(c.iter().copied().filter(|&c| c > 0 && c < e.width));
            }
        }
        ExprKind::Prim(op, args) => match op {
            PrimOp::Cat => {
                let bw = args[1].width;
                out.extend(def_cuts(&args[1], node_cuts));
                out.insert(bw);
                out.extend(def_cuts(&args[0], node_cuts).into_iter().map(|c| c + bw));
            }
            PrimOp::Bits(hi, lo) => {
                out.extend(
                    def_cuts(&args[0], node_cuts)
                        .into_iter()
                        .filter(|&c| c > *lo && c <= *hi)
                        .map(|c| c - lo),
                );
            }
            PrimOp::Mux => {
                for a in &args[1..] {
                    out.extend(def_cuts(a, node_cuts).into_iter().filter(|&c| c < e.width));
                    if !a.signed && a.width < e.width {
                        out.insert(a.width);
                    }
                }
            }
            PrimOp::Pad(n) if !args[0].signed => {
                out.extend(def_cuts(&args[0], node_cuts));
                if args[0].width < *n {
                    out.insert(args[0].width);
                }
            }
            _ => {}
        },
    }
    out
}

fn splittable(g: &RtlGraph, id: NodeId) -> bool {
    let node = g.node(id);
    node.width > 1
        && match node.kind {
            NodeKind::Wire => node.expr.is_some(),
            NodeKind::RegRead => node.partner.is_some_and(|w| g.node(w).expr.is_some()),
            _ => false,
        }
}

fn defining_expr(g: &RtlGraph, id: NodeId) -> Option<&Expr> {
    let node = g.node(id);
    match node.kind {
        NodeKind::Wire => node.expr.as_ref(),
        NodeKind::RegRead => node.partner.and_then(|w| g.node(w).expr.as_ref()),
        _ => None,
    }
}

fn compute_node_cuts(g: &RtlGraph) -> Vec<BTreeSet<u32>> {
    let mut cuts = vec![BTreeSet::new(); g.len()];
    let Ok(order) = g.topo_order() else { return cuts };
    // Register feedback can carry boundaries around a loop; a few rounds
    // reach the fixed point for any realistic nesting.
    for _ in 0..4 {
        let mut changed = false;
        for &id in &order {
            if !splittable(g, id) {
                continue;
            }
            let e = defining_expr(g, id).unwrap();
            let c = def_cuts(e, &cuts);
            if c != cuts[id.index()] {
                cuts[id.index()] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    cuts
}

/// Bit ranges `(hi, lo)` through which consumers read `id`; `None` for a
/// whole-value read.
fn uses_of(g: &RtlGraph, id: NodeId) -> Vec<Option<(u32, u32)>> {
    fn walk(e: &Expr, id: NodeId, out: &mut Vec<Option<(u32, u32)>>) {
        match &e.kind {
            ExprKind::Const(_) => {}
            ExprKind::Ref(r) => {
                if *r == id {
                    out.push(None);
                }
            }
            ExprKind::Prim(PrimOp::Bits(hi, lo), args) if args[0].as_ref_id() == Some(id) => {
                out.push(Some((*hi, *lo)));
            }
            ExprKind::Prim(_, args) => args.iter().for_each(|a| walk(a, id, out)),
        }
    }
    let mut out = Vec::new();
    for &c in g.succs(id) {
        if let Some(e) = &g.node(c).expr {
            walk(e, id, &mut out);
        }
    }
    out
}

/// Cuts that separate each sliced use from the bits it does not read.
fn choose_cuts(width: u32, cuts: &BTreeSet<u32>, uses: &[Option<(u32, u32)>], max_slices: usize) -> Vec<u32> {
    let mut chosen = BTreeSet::new();
    for &(hi, lo) in uses.iter().flatten() {
        if lo > 0 {
            if let Some(&c) = cuts.range(1..=lo).next_back() {
                chosen.insert(c);
            }
        }
        if hi + 1 < width {
            if let Some(&c) = cuts.range(hi + 1..width).next() {
                chosen.insert(c);
            }
        }
    }
    chosen.into_iter().take(max_slices.saturating_sub(1)).collect()
}

fn slices_from_cuts(width: u32, cuts: &[u32]) -> Vec<(u32, u32)> {
    let mut bounds = vec![0];
    bounds.extend_from_slice(cuts);
    bounds.push(width);
    bounds.windows(2).rev().map(|w| (w[1] - 1, w[0])).collect()
}

/// Slice decisions for the current graph, one node at a time, without the
/// cascade that [`split_nodes`] performs.
pub fn analyze_bit_usage(g: &RtlGraph, max_slices: usize) -> BitSliceLattice {
    let node_cuts = compute_node_cuts(g);
    let slices = (0..g.len())
        .map(|i| {
            let id = NodeId(i as u32);
            let w = g.node(id).width;
            if g.is_removed(id) || !splittable(g, id) {
                return vec![(w.saturating_sub(1), 0)];
            }
            let cuts = choose_cuts(w, &node_cuts[i], &uses_of(g, id), max_slices);
            slices_from_cuts(w, &cuts)
        })
        .collect();
    BitSliceLattice { slices }
}

fn zero(width: u32) -> Expr {
    Expr::constant(WideValue::zero(width), false)
}

fn generic_bits(e: Expr, hi: u32, lo: u32) -> Expr {
    Expr::prim_unchecked(PrimOp::Bits(hi, lo), vec![e])
}

/// Bits `hi..=lo` of `x` extended (by its own signedness) to `width`.
fn slice_extended(x: &Expr, width: u32, hi: u32, lo: u32) -> Expr {
    if hi < x.width {
        return slice_expr(x, hi, lo);
    }
    if x.signed {
        return generic_bits(Expr::prim_unchecked(PrimOp::Pad(width), vec![x.clone()]), hi, lo);
    }
    if lo >= x.width {
        return zero(hi - lo + 1);
    }
    Expr::prim_unchecked(PrimOp::Cat, vec![zero(hi - x.width + 1), slice_expr(x, x.width - 1, lo)])
}

/// An unsigned expression equal to bits `hi..=lo` of `e`, pushed through
/// cat, bits, mux and padding so it depends only on the bits it needs.
pub fn slice_expr(e: &Expr, hi: u32, lo: u32) -> Expr {
    if lo == 0 && hi + 1 == e.width {
        return if e.signed {
            Expr::prim_unchecked(PrimOp::AsUInt, vec![e.clone()])
        } else {
            e.clone()
        };
    }
    match &e.kind {
        ExprKind::Const(v) => Expr::constant(v.slice(hi, lo), false),
        ExprKind::Ref(_) => generic_bits(e.clone(), hi, lo),
        ExprKind::Prim(op, args) => match op {
            PrimOp::Cat => {
                let (a, b) = (&args[0], &args[1]);
                let bw = b.width;
                if hi < bw {
                    slice_expr(b, hi, lo)
                } else if lo >= bw {
                    slice_expr(a, hi - bw, lo - bw)
                } else {
                    Expr::prim_unchecked(PrimOp::Cat, vec![slice_expr(a, hi - bw, 0), slice_expr(b, bw - 1, lo)])
                }
            }
            PrimOp::Bits(_, l1) => slice_expr(&args[0], l1 + hi, l1 + lo),
            PrimOp::Mux => Expr::prim_unchecked(
                PrimOp::Mux,
                vec![
                    args[0].clone(),
                    slice_extended(&args[1], e.width, hi, lo),
                    slice_extended(&args[2], e.width, hi, lo),
                ],
            ),
            PrimOp::Pad(_) => slice_extended(&args[0], e.width, hi, lo),
            _ => generic_bits(e.clone(), hi, lo),
        },
    }
}

struct Slice {
    hi: u32,
    lo: u32,
    id: NodeId,
}

/// Replaces reads of `target` through `bits` by reads of the slice nodes.
fn reroute(e: &Expr, target: NodeId, slices: &[Slice]) -> Expr {
    match &e.kind {
        ExprKind::Prim(PrimOp::Bits(hi, lo), args) if args[0].as_ref_id() == Some(target) => {
            let (hi, lo) = (*hi, *lo);
            let mut pieces: Vec<Expr> = Vec::new();
            for s in slices.iter().filter(|s| s.lo <= hi && s.hi >= lo) {
                let width = s.hi - s.lo + 1;
                let r = Expr::reference(s.id, width, false);
                let (h, l) = (hi.min(s.hi) - s.lo, lo.max(s.lo) - s.lo);
                pieces.push(if l == 0 && h + 1 == width { r } else { generic_bits(r, h, l) });
            }
            pieces
                .into_iter()
                .reduce(|acc, p| Expr::prim_unchecked(PrimOp::Cat, vec![acc, p]))
                .expect("a bits range overlaps at least one slice")
        }
        ExprKind::Prim(op, args) => Expr {
            kind: ExprKind::Prim(*op, args.iter().map(|a| reroute(a, target, slices)).collect()),
            width: e.width,
            signed: e.signed,
        },
        _ => e.clone(),
    }
}

fn reassemble(slices: &[Slice], signed: bool) -> Expr {
    let cat = slices
        .iter()
        .map(|s| Expr::reference(s.id, s.hi - s.lo + 1, false))
        .reduce(|acc, p| Expr::prim_unchecked(PrimOp::Cat, vec![acc, p]))
        .unwrap();
    if signed {
        Expr::prim_unchecked(PrimOp::AsSInt, vec![cat])
    } else {
        cat
    }
}

/// Splits nodes, consumers first, so that slice nodes of a consumer can in
/// turn make their producers splittable.
pub fn split_nodes(g: &mut RtlGraph, max_slices: usize) -> BitSplitReport {
    let mut report = BitSplitReport {
        nodes_before: g.node_count(),
        ..Default::default()
    };
    let Ok(order) = g.topo_order() else { return report };
    let mut node_cuts = compute_node_cuts(g);
    for &id in order.iter().rev() {
        if g.is_removed(id) || !splittable(g, id) {
            continue;
        }
        let width = g.node(id).width;
        let cuts = choose_cuts(width, &node_cuts[id.index()], &uses_of(g, id), max_slices);
        if cuts.is_empty() {
            continue;
        }
        let ranges = slices_from_cuts(width, &cuts);
        let slices = match g.node(id).kind {
            NodeKind::RegRead => split_register(g, id, &ranges),
            _ => split_wire(g, id, &ranges),
        };
        for s in &slices {
            let e = defining_expr(g, s.id).unwrap().clone();
            node_cuts.resize(g.len(), BTreeSet::new());
            node_cuts[s.id.index()] = def_cuts(&e, &node_cuts);
        }
        for c in g.succs(id).to_vec() {
            if slices.iter().any(|s| s.id == c) {
                continue;
            }
            let e = g.node(c).expr.as_ref().map(|e| reroute(e, id, &slices));
            g.set_expr(c, e);
        }
        report.split.push(SplitDecision {
            node: g.node(id).name.clone(),
            width,
            slices: ranges,
        });
    }
    report.nodes_after = g.node_count();
    report
}

fn split_wire(g: &mut RtlGraph, id: NodeId, ranges: &[(u32, u32)]) -> Vec<Slice> {
    let node = g.node(id).clone();
    let expr = node.expr.clone().unwrap();
    let slices: Vec<Slice> = ranges
        .iter()
        .map(|&(hi, lo)| Slice {
            hi,
            lo,
            id: g.add_node(RtlNode {
                name: format!("{}$b{hi}_{lo}", node.name),
                kind: NodeKind::Wire,
                width: hi - lo + 1,
                signed: false,
                expr: Some(slice_expr(&expr, hi, lo)),
                reset: None,
                partner: None,
            }),
        })
        .collect();
    g.set_expr(id, Some(reassemble(&slices, node.signed)));
    slices
}

fn split_register(g: &mut RtlGraph, id: NodeId, ranges: &[(u32, u32)]) -> Vec<Slice> {
    let read = g.node(id).clone();
    let write_id = read.partner.unwrap();
    let write = g.node(write_id).clone();
    let next = write.expr.clone().unwrap();
    let member = g
        .reset_groups
        .iter()
        .enumerate()
        .find_map(|(gi, grp)| grp.members.iter().position(|m| m.read == id).map(|mi| (gi, mi)));
    let mut slices = Vec::new();
    let mut members = Vec::new();
    for &(hi, lo) in ranges {
        let width = hi - lo + 1;
        let r = g.add_node(RtlNode {
            name: format!("{}$b{hi}_{lo}", read.name),
            kind: NodeKind::RegRead,
            width,
            signed: false,
            expr: None,
            reset: None,
            partner: None,
        });
        let w = g.add_node(RtlNode {
            name: format!("{}$b{hi}_{lo}$next", read.name),
            kind: NodeKind::RegWrite,
            width,
            signed: false,
            expr: None,
            reset: write.reset.as_ref().map(|info| ResetInfo {
                signal: info.signal,
                init: slice_expr(&info.init, hi, lo),
            }),
            partner: Some(r),
        });
        g.node_mut(r).partner = Some(w);
        g.set_expr(w, Some(slice_expr(&next, hi, lo)));
        if let Some((gi, mi)) = member {
            members.push(ResetMember {
                read: r,
                write: w,
                init: slice_expr(&g.reset_groups[gi].members[mi].init, hi, lo),
            });
        }
        slices.push(Slice { hi, lo, id: r });
    }
    if let Some((gi, mi)) = member {
        g.reset_groups[gi].members.splice(mi..=mi, members);
    }
    g.remove(write_id);
    let node = g.node_mut(id);
    node.kind = NodeKind::Wire;
    node.partner = None;
    let e = reassemble(&slices, read.signed);
    g.set_expr(id, Some(e));
    slices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;
    use crate::oracle::Oracle;
    use crate::sim::{lockstep, Simulator};

    const FIG: &str = "circuit S :
  module S :
    input a : UInt<4>
    input b : UInt<4>
    input c : UInt<4>
    output f : UInt<4>
    output g : UInt<4>
    output e_all : UInt<8>
    node d = cat(a, b)
    node e = cat(b, c)
    f <= bits(d, 7, 4)
    g <= bits(e, 3, 0)
    e_all <= e
";

    #[test]
    fn lattice_records_cat_boundaries() {
        let g = load_graph(FIG).unwrap();
        let l = analyze_bit_usage(&g, DEFAULT_MAX_SLICES);
        assert_eq!(l.slices[g.find("d").unwrap().index()], vec![(7, 4), (3, 0)]);
        assert_eq!(l.slices[g.find("e").unwrap().index()], vec![(7, 4), (3, 0)]);
    }

    #[test]
    fn mixing_operator_keeps_one_slice() {
        let g = load_graph(
            "circuit S :\n  module S :\n    input a : UInt<4>\n    input b : UInt<4>\n    output f : UInt<2>\n    node d = add(a, b)\n    f <= bits(d, 1, 0)\n",
        )
        .unwrap();
        let l = analyze_bit_usage(&g, DEFAULT_MAX_SLICES);
        assert_eq!(l.slices[g.find("d").unwrap().index()], vec![(4, 0)]);
    }

    #[test]
    fn consumer_of_other_slice_no_longer_depends() {
        let mut g = load_graph(FIG).unwrap();
        let r = split_nodes(&mut g, DEFAULT_MAX_SLICES);
        assert_eq!(r.split.len(), 2);
        let gout = g.find("g").unwrap();
        let b = g.find("b").unwrap();
        let mut seen = BTreeSet::new();
        let mut stack = vec![gout];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend_from_slice(g.preds(n));
            }
        }
        assert!(!seen.contains(&b), "g still reaches b");
    }

    #[test]
    fn whole_use_only_is_not_split() {
        let mut g = load_graph(
            "circuit S :\n  module S :\n    input a : UInt<4>\n    input b : UInt<4>\n    output f : UInt<8>\n    node d = cat(a, b)\n    f <= d\n",
        )
        .unwrap();
        let before = g.dump();
        assert!(split_nodes(&mut g, DEFAULT_MAX_SLICES).split.is_empty());
        assert_eq!(g.dump(), before);
    }

    #[test]
    fn chain_of_cats_all_split() {
        let src = "circuit S :
  module S :
    input a : UInt<4>
    input b : UInt<4>
    input c : UInt<4>
    input d : UInt<4>
    output o : UInt<4>
    node x1 = cat(a, b)
    node x2 = cat(x1, c)
    node x3 = cat(d, x2)
    o <= bits(x3, 7, 4)
";
        let mut g = load_graph(src).unwrap();
        let before = g.node_count();
        let r = split_nodes(&mut g, DEFAULT_MAX_SLICES);
        let names: BTreeSet<&str> = r.split.iter().map(|s| s.node.as_str()).collect();
        assert_eq!(names, BTreeSet::from(["x1", "x2", "x3"]));
        assert!(g.node_count() > before);
        let mut a = Oracle::new(load_graph(src).unwrap()).unwrap();
        let mut b = Oracle::new(g).unwrap();
        let cycles: Vec<Vec<(String, WideValue)>> = (0..16u64)
            .map(|i| {
                ["a", "b", "c", "d"]
                    .iter()
                    .enumerate()
                    .map(|(k, n)| (n.to_string(), WideValue::from_u64((i * 7 + k as u64 * 5) % 16, 4)))
                    .collect()
            })
            .collect();
        lockstep(&mut a, &mut b, &cycles).unwrap();
    }

    #[test]
    fn register_splits_into_register_pairs() {
        let src = "circuit R :
  module R :
    input clock : Clock
    input rst : UInt<1>
    input a : UInt<4>
    input c : UInt<4>
    output lo : UInt<4>
    output all : UInt<8>
    reg s : UInt<8>, clock with : (reset => (rst, UInt<8>(165)))
    s <= cat(a, c)
    lo <= bits(s, 3, 0)
    all <= s
";
        let mut g = load_graph(src).unwrap();
        crate::opt::build_reset_groups(&mut g);
        let r = split_nodes(&mut g, DEFAULT_MAX_SLICES);
        assert_eq!(r.split[0].slices, vec![(7, 4), (3, 0)]);
        assert_eq!(g.register_count(), 2);
        let mut a = Oracle::new(load_graph(src).unwrap()).unwrap();
        let mut b = Oracle::new(g).unwrap();
        let cycles: Vec<Vec<(String, WideValue)>> = (0..12u64)
            .map(|i| {
                vec![
                    ("rst".to_string(), WideValue::from_u64((i % 5 == 0) as u64, 1)),
                    ("a".to_string(), WideValue::from_u64(i % 16, 4)),
                    ("c".to_string(), WideValue::from_u64((i * 3) % 16, 4)),
                ]
            })
            .collect();
        lockstep(&mut a, &mut b, &cycles).unwrap();
        assert_eq!(b.cycle(), 12);
    }

    #[test]
    fn random_circuits_survive_split() {
        use crate::oracle::random::{random_circuit, random_stimulus, CircuitParams};
        let mut total = 0;
        for seed in 0..40 {
            let src = random_circuit(seed, &CircuitParams::sampled(seed));
            let plain = load_graph(&src).unwrap();
            let mut g = plain.clone();
            crate::opt::run_node_opt(&mut g, &Default::default(), &Default::default());
            total += split_nodes(&mut g, DEFAULT_MAX_SLICES).split.len();
            g.compact();
            let mut a = Oracle::new(plain).unwrap();
            let mut b = Oracle::new(g).unwrap();
            let inputs: Vec<(String, u32)> =
                a.input_names().into_iter().map(|n| (n.clone(), a.port_width(&n).unwrap())).collect();
            let stim = random_stimulus(seed, &inputs, &a.reset_names(), 150);
            if let Err(m) = lockstep(&mut a, &mut b, &stim.cycles) {
                panic!("seed {seed}: {m}");
            }
        }
        assert!(total > 0, "no random circuit exercised splitting");
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Local expression rewriting: constant folding and propagation, mux and
//! identity simplification, slice reductions, and the one-hot decode rewrite
//! `bits(dshl(1, A), k, k)` to `eq(A, k)`.

use crate::expr::{eval_prim, expr_cost, CostWeights, Expr, ExprKind, NodeId, PrimOp};
use crate::graph::{NodeKind, RtlGraph};
use crate::value::WideValue;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OneHotRewrite {
    pub node: String,
    pub bit: u32,
    pub cost_before: u64,
    pub cost_after: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SimplifyReport {
    pub nodes_rewritten: usize,
    pub cost_before: u64,
    pub cost_after: u64,
    pub one_hot: Vec<OneHotRewrite>,
}

/// Rewrites every node expression to a fixed point. A rewrite that would
/// raise the node's cost is discarded.
pub fn simplify_expressions(g: &mut RtlGraph, weights: &CostWeights) -> SimplifyReport {
    let mut report = SimplifyReport::default();
    let order = match g.topo_order() {
        Ok(o) => o,
        Err(_) => return report,
    };
    report.cost_before = total_cost(g, weights);
    let mut touched = vec![false; g.len()];
    for _round in 0..16 {
        let mut changed = false;
        for &id in &order {
            if g.is_removed(id) {
                continue;
            }
            let Some(old) = g.node(id).expr.clone() else { continue };
            let mut rw = Rewriter {
                g,
                weights,
                dropped: Vec::new(),
                one_hot: Vec::new(),
            };
            let new = rw.simplify(&old);
            if new == old || expr_cost(&new, weights) > expr_cost(&old, weights) {
                continue;
            }
            let Rewriter { dropped, one_hot, .. } = rw;
            let name = g.node(id).name.clone();
            report.one_hot.extend(one_hot.into_iter().map(|(bit, before, after)| OneHotRewrite {
                node: name.clone(),
                bit,
                cost_before: before,
                cost_after: after,
            }));
            g.shorted_hint.extend(dropped);
            g.set_expr(id, Some(new));
            touched[id.index()] = true;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    report.nodes_rewritten = touched.iter().filter(|t| **t).count();
    report.cost_after = total_cost(g, weights);
    report
}

fn total_cost(g: &RtlGraph, weights: &CostWeights) -> u64 {
    g.ids()
        .filter_map(|id| g.node(id).expr.as_ref())
        .map(|e| expr_cost(e, weights))
        .sum()
}

struct Rewriter<'a> {
    g: &'a RtlGraph,
    weights: &'a CostWeights,
    /// Nodes referenced only from mux arms that were folded away.
    dropped: Vec<NodeId>,
    /// (bit, cost before, cost after) for each one-hot decode rewritten.
    one_hot: Vec<(u32, u64, u64)>,
}

fn zero(width: u32, signed: bool) -> Expr {
    Expr::constant(WideValue::zero(width), signed)
}

/// Widens `e` to `width` keeping its signedness.
fn coerce(e: Expr, width: u32) -> Expr {
    if e.width >= width {
        return e;
    }
    match e.kind {
        ExprKind::Const(v) => Expr::constant(v.resize(width, e.signed), e.signed),
        _ => Expr::prim_unchecked(PrimOp::Pad(width), vec![e]),
    }
}

fn is_const_zero(e: &Expr) -> bool {
    e.as_const().is_some_and(|v| v.is_zero())
}

impl Rewriter<'_> {
    fn simplify(&mut self, e: &Expr) -> Expr {
        match &e.kind {
            ExprKind::Const(_) => e.clone(),
            ExprKind::Ref(id) => {
                let node = self.g.node(*id);
                if node.kind == NodeKind::Wire {
                    if let Some(c) = node.expr.as_ref().filter(|x| x.as_const().is_some()) {
                        return coerce(c.clone(), e.width);
                    }
                }
                e.clone()
            }
            ExprKind::Prim(op, args) => {
                let args: Vec<Expr> = args.iter().map(|a| self.simplify(a)).collect();
                self.rewrite(*op, args, e)
            }
        }
    }

    fn cost(&self, e: &Expr) -> u64 {
        expr_cost(e, self.weights)
    }

    /// Rewrites `op(args)` whose original form was `orig`. The result always
    /// has `orig`'s width and signedness.
    fn rewrite(&mut self, op: PrimOp, args: Vec<Expr>, orig: &Expr) -> Expr {
        use PrimOp::*;
        let (w, s) = (orig.width, orig.signed);
        if args.iter().all(|a| a.as_const().is_some()) {
            let vals: Vec<WideValue> = args.iter().map(|a| a.as_const().unwrap().clone()).collect();
            let types: Vec<(u32, bool)> = args.iter().map(|a| (a.width, a.signed)).collect();
            return Expr::constant(eval_prim(op, &vals, &types, w), s);
        }
        let rebuilt = |args: Vec<Expr>| Expr {
            kind: ExprKind::Prim(op, args),
            width: w,
            signed: s,
        };
        match op {
            Mux => {
                if let Some(c) = args[0].as_const() {
                    let (keep, drop) = if c.is_zero() { (2, 1) } else { (1, 2) };
                    self.dropped.extend(args[drop].refs());
                    return coerce(args[keep].clone(), w);
                }
                if args[1] == args[2] {
                    return coerce(args[1].clone(), w);
                }
                if w == 1 && !s {
                    let (a, b) = (args[1].as_const(), args[2].as_const());
                    if let (Some(a), Some(b)) = (a, b) {
                        if a.to_u64() == Some(1) && b.is_zero() {
                            return args[0].clone();
                        }
                    }
                }
                rebuilt(args)
            }
            And | Mul => {
                if args.iter().any(is_const_zero) {
                    return zero(w, s);
                }
                if op == And && !args[0].signed {
                    for (x, y) in [(0, 1), (1, 0)] {
                        if let Some(c) = args[y].as_const() {
                            if args[x].width == w && c.width() == w && c.count_ones() == w {
                                return args[x].clone();
                            }
                        }
                    }
                }
                rebuilt(args)
            }
            Or | Xor | Add => {
                if !args[0].signed {
                    if is_const_zero(&args[1]) {
                        return coerce(args[0].clone(), w);
                    }
                    if is_const_zero(&args[0]) {
                        return coerce(args[1].clone(), w);
                    }
                }
                rebuilt(args)
            }
            Sub => {
                if !args[0].signed && is_const_zero(&args[1]) {
                    return coerce(args[0].clone(), w);
                }
                rebuilt(args)
            }
            Shl(0) | Shr(0) => args[0].clone(),
            Pad(n) if n <= args[0].width => args[0].clone(),
            AsUInt if !args[0].signed => args[0].clone(),
            AsSInt | Cvt if args[0].signed => args[0].clone(),
            Andr | Orr | Xorr if args[0].width == 1 && !args[0].signed => args[0].clone(),
            Not => {
                if let ExprKind::Prim(Not, inner) = &args[0].kind {
                    if !inner[0].signed && inner[0].width == w {
                        return inner[0].clone();
                    }
                }
                rebuilt(args)
            }
            Bits(hi, lo) => self.slice(hi, lo, args, orig),
            _ => rebuilt(args),
        }
    }

    fn slice(&mut self, hi: u32, lo: u32, mut args: Vec<Expr>, orig: &Expr) -> Expr {
        use PrimOp::*;
        let x = args.pop().unwrap();
        if !x.signed && lo == 0 && hi + 1 == x.width {
            return x;
        }
        let again = |this: &mut Self, inner: Expr, hi: u32, lo: u32| {
            let e = Expr::prim_unchecked(Bits(hi, lo), vec![inner.clone()]);
            this.rewrite(Bits(hi, lo), vec![inner], &e)
        };
        if hi == lo {
            if let Some(r) = self.one_hot(&x, hi, orig) {
                return r;
            }
        }
        match &x.kind {
            ExprKind::Prim(Bits(_, l1), inner) => return again(self, inner[0].clone(), l1 + hi, l1 + lo),
            ExprKind::Prim(Cat, parts) => {
                let bw = parts[1].width;
                if hi < bw {
                    return again(self, parts[1].clone(), hi, lo);
                }
                if lo >= bw {
                    return again(self, parts[0].clone(), hi - bw, lo - bw);
                }
            }
            ExprKind::Prim(Pad(_), inner) if hi < inner[0].width => {
                return again(self, inner[0].clone(), hi, lo);
            }
            ExprKind::Prim(Shl(n), inner) => {
                let n = *n;
                if hi < n {
                    return zero(hi - lo + 1, false);
                }
                if lo >= n {
                    return again(self, inner[0].clone(), hi - n, lo - n);
                }
            }
            _ => {}
        }
        Expr {
            kind: ExprKind::Prim(Bits(hi, lo), vec![x]),
            width: orig.width,
            signed: false,
        }
    }

    /// `bits(dshl(c, A), k, k)` with `c` the constant 1 selects `A == k`.
    /// `x` is either the shift itself or a reference to a wire holding it
    /// with a leaf shift amount.
    fn one_hot(&mut self, x: &Expr, k: u32, orig: &Expr) -> Option<Expr> {
        let (shift, through_node) = match &x.kind {
            ExprKind::Prim(PrimOp::Dshl, _) => (x.clone(), false),
            ExprKind::Ref(id) => {
                let node = self.g.node(*id);
                let e = node.expr.as_ref()?;
                match &e.kind {
                    ExprKind::Prim(PrimOp::Dshl, a) if node.kind == NodeKind::Wire && a[1].is_leaf() => (e.clone(), true),
                    _ => return None,
                }
            }
            _ => return None,
        };
        let ExprKind::Prim(PrimOp::Dshl, a) = &shift.kind else { return None };
        if a[0].signed || a[0].as_const()?.to_u64() != Some(1) {
            return None;
        }
        let amount = a[1].clone();
        let aw = amount.width;
        let before = if through_node {
            self.cost(&Expr::prim_unchecked(PrimOp::Bits(k, k), vec![shift.clone()]))
        } else {
            self.cost(orig)
        };
        let out = if aw < 64 && (k as u64) >= (1u64 << aw) {
            zero(1, false)
        } else {
            Expr::prim_unchecked(PrimOp::Eq, vec![amount, Expr::uint(k as u64, aw)])
        };
        self.one_hot.push((k, before, self.cost(&out)));
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;
    use crate::oracle::Oracle;
    use crate::sim::Simulator;

    fn run(src: &str) -> (RtlGraph, SimplifyReport) {
        let mut g = load_graph(src).unwrap();
        let r = simplify_expressions(&mut g, &CostWeights::default());
        (g, r)
    }

    fn out_expr(g: &RtlGraph, name: &str) -> String {
        g.node(g.find(name).unwrap()).expr.as_ref().unwrap().to_sexpr()
    }

    #[test]
    fn folds_constants() {
        let (g, r) = run("circuit T :
  module T :
    output o : UInt<3>
    o <= add(UInt<2>(2), UInt<2>(3))
");
        assert_eq!(out_expr(&g, "o"), "u3:5");
        assert_eq!(r.nodes_rewritten, 1);
    }

    #[test]
    fn constant_condition_selects_arm() {
        let (g, _) = run("circuit T :
  module T :
    input a : UInt<4>
    input b : UInt<4>
    output o : UInt<4>
    o <= mux(UInt<1>(1), a, b)
");
        let a = g.find("a").unwrap();
        assert_eq!(g.node(g.find("o").unwrap()).expr.as_ref().unwrap().as_ref_id(), Some(a));
        assert!(g.shorted_hint.contains(&g.find("b").unwrap()));
    }

    #[test]
    fn one_hot_decode_becomes_compare() {
        let (g, r) = run("circuit T :
  module T :
    input a : UInt<3>
    output o : UInt<1>
    o <= bits(dshl(UInt<1>(1), a), 3, 3)
");
        assert_eq!(out_expr(&g, "o"), format!("(eq %{} u3:3)", g.find("a").unwrap().0));
        assert_eq!(r.one_hot.len(), 1);
        assert!(r.one_hot[0].cost_after < r.one_hot[0].cost_before);
    }

    #[test]
    fn one_hot_through_intermediate_node() {
        let (g, r) = run("circuit T :
  module T :
    input a : UInt<3>
    output o0 : UInt<1>
    output o5 : UInt<1>
    node b = dshl(UInt<1>(1), a)
    o0 <= bits(b, 0, 0)
    o5 <= bits(b, 5, 5)
");
        assert_eq!(r.one_hot.len(), 2);
        assert!(out_expr(&g, "o5").starts_with("(eq"));
        assert!(r.one_hot.iter().all(|h| h.cost_after < h.cost_before));
    }

    #[test]
    fn slice_reductions_preserve_values() {
        let src = "circuit T :
  module T :
    input a : UInt<8>
    input b : UInt<8>
    input s : SInt<4>
    output o1 : UInt<4>
    output o2 : UInt<3>
    output o3 : UInt<2>
    output o4 : UInt<6>
    output o5 : UInt<8>
    o1 <= bits(cat(a, b), 11, 8)
    o2 <= bits(bits(a, 6, 1), 4, 2)
    o3 <= bits(pad(s, 8), 3, 2)
    o4 <= bits(shl(a, 2), 7, 2)
    o5 <= or(a, UInt<8>(0))
";
        let orig = load_graph(src).unwrap();
        let (g, _) = run(src);
        let mut x = Oracle::new(orig).unwrap();
        let mut y = Oracle::new(g).unwrap();
        for (av, bv, sv) in [(0xa5u64, 0x3cu64, 0x9u64), (0xff, 0, 0x7), (1, 0x80, 0xf)] {
            for o in [&mut x, &mut y] {
                o.poke("a", &WideValue::from_u64(av, 8)).unwrap();
                o.poke("b", &WideValue::from_u64(bv, 8)).unwrap();
                o.poke("s", &WideValue::from_u64(sv, 4)).unwrap();
            }
            for name in ["o1", "o2", "o3", "o4", "o5"] {
                assert_eq!(x.peek(name).unwrap(), y.peek(name).unwrap(), "{name}");
            }
        }
    }

    #[test]
    fn propagates_constant_nodes() {
        let (g, _) = run("circuit T :
  module T :
    input a : UInt<4>
    output o : UInt<4>
    node k = UInt<4>(0)
    o <= or(a, k)
");
        let a = g.find("a").unwrap();
        assert_eq!(g.node(g.find("o").unwrap()).expr.as_ref().unwrap().as_ref_id(), Some(a));
    }
}

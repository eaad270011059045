// SPDX-License-Identifier: Apache-2.0

//! Straight-line code for expressions whose every intermediate value fits in
//! one 64-bit word. Values are kept zero-extended to their width; signed
//! operands are sign-extended on use.

use crate::expr::{Expr, ExprKind, NodeId, PrimOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Const,
    Load,
    /// Sign-extend `a` from `wa` bits, then truncate.
    SExt,
    Add,
    Sub,
    Mul,
    UDiv,
    SDiv,
    URem,
    SRem,
    ULt,
    ULeq,
    SLt,
    SLeq,
    Eq,
    Neq,
    And,
    Or,
    Xor,
    Not,
    Andr,
    Orr,
    Xorr,
    Shl,
    LShr,
    AShr,
    Dshl,
    LDshr,
    ADshr,
    Cat,
    Bits,
    Mux,
}

/// One operation; its result lands in the temp with the instruction's index.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Instr {
    pub op: Op,
    pub a: u32,
    pub b: u32,
    pub c: u32,
    /// Width of operand `a`, or a shift amount.
    pub wa: u32,
    /// Result mask.
    pub m: u64,
    pub imm: u64,
}

#[inline]
pub(crate) fn mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

#[inline]
fn sext(v: u64, w: u32) -> i64 {
    let s = 64 - w;
    ((v << s) as i64) >> s
}

struct Builder<'a> {
    code: Vec<Instr>,
    slot: &'a dyn Fn(NodeId) -> u32,
    base: u32,
}

impl Builder<'_> {
    fn push(&mut self, op: Op, a: u32, b: u32, c: u32, wa: u32, width: u32, imm: u64) -> u32 {
        self.code.push(Instr {
            op,
            a,
            b,
            c,
            wa,
            m: mask(width),
            imm,
        });
        self.base + (self.code.len() - 1) as u32
    }

    /// Emits `e` widened to `width`, sign-extending when `e` is signed.
    fn widened(&mut self, e: &Expr, width: u32) -> u32 {
        let t = self.emit(e);
        if e.signed && width > e.width {
            self.push(Op::SExt, t, 0, 0, e.width, width, 0)
        } else {
            t
        }
    }

    fn emit(&mut self, e: &Expr) -> u32 {
        match &e.kind {
            ExprKind::Const(v) => self.push(Op::Const, 0, 0, 0, 0, e.width, v.low_u64()),
            ExprKind::Ref(id) => (self.slot)(*id),
            ExprKind::Prim(op, args) => self.emit_prim(*op, args, e.width),
        }
    }

    fn emit_prim(&mut self, op: PrimOp, args: &[Expr], w: u32) -> u32 {
        use PrimOp as P;
        let (wa, signed) = (args[0].width, args[0].signed);
        match op {
            P::Add | P::Sub | P::Mul | P::And | P::Or | P::Xor => {
                let a = self.widened(&args[0], w);
                let b = self.widened(&args[1], w);
                let o = match op {
                    P::Add => Op::Add,
                    P::Sub => Op::Sub,
                    P::Mul => Op::Mul,
                    P::And => Op::And,
                    P::Or => Op::Or,
                    _ => Op::Xor,
                };
                self.push(o, a, b, 0, 0, w, 0)
            }
            P::Div | P::Rem => {
                let a = self.emit(&args[0]);
                let b = self.emit(&args[1]);
                let o = match (op, signed) {
                    (P::Div, false) => Op::UDiv,
                    (P::Div, true) => Op::SDiv,
                    (_, false) => Op::URem,
                    (_, true) => Op::SRem,
                };
                self.push(o, a, b, args[1].width, wa, w, 0)
            }
            P::Eq | P::Neq if signed => {
                let mw = wa.max(args[1].width);
                let a = self.widened(&args[0], mw);
                let b = self.widened(&args[1], mw);
                let o = if op == P::Eq { Op::Eq } else { Op::Neq };
                self.push(o, a, b, 0, 0, 1, 0)
            }
            P::Lt | P::Leq | P::Gt | P::Geq | P::Eq | P::Neq => {
                let a = self.emit(&args[0]);
                let b = self.emit(&args[1]);
                let (o, swap) = match (op, signed) {
                    (P::Eq, _) => (Op::Eq, false),
                    (P::Neq, _) => (Op::Neq, false),
                    (P::Lt, false) => (Op::ULt, false),
                    (P::Leq, false) => (Op::ULeq, false),
                    (P::Gt, false) => (Op::ULt, true),
                    (P::Geq, false) => (Op::ULeq, true),
                    (P::Lt, true) => (Op::SLt, false),
                    (P::Leq, true) => (Op::SLeq, false),
                    (P::Gt, true) => (Op::SLt, true),
                    _ => (Op::SLeq, true),
                };
                let (x, y, wx, wy) = if swap {
                    (b, a, args[1].width, wa)
                } else {
                    (a, b, wa, args[1].width)
                };
                self.push(o, x, y, wy, wx, 1, 0)
            }
            P::Not => {
                let a = self.emit(&args[0]);
                self.push(Op::Not, a, 0, 0, wa, w, 0)
            }
            P::Andr | P::Orr | P::Xorr => {
                let a = self.emit(&args[0]);
                let o = match op {
                    P::Andr => Op::Andr,
                    P::Orr => Op::Orr,
                    _ => Op::Xorr,
                };
                self.push(o, a, 0, 0, wa, 1, mask(wa))
            }
            P::Neg => {
                let a = self.widened(&args[0], w);
                let z = self.push(Op::Const, 0, 0, 0, 0, w, 0);
                self.push(Op::Sub, z, a, 0, 0, w, 0)
            }
            P::Shl(n) => {
                let a = self.emit(&args[0]);
                self.push(Op::Shl, a, 0, 0, n, w, 0)
            }
            P::Shr(n) => {
                let a = self.emit(&args[0]);
                if signed {
                    let s = self.push(Op::SExt, a, 0, 0, wa, 64, 0);
                    self.push(Op::AShr, s, 0, 0, n.min(63), w, 0)
                } else {
                    self.push(Op::LShr, a, 0, 0, n, w, 0)
                }
            }
            P::Dshl => {
                let a = self.widened(&args[0], w);
                let b = self.emit(&args[1]);
                self.push(Op::Dshl, a, b, 0, w, w, 0)
            }
            P::Dshr => {
                let a = self.emit(&args[0]);
                let b = self.emit(&args[1]);
                let o = if signed { Op::ADshr } else { Op::LDshr };
                self.push(o, a, b, 0, wa, w, 0)
            }
            P::Cat => {
                let a = self.emit(&args[0]);
                let b = self.emit(&args[1]);
                self.push(Op::Cat, a, b, 0, args[1].width, w, 0)
            }
            P::Bits(_, lo) => {
                let a = self.emit(&args[0]);
                self.push(Op::Bits, a, 0, 0, lo, w, 0)
            }
            P::Pad(_) | P::Cvt => self.widened(&args[0], w),
            P::AsUInt | P::AsSInt => self.emit(&args[0]),
            P::Mux => {
                let c = self.emit(&args[0]);
                let a = self.widened(&args[1], w);
                let b = self.widened(&args[2], w);
                self.push(Op::Mux, c, a, b, 0, w, 0)
            }
        }
    }
}

/// Compiles `e`; `slot` maps each referenced node to its narrow slot.
/// Operands index one value array in which the temps of instruction `i`
/// live at `base + i`. The result is the last temp.
pub(crate) fn compile_narrow(e: &Expr, slot: &dyn Fn(NodeId) -> u32, base: u32) -> Vec<Instr> {
    debug_assert!(crate::expr::fits_one_word(e));
    let mut b = Builder {
        code: Vec::new(),
        slot,
        base,
    };
    let r = b.emit(e);
    if b.code.is_empty() || r != base + b.code.len() as u32 - 1 {
        b.push(Op::Load, r, 0, 0, 0, e.width, 0);
    }
    b.code
}

/// Runs `code` over `v`, which holds the narrow values followed by at least
/// `code.len()` temps starting at `base`.
#[inline]
pub(crate) fn run(code: &[Instr], v: &mut [u64], base: usize) -> u64 {
    let mut last = 0;
    let t = &mut v[..base + code.len()];
    for (i, x) in code.iter().enumerate() {
        let a = || t[x.a as usize];
        let b = || t[x.b as usize];
        let v = match x.op {
            Op::Const => x.imm,
            Op::Load => a(),
            Op::SExt => sext(a(), x.wa) as u64 & x.m,
            Op::Add => a().wrapping_add(b()) & x.m,
            Op::Sub => a().wrapping_sub(b()) & x.m,
            Op::Mul => a().wrapping_mul(b()) & x.m,
            Op::UDiv => a().checked_div(b()).unwrap_or(0) & x.m,
            Op::URem => a().checked_rem(b()).unwrap_or(0) & x.m,
            Op::SDiv => {
                let (p, q) = (sext(a(), x.wa), sext(b(), x.c));
                if q == 0 {
                    0
                } else {
                    p.wrapping_div(q) as u64 & x.m
                }
            }
            Op::SRem => {
                let (p, q) = (sext(a(), x.wa), sext(b(), x.c));
                if q == 0 {
                    0
                } else {
                    p.wrapping_rem(q) as u64 & x.m
                }
            }
            Op::ULt => (a() < b()) as u64,
            Op::ULeq => (a() <= b()) as u64,
            Op::SLt => (sext(a(), x.wa) < sext(b(), x.c)) as u64,
            Op::SLeq => (sext(a(), x.wa) <= sext(b(), x.c)) as u64,
            Op::Eq => (a() == b()) as u64,
            Op::Neq => (a() != b()) as u64,
            Op::And => a() & b(),
            Op::Or => a() | b(),
            Op::Xor => a() ^ b(),
            Op::Not => !a() & x.m,
            Op::Andr => (a() == x.imm) as u64,
            Op::Orr => (a() != 0) as u64,
            Op::Xorr => (a().count_ones() & 1) as u64,
            Op::Shl => a().checked_shl(x.wa).unwrap_or(0) & x.m,
            Op::LShr => a().checked_shr(x.wa).unwrap_or(0) & x.m,
            Op::AShr => ((a() as i64) >> x.wa) as u64 & x.m,
            Op::Dshl => {
                let n = b();
                if n >= x.wa as u64 || n >= 64 {
                    0
                } else {
                    (a() << n) & x.m
                }
            }
            Op::LDshr => {
                let n = b();
                if n >= 64 {
                    0
                } else {
                    (a() >> n) & x.m
                }
            }
            Op::ADshr => {
                let n = b().min(x.wa as u64).min(63);
                (sext(a(), x.wa) >> n) as u64 & x.m
            }
            Op::Cat => (a().checked_shl(x.wa).unwrap_or(0) | b()) & x.m,
            Op::Bits => (a() >> x.wa) & x.m,
            Op::Mux => {
                if a() != 0 {
                    b()
                } else {
                    t[x.c as usize]
                }
            }
        };
        t[base + i] = v;
        last = v;
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval_expr;
    use crate::oracle::random::random_expr;
    use crate::value::WideValue;
    use rand::SeedableRng;

    #[test]
    fn signed_dshl_sign_extends() {
        use crate::expr::{Expr, NodeId, PrimOp};
        let a = Expr::reference(NodeId(0), 4, true);
        let e = Expr::prim(PrimOp::Dshl, vec![a, Expr::uint(1, 2)]).unwrap();
        let code = compile_narrow(&e, &|id| id.0, 1);
        let mut v = vec![0b1101; 1 + code.len()];
        assert_eq!(run(&code, &mut v, 1), 0b111_1010);
    }

    #[test]
    fn matches_generic_evaluator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..20000 {
            let (e, leaves) = random_expr(&mut rng, 64, 4);
            if !crate::expr::fits_one_word(&e) {
                continue;
            }
            let base = leaves.len();
            let code = compile_narrow(&e, &|id| id.0, base as u32);
            let mut v: Vec<u64> = leaves.iter().map(|v| v.low_u64()).collect();
            v.resize(base + code.len(), 0);
            let got = run(&code, &mut v, base);
            let want = eval_expr(&e, &|id| leaves[id.index()].clone());
            assert_eq!(WideValue::from_u64(got, e.width), want, "{}", e.to_sexpr());
            checked += 1;
        }
        assert!(checked > 5000, "only {checked} narrow expressions");
    }
}

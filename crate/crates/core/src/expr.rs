// SPDX-License-Identifier: Apache-2.0

//! Width-annotated expression trees and their evaluation semantics.
//!
//! Result widths follow the FIRRTL primitive-operation rules. Every
//! constructor goes through [`Expr::prim`], which checks operand types and
//! computes the result type, so an `Expr` in a graph is always well typed.

use crate::value::{words_for, WideValue, WORD_BITS};
use std::cmp::Ordering;
use std::fmt::{self, Write as _};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Leq,
    Gt,
    Geq,
    Eq,
    Neq,
    And,
    Or,
    Xor,
    Not,
    Andr,
    Orr,
    Xorr,
    Neg,
    Shl(u32),
    Shr(u32),
    Dshl,
    Dshr,
    Cat,
    Bits(u32, u32),
    Pad(u32),
    Mux,
    Cvt,
    AsUInt,
    AsSInt,
}

impl PrimOp {
    pub fn name(&self) -> &'static str {
        use PrimOp::*;
        match self {
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Div => "div",
            Rem => "rem",
            Lt => "lt",
            Leq => "leq",
            Gt => "gt",
            Geq => "geq",
            Eq => "eq",
            Neq => "neq",
            And => "and",
            Or => "or",
            Xor => "xor",
            Not => "not",
            Andr => "andr",
            Orr => "orr",
            Xorr => "xorr",
            Neg => "neg",
            Shl(_) => "shl",
            Shr(_) => "shr",
            Dshl => "dshl",
            Dshr => "dshr",
            Cat => "cat",
            Bits(..) => "bits",
            Pad(_) => "pad",
            Mux => "mux",
            Cvt => "cvt",
            AsUInt => "asUInt",
            AsSInt => "asSInt",
        }
    }

    pub fn arity(&self) -> usize {
        use PrimOp::*;
        match self {
            Not | Andr | Orr | Xorr | Neg | Shl(_) | Shr(_) | Bits(..) | Pad(_) | Cvt | AsUInt
            | AsSInt => 1,
            Mux => 3,
            _ => 2,
        }
    }

    /// Integer parameters in FIRRTL argument order.
    pub fn params(&self) -> Vec<u32> {
        match *self {
            PrimOp::Shl(n) | PrimOp::Shr(n) | PrimOp::Pad(n) => vec![n],
            PrimOp::Bits(hi, lo) => vec![hi, lo],
            _ => vec![],
        }
    }

    pub fn is_muldiv(&self) -> bool {
        matches!(self, PrimOp::Mul | PrimOp::Div | PrimOp::Rem)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Const(WideValue),
    Ref(NodeId),
    Prim(PrimOp, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr {
    pub kind: ExprKind,
    pub width: u32,
    pub signed: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("`{op}` expects {expected} operand(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` operands must have the same signedness")]
    SignMismatch(&'static str),
    #[error("`{0}` requires an unsigned operand")]
    ExpectedUnsigned(&'static str),
    #[error("bits({hi}, {lo}) out of range for width {width}")]
    BitsRange { hi: u32, lo: u32, width: u32 },
    #[error("mux condition must be a 1-bit UInt")]
    MuxCondition,
    #[error("result width of `{0}` is too large")]
    WidthOverflow(&'static str),
}

impl Expr {
    pub fn constant(value: WideValue, signed: bool) -> Self {
        Self {
            width: value.width(),
            kind: ExprKind::Const(value),
            signed,
        }
    }

    pub fn uint(value: u64, width: u32) -> Self {
        Self::constant(WideValue::from_u64(value, width), false)
    }

    pub fn reference(id: NodeId, width: u32, signed: bool) -> Self {
        Self {
            kind: ExprKind::Ref(id),
            width,
            signed,
        }
    }

    /// Builds a primitive operation, checking operand types.
    pub fn prim(op: PrimOp, args: Vec<Expr>) -> Result<Self, TypeError> {
        use PrimOp::*;
        let name = op.name();
        if args.len() != op.arity() {
            return Err(TypeError::Arity {
                op: name,
                expected: op.arity(),
                got: args.len(),
            });
        }
        let w0 = args[0].width;
        let s0 = args[0].signed;
        let same_sign = || {
            if args.len() > 1 && args[0].signed != args[1].signed {
                Err(TypeError::SignMismatch(name))
            } else {
                Ok(())
            }
        };
        let (width, signed) = match op {
            Add | Sub => {
                same_sign()?;
                (w0.max(args[1].width) + 1, s0)
            }
            Mul => {
                same_sign()?;
                (w0 + args[1].width, s0)
            }
            Div => {
                same_sign()?;
                (if s0 { w0 + 1 } else { w0 }, s0)
            }
            Rem => {
                same_sign()?;
                (w0.min(args[1].width), s0)
            }
            Lt | Leq | Gt | Geq | Eq | Neq => {
                same_sign()?;
                (1, false)
            }
            And | Or | Xor => {
                same_sign()?;
                (w0.max(args[1].width), false)
            }
            Not => (w0, false),
            Andr | Orr | Xorr => (1, false),
            Neg => (w0 + 1, true),
            Shl(n) => (w0 + n, s0),
            Shr(n) => (w0.saturating_sub(n).max(1), s0),
            Dshl => {
                if args[1].signed {
                    return Err(TypeError::ExpectedUnsigned(name));
                }
                let sw = args[1].width;
                if sw >= 24 {
                    return Err(TypeError::WidthOverflow(name));
                }
                (w0 + (1u32 << sw) - 1, s0)
            }
            Dshr => {
                if args[1].signed {
                    return Err(TypeError::ExpectedUnsigned(name));
                }
                (w0, s0)
            }
            Cat => (w0 + args[1].width, false),
            Bits(hi, lo) => {
                if hi < lo || hi >= w0 {
                    return Err(TypeError::BitsRange { hi, lo, width: w0 });
                }
                (hi - lo + 1, false)
            }
            Pad(n) => (w0.max(n), s0),
            Mux => {
                if args[0].width != 1 || args[0].signed {
                    return Err(TypeError::MuxCondition);
                }
                if args[1].signed != args[2].signed {
                    return Err(TypeError::SignMismatch(name));
                }
                (args[1].width.max(args[2].width), args[1].signed)
            }
            Cvt => (if s0 { w0 } else { w0 + 1 }, true),
            AsUInt => (w0, false),
            AsSInt => (w0, true),
        };
        Ok(Self {
            kind: ExprKind::Prim(op, args),
            width,
            signed,
        })
    }

    /// Like [`Expr::prim`] for operands already known to be well typed.
    pub fn prim_unchecked(op: PrimOp, args: Vec<Expr>) -> Self {
        Self::prim(op, args).expect("ill-typed expression built by a pass")
    }

    pub fn as_const(&self) -> Option<&WideValue> {
        match &self.kind {
            ExprKind::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_ref_id(&self) -> Option<NodeId> {
        match self.kind {
            ExprKind::Ref(id) => Some(id),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self.kind, ExprKind::Prim(..))
    }

    /// Visits every referenced node id (with repetition).
    pub fn for_each_ref(&self, f: &mut impl FnMut(NodeId)) {
        match &self.kind {
            ExprKind::Const(_) => {}
            ExprKind::Ref(id) => f(*id),
            ExprKind::Prim(_, args) => args.iter().for_each(|a| a.for_each_ref(f)),
        }
    }

    pub fn refs(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.for_each_ref(&mut |id| out.push(id));
        out
    }

    pub fn count_refs_to(&self, id: NodeId) -> usize {
        let mut n = 0;
        self.for_each_ref(&mut |r| n += (r == id) as usize);
        n
    }

    /// Rebuilds the tree replacing every reference through `f`.
    /// `f` must return an expression of the same width and signedness.
    pub fn map_refs(&self, f: &mut impl FnMut(NodeId, u32, bool) -> Expr) -> Expr {
        match &self.kind {
            ExprKind::Const(_) => self.clone(),
            ExprKind::Ref(id) => {
                let e = f(*id, self.width, self.signed);
                debug_assert_eq!((e.width, e.signed), (self.width, self.signed));
                e
            }
            ExprKind::Prim(op, args) => Expr {
                kind: ExprKind::Prim(*op, args.iter().map(|a| a.map_refs(f)).collect()),
                width: self.width,
                signed: self.signed,
            },
        }
    }

    pub fn substitute(&self, id: NodeId, replacement: &Expr) -> Expr {
        self.map_refs(&mut |r, w, s| {
            if r == id {
                replacement.clone()
            } else {
                Expr::reference(r, w, s)
            }
        })
    }

    /// Number of tree nodes.
    pub fn size(&self) -> usize {
        match &self.kind {
            ExprKind::Prim(_, args) => 1 + args.iter().map(|a| a.size()).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match &self.kind {
            ExprKind::Prim(_, args) => 1 + args.iter().map(|a| a.depth()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Compact s-expression form used by graph dumps and golden tests.
    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s);
        s
    }

    fn write_sexpr(&self, s: &mut String) {
        match &self.kind {
            ExprKind::Const(v) => {
                let _ = write!(s, "{}{}:{}", if self.signed { 's' } else { 'u' }, self.width, v.to_hex_string());
            }
            ExprKind::Ref(id) => {
                let _ = write!(s, "{id}");
            }
            ExprKind::Prim(op, args) => {
                s.push('(');
                s.push_str(op.name());
                for a in args {
                    s.push(' ');
                    a.write_sexpr(s);
                }
                for p in op.params() {
                    let _ = write!(s, " {p}");
                }
                s.push(')');
            }
        }
    }
}

/// Evaluates `e`, reading referenced node values through `env`.
pub fn eval_expr(e: &Expr, env: &impl Fn(NodeId) -> WideValue) -> WideValue {
    match &e.kind {
        ExprKind::Const(v) => v.clone(),
        ExprKind::Ref(id) => {
            let v = env(*id);
            debug_assert_eq!(v.width(), e.width, "ref width mismatch for {id}");
            v
        }
        ExprKind::Prim(op, args) => {
            let vals: Vec<WideValue> = args.iter().map(|a| eval_expr(a, env)).collect();
            let types: Vec<(u32, bool)> = args.iter().map(|a| (a.width, a.signed)).collect();
            eval_prim(*op, &vals, &types, e.width)
        }
    }
}

/// Applies one primitive operation to already evaluated operands.
pub fn eval_prim(op: PrimOp, vals: &[WideValue], types: &[(u32, bool)], width: u32) -> WideValue {
    use PrimOp::*;
    let signed = types[0].1;
    let a = &vals[0];
    let ext = |v: &WideValue, w: u32| v.resize(w, signed);
    let bool_val = |b: bool| WideValue::from_u64(b as u64, 1);
    match op {
        Add => ext(a, width).add(&ext(&vals[1], width), width),
        Sub => ext(a, width).sub(&ext(&vals[1], width), width),
        Mul => ext(a, width).mul(&ext(&vals[1], width), width),
        Div => {
            if signed {
                let (q, _) = a.abs_signed().with_width(types[0].0).udivrem(&vals[1].abs_signed());
                let q = q.resize(width, false);
                if a.is_negative() != vals[1].is_negative() {
                    q.neg()
                } else {
                    q
                }
            } else {
                a.udivrem(&vals[1]).0.resize(width, false)
            }
        }
        Rem => {
            if signed {
                let (_, r) = a.abs_signed().udivrem(&vals[1].abs_signed());
                let r = r.resize(width, false);
                if a.is_negative() {
                    r.neg()
                } else {
                    r
                }
            } else {
                a.udivrem(&vals[1]).1.resize(width, false)
            }
        }
        Lt | Leq | Gt | Geq | Eq | Neq => {
            let ord = if signed { a.scmp(&vals[1]) } else { a.ucmp(&vals[1]) };
            bool_val(match op {
                Lt => ord == Ordering::Less,
                Leq => ord != Ordering::Greater,
                Gt => ord == Ordering::Greater,
                Geq => ord != Ordering::Less,
                Eq => ord == Ordering::Equal,
                _ => ord != Ordering::Equal,
            })
        }
        And => ext(a, width).and(&ext(&vals[1], width), width),
        Or => ext(a, width).or(&ext(&vals[1], width), width),
        Xor => ext(a, width).xor(&ext(&vals[1], width), width),
        Not => a.not(),
        Andr => bool_val(a.count_ones() == types[0].0),
        Orr => bool_val(!a.is_zero()),
        Xorr => bool_val(a.count_ones() % 2 == 1),
        Neg => WideValue::zero(width).sub(&ext(a, width), width),
        Shl(n) => a.shl(n, width),
        Shr(n) => {
            if signed {
                a.ashr(n, width)
            } else {
                a.lshr(n, width)
            }
        }
        Dshl => {
            let amt = vals[1].to_u64().unwrap_or(u64::MAX).min(width as u64) as u32;
            ext(a, width).shl(amt, width)
        }
        Dshr => {
            let amt = vals[1].to_u64().unwrap_or(u64::MAX).min(types[0].0 as u64) as u32;
            if signed {
                a.ashr(amt, width)
            } else {
                a.lshr(amt, width)
            }
        }
        Cat => a.concat(&vals[1]),
        Bits(hi, lo) => a.slice(hi, lo),
        Pad(_) => ext(a, width),
        Mux => {
            let arm_signed = types[1].1;
            let pick = if a.is_zero() { &vals[2] } else { &vals[1] };
            pick.resize(width, arm_signed)
        }
        Cvt => a.resize(width, signed),
        AsUInt | AsSInt => a.clone(),
    }
}

/// Operator weights for the static evaluation-cost estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CostWeights {
    pub word_bits: u32,
    pub muldiv_factor: u32,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            word_bits: WORD_BITS,
            muldiv_factor: 4,
        }
    }
}

/// Weighted operator count: leaves are free, every operator costs the number
/// of machine words it touches, and mul/div/rem are scaled by `muldiv_factor`.
pub fn expr_cost(e: &Expr, weights: &CostWeights) -> u64 {
    match &e.kind {
        ExprKind::Const(_) | ExprKind::Ref(_) => 0,
        ExprKind::Prim(op, args) => {
            let widest = args.iter().map(|a| a.width).max().unwrap_or(0).max(e.width);
            let words = widest.max(1).div_ceil(weights.word_bits.max(1)) as u64;
            let factor = if op.is_muldiv() { weights.muldiv_factor as u64 } else { 1 };
            words * factor + args.iter().map(|a| expr_cost(a, weights)).sum::<u64>()
        }
    }
}

/// Whether every intermediate value of `e` fits in a single machine word.
pub fn fits_one_word(e: &Expr) -> bool {
    if words_for(e.width) > 1 {
        return false;
    }
    match &e.kind {
        ExprKind::Prim(_, args) => args.iter().all(fits_one_word),
        _ => true,
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Deterministic random circuit and stimulus generator.
//!
//! Circuits are emitted as FIRRTL text so they exercise the whole frontend.
//! Besides uniformly random operators the generator plants the structures the
//! optimizer looks for: one-hot decodes, cat/bits slicing, constant-select
//! muxes, aliases, dead logic, self-updating unused registers, resets shared
//! by many registers, `when` blocks and a small memory.

use crate::expr::{Expr, NodeId, PrimOp};
use crate::value::{WideValue, WORD_BITS};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct CircuitParams {
    /// Approximate number of combinational `node`s.
    pub nodes: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub registers: usize,
    /// Widest declared signal.
    pub max_width: u32,
    pub memory: bool,
    pub whens: bool,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            nodes: 50,
            inputs: 4,
            outputs: 4,
            registers: 6,
            max_width: 65,
            memory: true,
            whens: true,
        }
    }
}

impl CircuitParams {
    /// Parameters drawn from `seed`, spanning 50 to 500 nodes.
    pub fn sampled(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1c0);
        let nodes = rng.random_range(50..=500usize);
        Self {
            nodes,
            inputs: rng.random_range(2..=8),
            outputs: rng.random_range(2..=8),
            registers: rng.random_range(2..=(nodes / 8).max(3)),
            max_width: if rng.random_bool(0.25) { 130 } else { 65 },
            memory: rng.random_bool(0.6),
            whens: true,
        }
    }
}

#[derive(Clone, Debug)]
struct Sig {
    name: String,
    width: u32,
    signed: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    max_width: u32,
    pool: Vec<Sig>,
    out: String,
    counter: usize,
}

impl Gen {
    fn width(&mut self) -> u32 {
        match self.rng.random_range(0..10) {
            0..=3 => self.rng.random_range(1..=8),
            4..=6 => self.rng.random_range(9..=WORD_BITS.min(self.max_width)),
            _ => self.rng.random_range(1..=self.max_width),
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn random_value(&mut self, width: u32) -> WideValue {
        let words: Vec<u64> = (0..width.div_ceil(64)).map(|_| self.rng.random::<u64>()).collect();
        let v = WideValue::from_words(&words, width);
        // Bias towards small values so comparisons and shifts are interesting.
        if self.rng.random_bool(0.3) {
            v.slice(width.min(4) - 1, 0).resize(width, false)
        } else {
            v
        }
    }

    fn literal(&mut self, width: u32, signed: bool) -> String {
        if signed {
            let mag = self.random_value(width.saturating_sub(1).max(1));
            let mag = if width == 1 { WideValue::zero(1) } else { mag };
            if self.rng.random_bool(0.5) && !mag.is_zero() {
                format!("SInt<{width}>(-{mag})")
            } else {
                format!("SInt<{width}>({mag})")
            }
        } else {
            format!("UInt<{width}>({})", self.random_value(width))
        }
    }

    /// Prefers recently defined signals for locality, with some long edges.
    fn pick(&mut self) -> Sig {
        let n = self.pool.len();
        let i = if self.rng.random_bool(0.6) {
            n - 1 - self.rng.random_range(0..n.min(12))
        } else {
            self.rng.random_range(0..n)
        };
        self.pool[i].clone()
    }

    fn as_sign(e: (String, u32, bool), signed: bool) -> (String, u32, bool) {
        match (e.2, signed) {
            (false, true) => (format!("asSInt({})", e.0), e.1, true),
            (true, false) => (format!("asUInt({})", e.0), e.1, false),
            _ => e,
        }
    }

    /// Truncates to at most `max_width` bits so widths stay bounded.
    fn clamp(&self, e: (String, u32, bool)) -> (String, u32, bool) {
        if e.1 > self.max_width {
            let w = self.max_width;
            let t = (format!("bits({}, {}, 0)", e.0, w - 1), w, false);
            if e.2 {
                return Self::as_sign(t, true);
            }
            return t;
        }
        e
    }

    fn operand(&mut self, depth: u32) -> (String, u32, bool) {
        if depth == 0 || self.rng.random_bool(0.55) {
            if self.rng.random_bool(0.08) {
                let w = self.width();
                let s = self.rng.random_bool(0.2);
                return (self.literal(w, s), w, s);
            }
            let s = self.pick();
            return (s.name, s.width, s.signed);
        }
        self.expr(depth - 1)
    }

    fn cond(&mut self, depth: u32) -> String {
        let e = self.operand(depth);
        match self.rng.random_range(0..4) {
            0 if e.1 == 1 && !e.2 => e.0,
            0 | 1 => {
                let k = self.rng.random_range(0..e.1);
                format!("bits({}, {k}, {k})", e.0)
            }
            2 => format!("orr({})", e.0),
            _ => {
                let b = Self::as_sign(self.operand(0), e.2);
                let op = ["lt", "leq", "gt", "geq", "eq", "neq"][self.rng.random_range(0..6)];
                format!("{op}({}, {})", e.0, b.0)
            }
        }
    }

    fn expr(&mut self, depth: u32) -> (String, u32, bool) {
        let choice = self.rng.random_range(0..30);
        let e = match choice {
            0..=4 => {
                let op = ["add", "sub", "mul", "div", "rem"][choice];
                let a = self.operand(depth);
                let b = Self::as_sign(self.operand(depth), a.2);
                let w = match op {
                    "add" | "sub" => a.1.max(b.1) + 1,
                    "mul" => a.1 + b.1,
                    "div" => a.1 + a.2 as u32,
                    _ => a.1.min(b.1),
                };
                (format!("{op}({}, {})", a.0, b.0), w, a.2)
            }
            5..=7 => {
                let op = ["and", "or", "xor"][choice - 5];
                let a = self.operand(depth);
                let b = Self::as_sign(self.operand(depth), a.2);
                (format!("{op}({}, {})", a.0, b.0), a.1.max(b.1), false)
            }
            8 | 9 => {
                let c = self.cond(depth);
                (c, 1, false)
            }
            10 => {
                let a = self.operand(depth);
                (format!("not({})", a.0), a.1, false)
            }
            11 => {
                let a = self.operand(depth);
                let op = ["andr", "orr", "xorr"][self.rng.random_range(0..3)];
                (format!("{op}({})", a.0), 1, false)
            }
            12 => {
                let a = self.operand(depth);
                match self.rng.random_range(0..4) {
                    0 => (format!("neg({})", a.0), a.1 + 1, true),
                    1 => (format!("cvt({})", a.0), a.1 + !a.2 as u32, true),
                    2 => (format!("asUInt({})", a.0), a.1, false),
                    _ => (format!("asSInt({})", a.0), a.1, true),
                }
            }
            13 => {
                let a = self.operand(depth);
                let n = self.rng.random_range(0..=8);
                (format!("shl({}, {n})", a.0), a.1 + n, a.2)
            }
            14 => {
                let a = self.operand(depth);
                let n = self.rng.random_range(0..=a.1 + 1);
                (format!("shr({}, {n})", a.0), a.1.saturating_sub(n).max(1), a.2)
            }
            15 => {
                let a = self.operand(depth);
                let sh = self.operand(0);
                let amt = if sh.1 > 3 || sh.2 {
                    let hi = self.rng.random_range(0..sh.1.min(3));
                    (format!("bits({}, {hi}, 0)", sh.0), hi + 1)
                } else {
                    (sh.0, sh.1)
                };
                (format!("dshl({}, {})", a.0, amt.0), a.1 + (1 << amt.1) - 1, a.2)
            }
            16 => {
                let a = self.operand(depth);
                let sh = Self::as_sign(self.operand(0), false);
                (format!("dshr({}, {})", a.0, sh.0), a.1, a.2)
            }
            17..=19 => {
                let a = self.operand(depth);
                let b = self.operand(depth);
                (format!("cat({}, {})", a.0, b.0), a.1 + b.1, false)
            }
            20..=22 => {
                let a = self.operand(depth);
                let hi = self.rng.random_range(0..a.1);
                let lo = self.rng.random_range(0..=hi);
                (format!("bits({}, {hi}, {lo})", a.0), hi - lo + 1, false)
            }
            23 => {
                let a = self.operand(depth);
                let n = self.rng.random_range(1..=a.1);
                if self.rng.random_bool(0.5) {
                    (format!("head({}, {n})", a.0), n, false)
                } else if n < a.1 {
                    (format!("tail({}, {n})", a.0), a.1 - n, false)
                } else {
                    (format!("head({}, {n})", a.0), n, false)
                }
            }
            24 => {
                let a = self.operand(depth);
                let n = self.rng.random_range(1..=self.max_width);
                (format!("pad({}, {n})", a.0), a.1.max(n), a.2)
            }
            25..=27 => {
                let c = if self.rng.random_bool(0.1) {
                    format!("UInt<1>({})", self.rng.random_range(0..2))
                } else {
                    self.cond(depth)
                };
                let a = self.operand(depth);
                let b = Self::as_sign(self.operand(depth), a.2);
                (format!("mux({c}, {}, {})", a.0, b.0), a.1.max(b.1), a.2)
            }
            _ => {
                // One-hot decode of a small selector.
                let s = Self::as_sign(self.operand(0), false);
                let (sel, sw) = if s.1 > 3 {
                    (format!("bits({}, 2, 0)", s.0), 3)
                } else {
                    (s.0, s.1)
                };
                let w = 1 + (1u32 << sw) - 1;
                let oh = format!("dshl(UInt<1>(1), {sel})");
                let k = self.rng.random_range(0..w);
                (format!("bits({oh}, {k}, {k})"), 1, false)
            }
        };
        self.clamp(e)
    }

    fn define(&mut self, e: (String, u32, bool)) -> Sig {
        let name = self.fresh("n");
        let _ = writeln!(self.out, "    node {name} = {}", e.0);
        let s = Sig {
            name,
            width: e.1,
            signed: e.2,
        };
        self.pool.push(s.clone());
        s
    }

    /// Converts an operand to exactly `(width, signed)`.
    fn fit(&mut self, e: (String, u32, bool), width: u32, signed: bool) -> String {
        let mut e = e;
        if e.1 > width {
            e = (format!("bits({}, {}, 0)", e.0, width - 1), width, false);
        }
        e = Self::as_sign(e, signed);
        if e.1 < width && self.rng.random_bool(0.5) {
            e = (format!("pad({}, {width})", e.0), width, signed);
        }
        e.0
    }
}

/// Generates a legal, acyclic circuit. Identical seeds give identical text.
pub fn random_circuit(seed: u64, p: &CircuitParams) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        max_width: p.max_width.max(2),
        pool: Vec::new(),
        out: String::new(),
        counter: 0,
    };
    let name = format!("Rand{seed}");
    let _ = writeln!(g.out, "circuit {name} :\n  module {name} :");
    let _ = writeln!(g.out, "    input clock : Clock\n    input reset : UInt<1>\n    input rst2 : UInt<1>");
    g.pool.push(Sig {
        name: "reset".into(),
        width: 1,
        signed: false,
    });
    for i in 0..p.inputs.max(1) {
        let w = g.width();
        let s = g.rng.random_bool(0.2);
        let ty = if s { format!("SInt<{w}>") } else { format!("UInt<{w}>") };
        let _ = writeln!(g.out, "    input in{i} : {ty}");
        g.pool.push(Sig {
            name: format!("in{i}"),
            width: w,
            signed: s,
        });
    }
    let outs: Vec<(u32, bool)> = (0..p.outputs.max(1)).map(|_| (g.width(), g.rng.random_bool(0.2))).collect();
    for (i, (w, s)) in outs.iter().enumerate() {
        let ty = if *s { format!("SInt<{w}>") } else { format!("UInt<{w}>") };
        let _ = writeln!(g.out, "    output out{i} : {ty}");
    }
    // Registers exist from the start so any node can read them.
    let mut regs = Vec::new();
    for i in 0..p.registers {
        let w = g.width();
        let s = g.rng.random_bool(0.2);
        let ty = if s { format!("SInt<{w}>") } else { format!("UInt<{w}>") };
        let name = format!("r{i}");
        match g.rng.random_range(0..10) {
            0..=4 => {
                let init = g.literal(w, s);
                let _ = writeln!(g.out, "    reg {name} : {ty}, clock with : (reset => (reset, {init}))");
            }
            5 => {
                let init = g.literal(w, s);
                let _ = writeln!(g.out, "    regreset {name} : {ty}, clock, rst2, {init}");
            }
            _ => {
                let _ = writeln!(g.out, "    reg {name} : {ty}, clock");
            }
        }
        regs.push((name.clone(), w, s));
        g.pool.push(Sig { name, width: w, signed: s });
    }
    // A register nothing reads: updates itself forever.
    let _ = writeln!(g.out, "    reg unused : UInt<8>, clock");
    let _ = writeln!(g.out, "    unused <= tail(add(unused, UInt<8>(1)), 1)");

    let mut mem_decl = None;
    let mut wires = 0usize;
    let total = p.nodes.max(4);
    let mem_at = if p.memory { g.rng.random_range(0..total / 2 + 1) } else { usize::MAX };
    let mut i = 0;
    while i < total {
        if i == mem_at {
            let dw = g.width();
            let depth = g.rng.random_range(2..=8u64);
            let aw = 64 - (depth - 1).leading_zeros();
            let _ = writeln!(
                g.out,
                "    mem mem0 :\n      data-type => UInt<{dw}>\n      depth => {depth}\n      read-latency => 0\n      write-latency => 1\n      reader => rd\n      writer => wr\n      read-under-write => undefined"
            );
            let a = g.operand(1);
            let a = g.fit(a, aw, false);
            let _ = writeln!(g.out, "    mem0.rd.addr <= {a}\n    mem0.rd.en <= UInt<1>(1)");
            g.pool.push(Sig {
                name: "mem0.rd.data".into(),
                width: dw,
                signed: false,
            });
            mem_decl = Some((dw, aw));
        }
        match g.rng.random_range(0..20) {
            // alias chain
            0 => {
                let s = g.pick();
                g.define((s.name, s.width, s.signed));
            }
            // `when`-driven wire
            1 if p.whens => {
                let s0 = g.pick();
                let (w, s) = (s0.width, s0.signed);
                let name = format!("w{wires}");
                wires += 1;
                let ty = if s { format!("SInt<{w}>") } else { format!("UInt<{w}>") };
                let c1 = g.cond(1);
                let a = g.operand(1);
                let a = g.fit(a, w, s);
                let b = g.operand(1);
                let b = g.fit(b, w, s);
                let _ = writeln!(g.out, "    wire {name} : {ty}\n    {name} <= {}", s0.name);
                let _ = writeln!(g.out, "    when {c1} :\n      {name} <= {a}");
                if g.rng.random_bool(0.5) {
                    let c2 = g.cond(0);
                    let _ = writeln!(g.out, "    else when {c2} :\n      {name} <= {b}");
                } else {
                    let _ = writeln!(g.out, "    else :\n      {name} <= {b}");
                }
                g.pool.push(Sig { name, width: w, signed: s });
            }
            // cat then slice at and across part boundaries
            2 | 3 => {
                let a = g.pick();
                let b = g.pick();
                let c = g.define(g.clamp((format!("cat({}, {})", a.name, b.name), a.width + b.width, false)));
                if c.width == a.width + b.width {
                    let bw = b.width;
                    g.define((format!("bits({}, {}, {bw})", c.name, c.width - 1), a.width, false));
                    g.define((format!("bits({}, {}, 0)", c.name, bw - 1), bw, false));
                }
            }
            // constant-select mux leaves one arm unused
            4 => {
                let a = g.pick();
                let b = g.operand(1);
                let b = Gen::as_sign(b, a.signed);
                let sel = g.rng.random_range(0..2);
                g.define((format!("mux(UInt<1>({sel}), {}, {})", a.name, b.0), a.width.max(b.1), a.signed));
            }
            _ => {
                let depth = g.rng.random_range(0..3);
                let e = g.expr(depth);
                g.define(e);
            }
        }
        i += 1;
    }
    if let Some((dw, aw)) = mem_decl {
        let a = g.operand(1);
        let a = g.fit(a, aw, false);
        let d = g.operand(1);
        let d = g.fit(d, dw, false);
        let en = g.cond(0);
        let _ = writeln!(g.out, "    mem0.wr.addr <= {a}\n    mem0.wr.en <= {en}\n    mem0.wr.mask <= UInt<1>(1)\n    mem0.wr.data <= {d}");
    }
    for (name, w, s) in regs {
        let e = g.operand(1);
        let e = g.fit(e, w, s);
        if g.rng.random_bool(0.3) {
            let c = g.cond(0);
            let _ = writeln!(g.out, "    when {c} :\n      {name} <= {e}");
        } else {
            let _ = writeln!(g.out, "    {name} <= {e}");
        }
    }
    for (i, (w, s)) in outs.into_iter().enumerate() {
        let e = g.operand(1);
        let e = g.fit(e, w, s);
        let _ = writeln!(g.out, "    out{i} <= {e}");
    }
    g.out
}

/// Per-cycle input assignments for a design's inputs.
#[derive(Clone, Debug)]
pub struct Stimulus {
    pub cycles: Vec<Vec<(String, WideValue)>>,
}

/// Random stimulus: each input toggles with its own probability, so some
/// inputs are busy and others mostly idle. Resets pulse at the start and
/// occasionally afterwards.
pub fn random_stimulus(seed: u64, inputs: &[(String, u32)], resets: &[String], cycles: usize) -> Stimulus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xabcd);
    let rates: Vec<f64> = inputs.iter().map(|_| [0.02, 0.1, 0.5, 1.0][rng.random_range(0..4)]).collect();
    let mut out = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let mut pokes = Vec::new();
        for ((name, width), rate) in inputs.iter().zip(&rates) {
            if resets.contains(name) {
                let on = c < 2 || rng.random_bool(0.02);
                pokes.push((name.clone(), WideValue::from_u64(on as u64, *width)));
            } else if c == 0 || rng.random_bool(*rate) {
                let words: Vec<u64> = (0..width.div_ceil(64)).map(|_| rng.random::<u64>()).collect();
                pokes.push((name.clone(), WideValue::from_words(&words, *width)));
            }
        }
        out.push(pokes);
    }
    Stimulus { cycles: out }
}

/// A random well-typed expression of depth at most `depth` over leaves of
/// width `1..=max_width`. Every reference `NodeId(i)` reads `leaves[i]`.
pub fn random_expr(rng: &mut impl RngExt, max_width: u32, depth: u32) -> (Expr, Vec<WideValue>) {
    let mut leaves = Vec::new();
    let e = expr_rec(rng, max_width, depth, &mut leaves);
    (e, leaves)
}

fn random_value(rng: &mut impl RngExt, width: u32) -> WideValue {
    let words: Vec<u64> = (0..width.div_ceil(WORD_BITS)).map(|_| rng.random()).collect();
    // bias toward small and extreme values, where edge cases live
    match rng.random_range(0..6) {
        0 => WideValue::zero(width),
        1 => WideValue::ones(width),
        2 => WideValue::from_u64(rng.random_range(0..4), width),
        _ => WideValue::from_words(&words, width),
    }
}

fn leaf(rng: &mut impl RngExt, max_width: u32, leaves: &mut Vec<WideValue>) -> Expr {
    let width = rng.random_range(1..=max_width);
    let signed = rng.random_bool(0.4);
    let v = random_value(rng, width);
    if rng.random_bool(0.2) {
        return Expr::constant(v, signed);
    }
    leaves.push(v);
    Expr::reference(NodeId(leaves.len() as u32 - 1), width, signed)
}

fn as_sign(e: Expr, signed: bool) -> Expr {
    if e.signed == signed {
        e
    } else if signed {
        Expr::prim_unchecked(PrimOp::AsSInt, vec![e])
    } else {
        Expr::prim_unchecked(PrimOp::AsUInt, vec![e])
    }
}

fn expr_rec(rng: &mut impl RngExt, max_width: u32, depth: u32, leaves: &mut Vec<WideValue>) -> Expr {
    use PrimOp::*;
    if depth == 0 || rng.random_bool(0.25) {
        return leaf(rng, max_width, leaves);
    }
    loop {
        let a = expr_rec(rng, max_width, depth - 1, leaves);
        let w = a.width;
        let op = match rng.random_range(0..30) {
            0 => Add,
            1 => Sub,
            2 => Mul,
            3 => Div,
            4 => Rem,
            5 => Lt,
            6 => Leq,
            7 => Gt,
            8 => Geq,
            9 => Eq,
            10 => Neq,
            11 => And,
            12 => Or,
            13 => Xor,
            14 => Not,
            15 => Andr,
            16 => Orr,
            17 => Xorr,
            18 => Neg,
            19 => Shl(rng.random_range(0..=8)),
            20 => Shr(rng.random_range(0..=w + 1)),
            21 => Dshl,
            22 => Dshr,
            23 => Cat,
            24 => {
                let hi = rng.random_range(0..w);
                Bits(hi, rng.random_range(0..=hi))
            }
            25 => Pad(rng.random_range(0..=w + 8)),
            26 => Mux,
            27 => Cvt,
            28 => AsUInt,
            _ => AsSInt,
        };
        let args = match op.arity() {
            1 => vec![a],
            _ if op == Mux => {
                let c = expr_rec(rng, 1, depth - 1, leaves);
                let c = if c.width == 1 { as_sign(c, false) } else { continue };
                let b = as_sign(expr_rec(rng, max_width, depth - 1, leaves), a.signed);
                vec![c, a, b]
            }
            _ if matches!(op, Dshl | Dshr) => {
                let amt = as_sign(leaf(rng, if op == Dshl { 4 } else { 8 }, leaves), false);
                vec![a, amt]
            }
            _ => {
                let signed = a.signed;
                let b = as_sign(expr_rec(rng, max_width, depth - 1, leaves), signed);
                vec![a, b]
            }
        };
        match Expr::prim(op, args) {
            Ok(e) if e.width <= max_width.max(1) * 4 => return e,
            _ => continue,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;

    #[test]
    fn deterministic_text() {
        let p = CircuitParams::default();
        assert_eq!(random_circuit(1, &p), random_circuit(1, &p));
        assert_ne!(random_circuit(1, &p), random_circuit(2, &p));
    }

    #[test]
    fn generated_circuits_are_legal() {
        for seed in 0..40 {
            let p = CircuitParams::sampled(seed);
            let text = random_circuit(seed, &p);
            if let Err(e) = load_graph(&text) {
                panic!("seed {seed}: {e}\n{text}");
            }
        }
    }
}

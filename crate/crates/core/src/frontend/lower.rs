// SPDX-License-Identifier: Apache-2.0

//! Lowers a flattened, normalized module to an [`RtlGraph`].
//!
//! Node naming: ports, wires and `node`s keep their names; a register `r`
//! becomes a read node `r` and a write node `r$next`; memory `m` with reader
//! `rd` and writer `wr` yields wires `m$rd$addr`, `m$rd$en`, read node
//! `m$rd$data`, wires `m$wr$addr`, `m$wr$en`, `m$wr$mask`, `m$wr$data` and
//! write node `m$wr`.

use super::ast::{self, Direction, Span, Stmt, Type};
use super::parser::signed_bits_needed;
use super::FrontendError;
use crate::expr::{Expr, ExprKind, NodeId, PrimOp};
use crate::graph::{GraphError, Memory, NodeKind, ResetInfo, RtlGraph, RtlNode};
use crate::value::WideValue;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct LowerOptions {
    /// Widest signal or intermediate value accepted, in bits.
    pub max_width: u32,
}

impl Default for LowerOptions {
    fn default() -> Self {
        Self { max_width: 1024 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SymKind {
    Input,
    Output,
    Wire,
    Node,
    Reg { write: NodeId },
    MemAddr,
    MemEnable,
    MemMask,
    MemWriteData,
    MemReadData,
}

#[derive(Clone, Copy, Debug)]
struct Sym {
    id: NodeId,
    kind: SymKind,
    width: u32,
    signed: bool,
    span: Span,
}

struct Lowerer<'a> {
    opts: &'a LowerOptions,
    g: RtlGraph,
    syms: HashMap<String, Sym>,
    /// Sinks in declaration order, so unconnected errors are deterministic.
    sinks: Vec<String>,
    assigned: HashMap<NodeId, Expr>,
    spans: HashMap<NodeId, Span>,
    clocks: Vec<String>,
    span: Span,
}

fn type_of(ty: Type) -> (u32, bool) {
    match ty {
        Type::UInt(w) => (w, false),
        Type::SInt(w) => (w, true),
        Type::Clock => (1, false),
    }
}

fn addr_width(depth: u64) -> u32 {
    if depth <= 1 {
        1
    } else {
        64 - (depth - 1).leading_zeros()
    }
}

impl<'a> Lowerer<'a> {
    fn type_err(&self, span: Span, msg: impl Into<String>) -> FrontendError {
        let s = if span.line == 0 { self.span } else { span };
        FrontendError::Type {
            line: s.line,
            col: s.col,
            msg: msg.into(),
        }
    }

    fn check_width(&self, name: &str, width: u32, span: Span) -> Result<(), FrontendError> {
        if width > self.opts.max_width {
            return Err(FrontendError::WidthLimit {
                line: span.line,
                col: span.col,
                name: name.to_string(),
                width,
                limit: self.opts.max_width,
            });
        }
        Ok(())
    }

    fn declare(
        &mut self,
        path: String,
        node_name: String,
        kind: NodeKind,
        sym: SymKind,
        (width, signed): (u32, bool),
        span: Span,
    ) -> Result<NodeId, FrontendError> {
        self.check_width(&path, width, span)?;
        if self.syms.contains_key(&path) || self.clocks.contains(&path) {
            return Err(FrontendError::Duplicate {
                line: span.line,
                col: span.col,
                name: path,
            });
        }
        let id = self.g.add_node(RtlNode {
            name: node_name,
            kind,
            width,
            signed,
            expr: None,
            reset: None,
            partner: None,
        });
        self.spans.insert(id, span);
        self.syms.insert(
            path.clone(),
            Sym {
                id,
                kind: sym,
                width,
                signed,
                span,
            },
        );
        if matches!(
            sym,
            SymKind::Output | SymKind::Wire | SymKind::MemAddr | SymKind::MemEnable | SymKind::MemMask | SymKind::MemWriteData
        ) {
            self.sinks.push(path);
        }
        Ok(id)
    }

    fn declare_name(&mut self, name: &str, kind: NodeKind, sym: SymKind, ty: (u32, bool), span: Span) -> Result<NodeId, FrontendError> {
        self.declare(name.to_string(), name.to_string(), kind, sym, ty, span)
    }

    fn declarations(&mut self, m: &ast::Module) -> Result<(), FrontendError> {
        for p in &m.ports {
            if p.ty == Type::Clock {
                self.clocks.push(p.name.clone());
                continue;
            }
            let (kind, sym) = match p.dir {
                Direction::Input => (NodeKind::Input, SymKind::Input),
                Direction::Output => (NodeKind::Output, SymKind::Output),
            };
            self.declare_name(&p.name, kind, sym, type_of(p.ty), p.span)?;
        }
        for s in &m.body {
            match s {
                Stmt::Wire { name, ty, span } => {
                    self.declare_name(name, NodeKind::Wire, SymKind::Wire, type_of(*ty), *span)?;
                }
                Stmt::Node { name, span, .. } => {
                    // Typed later, once the value has been lowered.
                    self.declare_name(name, NodeKind::Wire, SymKind::Node, (0, false), *span)?;
                }
                Stmt::Reg { name, ty, span, .. } => {
                    let t = type_of(*ty);
                    let read = self.g.add_node(RtlNode {
                        name: name.clone(),
                        kind: NodeKind::RegRead,
                        width: t.0,
                        signed: t.1,
                        expr: None,
                        reset: None,
                        partner: None,
                    });
                    let write = self.g.add_node(RtlNode {
                        name: format!("{name}$next"),
                        kind: NodeKind::RegWrite,
                        width: t.0,
                        signed: t.1,
                        expr: None,
                        reset: None,
                        partner: Some(read),
                    });
                    self.g.node_mut(read).partner = Some(write);
                    self.check_width(name, t.0, *span)?;
                    if self.syms.contains_key(name) {
                        return Err(FrontendError::Duplicate {
                            line: span.line,
                            col: span.col,
                            name: name.clone(),
                        });
                    }
                    self.spans.insert(read, *span);
                    self.spans.insert(write, *span);
                    self.syms.insert(
                        name.clone(),
                        Sym {
                            id: read,
                            kind: SymKind::Reg { write },
                            width: t.0,
                            signed: t.1,
                            span: *span,
                        },
                    );
                }
                Stmt::Mem(mem) => self.memory(mem)?,
                Stmt::Inst { span, .. } => {
                    return Err(FrontendError::syntax(span.line, span.col, "instances must be flattened before lowering"))
                }
                Stmt::Connect { .. } | Stmt::Invalidate { .. } => {}
                Stmt::When { span, .. } => {
                    return Err(FrontendError::syntax(span.line, span.col, "`when` must be normalized before lowering"))
                }
            }
        }
        Ok(())
    }

    fn memory(&mut self, mem: &ast::MemDecl) -> Result<(), FrontendError> {
        let (dw, ds) = type_of(mem.data_type);
        let aw = addr_width(mem.depth);
        let mid = self.g.memories.len() as u32;
        let span = mem.span;
        self.check_width(&mem.name, dw, span)?;
        let sep = super::flatten::HIERARCHY_SEPARATOR;
        let mut readers = Vec::new();
        let mut writers = Vec::new();
        let field = |me: &mut Self, port: &str, f: &str, kind: NodeKind, sym: SymKind, ty: (u32, bool)| {
            me.declare(
                format!("{}.{port}.{f}", mem.name),
                format!("{}{sep}{port}{sep}{f}", mem.name),
                kind,
                sym,
                ty,
                span,
            )
        };
        for r in &mem.readers {
            let addr = field(self, r, "addr", NodeKind::Wire, SymKind::MemAddr, (aw, false))?;
            field(self, r, "en", NodeKind::Wire, SymKind::MemEnable, (1, false))?;
            let data = field(self, r, "data", NodeKind::MemRead(mid), SymKind::MemReadData, (dw, ds))?;
            self.g.node_mut(data).expr = Some(Expr::reference(addr, aw, false));
            readers.push(data);
        }
        for w in &mem.writers {
            let addr = field(self, w, "addr", NodeKind::Wire, SymKind::MemAddr, (aw, false))?;
            let en = field(self, w, "en", NodeKind::Wire, SymKind::MemEnable, (1, false))?;
            let mask = field(self, w, "mask", NodeKind::Wire, SymKind::MemMask, (1, false))?;
            let data = field(self, w, "data", NodeKind::Wire, SymKind::MemWriteData, (dw, ds))?;
            let enable = Expr::prim_unchecked(
                PrimOp::And,
                vec![Expr::reference(en, 1, false), Expr::reference(mask, 1, false)],
            );
            let payload = Expr::prim_unchecked(
                PrimOp::Cat,
                vec![Expr::reference(addr, aw, false), Expr::reference(data, dw, ds)],
            );
            let packed = Expr::prim_unchecked(PrimOp::Cat, vec![enable, payload]);
            let id = self.g.add_node(RtlNode {
                name: format!("{}{sep}{w}", mem.name),
                kind: NodeKind::MemWrite(mid),
                width: packed.width,
                signed: false,
                expr: Some(packed),
                reset: None,
                partner: None,
            });
            self.spans.insert(id, span);
            writers.push(id);
        }
        self.g.memories.push(Memory {
            name: mem.name.clone(),
            depth: mem.depth,
            width: dw,
            addr_width: aw,
            readers,
            writers,
        });
        Ok(())
    }

    fn lookup(&self, e: &ast::Expr) -> Result<Sym, FrontendError> {
        let path = e.path().expect("reference");
        match self.syms.get(&path) {
            Some(s) => Ok(*s),
            None => {
                let span = if e.span().line == 0 { self.span } else { e.span() };
                if self.clocks.contains(&path) {
                    return Err(FrontendError::Unsupported {
                        line: span.line,
                        col: span.col,
                        construct: format!("clock signal `{path}` used as a value"),
                    });
                }
                Err(FrontendError::Undeclared {
                    line: span.line,
                    col: span.col,
                    name: path,
                })
            }
        }
    }

    fn finish(&self, e: Result<Expr, crate::expr::TypeError>, span: Span) -> Result<Expr, FrontendError> {
        let e = e.map_err(|err| self.type_err(span, err.to_string()))?;
        if e.width > self.opts.max_width {
            let s = if span.line == 0 { self.span } else { span };
            return Err(FrontendError::WidthLimit {
                line: s.line,
                col: s.col,
                name: "expression".into(),
                width: e.width,
                limit: self.opts.max_width,
            });
        }
        Ok(e)
    }

    fn expr(&self, e: &ast::Expr, expected: Option<(u32, bool)>) -> Result<Expr, FrontendError> {
        let span = e.span();
        match e {
            ast::Expr::Ref(..) | ast::Expr::SubField(..) => {
                let s = self.lookup(e)?;
                if s.kind == SymKind::Node && s.width == 0 {
                    return Err(self.type_err(span, format!("`{}` used before its definition", e)));
                }
                Ok(Expr::reference(s.id, s.width, s.signed))
            }
            ast::Expr::UIntLit { width, value } => {
                let w = width.unwrap_or_else(|| value.min_unsigned_width());
                self.check_width("literal", w, self.span)?;
                Ok(Expr::constant(value.resize(w, false), false))
            }
            ast::Expr::SIntLit {
                width,
                negative,
                magnitude,
            } => {
                let w = width.unwrap_or_else(|| signed_bits_needed(*negative, magnitude));
                self.check_width("literal", w, self.span)?;
                let v = magnitude.resize(w, false);
                Ok(Expr::constant(if *negative { v.neg() } else { v }, true))
            }
            ast::Expr::Mux(c, a, b) => {
                let c = self.expr(c, None)?;
                let (a, b) = match (a.as_ref(), b.as_ref()) {
                    (ast::Expr::Invalid, ast::Expr::Invalid) => (self.expr(a, expected)?, self.expr(b, expected)?),
                    (ast::Expr::Invalid, _) => {
                        let b = self.expr(b, expected)?;
                        (self.expr(a, Some(expected.unwrap_or((b.width, b.signed))))?, b)
                    }
                    (_, ast::Expr::Invalid) => {
                        let a = self.expr(a, expected)?;
                        let t = expected.unwrap_or((a.width, a.signed));
                        (a, self.expr(b, Some(t))?)
                    }
                    _ => (self.expr(a, expected)?, self.expr(b, expected)?),
                };
                self.finish(Expr::prim(PrimOp::Mux, vec![c, a, b]), span)
            }
            ast::Expr::ValidIf(c, a) => {
                self.expr(c, None)?;
                self.expr(a, expected)
            }
            ast::Expr::Invalid => match expected {
                Some((w, s)) => Ok(Expr::constant(WideValue::zero(w), s)),
                None => Err(self.type_err(span, "invalid value where no type is known")),
            },
            ast::Expr::Prim { op, args, params } => {
                let lowered: Vec<Expr> = args.iter().map(|a| self.expr(a, None)).collect::<Result<_, _>>()?;
                let shape = |n_args: usize, n_params: usize| -> Result<(), FrontendError> {
                    if lowered.len() != n_args || params.len() != n_params {
                        return Err(self.type_err(
                            span,
                            format!("`{op}` expects {n_args} operand(s) and {n_params} parameter(s)"),
                        ));
                    }
                    Ok(())
                };
                let unary = |p: PrimOp| -> Result<Expr, FrontendError> {
                    shape(1, 0)?;
                    self.finish(Expr::prim(p, lowered.clone()), span)
                };
                let binary = |p: PrimOp| -> Result<Expr, FrontendError> {
                    shape(2, 0)?;
                    self.finish(Expr::prim(p, lowered.clone()), span)
                };
                let with_param = |p: PrimOp| -> Result<Expr, FrontendError> {
                    shape(1, 1)?;
                    self.finish(Expr::prim(p, lowered.clone()), span)
                };
                match op.as_str() {
                    "add" => binary(PrimOp::Add),
                    "sub" => binary(PrimOp::Sub),
                    "mul" => binary(PrimOp::Mul),
                    "div" => binary(PrimOp::Div),
                    "rem" => binary(PrimOp::Rem),
                    "lt" => binary(PrimOp::Lt),
                    "leq" => binary(PrimOp::Leq),
                    "gt" => binary(PrimOp::Gt),
                    "geq" => binary(PrimOp::Geq),
                    "eq" => binary(PrimOp::Eq),
                    "neq" => binary(PrimOp::Neq),
                    "and" => binary(PrimOp::And),
                    "or" => binary(PrimOp::Or),
                    "xor" => binary(PrimOp::Xor),
                    "cat" => binary(PrimOp::Cat),
                    "dshl" => binary(PrimOp::Dshl),
                    "dshr" => binary(PrimOp::Dshr),
                    "not" => unary(PrimOp::Not),
                    "andr" => unary(PrimOp::Andr),
                    "orr" => unary(PrimOp::Orr),
                    "xorr" => unary(PrimOp::Xorr),
                    "neg" => unary(PrimOp::Neg),
                    "cvt" => unary(PrimOp::Cvt),
                    "asUInt" => unary(PrimOp::AsUInt),
                    "asSInt" => unary(PrimOp::AsSInt),
                    "pad" => with_param(PrimOp::Pad(params.first().copied().unwrap_or(0))),
                    "shl" => with_param(PrimOp::Shl(params.first().copied().unwrap_or(0))),
                    "shr" => with_param(PrimOp::Shr(params.first().copied().unwrap_or(0))),
                    "bits" => {
                        shape(1, 2)?;
                        self.finish(Expr::prim(PrimOp::Bits(params[0], params[1]), lowered.clone()), span)
                    }
                    "head" | "tail" => {
                        shape(1, 1)?;
                        let w = lowered[0].width;
                        let n = params[0];
                        let (hi, lo) = if op == "head" {
                            if n == 0 || n > w {
                                return Err(self.type_err(span, format!("head({n}) out of range for width {w}")));
                            }
                            (w - 1, w - n)
                        } else {
                            if n >= w {
                                return Err(self.type_err(span, format!("tail({n}) out of range for width {w}")));
                            }
                            (w - n - 1, 0)
                        };
                        self.finish(Expr::prim(PrimOp::Bits(hi, lo), lowered.clone()), span)
                    }
                    other => Err(self.type_err(span, format!("unknown primitive operation `{other}`"))),
                }
            }
        }
    }

    /// Widens `value` to the sink type, rejecting narrowing and sign changes.
    fn fit(&self, value: Expr, name: &str, (width, signed): (u32, bool), span: Span) -> Result<Expr, FrontendError> {
        if value.signed != signed {
            return Err(self.type_err(span, format!("cannot connect a {} value to `{name}`", if value.signed { "signed" } else { "unsigned" })));
        }
        if value.width > width {
            return Err(self.type_err(
                span,
                format!("connecting a {}-bit value to {width}-bit `{name}` would truncate", value.width),
            ));
        }
        if value.width < width {
            return Ok(match value.kind {
                ExprKind::Const(v) => Expr::constant(v.resize(width, signed), signed),
                _ => Expr::prim_unchecked(PrimOp::Pad(width), vec![value]),
            });
        }
        Ok(value)
    }

    fn bodies(&mut self, m: &ast::Module) -> Result<(), FrontendError> {
        // Node values, in order, so later nodes can read the types of earlier ones.
        for s in &m.body {
            if let Stmt::Node { name, value, span } = s {
                self.span = *span;
                let e = self.expr(value, None)?;
                self.check_width(name, e.width, *span)?;
                let sym = self.syms.get_mut(name).expect("declared");
                sym.width = e.width;
                sym.signed = e.signed;
                let node = self.g.node_mut(sym.id);
                node.width = e.width;
                node.signed = e.signed;
                let id = sym.id;
                self.assigned.insert(id, e);
            }
        }
        let mut regs: Vec<(String, Span, Option<(ast::Expr, ast::Expr)>)> = Vec::new();
        for s in &m.body {
            match s {
                Stmt::Connect { loc, value, span } => {
                    self.span = *span;
                    let target = self.lookup(loc)?;
                    let name = loc.path().unwrap_or_default();
                    let ty = (target.width, target.signed);
                    let id = match target.kind {
                        SymKind::Reg { write } => write,
                        SymKind::Output
                        | SymKind::Wire
                        | SymKind::MemAddr
                        | SymKind::MemEnable
                        | SymKind::MemMask
                        | SymKind::MemWriteData => target.id,
                        SymKind::Input | SymKind::Node | SymKind::MemReadData => {
                            return Err(self.type_err(*span, format!("`{name}` cannot be connected to")));
                        }
                    };
                    let e = self.expr(value, Some(ty))?;
                    let e = self.fit(e, &name, ty, *span)?;
                    self.assigned.insert(id, e);
                }
                Stmt::Invalidate { loc, span } => {
                    self.span = *span;
                    let target = self.lookup(loc)?;
                    let id = match target.kind {
                        SymKind::Reg { write } => write,
                        _ => target.id,
                    };
                    self.assigned.insert(id, Expr::constant(WideValue::zero(target.width), target.signed));
                }
                Stmt::Reg { name, span, reset, .. } => regs.push((name.clone(), *span, reset.clone())),
                _ => {}
            }
        }
        for name in self.sinks.clone() {
            let sym = self.syms[&name];
            match self.assigned.remove(&sym.id) {
                Some(e) => self.g.node_mut(sym.id).expr = Some(e),
                None => {
                    return Err(FrontendError::Unconnected {
                        line: sym.span.line,
                        col: sym.span.col,
                        name,
                    })
                }
            }
        }
        for (name, span, reset) in regs {
            self.span = span;
            let sym = self.syms[&name];
            let SymKind::Reg { write } = sym.kind else { unreachable!() };
            let ty = (sym.width, sym.signed);
            let read_ref = Expr::reference(sym.id, sym.width, sym.signed);
            let next = self.assigned.remove(&write).unwrap_or_else(|| read_ref.clone());
            let mut expr = next;
            let mut info = None;
            if let Some((rst, init)) = reset {
                let rst_e = self.expr(&rst, Some((1, false)))?;
                if rst_e.width != 1 || rst_e.signed {
                    return Err(self.type_err(span, format!("reset of `{name}` must be a 1-bit UInt")));
                }
                let init_e = self.expr(&init, Some(ty))?;
                let init_e = self.fit(init_e, &name, ty, span)?;
                match (&rst_e.kind, rst_e.as_const()) {
                    (_, Some(v)) if v.is_zero() => {}
                    (ExprKind::Ref(sig), _) => {
                        info = Some(ResetInfo {
                            signal: *sig,
                            init: init_e.clone(),
                        });
                        expr = Expr::prim_unchecked(PrimOp::Mux, vec![rst_e.clone(), init_e, expr]);
                    }
                    (_, Some(_)) => {
                        expr = Expr::prim_unchecked(PrimOp::Mux, vec![rst_e.clone(), init_e, expr]);
                    }
                    _ => {
                        return Err(FrontendError::Unsupported {
                            line: span.line,
                            col: span.col,
                            construct: format!("reset of `{name}` driven by an expression; use a node"),
                        })
                    }
                }
            }
            let node = self.g.node_mut(write);
            node.expr = Some(expr);
            node.reset = info;
        }
        for (id, e) in std::mem::take(&mut self.assigned) {
            self.g.node_mut(id).expr = Some(e);
        }
        Ok(())
    }

    fn collect_reset_inputs(&mut self) {
        let mut found = Vec::new();
        for id in self.g.inputs().collect::<Vec<_>>() {
            let n = self.g.node(id);
            if n.width == 1 && !n.signed && matches!(n.name.as_str(), "reset" | "rst") {
                found.push(id);
            }
        }
        let writes: Vec<NodeId> = self.g.ids().filter(|&id| self.g.node(id).reset.is_some()).collect();
        for w in writes {
            let mut sig = self.g.node(w).reset.as_ref().unwrap().signal;
            // Follow plain wire aliases back to the driving input.
            for _ in 0..self.g.len() {
                let n = self.g.node(sig);
                match (&n.kind, n.expr.as_ref().and_then(|e| e.as_ref_id())) {
                    (NodeKind::Wire, Some(src)) => sig = src,
                    _ => break,
                }
            }
            if self.g.node(sig).kind == NodeKind::Input {
                found.push(sig);
            }
        }
        found.sort();
        found.dedup();
        self.g.reset_inputs = found;
    }
}

/// Lowers a flattened circuit (a single module without `when`s).
pub fn lower(c: &ast::Circuit, opts: &LowerOptions) -> Result<RtlGraph, FrontendError> {
    let m = &c.modules[0];
    let mut l = Lowerer {
        opts,
        g: RtlGraph::new(c.name.clone()),
        syms: HashMap::new(),
        sinks: Vec::new(),
        assigned: HashMap::new(),
        spans: HashMap::new(),
        clocks: Vec::new(),
        span: m.span,
    };
    l.declarations(m)?;
    l.bodies(m)?;
    l.collect_reset_inputs();
    l.g.rebuild_edges();
    if let Err(GraphError::CombinationalLoop(names)) = l.g.topo_order() {
        let first = names.first().and_then(|n| l.g.find(n)).and_then(|id| l.spans.get(&id)).copied();
        let span = first.unwrap_or(m.span);
        return Err(FrontendError::CombinationalLoop {
            line: span.line,
            col: span.col,
            names,
        });
    }
    Ok(l.g)
}

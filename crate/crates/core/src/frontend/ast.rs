// SPDX-License-Identifier: Apache-2.0

//! Syntax tree for the scalar FIRRTL subset, plus a canonical printer.

use crate::value::WideValue;
use std::fmt::{self, Write as _};

/// Source position. Spans never participate in equality so that trees
/// parsed from differently formatted text compare structurally.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Type {
    UInt(u32),
    SInt(u32),
    Clock,
}

impl Type {
    pub fn width(&self) -> Option<u32> {
        match self {
            Type::UInt(w) | Type::SInt(w) => Some(*w),
            Type::Clock => None,
        }
    }

    pub fn is_signed(&self) -> bool {
        matches!(self, Type::SInt(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub name: String,
    pub modules: Vec<Module>,
}

impl Circuit {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn main(&self) -> Option<&Module> {
        self.module(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Module {
    pub name: String,
    pub ports: Vec<Port>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Port {
    pub name: String,
    pub dir: Direction,
    pub ty: Type,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemDecl {
    pub name: String,
    pub data_type: Type,
    pub depth: u64,
    pub read_latency: u32,
    pub write_latency: u32,
    pub readers: Vec<String>,
    pub writers: Vec<String>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Wire {
        name: String,
        ty: Type,
        span: Span,
    },
    Reg {
        name: String,
        ty: Type,
        clock: Expr,
        /// `(reset signal, init value)`
        reset: Option<(Expr, Expr)>,
        span: Span,
    },
    Node {
        name: String,
        value: Expr,
        span: Span,
    },
    Mem(MemDecl),
    Inst {
        name: String,
        module: String,
        span: Span,
    },
    Connect {
        loc: Expr,
        value: Expr,
        span: Span,
    },
    Invalidate {
        loc: Expr,
        span: Span,
    },
    When {
        cond: Expr,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Wire { span, .. }
            | Stmt::Reg { span, .. }
            | Stmt::Node { span, .. }
            | Stmt::Inst { span, .. }
            | Stmt::Connect { span, .. }
            | Stmt::Invalidate { span, .. }
            | Stmt::When { span, .. } => *span,
            Stmt::Mem(m) => m.span,
        }
    }

    /// Name introduced by a declaration.
    pub fn declared_name(&self) -> Option<&str> {
        match self {
            Stmt::Wire { name, .. } | Stmt::Reg { name, .. } | Stmt::Node { name, .. } | Stmt::Inst { name, .. } => {
                Some(name)
            }
            Stmt::Mem(m) => Some(&m.name),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Ref(String, Span),
    SubField(Box<Expr>, String),
    UIntLit {
        width: Option<u32>,
        value: WideValue,
    },
    SIntLit {
        width: Option<u32>,
        negative: bool,
        magnitude: WideValue,
    },
    /// Primitive operation: expression operands followed by integer parameters.
    Prim {
        op: String,
        args: Vec<Expr>,
        params: Vec<u32>,
    },
    Mux(Box<Expr>, Box<Expr>, Box<Expr>),
    ValidIf(Box<Expr>, Box<Expr>),
    /// Right-hand side of an explicit `is invalid`.
    Invalid,
}

impl Expr {
    pub fn reference(name: impl Into<String>) -> Self {
        Expr::Ref(name.into(), Span::default())
    }

    /// Dotted path for references and field accesses (`inst.port`).
    pub fn path(&self) -> Option<String> {
        match self {
            Expr::Ref(n, _) => Some(n.clone()),
            Expr::SubField(base, f) => base.path().map(|b| format!("{b}.{f}")),
            _ => None,
        }
    }

    pub fn root_name(&self) -> Option<&str> {
        match self {
            Expr::Ref(n, _) => Some(n),
            Expr::SubField(base, _) => base.root_name(),
            _ => None,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Expr::Ref(_, s) => *s,
            Expr::SubField(b, _) => b.span(),
            Expr::Prim { args, .. } => args.first().map(|a| a.span()).unwrap_or_default(),
            Expr::Mux(c, _, _) | Expr::ValidIf(c, _) => c.span(),
            _ => Span::default(),
        }
    }

    /// Applies `f` to every reference path, bottom-up.
    pub fn map_paths(&self, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Expr {
        if matches!(self, Expr::Ref(..) | Expr::SubField(..)) {
            if let Some(e) = f(self) {
                return e;
            }
            return self.clone();
        }
        match self {
            Expr::Prim { op, args, params } => Expr::Prim {
                op: op.clone(),
                args: args.iter().map(|a| a.map_paths(f)).collect(),
                params: params.clone(),
            },
            Expr::Mux(c, a, b) => Expr::Mux(
                Box::new(c.map_paths(f)),
                Box::new(a.map_paths(f)),
                Box::new(b.map_paths(f)),
            ),
            Expr::ValidIf(c, a) => Expr::ValidIf(Box::new(c.map_paths(f)), Box::new(a.map_paths(f))),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::UInt(w) => write!(f, "UInt<{w}>"),
            Type::SInt(w) => write!(f, "SInt<{w}>"),
            Type::Clock => f.write_str("Clock"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ref(n, _) => f.write_str(n),
            Expr::SubField(b, field) => write!(f, "{b}.{field}"),
            Expr::UIntLit { width, value } => match width {
                Some(w) => write!(f, "UInt<{w}>({value})"),
                None => write!(f, "UInt({value})"),
            },
            Expr::SIntLit {
                width,
                negative,
                magnitude,
            } => {
                let sign = if *negative { "-" } else { "" };
                match width {
                    Some(w) => write!(f, "SInt<{w}>({sign}{magnitude})"),
                    None => write!(f, "SInt({sign}{magnitude})"),
                }
            }
            Expr::Prim { op, args, params } => {
                write!(f, "{op}(")?;
                let mut first = true;
                for a in args {
                    if !first {
                        f.write_str(", ")?;
                    }
                    first = false;
                    write!(f, "{a}")?;
                }
                for p in params {
                    if !first {
                        f.write_str(", ")?;
                    }
                    first = false;
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
            Expr::Mux(c, a, b) => write!(f, "mux({c}, {a}, {b})"),
            Expr::ValidIf(c, a) => write!(f, "validif({c}, {a})"),
            Expr::Invalid => f.write_str("invalid"),
        }
    }
}

fn print_stmts(out: &mut String, stmts: &[Stmt], indent: usize) {
    let pad = " ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Wire { name, ty, .. } => {
                let _ = writeln!(out, "{pad}wire {name} : {ty}");
            }
            Stmt::Reg {
                name, ty, clock, reset, ..
            } => match reset {
                Some((rst, init)) => {
                    let _ = writeln!(out, "{pad}reg {name} : {ty}, {clock} with :");
                    let _ = writeln!(out, "{pad}  reset => ({rst}, {init})");
                }
                None => {
                    let _ = writeln!(out, "{pad}reg {name} : {ty}, {clock}");
                }
            },
            Stmt::Node { name, value, .. } => {
                let _ = writeln!(out, "{pad}node {name} = {value}");
            }
            Stmt::Mem(m) => {
                let _ = writeln!(out, "{pad}mem {} :", m.name);
                let _ = writeln!(out, "{pad}  data-type => {}", m.data_type);
                let _ = writeln!(out, "{pad}  depth => {}", m.depth);
                let _ = writeln!(out, "{pad}  read-latency => {}", m.read_latency);
                let _ = writeln!(out, "{pad}  write-latency => {}", m.write_latency);
                for r in &m.readers {
                    let _ = writeln!(out, "{pad}  reader => {r}");
                }
                for w in &m.writers {
                    let _ = writeln!(out, "{pad}  writer => {w}");
                }
                let _ = writeln!(out, "{pad}  read-under-write => undefined");
            }
            Stmt::Inst { name, module, .. } => {
                let _ = writeln!(out, "{pad}inst {name} of {module}");
            }
            Stmt::Connect { loc, value, .. } => {
                if matches!(value, Expr::Invalid) {
                    let _ = writeln!(out, "{pad}{loc} is invalid");
                } else {
                    let _ = writeln!(out, "{pad}{loc} <= {value}");
                }
            }
            Stmt::Invalidate { loc, .. } => {
                let _ = writeln!(out, "{pad}{loc} is invalid");
            }
            Stmt::When {
                cond, then, otherwise, ..
            } => {
                let _ = writeln!(out, "{pad}when {cond} :");
                if then.is_empty() {
                    let _ = writeln!(out, "{pad}  skip");
                }
                print_stmts(out, then, indent + 2);
                if !otherwise.is_empty() {
                    let _ = writeln!(out, "{pad}else :");
                    print_stmts(out, otherwise, indent + 2);
                }
            }
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "circuit {} :", self.name);
        for m in &self.modules {
            let _ = writeln!(out, "  module {} :", m.name);
            for p in &m.ports {
                let dir = match p.dir {
                    Direction::Input => "input",
                    Direction::Output => "output",
                };
                let _ = writeln!(out, "    {dir} {} : {}", p.name, p.ty);
            }
            if m.ports.is_empty() && m.body.is_empty() {
                let _ = writeln!(out, "    skip");
            }
            print_stmts(&mut out, &m.body, 4);
        }
        f.write_str(&out)
    }
}

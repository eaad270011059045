// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser over the token stream from [`super::lexer`].

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{Diagnostic, FrontendError};
use crate::value::WideValue;

/// Width used while accumulating literal digits before narrowing.
const LITERAL_SCRATCH_WIDTH: u32 = 1 << 14;

const PRIM_OPS: &[&str] = &[
    "add", "sub", "mul", "div", "rem", "lt", "leq", "gt", "geq", "eq", "neq", "pad", "asUInt", "asSInt", "cvt",
    "neg", "not", "and", "or", "xor", "andr", "orr", "xorr", "cat", "bits", "head", "tail", "shl", "shr", "dshl",
    "dshr",
];

const VERIFICATION_STMTS: &[&str] = &["stop", "printf", "assert", "assume", "cover", "fprintf", "fflush"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    warnings: Vec<Diagnostic>,
}

type PResult<T> = Result<T, FrontendError>;

/// Parses source text without normalizing `when` blocks.
pub fn parse_raw(src: &str) -> PResult<(Circuit, Vec<Diagnostic>)> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        warnings: Vec::new(),
    };
    let c = p.circuit()?;
    Ok((c, p.warnings))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> Span {
        let t = &self.toks[self.pos];
        Span::new(t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn err(&self, msg: impl Into<String>) -> FrontendError {
        let s = self.here();
        FrontendError::syntax(s.line, s.col, msg)
    }

    fn unsupported(&self, construct: &str) -> FrontendError {
        let s = self.here();
        FrontendError::Unsupported {
            line: s.line,
            col: s.col,
            construct: construct.to_string(),
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) => format!("integer `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of file".into(),
            other => format!("{other:?}"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.err(format!("expected {what}, found {}", Self::describe(self.peek()))))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`, found {}", Self::describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        let span = self.here();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, span))
            }
            other => Err(self.err(format!("expected identifier, found {}", Self::describe(&other)))),
        }
    }

    fn int(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Int(s) => {
                let v = WideValue::parse_unsigned(&s, 64)
                    .and_then(|v| v.to_u64())
                    .ok_or_else(|| self.err(format!("invalid integer `{s}`")))?;
                self.bump();
                Ok(v)
            }
            other => Err(self.err(format!("expected integer, found {}", Self::describe(&other)))),
        }
    }

    fn int_u32(&mut self) -> PResult<u32> {
        let v = self.int()?;
        u32::try_from(v).map_err(|_| self.err("integer out of range"))
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    /// Parses the body following a `:`; either an indented block or the rest
    /// of the current line.
    fn block<T>(&mut self, mut item: impl FnMut(&mut Self) -> PResult<Vec<T>>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if *self.peek() == Tok::Newline {
            self.bump();
            if *self.peek() != Tok::Indent {
                return Ok(out);
            }
            self.bump();
            loop {
                self.skip_newlines();
                match self.peek() {
                    Tok::Dedent => {
                        self.bump();
                        break;
                    }
                    Tok::Eof => break,
                    _ => out.extend(item(self)?),
                }
            }
        } else {
            loop {
                match self.peek() {
                    Tok::Newline | Tok::Eof | Tok::Dedent => break,
                    Tok::Ident(s) if s == "else" => break,
                    _ => out.extend(item(self)?),
                }
            }
        }
        Ok(out)
    }

    fn circuit(&mut self) -> PResult<Circuit> {
        self.skip_newlines();
        self.expect_kw("circuit")?;
        let (name, _) = self.ident()?;
        if *self.peek() == Tok::Colon {
            self.bump();
        } else {
            return Err(self.err("expected `:` after circuit name"));
        }
        let modules = self.block(|p| p.module().map(|m| vec![m]))?;
        self.skip_newlines();
        if *self.peek() != Tok::Eof {
            return Err(self.err(format!("unexpected {} after circuit", Self::describe(self.peek()))));
        }
        if modules.is_empty() {
            return Err(self.err("circuit contains no modules"));
        }
        Ok(Circuit { name, modules })
    }

    fn module(&mut self) -> PResult<Module> {
        self.skip_newlines();
        if self.is_kw("public") {
            self.bump();
        }
        if self.is_kw("extmodule") {
            return Err(self.unsupported("external modules (extmodule)"));
        }
        if self.is_kw("intmodule") {
            return Err(self.unsupported("intrinsic modules (intmodule)"));
        }
        let span = self.here();
        self.expect_kw("module")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon, "`:`")?;
        let mut ports = Vec::new();
        let mut body = Vec::new();
        let items = self.block(|p| {
            if p.is_kw("input") || p.is_kw("output") {
                p.port().map(|port| vec![Err(port)])
            } else {
                p.statement().map(|ss| ss.into_iter().map(Ok).collect())
            }
        })?;
        for it in items {
            match it {
                Ok(s) => body.push(s),
                Err(p) => ports.push(p),
            }
        }
        Ok(Module {
            name,
            ports,
            body,
            span,
        })
    }

    fn port(&mut self) -> PResult<Port> {
        let span = self.here();
        let dir = if self.is_kw("input") {
            Direction::Input
        } else {
            Direction::Output
        };
        self.bump();
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon, "`:`")?;
        let ty = self.ty()?;
        Ok(Port { name, dir, ty, span })
    }

    fn ty(&mut self) -> PResult<Type> {
        if *self.peek() == Tok::LBrace {
            return Err(self.unsupported("bundle types"));
        }
        let (name, _) = self.ident()?;
        let ty = match name.as_str() {
            "UInt" | "SInt" => {
                if *self.peek() != Tok::Lt {
                    return Err(self.unsupported("width inference (type without explicit width)"));
                }
                self.bump();
                let w = self.int_u32()?;
                self.expect(Tok::Gt, "`>`")?;
                if w == 0 {
                    return Err(self.unsupported("zero-width types"));
                }
                if name == "UInt" {
                    Type::UInt(w)
                } else {
                    Type::SInt(w)
                }
            }
            "Clock" => Type::Clock,
            "Reset" => Type::UInt(1),
            "AsyncReset" => return Err(self.unsupported("asynchronous reset (AsyncReset)")),
            "Analog" => return Err(self.unsupported("analog types")),
            "Fixed" | "Interval" => return Err(self.unsupported("fixed-point and interval types")),
            "Probe" | "RWProbe" | "Const" => return Err(self.unsupported("probe and const types")),
            other => return Err(self.err(format!("unknown type `{other}`"))),
        };
        if *self.peek() == Tok::LBracket {
            return Err(self.unsupported("vector types"));
        }
        Ok(ty)
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let span = self.here();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            other => return Err(self.err(format!("expected statement, found {}", Self::describe(other)))),
        };
        // Keywords only count when followed by something a reference could not be.
        let followed_by_ref_tail = matches!(self.peek_at(1), Tok::Connect | Tok::Dot | Tok::PartialConnect)
            || matches!(self.peek_at(1), Tok::Ident(s) if s == "is");
        if followed_by_ref_tail {
            return self.connect_like(span);
        }
        match kw.as_str() {
            "wire" => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                Ok(vec![Stmt::Wire { name, ty, span }])
            }
            "reg" => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.expect(Tok::Comma, "`,`")?;
                let clock = self.expr()?;
                let reset = if self.is_kw("with") {
                    self.bump();
                    self.expect(Tok::Colon, "`:`")?;
                    self.reset_spec()?
                } else {
                    None
                };
                Ok(vec![Stmt::Reg {
                    name,
                    ty,
                    clock,
                    reset,
                    span,
                }])
            }
            "regreset" => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.expect(Tok::Comma, "`,`")?;
                let clock = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let rst = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let init = self.expr()?;
                Ok(vec![Stmt::Reg {
                    name,
                    ty,
                    clock,
                    reset: Some((rst, init)),
                    span,
                }])
            }
            "node" => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Equals, "`=`")?;
                let value = self.expr()?;
                Ok(vec![Stmt::Node { name, value, span }])
            }
            "mem" => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                self.mem(name, span).map(|m| vec![Stmt::Mem(m)])
            }
            "inst" => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect_kw("of")?;
                let (module, _) = self.ident()?;
                Ok(vec![Stmt::Inst { name, module, span }])
            }
            "when" => self.when().map(|w| vec![w]),
            "skip" => {
                self.bump();
                Ok(vec![])
            }
            "connect" => {
                self.bump();
                let loc = self.reference()?;
                self.expect(Tok::Comma, "`,`")?;
                let value = self.expr()?;
                Ok(vec![Stmt::Connect { loc, value, span }])
            }
            "invalidate" => {
                self.bump();
                let loc = self.reference()?;
                Ok(vec![Stmt::Invalidate { loc, span }])
            }
            "attach" => Err(self.unsupported("attach")),
            "cmem" | "smem" | "mport" | "infer" | "rdwr" => Err(self.unsupported("CHIRRTL memories")),
            "define" | "force" | "release" | "force_initial" | "release_initial" => {
                Err(self.unsupported("probe statements"))
            }
            "layerblock" | "match" | "propassign" => Err(self.unsupported(&format!("`{kw}` statements"))),
            kw if VERIFICATION_STMTS.contains(&kw) && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.skip_parenthesized()?;
                if *self.peek() == Tok::Colon {
                    self.bump();
                    self.ident()?;
                }
                self.warnings.push(Diagnostic::warning(
                    span.line,
                    span.col,
                    format!("`{kw}` statement ignored"),
                ));
                Ok(vec![])
            }
            _ => self.connect_like(span),
        }
    }

    fn connect_like(&mut self, span: Span) -> PResult<Vec<Stmt>> {
        let loc = self.reference()?;
        match self.peek().clone() {
            Tok::Connect => {
                self.bump();
                let value = self.expr()?;
                Ok(vec![Stmt::Connect { loc, value, span }])
            }
            Tok::PartialConnect => Err(self.unsupported("partial connect (`<-`)")),
            Tok::Ident(s) if s == "is" => {
                self.bump();
                self.expect_kw("invalid")?;
                Ok(vec![Stmt::Invalidate { loc, span }])
            }
            other => Err(self.err(format!("expected `<=` or `is invalid`, found {}", Self::describe(&other)))),
        }
    }

    fn skip_parenthesized(&mut self) -> PResult<()> {
        self.expect(Tok::LParen, "`(`")?;
        let mut depth = 1;
        while depth > 0 {
            match self.bump().tok {
                Tok::LParen => depth += 1,
                Tok::RParen => depth -= 1,
                Tok::Newline | Tok::Eof => return Err(self.err("unbalanced parentheses")),
                _ => {}
            }
        }
        Ok(())
    }

    fn reset_spec(&mut self) -> PResult<Option<(Expr, Expr)>> {
        let block = *self.peek() == Tok::Newline;
        if block {
            self.bump();
            self.expect(Tok::Indent, "indented reset specification")?;
        }
        let parens = *self.peek() == Tok::LParen;
        if parens {
            self.bump();
        }
        self.expect_kw("reset")?;
        self.expect(Tok::Arrow, "`=>`")?;
        self.expect(Tok::LParen, "`(`")?;
        let rst = self.expr()?;
        self.expect(Tok::Comma, "`,`")?;
        let init = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        if parens {
            self.expect(Tok::RParen, "`)`")?;
        }
        if block {
            self.skip_newlines();
            self.expect(Tok::Dedent, "end of reset specification")?;
        }
        Ok(Some((rst, init)))
    }


    fn mem(&mut self, name: String, span: Span) -> PResult<MemDecl> {
        enum Field {
            DataType(Type),
            Depth(u64),
            ReadLatency(u32),
            WriteLatency(u32),
            Reader(String),
            Writer(String),
            Ignored,
        }
        let fields = self.block(|p| {
            let (field, _) = p.ident()?;
            p.expect(Tok::Arrow, "`=>`")?;
            let f = match field.as_str() {
                "data-type" => Field::DataType(p.ty()?),
                "depth" => Field::Depth(p.int()?),
                "read-latency" => Field::ReadLatency(p.int_u32()?),
                "write-latency" => Field::WriteLatency(p.int_u32()?),
                "reader" => Field::Reader(p.ident()?.0),
                "writer" => Field::Writer(p.ident()?.0),
                "readwriter" => return Err(p.unsupported("read-write memory ports")),
                "read-under-write" => {
                    p.ident()?;
                    Field::Ignored
                }
                other => return Err(p.err(format!("unknown memory field `{other}`"))),
            };
            Ok(vec![f])
        })?;
        let mut m = MemDecl {
            name,
            data_type: Type::UInt(1),
            depth: 0,
            read_latency: 0,
            write_latency: 1,
            readers: vec![],
            writers: vec![],
            span,
        };
        let mut have_type = false;
        for f in fields {
            match f {
                Field::DataType(t) => {
                    m.data_type = t;
                    have_type = true;
                }
                Field::Depth(d) => m.depth = d,
                Field::ReadLatency(l) => m.read_latency = l,
                Field::WriteLatency(l) => m.write_latency = l,
                Field::Reader(r) => m.readers.push(r),
                Field::Writer(w) => m.writers.push(w),
                Field::Ignored => {}
            }
        }
        let fail = |msg: &str| FrontendError::syntax(span.line, span.col, msg);
        let unsupported = |construct: &str| FrontendError::Unsupported {
            line: span.line,
            col: span.col,
            construct: construct.to_string(),
        };
        if !have_type {
            return Err(fail("memory is missing `data-type`"));
        }
        if m.data_type == Type::Clock {
            return Err(unsupported("memories of clock type"));
        }
        if m.depth == 0 {
            return Err(fail("memory depth must be positive"));
        }
        if m.read_latency != 0 {
            return Err(unsupported("memories with read latency other than 0"));
        }
        if m.write_latency != 1 {
            return Err(unsupported("memories with write latency other than 1"));
        }
        Ok(m)
    }

    fn when(&mut self) -> PResult<Stmt> {
        let span = self.here();
        self.expect_kw("when")?;
        let cond = self.expr()?;
        self.expect(Tok::Colon, "`:`")?;
        let then = self.block(|p| p.statement())?;
        let else_follows = self.is_kw("else")
            || (*self.peek() == Tok::Newline && matches!(self.peek_at(1), Tok::Ident(s) if s == "else"));
        let mut otherwise = Vec::new();
        if else_follows {
            self.skip_newlines();
            self.bump();
            if self.is_kw("when") {
                otherwise.push(self.when()?);
            } else {
                self.expect(Tok::Colon, "`:`")?;
                otherwise = self.block(|p| p.statement())?;
            }
        }
        Ok(Stmt::When {
            cond,
            then,
            otherwise,
            span,
        })
    }

    /// A reference path such as `a`, `inst.port` or `mem.port.field`.
    fn reference(&mut self) -> PResult<Expr> {
        let (name, span) = self.ident()?;
        let mut e = Expr::Ref(name, span);
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let field = match self.peek().clone() {
                        Tok::Ident(s) => s,
                        Tok::Int(_) => return Err(self.unsupported("vector types")),
                        other => {
                            return Err(self.err(format!("expected field name, found {}", Self::describe(&other))))
                        }
                    };
                    self.bump();
                    e = Expr::SubField(Box::new(e), field);
                }
                Tok::LBracket => return Err(self.unsupported("subindex and subaccess")),
                _ => return Ok(e),
            }
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let name = match self.peek() {
            Tok::Ident(s) => s.clone(),
            other => return Err(self.err(format!("expected expression, found {}", Self::describe(other)))),
        };
        let next = self.peek_at(1).clone();
        match name.as_str() {
            "UInt" | "SInt" if matches!(next, Tok::Lt | Tok::LParen) => self.literal(),
            "mux" if next == Tok::LParen => {
                self.bump();
                let args = self.args(3)?;
                let mut it = args.into_iter();
                let (c, a, b) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                Ok(Expr::Mux(Box::new(c), Box::new(a), Box::new(b)))
            }
            "validif" if next == Tok::LParen => {
                self.bump();
                let args = self.args(2)?;
                let mut it = args.into_iter();
                let (c, a) = (it.next().unwrap(), it.next().unwrap());
                Ok(Expr::ValidIf(Box::new(c), Box::new(a)))
            }
            "asClock" | "asAsyncReset" | "asFixedPoint" | "asInterval" | "asReset" if next == Tok::LParen => {
                Err(self.unsupported(&format!("`{name}` conversion")))
            }
            op if next == Tok::LParen && PRIM_OPS.contains(&op) => {
                self.bump();
                self.bump();
                let mut args = Vec::new();
                let mut params = Vec::new();
                loop {
                    if let Tok::Int(_) = self.peek() {
                        params.push(self.int_u32()?);
                    } else {
                        if !params.is_empty() {
                            return Err(self.err("expression operand after integer parameter"));
                        }
                        args.push(self.expr()?);
                    }
                    match self.bump().tok {
                        Tok::Comma => continue,
                        Tok::RParen => break,
                        other => return Err(self.err(format!("expected `,` or `)`, found {}", Self::describe(&other)))),
                    }
                }
                Ok(Expr::Prim {
                    op: name,
                    args,
                    params,
                })
            }
            _ if next == Tok::LParen => Err(self.err(format!("unknown primitive operation `{name}`"))),
            _ => self.reference(),
        }
    }

    /// `( e, e, ... )` with exactly `n` expressions; the opening token is next.
    fn args(&mut self, n: usize) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.expr()?);
            if i + 1 < n {
                self.expect(Tok::Comma, "`,`")?;
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(out)
    }

    fn literal(&mut self) -> PResult<Expr> {
        let (kind, _) = self.ident()?;
        let width = if *self.peek() == Tok::Lt {
            self.bump();
            let w = self.int_u32()?;
            self.expect(Tok::Gt, "`>`")?;
            if w == 0 {
                return Err(self.unsupported("zero-width literals"));
            }
            Some(w)
        } else {
            None
        };
        self.expect(Tok::LParen, "`(`")?;
        let here = self.here();
        let (negative, magnitude) = match self.bump().tok {
            Tok::Int(s) => parse_int_literal(&s),
            Tok::Str(s) => parse_string_literal(&s),
            other => return Err(self.err(format!("expected literal value, found {}", Self::describe(&other)))),
        }
        .ok_or_else(|| FrontendError::syntax(here.line, here.col, "malformed literal value"))?;
        self.expect(Tok::RParen, "`)`")?;
        let bad_fit = |msg: String| FrontendError::Type {
            line: here.line,
            col: here.col,
            msg,
        };
        if kind == "UInt" {
            if negative && !magnitude.is_zero() {
                return Err(bad_fit("negative value in UInt literal".into()));
            }
            if let Some(w) = width {
                if magnitude.significant_bits() > w {
                    return Err(bad_fit(format!("literal {magnitude} does not fit in UInt<{w}>")));
                }
            }
            Ok(Expr::UIntLit {
                width,
                value: magnitude,
            })
        } else {
            if let Some(w) = width {
                if signed_bits_needed(negative, &magnitude) > w {
                    let sign = if negative { "-" } else { "" };
                    return Err(bad_fit(format!("literal {sign}{magnitude} does not fit in SInt<{w}>")));
                }
            }
            Ok(Expr::SIntLit {
                width,
                negative: negative && !magnitude.is_zero(),
                magnitude,
            })
        }
    }
}

/// Bits needed to hold `±magnitude` in two's complement.
pub fn signed_bits_needed(negative: bool, magnitude: &WideValue) -> u32 {
    if magnitude.is_zero() {
        return 1;
    }
    let bits = magnitude.significant_bits();
    if negative {
        // -2^(k-1) fits in k bits.
        let is_pow2 = magnitude.count_ones() == 1;
        if is_pow2 {
            bits
        } else {
            bits + 1
        }
    } else {
        bits + 1
    }
}

fn narrow(v: WideValue) -> WideValue {
    let w = v.min_unsigned_width();
    v.resize(w, false)
}

fn parse_digits(digits: &str, radix: u32) -> Option<WideValue> {
    let digits = digits.replace('_', "");
    WideValue::parse_radix(&digits, radix, LITERAL_SCRATCH_WIDTH).map(narrow)
}

/// `42`, `-42`, `0hff`, `-0b101`, `0o17`.
fn parse_int_literal(s: &str) -> Option<(bool, WideValue)> {
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (radix, digits) = if let Some(d) = body.strip_prefix("0h").or_else(|| body.strip_prefix("0x")) {
        (16, d)
    } else if let Some(d) = body.strip_prefix("0b") {
        (2, d)
    } else if let Some(d) = body.strip_prefix("0o") {
        (8, d)
    } else if let Some(d) = body.strip_prefix("0d") {
        (10, d)
    } else {
        (10, body)
    };
    parse_digits(digits, radix).map(|v| (negative, v))
}

/// `"hff"`, `"h-1"`, `"b1010"`, `"o17"`, `"d10"`, or a bare decimal string.
fn parse_string_literal(s: &str) -> Option<(bool, WideValue)> {
    let mut chars = s.chars();
    let radix = match chars.next()? {
        'h' | 'x' => 16,
        'b' => 2,
        'o' => 8,
        'd' => 10,
        _ => return parse_int_literal(s),
    };
    let rest = chars.as_str();
    let (negative, digits) = match rest.strip_prefix('-') {
        Some(d) => (true, d),
        None => (false, rest.strip_prefix('+').unwrap_or(rest)),
    };
    parse_digits(digits, radix).map(|v| (negative, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Circuit {
        parse_raw(src).unwrap().0
    }

    #[test]
    fn single_line_circuit() {
        let c = parse("circuit C: module C: input a: UInt<1> output b: UInt<1> b <= a");
        assert_eq!(c.modules.len(), 1);
        assert_eq!(c.modules[0].ports.len(), 2);
        assert_eq!(c.modules[0].body.len(), 1);
    }

    #[test]
    fn literal_forms() {
        let c = parse(
            "circuit C :\n  module C :\n    output o : UInt<8>\n    output s : SInt<8>\n    o <= UInt<8>(\"hff\")\n    s <= SInt<8>(-128)\n",
        );
        match &c.modules[0].body[0] {
            Stmt::Connect { value, .. } => assert_eq!(
                *value,
                Expr::UIntLit {
                    width: Some(8),
                    value: WideValue::from_u64(255, 8)
                }
            ),
            s => panic!("{s:?}"),
        }
        assert!(parse_raw("circuit C :\n  module C :\n    output o : UInt<4>\n    o <= UInt<4>(16)\n").is_err());
        assert!(parse_raw("circuit C :\n  module C :\n    output s : SInt<8>\n    s <= SInt<8>(128)\n").is_err());
        assert_eq!(parse_string_literal("h-1a").unwrap(), (true, WideValue::from_u64(0x1a, 5)));
        assert_eq!(parse_int_literal("0b101").unwrap(), (false, WideValue::from_u64(5, 3)));
    }

    #[test]
    fn signed_width_requirements() {
        let w = |neg: bool, m: u64| signed_bits_needed(neg, &WideValue::from_u64(m, 64));
        assert_eq!(w(true, 128), 8);
        assert_eq!(w(false, 127), 8);
        assert_eq!(w(false, 128), 9);
        assert_eq!(w(true, 1), 1);
        assert_eq!(w(false, 0), 1);
    }

    #[test]
    fn reg_with_reset_block_and_inline() {
        let inline = parse(
            "circuit C :\n  module C :\n    input clock : Clock\n    input rst : UInt<1>\n    reg r : UInt<8>, clock with : (reset => (rst, UInt<8>(0)))\n    r <= r\n",
        );
        let block = parse(
            "circuit C :\n  module C :\n    input clock : Clock\n    input rst : UInt<1>\n    reg r : UInt<8>, clock with :\n      reset => (rst, UInt<8>(0))\n    r <= r\n",
        );
        let reset = parse(
            "circuit C :\n  module C :\n    input clock : Clock\n    input rst : UInt<1>\n    regreset r : UInt<8>, clock, rst, UInt<8>(0)\n    connect r, r\n",
        );
        assert_eq!(inline, block);
        assert_eq!(inline, reset);
    }

    #[test]
    fn when_else_chain() {
        let c = parse(
            "circuit C :\n  module C :\n    input a : UInt<1>\n    input b : UInt<1>\n    output x : UInt<1>\n    when a :\n      x <= b\n    else when b :\n      x <= a\n    else :\n      x <= UInt(0)\n",
        );
        match &c.modules[0].body[0] {
            Stmt::When { otherwise, .. } => assert!(matches!(otherwise[0], Stmt::When { .. })),
            s => panic!("{s:?}"),
        }
        let inline = parse(
            "circuit C :\n  module C :\n    input c : UInt<1>\n    output x : UInt<1>\n    when c : x <= c else : x <= UInt(0)\n",
        );
        match &inline.modules[0].body[0] {
            Stmt::When { then, otherwise, .. } => assert_eq!((then.len(), otherwise.len()), (1, 1)),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn verification_statements_are_dropped_with_warning() {
        let (c, warnings) = parse_raw(
            "circuit C :\n  module C :\n    input clock : Clock\n    input a : UInt<1>\n    printf(clock, a, \"hi %d\\n\", a) : p0\n    stop(clock, a, 1)\n",
        )
        .unwrap();
        assert!(c.modules[0].body.is_empty());
        assert_eq!(warnings.len(), 2);
        assert_eq!(warnings[0].line, 5);
    }

    #[test]
    fn unsupported_constructs_are_named() {
        let cases = [
            ("input a : { x : UInt<1> }", "bundle"),
            ("input a : UInt<1>[4]", "vector"),
            ("input a : AsyncReset", "asynchronous"),
            ("input a : UInt", "width inference"),
        ];
        for (port, needle) in cases {
            let src = format!("circuit C :\n  module C :\n    {port}\n");
            let err = parse_raw(&src).unwrap_err();
            assert!(err.to_string().contains(needle), "{err}");
            assert_eq!(err.location().unwrap().0, 3);
        }
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_raw("circuit C :\n  module C :\n    output x : UInt<1>\n    x <= (\n").unwrap_err();
        assert!(matches!(err, FrontendError::Syntax { line: 4, col: 10, .. }), "{err:?}");
    }

    #[test]
    fn memory_declaration() {
        let c = parse(
            "circuit C :\n  module C :\n    mem m :\n      data-type => UInt<8>\n      depth => 16\n      read-latency => 0\n      write-latency => 1\n      reader => r\n      writer => w\n      read-under-write => undefined\n",
        );
        match &c.modules[0].body[0] {
            Stmt::Mem(m) => {
                assert_eq!(m.depth, 16);
                assert_eq!(m.readers, vec!["r".to_string()]);
                assert_eq!(m.writers, vec!["w".to_string()]);
            }
            s => panic!("{s:?}"),
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Rewrites `when` blocks into muxes on the final connect of each sink.
//!
//! Connects are tracked per sink path. Within a block the last connect wins;
//! at a `when` the two branch states are merged with `mux(cond, then, else)`.
//! A sink that is connected on only one side of a `when` and has no earlier
//! value is an error, except for registers, which default to holding their
//! current value.

use super::ast::*;
use super::FrontendError;
use std::collections::{HashMap, HashSet};

#[derive(Clone, Debug, PartialEq)]
enum Val {
    Unset,
    /// Connected on some paths only; records where, for diagnostics.
    Partial(Span),
    Set(Expr, Span),
}

#[derive(Clone, Default)]
struct Env {
    vals: HashMap<String, Val>,
    /// Sink paths in order of first connect.
    order: Vec<String>,
    /// Registers, whose implicit value is their current contents.
    regs: HashSet<String>,
}

impl Env {
    fn get(&self, key: &str) -> Val {
        match self.vals.get(key) {
            Some(v) => v.clone(),
            None if self.regs.contains(key) => Val::Set(Expr::reference(key), Span::default()),
            None => Val::Unset,
        }
    }

    fn set(&mut self, key: String, v: Val) {
        if !self.vals.contains_key(&key) {
            self.order.push(key.clone());
        }
        self.vals.insert(key, v);
    }
}

struct Normalizer {
    decls: Vec<Stmt>,
}

impl Normalizer {
    fn process(&mut self, stmts: &[Stmt], env: &mut Env, local: &mut HashSet<String>) -> Result<(), FrontendError> {
        for s in stmts {
            match s {
                Stmt::Connect { loc, value, span } => {
                    let key = sink_key(loc)?;
                    env.set(key, Val::Set(value.clone(), *span));
                }
                Stmt::Invalidate { loc, span } => {
                    let key = sink_key(loc)?;
                    env.set(key, Val::Set(Expr::Invalid, *span));
                }
                Stmt::When {
                    cond,
                    then,
                    otherwise,
                    ..
                } => {
                    let mut then_env = env.clone();
                    let mut else_env = env.clone();
                    let mut then_local = HashSet::new();
                    let mut else_local = HashSet::new();
                    self.process(then, &mut then_env, &mut then_local)?;
                    self.process(otherwise, &mut else_env, &mut else_local)?;
                    let mut keys: Vec<String> = then_env.order.clone();
                    for k in &else_env.order {
                        if !then_env.vals.contains_key(k) {
                            keys.push(k.clone());
                        }
                    }
                    for r in then_env.regs.iter().chain(else_env.regs.iter()) {
                        env.regs.insert(r.clone());
                    }
                    for key in keys {
                        let root = key.split('.').next().unwrap_or(&key);
                        let merged = if then_local.contains(root) {
                            then_env.get(&key)
                        } else if else_local.contains(root) {
                            else_env.get(&key)
                        } else {
                            merge(cond, then_env.get(&key), else_env.get(&key))
                        };
                        if merged != env.get(&key) || env.vals.contains_key(&key) {
                            env.set(key, merged);
                        }
                    }
                    local.extend(then_local);
                    local.extend(else_local);
                }
                decl => {
                    let name = decl.declared_name().expect("declaration").to_string();
                    if let Stmt::Reg { .. } = decl {
                        env.regs.insert(name.clone());
                    }
                    local.insert(name);
                    self.decls.push(decl.clone());
                }
            }
        }
        Ok(())
    }
}

fn merge(cond: &Expr, a: Val, b: Val) -> Val {
    match (a, b) {
        (Val::Set(x, sx), Val::Set(y, _)) => {
            if x == y {
                Val::Set(x, sx)
            } else {
                Val::Set(Expr::Mux(Box::new(cond.clone()), Box::new(x), Box::new(y)), sx)
            }
        }
        (Val::Unset, Val::Unset) => Val::Unset,
        (Val::Set(_, s), _) | (_, Val::Set(_, s)) | (Val::Partial(s), _) | (_, Val::Partial(s)) => Val::Partial(s),
    }
}

fn sink_key(loc: &Expr) -> Result<String, FrontendError> {
    loc.path().ok_or_else(|| {
        let s = loc.span();
        FrontendError::syntax(s.line, s.col, "connect target must be a reference")
    })
}

fn key_to_expr(key: &str) -> Expr {
    let mut parts = key.split('.');
    let mut e = Expr::reference(parts.next().unwrap());
    for p in parts {
        e = Expr::SubField(Box::new(e), p.to_string());
    }
    e
}

pub fn normalize_module(m: &Module) -> Result<Module, FrontendError> {
    let mut n = Normalizer { decls: Vec::new() };
    let mut env = Env::default();
    let mut local = HashSet::new();
    n.process(&m.body, &mut env, &mut local)?;
    let mut body = n.decls;
    for key in &env.order {
        match env.vals[key].clone() {
            Val::Set(value, span) => body.push(Stmt::Connect {
                loc: key_to_expr(key),
                value,
                span,
            }),
            Val::Partial(span) => {
                return Err(FrontendError::PartiallyConnected {
                    line: span.line,
                    col: span.col,
                    name: key.clone(),
                })
            }
            Val::Unset => {}
        }
    }
    Ok(Module {
        name: m.name.clone(),
        ports: m.ports.clone(),
        body,
        span: m.span,
    })
}

pub fn normalize(c: &Circuit) -> Result<Circuit, FrontendError> {
    Ok(Circuit {
        name: c.name.clone(),
        modules: c.modules.iter().map(normalize_module).collect::<Result<_, _>>()?,
    })
}

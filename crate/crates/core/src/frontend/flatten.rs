// SPDX-License-Identifier: Apache-2.0

//! Inlines the instance hierarchy into a single module.
//!
//! Every instance port becomes a wire named `inst$port`; names declared inside
//! an instance get the same `inst$` prefix, applied recursively.

use super::ast::*;
use super::FrontendError;
use std::collections::HashSet;

pub const HIERARCHY_SEPARATOR: char = '$';

struct Flattener<'a> {
    circuit: &'a Circuit,
    stack: Vec<String>,
    body: Vec<Stmt>,
    /// Flattened names of clock-typed signals; connects to them are dropped.
    clocks: HashSet<String>,
}

impl<'a> Flattener<'a> {
    fn module(&mut self, m: &Module, prefix: &str) -> Result<(), FrontendError> {
        self.stack.push(m.name.clone());
        let instances: Vec<(&str, &str)> = m
            .body
            .iter()
            .filter_map(|s| match s {
                Stmt::Inst { name, module, .. } => Some((name.as_str(), module.as_str())),
                _ => None,
            })
            .collect();
        let rename = |e: &Expr| -> Expr {
            e.map_paths(&mut |p| {
                if let Expr::SubField(base, field) = p {
                    if let Expr::Ref(inst, span) = base.as_ref() {
                        if instances.iter().any(|(n, _)| n == inst) {
                            return Some(Expr::Ref(
                                format!("{prefix}{inst}{HIERARCHY_SEPARATOR}{field}"),
                                *span,
                            ));
                        }
                    }
                    let inner = rename_root(p, prefix);
                    return Some(inner);
                }
                Some(rename_root(p, prefix))
            })
        };
        for s in &m.body {
            match s {
                Stmt::Wire { name, ty, span } => {
                    let name = format!("{prefix}{name}");
                    if *ty == Type::Clock {
                        self.clocks.insert(name);
                    } else {
                        self.body.push(Stmt::Wire { name, ty: *ty, span: *span });
                    }
                }
                Stmt::Reg {
                    name,
                    ty,
                    clock,
                    reset,
                    span,
                } => self.body.push(Stmt::Reg {
                    name: format!("{prefix}{name}"),
                    ty: *ty,
                    clock: rename(clock),
                    reset: reset.as_ref().map(|(r, i)| (rename(r), rename(i))),
                    span: *span,
                }),
                Stmt::Node { name, value, span } => self.body.push(Stmt::Node {
                    name: format!("{prefix}{name}"),
                    value: rename(value),
                    span: *span,
                }),
                Stmt::Mem(mem) => {
                    let mut mem = mem.clone();
                    mem.name = format!("{prefix}{}", mem.name);
                    self.body.push(Stmt::Mem(mem));
                }
                Stmt::Inst { name, module, span } => {
                    let child = self.circuit.module(module).ok_or_else(|| FrontendError::UndeclaredModule {
                        line: span.line,
                        col: span.col,
                        instance: name.clone(),
                        module: module.clone(),
                    })?;
                    if self.stack.contains(module) {
                        let mut chain = self.stack.clone();
                        chain.push(module.clone());
                        return Err(FrontendError::RecursiveInstance {
                            line: span.line,
                            col: span.col,
                            chain,
                        });
                    }
                    let child_prefix = format!("{prefix}{name}{HIERARCHY_SEPARATOR}");
                    for p in &child.ports {
                        let wire = format!("{child_prefix}{}", p.name);
                        if p.ty == Type::Clock {
                            self.clocks.insert(wire);
                        } else {
                            self.body.push(Stmt::Wire {
                                name: wire,
                                ty: p.ty,
                                span: *span,
                            });
                        }
                    }
                    self.module(child, &child_prefix)?;
                }
                Stmt::Connect { loc, value, span } => {
                    let loc = rename(loc);
                    if loc.root_name().is_some_and(|r| self.clocks.contains(r)) {
                        continue;
                    }
                    self.body.push(Stmt::Connect {
                        loc,
                        value: rename(value),
                        span: *span,
                    });
                }
                Stmt::Invalidate { loc, span } => {
                    let loc = rename(loc);
                    if loc.root_name().is_some_and(|r| self.clocks.contains(r)) {
                        continue;
                    }
                    self.body.push(Stmt::Invalidate { loc, span: *span });
                }
                Stmt::When { span, .. } => {
                    return Err(FrontendError::syntax(
                        span.line,
                        span.col,
                        "`when` must be normalized before flattening",
                    ))
                }
            }
        }
        self.stack.pop();
        Ok(())
    }
}

fn rename_root(e: &Expr, prefix: &str) -> Expr {
    match e {
        Expr::Ref(n, s) => Expr::Ref(format!("{prefix}{n}"), *s),
        Expr::SubField(b, f) => Expr::SubField(Box::new(rename_root(b, prefix)), f.clone()),
        other => other.clone(),
    }
}

/// Flattens a normalized circuit into its main module.
pub fn flatten(c: &Circuit) -> Result<Circuit, FrontendError> {
    let main = c.main().ok_or_else(|| FrontendError::UndeclaredModule {
        line: 1,
        col: 1,
        instance: c.name.clone(),
        module: c.name.clone(),
    })?;
    let mut f = Flattener {
        circuit: c,
        stack: Vec::new(),
        body: Vec::new(),
        clocks: main
            .ports
            .iter()
            .filter(|p| p.ty == Type::Clock)
            .map(|p| p.name.clone())
            .collect(),
    };
    f.module(main, "")?;
    Ok(Circuit {
        name: c.name.clone(),
        modules: vec![Module {
            name: main.name.clone(),
            ports: main.ports.clone(),
            body: f.body,
            span: main.span,
        }],
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Lowering an optimized graph and its supernode plan to a static program.

use super::narrow::{compile_narrow, Instr};
use crate::expr::{fits_one_word, Expr, NodeId};
use crate::graph::{NodeKind, RtlGraph};
use crate::opt::{strategy_for, Strategy};
use crate::partition::{PartGraph, SupernodePlan};
use crate::value::words_for;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("node `{0}` is evaluated but not in any supernode")]
    Missing(String),
    #[error("node `{0}` appears in more than one supernode")]
    Duplicated(String),
    #[error("`{0}` is not an evaluated node")]
    NotEvaluated(String),
    #[error("edge from `{0}` to `{1}` points backwards in supernode order")]
    BackwardEdge(String, String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Where a node's value lives: the narrow store for widths up to 64 bits,
/// the wide store otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Narrow(u32),
    Wide(u32),
}

/// One word-level activation: OR `mask` into active word `word`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Act {
    pub word: u32,
    pub mask: u64,
}

#[derive(Clone, Debug)]
pub(crate) enum Body {
    Narrow { start: u32, len: u32 },
    Wide(Expr),
}

#[derive(Clone, Debug)]
pub struct NodeCode {
    pub node: NodeId,
    pub(crate) out: Slot,
    pub(crate) body: Body,
    /// Memory read by this port; the body computes the address.
    pub(crate) mem_read: Option<u32>,
    /// Index into the commit list for register writes.
    pub(crate) commit: Option<u32>,
    pub(crate) acts: (u32, u32),
    /// Supernode bits set when this node changes.
    pub(crate) act_bits: u32,
    pub strategy: Strategy,
}

#[derive(Clone, Debug)]
pub(crate) struct Commit {
    pub write: Slot,
    pub read: NodeId,
}

#[derive(Clone, Debug)]
pub(crate) struct ResetCode {
    pub signal: NodeId,
    /// (register read, init, commit index)
    pub members: Vec<(NodeId, Expr, Option<u32>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Evaluate only supernodes whose active bit is set.
    Activity,
    /// Evaluate every node every cycle.
    Full,
}

#[derive(Clone, Debug)]
pub struct SimProgram {
    pub graph: RtlGraph,
    pub mode: EvalMode,
    pub(crate) slots: Vec<Option<Slot>>,
    pub(crate) narrow_slots: usize,
    pub(crate) wide_slots: usize,
    pub(crate) code: Vec<Instr>,
    pub(crate) max_temps: usize,
    /// Evaluated nodes, block by block.
    pub nodes: Vec<NodeCode>,
    /// Range of `nodes` per supernode, in supernode order.
    pub blocks: Vec<(u32, u32)>,
    pub(crate) acts: Vec<Act>,
    /// Activations for each source node (inputs and register reads).
    pub(crate) source_acts: Vec<(u32, u32)>,
    pub(crate) commits: Vec<Commit>,
    /// Per memory: activations reaching its read ports.
    pub(crate) mem_acts: Vec<Vec<Act>>,
    pub(crate) resets: Vec<ResetCode>,
    pub words: usize,
    /// Supernode holding each evaluated node.
    pub supernode_of: Vec<Option<u32>>,
}

impl SimProgram {
    pub fn supernode_count(&self) -> usize {
        self.blocks.len()
    }

    /// Number of evaluated nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Supernodes woken when `id` changes, in order.
    pub fn activation_targets(&self, id: NodeId) -> Vec<usize> {
        let (start, len) = match self.nodes.iter().find(|c| c.node == id) {
            Some(c) => c.acts,
            None => self.source_acts[id.index()],
        };
        let mut out = Vec::new();
        for a in &self.acts[start as usize..(start + len) as usize] {
            for b in 0..64 {
                if a.mask >> b & 1 == 1 {
                    out.push(a.word as usize * 64 + b);
                }
            }
        }
        out
    }
}

/// Groups supernode targets into per-word masks.
fn word_acts(targets: &mut Vec<usize>) -> Vec<Act> {
    targets.sort_unstable();
    targets.dedup();
    let mut out: Vec<Act> = Vec::new();
    for &t in targets.iter() {
        let (word, bit) = ((t / 64) as u32, t % 64);
        match out.last_mut() {
            Some(a) if a.word == word => a.mask |= 1 << bit,
            _ => out.push(Act { word, mask: 1 << bit }),
        }
    }
    out
}

struct Lowering<'a> {
    g: &'a RtlGraph,
    slots: Vec<Option<Slot>>,
    code: Vec<Instr>,
    max_temps: usize,
    acts: Vec<Act>,
    narrow_slots: u32,
}

impl Lowering<'_> {
    fn new(g: &RtlGraph) -> (Lowering<'_>, usize, usize) {
        let mut slots = vec![None; g.len()];
        let (mut n, mut w) = (0u32, 0u32);
        for id in g.ids() {
            let width = g.node(id).width;
            slots[id.index()] = Some(if words_for(width) <= 1 {
                n += 1;
                Slot::Narrow(n - 1)
            } else {
                w += 1;
                Slot::Wide(w - 1)
            });
        }
        (
            Lowering {
                g,
                slots,
                code: Vec::new(),
                max_temps: 1,
                acts: Vec::new(),
                narrow_slots: n,
            },
            n as usize,
            w as usize,
        )
    }

    fn body(&mut self, e: &Expr) -> Body {
        if fits_one_word(e) {
            let slots = &self.slots;
            let code = compile_narrow(e, &|id| match slots[id.index()] {
                Some(Slot::Narrow(i)) => i,
                _ => unreachable!("narrow expression reads a wide node"),
            }, self.narrow_slots);
            let start = self.code.len() as u32;
            self.max_temps = self.max_temps.max(code.len());
            let len = code.len() as u32;
            self.code.extend(code);
            Body::Narrow { start, len }
        } else {
            Body::Wide(e.clone())
        }
    }

    fn push_acts(&mut self, mut targets: Vec<usize>) -> ((u32, u32), u32) {
        let start = self.acts.len() as u32;
        let bits = {
            targets.sort_unstable();
            targets.dedup();
            targets.len() as u32
        };
        let acts = word_acts(&mut targets);
        self.acts.extend(acts);
        ((start, self.acts.len() as u32 - start), bits)
    }

    fn node_code(&mut self, id: NodeId, targets: Vec<usize>, threshold: usize, commit: Option<u32>) -> NodeCode {
        let node = self.g.node(id);
        let body = self.body(node.expr.as_ref().expect("evaluated node has an expression"));
        let (acts, act_bits) = self.push_acts(targets);
        NodeCode {
            node: id,
            out: self.slots[id.index()].unwrap(),
            body,
            mem_read: match node.kind {
                NodeKind::MemRead(m) => Some(m),
                _ => None,
            },
            commit,
            acts,
            act_bits,
            strategy: strategy_for(act_bits as usize, threshold),
        }
    }
}

fn commit_list(g: &RtlGraph, slots: &[Option<Slot>]) -> (Vec<Commit>, Vec<Option<u32>>) {
    let mut commits = Vec::new();
    let mut index = vec![None; g.len()];
    for id in g.ids() {
        let n = g.node(id);
        if n.kind == NodeKind::RegWrite {
            if let Some(read) = n.partner {
                index[id.index()] = Some(commits.len() as u32);
                commits.push(Commit {
                    write: slots[id.index()].unwrap(),
                    read,
                });
            }
        }
    }
    (commits, index)
}

fn reset_table(g: &RtlGraph, commit_of: &[Option<u32>]) -> Vec<ResetCode> {
    g.reset_groups
        .iter()
        .map(|grp| ResetCode {
            signal: grp.signal,
            members: grp
                .members
                .iter()
                .map(|m| (m.read, m.init.clone(), commit_of[m.write.index()]))
                .collect(),
        })
        .collect()
}

/// Compiles for activity-driven execution. `pg` must be the partition graph
/// `plan` was built from; `strategies` (indexed by node id) supplies each
/// producer's activation strategy, falling back to `threshold` for nodes it
/// does not cover.
pub fn compile(
    g: RtlGraph,
    pg: &PartGraph,
    plan: &SupernodePlan,
    strategies: &[Strategy],
    threshold: usize,
) -> Result<SimProgram, CompileError> {
    g.topo_order()?;
    let name = |id: NodeId| g.node(id).name.clone();
    let mut supernode_of: Vec<Option<u32>> = vec![None; g.len()];
    for (s, sn) in plan.supernodes.iter().enumerate() {
        for &m in &sn.members {
            let id = pg.nodes[m];
            if !g.is_evaluated(id) {
                return Err(CompileError::NotEvaluated(name(id)));
            }
            if supernode_of[id.index()].replace(s as u32).is_some() {
                return Err(CompileError::Duplicated(name(id)));
            }
        }
    }
    for id in g.ids() {
        if g.is_evaluated(id) && supernode_of[id.index()].is_none() {
            return Err(CompileError::Missing(name(id)));
        }
    }
    let targets = |id: NodeId| -> Result<Vec<usize>, CompileError> {
        let own = supernode_of[id.index()];
        let mut t = Vec::new();
        for &s in g.succs(id) {
            if let Some(sv) = supernode_of[s.index()] {
                if own.is_some_and(|o| sv < o) {
                    return Err(CompileError::BackwardEdge(name(id), name(s)));
                }
                if Some(sv) != own {
                    t.push(sv as usize);
                }
            }
        }
        Ok(t)
    };

    let (mut low, narrow_slots, wide_slots) = Lowering::new(&g);
    let (commits, commit_of) = commit_list(&g, &low.slots);
    let mut nodes = Vec::new();
    let mut blocks = Vec::new();
    for sn in &plan.supernodes {
        let start = nodes.len() as u32;
        for &m in &sn.members {
            let id = pg.nodes[m];
            let t = targets(id)?;
            let mut code = low.node_code(id, t, threshold, commit_of[id.index()]);
            if let Some(&s) = strategies.get(id.index()) {
                code.strategy = s;
            }
            nodes.push(code);
        }
        blocks.push((start, nodes.len() as u32 - start));
    }
    let mut source_acts = vec![(0, 0); g.len()];
    for id in g.ids() {
        if g.node(id).kind.is_source() {
            let t = targets(id)?;
            source_acts[id.index()] = low.push_acts(t).0;
        }
    }
    let mem_acts = g
        .memories
        .iter()
        .map(|m| {
            let mut t: Vec<usize> = m
                .readers
                .iter()
                .filter(|r| !g.is_removed(**r))
                .filter_map(|r| supernode_of[r.index()].map(|s| s as usize))
                .collect();
            word_acts(&mut t)
        })
        .collect();
    let resets = reset_table(&g, &commit_of);
    let Lowering {
        slots,
        code,
        max_temps,
        acts,
        ..
    } = low;
    Ok(SimProgram {
        mode: EvalMode::Activity,
        slots,
        narrow_slots,
        wide_slots,
        code,
        max_temps,
        nodes,
        words: plan.layout.words,
        blocks,
        acts,
        source_acts,
        commits,
        mem_acts,
        resets,
        supernode_of,
        graph: g,
    })
}

/// Compiles for full evaluation: one block holding every evaluated node in
/// topological order, no activation lists.
pub fn compile_full(g: RtlGraph) -> Result<SimProgram, CompileError> {
    let order = g.topo_order()?;
    let (mut low, narrow_slots, wide_slots) = Lowering::new(&g);
    let (commits, commit_of) = commit_list(&g, &low.slots);
    let mut nodes = Vec::new();
    let mut supernode_of = vec![None; g.len()];
    for id in order {
        if g.is_evaluated(id) {
            supernode_of[id.index()] = Some(0);
            nodes.push(low.node_code(id, Vec::new(), 0, commit_of[id.index()]));
        }
    }
    let blocks = if nodes.is_empty() {
        Vec::new()
    } else {
        vec![(0, nodes.len() as u32)]
    };
    let resets = reset_table(&g, &commit_of);
    let Lowering {
        slots,
        code,
        max_temps,
        acts,
        ..
    } = low;
    Ok(SimProgram {
        mode: EvalMode::Full,
        slots,
        narrow_slots,
        wide_slots,
        code,
        max_temps,
        nodes,
        words: 0,
        blocks,
        acts,
        source_acts: vec![(0, 0); g.len()],
        commits,
        mem_acts: vec![Vec::new(); g.memories.len()],
        resets,
        supernode_of,
        graph: g,
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Compiled, activity-driven cycle execution.
//!
//! Each cycle sweeps the active words in supernode order. A supernode's bit
//! is cleared before its block runs; a node whose value changed sets the bits
//! of the supernodes that read it. Register commits, memory writes and the
//! reset slow path run at the clock edge and wake readers the same way.

pub mod compile;
pub mod metrics;
pub(crate) mod narrow;

pub use compile::{compile, compile_full, Act, CompileError, EvalMode, NodeCode, SimProgram, Slot};
pub use metrics::{MetricCounters, MetricsReport};

use crate::expr::{eval_expr, NodeId};
use crate::graph::NodeKind;
use crate::opt::Strategy;
use crate::sim::{fit_value, SimError, Simulator};
use crate::value::WideValue;
use compile::Body;

pub struct Engine {
    p: SimProgram,
    nv: Vec<u64>,
    wv: Vec<WideValue>,
    mems: Vec<Vec<WideValue>>,
    active: Vec<u64>,
    /// Commits that may move a register this edge.
    pending: Vec<u32>,
    is_pending: Vec<bool>,
    cycle: u64,
    settled: bool,
    cycle_evals: u64,
    m: MetricCounters,
}

impl Engine {
    pub fn new(p: SimProgram) -> Self {
        let g = &p.graph;
        let wv = {
            let mut wv = vec![WideValue::zero(65); p.wide_slots];
            for id in g.ids() {
                if let Some(Slot::Wide(i)) = p.slots[id.index()] {
                    wv[i as usize] = WideValue::zero(g.node(id).width);
                }
            }
            wv
        };
        let mems = g
            .memories
            .iter()
            .map(|m| vec![WideValue::zero(m.width); m.depth as usize])
            .collect();
        let mut active = vec![0u64; p.words];
        for s in (0..p.blocks.len()).filter(|_| p.mode == EvalMode::Activity) {
            active[s / 64] |= 1 << (s % 64);
        }
        let m = MetricCounters::new(p.nodes.len(), p.blocks.len());
        Self {
            nv: vec![0; p.narrow_slots + p.max_temps],
            wv,
            mems,
            active,
            pending: Vec::new(),
            is_pending: vec![false; p.commits.len()],
            cycle: 0,
            settled: false,
            cycle_evals: 0,
            m,
            p,
        }
    }

    pub fn program(&self) -> &SimProgram {
        &self.p
    }

    pub fn metrics(&self) -> &MetricCounters {
        &self.m
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport::from_counters(&self.m, self.p.nodes.len())
    }

    /// Times the block holding `id` ran; `None` for nodes outside any block.
    pub fn node_evaluations(&self, id: NodeId) -> Option<u64> {
        self.p.supernode_of[id.index()].map(|s| self.m.supernode_evals.get(s as usize).copied().unwrap_or(0))
    }

    /// Current value of any live node, after settling.
    pub fn value(&mut self, id: NodeId) -> WideValue {
        self.settle();
        self.read(id)
    }

    fn read(&self, id: NodeId) -> WideValue {
        match self.p.slots[id.index()].expect("live node") {
            Slot::Narrow(i) => WideValue::from_u64(self.nv[i as usize], self.p.graph.node(id).width),
            Slot::Wide(i) => self.wv[i as usize].clone(),
        }
    }

    fn port(&self, name: &str) -> Result<NodeId, SimError> {
        let g = &self.p.graph;
        g.find(name)
            .filter(|&id| matches!(g.node(id).kind, NodeKind::Input | NodeKind::Output))
            .ok_or_else(|| SimError::UnknownSignal(name.to_string()))
    }

    #[inline]
    fn wake(&mut self, (start, len): (u32, u32)) {
        for a in &self.p.acts[start as usize..(start + len) as usize] {
            self.active[a.word as usize] |= a.mask;
            self.m.activations += a.mask.count_ones() as u64;
        }
    }

    /// Evaluates node `k` and stores the result; returns whether it changed.
    #[inline]
    fn eval(&mut self, k: usize) -> bool {
        let c = &self.p.nodes[k];
        let narrow = match &c.body {
            Body::Narrow { start, len } => {
                let code = &self.p.code[*start as usize..(*start + *len) as usize];
                Ok(narrow::run(code, &mut self.nv, self.p.narrow_slots))
            }
            Body::Wide(e) => {
                let g = &self.p.graph;
                let (slots, nv, wv) = (&self.p.slots, &self.nv, &self.wv);
                Err(eval_expr(e, &|id: NodeId| match slots[id.index()].unwrap() {
                    Slot::Narrow(i) => WideValue::from_u64(nv[i as usize], g.node(id).width),
                    Slot::Wide(i) => wv[i as usize].clone(),
                }))
            }
        };
        let narrow = match c.mem_read {
            None => narrow,
            Some(m) => {
                let addr = match &narrow {
                    Ok(v) => Some(*v),
                    Err(w) => w.to_u64(),
                };
                let store = &self.mems[m as usize];
                let width = self.p.graph.node(c.node).width;
                let v = match addr {
                    Some(a) if (a as usize) < store.len() => store[a as usize].clone(),
                    _ => WideValue::zero(width),
                };
                Err(v)
            }
        };
        match (c.out, narrow) {
            (Slot::Narrow(i), Ok(v)) => std::mem::replace(&mut self.nv[i as usize], v) != v,
            (Slot::Narrow(i), Err(w)) => {
                let v = w.low_u64();
                std::mem::replace(&mut self.nv[i as usize], v) != v
            }
            (Slot::Wide(i), Err(w)) => {
                let slot = &mut self.wv[i as usize];
                if *slot != w {
                    *slot = w;
                    true
                } else {
                    false
                }
            }
            (Slot::Wide(_), Ok(_)) => unreachable!("narrow code for a wide node"),
        }
    }

    fn run_block(&mut self, s: usize) {
        let (start, len) = self.p.blocks[s];
        self.m.supernode_evals[s] += 1;
        self.m.evaluated_nodes += len as u64;
        self.cycle_evals += len as u64;
        for k in start as usize..(start + len) as usize {
            let changed = self.eval(k);
            let c = &self.p.nodes[k];
            let (acts, bits, strategy, commit) = (c.acts, c.act_bits, c.strategy, c.commit);
            match strategy {
                Strategy::Branchless => {
                    let m = 0u64.wrapping_sub(changed as u64);
                    for a in &self.p.acts[acts.0 as usize..(acts.0 + acts.1) as usize] {
                        self.active[a.word as usize] |= a.mask & m;
                    }
                    self.m.activations += bits as u64;
                }
                Strategy::Branching => {
                    if changed {
                        self.wake(acts);
                    }
                }
            }
            if changed {
                if let Some(ci) = commit {
                    self.mark_pending(ci);
                }
            }
        }
    }

    fn mark_pending(&mut self, ci: u32) {
        if !std::mem::replace(&mut self.is_pending[ci as usize], true) {
            self.pending.push(ci);
        }
    }

    fn settle(&mut self) {
        if self.settled {
            return;
        }
        match self.p.mode {
            EvalMode::Full => {
                self.m.evaluated_nodes += self.p.nodes.len() as u64;
                self.cycle_evals += self.p.nodes.len() as u64;
                if let Some(c) = self.m.supernode_evals.first_mut() {
                    *c += 1;
                }
                for k in 0..self.p.nodes.len() {
                    self.eval(k);
                }
            }
            EvalMode::Activity => {
                for w in 0..self.active.len() {
                    loop {
                        self.m.examinations += 1;
                        let bits = self.active[w];
                        if bits == 0 {
                            break;
                        }
                        self.active[w] = bits & (bits - 1);
                        self.run_block(w * 64 + bits.trailing_zeros() as usize);
                    }
                }
            }
        }
        self.settled = true;
    }

    fn slot_eq(&self, a: Slot, b: Slot) -> bool {
        match (a, b) {
            (Slot::Narrow(x), Slot::Narrow(y)) => self.nv[x as usize] == self.nv[y as usize],
            (Slot::Wide(x), Slot::Wide(y)) => self.wv[x as usize] == self.wv[y as usize],
            _ => unreachable!("register halves differ in width"),
        }
    }

    fn copy_slot(&mut self, from: Slot, to: Slot) {
        match (from, to) {
            (Slot::Narrow(x), Slot::Narrow(y)) => self.nv[y as usize] = self.nv[x as usize],
            (Slot::Wide(x), Slot::Wide(y)) => self.wv[y as usize] = self.wv[x as usize].clone(),
            _ => unreachable!("register halves differ in width"),
        }
    }

    fn store(&mut self, id: NodeId, v: &WideValue) {
        match self.p.slots[id.index()].unwrap() {
            Slot::Narrow(i) => self.nv[i as usize] = v.low_u64(),
            Slot::Wide(i) => self.wv[i as usize] = v.resize(self.p.graph.node(id).width, false),
        }
    }

    fn clock_edge(&mut self) {
        let full = self.p.mode == EvalMode::Full;
        // Reset conditions and init values are sampled before any commit.
        let mut resets: Vec<(usize, Vec<WideValue>)> = Vec::new();
        for (gi, r) in self.p.resets.iter().enumerate() {
            self.m.reset_checks += 1;
            if self.read(r.signal).is_zero() {
                continue;
            }
            let vals = r
                .members
                .iter()
                .map(|(_, init, _)| eval_expr(init, &|id| self.read(id)))
                .collect();
            resets.push((gi, vals));
        }

        for mi in 0..self.p.graph.memories.len() {
            let mut changed = false;
            let mem = &self.p.graph.memories[mi];
            for &w in &mem.writers {
                if self.p.graph.is_removed(w) {
                    continue;
                }
                let (en, addr, data) = mem.decode_write(&self.read(w));
                if let Some(cell) = self.mems[mi].get_mut(addr as usize).filter(|_| en) {
                    if *cell != data {
                        *cell = data;
                        changed = true;
                    }
                }
            }
            if changed {
                let acts = std::mem::take(&mut self.p.mem_acts[mi]);
                for a in &acts {
                    self.active[a.word as usize] |= a.mask;
                    self.m.activations += a.mask.count_ones() as u64;
                }
                self.p.mem_acts[mi] = acts;
            }
        }

        if full {
            for ci in 0..self.p.commits.len() {
                let c = &self.p.commits[ci];
                let (w, r) = (c.write, self.p.slots[c.read.index()].unwrap());
                self.copy_slot(w, r);
            }
        } else {
            let pending = std::mem::take(&mut self.pending);
            for &ci in &pending {
                self.is_pending[ci as usize] = false;
                let c = &self.p.commits[ci as usize];
                let read = c.read;
                let (w, r) = (c.write, self.p.slots[read.index()].unwrap());
                if !self.slot_eq(w, r) {
                    self.copy_slot(w, r);
                    self.wake(self.p.source_acts[read.index()]);
                }
            }
            self.pending = pending;
            self.pending.clear();
        }

        for (gi, vals) in resets {
            let members = std::mem::take(&mut self.p.resets[gi].members);
            for ((read, _, commit), v) in members.iter().zip(&vals) {
                self.store(*read, v);
                if !full {
                    self.wake(self.p.source_acts[read.index()]);
                    // the write half may already hold the value to load next
                    if let Some(ci) = commit {
                        self.mark_pending(*ci);
                    }
                }
            }
            self.p.resets[gi].members = members;
        }
    }
}

impl Simulator for Engine {
    fn poke(&mut self, name: &str, value: &WideValue) -> Result<(), SimError> {
        let id = self.port(name)?;
        let node = self.p.graph.node(id);
        if node.kind != NodeKind::Input {
            return Err(SimError::NotAnInput(name.to_string()));
        }
        let v = fit_value(name, value, node.width)?;
        if self.read(id) != v {
            self.store(id, &v);
            if self.p.mode == EvalMode::Activity {
                self.wake(self.p.source_acts[id.index()]);
            }
            self.settled = false;
        }
        Ok(())
    }

    fn peek(&mut self, name: &str) -> Result<WideValue, SimError> {
        let id = self.port(name)?;
        Ok(self.value(id))
    }

    fn step(&mut self) {
        self.settle();
        self.clock_edge();
        self.m.end_cycle(std::mem::take(&mut self.cycle_evals));
        self.cycle += 1;
        self.settled = false;
    }

    fn cycle(&self) -> u64 {
        self.cycle
    }

    fn port_width(&self, name: &str) -> Option<u32> {
        self.port(name).ok().map(|id| self.p.graph.node(id).width)
    }

    fn input_names(&self) -> Vec<String> {
        let g = &self.p.graph;
        g.inputs().map(|id| g.node(id).name.clone()).collect()
    }

    fn output_names(&self) -> Vec<String> {
        let g = &self.p.graph;
        g.outputs().map(|id| g.node(id).name.clone()).collect()
    }

    fn reset_names(&self) -> Vec<String> {
        let g = &self.p.graph;
        g.reset_inputs.iter().map(|&id| g.node(id).name.clone()).collect()
    }

    fn graph(&self) -> &crate::graph::RtlGraph {
        &self.p.graph
    }

    fn probe(&mut self, id: NodeId) -> WideValue {
        self.value(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;
    use crate::opt::{choose_activation_strategy, run_node_opt, CostParams, NodeOptToggles};
    use crate::oracle::random::{random_circuit, random_stimulus, CircuitParams};
    use crate::oracle::Oracle;
    use crate::partition::{build_plan, PartGraph, PartitionParams};
    use crate::sim::lockstep;

    const COUNTER: &str = "circuit Counter :
  module Counter :
    input clock : Clock
    input reset : UInt<1>
    input en : UInt<1>
    output count : UInt<8>
    reg r : UInt<8>, clock with : (reset => (reset, UInt<8>(0)))
    when en :
      r <= tail(add(r, UInt<8>(1)), 1)
    count <= r
";

    fn activity(g: crate::graph::RtlGraph, max_size: usize) -> Engine {
        let pg = PartGraph::from_rtl(&g);
        let (plan, _) = build_plan(
            &pg,
            &PartitionParams {
                max_size,
                ..Default::default()
            },
        );
        let params = CostParams::default();
        let strategies = choose_activation_strategy(&g, &params);
        Engine::new(compile(g, &pg, &plan, &strategies, params.activation_branchless_threshold).unwrap())
    }

    fn optimized(src: &str) -> crate::graph::RtlGraph {
        let mut g = load_graph(src).unwrap();
        run_node_opt(&mut g, &NodeOptToggles::default(), &CostParams::default());
        g
    }

    fn one(v: u64, w: u32) -> WideValue {
        WideValue::from_u64(v, w)
    }

    #[test]
    fn counter_counts() {
        for mut e in [
            activity(optimized(COUNTER), 35),
            Engine::new(compile_full(load_graph(COUNTER).unwrap()).unwrap()),
        ] {
            e.poke("en", &one(1, 1)).unwrap();
            for want in 1..=3 {
                e.step();
                assert_eq!(e.peek("count").unwrap(), one(want, 8));
            }
            e.poke("reset", &one(1, 1)).unwrap();
            e.step();
            assert_eq!(e.peek("count").unwrap(), one(0, 8));
        }
    }

    #[test]
    fn one_supernode_counter() {
        let g = optimized(COUNTER);
        let pg = PartGraph::from_rtl(&g);
        let plan = crate::partition::SupernodePlan::from_assignment(&pg, &vec![0; pg.len()]);
        let e = Engine::new(compile(g, &pg, &plan, &[], 8).unwrap());
        assert_eq!(e.program().supernode_count(), 1);
        let kinds: Vec<NodeKind> = e.program().nodes.iter().map(|c| e.program().graph.node(c.node).kind).collect();
        assert!(kinds.contains(&NodeKind::RegWrite));
    }

    #[test]
    fn empty_design() {
        let g = load_graph("circuit E :\n  module E :\n    input clock : Clock\n").unwrap();
        let mut e = activity(g, 35);
        assert_eq!(e.program().supernode_count(), 0);
        e.step();
        assert_eq!(e.metrics().evaluated_nodes, 0);
    }

    #[test]
    fn quiescent_design_goes_idle() {
        let mut e = activity(optimized(COUNTER), 35);
        e.step();
        e.step();
        let before = e.metrics().evaluated_nodes;
        for _ in 0..10 {
            e.step();
        }
        assert_eq!(e.metrics().evaluated_nodes, before);
        assert_eq!(e.metrics().active_histogram[0], 11);
    }

    #[test]
    fn reset_loads_register_whose_next_value_is_stable() {
        // r's next value never changes, so only the reset path can move r
        let src = "circuit H :
  module H :
    input clock : Clock
    input reset : UInt<1>
    output o : UInt<4>
    reg r : UInt<4>, clock with : (reset => (reset, UInt<4>(3)))
    r <= UInt<4>(9)
    o <= r
";
        let mut e = activity(optimized(src), 35);
        let mut o = Oracle::new(load_graph(src).unwrap()).unwrap();
        let stim: Vec<Vec<(String, WideValue)>> = [0, 0, 1, 0, 0, 1, 1, 0, 0]
            .iter()
            .map(|&r| vec![("reset".to_string(), one(r, 1))])
            .collect();
        lockstep(&mut o, &mut e, &stim).unwrap();
        assert_eq!(e.program().graph.reset_groups.len(), 1);
    }

    #[test]
    fn memory_write_wakes_readers() {
        let src = "circuit M :
  module M :
    input clock : Clock
    input we : UInt<1>
    input wa : UInt<2>
    input ra : UInt<2>
    input din : UInt<70>
    output dout : UInt<70>
    mem m :
      data-type => UInt<70>
      depth => 4
      read-latency => 0
      write-latency => 1
      reader => r
      writer => w
    m.r.addr <= ra
    m.r.en <= UInt(1)
    m.w.addr <= wa
    m.w.en <= we
    m.w.mask <= UInt(1)
    m.w.data <= din
    dout <= m.r.data
";
        let mut e = activity(optimized(src), 35);
        let mut o = Oracle::new(load_graph(src).unwrap()).unwrap();
        let stim = random_stimulus(
            5,
            &[("we".into(), 1), ("wa".into(), 2), ("ra".into(), 2), ("din".into(), 70)],
            &[],
            300,
        );
        lockstep(&mut o, &mut e, &stim.cycles).unwrap();
    }

    fn differential(seed: u64, max_size: usize) {
        let p = CircuitParams::sampled(seed);
        let src = random_circuit(seed, &p);
        let base = load_graph(&src).unwrap();
        let mut o = Oracle::new(base.clone()).unwrap();
        let ports: Vec<(String, u32)> = base.inputs().map(|id| (base.node(id).name.clone(), base.node(id).width)).collect();
        let resets: Vec<String> = base.reset_inputs.iter().map(|&id| base.node(id).name.clone()).collect();
        let stim = random_stimulus(seed ^ 0x5eed, &ports, &resets, 300);
        let mut e = activity(optimized(&src), max_size);
        if let Err(m) = lockstep(&mut o, &mut e, &stim.cycles) {
            panic!("seed {seed}, max_size {max_size}: {m}");
        }
        let mut o = Oracle::new(base.clone()).unwrap();
        let mut f = Engine::new(compile_full(base).unwrap());
        if let Err(m) = lockstep(&mut o, &mut f, &stim.cycles) {
            panic!("seed {seed}, full: {m}");
        }
    }

    #[test]
    fn random_circuits_match_oracle() {
        for seed in 0..40 {
            differential(seed, [1, 4, 35][seed as usize % 3]);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn any_seed_matches_oracle(seed in 1000u64..1_000_000, max_size in 1usize..60) {
            differential(seed, max_size);
        }
    }

    #[test]
    fn evaluated_nodes_sum_block_sizes() {
        let mut e = activity(optimized(COUNTER), 1);
        e.poke("en", &one(1, 1)).unwrap();
        for _ in 0..5 {
            e.step();
        }
        let m = e.metrics();
        let sizes: u64 = e
            .program()
            .blocks
            .iter()
            .zip(&m.supernode_evals)
            .map(|(b, &n)| b.1 as u64 * n)
            .sum();
        assert_eq!(sizes, m.evaluated_nodes);
        assert_eq!(m.cycles, 5);
        assert!(m.examinations >= 5);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Reference simulator: evaluates every node every cycle in topological
//! order. Slow on purpose; it is the ground truth for differential tests.

pub mod random;

use crate::expr::{eval_expr, NodeId};
use crate::graph::{GraphError, NodeKind, RtlGraph};
use crate::sim::{fit_value, SimError, Simulator};
use crate::value::WideValue;

pub struct Oracle {
    g: RtlGraph,
    order: Vec<NodeId>,
    values: Vec<WideValue>,
    mems: Vec<Vec<WideValue>>,
    cycle: u64,
    settled: bool,
}

impl Oracle {
    pub fn new(g: RtlGraph) -> Result<Self, GraphError> {
        let order = g.topo_order()?;
        let values = (0..g.len())
            .map(|i| WideValue::zero(g.node(NodeId(i as u32)).width))
            .collect();
        let mems = g
            .memories
            .iter()
            .map(|m| vec![WideValue::zero(m.width); m.depth as usize])
            .collect();
        Ok(Self {
            g,
            order,
            values,
            mems,
            cycle: 0,
            settled: false,
        })
    }

    pub fn graph(&self) -> &RtlGraph {
        &self.g
    }

    pub fn value(&mut self, id: NodeId) -> &WideValue {
        self.settle();
        &self.values[id.index()]
    }

    fn settle(&mut self) {
        if self.settled {
            return;
        }
        for &id in &self.order {
            let node = self.g.node(id);
            let v = match node.kind {
                NodeKind::Input | NodeKind::RegRead => continue,
                NodeKind::MemRead(m) => {
                    let addr = eval_expr(node.expr.as_ref().unwrap(), &|r| self.values[r.index()].clone());
                    let store = &self.mems[m as usize];
                    match addr.to_u64() {
                        Some(a) if (a as usize) < store.len() => store[a as usize].clone(),
                        _ => WideValue::zero(node.width),
                    }
                }
                _ => eval_expr(node.expr.as_ref().expect("evaluated node has an expression"), &|r| {
                    self.values[r.index()].clone()
                }),
            };
            self.values[id.index()] = v;
        }
        self.settled = true;
    }

    fn port(&self, name: &str) -> Result<NodeId, SimError> {
        self.g
            .find(name)
            .filter(|&id| matches!(self.g.node(id).kind, NodeKind::Input | NodeKind::Output))
            .ok_or_else(|| SimError::UnknownSignal(name.to_string()))
    }
}

impl Simulator for Oracle {
    fn poke(&mut self, name: &str, value: &WideValue) -> Result<(), SimError> {
        let id = self.port(name)?;
        let node = self.g.node(id);
        if node.kind != NodeKind::Input {
            return Err(SimError::NotAnInput(name.to_string()));
        }
        let v = fit_value(name, value, node.width)?;
        if self.values[id.index()] != v {
            self.values[id.index()] = v;
            self.settled = false;
        }
        Ok(())
    }

    fn peek(&mut self, name: &str) -> Result<WideValue, SimError> {
        let id = self.port(name)?;
        Ok(self.value(id).clone())
    }

    fn step(&mut self) {
        self.settle();
        // Reset conditions are sampled before any register changes.
        let env = |r: NodeId| self.values[r.index()].clone();
        let resets: Vec<(NodeId, WideValue)> = self
            .g
            .reset_groups
            .iter()
            .filter(|grp| !self.values[grp.signal.index()].is_zero())
            .flat_map(|grp| grp.members.iter().map(|m| (m.read, eval_expr(&m.init, &env))))
            .collect();
        let ids: Vec<NodeId> = self.g.ids().collect();
        let mut commits = Vec::new();
        for &id in &ids {
            let node = self.g.node(id);
            if node.kind == NodeKind::RegWrite {
                if let Some(read) = node.partner {
                    commits.push((read, self.values[id.index()].clone()));
                }
            }
        }
        for (mi, mem) in self.g.memories.iter().enumerate() {
            for &w in &mem.writers {
                if self.g.is_removed(w) {
                    continue;
                }
                let (en, addr, data) = mem.decode_write(&self.values[w.index()]);
                if en && (addr as usize) < self.mems[mi].len() {
                    self.mems[mi][addr as usize] = data;
                }
            }
        }
        for (read, v) in commits {
            self.values[read.index()] = v;
        }
        for (read, v) in resets {
            self.values[read.index()] = v;
        }
        self.cycle += 1;
        self.settled = false;
    }

    fn cycle(&self) -> u64 {
        self.cycle
    }

    fn port_width(&self, name: &str) -> Option<u32> {
        self.port(name).ok().map(|id| self.g.node(id).width)
    }

    fn input_names(&self) -> Vec<String> {
        self.g.inputs().map(|id| self.g.node(id).name.clone()).collect()
    }

    fn output_names(&self) -> Vec<String> {
        self.g.outputs().map(|id| self.g.node(id).name.clone()).collect()
    }

    fn reset_names(&self) -> Vec<String> {
        self.g.reset_inputs.iter().map(|&id| self.g.node(id).name.clone()).collect()
    }

    fn graph(&self) -> &RtlGraph {
        &self.g
    }

    fn probe(&mut self, id: NodeId) -> WideValue {
        self.value(id).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;

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

    #[test]
    fn counter_counts_and_resets() {
        let mut o = Oracle::new(load_graph(COUNTER).unwrap()).unwrap();
        o.poke("en", &WideValue::from_u64(1, 1)).unwrap();
        for expected in 1..=3u64 {
            o.step();
            assert_eq!(o.peek("count").unwrap().to_u64(), Some(expected));
        }
        o.poke("reset", &WideValue::from_u64(1, 1)).unwrap();
        o.step();
        assert_eq!(o.peek("count").unwrap().to_u64(), Some(0));
    }

    #[test]
    fn poke_errors() {
        let mut o = Oracle::new(load_graph(COUNTER).unwrap()).unwrap();
        assert!(matches!(o.poke("count", &WideValue::zero(1)), Err(SimError::NotAnInput(_))));
        assert!(matches!(o.poke("nope", &WideValue::zero(1)), Err(SimError::UnknownSignal(_))));
        assert!(matches!(
            o.poke("en", &WideValue::from_u64(2, 2)),
            Err(SimError::ValueTooWide { .. })
        ));
    }

    #[test]
    fn memory_write_then_read() {
        let src = "circuit M :
  module M :
    input clock : Clock
    input we : UInt<1>
    input addr : UInt<2>
    input din : UInt<8>
    output dout : UInt<8>
    mem m :
      data-type => UInt<8>
      depth => 3
      read-latency => 0
      write-latency => 1
      reader => r
      writer => w
    m.r.addr <= addr
    m.r.en <= UInt(1)
    m.w.addr <= addr
    m.w.en <= we
    m.w.mask <= UInt(1)
    m.w.data <= din
    dout <= m.r.data
";
        let mut o = Oracle::new(load_graph(src).unwrap()).unwrap();
        o.poke("we", &WideValue::from_u64(1, 1)).unwrap();
        o.poke("addr", &WideValue::from_u64(2, 2)).unwrap();
        o.poke("din", &WideValue::from_u64(77, 8)).unwrap();
        assert_eq!(o.peek("dout").unwrap().to_u64(), Some(0));
        o.step();
        assert_eq!(o.peek("dout").unwrap().to_u64(), Some(77));
        // Address 3 is out of range: writes are dropped and reads return 0.
        o.poke("addr", &WideValue::from_u64(3, 2)).unwrap();
        o.step();
        assert_eq!(o.peek("dout").unwrap().to_u64(), Some(0));
    }
}

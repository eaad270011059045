// SPDX-License-Identifier: Apache-2.0

//! Value Change Dump output: one timestep per cycle, named signals only.

use crate::expr::NodeId;
use crate::graph::{NodeKind, RtlGraph};
use crate::sim::Simulator;
use crate::value::WideValue;
use std::io::{self, Write};

/// Signals worth dumping: ports, registers and wires that carry a source
/// name. Compiler temporaries (`_T`, `_GEN`, ...) and split slices (`$`)
/// are skipped.
pub fn named_signals(g: &RtlGraph) -> Vec<NodeId> {
    g.ids()
        .filter(|&id| {
            let n = g.node(id);
            matches!(
                n.kind,
                NodeKind::Input | NodeKind::Output | NodeKind::RegRead | NodeKind::Wire
            ) && !n.name.starts_with('_')
                && !n.name.contains('$')
        })
        .collect()
}

/// Short printable identifier for the `i`-th signal.
fn ident(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            return s;
        }
        i -= 1;
    }
}

pub struct VcdWriter<W: Write> {
    out: W,
    signals: Vec<(NodeId, String)>,
    last: Vec<Option<WideValue>>,
    time: u64,
}

impl<W: Write> VcdWriter<W> {
    /// Writes the header for the named signals of `g`.
    pub fn new(mut out: W, g: &RtlGraph) -> io::Result<Self> {
        let ids = named_signals(g);
        writeln!(out, "$timescale 1ns $end")?;
        writeln!(out, "$scope module {} $end", if g.name.is_empty() { "top" } else { &g.name })?;
        let mut signals = Vec::new();
        for (i, &id) in ids.iter().enumerate() {
            let code = ident(i);
            let n = g.node(id);
            let kind = if n.kind == NodeKind::RegRead { "reg" } else { "wire" };
            writeln!(out, "$var {kind} {} {code} {} $end", n.width, n.name.replace('.', "_"))?;
            signals.push((id, code));
        }
        writeln!(out, "$upscope $end")?;
        writeln!(out, "$enddefinitions $end")?;
        Ok(Self {
            out,
            last: vec![None; signals.len()],
            signals,
            time: 0,
        })
    }

    /// Records the current cycle's values; only changes are written.
    pub fn sample(&mut self, sim: &mut dyn Simulator) -> io::Result<()> {
        let mut stamped = false;
        for (i, (id, code)) in self.signals.iter().enumerate() {
            let v = sim.probe(*id);
            if self.last[i].as_ref() == Some(&v) {
                continue;
            }
            if !stamped {
                writeln!(self.out, "#{}", self.time)?;
                stamped = true;
            }
            if v.width() == 1 {
                writeln!(self.out, "{}{code}", v.low_u64())?;
            } else {
                writeln!(self.out, "b{} {code}", v.to_bin_string())?;
            }
            self.last[i] = Some(v);
        }
        self.time += 1;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        writeln!(self.out, "#{}", self.time)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;
    use crate::oracle::Oracle;
    use crate::testbench::{run_testbench, Testbench};

    #[test]
    fn identifiers_are_unique() {
        let ids: std::collections::BTreeSet<String> = (0..20000).map(ident).collect();
        assert_eq!(ids.len(), 20000);
        assert_eq!(ident(0), "!");
        assert_eq!(ident(94), "!!");
    }

    #[test]
    fn dumps_counter() {
        let src = "circuit C :\n  module C :\n    input clock : Clock\n    input en : UInt<1>\n    output count : UInt<4>\n    reg r : UInt<4>, clock\n    node _T = tail(add(r, UInt<4>(1)), 1)\n    when en :\n      r <= _T\n    count <= r\n";
        let g = load_graph(src).unwrap();
        let mut o = Oracle::new(g.clone()).unwrap();
        let mut w = VcdWriter::new(Vec::new(), &g).unwrap();
        let tb = Testbench::parse("poke en 1\nstep 2").unwrap();
        let mut f = |s: &mut dyn Simulator| w.sample(s).unwrap();
        run_testbench(&mut o, &tb, Some(&mut f)).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert!(text.starts_with("$timescale 1ns $end"));
        assert!(!text.contains("_T"));
        assert!(text.contains("$var reg 4 # r $end"));
        assert!(text.contains("#0\n1!\n"), "{text}");
        assert!(text.contains("#2\nb0010 \"\nb0010 #\n"), "{text}");
    }
}

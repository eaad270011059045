// SPDX-License-Identifier: Apache-2.0

//! The checked-in design corpus: `corpus/<case>/{design.fir, test.tb, bounds.json}`.
//! Each case is run on the optimized engine and the oracle in lockstep.

use crate::engine::MetricsReport;
use crate::pipeline::{build, EngineKind, PipelineConfig, PipelineError};
use crate::sim::Simulator;
use crate::testbench::{run_testbench, Command, RunOutcome, Testbench, TestbenchError};
use crate::value::WideValue;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Expected metrics for the default configuration.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct Bounds {
    pub description: String,
    /// Inclusive range for the mean activity factor.
    pub af: (f64, f64),
    /// Inclusive range for the node count after optimization.
    pub nodes: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusCase {
    pub name: String,
    pub design: PathBuf,
    pub testbench: PathBuf,
    pub bounds: Bounds,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{path}: {err}")]
    Bounds { path: PathBuf, err: serde_json::Error },
}

/// Every case directory under `root`, sorted by name.
pub fn load_corpus(root: &Path) -> Result<Vec<CorpusCase>, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |err| CorpusError::Io { path, err }
    };
    let mut cases = Vec::new();
    for entry in fs::read_dir(root).map_err(io(root))? {
        let dir = entry.map_err(io(root))?.path();
        if !dir.is_dir() {
            continue;
        }
        let bpath = dir.join("bounds.json");
        let text = fs::read_to_string(&bpath).map_err(io(&bpath))?;
        let bounds = serde_json::from_str(&text).map_err(|err| CorpusError::Bounds { path: bpath, err })?;
        cases.push(CorpusCase {
            name: dir.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            design: dir.join("design.fir"),
            testbench: dir.join("test.tb"),
            bounds,
        });
    }
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

/// Where two simulators first disagreed on an output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub cycle: u64,
    pub output: String,
    pub optimized: String,
    pub oracle: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LockstepOutcome {
    pub cycles: u64,
    pub expects: usize,
    pub divergence: Option<Divergence>,
}

fn compare(a: &mut dyn Simulator, b: &mut dyn Simulator, outputs: &[String]) -> Option<Divergence> {
    for o in outputs {
        let (x, y) = (a.peek(o).ok()?, b.peek(o).ok()?);
        if x != y {
            return Some(Divergence {
                cycle: a.cycle(),
                output: o.clone(),
                optimized: x.to_string(),
                oracle: y.to_string(),
            });
        }
    }
    None
}

/// Drives `a` and `b` with the same script, comparing every output before
/// each clock edge and at the end. `expect` lines are checked against `a`.
/// Stops at the first divergence.
pub fn run_lockstep(
    a: &mut dyn Simulator,
    b: &mut dyn Simulator,
    tb: &Testbench,
) -> Result<LockstepOutcome, TestbenchError> {
    let outputs = a.output_names();
    let resets = a.reset_names();
    let mut out = LockstepOutcome {
        cycles: 0,
        expects: 0,
        divergence: None,
    };
    let poke = |s: &mut dyn Simulator, line, name: &str, v: &WideValue| {
        s.poke(name, v).map_err(|err| TestbenchError::Sim { line, err })
    };
    let steps = |a: &mut dyn Simulator, b: &mut dyn Simulator, n: u64, out: &mut LockstepOutcome| {
        for _ in 0..n {
            if let Some(d) = compare(a, b, &outputs) {
                out.divergence = Some(d);
                return false;
            }
            a.step();
            b.step();
            out.cycles += 1;
        }
        true
    };
    for (line, cmd) in &tb.commands {
        let line = *line;
        let more = match cmd {
            Command::Poke { signal, value } => {
                poke(a, line, signal, value)?;
                poke(b, line, signal, value)?;
                true
            }
            Command::Step(n) => steps(a, b, *n, &mut out),
            Command::Reset(n) => {
                for r in &resets {
                    poke(a, line, r, &WideValue::from_u64(1, 1))?;
                    poke(b, line, r, &WideValue::from_u64(1, 1))?;
                }
                let more = steps(a, b, *n, &mut out);
                for r in &resets {
                    poke(a, line, r, &WideValue::zero(1))?;
                    poke(b, line, r, &WideValue::zero(1))?;
                }
                more
            }
            Command::Expect { signal, value } => {
                // reuse the single-simulator checker on a one-line script
                let one = Testbench {
                    commands: vec![(
                        line,
                        Command::Expect {
                            signal: signal.clone(),
                            value: value.clone(),
                        },
                    )],
                };
                run_testbench(a, &one, None)?;
                out.expects += 1;
                true
            }
        };
        if !more {
            return Ok(out);
        }
    }
    out.divergence = compare(a, b, &outputs);
    Ok(out)
}

/// Runs `tb` and returns one hash of all outputs per cycle, taken before
/// each clock edge and once at the end. Cheaper to keep than a full trace.
pub fn digest_trace(sim: &mut dyn Simulator, tb: &Testbench) -> Result<(RunOutcome, Vec<u64>), TestbenchError> {
    let outputs = sim.output_names();
    let mut digests = Vec::new();
    let mut f = |s: &mut dyn Simulator| {
        let mut h = DefaultHasher::new();
        for o in &outputs {
            s.peek(o).expect("output exists").hash(&mut h);
        }
        digests.push(h.finish());
    };
    let r = run_testbench(sim, tb, Some(&mut f))?;
    Ok((r, digests))
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub passed: bool,
    /// Why the case failed, if it did.
    pub failure: Option<String>,
    pub divergence: Option<Divergence>,
    pub cycles: u64,
    pub expects: usize,
    pub nodes_final: usize,
    pub metrics: Option<MetricsReport>,
}

/// Runs one case under `cfg` against the oracle and checks its bounds.
/// Bounds are only checked when `check_bounds` is set, since they describe
/// the default configuration.
pub fn run_case(case: &CorpusCase, cfg: &PipelineConfig, check_bounds: bool) -> CaseResult {
    let mut r = CaseResult {
        name: case.name.clone(),
        passed: false,
        failure: None,
        divergence: None,
        cycles: 0,
        expects: 0,
        nodes_final: 0,
        metrics: None,
    };
    let fail = |mut r: CaseResult, msg: String| {
        r.failure = Some(msg);
        r
    };
    let (src, tb_text) = match (fs::read_to_string(&case.design), fs::read_to_string(&case.testbench)) {
        (Ok(s), Ok(t)) => (s, t),
        (Err(e), _) | (_, Err(e)) => return fail(r, e.to_string()),
    };
    let tb = match Testbench::parse(&tb_text) {
        Ok(tb) => tb,
        Err(e) => return fail(r, format!("testbench: {e}")),
    };
    let built = |kind| {
        build(
            &src,
            &PipelineConfig {
                engine: kind,
                ..cfg.clone()
            },
        )
    };
    let (mut opt, mut oracle) = match (built(EngineKind::Optimized), built(EngineKind::Oracle)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(r, pipeline_failure(e)),
    };
    r.nodes_final = opt.report.nodes_final;
    let outcome = run_lockstep(opt.sim.sim(), oracle.sim.sim(), &tb);
    r.metrics = opt.sim.metrics();
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => return fail(r, e.to_string()),
    };
    r.cycles = outcome.cycles;
    r.expects = outcome.expects;
    if let Some(d) = outcome.divergence {
        let msg = format!(
            "cycle {}: {} is {} optimized, {} oracle",
            d.cycle, d.output, d.optimized, d.oracle
        );
        r.divergence = Some(d);
        return fail(r, msg);
    }
    if check_bounds {
        let b = &case.bounds;
        if let Some(m) = &r.metrics {
            if m.af_mean < b.af.0 || m.af_mean > b.af.1 {
                let msg = format!("af {:.4} outside [{}, {}]", m.af_mean, b.af.0, b.af.1);
                return fail(r, msg);
            }
        }
        if r.nodes_final < b.nodes.0 || r.nodes_final > b.nodes.1 {
            let msg = format!("{} nodes outside [{}, {}]", r.nodes_final, b.nodes.0, b.nodes.1);
            return fail(r, msg);
        }
    }
    r.passed = true;
    r
}

fn pipeline_failure(e: PipelineError) -> String {
    format!("build: {e}")
}

/// Runs every case under the default configuration.
pub fn run_corpus(root: &Path) -> Result<Vec<CaseResult>, CorpusError> {
    let cfg = PipelineConfig::default();
    Ok(load_corpus(root)?.iter().map(|c| run_case(c, &cfg, true)).collect())
}

/// A fixed-width table of results.
pub fn format_table(results: &[CaseResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:<6} {:>9} {:>7} {:>6} {:>8}  detail",
        "case", "result", "cycles", "expects", "nodes", "af"
    );
    for r in results {
        let af = r.metrics.as_ref().map_or("-".into(), |m| format!("{:.4}", m.af_mean));
        let _ = writeln!(
            s,
            "{:<16} {:<6} {:>9} {:>7} {:>6} {:>8}  {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.cycles,
            r.expects,
            r.nodes_final,
            af,
            r.failure.as_deref().unwrap_or("")
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_graph;
    use crate::oracle::Oracle;

    const TOGGLE: &str = "circuit T :\n  module T :\n    input clock : Clock\n    input a : UInt<4>\n    output o : UInt<4>\n    reg r : UInt<4>, clock\n    r <= a\n    o <= r\n";
    const BROKEN: &str = "circuit T :\n  module T :\n    input clock : Clock\n    input a : UInt<4>\n    output o : UInt<4>\n    reg r : UInt<4>, clock\n    r <= not(a)\n    o <= r\n";

    #[test]
    fn lockstep_agrees_on_identical_designs() {
        let mut a = Oracle::new(load_graph(TOGGLE).unwrap()).unwrap();
        let mut b = Oracle::new(load_graph(TOGGLE).unwrap()).unwrap();
        let tb = Testbench::parse("poke a 3\nstep 2\nexpect o 3\npoke a 5\nstep").unwrap();
        let o = run_lockstep(&mut a, &mut b, &tb).unwrap();
        assert_eq!((o.cycles, o.expects, o.divergence), (3, 1, None));
    }

    #[test]
    fn lockstep_reports_first_divergence() {
        let mut a = Oracle::new(load_graph(TOGGLE).unwrap()).unwrap();
        let mut b = Oracle::new(load_graph(BROKEN).unwrap()).unwrap();
        let tb = Testbench::parse("poke a 3\nstep 4").unwrap();
        let d = run_lockstep(&mut a, &mut b, &tb).unwrap().divergence.unwrap();
        assert_eq!(d.cycle, 1);
        assert_eq!((d.output.as_str(), d.optimized.as_str(), d.oracle.as_str()), ("o", "3", "12"));
    }

    #[test]
    fn bounds_parse() {
        let b: Bounds = serde_json::from_str(r#"{"description": "x", "af": [0.0, 0.5], "nodes": [1, 9]}"#).unwrap();
        assert_eq!(b.nodes, (1, 9));
        assert_eq!(b.af, (0.0, 0.5));
    }
}

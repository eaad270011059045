// SPDX-License-Identifier: Apache-2.0

//! Parse, optimize, partition, compile: the path from FIRRTL text to a
//! runnable simulator, plus the measurement drivers built on it.

use crate::bitsplit::{split_nodes, BitSplitReport, DEFAULT_MAX_SLICES};
use crate::engine::{compile, compile_full, CompileError, Engine, MetricsReport};
use crate::frontend::{load, FrontendError, LowerOptions};
use crate::graph::{GraphError, RtlGraph};
use crate::opt::{choose_activation_strategy, run_node_opt, CostParams, NodeOptReport, NodeOptToggles};
use crate::oracle::Oracle;
use crate::partition::{build_plan, PartGraph, PartitionParams, PartitionReport, DEFAULT_MAX_SUPERNODE_SIZE};
use crate::sim::Simulator;
use crate::testbench::{run_testbench, RunOutcome, Testbench, TestbenchError};
use crate::value::WideValue;
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PassToggles {
    pub simplify: bool,
    pub eliminate: bool,
    pub inline: bool,
    pub reset_opt: bool,
    pub bit_split: bool,
    pub pre_group: bool,
    pub kernighan: bool,
}

impl Default for PassToggles {
    fn default() -> Self {
        Self::all()
    }
}

impl PassToggles {
    /// Flag spellings, as in `--no-<name>`.
    pub const NAMES: [&'static str; 7] = [
        "simplify",
        "eliminate",
        "inline",
        "reset-opt",
        "bit-split",
        "pre-group",
        "kernighan",
    ];

    pub fn all() -> Self {
        Self {
            simplify: true,
            eliminate: true,
            inline: true,
            reset_opt: true,
            bit_split: true,
            pre_group: true,
            kernighan: true,
        }
    }

    pub fn none() -> Self {
        Self {
            simplify: false,
            eliminate: false,
            inline: false,
            reset_opt: false,
            bit_split: false,
            pre_group: false,
            kernighan: false,
        }
    }

    fn field(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "simplify" => &mut self.simplify,
            "eliminate" => &mut self.eliminate,
            "inline" => &mut self.inline,
            "reset-opt" => &mut self.reset_opt,
            "bit-split" => &mut self.bit_split,
            "pre-group" => &mut self.pre_group,
            "kernighan" => &mut self.kernighan,
            _ => return None,
        })
    }

    /// Returns a copy with pass `name` switched; `None` for an unknown name.
    pub fn with(mut self, name: &str, on: bool) -> Option<Self> {
        *self.field(name)? = on;
        Some(self)
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        let mut c = *self;
        c.field(name).map(|f| *f)
    }

    /// The all-on set with exactly one pass disabled, for every pass.
    pub fn each_disabled() -> Vec<(&'static str, Self)> {
        Self::NAMES.iter().map(|&n| (n, Self::all().with(n, false).unwrap())).collect()
    }

    fn node_opt(&self) -> NodeOptToggles {
        NodeOptToggles {
            simplify: self.simplify,
            eliminate: self.eliminate,
            inline: self.inline,
            reset_opt: self.reset_opt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Optimized,
    Oracle,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub testbench: Option<PathBuf>,
    pub engine: EngineKind,
    pub max_supernode_size: usize,
    pub passes: PassToggles,
    /// Skip every pass and evaluate all nodes each cycle.
    pub no_opt: bool,
    pub cost: CostParams,
    pub max_slices: usize,
    pub vcd: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            testbench: None,
            engine: EngineKind::Optimized,
            max_supernode_size: DEFAULT_MAX_SUPERNODE_SIZE,
            passes: PassToggles::all(),
            no_opt: false,
            cost: CostParams::default(),
            max_slices: DEFAULT_MAX_SLICES,
            vcd: None,
            metrics: None,
            report: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn with_passes(&self, passes: PassToggles) -> Self {
        Self {
            passes,
            no_opt: false,
            ..self.clone()
        }
    }

    pub fn baseline(&self) -> Self {
        Self {
            no_opt: true,
            passes: PassToggles::none(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Testbench(#[from] TestbenchError),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PipelineReport {
    pub nodes_parsed: usize,
    pub nodes_final: usize,
    pub node_opt: Option<NodeOptReport>,
    pub bit_split: Option<BitSplitReport>,
    pub partition: Option<PartitionReport>,
    pub compile_seconds: f64,
    pub warnings: Vec<String>,
}

pub enum BuiltSim {
    Engine(Box<Engine>),
    Oracle(Box<Oracle>),
}

impl BuiltSim {
    pub fn sim(&mut self) -> &mut dyn Simulator {
        match self {
            BuiltSim::Engine(e) => e.as_mut(),
            BuiltSim::Oracle(o) => o.as_mut(),
        }
    }

    pub fn engine(&self) -> Option<&Engine> {
        match self {
            BuiltSim::Engine(e) => Some(e),
            BuiltSim::Oracle(_) => None,
        }
    }

    pub fn metrics(&self) -> Option<MetricsReport> {
        self.engine().map(Engine::report)
    }
}

pub struct Build {
    pub sim: BuiltSim,
    pub report: PipelineReport,
}

/// Applies the enabled graph passes in place.
pub fn optimize_graph(g: &mut RtlGraph, cfg: &PipelineConfig, report: &mut PipelineReport) {
    if cfg.no_opt {
        return;
    }
    let on = cfg.passes.node_opt();
    if on.simplify || on.eliminate || on.inline || on.reset_opt {
        report.node_opt = Some(run_node_opt(g, &on, &cfg.cost));
    }
    if cfg.passes.bit_split {
        report.bit_split = Some(split_nodes(g, cfg.max_slices));
        g.compact();
    }
}

/// Builds a simulator for an already lowered graph.
pub fn build_graph(mut g: RtlGraph, cfg: &PipelineConfig) -> Result<Build, PipelineError> {
    let t = Instant::now();
    let mut report = PipelineReport {
        nodes_parsed: g.node_count(),
        ..Default::default()
    };
    let sim = match cfg.engine {
        EngineKind::Oracle => BuiltSim::Oracle(Box::new(Oracle::new(g)?)),
        EngineKind::Optimized if cfg.no_opt => BuiltSim::Engine(Box::new(Engine::new(compile_full(g)?))),
        EngineKind::Optimized => {
            optimize_graph(&mut g, cfg, &mut report);
            let pg = PartGraph::from_rtl(&g);
            let (plan, prep) = build_plan(
                &pg,
                &PartitionParams {
                    max_size: cfg.max_supernode_size,
                    pre_group: cfg.passes.pre_group,
                    kernighan: cfg.passes.kernighan,
                    ..Default::default()
                },
            );
            report.partition = Some(prep);
            let strategies = choose_activation_strategy(&g, &cfg.cost);
            let threshold = cfg.cost.activation_branchless_threshold;
            BuiltSim::Engine(Box::new(Engine::new(compile(g, &pg, &plan, &strategies, threshold)?)))
        }
    };
    report.nodes_final = match &sim {
        BuiltSim::Engine(e) => e.program().graph.node_count(),
        BuiltSim::Oracle(o) => o.graph().node_count(),
    };
    report.compile_seconds = t.elapsed().as_secs_f64();
    Ok(Build { sim, report })
}

/// Parses `src` and builds a simulator for it.
pub fn build(src: &str, cfg: &PipelineConfig) -> Result<Build, PipelineError> {
    let (g, warnings) = load(src, &LowerOptions::default())?;
    let mut b = build_graph(g, cfg)?;
    b.report.warnings = warnings.iter().map(|w| w.render("")).collect();
    Ok(b)
}

/// Output values of every cycle, sampled before each clock edge.
pub type Trace = Vec<Vec<WideValue>>;

/// Runs `tb`, recording all outputs each cycle.
pub fn run_traced(sim: &mut dyn Simulator, tb: &Testbench) -> (Result<RunOutcome, TestbenchError>, Trace) {
    let outputs = sim.output_names();
    let mut trace = Trace::new();
    let mut f = |s: &mut dyn Simulator| {
        trace.push(outputs.iter().map(|o| s.peek(o).expect("output exists")).collect());
    };
    let r = run_testbench(sim, tb, Some(&mut f));
    (r, trace)
}

/// First difference between two traces as `(cycle, output index)`.
pub fn first_divergence(a: &Trace, b: &Trace) -> Option<(usize, usize)> {
    for (c, (x, y)) in a.iter().zip(b).enumerate() {
        if let Some(i) = x.iter().zip(y).position(|(p, q)| p != q) {
            return Some((c, i));
        }
    }
    (a.len() != b.len()).then(|| (a.len().min(b.len()), 0))
}

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub label: String,
    pub cycles: u64,
    pub seconds: f64,
    pub cycles_per_sec: f64,
    pub compile_seconds: f64,
    pub metrics: Option<MetricsReport>,
}

/// Builds once per repeat and keeps the fastest run, timing only the steps.
pub fn measure(
    label: &str,
    src: &str,
    tb: &Testbench,
    cfg: &PipelineConfig,
    repeats: usize,
) -> Result<Measurement, PipelineError> {
    let mut best: Option<Measurement> = None;
    for _ in 0..repeats.max(1) {
        let mut b = build(src, cfg)?;
        let out = run_testbench(b.sim.sim(), tb, None)?;
        let m = Measurement {
            label: label.to_string(),
            cycles: out.cycles,
            seconds: out.step_time.as_secs_f64(),
            cycles_per_sec: out.cycles_per_sec(),
            compile_seconds: b.report.compile_seconds,
            metrics: b.sim.metrics(),
        };
        if best.as_ref().is_none_or(|x| m.cycles_per_sec > x.cycles_per_sec) {
            best = Some(m);
        }
    }
    Ok(best.unwrap())
}

/// The incremental breakdown: baseline, then supernodes, then the node-level
/// passes, then bit splitting.
pub fn breakdown_stages(cfg: &PipelineConfig) -> Vec<(&'static str, PipelineConfig)> {
    let supernode = PassToggles {
        pre_group: true,
        kernighan: true,
        ..PassToggles::none()
    };
    let node_level = PassToggles {
        simplify: true,
        eliminate: true,
        inline: true,
        reset_opt: true,
        ..supernode
    };
    vec![
        ("baseline", cfg.baseline()),
        ("+supernode", cfg.with_passes(supernode)),
        ("+node-level", cfg.with_passes(node_level)),
        ("+bit-split", cfg.with_passes(PassToggles::all())),
    ]
}

pub fn bench_breakdown(
    src: &str,
    tb: &Testbench,
    cfg: &PipelineConfig,
    repeats: usize,
) -> Result<Vec<Measurement>, PipelineError> {
    breakdown_stages(cfg)
        .into_iter()
        .map(|(label, c)| measure(label, src, tb, &c, repeats))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub max_supernode_size: usize,
    pub measurement: Measurement,
}

pub fn sweep_supernode_size(
    src: &str,
    tb: &Testbench,
    cfg: &PipelineConfig,
    sizes: &[usize],
    repeats: usize,
) -> Result<Vec<SweepPoint>, PipelineError> {
    sizes
        .iter()
        .map(|&s| {
            let c = PipelineConfig {
                max_supernode_size: s,
                ..cfg.clone()
            };
            Ok(SweepPoint {
                max_supernode_size: s,
                measurement: measure(&format!("max-size {s}"), src, tb, &c, repeats)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EngineComparison {
    pub optimized: Measurement,
    pub oracle: Measurement,
    pub traces_equal: bool,
    /// `(cycle, output)` of the first difference.
    pub divergence: Option<(usize, String)>,
}

pub fn compare_engines(src: &str, tb: &Testbench, cfg: &PipelineConfig) -> Result<EngineComparison, PipelineError> {
    let ocfg = PipelineConfig {
        engine: EngineKind::Oracle,
        ..cfg.clone()
    };
    let ecfg = PipelineConfig {
        engine: EngineKind::Optimized,
        ..cfg.clone()
    };
    let optimized = measure("optimized", src, tb, &ecfg, 1)?;
    let oracle = measure("oracle", src, tb, &ocfg, 1)?;
    let mut a = build(src, &ocfg)?;
    let mut b = build(src, &ecfg)?;
    let (_, ta) = run_traced(a.sim.sim(), tb);
    let (_, tb_) = run_traced(b.sim.sim(), tb);
    let names = a.sim.sim().output_names();
    let divergence = first_divergence(&ta, &tb_).map(|(c, i)| (c, names.get(i).cloned().unwrap_or_default()));
    Ok(EngineComparison {
        optimized,
        oracle,
        traces_equal: divergence.is_none(),
        divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn toggles_by_name() {
        let t = PassToggles::all().with("bit-split", false).unwrap();
        assert!(!t.bit_split && t.simplify);
        assert_eq!(t.get("bit-split"), Some(false));
        assert!(PassToggles::all().with("nope", false).is_none());
        assert_eq!(PassToggles::each_disabled().len(), 7);
    }

    #[test]
    fn every_configuration_runs_the_counter() {
        let tb = Testbench::parse("poke en 1\nstep 5\nexpect count 5\nreset 2\nstep 3\nexpect count 3").unwrap();
        let base = PipelineConfig::default();
        let mut cfgs: Vec<PipelineConfig> = PassToggles::each_disabled()
            .into_iter()
            .map(|(_, t)| base.with_passes(t))
            .collect();
        cfgs.push(base.baseline());
        cfgs.push(PipelineConfig {
            engine: EngineKind::Oracle,
            ..base.clone()
        });
        for c in cfgs {
            let mut b = build(COUNTER, &c).unwrap();
            run_testbench(b.sim.sim(), &tb, None).unwrap();
        }
    }

    #[test]
    fn breakdown_has_four_stages() {
        let tb = Testbench::parse("poke en 1\nstep 100").unwrap();
        let r = bench_breakdown(COUNTER, &tb, &PipelineConfig::default(), 1).unwrap();
        let labels: Vec<&str> = r.iter().map(|m| m.label.as_str()).collect();
        assert_eq!(labels, ["baseline", "+supernode", "+node-level", "+bit-split"]);
        assert!(r.iter().all(|m| m.cycles == 100));
    }

    #[test]
    fn engines_agree_on_counter() {
        let tb = Testbench::parse("poke en 1\nstep 20\nreset 1\nstep 4").unwrap();
        let c = compare_engines(COUNTER, &tb, &PipelineConfig::default()).unwrap();
        assert!(c.traces_equal);
        assert_eq!(c.optimized.cycles, 25);
    }
}

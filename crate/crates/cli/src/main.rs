// SPDX-License-Identifier: Apache-2.0

//! `actsim run|bench <design.fir>`: build and run a design under a testbench.

use actsim_core::engine::MetricsReport;
use actsim_core::frontend::{load, LowerOptions};
use actsim_core::model::{best_predicted_and_measured, Calibration, Sample};
use actsim_core::oracle::random::random_stimulus;
use actsim_core::pipeline::{
    bench_breakdown, build_graph, compare_engines, sweep_supernode_size, EngineKind, Measurement, PassToggles,
    PipelineConfig,
};
use actsim_core::sim::Simulator;
use actsim_core::testbench::{run_testbench, Command, Testbench, TestbenchError};
use actsim_core::vcd::VcdWriter;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "actsim", version, about = "Activity-driven full-cycle RTL simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a design under a testbench.
    Run(Common),
    /// Measure simulation throughput.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Optimized,
    Oracle,
}

#[derive(Args, Clone)]
struct Common {
    /// FIRRTL design.
    design: PathBuf,
    /// Testbench script; without one, random stimulus is generated.
    #[arg(long)]
    tb: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "optimized")]
    engine: EngineArg,
    #[arg(long, default_value_t = actsim_core::partition::DEFAULT_MAX_SUPERNODE_SIZE)]
    max_supernode_size: usize,
    /// Disable every pass and evaluate all nodes each cycle.
    #[arg(long)]
    no_opt: bool,
    #[arg(long)]
    no_simplify: bool,
    #[arg(long)]
    no_eliminate: bool,
    #[arg(long)]
    no_inline: bool,
    #[arg(long)]
    no_reset_opt: bool,
    #[arg(long)]
    no_bit_split: bool,
    #[arg(long)]
    no_pre_group: bool,
    #[arg(long)]
    no_kernighan: bool,
    /// Cost of materializing an intermediate node.
    #[arg(long)]
    cost_node: Option<u64>,
    /// Producers with at most this many successors activate without branching.
    #[arg(long)]
    branchless_threshold: Option<usize>,
    #[arg(long)]
    vcd: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Pass and partition report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Seed for generated stimulus.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cycles of generated stimulus when no testbench is given.
    #[arg(long, default_value_t = 1000)]
    cycles: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Run both engines and compare speed and traces.
    #[arg(long)]
    compare_engines: bool,
    /// Comma-separated supernode size limits to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_supernode_size: Vec<usize>,
    /// Runs per configuration; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

enum Failure {
    /// Expectation failed: exit 1.
    Expect(String),
    /// Usage, parse or I/O problem: exit 2.
    Usage(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn config(c: &Common) -> PipelineConfig {
    let mut passes = PassToggles::all();
    for (name, off) in [
        ("simplify", c.no_simplify),
        ("eliminate", c.no_eliminate),
        ("inline", c.no_inline),
        ("reset-opt", c.no_reset_opt),
        ("bit-split", c.no_bit_split),
        ("pre-group", c.no_pre_group),
        ("kernighan", c.no_kernighan),
    ] {
        passes = passes.with(name, !off).expect("known pass");
    }
    let mut cfg = PipelineConfig {
        input: Some(c.design.clone()),
        testbench: c.tb.clone(),
        engine: match c.engine {
            EngineArg::Optimized => EngineKind::Optimized,
            EngineArg::Oracle => EngineKind::Oracle,
        },
        max_supernode_size: c.max_supernode_size,
        passes,
        no_opt: c.no_opt,
        vcd: c.vcd.clone(),
        metrics: c.metrics.clone(),
        report: c.report.clone(),
        seed: c.seed,
        ..Default::default()
    };
    if c.no_opt {
        cfg.passes = PassToggles::none();
    }
    if let Some(v) = c.cost_node {
        cfg.cost.cost_node = v;
    }
    if let Some(v) = c.branchless_threshold {
        cfg.cost.activation_branchless_threshold = v;
    }
    cfg
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_design(c: &Common) -> Result<(String, actsim_core::graph::RtlGraph), Failure> {
    let src = read(&c.design)?;
    let file = c.design.display().to_string();
    let (g, warnings) =
        load(&src, &LowerOptions::default()).map_err(|e| Failure::Usage(e.to_diagnostic().render(&file)))?;
    for w in warnings {
        eprintln!("{}", w.render(&file));
    }
    Ok((src, g))
}

/// The testbench, or random stimulus when none was given.
fn testbench(c: &Common, g: &actsim_core::graph::RtlGraph) -> Result<Testbench, Failure> {
    if let Some(p) = &c.tb {
        return Testbench::parse(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())));
    }
    let inputs: Vec<(String, u32)> = g.inputs().map(|id| (g.node(id).name.clone(), g.node(id).width)).collect();
    let resets: Vec<String> = g.reset_inputs.iter().map(|&id| g.node(id).name.clone()).collect();
    let stim = random_stimulus(c.seed, &inputs, &resets, c.cycles);
    let mut commands = Vec::new();
    for pokes in stim.cycles {
        for (signal, value) in pokes {
            commands.push((0, Command::Poke { signal, value }));
        }
        commands.push((0, Command::Step(1)));
    }
    Ok(Testbench { commands })
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Failure> {
    fs::write(path, serde_json::to_string_pretty(v).expect("serializable") + "\n")
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn metrics_json(m: Option<&MetricsReport>, cycles: u64, cfg: &PipelineConfig, model: serde_json::Value) -> serde_json::Value {
    let mut v = match m {
        Some(m) => serde_json::to_value(m).expect("serializable"),
        None => json!({ "cycles": cycles, "af_mean": null, "evaluated_nodes": null, "activations": null,
                        "examinations": null, "supernodes": null, "node_count": null }),
    };
    v["config"] = serde_json::to_value(cfg).expect("serializable");
    v["model"] = model;
    v
}

fn run(c: &Common) -> Result<(), Failure> {
    let cfg = config(c);
    let (_, g) = load_design(c)?;
    let tb = testbench(c, &g)?;
    let mut b = build_graph(g, &cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(p) = &cfg.report {
        write_json(p, &serde_json::to_value(&b.report).expect("serializable"))?;
    }
    let mut vcd = match &cfg.vcd {
        Some(p) => Some(VcdWriter::new(std::io::BufWriter::new(fs::File::create(p)?), b.sim.sim().graph())?),
        None => None,
    };
    let mut io_err = None;
    let mut sample = |s: &mut dyn Simulator| {
        if let Some(w) = vcd.as_mut() {
            if let Err(e) = w.sample(s) {
                io_err.get_or_insert(e);
            }
        }
    };
    let observer: Option<&mut dyn FnMut(&mut dyn Simulator)> = if cfg.vcd.is_some() { Some(&mut sample) } else { None };
    let result = run_testbench(b.sim.sim(), &tb, observer);
    if let Some(e) = io_err {
        return Err(e.into());
    }
    if let Some(w) = vcd {
        w.finish()?;
    }
    let cycles = b.sim.sim().cycle();
    let metrics = b.sim.metrics();
    if let Some(p) = &cfg.metrics {
        write_json(p, &metrics_json(metrics.as_ref(), cycles, &cfg, serde_json::Value::Null))?;
    }
    match result {
        Ok(out) => {
            println!(
                "PASS: {} cycles, {} expects, {:.0} cycles/s",
                out.cycles,
                out.expects,
                out.cycles_per_sec()
            );
            if let Some(m) = metrics {
                println!(
                    "af {:.4}, {} supernodes, {} nodes, {} evaluations, {} activations, {} examinations",
                    m.af_mean, m.supernodes, m.node_count, m.evaluated_nodes, m.activations, m.examinations
                );
            }
            Ok(())
        }
        Err(TestbenchError::Expect(f)) => Err(Failure::Expect(format!(
            "FAIL: cycle {}: {} expected {}, actual {} (line {})",
            f.cycle, f.signal, f.expected, f.actual, f.line
        ))),
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}

fn print_measurement(m: &Measurement) {
    let af = m.metrics.as_ref().map_or("-".to_string(), |x| format!("{:.4}", x.af_mean));
    println!(
        "{:<16} {:>10} cycles {:>10.4} s {:>14.0} cycles/s  af {af}",
        m.label, m.cycles, m.seconds, m.cycles_per_sec
    );
}

fn calibrate(ms: &[&Measurement]) -> serde_json::Value {
    let samples: Vec<Sample> = ms
        .iter()
        .filter_map(|m| {
            m.metrics.clone().map(|metrics| Sample {
                metrics,
                seconds: m.seconds,
            })
        })
        .collect();
    let Ok(cal) = Calibration::fit(&samples) else {
        return serde_json::Value::Null;
    };
    let models: Vec<_> = samples.iter().filter_map(|s| cal.model_for(&s.metrics).ok()).collect();
    let runs: Vec<serde_json::Value> = models
        .iter()
        .zip(&samples)
        .map(|(m, s)| {
            json!({ "E": m.e, "A_succ": m.a_succ, "A_exam": m.a_exam, "af": m.af, "N": m.n,
                    "predicted_T": m.predict_cycle_cost(),
                    "measured_T": s.seconds / s.metrics.cycles.max(1) as f64 })
        })
        .collect();
    let last = models.last();
    json!({
        "E": last.map(|m| m.e), "A_succ": last.map(|m| m.a_succ), "A_exam": last.map(|m| m.a_exam),
        "predicted_T": last.map(|m| m.predict_cycle_cost()),
        "calibration": cal,
        "runs": runs,
    })
}

fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let c = &a.common;
    let cfg = config(c);
    let (src, g) = load_design(c)?;
    let tb = testbench(c, &g)?;
    let fail = |e: actsim_core::pipeline::PipelineError| match e {
        actsim_core::pipeline::PipelineError::Testbench(TestbenchError::Expect(f)) => Failure::Expect(format!("FAIL: {f}")),
        e => Failure::Usage(e.to_string()),
    };
    let mut record = json!({ "config": &cfg });
    let mut all: Vec<Measurement> = Vec::new();
    if a.compare_engines {
        let cmp = compare_engines(&src, &tb, &cfg).map_err(fail)?;
        print_measurement(&cmp.optimized);
        print_measurement(&cmp.oracle);
        match &cmp.divergence {
            None => println!("traces: identical"),
            Some((cycle, sig)) => println!("traces: DIFFER at cycle {cycle} on {sig}"),
        }
        record["compare_engines"] = serde_json::to_value(&cmp).expect("serializable");
        if !cmp.traces_equal {
            return Err(Failure::Expect("engines disagree".into()));
        }
    }
    if !a.sweep_supernode_size.is_empty() {
        let pts = sweep_supernode_size(&src, &tb, &cfg, &a.sweep_supernode_size, a.repeats).map_err(fail)?;
        for p in &pts {
            print_measurement(&p.measurement);
        }
        let ms: Vec<&Measurement> = pts.iter().map(|p| &p.measurement).collect();
        let model = calibrate(&ms);
        if let Some(runs) = model["runs"].as_array() {
            let cal: Calibration = Calibration {
                per_eval: model["calibration"]["per_eval"].as_f64().unwrap_or(0.0),
                per_activation: model["calibration"]["per_activation"].as_f64().unwrap_or(0.0),
                per_examination: model["calibration"]["per_examination"].as_f64().unwrap_or(0.0),
            };
            let models: Vec<_> = ms.iter().filter_map(|m| m.metrics.as_ref().and_then(|x| cal.model_for(x).ok())).collect();
            let speeds: Vec<f64> = ms.iter().map(|m| m.cycles_per_sec).collect();
            if let (Some((p, m)), false) = (best_predicted_and_measured(&models, &speeds), runs.is_empty()) {
                println!(
                    "model best: max-size {}, measured best: max-size {}",
                    a.sweep_supernode_size[p], a.sweep_supernode_size[m]
                );
            }
        }
        record["sweep"] = serde_json::to_value(&pts).expect("serializable");
        record["model"] = model;
        all.extend(pts.into_iter().map(|p| p.measurement));
    }
    if !a.compare_engines && a.sweep_supernode_size.is_empty() {
        let stages = bench_breakdown(&src, &tb, &cfg, a.repeats).map_err(fail)?;
        let base = stages[0].cycles_per_sec;
        for s in &stages {
            print_measurement(s);
        }
        for s in &stages[1..] {
            println!("{:<16} log10 speedup over baseline {:+.3}", s.label, (s.cycles_per_sec / base).log10());
        }
        let ms: Vec<&Measurement> = stages.iter().collect();
        record["model"] = calibrate(&ms);
        record["breakdown"] = serde_json::to_value(&stages).expect("serializable");
        all.extend(stages);
    }
    if let Some(p) = &cfg.metrics {
        let last = all.iter().rev().find(|m| m.metrics.is_some());
        let mut v = metrics_json(
            last.and_then(|m| m.metrics.as_ref()),
            last.map_or(0, |m| m.cycles),
            &cfg,
            record["model"].clone(),
        );
        v["bench"] = record.clone();
        write_json(p, &v)?;
    }
    if let Some(p) = &cfg.report {
        write_json(p, &record)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Run(c) => run(c),
        Cmd::Bench(b) => bench(b),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Expect(msg)) => {
            println!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

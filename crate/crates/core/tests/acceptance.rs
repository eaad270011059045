// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its own PASS/FAIL line in the normal test output.

use actsim_core::corpus::{load_corpus, run_case, CorpusCase};
use actsim_core::expr::{eval_expr, Expr, ExprKind, NodeId, PrimOp};
use actsim_core::frontend::load_graph;
use actsim_core::graph::{NodeKind, RtlGraph, RtlNode};
use actsim_core::opt::{decide_inline, CostParams};
use actsim_core::oracle::random::{random_circuit, random_expr, random_stimulus, CircuitParams};
use actsim_core::oracle::Oracle;
use actsim_core::partition::{
    build_plan, contracted_is_acyclic, cut_size, kernighan_refine, pre_group, singleton_groups, FusionReason,
    KernighanParams, PartGraph, PartitionParams,
};
use actsim_core::pipeline::{build, build_graph, BuiltSim, PassToggles, PipelineConfig};
use actsim_core::engine::{compile_full, Engine};
use actsim_core::sim::Simulator;
use actsim_core::testbench::{run_testbench, Testbench};
use actsim_core::value::WideValue;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::SeedableRng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

type Check = Result<String, String>;
type Pokes = Vec<Vec<(String, WideValue)>>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn corpus_case(name: &str) -> CorpusCase {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    load_corpus(&root)
        .expect("corpus present")
        .into_iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("corpus case {name}"))
}

fn read(p: &std::path::Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// The case's testbench without `expect` lines, repeated until it covers at
/// least `min_cycles`. Used for timing only.
fn timing_bench(case: &CorpusCase, min_cycles: u64) -> Testbench {
    let body: String = read(&case.testbench)
        .lines()
        .filter(|l| !l.trim_start().starts_with("expect"))
        .map(|l| format!("{l}\n"))
        .collect();
    let once = Testbench::parse(&body).unwrap().cycles().max(1);
    let reps = min_cycles.div_ceil(once).max(1);
    Testbench::parse(&body.repeat(reps as usize)).unwrap()
}

fn engine_of(b: &BuiltSim) -> &Engine {
    b.engine().expect("optimized engine")
}

fn output_trace(sim: &mut dyn Simulator, stim: &Pokes) -> Vec<Vec<WideValue>> {
    let outs = sim.output_names();
    let mut trace = Vec::with_capacity(stim.len());
    for pokes in stim {
        for (n, v) in pokes {
            sim.poke(n, v).unwrap();
        }
        trace.push(outs.iter().map(|o| sim.peek(o).unwrap()).collect());
        sim.step();
    }
    trace
}

/// First cycle at which `sim` disagrees with `want`.
fn diverges(sim: &mut dyn Simulator, stim: &Pokes, want: &[Vec<WideValue>]) -> Option<usize> {
    let outs = sim.output_names();
    for (c, pokes) in stim.iter().enumerate() {
        for (n, v) in pokes {
            sim.poke(n, v).unwrap();
        }
        if outs.iter().zip(&want[c]).any(|(o, w)| sim.peek(o).unwrap() != *w) {
            return Some(c);
        }
        sim.step();
    }
    None
}

fn stimulus_for(src: &str, seed: u64, cycles: usize) -> Pokes {
    let g = load_graph(src).unwrap();
    let ports: Vec<(String, u32)> = g.inputs().map(|id| (g.node(id).name.clone(), g.node(id).width)).collect();
    let resets: Vec<String> = g.reset_inputs.iter().map(|&id| g.node(id).name.clone()).collect();
    random_stimulus(seed, &ports, &resets, cycles).cycles
}

fn oracle_trace(src: &str, stim: &Pokes) -> Vec<Vec<WideValue>> {
    let mut o = Oracle::new(load_graph(src).unwrap()).unwrap();
    output_trace(&mut o, stim)
}

fn differential_correctness() -> Check {
    const CIRCUITS: u64 = 500;
    const CYCLES: usize = 1000;
    let t = Instant::now();
    let mut configs: Vec<(String, PipelineConfig)> = vec![("all".into(), PipelineConfig::default())];
    for (name, p) in PassToggles::each_disabled() {
        configs.push((format!("no-{name}"), PipelineConfig::default().with_passes(p)));
    }
    configs.push(("no-opt".into(), PipelineConfig::default().baseline()));
    let mut failures = Vec::new();
    let mut runs = 0;
    for seed in 0..CIRCUITS {
        let src = random_circuit(seed, &CircuitParams::sampled(seed));
        let stim = stimulus_for(&src, seed ^ 0xd1ff, CYCLES);
        let want = oracle_trace(&src, &stim);
        let size = [35, 8, 2][seed as usize % 3];
        for (label, cfg) in &configs {
            let cfg = PipelineConfig {
                max_supernode_size: size,
                ..cfg.clone()
            };
            let mut b = build(&src, &cfg).unwrap_or_else(|e| panic!("seed {seed} {label}: {e}"));
            if let Some(c) = diverges(b.sim.sim(), &stim, &want) {
                failures.push(format!("seed {seed} {label} size {size} at cycle {c}"));
            }
            runs += 1;
        }
    }
    let elapsed = t.elapsed();
    let detail = format!(
        "{CIRCUITS} circuits x {CYCLES} cycles x {} configs = {runs} runs, {} mismatches, {:.0}s",
        configs.len(),
        failures.len(),
        elapsed.as_secs_f64()
    );
    if !failures.is_empty() {
        return Err(format!("{detail}; first: {}", failures[0]));
    }
    ensure(elapsed < Duration::from_secs(600), detail)
}

fn final_outputs(sim: &mut dyn Simulator) -> Vec<WideValue> {
    sim.output_names().iter().map(|o| sim.peek(o).unwrap()).collect()
}

fn activity_speedup() -> Check {
    let case = corpus_case("gated_counters");
    let src = read(&case.design);
    let tb = Testbench::parse("reset 1\npoke en 1\nstep 1000000\n").unwrap();
    let run = |cfg: &PipelineConfig, repeats: usize| {
        let mut best = 0.0f64;
        let mut outs = Vec::new();
        for _ in 0..repeats {
            let mut b = build(&src, cfg).unwrap();
            let r = run_testbench(b.sim.sim(), &tb, None).unwrap();
            best = best.max(r.cycles_per_sec());
            outs = final_outputs(b.sim.sim());
        }
        (best, outs)
    };
    let (fast, a) = run(&PipelineConfig::default(), 3);
    let (slow, b) = run(&PipelineConfig::default().baseline(), 2);
    let ratio = fast / slow;
    let detail = format!(
        "{} cycles: optimized {:.0} cycles/s, no-opt {:.0} cycles/s, speedup {ratio:.1}x",
        tb.cycles(),
        fast,
        slow
    );
    if a != b {
        return Err(format!("{detail}; final outputs differ"));
    }
    ensure(ratio >= 3.0 && tb.cycles() >= 1_000_000, detail)
}

fn size_sweep_shape() -> Check {
    const SIZES: [usize; 7] = [2, 5, 10, 20, 35, 50, 200];
    const ROUNDS: usize = 5;
    let mut interior = 0;
    let mut parts = Vec::new();
    for name in ["pipeline_core", "alu", "channel_mixer"] {
        let case = corpus_case(name);
        let src = read(&case.design);
        let tb = timing_bench(&case, 200_000);
        let mut best = [0.0f64; SIZES.len()];
        // interleave sizes so slow drift hits all of them alike
        for _ in 0..ROUNDS {
            for (i, &s) in SIZES.iter().enumerate() {
                let cfg = PipelineConfig {
                    max_supernode_size: s,
                    ..Default::default()
                };
                let mut b = build(&src, &cfg).unwrap();
                let r = run_testbench(b.sim.sim(), &tb, None).unwrap();
                best[i] = best[i].max(r.cycles_per_sec());
            }
        }
        let top = (0..SIZES.len()).max_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        let is_interior = top != 0 && top != SIZES.len() - 1;
        interior += is_interior as usize;
        let curve: Vec<String> = SIZES
            .iter()
            .zip(&best)
            .map(|(s, v)| format!("{s}:{:.2}M", v / 1e6))
            .collect();
        parts.push(format!(
            "{name} best {} ({})",
            SIZES[top],
            curve.join(" ")
        ));
    }
    ensure(interior >= 2, format!("interior maximum on {interior}/3; {}", parts.join("; ")))
}

fn reset_slow_path() -> Check {
    let case = corpus_case("reset_bank");
    let src = read(&case.design);
    let g = load_graph(&src).unwrap();
    let with_reset = g.ids().filter(|&id| g.node(id).reset.is_some()).count();
    let signals: std::collections::BTreeSet<NodeId> =
        g.ids().filter_map(|id| g.node(id).reset.as_ref().map(|r| r.signal)).collect();
    let mut b = build(&src, &PipelineConfig::default()).unwrap();
    run_testbench(b.sim.sim(), &Testbench::parse(&read(&case.testbench)).unwrap(), None).unwrap();
    let before = engine_of(&b.sim).metrics().reset_checks;
    const STEADY: u64 = 1000;
    let sim = b.sim.sim();
    sim.poke("reset", &WideValue::from_u64(0, 1)).unwrap();
    for c in 0..STEADY {
        sim.poke("en", &WideValue::from_u64((c % 3) & 1, 1)).unwrap();
        sim.step();
    }
    let e = engine_of(&b.sim);
    let per_cycle = (e.metrics().reset_checks - before) as f64 / STEADY as f64;
    let groups = e.program().graph.reset_groups.len();
    ensure(
        with_reset == 100 && signals.len() == 1 && per_cycle == 1.0,
        format!(
            "{with_reset} reset registers on {} signal(s), {groups} reset group(s), {per_cycle} reset checks/cycle",
            signals.len()
        ),
    )
}

fn one_hot_rewrite() -> Check {
    let case = corpus_case("onehot_arbiter");
    let src = read(&case.design);
    let b = build(&src, &PipelineConfig::default()).unwrap();
    let rewrites: Vec<_> = b
        .report
        .node_opt
        .as_ref()
        .map(|n| n.simplify.iter().flat_map(|s| s.one_hot.clone()).collect())
        .unwrap_or_default();
    let all_cheaper = rewrites.iter().all(|r| r.cost_after < r.cost_before);
    let r = run_case(&case, &PipelineConfig::default(), false);
    let detail = format!(
        "{} rewrite(s), all strictly cheaper: {all_cheaper}, oracle lockstep over {} cycles: {}",
        rewrites.len(),
        r.cycles,
        if r.passed { "equal" } else { r.failure.as_deref().unwrap_or("failed") }
    );
    ensure(!rewrites.is_empty() && all_cheaper && r.passed, detail)
}

/// Evaluations of the node driving `output` accumulated from cycle 2 on.
fn late_evaluations(src: &str, bit_split: bool, setup: &str, output: &str, cycles: u64) -> u64 {
    let cfg = PipelineConfig::default().with_passes(PassToggles::all().with("bit-split", bit_split).unwrap());
    let mut b = build(src, &cfg).unwrap();
    run_testbench(b.sim.sim(), &Testbench::parse(setup).unwrap(), None).unwrap();
    let id = engine_of(&b.sim).program().graph.find(output).expect("output survives optimization");
    let before = engine_of(&b.sim).node_evaluations(id).unwrap();
    for _ in 0..cycles {
        b.sim.sim().step();
    }
    engine_of(&b.sim).node_evaluations(id).unwrap() - before
}

fn bit_split_activation() -> Check {
    let case = corpus_case("status_word");
    let src = read(&case.design);
    // b and c keep their initial value, so only the tick field moves
    let quiet = "poke reset 0\npoke set 0\nstep 1\n";
    // the corpus setup loads b and c first; the low field is final by cycle 3
    let loaded = "reset 1\npoke set 1\npoke mode 9\npoke code 7\nstep 1\npoke set 0\nstep 2\n";
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, setup) in [("idle fields", quiet), ("loaded fields", loaded)] {
        let on = late_evaluations(&src, true, setup, "code_parity", 500);
        let off = late_evaluations(&src, false, setup, "code_parity", 500);
        ok &= on == 0 && off > 0;
        parts.push(format!("{label}: split {on}, unsplit {off}"));
    }
    ensure(ok, format!("code_parity evaluations over 500 later cycles; {}", parts.join("; ")))
}

/// Two 4-cliques (edges from lower to higher index inside each) joined by
/// one bridge; members interleave so index order is the worst packing.
fn cliques() -> PartGraph {
    let a = [0, 2, 4, 6];
    let b = [1, 3, 5, 7];
    let mut edges = Vec::new();
    for c in [a, b] {
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((c[i], c[j]));
            }
        }
    }
    edges.push((6, 7));
    PartGraph::new(8, &edges)
}

/// Minimum cut over every set partition into blocks of at most `cap` nodes
/// whose contracted graph is acyclic.
fn brute_force_min_cut(pg: &PartGraph, cap: usize) -> (usize, usize) {
    fn rec(pg: &PartGraph, cap: usize, i: usize, a: &mut Vec<usize>, sizes: &mut Vec<usize>, best: &mut (usize, usize)) {
        if i == pg.len() {
            best.1 += 1;
            if contracted_is_acyclic(pg, a, sizes.len()) {
                best.0 = best.0.min(cut_size(pg, a));
            }
            return;
        }
        for k in 0..=sizes.len() {
            if k == sizes.len() {
                sizes.push(0);
            }
            if sizes[k] < cap {
                sizes[k] += 1;
                a[i] = k;
                rec(pg, cap, i + 1, a, sizes, best);
                sizes[k] -= 1;
            }
            if sizes[k] == 0 {
                sizes.pop();
            }
        }
    }
    let mut best = (usize::MAX, 0);
    rec(pg, cap, 0, &mut vec![0; pg.len()], &mut Vec::new(), &mut best);
    best
}

fn partition_quality() -> Check {
    let pg = cliques();
    let (optimum, enumerated) = brute_force_min_cut(&pg, 4);
    let init = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let start = cut_size(&pg, &init);
    let p = KernighanParams {
        max_size: 4,
        max_passes: 10,
    };
    let (a, _) = kernighan_refine(&pg, &singleton_groups(8), init, &p);
    let refined = cut_size(&pg, &a);
    let (plan, report) = build_plan(
        &pg,
        &PartitionParams {
            max_size: 4,
            pre_group: false,
            ..Default::default()
        },
    );
    let valid = plan.validate(&pg, 4).is_ok();
    ensure(
        optimum == 1 && refined == optimum && report.cut == optimum && valid,
        format!(
            "brute force over {enumerated} partitions: optimum {optimum}; refine from cut {start} reaches {refined}; planner without pre-grouping reaches {}",
            report.cut
        ),
    )
}

fn pre_group_protection() -> Check {
    // nodes 0..3 form a dense cluster; 3 -> 4 is 3's only out-edge
    let edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (5, 6)];
    let pg = PartGraph::new(7, &edges);
    let fused = pre_group(&pg, 4)
        .into_iter()
        .find(|g| g.members.contains(&3) && g.members.contains(&4));
    let reason = fused.as_ref().and_then(|g| g.reason);
    let with = PartitionParams {
        max_size: 4,
        ..Default::default()
    };
    let without = PartitionParams {
        pre_group: false,
        ..with
    };
    let (grouped, _) = build_plan(&pg, &with);
    let (plain, _) = build_plan(&pg, &without);
    let together = grouped.assignment[3] == grouped.assignment[4];
    let separated = plain.assignment[3] != plain.assignment[4];
    ensure(
        reason == Some(FusionReason::OutDegreeOne) && together && separated,
        format!(
            "fusion reason {reason:?}; with pre-grouping same supernode: {together}; plain refinement separates them: {separated}"
        ),
    )
}

/// A 64-bit node `s` whose expression has `ops` operators, read by `fanout`
/// outputs.
fn inline_graph(ops: usize, fanout: usize) -> String {
    let mut e = "xor(a, b)".to_string();
    for i in 1..ops {
        e = if i % 2 == 1 { format!("and({e}, b)") } else { format!("or({e}, a)") };
    }
    let mut s = String::from("circuit T :\n  module T :\n    input a : UInt<64>\n    input b : UInt<64>\n");
    for i in 0..fanout {
        s += &format!("    output o{i} : UInt<64>\n");
    }
    s += &format!("    node s = {e}\n");
    for i in 0..fanout {
        s += &format!("    o{i} <= xor(s, a)\n");
    }
    s
}

fn inline_cost_model() -> Check {
    let (mut kept, mut inlined, mut wrong) = (0, 0, Vec::new());
    for cost_node in [1u64, 2, 4, 8] {
        let params = CostParams {
            cost_node,
            ..Default::default()
        };
        for ops in 1..=6u64 {
            for fanout in 1..=6u64 {
                let repeated = ops * fanout;
                let shared = ops + cost_node;
                if repeated == shared {
                    continue;
                }
                let mut g = load_graph(&inline_graph(ops as usize, fanout as usize)).unwrap();
                let r = decide_inline(&mut g, &params);
                let was_kept = g.find("s").is_some() && !r.inlined.contains(&"s".to_string());
                if was_kept != (repeated > shared) {
                    wrong.push(format!("cost_node {cost_node} ops {ops} fanout {fanout}"));
                }
                if repeated > shared {
                    kept += 1;
                } else {
                    inlined += 1;
                }
            }
        }
    }
    // sensitivity: every cost_node stays equivalent to the oracle
    let mut mismatches = Vec::new();
    let mut sources: Vec<(String, String)> = (1000..1040u64)
        .map(|s| (format!("seed {s}"), random_circuit(s, &CircuitParams::sampled(s))))
        .collect();
    for name in ["alu", "onehot_arbiter", "pipeline_core"] {
        sources.push((name.to_string(), read(&corpus_case(name).design)));
    }
    for (i, (label, src)) in sources.iter().enumerate() {
        let stim = stimulus_for(src, i as u64, 600);
        let want = oracle_trace(src, &stim);
        for cost_node in [1u64, 2, 4, 8] {
            let mut cfg = PipelineConfig::default();
            cfg.cost.cost_node = cost_node;
            let mut b = build(src, &cfg).unwrap();
            if let Some(c) = diverges(b.sim.sim(), &stim, &want) {
                mismatches.push(format!("{label} cost_node {cost_node} at cycle {c}"));
            }
        }
    }
    let detail = format!(
        "{kept} keep and {inlined} inline cases, {} wrong decisions; cost_node sweep over {} designs: {} mismatches",
        wrong.len(),
        sources.len(),
        mismatches.len()
    );
    if let Some(w) = wrong.first().or(mismatches.first()) {
        return Err(format!("{detail}; first: {w}"));
    }
    ensure(kept > 0 && inlined > 0, detail)
}

fn pattern(v: &WideValue) -> BigInt {
    let mut x = BigUint::zero();
    for &w in v.words().iter().rev() {
        x = (x << 64u32) | BigUint::from(w);
    }
    BigInt::from(x)
}

/// Reduces `x` into the range of a `width`-bit integer.
fn wrap(x: &BigInt, width: u32, signed: bool) -> BigInt {
    let m = BigInt::one() << width;
    let mut r = ((x % &m) + &m) % &m;
    if signed && r >= (&m >> 1u32) {
        r -= &m;
    }
    r
}

fn numeric(v: &WideValue, signed: bool) -> BigInt {
    wrap(&pattern(v), v.width(), signed)
}

fn floor_shr(x: &BigInt, n: u64) -> BigInt {
    let d = BigInt::one() << n;
    if x.sign() == num_bigint::Sign::Minus {
        let up: BigInt = -x + &d - 1;
        -(up / &d)
    } else {
        x / &d
    }
}

/// Value of `e` as a mathematical integer, computed independently of the
/// word-array arithmetic.
fn big_eval(e: &Expr, leaves: &[WideValue]) -> BigInt {
    use PrimOp::*;
    let (args, op) = match &e.kind {
        ExprKind::Const(v) => return numeric(v, e.signed),
        ExprKind::Ref(id) => return numeric(&leaves[id.index()], e.signed),
        ExprKind::Prim(op, args) => (args, *op),
    };
    let x: Vec<BigInt> = args.iter().map(|a| big_eval(a, leaves)).collect();
    let bits = |i: usize, w: u32| wrap(&x[i], w, false);
    let w0 = args[0].width;
    let b = |v: bool| BigInt::from(v as u8);
    let r = match op {
        Add => &x[0] + &x[1],
        Sub => &x[0] - &x[1],
        Mul => &x[0] * &x[1],
        Div if x[1].is_zero() => BigInt::zero(),
        Div => &x[0] / &x[1],
        Rem if x[1].is_zero() => BigInt::zero(),
        Rem => &x[0] % &x[1],
        Lt => b(x[0] < x[1]),
        Leq => b(x[0] <= x[1]),
        Gt => b(x[0] > x[1]),
        Geq => b(x[0] >= x[1]),
        Eq => b(x[0] == x[1]),
        Neq => b(x[0] != x[1]),
        And => bits(0, e.width) & bits(1, e.width),
        Or => bits(0, e.width) | bits(1, e.width),
        Xor => bits(0, e.width) ^ bits(1, e.width),
        Not => ((BigInt::one() << w0) - 1) - bits(0, w0),
        Andr => b(bits(0, w0) == (BigInt::one() << w0) - 1),
        Orr => b(!bits(0, w0).is_zero()),
        Xorr => b(bits(0, w0).to_biguint().unwrap().count_ones() % 2 == 1),
        Neg => -&x[0],
        Shl(n) => &x[0] << n,
        Shr(n) => floor_shr(&x[0], n as u64),
        Dshl => {
            let amt: u32 = bits(1, args[1].width).try_into().unwrap();
            &x[0] << amt
        }
        Dshr => {
            let amt: u64 = bits(1, args[1].width).try_into().unwrap();
            floor_shr(&x[0], amt)
        }
        Cat => (bits(0, w0) << args[1].width) | bits(1, args[1].width),
        Bits(_, lo) => bits(0, w0) >> lo,
        Pad(_) | Cvt => x[0].clone(),
        Mux => {
            if x[0].is_zero() {
                x[2].clone()
            } else {
                x[1].clone()
            }
        }
        AsUInt | AsSInt => bits(0, w0),
    };
    wrap(&r, e.width, e.signed)
}

fn collect_refs(e: &Expr, out: &mut Vec<(NodeId, u32, bool)>) {
    match &e.kind {
        ExprKind::Ref(id) => out.push((*id, e.width, e.signed)),
        ExprKind::Const(_) => {}
        ExprKind::Prim(_, args) => args.iter().for_each(|a| collect_refs(a, out)),
    }
}

/// A graph whose inputs are the leaves of `e` and whose single output is `e`.
fn expr_graph(e: &Expr, leaves: &[WideValue]) -> RtlGraph {
    let mut refs = Vec::new();
    collect_refs(e, &mut refs);
    refs.sort_by_key(|r| r.0);
    let mut g = RtlGraph::new("E");
    for (i, v) in leaves.iter().enumerate() {
        let signed = refs.iter().find(|r| r.0.index() == i).is_some_and(|r| r.2);
        g.add_node(RtlNode {
            name: format!("in{i}"),
            kind: NodeKind::Input,
            width: v.width(),
            signed,
            expr: None,
            reset: None,
            partner: None,
        });
    }
    g.add_node(RtlNode {
        name: "out".into(),
        kind: NodeKind::Output,
        width: e.width,
        signed: e.signed,
        expr: Some(e.clone()),
        reset: None,
        partner: None,
    });
    g
}

fn expression_semantics() -> Check {
    const EXPRS: usize = 10_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5e3a);
    let mut max_seen = 0;
    let mut bad = Vec::new();
    for i in 0..EXPRS {
        let (e, leaves) = random_expr(&mut rng, 130, 4);
        max_seen = max_seen.max(e.width);
        let want = big_eval(&e, &leaves);
        let generic = eval_expr(&e, &|id| leaves[id.index()].clone());
        let mut results = vec![("generic", generic)];
        let g = expr_graph(&e, &leaves);
        let mut sims: Vec<(&str, Box<dyn Simulator>)> = vec![
            ("full", Box::new(Engine::new(compile_full(g.clone()).unwrap()))),
            (
                "optimized",
                match build_graph(g, &PipelineConfig::default()).unwrap().sim {
                    BuiltSim::Engine(e) => e,
                    BuiltSim::Oracle(o) => o,
                },
            ),
        ];
        for (label, sim) in &mut sims {
            for (k, v) in leaves.iter().enumerate() {
                sim.poke(&format!("in{k}"), v).unwrap();
            }
            results.push((label, sim.peek("out").unwrap()));
        }
        for (label, got) in results {
            if got.width() != e.width || numeric(&got, e.signed) != want {
                bad.push(format!("#{i} {label}: {} (width {}, signed {}) gave {got} at width {}, want {want}", e.to_sexpr(), e.width, e.signed, got.width()));
            }
        }
    }
    let detail = format!(
        "{EXPRS} expressions (leaf widths 1-130, results up to {max_seen} bits) x 3 evaluators: {} mismatches",
        bad.len()
    );
    match bad.first() {
        Some(b) => Err(format!("{detail}; first: {b}")),
        None => Ok(detail),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("differential correctness", differential_correctness),
        ("activity-skipping speedup", activity_speedup),
        ("supernode size sweep shape", size_sweep_shape),
        ("reset slow path", reset_slow_path),
        ("one-hot rewrite", one_hot_rewrite),
        ("bit-split activation elimination", bit_split_activation),
        ("partition quality", partition_quality),
        ("pre-group protection", pre_group_protection),
        ("inline cost model", inline_cost_model),
        ("expression semantics", expression_semantics),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

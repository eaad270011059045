// SPDX-License-Identifier: Apache-2.0

use actsim_core::corpus::{digest_trace, format_table, load_corpus, run_case, CorpusCase};
use actsim_core::pipeline::{build, EngineKind, PassToggles, PipelineConfig};
use actsim_core::testbench::Testbench;
use rayon::prelude::*;
use std::path::PathBuf;

fn corpus() -> Vec<CorpusCase> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    load_corpus(&root).expect("corpus present")
}

fn case(name: &str) -> CorpusCase {
    corpus().into_iter().find(|c| c.name == name).expect("case exists")
}

#[test]
fn every_case_passes_on_both_engines() {
    let cases = corpus();
    assert!(cases.len() >= 9, "{} cases", cases.len());
    let cfg = PipelineConfig::default();
    let results: Vec<_> = cases.par_iter().map(|c| run_case(c, &cfg, true)).collect();
    println!("{}", format_table(&results));
    for r in &results {
        assert!(r.passed, "{}: {}", r.name, r.failure.as_deref().unwrap_or(""));
        assert!(r.expects > 0, "{} checks nothing", r.name);
    }
}

#[test]
fn low_activity_design_stays_below_bound() {
    let r = run_case(&case("gated_counters"), &PipelineConfig::default(), true);
    assert!(r.passed, "{:?}", r.failure);
    let af = r.metrics.unwrap().af_mean;
    assert!(af < 0.05, "af {af}");
}

#[test]
fn arbiter_fires_one_hot_rewrite() {
    let c = case("onehot_arbiter");
    let src = std::fs::read_to_string(&c.design).unwrap();
    let b = build(&src, &PipelineConfig::default()).unwrap();
    let rewrites: Vec<_> = b.report.node_opt.as_ref().unwrap().simplify.iter().flat_map(|s| &s.one_hot).collect();
    assert!(!rewrites.is_empty());
    for r in rewrites {
        assert!(r.cost_after < r.cost_before, "{r:?}");
    }
}

/// Every pass configuration matches the oracle's per-cycle output digests.
#[test]
fn every_pass_configuration_matches_oracle() {
    let cases = corpus();
    let mut configs = vec![("all", PassToggles::all()), ("none", PassToggles::none())];
    configs.extend(PassToggles::each_disabled());
    cases.par_iter().for_each(|c| {
        let src = std::fs::read_to_string(&c.design).unwrap();
        let tb = Testbench::parse(&std::fs::read_to_string(&c.testbench).unwrap()).unwrap();
        let oracle_cfg = PipelineConfig {
            engine: EngineKind::Oracle,
            ..Default::default()
        };
        let mut o = build(&src, &oracle_cfg).unwrap();
        let (_, want) = digest_trace(o.sim.sim(), &tb).unwrap();
        configs.par_iter().for_each(|(label, passes)| {
            for no_opt in [false, true] {
                if no_opt && *label != "none" {
                    continue;
                }
                let cfg = PipelineConfig {
                    passes: *passes,
                    no_opt,
                    ..Default::default()
                };
                let mut b = build(&src, &cfg).unwrap();
                let (_, got) = digest_trace(b.sim.sim(), &tb).unwrap_or_else(|e| panic!("{} {label}: {e}", c.name));
                let first = want.iter().zip(&got).position(|(x, y)| x != y);
                assert_eq!(first, None, "{} with {label} (no-opt {no_opt}) diverges at cycle {first:?}", c.name);
                assert_eq!(want.len(), got.len());
            }
        });
    });
}

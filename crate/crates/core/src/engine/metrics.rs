// SPDX-License-Identifier: Apache-2.0

//! Counters kept while stepping, and the summary written by `--metrics`.

use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricCounters {
    pub cycles: u64,
    /// Node evaluations, summed over all cycles.
    pub evaluated_nodes: u64,
    /// Active-bit set operations issued by changed producers.
    pub activations: u64,
    /// Active-word tests during sweeps.
    pub examinations: u64,
    /// Reset-group signal tests on the slow path.
    pub reset_checks: u64,
    /// `active_histogram[k]` counts cycles that evaluated exactly `k` nodes.
    pub active_histogram: Vec<u64>,
    /// Times each supernode's block ran.
    pub supernode_evals: Vec<u64>,
}

impl MetricCounters {
    pub(crate) fn new(nodes: usize, supernodes: usize) -> Self {
        Self {
            active_histogram: vec![0; nodes + 1],
            supernode_evals: vec![0; supernodes],
            ..Default::default()
        }
    }

    pub(crate) fn end_cycle(&mut self, evaluated: u64) {
        self.cycles += 1;
        let k = (evaluated as usize).min(self.active_histogram.len() - 1);
        self.active_histogram[k] += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub cycles: u64,
    /// Mean fraction of evaluated nodes per cycle.
    pub af_mean: f64,
    pub evaluated_nodes: u64,
    pub activations: u64,
    pub examinations: u64,
    pub supernodes: usize,
    pub node_count: usize,
}

impl MetricsReport {
    pub fn from_counters(m: &MetricCounters, node_count: usize) -> Self {
        let denom = m.cycles as f64 * node_count as f64;
        Self {
            cycles: m.cycles,
            af_mean: if denom > 0.0 {
                (m.evaluated_nodes as f64 / denom).min(1.0)
            } else {
                0.0
            },
            evaluated_nodes: m.evaluated_nodes,
            activations: m.activations,
            examinations: m.examinations,
            supernodes: m.supernode_evals.len(),
            node_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn af_is_a_fraction() {
        let mut m = MetricCounters::new(10, 2);
        m.evaluated_nodes = 15;
        m.end_cycle(10);
        m.end_cycle(5);
        let r = MetricsReport::from_counters(&m, 10);
        assert_eq!(r.af_mean, 0.75);
        assert_eq!(m.active_histogram[10], 1);
        assert_eq!(MetricsReport::from_counters(&MetricCounters::default(), 0).af_mean, 0.0);
    }
}

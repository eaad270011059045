// SPDX-License-Identifier: Apache-2.0

//! Analytical per-cycle cost model `T = ((E + A_succ) * af + A_exam) * N`,
//! with weights fitted to measured runs.

use crate::engine::MetricsReport;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverheadModel {
    /// Cost of evaluating one node.
    pub e: f64,
    /// Activation cost per evaluated node.
    pub a_succ: f64,
    /// Examination cost per node.
    pub a_exam: f64,
    pub af: f64,
    pub n: f64,
}

impl OverheadModel {
    pub fn predict_cycle_cost(&self) -> f64 {
        ((self.e + self.a_succ) * self.af + self.a_exam) * self.n
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("calibration needs at least {need} runs, got {got}")]
    TooFewRuns { need: usize, got: usize },
    #[error("run has no cycles")]
    NoCycles,
}

/// One measured run: counters and the wall time of its step loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub metrics: MetricsReport,
    pub seconds: f64,
}

impl Sample {
    fn per_cycle(&self) -> Result<[f64; 3], ModelError> {
        let c = self.metrics.cycles as f64;
        if c == 0.0 {
            return Err(ModelError::NoCycles);
        }
        Ok([
            self.metrics.evaluated_nodes as f64 / c,
            self.metrics.activations as f64 / c,
            self.metrics.examinations as f64 / c,
        ])
    }
}

/// Fitted cost per event, in seconds: one node evaluation, one activation
/// and one active-word examination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub per_eval: f64,
    pub per_activation: f64,
    pub per_examination: f64,
}

pub const MIN_CALIBRATION_RUNS: usize = 3;

impl Calibration {
    /// Non-negative least squares over the runs' per-cycle event counts.
    pub fn fit(samples: &[Sample]) -> Result<Self, ModelError> {
        if samples.len() < MIN_CALIBRATION_RUNS {
            return Err(ModelError::TooFewRuns {
                need: MIN_CALIBRATION_RUNS,
                got: samples.len(),
            });
        }
        let rows: Vec<[f64; 3]> = samples.iter().map(Sample::per_cycle).collect::<Result<_, _>>()?;
        let t: Vec<f64> = samples
            .iter()
            .map(|s| s.seconds / s.metrics.cycles as f64)
            .collect();
        let mut active = [true; 3];
        loop {
            let cols: Vec<usize> = (0..3).filter(|&j| active[j]).collect();
            if cols.is_empty() {
                return Ok(Self::from_weights([0.0; 3]));
            }
            let a = DMatrix::from_fn(rows.len(), cols.len(), |i, k| rows[i][cols[k]]);
            let b = DVector::from_vec(t.clone());
            let x = a
                .svd(true, true)
                .solve(&b, 1e-18)
                .unwrap_or_else(|_| DVector::zeros(cols.len()));
            let mut w = [0.0; 3];
            for (k, &j) in cols.iter().enumerate() {
                w[j] = x[k];
            }
            match cols.iter().copied().filter(|&j| w[j] < 0.0).min_by(|&p, &q| w[p].total_cmp(&w[q])) {
                Some(j) => active[j] = false,
                None => return Ok(Self::from_weights(w)),
            }
        }
    }

    fn from_weights(w: [f64; 3]) -> Self {
        Self {
            per_eval: w[0],
            per_activation: w[1],
            per_examination: w[2],
        }
    }

    /// The model for one run. Its prediction equals this calibration's
    /// fitted per-cycle time for that run's counters.
    pub fn model_for(&self, m: &MetricsReport) -> Result<OverheadModel, ModelError> {
        if m.cycles == 0 {
            return Err(ModelError::NoCycles);
        }
        let c = m.cycles as f64;
        let n = m.node_count.max(1) as f64;
        let evals = m.evaluated_nodes as f64 / c;
        let acts_per_eval = if evals > 0.0 {
            m.activations as f64 / c / evals
        } else {
            0.0
        };
        Ok(OverheadModel {
            e: self.per_eval,
            a_succ: self.per_activation * acts_per_eval,
            a_exam: self.per_examination * (m.examinations as f64 / c) / n,
            af: evals / n,
            n,
        })
    }
}

/// Position of the smallest predicted cost and of the largest measured
/// throughput, for checking whether the model ranks configurations right.
pub fn best_predicted_and_measured(models: &[OverheadModel], cycles_per_sec: &[f64]) -> Option<(usize, usize)> {
    let p = (0..models.len()).min_by(|&a, &b| models[a].predict_cycle_cost().total_cmp(&models[b].predict_cycle_cost()))?;
    let m = (0..cycles_per_sec.len()).max_by(|&a, &b| cycles_per_sec[a].total_cmp(&cycles_per_sec[b]))?;
    Some((p, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(cycles: u64, evals: u64, acts: u64, exams: u64, n: usize) -> MetricsReport {
        MetricsReport {
            cycles,
            af_mean: evals as f64 / (cycles as f64 * n as f64),
            evaluated_nodes: evals,
            activations: acts,
            examinations: exams,
            supernodes: 1,
            node_count: n,
        }
    }

    fn model(af: f64) -> OverheadModel {
        OverheadModel {
            e: 3.0,
            a_succ: 2.0,
            a_exam: 0.5,
            af,
            n: 100.0,
        }
    }

    #[test]
    fn formula_endpoints() {
        assert_eq!(model(0.0).predict_cycle_cost(), 0.5 * 100.0);
        assert_eq!(model(1.0).predict_cycle_cost(), (3.0 + 2.0 + 0.5) * 100.0);
        assert!(model(0.25).predict_cycle_cost() < model(0.5).predict_cycle_cost());
    }

    #[test]
    fn recovers_planted_weights() {
        let (we, wa, wx) = (4e-9, 1e-9, 5e-10);
        let runs = [(1000, 50_000, 20_000, 3_000), (1000, 10_000, 30_000, 9_000), (1000, 70_000, 5_000, 1_000)];
        let samples: Vec<Sample> = runs
            .iter()
            .map(|&(c, e, a, x)| Sample {
                metrics: report(c, e, a, x, 100),
                seconds: we * e as f64 + wa * a as f64 + wx * x as f64,
            })
            .collect();
        let cal = Calibration::fit(&samples).unwrap();
        assert!((cal.per_eval - we).abs() < 1e-15);
        assert!((cal.per_activation - wa).abs() < 1e-15);
        assert!((cal.per_examination - wx).abs() < 1e-15);
        for s in &samples {
            let m = cal.model_for(&s.metrics).unwrap();
            let want = s.seconds / s.metrics.cycles as f64;
            assert!((m.predict_cycle_cost() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_are_never_negative() {
        let samples = vec![
            Sample {
                metrics: report(10, 100, 10, 10, 10),
                seconds: 1.0,
            },
            Sample {
                metrics: report(10, 200, 10, 10, 10),
                seconds: 0.5,
            },
            Sample {
                metrics: report(10, 300, 10, 10, 10),
                seconds: 0.25,
            },
        ];
        let cal = Calibration::fit(&samples).unwrap();
        assert!(cal.per_eval >= 0.0 && cal.per_activation >= 0.0 && cal.per_examination >= 0.0);
    }

    #[test]
    fn uncalibrated_is_an_error() {
        assert_eq!(Calibration::fit(&[]), Err(ModelError::TooFewRuns { need: 3, got: 0 }));
    }
}

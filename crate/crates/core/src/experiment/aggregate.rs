//! Mean and Student-t 95% interval of each metric across seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::runner::RunRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub step: u64,
    pub metric: String,
    /// Seeds that logged this metric at this step.
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Half-width of the two-sided 95% t-interval of `values`.
pub fn t_half_width(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("n >= 2 gives a valid distribution")
        .inverse_cdf(0.975);
    t * (var / n).sqrt()
}

/// One row per `(metric, step)` logged by at least two seeds, sorted by
/// metric then step. Order of `records` does not matter.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    if records.len() < 2 {
        return Err(Error::invalid(format!(
            "aggregation needs at least 2 records, got {}",
            records.len()
        )));
    }
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    let mut groups: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    for r in sorted {
        for m in &r.metrics {
            groups
                .entry((r.task.clone(), m.metric.clone(), m.step))
                .or_default()
                .push(m.value);
        }
    }
    Ok(groups
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|((task, metric, step), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = t_half_width(&values);
            SummaryRow {
                task,
                step,
                metric,
                n,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::presets;
    use crate::experiment::runner::{MetricPoint, RunStatus};

    fn record(seed: u64, values: &[(u64, f64)]) -> RunRecord {
        RunRecord {
            task: "adding".into(),
            seed,
            config: presets::adding(10),
            resolved_k: vec![],
            parameter_count: 0,
            metrics: values
                .iter()
                .map(|&(step, value)| MetricPoint {
                    step,
                    metric: "running_mse".into(),
                    value,
                })
                .collect(),
            status: RunStatus::Completed,
            wall_clock_secs: 0.0,
        }
    }

    #[test]
    fn two_point_interval() {
        let rows = aggregate(&[record(0, &[(1, 0.0)]), record(1, &[(1, 2.0)])]).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.mean, 1.0);
        let half = r.ci_high - r.mean;
        assert!((half - 12.706_204_736).abs() < 1e-6, "{half}");
        assert!((r.mean - r.ci_low - half).abs() < 1e-12);
    }

    #[test]
    fn identical_records_zero_width() {
        let rows = aggregate(&[record(0, &[(1, 0.3), (2, 0.1)]), record(1, &[(1, 0.3), (2, 0.1)])]).unwrap();
        assert!(rows.iter().all(|r| r.ci_low == r.mean && r.ci_high == r.mean));
    }

    #[test]
    fn order_invariant() {
        let a = record(0, &[(1, 0.1)]);
        let b = record(1, &[(1, 0.4)]);
        let c = record(2, &[(1, 0.9)]);
        assert_eq!(
            aggregate(&[a.clone(), b.clone(), c.clone()]).unwrap(),
            aggregate(&[c, a, b]).unwrap()
        );
    }

    #[test]
    fn needs_two() {
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[record(0, &[(1, 0.0)])]).is_err());
    }

    #[test]
    fn single_seed_points_are_skipped() {
        let rows = aggregate(&[record(0, &[(1, 0.0), (2, 1.0)]), record(1, &[(1, 0.0)])]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].step, 1);
    }
}

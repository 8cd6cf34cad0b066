//! L2 summaries, per-strategy statistics and CMI-vs-SIAA rank tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Pooling;
use crate::experiment::{RunRecord, StrategyPoint};
use crate::stats::{describe, mann_whitney_u, Descriptive, Verdict};
use crate::HarnessError;

/// Normalized L2 of (task failures, makespan, cost) per point.
///
/// Each component is min–max scaled over all points (a constant component
/// scales to 0) and the norm is divided by sqrt(3), so results lie in [0, 1].
pub fn l2_summary(points: &[[f64; 3]]) -> Result<Vec<f64>, usize> {
    if points.len() < 2 {
        return Err(points.len());
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Ok(points
        .iter()
        .map(|p| {
            let sq: f64 = (0..3)
                .map(|k| {
                    let range = hi[k] - lo[k];
                    let z = if range > 0.0 { (p[k] - lo[k]) / range } else { 0.0 };
                    z * z
                })
                .sum();
            (sq / 3.0).sqrt()
        })
        .collect())
}

/// Sets `l2` on every successful record, normalizing per workflow. Groups
/// with fewer than two successes keep `None`.
pub fn attach_l2(records: &mut [RunRecord]) -> Result<(), HarnessError> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter_mut().enumerate() {
        r.l2 = None;
        if r.metrics.is_some() {
            groups.entry(r.workflow.clone()).or_default().push(i);
        }
    }
    for idx in groups.values() {
        let points: Vec<[f64; 3]> = idx
            .iter()
            .map(|&i| {
                let m = records[i].metrics.as_ref().expect("filtered above");
                [m.task_failures as f64, m.makespan, m.total_cost]
            })
            .collect();
        if let Ok(values) = l2_summary(&points) {
            for (&i, v) in idx.iter().zip(values) {
                records[i].l2 = Some(v);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub workflow: String,
    pub strategy: String,
    pub runs: usize,
    pub failed_runs: usize,
    pub l2: Option<Descriptive>,
    pub mean_makespan: Option<f64>,
    pub mean_cost: Option<f64>,
    pub mean_task_failures: Option<f64>,
    pub mean_spot_instances: Option<f64>,
    pub mean_on_demand_instances: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub workflow: String,
    /// SIAA group tested against CMI.
    pub against: String,
    pub n_cmi: usize,
    pub n_against: usize,
    pub u: f64,
    pub p: f64,
    pub exact: bool,
    pub verdict: Verdict,
    pub mean_cmi: f64,
    pub mean_against: f64,
    /// (mean SIAA L2 − mean CMI L2) / mean SIAA L2, in percent.
    pub improvement_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub pooling: Pooling,
    pub strategies: Vec<StrategyStats>,
    pub comparisons: Vec<Comparison>,
}

fn group_of(point: &StrategyPoint, pooling: Pooling) -> String {
    match (point, pooling) {
        (StrategyPoint::Cmi, _) => "cmi".into(),
        (StrategyPoint::Siaa { spot_ratio, .. }, Pooling::PerSpotRatio) => format!("siaa-sr{spot_ratio:.2}"),
        (p, Pooling::PerConfig) => p.label(),
    }
}

fn mean_of(records: &[&RunRecord], f: impl Fn(&RunRecord) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = records.iter().filter_map(|r| f(r)).collect();
    describe(&values).map(|d| d.mean)
}

fn stats_for(workflow: &str, strategy: &str, records: &[&RunRecord]) -> StrategyStats {
    let l2: Vec<f64> = records.iter().filter_map(|r| r.l2).collect();
    let metric = |f: fn(&crate::experiment::RunSummary) -> f64| {
        mean_of(records, move |r| r.metrics.as_ref().map(f))
    };
    StrategyStats {
        workflow: workflow.to_string(),
        strategy: strategy.to_string(),
        runs: records.len(),
        failed_runs: records.iter().filter(|r| r.metrics.is_none()).count(),
        l2: describe(&l2),
        mean_makespan: metric(|m| m.makespan),
        mean_cost: metric(|m| m.total_cost),
        mean_task_failures: metric(|m| m.task_failures as f64),
        mean_spot_instances: metric(|m| m.instances_spot as f64),
        mean_on_demand_instances: metric(|m| m.instances_on_demand as f64),
    }
}

/// Descriptive L2 statistics per strategy group and a rank test of CMI
/// against each SIAA group, per workflow. L2 values are recomputed from the
/// metrics, so stored values do not affect the result.
pub fn summarize(records: &[RunRecord], alpha: f64, pooling: Pooling) -> Result<ComparisonReport, HarnessError> {
    let mut records = records.to_vec();
    attach_l2(&mut records)?;
    let mut by_workflow: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in &records {
        by_workflow.entry(&r.workflow).or_default().push(r);
    }
    let mut strategies = Vec::new();
    let mut comparisons = Vec::new();
    for (workflow, rs) in by_workflow {
        let succeeded = rs.iter().filter(|r| r.metrics.is_some()).count();
        if succeeded < 2 {
            return Err(HarnessError::TooFewRecords {
                workflow: workflow.to_string(),
                count: succeeded,
            });
        }
        let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
        for r in &rs {
            groups.entry(group_of(&r.point, pooling)).or_default().push(r);
        }
        let siaa_all: Vec<&RunRecord> = rs.iter().copied().filter(|r| r.point != StrategyPoint::Cmi).collect();
        if let Some(cmi) = groups.get("cmi") {
            strategies.push(stats_for(workflow, "cmi", cmi));
        }
        if !siaa_all.is_empty() {
            strategies.push(stats_for(workflow, "siaa", &siaa_all));
        }
        for (name, g) in groups.iter().filter(|(k, _)| k.as_str() != "cmi") {
            strategies.push(stats_for(workflow, name, g));
        }
        let Some(cmi) = groups.get("cmi") else { continue };
        let cmi_l2: Vec<f64> = cmi.iter().filter_map(|r| r.l2).collect();
        if cmi_l2.is_empty() {
            continue;
        }
        for (name, g) in groups.iter().filter(|(k, _)| k.as_str() != "cmi") {
            let other: Vec<f64> = g.iter().filter_map(|r| r.l2).collect();
            if other.is_empty() {
                continue;
            }
            let test = mann_whitney_u(&cmi_l2, &other, alpha)?;
            let mean_cmi = describe(&cmi_l2).expect("non-empty").mean;
            let mean_against = describe(&other).expect("non-empty").mean;
            comparisons.push(Comparison {
                workflow: workflow.to_string(),
                against: name.clone(),
                n_cmi: cmi_l2.len(),
                n_against: other.len(),
                u: test.u,
                p: test.p,
                exact: test.exact,
                verdict: test.verdict,
                mean_cmi,
                mean_against,
                improvement_percent: (mean_against > 0.0)
                    .then(|| 100.0 * (mean_against - mean_cmi) / mean_against),
            });
        }
    }
    Ok(ComparisonReport {
        alpha,
        pooling,
        strategies,
        comparisons,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn strategies_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(
        "workflow,strategy,runs,failed_runs,l2_mean,l2_median,l2_sd,l2_min,l2_max,mean_makespan,mean_cost,mean_task_failures,mean_spot_instances,mean_on_demand_instances\n",
    );
    for s in &report.strategies {
        let d = s.l2.as_ref();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.workflow,
            s.strategy,
            s.runs,
            s.failed_runs,
            opt(d.map(|d| d.mean)),
            opt(d.map(|d| d.median)),
            opt(d.map(|d| d.sd)),
            opt(d.map(|d| d.min)),
            opt(d.map(|d| d.max)),
            opt(s.mean_makespan),
            opt(s.mean_cost),
            opt(s.mean_task_failures),
            opt(s.mean_spot_instances),
            opt(s.mean_on_demand_instances),
        ));
    }
    out
}

pub fn comparisons_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("workflow,against,n_cmi,n_against,u,p,exact,verdict,mean_cmi,mean_against,improvement_percent\n");
    for c in &report.comparisons {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6e},{},{},{:.6},{:.6},{}\n",
            c.workflow,
            c.against,
            c.n_cmi,
            c.n_against,
            c.u,
            c.p,
            c.exact,
            c.verdict.as_str(),
            c.mean_cmi,
            c.mean_against,
            opt(c.improvement_percent),
        ));
    }
    out
}

/// One row per run with its L2 value.
pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(
        "workflow,run_id,strategy,spot_ratio,confidence,seed,trace_offset,makespan,total_cost,task_failures,oob_errors,instances_on_demand,instances_spot,fallbacks,l2,error\n",
    );
    for r in records {
        let (strategy, sr, bmc) = match r.point {
            StrategyPoint::Cmi => ("cmi", None, None),
            StrategyPoint::Siaa { spot_ratio, confidence } => ("siaa", Some(spot_ratio), Some(confidence)),
        };
        let m = r.metrics.as_ref();
        let num = |f: fn(&crate::experiment::RunSummary) -> String| m.map(f).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"\n",
            r.workflow,
            r.run_id,
            strategy,
            sr.map(|v| format!("{v:.2}")).unwrap_or_default(),
            bmc.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.seed,
            r.trace_offset,
            num(|m| m.makespan.to_string()),
            num(|m| format!("{:.6}", m.total_cost)),
            num(|m| m.task_failures.to_string()),
            num(|m| m.oob_errors.to_string()),
            num(|m| m.instances_on_demand.to_string()),
            num(|m| m.instances_spot.to_string()),
            num(|m| m.fallbacks.to_string()),
            opt(r.l2),
            r.error.as_deref().unwrap_or("").replace('"', "'"),
        ));
    }
    out
}

/// Writes `report.csv`, `tests.csv`, `runs.csv` and `report.json` into `dir`.
pub fn write_report(dir: &Path, report: &ComparisonReport, records: &[RunRecord]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut with_l2 = records.to_vec();
    attach_l2(&mut with_l2)?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    for (name, text) in [
        ("report.csv", strategies_csv(report)),
        ("tests.csv", comparisons_csv(report)),
        ("runs.csv", runs_csv(&with_l2)),
        ("report.json", json + "\n"),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::RunSummary;
    use proptest::prelude::*;

    fn record(workflow: &str, point: StrategyPoint, seed: u64, makespan: f64, cost: f64, failures: u64) -> RunRecord {
        RunRecord {
            workflow: workflow.into(),
            run_id: format!("{}-s{seed}", point.label()),
            point,
            repetition: seed as usize,
            seed,
            trace_offset: 0.0,
            metrics: Some(RunSummary {
                makespan,
                total_cost: cost,
                task_failures: failures,
                oob_errors: failures,
                instances_on_demand: 1,
                instances_spot: 0,
                fallbacks: 0,
                ticks: 1,
            }),
            error: None,
            l2: None,
        }
    }

    fn siaa(sr: f64, bmc: f64) -> StrategyPoint {
        StrategyPoint::Siaa { spot_ratio: sr, confidence: bmc }
    }

    #[test]
    fn l2_examples() {
        let v = l2_summary(&[[0.0, 100.0, 1.0], [10.0, 200.0, 2.0]]).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
        let v = l2_summary(&[[0.0, 100.0, 1.0], [0.0, 200.0, 1.0], [0.0, 150.0, 1.0]]).unwrap();
        // only makespan varies: (0.5^2 / 3)^0.5
        assert!((v[2] - (0.25f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(l2_summary(&[[1.0, 1.0, 1.0]]), Err(1));
    }

    #[test]
    fn cmi_below_pool_is_better() {
        let mut records = Vec::new();
        for s in 0..10 {
            records.push(record("w", StrategyPoint::Cmi, s, 100.0 + s as f64, 1.0, 0));
            for bmc in [0.05, 0.1] {
                records.push(record("w", siaa(0.5, bmc), s, 300.0 + s as f64, 3.0, 2));
            }
        }
        let report = summarize(&records, 0.001, Pooling::PerSpotRatio).unwrap();
        assert_eq!(report.comparisons.len(), 1);
        let c = &report.comparisons[0];
        assert_eq!(c.against, "siaa-sr0.50");
        assert_eq!((c.n_cmi, c.n_against), (10, 20));
        assert_eq!(c.verdict, Verdict::Better);
        assert!(c.improvement_percent.unwrap() > 0.0);

        let per_config = summarize(&records, 0.001, Pooling::PerConfig).unwrap();
        assert_eq!(per_config.comparisons.len(), 2);
        assert_eq!(per_config.comparisons[0].against, "siaa-sr0.50-bmc0.05");
    }

    #[test]
    fn interleaved_is_not_significant() {
        let mut records = Vec::new();
        for s in 0..8 {
            records.push(record("w", StrategyPoint::Cmi, s, (2 * s) as f64, 1.0, 0));
            records.push(record("w", siaa(0.1, 0.1), s, (2 * s + 1) as f64, 1.0, 0));
        }
        let report = summarize(&records, 0.001, Pooling::PerSpotRatio).unwrap();
        assert_eq!(report.comparisons[0].verdict, Verdict::NotSignificant);
    }

    #[test]
    fn paper_shape_gives_44_tests() {
        let mut records = Vec::new();
        for w in ["a", "b", "c", "d"] {
            for s in 0..3 {
                records.push(record(w, StrategyPoint::Cmi, s, 10.0 + s as f64, 1.0, 0));
                for sr in 0..=10 {
                    for bmc in 1..=5 {
                        let p = siaa(sr as f64 / 10.0, bmc as f64 * 0.05);
                        records.push(record(w, p, s, 20.0 + sr as f64, 2.0, 1));
                    }
                }
            }
        }
        let report = summarize(&records, 0.001, Pooling::PerSpotRatio).unwrap();
        assert_eq!(report.comparisons.len(), 44);
        // cmi, siaa overall and 11 pools per workflow
        assert_eq!(report.strategies.len(), 4 * 13);
        let per_config = summarize(&records, 0.001, Pooling::PerConfig).unwrap();
        assert_eq!(per_config.comparisons.len(), 4 * 55);
    }

    #[test]
    fn regeneration_is_idempotent() {
        let mut records = vec![
            record("w", StrategyPoint::Cmi, 0, 100.0, 1.0, 0),
            record("w", siaa(0.2, 0.1), 0, 150.0, 2.0, 1),
            record("w", siaa(0.2, 0.1), 1, 120.0, 1.5, 0),
        ];
        let first = summarize(&records, 0.001, Pooling::PerSpotRatio).unwrap();
        attach_l2(&mut records).unwrap();
        let second = summarize(&records, 0.001, Pooling::PerSpotRatio).unwrap();
        assert_eq!(first, second);
        assert_eq!(strategies_csv(&first), strategies_csv(&second));
    }

    #[test]
    fn failed_runs_are_excluded_from_l2() {
        let mut records = vec![
            record("w", StrategyPoint::Cmi, 0, 100.0, 1.0, 0),
            record("w", siaa(0.2, 0.1), 0, 150.0, 2.0, 1),
        ];
        let mut failed = record("w", siaa(0.2, 0.1), 1, 0.0, 0.0, 0);
        failed.metrics = None;
        failed.error = Some("stalled".into());
        records.push(failed);
        let report = summarize(&records, 0.001, Pooling::PerSpotRatio).unwrap();
        let pool = report.strategies.iter().find(|s| s.strategy == "siaa-sr0.20").unwrap();
        assert_eq!((pool.runs, pool.failed_runs), (2, 1));
        assert_eq!(report.comparisons[0].n_against, 1);
        assert!(matches!(
            summarize(&records[..1], 0.001, Pooling::PerSpotRatio),
            Err(HarnessError::TooFewRecords { .. })
        ));
    }

    proptest! {
        #[test]
        fn l2_bounded(points in prop::collection::vec((0u32..20, 1.0f64..1e5, 0.0f64..100.0), 2..30)) {
            let pts: Vec<[f64; 3]> = points.iter().map(|&(f, m, c)| [f as f64, m, c]).collect();
            let v = l2_summary(&pts).unwrap();
            prop_assert!(v.iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)));
            // the component-wise extremes, when present, sit at the bounds
            let lo: [f64; 3] = std::array::from_fn(|k| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min));
            for (p, x) in pts.iter().zip(&v) {
                if *p == lo {
                    prop_assert_eq!(*x, 0.0);
                }
            }
        }
    }
}

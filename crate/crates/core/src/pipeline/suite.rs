use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::assess::{run_assessment, AssessmentObserver, NoObserver};
use super::report::RiskReport;
use super::twin::SharedContext;
use super::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub scenario: String,
    pub config_hash: String,
    pub report: Option<RiskReport>,
    pub error: Option<String>,
}

/// Band widths of one scenario's final stage next to its prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub metric: String,
    pub prior_width: f64,
    pub final_width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub entries: Vec<SuiteEntry>,
    pub comparison: Vec<ComparisonRow>,
}

pub const COMPARISON_CSV_HEADER: &str = "scenario,metric,prior_width,final_width,ratio";

impl SuiteSummary {
    pub fn reports(&self) -> impl Iterator<Item = &RiskReport> {
        self.entries.iter().filter_map(|e| e.report.as_ref())
    }

    pub fn write_comparison_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{COMPARISON_CSV_HEADER}")?;
        for r in &self.comparison {
            let ratio = if r.prior_width > 0.0 { (r.final_width / r.prior_width).to_string() } else { String::new() };
            writeln!(w, "{},{},{},{},{}", r.scenario, r.metric, r.prior_width, r.final_width, ratio)?;
        }
        Ok(())
    }
}

/// Runs every scenario with a shared truth and prior cache; a failing
/// scenario is recorded and the others still run.
pub fn run_scenario_suite(configs: &[ScenarioConfig]) -> SuiteSummary {
    run_scenario_suite_with(configs, &SharedContext::new(), |_| Box::new(NoObserver))
}

pub fn run_scenario_suite_with<'a>(
    configs: &'a [ScenarioConfig],
    ctx: &SharedContext,
    mut observer_for: impl FnMut(&'a ScenarioConfig) -> Box<dyn AssessmentObserver + 'a>,
) -> SuiteSummary {
    let mut summary = SuiteSummary::default();
    for config in configs {
        let mut observer = observer_for(config);
        let entry = match run_assessment(config, ctx, observer.as_mut()) {
            Ok(outcome) => {
                summary.comparison.extend(comparison_rows(&outcome.report));
                SuiteEntry { scenario: config.name.clone(), config_hash: config.hash(), report: Some(outcome.report), error: None }
            }
            Err(e) => {
                log::error!("scenario {} failed: {e}", config.name);
                SuiteEntry { scenario: config.name.clone(), config_hash: config.hash(), report: None, error: Some(e.to_string()) }
            }
        };
        summary.entries.push(entry);
    }
    summary
}

fn comparison_rows(report: &RiskReport) -> Vec<ComparisonRow> {
    let (Some(prior), Some(last)) = (report.prior(), report.final_stage()) else {
        return Vec::new();
    };
    let mut widths: BTreeMap<&String, (f64, f64)> = BTreeMap::new();
    for m in prior.metrics() {
        if let (Some(a), Some(b)) = (prior.mean_width(m), last.mean_width(m)) {
            widths.insert(m, (a, b));
        }
    }
    widths
        .into_iter()
        .map(|(m, (a, b))| ComparisonRow { scenario: report.scenario.clone(), metric: m.clone(), prior_width: a, final_width: b })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_gives_empty_summary() {
        let s = run_scenario_suite(&[]);
        assert!(s.entries.is_empty() && s.comparison.is_empty());
        let mut buf = Vec::new();
        s.write_comparison_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), COMPARISON_CSV_HEADER);
    }

    #[test]
    fn failures_are_isolated() {
        let mut bad = ScenarioConfig::example1();
        bad.name = "bad".into();
        bad.ensemble_size = 0;
        let s = run_scenario_suite(&[bad]);
        assert_eq!(s.entries.len(), 1);
        assert!(s.entries[0].error.as_deref().unwrap().contains("ensemble_size"));
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::StageReport;
use super::ScenarioConfig;
use crate::esmda::MismatchReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concordance {
    /// Statistic at or below the minor bound.
    Minor,
    /// Between the bounds: worth noting, still handled by the ensemble update.
    Elevated,
    /// Above the major bound: the model family cannot explain the data.
    Major,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    ProceedUpdate,
    HaltMajorUpdate,
    PerformanceViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceStatus {
    pub performance_ok: bool,
    pub concordance: Concordance,
    pub decision: Decision,
    /// Concordance statistic (normalized innovation).
    pub statistic: f64,
    /// Ensemble-mean `Phi/N_d`.
    pub mean_mismatch: f64,
    /// Performance checks that failed, as `metric: p90 > limit`.
    pub violations: Vec<String>,
    pub diagnostics: BTreeMap<String, String>,
}

/// Forecast performance first, then concordance of data and ensemble.
///
/// Concordance is graded on the mismatch report's normalized innovation:
/// squared residuals of the ensemble mean over noise plus ensemble variance.
pub fn conformance_check(mismatch: &MismatchReport, forecast: &StageReport, config: &ScenarioConfig) -> ConformanceStatus {
    let violations = performance_violations(forecast, config);
    let performance_ok = violations.is_empty();
    let statistic = mismatch.innovation;
    let b = &config.concordance;
    let concordance = if !statistic.is_finite() || statistic > b.major {
        Concordance::Major
    } else if statistic > b.minor {
        Concordance::Elevated
    } else {
        Concordance::Minor
    };
    let decision = if !performance_ok {
        Decision::PerformanceViolation
    } else if concordance == Concordance::Major {
        Decision::HaltMajorUpdate
    } else {
        Decision::ProceedUpdate
    };
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("statistic".into(), format!("{statistic:.6e}"));
    diagnostics.insert("bounds".into(), format!("minor {} / major {}", b.minor, b.major));
    diagnostics.insert("mean_mismatch".into(), format!("{:.6e}", mismatch.mean));
    for (q, v) in &mismatch.per_quantity {
        diagnostics.insert(format!("mismatch.{q}"), format!("{v:.6e}"));
    }
    if concordance == Concordance::Major {
        diagnostics.insert(
            "action".into(),
            "data fall outside the prior model family; a major model update with additional data is required".into(),
        );
    }
    ConformanceStatus { performance_ok, concordance, decision, statistic, mean_mismatch: mismatch.mean, violations, diagnostics }
}

fn performance_violations(forecast: &StageReport, config: &ScenarioConfig) -> Vec<String> {
    let p = &config.performance;
    let peak_p90 = |suffix: &str| -> Vec<(String, f64)> {
        forecast
            .bands
            .iter()
            .filter(|(k, _)| k.ends_with(suffix))
            .map(|(k, b)| (k.clone(), b.p90.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
            .collect()
    };
    let checks: [(Option<f64>, &str); 5] = [
        (p.max_co2_rate, ".q_co2"),
        (p.max_brine_rate, ".q_brine"),
        (p.max_pressure_area, "pressure_area"),
        (p.max_saturation_area, "saturation_area"),
        (p.max_ph_volume, ".v_ph"),
    ];
    let mut out = Vec::new();
    for (limit, suffix) in checks {
        if let Some(limit) = limit {
            for (metric, v) in peak_p90(suffix) {
                if v > limit {
                    out.push(format!("{metric}: p90 {v:.6e} > {limit:.6e}"));
                }
            }
        }
    }
    out
}

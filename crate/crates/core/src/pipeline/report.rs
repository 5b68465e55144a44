use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::conformance::ConformanceStatus;
use super::forecast::{ensemble_bands, report_axis_years, MemberForecast};
use super::{PipelineError, ScenarioConfig};
use crate::riskmetrics::{write_bands_csv, EnsembleBand};

pub const ONSET_CSV_HEADER: &str = "metric,min,p10,p50,p90,max";

/// Bands of one ensemble (prior or an epoch posterior).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub label: String,
    /// Data cut-off [yr]; zero for the prior.
    pub data_years: f64,
    pub n_data: usize,
    /// Time axis of `bands` [yr], starting at 0.
    pub times_years: Vec<f64>,
    /// Time-series bands keyed `<well>.<quantity>` or plume metric name.
    pub bands: BTreeMap<String, EnsembleBand>,
    /// Single-value onset bands [yr], censored at the end of the run.
    pub onset: BTreeMap<String, EnsembleBand>,
    /// Members with a detected onset, per well.
    pub onset_detected: BTreeMap<String, usize>,
}

impl StageReport {
    pub fn empty(label: &str, times_years: Vec<f64>) -> Self {
        Self {
            label: label.to_string(),
            data_years: 0.0,
            n_data: 0,
            times_years,
            bands: BTreeMap::new(),
            onset: BTreeMap::new(),
            onset_detected: BTreeMap::new(),
        }
    }

    pub fn from_forecasts(label: &str, data_years: f64, n_data: usize, forecasts: &[MemberForecast]) -> Result<Self, PipelineError> {
        let first = forecasts.first().ok_or(crate::riskmetrics::RiskError::NoMembers)?;
        let (bands, onset) = ensemble_bands(forecasts)?;
        let mut onset_detected = BTreeMap::new();
        for f in forecasts {
            for l in &f.leakage {
                *onset_detected.entry(format!("{}.onset", l.well)).or_insert(0) += usize::from(l.onset_years.is_some());
            }
        }
        Ok(Self { label: label.to_string(), data_years, n_data, times_years: report_axis_years(&first.sim), bands, onset, onset_detected })
    }

    /// P90 - P10 width of a series band averaged over `[t0, t1]` [yr], or
    /// of an onset band.
    pub fn mean_width_between(&self, metric: &str, t0: f64, t1: f64) -> Option<f64> {
        if let Some(b) = self.onset.get(metric) {
            return Some(b.p90[0] - b.p10[0]);
        }
        let b = self.bands.get(metric)?;
        let w = b.width();
        let sel: Vec<f64> = self.times_years.iter().zip(&w).filter(|(t, _)| **t >= t0 - 1e-9 && **t <= t1 + 1e-9).map(|(_, w)| *w).collect();
        if sel.is_empty() {
            None
        } else {
            Some(sel.iter().sum::<f64>() / sel.len() as f64)
        }
    }

    pub fn mean_width(&self, metric: &str) -> Option<f64> {
        self.mean_width_between(metric, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn metrics(&self) -> impl Iterator<Item = &String> {
        self.bands.keys().chain(self.onset.keys())
    }

    pub fn write_bands_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let bands: Vec<(&str, &EnsembleBand)> = self.bands.iter().map(|(k, b)| (k.as_str(), b)).collect();
        write_bands_csv(w, &self.times_years, &bands)
    }

    pub fn write_onset_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{ONSET_CSV_HEADER}")?;
        for (k, b) in &self.onset {
            writeln!(w, "{k},{},{},{},{},{}", b.min[0], b.p10[0], b.p50[0], b.p90[0], b.max[0])?;
        }
        Ok(())
    }
}

/// Ratio of mean band widths `later / earlier` per metric; metrics with a
/// zero-width earlier band are left out.
pub fn width_ratios(earlier: &StageReport, later: &StageReport) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for m in earlier.metrics() {
        if let (Some(a), Some(b)) = (earlier.mean_width(m), later.mean_width(m)) {
            if a > 0.0 {
                out.insert(m.clone(), b / a);
            }
        }
    }
    out
}

/// One minus the mean width ratio: the fraction by which `later` narrowed
/// the bands of `earlier`.
pub fn band_reduction(earlier: &StageReport, later: &StageReport) -> f64 {
    let r = width_ratios(earlier, later);
    if r.is_empty() {
        0.0
    } else {
        1.0 - r.values().sum::<f64>() / r.len() as f64
    }
}

/// Truth-derived series for comparison with the bands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub series: BTreeMap<String, Vec<f64>>,
    pub onset: BTreeMap<String, f64>,
}

impl TruthSummary {
    pub fn from_forecast(f: &MemberForecast) -> Self {
        Self { series: f.series().into_iter().collect(), onset: f.onsets().into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub index: usize,
    pub cutoff_years: f64,
    pub n_data: usize,
    /// Evaluated on the ensemble entering the epoch; absent without data.
    pub conformance: Option<ConformanceStatus>,
    pub alphas: Vec<f64>,
    /// Mean `Phi/N_d` before each round and after the last.
    pub mismatch_history: Vec<f64>,
    pub innovation_history: Vec<f64>,
    pub resampled: usize,
    /// Band narrowing relative to the previous stage.
    pub band_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    NoSignificantReduction { after_epoch: usize, reduction: f64 },
    Halted { epoch: usize },
    Aborted { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scenario: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub truth: TruthSummary,
    /// Prior first, then one per completed epoch.
    pub stages: Vec<StageReport>,
    pub epochs: Vec<EpochRecord>,
    /// Final-stage over prior mean band width per metric.
    pub width_ratios: BTreeMap<String, f64>,
    pub termination: Termination,
}

impl RiskReport {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario: config.name.clone(),
            config_hash: config.hash(),
            seeds: config.seed_streams(),
            truth: TruthSummary::default(),
            stages: Vec::new(),
            epochs: Vec::new(),
            width_ratios: BTreeMap::new(),
            termination: Termination::Completed,
        }
    }

    pub fn prior(&self) -> Option<&StageReport> {
        self.stages.first()
    }

    pub fn final_stage(&self) -> Option<&StageReport> {
        self.stages.last()
    }

    pub fn stage(&self, label: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lo: f64, hi: f64, n: usize) -> EnsembleBand {
        EnsembleBand { min: vec![lo; n], p10: vec![lo; n], p50: vec![(lo + hi) / 2.0; n], p90: vec![hi; n], max: vec![hi; n] }
    }

    fn stage(w: f64) -> StageReport {
        let mut s = StageReport::empty("s", vec![0.0, 1.0, 2.0]);
        s.bands.insert("a".into(), band(0.0, w, 3));
        s.bands.insert("zero".into(), band(1.0, 1.0, 3));
        s.onset.insert("L1.onset".into(), band(1.0, 1.0 + w, 1));
        s
    }

    #[test]
    fn ratios_and_reduction() {
        let r = width_ratios(&stage(2.0), &stage(1.0));
        assert_eq!(r.len(), 2);
        assert!(r.values().all(|v| (*v - 0.5).abs() < 1e-12));
        assert!((band_reduction(&stage(2.0), &stage(1.0)) - 0.5).abs() < 1e-12);
        assert_eq!(band_reduction(&stage(2.0), &stage(2.0)), 0.0);
    }

    #[test]
    fn windowed_width() {
        let mut s = stage(1.0);
        s.bands.get_mut("a").unwrap().p90 = vec![1.0, 3.0, 5.0];
        assert_eq!(s.mean_width_between("a", 0.5, 2.0), Some(4.0));
        assert_eq!(s.mean_width_between("a", 5.0, 6.0), None);
        assert_eq!(s.mean_width("L1.onset"), Some(1.0));
    }

    #[test]
    fn csv_outputs() {
        let s = stage(1.0);
        let mut buf = Vec::new();
        s.write_bands_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.starts_with(crate::riskmetrics::BAND_CSV_HEADER));
        let mut buf = Vec::new();
        s.write_onset_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "metric,min,p10,p50,p90,max\nL1.onset,1,1,1.5,2,2\n");
    }
}

//! Plume areas, leakage onset and ensemble percentile bands.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowsim::DAYS_PER_YEAR;
use crate::geomodel::GridGeometry;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("fields have {got} cells, grid has {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("band needs at least one member")]
    NoMembers,
    #[error("member {member} has {got} values, expected {expected}")]
    RaggedSeries { member: usize, expected: usize, got: usize },
    #[error("threshold must be positive")]
    InvalidThreshold,
}

pub type Result<T> = std::result::Result<T, RiskError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlumeThresholds {
    /// Overpressure [Pa].
    pub overpressure: f64,
    pub saturation: f64,
}

impl Default for PlumeThresholds {
    fn default() -> Self {
        Self { overpressure: 1.0e5, saturation: 0.01 }
    }
}

impl PlumeThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.overpressure > 0.0 && self.saturation > 0.0 {
            Ok(())
        } else {
            Err(RiskError::InvalidThreshold)
        }
    }
}

fn check_len(g: &GridGeometry, n: usize) -> Result<()> {
    if n != g.n_cells() {
        return Err(RiskError::FieldLength { expected: g.n_cells(), got: n });
    }
    Ok(())
}

fn column_area(g: &GridGeometry, exceeds: impl Fn(usize) -> bool) -> f64 {
    let nc = g.n_columns();
    let count = (0..nc).filter(|&c| (0..g.nz).any(|k| exceeds(c + k * nc))).count();
    count as f64 * g.column_area()
}

/// Map-view area of columns whose overpressure exceeds `threshold` in any layer.
pub fn pressure_plume_area(g: &GridGeometry, pressure: &[f64], initial: &[f64], threshold: f64) -> Result<f64> {
    check_len(g, pressure.len())?;
    check_len(g, initial.len())?;
    Ok(column_area(g, |c| pressure[c] - initial[c] > threshold))
}

/// Map-view area of columns with CO2 saturation above `threshold` in any layer.
pub fn saturation_plume_area(g: &GridGeometry, saturation: &[f64], threshold: f64) -> Result<f64> {
    check_len(g, saturation.len())?;
    Ok(column_area(g, |c| saturation[c] > threshold))
}

/// Bulk volume of cells whose overpressure exceeds `threshold`.
pub fn pressure_plume_volume(g: &GridGeometry, pressure: &[f64], initial: &[f64], threshold: f64) -> Result<f64> {
    check_len(g, pressure.len())?;
    check_len(g, initial.len())?;
    Ok((0..g.n_cells()).filter(|&c| pressure[c] - initial[c] > threshold).map(|c| g.cell_volume(g.ijk(c).2)).sum())
}

/// Bulk volume of cells with saturation above `threshold`.
pub fn saturation_plume_volume(g: &GridGeometry, saturation: &[f64], threshold: f64) -> Result<f64> {
    check_len(g, saturation.len())?;
    Ok((0..g.n_cells()).filter(|&c| saturation[c] > threshold).map(|c| g.cell_volume(g.ijk(c).2)).sum())
}

/// First time [years] at which `rate` exceeds `eps`.
pub fn onset_time(times_days: &[f64], rate: &[f64], eps: f64) -> Option<f64> {
    rate.iter().position(|q| *q > eps).map(|k| times_days[k] / DAYS_PER_YEAR)
}

/// Per-time order statistics of an ensemble of series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBand {
    pub min: Vec<f64>,
    pub p10: Vec<f64>,
    pub p50: Vec<f64>,
    pub p90: Vec<f64>,
    pub max: Vec<f64>,
}

impl EnsembleBand {
    pub fn len(&self) -> usize {
        self.p50.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p50.is_empty()
    }

    /// P90 - P10 per time.
    pub fn width(&self) -> Vec<f64> {
        self.p90.iter().zip(&self.p10).map(|(a, b)| a - b).collect()
    }
}

/// Percentile `p` in [0, 1] of sorted data, interpolating linearly between
/// neighbouring order statistics at rank `p (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Band over `members`, each a series on the same time axis.
pub fn ensemble_band(members: &[Vec<f64>]) -> Result<EnsembleBand> {
    let first = members.first().ok_or(RiskError::NoMembers)?;
    let nt = first.len();
    for (m, s) in members.iter().enumerate() {
        if s.len() != nt {
            return Err(RiskError::RaggedSeries { member: m, expected: nt, got: s.len() });
        }
    }
    let mut band = EnsembleBand { min: vec![0.0; nt], p10: vec![0.0; nt], p50: vec![0.0; nt], p90: vec![0.0; nt], max: vec![0.0; nt] };
    let mut col = Vec::with_capacity(members.len());
    for t in 0..nt {
        col.clear();
        col.extend(members.iter().map(|s| s[t]));
        col.sort_by(f64::total_cmp);
        band.min[t] = col[0];
        band.p10[t] = percentile_sorted(&col, 0.1);
        band.p50[t] = percentile_sorted(&col, 0.5);
        band.p90[t] = percentile_sorted(&col, 0.9);
        band.max[t] = col[col.len() - 1];
    }
    Ok(band)
}

pub const BAND_CSV_HEADER: &str = "time,metric,min,p10,p50,p90,max";

/// Writes bands as CSV rows `time,metric,min,p10,p50,p90,max`; `times` is
/// in years.
pub fn write_bands_csv<W: Write>(mut w: W, times: &[f64], bands: &[(&str, &EnsembleBand)]) -> std::io::Result<()> {
    writeln!(w, "{BAND_CSV_HEADER}")?;
    for (metric, b) in bands {
        for (t, time) in times.iter().enumerate().take(b.len()) {
            writeln!(w, "{time},{metric},{},{},{},{},{}", b.min[t], b.p10[t], b.p50[t], b.p90[t], b.max[t])?;
        }
    }
    Ok(())
}

//! Labelled monitoring data `d_obs` with per-datum noise.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Pressure,
    Saturation,
}

impl Quantity {
    pub const ALL: [Quantity; 2] = [Quantity::Pressure, Quantity::Saturation];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Pressure => "pressure",
            Quantity::Saturation => "saturation",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = ObservationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pressure" => Ok(Quantity::Pressure),
            "saturation" => Ok(Quantity::Saturation),
            other => Err(ObservationError::Parse(format!("unknown quantity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsLabel {
    /// Report time [days since injection start].
    pub time_days: f64,
    pub well: String,
    pub quantity: Quantity,
}

#[derive(Debug, Error)]
pub enum ObservationError {
    #[error("duplicate observation label at t={time_days} d, well {well}, {quantity}")]
    DuplicateLabel { time_days: f64, well: String, quantity: Quantity },
    #[error("observation {index}: {reason}")]
    InvalidDatum { index: usize, reason: String },
    #[error("observation CSV: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Observations in a fixed order, with the diagonal of `C_D`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationSet {
    pub labels: Vec<ObsLabel>,
    pub values: Vec<f64>,
    /// Noise variance per datum.
    pub variances: Vec<f64>,
}

impl ObservationSet {
    pub fn new(labels: Vec<ObsLabel>, values: Vec<f64>, variances: Vec<f64>) -> Result<Self, ObservationError> {
        let set = Self { labels, values, variances };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks lengths, finiteness, non-negative variances and unique labels.
    pub fn validate(&self) -> Result<(), ObservationError> {
        if self.labels.len() != self.values.len() || self.values.len() != self.variances.len() {
            return Err(ObservationError::InvalidDatum { index: 0, reason: "label/value/variance lengths differ".into() });
        }
        let mut seen = HashSet::with_capacity(self.labels.len());
        for (i, l) in self.labels.iter().enumerate() {
            if !self.values[i].is_finite() {
                return Err(ObservationError::InvalidDatum { index: i, reason: "value is not finite".into() });
            }
            if !(self.variances[i] >= 0.0 && self.variances[i].is_finite()) {
                return Err(ObservationError::InvalidDatum { index: i, reason: "variance must be non-negative".into() });
            }
            if !seen.insert((l.time_days.to_bits(), l.well.as_str(), l.quantity)) {
                return Err(ObservationError::DuplicateLabel {
                    time_days: l.time_days,
                    well: l.well.clone(),
                    quantity: l.quantity,
                });
            }
        }
        Ok(())
    }

    /// Requires strictly positive variances, as the assimilation does.
    pub fn validate_for_assimilation(&self) -> Result<(), ObservationError> {
        self.validate()?;
        if let Some(i) = self.variances.iter().position(|v| *v <= 0.0) {
            return Err(ObservationError::InvalidDatum { index: i, reason: "variance must be positive".into() });
        }
        Ok(())
    }

    fn select(&self, keep: impl Fn(&ObsLabel) -> bool) -> Self {
        let mut out = Self::default();
        for i in 0..self.len() {
            if keep(&self.labels[i]) {
                out.labels.push(self.labels[i].clone());
                out.values.push(self.values[i]);
                out.variances.push(self.variances[i]);
            }
        }
        out
    }

    /// Data with `time_days <= max_days` (plus a small tolerance).
    pub fn truncated(&self, max_days: f64) -> Self {
        self.select(|l| l.time_days <= max_days + 1e-6)
    }

    pub fn restricted_to_wells(&self, wells: &[String]) -> Self {
        self.select(|l| wells.contains(&l.well))
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.variances.iter().map(|v| v.sqrt()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,well,quantity,value,std")?;
        for i in 0..self.len() {
            let l = &self.labels[i];
            writeln!(w, "{},{},{},{},{}", l.time_days, l.well, l.quantity, self.values[i], self.variances[i].sqrt())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, ObservationError> {
        let mut set = Self::default();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 {
                if line.trim() != "time,well,quantity,value,std" {
                    return Err(ObservationError::Parse(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(ObservationError::Parse(format!("line {}: expected 5 columns", n + 1)));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| ObservationError::Parse(format!("line {}: {e}", n + 1)));
            let std = num(cols[4])?;
            if std < 0.0 {
                return Err(ObservationError::Parse(format!("line {}: negative std", n + 1)));
            }
            set.labels.push(ObsLabel { time_days: num(cols[0])?, well: cols[1].to_string(), quantity: cols[2].parse()? });
            set.values.push(num(cols[3])?);
            set.variances.push(std * std);
        }
        set.validate()?;
        Ok(set)
    }
}

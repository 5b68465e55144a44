//! Immiscible, slightly compressible CO2/brine flow on the regular grid.
//!
//! IMPES: pressure is implicit with two-point harmonic transmissibilities,
//! CO2 saturation is advanced explicitly with phase-potential upwinding and
//! CFL-limited sub-steps inside each pressure step. CO2 and brine densities
//! are constant, so phase mass balance is tracked through phase volumes.

mod impes;
mod linsolve;
mod observe;
mod props;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomodel::GridGeometry;

pub use impes::{simulate, simulate_with};
pub use linsolve::RELATIVE_TOLERANCE;
pub use observe::{sample_observations, write_traces_csv, NoiseSpec};
pub use props::{FluidRockProps, DAYS_PER_YEAR, GRAVITY, SECONDS_PER_DAY};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid well {well}: {reason}")]
    InvalidWell { well: String, reason: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid fluid/rock properties: {0}")]
    InvalidProps(String),
    #[error(
        "pressure solve failed at t={time_days:.3} d (step {step}): relative residual {relative_residual:.3e} after {iterations} iterations"
    )]
    SolverFailure { time_days: f64, step: usize, iterations: usize, relative_residual: f64 },
    #[error("well {0} not found in simulation result")]
    UnknownWell(String),
    #[error("observation time {0} d is not a report time")]
    UnknownTime(f64),
    #[error("noise standard deviation must be non-negative")]
    NegativeNoise,
}

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellKind {
    Injector,
    Monitor,
    Legacy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellSpec {
    pub name: String,
    pub i: usize,
    pub j: usize,
    pub kind: WellKind,
    /// Completed layers; empty means all layers.
    #[serde(default)]
    pub completion: Vec<usize>,
}

impl WellSpec {
    pub fn new(name: &str, i: usize, j: usize, kind: WellKind) -> Self {
        Self { name: name.to_string(), i, j, kind, completion: Vec::new() }
    }

    pub fn layers(&self, nz: usize) -> Vec<usize> {
        if self.completion.is_empty() {
            (0..nz).collect()
        } else {
            let mut l = self.completion.clone();
            l.sort_unstable();
            l.dedup();
            l
        }
    }

    /// Top completed cell, where probes and leakage read the reservoir state.
    pub fn reference_cell(&self, g: &GridGeometry) -> usize {
        g.index(self.i, self.j, self.layers(g.nz)[0])
    }

    pub fn validate(&self, g: &GridGeometry) -> Result<()> {
        let bad = |r: &str| Err(FlowError::InvalidWell { well: self.name.clone(), reason: r.to_string() });
        if self.i >= g.nx || self.j >= g.ny {
            return bad("column outside grid");
        }
        if self.completion.iter().any(|&k| k >= g.nz) {
            return bad("completion layer outside grid");
        }
        Ok(())
    }
}

/// Rate-controlled injection followed by a shut-in period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSchedule {
    /// CO2 mass rate [kg/s].
    pub rate: f64,
    pub injection_years: f64,
    pub post_injection_years: f64,
    pub report_interval_days: f64,
}

/// 1 million metric tons per year in kg/s.
pub const MT_PER_YEAR: f64 = 1.0e9 / (DAYS_PER_YEAR * SECONDS_PER_DAY);

/// Monthly reporting.
pub const MONTH_DAYS: f64 = DAYS_PER_YEAR / 12.0;

impl InjectionSchedule {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.rate) {
            return Err(FlowError::InvalidSchedule("rate must be non-negative".into()));
        }
        if !nonneg(self.injection_years) || !nonneg(self.post_injection_years) {
            return Err(FlowError::InvalidSchedule("durations must be non-negative".into()));
        }
        if !(self.report_interval_days > 0.0 && self.report_interval_days.is_finite()) {
            return Err(FlowError::InvalidSchedule("report interval must be positive".into()));
        }
        Ok(())
    }

    pub fn total_days(&self) -> f64 {
        (self.injection_years + self.post_injection_years) * DAYS_PER_YEAR
    }

    pub fn injection_days(&self) -> f64 {
        self.injection_years * DAYS_PER_YEAR
    }

    pub fn n_reports(&self) -> usize {
        let n = self.total_days() / self.report_interval_days;
        (n - 1e-9).ceil().max(0.0) as usize
    }

    /// Report times [days]; the last one is clipped to the end of the run.
    pub fn report_times(&self) -> Vec<f64> {
        let end = self.total_days();
        (1..=self.n_reports()).map(|k| (k as f64 * self.report_interval_days).min(end)).collect()
    }

    /// Same schedule ending after `years` in total.
    pub fn truncated(&self, years: f64) -> Self {
        let years = years.max(0.0);
        let inj = self.injection_years.min(years);
        Self { injection_years: inj, post_injection_years: (years - inj).min(self.post_injection_years), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Lateral faces held at the initial hydrostatic pressure; inflow is brine.
    #[default]
    ConstantPressure,
    NoFlow,
}

/// Numerical controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    /// Upper bound on the pressure step [days].
    pub max_pressure_step_days: f64,
    /// Courant number for saturation sub-steps.
    pub cfl: f64,
    /// Keep full pressure/saturation fields at every report time.
    pub record_fields: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { max_pressure_step_days: MONTH_DAYS, cfl: 0.8, record_fields: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub pressure: Vec<f64>,
    pub saturation: Vec<f64>,
}

/// Pressure and saturation at a well's reference cell, one entry per report.
#[derive(Debug, Clone, PartialEq)]
pub struct WellTrace {
    pub well: WellSpec,
    pub cell: usize,
    pub initial_pressure: f64,
    pub pressure: Vec<f64>,
    pub saturation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimStats {
    pub pressure_solves: usize,
    pub transport_substeps: usize,
    pub max_solver_iterations: usize,
    pub max_solver_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub geometry: GridGeometry,
    /// Report times [days].
    pub report_times: Vec<f64>,
    pub initial_pressure: Vec<f64>,
    /// One per report time when fields were recorded, else empty.
    pub snapshots: Vec<Snapshot>,
    pub traces: Vec<WellTrace>,
    /// Cumulative injected CO2 mass per report [kg].
    pub cumulative_injected: Vec<f64>,
    /// Cumulative net mass leaving through the lateral boundary per report [kg].
    pub cumulative_outflux: Vec<f64>,
    /// Change of in-place fluid mass since t = 0 per report [kg].
    pub stored_mass_change: Vec<f64>,
    /// Relative mass-balance residual per report.
    pub mass_balance_residual: Vec<f64>,
    pub stats: SimStats,
}

impl SimulationResult {
    pub fn trace(&self, well: &str) -> Result<&WellTrace> {
        self.traces.iter().find(|t| t.well.name == well).ok_or_else(|| FlowError::UnknownWell(well.to_string()))
    }

    /// Index of the report at `time_days`.
    pub fn report_index(&self, time_days: f64) -> Result<usize> {
        let k = self.report_times.partition_point(|t| *t < time_days - 1e-6);
        match self.report_times.get(k) {
            Some(t) if (t - time_days).abs() <= 1e-6 => Ok(k),
            _ => Err(FlowError::UnknownTime(time_days)),
        }
    }

    /// Simulated values at the given observation labels, in order.
    pub fn predict(&self, labels: &[crate::observations::ObsLabel]) -> Result<Vec<f64>> {
        labels
            .iter()
            .map(|l| {
                let tr = self.trace(&l.well)?;
                let k = self.report_index(l.time_days)?;
                Ok(match l.quantity {
                    crate::observations::Quantity::Pressure => tr.pressure[k],
                    crate::observations::Quantity::Saturation => tr.saturation[k],
                })
            })
            .collect()
    }

    pub fn max_mass_balance_residual(&self) -> f64 {
        self.mass_balance_residual.iter().cloned().fold(0.0, f64::max)
    }
}

//! Wellbore leakage from the reservoir into the overlying aquifer as
//! quasi-steady Darcy flow along a permeable column.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowsim::{FluidRockProps, SimulationResult, GRAVITY, SECONDS_PER_DAY};
use crate::riskmetrics::onset_time;

/// Default rate cutoff for the CO2 onset time [kg/s].
pub const ONSET_RATE: f64 = 1.0e-6;

const DRIVE_TOLERANCE: f64 = 1.0e-9;

#[derive(Debug, Error)]
pub enum LeakError {
    #[error("invalid legacy-well properties: {0}")]
    InvalidProps(String),
    #[error(transparent)]
    Flow(#[from] crate::flowsim::FlowError),
}

pub type Result<T> = std::result::Result<T, LeakError>;

/// Leak-path settings shared by all legacy wells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakPathSpec {
    /// Effective wellbore permeability [m^2].
    pub permeability: f64,
    /// Flow area [m^2].
    pub area: f64,
    /// Depth of the aquifer base [m].
    pub aquifer_depth: f64,
}

impl Default for LeakPathSpec {
    fn default() -> Self {
        Self { permeability: 1.0e-13, area: 0.05, aquifer_depth: 200.0 }
    }
}

impl LeakPathSpec {
    /// Properties for a well whose reservoir reference point lies at
    /// `reservoir_depth`, with hydrostatic aquifer pressure.
    pub fn resolve(&self, reservoir_depth: f64, fluids: &FluidRockProps) -> Result<LegacyWellProps> {
        LegacyWellProps::new(
            self.permeability,
            self.area,
            reservoir_depth - self.aquifer_depth,
            fluids.hydrostatic_pressure(self.aquifer_depth),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyWellProps {
    pub permeability: f64,
    pub area: f64,
    /// Path length from the reservoir reference point to the aquifer [m].
    pub length: f64,
    pub aquifer_pressure: f64,
}

impl LegacyWellProps {
    pub fn new(permeability: f64, area: f64, length: f64, aquifer_pressure: f64) -> Result<Self> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !(ok(permeability) && ok(area) && ok(length) && ok(aquifer_pressure)) {
            return Err(LeakError::InvalidProps(format!(
                "k={permeability}, A={area}, L={length}, p_aq={aquifer_pressure} must all be positive"
            )));
        }
        Ok(Self { permeability, area, length, aquifer_pressure })
    }
}

/// CO2 and brine mass rates [kg/s] for reservoir pressure and saturation at
/// the well.
pub fn leakage_rates(p_res: f64, s_res: f64, props: &LegacyWellProps, fluids: &FluidRockProps) -> (f64, f64) {
    let s = s_res.clamp(0.0, 1.0);
    let geom = props.permeability * props.area / props.length;
    let rate = |rho: f64, kr: f64, mu: f64| {
        let drive = p_res - props.aquifer_pressure - rho * GRAVITY * props.length;
        // differences below solver precision are hydrostatic
        if drive > DRIVE_TOLERANCE * p_res.abs() && kr > 0.0 {
            rho * geom * kr / mu * drive
        } else {
            0.0
        }
    };
    (
        rate(fluids.rho_co2, fluids.kr_co2(s), fluids.mu_co2),
        rate(fluids.rho_brine, fluids.kr_brine(s), fluids.mu_brine),
    )
}

/// Leakage history at one well. Index 0 is the initial state, index `k` the
/// `k`-th report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSeries {
    pub well: String,
    pub times_days: Vec<f64>,
    pub q_co2: Vec<f64>,
    pub q_brine: Vec<f64>,
    pub cum_co2: Vec<f64>,
    pub cum_brine: Vec<f64>,
    /// Years until `q_co2` first exceeds the cutoff.
    pub onset_years: Option<f64>,
}

impl LeakageSeries {
    pub fn times_years(&self) -> Vec<f64> {
        self.times_days.iter().map(|t| t / crate::flowsim::DAYS_PER_YEAR).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,well,q_co2,q_brine,cum_co2,cum_brine")?;
        for k in 0..self.times_days.len() {
            writeln!(w, "{},{},{},{},{},{}", self.times_days[k], self.well, self.q_co2[k], self.q_brine[k], self.cum_co2[k], self.cum_brine[k])?;
        }
        Ok(())
    }
}

fn trapezoid(times_days: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    for k in 0..q.len() {
        if k > 0 {
            acc += 0.5 * (q[k] + q[k - 1]) * (times_days[k] - times_days[k - 1]) * SECONDS_PER_DAY;
        }
        out.push(acc);
    }
    out
}

/// Rates at every report time from the well's top completed cell.
pub fn leakage_series(sim: &SimulationResult, well: &str, spec: &LeakPathSpec, fluids: &FluidRockProps, onset_rate: f64) -> Result<LeakageSeries> {
    let tr = sim.trace(well)?;
    let props = spec.resolve(sim.geometry.cell_center_depth(tr.cell), fluids)?;
    let mut times = Vec::with_capacity(sim.report_times.len() + 1);
    times.push(0.0);
    times.extend_from_slice(&sim.report_times);
    let states = std::iter::once((tr.initial_pressure, 0.0)).chain(tr.pressure.iter().copied().zip(tr.saturation.iter().copied()));
    let (q_co2, q_brine): (Vec<f64>, Vec<f64>) = states.map(|(p, s)| leakage_rates(p, s, &props, fluids)).unzip();
    let cum_co2 = trapezoid(&times, &q_co2);
    let cum_brine = trapezoid(&times, &q_brine);
    if let (Some(leaked), Some(injected)) = (cum_co2.last(), sim.cumulative_injected.last()) {
        if leaked > injected {
            log::warn!("well {well}: leaked CO2 {leaked:.3e} kg exceeds injected {injected:.3e} kg");
        }
    }
    let onset_years = onset_time(&times, &q_co2, onset_rate);
    Ok(LeakageSeries { well: well.to_string(), times_days: times, q_co2, q_brine, cum_co2, cum_brine, onset_years })
}

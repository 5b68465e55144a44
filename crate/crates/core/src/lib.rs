//! Forecasting CO2 leakage risk at legacy wells from monitoring data:
//! geostatistical priors, a two-phase flow simulator, ensemble smoothing,
//! and leakage/receptor reduced-order models.

pub mod esmda;
pub mod flowsim;
pub mod geomodel;
pub mod leakpath;
pub mod observations;
pub mod pipeline;
pub mod receptor;
pub mod riskmetrics;
pub mod seeds;

//! The dynamic risk-assessment loop: twin experiment, prior risk forecast,
//! conformance check, ES-MDA-GEO assimilation, re-forecast and bands, plus
//! scenario sweeps over monitoring duration and network.

mod assess;
mod config;
mod conformance;
mod forecast;
mod report;
mod suite;
mod twin;

use thiserror::Error;

pub use assess::{
    assimilate_epoch, assimilation_options, forward_model, inflation_schedule, run_assessment, run_dynamic_assessment, AssessmentObserver,
    AssessmentOutcome, NoObserver, PosteriorData,
};
pub use config::{AssimilationSettings, ConcordanceBounds, PerformanceLimits, Preset, ScenarioConfig, WellSite};
pub use conformance::{conformance_check, Concordance, ConformanceStatus, Decision};
pub use forecast::{ensemble_bands, forecast_ensemble, forecast_member, predictions, report_axis_years, MemberForecast};
pub use report::{band_reduction, width_ratios, EpochRecord, RiskReport, StageReport, Termination, TruthSummary, ONSET_CSV_HEADER};
pub use suite::{run_scenario_suite, run_scenario_suite_with, ComparisonRow, SuiteEntry, SuiteSummary, COMPARISON_CSV_HEADER};
pub use twin::{prior_ensemble, run_twin_experiment, truth_model, PriorData, SharedContext, TwinData, TwinExperiment, TRUTH_ID};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config at {field}: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Geomodel(#[from] crate::geomodel::GeomodelError),
    #[error(transparent)]
    Flow(#[from] crate::flowsim::FlowError),
    #[error(transparent)]
    Esmda(#[from] crate::esmda::EsmdaError),
    #[error(transparent)]
    Leak(#[from] crate::leakpath::LeakError),
    #[error(transparent)]
    Receptor(#[from] crate::receptor::ReceptorError),
    #[error(transparent)]
    Risk(#[from] crate::riskmetrics::RiskError),
    #[error(transparent)]
    Observation(#[from] crate::observations::ObservationError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

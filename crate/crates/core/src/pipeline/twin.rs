use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde_json::json;

use super::config::content_hash;
use super::forecast::{forecast_ensemble, forecast_member, MemberForecast};
use super::{PipelineError, ScenarioConfig};
use crate::flowsim::{sample_observations, DAYS_PER_YEAR};
use crate::geomodel::{generate_prior_ensemble, Ensemble, FieldSampler, ReservoirModel, SamplerMethod};
use crate::observations::ObservationSet;
use crate::seeds;

/// Member id given to the ground truth; never used by ensemble members.
pub const TRUTH_ID: usize = usize::MAX;

/// Hidden truth, its forecast and the full noisy record at every
/// injector and monitor.
#[derive(Debug, Clone)]
pub struct TwinData {
    pub model: ReservoirModel,
    pub forecast: MemberForecast,
    /// All monitor and injector data over the whole schedule.
    pub record: ObservationSet,
}

impl TwinData {
    /// Data the scenario sees: its observed wells up to `years`.
    pub fn observations(&self, config: &ScenarioConfig, years: f64) -> ObservationSet {
        self.record.restricted_to_wells(&config.observed_wells()).truncated(years * DAYS_PER_YEAR)
    }
}

#[derive(Debug, Clone)]
pub struct PriorData {
    pub ensemble: Ensemble,
    pub forecasts: Vec<MemberForecast>,
}

/// Twin experiment output for one scenario.
#[derive(Debug, Clone)]
pub struct TwinExperiment {
    pub truth_model: ReservoirModel,
    pub truth: MemberForecast,
    /// Observations up to the monitoring duration.
    pub observations: ObservationSet,
}

/// Draws the truth from its own seed stream, simulates it over the whole
/// schedule and samples noisy data up to the monitoring duration.
pub fn run_twin_experiment(config: &ScenarioConfig) -> Result<TwinExperiment, PipelineError> {
    config.validate()?;
    let twin = build_twin(config)?;
    let observations = twin.observations(config, config.monitoring_duration);
    Ok(TwinExperiment { truth_model: twin.model, truth: twin.forecast, observations })
}

pub fn truth_model(config: &ScenarioConfig) -> Result<ReservoirModel, PipelineError> {
    let sampler = FieldSampler::new(&config.grid, &config.variogram, SamplerMethod::Auto)?;
    let field = sampler.sample(seeds::named(config.seed, "truth"), config.layering);
    Ok(ReservoirModel::new(TRUTH_ID, Arc::new(config.grid.clone()), field, vec![config.porosity; config.grid.n_cells()])?)
}

pub fn prior_ensemble(config: &ScenarioConfig) -> Result<Ensemble, PipelineError> {
    Ok(generate_prior_ensemble(
        &config.grid,
        &config.variogram,
        config.porosity,
        config.ensemble_size,
        seeds::named(config.seed, "prior"),
        config.layering,
    )?)
}

fn build_twin(config: &ScenarioConfig) -> Result<TwinData, PipelineError> {
    let model = truth_model(config)?;
    let forecast = forecast_member(&model, config)?;
    let wells: Vec<String> = config.wells.iter().filter(|w| w.kind != crate::flowsim::WellKind::Legacy).map(|w| w.name.clone()).collect();
    let record = sample_observations(&forecast.sim, &wells, &config.noise, seeds::named(config.seed, "noise"))?;
    Ok(TwinData { model, forecast, record })
}

fn build_prior(config: &ScenarioConfig) -> Result<PriorData, PipelineError> {
    let ensemble = prior_ensemble(config)?;
    let forecasts = forecast_ensemble(&ensemble, config)?;
    Ok(PriorData { ensemble, forecasts })
}

/// Everything the truth and its record depend on.
fn twin_key(c: &ScenarioConfig) -> String {
    content_hash(&json!({
        "grid": c.grid, "variogram": c.variogram, "porosity": c.porosity, "layering": c.layering,
        "fluids": c.fluids, "boundary": c.boundary, "schedule": c.schedule, "numerics": c.numerics,
        "wells": c.wells, "legacy_wells": c.legacy_wells, "seed": c.seed, "noise": c.noise,
        "thresholds": c.thresholds, "leak_path": c.leak_path, "aquifer": c.aquifer, "onset_rate": c.onset_rate,
    }))
}

/// Everything the prior ensemble and its forecasts depend on.
fn prior_key(c: &ScenarioConfig) -> String {
    content_hash(&json!({ "twin": twin_key(c), "ensemble_size": c.ensemble_size }))
}

/// Cache of truths and prior forecasts shared by scenarios that agree on
/// the settings they depend on.
#[derive(Default)]
pub struct SharedContext {
    twins: Mutex<HashMap<String, Arc<TwinData>>>,
    priors: Mutex<HashMap<String, Arc<PriorData>>>,
}

impl SharedContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn twin(&self, config: &ScenarioConfig) -> Result<Arc<TwinData>, PipelineError> {
        cached(&self.twins, twin_key(config), || build_twin(config))
    }

    pub fn prior(&self, config: &ScenarioConfig) -> Result<Arc<PriorData>, PipelineError> {
        cached(&self.priors, prior_key(config), || build_prior(config))
    }
}

fn cached<T>(map: &Mutex<HashMap<String, Arc<T>>>, key: String, build: impl FnOnce() -> Result<T, PipelineError>) -> Result<Arc<T>, PipelineError> {
    if let Some(v) = map.lock().expect("cache lock").get(&key) {
        return Ok(v.clone());
    }
    let v = Arc::new(build()?);
    Ok(map.lock().expect("cache lock").entry(key).or_insert(v).clone())
}

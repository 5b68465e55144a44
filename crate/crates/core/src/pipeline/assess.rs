use std::sync::Arc;

use nalgebra::DMatrix;

use super::conformance::{conformance_check, Concordance};
use super::forecast::{forecast_ensemble, predictions, MemberForecast};
use super::report::{band_reduction, width_ratios, EpochRecord, RiskReport, StageReport, Termination, TruthSummary};
use super::twin::{PriorData, SharedContext, TwinData};
use super::{PipelineError, ScenarioConfig};
use crate::esmda::{
    assimilate, choose_alpha1, geometric_schedule, mismatch, AssimilationOptions, AssimilationOutcome, InflationSchedule, Localization,
    Parameterization, UpdateOptions,
};
use crate::flowsim::{simulate, SimOptions};
use crate::geomodel::{Ensemble, ReservoirModel};
use crate::observations::ObservationSet;
use crate::seeds;

/// Receives results as soon as they exist, so they survive a later failure.
pub trait AssessmentObserver {
    fn on_stage(&mut self, _stage: &StageReport, _ensemble: &Ensemble) -> std::io::Result<()> {
        Ok(())
    }

    fn on_epoch(&mut self, _epoch: &EpochRecord) -> std::io::Result<()> {
        Ok(())
    }

    /// Called with the partial report when the run fails.
    fn on_abort(&mut self, _partial: &RiskReport) -> std::io::Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl AssessmentObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct PosteriorData {
    pub ensemble: Ensemble,
    pub forecasts: Vec<MemberForecast>,
}

#[derive(Debug, Clone)]
pub struct AssessmentOutcome {
    pub report: RiskReport,
    pub twin: Arc<TwinData>,
    pub prior: Arc<PriorData>,
    /// Posterior of the last completed epoch with data.
    pub posterior: Option<PosteriorData>,
}

/// Prior risk forecast, then per epoch: conformance check, assimilation of
/// all data up to the epoch cut-off, re-forecast and bands.
pub fn run_dynamic_assessment(config: &ScenarioConfig) -> Result<RiskReport, PipelineError> {
    run_assessment(config, &SharedContext::new(), &mut NoObserver).map(|o| o.report)
}

/// [`run_dynamic_assessment`] with a shared cache and an observer.
pub fn run_assessment(config: &ScenarioConfig, ctx: &SharedContext, observer: &mut dyn AssessmentObserver) -> Result<AssessmentOutcome, PipelineError> {
    config.validate()?;
    let mut report = RiskReport::new(config);
    match assess(config, ctx, observer, &mut report) {
        Ok(o) => Ok(o),
        Err(e) => {
            report.termination = Termination::Aborted { error: e.to_string() };
            if let Err(io) = observer.on_abort(&report) {
                log::error!("could not persist partial results: {io}");
            }
            Err(e)
        }
    }
}

fn assess(
    config: &ScenarioConfig,
    ctx: &SharedContext,
    observer: &mut dyn AssessmentObserver,
    report: &mut RiskReport,
) -> Result<AssessmentOutcome, PipelineError> {
    let twin = ctx.twin(config)?;
    report.truth = TruthSummary::from_forecast(&twin.forecast);
    let prior = ctx.prior(config)?;
    let prior_stage = StageReport::from_forecasts("prior", 0.0, 0, &prior.forecasts)?;
    observer.on_stage(&prior_stage, &prior.ensemble)?;
    report.stages.push(prior_stage);

    let mut posterior: Option<PosteriorData> = None;
    let cutoffs = config.epoch_cutoffs();
    for (e, &cutoff) in cutoffs.iter().enumerate() {
        let label = format!("epoch{}", e + 1);
        let obs = twin.observations(config, cutoff);
        let mut record = EpochRecord {
            index: e + 1,
            cutoff_years: cutoff,
            n_data: obs.len(),
            conformance: None,
            alphas: Vec::new(),
            mismatch_history: Vec::new(),
            innovation_history: Vec::new(),
            resampled: 0,
            band_reduction: None,
        };
        if obs.is_empty() {
            log::info!("{label}: no data up to {cutoff} yr, prior stands");
            let stage = StageReport { label, data_years: cutoff, ..report.stages[0].clone() };
            observer.on_epoch(&record)?;
            observer.on_stage(&stage, &prior.ensemble)?;
            report.epochs.push(record);
            report.stages.push(stage);
            continue;
        }
        let current = posterior.as_ref().map_or(&prior.forecasts, |p| &p.forecasts);
        let before = mismatch(&predictions(current, &obs)?, &obs)?;
        let status = conformance_check(&before, report.stages.last().expect("prior stage"), config);
        log::info!("{label}: {} data, concordance {:?} ({:.3}), decision {:?}", obs.len(), status.concordance, status.statistic, status.decision);
        let halt = status.concordance == Concordance::Major;
        record.conformance = Some(status);
        if halt {
            observer.on_epoch(&record)?;
            report.epochs.push(record);
            report.termination = Termination::Halted { epoch: e + 1 };
            break;
        }

        let prior_preds = predictions(&prior.forecasts, &obs)?;
        let (outcome, schedule) = assimilate_epoch(config, &prior.ensemble, &obs, cutoff, Some(prior_preds))?;
        let forecasts = forecast_ensemble(&outcome.posterior, config)?;
        let stage = StageReport::from_forecasts(&label, cutoff, obs.len(), &forecasts)?;
        let reduction = band_reduction(report.stages.last().expect("prior stage"), &stage);
        record.alphas = schedule.alphas;
        record.mismatch_history = outcome.history.iter().map(|h| h.mean).collect();
        record.innovation_history = outcome.history.iter().map(|h| h.innovation).collect();
        record.resampled = outcome.resampled;
        record.band_reduction = Some(reduction);
        observer.on_epoch(&record)?;
        observer.on_stage(&stage, &outcome.posterior)?;
        report.epochs.push(record);
        report.stages.push(stage);
        posterior = Some(PosteriorData { ensemble: outcome.posterior, forecasts });
        if e + 1 < cutoffs.len() && reduction < config.min_reduction {
            log::info!("{label}: bands narrowed by {:.1}%, stopping", 100.0 * reduction);
            report.termination = Termination::NoSignificantReduction { after_epoch: e + 1, reduction };
            break;
        }
    }
    if let (Some(p), Some(f)) = (report.prior(), report.final_stage()) {
        report.width_ratios = width_ratios(p, f);
    }
    Ok(AssessmentOutcome { report: report.clone(), twin, prior, posterior })
}

/// Geometric inflation schedule whose first factor is set from the prior
/// mismatch.
pub fn inflation_schedule(config: &ScenarioConfig, prior_predictions: &DMatrix<f64>, obs: &ObservationSet) -> Result<InflationSchedule, PipelineError> {
    let na = config.assimilation.n_assimilations;
    let report = mismatch(prior_predictions, obs)?;
    let alpha1 = choose_alpha1(&report, na, config.assimilation.alpha_max);
    Ok(geometric_schedule(na, alpha1)?)
}

/// Forward model of the assimilation: the schedule truncated at the data
/// cut-off, returning predictions in observation order.
pub fn forward_model<'a>(config: &'a ScenarioConfig, obs: &'a ObservationSet, cutoff_years: f64) -> impl Fn(&ReservoirModel) -> Result<Vec<f64>, PipelineError> + Sync + 'a {
    let wells = config.well_specs();
    let schedule = config.schedule.truncated(cutoff_years);
    let options = SimOptions { record_fields: false, ..config.numerics.clone() };
    move |m: &ReservoirModel| {
        let sim = simulate(m, &wells, &schedule, &config.fluids, config.boundary, &options)?;
        Ok(sim.predict(&obs.labels)?)
    }
}

pub fn assimilation_options(config: &ScenarioConfig, ens: &Ensemble, obs: &ObservationSet) -> AssimilationOptions {
    let a = &config.assimilation;
    let parameterization = Parameterization::for_ensemble(ens);
    let g = &*ens.geometry;
    let localization = a.localization_half_width.map(|half_width| Localization {
        param_xy: parameterization.coordinates(g),
        obs_xy: obs
            .labels
            .iter()
            .map(|l| {
                let site = config.site(&l.well).expect("observed wells are configured");
                let (i, j) = g.locate(site.x, site.y);
                g.column_center(i, j)
            })
            .collect(),
        half_width,
    });
    AssimilationOptions {
        update: UpdateOptions { svd_energy: a.svd_energy, bounds: a.log_perm_bounds },
        parameterization,
        localization,
        max_failure_fraction: a.max_failure_fraction,
    }
}

/// ES-MDA-GEO from `prior` on `obs` (data up to `cutoff_years`).
pub fn assimilate_epoch(
    config: &ScenarioConfig,
    prior: &Ensemble,
    obs: &ObservationSet,
    cutoff_years: f64,
    prior_predictions: Option<DMatrix<f64>>,
) -> Result<(AssimilationOutcome, InflationSchedule), PipelineError> {
    let forward = forward_model(config, obs, cutoff_years);
    let preds = match prior_predictions {
        Some(p) => p,
        None => {
            use rayon::prelude::*;
            let cols = prior.members.par_iter().map(&forward).collect::<Result<Vec<_>, _>>()?;
            DMatrix::from_fn(obs.len(), prior.len(), |i, j| cols[j][i])
        }
    };
    let schedule = inflation_schedule(config, &preds, obs)?;
    log::info!("inflation factors {:?}", schedule.alphas);
    let options = assimilation_options(config, prior, obs);
    let outcome = assimilate(prior, obs, &schedule, forward, seeds::named(config.seed, "esmda"), &options, Some(preds))?;
    Ok((outcome, schedule))
}

use std::fmt::Display;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{esmda_update, mismatch, EsmdaError, InflationSchedule, Localization, MismatchReport, Result, UpdateOptions};
use crate::geomodel::{Ensemble, GridGeometry};
use crate::observations::ObservationSet;
use crate::seeds;

/// Which log-permeability entries form the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// Top layer only, replicated downwards after each update.
    #[default]
    TopLayer,
    AllCells,
}

impl Parameterization {
    /// `TopLayer` when every member has identical layers.
    pub fn for_ensemble(ens: &Ensemble) -> Self {
        if ens.members.iter().all(|m| m.layers_identical()) {
            Parameterization::TopLayer
        } else {
            Parameterization::AllCells
        }
    }

    pub fn len(&self, g: &GridGeometry) -> usize {
        match self {
            Parameterization::TopLayer => g.n_columns(),
            Parameterization::AllCells => g.n_cells(),
        }
    }

    pub fn is_empty(&self, g: &GridGeometry) -> bool {
        self.len(g) == 0
    }

    /// Map-view position of each parameter.
    pub fn coordinates(&self, g: &GridGeometry) -> Vec<(f64, f64)> {
        (0..self.len(g))
            .map(|p| {
                let (i, j, _) = g.ijk(p % g.n_columns());
                g.column_center(i, j)
            })
            .collect()
    }

    pub fn extract(&self, ens: &Ensemble) -> DMatrix<f64> {
        let nm = self.len(&ens.geometry);
        DMatrix::from_fn(nm, ens.len(), |i, j| ens.members[j].log_perm[i])
    }

    pub fn apply(&self, ens: &mut Ensemble, params: &DMatrix<f64>) {
        for (j, m) in ens.members.iter_mut().enumerate() {
            self.apply_member(&mut m.log_perm, params.column(j).as_slice());
        }
    }

    fn apply_member(&self, log_perm: &mut [f64], p: &[f64]) {
        match self {
            Parameterization::AllCells => log_perm.copy_from_slice(p),
            Parameterization::TopLayer => {
                for layer in log_perm.chunks_mut(p.len()) {
                    layer.copy_from_slice(p);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssimilationOptions {
    pub update: UpdateOptions,
    pub parameterization: Parameterization,
    pub localization: Option<Localization>,
    /// Abort when more than this fraction of members fail a forward run.
    pub max_failure_fraction: f64,
}

impl Default for AssimilationOptions {
    fn default() -> Self {
        Self {
            update: UpdateOptions::default(),
            parameterization: Parameterization::TopLayer,
            localization: None,
            max_failure_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssimilationOutcome {
    pub posterior: Ensemble,
    /// Mismatch before each round and after the last.
    pub history: Vec<MismatchReport>,
    /// Posterior predictions in observation order (`N_d x N_e`).
    pub predictions: DMatrix<f64>,
    /// Members resampled after forward failures, over all rounds.
    pub resampled: usize,
}

/// Runs `schedule.n_steps()` rounds of forward runs and updates.
///
/// `prior_predictions`, when given, stands in for the first forward run.
/// Round `i` perturbs observations from the stream `(seed, i)`.
pub fn assimilate<F, E>(
    prior: &Ensemble,
    obs: &ObservationSet,
    schedule: &InflationSchedule,
    forward: F,
    seed: u64,
    options: &AssimilationOptions,
    prior_predictions: Option<DMatrix<f64>>,
) -> Result<AssimilationOutcome>
where
    F: Fn(&crate::geomodel::ReservoirModel) -> std::result::Result<Vec<f64>, E> + Sync,
    E: Display,
{
    schedule.validate()?;
    let ne = prior.len();
    if ne < 2 {
        return Err(EsmdaError::TooFewMembers(ne));
    }
    if obs.is_empty() {
        return Ok(AssimilationOutcome { posterior: prior.clone(), history: Vec::new(), predictions: DMatrix::zeros(0, ne), resampled: 0 });
    }
    obs.validate_for_assimilation()?;
    let param = options.parameterization;
    if param == Parameterization::TopLayer && !prior.members.iter().all(|m| m.layers_identical()) {
        return Err(EsmdaError::Dimension("top-layer parameterization needs identical layers".into()));
    }
    let limit = (options.max_failure_fraction * ne as f64).floor() as usize;
    let mut runner = Runner { forward: &forward, nd: obs.len(), limit, seed, param, resampled: 0 };

    let mut ens = prior.clone();
    let mut preds = match prior_predictions {
        Some(p) if p.nrows() == obs.len() && p.ncols() == ne => p,
        Some(p) => return Err(EsmdaError::Dimension(format!("prior predictions are {}x{}", p.nrows(), p.ncols()))),
        None => runner.run(&mut ens, 0)?,
    };
    let mut history = Vec::with_capacity(schedule.n_steps() + 1);
    for (round, &alpha) in schedule.alphas.iter().enumerate() {
        let report = mismatch(&preds, obs)?;
        log::info!("round {}/{}: alpha {:.4}, mean mismatch {:.4}", round + 1, schedule.n_steps(), alpha, report.mean);
        history.push(report);
        let m = param.extract(&ens);
        let updated = esmda_update(&m, &preds, obs, alpha, seeds::derive(seed, &[round as u64]), &options.update, options.localization.as_ref())?;
        param.apply(&mut ens, &updated);
        preds = runner.run(&mut ens, round + 1)?;
    }
    let last = mismatch(&preds, obs)?;
    log::info!("after assimilation: mean mismatch {:.4}", last.mean);
    history.push(last);
    Ok(AssimilationOutcome { posterior: ens, history, predictions: preds, resampled: runner.resampled })
}

struct Runner<'f, F> {
    forward: &'f F,
    nd: usize,
    limit: usize,
    seed: u64,
    param: Parameterization,
    resampled: usize,
}

const MAX_RESAMPLE_ATTEMPTS: u64 = 3;

impl<F, E> Runner<'_, F>
where
    F: Fn(&crate::geomodel::ReservoirModel) -> std::result::Result<Vec<f64>, E> + Sync,
    E: Display,
{
    fn eval(&self, m: &crate::geomodel::ReservoirModel) -> std::result::Result<Vec<f64>, String> {
        match (self.forward)(m) {
            Ok(d) if d.len() == self.nd => Ok(d),
            Ok(d) => Err(format!("forward model returned {} values, expected {}", d.len(), self.nd)),
            Err(e) => Err(e.to_string()),
        }
    }

    fn run(&mut self, ens: &mut Ensemble, round: usize) -> Result<DMatrix<f64>> {
        let ne = ens.len();
        let limit = self.limit;
        let mut results: Vec<std::result::Result<Vec<f64>, String>> = ens.members.par_iter().map(|m| self.eval(m)).collect();
        let failed = |r: &[std::result::Result<Vec<f64>, String>]| -> Vec<usize> { (0..r.len()).filter(|&j| r[j].is_err()).collect() };
        let too_many = |f: &[usize], r: &[std::result::Result<Vec<f64>, String>]| EsmdaError::TooManyFailures {
            round,
            failed: f.len(),
            total: ne,
            limit,
            last: r[*f.last().unwrap()].clone().err().unwrap_or_default(),
        };
        let mut bad = failed(&results);
        if bad.len() > limit {
            return Err(too_many(&bad, &results));
        }
        for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
            if bad.is_empty() {
                break;
            }
            self.resample(ens, &bad, round, attempt);
            let redo: Vec<_> = bad.par_iter().map(|&j| self.eval(&ens.members[j])).collect();
            for (&j, r) in bad.iter().zip(redo) {
                if let Err(e) = &r {
                    log::warn!("round {round}: member {j} failed again after resampling: {e}");
                }
                results[j] = r;
            }
            bad = failed(&results);
        }
        if !bad.is_empty() {
            return Err(too_many(&bad, &results));
        }
        let mut out = DMatrix::zeros(self.nd, ne);
        for (j, r) in results.into_iter().enumerate() {
            out.column_mut(j).copy_from_slice(&r.expect("failures handled above"));
        }
        Ok(out)
    }

    /// Redraws failed members from the Gaussian fitted to the others.
    fn resample(&mut self, ens: &mut Ensemble, bad: &[usize], round: usize, attempt: u64) {
        let all = self.param.extract(ens);
        let good: Vec<usize> = (0..ens.len()).filter(|j| !bad.contains(j)).collect();
        let ng = good.len();
        let mean = good.iter().map(|&j| all.column(j).into_owned()).fold(nalgebra::DVector::zeros(all.nrows()), |a, c| a + c) / ng as f64;
        let norm = 1.0 / ((ng.max(2) - 1) as f64).sqrt();
        for &j in bad {
            log::warn!("round {round}: forward run failed for member {j}; resampling (attempt {})", attempt + 1);
            let mut rng = seeds::rng(seeds::derive(self.seed, &[0x5e5a_u64, round as u64, j as u64, attempt]));
            let mut p = mean.clone();
            for &k in &good {
                let z: f64 = StandardNormal.sample(&mut rng);
                p += (all.column(k) - &mean) * (z * norm);
            }
            self.param.apply_member(&mut ens.members[j].log_perm, p.as_slice());
            self.resampled += 1;
        }
    }
}

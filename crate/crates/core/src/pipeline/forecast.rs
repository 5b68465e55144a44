use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{PipelineError, ScenarioConfig};
use crate::flowsim::{simulate_with, SimOptions, SimulationResult, DAYS_PER_YEAR};
use crate::geomodel::{Ensemble, GridGeometry, ReservoirModel};
use crate::leakpath::{leakage_series, LeakageSeries};
use crate::observations::ObservationSet;
use crate::receptor::{impact_series, ImpactSeries};
use crate::riskmetrics::{ensemble_band, pressure_plume_area, saturation_plume_area, EnsembleBand};

/// One member run through reservoir, leakage and aquifer components.
#[derive(Debug, Clone)]
pub struct MemberForecast {
    /// Full-schedule simulation without field snapshots.
    pub sim: SimulationResult,
    /// Map-view plume areas [m^2], starting with t = 0.
    pub pressure_area: Vec<f64>,
    pub saturation_area: Vec<f64>,
    /// One entry per configured legacy well, in config order.
    pub leakage: Vec<LeakageSeries>,
    pub impacts: Vec<ImpactSeries>,
}

impl MemberForecast {
    /// Named time series on the report axis (t = 0 first).
    pub fn series(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::with_capacity(6 * self.leakage.len() + 2);
        for (leak, imp) in self.leakage.iter().zip(&self.impacts) {
            let w = &leak.well;
            let tr = self.sim.trace(w).expect("leakage wells are simulated");
            out.push((format!("{w}.pressure"), std::iter::once(tr.initial_pressure).chain(tr.pressure.iter().copied()).collect()));
            out.push((format!("{w}.saturation"), std::iter::once(0.0).chain(tr.saturation.iter().copied()).collect()));
            out.push((format!("{w}.q_co2"), leak.q_co2.clone()));
            out.push((format!("{w}.q_brine"), leak.q_brine.clone()));
            out.push((format!("{w}.v_ph"), imp.v_ph.clone()));
            out.push((format!("{w}.v_tds"), imp.v_tds.clone()));
        }
        out.push(("pressure_area".into(), self.pressure_area.clone()));
        out.push(("saturation_area".into(), self.saturation_area.clone()));
        out
    }

    /// CO2 onset [yr] per legacy well, censored at the end of the run.
    pub fn onsets(&self) -> Vec<(String, f64)> {
        let end = self.sim.report_times.last().copied().unwrap_or(0.0) / DAYS_PER_YEAR;
        self.leakage.iter().map(|l| (format!("{}.onset", l.well), l.onset_years.unwrap_or(end))).collect()
    }
}

/// Report axis [yr] including t = 0.
pub fn report_axis_years(sim: &SimulationResult) -> Vec<f64> {
    std::iter::once(0.0).chain(sim.report_times.iter().map(|t| t / DAYS_PER_YEAR)).collect()
}

pub fn forecast_member(model: &ReservoirModel, config: &ScenarioConfig) -> Result<MemberForecast, PipelineError> {
    let opts = SimOptions { record_fields: false, ..config.numerics.clone() };
    let g = &*model.geometry;
    let mut pressure_area = vec![0.0];
    let mut saturation_area = vec![0.0];
    let p0 = initial_pressure(g, config);
    let mut area_err = None;
    let sim = simulate_with(model, &config.well_specs(), &config.schedule, &config.fluids, config.boundary, &opts, &mut |_, p, s| {
        match (pressure_plume_area(g, p, &p0, config.thresholds.overpressure), saturation_plume_area(g, s, config.thresholds.saturation)) {
            (Ok(a), Ok(b)) => {
                pressure_area.push(a);
                saturation_area.push(b);
            }
            (Err(e), _) | (_, Err(e)) => area_err = Some(e),
        }
    })?;
    if let Some(e) = area_err {
        return Err(e.into());
    }
    let mut leakage = Vec::with_capacity(config.legacy_wells.len());
    let mut impacts = Vec::with_capacity(config.legacy_wells.len());
    for w in &config.legacy_wells {
        let leak = leakage_series(&sim, w, &config.leak_path, &config.fluids, config.onset_rate)?;
        impacts.push(impact_series(&leak, &config.aquifer)?);
        leakage.push(leak);
    }
    Ok(MemberForecast { sim, pressure_area, saturation_area, leakage, impacts })
}

/// Hydrostatic state the simulator starts from.
fn initial_pressure(g: &GridGeometry, config: &ScenarioConfig) -> Vec<f64> {
    (0..g.n_cells()).map(|c| config.fluids.hydrostatic_pressure(g.cell_center_depth(c))).collect()
}

/// Forecasts every member; members run in parallel, results keep member order.
pub fn forecast_ensemble(ens: &Ensemble, config: &ScenarioConfig) -> Result<Vec<MemberForecast>, PipelineError> {
    ens.members.par_iter().map(|m| forecast_member(m, config)).collect()
}

/// Predicted data (`N_d x N_e`) from full-schedule forecasts.
pub fn predictions(forecasts: &[MemberForecast], obs: &ObservationSet) -> Result<DMatrix<f64>, PipelineError> {
    let mut d = DMatrix::zeros(obs.len(), forecasts.len());
    for (j, f) in forecasts.iter().enumerate() {
        let col = f.sim.predict(&obs.labels)?;
        d.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    Ok(d)
}

/// Percentile bands of every series and onset time over an ensemble.
pub fn ensemble_bands(forecasts: &[MemberForecast]) -> Result<(BTreeMap<String, EnsembleBand>, BTreeMap<String, EnsembleBand>), PipelineError> {
    let mut series: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut onsets: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for f in forecasts {
        for (name, s) in f.series() {
            series.entry(name).or_default().push(s);
        }
        for (name, t) in f.onsets() {
            onsets.entry(name).or_default().push(vec![t]);
        }
    }
    let band = |m: BTreeMap<String, Vec<Vec<f64>>>| -> Result<BTreeMap<String, EnsembleBand>, PipelineError> {
        m.into_iter().map(|(k, v)| Ok((k, ensemble_band(&v)?))).collect()
    };
    Ok((band(series)?, band(onsets)?))
}

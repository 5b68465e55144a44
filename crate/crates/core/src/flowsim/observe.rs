use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FlowError, Result, SimulationResult};
use crate::observations::{ObsLabel, ObservationSet, Quantity};
use crate::seeds;

/// Observation noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// [Pa]
    pub pressure_std: f64,
    pub saturation_std: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { pressure_std: 1.0e4, saturation_std: 0.02 }
    }
}

impl NoiseSpec {
    pub fn std(&self, q: Quantity) -> f64 {
        match q {
            Quantity::Pressure => self.pressure_std,
            Quantity::Saturation => self.saturation_std,
        }
    }
}

fn quantity_tag(q: Quantity) -> u64 {
    match q {
        Quantity::Pressure => 1,
        Quantity::Saturation => 2,
    }
}

/// Noisy pressure and saturation at every report time for `wells`.
///
/// Ordered by time, then by `wells`, then pressure before saturation. The
/// noise draw of each datum depends only on `(seed, well, quantity, report)`,
/// so subsets and truncations of the same experiment see identical values.
pub fn sample_observations(
    result: &SimulationResult,
    wells: &[String],
    noise: &NoiseSpec,
    seed: u64,
) -> Result<ObservationSet> {
    if !(noise.pressure_std >= 0.0 && noise.saturation_std >= 0.0) {
        return Err(FlowError::NegativeNoise);
    }
    let traces = wells.iter().map(|w| result.trace(w)).collect::<Result<Vec<_>>>()?;
    let n = result.report_times.len() * wells.len() * 2;
    let (mut labels, mut values, mut variances) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (k, &t) in result.report_times.iter().enumerate() {
        for tr in &traces {
            for q in Quantity::ALL {
                let truth = match q {
                    Quantity::Pressure => tr.pressure[k],
                    Quantity::Saturation => tr.saturation[k],
                };
                let sd = noise.std(q);
                let mut rng = seeds::rng(seeds::derive(seed, &[seeds::name_tag(&tr.well.name), quantity_tag(q), k as u64]));
                let z: f64 = StandardNormal.sample(&mut rng);
                labels.push(ObsLabel { time_days: t, well: tr.well.name.clone(), quantity: q });
                values.push(truth + sd * z);
                variances.push(sd * sd);
            }
        }
    }
    Ok(ObservationSet { labels, values, variances })
}

/// Noise-free well traces as CSV `time,well,quantity,value`.
pub fn write_traces_csv<W: Write>(result: &SimulationResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "time,well,quantity,value")?;
    for (k, t) in result.report_times.iter().enumerate() {
        for tr in &result.traces {
            writeln!(w, "{t},{},pressure,{}", tr.well.name, tr.pressure[k])?;
            writeln!(w, "{t},{},saturation,{}", tr.well.name, tr.saturation[k])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::flowsim::{simulate, Boundary, FluidRockProps, InjectionSchedule, SimOptions, WellKind, WellSpec, MONTH_DAYS, MT_PER_YEAR};
    use crate::geomodel::{GridGeometry, ReservoirModel};

    fn run(years: f64) -> SimulationResult {
        let g = Arc::new(GridGeometry::uniform(7, 7, 1, 1400.0, 1400.0, 20.0, 1000.0).unwrap());
        let n = g.n_cells();
        let m = ReservoirModel::new(0, g, vec![4.5; n], vec![0.2; n]).unwrap();
        let wells: Vec<WellSpec> = [("M3", 3, 3, WellKind::Injector), ("M1", 1, 1, WellKind::Monitor), ("M2", 5, 1, WellKind::Monitor), ("M4", 5, 5, WellKind::Monitor), ("M5", 1, 5, WellKind::Monitor)]
            .iter()
            .map(|(n, i, j, k)| WellSpec::new(n, *i, *j, *k))
            .collect();
        let s = InjectionSchedule { rate: 0.1 * MT_PER_YEAR, injection_years: years, post_injection_years: 0.0, report_interval_days: MONTH_DAYS };
        simulate(&m, &wells, &s, &FluidRockProps::default(), Boundary::ConstantPressure, &SimOptions::default()).unwrap()
    }

    fn names() -> Vec<String> {
        ["M1", "M2", "M3", "M4", "M5"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn noiseless_observations_equal_traces() {
        let r = run(1.0);
        let obs = sample_observations(&r, &names(), &NoiseSpec { pressure_std: 0.0, saturation_std: 0.0 }, 3).unwrap();
        let pred = r.predict(&obs.labels).unwrap();
        assert_eq!(obs.values, pred);
        assert!(obs.variances.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn five_years_of_monthly_data_from_five_wells() {
        let r = run(5.0);
        let obs = sample_observations(&r, &names(), &NoiseSpec::default(), 1).unwrap();
        assert_eq!(obs.len(), 600);
        assert_eq!(obs.labels[0].quantity, Quantity::Pressure);
        assert_eq!(obs.labels[1].quantity, Quantity::Saturation);
        assert_eq!(obs.labels[2].well, "M2");
        // truncation and subsets reuse the same draws
        let short = sample_observations(&r, &names()[..2], &NoiseSpec::default(), 1).unwrap();
        assert_eq!(short.values[..4], obs.values[..4]);
    }

    #[test]
    fn noise_has_configured_spread() {
        let r = run(1.0 / 12.0);
        let noise = NoiseSpec { pressure_std: 2.0e4, saturation_std: 0.02 };
        let truth = r.trace("M1").unwrap().pressure[0];
        let w = vec!["M1".to_string()];
        let n = 10_000;
        let draws: Vec<f64> = (0..n).map(|s| sample_observations(&r, &w, &noise, s).unwrap().values[0] - truth).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd / noise.pressure_std - 1.0).abs() < 0.03, "sd {sd}");
    }

    #[test]
    fn negative_noise_and_unknown_wells_rejected() {
        let r = run(1.0 / 12.0);
        assert!(matches!(sample_observations(&r, &names(), &NoiseSpec { pressure_std: -1.0, saturation_std: 0.0 }, 0), Err(FlowError::NegativeNoise)));
        assert!(sample_observations(&r, &["X".to_string()], &NoiseSpec::default(), 0).is_err());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let r = run(1.0 / 12.0);
        let mut buf = Vec::new();
        write_traces_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,well,quantity,value\n"));
        assert_eq!(text.lines().count(), 1 + 5 * 2);
    }
}

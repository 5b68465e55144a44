//! Aquifer impact: pH and TDS plume volumes driven by leakage rates.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leakpath::LeakageSeries;

#[derive(Debug, Error)]
#[error("invalid aquifer properties: {0}")]
pub struct ReceptorError(String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AquiferProps {
    /// [m]
    pub thickness: f64,
    pub porosity: f64,
    /// pH plume coefficient [m^3 (kg/s)^-a].
    pub c_ph: f64,
    pub a_ph: f64,
    /// TDS plume coefficient [m^3 (kg/s)^-a].
    pub c_tds: f64,
    pub a_tds: f64,
    /// Relaxation time [days].
    pub tau_days: f64,
}

impl Default for AquiferProps {
    fn default() -> Self {
        Self { thickness: 30.0, porosity: 0.2, c_ph: 1.0e6, a_ph: 1.0, c_tds: 1.0e6, a_tds: 1.0, tau_days: 90.0 }
    }
}

impl AquiferProps {
    pub fn validate(&self) -> Result<(), ReceptorError> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !(pos(self.thickness) && pos(self.c_ph) && pos(self.c_tds) && pos(self.tau_days)) {
            return Err(ReceptorError("thickness, coefficients and tau must be positive".into()));
        }
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(ReceptorError("porosity must lie in (0, 1)".into()));
        }
        if !(self.a_ph > 0.0 && self.a_ph <= 2.0 && self.a_tds > 0.0 && self.a_tds <= 2.0) {
            return Err(ReceptorError("exponents must lie in (0, 2]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSeries {
    /// [m^3] per time of the driving series.
    pub v_ph: Vec<f64>,
    pub v_tds: Vec<f64>,
}

/// Volumes relaxing towards `c q^a` with time constant `tau`, starting
/// from zero. The target is held at its value at the end of each interval.
pub fn relax(times_days: &[f64], rate: &[f64], c: f64, a: f64, tau_days: f64) -> Vec<f64> {
    let mut v = 0.0;
    let mut out = Vec::with_capacity(rate.len());
    for k in 0..rate.len() {
        let target = if rate[k] > 0.0 { c * rate[k].powf(a) } else { 0.0 };
        if k == 0 {
            v = if times_days[0] > 0.0 { target * (1.0 - (-times_days[0] / tau_days).exp()) } else { 0.0 };
        } else {
            let decay = (-(times_days[k] - times_days[k - 1]) / tau_days).exp();
            v = target + (v - target) * decay;
        }
        out.push(v);
    }
    out
}

pub fn impact_series(leak: &LeakageSeries, props: &AquiferProps) -> Result<ImpactSeries, ReceptorError> {
    props.validate()?;
    Ok(ImpactSeries {
        v_ph: relax(&leak.times_days, &leak.q_co2, props.c_ph, props.a_ph, props.tau_days),
        v_tds: relax(&leak.times_days, &leak.q_brine, props.c_tds, props.a_tds, props.tau_days),
    })
}

/// Leakage and impact columns for one member and well.
pub fn write_member_csv<W: Write>(mut w: W, leak: &LeakageSeries, impact: &ImpactSeries) -> std::io::Result<()> {
    writeln!(w, "time,well,q_co2,q_brine,cum_co2,cum_brine,v_ph,v_tds")?;
    for k in 0..leak.times_days.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            leak.times_days[k], leak.well, leak.q_co2[k], leak.q_brine[k], leak.cum_co2[k], leak.cum_brine[k], impact.v_ph[k], impact.v_tds[k]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(q: f64, n: usize, dt: f64) -> LeakageSeries {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        LeakageSeries {
            well: "L".into(),
            times_days: times,
            q_co2: vec![q; n],
            q_brine: vec![0.0; n],
            cum_co2: vec![0.0; n],
            cum_brine: vec![0.0; n],
            onset_years: None,
        }
    }

    #[test]
    fn zero_leakage_zero_volume() {
        let v = impact_series(&series(0.0, 50, 30.0), &AquiferProps::default()).unwrap();
        assert!(v.v_ph.iter().chain(&v.v_tds).all(|x| *x == 0.0));
    }

    #[test]
    fn converges_to_power_law() {
        // c = 1e6, a = 1, q = 1e-4: 100 m^3
        let v = impact_series(&series(1e-4, 200, 30.0), &AquiferProps::default()).unwrap();
        assert!((v.v_ph.last().unwrap() - 100.0).abs() < 1.0);
    }

    #[test]
    fn step_reaches_95_percent_within_three_tau() {
        let p = AquiferProps::default();
        let times: Vec<f64> = (0..=1000).map(|k| k as f64).collect();
        let q: Vec<f64> = times.iter().map(|t| if *t > 500.0 { 2e-4 } else { 1e-4 }).collect();
        let v = relax(&times, &q, p.c_ph, p.a_ph, p.tau_days);
        assert!((v[500] - 100.0).abs() < 0.5);
        assert!(v[770] >= 190.0, "{}", v[770]);
        assert!(v[700] < 190.0);
    }

    #[test]
    fn higher_rate_larger_volume() {
        let p = AquiferProps::default();
        let a = impact_series(&series(1e-5, 100, 30.0), &p).unwrap();
        let b = impact_series(&series(2e-5, 100, 30.0), &p).unwrap();
        assert!(a.v_ph.iter().zip(&b.v_ph).all(|(x, y)| y >= x));
    }

    #[test]
    fn validation() {
        let bad = AquiferProps { a_ph: 2.5, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(AquiferProps { tau_days: 0.0, ..Default::default() }.validate().is_err());
    }
}

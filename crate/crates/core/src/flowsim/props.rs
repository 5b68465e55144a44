use serde::{Deserialize, Serialize};

use super::{FlowError, Result};

pub const GRAVITY: f64 = 9.806_65;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Fluid and rock constants for the immiscible CO2/brine system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidRockProps {
    /// CO2 density [kg/m^3].
    pub rho_co2: f64,
    /// Brine density [kg/m^3].
    pub rho_brine: f64,
    /// CO2 viscosity [Pa s].
    pub mu_co2: f64,
    /// Brine viscosity [Pa s].
    pub mu_brine: f64,
    pub corey_co2: f64,
    pub corey_brine: f64,
    /// CO2 relative permeability at maximum CO2 saturation.
    pub krc_endpoint: f64,
    /// Brine relative permeability at zero CO2 saturation.
    pub krb_endpoint: f64,
    pub residual_co2: f64,
    pub residual_brine: f64,
    /// Pore compressibility [1/Pa].
    pub rock_compressibility: f64,
    /// Pressure at the datum depth [Pa].
    pub datum_pressure: f64,
    /// Datum depth [m].
    pub datum_depth: f64,
    /// Vertical to horizontal permeability ratio.
    pub kv_kh: f64,
    /// Phase-density gravity in the flux potentials. When off, both phases
    /// use the brine gradient: hydrostatic equilibrium is kept but CO2 is not
    /// buoyant.
    pub gravity: bool,
}

impl Default for FluidRockProps {
    fn default() -> Self {
        Self {
            rho_co2: 700.0,
            rho_brine: 1000.0,
            mu_co2: 6.0e-5,
            mu_brine: 5.0e-4,
            corey_co2: 2.0,
            corey_brine: 2.0,
            krc_endpoint: 0.8,
            krb_endpoint: 1.0,
            residual_co2: 0.05,
            residual_brine: 0.2,
            rock_compressibility: 1.0e-9,
            datum_pressure: 101_325.0,
            datum_depth: 0.0,
            kv_kh: 0.1,
            gravity: true,
        }
    }
}

impl FluidRockProps {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FlowError::InvalidProps(m.to_string()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !(pos(self.rho_co2) && pos(self.rho_brine)) {
            return bad("densities must be positive");
        }
        if !(pos(self.mu_co2) && pos(self.mu_brine)) {
            return bad("viscosities must be positive");
        }
        if !(pos(self.corey_co2) && pos(self.corey_brine)) {
            return bad("Corey exponents must be positive");
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.krc_endpoint) && unit(self.krb_endpoint) && self.krc_endpoint > 0.0 && self.krb_endpoint > 0.0) {
            return bad("relative permeability endpoints must lie in (0, 1]");
        }
        if !(unit(self.residual_co2) && unit(self.residual_brine)) || self.residual_co2 + self.residual_brine >= 1.0 {
            return bad("residual saturations must be in [0, 1] and sum below 1");
        }
        if !pos(self.rock_compressibility) {
            return bad("rock compressibility must be positive");
        }
        if !(self.datum_pressure >= 0.0 && self.datum_pressure.is_finite() && self.datum_depth.is_finite()) {
            return bad("datum pressure must be non-negative");
        }
        if !pos(self.kv_kh) {
            return bad("kv_kh must be positive");
        }
        Ok(())
    }

    fn mobile_span(&self) -> f64 {
        1.0 - self.residual_co2 - self.residual_brine
    }

    /// CO2 relative permeability at CO2 saturation `s`.
    pub fn kr_co2(&self, s: f64) -> f64 {
        let se = ((s - self.residual_co2) / self.mobile_span()).clamp(0.0, 1.0);
        self.krc_endpoint * se.powf(self.corey_co2)
    }

    /// Brine relative permeability at CO2 saturation `s`.
    pub fn kr_brine(&self, s: f64) -> f64 {
        let se = ((1.0 - s - self.residual_brine) / self.mobile_span()).clamp(0.0, 1.0);
        self.krb_endpoint * se.powf(self.corey_brine)
    }

    pub fn mobilities(&self, s: f64) -> (f64, f64) {
        (self.kr_co2(s) / self.mu_co2, self.kr_brine(s) / self.mu_brine)
    }

    /// Hydrostatic brine pressure at `depth`.
    pub fn hydrostatic_pressure(&self, depth: f64) -> f64 {
        self.datum_pressure + self.rho_brine * GRAVITY * (depth - self.datum_depth)
    }

    /// CO2 density used in flux potentials.
    pub(crate) fn potential_rho_co2(&self) -> f64 {
        if self.gravity {
            self.rho_co2
        } else {
            self.rho_brine
        }
    }

    /// Lipschitz constants of the fractional flow `lc / lt` and of the
    /// gravity term `lc lb / lt` with respect to saturation.
    pub(crate) fn transport_lipschitz(&self) -> (f64, f64) {
        let n = 2000;
        let eval = |s: f64| {
            let (lc, lb) = self.mobilities(s);
            let lt = lc + lb;
            (lc / lt, lc * lb / lt)
        };
        let (mut l1, mut l2) = (0.0f64, 0.0f64);
        let mut prev = eval(0.0);
        for i in 1..=n {
            let s = i as f64 / n as f64;
            let cur = eval(s);
            l1 = l1.max(((cur.0 - prev.0) * n as f64).abs());
            l2 = l2.max(((cur.1 - prev.1) * n as f64).abs());
            prev = cur;
        }
        // finite differences under-estimate peaks slightly
        (l1 * 1.05, l2 * 1.05)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relperm_endpoints() {
        let p = FluidRockProps::default();
        assert_eq!(p.kr_co2(0.0), 0.0);
        assert_eq!(p.kr_co2(p.residual_co2), 0.0);
        assert_eq!(p.kr_brine(0.0), p.krb_endpoint);
        assert_eq!(p.kr_brine(1.0 - p.residual_brine), 0.0);
        assert!((p.kr_co2(1.0 - p.residual_brine) - p.krc_endpoint).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_residuals() {
        let p = FluidRockProps { residual_co2: 0.5, residual_brine: 0.5, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(FluidRockProps::default().validate().is_ok());
    }
}

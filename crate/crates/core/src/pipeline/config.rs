use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::flowsim::{Boundary, FluidRockProps, InjectionSchedule, NoiseSpec, SimOptions, WellKind, WellSpec, MONTH_DAYS, MT_PER_YEAR};
use crate::geomodel::{CovarianceModel, GridGeometry, Layering, VariogramSpec};
use crate::leakpath::{LeakPathSpec, ONSET_RATE};
use crate::receptor::AquiferProps;
use crate::riskmetrics::PlumeThresholds;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Example1,
    Rsu,
    Custom,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "example1" => Ok(Preset::Example1),
            "rsu" => Ok(Preset::Rsu),
            "custom" => Ok(Preset::Custom),
            other => Err(format!("unknown preset {other:?} (expected example1, rsu or custom)")),
        }
    }
}

/// A well placed by map coordinates [m]; resolved to a grid column per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellSite {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub kind: WellKind,
    #[serde(default)]
    pub completion: Vec<usize>,
}

impl WellSite {
    fn new(name: &str, x: f64, y: f64, kind: WellKind) -> Self {
        Self { name: name.to_string(), x, y, kind, completion: Vec::new() }
    }
}

/// Upper limits on forecast P90 values; `None` disables a check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceLimits {
    /// Peak CO2 leakage rate at any legacy well [kg/s].
    pub max_co2_rate: Option<f64>,
    /// Peak brine leakage rate at any legacy well [kg/s].
    pub max_brine_rate: Option<f64>,
    /// [m^2]
    pub max_pressure_area: Option<f64>,
    /// [m^2]
    pub max_saturation_area: Option<f64>,
    /// [m^3]
    pub max_ph_volume: Option<f64>,
}

/// Bounds on the normalized innovation statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcordanceBounds {
    pub minor: f64,
    pub major: f64,
}

impl Default for ConcordanceBounds {
    fn default() -> Self {
        Self { minor: 5.0, major: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssimilationSettings {
    /// Number of ES-MDA rounds.
    pub n_assimilations: usize,
    /// Largest admissible first inflation factor.
    pub alpha_max: f64,
    /// Fraction of scaled-sensitivity energy kept by the truncated SVD.
    pub svd_energy: f64,
    /// Gaspari-Cohn half-width [m]; `None` disables localization.
    pub localization_half_width: Option<f64>,
    /// Clamp for updated log-permeability [ln(mD)].
    pub log_perm_bounds: Option<(f64, f64)>,
    pub max_failure_fraction: f64,
}

impl Default for AssimilationSettings {
    fn default() -> Self {
        Self {
            n_assimilations: 4,
            alpha_max: crate::esmda::ALPHA_MAX,
            svd_energy: 0.999,
            localization_half_width: Some(700.0),
            log_perm_bounds: Some((-2.0, 10.0)),
            max_failure_fraction: 0.2,
        }
    }
}

/// Everything that defines one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub preset: Preset,
    pub grid: GridGeometry,
    pub variogram: VariogramSpec,
    pub porosity: f64,
    pub layering: Layering,
    pub fluids: FluidRockProps,
    pub boundary: Boundary,
    pub schedule: InjectionSchedule,
    pub numerics: SimOptions,
    pub wells: Vec<WellSite>,
    /// Monitoring wells whose data are assimilated, besides the injector.
    pub active_monitors: Vec<String>,
    /// Legacy wells evaluated as leakage pathways.
    pub legacy_wells: Vec<String>,
    /// Years of monitoring data available [yr].
    pub monitoring_duration: f64,
    /// Data cut-offs [yr] of successive assimilation epochs; empty means one
    /// epoch at `monitoring_duration`.
    pub epochs: Vec<f64>,
    pub ensemble_size: usize,
    pub assimilation: AssimilationSettings,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub thresholds: PlumeThresholds,
    pub leak_path: LeakPathSpec,
    pub aquifer: AquiferProps,
    /// CO2 rate defining leakage onset [kg/s].
    pub onset_rate: f64,
    pub performance: PerformanceLimits,
    pub concordance: ConcordanceBounds,
    /// Stop when an epoch narrows the bands by less than this fraction.
    pub min_reduction: f64,
}

fn err(field: &str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Config { field: field.to_string(), reason: reason.into() }
}

impl ScenarioConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Example1 => Self::example1(),
            Preset::Rsu => Self::rsu(),
            Preset::Custom => Self { name: "custom".into(), preset: Preset::Custom, ..Self::example1() },
        }
    }

    /// 4 km x 4 km synthetic reservoir at 1 km depth, 51x51x11 cells,
    /// 100 members, 1 Mt/yr for 5 years then 10 years of shut-in.
    pub fn example1() -> Self {
        let lx = 4000.0;
        let site = |name: &str, fx: f64, fy: f64, kind| WellSite::new(name, fx * lx, fy * lx, kind);
        let mut wells = vec![
            site("M1", 0.25, 0.75, WellKind::Monitor),
            site("M2", 0.75, 0.75, WellKind::Monitor),
            site("M3", 0.5, 0.5, WellKind::Injector),
            site("M4", 0.75, 0.25, WellKind::Monitor),
            site("M5", 0.25, 0.25, WellKind::Monitor),
        ];
        for (n, f) in [0.2, 0.4, 0.6, 0.8].into_iter().enumerate() {
            wells.push(site(&format!("L{}", n + 1), 0.5 + 0.25 * f, 0.5 - 0.25 * f, WellKind::Legacy));
        }
        wells.push(site("L5", 0.7, 0.7, WellKind::Legacy));
        Self {
            name: "example1".into(),
            preset: Preset::Example1,
            grid: GridGeometry::uniform(51, 51, 11, lx, lx, 25.0, 1000.0).expect("valid preset grid"),
            variogram: VariogramSpec {
                model: CovarianceModel::Exponential,
                range_x: 800.0,
                range_y: 800.0,
                sill: 1.0,
                mean_logk: 100f64.ln(),
            },
            porosity: 0.1,
            layering: Layering::Replicate,
            fluids: FluidRockProps { gravity: false, ..Default::default() },
            boundary: Boundary::ConstantPressure,
            schedule: InjectionSchedule { rate: MT_PER_YEAR, injection_years: 5.0, post_injection_years: 10.0, report_interval_days: MONTH_DAYS },
            numerics: SimOptions::default(),
            wells,
            active_monitors: ["M1", "M2", "M4", "M5"].map(String::from).to_vec(),
            legacy_wells: ["L1", "L2", "L3", "L4", "L5"].map(String::from).to_vec(),
            monitoring_duration: 5.0,
            epochs: Vec::new(),
            ensemble_size: 100,
            assimilation: AssimilationSettings::default(),
            seed: 1,
            noise: NoiseSpec::default(),
            thresholds: PlumeThresholds::default(),
            leak_path: LeakPathSpec::default(),
            aquifer: AquiferProps::default(),
            onset_rate: ONSET_RATE,
            performance: PerformanceLimits::default(),
            concordance: ConcordanceBounds::default(),
            min_reduction: 0.05,
        }
    }

    /// Field-scale reservoir on a 6 km x 6 km regular grid whose top dips
    /// from 2.8 km to 4.3 km, 10 years of injection and 50 of shut-in.
    pub fn rsu() -> Self {
        let lx = 6000.0;
        let thickness = 100.0;
        let mut grid = GridGeometry::uniform(51, 51, 10, lx, lx, thickness, 2800.0).expect("valid preset grid");
        grid.dip_x = (4300.0 - 2800.0 - thickness) / lx;
        let site = |name: &str, fx: f64, fy: f64, kind| WellSite::new(name, fx * lx, fy * lx, kind);
        let wells = vec![
            site("M1", 0.25, 0.75, WellKind::Monitor),
            site("M2", 0.75, 0.75, WellKind::Monitor),
            site("M3", 0.5, 0.5, WellKind::Injector),
            site("M4", 0.75, 0.25, WellKind::Monitor),
            site("M5", 0.25, 0.25, WellKind::Monitor),
            site("L1", 0.6, 0.45, WellKind::Legacy),
        ];
        Self {
            name: "rsu".into(),
            preset: Preset::Rsu,
            grid,
            variogram: VariogramSpec {
                model: CovarianceModel::Exponential,
                range_x: 1200.0,
                range_y: 1200.0,
                sill: 1.0,
                mean_logk: 50f64.ln(),
            },
            porosity: 0.1,
            schedule: InjectionSchedule { rate: MT_PER_YEAR, injection_years: 10.0, post_injection_years: 50.0, report_interval_days: MONTH_DAYS },
            wells,
            legacy_wells: vec!["L1".into()],
            monitoring_duration: 3.0,
            assimilation: AssimilationSettings { localization_half_width: Some(1500.0), ..Default::default() },
            ..Self::example1()
        }
    }

    /// Desk-scale variant: 21x21x3 cells over the same extent and thickness,
    /// 50 members.
    pub fn desk_scaled(&self) -> Self {
        let g = &self.grid;
        let (lx, ly) = g.lateral_extent();
        let mut grid = GridGeometry::uniform(21, 21, 3, lx, ly, g.total_thickness(), g.top_depth).expect("scaled grid from a valid grid");
        grid.dip_x = g.dip_x;
        Self { grid, ensemble_size: 50, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.grid.validate().map_err(|e| err("grid", e.to_string()))?;
        self.variogram.validate().map_err(|e| err("variogram", e.to_string()))?;
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(err("porosity", "must lie in (0, 1)"));
        }
        self.fluids.validate().map_err(|e| err("fluids", e.to_string()))?;
        self.schedule.validate().map_err(|e| err("schedule", e.to_string()))?;
        if !(self.numerics.max_pressure_step_days > 0.0) {
            return Err(err("numerics.max_pressure_step_days", "must be positive"));
        }
        if !(self.numerics.cfl > 0.0 && self.numerics.cfl <= 1.0) {
            return Err(err("numerics.cfl", "must lie in (0, 1]"));
        }
        self.validate_wells()?;
        let total = self.schedule.injection_years + self.schedule.post_injection_years;
        if !(self.monitoring_duration >= 0.0 && self.monitoring_duration.is_finite()) {
            return Err(err("monitoring_duration", "must be non-negative"));
        }
        if self.monitoring_duration > total + 1e-9 {
            return Err(err("monitoring_duration", format!("{} yr exceeds the simulated {} yr", self.monitoring_duration, total)));
        }
        for (i, e) in self.epochs.iter().enumerate() {
            let field = format!("epochs[{i}]");
            if !(*e >= 0.0 && *e <= self.monitoring_duration + 1e-9) {
                return Err(err(&field, "must lie between 0 and monitoring_duration"));
            }
            if i > 0 && *e <= self.epochs[i - 1] {
                return Err(err(&field, "epochs must be strictly increasing"));
            }
        }
        if self.ensemble_size < 2 {
            return Err(err("ensemble_size", "must be at least 2"));
        }
        let a = &self.assimilation;
        if a.n_assimilations == 0 {
            return Err(err("assimilation.n_assimilations", "must be at least 1"));
        }
        if !(a.alpha_max >= a.n_assimilations as f64) {
            return Err(err("assimilation.alpha_max", "must be at least n_assimilations"));
        }
        if !(a.svd_energy > 0.0 && a.svd_energy <= 1.0) {
            return Err(err("assimilation.svd_energy", "must lie in (0, 1]"));
        }
        if let Some(h) = a.localization_half_width {
            if !(h > 0.0 && h.is_finite()) {
                return Err(err("assimilation.localization_half_width", "must be positive"));
            }
        }
        if let Some((lo, hi)) = a.log_perm_bounds {
            if !(lo < hi) {
                return Err(err("assimilation.log_perm_bounds", "lower bound must be below upper bound"));
            }
        }
        if !(0.0..1.0).contains(&a.max_failure_fraction) {
            return Err(err("assimilation.max_failure_fraction", "must lie in [0, 1)"));
        }
        if !(self.noise.pressure_std > 0.0 && self.noise.saturation_std > 0.0) {
            return Err(err("noise", "standard deviations must be positive"));
        }
        self.thresholds.validate().map_err(|e| err("thresholds", e.to_string()))?;
        if !(self.leak_path.permeability > 0.0 && self.leak_path.area > 0.0) {
            return Err(err("leak_path", "permeability and area must be positive"));
        }
        self.aquifer.validate().map_err(|e| err("aquifer", e.to_string()))?;
        if !(self.onset_rate > 0.0) {
            return Err(err("onset_rate", "must be positive"));
        }
        if !(self.concordance.minor > 0.0 && self.concordance.minor <= self.concordance.major) {
            return Err(err("concordance", "need 0 < minor <= major"));
        }
        if !(0.0..1.0).contains(&self.min_reduction) {
            return Err(err("min_reduction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn validate_wells(&self) -> Result<(), PipelineError> {
        let (lx, ly) = self.grid.lateral_extent();
        let mut seen = std::collections::HashSet::new();
        for (i, w) in self.wells.iter().enumerate() {
            let field = format!("wells[{i}]");
            if w.name.is_empty() || w.name.contains(',') {
                return Err(err(&field, "name must be non-empty and free of commas"));
            }
            if !seen.insert(w.name.as_str()) {
                return Err(err(&field, format!("duplicate well name {}", w.name)));
            }
            if !(w.x >= 0.0 && w.x <= lx && w.y >= 0.0 && w.y <= ly) {
                return Err(err(&field, format!("{} lies outside the grid", w.name)));
            }
            if w.completion.iter().any(|&k| k >= self.grid.nz) {
                return Err(err(&field, "completion layer outside grid"));
            }
        }
        if self.wells.iter().filter(|w| w.kind == WellKind::Injector).count() != 1 {
            return Err(err("wells", "exactly one injector is required"));
        }
        let check = |field: &str, names: &[String], kind: WellKind| -> Result<(), PipelineError> {
            for n in names {
                match self.wells.iter().find(|w| w.name == *n) {
                    Some(w) if w.kind == kind => {}
                    Some(_) => return Err(err(field, format!("{n} is not a {kind:?} well").to_lowercase())),
                    None => return Err(err(field, format!("unknown well {n}"))),
                }
            }
            Ok(())
        };
        check("active_monitors", &self.active_monitors, WellKind::Monitor)?;
        check("legacy_wells", &self.legacy_wells, WellKind::Legacy)?;
        let mut cols = std::collections::HashMap::new();
        for w in &self.wells {
            if let Some(other) = cols.insert(self.grid.locate(w.x, w.y), &w.name) {
                return Err(err("wells", format!("{} and {} fall in the same grid column", other, w.name)));
            }
        }
        Ok(())
    }

    /// All wells as simulator wells; monitors and legacy wells act as probes.
    pub fn well_specs(&self) -> Vec<WellSpec> {
        self.wells
            .iter()
            .map(|w| {
                let (i, j) = self.grid.locate(w.x, w.y);
                WellSpec { name: w.name.clone(), i, j, kind: w.kind, completion: w.completion.clone() }
            })
            .collect()
    }

    /// The injector followed by the active monitors, in site order.
    pub fn observed_wells(&self) -> Vec<String> {
        self.wells
            .iter()
            .filter(|w| w.kind == WellKind::Injector || self.active_monitors.contains(&w.name))
            .map(|w| w.name.clone())
            .collect()
    }

    pub fn injector(&self) -> &WellSite {
        self.wells.iter().find(|w| w.kind == WellKind::Injector).expect("validated config has an injector")
    }

    pub fn site(&self, name: &str) -> Option<&WellSite> {
        self.wells.iter().find(|w| w.name == name)
    }

    pub fn total_years(&self) -> f64 {
        self.schedule.injection_years + self.schedule.post_injection_years
    }

    /// Data cut-offs [yr] of the assimilation epochs.
    pub fn epoch_cutoffs(&self) -> Vec<f64> {
        if self.epochs.is_empty() {
            vec![self.monitoring_duration]
        } else {
            self.epochs.clone()
        }
    }

    /// Seed registry: every named stream used by a run.
    pub fn seed_streams(&self) -> BTreeMap<String, u64> {
        ["prior", "truth", "noise", "esmda"].iter().map(|n| (n.to_string(), seeds::named(self.seed, n))).collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

/// SHA-256 of a value's canonical JSON form.
pub(crate) fn content_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config values serialize");
    let bytes = serde_json::to_vec(&v).expect("json values serialize");
    hex::encode(Sha256::digest(&bytes))
}

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::rc::Rc;
use std::time::Instant;

use co2risk_core::geomodel::{write_field_csv, Ensemble};
use co2risk_core::pipeline::{
    assimilate_epoch, prior_ensemble, run_assessment, run_scenario_suite_with, AssessmentObserver, EpochRecord, RiskReport, ScenarioConfig,
    SharedContext, StageReport, SuiteSummary, TruthSummary, report_axis_years,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cli::{ReportArgs, RunArgs};
use crate::config::{self, Scale};
use crate::error::{CliError, Result};
use crate::logging::RunLog;
use crate::rundir::{self, RunDir, CONFIG, OBSERVATIONS, RUN_LOG, SUMMARY};

/// Resolves the scenario named by the run flags.
pub fn resolve_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => config::load_config(path, args.preset, scale(args))?,
        None => config::resolve(Value::Object(Default::default()), "defaults", args.preset, scale(args))?,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn scale(args: &RunArgs) -> Scale {
    if args.full {
        Scale::Full
    } else {
        Scale::Desk
    }
}

fn out_dir(args: &RunArgs, command: &str, name: &str, seed: u64) -> PathBuf {
    args.out.clone().unwrap_or_else(|| args.out_root.join(format!("{command}-{}-seed{seed}", rundir::safe_name(name))))
}

/// Opens the run directory, its log and writes the resolved config.
fn start(args: &RunArgs, command: &str, config: &ScenarioConfig) -> Result<(RunDir, RunLog)> {
    let run = RunDir::create(&out_dir(args, command, &config.name, config.seed))?;
    let log = RunLog::open(&run.path(RUN_LOG)).map_err(|e| CliError::io("opening run log", e))?;
    log::info!("{command} {} (seed {}) -> {}", config.name, config.seed, run.root.display());
    run.write_json(CONFIG, config)?;
    Ok((run, log))
}

fn finish(run: RunDir, log: RunLog, command: &str, config: &ScenarioConfig) -> Result<PathBuf> {
    let root = run.root.clone();
    log::info!("{command} finished in {:.1} s", run.timings.values().sum::<f64>());
    drop(log);
    run.finish(command, Some(config), BTreeMap::new(), config.hash())?;
    Ok(root)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PriorsSummary {
    pub ensemble_size: usize,
    pub n_cells: usize,
    /// Ensemble mean and standard deviation of ln k over all cells.
    pub mean_log_perm: f64,
    pub std_log_perm: f64,
}

pub fn priors(args: &RunArgs) -> Result<PathBuf> {
    let config = resolve_config(args)?;
    let (mut run, log) = start(args, "priors", &config)?;
    let ens = run.timed("prior", || prior_ensemble(&config))?;
    run.write_ensemble("prior", &ens)?;
    let mean = ensemble_mean(&ens);
    write_field_csv(&run.path("ensembles/prior_mean.csv"), &ens.geometry, &mean)
        .map_err(|e| CliError::io("writing prior mean", std::io::Error::other(e)))?;
    let all: Vec<f64> = ens.members.iter().flat_map(|m| m.log_perm.iter().copied()).collect();
    let mu = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / all.len() as f64;
    run.write_json(SUMMARY, &PriorsSummary { ensemble_size: ens.len(), n_cells: ens.geometry.n_cells(), mean_log_perm: mu, std_log_perm: var.sqrt() })?;
    finish(run, log, "priors", &config)
}

fn ensemble_mean(ens: &Ensemble) -> Vec<f64> {
    let n = ens.geometry.n_cells();
    let mut mean = vec![0.0; n];
    for m in &ens.members {
        for (a, v) in mean.iter_mut().zip(&m.log_perm) {
            *a += v / ens.len() as f64;
        }
    }
    mean
}

pub fn truth(args: &RunArgs, ctx: &SharedContext) -> Result<PathBuf> {
    let config = resolve_config(args)?;
    let (mut run, log) = start(args, "truth", &config)?;
    let twin = run.timed("truth", || ctx.twin(&config))?;
    let ens = Ensemble::new(twin.model.geometry.clone(), vec![twin.model.clone()]).map_err(|e| CliError::Simulation(e.to_string()))?;
    run.write_ensemble("truth", &ens)?;
    let obs = twin.observations(&config, config.monitoring_duration);
    run.write_with(OBSERVATIONS, |w| obs.write_csv(w))?;
    let summary = TruthSummary::from_forecast(&twin.forecast);
    let times = report_axis_years(&twin.forecast.sim);
    run.write_with("truth.csv", |w| write_series_csv(w, &times, &summary.series))?;
    run.write_json(SUMMARY, &summary)?;
    finish(run, log, "truth", &config)
}

fn write_series_csv<W: std::io::Write>(mut w: W, times: &[f64], series: &BTreeMap<String, Vec<f64>>) -> std::io::Result<()> {
    let names: Vec<&str> = series.keys().map(String::as_str).collect();
    writeln!(w, "time_years,{}", names.join(","))?;
    for (k, t) in times.iter().enumerate() {
        let row: Vec<String> = series.values().map(|s| s.get(k).map_or(String::new(), |v| v.to_string())).collect();
        writeln!(w, "{t},{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssimilateSummary {
    pub cutoff_years: f64,
    pub n_data: usize,
    pub alphas: Vec<f64>,
    /// Mean `Phi/N_d` before each round and after the last.
    pub mismatch_history: Vec<f64>,
    pub innovation_history: Vec<f64>,
    pub resampled: usize,
}

pub fn assimilate(args: &RunArgs, ctx: &SharedContext) -> Result<PathBuf> {
    let config = resolve_config(args)?;
    let (mut run, log) = start(args, "assimilate", &config)?;
    let twin = run.timed("truth", || ctx.twin(&config))?;
    let prior = run.timed("prior", || prior_ensemble(&config))?;
    let cutoff = config.monitoring_duration;
    let obs = twin.observations(&config, cutoff);
    if obs.is_empty() {
        return Err(CliError::Config(format!("invalid config at monitoring_duration: no data up to {cutoff} yr")));
    }
    run.write_with(OBSERVATIONS, |w| obs.write_csv(w))?;
    run.write_ensemble("prior", &prior)?;
    let (outcome, schedule) = run.timed("assimilation", || assimilate_epoch(&config, &prior, &obs, cutoff, None))?;
    run.write_ensemble("posterior", &outcome.posterior)?;
    run.write_json(
        SUMMARY,
        &AssimilateSummary {
            cutoff_years: cutoff,
            n_data: obs.len(),
            alphas: schedule.alphas,
            mismatch_history: outcome.history.iter().map(|h| h.mean).collect(),
            innovation_history: outcome.history.iter().map(|h| h.innovation).collect(),
            resampled: outcome.resampled,
        },
    )?;
    finish(run, log, "assimilate", &config)
}

/// Persists stages and the partial report as the loop produces them.
struct DirObserver {
    dir: PathBuf,
    prefix: String,
    timings: Rc<RefCell<BTreeMap<String, f64>>>,
    last: Instant,
    error: Option<CliError>,
}

impl DirObserver {
    fn new(dir: PathBuf, prefix: String, timings: Rc<RefCell<BTreeMap<String, f64>>>) -> Self {
        Self { dir, prefix, timings, last: Instant::now(), error: None }
    }

    fn keep(&mut self, r: Result<()>) -> std::io::Result<()> {
        r.map_err(|e| {
            let io = std::io::Error::other(e.to_string());
            self.error = Some(e);
            io
        })
    }
}

impl AssessmentObserver for DirObserver {
    fn on_stage(&mut self, stage: &StageReport, ensemble: &Ensemble) -> std::io::Result<()> {
        let now = Instant::now();
        self.timings.borrow_mut().insert(format!("{}{}", self.prefix, stage.label), (now - self.last).as_secs_f64());
        self.last = now;
        let r = rundir::write_stage_csvs(&self.dir, stage).and_then(|_| rundir::write_ensemble(&self.dir, &stage.label, ensemble));
        self.keep(r)
    }

    fn on_epoch(&mut self, epoch: &EpochRecord) -> std::io::Result<()> {
        log::info!("{}epoch{} recorded ({} data)", self.prefix, epoch.index, epoch.n_data);
        Ok(())
    }

    fn on_abort(&mut self, partial: &RiskReport) -> std::io::Result<()> {
        let r = rundir::write_json(&self.dir.join(SUMMARY), partial);
        self.keep(r)
    }
}

pub fn assess(args: &RunArgs, ctx: &SharedContext) -> Result<PathBuf> {
    let config = resolve_config(args)?;
    let (mut run, log) = start(args, "assess", &config)?;
    let twin = run.timed("truth", || ctx.twin(&config))?;
    let last_cutoff = config.epoch_cutoffs().into_iter().fold(0.0, f64::max);
    let obs = twin.observations(&config, last_cutoff);
    run.write_with(OBSERVATIONS, |w| obs.write_csv(w))?;
    let timings = Rc::new(RefCell::new(BTreeMap::new()));
    let mut observer = DirObserver::new(run.root.clone(), String::new(), timings.clone());
    let result = run_assessment(&config, ctx, &mut observer);
    if let Some(e) = observer.error.take() {
        return Err(e);
    }
    let outcome = result?;
    run.timings.extend(timings.take());
    log::info!("termination: {:?}", outcome.report.termination);
    run.write_json(SUMMARY, &outcome.report)?;
    finish(run, log, "assess", &config)
}

/// Suite file: base overrides plus a `[[scenarios]]` array of per-scenario
/// overrides, each with a unique `name`.
pub fn suite_configs(args: &RunArgs) -> Result<Vec<ScenarioConfig>> {
    let (mut base, origin) = match &args.config {
        Some(path) => (config::read_overrides(path)?, path.display().to_string()),
        None => (Value::Object(Default::default()), "defaults".to_string()),
    };
    let scenarios = match base.as_object_mut().and_then(|m| m.remove("scenarios")) {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(CliError::Config(format!("{origin}: at scenarios: expected an array of tables"))),
        None => default_sweep(),
    };
    if scenarios.is_empty() {
        return Err(CliError::Config(format!("{origin}: at scenarios: no scenarios given")));
    }
    let mut out: Vec<ScenarioConfig> = Vec::new();
    for (i, overlay) in scenarios.into_iter().enumerate() {
        if !overlay.is_object() {
            return Err(CliError::Config(format!("{origin}: at scenarios[{i}]: expected a table")));
        }
        let mut merged = base.clone();
        config::deep_merge(&mut merged, overlay);
        let mut c = config::resolve(merged, &format!("{origin}: scenarios[{i}]"), args.preset, scale(args))?;
        if let Some(seed) = args.seed {
            c.seed = seed;
        }
        if out.iter().any(|o| rundir::safe_name(&o.name) == rundir::safe_name(&c.name)) {
            return Err(CliError::Config(format!("{origin}: at scenarios[{i}].name: duplicate scenario name {:?}", c.name)));
        }
        out.push(c);
    }
    Ok(out)
}

/// Monitoring-network sweep: all monitors, M2 and M4, M4 alone.
fn default_sweep() -> Vec<Value> {
    [("all-monitors", vec!["M1", "M2", "M4", "M5"]), ("m2-m4", vec!["M2", "M4"]), ("m4", vec!["M4"])]
        .into_iter()
        .map(|(name, mons)| serde_json::json!({ "name": name, "active_monitors": mons }))
        .collect()
}

pub fn suite(args: &RunArgs, ctx: &SharedContext) -> Result<PathBuf> {
    let configs = suite_configs(args)?;
    let name = configs.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("+");
    let seed = configs[0].seed;
    let mut run = RunDir::create(&out_dir(args, "suite", if configs.len() > 1 { "sweep" } else { &name }, seed))?;
    let log = RunLog::open(&run.path(RUN_LOG)).map_err(|e| CliError::io("opening run log", e))?;
    log::info!("suite of {} scenarios -> {}", configs.len(), run.root.display());
    for c in &configs {
        rundir::write_json(&run.root.join(rundir::safe_name(&c.name)).join(CONFIG), c)?;
    }
    let root = run.root.clone();
    let start = Instant::now();
    let timings = Rc::new(RefCell::new(BTreeMap::new()));
    let summary = run_scenario_suite_with(&configs, ctx, |c| {
        let name = rundir::safe_name(&c.name);
        Box::new(DirObserver::new(root.join(&name), format!("{name}/"), timings.clone()))
    });
    let mut timings = timings.take();
    timings.insert("suite".into(), start.elapsed().as_secs_f64());
    run.timings.extend(timings);
    rundir::write_suite_csvs(&root, &summary)?;
    run.write_json(SUMMARY, &summary)?;
    for e in &summary.entries {
        if let Some(r) = &e.report {
            rundir::write_json(&root.join(rundir::safe_name(&e.scenario)).join(SUMMARY), r)?;
        }
    }
    let failed: Vec<&str> = summary.entries.iter().filter(|e| e.error.is_some()).map(|e| e.scenario.as_str()).collect();
    let scenarios: BTreeMap<String, String> = configs.iter().map(|c| (c.name.clone(), c.hash())).collect();
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&scenarios).expect("hashes serialize")));
    drop(log);
    run.finish("suite", None, scenarios, hash)?;
    if !failed.is_empty() {
        return Err(CliError::Simulation(format!("scenarios failed: {}", failed.join(", "))));
    }
    Ok(root)
}

pub fn report(args: &ReportArgs) -> Result<PathBuf> {
    let dir = &args.run_dir;
    let manifest = rundir::read_manifest(dir)?;
    match manifest.command.as_str() {
        "assess" => {
            let r: RiskReport = rundir::read_json(dir, SUMMARY)?;
            rundir::write_report_csvs(dir, &r)?;
        }
        "suite" => {
            let s: SuiteSummary = rundir::read_json(dir, SUMMARY)?;
            rundir::write_suite_csvs(dir, &s)?;
        }
        other => {
            return Err(CliError::MissingRunDir { path: dir.clone(), reason: format!("{other} runs have no bands; expected an assess or suite run") });
        }
    }
    Ok(dir.clone())
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use co2risk_core::pipeline::{Preset, RiskReport, ScenarioConfig};
use co2risk_cli::cli::RunArgs;
use co2risk_cli::commands::resolve_config;
use co2risk_cli::rundir::{read_manifest, RunManifest};
use sha2::{Digest, Sha256};

const TINY: &str = r#"
name = "tiny"
ensemble_size = 8
monitoring_duration = 1.0
epochs = []

[grid]
nz = 1
layer_thickness = [25.0]

[schedule]
injection_years = 1.0
post_injection_years = 1.0
"#;

fn co2risk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_co2risk")).args(args).env_remove("CO2RISK_OUT").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn last_stderr_line(o: &Output) -> String {
    stderr(o).lines().last().unwrap_or_default().to_string()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

fn band_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("bands"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn check_inventory(dir: &Path, m: &RunManifest) {
    for f in &m.files {
        let bytes = fs::read(dir.join(&f.path)).unwrap();
        assert_eq!(f.bytes, bytes.len() as u64, "{}", f.path);
        assert_eq!(f.sha256, hex::encode(Sha256::digest(&bytes)), "{}", f.path);
    }
}

#[test]
fn assess_happy_path_writes_a_complete_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("run1");
    let o = co2risk(&["assess", "--preset", "example1", "--seed", "7", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_ok(&o);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), out.to_str().unwrap());

    let m = read_manifest(&out).unwrap();
    let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for p in [
        "bands/epoch1.csv",
        "bands/epoch1_onset.csv",
        "bands/prior.csv",
        "bands/prior_onset.csv",
        "config.json",
        "ensembles/epoch1.grid",
        "ensembles/prior.grid",
        "observations.csv",
        "run.log",
        "summary.json",
    ] {
        assert!(paths.contains(&p), "{p} missing from {paths:?}");
    }
    check_inventory(&out, &m);
    assert_eq!(m.command, "assess");
    let config = m.config.clone().unwrap();
    assert_eq!(config.seed, 7);
    assert_eq!(config.ensemble_size, 8);
    assert_eq!(config.hash(), m.config_hash);
    assert_eq!(m.seeds, config.seed_streams());
    assert!(m.timings.contains_key("truth") && m.timings.contains_key("prior") && m.timings.contains_key("epoch1"), "{:?}", m.timings);

    let echoed: ScenarioConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed, config);
    let report: RiskReport = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(report.config_hash, m.config_hash);
    assert_eq!(report.stages.len(), 2);
    assert!(fs::read_to_string(out.join("run.log")).unwrap().contains("assess tiny"));

    let before = band_files(&out);
    fs::remove_dir_all(out.join("bands")).unwrap();
    let o = co2risk(&["report", out.to_str().unwrap()]);
    assert_ok(&o);
    assert_eq!(band_files(&out), before);
    check_inventory(&out, &read_manifest(&out).unwrap());
}

#[test]
fn thread_count_does_not_change_band_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let mut bands = Vec::new();
    for t in ["1", "3"] {
        let out = tmp.path().join(format!("t{t}"));
        assert_ok(&co2risk(&["assess", "--threads", t, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
        bands.push(band_files(&out));
    }
    assert_eq!(bands[0], bands[1]);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = co2risk(&["assess", "--sede", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let line = last_stderr_line(&o);
    assert!(line.starts_with("error[usage] ") && line.contains("--sede"), "{line}");
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let o = co2risk(&["priors", "--preset", "example2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(last_stderr_line(&o).starts_with("error[usage] "));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "ensemble_size = 0\n");
    let o = co2risk(&["assess", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let line = last_stderr_line(&o);
    assert!(line.starts_with("error[config] ") && line.contains("ensemble_size"), "{line}");
    assert!(!tmp.path().join("r").join("manifest.json").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "typo.toml", "[schedule]\ninjection_yeras = 3\n");
    let o = co2risk(&["priors", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let line = last_stderr_line(&o);
    assert!(line.contains("schedule") && line.contains("injection_yeras"), "{line}");
}

#[test]
fn config_parse_error_has_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "broken.toml", "seed = 1\nname = \n");
    let o = co2risk(&["priors", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let line = last_stderr_line(&o);
    assert!(line.contains("line 2") && line.contains("column"), "{line}");
}

#[test]
fn missing_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = co2risk(&["report", tmp.path().join("nope").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(last_stderr_line(&o).starts_with("error[missing-run-dir] "));
    let o = co2risk(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    use co2risk_cli::CliError;
    let errors = [
        CliError::Usage(String::new()),
        CliError::Config(String::new()),
        CliError::MissingRunDir { path: PathBuf::new(), reason: String::new() },
        CliError::Simulation(String::new()),
        CliError::io("x", std::io::Error::other("y")),
    ];
    let mut codes: Vec<i32> = errors.iter().map(|e| e.exit_code()).collect();
    let mut classes: Vec<&str> = errors.iter().map(|e| e.class()).collect();
    codes.sort();
    codes.dedup();
    classes.sort();
    classes.dedup();
    assert_eq!((codes.len(), classes.len()), (5, 5));
    assert!(codes.iter().all(|&c| c != 0));
}

#[test]
fn rsu_assessment_records_its_schedule_and_three_year_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "rsu.toml", "ensemble_size = 4\nmonitoring_duration = 3\n[grid]\nnz = 1\nlayer_thickness = [100.0]\n");
    let out = tmp.path().join("rsu");
    assert_ok(&co2risk(&["assess", "--preset", "rsu", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let m = read_manifest(&out).unwrap();
    let c = m.config.unwrap();
    assert_eq!(c.preset, Preset::Rsu);
    assert_eq!((c.schedule.injection_years, c.schedule.post_injection_years), (10.0, 50.0));
    let report: RiskReport = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(report.epochs.len(), 1);
    assert_eq!(report.epochs[0].cutoff_years, 3.0);
    assert!(report.stages.last().unwrap().times_years.last().unwrap() > &59.9);
}

fn run_args(config: Option<PathBuf>, preset: Option<Preset>, full: bool) -> RunArgs {
    RunArgs { config, seed: None, out: None, preset, full, threads: None, out_root: PathBuf::from("runs") }
}

#[test]
fn empty_file_with_preset_gives_all_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "empty.toml", "");
    let c = resolve_config(&run_args(Some(cfg.clone()), Some(Preset::Example1), true)).unwrap();
    assert_eq!(c, ScenarioConfig::example1());
    assert_eq!((c.grid.nx, c.grid.ny, c.grid.nz, c.ensemble_size), (51, 51, 11, 100));
    assert_eq!((c.schedule.injection_years, c.schedule.post_injection_years), (5.0, 10.0));
    let desk = resolve_config(&run_args(Some(cfg), Some(Preset::Example1), false)).unwrap();
    assert_eq!((desk.grid.nx, desk.grid.ny, desk.grid.nz, desk.ensemble_size), (21, 21, 3, 50));
}

#[test]
fn resolved_config_reloads_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let c = resolve_config(&run_args(Some(cfg), None, false)).unwrap();
    let again = write_config(tmp.path(), "config.json", &serde_json::to_string_pretty(&c).unwrap());
    let back = resolve_config(&run_args(Some(again), None, false)).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
}

#[test]
fn default_output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let o = Command::new(env!("CARGO_BIN_EXE_co2risk"))
        .args(["priors", "--seed", "3", "--config", cfg.to_str().unwrap()])
        .env("CO2RISK_OUT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert_ok(&o);
    let dir = tmp.path().join("root").join("priors-tiny-seed3");
    let m = read_manifest(&dir).unwrap();
    check_inventory(&dir, &m);
    assert!(m.files.iter().any(|f| f.path == "ensembles/prior.grid"));
    let (header, fields) = co2risk_core::geomodel::read_grid_file(&dir.join("ensembles/prior.grid")).unwrap();
    assert_eq!((header.nx, header.nz, fields.len()), (21, 1, 8));
}

#[test]
fn truth_and_assimilate_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let t = tmp.path().join("truth");
    assert_ok(&co2risk(&["truth", "--config", cfg.to_str().unwrap(), "--out", t.to_str().unwrap()]));
    let obs = fs::read_to_string(t.join("observations.csv")).unwrap();
    assert!(obs.starts_with("time,well,quantity,value,std"));
    assert_eq!(obs.lines().count(), 1 + 12 * 5 * 2);
    assert!(read_manifest(&t).unwrap().files.iter().any(|f| f.path == "truth.csv"));

    let a = tmp.path().join("assim");
    assert_ok(&co2risk(&["assimilate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]));
    assert_eq!(fs::read_to_string(a.join("observations.csv")).unwrap(), obs);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["alphas"].as_array().unwrap().len(), 4);
    let inv: f64 = s["alphas"].as_array().unwrap().iter().map(|a| 1.0 / a.as_f64().unwrap()).sum();
    assert!((inv - 1.0).abs() < 1e-10);
    let m = read_manifest(&a).unwrap();
    assert!(m.files.iter().any(|f| f.path == "ensembles/posterior.grid"));
}

#[test]
fn suite_compares_scenarios_and_reports_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[[scenarios]]\nname = \"all\"\n\n[[scenarios]]\nname = \"m4\"\nactive_monitors = [\"M4\"]\n");
    let cfg = write_config(tmp.path(), "suite.toml", &text);
    let out = tmp.path().join("suite");
    assert_ok(&co2risk(&["suite", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.scenarios.keys().collect::<Vec<_>>(), ["all", "m4"]);
    check_inventory(&out, &m);
    let csv = fs::read(out.join("comparison.csv")).unwrap();
    let text = String::from_utf8_lossy(&csv);
    assert!(text.starts_with("scenario,metric,prior_width,final_width,ratio"));
    assert!(text.lines().any(|l| l.starts_with("m4,L4.q_brine,")));
    let before = (band_files(&out.join("all")), band_files(&out.join("m4")));
    fs::remove_file(out.join("comparison.csv")).unwrap();
    fs::remove_dir_all(out.join("m4").join("bands")).unwrap();
    assert_ok(&co2risk(&["report", out.to_str().unwrap()]));
    assert_eq!(fs::read(out.join("comparison.csv")).unwrap(), csv);
    assert_eq!((band_files(&out.join("all")), band_files(&out.join("m4"))), before);
}

#[test]
fn duplicate_suite_names_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[[scenarios]]\nname = \"a\"\n\n[[scenarios]]\nname = \"a\"\n");
    let cfg = write_config(tmp.path(), "suite.toml", &text);
    let o = co2risk(&["suite", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(last_stderr_line(&o).contains("scenarios[1].name"));
}

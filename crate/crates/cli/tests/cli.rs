//! End-to-end runs of the `coaxres` binary on shipped configs and on traces
//! it synthesizes itself.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coaxres_core::dataio::{write_trace, TraceFormat};
use coaxres_core::{SweepResult, C64};
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> String {
    root().join("configs").join(format!("{name}.json")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coaxres"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

/// Runs a command that must succeed and parses its JSON summary.
fn summary(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn bare_survey_lists_every_mode_at_the_cable_q() {
    let s = summary(&["survey", "--config", &config("bare")]);
    assert_eq!(s["count"], 21);
    assert_eq!(s["failed"], 0);
    for m in s["modes"].as_array().unwrap() {
        let q = m["q_i_n"].as_f64().unwrap();
        assert!(rel(q, 1.55e6) < 0.01, "n = {}: {q}", m["n"]);
    }
}

#[test]
fn splice_calibration_on_the_bundled_trace() {
    let data = root().join("data/splice_synth.s1p").display().to_string();
    let s = summary(&["calibrate-splice", "--config", &config("splice"), "--in", &data]);
    let r = s["r_cont"].as_f64().unwrap();
    assert!(rel(r, 6e-4) < 0.05, "{r}");
    assert_eq!(s["warnings"].as_array().unwrap().len(), 0);
}

#[test]
fn splice_calibration_from_a_fresh_synth_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("splice.csv").display().to_string();
    let args = ["--config", &config("splice"), "--set", "topology.splice.r_cont=3e-4", "--seed", "7"];
    summary(&[&["synth", "--out", &trace][..], &args].concat());
    assert!(Path::new(&format!("{trace}.json")).exists());
    let s = summary(&[&["calibrate-splice", "--in", &trace][..], &args].concat());
    let r = s["r_cont"].as_f64().unwrap();
    assert!(rel(r, 3e-4) < 0.05, "{r}");
}

#[test]
fn chip_calibration_from_two_synth_traces() {
    let dir = tempfile::tempdir().unwrap();
    let half = dir.path().join("half.s1p").display().to_string();
    let quarter = dir.path().join("quarter.s1p").display().to_string();
    summary(&["synth", "--config", &config("chip_halfwave"), "--out", &half]);
    summary(&["synth", "--config", &config("chip_quarterwave"), "--out", &quarter]);
    let s = summary(&["calibrate-chip", "--config", &config("chip_halfwave"), "--in", &half, "--in", &quarter]);
    let (r, rs) = (s["r_cont"].as_f64().unwrap(), s["r_shunt"].as_f64().unwrap());
    assert!(rel(r, 8.5e-4) < 0.10, "{r}");
    assert!(rel(rs, 1.3e7) < 0.25, "{rs}");
}

#[test]
fn trace_subcommands_run_on_synth_output() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bare.s1p").display().to_string();
    let window = dir.path().join("window.s1p").display().to_string();
    let bare = config("bare");
    summary(&["synth", "--config", &bare, "--seed", "3", "--out", &trace]);

    let found = summary(&["find", "--config", &bare, "--in", &trace]);
    assert_eq!(found["count"], 21);
    let surveyed = summary(&["survey", "--config", &bare, "--in", &trace]);
    assert_eq!(surveyed["fitted"], 21);
    let fsr = summary(&["fsr", "--config", &bare, "--in", &trace]);
    assert!((fsr["fsr"].as_f64().unwrap() - 120.4e6).abs() < 0.5e6, "{}", fsr["fsr"]);

    // one mode on a uniform grid, about ten linewidths either side of n = 41
    let one = [
        "--config", &bare, "--set", "sweep.grid=uniform", "--fmin", "4.93611e9", "--fmax", "4.93622e9",
        "--points", "801",
    ];
    summary(&[&["synth", "--out", &window][..], &one].concat());
    let fit = summary(&["fit", "--config", &bare, "--in", &window]);
    assert_eq!(fit["fit"]["mode_n"], 41);
    assert!(rel(fit["fit"]["q_i"].as_f64().unwrap(), 1.55e6) < 0.05, "{}", fit["fit"]);

    let photon = summary(&[
        "photon", "--config", &bare, "--set", "power.f_target=4.93617e9", "--set", "power.p_generator=[1e-7]",
        "--in", &window,
    ]);
    let row = &photon["table"][0];
    assert!(row["n_photon"].as_f64().unwrap() > 0.0, "{row}");
}

#[test]
fn fit_without_a_dip_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.s1p");
    let f: Vec<f64> = (0..401).map(|i| 4.9e9 + 100.0 * i as f64).collect();
    let flat = SweepResult::new(f, vec![C64::new(0.3, 0.9); 401]).unwrap();
    write_trace(&flat, &path, TraceFormat::Touchstone).unwrap();
    let out = run(&["fit", "--in", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no resonance in window"));
}

#[test]
fn invalid_overrides_exit_2_and_name_the_key() {
    for (set, key) in [("noise.sigma=-1", "noise.sigma"), ("sweep.colour=1", "sweep.colour")] {
        let out = run(&["survey", "--set", set]);
        assert_eq!(out.status.code(), Some(2), "{set}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(key), "{set}");
    }
    let out = run(&["fit"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bare = config("bare");
    let read = |p: &Path| std::fs::read(p).unwrap();
    let mut traces = Vec::new();
    for k in 0..2 {
        let p = dir.path().join(format!("t{k}.s1p"));
        let s = run(&["synth", "--config", &bare, "--seed", "11", "--out", &p.display().to_string()]);
        assert!(s.status.success());
        traces.push(p);
    }
    assert_eq!(read(&traces[0]), read(&traces[1]));
    let input = traces[0].display().to_string();
    let a = run(&["survey", "--config", &bare, "--in", &input]);
    let b = run(&["survey", "--config", &bare, "--in", &input]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_writes_every_plot_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let s = summary(&["report", "--out", &out.display().to_string()]);
    for name in s["files"].as_array().unwrap() {
        let path = out.join(name.as_str().unwrap());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().count() > 1, "{}", path.display());
    }
    assert!(out.join("summary.json").exists());
    let half = s["chip_mean_q_i"]["half_wave"].as_f64().unwrap();
    let quarter = s["chip_mean_q_i"]["quarter_wave"].as_f64().unwrap();
    assert!(half > quarter, "{half} vs {quarter}");
}

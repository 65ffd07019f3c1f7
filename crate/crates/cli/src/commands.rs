//! Subcommand implementations. Each writes its result as a JSON summary.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use coaxres_core::dataio::{read_trace, synthesize, topology_hash, write_atomic, write_trace, ConfigDocument, NoiseModel, TraceFormat};
use coaxres_core::engine::calibrate::{self as cal, FamilyMeans, GlobalFitResult};
use coaxres_core::engine::fit::ResonanceFitResult;
use coaxres_core::engine::power::power_sweep_table;
use coaxres_core::engine::resonances::find_dips;
use coaxres_core::engine::survey::{
    fit_dip, fsr_residuals, mean_q, mode_survey_with, survey_trace, ModeRecord, SurveyOptions,
};
use coaxres_core::topology::{ChipCableTopology, ResonatorTopology};
use coaxres_core::{Error, SweepResult};
use serde_json::{json, Value};

use crate::Common;

/// Pretty JSON with a trailing newline; maps serialise with sorted keys.
pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary serialises");
    s.push('\n');
    s
}

/// Summary goes to `--out` when given, otherwise to stdout.
fn emit(c: &Common, summary: Value) -> Result<()> {
    let text = to_json(&summary);
    match &c.out {
        Some(p) => write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn single_input(c: &Common) -> Result<&Path> {
    match c.inputs.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Usage("--in <trace> is required".into()).into()),
        _ => Err(Error::Usage("exactly one --in trace expected".into()).into()),
    }
}

fn load_trace(path: &Path) -> Result<SweepResult> {
    read_trace(path).map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))
}

/// The trace restricted to `--fmin/--fmax` when either is given.
fn band(c: &Common, s: SweepResult) -> SweepResult {
    if c.fmin.is_none() && c.fmax.is_none() {
        return s;
    }
    s.window(c.fmin.unwrap_or(0.0), c.fmax.unwrap_or(f64::INFINITY))
}

fn survey_options(cfg: &ConfigDocument) -> SurveyOptions {
    SurveyOptions {
        fit: cfg.fit,
        ..SurveyOptions::default()
    }
}

pub fn simulate(c: &Common, noisy: bool) -> Result<()> {
    let cfg = c.load_config()?;
    let out = c
        .out
        .as_ref()
        .ok_or_else(|| Error::Usage("--out <trace> is required".into()))?;
    let noise = if noisy { cfg.noise } else { NoiseModel::none() };
    let sweep = synthesize(&cfg.topology, &cfg.sweep.grid_spec(), &noise, &cfg.port)?;
    let format = TraceFormat::from_path(out);
    write_trace(&sweep, out, format)?;
    let summary = json!({
        "command": if noisy { "synth" } else { "simulate" },
        "output": out.display().to_string(),
        "format": format.name(),
        "points": sweep.len(),
        "f_min": sweep.freqs[0],
        "f_max": sweep.freqs[sweep.len() - 1],
        "topology_kind": cfg.topology.kind(),
        "topology_sha256": topology_hash(&cfg.topology),
        "noise": noise,
    });
    let mut sidecar = out.clone().into_os_string();
    sidecar.push(".json");
    write_atomic(&PathBuf::from(sidecar), to_json(&summary).as_bytes())?;
    print!("{}", to_json(&summary));
    Ok(())
}

pub fn find(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    let path = single_input(c)?;
    let sweep = band(c, load_trace(path)?);
    sweep.validate()?;
    let dips = find_dips(&sweep, cfg.fit.min_dip_db, 0.25 * cfg.topology.fsr());
    emit(
        c,
        json!({
            "command": "find",
            "input": path.display().to_string(),
            "count": dips.len(),
            "resonances": dips,
        }),
    )
}

pub fn fit(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    let path = single_input(c)?;
    let sweep = band(c, load_trace(path)?);
    sweep.validate()?;
    let dips = find_dips(&sweep, cfg.fit.min_dip_db, 0.25 * cfg.topology.fsr());
    let dip = dips
        .iter()
        .min_by(|a, b| a.min_power.total_cmp(&b.min_power))
        .ok_or(Error::NoResonance)?;
    let template: ResonatorTopology = cfg.topology.bare_equivalent().into();
    let fit = fit_dip(&sweep, dip, &template, &cfg.port, None, &cfg.fit)?;
    if !fit.converged {
        log::warn!("fit did not converge in {} iterations", fit.iterations);
    }
    emit(
        c,
        json!({
            "command": "fit",
            "input": path.display().to_string(),
            "fit": fit,
        }),
    )
}

/// Modes from the single `--in` trace, or from the configured model.
fn modes_for(c: &Common, cfg: &ConfigDocument) -> Result<(Vec<ModeRecord>, String)> {
    if c.inputs.is_empty() {
        let modes = mode_survey_with(&cfg.topology, cfg.sweep.f_min, cfg.sweep.f_max, &cfg.port, &survey_options(cfg))?;
        return Ok((modes, format!("model:{}", cfg.topology.kind())));
    }
    let path = single_input(c)?;
    let sweep = band(c, load_trace(path)?);
    Ok((survey_trace(&sweep, &cfg.topology, &cfg.port, &cfg.fit)?, path.display().to_string()))
}

fn survey_summary(modes: &[ModeRecord]) -> Value {
    let ok = modes.iter().filter(|m| m.is_ok()).count();
    json!({
        "count": modes.len(),
        "fitted": ok,
        "failed": modes.len() - ok,
        "mean_q_i": mean_q(modes, 0.0, f64::INFINITY, |_| true),
        "modes": modes,
    })
}

pub fn survey(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    let (modes, source) = modes_for(c, &cfg)?;
    let mut summary = survey_summary(&modes);
    summary["command"] = json!("survey");
    summary["source"] = json!(source);
    emit(c, summary)
}

/// Least-squares slope of `f_n` against `n`.
pub fn fitted_fsr(modes: &[ModeRecord]) -> Option<f64> {
    let k = modes.len() as f64;
    if modes.len() < 2 {
        return None;
    }
    let mn = modes.iter().map(|m| m.n as f64).sum::<f64>() / k;
    let mf = modes.iter().map(|m| m.f_n).sum::<f64>() / k;
    let sxy: f64 = modes.iter().map(|m| (m.n as f64 - mn) * (m.f_n - mf)).sum();
    let sxx: f64 = modes.iter().map(|m| (m.n as f64 - mn).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn fsr(c: &Common, fsr: Option<f64>) -> Result<()> {
    let cfg = c.load_config()?;
    let (modes, source) = modes_for(c, &cfg)?;
    let modes: Vec<ModeRecord> = modes.into_iter().filter(|m| m.is_ok()).collect();
    let fsr = match fsr {
        Some(v) if v > 0.0 => v,
        Some(v) => bail!(Error::validation("fsr", format!("{v} must be > 0"))),
        None => fitted_fsr(&modes).ok_or_else(|| Error::Usage("FSR residuals need at least two modes".into()))?,
    };
    let residuals = fsr_residuals(&modes, fsr)?;
    let rows: Vec<Value> = modes
        .iter()
        .zip(&residuals)
        .map(|(m, r)| json!({"n": m.n, "f_n": m.f_n, "residual_hz": r, "current_class": m.current_class}))
        .collect();
    emit(
        c,
        json!({
            "command": "fsr",
            "source": source,
            "fsr": fsr,
            "residuals": rows,
        }),
    )
}

fn calibration_summary(command: &str, r: &GlobalFitResult) -> Value {
    json!({
        "command": command,
        "r_cont": r.r_cont,
        "r_shunt": r.r_shunt,
        "fixed_cable_q": r.fixed_cable_q,
        "targets": r.targets,
        "model_means": r.model_means,
        "objective_value": r.objective_value,
        "warnings": r.warnings,
        "measured": r.measured,
        "model": r.model,
        "model_b": r.model_b,
    })
}

pub fn calibrate_splice_cmd(cfg: &ConfigDocument, inputs: &[PathBuf], fmin: Option<f64>, fmax: Option<f64>) -> Result<GlobalFitResult> {
    let ResonatorTopology::Splice(template) = cfg.topology else {
        bail!(Error::validation("topology", "calibrate-splice needs a splice topology"));
    };
    let opts = survey_options(cfg);
    let q = cfg.calibration.fixed_cable_q;
    if let Some(t) = cfg.calibration.targets {
        if !inputs.is_empty() {
            bail!(Error::Usage("give either calibration.targets or --in traces, not both".into()));
        }
        let means = FamilyMeans { node: t.a, antinode: t.b };
        return Ok(cal::calibrate_splice_means(means, q, &template, &cfg.port, &opts)?);
    }
    let [path] = inputs else {
        bail!(Error::Usage("calibrate-splice needs one --in trace or calibration.targets".into()));
    };
    let sweep = load_trace(path)?.window(fmin.unwrap_or(0.0), fmax.unwrap_or(f64::INFINITY));
    let measured = survey_trace(&sweep, &cfg.topology, &cfg.port, &cfg.fit)?;
    Ok(cal::calibrate_splice(&measured, q, &template, &cfg.port, &opts)?)
}

pub fn calibrate_splice(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    let r = calibrate_splice_cmd(&cfg, &c.inputs, c.fmin, c.fmax)?;
    emit(c, calibration_summary("calibrate-splice", &r))
}

fn chip_templates(cfg: &ConfigDocument) -> Result<(ChipCableTopology, ChipCableTopology)> {
    let ResonatorTopology::Chip(base) = cfg.topology else {
        bail!(Error::validation("topology", "calibrate-chip needs a chip topology"));
    };
    let [l_half, l_quarter] = cfg.calibration.chip_cpw_lengths;
    let mut half = base;
    half.cpw.length = l_half;
    let mut quarter = base;
    quarter.cpw.length = l_quarter;
    Ok((half, quarter))
}

pub fn calibrate_chip(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    let (half, quarter) = chip_templates(&cfg)?;
    let opts = survey_options(&cfg);
    let q = cfg.calibration.fixed_cable_q;
    let r = if let Some(t) = cfg.calibration.targets {
        if !c.inputs.is_empty() {
            bail!(Error::Usage("give either calibration.targets or --in traces, not both".into()));
        }
        cal::calibrate_chip_means((t.a, t.b), q, (&half, &quarter), &cfg.port, &opts)?
    } else {
        let [p_half, p_quarter] = c.inputs.as_slice() else {
            bail!(Error::Usage(
                "calibrate-chip needs two --in traces (half-wave, then quarter-wave) or calibration.targets".into()
            ));
        };
        let m_half = survey_trace(&band(c, load_trace(p_half)?), &half.into(), &cfg.port, &cfg.fit)?;
        let m_quarter = survey_trace(&band(c, load_trace(p_quarter)?), &quarter.into(), &cfg.port, &cfg.fit)?;
        cal::calibrate_chip(&m_half, &m_quarter, q, (&half, &quarter), &cfg.port, &opts)?
    };
    emit(c, calibration_summary("calibrate-chip", &r))
}

/// Fit of the mode nearest `f_target` in one trace.
pub fn fit_nearest(sweep: &SweepResult, cfg: &ConfigDocument, f_target: f64) -> Result<ResonanceFitResult> {
    let dips = find_dips(sweep, cfg.fit.min_dip_db, 0.25 * cfg.topology.fsr());
    let dip = dips
        .iter()
        .min_by(|a, b| (a.f0 - f_target).abs().total_cmp(&(b.f0 - f_target).abs()))
        .ok_or(Error::NoResonance)?;
    let template: ResonatorTopology = cfg.topology.bare_equivalent().into();
    Ok(fit_dip(sweep, dip, &template, &cfg.port, None, &cfg.fit)?)
}

pub fn photon(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    if c.inputs.is_empty() {
        bail!(Error::Usage("photon needs one --in trace per generator power".into()));
    }
    let fits = c
        .inputs
        .iter()
        .map(|p| fit_nearest(&load_trace(p)?, &cfg, cfg.power.f_target))
        .collect::<Result<Vec<_>>>()?;
    let table = power_sweep_table(&fits, &cfg.power.p_generator, cfg.power.chain_attenuation)?;
    emit(
        c,
        json!({
            "command": "photon",
            "chain_attenuation": cfg.power.chain_attenuation,
            "inputs": c.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "fits": fits,
            "table": table,
        }),
    )
}

/// Maps a missing `--out` to a usage error.
pub fn require_out(c: &Common) -> Result<&Path> {
    c.out
        .as_deref()
        .ok_or_else(|| anyhow!(Error::Usage("--out <directory> is required".into())))
}

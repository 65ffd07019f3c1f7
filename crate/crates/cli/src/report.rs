//! CSV plot data for fits, mode surveys, FSR residuals and power tables,
//! plus a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use coaxres_core::abcd::constants::C;
use coaxres_core::dataio::{synthesize, write_atomic, ConfigDocument, GridSpec, NoiseModel};
use coaxres_core::engine::calibrate::{family_means, overall_mean};
use coaxres_core::engine::fit::{model_trace, ResonanceFitResult};
use coaxres_core::engine::power::power_sweep_table;
use coaxres_core::engine::resonances::nearest_mode;
use coaxres_core::engine::survey::{fsr_residuals, mode_survey_with, ModeRecord, SurveyOptions};
use coaxres_core::topology::{
    BareCableTopology, ChipCableTopology, CurrentClass, ResonatorTopology, SplicedCableTopology, CABLE_EPS_R,
};
use coaxres_core::{PortSpec, TransmissionLineSpec};
use serde_json::json;

use crate::commands::{fit_nearest, require_out, to_json};
use crate::Common;

/// Free spectral range the splice residuals are referenced to, Hz.
pub const SPLICE_FSR: f64 = 120.75e6;

/// Bare cable whose n = 41 mode sits at 4.902 GHz with the exemplary fit
/// parameters (l = 0.9999 m, C_in = 3.602 fF, Q_i = 1.556e6).
pub fn exemplary_bare() -> ResonatorTopology {
    let eps = (C * 41.0 / (2.0 * 0.9999 * 4.902e9)).powi(2);
    let mut b = BareCableTopology::default();
    b.launch = TransmissionLineSpec::from_permittivity(50.0, 0.1, eps, None);
    b.resonator = TransmissionLineSpec::from_permittivity(50.0, 0.9999, eps, Some(1.556e6));
    b.c_in = 3.602e-15;
    b.into()
}

/// Default splice with the total length set for a given free spectral range.
pub fn splice_with_fsr(fsr: f64) -> ResonatorTopology {
    let total = C / (2.0 * CABLE_EPS_R.sqrt() * fsr);
    SplicedCableTopology::with_total_length(total, 6e-4).into()
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(64 * rows.len());
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn class_name(m: &ModeRecord) -> &'static str {
    match m.current_class {
        CurrentClass::Node => "node",
        CurrentClass::Antinode => "antinode",
        CurrentClass::Intermediate => "intermediate",
    }
}

fn mode_rows(label: &str, modes: &[ModeRecord]) -> Vec<String> {
    modes
        .iter()
        .map(|m| {
            let mut s = String::new();
            if !label.is_empty() {
                let _ = write!(s, "{label},");
            }
            let _ = write!(
                s,
                "{},{:e},{:e},{},{:e}",
                m.n,
                m.f_n,
                m.q_i_n,
                class_name(m),
                m.current_ratio
            );
            s
        })
        .collect()
}

fn exemplary_trace(
    cfg: &ConfigDocument,
    topology: &ResonatorTopology,
    port: &PortSpec,
    seed: u64,
) -> Result<coaxres_core::SweepResult> {
    let f0 = nearest_mode(topology, 4.902e9, port)?;
    let half = 10.0 * f0 / 8.926e5;
    let grid = GridSpec::Uniform {
        f_min: f0 - half,
        f_max: f0 + half,
        points: cfg.fit.min_points.max(401),
    };
    let noise = NoiseModel { seed, ..cfg.noise };
    Ok(synthesize(topology, &grid, &noise, port)?)
}

pub fn run(c: &Common) -> Result<()> {
    let cfg = c.load_config()?;
    let dir = require_out(c)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let port = cfg.port;
    let opts = SurveyOptions {
        fit: cfg.fit,
        ..SurveyOptions::default()
    };
    let (lo, hi) = (cfg.sweep.f_min, cfg.sweep.f_max);

    // exemplary n = 41 fit
    let bare41 = exemplary_bare();
    let trace = exemplary_trace(&cfg, &bare41, &port, cfg.noise.seed)?;
    let fit41 = fit_nearest(&trace, &cfg, 4.902e9)?;
    let template: ResonatorTopology = bare41.bare_equivalent().into();
    let model = model_trace(&template, &fit41, &trace.freqs, &port)?;
    let rows: Vec<String> = trace
        .freqs
        .iter()
        .zip(&trace.s11)
        .zip(&model)
        .map(|((f, d), m)| format!("{f:e},{:e},{:e},{:e},{:e}", d.norm_sqr(), d.arg(), m.norm_sqr(), m.arg()))
        .collect();
    write_csv(dir, "fig1b_fit.csv", "freq_hz,power_data,phase_data,power_model,phase_model", &rows)?;

    // bare-cable Q_i per mode
    let bare: ResonatorTopology = BareCableTopology::default().into();
    let bare_modes = mode_survey_with(&bare, lo, hi, &port, &opts)?;
    let header = "n,f_hz,q_i,current_class,current_ratio";
    write_csv(dir, "fig2_bare_q.csv", header, &mode_rows("", &bare_modes))?;

    // splice families and FSR residuals
    let splice: ResonatorTopology = SplicedCableTopology::default().into();
    let splice_modes = mode_survey_with(&splice, lo, hi, &port, &opts)?;
    write_csv(dir, "fig3b_splice_q.csv", header, &mode_rows("", &splice_modes))?;
    let fsr_modes = mode_survey_with(&splice_with_fsr(SPLICE_FSR), lo, hi, &port, &opts)?;
    let ok: Vec<ModeRecord> = fsr_modes.into_iter().filter(|m| m.is_ok()).collect();
    let residuals = fsr_residuals(&ok, SPLICE_FSR)?;
    let rows: Vec<String> = ok
        .iter()
        .zip(&residuals)
        .map(|(m, r)| {
            format!("{},{:e},{:e},{}", m.n, m.f_n, r, class_name(m))
        })
        .collect();
    write_csv(dir, "fig3c_fsr_residuals.csv", "n,f_hz,residual_hz,current_class", &rows)?;

    // chip attach, half- and quarter-wave CPW
    let half: ResonatorTopology = ChipCableTopology::half_wave().into();
    let quarter: ResonatorTopology = ChipCableTopology::quarter_wave().into();
    let half_modes = mode_survey_with(&half, lo, hi, &port, &opts)?;
    let quarter_modes = mode_survey_with(&quarter, lo, hi, &port, &opts)?;
    let mut rows = mode_rows("half_wave", &half_modes);
    rows.extend(mode_rows("quarter_wave", &quarter_modes));
    write_csv(dir, "fig4f_chip_q.csv", &format!("cpw,{header}"), &rows)?;

    // power table from independent noisy traces of the exemplary mode
    let powers = if cfg.power.p_generator.is_empty() {
        vec![1e-10, 1e-9, 1e-8, 1e-7, 1e-6]
    } else {
        cfg.power.p_generator.clone()
    };
    let fits = (0..powers.len() as u64)
        .map(|k| fit_nearest(&exemplary_trace(&cfg, &bare41, &port, cfg.noise.seed + 1 + k)?, &cfg, 4.902e9))
        .collect::<Result<Vec<ResonanceFitResult>>>()?;
    let table = power_sweep_table(&fits, &powers, cfg.power.chain_attenuation)?;
    let rows: Vec<String> = table
        .iter()
        .map(|p| format!("{:e},{},{:e},{:e},{:e},{:e}", p.p_generator, p.chain_attenuation, p.p_in, p.a_fraction, p.n_photon, p.q_i))
        .collect();
    write_csv(dir, "fig5_power.csv", "p_generator_w,chain_attenuation_db,p_in_w,a_fraction,n_photon,q_i", &rows)?;

    let splice_means = family_means(&splice_modes)?;
    let summary = json!({
        "command": "report",
        "files": [
            "fig1b_fit.csv",
            "fig2_bare_q.csv",
            "fig3b_splice_q.csv",
            "fig3c_fsr_residuals.csv",
            "fig4f_chip_q.csv",
            "fig5_power.csv",
        ],
        "fig1b_fit": fit41,
        "bare_mean_q_i": overall_mean(&bare_modes)?,
        "splice_family_means": splice_means,
        "splice_fsr": SPLICE_FSR,
        "chip_mean_q_i": {
            "half_wave": overall_mean(&half_modes)?,
            "quarter_wave": overall_mean(&quarter_modes)?,
        },
        "power_table": table,
    });
    let text = to_json(&summary);
    write_atomic(&dir.join("summary.json"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

//! Global calibration of the splice contact resistance and the chip-interface
//! contact/shunt resistances against family-mean internal quality factors.

use serde::{Deserialize, Serialize};

use super::scalar::{brent_root, golden_min};
use super::survey::{mean_q, ModeRecord, ModeSurveyor, SurveyOptions};
use crate::abcd::PortSpec;
use crate::error::{Error, Result};
use crate::topology::{ChipCableTopology, CurrentClass, ResonatorTopology, SplicedCableTopology};

/// Band over which family means are taken, Hz.
pub const MEAN_BAND: (f64, f64) = (3e9, 5.5e9);
pub const R_CONT_BOUNDS: (f64, f64) = (1e-6, 1e-1);
pub const R_SHUNT_BOUNDS: (f64, f64) = (1e3, 1e12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyMeans {
    /// Mean `Q_i` of modes with a current node at the interface.
    pub node: f64,
    /// Mean `Q_i` of modes with a current antinode at the interface.
    pub antinode: f64,
}

/// Node/antinode mean `Q_i` over `MEAN_BAND`; intermediate modes are skipped.
pub fn family_means(modes: &[ModeRecord]) -> Result<FamilyMeans> {
    let (lo, hi) = MEAN_BAND;
    let node = mean_q(modes, lo, hi, |c| c == CurrentClass::Node);
    let antinode = mean_q(modes, lo, hi, |c| c == CurrentClass::Antinode);
    match (node, antinode) {
        (Some(node), Some(antinode)) => Ok(FamilyMeans { node, antinode }),
        _ => Err(Error::Usage("need both current-node and current-antinode modes".into())),
    }
}

/// Mean `Q_i` of every successful mode in `MEAN_BAND`.
pub fn overall_mean(modes: &[ModeRecord]) -> Result<f64> {
    mean_q(modes, MEAN_BAND.0, MEAN_BAND.1, |_| true).ok_or_else(|| Error::Usage("no fitted modes in band".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFitResult {
    pub r_cont: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_shunt: Option<f64>,
    pub fixed_cable_q: f64,
    /// Target means: node/antinode for a splice, half-/quarter-wave for a chip.
    pub targets: (f64, f64),
    /// Model means at the solution, same order as `targets`.
    pub model_means: (f64, f64),
    pub measured: Vec<ModeRecord>,
    pub model: Vec<ModeRecord>,
    /// Second model table (quarter-wave chip); empty for a splice.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub model_b: Vec<ModeRecord>,
    pub objective_value: f64,
    pub warnings: Vec<String>,
}

fn rel_sq(model: f64, target: f64) -> f64 {
    ((model - target) / target).powi(2)
}

/// Splice fit from measured mode records.
pub fn calibrate_splice(
    measured: &[ModeRecord],
    fixed_cable_q: f64,
    template: &SplicedCableTopology,
    port: &PortSpec,
    opts: &SurveyOptions,
) -> Result<GlobalFitResult> {
    let targets = family_means(measured)?;
    let mut out = calibrate_splice_means(targets, fixed_cable_q, template, port, opts)?;
    out.measured = measured.to_vec();
    Ok(out)
}

/// Finds the contact resistance whose model family means best match
/// `targets`, by a logarithmic grid scan followed by golden-section
/// refinement.
pub fn calibrate_splice_means(
    targets: FamilyMeans,
    fixed_cable_q: f64,
    template: &SplicedCableTopology,
    port: &PortSpec,
    opts: &SurveyOptions,
) -> Result<GlobalFitResult> {
    if !(targets.node > 0.0 && targets.antinode > 0.0 && fixed_cable_q > 0.0) {
        return Err(Error::Domain("target means and cable Q must be > 0".into()));
    }
    let base: ResonatorTopology = ResonatorTopology::Splice(*template).with_cable_q(Some(fixed_cable_q));
    let surveyor = ModeSurveyor::new(&base, MEAN_BAND.0, MEAN_BAND.1, port, opts)?;
    let at = |r: f64| -> ResonatorTopology {
        let mut t = base;
        if let ResonatorTopology::Splice(s) = &mut t {
            s.r_cont = r;
        }
        t
    };
    let mut objective = |log_r: f64| -> Result<f64> {
        let modes = surveyor.survey(&at(10f64.powf(log_r)))?;
        let m = family_means(&modes)?;
        Ok(rel_sq(m.node, targets.node) + rel_sq(m.antinode, targets.antinode))
    };

    let (lo, hi) = (R_CONT_BOUNDS.0.log10(), R_CONT_BOUNDS.1.log10());
    let steps = 10;
    let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(objective(x)?);
    }
    let best = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let mut warnings = Vec::new();
    if best == steps {
        return Err(Error::Calibration(format!(
            "no minimum inside [{:e}, {:e}] Ω",
            R_CONT_BOUNDS.0, R_CONT_BOUNDS.1
        )));
    }
    let log_r = if best == 0 && values[0] <= values[1] {
        warnings.push(format!(
            "contact resistance at the lower bound {:e} Ω: families are indistinguishable",
            R_CONT_BOUNDS.0
        ));
        lo
    } else {
        golden_min(&mut objective, grid[best - 1], grid[best + 1], 1e-4)?.0
    };
    let r_cont = 10f64.powf(log_r);
    let model = surveyor.survey(&at(r_cont))?;
    let m = family_means(&model)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(GlobalFitResult {
        r_cont,
        r_shunt: None,
        fixed_cable_q,
        targets: (targets.node, targets.antinode),
        model_means: (m.node, m.antinode),
        measured: Vec::new(),
        model,
        model_b: Vec::new(),
        objective_value: rel_sq(m.node, targets.node) + rel_sq(m.antinode, targets.antinode),
        warnings,
    })
}

/// Chip fit from measured half-wave and quarter-wave mode records.
pub fn calibrate_chip(
    measured_halfwave: &[ModeRecord],
    measured_quarterwave: &[ModeRecord],
    fixed_cable_q: f64,
    templates: (&ChipCableTopology, &ChipCableTopology),
    port: &PortSpec,
    opts: &SurveyOptions,
) -> Result<GlobalFitResult> {
    let half = mean_q(measured_halfwave, MEAN_BAND.0, MEAN_BAND.1, |_| true);
    let quarter = mean_q(measured_quarterwave, MEAN_BAND.0, MEAN_BAND.1, |_| true);
    let (Some(half), Some(quarter)) = (half, quarter) else {
        return Err(Error::Usage("both chip datasets need fitted modes in band".into()));
    };
    let mut out = calibrate_chip_means((half, quarter), fixed_cable_q, templates, port, opts)?;
    out.measured = measured_halfwave.iter().chain(measured_quarterwave).cloned().collect();
    Ok(out)
}

/// Solves for `(R_cont, R_shunt)` reproducing the half-wave and quarter-wave
/// mean `Q_i`. For each trial `R_shunt` the inner search sets `R_cont` from
/// the quarter-wave mean (interface at a current maximum); the outer search
/// then matches the half-wave mean (interface at a voltage maximum).
pub fn calibrate_chip_means(
    targets: (f64, f64),
    fixed_cable_q: f64,
    templates: (&ChipCableTopology, &ChipCableTopology),
    port: &PortSpec,
    opts: &SurveyOptions,
) -> Result<GlobalFitResult> {
    let (t_half, t_quarter) = targets;
    if !(t_half > 0.0 && t_quarter > 0.0 && fixed_cable_q > 0.0) {
        return Err(Error::Domain("target means and cable Q must be > 0".into()));
    }
    let half_base = ResonatorTopology::Chip(*templates.0).with_cable_q(Some(fixed_cable_q));
    let quarter_base = ResonatorTopology::Chip(*templates.1).with_cable_q(Some(fixed_cable_q));
    let with = |t: &ResonatorTopology, r: f64, rs: f64| -> ResonatorTopology {
        let mut t = *t;
        if let ResonatorTopology::Chip(c) = &mut t {
            c.r_cont = r;
            c.r_shunt = rs;
        }
        t
    };
    let half_s = ModeSurveyor::new(&half_base, MEAN_BAND.0, MEAN_BAND.1, port, opts)?;
    let quarter_s = ModeSurveyor::new(&quarter_base, MEAN_BAND.0, MEAN_BAND.1, port, opts)?;
    let mut warnings: Vec<String> = Vec::new();

    let (rc_lo, rc_hi) = (R_CONT_BOUNDS.0.log10(), R_CONT_BOUNDS.1.log10());
    let (rs_lo, rs_hi) = (R_SHUNT_BOUNDS.0.log10(), R_SHUNT_BOUNDS.1.log10());

    // inner: log R_cont matching the quarter-wave mean at fixed R_shunt;
    // None flags the lower bound (even a lossless contact is too lossy)
    let inner = |log_rs: f64| -> Result<Option<f64>> {
        let rs = 10f64.powf(log_rs);
        let mut g = |log_rc: f64| -> Result<f64> {
            let modes = quarter_s.survey(&with(&quarter_base, 10f64.powf(log_rc), rs))?;
            Ok(overall_mean(&modes)? / t_quarter - 1.0)
        };
        let g_lo = g(rc_lo)?;
        if g_lo <= 0.0 {
            return Ok(None);
        }
        if g(rc_hi)? > 0.0 {
            return Err(Error::Calibration(format!(
                "quarter-wave mean not reached below R_cont = {:e} Ω",
                R_CONT_BOUNDS.1
            )));
        }
        brent_root(&mut g, rc_lo, rc_hi, 1e-5, 60).map(Some)
    };
    let outer = |log_rs: f64| -> Result<(f64, f64)> {
        let log_rc = inner(log_rs)?.unwrap_or(rc_lo);
        let modes = half_s.survey(&with(&half_base, 10f64.powf(log_rc), 10f64.powf(log_rs)))?;
        Ok((overall_mean(&modes)? / t_half - 1.0, log_rc))
    };

    let h_hi = outer(rs_hi)?.0;
    let log_rs = if h_hi <= 0.0 {
        warnings.push(format!(
            "shunt resistance at the upper bound {:e} Ω: the half-wave mean is not reduced by shunt loss",
            R_SHUNT_BOUNDS.1
        ));
        rs_hi
    } else {
        if outer(rs_lo)?.0 > 0.0 {
            return Err(Error::Calibration(format!(
                "half-wave mean not reached above R_shunt = {:e} Ω",
                R_SHUNT_BOUNDS.0
            )));
        }
        brent_root(|x| outer(x).map(|v| v.0), rs_lo, rs_hi, 1e-4, 60)?
    };
    let log_rc = inner(log_rs)?.unwrap_or_else(|| {
        warnings.push(format!("contact resistance at the lower bound {:e} Ω", R_CONT_BOUNDS.0));
        rc_lo
    });
    let (r_cont, r_shunt) = (10f64.powf(log_rc), 10f64.powf(log_rs));
    let model = half_s.survey(&with(&half_base, r_cont, r_shunt))?;
    let model_b = quarter_s.survey(&with(&quarter_base, r_cont, r_shunt))?;
    let means = (overall_mean(&model)?, overall_mean(&model_b)?);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(GlobalFitResult {
        r_cont,
        r_shunt: Some(r_shunt),
        fixed_cable_q,
        targets,
        model_means: means,
        measured: Vec::new(),
        model,
        model_b,
        objective_value: rel_sq(means.0, t_half) + rel_sq(means.1, t_quarter),
        warnings,
    })
}

//! Per-resonance complex least-squares fit of an assembly model to S11.
//!
//! The fitted trace is `a·exp(j(φ₀ + 2πfτ))·S11_model(f; l, C_in, Q_i)`.
//! Inside the optimiser the phase is referenced to the window centre and each
//! parameter is rescaled so that a unit step moves the trace by roughly one
//! linewidth or one radian.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::resonances::{find_dips, nearest_mode};
use super::scalar::brent_root;
use crate::abcd::{external_q, total_q, PortSpec, C64};
use crate::error::{Error, Result};
use crate::lm::{self, LmOptions};
use crate::sweep::SweepResult;
use crate::topology::ResonatorTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    LengthL,
    CIn,
    QI,
    PhaseOffset,
    Amplitude,
    ElectricalDelay,
}

impl FitParam {
    pub const ALL: [FitParam; 6] = [
        FitParam::LengthL,
        FitParam::CIn,
        FitParam::QI,
        FitParam::PhaseOffset,
        FitParam::Amplitude,
        FitParam::ElectricalDelay,
    ];
}

pub type FreeParams = BTreeSet<FitParam>;

pub fn all_params() -> FreeParams {
    FitParam::ALL.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub jacobian_step: f64,
    /// Half-width of the fit window in seeded linewidths.
    pub window_linewidths: f64,
    pub min_points: usize,
    /// Shallowest dip accepted as a resonance.
    pub min_dip_db: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-10,
            jacobian_step: 1e-6,
            window_linewidths: 10.0,
            min_points: 401,
            min_dip_db: 1.0,
        }
    }
}

impl FitOptions {
    fn lm(&self) -> LmOptions {
        LmOptions {
            max_iterations: self.max_iterations,
            rel_tol: self.rel_tol,
            jacobian_step: self.jacobian_step,
            ..LmOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::validation("fit.max_iterations", "must be >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::validation("fit.rel_tol", "must be > 0"));
        }
        if !(self.jacobian_step > 0.0 && self.jacobian_step < 1e-2) {
            return Err(Error::validation("fit.jacobian_step", "must be in (0, 1e-2)"));
        }
        if !(self.window_linewidths >= 1.0) {
            return Err(Error::validation("fit.window_linewidths", "must be >= 1"));
        }
        if self.min_points < 16 {
            return Err(Error::validation("fit.min_points", "must be >= 16"));
        }
        if !(self.min_dip_db > 0.0) {
            return Err(Error::validation("fit.min_dip_db", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFitResult {
    /// Resonance of the fitted model, Hz.
    pub f0: f64,
    pub mode_n: u32,
    pub q_i: f64,
    pub q_e: f64,
    pub q_t: f64,
    pub c_in: f64,
    pub length_l: f64,
    pub phase_offset: f64,
    pub amplitude: f64,
    pub electrical_delay: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fit-ready model: a template plus the nuisance terms.
#[derive(Debug, Clone, Copy)]
struct Model {
    length: f64,
    c_in: f64,
    q_i: f64,
    /// Phase at `f_ref`.
    phase: f64,
    amplitude: f64,
    delay: f64,
}

impl Model {
    fn topology(&self, template: &ResonatorTopology) -> ResonatorTopology {
        template
            .with_length(self.length)
            .with_c_in(self.c_in)
            .with_cable_q(Some(self.q_i))
    }

    fn trace(&self, template: &ResonatorTopology, f: f64, f_ref: f64, port: &PortSpec) -> Result<C64> {
        let s = self.topology(template).s11_at(f, port)?;
        let rot = C64::from_polar(self.amplitude, self.phase + 2.0 * PI * (f - f_ref) * self.delay);
        Ok(rot * s)
    }
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mode index of a resonance at `f0` for a resonator with `fsr`.
pub fn mode_index(f0: f64, fsr: f64) -> u32 {
    ((f0 / fsr).round() as u32).max(1)
}

/// Seeds every fit parameter from the trace:
///
/// * `f0` from the parabola-refined |S11|² minimum;
/// * `Q_t` from the full width of the |S11|² dip at half depth;
/// * the `Q_i`/`Q_e` split from the dip depth, with under/over-coupling told
///   apart by the sign of the on-resonance reflection relative to the
///   off-resonance background;
/// * `n = round(f0 / FSR)`, with `fsr_hint` (adjacent dip spacing) when
///   known, otherwise the template's own FSR;
/// * `C_in` by inverting the external-Q relation, and the cable length by
///   moving the template's n-th resonance onto `f0`;
/// * amplitude, phase and delay by comparing the trace with that model.
pub fn seed_fit(
    window: &SweepResult,
    template: &ResonatorTopology,
    port: &PortSpec,
    fsr_hint: Option<f64>,
    opts: &FitOptions,
) -> Result<ResonanceFitResult> {
    window.validate()?;
    let p = window.power();
    let f = &window.freqs;
    let span = f[f.len() - 1] - f[0];
    let baseline = median(p.clone());
    let dips = find_dips(window, opts.min_dip_db, span);
    let dip = dips
        .iter()
        .filter(|d| 10.0 * (baseline / d.min_power.max(f64::MIN_POSITIVE)).log10() >= opts.min_dip_db)
        .min_by(|a, b| a.min_power.total_cmp(&b.min_power))
        .copied()
        .ok_or(Error::NoResonance)?;
    let step = span / (f.len() - 1) as f64;
    let fwhm = super::resonances::half_depth_width(f, &p, dip.index, baseline).max(2.0 * step);
    let f_dip = dip.f0;
    let q_t = f_dip / fwhm;

    // Coupling regime from the complex background across the window.
    let edge = (f.len() / 20).max(2);
    let mean = |s: &[C64]| s.iter().sum::<C64>() / s.len() as f64;
    let left = mean(&window.s11[..edge]);
    let right = mean(&window.s11[f.len() - edge..]);
    let fl = 0.5 * (f[0] + f[edge - 1]);
    let fr = 0.5 * (f[f.len() - edge] + f[f.len() - 1]);
    let t = ((f[dip.index] - fl) / (fr - fl)).clamp(0.0, 1.0);
    let background = left + (right - left) * t;
    let ratio = window.s11[dip.index] / background;
    let depth = (dip.min_power / baseline).sqrt().min(0.999);
    let signed = if ratio.re < 0.0 { -depth } else { depth };
    let q_e = 2.0 * q_t / (1.0 - signed);
    let inv_qi = 1.0 / q_t - 1.0 / q_e;
    let q_i = if inv_qi > 0.0 { 1.0 / inv_qi } else { 100.0 * q_t };

    let fsr = fsr_hint.unwrap_or_else(|| template.fsr());
    let n = mode_index(f_dip, fsr);
    let c_in = (n as f64 / (8.0 * PI * q_e)).sqrt() / (f_dip * port.z0);

    // length: scale the template towards the hinted FSR, then secant-solve
    // for the n-th coupled resonance landing on the dip
    let mut l0 = template.length();
    if let Some(h) = fsr_hint {
        l0 *= template.fsr() / h;
    }
    let base = template.with_c_in(c_in);
    let resonance_at = |l: f64| -> Result<f64> {
        let t = base.with_length(l);
        nearest_mode(&t, n as f64 * t.fsr(), port)
    };
    let g = |l: f64| -> Result<f64> { Ok(resonance_at(l)? / f_dip - 1.0) };
    let g0 = g(l0)?;
    let l1 = l0 * (1.0 + g0);
    let length = if g0.abs() < 1e-13 {
        l0
    } else {
        let lo = l0.min(l1) * (1.0 - 2.0 * g0.abs());
        let hi = l0.max(l1) * (1.0 + 2.0 * g0.abs());
        brent_root(g, lo, hi, l0 * 1e-15, 100).unwrap_or(l1)
    };

    let model = Model {
        length,
        c_in,
        q_i,
        phase: 0.0,
        amplitude: 1.0,
        delay: 0.0,
    };
    let f_ref = 0.5 * (f[0] + f[f.len() - 1]);
    let m: Vec<C64> = f
        .iter()
        .map(|&x| model.trace(template, x, f_ref, port))
        .collect::<Result<_>>()?;
    let q_left = mean(&window.s11[..edge]) / mean(&m[..edge]);
    let q_right = mean(&window.s11[f.len() - edge..]) / mean(&m[f.len() - edge..]);
    let delay = wrap_phase(q_right.arg() - q_left.arg()) / (2.0 * PI * (fr - fl));
    let mut num = C64::default();
    let mut den = 0.0;
    for ((&x, mk), dk) in f.iter().zip(&m).zip(&window.s11) {
        let mk = mk * C64::from_polar(1.0, 2.0 * PI * (x - f_ref) * delay);
        num += mk.conj() * dk;
        den += mk.norm_sqr();
    }
    let k = num / den;

    Ok(ResonanceFitResult {
        f0: f_dip,
        mode_n: n,
        q_i,
        q_e,
        q_t,
        c_in,
        length_l: length,
        phase_offset: wrap_phase(k.arg() - 2.0 * PI * f_ref * delay),
        amplitude: k.norm(),
        electrical_delay: delay,
        residual_rms: f64::NAN,
        converged: false,
        iterations: 0,
    })
}

/// Damped least-squares fit of `template` plus nuisance terms to `window`.
///
/// Parameters outside `free` stay at their `seed` values. On hitting the
/// iteration cap the best point found is returned with `converged = false`.
pub fn fit_resonance(
    window: &SweepResult,
    template: &ResonatorTopology,
    free: &FreeParams,
    seed: &ResonanceFitResult,
    opts: &FitOptions,
    port: &PortSpec,
) -> Result<ResonanceFitResult> {
    window.validate()?;
    let f = &window.freqs;
    let span = f[f.len() - 1] - f[0];
    let has_dip = !find_dips(window, opts.min_dip_db, span).is_empty();
    if !has_dip {
        return Err(Error::NoResonance);
    }
    let f_ref = 0.5 * (f[0] + f[f.len() - 1]);
    let half_span = 0.5 * span;
    let q_t_seed = if seed.q_t.is_finite() && seed.q_t > 0.0 {
        seed.q_t
    } else {
        total_q(seed.q_i, seed.q_e)
    };
    let l_scale = seed.length_l / q_t_seed;
    let seed_model = Model {
        length: seed.length_l,
        c_in: seed.c_in,
        q_i: seed.q_i,
        phase: wrap_phase(seed.phase_offset + 2.0 * PI * f_ref * seed.electrical_delay),
        amplitude: seed.amplitude,
        delay: seed.electrical_delay,
    };
    let tau_scale = 1.0 / (2.0 * PI * half_span);
    let order: Vec<FitParam> = FitParam::ALL.into_iter().filter(|p| free.contains(p)).collect();

    let decode = |u: &[f64]| -> Model {
        let mut m = seed_model;
        for (p, &v) in order.iter().zip(u) {
            match p {
                FitParam::LengthL => m.length = seed_model.length + v * l_scale,
                FitParam::CIn => m.c_in = seed_model.c_in * v.exp(),
                FitParam::QI => m.q_i = seed_model.q_i * v.exp(),
                FitParam::PhaseOffset => m.phase = seed_model.phase + v,
                FitParam::Amplitude => m.amplitude = seed_model.amplitude * v.exp(),
                FitParam::ElectricalDelay => m.delay = seed_model.delay + v * tau_scale,
            }
        }
        m
    };
    let residuals = |u: &[f64], r: &mut [f64]| -> Result<()> {
        let m = decode(u);
        let topo = m.topology(template);
        for (k, (&x, d)) in f.iter().zip(&window.s11).enumerate() {
            let s = topo.s11_at(x, port)?;
            let rot = C64::from_polar(m.amplitude, m.phase + 2.0 * PI * (x - f_ref) * m.delay);
            let e = rot * s - d;
            r[2 * k] = e.re;
            r[2 * k + 1] = e.im;
        }
        Ok(())
    };
    let u0 = vec![0.0; order.len()];
    let out = lm::minimize(residuals, &u0, 2 * f.len(), &opts.lm())?;
    let m = decode(&out.x);

    let fitted = m.topology(template);
    let f_guess = seed.f0;
    let f0 = nearest_mode(&fitted, f_guess, port).unwrap_or(f_guess);
    let n = mode_index(f0, fitted.fsr());
    let q_e = external_q(n, f0, m.c_in, port.z0);
    Ok(ResonanceFitResult {
        f0,
        mode_n: n,
        q_i: m.q_i,
        q_e,
        q_t: total_q(m.q_i, q_e),
        c_in: m.c_in,
        length_l: m.length,
        phase_offset: wrap_phase(m.phase - 2.0 * PI * f_ref * m.delay),
        amplitude: m.amplitude,
        electrical_delay: m.delay,
        residual_rms: (out.cost / f.len() as f64).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Points of `sweep` within `±half_width` of `center`.
pub fn fit_window(sweep: &SweepResult, center: f64, half_width: f64) -> SweepResult {
    sweep.window(center - half_width, center + half_width)
}

/// The fitted trace `a·exp(j(φ₀ + 2πfτ))·S11_model(f)` on `freqs`.
pub fn model_trace(
    template: &ResonatorTopology,
    fit: &ResonanceFitResult,
    freqs: &[f64],
    port: &PortSpec,
) -> Result<Vec<C64>> {
    let model = Model {
        length: fit.length_l,
        c_in: fit.c_in,
        q_i: fit.q_i,
        phase: fit.phase_offset,
        amplitude: fit.amplitude,
        delay: fit.electrical_delay,
    };
    freqs.iter().map(|&f| model.trace(template, f, 0.0, port)).collect()
}

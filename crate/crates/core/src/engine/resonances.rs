//! Locating resonances: dip search on measured/synthetic sweeps, and the
//! model-side locator used to place windows on an assembly's modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::scalar::brent_root;
use crate::abcd::PortSpec;
use crate::error::Result;
use crate::sweep::SweepResult;
use crate::topology::ResonatorTopology;

/// One reflection dip found in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    /// Parabola-refined frequency of the |S11|² minimum, Hz.
    pub f0: f64,
    /// Index of the lowest sample.
    pub index: usize,
    /// |S11|² at the lowest sample.
    pub min_power: f64,
    /// Local baseline |S11|².
    pub baseline: f64,
    pub depth_db: f64,
    /// Full width at half depth of the |S11|² dip, Hz.
    pub fwhm: f64,
}

/// Coarse resonance frequencies: the `f0` of every [`find_dips`] hit.
pub fn find_resonances(sweep: &SweepResult, min_dip_db: f64, min_separation: f64) -> Vec<f64> {
    find_dips(sweep, min_dip_db, min_separation)
        .into_iter()
        .map(|d| d.f0)
        .collect()
}

/// Local minima of |S11|² at least `min_dip_db` below the local baseline
/// (the largest |S11|² within `±min_separation`), sorted ascending. Minima
/// closer than `min_separation` are merged into the deeper one.
pub fn find_dips(sweep: &SweepResult, min_dip_db: f64, min_separation: f64) -> Vec<Dip> {
    let p = sweep.power();
    let f = &sweep.freqs;
    let n = p.len();
    if n < 3 {
        return vec![];
    }
    let baselines = window_max(f, &p, min_separation);
    let mut dips: Vec<Dip> = Vec::new();
    for i in 1..n - 1 {
        if !(p[i] <= p[i - 1] && p[i] < p[i + 1]) {
            continue;
        }
        let baseline = baselines[i];
        let depth_db = 10.0 * (baseline / p[i].max(f64::MIN_POSITIVE)).log10();
        if !(depth_db >= min_dip_db) {
            continue;
        }
        let dip = Dip {
            f0: parabolic_vertex(f[i - 1], f[i], f[i + 1], p[i - 1], p[i], p[i + 1]),
            index: i,
            min_power: p[i],
            baseline,
            depth_db,
            fwhm: half_depth_width(f, &p, i, baseline),
        };
        match dips.last_mut() {
            Some(last) if dip.f0 - last.f0 < min_separation => {
                if dip.min_power < last.min_power {
                    *last = dip;
                }
            }
            _ => dips.push(dip),
        }
    }
    dips
}

/// Max of `p` over `|f_j - f_i| <= half_width`, via a monotone deque.
fn window_max(f: &[f64], p: &[f64], half_width: f64) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    let mut deque: std::collections::VecDeque<usize> = Default::default();
    let mut hi = 0;
    for i in 0..n {
        while hi < n && f[hi] <= f[i] + half_width {
            while deque.back().is_some_and(|&j| p[j] <= p[hi]) {
                deque.pop_back();
            }
            deque.push_back(hi);
            hi += 1;
        }
        while deque.front().is_some_and(|&j| f[j] < f[i] - half_width) {
            deque.pop_front();
        }
        out[i] = p[*deque.front().unwrap()];
    }
    out
}

fn parabolic_vertex(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let d0 = x0 - x1;
    let d2 = x2 - x1;
    let den = d0 * d2 * (d0 - d2);
    if den == 0.0 {
        return x1;
    }
    let a = (d2 * (y0 - y1) - d0 * (y2 - y1)) / den;
    let b = (d0 * d0 * (y2 - y1) - d2 * d2 * (y0 - y1)) / den;
    if !(a > 0.0) {
        return x1;
    }
    let v = x1 - b / (2.0 * a);
    v.clamp(x0, x2)
}

/// Full width of the dip at `i` where |S11|² climbs back to halfway between
/// its minimum and `baseline`, by linear interpolation on each side.
pub fn half_depth_width(f: &[f64], p: &[f64], i: usize, baseline: f64) -> f64 {
    let level = 0.5 * (p[i] + baseline);
    let mut left = f[0];
    for j in (0..i).rev() {
        if p[j] >= level {
            let t = (level - p[j + 1]) / (p[j] - p[j + 1]);
            left = f[j + 1] + t * (f[j] - f[j + 1]);
            break;
        }
    }
    let mut right = f[f.len() - 1];
    for j in i + 1..f.len() {
        if p[j] >= level {
            let t = (level - p[j - 1]) / (p[j] - p[j - 1]);
            right = f[j - 1] + t * (f[j] - f[j - 1]);
            break;
        }
    }
    right - left
}

/// Susceptance of the lossless resonator section seen from the coupler.
fn susceptance(lossless: &ResonatorTopology, f: f64, port: &PortSpec) -> Result<f64> {
    Ok(lossless.resonator_admittance(f, port)?.im)
}

/// Uncoupled resonances of `topology` (zeros of the resonator's input
/// susceptance, crossing upwards) inside `[lo, hi]`.
pub fn uncoupled_resonances(topology: &ResonatorTopology, lo: f64, hi: f64, port: &PortSpec) -> Result<Vec<f64>> {
    let lossless = topology.lossless();
    let fsr = topology.fsr();
    let step = fsr / 16.0;
    let mut out = Vec::new();
    let mut a = lo.max(step);
    let mut ba = susceptance(&lossless, a, port)?;
    while a < hi {
        let b = (a + step).min(hi);
        let bb = susceptance(&lossless, b, port)?;
        // Foster: susceptance rises through zeros and falls through poles
        if ba < 0.0 && bb >= 0.0 {
            let root = brent_root(|x| susceptance(&lossless, x, port), a, b, b * 1e-15, 200)?;
            out.push(root);
        }
        a = b;
        ba = bb;
    }
    Ok(out)
}

/// Resonance of the coupled, lossless assembly just below the uncoupled
/// resonance `f_p`, where the coupling reactance cancels the resonator's.
pub fn coupled_resonance(topology: &ResonatorTopology, f_p: f64, port: &PortSpec) -> Result<f64> {
    let lossless = topology.lossless();
    let c_in = topology.c_in();
    let h = |f: f64| -> Result<f64> { Ok(susceptance(&lossless, f, port)? + 2.0 * PI * f * c_in) };
    let fsr = topology.fsr();
    let eps = f_p * 1e-9;
    let slope = (susceptance(&lossless, f_p + eps, port)? - susceptance(&lossless, f_p - eps, port)?) / (2.0 * eps);
    let mut delta = if slope > 0.0 {
        2.0 * PI * f_p * c_in / slope
    } else {
        fsr * 1e-6
    };
    let hi = f_p;
    let mut lo = f_p - 2.0 * delta;
    while h(lo)? >= 0.0 {
        delta *= 2.0;
        lo = f_p - 2.0 * delta;
        if delta > fsr / 4.0 {
            return Ok(f_p);
        }
    }
    brent_root(h, lo, hi, f_p * 1e-15, 200)
}

/// Coupled resonances of the lossless version of `topology` in `[lo, hi]`.
pub fn locate_modes(topology: &ResonatorTopology, lo: f64, hi: f64, port: &PortSpec) -> Result<Vec<f64>> {
    let fsr = topology.fsr();
    let mut out = Vec::new();
    for f_p in uncoupled_resonances(topology, lo, hi + 0.5 * fsr, port)? {
        let f_r = coupled_resonance(topology, f_p, port)?;
        if f_r >= lo && f_r <= hi {
            out.push(f_r);
        }
    }
    Ok(out)
}

/// Coupled resonance of `topology` closest to `f_guess`.
pub fn nearest_mode(topology: &ResonatorTopology, f_guess: f64, port: &PortSpec) -> Result<f64> {
    let fsr = topology.fsr();
    let lo = (f_guess - 0.75 * fsr).max(fsr * 0.25);
    let modes = locate_modes(topology, lo, f_guess + 0.75 * fsr, port)?;
    modes
        .into_iter()
        .min_by(|a, b| (a - f_guess).abs().total_cmp(&(b - f_guess).abs()))
        .ok_or(crate::error::Error::NoResonance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abcd::C64;
    use crate::sweep::linspace;

    fn lorentz_dip(f: &[f64], f0: f64, width: f64, depth: f64) -> SweepResult {
        let s: Vec<C64> = f
            .iter()
            .map(|&x| {
                let u = 2.0 * (x - f0) / width;
                C64::new(1.0 - depth / (1.0 + u * u), 0.0)
            })
            .collect();
        SweepResult::new(f.to_vec(), s).unwrap()
    }

    #[test]
    fn flat_trace_has_no_dips() {
        let f = linspace(1e9, 2e9, 101);
        let s = SweepResult::new(f.clone(), vec![C64::new(0.0, 1.0); f.len()]).unwrap();
        assert!(find_resonances(&s, 0.1, 1e6).is_empty());
    }

    #[test]
    fn parabolic_refinement_and_merge() {
        let f = linspace(0.0, 100.0, 1001);
        let mut s = lorentz_dip(&f, 40.03, 2.0, 0.8);
        let other = lorentz_dip(&f, 70.0, 2.0, 0.5);
        for (a, b) in s.s11.iter_mut().zip(&other.s11) {
            *a = C64::new(a.re * b.re, 0.0);
        }
        let hits = find_dips(&s, 1.0, 5.0);
        assert_eq!(hits.len(), 2);
        assert!((hits[0].f0 - 40.03).abs() < 0.01, "{:?}", hits[0]);
        // half-depth width against a ±5 baseline of 0.9393, from a dense evaluation
        assert!((hits[0].fwhm - 2.584).abs() < 0.02, "{}", hits[0].fwhm);
        // merging with a large separation keeps the deeper one
        let merged = find_dips(&s, 1.0, 50.0);
        assert_eq!(merged.len(), 1);
        assert!((merged[0].f0 - 40.03).abs() < 0.01);
    }

    #[test]
    fn threshold_applies() {
        let f = linspace(0.0, 100.0, 1001);
        let s = lorentz_dip(&f, 50.0, 2.0, 0.05);
        assert!(find_dips(&s, 1.0, 5.0).is_empty());
        assert_eq!(find_dips(&s, 0.1, 5.0).len(), 1);
    }
}

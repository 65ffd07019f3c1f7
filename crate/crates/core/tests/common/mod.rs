//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use coaxres_core::abcd::cascade;
use coaxres_core::abcd::constants::C;
use coaxres_core::engine::survey::mode_survey;
use coaxres_core::topology::{BareCableTopology, ChipCableTopology, SplicedCableTopology, CABLE_EPS_R};
use coaxres_core::{ABCDMatrix, PortSpec, ResonatorTopology, TransmissionLineSpec, C64};

/// Energy-method loss of a series resistance `r` at `x/L` on an open-open
/// line: the standing-wave current is `(V0/Z0)·sin(nπx/L)`, the stored energy
/// `C_l·V0²·L/4` and `ω·C_l·L = nπ/Z0`, so `1/Q = 2R·sin²/(nπZ0)`.
pub fn series_inv_q(r: f64, n: u32, x_over_l: f64, z0: f64) -> f64 {
    2.0 * r * (n as f64 * PI * x_over_l).sin().powi(2) / (n as f64 * PI * z0)
}

/// Same for a shunt resistance across the line: the voltage is
/// `V0·cos(nπx/L)`, giving `1/Q = 2Z0·cos²/(nπR_sh)`.
pub fn shunt_inv_q(r_sh: f64, n: u32, x_over_l: f64, z0: f64) -> f64 {
    2.0 * z0 * (n as f64 * PI * x_over_l).cos().powi(2) / (n as f64 * PI * r_sh)
}

/// Coupling capacitance that sets the external Q of mode `n` at `f`.
pub fn c_in_for(q_e: f64, n: u32, f: f64, z0: f64) -> f64 {
    (n as f64 / (8.0 * PI * q_e)).sqrt() / (f * z0)
}

/// Lossless 50 Ω line of `length` with a tee (`r_cont`, `r_shunt`) at `x`,
/// ended by a reactive open so that the only losses are the tee's.
pub fn tee_resonator(length: f64, x: f64, r_cont: f64, r_shunt: f64, c_in: f64) -> ResonatorTopology {
    let mut t = ChipCableTopology::half_wave();
    t.cpw = TransmissionLineSpec::from_permittivity(50.0, x, CABLE_EPS_R, None);
    t.cable = TransmissionLineSpec::from_permittivity(50.0, length - x, CABLE_EPS_R, None);
    t.r_cont = r_cont;
    t.r_shunt = r_shunt;
    t.c_in = c_in;
    t.z_out = C64::new(0.0, 1e9);
    t.into()
}

/// Length of the [`tee_resonator`] used against the energy-method oracle.
pub const ORACLE_LENGTH: f64 = 0.2;

/// Fitted mode index and `1/Q_i` of mode `n` of a [`tee_resonator`] with the
/// tee at `x_over_l`. `Q_e` is ten times the expected internal Q: the coupler
/// shifts the standing wave by about `ωC_in·Z0` in phase, which matters near
/// a node, so it is kept weak.
pub fn fitted_inv_q(x_over_l: f64, r_cont: f64, r_shunt: f64, n: u32, expected_inv_q: f64) -> (u32, f64) {
    let port = PortSpec::default();
    let x = x_over_l * ORACLE_LENGTH;
    let fsr = tee_resonator(ORACLE_LENGTH, x, 0.0, f64::INFINITY, 1e-15).fsr();
    let f = n as f64 * fsr;
    let c_in = c_in_for(10.0 / expected_inv_q, n, f, port.z0);
    let t = tee_resonator(ORACLE_LENGTH, x, r_cont, r_shunt, c_in);
    let modes = mode_survey(&t, f - 0.4 * fsr, f + 0.4 * fsr, &port).unwrap();
    assert_eq!(modes.len(), 1, "{modes:?}");
    let m = &modes[0];
    assert!(m.is_ok(), "{m:?}");
    (m.n, 1.0 / m.q_i_n)
}

/// Bare cable with the exemplary n = 41 parameters: l = 0.9999 m,
/// C_in = 3.602 fF, Q_i = 1.556e6, permittivity placing n = 41 at 4.902 GHz.
pub fn exemplary_bare() -> ResonatorTopology {
    let eps = (C * 41.0 / (2.0 * 0.9999 * 4.902e9)).powi(2);
    let mut b = BareCableTopology::default();
    b.launch = TransmissionLineSpec::from_permittivity(50.0, 0.1, eps, None);
    b.resonator = TransmissionLineSpec::from_permittivity(50.0, 0.9999, eps, Some(1.556e6));
    b.c_in = 3.602e-15;
    b.into()
}

/// Default splice with the total length chosen for free spectral range `fsr`.
pub fn splice_with_fsr(fsr: f64, r_cont: f64) -> ResonatorTopology {
    SplicedCableTopology::with_total_length(C / (2.0 * CABLE_EPS_R.sqrt() * fsr), r_cont).into()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Cascade of the resonator elements alone, with B and C scaled by the cable
/// impedance so all four entries are of order one.
pub fn resonator_matrix(t: &ResonatorTopology, f: f64) -> ABCDMatrix {
    let ms: Vec<ABCDMatrix> = t.resonator_elements().iter().map(|e| e.matrix(f).unwrap()).collect();
    let m = cascade(&ms).unwrap();
    let z = t.cable().impedance;
    ABCDMatrix::new(m.a, m.b / z, m.c * z, m.d)
}

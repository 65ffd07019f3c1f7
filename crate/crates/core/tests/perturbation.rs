//! Lumped losses on a line resonator against the energy-method oracle.

mod common;

use common::{fitted_inv_q, rel, series_inv_q, tee_resonator, shunt_inv_q, ORACLE_LENGTH as LENGTH};
use coaxres_core::engine::resonances::locate_modes;
use coaxres_core::{PortSpec, ResonatorTopology};

fn check_series(x_over_l: f64, n: u32, r: f64) {
    let want = series_inv_q(r, n, x_over_l, 50.0);
    let (got_n, got) = fitted_inv_q(x_over_l, r, f64::INFINITY, n, want);
    assert_eq!(got_n, n);
    assert!(rel(got, want) < 0.02, "series n={n} R={r} x/L={x_over_l}: {got:e} vs {want:e}");
}

fn check_shunt(x_over_l: f64, n: u32, r_sh: f64) {
    let want = shunt_inv_q(r_sh, n, x_over_l, 50.0);
    let (got_n, got) = fitted_inv_q(x_over_l, 0.0, r_sh, n, want);
    assert_eq!(got_n, n);
    assert!(rel(got, want) < 0.02, "shunt n={n} R_sh={r_sh} x/L={x_over_l}: {got:e} vs {want:e}");
}

#[test]
fn midpoint_series_resistance() {
    for n in [3, 5, 7, 9] {
        for r in [1e-4, 1e-3, 1e-2] {
            check_series(0.5, n, r);
        }
    }
}

#[test]
fn midpoint_shunt_resistance() {
    for n in [2, 4, 6, 8, 10] {
        for r_sh in [1e5, 1e6, 1e7] {
            check_shunt(0.5, n, r_sh);
        }
    }
}

#[test]
fn off_centre_series_resistance() {
    for n in 2..=10 {
        for r in [1e-4, 1e-3, 1e-2] {
            check_series(0.23, n, r);
        }
    }
}

#[test]
fn off_centre_shunt_resistance() {
    for n in 2..=10 {
        for r_sh in [1e5, 1e6, 1e7] {
            check_shunt(0.23, n, r_sh);
        }
    }
}

/// Q from the standing wave itself: stored energy integrated over the line
/// and the power dissipated in the contact resistance at its position.
#[test]
fn internal_state_energy_matches_oracle() {
    let port = PortSpec::default();
    let r = 1e-3;
    for (x_over_l, n) in [(0.5, 3), (0.5, 7), (0.23, 4), (0.23, 9)] {
        let t = tee_resonator(LENGTH, x_over_l * LENGTH, r, f64::INFINITY, 1e-15);
        let f = locate_modes(&t, (n as f64 - 0.4) * t.fsr(), (n as f64 + 0.4) * t.fsr(), &port).unwrap()[0];
        let ResonatorTopology::Chip(chip) = t else { unreachable!() };
        let c_l = chip.cable.cap_per_length;
        let l_l = chip.cable.impedance.powi(2) * c_l;
        let k = 4000;
        let xs: Vec<f64> = (0..=k).map(|i| LENGTH * i as f64 / k as f64).collect();
        let states = t.state_profile(f, &xs, &port).unwrap();
        // trapezoidal ∫ (C_l|V|² + L_l|I|²)/4 dx
        let density: Vec<f64> = states.iter().map(|(v, i)| 0.25 * (c_l * v.norm_sqr() + l_l * i.norm_sqr())).collect();
        let dx = LENGTH / k as f64;
        let energy: f64 = density.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum();
        let (_, i_x) = t.internal_state(f, x_over_l * LENGTH, &port).unwrap();
        let loss = 0.5 * r * i_x.norm_sqr();
        let inv_q = loss / (2.0 * std::f64::consts::PI * f * energy);
        let want = series_inv_q(r, n, x_over_l, 50.0);
        assert!(rel(inv_q, want) < 0.02, "n={n} x/L={x_over_l}: {inv_q:e} vs {want:e}");
    }
}

//! Checks that tie two modules together: each quantity is computed along two
//! independent routes.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use tunnel_core::elliptic::{faction, rate_report, zeta};
use tunnel_core::kramers::{escape_rate_numeric, sigma_eff};
use tunnel_core::master::{BoundaryMode, LocalAxes, LocalTerms};
use tunnel_core::spectral::{false_vacuum_coeffs, grid_persistence};
use tunnel_core::wkb::{persistence_curve, PersistenceGrid};
use tunnel_core::{BathParams, KramersProblem, LocalState, MomentumGrid, PotentialParams, Timescales};

fn reference() -> PotentialParams {
    PotentialParams::from_barrier_ratio(1.0, 1.0, 589.74 / 171.55, 1.0, 1.0).unwrap()
}

#[test]
fn quadrature_action_equals_elliptic_form() {
    let p = reference();
    for i in 1..=9 {
        let k = 0.1 * i as f64;
        let e = 2.0 * p.eps_s() * zeta(k);
        let (xl, xr, _) = p.turning_points(e).unwrap();
        let s = p.action(xr, xl, e).unwrap();
        assert_relative_eq!(s * p.omega0 / p.eps_s(), faction(k), max_relative = 1e-10);
    }
}

#[test]
fn bounce_exponent_from_quadrature_and_from_report() {
    // The report's quadrature value uses the well built from the same ratio,
    // so both routes describe one exponent.
    let p = reference();
    let r = p.resonance_data().unwrap();
    let rep = rate_report(589.74, 171.55, Some(&r)).unwrap();
    assert_relative_eq!(rep.lambda_quadrature.unwrap(), rep.lambda, max_relative = 1e-3);
}

#[test]
fn harmonic_limit() {
    let mut p = reference();
    p.lambda *= 1e-4;
    let r = p.resonance_data().unwrap();
    assert_relative_eq!(r.e0, 0.5 * p.hbar * p.omega0, max_relative = 1e-8);
    assert_relative_eq!(r.tau, PI / p.omega0, max_relative = 1e-8);
}

#[test]
fn persistence_two_routes() {
    let p = reference();
    let r = p.resonance_data().unwrap();
    let grid = MomentumGrid::around_resonance(&p, &r, 256.0, 1024).unwrap();
    let fv = false_vacuum_coeffs(&grid, &r).unwrap().coeffs;
    let t_end = 3.0 * p.hbar / r.epsilon;
    let times: Vec<f64> = (0..=6).map(|i| t_end * i as f64 / 6.0).collect();
    let energy_grid = persistence_curve(&r, &times, PersistenceGrid { window_in_epsilons: 256.0, n: 1024 }).unwrap();
    for (t, e) in times.iter().zip(&energy_grid) {
        let ct = fv.evolve_closed(*t, p.hbar).unwrap();
        let overlap = fv.overlap(&ct).unwrap();
        assert_relative_eq!(overlap, grid_persistence(&fv, *t, p.hbar), max_relative = 1e-10);
        // The momentum grid and the energy grid sample the same Lorentzian.
        assert!((overlap / e.numeric - 1.0).abs() < 1e-2);
    }
}

#[test]
fn local_state_agrees_with_energy_representation() {
    let p = reference();
    let r = p.resonance_data().unwrap();
    let s = LocalState::false_vacuum(&p, &r, LocalAxes::default(), BoundaryMode::default()).unwrap();
    let d = s.diagnostics();
    assert_relative_eq!(d.norm, 1.0, max_relative = 1e-12);
    assert!((d.mean_energy - r.e0).abs() < 5.0 * r.epsilon);
    // Pure phase evolution keeps the purity of the energy-grid state too.
    let bath = BathParams::new(0.0, 0.5, 0.0).unwrap();
    let phase = LocalTerms { phase: true, ..LocalTerms::NONE };
    let out = s.evolve_local(&bath, phase, |_| 0.0, p.hbar / r.epsilon, 5).unwrap();
    assert_relative_eq!(out.diagnostics().purity, d.purity, max_relative = 1e-12);
}

#[test]
fn anomalous_diffusion_slows_escape() {
    let p = reference();
    let r = p.resonance_data().unwrap();
    let base = BathParams::new(0.01, 0.5, 0.0).unwrap();
    let tau_d = Timescales::new(&r, &base, &p).tau_d;
    let delta = (0.5 * base.gamma / (4.0 * tau_d)).sqrt();
    let with = BathParams::new(0.01, 0.5, delta).unwrap();
    let s_eff = sigma_eff(&with, tau_d).unwrap();
    assert_relative_eq!(s_eff, 0.25, max_relative = 1e-12);
    let rate = |s2: f64| {
        let prob = KramersProblem::new(p.mass, s2, base.gamma, p.eps_s(), r.tau).unwrap();
        escape_rate_numeric(&prob, 800).unwrap().r
    };
    assert!(rate(s_eff) < rate(0.5));
}

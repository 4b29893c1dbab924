use std::f64::consts::PI;

use casimir_td::error::Error;
use casimir_td::fdtd::{Damping, FdtdParams};
use casimir_td::force::thermal_force;
use casimir_td::model::{build_parallel_plates_1d, build_piston_2d, rasterize, Axis, Geometry, Polarization, TemperatureSpec};
use casimir_td::reference::lifshitz_1d;
use casimir_td::stress::{assemble_stress_trace, AssembleOptions, StressTrace};
use casimir_td::weights::SynthesisOptions;

const A: usize = 12;

fn plates() -> Geometry {
    build_parallel_plates_1d(A, 2, A).unwrap().with_absorber(16).unwrap()
}

fn trace(g: &Geometry, pol: Polarization, params: &FdtdParams, mirror_y: bool) -> StressTrace {
    let m = rasterize(g);
    let s = g.stress_surface(pol).unwrap();
    assemble_stress_trace(&m, &s, Axis::X, params, &AssembleOptions { jobs: 1, mirror_y }).unwrap()
}

#[test]
fn plates_match_lifshitz() {
    let sigma = 1.0 / A as f64;
    let t = trace(&plates(), Polarization::OneD, &FdtdParams::new(sigma, 0.5, 1_000_000, 1e-6), false);
    for tau in [0.0, PI / 2.0, PI, 2.0 * PI] {
        let temp = TemperatureSpec::new(tau, A as f64).unwrap();
        let f = thermal_force(&t, sigma, &temp, SynthesisOptions::default()).unwrap();
        let exact = lifshitz_1d(A as f64, tau).unwrap();
        assert!((f.total / exact.total - 1.0).abs() < 0.03, "tau {tau}: {} vs {}", f.total, exact.total);
        if tau > 0.0 {
            assert!((f.n0 / exact.n0 - 1.0).abs() < 0.05, "tau {tau}: n0 {} vs {}", f.n0, exact.n0);
        }
    }
}

#[test]
fn electric_only_damping_leaves_static_magnetic_response() {
    let sigma = 1.0 / A as f64;
    let g = plates();
    let m = rasterize(&g);
    let s = g.stress_surface(Polarization::OneD).unwrap();
    let mut params = FdtdParams::new(sigma, 0.5, 20_000, 1e-6);
    params.damping = Damping::ElectricOnly;
    let r = assemble_stress_trace(&m, &s, Axis::X, &params, &AssembleOptions::default());
    assert!(matches!(r, Err(Error::NonDecayingRun { .. })), "{r:?}");
    params.damping = Damping::Dual;
    params.max_steps = 1_000_000;
    assert!(assemble_stress_trace(&m, &s, Axis::X, &params, &AssembleOptions::default()).is_ok());
}

#[test]
fn mirror_reduction_reproduces_full_trace() {
    let g = build_piston_2d(8, 6, Some(12), 6).unwrap().with_absorber(6).unwrap();
    let params = FdtdParams::new(1.0 / 6.0, 0.5, 200_000, 1e-5);
    for pol in [Polarization::Te, Polarization::Tm] {
        let full = trace(&g, pol, &params, false);
        let half = trace(&g, pol, &params, true);
        assert!(half.runs < full.runs);
        let scale = full.gamma_e.iter().chain(&full.gamma_h).fold(0.0f64, |m, v| m.max(v.abs()));
        let n = full.len().min(half.len());
        for k in 0..n {
            assert!((full.total(k) - half.total(k)).abs() <= 1e-10 * scale, "{pol:?} step {k}");
        }
    }
}

mod common;

use dstt_kit::dynamics::{jacobi_constant, two_body_angular_momentum, two_body_energy, AerocaptureParams, Model, StateVector};
use dstt_kit::integrator::IntegratorSettings;
use dstt_kit::stt::integrate_state;
use nalgebra::DVector;

#[test]
fn leo_first_integrals() {
    let cfg = common::load("leo");
    let model = cfg.build_model().unwrap();
    let x0 = cfg.initial_state().unwrap();
    let xs = integrate_state(&model, &x0, &cfg.grid().unwrap(), &cfg.integrator).unwrap();
    let e0 = two_body_energy(x0.as_slice(), 1.0);
    let h0 = two_body_angular_momentum(x0.as_slice());
    let h0n = h0.iter().map(|v| v * v).sum::<f64>().sqrt();
    for x in &xs {
        assert!(((two_body_energy(x.as_slice(), 1.0) - e0) / e0).abs() < 1e-10);
        let h = two_body_angular_momentum(x.as_slice());
        let dh = h.iter().zip(&h0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dh / h0n < 1e-10);
    }
    // three full periods bring the circular orbit back to its start
    assert!((xs.last().unwrap() - &x0).norm() < 1e-8);
}

#[test]
fn nrho_jacobi_constant() {
    let cfg = common::load("nrho");
    let model = cfg.build_model().unwrap();
    let x0 = cfg.initial_state().unwrap();
    let Model::Cr3bp { params, .. } = &model else { unreachable!() };
    let mu = params.mu_star;
    let xs = integrate_state(&model, &x0, &cfg.grid().unwrap(), &cfg.integrator).unwrap();
    let c0 = jacobi_constant(x0.as_slice(), mu);
    for x in &xs {
        assert!((jacobi_constant(x.as_slice(), mu) - c0).abs() < 1e-10 * c0.abs());
    }
}

fn aero_grid(model: &Model, seconds: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| seconds * k as f64 / n as f64 / model.time_unit()).collect()
}

#[test]
fn vacuum_ballistic_energy() {
    let params = AerocaptureParams {
        lift_to_drag: 0.0,
        ballistic_coeff: 1e300,
        omega_planet: 0.0,
        j2: 0.0,
        ..AerocaptureParams::uranus()
    };
    let model = Model::aerocapture(params).unwrap();
    let x0 = model
        .nondimensionalize(&StateVector::dimensional(DVector::from_vec(vec![
            26559.0, 190.05, -9.76, 24.93, -5.0, 45.0, -23.32,
        ])))
        .values;
    let xs = integrate_state(&model, &x0, &aero_grid(&model, 450.0, 90), &IntegratorSettings::default()).unwrap();
    let energy = |x: &DVector<f64>| 0.5 * x[3] * x[3] - 1.0 / x[0];
    let e0 = energy(&x0);
    for x in &xs {
        assert!((energy(x) - e0).abs() < 1e-9 * e0.abs());
    }
}

#[test]
fn exponential_atmosphere_consistency() {
    let cfg = common::load("uranus_aerocapture");
    let model = cfg.build_model().unwrap();
    let Model::Aerocapture { coeffs, .. } = &model else { unreachable!() };
    let x0 = cfg.initial_state().unwrap();
    let xs = integrate_state(&model, &x0, &cfg.grid().unwrap(), &cfg.integrator).unwrap();
    for x in &xs {
        let want = (x0[0] - x[0]) / coeffs.scale_height;
        assert!((x[6] - x0[6] - want).abs() < 1e-9);
    }
    // the pass dips into the atmosphere and climbs back out
    let h_min = xs.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
    assert!(h_min < x0[0] && xs.last().unwrap()[4] > 0.0);
}

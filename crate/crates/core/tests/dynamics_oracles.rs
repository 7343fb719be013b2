//! Structured dynamics against a hand-reduced two-mode model, Christoffel
//! symbols of a finite-differenced mass matrix, and energy bookkeeping.

mod common;

use common::oracles::{coupled_modes, energy_drift, reduced_two_mode, zero_gravity_basis};
use common::{reference_basis, reference_beam, random_state, rng};
use flexlink::dynamics::{accelerations, coriolis_matrix, mass_matrix, total_energy};
use flexlink::sim::rk4_step;
use flexlink::{state_derivative, ModalBasis, ModalConstants, PlantState, QuadratureConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn structured_model_reproduces_the_reduced_equations() {
    let basis = reference_basis();
    let mut rng = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (theta, theta_dot, q, q_dot) = random_state(&mut rng, 2);
        let x = PlantState::new(theta, theta_dot, &q, &q_dot);
        let u = [rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let structured = accelerations(&x, &DVector::from_row_slice(&u), &basis.constants).unwrap();
        let reduced = reduced_two_mode(&x, &u, &basis.constants);
        for i in 0..3 {
            let err = (structured[i] - reduced[i]).abs() / reduced[i].abs().max(1.0);
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-10, "largest relative difference {worst:.3e}");
}

#[test]
fn mass_matrix_is_spd_everywhere() {
    let basis = reference_basis();
    let mut rng = rng(12);
    let mut smallest = f64::INFINITY;
    for _ in 0..10_000 {
        let (theta, _, q, _) = random_state(&mut rng, 2);
        let coords = DVector::from_vec(vec![theta, q[0], q[1]]);
        let m = mass_matrix(&coords, &basis.constants);
        assert_eq!(m, m.transpose());
        let eig = m.symmetric_eigenvalues().min();
        assert!(eig > 0.0, "M not positive definite at {coords:?}");
        smallest = smallest.min(eig);
    }
    assert!(smallest > 2.0e-4, "smallest eigenvalue {smallest:.3e}");
}

fn finite_difference_mass_partial(coords: &DVector<f64>, k: usize, c: &ModalConstants) -> DMatrix<f64> {
    let h = 1e-6;
    let mut plus = coords.clone();
    let mut minus = coords.clone();
    plus[k] += h;
    minus[k] -= h;
    (mass_matrix(&plus, c) - mass_matrix(&minus, c)) / (2.0 * h)
}

#[test]
fn coriolis_matches_christoffel_symbols_of_the_mass_matrix() {
    let basis = reference_basis();
    let c = &basis.constants;
    let mut rng = rng(13);
    for _ in 0..200 {
        let (theta, theta_dot, q, q_dot) = random_state(&mut rng, 2);
        let coords = DVector::from_vec(vec![theta, q[0], q[1]]);
        let rates = DVector::from_vec(vec![theta_dot, q_dot[0], q_dot[1]]);
        let dm: Vec<DMatrix<f64>> = (0..3).map(|k| finite_difference_mass_partial(&coords, k, c)).collect();
        let oracle = DMatrix::from_fn(3, 3, |k, j| {
            (0..3)
                .map(|i| 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * rates[i])
                .sum::<f64>()
        });
        let analytic = coriolis_matrix(&coords, &rates, c);
        assert!((&analytic - &oracle).amax() < 1e-8, "{analytic} vs {oracle}");
    }
}

#[test]
fn mass_rate_minus_twice_coriolis_is_skew() {
    let basis = reference_basis();
    let c = &basis.constants;
    let mut rng = rng(14);
    for _ in 0..1000 {
        let (theta, theta_dot, q, q_dot) = random_state(&mut rng, 2);
        let coords = DVector::from_vec(vec![theta, q[0], q[1]]);
        let rates = DVector::from_vec(vec![theta_dot, q_dot[0], q_dot[1]]);
        // Ṁ along the motion by central differences.
        let h = 1e-6;
        let m_dot = (mass_matrix(&(&coords + &rates * h), c) - mass_matrix(&(&coords - &rates * h), c)) / (2.0 * h);
        let n = m_dot - coriolis_matrix(&coords, &rates, c) * 2.0;
        let asym = (&n + n.transpose()).amax();
        assert!(asym < 1e-9, "Ṁ − 2C not skew: {asym:.3e}");
        // Hence ℘̇ᵀ(Ṁ − 2C)℘̇ = 0.
        assert!(rates.dot(&(&n * &rates)).abs() < 1e-9);
    }
}

#[test]
fn power_balance() {
    // d(K + V)/dt = ℘̇ᵀu for the unforced-by-contact plant.
    let basis = reference_basis();
    let c = &basis.constants;
    let mut rng = rng(15);
    for _ in 0..200 {
        let (theta, theta_dot, q, q_dot) = random_state(&mut rng, 2);
        let x = PlantState::new(theta, theta_dot, &q, &q_dot);
        let u = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3]);
        let xdot = state_derivative(&x, &u, c).unwrap();
        let h = 1e-8;
        let energy = |s: PlantState| {
            let (k, v) = total_energy(&s, c);
            k + v
        };
        let plus = PlantState::from_vector(x.as_vector() + xdot.as_vector() * h);
        let minus = PlantState::from_vector(x.as_vector() - xdot.as_vector() * h);
        let rate = (energy(plus) - energy(minus)) / (2.0 * h);
        let power = x.rates().dot(&u);
        assert!((rate - power).abs() < 1e-6 * power.abs().max(1.0), "{rate} vs {power}");
    }
}

#[test]
fn unforced_energy_drift_is_small() {
    // Spinning arm vibrating in its first free-hub elastic mode.
    let basis = zero_gravity_basis();
    let (_, shapes) = coupled_modes(&basis.constants);
    let shape = shapes.column(1) * (0.01 / shapes[(1, 1)]);
    let x0 = PlantState::new(shape[0], 1.0, &[shape[1], shape[2]], &[0.0, 0.0]);
    let drift = energy_drift(x0, 1e-4, 10.0);
    assert!(drift < 1e-6, "relative energy drift {drift:.3e}");
}

#[test]
fn energy_drift_shrinks_with_the_step() {
    // Both modes excited: RK4 damps the 940 rad/s coupled mode at h = 1e-4,
    // and the loss falls by about 2⁵ per halving of the step.
    let x0 = PlantState::new(0.0, 1.0, &[0.01, -0.002], &[0.0, 0.0]);
    let coarse = energy_drift(x0.clone(), 1e-4, 1.0);
    let fine = energy_drift(x0, 5e-5, 1.0);
    assert!(coarse / fine > 20.0, "{coarse:.3e} -> {fine:.3e}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let basis = reference_basis();
    let c = &basis.constants;
    let u = DVector::from_vec(vec![0.2, 0.0, 0.0]);
    let x0 = PlantState::new(0.3, 0.5, &[0.004, -0.0005], &[0.1, -0.05]);
    let run = |h: f64| {
        let mut x = x0.clone();
        for _ in 0..(0.02 / h).round() as usize {
            x = rk4_step(&x, h, |s| state_derivative(s, &u, c)).unwrap();
        }
        x.into_vector()
    };
    let reference = run(1.25e-6);
    let e1 = (run(1e-4) - &reference).amax();
    let e2 = (run(5e-5) - &reference).amax();
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() < 2.0, "error ratio {ratio:.2} ({e1:.3e} / {e2:.3e})");
}

/// Period from upward zero crossings of `signal` sampled every `dt`.
fn measured_frequency(signal: &[f64], dt: f64) -> f64 {
    let crossings: Vec<f64> = signal
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
        .map(|(i, w)| (i as f64 + w[0] / (w[0] - w[1])) * dt)
        .collect();
    let periods = (crossings.len() - 1) as f64;
    std::f64::consts::TAU * periods / (crossings[crossings.len() - 1] - crossings[0])
}

#[test]
fn locked_hub_vibrates_at_the_cantilever_frequency() {
    let mut beam = reference_beam();
    beam.gravity = 0.0;
    beam.joint_inertia = 1e9;
    let basis = ModalBasis::new(beam, &QuadratureConfig::default()).unwrap();
    let c = &basis.constants;
    let zero = DVector::zeros(3);
    let mut x = PlantState::new(0.0, 0.0, &[1e-3, 0.0], &[0.0, 0.0]);
    let h = 1e-5;
    let mut q1 = Vec::new();
    for _ in 0..100_000 {
        x = rk4_step(&x, h, |s| state_derivative(s, &zero, c)).unwrap();
        q1.push(x.q(0));
    }
    let omega = measured_frequency(&q1, h);
    assert!((omega - 44.757).abs() / 44.757 < 1e-3, "ω₁ = {omega}");
}

#[test]
fn free_hub_frequencies_are_the_coupled_ones() {
    // With the hub free the elastic frequencies differ from the cantilever ones.
    let basis = zero_gravity_basis();
    let c = &basis.constants;
    let (omega, shapes) = coupled_modes(c);
    assert!(omega[0] < 1e-3);
    assert!((omega[1] - 196.0).abs() < 1.0, "{omega:?}");
    assert!((omega[2] - 940.0).abs() < 3.0, "{omega:?}");

    // Released along the first elastic mode shape, the arm oscillates at ω₁.
    let shape = shapes.column(1).normalize() * 1e-4;
    let mut x = PlantState::new(shape[0], 0.0, &[shape[1], shape[2]], &[0.0, 0.0]);
    let zero = DVector::zeros(3);
    let h = 1e-6;
    let mut q1 = Vec::new();
    for _ in 0..200_000 {
        x = rk4_step(&x, h, |s| state_derivative(s, &zero, c)).unwrap();
        q1.push(x.q(0));
    }
    let measured = measured_frequency(&q1, h);
    assert!((measured - omega[1]).abs() / omega[1] < 2e-3, "measured {measured}, expected {}", omega[1]);
}

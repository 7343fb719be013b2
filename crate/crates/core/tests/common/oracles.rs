//! Independent reference computations shared by the oracle and acceptance tests.

use flexlink::dynamics::{mass_matrix, total_energy};
use flexlink::sim::rk4_step;
use flexlink::{state_derivative, ModalBasis, ModalConstants, PlantState, QuadratureConfig};
use nalgebra::{DMatrix, DVector};

use super::reference_beam;

pub fn bisect_root(mut lo: f64, mut hi: f64) -> f64 {
    let f = |x: f64| x.cos() * x.cosh() + 1.0;
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Composite 5-point Gauss–Legendre.
pub fn gauss<F: Fn(f64) -> f64>(f: F, panels: usize) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = 1.0 / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = (p as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Two-mode accelerations solved by hand: each modal row gives `q̈ⱼ` in terms
/// of `θ̈`, which substituted into the joint row leaves a scalar equation.
pub fn reduced_two_mode(x: &PlantState, u: &[f64; 3], c: &ModalConstants) -> [f64; 3] {
    let (theta, theta_dot) = (x.theta(), x.theta_dot());
    let (s, co) = theta.sin_cos();
    let g = c.gravity;
    let m = &c.modes;
    let q = [x.q(0), x.q(1)];
    let q_dot = [x.q_dot(0), x.q_dot(1)];
    // q̈ⱼ = rⱼ − b3ⱼ θ̈
    let r = |j: usize| theta_dot * theta_dot * q[j] - m[j].b7 * g * co - m[j].b6 / m[j].b0 * q[j] + u[j + 1] / m[j].b0;
    let j0 = c.b8 + c.link_inertia;
    let lhs = j0 + (0..2).map(|j| m[j].b0 * q[j] * q[j]).sum::<f64>() - (m[0].b1 + m[1].b1);
    let rhs = u[0] - 2.0 * theta_dot * (0..2).map(|j| m[j].b0 * q[j] * q_dot[j]).sum::<f64>() - c.b4 * g * co
        + g * s * (0..2).map(|j| m[j].b5 * q[j]).sum::<f64>()
        - (0..2).map(|j| m[j].b2 * r(j)).sum::<f64>();
    let theta_ddot = rhs / lhs;
    [theta_ddot, r(0) - m[0].b3 * theta_ddot, r(1) - m[1].b3 * theta_ddot]
}

pub fn zero_gravity_basis() -> ModalBasis {
    let mut beam = reference_beam();
    beam.gravity = 0.0;
    ModalBasis::new(beam, &QuadratureConfig::default()).unwrap()
}

/// Largest relative deviation of `K + V` over `duration` of free motion.
pub fn energy_drift(x0: PlantState, h: f64, duration: f64) -> f64 {
    let basis = zero_gravity_basis();
    let c = &basis.constants;
    let zero = DVector::zeros(3);
    let energy = |x: &PlantState| {
        let (k, v) = total_energy(x, c);
        k + v
    };
    let e0 = energy(&x0);
    let mut x = x0;
    let mut worst = 0.0f64;
    for _ in 0..(duration / h).round() as usize {
        x = rk4_step(&x, h, |s| state_derivative(s, &zero, c)).unwrap();
        worst = worst.max((energy(&x) - e0).abs() / e0);
    }
    worst
}

/// Free-hub elastic frequencies and mode shapes (columns, ascending), the
/// generalized eigenpairs of `(diag(0, b6), M(0))`.
pub fn coupled_modes(c: &ModalConstants) -> (Vec<f64>, DMatrix<f64>) {
    let m = mass_matrix(&DVector::zeros(3), c);
    let k = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, c.modes[0].b6, c.modes[1].b6]));
    let l_inv = m.cholesky().unwrap().l().try_inverse().unwrap();
    let eigen = (&l_inv * k * l_inv.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let omega = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0).sqrt()).collect();
    let shapes = DMatrix::from_fn(3, 3, |r, col| (l_inv.transpose() * eigen.eigenvectors.column(order[col]))[r]);
    (omega, shapes)
}

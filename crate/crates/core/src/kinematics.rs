//! Tip kinematics including the elastic deflection of the link.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::modal::{check_domain, ModalBasis};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// `∂P/∂℘`, 2 × (ν+1), columns `[∂P/∂θ, ∂P/∂q₁₁, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexJacobian(pub DMatrix<f64>);

impl FlexJacobian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.0[(0, i)], self.0[(1, i)])
    }

    /// Tip velocity `J℘̇`.
    pub fn tip_velocity(&self, rates: &DVector<f64>) -> Vector2<f64> {
        let v = &self.0 * rates;
        Vector2::new(v[0], v[1])
    }
}

/// Transverse deflection `w(x̂) = Σ φ₁ⱼ(x̂) q₁ⱼ`; `coords` is `℘` (θ first).
pub fn deflection(x: f64, coords: &DVector<f64>, basis: &ModalBasis) -> Result<f64> {
    check_domain(x, basis.beam.length)?;
    let x = x.clamp(0.0, basis.beam.length);
    Ok(basis
        .shapes
        .iter()
        .enumerate()
        .map(|(j, shape)| shape.eval_unchecked(x, 0) * coords[j + 1])
        .sum())
}

/// `w(l)`, the deflection at the tip.
pub fn tip_deflection(coords: &DVector<f64>, basis: &ModalBasis) -> f64 {
    basis
        .tip_values()
        .iter()
        .enumerate()
        .map(|(j, phi)| phi * coords[j + 1])
        .sum()
}

/// `P = (l cosθ − w(l) sinθ, l sinθ + w(l) cosθ)`.
pub fn tip_position(coords: &DVector<f64>, basis: &ModalBasis) -> PlanarPoint {
    let l = basis.beam.length;
    let w = tip_deflection(coords, basis);
    let (s, c) = coords[0].sin_cos();
    PlanarPoint::new(l * c - w * s, l * s + w * c)
}

/// Analytic derivative of [`tip_position`] with respect to `℘`.
pub fn jacobian(coords: &DVector<f64>, basis: &ModalBasis) -> FlexJacobian {
    let l = basis.beam.length;
    let w = tip_deflection(coords, basis);
    let (s, c) = coords[0].sin_cos();
    let n = basis.mode_count() + 1;
    let mut j = DMatrix::zeros(2, n);
    j[(0, 0)] = -l * s - w * c;
    j[(1, 0)] = l * c - w * s;
    for (k, phi) in basis.tip_values().iter().enumerate() {
        j[(0, k + 1)] = -phi * s;
        j[(1, k + 1)] = phi * c;
    }
    FlexJacobian(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{circular_area, BeamParams, QuadratureConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn basis() -> ModalBasis {
        let beam = BeamParams {
            length: 1.0,
            area: circular_area(0.01),
            density: 2700.0,
            flexural_rigidity: 34.3612,
            joint_inertia: 1.3254e-6,
            gravity: 9.81,
            mode_count: 2,
        };
        ModalBasis::new(beam, &QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn rigid_positions() {
        let basis = basis();
        let p = tip_position(&DVector::from_vec(vec![0.0, 0.0, 0.0]), &basis);
        assert_relative_eq!(p.x, 1.0);
        assert_relative_eq!(p.y, 0.0);
        let p = tip_position(&DVector::from_vec(vec![FRAC_PI_4, 0.0, 0.0]), &basis);
        assert!((p.x - 0.7071).abs() < 1e-4 && (p.y - 0.7071).abs() < 1e-4);
        let p = tip_position(&DVector::from_vec(vec![FRAC_PI_2, 0.0, 0.0]), &basis);
        assert!(p.x.abs() < 1e-15);
        assert_relative_eq!(p.y, 1.0);
    }

    #[test]
    fn deflection_cases() {
        let basis = basis();
        let zero = DVector::from_vec(vec![0.4, 0.0, 0.0]);
        for i in 0..=10 {
            assert_eq!(deflection(i as f64 / 10.0, &zero, &basis).unwrap(), 0.0);
        }
        let bent = DVector::from_vec(vec![0.0, 0.02, -0.01]);
        assert!(deflection(0.0, &bent, &basis).unwrap().abs() < 1e-14);
        let c = 0.013;
        let single = DVector::from_vec(vec![0.0, c, 0.0]);
        assert_relative_eq!(deflection(1.0, &single, &basis).unwrap(), 2.0 * c, max_relative = 1e-9);
        assert!(deflection(1.5, &single, &basis).is_err());
    }

    #[test]
    fn rigid_jacobian_is_tangent() {
        let basis = basis();
        let theta = 0.7;
        let j = jacobian(&DVector::from_vec(vec![theta, 0.0, 0.0]), &basis);
        assert_relative_eq!(j.column(0).x, -theta.sin(), epsilon = 1e-15);
        assert_relative_eq!(j.column(0).y, theta.cos(), epsilon = 1e-15);
        for k in 1..3 {
            assert_relative_eq!(j.column(k).norm(), basis.tip_values()[k - 1].abs(), max_relative = 1e-12);
        }
    }
}

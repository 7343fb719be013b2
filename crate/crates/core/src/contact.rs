//! Frictionless compliant contact against a planar surface.
//!
//! While the tip is past the surface plane the environment pushes back with
//! the linear spring law `f_c = K_e (P − P₀)` on both planar components.

use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::{FlexError, Result};
use crate::kinematics::{FlexJacobian, PlanarPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub contact_point: PlanarPoint,
    /// Unit normal pointing from the surface into free space.
    pub normal: Vector2<f64>,
    /// Symmetric positive definite stiffness `K_e` (N/m).
    pub stiffness: Matrix2<f64>,
    /// When false the spring acts on both sides of the plane.
    pub unilateral: bool,
}

impl Environment {
    pub fn new(
        contact_point: PlanarPoint,
        normal: Vector2<f64>,
        stiffness: Matrix2<f64>,
        unilateral: bool,
    ) -> Result<Self> {
        let len = normal.norm();
        if !(len.is_finite() && len > 0.0) {
            return Err(FlexError::Config("environment normal must be non-zero".into()));
        }
        if (len - 1.0).abs() > 1e-3 {
            return Err(FlexError::Config(format!(
                "environment normal must have unit length, got |n| = {len}"
            )));
        }
        let asym = (stiffness - stiffness.transpose()).amax();
        if asym > 1e-12 * stiffness.amax().max(1.0) || stiffness.cholesky().is_none() {
            return Err(FlexError::Config(
                "environment stiffness Ke must be symmetric positive definite".into(),
            ));
        }
        Ok(Self {
            contact_point,
            normal: normal / len,
            stiffness,
            unilateral,
        })
    }

    /// Scalar stiffness promoted to `Ke·I`.
    pub fn isotropic(contact_point: PlanarPoint, normal: Vector2<f64>, stiffness: f64) -> Result<Self> {
        Self::new(contact_point, normal, Matrix2::identity() * stiffness, true)
    }

    /// Unit vector pointing into the surface, `−n`.
    pub fn inward(&self) -> Vector2<f64> {
        -self.normal
    }

    /// Stiffness along the inward normal, `nᵀ K_e n`.
    pub fn normal_stiffness(&self) -> f64 {
        self.normal.dot(&(self.stiffness * self.normal))
    }

    /// Signed depth of `p` past the plane (positive inside the surface).
    pub fn signed_depth(&self, p: PlanarPoint) -> f64 {
        -(p.to_vector() - self.contact_point.to_vector()).dot(&self.normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactForce {
    /// Force applied on the environment (N).
    pub force: Vector2<f64>,
    pub in_contact: bool,
    /// Penetration depth `δ ≥ 0` (m).
    pub penetration: f64,
}

impl ContactForce {
    pub const NONE: Self = Self {
        force: Vector2::new(0.0, 0.0),
        in_contact: false,
        penetration: 0.0,
    };

    pub fn magnitude(&self) -> f64 {
        self.force.norm()
    }
}

pub fn contact_force(p: PlanarPoint, env: &Environment) -> ContactForce {
    let depth = env.signed_depth(p);
    let in_contact = depth > 0.0;
    if !in_contact && env.unilateral {
        return ContactForce::NONE;
    }
    ContactForce {
        force: env.stiffness * (p.to_vector() - env.contact_point.to_vector()),
        in_contact,
        penetration: depth.max(0.0),
    }
}

/// Generalized reaction `τ_e = Jᵀ f_c`.
pub fn reaction_torque(jacobian: &FlexJacobian, fc: &ContactForce) -> DVector<f64> {
    jacobian
        .matrix()
        .tr_mul(&DVector::from_column_slice(fc.force.as_slice()))
}

//! Inner tracking law and outer implicit force loop.
//!
//! The inner loop is the PD law with model compensation
//!
//! ```text
//! u = Kp ℘̃ + Kv ℘̃̇ + M(℘)[℘̈d + Δ℘̃̇] + C(℘,℘̇)[℘̇d + Δ℘̃] + g(℘) + η(℘),   Δ = Kv⁻¹Kp
//! ```
//!
//! with `℘̃ = ℘d − ℘`. It acts on every generalized coordinate, the flexible
//! ones included. The outer loop integrates the normal force error into a
//! Cartesian offset of the inner loop's reference: `Ṗd = −Ke⁻¹ kf Δf`.
//! The offset is applied in Cartesian space and then mapped to a joint
//! reference by rigid-arm inverse kinematics.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::contact::{ContactForce, Environment};
use crate::dynamics::{DynamicsMatrices, PlantState};
use crate::error::{FlexError, Result};
use crate::kinematics::PlanarPoint;

/// Relative slack beyond the link length that a Cartesian reference may use.
pub const REACH_MARGIN: f64 = 0.1;

/// Smallest reference radius, relative to the link length.
pub const MIN_REACH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingGains {
    kp: DMatrix<f64>,
    kv: DMatrix<f64>,
    delta: DMatrix<f64>,
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(FlexError::Config(format!("{name} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let symmetric = (m - m.transpose()).amax() <= 1e-12 * scale;
    if !symmetric || m.iter().any(|v| !v.is_finite()) || m.clone().cholesky().is_none() {
        return Err(FlexError::Config(format!("{name} is not symmetric positive definite")));
    }
    Ok(())
}

impl TrackingGains {
    pub fn new(kp: DMatrix<f64>, kv: DMatrix<f64>) -> Result<Self> {
        check_spd("Kp", &kp)?;
        check_spd("Kv", &kv)?;
        if kp.shape() != kv.shape() {
            return Err(FlexError::Config(format!(
                "Kp is {:?} but Kv is {:?}",
                kp.shape(),
                kv.shape()
            )));
        }
        let delta = kv
            .clone()
            .cholesky()
            .map(|c| c.solve(&kp))
            .ok_or_else(|| FlexError::Config("Kv is not symmetric positive definite".into()))?;
        let sv = delta.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if !(lo > f64::EPSILON * hi) {
            return Err(FlexError::Config("Δ = Kv⁻¹Kp is singular".into()));
        }
        Ok(Self { kp, kv, delta })
    }

    pub fn diagonal(kp: &[f64], kv: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(kp)),
            DMatrix::from_diagonal(&DVector::from_column_slice(kv)),
        )
    }

    pub fn kp(&self) -> &DMatrix<f64> {
        &self.kp
    }

    pub fn kv(&self) -> &DMatrix<f64> {
        &self.kv
    }

    /// `Δ = Kv⁻¹ Kp`.
    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn dimension(&self) -> usize {
        self.kp.nrows()
    }

    /// Multiplies both gain matrices by `factor`; `Δ` is unchanged.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.kp * factor, &self.kv * factor)
    }
}

/// Desired generalized coordinates, rates and accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointReference {
    pub position: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

impl JointReference {
    /// Joint angle `theta` with the flexible coordinates held at zero.
    pub fn joint(theta: f64, theta_dot: f64, theta_ddot: f64, mode_count: usize) -> Self {
        let mut r = Self::hold(&DVector::zeros(mode_count + 1));
        r.position[0] = theta;
        r.velocity[0] = theta_dot;
        r.acceleration[0] = theta_ddot;
        r
    }

    pub fn hold(position: &DVector<f64>) -> Self {
        let n = position.len();
        Self {
            position: position.clone(),
            velocity: DVector::zeros(n),
            acceleration: DVector::zeros(n),
        }
    }

    /// Position and velocity errors `(℘d − ℘, ℘̇d − ℘̇)`.
    pub fn errors(&self, state: &PlantState) -> (DVector<f64>, DVector<f64>) {
        (&self.position - state.coordinates(), &self.velocity - state.rates())
    }
}

pub fn tracking_control(
    state: &PlantState,
    reference: &JointReference,
    gains: &TrackingGains,
    dynamics: &DynamicsMatrices,
) -> DVector<f64> {
    let (e, e_dot) = reference.errors(state);
    let delta = gains.delta();
    gains.kp() * &e
        + gains.kv() * &e_dot
        + &dynamics.mass * (&reference.acceleration + delta * &e_dot)
        + &dynamics.coriolis * (&reference.velocity + delta * &e)
        + &dynamics.gravity
        + &dynamics.elastic
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSample {
    pub value: f64,
    pub rate: f64,
}

/// `V = ½ sᵀ M s + ℘̃ᵀ Kp ℘̃` with `s = ℘̃̇ + Δ℘̃`, and its closed-loop rate
/// `V̇ = −℘̃̇ᵀ Kv ℘̃̇ − ℘̃ᵀ Δᵀ Kv Δ ℘̃`.
pub fn lyapunov_value(
    state: &PlantState,
    reference: &JointReference,
    gains: &TrackingGains,
    dynamics: &DynamicsMatrices,
) -> LyapunovSample {
    let (e, e_dot) = reference.errors(state);
    let delta = gains.delta();
    let s = &e_dot + delta * &e;
    let value = 0.5 * s.dot(&(&dynamics.mass * &s)) + e.dot(&(gains.kp() * &e));
    let de = delta * &e;
    let rate = -e_dot.dot(&(gains.kv() * &e_dot)) - de.dot(&(gains.kv() * &de));
    LyapunovSample { value, rate }
}

/// Integral state of the outer force loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceLoop {
    desired: f64,
    gain: f64,
    inward: Vector2<f64>,
    compliance: Matrix2<f64>,
    offset: Vector2<f64>,
    velocity: Vector2<f64>,
}

impl ForceLoop {
    /// `desired` is the force magnitude to press into `env` along `−n`; `gain` is `kf`.
    pub fn new(desired: f64, gain: f64, env: &Environment) -> Result<Self> {
        if !(desired.is_finite() && desired >= 0.0) {
            return Err(FlexError::Config(format!("desired force must be non-negative, got {desired}")));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(FlexError::Config(format!("force loop gain kf must be positive, got {gain}")));
        }
        let compliance = env
            .stiffness
            .try_inverse()
            .ok_or_else(|| FlexError::Config("environment stiffness is singular".into()))?;
        Ok(Self {
            desired,
            gain,
            inward: env.inward(),
            compliance,
            offset: Vector2::zeros(),
            velocity: Vector2::zeros(),
        })
    }

    pub fn desired(&self) -> f64 {
        self.desired
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `fd·(−n)`.
    pub fn desired_force(&self) -> Vector2<f64> {
        self.inward * self.desired
    }

    /// `k = Ke⁻¹ kf`.
    pub fn reference_gain(&self) -> Matrix2<f64> {
        self.compliance * self.gain
    }

    /// Normal component of `fc − fd`.
    pub fn force_error(&self, fc: &ContactForce) -> f64 {
        (fc.force - self.desired_force()).dot(&self.inward)
    }

    /// `Ṗd = −k Δf` along the inward normal.
    pub fn velocity_command(&self, fc: &ContactForce) -> Vector2<f64> {
        -(self.reference_gain() * (self.inward * self.force_error(fc)))
    }

    /// One explicit step of the offset integrator; returns `(Ṗd, Pd_offset)`.
    pub fn update(&mut self, fc: &ContactForce, dt: f64) -> (Vector2<f64>, Vector2<f64>) {
        self.velocity = self.velocity_command(fc);
        self.offset += self.velocity * dt;
        (self.velocity, self.offset)
    }

    pub fn offset(&self) -> Vector2<f64> {
        self.offset
    }

    pub fn velocity(&self) -> Vector2<f64> {
        self.velocity
    }
}

/// Projects `p` into the reachable annulus; `None` when no change is needed.
pub fn clamp_to_workspace(p: PlanarPoint, length: f64) -> Option<PlanarPoint> {
    let r = p.norm();
    let (lo, hi) = (MIN_REACH * length, (1.0 + REACH_MARGIN) * length);
    if r >= lo && r <= hi {
        return None;
    }
    let dir = if r > 0.0 { p.to_vector() / r } else { Vector2::x() };
    Some(PlanarPoint::from_vector(dir * r.clamp(lo, hi)))
}

/// Rigid-arm inverse kinematics of a Cartesian reference.
///
/// `θd = atan2(y, x)` (unwrapped towards the current joint angle) and
/// `θ̇d = (P × Ṗ)/|P|²`, the pseudo-inverse of the rigid θ-column at the
/// reference. The flexible coordinates are driven to zero.
pub fn cartesian_to_joint_reference(
    p_ref: PlanarPoint,
    p_ref_dot: Vector2<f64>,
    state: &PlantState,
    length: f64,
) -> JointReference {
    let p = match clamp_to_workspace(p_ref, length) {
        Some(clamped) => {
            log::debug!(
                "reference ({:.4}, {:.4}) is outside the workspace; clamped to ({:.4}, {:.4})",
                p_ref.x,
                p_ref.y,
                clamped.x,
                clamped.y
            );
            clamped
        }
        None => p_ref,
    };
    let mut theta = p.y.atan2(p.x);
    let turns = ((state.theta() - theta) / std::f64::consts::TAU).round();
    theta += turns * std::f64::consts::TAU;
    let r2 = p.x * p.x + p.y * p.y;
    let theta_dot = (p.x * p_ref_dot.y - p.y * p_ref_dot.x) / r2;
    JointReference::joint(theta, theta_dot, 0.0, state.mode_count())
}

/// Quintic rest-to-rest profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticProfile {
    pub start: f64,
    pub end: f64,
    pub duration: f64,
}

impl QuinticProfile {
    /// `(position, velocity, acceleration)` at time `t`.
    pub fn sample(&self, t: f64) -> (f64, f64, f64) {
        if self.duration <= 0.0 || t >= self.duration {
            return (self.end, 0.0, 0.0);
        }
        if t <= 0.0 {
            return (self.start, 0.0, 0.0);
        }
        let d = self.end - self.start;
        let tau = t / self.duration;
        let s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
        let ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / self.duration;
        let dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (self.duration * self.duration);
        (self.start + d * s, d * ds, d * dds)
    }
}

//! Joint-space dynamics of the flexible link,
//! `M(℘)℘̈ + C(℘,℘̇)℘̇ + g(℘) + η(℘) = u`, with `℘ = [θ, q₁₁ … q₁ᵥ]`.
//!
//! The structured matrices follow from the link energies
//!
//! ```text
//! K = ½(Ib + ρAl³/3)θ̇² + ½ρA θ̇² Σ a0ⱼ qⱼ² + ½ Σ b0ⱼ q̇ⱼ² + θ̇ Σ b2ⱼ q̇ⱼ
//! V = b4 g sinθ + g cosθ Σ b5ⱼ qⱼ + ½ Σ b6ⱼ qⱼ²
//! ```
//!
//! so only `M₀₀ = Ib + ρAl³/3 + Σ b0ⱼ qⱼ²` depends on the configuration, and
//! `C` is assembled from Christoffel symbols of `M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{FlexError, Result};
use crate::modal::ModalConstants;

/// Plant state laid out as `[θ, θ̇, q₁₁, q̇₁₁, …, q₁ᵥ, q̇₁ᵥ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState(DVector<f64>);

impl PlantState {
    pub fn new(theta: f64, theta_dot: f64, q: &[f64], q_dot: &[f64]) -> Self {
        assert_eq!(q.len(), q_dot.len(), "modal coordinate and rate counts differ");
        let mut x = DVector::zeros(2 + 2 * q.len());
        x[0] = theta;
        x[1] = theta_dot;
        for (j, (&qj, &vj)) in q.iter().zip(q_dot).enumerate() {
            x[2 + 2 * j] = qj;
            x[3 + 2 * j] = vj;
        }
        Self(x)
    }

    pub fn at_rest(theta: f64, mode_count: usize) -> Self {
        let zeros = vec![0.0; mode_count];
        Self::new(theta, 0.0, &zeros, &zeros)
    }

    pub fn from_vector(x: DVector<f64>) -> Self {
        assert!(x.len() >= 4 && x.len() % 2 == 0, "state length must be 2 + 2ν");
        Self(x)
    }

    /// Rebuilds the interleaved layout from coordinates and rates.
    pub fn from_coordinates(coords: &DVector<f64>, rates: &DVector<f64>) -> Self {
        let n = coords.len();
        let mut x = DVector::zeros(2 * n);
        for i in 0..n {
            x[2 * i] = coords[i];
            x[2 * i + 1] = rates[i];
        }
        Self(x)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn mode_count(&self) -> usize {
        self.0.len() / 2 - 1
    }

    pub fn theta(&self) -> f64 {
        self.0[0]
    }

    pub fn theta_dot(&self) -> f64 {
        self.0[1]
    }

    /// Modal coordinate `q₁ⱼ`, `j` zero-based.
    pub fn q(&self, j: usize) -> f64 {
        self.0[2 + 2 * j]
    }

    pub fn q_dot(&self, j: usize) -> f64 {
        self.0[3 + 2 * j]
    }

    /// Generalized coordinates `℘ = [θ, q₁₁, …]`.
    pub fn coordinates(&self) -> DVector<f64> {
        DVector::from_fn(self.0.len() / 2, |i, _| self.0[2 * i])
    }

    /// Generalized rates `℘̇`.
    pub fn rates(&self) -> DVector<f64> {
        DVector::from_fn(self.0.len() / 2, |i, _| self.0[2 * i + 1])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsMatrices {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
    /// Elastic restoring vector `η`; zero in the joint row, `b6ⱼ qⱼ` per mode.
    pub elastic: DVector<f64>,
}

impl DynamicsMatrices {
    /// `C(℘,℘̇)℘̇ + g(℘) + η(℘)`.
    pub fn bias(&self, rates: &DVector<f64>) -> DVector<f64> {
        &self.coriolis * rates + &self.gravity + &self.elastic
    }
}

/// Mass matrix of the assumed-modes link.
pub fn mass_matrix(coords: &DVector<f64>, consts: &ModalConstants) -> DMatrix<f64> {
    let n = consts.mode_count() + 1;
    debug_assert_eq!(coords.len(), n);
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = consts.rigid_inertia();
    for (j, mode) in consts.modes.iter().enumerate() {
        let q = coords[j + 1];
        m[(0, 0)] += mode.b0 * q * q;
        m[(0, j + 1)] = mode.b2;
        m[(j + 1, 0)] = mode.b2;
        m[(j + 1, j + 1)] = mode.b0;
    }
    m
}

/// Christoffel construction `C[k,j] = Σᵢ ½(∂M[k,j]/∂℘ᵢ + ∂M[k,i]/∂℘ⱼ − ∂M[i,j]/∂℘ₖ) ℘̇ᵢ`,
/// which makes `Ṁ − 2C` skew. Only `M₀₀` varies, through `∂M₀₀/∂qⱼ = 2 b0ⱼ qⱼ`,
/// leaving
///
/// ```text
/// C[0,0] = Σ b0ⱼ qⱼ q̇ⱼ    C[0,j] = b0ⱼ qⱼ θ̇    C[j,0] = −b0ⱼ qⱼ θ̇
/// ```
pub fn coriolis_matrix(coords: &DVector<f64>, rates: &DVector<f64>, consts: &ModalConstants) -> DMatrix<f64> {
    let n = coords.len();
    let mut c = DMatrix::zeros(n, n);
    for (j, mode) in consts.modes.iter().enumerate() {
        let k = mode.b0 * coords[j + 1];
        c[(0, 0)] += k * rates[j + 1];
        c[(0, j + 1)] = k * rates[0];
        c[(j + 1, 0)] = -k * rates[0];
    }
    c
}

pub fn gravity_vector(coords: &DVector<f64>, consts: &ModalConstants) -> DVector<f64> {
    let g = consts.gravity;
    let (s, c) = coords[0].sin_cos();
    let mut out = DVector::zeros(coords.len());
    out[0] = consts.b4 * g * c;
    for (j, mode) in consts.modes.iter().enumerate() {
        out[0] -= g * s * mode.b5 * coords[j + 1];
        out[j + 1] = mode.b5 * g * c;
    }
    out
}

pub fn elastic_vector(coords: &DVector<f64>, consts: &ModalConstants) -> DVector<f64> {
    let mut out = DVector::zeros(coords.len());
    for (j, mode) in consts.modes.iter().enumerate() {
        out[j + 1] = mode.b6 * coords[j + 1];
    }
    out
}

pub fn dynamics_matrices(state: &PlantState, consts: &ModalConstants) -> DynamicsMatrices {
    assert_eq!(state.mode_count(), consts.mode_count(), "state and constants disagree on ν");
    let coords = state.coordinates();
    let rates = state.rates();
    DynamicsMatrices {
        mass: mass_matrix(&coords, consts),
        coriolis: coriolis_matrix(&coords, &rates, consts),
        gravity: gravity_vector(&coords, consts),
        elastic: elastic_vector(&coords, consts),
    }
}

/// `C(℘,℘̇)℘̇ + g(℘) + η(℘)` without forming the matrices.
pub fn bias_vector(coords: &DVector<f64>, rates: &DVector<f64>, consts: &ModalConstants) -> DVector<f64> {
    let g = consts.gravity;
    let (s, c) = coords[0].sin_cos();
    let theta_dot = rates[0];
    let mut out = DVector::zeros(coords.len());
    out[0] = consts.b4 * g * c;
    for (j, mode) in consts.modes.iter().enumerate() {
        let (q, q_dot) = (coords[j + 1], rates[j + 1]);
        let k = mode.b0 * q;
        out[0] += 2.0 * k * q_dot * theta_dot - g * s * mode.b5 * q;
        out[j + 1] = -k * theta_dot * theta_dot + mode.b5 * g * c + mode.b6 * q;
    }
    out
}

/// Generalized accelerations `℘̈ = M⁻¹(u − C℘̇ − g − η)`.
pub fn accelerations(state: &PlantState, input: &DVector<f64>, consts: &ModalConstants) -> Result<DVector<f64>> {
    let coords = state.coordinates();
    let rhs = input - bias_vector(&coords, &state.rates(), consts);
    let chol = mass_matrix(&coords, consts).cholesky().ok_or_else(|| {
        FlexError::Numeric(format!("mass matrix is not positive definite at {:?}", state.as_vector().as_slice()))
    })?;
    Ok(chol.solve(&rhs))
}

/// `ẋ` for the interleaved state given generalized input `u` (dimension ν+1).
pub fn state_derivative(state: &PlantState, input: &DVector<f64>, consts: &ModalConstants) -> Result<PlantState> {
    if input.len() != consts.mode_count() + 1 {
        return Err(FlexError::Numeric(format!(
            "input has {} entries, expected {}",
            input.len(),
            consts.mode_count() + 1
        )));
    }
    if !state.is_finite() || input.iter().any(|v| !v.is_finite()) {
        return Err(FlexError::Numeric("non-finite state or input".into()));
    }
    let acc = accelerations(state, input, consts)?;
    let mut x = DVector::zeros(state.0.len());
    for i in 0..acc.len() {
        x[2 * i] = state.0[2 * i + 1];
        x[2 * i + 1] = acc[i];
    }
    Ok(PlantState(x))
}

/// Kinetic and potential energy `(K, V)` in joules.
pub fn total_energy(state: &PlantState, consts: &ModalConstants) -> (f64, f64) {
    let coords = state.coordinates();
    let rates = state.rates();
    let kinetic = 0.5 * rates.dot(&(mass_matrix(&coords, consts) * &rates));
    let (s, c) = coords[0].sin_cos();
    let g = consts.gravity;
    let mut potential = consts.b4 * g * s;
    for (j, mode) in consts.modes.iter().enumerate() {
        let q = coords[j + 1];
        potential += g * c * mode.b5 * q + 0.5 * mode.b6 * q * q;
    }
    (kinetic, potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{circular_area, BeamParams, ModalBasis, QuadratureConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

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
    fn hanging_rest_is_an_equilibrium() {
        let basis = basis();
        let state = PlantState::at_rest(-FRAC_PI_2, 2);
        let rate = state_derivative(&state, &DVector::zeros(3), &basis.constants).unwrap();
        assert!(rate.as_vector().amax() < 1e-12);
    }

    #[test]
    fn mass_is_symmetric_and_positive() {
        let basis = basis();
        let state = PlantState::new(0.3, 0.2, &[0.05, -0.01], &[0.1, 0.3]);
        let dynamics = dynamics_matrices(&state, &basis.constants);
        assert!((&dynamics.mass - dynamics.mass.transpose()).amax() < 1e-12);
        assert!(dynamics.mass.clone().cholesky().is_some());
        assert_eq!(dynamics.elastic[0], 0.0);
        assert_relative_eq!(dynamics.elastic[1], basis.constants.modes[0].b6 * 0.05);
    }

    #[test]
    fn rest_energies() {
        let basis = basis();
        let (k, v) = total_energy(&PlantState::at_rest(0.0, 2), &basis.constants);
        assert_eq!(k, 0.0);
        assert!(v.abs() < 1e-15);
        let (_, v) = total_energy(&PlantState::at_rest(FRAC_PI_2, 2), &basis.constants);
        let rho_a = basis.beam.linear_density();
        assert_relative_eq!(v, rho_a * 9.81 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn bias_matches_the_matrices() {
        let basis = basis();
        let state = PlantState::new(0.3, -1.2, &[0.05, -0.01], &[0.4, 2.0]);
        let dynamics = dynamics_matrices(&state, &basis.constants);
        let direct = bias_vector(&state.coordinates(), &state.rates(), &basis.constants);
        assert!((dynamics.bias(&state.rates()) - direct).amax() < 1e-12);
    }

    #[test]
    fn wrong_input_size_is_rejected() {
        let basis = basis();
        let state = PlantState::at_rest(0.0, 2);
        assert!(state_derivative(&state, &DVector::zeros(2), &basis.constants).is_err());
    }

    #[test]
    fn coordinates_round_trip() {
        let state = PlantState::new(0.1, 0.2, &[0.3, 0.5], &[0.4, 0.6]);
        assert_eq!(state.coordinates().as_slice(), &[0.1, 0.3, 0.5]);
        assert_eq!(state.rates().as_slice(), &[0.2, 0.4, 0.6]);
        let back = PlantState::from_coordinates(&state.coordinates(), &state.rates());
        assert_eq!(back, state);
        assert_eq!(state.mode_count(), 2);
    }
}

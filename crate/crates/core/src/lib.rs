//! Single flexible link in the vertical plane: assumed-modes Euler–Bernoulli
//! dynamics, PD tracking with gravity and vibration compensation, and an
//! implicit force loop against a compliant planar surface.

pub mod contact;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod modal;
pub mod output;
pub mod scenario;
pub mod sim;

pub use contact::{contact_force, reaction_torque, ContactForce, Environment};
pub use control::{ForceLoop, JointReference, TrackingGains};
pub use dynamics::{dynamics_matrices, state_derivative, DynamicsMatrices, PlantState};
pub use error::{FlexError, Result};
pub use kinematics::{jacobian, tip_position, FlexJacobian, PlanarPoint};
pub use modal::{BeamParams, ModalBasis, ModalConstants, ModeShape, QuadratureConfig};
pub use scenario::ScenarioFile;
pub use sim::{run_scenario, SimConfig, SimLog, SimOutcome, Simulator, Summary};

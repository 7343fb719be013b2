//! TOML scenario files.
//!
//! ```toml
//! [beam]
//! length = 1.0
//! diameter = 0.01
//! density = 2700.0
//! flexural_rigidity = 34.3612
//! joint_inertia = 1.3254e-6
//! modes = 2
//!
//! [environment]
//! contact_point = [0.70710678, 0.70710678]
//! normal = [0.70710678, -0.70710678]
//! stiffness = 86.9
//!
//! [gains]
//! kp = [160.0, 100.0, 100.0]
//! kv = [30.0, 1.0, 0.5]
//!
//! [force_loop]
//! desired_force = 5.0
//! gain = 2.0
//!
//! [simulation]
//! duration = 20.0
//!
//! [sweep]
//! stiffnesses = [20.0, 86.4, 200.0]
//! ```
//!
//! Gains accept a diagonal (`[a, b, c]`) or a full matrix (`[[..], ..]`);
//! stiffness accepts a scalar or a 2×2 matrix. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::contact::Environment;
use crate::control::TrackingGains;
use crate::error::{FlexError, Result};
use crate::kinematics::PlanarPoint;
use crate::modal::{circular_area, circular_second_moment, BeamParams, QuadratureConfig};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub beam: BeamSection,
    pub environment: EnvironmentSection,
    pub gains: GainsSection,
    pub force_loop: ForceLoopSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    /// Overrides the area derived from `diameter`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    pub density: f64,
    /// Overrides `youngs_modulus · I(diameter)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flexural_rigidity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(default)]
    pub joint_inertia: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub contact_point: [f64; 2],
    pub normal: [f64; 2],
    pub stiffness: Stiffness,
    #[serde(default = "default_true")]
    pub unilateral: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stiffness {
    Scalar(f64),
    Matrix([[f64; 2]; 2]),
}

impl Stiffness {
    pub fn matrix(&self) -> Matrix2<f64> {
        match self {
            Self::Scalar(k) => Matrix2::identity() * *k,
            Self::Matrix(m) => Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainMatrix {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl GainMatrix {
    fn to_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        match self {
            Self::Diagonal(d) => Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d))),
            Self::Full(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(FlexError::Config(format!("{name} must be a square matrix")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub kp: GainMatrix,
    pub kv: GainMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceLoopSection {
    pub desired_force: f64,
    #[serde(default = "default_force_gain")]
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_rise_time")]
    pub rise_time: f64,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "default_true")]
    pub initial_sag: bool,
    #[serde(default = "default_log_interval")]
    pub log_interval: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_panels: Option<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            step: default_step(),
            duration: default_duration(),
            rise_time: default_rise_time(),
            theta0: 0.0,
            initial_sag: true,
            log_interval: default_log_interval(),
            target: None,
            quadrature_panels: None,
        }
    }
}

/// Sweep axes; a missing axis keeps the base value. Rows are the Cartesian
/// product in the order lengths × diameters × stiffnesses × desired forces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub diameters: Vec<f64>,
    #[serde(default)]
    pub stiffnesses: Vec<f64>,
    #[serde(default)]
    pub desired_forces: Vec<f64>,
}

fn default_gravity() -> f64 {
    9.81
}
fn default_modes() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_force_gain() -> f64 {
    2.0
}
fn default_step() -> f64 {
    1e-5
}
fn default_duration() -> f64 {
    20.0
}
fn default_rise_time() -> f64 {
    2.0
}
fn default_log_interval() -> f64 {
    1e-3
}

impl ScenarioFile {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| FlexError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FlexError::MissingFile(path.to_path_buf()),
            _ => FlexError::Io(e),
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    /// Builds the single-run configuration (the sweep section is ignored).
    pub fn to_config(&self) -> Result<SimConfig> {
        let beam = self.beam_params()?;
        let env = &self.environment;
        let environment = Environment::new(
            PlanarPoint::new(env.contact_point[0], env.contact_point[1]),
            Vector2::new(env.normal[0], env.normal[1]),
            env.stiffness.matrix(),
            env.unilateral,
        )?;
        let gains = TrackingGains::new(self.gains.kp.to_matrix("Kp")?, self.gains.kv.to_matrix("Kv")?)?;
        let sim = &self.simulation;
        if !(sim.log_interval > 0.0) {
            return Err(FlexError::Config("simulation.log_interval must be positive".into()));
        }
        let decimation = ((sim.log_interval / sim.step).round() as usize).max(1);
        let quadrature = match sim.quadrature_panels {
            Some(panels) => QuadratureConfig::with_panels(panels),
            None => QuadratureConfig::from_env(),
        };
        let config = SimConfig {
            beam,
            quadrature,
            environment,
            gains,
            desired_force: self.force_loop.desired_force,
            force_gain: self.force_loop.gain,
            theta0: sim.theta0,
            initial_sag: sim.initial_sag,
            target: sim.target.map(|t| PlanarPoint::new(t[0], t[1])),
            step: sim.step,
            duration: sim.duration,
            rise_time: sim.rise_time,
            decimation,
        };
        config.validate()?;
        Ok(config)
    }

    fn beam_params(&self) -> Result<BeamParams> {
        let b = &self.beam;
        let area = match (b.area, b.diameter) {
            (Some(a), _) => a,
            (None, Some(d)) => circular_area(d),
            (None, None) => return Err(FlexError::Config("beam needs either area or diameter".into())),
        };
        let flexural_rigidity = match (b.flexural_rigidity, b.youngs_modulus, b.diameter) {
            (Some(ei), _, _) => ei,
            (None, Some(e), Some(d)) => e * circular_second_moment(d),
            _ => {
                return Err(FlexError::Config(
                    "beam needs flexural_rigidity, or youngs_modulus together with diameter".into(),
                ))
            }
        };
        let beam = BeamParams {
            length: b.length,
            area,
            density: b.density,
            flexural_rigidity,
            joint_inertia: b.joint_inertia,
            gravity: b.gravity,
            mode_count: b.modes,
        };
        beam.validate()?;
        Ok(beam)
    }

    /// Sweep rows as resolved single-run scenarios. Without a sweep section the
    /// scenario itself is the only row.
    pub fn expand_sweep(&self) -> Result<Vec<ScenarioFile>> {
        let mut base = self.clone();
        base.sweep = None;
        let Some(sweep) = &self.sweep else {
            return Ok(vec![base]);
        };
        let axis = |values: &[f64]| -> Vec<Option<f64>> {
            if values.is_empty() {
                vec![None]
            } else {
                values.iter().copied().map(Some).collect()
            }
        };
        let mut rows = Vec::new();
        for length in axis(&sweep.lengths) {
            for diameter in axis(&sweep.diameters) {
                for stiffness in axis(&sweep.stiffnesses) {
                    for force in axis(&sweep.desired_forces) {
                        let mut row = base.clone();
                        if let Some(l) = length {
                            row.scale_length(l)?;
                        }
                        if let Some(d) = diameter {
                            row.set_diameter(d)?;
                        }
                        if let Some(k) = stiffness {
                            row.environment.stiffness = Stiffness::Scalar(k);
                        }
                        if let Some(f) = force {
                            row.force_loop.desired_force = f;
                        }
                        rows.push(row);
                    }
                }
            }
        }
        Ok(rows)
    }

    /// Changes the link length, scaling the contact point (and target) with it
    /// so the surface stays at the same relative reach.
    fn scale_length(&mut self, length: f64) -> Result<()> {
        if !(length > 0.0) {
            return Err(FlexError::Config(format!("sweep length must be positive, got {length}")));
        }
        let ratio = length / self.beam.length;
        self.beam.length = length;
        self.environment.contact_point = self.environment.contact_point.map(|v| v * ratio);
        if let Some(t) = &mut self.simulation.target {
            *t = t.map(|v| v * ratio);
        }
        Ok(())
    }

    /// Changes the diameter; area and flexural rigidity follow the circular
    /// section formulas with the base Young's modulus.
    fn set_diameter(&mut self, diameter: f64) -> Result<()> {
        if !(diameter > 0.0) {
            return Err(FlexError::Config(format!("sweep diameter must be positive, got {diameter}")));
        }
        let b = &mut self.beam;
        let modulus = match (b.youngs_modulus, b.flexural_rigidity, b.diameter) {
            (Some(e), _, _) => e,
            (None, Some(ei), Some(d)) => ei / circular_second_moment(d),
            _ => {
                return Err(FlexError::Config(
                    "a diameter sweep needs youngs_modulus, or flexural_rigidity with a base diameter".into(),
                ))
            }
        };
        b.youngs_modulus = Some(modulus);
        b.diameter = Some(diameter);
        b.area = None;
        b.flexural_rigidity = None;
        Ok(())
    }

    /// Every field as `section.key = <TOML value>`, for echoing into summaries.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let value = toml::Value::try_from(self).expect("scenario is always representable as TOML");
        let mut out = BTreeMap::new();
        flatten("", &value, &mut out);
        out
    }

    /// Inverse of [`ScenarioFile::metadata`].
    pub fn from_metadata<'a, I>(pairs: I, origin: &Path) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut root = toml::Table::new();
        for (key, text) in pairs {
            let parsed: toml::Table = toml::from_str(&format!("v = {text}")).map_err(|e| FlexError::Parse {
                path: origin.to_path_buf(),
                message: format!("metadata {key}: {e}"),
            })?;
            let value = parsed["v"].clone();
            let mut table = &mut root;
            let parts: Vec<&str> = key.split('.').collect();
            for part in &parts[..parts.len() - 1] {
                table = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| FlexError::Malformed {
                        path: origin.to_path_buf(),
                        message: format!("metadata key {key} conflicts with a value"),
                    })?;
            }
            table.insert(parts[parts.len() - 1].to_string(), value);
        }
        toml::Value::Table(root).try_into().map_err(|e: toml::de::Error| FlexError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, String>) {
    match value {
        toml::Value::Table(table) => {
            for (k, v) in table {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

//! Clamped-free Euler–Bernoulli mode shapes and the modal constants of the
//! assumed-modes link model.
//!
//! Mode shapes use the classical form
//! `cosh(βx) − cos(βx) − σ (sinh(βx) − sin(βx))`, evaluated in an
//! overflow-free arrangement so that high modes keep full precision, and are
//! scaled so that `∫₀ˡ φ² dx = l` (which puts the tip value at `|φ(l)| = 2`).
//!
//! From the shapes the per-mode integrals
//!
//! | symbol | integral        |
//! |--------|-----------------|
//! | `a0`   | `∫ φ²  dx`      |
//! | `a1`   | `∫ φ x dx`      |
//! | `a2`   | `∫ φ   dx`      |
//! | `a3`   | `∫ (φ″)² dx`    |
//!
//! are computed by composite Simpson quadrature and combined into the lumped
//! constants `b0 … b8` used by [`crate::dynamics`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlexError, Result};

/// Environment variable that overrides the quadrature panel count.
pub const QUAD_PANELS_ENV: &str = "FLEXLINK_QUAD_PANELS";

pub const DEFAULT_QUAD_PANELS: usize = 4096;

/// Panel count used for golden constants files.
pub const GOLDEN_QUAD_PANELS: usize = 1_000_000;

pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-13;

/// Physical description of a single uniform link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// Link length `l` (m).
    pub length: f64,
    /// Cross-section area `A` (m²).
    pub area: f64,
    /// Mass density `ρ` (kg/m³).
    pub density: f64,
    /// Flexural rigidity `EI` (N·m²).
    pub flexural_rigidity: f64,
    /// Hub inertia at the joint, excluding the link itself (kg·m²).
    pub joint_inertia: f64,
    /// Gravity magnitude (m/s²), acting along −y.
    pub gravity: f64,
    /// Number of retained flexible modes `ν`.
    pub mode_count: usize,
}

impl BeamParams {
    /// Solid circular section of diameter `diameter` and Young's modulus `youngs_modulus`.
    pub fn circular(
        length: f64,
        diameter: f64,
        density: f64,
        youngs_modulus: f64,
        joint_inertia: f64,
        gravity: f64,
        mode_count: usize,
    ) -> Self {
        Self {
            length,
            area: circular_area(diameter),
            density,
            flexural_rigidity: youngs_modulus * circular_second_moment(diameter),
            joint_inertia,
            gravity,
            mode_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("area", self.area),
            ("density", self.density),
            ("flexural_rigidity", self.flexural_rigidity),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(FlexError::Config(format!(
                    "beam {name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.joint_inertia.is_finite() && self.joint_inertia >= 0.0) {
            return Err(FlexError::Config(format!(
                "beam joint_inertia must be non-negative, got {}",
                self.joint_inertia
            )));
        }
        if !self.gravity.is_finite() {
            return Err(FlexError::Config("beam gravity must be finite".into()));
        }
        if self.mode_count == 0 {
            return Err(FlexError::Config("beam needs at least one mode".into()));
        }
        Ok(())
    }

    /// Mass per unit length `ρA` (kg/m).
    pub fn linear_density(&self) -> f64 {
        self.density * self.area
    }

    /// Rotational inertia of the undeformed link about the joint, `ρA l³/3`.
    pub fn link_inertia(&self) -> f64 {
        self.linear_density() * self.length.powi(3) / 3.0
    }
}

pub fn circular_area(diameter: f64) -> f64 {
    PI * diameter * diameter / 4.0
}

pub fn circular_second_moment(diameter: f64) -> f64 {
    PI * diameter.powi(4) / 64.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Number of Simpson panels; rounded up to an even count.
    pub panels: usize,
    /// Accepted Richardson error estimate, scaled by `max(1, |integral|)`.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels: DEFAULT_QUAD_PANELS,
            tolerance: 1e-8,
        }
    }
}

impl QuadratureConfig {
    pub fn with_panels(panels: usize) -> Self {
        Self {
            panels,
            ..Self::default()
        }
    }

    /// Default configuration, with the panel count taken from
    /// `FLEXLINK_QUAD_PANELS` when that variable holds a positive integer.
    pub fn from_env() -> Self {
        match std::env::var(QUAD_PANELS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(panels) if panels >= 2 => Self::with_panels(panels),
            Some(_) | None => Self::default(),
        }
    }

    fn even_panels(&self) -> usize {
        let n = self.panels.max(2);
        n + n % 2
    }
}

/// Composite Simpson rule over `[a, b]` with `panels` (even) sub-intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Simpson quadrature with a Richardson estimate (full vs. half resolution).
fn integrate<F: Fn(f64) -> f64>(
    name: &str,
    f: F,
    a: f64,
    b: f64,
    config: &QuadratureConfig,
) -> Result<f64> {
    let n = config.even_panels();
    let fine = simpson(&f, a, b, n);
    let coarse = simpson(&f, a, b, (n / 2).max(2));
    let estimate = (fine - coarse).abs() / 15.0;
    let allowed = config.tolerance * fine.abs().max(1.0);
    if !fine.is_finite() || estimate > allowed {
        return Err(FlexError::Quadrature {
            integral: name.to_string(),
            estimate,
            tolerance: allowed,
        });
    }
    Ok(fine)
}

/// `cos(x) + 1/cosh(x)`: same zeros as `cos(x)cosh(x) + 1`, bounded for large `x`.
fn scaled_characteristic(x: f64) -> (f64, f64) {
    let sech = 1.0 / x.cosh();
    let value = x.cos() + sech;
    let slope = -x.sin() - sech * x.tanh();
    (value, slope)
}

/// Characteristic residual `cos(x)cosh(x) + 1` of the clamped-free beam.
pub fn characteristic_residual(x: f64) -> f64 {
    x.cos() * x.cosh() + 1.0
}

/// First `count` roots of `cos(x)cosh(x) = −1`, in increasing order.
///
/// Root `j` is bracketed in `[(j−1)π, jπ]` and found by bisection with
/// Newton steps accepted only while they stay inside the bracket.
pub fn solve_characteristic_roots(count: usize, tol: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(FlexError::Config("mode count must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(FlexError::Config(format!("root tolerance must be positive, got {tol}")));
    }
    (1..=count)
        .map(|j| bracketed_root((j - 1) as f64 * PI, j as f64 * PI, tol))
        .collect()
}

fn bracketed_root(lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = scaled_characteristic(a);
    let (fb, _) = scaled_characteristic(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(FlexError::RootBracket { lo, hi });
    }
    let rising = fb > 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = scaled_characteristic(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let moved = (next - x).abs();
        x = next;
        if moved <= tol || (b - a) <= tol {
            return Ok(x);
        }
    }
    Err(FlexError::Numeric(format!(
        "root iteration on [{lo}, {hi}] did not converge"
    )))
}

/// One clamped-free mode shape `φ₁ⱼ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeShape {
    /// 1-based mode number.
    pub index: usize,
    /// Dimensionless root `βl`.
    pub root: f64,
    /// Shape coefficient `σ = (cosh βl + cos βl) / (sinh βl + sin βl)`.
    pub sigma: f64,
    /// Scale applied to the raw shape so that `∫ φ² dx = l`.
    pub scale: f64,
    pub length: f64,
    one_minus_sigma: f64,
}

impl ModeShape {
    /// Builds mode `index` from its root, normalizing by quadrature.
    pub fn new(index: usize, root: f64, length: f64, quadrature: &QuadratureConfig) -> Result<Self> {
        // sinh − cosh = −e^{−βl}, which keeps 1 − σ accurate when σ → 1.
        let denom = root.sinh() + root.sin();
        let sigma = (root.cosh() + root.cos()) / denom;
        let one_minus_sigma = (root.sin() - root.cos() - (-root).exp()) / denom;
        let mut mode = Self {
            index,
            root,
            sigma,
            scale: 1.0,
            length,
            one_minus_sigma,
        };
        let raw = integrate(
            &format!("normalization of mode {index}"),
            |x| mode.eval_unchecked(x, 0).powi(2),
            0.0,
            length,
            quadrature,
        )?;
        mode.scale = (length / raw).sqrt();
        Ok(mode)
    }

    /// Spatial wavenumber `β = βl / l` (1/m).
    pub fn wavenumber(&self) -> f64 {
        self.root / self.length
    }

    /// `φ` or its `order`-th derivative (0 ≤ order ≤ 3) at `x`.
    pub fn eval(&self, x: f64, order: u8) -> Result<f64> {
        check_domain(x, self.length)?;
        Ok(self.eval_unchecked(x.clamp(0.0, self.length), order))
    }

    pub(crate) fn eval_unchecked(&self, x: f64, order: u8) -> f64 {
        let beta = self.wavenumber();
        let z = beta * x;
        let s = self.sigma;
        // e^{z−βl} stays bounded; (1−σ)e^{z} is rewritten through it.
        let grow = 0.5 * self.one_minus_sigma * z.exp();
        let decay = 0.5 * (1.0 + s) * (-z).exp();
        let hyper_even = grow + decay; // cosh z − σ sinh z
        let hyper_odd = grow - decay; // sinh z − σ cosh z
        let (sin, cos) = z.sin_cos();
        let value = match order {
            0 => hyper_even - cos + s * sin,
            1 => beta * (hyper_odd + sin + s * cos),
            2 => beta * beta * (hyper_even + cos - s * sin),
            3 => beta.powi(3) * (hyper_odd - sin - s * cos),
            _ => panic!("mode shape derivative order {order} is not supported"),
        };
        self.scale * value
    }

    /// Tip value `φ(l)`.
    pub fn tip_value(&self) -> f64 {
        self.eval_unchecked(self.length, 0)
    }
}

pub(crate) fn check_domain(x: f64, length: f64) -> Result<()> {
    let slack = 1e-12 * length;
    if x.is_finite() && x >= -slack && x <= length + slack {
        Ok(())
    } else {
        Err(FlexError::Domain { x, length })
    }
}

/// Integrals and lumped constants of a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeConstants {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// `ρA a0`
    pub b0: f64,
    /// `ρA a1² / a0`
    pub b1: f64,
    /// `ρA a1`
    pub b2: f64,
    /// `a1 / a0`
    pub b3: f64,
    /// `ρA a2`
    pub b5: f64,
    /// `EI a3`
    pub b6: f64,
    /// `a2 / a0`
    pub b7: f64,
}

impl ModeConstants {
    /// Cantilever natural frequency `√(b6/b0)` (rad/s).
    pub fn natural_frequency(&self) -> f64 {
        (self.b6 / self.b0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalConstants {
    pub modes: Vec<ModeConstants>,
    /// `ρA l² / 2`
    pub b4: f64,
    /// Hub inertia `Ib`.
    pub b8: f64,
    /// `ρA l³ / 3`, the rigid link's inertia about the joint.
    pub link_inertia: f64,
    pub gravity: f64,
}

impl ModalConstants {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Joint-axis inertia of the undeformed arm, `Ib + ρA l³/3`.
    pub fn rigid_inertia(&self) -> f64 {
        self.b8 + self.link_inertia
    }

    pub fn natural_frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(ModeConstants::natural_frequency).collect()
    }
}

/// Evaluates `a0 … a3` by quadrature and assembles the `b` constants.
pub fn compute_modal_constants(
    beam: &BeamParams,
    modes: &[ModeShape],
    quadrature: &QuadratureConfig,
) -> Result<ModalConstants> {
    beam.validate()?;
    let rho_a = beam.linear_density();
    let l = beam.length;
    let modes = modes
        .iter()
        .map(|mode| {
            let j = mode.index;
            let a0 = integrate(&format!("a0 of mode {j}"), |x| mode.eval_unchecked(x, 0).powi(2), 0.0, l, quadrature)?;
            let a1 = integrate(&format!("a1 of mode {j}"), |x| mode.eval_unchecked(x, 0) * x, 0.0, l, quadrature)?;
            let a2 = integrate(&format!("a2 of mode {j}"), |x| mode.eval_unchecked(x, 0), 0.0, l, quadrature)?;
            let a3 = integrate(&format!("a3 of mode {j}"), |x| mode.eval_unchecked(x, 2).powi(2), 0.0, l, quadrature)?;
            let consts = ModeConstants {
                a0,
                a1,
                a2,
                a3,
                b0: rho_a * a0,
                b1: rho_a * a1 * a1 / a0,
                b2: rho_a * a1,
                b3: a1 / a0,
                b5: rho_a * a2,
                b6: beam.flexural_rigidity * a3,
                b7: a2 / a0,
            };
            let finite = [a0, a1, a2, a3].iter().all(|v| v.is_finite());
            if !finite || a0 <= 0.0 || a3 <= 0.0 {
                return Err(FlexError::Numeric(format!(
                    "degenerate modal integrals for mode {j}: {consts:?}"
                )));
            }
            Ok(consts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModalConstants {
        modes,
        b4: rho_a * l * l / 2.0,
        b8: beam.joint_inertia,
        link_inertia: beam.link_inertia(),
        gravity: beam.gravity,
    })
}

/// Everything the dynamics and kinematics need about one link.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    pub beam: BeamParams,
    pub shapes: Vec<ModeShape>,
    pub constants: ModalConstants,
    tip_values: Vec<f64>,
}

impl ModalBasis {
    pub fn new(beam: BeamParams, quadrature: &QuadratureConfig) -> Result<Self> {
        beam.validate()?;
        let roots = solve_characteristic_roots(beam.mode_count, DEFAULT_ROOT_TOLERANCE)?;
        let shapes = roots
            .iter()
            .enumerate()
            .map(|(i, &root)| ModeShape::new(i + 1, root, beam.length, quadrature))
            .collect::<Result<Vec<_>>>()?;
        let constants = compute_modal_constants(&beam, &shapes, quadrature)?;
        let tip_values = shapes.iter().map(ModeShape::tip_value).collect();
        Ok(Self {
            beam,
            shapes,
            constants,
            tip_values,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.shapes.len()
    }

    /// `φ₁ⱼ(l)` for every mode.
    pub fn tip_values(&self) -> &[f64] {
        &self.tip_values
    }
}

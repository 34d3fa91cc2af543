//! Flat FLRW inflaton model, expansion-normalized variables and the
//! coefficients of the `Y` equation.
//!
//! Units are geometrized with the Planck mass set to one. The raw system is
//!
//! ```text
//! dφ/dt = f
//! dH/dt = −H² + (V(φ) − f²)/3
//! df/dt = H^{5/2} η(t) − 3Hf − V′(φ)
//! 3H²   = V(φ) + f²/2 + ³R/2        (³R = 0)
//! ```
//!
//! and with `X = √(V/3)/H`, `Y = f/(√6 H)`, `dt/dτ = 1/H` the constraint
//! becomes `X² + Y² = 1` and the equations decouple into [`x_rhs`] and
//! [`drift`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the Friedmann constraint when building states.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// `V(φ) = V_n φⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawPotential {
    exponent: f64,
    amplitude: f64,
}

impl PowerLawPotential {
    pub fn new(exponent: f64, amplitude: f64) -> Result<Self> {
        if !exponent.is_finite() || exponent < 0.0 {
            return Err(Error::Domain(format!(
                "potential exponent must be finite and >= 0, got {exponent}"
            )));
        }
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(Error::Domain(format!(
                "potential amplitude must be finite and > 0, got {amplitude}"
            )));
        }
        Ok(Self {
            exponent,
            amplitude,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn integer_exponent(&self) -> Option<i32> {
        (self.exponent.fract() == 0.0 && self.exponent <= i32::MAX as f64)
            .then_some(self.exponent as i32)
    }

    fn check_phi(&self, phi: f64) -> Result<()> {
        if !phi.is_finite() {
            return Err(Error::Domain(format!("phi must be finite, got {phi}")));
        }
        if phi < 0.0 && self.integer_exponent().is_none() {
            return Err(Error::Domain(format!(
                "phi = {phi} < 0 with non-integer exponent {}",
                self.exponent
            )));
        }
        Ok(())
    }

    fn power(&self, phi: f64, exponent: f64) -> f64 {
        if exponent == 0.0 {
            1.0
        } else if exponent.fract() == 0.0 {
            phi.powi(exponent as i32)
        } else {
            phi.powf(exponent)
        }
    }

    /// `V_n φⁿ`; negative `φ` is accepted only for integer `n`.
    pub fn value(&self, phi: f64) -> Result<f64> {
        self.check_phi(phi)?;
        Ok(self.amplitude * self.power(phi, self.exponent))
    }

    /// `V′(φ) = n V_n φⁿ⁻¹`.
    pub fn slope(&self, phi: f64) -> Result<f64> {
        self.check_phi(phi)?;
        let n = self.exponent;
        if n == 0.0 {
            return Ok(0.0);
        }
        if phi == 0.0 && n < 1.0 {
            return Err(Error::Domain(format!(
                "V'(0) is singular for exponent {n} < 1"
            )));
        }
        Ok(n * self.amplitude * self.power(phi, n - 1.0))
    }

    /// `λ = √(3/2) V′/V`, which for a power law is `√3 n / (√2 φ)`.
    pub fn lambda(&self, phi: f64) -> Result<f64> {
        self.check_phi(phi)?;
        if phi <= 0.0 {
            return Err(Error::Domain(format!(
                "lambda requires phi > 0 (singular at phi = 0), got {phi}"
            )));
        }
        Ok(1.5f64.sqrt() * self.exponent / phi)
    }
}

/// Dimensional state `(φ, H, f = dφ/dt)` of the flat model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawState {
    phi: f64,
    hubble: f64,
    phi_dot: f64,
    ricci3: f64,
}

impl RawState {
    /// Builds a state that satisfies the Friedmann constraint to
    /// [`CONSTRAINT_TOL`] (relative).
    pub fn new(phi: f64, hubble: f64, phi_dot: f64, pot: &PowerLawPotential) -> Result<Self> {
        Self::with_tolerance(phi, hubble, phi_dot, pot, CONSTRAINT_TOL)
    }

    pub fn with_tolerance(
        phi: f64,
        hubble: f64,
        phi_dot: f64,
        pot: &PowerLawPotential,
        rel_tol: f64,
    ) -> Result<Self> {
        if !(hubble > 0.0) || !hubble.is_finite() {
            return Err(Error::Domain(format!(
                "H must be finite and > 0, got {hubble}"
            )));
        }
        if !phi_dot.is_finite() {
            return Err(Error::Domain(format!("f must be finite, got {phi_dot}")));
        }
        let state = Self {
            phi,
            hubble,
            phi_dot,
            ricci3: 0.0,
        };
        let residual = state.friedmann_residual(pot)?;
        let scale = (3.0 * hubble * hubble).max(pot.value(phi)? + 0.5 * phi_dot * phi_dot);
        let tolerance = rel_tol * scale;
        if residual.abs() > tolerance {
            return Err(Error::InconsistentState {
                residual,
                tolerance,
            });
        }
        Ok(state)
    }

    /// Solves the constraint for `H` given `(φ, f)`.
    pub fn on_constraint(phi: f64, phi_dot: f64, pot: &PowerLawPotential) -> Result<Self> {
        let energy = pot.value(phi)? + 0.5 * phi_dot * phi_dot;
        if !(energy > 0.0) {
            return Err(Error::DegenerateFluid);
        }
        Self::new(phi, (energy / 3.0).sqrt(), phi_dot, pot)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn hubble(&self) -> f64 {
        self.hubble
    }

    pub fn phi_dot(&self) -> f64 {
        self.phi_dot
    }

    pub fn ricci3(&self) -> f64 {
        self.ricci3
    }

    /// `3H² − V − f²/2 − ³R/2`.
    pub fn friedmann_residual(&self, pot: &PowerLawPotential) -> Result<f64> {
        friedmann_residual(self.phi, self.hubble, self.phi_dot, pot)
    }
}

pub fn friedmann_residual(
    phi: f64,
    hubble: f64,
    phi_dot: f64,
    pot: &PowerLawPotential,
) -> Result<f64> {
    Ok(3.0 * hubble * hubble - pot.value(phi)? - 0.5 * phi_dot * phi_dot)
}

/// Right-hand side `(dφ/dt, dH/dt, df/dt)` of the raw system without the
/// noise term. Accepts off-constraint input.
pub fn raw_rhs(phi: f64, hubble: f64, phi_dot: f64, pot: &PowerLawPotential) -> Result<[f64; 3]> {
    let v = pot.value(phi)?;
    let dv = pot.slope(phi)?;
    Ok([
        phi_dot,
        -hubble * hubble + (v - phi_dot * phi_dot) / 3.0,
        -3.0 * hubble * phi_dot - dv,
    ])
}

/// Expansion-normalized `(X, Y)` with `X ≥ 0` and `X² + Y² = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedState {
    x: f64,
    y: f64,
}

impl NormalizedState {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        Self::with_tolerance(x, y, CONSTRAINT_TOL)
    }

    pub fn with_tolerance(x: f64, y: f64, tol: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite normalized state ({x}, {y})"
            )));
        }
        if x < 0.0 {
            return Err(Error::Domain(format!("X must be >= 0, got {x}")));
        }
        let residual = x * x + y * y - 1.0;
        if residual.abs() > tol {
            return Err(Error::InconsistentState {
                residual,
                tolerance: tol,
            });
        }
        Ok(Self {
            x,
            y: y.clamp(-1.0, 1.0),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Deceleration parameter `q = 2Y² − X²`.
    pub fn deceleration(&self) -> f64 {
        deceleration(self.x, self.y)
    }
}

pub fn deceleration(x: f64, y: f64) -> f64 {
    2.0 * y * y - x * x
}

/// `X = √(V/3)/H`, `Y = f/(√6 H)` without any constraint check.
pub fn normalized_xy(
    phi: f64,
    hubble: f64,
    phi_dot: f64,
    pot: &PowerLawPotential,
) -> Result<(f64, f64)> {
    if !(hubble > 0.0) {
        return Err(Error::Domain(format!("H must be > 0, got {hubble}")));
    }
    let v = pot.value(phi)?;
    Ok(((v / 3.0).sqrt() / hubble, phi_dot / (6f64.sqrt() * hubble)))
}

pub fn normalize(raw: &RawState, pot: &PowerLawPotential) -> Result<NormalizedState> {
    let (x, y) = normalized_xy(raw.phi, raw.hubble, raw.phi_dot, pot)?;
    NormalizedState::new(x, y)
}

/// Coupled form `X′ = X(1 + q + λY)`.
pub fn coupled_x_rhs(x: f64, y: f64, lambda: f64) -> f64 {
    x * (1.0 + deceleration(x, y) + lambda * y)
}

/// Coupled form `Y′ = −3Y − λX² + Y(1 + q)` (deterministic part).
pub fn coupled_y_rhs(x: f64, y: f64, lambda: f64) -> f64 {
    -3.0 * y - lambda * x * x + y * (1.0 + deceleration(x, y))
}

/// Drift `b(Y) = (Y² − 1)(3Y + λ)`, defined on all of ℝ.
pub fn drift(y: f64, lambda: f64) -> f64 {
    (y * y - 1.0) * (3.0 * y + lambda)
}

/// Dispersion `σ = 1`.
pub fn dispersion() -> f64 {
    1.0
}

/// Coefficients of `dY = b(Y) dτ + σ dW` for a frozen `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeCoefficients {
    pub lambda: f64,
}

impl SdeCoefficients {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    pub fn drift(&self, y: f64) -> f64 {
        drift(y, self.lambda)
    }

    pub fn dispersion(&self) -> f64 {
        dispersion()
    }
}

/// `f(X) = 3X − 3X³ + X√(1 − X²) λ`, the decoupled `X` equation.
pub fn x_rhs(x: f64, lambda: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("x_rhs requires |X| <= 1, got {x}")));
    }
    Ok(3.0 * x - 3.0 * x * x * x + x * (1.0 - x * x).sqrt() * lambda)
}

/// Perfect-fluid energy density and pressure of the scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub mu: f64,
    pub p: f64,
}

impl FluidState {
    pub fn from_field(phi_dot: f64, potential: f64) -> Self {
        let kinetic = 0.5 * phi_dot * phi_dot;
        Self {
            mu: kinetic + potential,
            p: kinetic - potential,
        }
    }

    pub fn eos_ratio(&self) -> Result<f64> {
        if self.mu == 0.0 {
            return Err(Error::DegenerateFluid);
        }
        Ok(self.p / self.mu)
    }
}

/// `p/μ = (f²/2 − V)/(f²/2 + V)`.
pub fn eos_ratio(phi_dot: f64, potential: f64) -> Result<f64> {
    FluidState::from_field(phi_dot, potential).eos_ratio()
}

/// Factor `√6/√H` with `η = (√6/√H) 𝒩`.
pub fn noise_rescale(hubble: f64) -> Result<f64> {
    if !(hubble > 0.0) {
        return Err(Error::Domain(format!(
            "noise rescale requires H > 0, got {hubble}"
        )));
    }
    Ok((6.0 / hubble).sqrt())
}

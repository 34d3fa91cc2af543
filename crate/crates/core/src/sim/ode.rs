//! Deterministic and noisy integration of the `X` equation and the raw
//! `(φ, H, f)` system.

use serde::Serialize;

use super::noise::NoiseProcess;
use crate::error::{Error, Result};
use crate::model::{
    drift, friedmann_residual, normalized_xy, raw_rhs, x_rhs, PowerLawPotential, RawState,
};

/// `|X|` at which the `X` integration stops: `f′` blows up at `±1`.
pub const X_SINGULAR_BAND: f64 = 1e-9;
/// Step halvings allowed before a step failure is read as the singularity.
pub const MAX_HALVINGS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XTermination {
    BoundarySingularity,
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XOdeResult {
    pub trajectory: Vec<(f64, f64)>,
    pub termination: XTermination,
    pub final_tau: f64,
    pub rejected_steps: u64,
}

fn rk4_x(x: f64, lambda: f64, h: f64) -> Result<f64> {
    let k1 = x_rhs(x, lambda)?;
    let k2 = x_rhs(x + 0.5 * h * k1, lambda)?;
    let k3 = x_rhs(x + 0.5 * h * k2, lambda)?;
    let k4 = x_rhs(x + h * k3, lambda)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Classical RK4 on `X′ = f(X)`. A step whose stages leave `[−1, 1]` is
/// rejected and retried at half the size; the smaller step is kept from then
/// on. Stops with [`XTermination::BoundarySingularity`] once
/// `|X| ≥ 1 − 10⁻⁹` or after [`MAX_HALVINGS`] consecutive rejections.
pub fn integrate_x_ode(x0: f64, lambda: f64, dtau: f64, tau_max: f64) -> Result<XOdeResult> {
    if !(x0.abs() < 1.0) {
        return Err(Error::Domain(format!("|x0| must be < 1, got {x0}")));
    }
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "dtau must be finite and > 0, got {dtau}"
        )));
    }
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "tau_max must be finite and > 0, got {tau_max}"
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be finite, got {lambda}"
        )));
    }
    let bound = 1.0 - X_SINGULAR_BAND;
    let mut trajectory = vec![(0.0, x0)];
    let mut x = x0;
    let mut tau = 0.0;
    let mut h = dtau;
    let mut rejected = 0u64;
    if x.abs() >= bound {
        return Ok(XOdeResult {
            trajectory,
            termination: XTermination::BoundarySingularity,
            final_tau: tau,
            rejected_steps: rejected,
        });
    }
    while tau < tau_max {
        let step = h.min(tau_max - tau);
        let mut halvings = 0;
        let next = loop {
            match rk4_x(x, lambda, step / 2f64.powi(halvings as i32)) {
                Ok(v) if v.abs() <= 1.0 => break Some((v, step / 2f64.powi(halvings as i32))),
                _ => {
                    rejected += 1;
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        break None;
                    }
                }
            }
        };
        let Some((x_new, taken)) = next else {
            return Ok(XOdeResult {
                trajectory,
                termination: XTermination::BoundarySingularity,
                final_tau: tau,
                rejected_steps: rejected,
            });
        };
        if halvings > 0 {
            h = taken;
        }
        x = x_new;
        tau += taken;
        trajectory.push((tau, x));
        if x.abs() >= bound {
            return Ok(XOdeResult {
                trajectory,
                termination: XTermination::BoundarySingularity,
                final_tau: tau,
                rejected_steps: rejected,
            });
        }
    }
    Ok(XOdeResult {
        trajectory,
        termination: XTermination::HorizonReached,
        final_tau: tau,
        rejected_steps: rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawPoint {
    pub t: f64,
    /// e-fold time, `dτ/dt = H`.
    pub tau: f64,
    pub phi: f64,
    pub hubble: f64,
    pub phi_dot: f64,
    /// `3H² − V − f²/2`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RawTermination {
    HorizonReached,
    /// `H` reached zero or below.
    ModelBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawTrajectory {
    pub points: Vec<RawPoint>,
    pub termination: RawTermination,
    pub max_abs_residual: f64,
}

/// `(φ, H, f, τ)`.
type RawVec = [f64; 4];

fn raw_field(s: &RawVec, pot: &PowerLawPotential) -> Result<RawVec> {
    let [dphi, dh, df] = raw_rhs(s[0], s[1], s[2], pot)?;
    Ok([dphi, dh, df, s[1]])
}

fn axpy(a: f64, x: &RawVec, y: &RawVec) -> RawVec {
    [
        y[0] + a * x[0],
        y[1] + a * x[1],
        y[2] + a * x[2],
        y[3] + a * x[3],
    ]
}

fn rk4_raw(s: &RawVec, pot: &PowerLawPotential, h: f64) -> Result<RawVec> {
    let k1 = raw_field(s, pot)?;
    let k2 = raw_field(&axpy(0.5 * h, &k1, s), pot)?;
    let k3 = raw_field(&axpy(0.5 * h, &k2, s), pot)?;
    let k4 = raw_field(&axpy(h, &k3, s), pot)?;
    let mut out = *s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Integrates the raw system from `raw0` over `[0, t_max]` with step `dt`.
///
/// Without noise this is classical RK4. With noise it is Euler–Maruyama and
/// the forcing `H^{5/2} dW` enters the `f` equation only; the increments are
/// drawn from `noise`'s stream at step `dt`. Every point carries its
/// Friedmann residual.
pub fn integrate_raw_system(
    raw0: &RawState,
    pot: &PowerLawPotential,
    noise: Option<&NoiseProcess>,
    dt: f64,
    t_max: f64,
) -> Result<RawTrajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "dt must be finite and > 0, got {dt}"
        )));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "t_max must be finite and > 0, got {t_max}"
        )));
    }
    let mut stream = match noise {
        Some(p) => Some(p.with_step(dt)?.stream()),
        None => None,
    };
    let steps = (t_max / dt).round().max(1.0) as u64;
    let mut state: RawVec = [raw0.phi(), raw0.hubble(), raw0.phi_dot(), 0.0];
    let point = |t: f64, s: &RawVec| -> Result<RawPoint> {
        Ok(RawPoint {
            t,
            tau: s[3],
            phi: s[0],
            hubble: s[1],
            phi_dot: s[2],
            residual: friedmann_residual(s[0], s[1], s[2], pot)?,
        })
    };
    let mut points = Vec::with_capacity(steps as usize + 1);
    points.push(point(0.0, &state)?);
    let mut termination = RawTermination::HorizonReached;
    for i in 1..=steps {
        state = match stream.as_mut() {
            None => rk4_raw(&state, pot, dt)?,
            Some(noise) => {
                let d = raw_field(&state, pot)?;
                let dw = noise.next().expect("noise stream is endless");
                let mut next = axpy(dt, &d, &state);
                next[2] += state[1].powf(2.5) * dw;
                next
            }
        };
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!(
                "raw system became non-finite at step {i}"
            )));
        }
        points.push(point(i as f64 * dt, &state)?);
        if state[1] <= 0.0 {
            termination = RawTermination::ModelBreakdown;
            break;
        }
    }
    let max_abs_residual = points.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
    Ok(RawTrajectory {
        points,
        termination,
        max_abs_residual,
    })
}

impl RawTrajectory {
    /// `(τ, X, Y)` for every point, without a constraint check.
    pub fn normalized(&self, pot: &PowerLawPotential) -> Result<Vec<(f64, f64, f64)>> {
        self.points
            .iter()
            .map(|p| normalized_xy(p.phi, p.hubble, p.phi_dot, pot).map(|(x, y)| (p.tau, x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedPoint {
    pub tau: f64,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

fn normalized_field(y: f64, phi: f64, pot: &PowerLawPotential) -> Result<[f64; 2]> {
    Ok([drift(y, pot.lambda(phi)?), 6f64.sqrt() * y])
}

fn rk4_normalized(y: f64, phi: f64, pot: &PowerLawPotential, h: f64) -> Result<(f64, f64)> {
    let k1 = normalized_field(y, phi, pot)?;
    let k2 = normalized_field(y + 0.5 * h * k1[0], phi + 0.5 * h * k1[1], pot)?;
    let k3 = normalized_field(y + 0.5 * h * k2[0], phi + 0.5 * h * k2[1], pot)?;
    let k4 = normalized_field(y + h * k3[0], phi + h * k3[1], pot)?;
    Ok((
        y + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        phi + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ))
}

/// Deterministic decoupled evolution in e-fold time: `Y′ = b(Y; λ(φ))` with
/// `φ′ = √6 Y` carrying `λ`, and `X = √(1 − Y²)`. Returns the state at each
/// requested `τ` (ascending), landing on each exactly with RK4 steps of at
/// most `max_step`.
pub fn integrate_normalized_system(
    y0: f64,
    phi0: f64,
    pot: &PowerLawPotential,
    checkpoints: &[f64],
    max_step: f64,
) -> Result<Vec<NormalizedPoint>> {
    if !(max_step > 0.0) {
        return Err(Error::InvalidConfig("max_step must be > 0".into()));
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) || checkpoints.first().is_some_and(|&t| t < 0.0)
    {
        return Err(Error::InvalidConfig(
            "checkpoints must be ascending and >= 0".into(),
        ));
    }
    let (mut y, mut phi, mut tau) = (y0, phi0, 0.0);
    let mut out = Vec::with_capacity(checkpoints.len());
    for &target in checkpoints {
        while tau < target {
            let h = max_step.min(target - tau);
            (y, phi) = rk4_normalized(y, phi, pot, h)?;
            tau = if target - tau <= max_step {
                target
            } else {
                tau + h
            };
        }
        out.push(NormalizedPoint {
            tau: target,
            x: (1.0 - y * y).max(0.0).sqrt(),
            y,
            phi,
        });
    }
    Ok(out)
}

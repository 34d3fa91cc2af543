//! Feller's explosion test for `dY = (Y² − 1)(3Y + λ) dτ + dW` on `(−1, 1)`.
//!
//! With `σ = 1`,
//!
//! ```text
//! p′(x) = exp(−2 (A(x) − A(ζ)))
//! p(x)  = ∫_ζ^x p′(s) ds
//! v(x)  = ∫_ζ^x p′(y) ∫_ζ^y 2 / p′(z) dz dy
//! ```
//!
//! where `A` is an antiderivative of the drift. The explosion time is finite
//! with probability one iff one of
//!
//! 1. `v(1⁻) < ∞` and `v(−1⁺) < ∞`
//! 2. `v(1⁻) < ∞` and `p(−1⁺) = −∞`
//! 3. `v(−1⁺) < ∞` and `p(1⁻) = +∞`
//!
//! holds. Limits are read off the sequence `x_k = ±(1 − 2⁻ᵏ)`. A limit is
//! classified `Divergent` once its log-magnitude passes a threshold and is
//! still growing at `k_max`; for finite `λ` the integrands are bounded on the
//! closed interval, so this is a numerical reading of very large values, and
//! every verdict carries a note saying so.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log_value::LogValue;
use crate::parallel::par_map_indexed;
use crate::quadrature::{integrate_exp_poly, log_integrate, QuadratureOptions, QuadratureResult};

pub const DEFAULT_K_MAX: u32 = 40;
pub const DEFAULT_DIVERGENCE_LOG_THRESHOLD: f64 = 500.0;
pub const DEFAULT_CAUCHY_REL_TOL: f64 = 1e-3;
/// Number of trailing differences that must pass the Cauchy test.
pub const CAUCHY_TAIL: usize = 3;
/// Largest `k` for which `1 − 2⁻ᵏ` is distinct from 1 in `f64`.
pub const MAX_K: u32 = 52;

/// Which polynomial is used as the drift antiderivative.
///
/// `Definition` integrates `(r² − 1)(3r + λ)`. `PaperExpanded` uses the
/// published expanded integrand, whose `λ` terms carry the opposite sign; it
/// equals `Definition` evaluated at `−λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Definition,
    PaperExpanded,
}

impl Convention {
    fn signed_lambda(self, lambda: f64) -> f64 {
        match self {
            Convention::Definition => lambda,
            Convention::PaperExpanded => -lambda,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Definition => "definition",
            Convention::PaperExpanded => "paper_expanded",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "definition" => Ok(Convention::Definition),
            "paper_expanded" | "paper-expanded" => Ok(Convention::PaperExpanded),
            other => Err(Error::InvalidConfig(format!(
                "unknown convention {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn boundary(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleSpeedConfig {
    pub zeta: f64,
    pub lambda: f64,
    pub convention: Convention,
    pub k_max: u32,
    pub divergence_log_threshold: f64,
    pub cauchy_rel_tol: f64,
    #[serde(skip)]
    pub quadrature: QuadratureOptions,
}

impl ScaleSpeedConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            zeta: 0.0,
            lambda,
            convention: Convention::Definition,
            k_max: DEFAULT_K_MAX,
            divergence_log_threshold: DEFAULT_DIVERGENCE_LOG_THRESHOLD,
            cauchy_rel_tol: DEFAULT_CAUCHY_REL_TOL,
            quadrature: QuadratureOptions::default(),
        }
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_k_max(mut self, k_max: u32) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > -1.0 && self.zeta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "zeta must lie in (-1, 1), got {}",
                self.zeta
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite, got {}",
                self.lambda
            )));
        }
        if !(2..=MAX_K).contains(&self.k_max) {
            return Err(Error::InvalidConfig(format!(
                "k_max must lie in 2..={MAX_K}, got {}",
                self.k_max
            )));
        }
        if !(self.divergence_log_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "divergence_log_threshold must be > 0".into(),
            ));
        }
        if !(self.cauchy_rel_tol > 0.0) {
            return Err(Error::InvalidConfig("cauchy_rel_tol must be > 0".into()));
        }
        Ok(())
    }

    /// `x_k = ±(1 − 2⁻ᵏ)`, `k = 1..=k_max`.
    pub fn boundary_sequence(&self, side: Side) -> Vec<f64> {
        (1..=self.k_max)
            .map(|k| side.boundary() * (1.0 - 0.5f64.powi(k as i32)))
            .collect()
    }

    fn antiderivative(&self, x: f64) -> f64 {
        drift_antiderivative(x, self.lambda, self.convention)
    }

    /// Coefficients of `log p′(s) = −2A(s) + 2A(ζ)`, ascending.
    fn log_density_coeffs(&self) -> [f64; 5] {
        let l = self.convention.signed_lambda(self.lambda);
        [
            2.0 * self.antiderivative(self.zeta),
            2.0 * l,
            3.0,
            -2.0 * l / 3.0,
            -1.5,
        ]
    }

    fn reciprocal_density_coeffs(&self) -> [f64; 5] {
        self.log_density_coeffs().map(|c| -c)
    }
}

/// `3x⁴/4 + λx³/3 − 3x²/2 − λx` for [`Convention::Definition`]; the
/// `λ`-terms flip sign for [`Convention::PaperExpanded`].
pub fn drift_antiderivative(x: f64, lambda: f64, convention: Convention) -> f64 {
    let l = convention.signed_lambda(lambda);
    let x2 = x * x;
    0.75 * x2 * x2 + l * x2 * x / 3.0 - 1.5 * x2 - l * x
}

/// `ln p′(x) = −2 (A(x) − A(ζ))`.
pub fn log_scale_density(x: f64, cfg: &ScaleSpeedConfig) -> f64 {
    -2.0 * (cfg.antiderivative(x) - cfg.antiderivative(cfg.zeta))
}

fn check_point(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [-1, 1], got {x}")));
    }
    Ok(())
}

/// `p(x)` as a signed [`LogValue`] (negative for `x < ζ`).
pub fn scale_function(x: f64, cfg: &ScaleSpeedConfig) -> Result<QuadratureResult> {
    check_point(x)?;
    scale_segment(cfg.zeta, x, cfg)
}

fn scale_segment(a: f64, b: f64, cfg: &ScaleSpeedConfig) -> Result<QuadratureResult> {
    integrate_exp_poly(&cfg.log_density_coeffs(), a, b, &cfg.quadrature)
}

/// `ln |∫_ζ^y 2/p′(z) dz|` plus its convergence flag.
fn log_inner(y: f64, cfg: &ScaleSpeedConfig) -> Result<(f64, bool)> {
    let r = integrate_exp_poly(
        &cfg.reciprocal_density_coeffs(),
        cfg.zeta,
        y,
        &cfg.quadrature,
    )?;
    Ok((
        std::f64::consts::LN_2 + r.value.log_magnitude(),
        r.converged,
    ))
}

/// `∫_a^b p′(y) I(y) dy` for `a`, `b` on the same side of `ζ`.
fn speed_piece(a: f64, b: f64, cfg: &ScaleSpeedConfig) -> Result<QuadratureResult> {
    if a == b {
        return log_integrate(|_| 0.0, a, a, &cfg.quadrature);
    }
    let side_sign: i8 = if a.max(b) > cfg.zeta { 1 } else { -1 };
    let mut inner_ok = true;
    let mut inner_err: Option<Error> = None;
    let coeffs = cfg.log_density_coeffs();
    let outer = log_integrate(
        |y| match log_inner(y, cfg) {
            Ok((log_i, converged)) => {
                inner_ok &= converged;
                crate::quadrature::eval_poly(&coeffs, y) + log_i
            }
            Err(e) => {
                inner_err.get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        &cfg.quadrature,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    let mut outer = outer?;
    outer.converged &= inner_ok;
    if side_sign < 0 {
        outer.value = -outer.value;
    }
    Ok(outer)
}

fn speed_segment(a: f64, b: f64, cfg: &ScaleSpeedConfig) -> Result<QuadratureResult> {
    let z = cfg.zeta;
    if (a - z) * (b - z) >= 0.0 {
        return speed_piece(a, b, cfg);
    }
    let first = speed_piece(a, z, cfg)?;
    let second = speed_piece(z, b, cfg)?;
    Ok(QuadratureResult {
        value: first.value + second.value,
        abs_error_estimate: first.abs_error_estimate + second.abs_error_estimate,
        panels: first.panels + second.panels,
        converged: first.converged && second.converged,
        rule: first.rule,
    })
}

/// `v(x)`, which is non-negative on both sides of `ζ`.
pub fn speed_integral(x: f64, cfg: &ScaleSpeedConfig) -> Result<QuadratureResult> {
    check_point(x)?;
    speed_segment(cfg.zeta, x, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitVerdict {
    Finite { value: LogValue },
    Divergent { sign: i8 },
    Undetermined,
}

impl LimitVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, LimitVerdict::Finite { .. })
    }

    pub fn is_divergent(&self, sign: i8) -> bool {
        matches!(self, LimitVerdict::Divergent { sign: s } if *s == sign)
    }

    fn could_be_finite(&self) -> bool {
        matches!(
            self,
            LimitVerdict::Finite { .. } | LimitVerdict::Undetermined
        )
    }

    fn could_diverge(&self, sign: i8) -> bool {
        self.is_divergent(sign) || matches!(self, LimitVerdict::Undetermined)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvidencePoint {
    pub k: u32,
    pub x: f64,
    pub value: LogValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLimit {
    pub side: Side,
    pub verdict: LimitVerdict,
    pub evidence: Vec<EvidencePoint>,
    /// Set when evaluation stopped early.
    pub failure: Option<String>,
}

/// Evaluates `f` along the boundary sequence for `side` (in order, so `f` may
/// accumulate between calls) and classifies the limit.
pub fn boundary_limit<F>(mut f: F, side: Side, cfg: &ScaleSpeedConfig) -> BoundaryLimit
where
    F: FnMut(f64) -> Result<LogValue>,
{
    let mut evidence = Vec::with_capacity(cfg.k_max as usize);
    for (i, x) in cfg.boundary_sequence(side).into_iter().enumerate() {
        match f(x) {
            Ok(value) if !value.is_nan() => evidence.push(EvidencePoint {
                k: i as u32 + 1,
                x,
                value,
            }),
            Ok(_) => {
                return BoundaryLimit {
                    side,
                    verdict: LimitVerdict::Undetermined,
                    evidence,
                    failure: Some(format!("NaN at x = {x}")),
                }
            }
            Err(e) => {
                return BoundaryLimit {
                    side,
                    verdict: LimitVerdict::Undetermined,
                    evidence,
                    failure: Some(e.to_string()),
                }
            }
        }
    }
    let verdict = classify(&evidence, cfg);
    BoundaryLimit {
        side,
        verdict,
        evidence,
        failure: None,
    }
}

fn classify(evidence: &[EvidencePoint], cfg: &ScaleSpeedConfig) -> LimitVerdict {
    let n = evidence.len();
    if n < 2 {
        return LimitVerdict::Undetermined;
    }
    let last = evidence[n - 1].value;
    let prev = evidence[n - 2].value;
    if last.log_magnitude() > cfg.divergence_log_threshold
        && last.sign() == prev.sign()
        && last.log_magnitude() > prev.log_magnitude()
    {
        return LimitVerdict::Divergent { sign: last.sign() };
    }
    let tail = CAUCHY_TAIL.min(n - 1);
    let log_tol = cfg.cauchy_rel_tol.ln();
    let cauchy = evidence[n - 1 - tail..].windows(2).all(|w| {
        let diff = w[1].value - w[0].value;
        diff.is_zero() || diff.log_magnitude() <= log_tol + w[1].value.log_magnitude()
    });
    if cauchy {
        LimitVerdict::Finite { value: last }
    } else {
        LimitVerdict::Undetermined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Cond1,
    Cond2,
    Cond3,
    None,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FellerVerdict {
    pub lambda: f64,
    pub zeta: f64,
    pub convention: Convention,
    pub k_max: u32,
    pub v_limit_left: BoundaryLimit,
    pub v_limit_right: BoundaryLimit,
    pub p_limit_left: BoundaryLimit,
    pub p_limit_right: BoundaryLimit,
    pub condition_met: Condition,
    /// `None` when the evidence cannot decide.
    pub explodes_wp1: Option<bool>,
    pub notes: Vec<String>,
}

impl FellerVerdict {
    pub fn is_determinate(&self) -> bool {
        self.explodes_wp1.is_some()
    }
}

/// Three explosion conditions checked in order on the four limits.
pub fn decide(
    v_left: &LimitVerdict,
    v_right: &LimitVerdict,
    p_left: &LimitVerdict,
    p_right: &LimitVerdict,
) -> (Condition, Option<bool>) {
    if v_right.is_finite() && v_left.is_finite() {
        return (Condition::Cond1, Some(true));
    }
    if v_right.is_finite() && p_left.is_divergent(-1) {
        return (Condition::Cond2, Some(true));
    }
    if v_left.is_finite() && p_right.is_divergent(1) {
        return (Condition::Cond3, Some(true));
    }
    let open = (v_right.could_be_finite() && v_left.could_be_finite())
        || (v_right.could_be_finite() && p_left.could_diverge(-1))
        || (v_left.could_be_finite() && p_right.could_diverge(1));
    if open {
        (Condition::Undetermined, None)
    } else {
        (Condition::None, Some(false))
    }
}

fn require_converged(r: QuadratureResult, x: f64) -> Result<LogValue> {
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::NotConverged(x))
    }
}

/// Whether stepping `prev → x` would subtract from the running value: the step
/// either crosses `ζ` or moves toward it.
fn restart_from_zeta(prev: f64, x: f64, zeta: f64) -> bool {
    (prev - zeta) * (x - zeta) < 0.0 || (x - prev) * (x - zeta) < 0.0
}

/// `p` along the boundary sequence, accumulated segment by segment.
pub fn scale_limit(side: Side, cfg: &ScaleSpeedConfig) -> BoundaryLimit {
    let mut prev = cfg.zeta;
    let mut acc = LogValue::ZERO;
    boundary_limit(
        |x| {
            if restart_from_zeta(prev, x, cfg.zeta) {
                prev = cfg.zeta;
                acc = LogValue::ZERO;
            }
            let piece = require_converged(scale_segment(prev, x, cfg)?, x)?;
            acc = acc + piece;
            prev = x;
            Ok(acc)
        },
        side,
        cfg,
    )
}

/// `v` along the boundary sequence, accumulated segment by segment.
pub fn speed_limit(side: Side, cfg: &ScaleSpeedConfig) -> BoundaryLimit {
    let mut prev = cfg.zeta;
    let mut acc = LogValue::ZERO;
    boundary_limit(
        |x| {
            if restart_from_zeta(prev, x, cfg.zeta) {
                prev = cfg.zeta;
                acc = LogValue::ZERO;
            }
            let piece = require_converged(speed_segment(prev, x, cfg)?, x)?;
            acc = acc + piece;
            prev = x;
            Ok(acc)
        },
        side,
        cfg,
    )
}

const ANALYTIC_NOTE: &str = "p' is continuous on the closed interval [-1, 1] for finite lambda, so p(+-1) and \
v(+-1) are finite analytically; 'divergent' means the log-magnitude exceeded the threshold and was still \
increasing at k_max";
const CONVENTION_NOTE: &str =
    "paper_expanded integrates (r^2-1)(3r-lambda), i.e. the definition convention \
evaluated at -lambda";

pub fn feller_test(cfg: &ScaleSpeedConfig) -> Result<FellerVerdict> {
    cfg.validate()?;
    let v_left = speed_limit(Side::Left, cfg);
    let v_right = speed_limit(Side::Right, cfg);
    let p_left = scale_limit(Side::Left, cfg);
    let p_right = scale_limit(Side::Right, cfg);
    let (condition_met, explodes_wp1) = decide(
        &v_left.verdict,
        &v_right.verdict,
        &p_left.verdict,
        &p_right.verdict,
    );

    let mut notes = vec![ANALYTIC_NOTE.to_string()];
    if cfg.convention == Convention::PaperExpanded {
        notes.push(CONVENTION_NOTE.to_string());
    }
    for limit in [&v_left, &v_right, &p_left, &p_right] {
        if let Some(f) = &limit.failure {
            notes.push(format!("{:?} boundary evaluation stopped: {f}", limit.side));
        }
    }
    Ok(FellerVerdict {
        lambda: cfg.lambda,
        zeta: cfg.zeta,
        convention: cfg.convention,
        k_max: cfg.k_max,
        v_limit_left: v_left,
        v_limit_right: v_right,
        p_limit_left: p_left,
        p_limit_right: p_right,
        condition_met,
        explodes_wp1,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub verdict: std::result::Result<FellerVerdict, String>,
}

/// Runs [`feller_test`] for every `λ` in `grid` with the other settings taken
/// from `base`. Failures stay in their row; order follows `grid`.
pub fn lambda_sweep(
    grid: &[f64],
    base: &ScaleSpeedConfig,
    workers: usize,
) -> Result<Vec<SweepEntry>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    Ok(par_map_indexed(grid.len(), workers, |i| {
        let lambda = grid[i];
        let cfg = ScaleSpeedConfig { lambda, ..*base };
        SweepEntry {
            lambda,
            verdict: feller_test(&cfg).map_err(|e| e.to_string()),
        }
    }))
}

/// `count` log-spaced values from `start` to `stop` inclusive. A single value
/// or `start == stop` is returned as is, which admits `λ = 0`.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidConfig("grid count must be >= 1".into()));
    }
    if !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidConfig("grid bounds must be finite".into()));
    }
    if count == 1 || start == stop {
        return Ok(vec![start; count]);
    }
    if !(start > 0.0 && stop > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "log-spaced grid needs positive bounds, got {start}:{stop}"
        )));
    }
    let (l0, l1) = (start.log10(), stop.log10());
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                start
            } else if i == count - 1 {
                stop
            } else {
                10f64.powf(l0 + (l1 - l0) * i as f64 / (count - 1) as f64)
            }
        })
        .collect())
}

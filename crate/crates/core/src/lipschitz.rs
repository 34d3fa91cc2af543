//! Lipschitz constants of the drift `b(Y) = (Y² − 1)(3Y + λ)` and the
//! singular behaviour of `f′(X)` for the decoupled `X` equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{drift, x_rhs};

pub const DEFAULT_SAMPLE_PAIRS: usize = 10_000;
pub const DEFAULT_SAMPLE_SEED: u64 = 0x1195_c0de;
/// `|X|` above this is reported as singular for `f′`.
pub const SINGULAR_THRESHOLD: f64 = 1.0 - 1e-12;

/// `b′(Y) = 9Y² + 2λY − 3`.
pub fn drift_derivative(y: f64, lambda: f64) -> f64 {
    9.0 * y * y + 2.0 * lambda * y - 3.0
}

/// `(b(x) − b(y))/(x − y)` in factored form, `3(x² + xy + y²) + λ(x + y) − 3`,
/// which avoids cancellation for close pairs.
pub fn drift_divided_difference(x: f64, y: f64, lambda: f64) -> f64 {
    3.0 * (x * x + x * y + y * y) + lambda * (x + y) - 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    /// `sup |b′|` on `[a, b]` (zero for a single point).
    pub analytic_constant: f64,
    /// Where the sup is attained.
    pub argmax: f64,
    pub sampled_constant: f64,
    pub witness: Option<(f64, f64)>,
    pub sample_pairs: usize,
}

/// Exact `sup |b′|` on `[a, b]`: `b′` is a convex quadratic, so the
/// candidates are the endpoints and the vertex `−λ/9`.
fn analytic_sup(a: f64, b: f64, lambda: f64) -> (f64, f64) {
    let vertex = -lambda / 9.0;
    let mut best = (drift_derivative(a, lambda).abs(), a);
    let mut candidates = vec![b];
    if vertex > a && vertex < b {
        candidates.push(vertex);
    }
    for c in candidates {
        let v = drift_derivative(c, lambda).abs();
        if v > best.0 {
            best = (v, c);
        }
    }
    best
}

pub fn local_lipschitz_constant(a: f64, b: f64, lambda: f64) -> Result<LipschitzReport> {
    local_lipschitz_constant_sampled(a, b, lambda, DEFAULT_SAMPLE_PAIRS, DEFAULT_SAMPLE_SEED)
}

pub fn local_lipschitz_constant_sampled(
    a: f64,
    b: f64,
    lambda: f64,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if !a.is_finite() || !b.is_finite() || !lambda.is_finite() {
        return Err(Error::Domain("interval and lambda must be finite".into()));
    }
    if a > b {
        return Err(Error::Domain(format!("interval [{a}, {b}] has a > b")));
    }
    if a == b {
        return Ok(LipschitzReport {
            a,
            b,
            lambda,
            analytic_constant: 0.0,
            argmax: a,
            sampled_constant: 0.0,
            witness: None,
            sample_pairs: 0,
        });
    }
    let (analytic_constant, argmax) = analytic_sup(a, b, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_constant = 0.0;
    let mut witness = None;
    for _ in 0..pairs {
        let x = rng.gen_range(a..=b);
        let y = rng.gen_range(a..=b);
        if x == y {
            continue;
        }
        let q = drift_divided_difference(x, y, lambda).abs();
        if q > sampled_constant {
            sampled_constant = q;
            witness = Some((x, y));
        }
    }
    Ok(LipschitzReport {
        a,
        b,
        lambda,
        analytic_constant,
        argmax,
        sampled_constant,
        witness,
        sample_pairs: pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FalsificationWitness {
    pub lambda: f64,
    pub k: f64,
    pub x: f64,
    pub y: f64,
    /// `|b(x) − b(y)| / |x − y|` by direct evaluation.
    pub quotient: f64,
}

/// Finds `x, y ∈ ℝ` with `|b(x) − b(y)| > K |x − y|`, showing that no global
/// Lipschitz constant exists. Pairs `(x, x + 1)` have quotient
/// `9x² + (9 + 2λ)x + λ`, so `x` is grown until the directly evaluated
/// inequality holds.
pub fn global_lipschitz_falsify(lambda: f64, k: f64) -> Result<FalsificationWitness> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("K must be finite and > 0, got {k}")));
    }
    if !lambda.is_finite() {
        return Err(Error::Domain("lambda must be finite".into()));
    }
    let mut x = (k / 9.0).sqrt() + lambda.abs() + 1.0;
    loop {
        let y = x + 1.0;
        let quotient = (drift(x, lambda) - drift(y, lambda)).abs() / (y - x);
        if quotient > k {
            return Ok(FalsificationWitness {
                lambda,
                k,
                x,
                y,
                quotient,
            });
        }
        x *= 2.0;
    }
}

/// `f′(X) = X²(−9 − λ/√(1 − X²)) + λ√(1 − X²) + 3`, singular at `|X| = 1`.
pub fn x_rhs_derivative(x: f64, lambda: f64) -> Result<f64> {
    if x.is_nan() || x.abs() >= 1.0 {
        return Err(Error::Singularity(x));
    }
    let s = (1.0 - x * x).sqrt();
    Ok(x * x * (-9.0 - lambda / s) + lambda * s + 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XExistenceReport {
    pub lambda: f64,
    /// `max |f|` sampled on `[−1, 1]`, endpoints included.
    pub f_max_abs: f64,
    pub f_continuous: bool,
    pub subinterval: (f64, f64),
    pub derivative_sup: f64,
    pub derivative_argmax: f64,
    /// `(X_k, f′(X_k))` for `X_k = 1 − 2⁻ᵏ` up to [`SINGULAR_THRESHOLD`].
    pub boundary_samples: Vec<(f64, f64)>,
    pub derivative_unbounded: bool,
    pub notes: Vec<String>,
}

const EXISTENCE_GRID: usize = 20_001;
const BOUNDARY_K_MAX: i32 = 40;

pub fn x_existence_report(lambda: f64) -> Result<XExistenceReport> {
    x_existence_report_on(lambda, (-0.9, 0.9))
}

pub fn x_existence_report_on(lambda: f64, subinterval: (f64, f64)) -> Result<XExistenceReport> {
    let (lo, hi) = subinterval;
    if !(lo <= hi) || lo <= -1.0 || hi >= 1.0 {
        return Err(Error::Domain(format!(
            "subinterval must be a closed interval inside (-1, 1), got [{lo}, {hi}]"
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::Domain("lambda must be finite".into()));
    }

    let mut f_max_abs = 0.0f64;
    let mut f_continuous = true;
    let mut prev: Option<f64> = None;
    for i in 0..EXISTENCE_GRID {
        let x = -1.0 + 2.0 * i as f64 / (EXISTENCE_GRID - 1) as f64;
        let fx = x_rhs(x, lambda)?;
        f_continuous &= fx.is_finite();
        if let Some(p) = prev {
            // increments must respect the √(1 − X²) modulus of continuity near ±1
            f_continuous &= (fx - p).abs()
                <= 10.0 * (3.0 + lambda.abs()) * (2.0 / EXISTENCE_GRID as f64).sqrt();
        }
        prev = Some(fx);
        f_max_abs = f_max_abs.max(fx.abs());
    }

    let mut derivative_sup = 0.0f64;
    let mut derivative_argmax = lo;
    for i in 0..EXISTENCE_GRID {
        let x = lo + (hi - lo) * i as f64 / (EXISTENCE_GRID - 1) as f64;
        let d = x_rhs_derivative(x, lambda)?.abs();
        if d > derivative_sup {
            derivative_sup = d;
            derivative_argmax = x;
        }
    }

    let boundary_samples: Vec<(f64, f64)> = (1..=BOUNDARY_K_MAX)
        .map(|k| 1.0 - 0.5f64.powi(k))
        .take_while(|&x| x <= SINGULAR_THRESHOLD)
        .map(|x| x_rhs_derivative(x, lambda).map(|d| (x, d)))
        .collect::<Result<_>>()?;
    let mags: Vec<f64> = boundary_samples.iter().map(|(_, d)| d.abs()).collect();
    let tail = &mags[mags.len() / 2..];
    let derivative_unbounded = tail.windows(2).all(|w| w[1] > w[0])
        && *mags.last().unwrap() > 1e3 * derivative_sup.max(1.0);

    let mut notes = vec![
        "f is continuous on [-1, 1]; f' is finite on every closed subinterval of (-1, 1)"
            .to_string(),
    ];
    if derivative_unbounded {
        notes.push(
            "|f'| grows without bound as |X| -> 1 (lambda / sqrt(1 - X^2) term); uniqueness is only \
             guaranteed on the open interval"
                .to_string(),
        );
    } else if lambda == 0.0 {
        notes.push(
            "lambda = 0: f'(X) = 3 - 9X^2 stays bounded at X = +-1, so the endpoint uniqueness \
             obstruction vanishes"
                .to_string(),
        );
    } else {
        notes.push("sampled |f'| did not show unbounded growth toward X = 1".to_string());
    }
    Ok(XExistenceReport {
        lambda,
        f_max_abs,
        f_continuous,
        subinterval,
        derivative_sup,
        derivative_argmax,
        boundary_samples,
        derivative_unbounded,
        notes,
    })
}

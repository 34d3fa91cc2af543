//! Adaptive Gauss–Kronrod quadrature of `exp(log f)` in the log domain.
//!
//! Each panel is evaluated with the 7/15-point Gauss–Kronrod pair after
//! subtracting the panel's largest log-integrand, so a panel whose values sit
//! around `exp(10⁴)` is summed in native precision and only its scale is kept
//! as a logarithm. Panels are bisected worst-error first until the summed
//! error estimate is below `rel_tol · |value|`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::log_value::LogValue;

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_PANELS: usize = 1_000_000;
pub const MAX_POLY_DEGREE: usize = 8;

/// Name of the per-panel rule, echoed in results.
pub const RULE: &str = "gauss-kronrod-7-15";

/// Absolute floor (as a natural log) below which values count as zero for the
/// relative-error test.
const LOG_ABS_FLOOR: f64 = -708.0;
const RESUM_EVERY: usize = 64;

// Kronrod abscissae, descending; the Gauss nodes are the odd entries.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: LogValue,
    pub abs_error_estimate: LogValue,
    pub panels: usize,
    pub converged: bool,
    pub rule: &'static str,
}

impl QuadratureResult {
    fn zero() -> Self {
        Self {
            value: LogValue::ZERO,
            abs_error_estimate: LogValue::ZERO,
            panels: 0,
            converged: true,
            rule: RULE,
        }
    }

    fn negated(mut self) -> Self {
        self.value = -self.value;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    log_value: f64,
    log_error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_error
            .total_cmp(&other.log_error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn evaluate_panel<F: FnMut(f64) -> f64>(log_f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut logs = [0.0f64; 15];
    logs[0] = log_f(center);
    for j in 0..7 {
        let dx = half * XGK[j];
        logs[1 + 2 * j] = log_f(center - dx);
        logs[2 + 2 * j] = log_f(center + dx);
    }
    let mut scale = f64::NEG_INFINITY;
    for (i, &l) in logs.iter().enumerate() {
        if l.is_nan() {
            let x = match i {
                0 => center,
                _ if i % 2 == 1 => center - half * XGK[(i - 1) / 2],
                _ => center + half * XGK[(i - 2) / 2],
            };
            return Err(Error::NanIntegrand(x));
        }
        if l == f64::INFINITY {
            return Err(Error::Domain("log-integrand is +inf".into()));
        }
        scale = scale.max(l);
    }
    if scale == f64::NEG_INFINITY {
        return Ok(Panel {
            a,
            b,
            log_value: f64::NEG_INFINITY,
            log_error: f64::NEG_INFINITY,
        });
    }

    let mut f = [0.0f64; 15];
    for (fi, &l) in f.iter_mut().zip(logs.iter()) {
        *fi = (l - scale).exp();
    }
    let fc = f[0];
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    for j in 0..7 {
        let pair = f[1 + 2 * j] + f[2 + 2 * j];
        res_k += WGK[j] * pair;
        if j % 2 == 1 {
            res_g += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((f[1 + 2 * j] - mean).abs() + (f[2 + 2 * j] - mean).abs());
    }
    let width = half.abs();
    let value = res_k * width;
    res_asc *= width;
    let mut err = ((res_k - res_g) * width).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    err = err.max(50.0 * f64::EPSILON * value);

    Ok(Panel {
        a,
        b,
        log_value: scale + ln_or_neg_inf(value),
        log_error: scale + ln_or_neg_inf(err),
    })
}

/// Running `ln Σ exp(xᵢ)` with removals, kept relative to a reference scale.
#[derive(Debug, Clone, Copy)]
struct ScaledSum {
    reference: f64,
    acc: f64,
}

impl ScaledSum {
    fn new() -> Self {
        Self {
            reference: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    fn add(&mut self, log_x: f64) {
        if log_x == f64::NEG_INFINITY {
            return;
        }
        if log_x > self.reference {
            self.acc = if self.reference == f64::NEG_INFINITY {
                0.0
            } else {
                self.acc * (self.reference - log_x).exp()
            };
            self.reference = log_x;
        }
        self.acc += (log_x - self.reference).exp();
    }

    fn remove(&mut self, log_x: f64) {
        if log_x == f64::NEG_INFINITY {
            return;
        }
        self.acc = (self.acc - (log_x - self.reference).exp()).max(0.0);
    }

    fn log(&self) -> f64 {
        self.reference + ln_or_neg_inf(self.acc)
    }
}

fn exact_sums(panels: &[Panel]) -> (f64, f64) {
    let mut values = ScaledSum::new();
    let mut errors = ScaledSum::new();
    for p in panels {
        values.add(p.log_value);
        errors.add(p.log_error);
    }
    (values.log(), errors.log())
}

fn within_tolerance(log_value: f64, log_error: f64, rel_tol: f64) -> bool {
    log_error <= rel_tol.ln() + log_value.max(LOG_ABS_FLOOR)
}

/// Integrates `exp(log_f(x))` over `[a, b]` and returns the result as a
/// [`LogValue`]. `log_f` may return `−∞` (a zero integrand) but not NaN.
/// A reversed interval yields the negated integral.
///
/// When `max_panels` is exhausted (or a panel can no longer be bisected in
/// `f64`) the best estimate is returned with `converged = false`.
pub fn log_integrate<F>(
    mut log_f: F,
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> f64,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rel_tol must be > 0, got {}",
            opts.rel_tol
        )));
    }
    if opts.max_panels == 0 {
        return Err(Error::InvalidConfig("max_panels must be >= 1".into()));
    }
    if a == b {
        return Ok(QuadratureResult::zero());
    }
    if a > b {
        return log_integrate(log_f, b, a, opts).map(QuadratureResult::negated);
    }

    let first = evaluate_panel(&mut log_f, a, b)?;
    if within_tolerance(first.log_value, first.log_error, opts.rel_tol) {
        return Ok(finish(vec![first], true));
    }

    let mut heap = BinaryHeap::new();
    let mut values = ScaledSum::new();
    let mut errors = ScaledSum::new();
    values.add(first.log_value);
    errors.add(first.log_error);
    heap.push(first);

    let mut iterations = 0usize;
    let converged = loop {
        if within_tolerance(values.log(), errors.log(), opts.rel_tol) {
            let (v, e) = exact_sums(heap.as_slice());
            if within_tolerance(v, e, opts.rel_tol) {
                break true;
            }
            values = ScaledSum::new();
            errors = ScaledSum::new();
            values.add(v);
            errors.add(e);
        }
        if heap.len() >= opts.max_panels {
            break false;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break false;
        }
        let left = evaluate_panel(&mut log_f, worst.a, mid)?;
        let right = evaluate_panel(&mut log_f, mid, worst.b)?;
        values.remove(worst.log_value);
        errors.remove(worst.log_error);
        for p in [left, right] {
            values.add(p.log_value);
            errors.add(p.log_error);
            heap.push(p);
        }
        iterations += 1;
        if iterations.is_multiple_of(RESUM_EVERY) {
            let (v, e) = exact_sums(heap.as_slice());
            values = ScaledSum::new();
            errors = ScaledSum::new();
            values.add(v);
            errors.add(e);
        }
    };
    Ok(finish(heap.into_vec(), converged))
}

fn finish(mut panels: Vec<Panel>, converged: bool) -> QuadratureResult {
    // fixed summation order so results do not depend on heap layout
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let (log_value, log_error) = exact_sums(&panels);
    QuadratureResult {
        value: LogValue::from_log(log_value),
        abs_error_estimate: LogValue::from_log(log_error),
        panels: panels.len(),
        converged,
        rule: RULE,
    }
}

/// Horner evaluation of `Σ cᵢ xⁱ` (coefficients in ascending order).
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `∫ₐᵇ exp(poly(s)) ds` with `coeffs` in ascending order, degree ≤ 8.
pub fn integrate_exp_poly(
    coeffs: &[f64],
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult> {
    if coeffs.len() > MAX_POLY_DEGREE + 1 {
        return Err(Error::Domain(format!(
            "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
            coeffs.len() - 1
        )));
    }
    if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite polynomial coefficient {c}"
        )));
    }
    log_integrate(|s| eval_poly(coeffs, s), a, b, opts)
}

//! Independent native-precision oracles shared by the integration tests.
#![allow(dead_code)]

use explosion_lab::feller::{drift_antiderivative, ScaleSpeedConfig};

pub fn log_density(x: f64, cfg: &ScaleSpeedConfig) -> f64 {
    let a = |s: f64| drift_antiderivative(s, cfg.lambda, cfg.convention);
    -2.0 * (a(x) - a(cfg.zeta))
}

/// Composite trapezoid on `n` uniform panels.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

/// `p(x)` by trapezoid refinement with `n` panels.
pub fn scale_trapezoid(x: f64, cfg: &ScaleSpeedConfig, n: usize) -> f64 {
    trapezoid(|s| log_density(s, cfg).exp(), cfg.zeta, x, n)
}

/// `v(x)` on an `n × n` trapezoid grid: the inner integral is accumulated
/// cumulatively along the same nodes as the outer one.
pub fn speed_trapezoid(x: f64, cfg: &ScaleSpeedConfig, n: usize) -> f64 {
    let h = (x - cfg.zeta) / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| cfg.zeta + i as f64 * h).collect();
    let dens: Vec<f64> = nodes.iter().map(|&s| log_density(s, cfg).exp()).collect();
    let mut inner = vec![0.0; n + 1];
    for i in 1..=n {
        inner[i] = inner[i - 1] + 0.5 * h * (2.0 / dens[i - 1] + 2.0 / dens[i]);
    }
    let mut outer = 0.0;
    for i in 1..=n {
        outer += 0.5 * h * (dens[i - 1] * inner[i - 1] + dens[i] * inner[i]);
    }
    outer
}

/// Recursive adaptive Simpson with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

//! First-exit simulation of `dY = (Y² − 1)(3Y + λ) dτ + dW`.
//!
//! Explosion is measured as the first time `|Y| ≥ 1 − ε`, i.e. the exit
//! from the physical interval shrunk by the exit band.

use serde::Serialize;

use super::noise::NoiseProcess;
use crate::error::{Error, Result};
use crate::model::drift;
use crate::parallel::par_map_indexed;

pub const DEFAULT_DTAU: f64 = 1e-4;
pub const DEFAULT_EXIT_BAND: f64 = 1e-6;
pub const DEFAULT_TAU_MAX: f64 = 100.0;
pub const DEFAULT_HISTOGRAM_BINS: usize = 50;
/// Above this `|λ|` the step is capped at `1e-4/|λ|` for explicit stability.
pub const STIFF_LAMBDA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathConfig {
    pub y0: f64,
    pub lambda: f64,
    pub dtau: f64,
    pub tau_max: f64,
    pub exit_band: f64,
    pub drift_enabled: bool,
    pub record_trajectory: bool,
}

impl PathConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            y0: 0.0,
            lambda,
            dtau: DEFAULT_DTAU,
            tau_max: DEFAULT_TAU_MAX,
            exit_band: DEFAULT_EXIT_BAND,
            drift_enabled: true,
            record_trajectory: false,
        }
    }

    /// Pure Brownian motion started at `y0`.
    pub fn brownian(y0: f64) -> Self {
        Self {
            y0,
            drift_enabled: false,
            ..Self::new(0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exit_band > 0.0 && self.exit_band < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "exit band must lie in (0, 1), got {}",
                self.exit_band
            )));
        }
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dtau must be finite and > 0, got {}",
                self.dtau
            )));
        }
        if !(self.tau_max > 0.0) || self.tau_max.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "tau_max must be > 0, got {}",
                self.tau_max
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite, got {}",
                self.lambda
            )));
        }
        if !(self.y0.abs() < 1.0 - self.exit_band) {
            return Err(Error::InvalidConfig(format!(
                "|y0| must be < 1 - exit band = {}, got {}",
                1.0 - self.exit_band,
                self.y0
            )));
        }
        Ok(())
    }

    /// Step actually used: `dtau`, capped at `1e-4/|λ|` when the drift is
    /// enabled and `|λ| > 10`.
    pub fn effective_dtau(&self) -> f64 {
        if self.drift_enabled && self.lambda.abs() > STIFF_LAMBDA {
            self.dtau.min(1e-4 / self.lambda.abs())
        } else {
            self.dtau
        }
    }

    fn max_steps(&self) -> u64 {
        let steps = (self.tau_max / self.effective_dtau()).ceil();
        if steps >= u64::MAX as f64 {
            u64::MAX
        } else {
            steps as u64
        }
    }
}

pub fn euler_maruyama_step(y: f64, lambda: f64, dw: f64, dtau: f64) -> f64 {
    y + drift(y, lambda) * dtau + dw
}

pub fn brownian_step(y: f64, dw: f64) -> f64 {
    y + dw
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Exited { side: i8, exit_time: f64 },
    Censored { tau_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub outcome: Outcome,
    pub steps: u64,
    pub final_y: f64,
    /// `(τ, Y)` at every step, when requested.
    pub trajectory: Option<Vec<(f64, f64)>>,
}

/// Runs one path on `process`'s stream. The increments are drawn with the
/// config's effective step; the step stored in `process` is not used.
pub fn simulate_path(cfg: &PathConfig, process: &NoiseProcess) -> Result<PathResult> {
    cfg.validate()?;
    let dtau = cfg.effective_dtau();
    let mut noise = process.with_step(dtau)?.stream();
    let bound = 1.0 - cfg.exit_band;
    let max_steps = cfg.max_steps();
    let mut trajectory = cfg.record_trajectory.then(|| vec![(0.0, cfg.y0)]);

    let mut y = cfg.y0;
    let mut steps = 0u64;
    while steps < max_steps {
        let dw = noise.next().expect("noise stream is endless");
        y = if cfg.drift_enabled {
            euler_maruyama_step(y, cfg.lambda, dw, dtau)
        } else {
            brownian_step(y, dw)
        };
        steps += 1;
        if !y.is_finite() {
            return Err(Error::InvalidPath { steps });
        }
        let tau = steps as f64 * dtau;
        if let Some(t) = trajectory.as_mut() {
            t.push((tau, y));
        }
        if y.abs() >= bound {
            return Ok(PathResult {
                outcome: Outcome::Exited {
                    side: if y > 0.0 { 1 } else { -1 },
                    exit_time: tau,
                },
                steps,
                final_y: y,
                trajectory,
            });
        }
    }
    Ok(PathResult {
        outcome: Outcome::Censored {
            tau_max: cfg.tau_max,
        },
        steps,
        final_y: y,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lower: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[0, max(values)]`; empty when `values` is.
    pub fn of(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let upper = values.iter().copied().fold(0.0, f64::max);
        if values.is_empty() || upper <= 0.0 {
            return Self {
                lower: 0.0,
                bin_width: 0.0,
                counts: if values.is_empty() {
                    vec![]
                } else {
                    vec![values.len() as u64]
                },
            };
        }
        let bin_width = upper / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = ((v / bin_width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self {
            lower: 0.0,
            bin_width,
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsembleStats {
    pub n_paths: usize,
    pub exited: usize,
    pub censored: usize,
    pub failed: usize,
    pub exit_left: usize,
    pub exit_right: usize,
    /// Exited over valid (non-failed) paths.
    pub exit_fraction: f64,
    /// Statistics over exited paths only.
    pub mean_exit_time: Option<f64>,
    /// `None` when fewer than two paths exited.
    pub exit_time_std_error: Option<f64>,
    pub median_exit_time: Option<f64>,
    pub histogram: Histogram,
    pub effective_dtau: f64,
    /// First few per-path failures.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub exit_times: Vec<f64>,
}

const MAX_REPORTED_FAILURES: usize = 10;

/// Runs `n_paths` paths, path `i` on stream `i` of `process.master_seed`.
/// Results do not depend on `workers`.
pub fn simulate_ensemble(
    cfg: &PathConfig,
    n_paths: usize,
    process: &NoiseProcess,
    workers: usize,
) -> Result<PathEnsembleStats> {
    simulate_ensemble_with_bins(cfg, n_paths, process, workers, DEFAULT_HISTOGRAM_BINS)
}

pub fn simulate_ensemble_with_bins(
    cfg: &PathConfig,
    n_paths: usize,
    process: &NoiseProcess,
    workers: usize,
    bins: usize,
) -> Result<PathEnsembleStats> {
    if n_paths == 0 {
        return Err(Error::InvalidConfig("need at least one path".into()));
    }
    cfg.validate()?;
    let cfg = PathConfig {
        record_trajectory: false,
        ..*cfg
    };
    let results = par_map_indexed(n_paths, workers, |i| {
        simulate_path(&cfg, &process.with_stream(i as u64)).map(|r| r.outcome)
    });

    let mut stats = PathEnsembleStats {
        n_paths,
        exited: 0,
        censored: 0,
        failed: 0,
        exit_left: 0,
        exit_right: 0,
        exit_fraction: 0.0,
        mean_exit_time: None,
        exit_time_std_error: None,
        median_exit_time: None,
        histogram: Histogram::of(&[], bins),
        effective_dtau: cfg.effective_dtau(),
        failures: Vec::new(),
        exit_times: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(Outcome::Exited { side, exit_time }) => {
                stats.exited += 1;
                if side < 0 {
                    stats.exit_left += 1;
                } else {
                    stats.exit_right += 1;
                }
                stats.exit_times.push(exit_time);
            }
            Ok(Outcome::Censored { .. }) => stats.censored += 1,
            Err(e) => {
                stats.failed += 1;
                if stats.failures.len() < MAX_REPORTED_FAILURES {
                    stats.failures.push(format!("path {i}: {e}"));
                }
            }
        }
    }
    let valid = stats.exited + stats.censored;
    if valid > 0 {
        stats.exit_fraction = stats.exited as f64 / valid as f64;
    }
    let times = &stats.exit_times;
    if !times.is_empty() {
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        stats.mean_exit_time = Some(mean);
        if times.len() > 1 {
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
            stats.exit_time_std_error = Some((var / n).sqrt());
        }
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        stats.median_exit_time = Some(if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        });
        stats.histogram = Histogram::of(times, bins);
    }
    Ok(stats)
}

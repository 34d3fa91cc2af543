use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Source of Wiener increments `ΔW ~ N(0, Δτ)`.
///
/// Each `(master_seed, stream_id)` pair selects an independent ChaCha8 stream,
/// so paths can be generated on any number of workers and still reproduce bit
/// for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseProcess {
    pub master_seed: u64,
    dtau: f64,
    pub stream_id: u64,
}

fn check_step(dtau: f64) -> Result<f64> {
    if dtau > 0.0 && dtau.is_finite() {
        Ok(dtau)
    } else {
        Err(Error::InvalidConfig(format!(
            "step must be finite and > 0, got {dtau}"
        )))
    }
}

impl NoiseProcess {
    pub fn new(master_seed: u64, dtau: f64) -> Result<Self> {
        Ok(Self {
            master_seed,
            dtau: check_step(dtau)?,
            stream_id: 0,
        })
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn with_step(self, dtau: f64) -> Result<Self> {
        Ok(Self {
            dtau: check_step(dtau)?,
            ..self
        })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn stream(&self) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        NoiseStream {
            rng,
            sd: self.dtau().sqrt(),
        }
    }
}

/// Endless iterator of increments for one stream.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sd: f64,
}

impl Iterator for NoiseStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        Some(self.sd * z)
    }
}

pub fn wiener_increments(process: &NoiseProcess, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one increment".into()));
    }
    Ok(process.stream().take(n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementStats {
    pub n: usize,
    pub dtau: f64,
    pub mean: f64,
    pub variance: f64,
    /// `|mean| / (√Δτ / √n)`.
    pub mean_z_score: f64,
    /// Sample variance over `Δτ`.
    pub variance_ratio: f64,
}

pub fn increment_stats(process: &NoiseProcess, n: usize) -> Result<IncrementStats> {
    let dw = wiener_increments(process, n)?;
    let nf = n as f64;
    let mean = dw.iter().sum::<f64>() / nf;
    let variance = if n > 1 {
        dw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        f64::NAN
    };
    let dtau = process.dtau();
    Ok(IncrementStats {
        n,
        dtau,
        mean,
        variance,
        mean_z_score: mean.abs() / (dtau / nf).sqrt(),
        variance_ratio: variance / dtau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticVariation {
    pub horizon: f64,
    pub steps: usize,
    pub value: f64,
    pub relative_error: f64,
}

/// `Σ (ΔW)²` over `[0, horizon]` on the process step.
pub fn quadratic_variation(process: &NoiseProcess, horizon: f64) -> Result<QuadraticVariation> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    let steps = (horizon / process.dtau()).round() as usize;
    let value: f64 = wiener_increments(process, steps.max(1))?
        .iter()
        .map(|x| x * x)
        .sum();
    let horizon = steps.max(1) as f64 * process.dtau();
    Ok(QuadraticVariation {
        horizon,
        steps,
        value,
        relative_error: (value - horizon).abs() / horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffQuotientRow {
    pub n: u64,
    pub samples: usize,
    pub std: f64,
    pub std_over_sqrt_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffQuotientReport {
    pub rows: Vec<DiffQuotientRow>,
    /// Least-squares slope of `ln std(X_n)` against `ln n`; ½ for Brownian motion.
    pub slope: f64,
    pub intercept: f64,
}

pub const DEFAULT_DIFF_QUOTIENT_SAMPLES: usize = 10_000;

/// For each `n`, samples `X_n = n [W(t + 1/n) − W(t)]` at `t = j/n`,
/// `j = 0..samples`, on its own stream, and fits the growth of `std(X_n)`.
pub fn diff_quotient_stat(
    process: &NoiseProcess,
    n_values: &[u64],
    samples: usize,
) -> Result<DiffQuotientReport> {
    let mut distinct = n_values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least two distinct n values".into(),
        ));
    }
    if distinct[0] == 0 {
        return Err(Error::InvalidConfig("n must be >= 1".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidConfig(
            "need at least two samples per n".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for (i, &n) in n_values.iter().enumerate() {
        let stream = process
            .with_step(1.0 / n as f64)?
            .with_stream(process.stream_id.wrapping_add(i as u64));
        let nf = n as f64;
        let xs: Vec<f64> = stream.stream().take(samples).map(|dw| nf * dw).collect();
        let mean = xs.iter().sum::<f64>() / samples as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
        let std = var.sqrt();
        rows.push(DiffQuotientRow {
            n,
            samples,
            std,
            std_over_sqrt_n: std / nf.sqrt(),
        });
    }
    let (slope, intercept) = least_squares(
        &rows.iter().map(|r| (r.n as f64).ln()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.std.ln()).collect::<Vec<_>>(),
    );
    Ok(DiffQuotientReport {
        rows,
        slope,
        intercept,
    })
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use explosion_lab::feller::{
    feller_test, lambda_sweep, log_grid, BoundaryLimit, Condition, Convention, FellerVerdict,
    LimitVerdict, ScaleSpeedConfig, Side, DEFAULT_CAUCHY_REL_TOL, DEFAULT_DIVERGENCE_LOG_THRESHOLD,
    DEFAULT_K_MAX,
};
use explosion_lab::lipschitz::{
    global_lipschitz_falsify, local_lipschitz_constant_sampled, x_existence_report,
    DEFAULT_SAMPLE_PAIRS, DEFAULT_SAMPLE_SEED,
};
use explosion_lab::quadrature::{QuadratureOptions, DEFAULT_REL_TOL};
use explosion_lab::sim::noise::{
    diff_quotient_stat, increment_stats, quadratic_variation, DEFAULT_DIFF_QUOTIENT_SAMPLES,
};
use explosion_lab::sim::path::{
    simulate_ensemble_with_bins, DEFAULT_DTAU, DEFAULT_EXIT_BAND, DEFAULT_HISTOGRAM_BINS,
    DEFAULT_TAU_MAX,
};
use explosion_lab::sim::{integrate_x_ode, NoiseProcess, PathConfig, XTermination};
use serde::{Deserialize, Serialize};

use crate::output::{out_path, write_csv, write_json, CsvHeader, Format, Log10, Metadata};
use crate::{usage, Common, EXIT_OK, EXIT_UNDETERMINED};

fn parse_convention(s: &str) -> std::result::Result<Convention, String> {
    s.parse().map_err(|e: explosion_lab::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct FellerArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub zeta: f64,
    #[arg(long, default_value = "definition", value_parser = parse_convention)]
    #[serde(serialize_with = "ser_convention")]
    pub convention: Convention,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub kmax: u32,
    /// Natural-log magnitude above which a growing sequence counts as divergent.
    #[arg(long, default_value_t = DEFAULT_DIVERGENCE_LOG_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CAUCHY_REL_TOL)]
    pub cauchy_tol: f64,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub rel_tol: f64,
}

fn ser_convention<S: serde::Serializer>(
    c: &Convention,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(c.as_str())
}

fn scale_speed_config(
    lambda: f64,
    zeta: f64,
    convention: Convention,
    kmax: u32,
    threshold: f64,
    cauchy_tol: f64,
    rel_tol: f64,
) -> Result<ScaleSpeedConfig> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(usage(format!(
            "--rel-tol must lie in (0, 1), got {rel_tol}"
        )));
    }
    let cfg = ScaleSpeedConfig {
        divergence_log_threshold: threshold,
        cauchy_rel_tol: cauchy_tol,
        quadrature: QuadratureOptions::with_rel_tol(rel_tol),
        ..ScaleSpeedConfig::new(lambda)
            .with_zeta(zeta)
            .with_convention(convention)
            .with_k_max(kmax)
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvidenceRow {
    pub quantity: String,
    pub side: String,
    pub k: u32,
    pub x_k: f64,
    pub sign: i8,
    pub log10_magnitude: f64,
}

impl CsvHeader for EvidenceRow {
    const HEADER: &'static [&'static str] =
        &["quantity", "side", "k", "x_k", "sign", "log10_magnitude"];
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LimitView {
    pub quantity: String,
    pub side: String,
    /// `finite`, `divergent` or `undetermined`.
    pub verdict: String,
    pub divergence_sign: Option<i8>,
    pub limit: Option<Log10>,
    pub evidence: Vec<EvidenceRow>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FellerView {
    pub lambda: f64,
    pub zeta: f64,
    pub convention: String,
    pub k_max: u32,
    pub condition_met: Condition,
    pub explodes_wp1: Option<bool>,
    pub limits: Vec<LimitView>,
    pub notes: Vec<String>,
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn verdict_name(v: &LimitVerdict) -> &'static str {
    match v {
        LimitVerdict::Finite { .. } => "finite",
        LimitVerdict::Divergent { .. } => "divergent",
        LimitVerdict::Undetermined => "undetermined",
    }
}

fn limit_view(quantity: &str, b: &BoundaryLimit) -> LimitView {
    let side = side_name(b.side).to_string();
    LimitView {
        quantity: quantity.to_string(),
        side: side.clone(),
        verdict: verdict_name(&b.verdict).to_string(),
        divergence_sign: match b.verdict {
            LimitVerdict::Divergent { sign } => Some(sign),
            _ => None,
        },
        limit: match b.verdict {
            LimitVerdict::Finite { value } => Some(value.into()),
            _ => None,
        },
        evidence: b
            .evidence
            .iter()
            .map(|e| {
                let v = Log10::from(e.value);
                EvidenceRow {
                    quantity: quantity.to_string(),
                    side: side.clone(),
                    k: e.k,
                    x_k: e.x,
                    sign: v.sign,
                    log10_magnitude: v.log10_magnitude,
                }
            })
            .collect(),
        failure: b.failure.clone(),
    }
}

impl From<&FellerVerdict> for FellerView {
    fn from(v: &FellerVerdict) -> Self {
        Self {
            lambda: v.lambda,
            zeta: v.zeta,
            convention: v.convention.as_str().to_string(),
            k_max: v.k_max,
            condition_met: v.condition_met,
            explodes_wp1: v.explodes_wp1,
            limits: vec![
                limit_view("p", &v.p_limit_left),
                limit_view("p", &v.p_limit_right),
                limit_view("v", &v.v_limit_left),
                limit_view("v", &v.v_limit_right),
            ],
            notes: v.notes.clone(),
        }
    }
}

fn condition_name(c: Condition) -> &'static str {
    match c {
        Condition::Cond1 => "cond1",
        Condition::Cond2 => "cond2",
        Condition::Cond3 => "cond3",
        Condition::None => "none",
        Condition::Undetermined => "undetermined",
    }
}

pub fn feller(a: &FellerArgs, common: &Common) -> Result<u8> {
    let cfg = scale_speed_config(
        a.lambda,
        a.zeta,
        a.convention,
        a.kmax,
        a.threshold,
        a.cauchy_tol,
        a.rel_tol,
    )?;
    let verdict = feller_test(&cfg)?;
    let view = FellerView::from(&verdict);
    let format = common.format.unwrap_or(Format::Json);
    let meta = Metadata::new(
        "feller",
        common.seed,
        Some(a.convention.as_str()),
        format,
        a,
    );
    match format {
        Format::Json => write_json(out_path(&common.out), &meta, &view)?,
        Format::Csv => {
            let rows: Vec<_> = view
                .limits
                .iter()
                .flat_map(|l| l.evidence.iter().cloned())
                .collect();
            let extra = [
                (
                    "condition_met",
                    condition_name(view.condition_met).to_string(),
                ),
                ("explodes_wp1", format!("{:?}", view.explodes_wp1)),
            ];
            write_csv(out_path(&common.out), &meta, &extra, &rows)?
        }
    }
    Ok(if verdict.is_determinate() {
        EXIT_OK
    } else {
        EXIT_UNDETERMINED
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(format!("expected start:stop:count, got {s:?}"));
    };
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    Ok(Grid {
        start: num(start)?,
        stop: num(stop)?,
        count: count
            .trim()
            .parse()
            .map_err(|e| format!("{count:?}: {e}"))?,
    })
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    /// Log-spaced grid `start:stop:count`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Grid,
    #[arg(long, default_value_t = 0.0)]
    pub zeta: f64,
    #[arg(long, default_value = "definition", value_parser = parse_convention)]
    #[serde(serialize_with = "ser_convention")]
    pub convention: Convention,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub kmax: u32,
    #[arg(long, default_value_t = DEFAULT_DIVERGENCE_LOG_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CAUCHY_REL_TOL)]
    pub cauchy_tol: f64,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    /// Per-point p and v series for plotting.
    #[arg(long, value_name = "PATH")]
    pub figure_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub condition_met: Option<String>,
    pub explodes_wp1: Option<bool>,
    pub p_left: Option<String>,
    pub p_right: Option<String>,
    pub v_left: Option<String>,
    pub v_right: Option<String>,
    pub error: Option<String>,
}

impl CsvHeader for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "lambda",
        "condition_met",
        "explodes_wp1",
        "p_left",
        "p_right",
        "v_left",
        "v_right",
        "error",
    ];
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FigureRow {
    pub lambda: f64,
    pub side: String,
    pub k: u32,
    pub x_k: f64,
    pub p_sign: i8,
    pub log10_p: f64,
    pub v_sign: i8,
    pub log10_v: f64,
    /// `v(x_k)` as a plain number when it fits in an `f64`.
    pub v_finite_value: Option<f64>,
}

impl CsvHeader for FigureRow {
    const HEADER: &'static [&'static str] = &[
        "lambda",
        "side",
        "k",
        "x_k",
        "p_sign",
        "log10_p",
        "v_sign",
        "log10_v",
        "v_finite_value",
    ];
}

fn limit_label(v: &LimitVerdict) -> String {
    match v {
        LimitVerdict::Divergent { sign } if *sign < 0 => "divergent-".into(),
        LimitVerdict::Divergent { .. } => "divergent+".into(),
        other => verdict_name(other).into(),
    }
}

fn figure_rows(v: &FellerVerdict) -> Vec<FigureRow> {
    let mut rows = Vec::new();
    for (p, s) in [
        (&v.p_limit_left, &v.v_limit_left),
        (&v.p_limit_right, &v.v_limit_right),
    ] {
        for (pe, ve) in p.evidence.iter().zip(&s.evidence) {
            rows.push(FigureRow {
                lambda: v.lambda,
                side: side_name(p.side).into(),
                k: pe.k,
                x_k: pe.x,
                p_sign: pe.value.sign(),
                log10_p: pe.value.log10_magnitude(),
                v_sign: ve.value.sign(),
                log10_v: ve.value.log10_magnitude(),
                v_finite_value: ve.value.to_f64().ok(),
            });
        }
    }
    rows
}

pub fn sweep(a: &SweepArgs, common: &Common) -> Result<u8> {
    let base = scale_speed_config(
        0.0,
        a.zeta,
        a.convention,
        a.kmax,
        a.threshold,
        a.cauchy_tol,
        a.rel_tol,
    )?;
    let grid =
        log_grid(a.grid.start, a.grid.stop, a.grid.count).map_err(|e| usage(e.to_string()))?;
    if let Some(bad) = grid.iter().find(|l| !l.is_finite()) {
        return Err(usage(format!("non-finite lambda {bad} in grid")));
    }
    let entries = lambda_sweep(&grid, &base, common.workers)?;
    let mut undetermined = false;
    let mut rows = Vec::with_capacity(entries.len());
    let mut figure = Vec::new();
    for e in &entries {
        match &e.verdict {
            Ok(v) => {
                undetermined |= !v.is_determinate();
                figure.extend(figure_rows(v));
                rows.push(SweepRow {
                    lambda: e.lambda,
                    condition_met: Some(condition_name(v.condition_met).into()),
                    explodes_wp1: v.explodes_wp1,
                    p_left: Some(limit_label(&v.p_limit_left.verdict)),
                    p_right: Some(limit_label(&v.p_limit_right.verdict)),
                    v_left: Some(limit_label(&v.v_limit_left.verdict)),
                    v_right: Some(limit_label(&v.v_limit_right.verdict)),
                    error: None,
                });
            }
            Err(msg) => {
                undetermined = true;
                rows.push(SweepRow {
                    lambda: e.lambda,
                    condition_met: None,
                    explodes_wp1: None,
                    p_left: None,
                    p_right: None,
                    v_left: None,
                    v_right: None,
                    error: Some(msg.clone()),
                });
            }
        }
    }
    let format = common.format.unwrap_or(Format::Json);
    let meta = Metadata::new("sweep", common.seed, Some(a.convention.as_str()), format, a);
    match format {
        Format::Json => write_json(out_path(&common.out), &meta, &rows)?,
        Format::Csv => write_csv(out_path(&common.out), &meta, &[], &rows)?,
    }
    if let Some(path) = &a.figure_out {
        let fig_meta = Metadata {
            format: Format::Csv,
            ..meta
        };
        write_csv(Some(path), &fig_meta, &[], &figure)?;
    }
    Ok(if undetermined {
        EXIT_UNDETERMINED
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub y0: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = DEFAULT_DTAU)]
    pub dtau: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_MAX)]
    pub tau_max: f64,
    #[arg(long, default_value_t = DEFAULT_EXIT_BAND)]
    pub exit_band: f64,
    /// Pure Brownian motion.
    #[arg(long)]
    pub no_drift: bool,
    #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,
    /// Exit-time histogram as CSV.
    #[arg(long, value_name = "PATH")]
    pub histogram_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HistogramRow {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

impl CsvHeader for HistogramRow {
    const HEADER: &'static [&'static str] = &["bin", "lower", "upper", "count"];
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulateSummary {
    pub n_paths: usize,
    pub exited: usize,
    pub censored: usize,
    pub failed: usize,
    pub exit_left: usize,
    pub exit_right: usize,
    pub exit_fraction: f64,
    pub mean_exit_time: Option<f64>,
    pub exit_time_std_error: Option<f64>,
    pub median_exit_time: Option<f64>,
    pub effective_dtau: f64,
    pub failures: Vec<String>,
}

impl CsvHeader for SimulateSummary {
    const HEADER: &'static [&'static str] = &[
        "n_paths",
        "exited",
        "censored",
        "failed",
        "exit_left",
        "exit_right",
        "exit_fraction",
        "mean_exit_time",
        "exit_time_std_error",
        "median_exit_time",
        "effective_dtau",
        "failures",
    ];
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    summary: &'a SimulateSummary,
    histogram: &'a [HistogramRow],
}

pub fn simulate(a: &SimulateArgs, common: &Common) -> Result<u8> {
    let cfg = PathConfig {
        y0: a.y0,
        lambda: a.lambda,
        dtau: a.dtau,
        tau_max: a.tau_max,
        exit_band: a.exit_band,
        drift_enabled: !a.no_drift,
        record_trajectory: false,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.paths == 0 {
        return Err(usage("--paths must be >= 1"));
    }
    if a.bins == 0 {
        return Err(usage("--bins must be >= 1"));
    }
    let process = NoiseProcess::new(common.seed, cfg.effective_dtau())?;
    let stats = simulate_ensemble_with_bins(&cfg, a.paths, &process, common.workers, a.bins)?;
    let summary = SimulateSummary {
        n_paths: stats.n_paths,
        exited: stats.exited,
        censored: stats.censored,
        failed: stats.failed,
        exit_left: stats.exit_left,
        exit_right: stats.exit_right,
        exit_fraction: stats.exit_fraction,
        mean_exit_time: stats.mean_exit_time,
        exit_time_std_error: stats.exit_time_std_error,
        median_exit_time: stats.median_exit_time,
        effective_dtau: stats.effective_dtau,
        failures: stats.failures.clone(),
    };
    let h = &stats.histogram;
    let histogram: Vec<HistogramRow> = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            bin: i,
            lower: h.lower + i as f64 * h.bin_width,
            upper: h.lower + (i + 1) as f64 * h.bin_width,
            count,
        })
        .collect();
    let format = common.format.unwrap_or(Format::Json);
    let meta = Metadata::new("simulate", common.seed, None, format, a);
    match format {
        Format::Json => write_json(
            out_path(&common.out),
            &meta,
            &SimulateJson {
                summary: &summary,
                histogram: &histogram,
            },
        )?,
        Format::Csv => {
            let flat = SimulateSummaryCsv::from(&summary);
            write_csv(out_path(&common.out), &meta, &[], &[flat])?
        }
    }
    if let Some(path) = &a.histogram_out {
        write_csv(
            Some(path),
            &Metadata {
                format: Format::Csv,
                ..meta
            },
            &[],
            &histogram,
        )?;
    }
    Ok(EXIT_OK)
}

/// [`SimulateSummary`] with failures joined, since CSV cells are flat.
#[derive(Serialize)]
struct SimulateSummaryCsv {
    n_paths: usize,
    exited: usize,
    censored: usize,
    failed: usize,
    exit_left: usize,
    exit_right: usize,
    exit_fraction: f64,
    mean_exit_time: Option<f64>,
    exit_time_std_error: Option<f64>,
    median_exit_time: Option<f64>,
    effective_dtau: f64,
    failures: String,
}

impl CsvHeader for SimulateSummaryCsv {
    const HEADER: &'static [&'static str] = SimulateSummary::HEADER;
}

impl From<&SimulateSummary> for SimulateSummaryCsv {
    fn from(s: &SimulateSummary) -> Self {
        Self {
            n_paths: s.n_paths,
            exited: s.exited,
            censored: s.censored,
            failed: s.failed,
            exit_left: s.exit_left,
            exit_right: s.exit_right,
            exit_fraction: s.exit_fraction,
            mean_exit_time: s.mean_exit_time,
            exit_time_std_error: s.exit_time_std_error,
            median_exit_time: s.median_exit_time,
            effective_dtau: s.effective_dtau,
            failures: s.failures.join("; "),
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct LipschitzArgs {
    /// Closed interval `A B` for the local constant.
    #[arg(long, num_args = 2, value_names = ["A", "B"], default_values_t = [-1.0, 1.0])]
    pub interval: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Search for a pair violating `|b(x) − b(y)| ≤ K |x − y|` instead.
    #[arg(long, requires = "k")]
    pub falsify: bool,
    #[arg(long = "K", id = "k")]
    pub k: Option<f64>,
    /// Report on `f′` for the X equation instead.
    #[arg(long, conflicts_with = "falsify")]
    pub x_report: bool,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_PAIRS)]
    pub pairs: usize,
}

pub fn lipschitz(a: &LipschitzArgs, common: &Common) -> Result<u8> {
    let format = common.format.unwrap_or(Format::Json);
    let meta = Metadata::new("lipschitz", common.seed, None, format, a);
    if !a.lambda.is_finite() {
        return Err(usage("--lambda must be finite"));
    }
    let path = out_path(&common.out);
    if a.falsify {
        let k = a.k.expect("clap enforces --K");
        if !(k > 0.0) || !k.is_finite() {
            return Err(usage(format!("--K must be finite and > 0, got {k}")));
        }
        let w = global_lipschitz_falsify(a.lambda, k)?;
        return match format {
            Format::Json => write_json(path, &meta, &w),
            Format::Csv => write_csv(path, &meta, &[], &[w]),
        }
        .map(|_| EXIT_OK);
    }
    if a.x_report {
        let r = x_existence_report(a.lambda)?;
        return match format {
            Format::Json => write_json(path, &meta, &r),
            Format::Csv => {
                let rows: Vec<_> = r
                    .boundary_samples
                    .iter()
                    .map(|&(x, d)| XDerivativeRow { x, derivative: d })
                    .collect();
                let extra = [
                    ("derivative_sup", r.derivative_sup.to_string()),
                    ("derivative_unbounded", r.derivative_unbounded.to_string()),
                ];
                write_csv(path, &meta, &extra, &rows)
            }
        }
        .map(|_| EXIT_OK);
    }
    let (lo, hi) = (a.interval[0], a.interval[1]);
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(usage(format!("malformed interval [{lo}, {hi}]")));
    }
    let r = local_lipschitz_constant_sampled(
        lo,
        hi,
        a.lambda,
        a.pairs,
        DEFAULT_SAMPLE_SEED ^ common.seed,
    )?;
    match format {
        Format::Json => write_json(path, &meta, &r)?,
        Format::Csv => write_csv(path, &meta, &[], &[LipschitzRow::from(&r)])?,
    }
    Ok(EXIT_OK)
}

impl CsvHeader for explosion_lab::lipschitz::FalsificationWitness {
    const HEADER: &'static [&'static str] = &["lambda", "k", "x", "y", "quotient"];
}

#[derive(Serialize)]
struct XDerivativeRow {
    x: f64,
    derivative: f64,
}

impl CsvHeader for XDerivativeRow {
    const HEADER: &'static [&'static str] = &["x", "derivative"];
}

#[derive(Serialize)]
struct LipschitzRow {
    a: f64,
    b: f64,
    lambda: f64,
    analytic_constant: f64,
    argmax: f64,
    sampled_constant: f64,
    witness_x: Option<f64>,
    witness_y: Option<f64>,
    sample_pairs: usize,
}

impl CsvHeader for LipschitzRow {
    const HEADER: &'static [&'static str] = &[
        "a",
        "b",
        "lambda",
        "analytic_constant",
        "argmax",
        "sampled_constant",
        "witness_x",
        "witness_y",
        "sample_pairs",
    ];
}

impl From<&explosion_lab::lipschitz::LipschitzReport> for LipschitzRow {
    fn from(r: &explosion_lab::lipschitz::LipschitzReport) -> Self {
        Self {
            a: r.a,
            b: r.b,
            lambda: r.lambda,
            analytic_constant: r.analytic_constant,
            argmax: r.argmax,
            sampled_constant: r.sampled_constant,
            witness_x: r.witness.map(|w| w.0),
            witness_y: r.witness.map(|w| w.1),
            sample_pairs: r.sample_pairs,
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct XodeArgs {
    #[arg(long)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dtau: f64,
    #[arg(long, default_value_t = 100.0)]
    pub tau_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct XodePoint {
    pub tau: f64,
    pub x: f64,
}

impl CsvHeader for XodePoint {
    const HEADER: &'static [&'static str] = &["tau", "x"];
}

#[derive(Serialize)]
struct XodeJson<'a> {
    termination: XTermination,
    final_tau: f64,
    rejected_steps: u64,
    trajectory: &'a [XodePoint],
}

fn termination_name(t: XTermination) -> &'static str {
    match t {
        XTermination::BoundarySingularity => "boundary_singularity",
        XTermination::HorizonReached => "horizon_reached",
    }
}

pub fn xode(a: &XodeArgs, common: &Common) -> Result<u8> {
    if !(a.x0.abs() < 1.0) {
        return Err(usage(format!("|x0| must be < 1, got {}", a.x0)));
    }
    if !(a.dtau > 0.0) || !(a.tau_max > 0.0) || !a.tau_max.is_finite() || !a.lambda.is_finite() {
        return Err(usage(
            "--dtau and --tau-max must be > 0 and --lambda finite",
        ));
    }
    let r = integrate_x_ode(a.x0, a.lambda, a.dtau, a.tau_max)?;
    let points: Vec<_> = r
        .trajectory
        .iter()
        .map(|&(tau, x)| XodePoint { tau, x })
        .collect();
    let format = common.format.unwrap_or(Format::Csv);
    let meta = Metadata::new("xode", common.seed, None, format, a);
    match format {
        Format::Json => write_json(
            out_path(&common.out),
            &meta,
            &XodeJson {
                termination: r.termination,
                final_tau: r.final_tau,
                rejected_steps: r.rejected_steps,
                trajectory: &points,
            },
        )?,
        Format::Csv => {
            let extra = [
                ("termination", termination_name(r.termination).to_string()),
                ("final_tau", r.final_tau.to_string()),
            ];
            write_csv(out_path(&common.out), &meta, &extra, &points)?
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Args, Serialize)]
pub struct NoiseArgs {
    /// Increments for the mean and variance checks.
    #[arg(long, default_value_t = 1_000_000)]
    pub increments: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dtau: f64,
    /// Step for the quadratic-variation check.
    #[arg(long, default_value_t = 1e-6)]
    pub qv_dtau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Values of `n` for the difference-quotient statistic.
    #[arg(long, value_delimiter = ',', default_values_t = [100u64, 10_000, 1_000_000])]
    pub n_values: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_DIFF_QUOTIENT_SAMPLES)]
    pub samples: usize,
}

#[derive(Serialize)]
struct NoiseReport {
    increments: explosion_lab::sim::noise::IncrementStats,
    quadratic_variation: explosion_lab::sim::noise::QuadraticVariation,
    diff_quotient: explosion_lab::sim::noise::DiffQuotientReport,
}

impl CsvHeader for explosion_lab::sim::noise::DiffQuotientRow {
    const HEADER: &'static [&'static str] = &["n", "samples", "std", "std_over_sqrt_n"];
}

pub fn validate_noise(a: &NoiseArgs, common: &Common) -> Result<u8> {
    if a.increments == 0 {
        return Err(usage("--increments must be >= 1"));
    }
    if a.n_values.contains(&0) {
        return Err(usage("--n-values must all be >= 1"));
    }
    let process = NoiseProcess::new(common.seed, a.dtau).map_err(|e| usage(e.to_string()))?;
    let qv_process = process
        .with_step(a.qv_dtau)
        .map_err(|e| usage(e.to_string()))?;
    let diff_quotient = diff_quotient_stat(&process.with_stream(1), &a.n_values, a.samples)
        .map_err(|e| usage(e.to_string()))?;
    let report = NoiseReport {
        increments: increment_stats(&process, a.increments)?,
        quadratic_variation: quadratic_variation(&qv_process.with_stream(u64::MAX), a.horizon)
            .map_err(|e| usage(e.to_string()))?,
        diff_quotient,
    };
    let format = common.format.unwrap_or(Format::Json);
    let meta = Metadata::new("validate-noise", common.seed, None, format, a);
    match format {
        Format::Json => write_json(out_path(&common.out), &meta, &report)?,
        Format::Csv => {
            let extra = [
                ("mean_z_score", report.increments.mean_z_score.to_string()),
                (
                    "variance_ratio",
                    report.increments.variance_ratio.to_string(),
                ),
                (
                    "quadratic_variation_relative_error",
                    report.quadratic_variation.relative_error.to_string(),
                ),
                (
                    "diff_quotient_slope",
                    report.diff_quotient.slope.to_string(),
                ),
            ];
            write_csv(
                out_path(&common.out),
                &meta,
                &extra,
                &report.diff_quotient.rows,
            )?
        }
    }
    Ok(EXIT_OK)
}

//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line with its measured values. Run with
//! `cargo test -p explosion-lab-cli --test acceptance -- --nocapture`.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::process::Command;
use std::time::{Duration, Instant};

use explosion_lab::feller::{
    feller_test, log_scale_density, scale_function, speed_integral, speed_limit, Convention,
    LimitVerdict, ScaleSpeedConfig, Side,
};
use explosion_lab::lipschitz::{
    global_lipschitz_falsify, local_lipschitz_constant, x_rhs_derivative,
};
use explosion_lab::model::{drift, PowerLawPotential, RawState};
use explosion_lab::quadrature::{log_integrate, QuadratureOptions};
use explosion_lab::sim::noise::{diff_quotient_stat, increment_stats, quadratic_variation};
use explosion_lab::sim::{
    integrate_normalized_system, integrate_raw_system, integrate_x_ode, simulate_ensemble,
    NoiseProcess, PathConfig, XTermination,
};
use explosion_lab::LogValue;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1 and 2
const FELLER_LAMBDAS: [f64; 3] = [1e2, 1e3, 1e4];
const DIVERGENT_LOG10_MIN: f64 = 217.0;
/// Half a unit in the third significant digit.
const V_STABLE_REL: f64 = 5e-4;
const RUNTIME_PER_LAMBDA: Duration = Duration::from_secs(60);
const ZETAS: [f64; 3] = [-0.5, 0.0, 0.5];
// Criterion 3
const DUALITY_TRIPLES: usize = 1000;
const DUALITY_REL: f64 = 1e-12;
// Criterion 4
const TRAPEZOID_POINTS: usize = 1_000_000;
const TRAPEZOID_GRID: usize = 2000;
const TRAPEZOID_REL: f64 = 1e-3;
const NATIVE_REL: f64 = 1e-9;
// Criterion 5 and 6
const PATHS: usize = 10_000;
const BROWNIAN_DTAU: f64 = 1e-4;
const BROWNIAN_MEAN_RANGE: (f64, f64) = (0.95, 1.05);
const BROWNIAN_OFFSET_REL: f64 = 0.05;
const MC_TAU_MAX: f64 = 50.0;
const MC_EXIT_FRACTION_MIN: f64 = 0.999;
// Criterion 7
const NOISE_INCREMENTS: usize = 1_000_000;
const NOISE_SIGMAS: f64 = 5.0;
const NOISE_VARIANCE_REL: f64 = 0.01;
const QV_REL: f64 = 0.01;
const SLOPE_TARGET: f64 = 0.5;
const SLOPE_TOL: f64 = 0.010;
// Criterion 8
const RESIDUAL_MAX: f64 = 1e-8;
const TAU_WINDOW: f64 = 10.0;
const MATCHED_TOL: f64 = 1e-6;
// Criterion 9
const RANDOM_LAMBDAS: usize = 100;
const CLOSED_FORM_ULPS: f64 = 4.0;
const FALSIFY_K_MAX_EXP: i32 = 12;
// Criterion 10
const X_SINGULAR: f64 = 1.0 - 1e-9;

const WORKERS: usize = 8;

struct Criterion {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    details: Vec<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            failures: Vec::new(),
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failures.push(what.clone());
        }
        self.details.push(what);
    }

    fn finish(self) {
        let status = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "{status} criterion {:>2}: {} [{}]",
            self.id,
            self.title,
            self.details.join("; ")
        );
        assert!(
            self.failures.is_empty(),
            "criterion {} failed: {}",
            self.id,
            self.failures.join("; ")
        );
    }
}

fn rel_change(a: LogValue, b: LogValue) -> f64 {
    let d = a - b;
    if d.is_zero() {
        0.0
    } else {
        (d.log_magnitude() - b.log_magnitude()).exp()
    }
}

fn finite(v: &LimitVerdict) -> Option<LogValue> {
    match v {
        LimitVerdict::Finite { value } => Some(*value),
        _ => None,
    }
}

#[test]
fn criterion_01_feller_reproduction() {
    let mut c = Criterion::new(1, "Feller reproduction for lambda in {1e2, 1e3, 1e4}");
    for conv in [Convention::Definition, Convention::PaperExpanded] {
        for &lambda in &FELLER_LAMBDAS {
            let t = Instant::now();
            let v = feller_test(&ScaleSpeedConfig::new(lambda).with_convention(conv)).unwrap();
            let elapsed = t.elapsed();
            // the divergent p side is whichever boundary the drift pushes towards
            let (p, v_side) = [
                (&v.p_limit_right, Side::Left),
                (&v.p_limit_left, Side::Right),
            ]
            .into_iter()
            .max_by(|a, b| {
                let m = |l: &explosion_lab::feller::BoundaryLimit| {
                    l.evidence
                        .last()
                        .map_or(f64::NEG_INFINITY, |e| e.value.log_magnitude())
                };
                m(a.0).total_cmp(&m(b.0))
            })
            .unwrap();
            let p_log10 = p.evidence.last().unwrap().value.log10_magnitude();
            let divergent = matches!(p.verdict, LimitVerdict::Divergent { .. })
                && p_log10 > DIVERGENT_LOG10_MIN;
            c.check(
                divergent,
                format!(
                    "{} lambda={lambda:e} p({:?}) log10={p_log10:.1}",
                    conv.as_str(),
                    p.side
                ),
            );
            let v30 = finite(
                &speed_limit(
                    v_side,
                    &ScaleSpeedConfig::new(lambda)
                        .with_convention(conv)
                        .with_k_max(30),
                )
                .verdict,
            );
            let v40 = finite(
                &speed_limit(
                    v_side,
                    &ScaleSpeedConfig::new(lambda)
                        .with_convention(conv)
                        .with_k_max(40),
                )
                .verdict,
            );
            let stable = match (v30, v40) {
                (Some(a), Some(b)) => rel_change(a, b) < V_STABLE_REL,
                _ => false,
            };
            c.check(
                stable,
                format!("v({v_side:?}) finite and stable k30/k40: {v30:?} {v40:?}"),
            );
            c.check(
                v.explodes_wp1 == Some(true),
                format!("explodes={:?}", v.explodes_wp1),
            );
            c.check(elapsed < RUNTIME_PER_LAMBDA, format!("{elapsed:.2?}"));
        }
    }
    c.finish();
}

#[test]
fn criterion_02_zeta_robustness() {
    let mut c = Criterion::new(2, "verdict unchanged for zeta in {-0.5, 0, 0.5}");
    for conv in [Convention::Definition, Convention::PaperExpanded] {
        for &lambda in &FELLER_LAMBDAS {
            let verdicts: Vec<_> = ZETAS
                .iter()
                .map(|&z| {
                    let v = feller_test(
                        &ScaleSpeedConfig::new(lambda)
                            .with_zeta(z)
                            .with_convention(conv),
                    )
                    .unwrap();
                    (v.explodes_wp1, v.condition_met)
                })
                .collect();
            let same = verdicts.iter().all(|v| v.0 == Some(true));
            c.check(
                same,
                format!("{} lambda={lambda:e} {verdicts:?}", conv.as_str()),
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_03_convention_duality() {
    let mut c = Criterion::new(3, "paper_expanded(lambda) == definition(-lambda)");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..DUALITY_TRIPLES {
        let x = rng.gen_range(-1.0..=1.0);
        let zeta = rng.gen_range(-0.999..0.999);
        let lambda = 10f64.powf(rng.gen_range(-2.0..6.0)) * if rng.gen() { 1.0 } else { -1.0 };
        let a = log_scale_density(
            x,
            &ScaleSpeedConfig::new(lambda)
                .with_zeta(zeta)
                .with_convention(Convention::PaperExpanded),
        );
        let b = log_scale_density(x, &ScaleSpeedConfig::new(-lambda).with_zeta(zeta));
        let scale = a.abs().max(b.abs());
        if scale > 0.0 {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    c.check(
        worst <= DUALITY_REL,
        format!("{DUALITY_TRIPLES} triples, max rel diff {worst:e}"),
    );
    c.finish();
}

#[test]
fn criterion_04_quadrature_oracle() {
    let mut c = Criterion::new(4, "quadrature vs trapezoid and native adaptive oracles");
    let mut worst_p = 0.0f64;
    let mut worst_v = 0.0f64;
    for &lambda in &[-10.0, -1.0, 0.0, 1.0, 10.0] {
        let cfg = ScaleSpeedConfig::new(lambda).with_zeta(0.1);
        for &x in &[-0.99, -0.4, 0.6, 0.999] {
            let p = scale_function(x, &cfg).unwrap().value.to_f64().unwrap();
            worst_p = worst_p.max(oracle::rel_diff(
                p,
                oracle::scale_trapezoid(x, &cfg, TRAPEZOID_POINTS),
            ));
            let v = speed_integral(x, &cfg).unwrap().value.to_f64().unwrap();
            worst_v = worst_v.max(oracle::rel_diff(
                v,
                oracle::speed_trapezoid(x, &cfg, TRAPEZOID_GRID),
            ));
        }
    }
    c.check(
        worst_p < TRAPEZOID_REL,
        format!("p vs 1e6-point trapezoid {worst_p:.1e}"),
    );
    c.check(
        worst_v < TRAPEZOID_REL,
        format!("v vs 2000^2 trapezoid {worst_v:.1e}"),
    );

    let opts = QuadratureOptions::with_rel_tol(1e-12);
    let mut worst_native = 0.0f64;
    for &lambda in &[-5.0, 0.0, 2.0, 10.0] {
        let mut cfg = ScaleSpeedConfig::new(lambda).with_zeta(-0.2);
        cfg.quadrature = opts;
        for &x in &[-0.9, 0.3, 0.95] {
            let got = scale_function(x, &cfg).unwrap().value.to_f64().unwrap();
            let f = |s: f64| oracle::log_density(s, &cfg).exp();
            let want = oracle::adaptive_simpson(&f, cfg.zeta, x, 1e-13 * f(x).max(1.0));
            worst_native = worst_native.max(oracle::rel_diff(got, want));
        }
    }
    let r = log_integrate(|x| x.sin(), 0.0, 3.0, &opts)
        .unwrap()
        .value
        .to_f64()
        .unwrap();
    worst_native = worst_native.max(oracle::rel_diff(
        r,
        oracle::adaptive_simpson(&|x: f64| x.sin().exp(), 0.0, 3.0, 1e-13),
    ));
    c.check(
        worst_native < NATIVE_REL,
        format!("LogValue vs native adaptive {worst_native:.1e}"),
    );
    c.finish();
}

#[test]
fn criterion_05_brownian_exit_time() {
    let mut c = Criterion::new(5, "Brownian exit time 1 - y0^2");
    let p = NoiseProcess::new(5, BROWNIAN_DTAU).unwrap();
    for &y0 in &[0.0, 0.5, -0.5] {
        let cfg = PathConfig {
            dtau: BROWNIAN_DTAU,
            ..PathConfig::brownian(y0)
        };
        let stats = simulate_ensemble(&cfg, PATHS, &p, WORKERS).unwrap();
        let mean = stats.mean_exit_time.unwrap();
        let ok = if y0 == 0.0 {
            (BROWNIAN_MEAN_RANGE.0..=BROWNIAN_MEAN_RANGE.1).contains(&mean)
        } else {
            (mean - 0.75).abs() <= BROWNIAN_OFFSET_REL * 0.75
        };
        c.check(
            ok && stats.exited == PATHS,
            format!("y0={y0}: mean {mean:.4}, exited {}", stats.exited),
        );
    }
    c.finish();
}

#[test]
fn criterion_06_monte_carlo_vs_feller() {
    let mut c = Criterion::new(6, "lambda=10 ensemble exits with probability ~1");
    let cfg = PathConfig {
        tau_max: MC_TAU_MAX,
        ..PathConfig::new(10.0)
    };
    let stats = simulate_ensemble(
        &cfg,
        PATHS,
        &NoiseProcess::new(42, cfg.dtau).unwrap(),
        WORKERS,
    )
    .unwrap();
    c.check(
        stats.exit_fraction >= MC_EXIT_FRACTION_MIN,
        format!(
            "exit fraction {} ({} left, {} right)",
            stats.exit_fraction, stats.exit_left, stats.exit_right
        ),
    );
    c.finish();
}

#[test]
fn criterion_07_noise_validation() {
    let mut c = Criterion::new(7, "Wiener increment statistics");
    let p = NoiseProcess::new(7, 1e-3).unwrap();
    let s = increment_stats(&p, NOISE_INCREMENTS).unwrap();
    c.check(
        s.mean_z_score < NOISE_SIGMAS,
        format!("mean z {:.3}", s.mean_z_score),
    );
    c.check(
        (s.variance_ratio - 1.0).abs() < NOISE_VARIANCE_REL,
        format!("variance ratio {:.5}", s.variance_ratio),
    );
    let qv = quadratic_variation(&p.with_step(1e-6).unwrap().with_stream(1), 1.0).unwrap();
    c.check(
        qv.relative_error < QV_REL,
        format!("quadratic variation rel err {:.2e}", qv.relative_error),
    );
    let dq = diff_quotient_stat(&p.with_stream(2), &[100, 10_000, 1_000_000], 10_000).unwrap();
    c.check(
        (dq.slope - SLOPE_TARGET).abs() <= SLOPE_TOL,
        format!("diff-quotient slope {:.4}", dq.slope),
    );
    c.finish();
}

#[test]
fn criterion_08_constraint_preservation() {
    let mut c = Criterion::new(8, "Friedmann residual and normalized match");
    let pot = PowerLawPotential::new(2.0, 0.03).unwrap();
    let raw = RawState::on_constraint(10.0, 0.0, &pot).unwrap();
    let traj = integrate_raw_system(&raw, &pot, None, 1e-3, 12.0).unwrap();
    let reached = traj.points.last().unwrap().tau;
    let worst = traj
        .points
        .iter()
        .filter(|p| p.tau <= TAU_WINDOW)
        .map(|p| p.residual.abs())
        .fold(0.0, f64::max);
    c.check(
        reached >= TAU_WINDOW && worst < RESIDUAL_MAX,
        format!("tau reached {reached:.2}, max |residual| {worst:.1e}"),
    );
    let xy: Vec<_> = traj
        .normalized(&pot)
        .unwrap()
        .into_iter()
        .step_by(50)
        .collect();
    let taus: Vec<f64> = xy.iter().map(|p| p.0).collect();
    let direct = integrate_normalized_system(0.0, 10.0, &pot, &taus, 1e-3).unwrap();
    let dev = xy
        .iter()
        .zip(&direct)
        .map(|(&(_, x, y), d)| (x - d.x).abs().max((y - d.y).abs()))
        .fold(0.0, f64::max);
    c.check(
        dev < MATCHED_TOL,
        format!("max |(X,Y) raw - decoupled| {dev:.1e}"),
    );
    c.finish();
}

fn closed_form_unit(lambda: f64) -> f64 {
    let ends = (6.0 + 2.0 * lambda).abs().max((6.0 - 2.0 * lambda).abs());
    if (lambda / 9.0).abs() < 1.0 {
        ends.max(3.0 + lambda * lambda / 9.0)
    } else {
        ends
    }
}

#[test]
fn criterion_09_lipschitz() {
    let mut c = Criterion::new(9, "Lipschitz constants and falsification");
    let l0 = local_lipschitz_constant(-1.0, 1.0, 0.0)
        .unwrap()
        .analytic_constant;
    let l9 = local_lipschitz_constant(-1.0, 1.0, 9.0)
        .unwrap()
        .analytic_constant;
    c.check(
        l0 == 6.0 && l9 == 24.0,
        format!("lambda=0 -> {l0}, lambda=9 -> {l9}"),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact = 0;
    let mut bounded = 0;
    for _ in 0..RANDOM_LAMBDAS {
        let lambda = rng.gen_range(-100.0..100.0);
        let r = local_lipschitz_constant(-1.0, 1.0, lambda).unwrap();
        let want = closed_form_unit(lambda);
        exact +=
            ((r.analytic_constant - want).abs() <= CLOSED_FORM_ULPS * f64::EPSILON * want) as usize;
        bounded += (r.sampled_constant <= r.analytic_constant) as usize;
    }
    c.check(
        exact == RANDOM_LAMBDAS,
        format!("{exact}/{RANDOM_LAMBDAS} closed-form matches"),
    );
    c.check(
        bounded == RANDOM_LAMBDAS,
        format!("{bounded}/{RANDOM_LAMBDAS} sampled <= analytic"),
    );
    let mut witnesses = 0;
    for e in 0..=FALSIFY_K_MAX_EXP {
        let k = 10f64.powi(e);
        let w = global_lipschitz_falsify(3.0, k).unwrap();
        witnesses += ((drift(w.x, 3.0) - drift(w.y, 3.0)).abs() > k * (w.x - w.y).abs()) as usize;
    }
    c.check(
        witnesses == FALSIFY_K_MAX_EXP as usize + 1,
        format!("{witnesses} verified witnesses for K = 1..1e{FALSIFY_K_MAX_EXP}"),
    );
    c.finish();
}

#[test]
fn criterion_10_x_ode_singularity() {
    let mut c = Criterion::new(10, "X-ODE reaches the singular boundary");
    let r = integrate_x_ode(0.5, 1.0, 1e-3, 100.0).unwrap();
    let last = r.trajectory.last().unwrap().1;
    c.check(
        r.termination == XTermination::BoundarySingularity
            && last >= X_SINGULAR
            && r.final_tau < 100.0,
        format!("{:?} at tau {:.4}, X = {last}", r.termination, r.final_tau),
    );
    let below = 1.0f64 - f64::EPSILON / 2.0;
    let errs = [1.0, -1.0]
        .iter()
        .all(|&x| x_rhs_derivative(x, 1.0).is_err());
    let oks = [below, -below]
        .iter()
        .all(|&x| x_rhs_derivative(x, 1.0).is_ok());
    c.check(
        errs && oks,
        format!("errors at |X| = 1: {errs}, finite just inside: {oks}"),
    );
    c.finish();
}

#[test]
fn criterion_11_determinism() {
    let mut c = Criterion::new(11, "byte-identical outputs for workers 1 and 8");
    let bin = env!("CARGO_BIN_EXE_explosion-lab");
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 6] = [
        &["feller", "--lambda", "1e3"],
        &["sweep", "--grid", "1e2:1e4:3", "--format", "csv"],
        &[
            "simulate",
            "--lambda",
            "10",
            "--paths",
            "500",
            "--tau-max",
            "50",
            "--seed",
            "42",
        ],
        &["lipschitz", "--interval", "-1", "1", "--lambda", "2"],
        &["xode", "--x0", "0.5", "--lambda", "1"],
        &["validate-noise", "--increments", "100000"],
    ];
    for args in runs {
        let mut outputs = Vec::new();
        for (i, workers) in ["1", "8", "1", "8"].iter().enumerate() {
            let out = dir.path().join(format!("{}-{i}", args[0]));
            let status = Command::new(bin)
                .args(args)
                .args(["--workers", workers, "--out", out.to_str().unwrap()])
                .env_remove("EXPLOSION_LAB_SEED")
                .status()
                .unwrap();
            assert!(status.success(), "{args:?}");
            outputs.push(std::fs::read(&out).unwrap());
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        c.check(same, format!("{} x4 identical: {same}", args[0]));
    }
    c.finish();
}

use explosion_lab::feller::{feller_test, ScaleSpeedConfig};
use explosion_lab::sim::noise::{diff_quotient_stat, increment_stats, quadratic_variation};
use explosion_lab::sim::path::euler_maruyama_step;
use explosion_lab::sim::{
    simulate_ensemble, simulate_path, wiener_increments, NoiseProcess, Outcome, PathConfig,
};

const WORKERS: usize = 8;

#[test]
fn increments_have_the_right_moments() {
    let p = NoiseProcess::new(2024, 1e-3).unwrap();
    let s = increment_stats(&p, 1_000_000).unwrap();
    assert!(s.mean_z_score < 5.0, "z = {}", s.mean_z_score);
    assert!(
        (s.variance_ratio - 1.0).abs() < 0.01,
        "ratio = {}",
        s.variance_ratio
    );
    let qv = quadratic_variation(&p.with_step(1e-6).unwrap(), 1.0).unwrap();
    assert!(qv.relative_error < 0.01);
    let dq = diff_quotient_stat(&p, &[100, 10_000, 1_000_000], 10_000).unwrap();
    assert!((dq.slope - 0.5).abs() < 0.01, "slope = {}", dq.slope);
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let p = NoiseProcess::new(7, 1e-2).unwrap();
    let a = wiener_increments(&p.with_stream(3), 100).unwrap();
    assert_eq!(a, wiener_increments(&p.with_stream(3), 100).unwrap());
    assert_ne!(a, wiener_increments(&p.with_stream(4), 100).unwrap());
    assert_ne!(
        a,
        wiener_increments(&NoiseProcess::new(8, 1e-2).unwrap().with_stream(3), 100).unwrap()
    );
}

#[test]
fn brownian_exit_time_matches_one_minus_y0_squared() {
    let p = NoiseProcess::new(11, 1e-4).unwrap();
    for &y0 in &[0.0, 0.5, -0.5] {
        let stats = simulate_ensemble(&PathConfig::brownian(y0), 10_000, &p, WORKERS).unwrap();
        assert_eq!(stats.exited, 10_000);
        let mean = stats.mean_exit_time.unwrap();
        let want = 1.0 - y0 * y0;
        assert!((mean - want).abs() < 0.05 * want, "y0={y0}: {mean}");
        assert!((mean - want).abs() < 4.0 * stats.exit_time_std_error.unwrap() + 0.02);
    }
}

#[test]
fn ensemble_is_worker_independent() {
    let cfg = PathConfig {
        tau_max: 5.0,
        ..PathConfig::new(3.0)
    };
    let p = NoiseProcess::new(99, 1e-4).unwrap();
    let a = simulate_ensemble(&cfg, 200, &p, 1).unwrap();
    let b = simulate_ensemble(&cfg, 200, &p, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.exit_times, b.exit_times);
    let traced = PathConfig {
        record_trajectory: true,
        ..cfg
    };
    let r1 = simulate_path(&traced, &p.with_stream(5)).unwrap();
    let r2 = simulate_path(&traced, &p.with_stream(5)).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn drift_at_lambda_10_sends_paths_left() {
    let cfg = PathConfig {
        tau_max: 50.0,
        ..PathConfig::new(10.0)
    };
    let stats =
        simulate_ensemble(&cfg, 10_000, &NoiseProcess::new(42, 1e-4).unwrap(), WORKERS).unwrap();
    assert!(stats.exit_fraction >= 0.999);
    assert!(stats.exit_left > 99 * stats.exit_right);
}

#[test]
fn exit_band_barely_moves_the_mean() {
    let p = NoiseProcess::new(5, 1e-4).unwrap();
    let means: Vec<f64> = [1e-4, 1e-6, 1e-8]
        .iter()
        .map(|&eps| {
            let cfg = PathConfig {
                exit_band: eps,
                tau_max: 50.0,
                ..PathConfig::new(10.0)
            };
            simulate_ensemble(&cfg, 2_000, &p, WORKERS)
                .unwrap()
                .mean_exit_time
                .unwrap()
        })
        .collect();
    for &m in &means[1..] {
        assert!((m - means[0]).abs() < 0.02 * means[0], "{means:?}");
    }
}

/// Mean exit time from coupled fine/coarse paths, coarse increments being
/// sums of consecutive fine ones.
fn coupled_means(lambda: f64, dtau: f64, paths: u64) -> (f64, f64, f64) {
    let bound = 1.0 - 1e-6;
    let exit = |incs: &mut dyn Iterator<Item = f64>, h: f64| -> f64 {
        let mut y = 0.0f64;
        let mut t = 0.0;
        for dw in incs {
            y = euler_maruyama_step(y, lambda, dw, h);
            t += h;
            if y.abs() >= bound {
                return t;
            }
        }
        panic!("path did not exit");
    };
    let mut diffs = Vec::with_capacity(paths as usize);
    let (mut fine_sum, mut coarse_sum) = (0.0, 0.0);
    for i in 0..paths {
        let fine: Vec<f64> = wiener_increments(
            &NoiseProcess::new(77, dtau).unwrap().with_stream(i),
            2_000_000,
        )
        .unwrap();
        let tf = exit(&mut fine.iter().copied(), dtau);
        let tc = exit(&mut fine.chunks(2).map(|c| c[0] + c[1]), 2.0 * dtau);
        fine_sum += tf;
        coarse_sum += tc;
        diffs.push(tc - tf);
    }
    let n = paths as f64;
    let mean_diff = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (fine_sum / n, coarse_sum / n, sd / n.sqrt())
}

#[test]
fn halving_dtau_shifts_mean_by_discretization_order() {
    let dtau = 1e-4;
    let (fine, coarse, se) = coupled_means(1.0, dtau, 400);
    // discrete monitoring overshoot shrinks like √dτ; allow one such unit
    let bias_scale = (2.0 * dtau).sqrt() - dtau.sqrt();
    assert!(
        (coarse - fine).abs() < 3.0 * se + 2.0 * bias_scale * fine.max(1.0),
        "{fine} {coarse} {se}"
    );
}

#[test]
fn exit_fraction_grows_with_horizon_where_feller_says_explode() {
    let p = NoiseProcess::new(3, 1e-4).unwrap();
    for &lambda in &[0.0, 1.0, 10.0] {
        assert_eq!(
            feller_test(&ScaleSpeedConfig::new(lambda))
                .unwrap()
                .explodes_wp1,
            Some(true)
        );
        let fracs: Vec<f64> = [0.2, 2.0, 20.0]
            .iter()
            .map(|&tau_max| {
                let cfg = PathConfig {
                    tau_max,
                    ..PathConfig::new(lambda)
                };
                simulate_ensemble(&cfg, 1_000, &p, WORKERS)
                    .unwrap()
                    .exit_fraction
            })
            .collect();
        assert!(
            fracs.windows(2).all(|w| w[1] >= w[0]),
            "λ={lambda}: {fracs:?}"
        );
        assert!(fracs[2] >= 0.999, "λ={lambda}: {fracs:?}");
    }
}

#[test]
fn single_path_has_no_standard_error() {
    let stats = simulate_ensemble(
        &PathConfig::brownian(0.0),
        1,
        &NoiseProcess::new(1, 1e-4).unwrap(),
        1,
    )
    .unwrap();
    assert_eq!(stats.n_paths, 1);
    assert!(stats.mean_exit_time.is_some());
    assert!(stats.exit_time_std_error.is_none());
}

#[test]
fn start_inside_exit_band_is_rejected() {
    let cfg = PathConfig {
        y0: 0.9999999,
        ..PathConfig::new(1.0)
    };
    assert!(simulate_path(&cfg, &NoiseProcess::new(0, 1e-4).unwrap()).is_err());
    let ok = simulate_path(
        &PathConfig::brownian(0.0),
        &NoiseProcess::new(0, 1e-4).unwrap(),
    )
    .unwrap();
    assert!(matches!(ok.outcome, Outcome::Exited { .. }));
}

//! Statistical behavior of the simulator against the exact-numerics oracles:
//! stationarity, finite-horizon variance growth, importance-sampling
//! unbiasedness, martingale and fluctuation diagnostics, and the
//! normality battery.

use treessep::harness::{clt_diagnostic, estimate_moments, resolve, run_replicas, ExperimentConfig};
use treessep::potential::{occupation_variance, resolvent_on_ball, sigma_sq};
use treessep::rate::ScalingSchedule;
use treessep::ssep::{
    self, build_tilt, edge_fluctuation_diag, martingale_path, replica_rng, sample_initial_from,
};
use treessep::tree::build_ball;

fn config(json: &str) -> ExperimentConfig {
    serde_json::from_str(json).unwrap()
}

#[test]
fn stationarity_keeps_the_mean_centered() {
    let cfg = config(
        r#"{ "d": 2, "p": 0.5, "t": 4.0, "targets": ["o", "1"], "replicas": 3000,
             "seed": 101, "radius": 8, "radius_check": false }"#,
    );
    let report = estimate_moments(&cfg).unwrap();
    for row in report.reports.iter().filter(|r| r.label.starts_with("mean_xi")) {
        assert!(
            row.pass.unwrap(),
            "stationary mean drifted: {row:?}"
        );
    }
}

#[test]
fn variance_growth_follows_the_quadrature_curve() {
    // The exact finite-horizon curve rises toward sigma^2; the simulator
    // tracks it within 3 SE at each horizon.
    let s2 = sigma_sq::<f64>(2, 0.5).unwrap();
    let mut last_oracle = 0.0;
    for (t, n, radius) in [(10.0, 400u32, 10u32), (50.0, 400, 12), (200.0, 150, 13)] {
        let oracle = occupation_variance::<f64>(2, 0.5, t, 1e-8).unwrap() / t;
        assert!(oracle > last_oracle && oracle < s2);
        last_oracle = oracle;
        let cfg = config(&format!(
            r#"{{ "d": 2, "p": 0.5, "t": {t}, "targets": ["o"], "replicas": {n},
                 "seed": 103, "radius": {radius}, "radius_check": false }}"#
        ));
        let report = estimate_moments(&cfg).unwrap();
        let var_row = report
            .reports
            .iter()
            .find(|r| r.label.starts_with("var_xi_over_t"))
            .unwrap();
        assert!(
            var_row.pass.unwrap(),
            "t={t}: simulator variance off the curve: {var_row:?}"
        );
    }
}

#[test]
fn importance_sampling_is_unbiased_on_overlap_events() {
    // P(xi_t >= 0) estimated by direct Monte Carlo and by a genuinely
    // tilted run reweighted with exp(-log_weight) must agree.
    let d = 2u32;
    let p = 0.5f64;
    let t = 10.0f64;
    let cfg = config(
        r#"{ "d": 2, "p": 0.5, "t": 10.0, "targets": ["o"], "replicas": 1500,
             "seed": 107, "radius": 12, "radius_check": false }"#,
    );
    let exp = resolve(&cfg, None).unwrap();
    let direct = run_replicas(&exp, None, 1500).unwrap();
    let n = direct.xi.len() as f64;
    let p_direct = direct.xi.iter().filter(|row| row[0] >= 0.0).count() as f64 / n;
    let se_direct = (p_direct * (1.0 - p_direct) / n).sqrt();

    let schedule = ScalingSchedule::new(0.75).unwrap();
    let field = resolvent_on_ball(&exp.ball, 0, t, 1e-8).unwrap();
    let tilt = build_tilt(&exp.ball, &[0.6], &[field], &schedule, t).unwrap();
    let tilted = run_replicas(&exp, Some(&tilt), 1500).unwrap();
    let samples: Vec<f64> = tilted
        .xi
        .iter()
        .zip(&tilted.log_weights)
        .map(|(row, lw)| if row[0] >= 0.0 { (-lw).exp() } else { 0.0 })
        .collect();
    let p_tilted = samples.iter().sum::<f64>() / n;
    let se_tilted = {
        let m = p_tilted;
        (samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n * (n - 1.0))).sqrt()
    };
    let joint = (se_direct.powi(2) + se_tilted.powi(2)).sqrt();
    assert!(
        (p_direct - p_tilted).abs() <= 3.0 * joint,
        "direct {p_direct:.4} +- {se_direct:.4} vs tilted {p_tilted:.4} +- {se_tilted:.4} (d={d}, p={p})"
    );
    // particle-hole symmetry at p = 1/2 puts the probability near 1/2
    assert!((p_direct - 0.5).abs() <= 3.0 * se_direct + 0.02);
}

#[test]
fn martingale_diagnostic_has_zero_mean() {
    let ball = build_ball(2, 8).unwrap();
    let t = 5.0;
    let p = 0.5;
    let field = resolvent_on_ball(&ball, 0, t, 1e-9).unwrap();
    let n = 4000u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..n {
        let mut init_rng = replica_rng(211, r, ssep::PHASE_INIT);
        let initial = sample_initial_from(&ball, p, &mut init_rng).unwrap();
        let mut dyn_rng = replica_rng(211, r, ssep::PHASE_DYNAMICS);
        let out = ssep::simulate(&ball, &initial, t, &[0], p, &mut dyn_rng, None, true).unwrap();
        let traj = ssep::Trajectory {
            initial,
            events: out.events.unwrap(),
            final_config: out.final_config,
            horizon: t,
        };
        let m = martingale_path(&ball, &traj, &field, 0, p, t);
        sum += m.final_value;
        sum_sq += m.final_value * m.final_value;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let se = ((sum_sq / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt();
    assert!(
        mean.abs() <= 3.0 * se,
        "martingale mean {mean:.5} versus standard error {se:.5}"
    );
}

#[test]
fn edge_fluctuation_diagnostic_tightens_with_the_horizon() {
    // Replica mean is centered, and the time average contracts as t grows.
    let p = 0.5;
    let mut rms = Vec::new();
    for (t, radius, n) in [(10.0, 10u32, 60u64), (100.0, 10, 60)] {
        let ball = build_ball(2, radius).unwrap();
        let field = resolvent_on_ball(&ball, 0, t, 1e-9).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for r in 0..n {
            let mut init_rng = replica_rng(223, r, ssep::PHASE_INIT);
            let initial = sample_initial_from(&ball, p, &mut init_rng).unwrap();
            let mut dyn_rng = replica_rng(223, r, ssep::PHASE_DYNAMICS);
            let out = ssep::simulate(&ball, &initial, t, &[], p, &mut dyn_rng, None, true).unwrap();
            let traj = ssep::Trajectory {
                initial,
                events: out.events.unwrap(),
                final_config: out.final_config,
                horizon: t,
            };
            let phi = edge_fluctuation_diag(&ball, &traj, &field, &field, p);
            sum += phi;
            sum_sq += phi * phi;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum_sq / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt();
        assert!(mean.abs() <= 4.0 * se, "t={t}: mean {mean:.5} vs se {se:.5}");
        rms.push((sum_sq / nf).sqrt());
    }
    assert!(
        rms[1] < rms[0],
        "replica RMS should shrink with t: {rms:?}"
    );
}

#[test]
fn half_space_rate_is_bounded_below_by_the_rate_function() {
    // Two targets, vector-valued deviation: the importance-sampled rate of
    // the supporting half space must sit at or above the rate-function
    // infimum over that half space (which the optimizer attains at u),
    // within the finite-horizon band.
    use treessep::potential::covariance_matrix;
    use treessep::rate::rate_function;
    use treessep::tree::VertexId;

    let targets = [VertexId::origin(), VertexId::parse(2, "0").unwrap()];
    let gamma = covariance_matrix::<f64>(2, 0.5, &targets).unwrap();
    // u = Gamma c for c = (1, 1/2): comfortably inside the range.
    let u = gamma.apply(&[1.0, 0.5]);
    let inf_over_half_space = rate_function(&u, &gamma).unwrap().value;
    let cfg = config(&format!(
        r#"{{ "d": 2, "p": 0.5, "t": 50.0, "targets": ["o", "0"],
             "u": [{}, {}], "alpha": 0.75, "replicas": 1200, "seed": 401,
             "radius": 12, "radius_check": false }}"#,
        u[0], u[1]
    ));
    let report = treessep::harness::estimate_tail(&cfg).unwrap();
    let rate = report.rate.as_ref().unwrap();
    assert!(!report.unreliable, "ESS {:.0}", report.effective_sample_size);
    assert!(
        rate.estimate >= 0.65 * inf_over_half_space,
        "empirical rate {:.4} undercuts the rate-function bound {:.4}",
        rate.estimate,
        inf_over_half_space
    );
}

#[test]
fn normality_battery_at_long_horizons() {
    let cfg = config(
        r#"{ "d": 2, "p": 0.5, "t": 100.0, "targets": ["o"], "replicas": 10000,
             "seed": 301, "radius": 10, "radius_check": false }"#,
    );
    let report = clt_diagnostic(&cfg).unwrap();
    assert!(
        report.skewness.abs() <= 0.1,
        "skewness {:.4}",
        report.skewness
    );
    assert!(
        report.excess_kurtosis.abs() <= 0.2,
        "excess kurtosis {:.4}",
        report.excess_kurtosis
    );
    assert!(
        report.median.abs() <= 3.0 * report.median_se,
        "median {:.4} vs se {:.4}",
        report.median,
        report.median_se
    );
    assert!(report.p_value > 1e-4, "normality p-value {:.6}", report.p_value);
}

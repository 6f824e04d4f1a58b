//! Monte Carlo orchestration: replica fan-out with per-replica seeded
//! streams, occupation-moment and tail estimators with confidence
//! intervals, and the experiment configuration surface.
//!
//! Truncation policy: on a tree the ball volume grows exponentially while
//! boundary influence on centered statistics must travel back against the
//! outward drift, so the bias of the closed radius-R ball scales like
//! `t^2 / (2 |B_R|)` rather than anything diffusive. The default radius is
//! the smallest one whose relative bias bound sits under the profile's
//! budget, and `moments` / `tail` runs re-verify with an R + 2 control run
//! (volume factor d^2) before reporting.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    covariance_matrix, occupation_covariance, occupation_variance, resolvent_on_ball,
};
use crate::rate::{rate_function, tilt_for_target, ScalingSchedule};
use crate::ssep::{self, build_tilt, replica_rng, Tilt};
use crate::tree::{ball_size, build_ball, distance, Ball, VertexId};

/// Named tolerance budgets for estimator pass/fail decisions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToleranceProfile {
    /// z-score for statistical comparisons.
    pub z: f64,
    /// Relative band for covariance-vs-limit comparisons.
    pub covariance_rel: f64,
    /// Relative band for tilted-mean targeting.
    pub tilt_mean_rel: f64,
    /// Relative band for the empirical moderate-deviation rate.
    pub rate_rel: f64,
    /// Truncation bias budget driving the default ball radius.
    pub radius_bias: f64,
    /// Absolute effective-sample-size floor below which a tail estimate is
    /// flagged unreliable.
    pub ess_floor: f64,
}

impl ToleranceProfile {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "strict" => Ok(ToleranceProfile {
                z: 3.0,
                covariance_rel: 0.25,
                tilt_mean_rel: 0.15,
                rate_rel: 0.30,
                radius_bias: 1e-3,
                ess_floor: 50.0,
            }),
            "ci" => Ok(ToleranceProfile {
                z: 3.0,
                covariance_rel: 0.35,
                tilt_mean_rel: 0.25,
                rate_rel: 0.40,
                radius_bias: 5e-3,
                ess_floor: 25.0,
            }),
            other => Err(Error::Config(format!(
                "unknown tolerance profile {other:?} (expected \"strict\" or \"ci\")"
            ))),
        }
    }
}

fn default_targets() -> Vec<String> {
    vec!["o".into()]
}

fn default_replicas() -> u32 {
    1000
}

fn default_seed() -> u64 {
    1
}

fn default_alpha() -> f64 {
    0.75
}

fn default_radius_tolerance() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

fn default_profile() -> String {
    "strict".into()
}

fn scalar_or_vec<'de, D>(de: D) -> std::result::Result<Option<Vec<f64>>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

/// Experiment description; JSON keys match the field names exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: u32,
    pub p: f64,
    #[serde(default = "default_targets")]
    pub targets: Vec<String>,
    pub t: f64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Explicit tilt coefficients (one per target).
    #[serde(default)]
    pub tilt: Option<Vec<f64>>,
    /// Moderate-deviation target; scalar or one entry per target.
    #[serde(default, deserialize_with = "scalar_or_vec")]
    pub u: Option<Vec<f64>>,
    /// Explicit ball radius; derived from the bias budget when absent.
    #[serde(default)]
    pub radius: Option<u32>,
    #[serde(default = "default_radius_tolerance")]
    pub radius_tolerance: f64,
    /// Re-run at radius + 2 and require statistical agreement.
    #[serde(default = "default_true")]
    pub radius_check: bool,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub events_output: Option<String>,
    #[serde(default = "default_profile")]
    pub tolerance_profile: String,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config("d must be >= 2".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config("p must lie strictly inside (0, 1)".into()));
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie strictly inside (1/2, 1)".into()));
        }
        if self.replicas < 1 {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        if self.t < 0.0 {
            return Err(Error::Config("t must be >= 0".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("need at least one target vertex".into()));
        }
        if let Some(tilt) = &self.tilt {
            if tilt.len() != self.targets.len() {
                return Err(Error::Config(format!(
                    "{} tilt coefficients for {} targets",
                    tilt.len(),
                    self.targets.len()
                )));
            }
        }
        if let Some(u) = &self.u {
            if u.len() != self.targets.len() {
                return Err(Error::Config(format!(
                    "target vector has {} entries for {} targets",
                    u.len(),
                    self.targets.len()
                )));
            }
        }
        ToleranceProfile::by_name(&self.tolerance_profile)?;
        Ok(())
    }

    pub fn profile(&self) -> ToleranceProfile {
        ToleranceProfile::by_name(&self.tolerance_profile).expect("validated profile")
    }

    pub fn schedule(&self) -> Result<ScalingSchedule> {
        ScalingSchedule::new(self.alpha)
    }

    pub fn parse_targets(&self) -> Result<Vec<VertexId>> {
        self.targets
            .iter()
            .map(|s| VertexId::parse(self.d, s))
            .collect()
    }
}

/// Smallest radius whose truncation-bias bound `t / (2 g0 |B_R|)` fits the
/// budget; never below 6.
pub fn default_radius(d: u32, t: f64, bias_tol: f64) -> Result<u32> {
    let g0 = crate::potential::green_integral::<f64>(d, 0, 1e-9)?;
    let needed = (t.max(1.0) / (2.0 * g0 * bias_tol)).ceil() as u64;
    let mut r = 6u32;
    while ball_size(d, r) < needed {
        r += 1;
        if r > 36 {
            return Err(Error::Config(format!(
                "bias budget {bias_tol} needs more than {} vertices",
                ball_size(d, 36)
            )));
        }
    }
    Ok(r)
}

/// A resolved experiment: enumerated ball and dense target indices.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub profile: ToleranceProfile,
    pub ball: Ball,
    pub target_indices: Vec<usize>,
    pub target_vertices: Vec<VertexId>,
}

/// Resolve a configuration, optionally overriding the radius (used by the
/// radius-doubling control run).
pub fn resolve(config: &ExperimentConfig, radius_override: Option<u32>) -> Result<Experiment> {
    config.validate()?;
    let profile = config.profile();
    let radius = match radius_override.or(config.radius) {
        Some(r) => r,
        None => default_radius(config.d, config.t, config.radius_tolerance.min(profile.radius_bias))?,
    };
    let ball = build_ball(config.d, radius)?;
    let target_vertices = config.parse_targets()?;
    let mut target_indices = Vec::with_capacity(target_vertices.len());
    for v in &target_vertices {
        match ball.index_of(v) {
            Some(i) => target_indices.push(i),
            None => {
                return Err(Error::Config(format!(
                    "target {v} lies outside the radius-{radius} ball"
                )))
            }
        }
    }
    Ok(Experiment {
        config: config.clone(),
        profile,
        ball,
        target_indices,
        target_vertices,
    })
}

/// Raw per-replica outcomes, ordered by replica index regardless of the
/// worker schedule.
pub struct ReplicaSet {
    /// `xi[r][j]`: centered occupation time of target `j` in replica `r`.
    pub xi: Vec<Vec<f64>>,
    pub log_weights: Vec<f64>,
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Run `n` independent replicas from fresh product-measure initial states.
pub fn run_replicas(exp: &Experiment, tilt: Option<&Tilt>, n: u32) -> Result<ReplicaSet> {
    let cfg = &exp.config;
    let ball = &exp.ball;
    let targets = &exp.target_indices;
    let outcomes: Vec<(Vec<f64>, f64)> = with_pool(cfg.threads, || {
        (0..n)
            .into_par_iter()
            .map(|r| -> Result<(Vec<f64>, f64)> {
                let mut init_rng = replica_rng(cfg.seed, u64::from(r), ssep::PHASE_INIT);
                let initial = ssep::sample_initial_from(ball, cfg.p, &mut init_rng)?;
                let mut dyn_rng = replica_rng(cfg.seed, u64::from(r), ssep::PHASE_DYNAMICS);
                let out = ssep::simulate(
                    ball, &initial, cfg.t, targets, cfg.p, &mut dyn_rng, tilt, false,
                )?;
                Ok((out.ledger.xi_vector(), out.ledger.log_weight))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut xi = Vec::with_capacity(outcomes.len());
    let mut log_weights = Vec::with_capacity(outcomes.len());
    for (x, w) in outcomes {
        xi.push(x);
        log_weights.push(w);
    }
    Ok(ReplicaSet { xi, log_weights })
}

/// One labeled estimate with its uncertainty and optional comparison.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub label: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub replicas: u32,
    pub z: f64,
    pub target: Option<f64>,
    pub pass: Option<bool>,
}

impl EstimateReport {
    fn against_band(
        label: impl Into<String>,
        estimate: f64,
        se: f64,
        n: u32,
        z: f64,
        target: f64,
        band: f64,
    ) -> Self {
        EstimateReport {
            label: label.into(),
            estimate,
            standard_error: se,
            replicas: n,
            z,
            target: Some(target),
            pass: Some((estimate - target).abs() <= band),
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance with the asymptotic standard error of the variance
/// estimator, `sqrt((m4 - m2^2) / n)`.
fn variance_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

fn covariance_and_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let c = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n - 1.0);
    let m22 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| ((x - mx) * (y - my) - c).powi(2))
        .sum::<f64>()
        / n;
    (c, (m22 / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusCheck {
    pub base_radius: u32,
    pub control_radius: u32,
    pub control_replicas: u32,
    pub max_z: f64,
    /// Familywise threshold: the profile z-level Bonferroni-adjusted for
    /// the number of compared rows.
    pub z_threshold: f64,
    pub pass: bool,
}

/// Complementary normal tail `P(Z > x)` via the Abramowitz-Stegun 7.1.26
/// polynomial (absolute error ~1e-7).
fn normal_tail(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erfc = poly * (-z * z).exp();
    let tail = 0.5 * erfc;
    if x >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Two-sided z threshold at familywise level `alpha` across `n` comparisons
/// (Bonferroni), by bisection on the normal tail.
fn familywise_z(alpha: f64, n: usize) -> f64 {
    let per_row = (alpha / (2.0 * n as f64)).max(1e-16);
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if normal_tail(mid) > per_row {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentsReport {
    pub radius: u32,
    pub reports: Vec<EstimateReport>,
    pub radius_check: Option<RadiusCheck>,
    pub pass: bool,
}

fn moment_estimates(exp: &Experiment, set: &ReplicaSet) -> Result<Vec<EstimateReport>> {
    let cfg = &exp.config;
    let profile = exp.profile;
    let n = set.xi.len() as u32;
    let m = exp.target_indices.len();
    let t = cfg.t;
    let mut reports = Vec::new();
    let gamma = covariance_matrix::<f64>(cfg.d, cfg.p, &exp.target_vertices)?;
    for j in 0..m {
        let series: Vec<f64> = set.xi.iter().map(|row| row[j]).collect();
        let (mean, mean_se) = mean_and_se(&series);
        reports.push(EstimateReport {
            label: format!("mean_xi[{}]", exp.target_vertices[j]),
            estimate: mean,
            standard_error: mean_se,
            replicas: n,
            z: profile.z,
            target: Some(0.0),
            pass: Some(mean.abs() <= profile.z * mean_se),
        });
        let (var, var_se) = variance_and_se(&series);
        let oracle = occupation_variance::<f64>(cfg.d, cfg.p, t, 1e-8)?;
        reports.push(EstimateReport::against_band(
            format!("var_xi_over_t[{}]", exp.target_vertices[j]),
            var / t,
            var_se / t,
            n,
            profile.z,
            oracle / t,
            profile.z * var_se / t,
        ));
    }
    for j in 0..m {
        for k in (j + 1)..m {
            let xs: Vec<f64> = set.xi.iter().map(|row| row[j]).collect();
            let ys: Vec<f64> = set.xi.iter().map(|row| row[k]).collect();
            let (cov, cov_se) = covariance_and_se(&xs, &ys);
            let dist = distance(&exp.target_vertices[j], &exp.target_vertices[k]);
            let finite = occupation_covariance::<f64>(cfg.d, cfg.p, t, dist, 1e-8)?;
            reports.push(EstimateReport::against_band(
                format!(
                    "cov_xi_over_t[{},{}]",
                    exp.target_vertices[j], exp.target_vertices[k]
                ),
                cov / t,
                cov_se / t,
                n,
                profile.z,
                finite / t,
                profile.z * cov_se / t,
            ));
            let limit = gamma.entry(j, k);
            reports.push(EstimateReport::against_band(
                format!(
                    "cov_vs_limit[{},{}]",
                    exp.target_vertices[j], exp.target_vertices[k]
                ),
                cov / t,
                cov_se / t,
                n,
                profile.z,
                limit,
                profile.covariance_rel * limit,
            ));
        }
    }
    Ok(reports)
}

fn radius_control(
    exp: &Experiment,
    tilt_spec: Option<(&[f64], &ScalingSchedule)>,
    main_reports: &[EstimateReport],
    compute: impl Fn(&Experiment, &ReplicaSet) -> Result<Vec<EstimateReport>>,
) -> Result<RadiusCheck> {
    let control_radius = exp.ball.radius() + 2;
    let control_replicas = (exp.config.replicas / 8).max(200);
    let mut control_cfg = exp.config.clone();
    control_cfg.replicas = control_replicas;
    let control_exp = resolve(&control_cfg, Some(control_radius))?;
    let tilt = match tilt_spec {
        None => None,
        Some((c, schedule)) => {
            let fields = control_exp
                .target_indices
                .iter()
                .map(|&x| resolvent_on_ball(&control_exp.ball, x, control_cfg.t, 1e-8))
                .collect::<Result<Vec<_>>>()?;
            Some(build_tilt(
                &control_exp.ball,
                c,
                &fields,
                schedule,
                control_cfg.t,
            )?)
        }
    };
    let control_set = run_replicas(&control_exp, tilt.as_ref(), control_replicas)?;
    let control_reports = compute(&control_exp, &control_set)?;
    let mut max_z = 0.0f64;
    let mut rows = 0usize;
    for (a, b) in main_reports.iter().zip(&control_reports) {
        // cov_vs_limit rows duplicate the cov estimates against a different
        // target; comparing them twice would double-count.
        if a.label.starts_with("cov_vs_limit") {
            continue;
        }
        let joint = (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt();
        if joint > 0.0 {
            max_z = max_z.max((a.estimate - b.estimate).abs() / joint);
            rows += 1;
        }
    }
    // Familywise band: the profile z-level spread over all compared rows.
    let alpha = 2.0 * normal_tail(exp.profile.z);
    let z_threshold = familywise_z(alpha, rows.max(1));
    Ok(RadiusCheck {
        base_radius: exp.ball.radius(),
        control_radius,
        control_replicas,
        max_z,
        z_threshold,
        pass: max_z <= z_threshold,
    })
}

/// Occupation-moment estimation: per-target means and variances, per-pair
/// covariances, compared against the exact finite-horizon quadrature values
/// and the limiting covariance matrix.
pub fn estimate_moments(config: &ExperimentConfig) -> Result<MomentsReport> {
    if config.replicas < 2 {
        return Err(Error::Config("moment estimation needs replicas >= 2".into()));
    }
    let exp = resolve(config, None)?;
    let set = run_replicas(&exp, None, config.replicas)?;
    let reports = moment_estimates(&exp, &set)?;
    let radius_check = if config.radius_check {
        Some(radius_control(&exp, None, &reports, moment_estimates)?)
    } else {
        None
    };
    let pass = reports.iter().all(|r| r.pass.unwrap_or(true))
        && radius_check.as_ref().map_or(true, |c| c.pass);
    Ok(MomentsReport {
        radius: exp.ball.radius(),
        reports,
        radius_check,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub radius: u32,
    /// Tilt coefficients actually applied.
    pub tilt: Vec<f64>,
    /// Tilted-mean targeting reports, one per target.
    pub tilted_mean: Vec<EstimateReport>,
    /// Tail probability estimate (present when a target `u` was given).
    pub probability: Option<EstimateReport>,
    /// Empirical rate `-(t / a_t^2) log P` against the rate function.
    pub rate: Option<EstimateReport>,
    pub effective_sample_size: f64,
    pub unreliable: bool,
    pub radius_check: Option<RadiusCheck>,
    pub pass: bool,
}

/// Importance-sampled tail estimation. With `u` set, the tilt defaults to
/// the rate-function optimizer `Gamma phi = u` and the estimator weights
/// each tilted replica by `exp(-log_weight)`; with only `tilt` set, the run
/// reports tilted-mean targeting alone.
pub fn estimate_tail(config: &ExperimentConfig) -> Result<TailReport> {
    if config.replicas < 2 {
        return Err(Error::Config("tail estimation needs replicas >= 2".into()));
    }
    let exp = resolve(config, None)?;
    let cfg = &exp.config;
    let profile = exp.profile;
    let schedule = cfg.schedule()?;
    let gamma = covariance_matrix::<f64>(cfg.d, cfg.p, &exp.target_vertices)?;
    let tilt_coeffs: Vec<f64> = match (&cfg.tilt, &cfg.u) {
        (Some(c), _) => c.clone(),
        (None, Some(u)) => tilt_for_target(u, &gamma)?,
        (None, None) => {
            return Err(Error::Config(
                "tail estimation needs either a target u or tilt coefficients".into(),
            ))
        }
    };
    let fields = exp
        .target_indices
        .iter()
        .map(|&x| resolvent_on_ball(&exp.ball, x, cfg.t, 1e-8))
        .collect::<Result<Vec<_>>>()?;
    let tilt = build_tilt(&exp.ball, &tilt_coeffs, &fields, &schedule, cfg.t)?;
    let set = run_replicas(&exp, Some(&tilt), cfg.replicas)?;
    let n = set.xi.len() as u32;
    let a_t = schedule.at(cfg.t);

    // Tilted-mean targeting: E_tilted[Lambda_t / a_t] should approach
    // Gamma c.
    let gamma_c = gamma.apply(&tilt_coeffs);
    let compute_tilted_mean = |exp: &Experiment, set: &ReplicaSet| -> Result<Vec<EstimateReport>> {
        let mut out = Vec::new();
        for j in 0..exp.target_indices.len() {
            let series: Vec<f64> = set.xi.iter().map(|row| row[j] / a_t).collect();
            let (mean, se) = mean_and_se(&series);
            out.push(EstimateReport::against_band(
                format!("tilted_mean_over_a[{}]", exp.target_vertices[j]),
                mean,
                se,
                set.xi.len() as u32,
                profile.z,
                gamma_c[j],
                profile.tilt_mean_rel * gamma_c[j].abs(),
            ));
        }
        Ok(out)
    };
    let tilted_mean = compute_tilted_mean(&exp, &set)?;

    let weights: Vec<f64> = set.log_weights.iter().map(|lw| (-lw).exp()).collect();
    let mut ess = f64::from(n);
    let mut unreliable = false;

    let (probability, rate_report) = match &cfg.u {
        None => (None, None),
        Some(u) => {
            // Event: the supporting half space of the target point,
            // {phi . (Lambda/a) >= phi . u}; in one dimension this is the
            // upper tail {xi/a >= u}.
            let phi = tilt_for_target(u, &gamma)?;
            let threshold: f64 = phi.iter().zip(u).map(|(&a, &b)| a * b).sum();
            let samples: Vec<f64> = set
                .xi
                .iter()
                .zip(&weights)
                .map(|(row, &w)| {
                    let score: f64 = phi
                        .iter()
                        .zip(row)
                        .map(|(&pj, &xj)| pj * xj / a_t)
                        .sum();
                    if score >= threshold {
                        w
                    } else {
                        0.0
                    }
                })
                .collect();
            // Effective sample size of the estimator's own weights: only
            // on-event samples carry information about the tail, and their
            // weights are bounded, unlike the backward off-event weights.
            let sum_w: f64 = samples.iter().sum();
            let sum_w2: f64 = samples.iter().map(|w| w * w).sum();
            ess = if sum_w2 > 0.0 { sum_w * sum_w / sum_w2 } else { 0.0 };
            unreliable = ess < profile.ess_floor.min(f64::from(n) * 0.5);
            let (p_hat, p_se) = mean_and_se(&samples);
            let prob = EstimateReport {
                label: "tail_probability".into(),
                estimate: p_hat,
                standard_error: p_se,
                replicas: n,
                z: profile.z,
                target: None,
                pass: None,
            };
            let rate_value = rate_function(u, &gamma)?.value;
            let rate_report = if p_hat > 0.0 {
                let scale = schedule.rate_scale(cfg.t);
                let empirical = -scale * p_hat.ln();
                let se = scale * p_se / p_hat;
                Some(EstimateReport::against_band(
                    "empirical_rate",
                    empirical,
                    se,
                    n,
                    profile.z,
                    rate_value,
                    profile.rate_rel * rate_value,
                ))
            } else {
                None
            };
            (Some(prob), rate_report)
        }
    };

    let radius_check = if cfg.radius_check {
        Some(radius_control(
            &exp,
            Some((&tilt_coeffs, &schedule)),
            &tilted_mean,
            compute_tilted_mean,
        )?)
    } else {
        None
    };

    let pass = tilted_mean.iter().all(|r| r.pass.unwrap_or(true))
        && rate_report.as_ref().map_or(true, |r| r.pass.unwrap_or(true))
        && !unreliable
        && radius_check.as_ref().map_or(true, |c| c.pass);
    Ok(TailReport {
        radius: exp.ball.radius(),
        tilt: tilt_coeffs,
        tilted_mean,
        probability,
        rate: rate_report,
        effective_sample_size: ess,
        unreliable,
        radius_check,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub radius: u32,
    pub replicas: u32,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Jarque-Bera normality p-value.
    pub p_value: f64,
    pub median: f64,
    pub median_se: f64,
    pub standardized_variance: f64,
}

/// Normality battery on the replica sample of `xi_t / sqrt(t)`.
pub fn clt_diagnostic(config: &ExperimentConfig) -> Result<CltReport> {
    if config.replicas < 1000 {
        return Err(Error::Config(
            "clt diagnostics need at least 1000 replicas".into(),
        ));
    }
    let exp = resolve(config, None)?;
    let set = run_replicas(&exp, None, config.replicas)?;
    let mut series: Vec<f64> = set.xi.iter().map(|row| row[0] / config.t.sqrt()).collect();
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let m2 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = series.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = series.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jb = n * (skewness * skewness / 6.0 + excess_kurtosis * excess_kurtosis / 24.0);
    // Chi-squared with 2 degrees of freedom has the closed-form tail.
    let p_value = (-jb / 2.0).exp();
    series.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if series.len() % 2 == 1 {
        series[series.len() / 2]
    } else {
        0.5 * (series[series.len() / 2 - 1] + series[series.len() / 2])
    };
    // Asymptotic SE of the sample median for a normal sample.
    let median_se = (std::f64::consts::PI * m2 / (2.0 * n)).sqrt();
    Ok(CltReport {
        radius: exp.ball.radius(),
        replicas: config.replicas,
        skewness,
        excess_kurtosis,
        p_value,
        median,
        median_se,
        standardized_variance: m2,
    })
}

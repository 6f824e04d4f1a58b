//! Fast exact-oracle suite behind the `selftest` subcommand: every check
//! compares two independent computational routes and must hold on any
//! healthy checkout.

use treessep::dual::{verify_duality, DualityParams};
use treessep::exact;
use treessep::kernel;
use treessep::potential;
use treessep::rate;
use treessep::ssep;
use treessep::tree::build_ball;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

pub fn run_all() -> Vec<Check> {
    let mut checks = Vec::new();

    // Green quadrature against the geometric closed form.
    let mut worst = 0.0f64;
    for d in [2u32, 3] {
        let table = potential::green_table::<f64>(d, 2, 1e-10).unwrap();
        for k in 0..=2usize {
            worst = worst.max((table.at(k) - potential::green_closed_form::<f64>(d, k)).abs());
        }
    }
    checks.push(check(
        "green-closed-form",
        worst < 1e-8,
        format!("max |quadrature - closed form| = {worst:.3e}"),
    ));

    // Kernel bound domination.
    let mut ok = true;
    let mut margin = f64::INFINITY;
    for d in [2u32, 3] {
        for &t in &[0.5, 2.0] {
            let kr = kernel::radial_distribution::<f64>(d, t, None, 1e-12).unwrap();
            for k in 0..=5usize {
                let gap = kernel::heat_bound::<f64>(d, t, k) + 1e-10 - kr.kernel_at(k);
                ok &= gap >= 0.0;
                margin = margin.min(gap);
            }
        }
    }
    checks.push(check(
        "heat-kernel-bound",
        ok,
        format!("min bound margin = {margin:.3e}"),
    ));

    // Height-chain MGF: closed form vs uniformized chain.
    let closed = kernel::height_mgf::<f64>(2, 0.5, 0.3);
    let chain = kernel::height_mgf_uniformized::<f64>(2, 0.5, 0.3, 1e-10).unwrap();
    checks.push(check(
        "height-mgf",
        (closed - chain).abs() < 1e-8,
        format!("|closed - chain| = {:.3e}", (closed - chain).abs()),
    ));

    // Duality: simulator vs dual walks vs exact semigroup on 1024 states.
    let report = verify_duality(&DualityParams {
        replicas: 2000,
        ..DualityParams::default()
    })
    .unwrap();
    checks.push(check(
        "duality-three-way",
        report.pass,
        format!(
            "{} checks, all pass = {}",
            report.checks.len(),
            report.pass
        ),
    ));

    // Reversibility on the star graph.
    let star = build_ball(2, 1).unwrap();
    let db = exact::detailed_balance_max_violation(&star, 0.41).unwrap();
    let f: Vec<f64> = (0..16).map(|s| ((s * 7 + 3) % 11) as f64 / 11.0).collect();
    let g: Vec<f64> = (0..16).map(|s| ((s * 5 + 1) % 13) as f64 / 13.0).collect();
    let adj = exact::adjointness_defect(&star, 0.41, &f, &g).unwrap();
    checks.push(check(
        "reversibility-star",
        db <= 1e-12 && adj <= 1e-12,
        format!("detailed balance = {db:.3e}, adjointness = {adj:.3e}"),
    ));

    // Resolvent identity: system residual and the mass sum rule.
    let field = potential::resolvent_field::<f64>(2, 4.0, None, 1e-9).unwrap();
    let sum_dev = (field.sphere_weighted_sum() - 2.0).abs() / 2.0;
    checks.push(check(
        "resolvent-identity",
        field.residual < 1e-10 && sum_dev < 1e-6,
        format!(
            "system residual = {:.3e}, sum-rule deviation = {sum_dev:.3e}",
            field.residual
        ),
    ));

    // Rate function: matrix route equals the scalar closed form.
    let sigma2 = potential::sigma_sq::<f64>(2, 0.5).unwrap();
    let origin = treessep::tree::VertexId::origin();
    let gamma = potential::covariance_matrix::<f64>(2, 0.5, &[origin]).unwrap();
    let via_matrix = rate::rate_function(&[0.8], &gamma).unwrap().value;
    let direct = rate::rate_1d(0.8, sigma2).unwrap();
    checks.push(check(
        "rate-function",
        (via_matrix - direct).abs() < 1e-9,
        format!("|matrix - scalar| = {:.3e}", (via_matrix - direct).abs()),
    ));

    // Simulator conservation and determinism smoke.
    let ball = build_ball(2, 4).unwrap();
    let initial = ssep::sample_initial(&ball, 0.5, 12).unwrap();
    let (t1, l1) = ssep::run(&ball, &initial, 2.0, &[0], 0.5, 34).unwrap();
    let (t2, l2) = ssep::run(&ball, &initial, 2.0, &[0], 0.5, 34).unwrap();
    let conserved = t1.final_config.particles() == initial.particles();
    let deterministic = t1.events == t2.events && l1.occupation == l2.occupation;
    let replays = t1.replay(&ball) == t1.final_config;
    checks.push(check(
        "simulator-exactness",
        conserved && deterministic && replays,
        format!("conserved = {conserved}, deterministic = {deterministic}, replays = {replays}"),
    ));

    checks
}

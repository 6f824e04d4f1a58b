//! `treessep`: exclusion-process experiments on regular trees.
//!
//! Subcommands: simulate, kernel-table, potential-table, rate,
//! verify-duality, moments, tail, clt, selftest. Experiments read one JSON
//! config file plus flag overrides; outputs are CSV (RFC 4180) or JSON with
//! stable key order. Exit codes: 0 success, 1 validation error, 2 failed
//! selftest assertion.

mod output;
mod selftest;

use std::collections::BTreeMap;
use std::process::ExitCode;

use serde::Serialize;
use serde_json::{json, Map, Value};

use output::{num, Table};
use treessep::dual::{verify_duality, DualityParams};
use treessep::harness::{clt_diagnostic, estimate_moments, estimate_tail, ExperimentConfig};
use treessep::kernel;
use treessep::potential;
use treessep::rate::rate_function;
use treessep::ssep;
use treessep::tree::VertexId;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

const USAGE: &str = "usage: treessep <subcommand> [--key value ...]
subcommands:
  simulate        run trajectories, write the occupation ledger (CSV)
  kernel-table    walk kernel values and bounds (CSV: d,t,k,p,bound,leak)
  potential-table resolvent and Green integrals (CSV: d,t,k,g,green,grad_pair_sum,limit)
  rate            rate function I(u), tilt phi, sigma^2 (JSON)
  verify-duality  three-way duality comparison (JSON)
  moments         occupation-moment estimates vs oracles (CSV)
  tail            importance-sampled tail probability and rate (JSON)
  clt             normality diagnostics of xi_t / sqrt(t) (JSON)
  selftest        exact-oracle suite; exit 2 on failure
common flags: --config FILE plus per-key overrides (--d, --p, --t, --u,
--alpha, --seed, --replicas, --targets, --tilt, --radius, --output, ...)";

fn run(args: &[String]) -> Result<u8, String> {
    let Some(cmd) = args.first() else {
        eprintln!("{USAGE}");
        return Ok(1);
    };
    let flags = parse_flags(&args[1..])?;
    match cmd.as_str() {
        "simulate" => cmd_simulate(&flags),
        "kernel-table" => cmd_kernel_table(&flags),
        "potential-table" => cmd_potential_table(&flags),
        "rate" => cmd_rate(&flags),
        "verify-duality" => cmd_verify_duality(&flags),
        "moments" => cmd_moments(&flags),
        "tail" => cmd_tail(&flags),
        "clt" => cmd_clt(&flags),
        "selftest" => cmd_selftest(),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(0)
        }
        other => Err(format!("unknown subcommand {other:?}\n{USAGE}")),
    }
}

fn parse_flags(args: &[String]) -> Result<BTreeMap<String, String>, String> {
    let mut flags = BTreeMap::new();
    let mut it = args.iter().peekable();
    while let Some(arg) = it.next() {
        let Some(stripped) = arg.strip_prefix("--") else {
            return Err(format!("unexpected argument {arg:?} (flags are --key value)"));
        };
        if let Some((k, v)) = stripped.split_once('=') {
            flags.insert(k.replace('-', "_"), v.to_string());
        } else {
            let value = it
                .next()
                .ok_or_else(|| format!("flag --{stripped} is missing a value"))?;
            flags.insert(stripped.replace('-', "_"), value.clone());
        }
    }
    Ok(flags)
}

fn flag_f64(flags: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, String> {
    flags
        .get(key)
        .map(|v| v.parse::<f64>().map_err(|_| format!("--{key} wants a number, got {v:?}")))
        .transpose()
}

fn flag_u64(flags: &BTreeMap<String, String>, key: &str) -> Result<Option<u64>, String> {
    flags
        .get(key)
        .map(|v| v.parse::<u64>().map_err(|_| format!("--{key} wants an integer, got {v:?}")))
        .transpose()
}

fn require_f64(flags: &BTreeMap<String, String>, key: &str) -> Result<f64, String> {
    flag_f64(flags, key)?.ok_or_else(|| format!("missing required flag --{key}"))
}

fn require_u64(flags: &BTreeMap<String, String>, key: &str) -> Result<u64, String> {
    flag_u64(flags, key)?.ok_or_else(|| format!("missing required flag --{key}"))
}

/// Keys accepted as experiment-config overrides, typed.
const CONFIG_KEYS: &[&str] = &[
    "d",
    "p",
    "t",
    "u",
    "alpha",
    "seed",
    "replicas",
    "targets",
    "tilt",
    "radius",
    "radius_tolerance",
    "radius_check",
    "output",
    "events_output",
    "tolerance_profile",
    "threads",
];

fn config_value(key: &str, raw: &str) -> Result<Value, String> {
    let bad = |kind: &str| format!("--{key} wants {kind}, got {raw:?}");
    Ok(match key {
        "d" | "replicas" | "radius" | "threads" | "seed" => {
            Value::from(raw.parse::<u64>().map_err(|_| bad("an integer"))?)
        }
        "p" | "t" | "alpha" | "radius_tolerance" => {
            Value::from(raw.parse::<f64>().map_err(|_| bad("a number"))?)
        }
        "u" | "tilt" => {
            let items: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
            Value::from(items.map_err(|_| bad("a number or comma list"))?)
        }
        "targets" => Value::from(
            raw.split(',')
                .map(|s| s.trim().to_string())
                .collect::<Vec<String>>(),
        ),
        "radius_check" => Value::from(raw.parse::<bool>().map_err(|_| bad("true or false"))?),
        "output" | "events_output" | "tolerance_profile" => Value::from(raw.to_string()),
        _ => return Err(format!("--{key} is not an experiment option")),
    })
}

/// Assemble the experiment config: JSON file, then TREESSEP_THREADS, then
/// flag overrides.
fn load_config(flags: &BTreeMap<String, String>) -> Result<ExperimentConfig, String> {
    let mut obj: Map<String, Value> = match flags.get("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {path:?}: {e}"))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| format!("malformed config {path:?}: {e}"))?
            {
                Value::Object(map) => map,
                _ => return Err(format!("config {path:?} must be a JSON object")),
            }
        }
        None => Map::new(),
    };
    if let Ok(threads) = std::env::var("TREESSEP_THREADS") {
        let n: u64 = threads
            .parse()
            .map_err(|_| format!("TREESSEP_THREADS wants an integer, got {threads:?}"))?;
        obj.insert("threads".into(), Value::from(n));
    }
    for (key, raw) in flags {
        if key == "config" {
            continue;
        }
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(format!("unknown flag --{key}"));
        }
        obj.insert(key.clone(), config_value(key, raw)?);
    }
    let config: ExperimentConfig =
        serde_json::from_value(Value::Object(obj)).map_err(|e| format!("invalid config: {e}"))?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn only_flags(flags: &BTreeMap<String, String>, allowed: &[&str]) -> Result<(), String> {
    for key in flags.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(format!("unknown flag --{key}"));
        }
    }
    Ok(())
}

fn emit(text: &str, path: Option<&String>) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {p:?}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, path: Option<&String>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())? + "\n";
    emit(&text, path)
}

fn cmd_kernel_table(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    only_flags(flags, &["d", "t", "kmax", "tol", "output"])?;
    let d = require_u64(flags, "d")? as u32;
    let t = require_f64(flags, "t")?;
    let kmax = flag_u64(flags, "kmax")?.unwrap_or(8) as usize;
    let tol = flag_f64(flags, "tol")?.unwrap_or(1e-12);
    let kernel = kernel::radial_distribution::<f64>(d, t, None, tol).map_err(|e| e.to_string())?;
    let mut table = Table::new(&["d", "t", "k", "p", "bound", "leak"]);
    for k in 0..=kmax {
        table.row(&[
            d.to_string(),
            num(t),
            k.to_string(),
            num(kernel.kernel_at(k)),
            num(kernel::heat_bound::<f64>(d, t, k)),
            num(kernel.leak),
        ]);
    }
    emit(&table.finish(), flags.get("output"))?;
    Ok(0)
}

fn cmd_potential_table(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    only_flags(flags, &["d", "t", "kmax", "tol", "output"])?;
    let d = require_u64(flags, "d")? as u32;
    let t = require_f64(flags, "t")?;
    let kmax = flag_u64(flags, "kmax")?.unwrap_or(6) as usize;
    let tol = flag_f64(flags, "tol")?.unwrap_or(1e-9);
    let resolvent =
        potential::resolvent_field::<f64>(d, t, None, 1e-9).map_err(|e| e.to_string())?;
    let green = potential::green_table::<f64>(d, kmax, tol).map_err(|e| e.to_string())?;
    let mut table = Table::new(&["d", "t", "k", "g", "green", "grad_pair_sum", "limit"]);
    for k in 0..=kmax {
        let gps = potential::gradient_pair_sum::<f64>(d, t, k, tol).map_err(|e| e.to_string())?;
        table.row(&[
            d.to_string(),
            num(t),
            k.to_string(),
            num(resolvent.at(k)),
            num(green.at(k)),
            num(gps),
            num(2.0 * green.at(k)),
        ]);
    }
    emit(&table.finish(), flags.get("output"))?;
    Ok(0)
}

#[derive(Serialize)]
struct RateOutput {
    #[serde(rename = "I")]
    rate: f64,
    phi: Option<Vec<f64>>,
    sigma2: f64,
}

fn cmd_rate(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    only_flags(flags, &["d", "p", "u", "targets", "output"])?;
    let d = require_u64(flags, "d")? as u32;
    let p = require_f64(flags, "p")?;
    let u: Vec<f64> = flags
        .get("u")
        .ok_or("missing required flag --u")?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| "--u wants numbers".to_string()))
        .collect::<Result<_, _>>()?;
    let targets: Vec<VertexId> = match flags.get("targets") {
        Some(raw) => raw
            .split(',')
            .map(|s| VertexId::parse(d, s).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
        None => {
            if u.len() != 1 {
                return Err("a vector --u needs --targets with matching length".into());
            }
            vec![VertexId::origin()]
        }
    };
    let gamma = potential::covariance_matrix::<f64>(d, p, &targets).map_err(|e| e.to_string())?;
    let eval = rate_function(&u, &gamma).map_err(|e| e.to_string())?;
    let sigma2 = potential::sigma_sq::<f64>(d, p).map_err(|e| e.to_string())?;
    emit_json(
        &RateOutput {
            rate: eval.value,
            phi: eval.tilt,
            sigma2,
        },
        flags.get("output"),
    )?;
    Ok(0)
}

fn cmd_verify_duality(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    only_flags(flags, &["d", "radius", "t", "p", "replicas", "seed", "output"])?;
    let mut params = DualityParams::default();
    if let Some(d) = flag_u64(flags, "d")? {
        params.d = d as u32;
    }
    if let Some(r) = flag_u64(flags, "radius")? {
        params.radius = r as u32;
    }
    if let Some(t) = flag_f64(flags, "t")? {
        params.t = t;
    }
    if let Some(p) = flag_f64(flags, "p")? {
        params.p = p;
    }
    if let Some(n) = flag_u64(flags, "replicas")? {
        params.replicas = n as u32;
    }
    if let Some(s) = flag_u64(flags, "seed")? {
        params.seed = s;
    }
    let report = verify_duality(&params).map_err(|e| e.to_string())?;
    emit_json(&report, flags.get("output"))?;
    Ok(0)
}

fn cmd_simulate(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    let mut allowed = vec!["config"];
    allowed.extend_from_slice(CONFIG_KEYS);
    only_flags(flags, &allowed)?;
    let config = load_config(flags)?;
    let exp = treessep::harness::resolve(&config, None).map_err(|e| e.to_string())?;
    let record_events = config.events_output.is_some();
    if record_events && config.replicas != 1 {
        return Err("events_output needs replicas = 1 (one NDJSON stream per run)".into());
    }
    let schedule = config.schedule().map_err(|e| e.to_string())?;
    let tilt_coeffs: Option<Vec<f64>> = match (&config.tilt, &config.u) {
        (Some(c), _) => Some(c.clone()),
        (None, Some(u)) => {
            let gamma = potential::covariance_matrix::<f64>(config.d, config.p, &exp.target_vertices)
                .map_err(|e| e.to_string())?;
            Some(treessep::rate::tilt_for_target(u, &gamma).map_err(|e| e.to_string())?)
        }
        (None, None) => None,
    };
    let tilt = match &tilt_coeffs {
        None => None,
        Some(c) => {
            let fields = exp
                .target_indices
                .iter()
                .map(|&x| potential::resolvent_on_ball(&exp.ball, x, config.t, 1e-8))
                .collect::<treessep::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            Some(
                ssep::build_tilt(&exp.ball, c, &fields, &schedule, config.t)
                    .map_err(|e| e.to_string())?,
            )
        }
    };
    let mut table = Table::new(&["replica", "target", "X", "xi", "logXi"]);
    let mut events_text = String::new();
    for r in 0..config.replicas {
        let mut init_rng = ssep::replica_rng(config.seed, u64::from(r), ssep::PHASE_INIT);
        let initial = ssep::sample_initial_from(&exp.ball, config.p, &mut init_rng)
            .map_err(|e| e.to_string())?;
        let mut dyn_rng = ssep::replica_rng(config.seed, u64::from(r), ssep::PHASE_DYNAMICS);
        let out = ssep::simulate(
            &exp.ball,
            &initial,
            config.t,
            &exp.target_indices,
            config.p,
            &mut dyn_rng,
            tilt.as_ref(),
            record_events,
        )
        .map_err(|e| e.to_string())?;
        for (j, &x) in out.ledger.occupation.iter().enumerate() {
            table.row(&[
                r.to_string(),
                exp.target_vertices[j].to_string(),
                num(x),
                num(out.ledger.xi(j)),
                num(out.ledger.log_weight),
            ]);
        }
        if let Some(events) = &out.events {
            for ev in events {
                let (a, b) = exp.ball.edge(ev.edge as usize);
                events_text.push_str(&format!(
                    "{}\n",
                    json!({"time": ev.time, "edge": ev.edge, "v1": a, "v2": b})
                ));
            }
        }
    }
    emit(&table.finish(), config.output.as_ref())?;
    if let Some(path) = &config.events_output {
        std::fs::write(path, events_text).map_err(|e| format!("cannot write {path:?}: {e}"))?;
    }
    Ok(0)
}

fn cmd_moments(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    let mut allowed = vec!["config"];
    allowed.extend_from_slice(CONFIG_KEYS);
    only_flags(flags, &allowed)?;
    let config = load_config(flags)?;
    let report = estimate_moments(&config).map_err(|e| e.to_string())?;
    let mut table = Table::new(&[
        "label",
        "estimate",
        "standard_error",
        "replicas",
        "target",
        "pass",
    ]);
    for r in &report.reports {
        table.row(&[
            r.label.clone(),
            num(r.estimate),
            num(r.standard_error),
            r.replicas.to_string(),
            r.target.map(num).unwrap_or_default(),
            r.pass.map(|p| p.to_string()).unwrap_or_default(),
        ]);
    }
    if let Some(check) = &report.radius_check {
        table.row(&[
            "radius_check_max_z".into(),
            num(check.max_z),
            String::new(),
            check.control_replicas.to_string(),
            format!("R{}->R{}", check.base_radius, check.control_radius),
            check.pass.to_string(),
        ]);
    }
    emit(&table.finish(), config.output.as_ref())?;
    Ok(0)
}

fn cmd_tail(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    let mut allowed = vec!["config"];
    allowed.extend_from_slice(CONFIG_KEYS);
    only_flags(flags, &allowed)?;
    let config = load_config(flags)?;
    let report = estimate_tail(&config).map_err(|e| e.to_string())?;
    emit_json(&report, config.output.as_ref())?;
    Ok(0)
}

fn cmd_clt(flags: &BTreeMap<String, String>) -> Result<u8, String> {
    let mut allowed = vec!["config"];
    allowed.extend_from_slice(CONFIG_KEYS);
    only_flags(flags, &allowed)?;
    let config = load_config(flags)?;
    let report = clt_diagnostic(&config).map_err(|e| e.to_string())?;
    emit_json(&report, config.output.as_ref())?;
    Ok(0)
}

fn cmd_selftest() -> Result<u8, String> {
    let checks = selftest::run_all();
    let mut failures = 0;
    for c in &checks {
        let tag = if c.pass { "ok  " } else { "FAIL" };
        println!("[{tag}] {}: {}", c.name, c.detail);
        if !c.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} of {} selftest checks failed", checks.len());
        Ok(2)
    } else {
        println!("all {} selftest checks passed", checks.len());
        Ok(0)
    }
}

use std::path::PathBuf;

use bellcom_core::classical::{
    ccp_exhaustive_bound, classical_bound, classical_success_bound, strategy_bell_value, CLASSICAL_GUARD_LOG2,
    DEFAULT_CCP_GUARD_LOG2,
};
use bellcom_core::config::StrategyConfig;
use bellcom_core::optimizer::{optimize, OptimizerOptions};
use bellcom_core::protocol::{beacon_load, exact_success, run_session, RandomnessSource, SessionOptions, Strategy};
use bellcom_core::quantum::{
    bell_value, canonical_strategy, canonical_strategy_by_name, correlator_table, format_significant,
    random_observables, random_pure_state, success_probability, CanonicalStrategy, CorrelatorTable, QuantumStrategy,
};
use bellcom_core::scenario::{named_inequality, BellInequality, CcpInstance};
use bellcom_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::run_config::{CommandKind, Format, RandomnessSpec, RunConfig, StrategySource};

/// Preset name for the deterministic strategy attaining the classical bound.
pub const CLASSICAL_WITNESS: &str = "classical-witness";

/// Tolerance of the success identity checked by `verify`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// What a command produced: the text for stdout or `--out`, plus an optional
/// side file (the round log of `simulate`).
pub struct Output {
    pub text: String,
    pub side_file: Option<(PathBuf, Vec<u8>)>,
    /// Set when the command ran but a numeric check did not hold.
    pub failure: Option<Error>,
}

impl Output {
    fn text(text: String) -> Self {
        Self { text, side_file: None, failure: None }
    }
}

/// Integers print without a fractional part.
pub fn number(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        json!(x as i64)
    } else {
        json!(x)
    }
}

fn inequality(cfg: &RunConfig) -> Result<BellInequality> {
    cfg.inequality.as_ref().expect("validated").to_inequality()
}

fn ineq_label(ineq: &BellInequality) -> Value {
    ineq.name().map_or(Value::Null, |n| json!(n))
}

fn resolve_strategy(cfg: &RunConfig, ineq: &BellInequality) -> Result<Strategy> {
    let strategy = match cfg.strategy.as_ref().expect("validated") {
        StrategySource::Preset { preset } if preset == CLASSICAL_WITNESS => {
            if cfg.noise_v.is_some() {
                return Err(Error::Config("--noise-v applies to quantum strategies only".into()));
            }
            return Ok(Strategy::Classical(classical_bound(ineq)?.witness));
        }
        StrategySource::Preset { preset } => canonical_strategy_by_name(preset)?,
        StrategySource::Inline(file) => file.to_strategy(ineq.scenario())?,
    };
    if strategy.scenario() != ineq.scenario() {
        return Err(Error::Strategy(
            "strategy and inequality are defined on different causal structures".into(),
        ));
    }
    Ok(Strategy::Quantum(match cfg.noise_v {
        Some(v) => strategy.depolarized(v)?,
        None => strategy,
    }))
}

fn correlators(strategy: &Strategy, ineq: &BellInequality) -> Result<CorrelatorTable> {
    match strategy {
        Strategy::Quantum(q) => correlator_table(q),
        Strategy::Classical(c) => CorrelatorTable::new(
            ineq.n(),
            (0..ineq.scenario().tuple_count()).map(|k| f64::from(c.outcome_product(ineq.scenario(), k))).collect(),
        ),
    }
}

fn render(map: Map<String, Value>, format: Format) -> String {
    match format {
        Format::Json => Value::Object(map).to_string(),
        Format::Csv => {
            let header: Vec<&str> = map.keys().map(String::as_str).collect();
            let row: Vec<String> = map.values().map(csv_cell).collect();
            format!("{}\n{}", header.join(","), row.join(","))
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => format_significant(x, 12),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Output> {
    match cfg.command {
        CommandKind::Bound => bound(cfg),
        CommandKind::Optimize => run_optimize(cfg),
        CommandKind::Eval => eval(cfg),
        CommandKind::Simulate => simulate(cfg),
        CommandKind::Verify => verify(cfg),
        CommandKind::Report => report(cfg),
    }
}

fn bound(cfg: &RunConfig) -> Result<Output> {
    let ineq = inequality(cfg)?;
    let bound = classical_bound(&ineq)?;
    let mut map = Map::new();
    map.insert("classical_bound".into(), number(bound.value));
    map.insert("success_bound".into(), number(classical_success_bound(&ineq)?));
    if let Some(ccp) = cfg.ccp {
        let guard = if ccp.long_running { CLASSICAL_GUARD_LOG2 } else { DEFAULT_CCP_GUARD_LOG2 };
        let result = ccp_exhaustive_bound(&CcpInstance::new(ineq), ccp.family, guard)?;
        map.insert("ccp_family".into(), serde_json::to_value(ccp.family)?);
        map.insert("ccp_bound".into(), number(result.value));
        map.insert("ccp_party".into(), json!(result.party + 1));
    }
    Ok(Output::text(render(map, cfg.format)))
}

fn run_optimize(cfg: &RunConfig) -> Result<Output> {
    let ineq = inequality(cfg)?;
    let defaults = OptimizerOptions::default();
    let opts = OptimizerOptions {
        restarts: cfg.restarts.unwrap_or(defaults.restarts),
        max_sweeps: cfg.max_sweeps.unwrap_or(defaults.max_sweeps),
        tol: cfg.tol.unwrap_or(defaults.tol),
        seed: cfg.seed.expect("validated"),
        optimize_state: cfg.optimize_state,
    };
    let result = optimize(&ineq, &opts)?;
    if cfg.format == Format::Csv {
        return Ok(Output::text(correlator_table(&result.strategy)?.to_csv().trim_end().to_string()));
    }
    let classical = classical_bound(&ineq)?.value;
    let mut map = Map::new();
    map.insert("inequality".into(), ineq_label(&ineq));
    map.insert("best_value".into(), json!(result.best_value));
    map.insert("success".into(), json!(success_probability(result.best_value, ineq.gamma())?));
    map.insert("classical_bound".into(), number(classical));
    map.insert("violation".into(), json!(result.best_value > classical + IDENTITY_TOLERANCE));
    map.insert("seed".into(), json!(opts.seed));
    map.insert("restarts".into(), json!(opts.restarts));
    map.insert("winning_restart".into(), json!(result.restart));
    map.insert("sweeps_used".into(), json!(result.sweeps_used));
    map.insert("degenerate_updates".into(), json!(result.degenerate_updates));
    map.insert("strategy".into(), serde_json::to_value(StrategyConfig::from_strategy(&result.strategy)?)?);
    Ok(Output::text(Value::Object(map).to_string()))
}

fn eval(cfg: &RunConfig) -> Result<Output> {
    let ineq = inequality(cfg)?;
    let strategy = resolve_strategy(cfg, &ineq)?;
    let table = correlators(&strategy, &ineq)?;
    if cfg.format == Format::Csv {
        return Ok(Output::text(table.to_csv().trim_end().to_string()));
    }
    let b = match &strategy {
        Strategy::Quantum(_) => bell_value(&table, &ineq)?,
        Strategy::Classical(c) => strategy_bell_value(c, &ineq)?,
    };
    let classical = classical_bound(&ineq)?.value;
    let mut map = Map::new();
    map.insert("inequality".into(), ineq_label(&ineq));
    map.insert("strategy_kind".into(), json!(strategy.kind()));
    map.insert("bell_value".into(), json!(b));
    map.insert("gamma".into(), number(ineq.gamma()));
    map.insert("normalized_value".into(), json!(b / ineq.gamma()));
    map.insert("success".into(), json!(success_probability(b, ineq.gamma())?));
    map.insert("classical_bound".into(), number(classical));
    map.insert("classical_success_bound".into(), number(classical_success_bound(&ineq)?));
    map.insert("violation".into(), json!(b > classical + IDENTITY_TOLERANCE));
    Ok(Output::text(Value::Object(map).to_string()))
}

fn input_source(cfg: &RunConfig, seed: u64) -> Result<RandomnessSource> {
    match cfg.randomness.as_ref().unwrap_or(&RandomnessSpec::Prng) {
        RandomnessSpec::Prng => Ok(RandomnessSource::seeded(seed)),
        RandomnessSpec::BitFile(path) => RandomnessSource::bit_file(path),
        RandomnessSpec::Beacon(target) if target.starts_with("http://") || target.starts_with("https://") => {
            fetch_beacon(target, cfg.beacon_cache.clone().unwrap_or_else(|| default_cache(target)))
        }
        RandomnessSpec::Beacon(path) => beacon_load(path),
    }
}

/// `beacon-<url with every non-alphanumeric character replaced>.txt`
fn default_cache(url: &str) -> PathBuf {
    let stem: String = url.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    PathBuf::from(format!("beacon-{stem}.txt"))
}

#[cfg(feature = "beacon-fetch")]
fn fetch_beacon(url: &str, cache: PathBuf) -> Result<RandomnessSource> {
    bellcom_core::protocol::beacon_fetch(url, cache)
}

#[cfg(not(feature = "beacon-fetch"))]
fn fetch_beacon(url: &str, cache: PathBuf) -> Result<RandomnessSource> {
    if cache.is_file() {
        return beacon_load(cache);
    }
    Err(Error::Config(format!(
        "fetching {url} needs the beacon-fetch feature; without it only a cached file ({}) can be replayed",
        cache.display()
    )))
}

fn simulate(cfg: &RunConfig) -> Result<Output> {
    let ineq = inequality(cfg)?;
    let strategy = resolve_strategy(cfg, &ineq)?;
    let instance = CcpInstance::new(ineq);
    let seed = cfg.seed.expect("validated");
    let opts = SessionOptions { retain_rounds: cfg.out.is_some(), outcome_seed: Some(seed) };
    let log = run_session(&instance, &strategy, cfg.rounds.expect("validated"), input_source(cfg, seed)?, opts)?;
    let side_file = match &cfg.out {
        Some(path) => {
            let mut bytes = Vec::new();
            log.write_jsonl(&mut bytes)?;
            Some((path.clone(), bytes))
        }
        None => None,
    };
    let summary = serde_json::to_value(log.summary)?;
    let Value::Object(map) = summary else { unreachable!("summary is a struct") };
    Ok(Output { text: render(map, cfg.format), side_file, failure: None })
}

fn verify(cfg: &RunConfig) -> Result<Output> {
    let inequalities = match &cfg.inequality {
        Some(c) => vec![c.to_inequality()?],
        None => vec![named_inequality("gyni")?, named_inequality("svetlichny")?],
    };
    let count = cfg.count.unwrap_or(100);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.expect("validated"));
    let mut checks = Vec::new();
    let mut all_pass = true;
    for ineq in &inequalities {
        let instance = CcpInstance::new(ineq.clone());
        let mut worst = 0.0f64;
        for _ in 0..count {
            let scenario = ineq.scenario().clone();
            let state = random_pure_state(scenario.n(), &mut rng)?;
            let observables = random_observables(&scenario, &mut rng);
            let strategy = QuantumStrategy::new(scenario, state.into(), observables)?;
            let b = bell_value(&correlator_table(&strategy)?, ineq)?;
            let exact = exact_success(&instance, &Strategy::Quantum(strategy))?;
            worst = worst.max((exact - (0.5 + b / (2.0 * ineq.gamma()))).abs());
        }
        let pass = worst <= IDENTITY_TOLERANCE;
        all_pass &= pass;
        checks.push(json!({
            "inequality": ineq_label(ineq),
            "strategies": count,
            "max_deviation": worst,
            "pass": pass,
        }));
    }
    let text = match cfg.format {
        Format::Json => json!({ "tolerance": IDENTITY_TOLERANCE, "checks": checks, "pass": all_pass }).to_string(),
        Format::Csv => {
            let mut lines = vec!["inequality,strategies,max_deviation,pass".to_string()];
            lines.extend(checks.iter().map(|c| {
                ["inequality", "strategies", "max_deviation", "pass"].map(|k| csv_cell(&c[k])).join(",")
            }));
            lines.join("\n")
        }
    };
    let failure = (!all_pass).then(|| Error::Numeric("success identity violated beyond tolerance".into()));
    Ok(Output { text, side_file: None, failure })
}

pub struct ReportRow {
    pub quantity: &'static str,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
}

impl ReportRow {
    pub fn matches(&self) -> bool {
        (self.value - self.reference).abs() <= self.tolerance
    }
}

/// The reference numbers for the two three-party inequalities and the
/// success implied by a measured Bell value of 7.023.
pub fn report_rows() -> Result<Vec<ReportRow>> {
    let gyni = named_inequality("gyni")?;
    let svetlichny = named_inequality("svetlichny")?;
    let value_of = |which: CanonicalStrategy, ineq: &BellInequality| -> Result<f64> {
        bell_value(&correlator_table(&canonical_strategy(which))?, ineq)
    };
    let g = value_of(CanonicalStrategy::GyniPaper, &gyni)?;
    let s = value_of(CanonicalStrategy::SvetlichnyPaper, &svetlichny)?;
    let row = |quantity, value, reference, tolerance| ReportRow { quantity, value, reference, tolerance };
    Ok(vec![
        row("gyni_classical_bound", classical_bound(&gyni)?.value, 6.0, 0.0),
        row("gyni_classical_success", classical_success_bound(&gyni)?, 0.875, 0.0),
        row("gyni_quantum_value", g, 7.391, 5e-4),
        row("gyni_quantum_success", success_probability(g, gyni.gamma())?, 0.962, 5e-4),
        row("svetlichny_classical_bound", classical_bound(&svetlichny)?.value, 4.0, 0.0),
        row("svetlichny_classical_success", classical_success_bound(&svetlichny)?, 0.75, 0.0),
        row("svetlichny_quantum_value", s, 4.0 * std::f64::consts::SQRT_2, 1e-9),
        row("svetlichny_quantum_success", success_probability(s, svetlichny.gamma())?, 0.853, 1e-3),
        row("success_from_7.023", success_probability(7.023, gyni.gamma())?, 0.9389, 5e-5),
    ])
}

fn report(cfg: &RunConfig) -> Result<Output> {
    let rows = report_rows()?;
    let all_match = rows.iter().all(ReportRow::matches);
    let text = match cfg.format {
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "quantity": r.quantity,
                        "value": number(r.value),
                        "reference": number(r.reference),
                        "tolerance": r.tolerance,
                        "match": r.matches(),
                    })
                })
                .collect();
            json!({ "rows": rows, "all_match": all_match }).to_string()
        }
        Format::Csv => {
            let mut lines = vec!["quantity,value,reference,tolerance,match".to_string()];
            lines.extend(rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.quantity,
                    format_significant(r.value, 12),
                    format_significant(r.reference, 12),
                    r.tolerance,
                    r.matches()
                )
            }));
            lines.join("\n")
        }
    };
    let failure = (!all_match).then(|| Error::Numeric("a recomputed value disagrees with its reference".into()));
    Ok(Output { text, side_file: None, failure })
}

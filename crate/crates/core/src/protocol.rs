//! Round-by-round execution of the communication-complexity protocol.
//!
//! Each round: draw `x` from the instance distribution and fair `y_i`,
//! let every party produce `a_i` from the inputs it sees, broadcast
//! `m_i = y_i·a_i`, and guess `Π_i m_i`. The guess matches
//! `f(x, y) = Πy·S[Q(x)]` exactly when `Π a_i = S[Q(x)]`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::DeterministicStrategy;
use crate::error::{Error, Result};
use crate::par;
use crate::quantum::{outcome_distribution, QuantumStrategy};
use crate::scenario::{sign_at, target_function, CcpInstance, InputTuple};
use crate::tensor::State;

pub const PRNG_NAME: &str = "ChaCha8Rng";

/// Hex characters per beacon record (512 bits).
pub const BEACON_RECORD_HEX: usize = 128;

/// Rounds per parallel block.
pub const BLOCK_SIZE: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomnessKind {
    SeededPrng,
    BitFile,
    BeaconRecords,
}

/// What a session's input randomness came from, echoed in its log header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub kind: RandomnessKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug)]
enum Inner {
    Prng { seed: u64, rng: Box<ChaCha8Rng> },
    Bits { bytes: Vec<u8>, cursor: usize },
}

/// A deterministic stream of fair bits and uniforms.
///
/// Bit-backed sources are read most-significant bit first; a uniform takes
/// the next 32 bits as `k / 2^32`.
#[derive(Clone, Debug)]
pub struct RandomnessSource {
    descriptor: SourceDescriptor,
    inner: Inner,
}

fn exhausted() -> Error {
    Error::RandomnessExhausted { rounds_completed: 0 }
}

impl RandomnessSource {
    pub fn seeded(seed: u64) -> Self {
        Self::seeded_stream(seed, 0)
    }

    pub fn seeded_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            descriptor: SourceDescriptor {
                kind: RandomnessKind::SeededPrng,
                seed: Some(seed),
                generator: Some(PRNG_NAME.into()),
                path: None,
            },
            inner: Inner::Prng { seed, rng: Box::new(rng) },
        }
    }

    pub fn from_bytes(kind: RandomnessKind, bytes: Vec<u8>, path: Option<PathBuf>) -> Self {
        Self {
            descriptor: SourceDescriptor { kind, seed: None, generator: None, path },
            inner: Inner::Bits { bytes, cursor: 0 },
        }
    }

    /// Raw bytes of a file as the bit stream.
    pub fn bit_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self::from_bytes(RandomnessKind::BitFile, fs::read(path)?, Some(path.to_path_buf())))
    }

    pub fn descriptor(&self) -> &SourceDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> RandomnessKind {
        self.descriptor.kind
    }

    /// Bits consumed so far from a bit-backed source.
    pub fn cursor(&self) -> Option<usize> {
        match &self.inner {
            Inner::Prng { .. } => None,
            Inner::Bits { cursor, .. } => Some(*cursor),
        }
    }

    pub fn remaining_bits(&self) -> Option<usize> {
        match &self.inner {
            Inner::Prng { .. } => None,
            Inner::Bits { bytes, cursor } => Some(bytes.len() * 8 - cursor),
        }
    }

    pub fn next_bit(&mut self) -> Result<bool> {
        match &mut self.inner {
            Inner::Prng { rng, .. } => Ok(rng.random::<bool>()),
            Inner::Bits { bytes, cursor } => {
                let byte = *bytes.get(*cursor / 8).ok_or_else(exhausted)?;
                let bit = (byte >> (7 - *cursor % 8)) & 1 == 1;
                *cursor += 1;
                Ok(bit)
            }
        }
    }

    /// `+1` for a set bit, `−1` otherwise.
    pub fn next_sign(&mut self) -> Result<i8> {
        Ok(if self.next_bit()? { 1 } else { -1 })
    }

    /// Uniform in `[0, 1)`.
    pub fn next_unit(&mut self) -> Result<f64> {
        match &mut self.inner {
            Inner::Prng { rng, .. } => Ok(rng.random::<f64>()),
            Inner::Bits { bytes, cursor } => {
                if bytes.len() * 8 < *cursor + 32 {
                    return Err(exhausted());
                }
                let mut k = 0u64;
                for _ in 0..32 {
                    k = (k << 1) | u64::from((bytes[*cursor / 8] >> (7 - *cursor % 8)) & 1);
                    *cursor += 1;
                }
                Ok(k as f64 / 4_294_967_296.0)
            }
        }
    }

    fn prng_seed(&self) -> Option<u64> {
        match &self.inner {
            Inner::Prng { seed, .. } => Some(*seed),
            Inner::Bits { .. } => None,
        }
    }
}

/// Parses hex-encoded 512-bit records, one per line. Blank lines are
/// skipped; anything else that is not exactly 128 hex digits is an error
/// naming the byte offset where the problem starts.
pub fn parse_beacon_records(text: &str) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        let leading = content.len() - content.trim_start().len();
        let record = content.trim();
        if !record.is_empty() {
            let start = offset + leading;
            if let Some((i, c)) = record.char_indices().find(|(_, c)| !c.is_ascii_hexdigit()) {
                return Err(Error::BeaconParse { offset: start + i, reason: format!("invalid hex digit {c:?}") });
            }
            if record.len() != BEACON_RECORD_HEX {
                return Err(Error::BeaconParse {
                    offset: start,
                    reason: format!("record has {} hex digits, expected {BEACON_RECORD_HEX}", record.len()),
                });
            }
            bytes.extend(hex::decode(record).map_err(|e| Error::BeaconParse { offset: start, reason: e.to_string() })?);
        }
        offset += line.len();
    }
    Ok(bytes)
}

/// Loads a file of beacon records, preserving record order.
pub fn beacon_load(path: impl AsRef<Path>) -> Result<RandomnessSource> {
    let path = path.as_ref();
    let bytes = parse_beacon_records(&fs::read_to_string(path)?)?;
    Ok(RandomnessSource::from_bytes(RandomnessKind::BeaconRecords, bytes, Some(path.to_path_buf())))
}

/// Extracts every `outputValue` string from a beacon JSON response.
pub fn beacon_records_from_json(body: &str) -> Result<Vec<String>> {
    fn walk(value: &serde_json::Value, out: &mut Vec<String>) {
        match value {
            serde_json::Value::Object(map) => {
                for (key, v) in map {
                    match (key.as_str(), v) {
                        ("outputValue", serde_json::Value::String(s)) => out.push(s.to_ascii_lowercase()),
                        _ => walk(v, out),
                    }
                }
            }
            serde_json::Value::Array(items) => items.iter().for_each(|v| walk(v, out)),
            _ => {}
        }
    }
    let value: serde_json::Value = serde_json::from_str(body)?;
    let mut out = Vec::new();
    walk(&value, &mut out);
    if out.is_empty() {
        return Err(Error::Network("response contains no outputValue records".into()));
    }
    Ok(out)
}

/// Fetches beacon records from `url` into `cache` unless the cache already
/// exists, then loads the cache. Replays never touch the network.
#[cfg(feature = "beacon-fetch")]
pub fn beacon_fetch(url: &str, cache: impl AsRef<Path>) -> Result<RandomnessSource> {
    let cache = cache.as_ref();
    if !cache.exists() {
        let body = ureq::get(url)
            .call()
            .map_err(|e| Error::Network(e.to_string()))?
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Network(e.to_string()))?;
        let records = if body.trim_start().starts_with(['{', '[']) {
            beacon_records_from_json(&body)?
        } else {
            body.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
        };
        let text: String = records.iter().map(|r| format!("{r}\n")).collect();
        parse_beacon_records(&text)?;
        fs::File::create(cache)?.write_all(text.as_bytes())?;
    }
    beacon_load(cache)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    Quantum(QuantumStrategy),
    Classical(DeterministicStrategy),
}

impl Strategy {
    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::Quantum(_) => "quantum",
            Strategy::Classical(_) => "classical",
        }
    }

    /// SHA-256 over the exact bit patterns of the strategy's numbers.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        match self {
            Strategy::Classical(s) => {
                h.update(b"classical");
                for r in s.responses() {
                    h.update((r.party as u64).to_le_bytes());
                    h.update(r.table.iter().map(|a| *a as u8).collect::<Vec<_>>());
                }
            }
            Strategy::Quantum(s) => {
                h.update(b"quantum");
                for v in s.scenario().visibility() {
                    h.update((v.len() as u64).to_le_bytes());
                    v.iter().for_each(|i| h.update((*i as u64).to_le_bytes()));
                }
                match s.state() {
                    State::Pure(psi) => {
                        h.update(b"pure");
                        psi.amplitudes().iter().for_each(|a| {
                            h.update(a.re.to_bits().to_le_bytes());
                            h.update(a.im.to_bits().to_le_bytes());
                        });
                    }
                    State::Mixed(rho) => {
                        h.update(b"mixed");
                        rho.matrix().as_slice().iter().for_each(|a| {
                            h.update(a.re.to_bits().to_le_bytes());
                            h.update(a.im.to_bits().to_le_bytes());
                        });
                    }
                }
                for table in s.observables() {
                    for o in table {
                        o.bloch().iter().for_each(|c| h.update(c.to_bits().to_le_bytes()));
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }

    fn check(&self, instance: &CcpInstance) -> Result<()> {
        let scenario = instance.inequality().scenario();
        match self {
            Strategy::Classical(s) => s.check(scenario),
            Strategy::Quantum(s) if s.scenario() != scenario => {
                Err(Error::Strategy("quantum strategy was built for a different causal structure".into()))
            }
            Strategy::Quantum(_) => Ok(()),
        }
    }
}

impl From<QuantumStrategy> for Strategy {
    fn from(s: QuantumStrategy) -> Self {
        Strategy::Quantum(s)
    }
}

impl From<DeterministicStrategy> for Strategy {
    fn from(s: DeterministicStrategy) -> Self {
        Strategy::Classical(s)
    }
}

/// Per-tuple outcome distributions, computed once per session.
#[derive(Clone, Debug)]
pub struct PreparedStrategy {
    n: usize,
    /// `outcomes[k][a]`: probability of outcome index `a` on tuple `k`.
    outcomes: Vec<Vec<f64>>,
}

impl PreparedStrategy {
    pub fn new(instance: &CcpInstance, strategy: &Strategy) -> Result<Self> {
        strategy.check(instance)?;
        let scenario = instance.inequality().scenario();
        let n = scenario.n();
        let outcomes = match strategy {
            Strategy::Quantum(s) => par::try_map_indexed(scenario.tuple_count(), |k| outcome_distribution(s, k))?,
            Strategy::Classical(s) => (0..scenario.tuple_count())
                .map(|k| {
                    let a = (0..n).fold(0usize, |acc, p| {
                        (acc << 1) | usize::from(s.output(p, scenario.setting_index(p, k)) > 0)
                    });
                    let mut dist = vec![0.0; 1 << n];
                    dist[a] = 1.0;
                    dist
                })
                .collect(),
        };
        Ok(Self { n, outcomes })
    }

    pub fn distribution(&self, tuple_index: usize) -> &[f64] {
        &self.outcomes[tuple_index]
    }

    fn sample(&self, tuple_index: usize, u: f64) -> usize {
        inverse_cdf(&self.outcomes[tuple_index], u)
    }
}

/// First index whose cumulative mass exceeds `u`; zero-mass entries are
/// never returned.
fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = i;
        if u < cumulative {
            return i;
        }
    }
    last_positive
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub x: Vec<i8>,
    pub y: Vec<i8>,
    pub settings: Vec<Vec<i8>>,
    pub a: Vec<i8>,
    pub m: Vec<i8>,
    pub guess: i8,
    pub f_value: i8,
    pub pass: bool,
}

/// Draws `x` by inverse CDF over tuple order, then `y_1..y_n`.
pub fn sample_inputs(instance: &CcpInstance, source: &mut RandomnessSource) -> Result<(InputTuple, Vec<i8>)> {
    let n = instance.n();
    let k = inverse_cdf(instance.distribution(), source.next_unit()?);
    let y = (0..n).map(|_| source.next_sign()).collect::<Result<Vec<_>>>()?;
    Ok((InputTuple::from_index(n, k), y))
}

fn play_round<R: Rng + ?Sized>(
    instance: &CcpInstance,
    prepared: &PreparedStrategy,
    x: InputTuple,
    y: Vec<i8>,
    outcome_rng: &mut R,
) -> RoundRecord {
    let ineq = instance.inequality();
    let scenario = ineq.scenario();
    let n = prepared.n;
    let k = x.index();
    let a_index = prepared.sample(k, outcome_rng.random::<f64>());
    let a: Vec<i8> = (0..n).map(|p| sign_at(n, a_index, p)).collect();
    let m: Vec<i8> = y.iter().zip(&a).map(|(y, a)| y * a).collect();
    let guess = m.iter().product();
    let f_value = target_function(ineq, &x, &y);
    let settings = (0..n).map(|p| scenario.restrict(p, &x).values().to_vec()).collect();
    RoundRecord { x: x.values().to_vec(), y, settings, a, m, guess, f_value, pass: guess == f_value }
}

pub fn run_round<R: Rng + ?Sized>(
    instance: &CcpInstance,
    prepared: &PreparedStrategy,
    source: &mut RandomnessSource,
    outcome_rng: &mut R,
) -> Result<RoundRecord> {
    let (x, y) = sample_inputs(instance, source)?;
    Ok(play_round(instance, prepared, x, y, outcome_rng))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub inequality: Option<String>,
    pub n: usize,
    pub rounds: usize,
    pub randomness: SourceDescriptor,
    pub outcome_seed: u64,
    pub outcome_generator: String,
    pub block_size: usize,
    pub strategy_kind: String,
    pub strategy_hash: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub rounds: usize,
    pub successes: usize,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionLog {
    pub header: SessionHeader,
    /// Empty unless the session was run with `retain_rounds`.
    pub rounds: Vec<RoundRecord>,
    pub summary: SessionSummary,
}

impl SessionLog {
    /// Header object, then one round per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionOptions {
    pub retain_rounds: bool,
    /// Seeds the outcome-sampling streams. Defaults to the PRNG seed for
    /// seeded sources.
    pub outcome_seed: Option<u64>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { retain_rounds: true, outcome_seed: None }
    }
}

fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `rounds` independent rounds in blocks of [`BLOCK_SIZE`].
///
/// For a seeded source, block `b` draws inputs from stream `2b` and outcomes
/// from stream `2b+1` of the seed, so results do not depend on the thread
/// count. Bit-backed sources are consumed sequentially in round order; their
/// outcomes come from the `outcome_seed` streams.
pub fn run_session(
    instance: &CcpInstance,
    strategy: &Strategy,
    rounds: usize,
    source: RandomnessSource,
    opts: SessionOptions,
) -> Result<SessionLog> {
    if rounds == 0 {
        return Err(Error::Config("a session needs at least one round".into()));
    }
    let prepared = PreparedStrategy::new(instance, strategy)?;
    let outcome_seed = match (opts.outcome_seed, source.prng_seed()) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => {
            return Err(Error::Config("bit-backed randomness needs an explicit outcome seed".into()));
        }
    };
    let blocks = rounds.div_ceil(BLOCK_SIZE);
    let block_len = |b: usize| BLOCK_SIZE.min(rounds - b * BLOCK_SIZE);

    let per_block: Vec<Vec<RoundRecord>> = match source.prng_seed() {
        Some(seed) => par::try_map_indexed(blocks, |b| {
            let mut inputs = RandomnessSource::seeded_stream(seed, 2 * b as u64);
            let mut outcomes = block_rng(outcome_seed, 2 * b as u64 + 1);
            (0..block_len(b)).map(|_| run_round(instance, &prepared, &mut inputs, &mut outcomes)).collect()
        })?,
        None => {
            let mut source = source.clone();
            let mut drawn = Vec::with_capacity(rounds);
            for completed in 0..rounds {
                match sample_inputs(instance, &mut source) {
                    Ok(xy) => drawn.push(xy),
                    Err(Error::RandomnessExhausted { .. }) => {
                        return Err(Error::RandomnessExhausted { rounds_completed: completed });
                    }
                    Err(e) => return Err(e),
                }
            }
            par::map_indexed(blocks, |b| {
                let mut outcomes = block_rng(outcome_seed, 2 * b as u64 + 1);
                drawn[b * BLOCK_SIZE..b * BLOCK_SIZE + block_len(b)]
                    .iter()
                    .map(|(x, y)| play_round(instance, &prepared, x.clone(), y.clone(), &mut outcomes))
                    .collect()
            })
        }
    };

    let successes = per_block.iter().flatten().filter(|r| r.pass).count();
    let estimate = successes as f64 / rounds as f64;
    let summary = SessionSummary {
        rounds,
        successes,
        estimate,
        std_error: (estimate * (1.0 - estimate) / rounds as f64).sqrt(),
    };
    let header = SessionHeader {
        inequality: instance.inequality().name().map(str::to_string),
        n: instance.n(),
        rounds,
        randomness: source.descriptor().clone(),
        outcome_seed,
        outcome_generator: PRNG_NAME.into(),
        block_size: BLOCK_SIZE,
        strategy_kind: strategy.kind().into(),
        strategy_hash: strategy.fingerprint(),
    };
    let rounds = if opts.retain_rounds { per_block.into_iter().flatten().collect() } else { Vec::new() };
    Ok(SessionLog { header, rounds, summary })
}

/// `Σ_x q(x)·P_x(Π a_i = S[Q(x)])`, summed exactly over all tuples and
/// outcomes.
pub fn exact_success(instance: &CcpInstance, strategy: &Strategy) -> Result<f64> {
    let prepared = PreparedStrategy::new(instance, strategy)?;
    let ineq = instance.inequality();
    let n = instance.n();
    Ok(instance
        .distribution()
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > 0.0)
        .map(|(k, q)| {
            let target = ineq.sign(k);
            let mass: f64 = prepared.outcomes[k]
                .iter()
                .enumerate()
                .filter(|(a, _)| (0..n).map(|p| sign_at(n, *a, p)).product::<i8>() == target)
                .map(|(_, p)| p)
                .sum();
            q * mass
        })
        .sum())
}

//! Exact classical (nonlocal hidden variable) bounds.
//!
//! A hidden-variable model for a causal structure is a convex mixture of
//! deterministic strategies, one response table per party over the inputs
//! it sees. The Bell expression is linear in that mixture, so its maximum
//! is attained at a deterministic strategy and enumeration is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::scenario::{sign_at, BellInequality, CausalScenario, CcpInstance};

/// Enumeration is refused above `2^CLASSICAL_GUARD_LOG2` strategies.
pub const CLASSICAL_GUARD_LOG2: u32 = 40;

/// Default guard for [`ccp_exhaustive_bound`]; the unrestricted three-party
/// search needs `2^24` and must be requested explicitly.
pub const DEFAULT_CCP_GUARD_LOG2: u32 = 16;

/// Output table of one party, indexed by visible-tuple index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseFunction {
    pub party: usize,
    pub table: Vec<i8>,
}

impl ResponseFunction {
    pub fn output(&self, setting: usize) -> i8 {
        self.table[setting]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    responses: Vec<ResponseFunction>,
}

impl DeterministicStrategy {
    /// One table per party, in party order.
    pub fn new(scenario: &CausalScenario, tables: Vec<Vec<i8>>) -> Result<Self> {
        let strategy = Self {
            responses: tables
                .into_iter()
                .enumerate()
                .map(|(party, table)| ResponseFunction { party, table })
                .collect(),
        };
        strategy.check(scenario)?;
        Ok(strategy)
    }

    /// Every party always answers `value`.
    pub fn constant(scenario: &CausalScenario, value: i8) -> Self {
        let tables = (0..scenario.n()).map(|p| vec![value; scenario.settings_count(p)]).collect();
        Self::new(scenario, tables).expect("constant tables match the scenario")
    }

    /// Bit `s` of `masks[p]` set means party `p` outputs −1 on setting `s`.
    pub fn from_masks(scenario: &CausalScenario, masks: &[u64]) -> Self {
        let tables = masks
            .iter()
            .enumerate()
            .map(|(p, mask)| (0..scenario.settings_count(p)).map(|s| mask_sign(*mask, s)).collect())
            .collect();
        Self::new(scenario, tables).expect("mask tables match the scenario")
    }

    pub fn responses(&self) -> &[ResponseFunction] {
        &self.responses
    }

    pub fn output(&self, party: usize, setting: usize) -> i8 {
        self.responses[party].table[setting]
    }

    /// Every table negated.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        out.responses.iter_mut().for_each(|r| r.table.iter_mut().for_each(|a| *a = -*a));
        out
    }

    pub fn check(&self, scenario: &CausalScenario) -> Result<()> {
        if self.responses.len() != scenario.n() {
            return Err(Error::Strategy(format!(
                "{} response tables for {} parties",
                self.responses.len(),
                scenario.n()
            )));
        }
        for (p, r) in self.responses.iter().enumerate() {
            if r.party != p {
                return Err(Error::Strategy(format!("response table {p} is labelled party {}", r.party)));
            }
            if r.table.len() != scenario.settings_count(p) {
                return Err(Error::Strategy(format!(
                    "party {} has {} table entries, its visibility requires {}",
                    p + 1,
                    r.table.len(),
                    scenario.settings_count(p)
                )));
            }
            if r.table.iter().any(|a| *a != 1 && *a != -1) {
                return Err(Error::Strategy(format!("party {} has a non-±1 output", p + 1)));
            }
        }
        Ok(())
    }

    /// `Π_i a_i` on the input tuple with index `tuple_index`.
    pub fn outcome_product(&self, scenario: &CausalScenario, tuple_index: usize) -> i8 {
        (0..scenario.n()).map(|p| self.output(p, scenario.setting_index(p, tuple_index))).product()
    }
}

#[inline]
fn mask_sign(mask: u64, bit: usize) -> i8 {
    if (mask >> bit) & 1 == 1 {
        -1
    } else {
        1
    }
}

/// `Σ_x Q(x) Π_i a_i(x|V_i)`
pub fn strategy_bell_value(strategy: &DeterministicStrategy, ineq: &BellInequality) -> Result<f64> {
    let scenario = ineq.scenario();
    strategy.check(scenario)?;
    Ok(ineq
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, q)| q * f64::from(strategy.outcome_product(scenario, k)))
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBound {
    pub value: f64,
    pub witness: DeterministicStrategy,
}

fn log2_strategy_space(entries_per_party: impl Iterator<Item = usize>) -> u32 {
    entries_per_party.map(|e| e as u32).sum()
}

/// Precomputed per-party setting index of every input tuple.
fn setting_table(scenario: &CausalScenario) -> Vec<Vec<usize>> {
    (0..scenario.n())
        .map(|p| (0..scenario.tuple_count()).map(|k| scenario.setting_index(p, k)).collect())
        .collect()
}

/// Exact maximum of the Bell expression over deterministic strategies.
///
/// Parties `1..n-1` are enumerated odometer-style, sharded over the first
/// party's table; for each such assignment the last party's best table is
/// read off setting by setting, which is exact because its contribution
/// decouples over its visible tuples. Ties keep the first maximizer in
/// enumeration order, and the last party answers +1 on ties.
pub fn classical_bound(ineq: &BellInequality) -> Result<ClassicalBound> {
    let scenario = ineq.scenario();
    let n = scenario.n();
    let log2 = log2_strategy_space((0..n).map(|p| scenario.settings_count(p)));
    if log2 > CLASSICAL_GUARD_LOG2 {
        return Err(Error::SearchSpace { log2_size: log2, log2_guard: CLASSICAL_GUARD_LOG2 });
    }
    let settings = setting_table(scenario);
    let tuples = scenario.tuple_count();
    let last = n - 1;
    let last_settings = scenario.settings_count(last);
    let coeffs = ineq.coeffs();

    // Table counts for parties 0..last; party 0's count is the shard count.
    let counts: Vec<u64> = (0..last).map(|p| 1u64 << scenario.settings_count(p)).collect();

    let shard_best = par::map_indexed(counts[0] as usize, |first_mask| {
        let mut masks = vec![0u64; last];
        masks[0] = first_mask as u64;
        let mut best: Option<(f64, Vec<u64>, u64)> = None;
        let mut acc = vec![0.0f64; last_settings];
        loop {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for k in 0..tuples {
                let product: i8 = (0..last).map(|p| mask_sign(masks[p], settings[p][k])).product();
                acc[settings[last][k]] += coeffs[k] * f64::from(product);
            }
            let value: f64 = acc.iter().map(|a| a.abs()).sum();
            if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                let last_mask = acc
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| **a < 0.0)
                    .fold(0u64, |m, (s, _)| m | (1 << s));
                best = Some((value, masks.clone(), last_mask));
            }
            // Odometer over parties 1..last, party last-1 fastest.
            let mut p = last;
            loop {
                if p == 1 {
                    return best.expect("at least one strategy");
                }
                p -= 1;
                masks[p] += 1;
                if masks[p] < counts[p] {
                    break;
                }
                masks[p] = 0;
            }
        }
    });

    let (value, mut masks, last_mask) = shard_best
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one shard");
    masks.push(last_mask);
    ineq.cache_classical_bound(value);
    Ok(ClassicalBound { value, witness: DeterministicStrategy::from_masks(scenario, &masks) })
}

/// `1/2 + B^C/(2Γ)`, using the cached bound when present.
pub fn classical_success_bound(ineq: &BellInequality) -> Result<f64> {
    let bound = match ineq.cached_classical_bound() {
        Some(b) => b,
        None => classical_bound(ineq)?.value,
    };
    Ok(0.5 + bound / (2.0 * ineq.gamma()))
}

/// Which one-bit messages the exhaustive CCP search ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageFamily {
    /// Any function `m_i(visible x, y_i)`.
    General,
    /// `m_i = y_i · h_i(visible x)`.
    ProductForm,
}

/// Message tables, indexed by `2·setting + [y_i = +1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStrategy {
    pub tables: Vec<Vec<i8>>,
}

impl MessageStrategy {
    pub fn message(&self, party: usize, setting: usize, y: i8) -> i8 {
        self.tables[party][2 * setting + usize::from(y > 0)]
    }

    /// Success probability of `party` when it guesses optimally given its
    /// visible inputs, its own `y` and every broadcast message.
    pub fn party_success(&self, instance: &CcpInstance, party: usize) -> f64 {
        let scenario = instance.inequality().scenario();
        let settings = setting_table(scenario);
        self.party_success_with(instance, party, &settings)
    }

    fn party_success_with(&self, instance: &CcpInstance, party: usize, settings: &[Vec<usize>]) -> f64 {
        let ineq = instance.inequality();
        let n = ineq.n();
        let tuples = 1usize << n;
        let y_scale = 1.0 / tuples as f64;
        // Information set: (own setting, own y, message vector).
        let mut margin = vec![0.0f64; (settings_len(settings, party)) * 2 * tuples];
        for k in 0..tuples {
            let q = instance.distribution()[k];
            if q == 0.0 {
                continue;
            }
            let s_own = settings[party][k];
            let sign = ineq.sign(k);
            for ybits in 0..tuples {
                let mut m_index = 0usize;
                let mut y_product = 1i8;
                for p in 0..n {
                    let y = sign_at(n, ybits, p);
                    y_product *= y;
                    let m = self.message(p, settings[p][k], y);
                    m_index = (m_index << 1) | usize::from(m > 0);
                }
                let y_own = sign_at(n, ybits, party);
                let key = (s_own * 2 + usize::from(y_own > 0)) * tuples + m_index;
                margin[key] += q * y_scale * f64::from(y_product * sign);
            }
        }
        // Success = Σ_keys max(w₊, w₋) = (1 + Σ_keys |w₊ − w₋|)/2.
        0.5 + 0.5 * margin.iter().map(|m| m.abs()).sum::<f64>()
    }
}

fn settings_len(settings: &[Vec<usize>], party: usize) -> usize {
    settings[party].iter().copied().max().unwrap_or(0) + 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcpBound {
    pub value: f64,
    pub party: usize,
    pub messages: MessageStrategy,
    pub family: MessageFamily,
}

/// Best classical success probability over every message strategy in
/// `family`, each party guessing pointwise-optimally; the maximum is also
/// taken over which party's guess is scored.
pub fn ccp_exhaustive_bound(
    instance: &CcpInstance,
    family: MessageFamily,
    guard_log2: u32,
) -> Result<CcpBound> {
    let scenario = instance.inequality().scenario();
    let n = scenario.n();
    let entries: Vec<usize> = (0..n)
        .map(|p| match family {
            MessageFamily::General => 2 * scenario.settings_count(p),
            MessageFamily::ProductForm => scenario.settings_count(p),
        })
        .collect();
    let log2 = log2_strategy_space(entries.iter().copied());
    if log2 > guard_log2 || entries.iter().any(|e| *e >= 64) {
        return Err(Error::SearchSpace { log2_size: log2, log2_guard: guard_log2 });
    }
    let settings = setting_table(scenario);
    let counts: Vec<u64> = entries.iter().map(|e| 1u64 << e).collect();

    let build = |masks: &[u64]| MessageStrategy {
        tables: masks
            .iter()
            .enumerate()
            .map(|(p, &mask)| match family {
                MessageFamily::General => (0..entries[p]).map(|i| mask_sign(mask, i)).collect(),
                MessageFamily::ProductForm => (0..entries[p])
                    .flat_map(|s| {
                        let h = mask_sign(mask, s);
                        [-h, h]
                    })
                    .collect(),
            })
            .collect(),
    };

    let shard_best = par::map_indexed(counts[0] as usize, |first| {
        let mut masks = vec![0u64; n];
        masks[0] = first as u64;
        let mut best: Option<(f64, usize, Vec<u64>)> = None;
        loop {
            let strategy = build(&masks);
            for party in 0..n {
                let value = strategy.party_success_with(instance, party, &settings);
                if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                    best = Some((value, party, masks.clone()));
                }
            }
            let mut p = n;
            loop {
                if p == 1 {
                    return best.expect("at least one strategy");
                }
                p -= 1;
                masks[p] += 1;
                if masks[p] < counts[p] {
                    break;
                }
                masks[p] = 0;
            }
        }
    });
    let (value, party, masks) = shard_best
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one shard");
    Ok(CcpBound { value, party, messages: build(&masks), family })
}

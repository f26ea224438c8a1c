//! Quantum strategies: a shared state plus one binary qubit observable per
//! party per visible-input tuple.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par;
use crate::scenario::{sign_at, BellInequality, CausalScenario, InputTuple};
use crate::tensor::{depolarize, ghz_state, Mat2, Observable2, PureState, State, C64, TOLERANCE};

/// White-noise visibility matching the measured GYNI value 7.023 against the
/// ideal 7.3909.
pub const EXPERIMENT_VISIBILITY: f64 = 7.023 / 7.3909;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumStrategy {
    scenario: CausalScenario,
    state: State,
    observables: Vec<Vec<Observable2>>,
}

impl QuantumStrategy {
    /// `observables[p][s]` is party `p`'s observable on visible tuple `s`.
    pub fn new(scenario: CausalScenario, state: State, observables: Vec<Vec<Observable2>>) -> Result<Self> {
        if state.n() != scenario.n() {
            return Err(Error::Strategy(format!(
                "state has {} qubits, scenario has {} parties",
                state.n(),
                scenario.n()
            )));
        }
        if observables.len() != scenario.n() {
            return Err(Error::Strategy(format!(
                "{} observable tables for {} parties",
                observables.len(),
                scenario.n()
            )));
        }
        for (p, table) in observables.iter().enumerate() {
            if table.len() != scenario.settings_count(p) {
                return Err(Error::Strategy(format!(
                    "party {} has {} observables, its visibility requires {}",
                    p + 1,
                    table.len(),
                    scenario.settings_count(p)
                )));
            }
        }
        Ok(Self { scenario, state, observables })
    }

    pub fn scenario(&self) -> &CausalScenario {
        &self.scenario
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn observables(&self) -> &[Vec<Observable2>] {
        &self.observables
    }

    pub fn observable(&self, party: usize, setting: usize) -> Observable2 {
        self.observables[party][setting]
    }

    pub fn with_state(&self, state: State) -> Result<Self> {
        Self::new(self.scenario.clone(), state, self.observables.clone())
    }

    /// Replaces the state by its depolarized version. Only pure states can
    /// be depolarized.
    pub fn depolarized(&self, v: f64) -> Result<Self> {
        match &self.state {
            State::Pure(psi) => self.with_state(depolarize(psi, v)?.into()),
            State::Mixed(_) => Err(Error::Strategy("cannot depolarize a mixed state".into())),
        }
    }

    /// Observable matrices measured on input tuple `tuple_index`, in party order.
    pub(crate) fn factors(&self, tuple_index: usize) -> Vec<Mat2> {
        (0..self.scenario.n())
            .map(|p| self.observables[p][self.scenario.setting_index(p, tuple_index)].matrix())
            .collect()
    }
}

/// Full correlators `E(x)`, indexed by tuple index.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorTable {
    n: usize,
    values: Vec<f64>,
}

impl CorrelatorTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, found: values.len() });
        }
        if let Some(e) = values.iter().find(|e| !e.is_finite() || e.abs() > 1.0 + TOLERANCE) {
            return Err(Error::Numeric(format!("correlator {e} outside [-1, 1]")));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: &InputTuple) -> f64 {
        self.values[x.index()]
    }

    /// Header `x_1,…,x_n,E`, one row per tuple, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.n {
            let _ = write!(out, "x_{i},");
        }
        out.push_str("E\n");
        for (k, e) in self.values.iter().enumerate() {
            for i in 0..self.n {
                let _ = write!(out, "{},", sign_at(self.n, k, i));
            }
            let _ = writeln!(out, "{}", format_significant(*e, 12));
        }
        out
    }
}

/// Formats `value` with `digits` significant digits, trimming trailing zeros.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".into();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{value:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn clamp_unit(e: f64) -> Result<f64> {
    if !e.is_finite() || e.abs() > 1.0 + TOLERANCE {
        return Err(Error::Numeric(format!("correlator {e} outside [-1, 1]")));
    }
    Ok(e.clamp(-1.0, 1.0))
}

/// `E(x) = ⟨⊗_i A_i^{x|V_i}⟩` for every input tuple.
pub fn correlator_table(strategy: &QuantumStrategy) -> Result<CorrelatorTable> {
    let n = strategy.scenario.n();
    let values = par::try_map_indexed(1 << n, |k| {
        clamp_unit(strategy.state.product_expectation(&strategy.factors(k))?)
    })?;
    Ok(CorrelatorTable { n, values })
}

/// `B = Σ_x Q(x) E(x)`
pub fn bell_value(table: &CorrelatorTable, ineq: &BellInequality) -> Result<f64> {
    if table.values.len() != ineq.coeffs().len() {
        return Err(Error::DimensionMismatch { expected: ineq.coeffs().len(), found: table.values.len() });
    }
    Ok(ineq.coeffs().iter().zip(&table.values).map(|(q, e)| q * e).sum())
}

/// `B/Γ`
pub fn normalized_bell_value(table: &CorrelatorTable, ineq: &BellInequality) -> Result<f64> {
    Ok(bell_value(table, ineq)? / ineq.gamma())
}

/// `1/2 + B/(2Γ)`.
pub fn success_probability(bell_value: f64, gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Inequality(format!("Γ = {gamma} must be positive")));
    }
    let p = 0.5 + bell_value / (2.0 * gamma);
    if !p.is_finite() || !(-TOLERANCE..=1.0 + TOLERANCE).contains(&p) {
        return Err(Error::Numeric(format!(
            "Bell value {bell_value} with Γ = {gamma} gives success probability {p}"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Joint outcome distribution `p(a|x)` indexed by outcome-tuple index.
pub fn outcome_distribution(strategy: &QuantumStrategy, tuple_index: usize) -> Result<Vec<f64>> {
    let scenario = &strategy.scenario;
    let n = scenario.n();
    let observables: Vec<Observable2> =
        (0..n).map(|p| strategy.observables[p][scenario.setting_index(p, tuple_index)]).collect();
    let mut probs = Vec::with_capacity(1 << n);
    for a in 0..(1usize << n) {
        let projectors: Vec<Mat2> = (0..n).map(|p| observables[p].projector(sign_at(n, a, p))).collect();
        let p = strategy.state.product_expectation(&projectors)?;
        if p < -TOLERANCE {
            return Err(Error::Numeric(format!("negative outcome probability {p}")));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > TOLERANCE {
        return Err(Error::Numeric(format!("outcome distribution sums to {total}")));
    }
    Ok(probs)
}

/// Named measurement presets on the three-qubit GHZ state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalStrategy {
    GyniPaper,
    SvetlichnyPaper,
    /// `GyniPaper` under white noise of visibility [`EXPERIMENT_VISIBILITY`].
    ExperimentLike,
}

impl CanonicalStrategy {
    pub const ALL: [CanonicalStrategy; 3] =
        [CanonicalStrategy::GyniPaper, CanonicalStrategy::SvetlichnyPaper, CanonicalStrategy::ExperimentLike];

    pub fn name(&self) -> &'static str {
        match self {
            CanonicalStrategy::GyniPaper => "gyni-paper",
            CanonicalStrategy::SvetlichnyPaper => "svetlichny-paper",
            CanonicalStrategy::ExperimentLike => "experiment-like",
        }
    }

    /// The inequality the preset is meant for.
    pub fn inequality_name(&self) -> &'static str {
        match self {
            CanonicalStrategy::SvetlichnyPaper => "svetlichny",
            _ => "gyni",
        }
    }
}

impl FromStr for CanonicalStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown strategy '{s}' (expected gyni-paper, svetlichny-paper or experiment-like)"
            ))
        })
    }
}

fn xy(x: f64, y: f64) -> Observable2 {
    Observable2::from_bloch([x, y, 0.0]).expect("preset Bloch vectors are near unit norm")
}

/// Observables keyed by visible tuple in enumeration order
/// `(−,−), (−,+), (+,−), (+,+)`.
fn gyni_observables() -> Vec<Vec<Observable2>> {
    let s = FRAC_1_SQRT_2;
    vec![
        // Alice sees (x1, x3).
        vec![xy(0.0, 1.0), xy(1.0, 0.0), xy(0.0, -1.0), xy(0.0, 1.0)],
        // Bob sees (x2, x1).
        vec![xy(-s, s), xy(0.0, 1.0), xy(-s, s), xy(1.0, 0.0)],
        // Charlie sees (x3, x2).
        vec![xy(0.92, -0.38), xy(-0.38, 0.92), xy(-0.92, -0.38), xy(-0.38, -0.92)],
    ]
}

/// Parties 1 and 2 ignore the communicated input; tables are still keyed
/// by the full visible tuple.
fn svetlichny_observables() -> Vec<Vec<Observable2>> {
    let s = FRAC_1_SQRT_2;
    let a_minus = xy(-s, -s);
    let a_plus = xy(-s, s);
    let b_plus = xy(0.0, 1.0);
    let b_minus = xy(-1.0, 0.0);
    vec![
        vec![a_minus, a_minus, a_plus, a_plus],
        vec![b_minus, b_minus, b_plus, b_plus],
        vec![xy(0.0, 1.0), xy(1.0, 0.0)],
    ]
}

pub fn canonical_strategy(which: CanonicalStrategy) -> QuantumStrategy {
    let ghz: State = ghz_state(3).expect("n = 3").into();
    let strategy = match which {
        CanonicalStrategy::GyniPaper | CanonicalStrategy::ExperimentLike => {
            QuantumStrategy::new(CausalScenario::gyni(), ghz, gyni_observables())
        }
        CanonicalStrategy::SvetlichnyPaper => {
            QuantumStrategy::new(CausalScenario::svetlichny(), ghz, svetlichny_observables())
        }
    }
    .expect("preset strategies are consistent");
    match which {
        CanonicalStrategy::ExperimentLike => {
            strategy.depolarized(EXPERIMENT_VISIBILITY).expect("visibility in [0, 1]")
        }
        _ => strategy,
    }
}

pub fn canonical_strategy_by_name(name: &str) -> Result<QuantumStrategy> {
    Ok(canonical_strategy(name.parse()?))
}

/// Uniform point on the Bloch sphere from a normalized Gaussian triple.
pub fn random_observable<R: Rng + ?Sized>(rng: &mut R) -> Observable2 {
    loop {
        let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        if let Some(o) = Observable2::from_direction(g) {
            return o;
        }
    }
}

pub fn random_observables<R: Rng + ?Sized>(scenario: &CausalScenario, rng: &mut R) -> Vec<Vec<Observable2>> {
    (0..scenario.n())
        .map(|p| (0..scenario.settings_count(p)).map(|_| random_observable(rng)).collect())
        .collect()
}

/// Haar-random pure state from normalized complex Gaussian amplitudes.
pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    let amps =
        (0..1usize << n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    PureState::normalized(amps)
}

//! See-saw maximization of Bell values over qubit observables, with an
//! optional top-eigenvector state update.
//!
//! With everything but one observable fixed, the Bell value is affine in
//! that observable's Bloch vector: `B = c + r·g` where `g_j` is the partial
//! Bell value with `σ_j` substituted in the slot. The update `r ← g/|g|` is
//! therefore the exact per-slot maximum and a sweep never lowers `B`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::quantum::{random_observables, QuantumStrategy};
use crate::scenario::{BellInequality, MAX_PARTIES};
use crate::tensor::{ghz_state, tensor_product, Mat2, Matrix, Observable2, PureState, State, C64, PAULIS};

/// Below this gradient norm a slot keeps its previous observable.
pub const DEGENERATE_GRADIENT: f64 = 1e-14;

/// Restarts within this margin of the best value do not replace it.
pub const RESTART_TIE_MARGIN: f64 = 1e-12;

pub const POWER_ITERATION_TOL: f64 = 1e-12;
pub const POWER_ITERATION_MAX: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
    pub optimize_state: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { restarts: 32, max_sweeps: 500, tol: 1e-12, seed: 0, optimize_state: false }
    }
}

impl OptimizerOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best_value: f64,
    pub strategy: QuantumStrategy,
    /// Sweeps used by the winning restart.
    pub sweeps_used: usize,
    /// Bell value before the first sweep and after every sweep of the
    /// winning restart.
    pub value_trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
    /// Slot updates skipped because the gradient vanished.
    pub degenerate_updates: usize,
}

/// Tuple indices sharing each (party, setting) slot.
struct SlotIndex {
    slots: Vec<Vec<Vec<usize>>>,
}

impl SlotIndex {
    fn new(ineq: &BellInequality) -> Self {
        let scenario = ineq.scenario();
        let slots = (0..scenario.n())
            .map(|p| {
                let mut per_setting = vec![Vec::new(); scenario.settings_count(p)];
                for k in 0..scenario.tuple_count() {
                    if ineq.coeffs()[k] != 0.0 {
                        per_setting[scenario.setting_index(p, k)].push(k);
                    }
                }
                per_setting
            })
            .collect();
        Self { slots }
    }
}

fn total_value(ineq: &BellInequality, state: &State, observables: &[Vec<Observable2>]) -> Result<f64> {
    let scenario = ineq.scenario();
    let mut total = 0.0;
    for (k, q) in ineq.coeffs().iter().enumerate() {
        if *q == 0.0 {
            continue;
        }
        let factors: Vec<Mat2> =
            (0..scenario.n()).map(|p| observables[p][scenario.setting_index(p, k)].matrix()).collect();
        total += q * state.product_expectation(&factors)?;
    }
    Ok(total)
}

/// One pass over all slots. Returns the number of degenerate slots.
fn sweep(
    ineq: &BellInequality,
    index: &SlotIndex,
    state: &State,
    observables: &mut [Vec<Observable2>],
) -> Result<usize> {
    let scenario = ineq.scenario();
    let n = scenario.n();
    let mut degenerate = 0;
    for party in 0..n {
        for setting in 0..scenario.settings_count(party) {
            let mut gradient = [0.0f64; 3];
            for &k in &index.slots[party][setting] {
                let mut factors: Vec<Mat2> =
                    (0..n).map(|p| observables[p][scenario.setting_index(p, k)].matrix()).collect();
                for (j, pauli) in PAULIS.iter().enumerate() {
                    factors[party] = *pauli;
                    gradient[j] += ineq.coeffs()[k] * state.product_expectation(&factors)?;
                }
            }
            let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < DEGENERATE_GRADIENT {
                degenerate += 1;
                continue;
            }
            observables[party][setting] =
                Observable2::from_direction(gradient).ok_or_else(|| Error::Numeric("non-finite gradient".into()))?;
        }
    }
    Ok(degenerate)
}

struct RestartOutcome {
    value: f64,
    state: State,
    observables: Vec<Vec<Observable2>>,
    trace: Vec<f64>,
    degenerate: usize,
}

fn run_restart(
    ineq: &BellInequality,
    index: &SlotIndex,
    initial_state: &State,
    opts: &OptimizerOptions,
    restart: usize,
    update_state: bool,
) -> Result<RestartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let mut observables = random_observables(ineq.scenario(), &mut rng);
    let mut state = initial_state.clone();
    let mut value = total_value(ineq, &state, &observables)?;
    let mut trace = vec![value];
    let mut degenerate = 0;
    for _ in 0..opts.max_sweeps {
        degenerate += sweep(ineq, index, &state, &mut observables)?;
        let mut next = total_value(ineq, &state, &observables)?;
        if update_state {
            let (psi, top) = optimal_state(ineq, &observables)?;
            if top > next {
                state = psi.into();
                next = total_value(ineq, &state, &observables)?;
            }
        }
        trace.push(next);
        let gain = next - value;
        value = next;
        if gain < opts.tol {
            break;
        }
    }
    Ok(RestartOutcome { value, state, observables, trace, degenerate })
}

fn best_of(
    ineq: &BellInequality,
    initial_state: &State,
    opts: &OptimizerOptions,
    update_state: bool,
) -> Result<OptimizationResult> {
    opts.validate()?;
    if initial_state.n() != ineq.n() {
        return Err(Error::DimensionMismatch { expected: ineq.n(), found: initial_state.n() });
    }
    let index = SlotIndex::new(ineq);
    let outcomes =
        par::try_map_indexed(opts.restarts, |r| run_restart(ineq, &index, initial_state, opts, r, update_state))?;
    let mut best: Option<(usize, RestartOutcome)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        if best.as_ref().is_none_or(|(_, b)| outcome.value > b.value + RESTART_TIE_MARGIN) {
            best = Some((r, outcome));
        }
    }
    let (restart, outcome) = best.expect("restarts >= 1");
    let strategy = QuantumStrategy::new(ineq.scenario().clone(), outcome.state, outcome.observables)?;
    Ok(OptimizationResult {
        best_value: outcome.value,
        strategy,
        sweeps_used: outcome.trace.len() - 1,
        value_trace: outcome.trace,
        restart,
        degenerate_updates: outcome.degenerate,
    })
}

/// See-saw over observables with the state held fixed.
pub fn seesaw_measurements(
    ineq: &BellInequality,
    state: &State,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    best_of(ineq, state, opts, false)
}

/// `Σ_x Q(x) ⊗_i A_i^{x|V_i}` as a dense matrix.
pub fn bell_operator(ineq: &BellInequality, observables: &[Vec<Observable2>]) -> Result<Matrix> {
    let scenario = ineq.scenario();
    let n = scenario.n();
    if observables.len() != n {
        return Err(Error::Strategy(format!("{} observable tables for {n} parties", observables.len())));
    }
    let mut op = Matrix::zeros(1 << n);
    for (k, q) in ineq.coeffs().iter().enumerate() {
        if *q == 0.0 {
            continue;
        }
        let factors: Vec<Mat2> = (0..n)
            .map(|p| {
                observables[p]
                    .get(scenario.setting_index(p, k))
                    .map(Observable2::matrix)
                    .ok_or_else(|| Error::Strategy(format!("party {} is missing observables", p + 1)))
            })
            .collect::<Result<_>>()?;
        op.add_scaled_in_place(tensor_product(&factors)?.matrix(), *q)?;
    }
    Ok(op)
}

/// Top eigenpair of the Bell operator by power iteration on `B + Γ·I`,
/// which is positive semidefinite since `‖B‖ ≤ Γ`.
pub fn optimal_state(ineq: &BellInequality, observables: &[Vec<Observable2>]) -> Result<(PureState, f64)> {
    let shift = ineq.gamma();
    let mut shifted = bell_operator(ineq, observables)?;
    shifted.add_scaled_in_place(&Matrix::identity(shifted.dim()), shift)?;
    let dim = shifted.dim();

    // Fixed generic start vector so results are reproducible.
    let mut v: Vec<C64> = (0..dim)
        .map(|j| {
            let t = (j as f64 + 1.0) * 0.7548776662466927;
            C64::new(1.0 + 0.5 * t.fract(), 0.25 * (t * 1.3247179572447).fract())
        })
        .collect();
    normalize(&mut v);
    let mut lambda = f64::NEG_INFINITY;
    for iteration in 1..=POWER_ITERATION_MAX {
        let w = shifted.mul_vec(&v)?;
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let residual = v.iter().zip(&w).map(|(a, b)| (b - a * rayleigh).norm_sqr()).sum::<f64>().sqrt();
        let converged = (rayleigh - lambda).abs() < POWER_ITERATION_TOL && residual < 1e-6;
        lambda = rayleigh;
        if converged {
            let psi = PureState::normalized(v)?;
            return Ok((psi, lambda - shift));
        }
        v = w;
        if normalize(&mut v) == 0.0 {
            return Err(Error::Numeric("power iteration collapsed to the zero vector".into()));
        }
        if iteration == POWER_ITERATION_MAX {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: POWER_ITERATION_MAX })
}

fn normalize(v: &mut [C64]) -> f64 {
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

/// See-saw from the GHZ state, alternating with state updates when
/// `opts.optimize_state` is set.
pub fn optimize(ineq: &BellInequality, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    if ineq.n() > MAX_PARTIES {
        return Err(Error::Scenario(format!("optimizer supports at most {MAX_PARTIES} parties")));
    }
    let ghz: State = ghz_state(ineq.n())?.into();
    best_of(ineq, &ghz, opts, opts.optimize_state)
}

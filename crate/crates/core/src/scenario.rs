//! Causal structures, full-correlator Bell inequalities and the associated
//! communication-complexity instance.
//!
//! Parties and inputs are 0-based in this API. Input tuples are enumerated
//! lexicographically with `x_1` most significant and `-1` before `+1`, so
//! tuple index bit `n-1-i` is set exactly when `x_i = +1`. The same ordering
//! is used for each party's visible tuple (first visible input most
//! significant) and for outcome tuples.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PARTIES: usize = 2;
pub const MAX_PARTIES: usize = 6;

/// Tolerance on the total mass of an input distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

/// A tuple of ±1 values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct InputTuple(Vec<i8>);

impl InputTuple {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v != 1 && **v != -1) {
            return Err(Error::Config(format!("tuple entry {v} is not ±1")));
        }
        Ok(Self(values))
    }

    pub fn from_index(len: usize, index: usize) -> Self {
        Self((0..len).map(|i| bit_to_sign((index >> (len - 1 - i)) & 1)).collect())
    }

    pub fn index(&self) -> usize {
        signs_to_index(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn product(&self) -> i8 {
        self.0.iter().product()
    }
}

impl TryFrom<Vec<i8>> for InputTuple {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<InputTuple> for Vec<i8> {
    fn from(t: InputTuple) -> Self {
        t.0
    }
}

impl fmt::Display for InputTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            f.write_str(if *v > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

#[inline]
pub fn bit_to_sign(bit: usize) -> i8 {
    if bit == 0 {
        -1
    } else {
        1
    }
}

#[inline]
pub fn signs_to_index(signs: &[i8]) -> usize {
    signs.iter().fold(0, |acc, s| (acc << 1) | usize::from(*s > 0))
}

/// Entry `i` of the tuple with index `k` in an `n`-entry enumeration.
#[inline]
pub fn sign_at(n: usize, k: usize, i: usize) -> i8 {
    bit_to_sign((k >> (n - 1 - i)) & 1)
}

/// Which inputs each party's response may depend on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CausalScenario {
    n: usize,
    visibility: Vec<Vec<usize>>,
}

impl CausalScenario {
    /// `visibility[i]` lists the 0-based inputs party `i` sees; it must start
    /// with `i` itself and contain no duplicates.
    pub fn new(n: usize, visibility: Vec<Vec<usize>>) -> Result<Self> {
        if !(MIN_PARTIES..=MAX_PARTIES).contains(&n) {
            return Err(Error::Scenario(format!(
                "party count {n} outside {MIN_PARTIES}..={MAX_PARTIES}"
            )));
        }
        if visibility.len() != n {
            return Err(Error::Scenario(format!(
                "expected {n} visibility lists, found {}",
                visibility.len()
            )));
        }
        for (party, visible) in visibility.iter().enumerate() {
            match visible.first() {
                None => {
                    return Err(Error::Scenario(format!("party {} sees no inputs", party + 1)));
                }
                Some(&first) if first != party => {
                    return Err(Error::Scenario(format!(
                        "party {}'s visible inputs must start with its own input {}, found {}",
                        party + 1,
                        party + 1,
                        first + 1
                    )));
                }
                _ => {}
            }
            for (pos, &input) in visible.iter().enumerate() {
                if input >= n {
                    return Err(Error::Scenario(format!(
                        "party {} lists input {} but there are only {n} inputs",
                        party + 1,
                        input + 1
                    )));
                }
                if visible[..pos].contains(&input) {
                    return Err(Error::Scenario(format!(
                        "party {} lists input {} twice",
                        party + 1,
                        input + 1
                    )));
                }
            }
        }
        Ok(Self { n, visibility })
    }

    /// Same as [`CausalScenario::new`] with 1-based party labels, as used in
    /// config files.
    pub fn from_one_based(n: usize, visibility: Vec<Vec<usize>>) -> Result<Self> {
        let zero_based = visibility
            .into_iter()
            .map(|v| {
                v.into_iter()
                    .map(|i| {
                        i.checked_sub(1)
                            .ok_or_else(|| Error::Scenario("party labels start at 1".into()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, zero_based)
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.visibility.iter().map(|v| v.iter().map(|i| i + 1).collect()).collect()
    }

    /// No communication: every party sees only its own input.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| vec![i]).collect())
    }

    /// Every party sees every input (own input first).
    pub fn full_visibility(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n)
                .map(|i| std::iter::once(i).chain((0..n).filter(|&j| j != i)).collect())
                .collect(),
        )
    }

    /// Three-party ring: party `i` also sees the input of party `i-1`.
    pub fn gyni() -> Self {
        Self { n: 3, visibility: vec![vec![0, 2], vec![1, 0], vec![2, 1]] }
    }

    /// Parties 1 and 2 exchange inputs, party 3 sees only its own.
    pub fn svetlichny() -> Self {
        Self { n: 3, visibility: vec![vec![0, 1], vec![1, 0], vec![2]] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn visible(&self, party: usize) -> &[usize] {
        &self.visibility[party]
    }

    pub fn visibility(&self) -> &[Vec<usize>] {
        &self.visibility
    }

    pub fn visible_count(&self, party: usize) -> usize {
        self.visibility[party].len()
    }

    /// Number of distinct settings (visible tuples) of `party`.
    pub fn settings_count(&self, party: usize) -> usize {
        1 << self.visibility[party].len()
    }

    pub fn tuple_count(&self) -> usize {
        1 << self.n
    }

    /// Index of the visible tuple party `party` receives under the input
    /// tuple with index `tuple_index`.
    pub fn setting_index(&self, party: usize, tuple_index: usize) -> usize {
        let n = self.n;
        self.visibility[party]
            .iter()
            .fold(0, |acc, &input| (acc << 1) | ((tuple_index >> (n - 1 - input)) & 1))
    }

    /// The ±1 values party `party` sees under input tuple `x`.
    pub fn restrict(&self, party: usize, x: &InputTuple) -> InputTuple {
        InputTuple(self.visibility[party].iter().map(|&i| x.0[i]).collect())
    }

    /// Whether every party in `self` sees at least what it sees in `other`.
    pub fn contains(&self, other: &CausalScenario) -> bool {
        self.n == other.n
            && self
                .visibility
                .iter()
                .zip(&other.visibility)
                .all(|(mine, theirs)| theirs.iter().all(|i| mine.contains(i)))
    }
}

/// A full-correlator Bell inequality `Σ_x Q(x) E_x ≤ B^C`.
#[derive(Clone, Debug)]
pub struct BellInequality {
    name: Option<String>,
    scenario: CausalScenario,
    coeffs: Vec<f64>,
    gamma: f64,
    integral: bool,
    classical_bound_cache: OnceLock<f64>,
}

impl PartialEq for BellInequality {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.scenario == other.scenario
            && self.coeffs == other.coeffs
            && self.gamma == other.gamma
    }
}

impl BellInequality {
    /// `coeffs` is indexed by tuple index.
    pub fn new(scenario: CausalScenario, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != scenario.tuple_count() {
            return Err(Error::Inequality(format!(
                "expected {} coefficients, found {}",
                scenario.tuple_count(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|q| !q.is_finite()) {
            return Err(Error::Inequality("non-finite coefficient".into()));
        }
        let gamma: f64 = coeffs.iter().map(|q| q.abs()).sum();
        if gamma <= 0.0 {
            return Err(Error::Inequality("all coefficients are zero".into()));
        }
        let integral = coeffs.iter().all(|q| q.fract() == 0.0 && q.abs() < 2f64.powi(52));
        Ok(Self { name: None, scenario, coeffs, gamma, integral, classical_bound_cache: OnceLock::new() })
    }

    pub fn from_fn(scenario: CausalScenario, q: impl Fn(&InputTuple) -> f64) -> Result<Self> {
        let n = scenario.n();
        let coeffs = (0..scenario.tuple_count()).map(|k| q(&InputTuple::from_index(n, k))).collect();
        Self::new(scenario, coeffs)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn scenario(&self) -> &CausalScenario {
        &self.scenario
    }

    pub fn n(&self) -> usize {
        self.scenario.n()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, x: &InputTuple) -> f64 {
        self.coeffs[x.index()]
    }

    /// `Γ = Σ_x |Q(x)|`
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when every coefficient is an integer, in which case Bell values
    /// of deterministic strategies are computed exactly.
    pub fn is_integral(&self) -> bool {
        self.integral
    }

    /// `S[Q(x)]` with the convention `S[0] = +1`.
    pub fn sign(&self, tuple_index: usize) -> i8 {
        if self.coeffs[tuple_index] < 0.0 {
            -1
        } else {
            1
        }
    }

    pub fn cached_classical_bound(&self) -> Option<f64> {
        self.classical_bound_cache.get().copied()
    }

    pub(crate) fn cache_classical_bound(&self, value: f64) {
        let _ = self.classical_bound_cache.set(value);
    }

    /// Same coefficients on a different causal structure.
    pub fn with_scenario(&self, scenario: CausalScenario) -> Result<Self> {
        let mut out = Self::new(scenario, self.coeffs.clone())?;
        out.name = self.name.clone();
        Ok(out)
    }
}

/// `Q_G(x) = 1 − (1−x₁)(1−x₂)(1−x₃)/4`: +1 everywhere except `Q_G(−,−,−) = −1`.
pub fn gyni_inequality() -> BellInequality {
    BellInequality::from_fn(CausalScenario::gyni(), |x| {
        let v = x.values().iter().map(|&s| f64::from(s));
        1.0 - v.map(|s| 1.0 - s).product::<f64>() / 4.0
    })
    .expect("static inequality")
    .with_name("gyni")
}

/// `Q_S(x) = 1 − Π(1−xᵢ)/4 − Π(1+xᵢ)/4`: −1 on the two constant tuples.
pub fn svetlichny_inequality() -> BellInequality {
    BellInequality::from_fn(CausalScenario::svetlichny(), |x| {
        let minus: f64 = x.values().iter().map(|&s| 1.0 - f64::from(s)).product();
        let plus: f64 = x.values().iter().map(|&s| 1.0 + f64::from(s)).product();
        1.0 - minus / 4.0 - plus / 4.0
    })
    .expect("static inequality")
    .with_name("svetlichny")
}

/// Two parties without communication, `Q = (1, 1, 1, −1)` in tuple order.
pub fn chsh_inequality() -> BellInequality {
    BellInequality::new(CausalScenario::standard(2).expect("n = 2"), vec![1.0, 1.0, 1.0, -1.0])
        .expect("static inequality")
        .with_name("chsh")
}

pub fn named_inequality(name: &str) -> Result<BellInequality> {
    match name {
        "gyni" => Ok(gyni_inequality()),
        "svetlichny" => Ok(svetlichny_inequality()),
        "chsh" => Ok(chsh_inequality()),
        other => Err(Error::Config(format!(
            "unknown inequality '{other}' (expected gyni, svetlichny or chsh)"
        ))),
    }
}

/// `q*(x) = |Q(x)|/Γ`, indexed by tuple index.
pub fn input_distribution(ineq: &BellInequality) -> Vec<f64> {
    ineq.coeffs.iter().map(|q| q.abs() / ineq.gamma).collect()
}

/// `f(x, y) = y₁⋯yₙ·S[Q(x)]`.
pub fn target_function(ineq: &BellInequality, x: &InputTuple, y: &[i8]) -> i8 {
    y.iter().product::<i8>() * ineq.sign(x.index())
}

/// A communication-complexity instance: the inequality fixes the target
/// function, the distribution fixes how inputs are drawn.
#[derive(Clone, Debug, PartialEq)]
pub struct CcpInstance {
    inequality: BellInequality,
    distribution: Vec<f64>,
}

impl CcpInstance {
    /// Uses the matched distribution `q*`.
    pub fn new(inequality: BellInequality) -> Self {
        let distribution = input_distribution(&inequality);
        Self { inequality, distribution }
    }

    pub fn with_distribution(inequality: BellInequality, distribution: Vec<f64>) -> Result<Self> {
        if distribution.len() != inequality.scenario.tuple_count() {
            return Err(Error::Config(format!(
                "distribution has {} entries, expected {}",
                distribution.len(),
                inequality.scenario.tuple_count()
            )));
        }
        if distribution.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("distribution has a negative or non-finite entry".into()));
        }
        let total: f64 = distribution.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::Config(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self { inequality, distribution })
    }

    pub fn inequality(&self) -> &BellInequality {
        &self.inequality
    }

    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }

    pub fn n(&self) -> usize {
        self.inequality.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[i8]) -> InputTuple {
        InputTuple::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tuple_order_is_lexicographic_minus_first() {
        assert_eq!(InputTuple::from_index(3, 0).values(), &[-1, -1, -1]);
        assert_eq!(InputTuple::from_index(3, 1).values(), &[-1, -1, 1]);
        assert_eq!(InputTuple::from_index(3, 4).values(), &[1, -1, -1]);
        assert_eq!(InputTuple::from_index(3, 7).values(), &[1, 1, 1]);
        for k in 0..8 {
            assert_eq!(InputTuple::from_index(3, k).index(), k);
        }
        assert!(InputTuple::new(vec![1, 0]).is_err());
    }

    #[test]
    fn named_structures_validate() {
        let g = CausalScenario::from_one_based(3, vec![vec![1, 3], vec![2, 1], vec![3, 2]]).unwrap();
        assert_eq!(g, CausalScenario::gyni());
        let s = CausalScenario::from_one_based(3, vec![vec![1, 2], vec![2, 1], vec![3]]).unwrap();
        assert_eq!(s, CausalScenario::svetlichny());
        let b = CausalScenario::from_one_based(2, vec![vec![1], vec![2]]).unwrap();
        assert_eq!(b, CausalScenario::standard(2).unwrap());
    }

    #[test]
    fn invalid_structures_are_rejected() {
        let own_missing = CausalScenario::new(2, vec![vec![1], vec![1]]);
        assert!(matches!(own_missing, Err(Error::Scenario(m)) if m.contains("own input")));
        let dup = CausalScenario::new(2, vec![vec![0, 0], vec![1]]);
        assert!(matches!(dup, Err(Error::Scenario(m)) if m.contains("twice")));
        let range = CausalScenario::new(2, vec![vec![0, 2], vec![1]]);
        assert!(matches!(range, Err(Error::Scenario(m)) if m.contains("only 2")));
        assert!(CausalScenario::new(1, vec![vec![0]]).is_err());
        assert!(CausalScenario::standard(7).is_err());
        assert!(CausalScenario::new(2, vec![vec![0], vec![]]).is_err());
        assert!(CausalScenario::from_one_based(2, vec![vec![0], vec![2]]).is_err());
    }

    #[test]
    fn setting_index_restricts_in_visibility_order() {
        let g = CausalScenario::gyni();
        for k in 0..8 {
            let x = InputTuple::from_index(3, k);
            for party in 0..3 {
                assert_eq!(g.setting_index(party, k), g.restrict(party, &x).index());
            }
        }
        // Party 1 (0-based 0) sees (x1, x3).
        let x = t(&[1, -1, -1]);
        assert_eq!(g.restrict(0, &x).values(), &[1, -1]);
        assert_eq!(g.restrict(1, &x).values(), &[-1, 1]);
    }

    #[test]
    fn gyni_coefficients() {
        let g = gyni_inequality();
        assert_eq!(g.coefficient(&t(&[1, 1, 1])), 1.0);
        assert_eq!(g.coefficient(&t(&[-1, -1, -1])), -1.0);
        assert_eq!(g.coeffs().iter().filter(|q| **q == 1.0).count(), 7);
        assert_eq!(g.gamma(), 8.0);
        assert!(g.is_integral());
    }

    #[test]
    fn svetlichny_coefficients() {
        let s = svetlichny_inequality();
        assert_eq!(s.coefficient(&t(&[1, 1, 1])), -1.0);
        assert_eq!(s.coefficient(&t(&[-1, -1, -1])), -1.0);
        assert_eq!(s.coefficient(&t(&[1, -1, 1])), 1.0);
        assert_eq!(s.gamma(), 8.0);
        assert_eq!(s.coeffs().iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn distributions() {
        for ineq in [gyni_inequality(), svetlichny_inequality()] {
            assert!(input_distribution(&ineq).iter().all(|p| *p == 0.125));
        }
        let ineq = BellInequality::new(CausalScenario::standard(2).unwrap(), vec![2.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(input_distribution(&ineq), vec![0.5, 0.0, 0.25, 0.25]);
        let zero = BellInequality::new(CausalScenario::standard(2).unwrap(), vec![0.0; 4]);
        assert!(matches!(zero, Err(Error::Inequality(_))));
    }

    #[test]
    fn instance_distribution_validation() {
        let ineq = chsh_inequality();
        assert!(CcpInstance::with_distribution(ineq.clone(), vec![0.25; 4]).is_ok());
        assert!(CcpInstance::with_distribution(ineq.clone(), vec![0.3; 4]).is_err());
        assert!(CcpInstance::with_distribution(ineq.clone(), vec![0.5, -0.5, 0.5, 0.5]).is_err());
        assert!(CcpInstance::with_distribution(ineq, vec![0.5; 2]).is_err());
    }

    #[test]
    fn target_function_examples() {
        let g = gyni_inequality();
        assert_eq!(target_function(&g, &t(&[-1, -1, -1]), &[1, 1, 1]), -1);
        assert_eq!(target_function(&g, &t(&[1, 1, -1]), &[1, -1, 1]), -1);
        assert_eq!(target_function(&g, &t(&[1, 1, 1]), &[1, 1, 1]), 1);
        let zero = BellInequality::new(CausalScenario::standard(2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(target_function(&zero, &t(&[-1, 1]), &[1, 1]), 1);
    }

    #[test]
    fn containment() {
        assert!(CausalScenario::full_visibility(3).unwrap().contains(&CausalScenario::gyni()));
        assert!(CausalScenario::gyni().contains(&CausalScenario::standard(3).unwrap()));
        assert!(!CausalScenario::gyni().contains(&CausalScenario::svetlichny()));
    }
}

//! JSON file formats for inequalities and strategies. Party labels are
//! 1-based in files.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::QuantumStrategy;
use crate::scenario::{named_inequality, BellInequality, CausalScenario, InputTuple};
use crate::tensor::{ghz_state, depolarize, Observable2, PureState, State, C64};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub visibility: Vec<Vec<usize>>,
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<CausalScenario> {
        CausalScenario::from_one_based(self.n, self.visibility.clone())
    }

    pub fn from_scenario(scenario: &CausalScenario) -> Self {
        Self { n: scenario.n(), visibility: scenario.to_one_based() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub x: Vec<i8>,
    pub q: f64,
}

/// Either `{"name": …}` for a built-in inequality or
/// `{"scenario": …, "coeffs": […]}` (omitted tuples mean `Q = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<CoeffEntry>>,
}

impl InequalityConfig {
    pub fn named(name: impl Into<String>) -> Self {
        Self { name: Some(name.into()), label: None, scenario: None, coeffs: None }
    }

    pub fn to_inequality(&self) -> Result<BellInequality> {
        match (&self.name, &self.scenario, &self.coeffs) {
            (Some(name), None, None) => {
                if self.label.is_some() {
                    return Err(Error::Config("'label' only applies to coefficient tables".into()));
                }
                named_inequality(name)
            }
            (None, Some(scenario), Some(coeffs)) => {
                let scenario = scenario.to_scenario()?;
                let n = scenario.n();
                let mut table = vec![0.0; scenario.tuple_count()];
                let mut seen = HashSet::new();
                for entry in coeffs {
                    if entry.x.len() != n {
                        return Err(Error::Config(format!(
                            "coefficient tuple {:?} has {} entries, expected {n}",
                            entry.x,
                            entry.x.len()
                        )));
                    }
                    let x = InputTuple::new(entry.x.clone())?;
                    if !seen.insert(x.index()) {
                        return Err(Error::Config(format!("coefficient tuple {:?} listed twice", entry.x)));
                    }
                    table[x.index()] = entry.q;
                }
                let ineq = BellInequality::new(scenario, table)?;
                Ok(match &self.label {
                    Some(label) => ineq.with_name(label.clone()),
                    None => ineq,
                })
            }
            (Some(_), _, _) => Err(Error::Config("give either 'name' or 'scenario' + 'coeffs', not both".into())),
            (None, None, _) => Err(Error::Config("inequality needs 'name' or 'scenario' + 'coeffs'".into())),
            (None, Some(_), None) => Err(Error::Config("inequality 'scenario' given without 'coeffs'".into())),
        }
    }

    /// Named form when `ineq` is an unmodified built-in, table form otherwise.
    pub fn from_inequality(ineq: &BellInequality) -> Self {
        if let Some(name) = ineq.name() {
            if named_inequality(name).is_ok_and(|builtin| builtin == *ineq) {
                return Self::named(name);
            }
        }
        let n = ineq.n();
        let coeffs = ineq
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, q)| **q != 0.0)
            .map(|(k, q)| CoeffEntry { x: InputTuple::from_index(n, k).values().to_vec(), q: *q })
            .collect();
        Self {
            name: None,
            label: ineq.name().map(str::to_string),
            scenario: Some(ScenarioConfig::from_scenario(ineq.scenario())),
            coeffs: Some(coeffs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateConfig {
    /// Only `"ghz"` is recognized.
    Named(String),
    Amplitudes { amplitudes: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableEntry {
    pub party: usize,
    pub setting: Vec<i8>,
    pub bloch: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub state: StateConfig,
    pub observables: Vec<ObservableEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_v: Option<f64>,
}

impl StrategyConfig {
    pub fn to_strategy(&self, scenario: &CausalScenario) -> Result<QuantumStrategy> {
        let n = scenario.n();
        let psi = match &self.state {
            StateConfig::Named(name) if name == "ghz" => ghz_state(n)?,
            StateConfig::Named(other) => {
                return Err(Error::Config(format!("unknown state '{other}' (expected \"ghz\" or amplitudes)")));
            }
            StateConfig::Amplitudes { amplitudes } => {
                PureState::new(amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect())?
            }
        };
        let state: State = match self.visibility_v {
            Some(v) => depolarize(&psi, v)?.into(),
            None => psi.into(),
        };
        let mut table: Vec<Vec<Option<Observable2>>> =
            (0..n).map(|p| vec![None; scenario.settings_count(p)]).collect();
        for entry in &self.observables {
            let party = entry
                .party
                .checked_sub(1)
                .filter(|p| *p < n)
                .ok_or_else(|| Error::Config(format!("observable for unknown party {}", entry.party)))?;
            if entry.setting.len() != scenario.visible_count(party) {
                return Err(Error::Config(format!(
                    "party {} setting {:?} should list {} inputs",
                    entry.party,
                    entry.setting,
                    scenario.visible_count(party)
                )));
            }
            let setting = InputTuple::new(entry.setting.clone())?.index();
            if table[party][setting].replace(Observable2::from_bloch(entry.bloch)?).is_some() {
                return Err(Error::Config(format!(
                    "party {} setting {:?} listed twice",
                    entry.party, entry.setting
                )));
            }
        }
        let observables = table
            .into_iter()
            .enumerate()
            .map(|(p, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(s, o)| {
                        o.ok_or_else(|| {
                            Error::Config(format!(
                                "party {} has no observable for setting {:?}",
                                p + 1,
                                InputTuple::from_index(scenario.visible_count(p), s).values()
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        QuantumStrategy::new(scenario.clone(), state, observables)
    }

    /// Pure-state strategies only; mixed states have no file form.
    pub fn from_strategy(strategy: &QuantumStrategy) -> Result<Self> {
        let amplitudes = match strategy.state() {
            State::Pure(psi) => psi.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            State::Mixed(_) => return Err(Error::Config("mixed-state strategies cannot be written".into())),
        };
        let scenario = strategy.scenario();
        let observables = (0..scenario.n())
            .flat_map(|p| {
                (0..scenario.settings_count(p)).map(move |s| ObservableEntry {
                    party: p + 1,
                    setting: InputTuple::from_index(scenario.visible_count(p), s).values().to_vec(),
                    bloch: strategy.observable(p, s).bloch(),
                })
            })
            .collect();
        Ok(Self { state: StateConfig::Amplitudes { amplitudes }, observables, visibility_v: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{canonical_strategy, CanonicalStrategy};
    use crate::scenario::{gyni_inequality, svetlichny_inequality};

    #[test]
    fn named_round_trip() {
        let cfg = InequalityConfig::from_inequality(&gyni_inequality());
        assert_eq!(cfg, InequalityConfig::named("gyni"));
        assert_eq!(serde_json::to_string(&cfg).unwrap(), r#"{"name":"gyni"}"#);
        assert_eq!(cfg.to_inequality().unwrap(), gyni_inequality());
    }

    #[test]
    fn table_round_trip() {
        let ineq = svetlichny_inequality().with_scenario(CausalScenario::gyni()).unwrap();
        let cfg = InequalityConfig::from_inequality(&ineq);
        assert!(cfg.coeffs.is_some());
        let text = serde_json::to_string(&cfg).unwrap();
        let back: InequalityConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_inequality().unwrap(), ineq);
    }

    #[test]
    fn omitted_tuples_are_zero() {
        let text = r#"{"scenario": {"n": 2, "visibility": [[1], [2]]},
                       "coeffs": [{"x": [1, 1], "q": 2}, {"x": [-1, 1], "q": -0.5}]}"#;
        let ineq = serde_json::from_str::<InequalityConfig>(text).unwrap().to_inequality().unwrap();
        assert_eq!(ineq.coeffs(), &[0.0, -0.5, 0.0, 2.0]);
        assert_eq!(ineq.gamma(), 2.5);
        assert!(!ineq.is_integral());
    }

    #[test]
    fn inequality_source_conflicts() {
        let both = r#"{"name": "gyni", "scenario": {"n": 2, "visibility": [[1], [2]]}, "coeffs": []}"#;
        assert!(serde_json::from_str::<InequalityConfig>(both).unwrap().to_inequality().is_err());
        assert!(serde_json::from_str::<InequalityConfig>("{}").unwrap().to_inequality().is_err());
        let dup = r#"{"scenario": {"n": 2, "visibility": [[1], [2]]},
                      "coeffs": [{"x": [1, 1], "q": 1}, {"x": [1, 1], "q": 2}]}"#;
        assert!(serde_json::from_str::<InequalityConfig>(dup).unwrap().to_inequality().is_err());
        assert!(serde_json::from_str::<InequalityConfig>(r#"{"nme": "gyni"}"#).is_err());
    }

    #[test]
    fn strategy_file_round_trip() {
        let s = canonical_strategy(CanonicalStrategy::GyniPaper);
        let cfg = StrategyConfig::from_strategy(&s).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: StrategyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_strategy(s.scenario()).unwrap(), s);
        assert!(StrategyConfig::from_strategy(&canonical_strategy(CanonicalStrategy::ExperimentLike)).is_err());
    }

    #[test]
    fn strategy_file_with_ghz_and_noise() {
        let text = r#"{"state": "ghz", "visibility_v": 0.5, "observables": [
            {"party": 1, "setting": [-1], "bloch": [1, 0, 0]}, {"party": 1, "setting": [1], "bloch": [0, 1, 0]},
            {"party": 2, "setting": [-1], "bloch": [1, 0, 0]}, {"party": 2, "setting": [1], "bloch": [0, 0, 1]}]}"#;
        let cfg: StrategyConfig = serde_json::from_str(text).unwrap();
        let s = cfg.to_strategy(&CausalScenario::standard(2).unwrap()).unwrap();
        assert!(matches!(s.state(), State::Mixed(_)));
        let mut missing = cfg.clone();
        missing.observables.pop();
        assert!(missing.to_strategy(&CausalScenario::standard(2).unwrap()).is_err());
        let mut bad = cfg;
        bad.state = StateConfig::Named("w".into());
        assert!(bad.to_strategy(&CausalScenario::standard(2).unwrap()).is_err());
    }
}

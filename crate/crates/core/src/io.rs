//! Domain files.
//!
//! ```json
//! {
//!   "issues": [{"name": "price", "options": ["low", "high"]}],
//!   "agents": [
//!     {"weights": [1.0], "evaluations": [[0.0, 1.0]], "reservation_value": 0.0, "discount_factor": 1.0},
//!     {"table": {"0": 1.0, "1": 0.0}, "reservation_value": 0.0, "discount_factor": 1.0}
//!   ]
//! }
//! ```
//!
//! Tabular agents map offer keys (option indices joined by `/`) to values.
//! Floats are written in shortest round-trip form, so saving a loaded file
//! reproduces it exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    AgentProfile, Issue, LinearUtility, NegotiationDomain, OfferSpace, TabularUtility, Utility,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub issues: Vec<Issue>,
    pub agents: [AgentFile; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtilityFile {
    Linear {
        weights: Vec<f64>,
        evaluations: Vec<Vec<f64>>,
    },
    Tabular {
        table: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFile {
    #[serde(flatten)]
    pub utility: UtilityFile,
    pub reservation_value: f64,
    pub discount_factor: f64,
}

impl DomainFile {
    pub fn from_domain(domain: &NegotiationDomain) -> Self {
        let space = domain.space();
        let agent = |i: usize| {
            let a = domain.agent(i);
            let utility = match &a.utility {
                Utility::Linear(l) => UtilityFile::Linear {
                    weights: l.weights.clone(),
                    evaluations: l.evaluations.clone(),
                },
                Utility::Tabular(t) => UtilityFile::Tabular {
                    table: t
                        .values
                        .iter()
                        .enumerate()
                        .map(|(id, v)| (space.key(id), *v))
                        .collect(),
                },
            };
            AgentFile {
                utility,
                reservation_value: a.reservation_value,
                discount_factor: a.discount_factor,
            }
        };
        DomainFile {
            issues: space.issues().to_vec(),
            agents: [agent(1), agent(2)],
        }
    }

    pub fn into_domain(self) -> Result<NegotiationDomain> {
        let space = OfferSpace::new(self.issues)?;
        let [a1, a2] = self.agents;
        let profile = |a: AgentFile| -> Result<AgentProfile> {
            let utility = match a.utility {
                UtilityFile::Linear {
                    weights,
                    evaluations,
                } => Utility::Linear(LinearUtility::new(weights, evaluations)?),
                UtilityFile::Tabular { table } => {
                    let mut values = vec![f64::NAN; space.size()];
                    for (key, v) in &table {
                        values[space.parse_key(key)?] = *v;
                    }
                    if let Some(id) = values.iter().position(|v| v.is_nan()) {
                        return Err(Error::InvalidDomain(format!(
                            "table has no value for offer {}",
                            space.key(id)
                        )));
                    }
                    if table.len() != space.size() {
                        return Err(Error::InvalidDomain(
                            "table lists an offer more than once".into(),
                        ));
                    }
                    Utility::Tabular(TabularUtility { values })
                }
            };
            Ok(AgentProfile::new(
                utility,
                a.reservation_value,
                a.discount_factor,
            ))
        };
        let p1 = profile(a1)?;
        let p2 = profile(a2)?;
        NegotiationDomain::new(space, p1, p2)
    }
}

pub fn domain_to_json(domain: &NegotiationDomain) -> String {
    serde_json::to_string_pretty(&DomainFile::from_domain(domain)).expect("domains serialize")
        + "\n"
}

pub fn domain_from_json(text: &str) -> Result<NegotiationDomain> {
    serde_json::from_str::<DomainFile>(text)?.into_domain()
}

pub fn load_domain(path: impl AsRef<Path>) -> Result<NegotiationDomain> {
    domain_from_json(&fs::read_to_string(path)?)
}

pub fn save_domain(domain: &NegotiationDomain, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, domain_to_json(domain))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_random_linear_domain, generate_split_the_pie, normalize_utility};
    use proptest::prelude::*;

    #[test]
    fn doc_example_loads() {
        let text = r#"{
          "issues": [{"name": "price", "options": ["low", "high"]}],
          "agents": [
            {"weights": [1.0], "evaluations": [[0.0, 1.0]], "reservation_value": 0.0, "discount_factor": 1.0},
            {"table": {"0": 1.0, "1": 0.0}, "reservation_value": 0.0, "discount_factor": 1.0}
          ]
        }"#;
        let d = domain_from_json(text).unwrap();
        assert_eq!(d.vector(1), [1.0, 0.0]);
    }

    #[test]
    fn tabular_round_trip() {
        let d = generate_split_the_pie(7).unwrap();
        let t = normalize_utility(&d.agent(1).utility, d.space()).unwrap();
        let d = NegotiationDomain::new(
            d.space().clone(),
            AgentProfile::new(t, 0.1, 0.9),
            d.agent(2).clone(),
        )
        .unwrap();
        let text = domain_to_json(&d);
        let back = domain_from_json(&text).unwrap();
        assert_eq!(domain_to_json(&back), text);
        assert_eq!(back.table(1), d.table(1));
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(domain_from_json("{").unwrap_err().is_config());
        let missing = r#"{"issues":[{"name":"x","options":["a","b"]}],
            "agents":[{"table":{"0":1.0},"reservation_value":0,"discount_factor":1},
                      {"table":{"0":1.0,"1":0.0},"reservation_value":0,"discount_factor":1}]}"#;
        assert!(matches!(
            domain_from_json(missing),
            Err(Error::InvalidDomain(_))
        ));
        let weights = r#"{"issues":[{"name":"x","options":["a","b"]}],
            "agents":[{"weights":[0.5],"evaluations":[[0,1]],"reservation_value":0,"discount_factor":1},
                      {"table":{"0":1.0,"1":0.0},"reservation_value":0,"discount_factor":1}]}"#;
        assert!(domain_from_json(weights).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let d = generate_random_linear_domain(3, 4, 11, 0.5).unwrap();
        save_domain(&d, &path).unwrap();
        let back = load_domain(&path).unwrap();
        assert_eq!(back.table(1), d.table(1));
        assert_eq!(back.table(2), d.table(2));
    }

    proptest! {
        #[test]
        fn random_domains_round_trip_bit_exactly(seed in any::<u64>(), issues in 1usize..4, options in 2usize..5, hint in 0.0f64..1.0) {
            let d = generate_random_linear_domain(issues, options, seed, hint).unwrap();
            let text = domain_to_json(&d);
            let back = domain_from_json(&text).unwrap();
            prop_assert_eq!(domain_to_json(&back), text.clone());
            for i in [1, 2] {
                let (a, b) = (d.table(i), back.table(i));
                prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
                prop_assert_eq!(d.reservation(i).to_bits(), back.reservation(i).to_bits());
            }
        }
    }
}

//! Mapping from the best cluster count k* to a modulation format.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MfiError, Result};
use crate::signal::ModFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub min_k: usize,
    pub max_k: usize,
    pub format: ModFormat,
}

impl DecisionRule {
    pub fn contains(&self, k: usize) -> bool {
        (self.min_k..=self.max_k).contains(&k)
    }
}

/// Disjoint inclusive k* ranges; anything not covered is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTable {
    #[serde(rename = "rule")]
    rules: Vec<DecisionRule>,
}

/// The shipped table, as a TOML document.
pub const DEFAULT_TABLE_TOML: &str = include_str!("../config/decision_table.toml");

impl Default for DecisionTable {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TABLE_TOML).expect("shipped decision table is valid")
    }
}

impl DecisionTable {
    pub fn new(rules: Vec<DecisionRule>) -> Result<Self> {
        for r in &rules {
            if r.min_k > r.max_k {
                return Err(MfiError::DecisionTable(format!(
                    "empty range [{}, {}]",
                    r.min_k, r.max_k
                )));
            }
        }
        for (i, a) in rules.iter().enumerate() {
            for b in &rules[i + 1..] {
                if a.min_k <= b.max_k && b.min_k <= a.max_k {
                    return Err(MfiError::DecisionTable(format!(
                        "ranges [{}, {}] and [{}, {}] overlap",
                        a.min_k, a.max_k, b.min_k, b.max_k
                    )));
                }
            }
        }
        Ok(Self { rules })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            rule: Vec<DecisionRule>,
        }
        let raw: Raw = toml::from_str(s).map_err(|e| MfiError::DecisionTable(e.to_string()))?;
        Self::new(raw.rule)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("decision table serializes")
    }

    pub fn rules(&self) -> &[DecisionRule] {
        &self.rules
    }

    pub fn decide(&self, k_star: usize) -> Decision {
        self.rules
            .iter()
            .find(|r| r.contains(k_star))
            .map_or(Decision::Reject, |r| Decision::Format(r.format))
    }
}

/// A format decision or a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Format(ModFormat),
    Reject,
}

impl Decision {
    pub fn format(self) -> Option<ModFormat> {
        match self {
            Decision::Format(f) => Some(f),
            Decision::Reject => None,
        }
    }

    pub fn is_reject(self) -> bool {
        self == Decision::Reject
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Format(m) => m.fmt(f),
            Decision::Reject => f.write_str("reject"),
        }
    }
}

impl Serialize for Decision {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn decide_format(k_star: usize, table: &DecisionTable) -> Decision {
    table.decide(k_star)
}

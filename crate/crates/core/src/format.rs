//! JSON file format for factored MDPs.
//!
//! Scope indices are 0-based component indices. Table keys are the scoped
//! tuple joined with commas (`"1,0,3"`; the empty scope uses `""`).
//! Reward cells are either a bare mean (deterministic) or an object
//! `{"mean": .., "kind": "bernoulli" | "gaussian", "sigma": ..}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factored::{
    format_key, report_for_parts, FactorKind, FactorSpec, FactoredMdp, RewardDist, RewardFactor, RewardKind,
    ScopeSet, TransitionFactor, ValidationReport, ViolationClass,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FmdpFile {
    pub state_factor_sizes: Vec<usize>,
    pub component_sizes: Vec<usize>,
    pub action_component_indices: Vec<usize>,
    pub transition: Vec<TransitionEntry>,
    pub reward: Vec<RewardEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub scope: Vec<usize>,
    pub table: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardEntry {
    pub scope: Vec<usize>,
    #[serde(default = "one")]
    pub max: f64,
    pub table: BTreeMap<String, RewardCell>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardCell {
    Mean(f64),
    Dist {
        mean: f64,
        kind: RewardKindName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKindName {
    Deterministic,
    Bernoulli,
    Gaussian,
}

impl FmdpFile {
    pub fn from_mdp(mdp: &FactoredMdp) -> Self {
        let spec = mdp.spec();
        let sizes = spec.component_sizes();
        let transition = mdp
            .transitions()
            .iter()
            .map(|tf| TransitionEntry {
                scope: tf.scope.indices().to_vec(),
                table: tf
                    .table
                    .iter()
                    .enumerate()
                    .map(|(k, row)| (format_key(&tf.scope.decode_key(k, sizes)), row.clone()))
                    .collect(),
            })
            .collect();
        let reward = mdp
            .rewards()
            .iter()
            .map(|rf| RewardEntry {
                scope: rf.scope.indices().to_vec(),
                max: rf.max_reward,
                table: rf
                    .table
                    .iter()
                    .enumerate()
                    .map(|(k, d)| (format_key(&rf.scope.decode_key(k, sizes)), cell_of(d)))
                    .collect(),
            })
            .collect();
        FmdpFile {
            state_factor_sizes: spec.state_factor_sizes().to_vec(),
            component_sizes: sizes.to_vec(),
            action_component_indices: spec.action_component_indices().to_vec(),
            transition,
            reward,
        }
    }

    /// Converts to an FMDP, or returns every problem found.
    pub fn to_mdp(&self) -> std::result::Result<FactoredMdp, ValidationReport> {
        let mut report = ValidationReport::default();
        let spec = match FactorSpec::from_parts(
            self.state_factor_sizes.clone(),
            self.component_sizes.clone(),
            self.action_component_indices.clone(),
        ) {
            Ok(spec) => spec,
            Err(e) => {
                report.push(ViolationClass::Structure, None, None, e.to_string());
                return Err(report);
            }
        };
        let n = spec.num_components();
        let sizes = spec.component_sizes().to_vec();

        let mut transitions = Vec::new();
        for (i, entry) in self.transition.iter().enumerate() {
            let tag = Some((FactorKind::Transition, i));
            let scope = match ScopeSet::new(entry.scope.clone(), n) {
                Ok(z) => z,
                Err(e) => {
                    report.push(ViolationClass::Structure, tag, None, e.to_string());
                    continue;
                }
            };
            let table = fill_table(&scope, &sizes, &entry.table, tag, &mut report, |row| {
                row.clone()
            });
            if let Some(table) = table {
                transitions.push(TransitionFactor { scope, table });
            }
        }

        let mut rewards = Vec::new();
        for (i, entry) in self.reward.iter().enumerate() {
            let tag = Some((FactorKind::Reward, i));
            let scope = match ScopeSet::new(entry.scope.clone(), n) {
                Ok(z) => z,
                Err(e) => {
                    report.push(ViolationClass::Structure, tag, None, e.to_string());
                    continue;
                }
            };
            let table = fill_table(&scope, &sizes, &entry.table, tag, &mut report, dist_of);
            if let Some(table) = table {
                rewards.push(RewardFactor {
                    scope,
                    max_reward: entry.max,
                    table,
                });
            }
        }

        if !report.is_ok() {
            return Err(report);
        }
        // Row sums, means, and the reward bound are checked on the typed model.
        let report = report_for_parts(spec.clone(), transitions.clone(), rewards.clone());
        if report.has_structural() {
            return Err(report);
        }
        FactoredMdp::new(spec, transitions, rewards).map_err(|_| report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn fill_table<C, T>(
    scope: &ScopeSet,
    sizes: &[usize],
    cells: &BTreeMap<String, C>,
    tag: Option<(FactorKind, usize)>,
    report: &mut ValidationReport,
    convert: impl Fn(&C) -> T,
) -> Option<Vec<T>> {
    let card = scope.cardinality(sizes);
    let mut slots: Vec<Option<T>> = (0..card).map(|_| None).collect();
    let scoped_sizes = scope.sizes(sizes);
    let mut ok = true;
    for (key, cell) in cells {
        match parse_key(key, &scoped_sizes) {
            Some(k) => slots[k] = Some(convert(cell)),
            None => {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    Some(key.clone()),
                    "key is not a valid scoped tuple for this scope",
                );
                ok = false;
            }
        }
    }
    let mut table = Vec::with_capacity(card);
    for (k, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(v) => table.push(v),
            None => {
                report.push(
                    ViolationClass::Structure,
                    tag,
                    Some(format_key(&scope.decode_key(k, sizes))),
                    "missing table entry",
                );
                ok = false;
            }
        }
    }
    ok.then_some(table)
}

fn parse_key(key: &str, scoped_sizes: &[usize]) -> Option<usize> {
    let parts: Vec<&str> = if key.trim().is_empty() {
        Vec::new()
    } else {
        key.split(',').collect()
    };
    if parts.len() != scoped_sizes.len() {
        return None;
    }
    let mut tuple = Vec::with_capacity(parts.len());
    for (p, &s) in parts.iter().zip(scoped_sizes) {
        let v: usize = p.trim().parse().ok()?;
        if v >= s {
            return None;
        }
        tuple.push(v);
    }
    Some(crate::factored::encode_mixed(&tuple, scoped_sizes))
}

fn cell_of(d: &RewardDist) -> RewardCell {
    match d.kind {
        RewardKind::Deterministic => RewardCell::Mean(d.mean),
        RewardKind::Bernoulli => RewardCell::Dist {
            mean: d.mean,
            kind: RewardKindName::Bernoulli,
            sigma: None,
        },
        RewardKind::TruncatedGaussian { sigma } => RewardCell::Dist {
            mean: d.mean,
            kind: RewardKindName::Gaussian,
            sigma: Some(sigma),
        },
    }
}

fn dist_of(cell: &RewardCell) -> RewardDist {
    match *cell {
        RewardCell::Mean(mean) => RewardDist::deterministic(mean),
        RewardCell::Dist { mean, kind, sigma } => RewardDist {
            mean,
            kind: match kind {
                RewardKindName::Deterministic => RewardKind::Deterministic,
                RewardKindName::Bernoulli => RewardKind::Bernoulli,
                RewardKindName::Gaussian => RewardKind::TruncatedGaussian {
                    sigma: sigma.unwrap_or(0.0),
                },
            },
        },
    }
}

/// Reads and validates an FMDP file; structural problems become an error carrying the report.
pub fn load_mdp(path: &Path) -> Result<FactoredMdp> {
    let file = FmdpFile::read(path)?;
    file.to_mdp()
        .map_err(|report| Error::Validation(report.to_string()))
}

pub fn save_mdp(mdp: &FactoredMdp, path: &Path) -> Result<()> {
    FmdpFile::from_mdp(mdp).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "state_factor_sizes": [2],
        "component_sizes": [2, 2],
        "action_component_indices": [1],
        "transition": [
            {"scope": [0, 1], "table": {"0,0": [1.0, 0.0], "1,0": [0.5, 0.5],
                                         "0,1": [0.0, 1.0], "1,1": [0.25, 0.75]}}
        ],
        "reward": [
            {"scope": [0], "table": {"0": 0.0, "1": {"mean": 0.5, "kind": "bernoulli"}}}
        ]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let file = FmdpFile::parse(SMALL).unwrap();
        let mdp = file.to_mdp().unwrap();
        assert_eq!(mdp.transitions()[0].table[1], vec![0.5, 0.5]);
        assert_eq!(mdp.transitions()[0].table[2], vec![0.0, 1.0]);
        assert_eq!(mdp.rewards()[0].table[1].kind, RewardKind::Bernoulli);
        let again = FmdpFile::from_mdp(&mdp);
        assert_eq!(again.to_mdp().unwrap(), mdp);
    }

    #[test]
    fn out_of_range_scope_is_reported() {
        let text = SMALL.replace("\"scope\": [0, 1]", "\"scope\": [0, 2]");
        let report = FmdpFile::parse(&text).unwrap().to_mdp().unwrap_err();
        assert!(report.to_string().contains("scope index 2 out of range"));
    }

    #[test]
    fn bad_row_sum_names_factor_and_key() {
        let text = SMALL.replace("[0.25, 0.75]", "[0.25, 0.74]");
        let report = FmdpFile::parse(&text).unwrap().to_mdp().unwrap_err();
        let msg = report.to_string();
        assert!(msg.contains("transition factor 0"), "{msg}");
        assert!(msg.contains("\"1,1\""), "{msg}");
    }

    #[test]
    fn missing_key_is_reported() {
        let text = SMALL.replace("\"1,0\": [0.5, 0.5],", "");
        let report = FmdpFile::parse(&text).unwrap().to_mdp().unwrap_err();
        assert!(report.to_string().contains("missing table entry"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = FmdpFile::parse("{\n\"state_factor_sizes\": [2,\n}").unwrap_err();
        assert!(err.to_string().contains("line"));
    }
}

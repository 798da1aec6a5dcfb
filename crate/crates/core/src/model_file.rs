//! JSON model file: either an explicit edge list or an MDP section that is
//! reduced to a chain through its policy, plus an optional grid layout.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{induce_chain, Chain, Edge, EdgeTimes, Mdp, Policy, PolicyEntry, Transition};
use crate::river::Layout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub num_states: usize,
    #[serde(default)]
    pub goal_states: Vec<usize>,
    #[serde(default)]
    pub fail_states: Vec<usize>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp: Option<MdpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<LayoutRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub prob: f64,
    pub time: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    pub num_actions: usize,
    pub mdp_transitions: Vec<TransitionRecord>,
    pub policy: Vec<PolicyRecord>,
    pub times: Vec<TimeRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRecord {
    pub state: usize,
    pub action: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRecord {
    pub from: usize,
    pub to: usize,
    pub time: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRecord {
    pub state: usize,
    pub row: usize,
    pub col: usize,
}

impl ModelFile {
    pub fn from_chain(chain: &Chain, layout: Option<&Layout>) -> Self {
        let edges = chain
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                from: e.from,
                to: e.to,
                prob: e.prob,
                time: e.time,
            })
            .collect();
        let layout = layout.map(|l| {
            l.cells()
                .iter()
                .enumerate()
                .map(|(state, &(row, col))| LayoutRecord { state, row, col })
                .collect()
        });
        Self {
            num_states: chain.num_states(),
            goal_states: chain.goal_states().to_vec(),
            fail_states: chain.fail_states().to_vec(),
            edges,
            mdp: None,
            layout,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Builds the chain, inducing it through the policy when an MDP section
    /// is present, and rejects it if any fatal diagnostic remains.
    pub fn to_chain(&self) -> Result<Chain> {
        let chain = match &self.mdp {
            Some(section) => {
                if !self.edges.is_empty() {
                    return Err(Error::ModelFile(
                        "give either edges or an mdp section, not both".into(),
                    ));
                }
                self.induce(section)?
            }
            None => Chain::new(
                self.num_states,
                self.edges
                    .iter()
                    .map(|e| Edge::new(e.from, e.to, e.prob, e.time))
                    .collect(),
                self.goal_states.iter().copied(),
                self.fail_states.iter().copied(),
            ),
        };
        chain.check()?;
        Ok(chain)
    }

    fn induce(&self, section: &MdpSection) -> Result<Chain> {
        let transitions = section
            .mdp_transitions
            .iter()
            .map(|t| Transition {
                from: t.from,
                action: t.action,
                to: t.to,
                prob: t.prob,
            })
            .collect();
        let mdp = Mdp::new(
            self.num_states,
            section.num_actions,
            transitions,
            self.goal_states.iter().copied(),
            self.fail_states.iter().copied(),
        )?;
        let policy = Policy::new(
            section
                .policy
                .iter()
                .map(|p| PolicyEntry {
                    state: p.state,
                    action: p.action,
                    weight: p.weight,
                })
                .collect(),
        );
        let mut times = EdgeTimes::new();
        for t in &section.times {
            if times.insert((t.from, t.to), t.time).is_some() {
                return Err(Error::ModelFile(format!(
                    "duplicate time for edge {} -> {}",
                    t.from, t.to
                )));
            }
        }
        induce_chain(&mdp, &policy, &times)
    }

    /// Grid layout, if the file has one. Every state must appear exactly once
    /// and no two states may share a cell.
    pub fn to_layout(&self) -> Result<Option<Layout>> {
        let Some(records) = &self.layout else {
            return Ok(None);
        };
        let mut cells = vec![None; self.num_states];
        let mut used = BTreeSet::new();
        for r in records {
            let slot = cells.get_mut(r.state).ok_or_else(|| {
                Error::ModelFile(format!("layout state {} out of range", r.state))
            })?;
            if slot.replace((r.row, r.col)).is_some() {
                return Err(Error::ModelFile(format!(
                    "layout repeats state {}",
                    r.state
                )));
            }
            if !used.insert((r.row, r.col)) {
                return Err(Error::ModelFile(format!(
                    "layout cell ({}, {}) used twice",
                    r.row, r.col
                )));
            }
        }
        let cells: Vec<_> = cells
            .into_iter()
            .enumerate()
            .map(|(state, cell)| {
                cell.ok_or_else(|| Error::ModelFile(format!("layout misses state {state}")))
            })
            .collect::<Result<_>>()?;
        let height = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let width = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        Ok(Some(Layout::new(width, height, cells)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::river::{build_river, RiverConfig};

    #[test]
    fn river_round_trip_is_exact() {
        let (chain, layout) = build_river(&RiverConfig::default()).unwrap();
        let text = ModelFile::from_chain(&chain, Some(&layout))
            .to_json()
            .unwrap();
        let parsed = ModelFile::from_json(&text).unwrap();
        assert_eq!(parsed.to_chain().unwrap(), chain);
        assert_eq!(parsed.to_layout().unwrap(), Some(layout));
    }

    #[test]
    fn mdp_section_is_induced() {
        let text = r#"{
            "num_states": 3,
            "goal_states": [1],
            "fail_states": [2],
            "mdp": {
                "num_actions": 2,
                "mdp_transitions": [
                    {"from": 0, "action": 0, "to": 1, "prob": 0.6},
                    {"from": 0, "action": 0, "to": 2, "prob": 0.4},
                    {"from": 0, "action": 1, "to": 1, "prob": 0.2},
                    {"from": 0, "action": 1, "to": 2, "prob": 0.8}
                ],
                "policy": [
                    {"state": 0, "action": 0, "weight": 0.5},
                    {"state": 0, "action": 1, "weight": 0.5}
                ],
                "times": [{"from": 0, "to": 1, "time": 1}, {"from": 0, "to": 2, "time": 2}]
            }
        }"#;
        let chain = ModelFile::from_json(text).unwrap().to_chain().unwrap();
        assert_eq!(chain.row(0).len(), 2);
        assert!((chain.row(0)[0].prob - 0.4).abs() < 1e-15);
        assert_eq!(chain.row(0)[1].time, 2);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let bad_sum = r#"{"num_states": 2, "goal_states": [1],
            "edges": [{"from": 0, "to": 1, "prob": 0.5, "time": 1}]}"#;
        assert!(matches!(
            ModelFile::from_json(bad_sum).unwrap().to_chain(),
            Err(Error::InvalidChain(_))
        ));
        let typo = r#"{"num_states": 1, "goals": [0]}"#;
        assert!(matches!(ModelFile::from_json(typo), Err(Error::Json(_))));
    }

    #[test]
    fn layout_must_cover_states_once() {
        let text = r#"{"num_states": 2, "goal_states": [0, 1],
            "layout": [{"state": 0, "row": 0, "col": 0}]}"#;
        assert!(ModelFile::from_json(text).unwrap().to_layout().is_err());
        let text = r#"{"num_states": 2, "goal_states": [0, 1],
            "layout": [{"state": 0, "row": 0, "col": 0}, {"state": 1, "row": 0, "col": 0}]}"#;
        assert!(ModelFile::from_json(text).unwrap().to_layout().is_err());
    }
}

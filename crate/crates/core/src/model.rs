//! JSON model files.
//!
//! ```json
//! {
//!   "states": ["0", "1"],
//!   "records": ["heat_L"],
//!   "channels": [
//!     {"from": "0", "to": "1", "reservoir": "L", "rate": 1.0,
//!      "increments": {"heat_L": -0.5}}
//!   ]
//! }
//! ```
//!
//! `filter` is optional (empty when absent) and missing increments are zero.
//! Instead of explicit channels a file may carry a single `"dot"` key with a
//! [`DotSpec`](crate::dotlab::DotSpec), expanded by the dot builder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dotlab::{build_dot, DotSpec};
use crate::error::{Error, Result};
use crate::network::{ChannelNetwork, TransitionChannel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub from: String,
    pub to: String,
    pub reservoir: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub filter: String,
    pub rate: f64,
    #[serde(default)]
    pub increments: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot: Option<DotSpec>,
}

/// Parses and validates a model document.
pub fn load_network(document: &str) -> Result<ChannelNetwork> {
    let file: ModelFile = serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    from_model(file)
}

pub fn from_model(file: ModelFile) -> Result<ChannelNetwork> {
    if let Some(dot) = file.dot {
        if file.states.is_some() || file.records.is_some() || file.channels.is_some() {
            return Err(Error::Parse(
                "`dot` cannot be combined with explicit states/records/channels".into(),
            ));
        }
        return build_dot(&dot);
    }
    let states = file.states.ok_or_else(|| Error::Parse("missing `states`".into()))?;
    let records = file.records.unwrap_or_default();
    let entries = file.channels.ok_or_else(|| Error::Parse("missing `channels`".into()))?;
    if let Some((k, s)) = states
        .iter()
        .enumerate()
        .find(|(k, s)| states[..*k].contains(s))
    {
        return Err(Error::InvalidNetwork(format!("duplicate state name `{s}` at position {k}")));
    }

    let mut channels = Vec::with_capacity(entries.len());
    for (k, entry) in entries.into_iter().enumerate() {
        let bad = |message: String| Error::InvalidChannel { channel: k, message };
        let idx = |name: &str| {
            states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| bad(format!("unknown state `{name}`")))
        };
        let from = idx(&entry.from)?;
        let to = idx(&entry.to)?;
        let mut inc = vec![0.0; records.len()];
        for (name, v) in &entry.increments {
            let r = records
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| bad(format!("undeclared record `{name}`")))?;
            inc[r] = *v;
        }
        channels.push(
            TransitionChannel::new(from, to, entry.reservoir, entry.rate, inc).with_filter(entry.filter),
        );
    }
    ChannelNetwork::new(states, records, channels)
}

/// Explicit-channel model for a network; zero increments are omitted.
pub fn to_model(net: &ChannelNetwork) -> ModelFile {
    let channels = net
        .channels()
        .iter()
        .map(|c| ChannelEntry {
            from: net.states()[c.from].clone(),
            to: net.states()[c.to].clone(),
            reservoir: c.reservoir.clone(),
            filter: c.filter.clone(),
            rate: c.rate,
            increments: net
                .records()
                .iter()
                .zip(&c.increments)
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        })
        .collect();
    ModelFile {
        states: Some(net.states().to_vec()),
        records: Some(net.records().to_vec()),
        channels: Some(channels),
        dot: None,
    }
}

/// Deterministic JSON text: object keys sorted, arrays in canonical order,
/// floats in shortest round-trip form.
pub fn serialize_network(net: &ChannelNetwork) -> String {
    let value = serde_json::to_value(to_model(net)).expect("model serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

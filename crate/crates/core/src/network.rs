//! Channel-resolved jump networks and the linear maps built from them.
//!
//! A network is a set of states plus an ordered list of directed channels.
//! Several channels may realize the same ordered transition `m -> n`; they
//! differ in the reservoir/filter that supplies them and in the record
//! increments they carry. The state generator only sees the per-transition
//! rate totals.
//!
//! Orderings are part of the contract: states and channels keep declaration
//! order, transitions are numbered by first appearance in the channel list.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One reservoir/filter-resolved directed transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionChannel {
    pub from: usize,
    pub to: usize,
    pub reservoir: String,
    pub filter: String,
    /// Rate in inverse time units.
    pub rate: f64,
    /// Record increments, dense and aligned with the network's record list.
    pub increments: Vec<f64>,
}

impl TransitionChannel {
    pub fn new(
        from: usize,
        to: usize,
        reservoir: impl Into<String>,
        rate: f64,
        increments: Vec<f64>,
    ) -> Self {
        TransitionChannel {
            from,
            to,
            reservoir: reservoir.into(),
            filter: String::new(),
            rate,
            increments,
        }
    }

    pub fn with_filter(mut self, filter: impl Into<String>) -> Self {
        self.filter = filter.into();
        self
    }

    /// Probability current through this channel for occupation vector `p`.
    pub fn flux(&self, p: &[f64]) -> f64 {
        self.rate * p[self.from]
    }
}

/// An ordered pair of states realized by at least one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNetwork {
    states: Vec<String>,
    records: Vec<String>,
    channels: Vec<TransitionChannel>,
}

impl ChannelNetwork {
    pub fn new(
        states: Vec<String>,
        records: Vec<String>,
        channels: Vec<TransitionChannel>,
    ) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 states, got {}",
                states.len()
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidNetwork("need at least one channel".into()));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate state name `{s}`")));
            }
        }
        let mut seen = HashSet::new();
        for r in &records {
            if r.is_empty() {
                return Err(Error::InvalidNetwork("empty record name".into()));
            }
            if !seen.insert(r.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate record name `{r}`")));
            }
        }
        let n = states.len();
        for (idx, ch) in channels.iter().enumerate() {
            let bad = |message: String| Error::InvalidChannel {
                channel: idx,
                message,
            };
            if ch.from >= n || ch.to >= n {
                return Err(bad(format!(
                    "state index out of range ({} -> {}, {} states)",
                    ch.from, ch.to, n
                )));
            }
            if ch.from == ch.to {
                return Err(bad("self-transition".into()));
            }
            if !ch.rate.is_finite() || ch.rate < 0.0 {
                return Err(bad(format!("rate must be finite and nonnegative, got {}", ch.rate)));
            }
            if ch.increments.len() != records.len() {
                return Err(bad(format!(
                    "{} increments for {} declared records",
                    ch.increments.len(),
                    records.len()
                )));
            }
            if let Some(v) = ch.increments.iter().find(|v| !v.is_finite()) {
                return Err(bad(format!("non-finite increment {v}")));
            }
        }
        Ok(ChannelNetwork {
            states,
            records,
            channels,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn records(&self) -> &[String] {
        &self.records
    }

    pub fn channels(&self) -> &[TransitionChannel] {
        &self.channels
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_records(&self) -> usize {
        self.records.len()
    }

    pub fn record_index(&self, name: &str) -> Result<usize> {
        self.records
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| Error::UnknownRecord(name.to_string()))
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn rates(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.rate).collect()
    }

    /// Same structure with new channel rates.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Self> {
        if rates.len() != self.channels.len() {
            return Err(Error::DimensionMismatch {
                what: "channel rates",
                expected: self.channels.len(),
                found: rates.len(),
            });
        }
        let channels = self
            .channels
            .iter()
            .zip(rates)
            .map(|(c, &rate)| TransitionChannel { rate, ..c.clone() })
            .collect();
        ChannelNetwork::new(self.states.clone(), self.records.clone(), channels)
    }

    /// Distinct ordered transitions in first-appearance order, and the
    /// transition index of every channel.
    pub fn transitions(&self) -> (Vec<Transition>, Vec<usize>) {
        let mut order = Vec::new();
        let mut index = HashMap::new();
        let mut of_channel = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let t = Transition {
                from: ch.from,
                to: ch.to,
            };
            let k = *index.entry(t).or_insert_with(|| {
                order.push(t);
                order.len() - 1
            });
            of_channel.push(k);
        }
        (order, of_channel)
    }

    /// `(E, E0)`: channel count and distinct ordered-transition count.
    pub fn channel_counts(&self) -> (usize, usize) {
        (self.channels.len(), self.transitions().0.len())
    }

    /// Total-rate generator. Off-diagonal `(n, m)` sums the channels `m -> n`
    /// in channel order; the diagonal is minus the column sum of the
    /// off-diagonal entries taken in row order.
    pub fn generator(&self) -> StateGenerator {
        let n = self.n_states();
        let mut l = DMatrix::zeros(n, n);
        for ch in &self.channels {
            l[(ch.to, ch.from)] += ch.rate;
        }
        fill_escape_diagonal(&mut l);
        StateGenerator { matrix: l }
    }

    pub fn projection(&self) -> ProjectionPair {
        let (transitions, of_channel) = self.transitions();
        let e = self.channels.len();
        let e0 = transitions.len();
        let mut p = DMatrix::zeros(e0, e);
        for (c, &t) in of_channel.iter().enumerate() {
            p[(t, c)] = 1.0;
        }
        let mut b = DMatrix::zeros(self.n_states(), e0);
        for (k, t) in transitions.iter().enumerate() {
            b[(t.to, k)] = 1.0;
            b[(t.from, k)] = -1.0;
        }
        ProjectionPair {
            p,
            b,
            transitions,
            channel_transition: of_channel,
        }
    }

    /// Record map `D` for the selected records (rows) over channels (columns).
    pub fn record_map<S: AsRef<str>>(&self, selected: &[S]) -> Result<RecordMap> {
        let rows = selected
            .iter()
            .map(|s| self.record_index(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let d = DMatrix::from_fn(rows.len(), self.channels.len(), |i, e| {
            self.channels[e].increments[rows[i]]
        });
        Ok(RecordMap {
            records: selected.iter().map(|s| s.as_ref().to_string()).collect(),
            d,
        })
    }

    /// Channel currents `j_e = rate_e * p_from(e)`.
    pub fn channel_currents(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.flux(p)))
    }
}

/// Sets each diagonal entry to minus the sum of the column's off-diagonals.
pub(crate) fn fill_escape_diagonal(l: &mut DMatrix<f64>) {
    let n = l.nrows();
    for m in 0..n {
        let mut out = 0.0;
        for k in 0..n {
            if k != m {
                out += l[(k, m)];
            }
        }
        l[(m, m)] = -out;
    }
}

/// Column-stochastic-rate generator `L` with `dp/dt = L p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGenerator {
    matrix: DMatrix<f64>,
}

impl StateGenerator {
    /// Wraps a matrix after checking the generator structure.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                what: "generator columns",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let max_rate = matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for m in 0..matrix.ncols() {
            for n in 0..matrix.nrows() {
                if n != m && matrix[(n, m)] < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "negative off-diagonal rate at ({n}, {m})"
                    )));
                }
            }
            let sum: f64 = matrix.column(m).sum();
            if sum.abs() > 1e-12 * max_rate.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "column {m} sums to {sum:e}, not zero"
                )));
            }
        }
        Ok(StateGenerator { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Total rate `W_nm` for the jump `m -> n`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.matrix[(to, from)]
    }
}

/// Channel-to-transition map `P` (E0 x E) and transition-to-velocity map `B`
/// (N x E0).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub p: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub transitions: Vec<Transition>,
    pub channel_transition: Vec<usize>,
}

impl ProjectionPair {
    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// Channels grouped by transition, each group in channel order.
    pub fn channels_by_transition(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.transitions.len()];
        for (c, &t) in self.channel_transition.iter().enumerate() {
            groups[t].push(c);
        }
        groups
    }
}

/// Record increments `D` (q x E), one row per selected record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordMap {
    pub records: Vec<String>,
    pub d: DMatrix<f64>,
}

impl RecordMap {
    pub fn n_rows(&self) -> usize {
        self.d.nrows()
    }

    /// Stacks two maps row-wise.
    pub fn stack(&self, other: &RecordMap) -> Result<RecordMap> {
        if self.d.ncols() != other.d.ncols() {
            return Err(Error::DimensionMismatch {
                what: "record map columns",
                expected: self.d.ncols(),
                found: other.d.ncols(),
            });
        }
        let cols = self.d.ncols();
        let rows = self.d.nrows() + other.d.nrows();
        let d = DMatrix::from_fn(rows, cols, |i, j| {
            if i < self.d.nrows() {
                self.d[(i, j)]
            } else {
                other.d[(i - self.d.nrows(), j)]
            }
        });
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Ok(RecordMap { records, d })
    }
}

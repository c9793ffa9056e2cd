//! Mean records, entropy production, and the set of mean records that stay
//! compatible with fixed transition totals.
//!
//! With the totals `u_t` fixed, each transition may split its current over
//! its channels in any proportion, so the compatible means form a Minkowski
//! sum of per-transition hulls. Any linear functional of the record vector
//! therefore ranges over an interval whose endpoints pick, transition by
//! transition, the channel with the smallest or largest weighted increment.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::ChannelNetwork;
use crate::spectral;

fn check_probability(net: &ChannelNetwork, p: &[f64]) -> Result<()> {
    if p.len() != net.n_states() {
        return Err(Error::DimensionMismatch {
            what: "probability vector",
            expected: net.n_states(),
            found: p.len(),
        });
    }
    if p.iter().any(|x| !x.is_finite() || *x < -1e-12) {
        return Err(Error::InvalidArgument("probability vector has negative entries".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probability vector sums to {total}"
        )));
    }
    Ok(())
}

/// `J_mu(p) = sum_e d_e^mu w_e p_from(e)`.
pub fn mean_record(net: &ChannelNetwork, p: &[f64], mu: &str) -> Result<f64> {
    let k = net.record_index(mu)?;
    check_probability(net, p)?;
    Ok(net
        .channels()
        .iter()
        .map(|ch| ch.increments[k] * ch.flux(p))
        .sum())
}

/// Transition totals `u_t = W_t p_ss(from)` in projection order.
pub fn stationary_transition_totals(net: &ChannelNetwork) -> Result<Vec<f64>> {
    let l = net.generator();
    let ss = spectral::stationary_state(&l)?;
    let (transitions, _) = net.transitions();
    Ok(transitions
        .iter()
        .map(|t| l.rate(t.from, t.to) * ss.p[t.from])
        .collect())
}

/// A channel pair whose flux ratio diverges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergentPair {
    pub reservoir: String,
    pub filter: String,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// Flux-affinity sum over reservoir/filter-resolved channel pairs
    /// (`k_B = 1`). `+inf` when some pair is one-directional.
    pub resolved: f64,
    /// Same sum over transition totals.
    pub coarse: f64,
    pub resolved_divergence: Option<DivergentPair>,
    pub coarse_divergence: Option<(usize, usize)>,
    pub note: &'static str,
}

const ENTROPY_NOTE: &str = "resolved: channels paired by (reservoir, filter) with reversed transition; \
coarse: transition totals paired by reversed transition; k_B = 1";

enum PairTerm {
    Finite(f64),
    Divergent,
}

fn pair_term(forward: f64, backward: f64) -> PairTerm {
    match (forward > 0.0, backward > 0.0) {
        (false, false) => PairTerm::Finite(0.0),
        (true, true) => PairTerm::Finite((forward - backward) * (forward / backward).ln()),
        _ => PairTerm::Divergent,
    }
}

/// Resolved and coarse-grained entropy production at occupation `p`.
///
/// Duplicate channels with the same reservoir, filter and transition are
/// merged before pairing. A channel with positive rate and no conjugate is an
/// error; a conjugate with zero flux gives an infinite rate.
pub fn entropy_production(net: &ChannelNetwork, p: &[f64]) -> Result<EntropyReport> {
    check_probability(net, p)?;
    type Key = (String, String, usize, usize);
    let mut merged: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    for (e, ch) in net.channels().iter().enumerate() {
        let key = (ch.reservoir.clone(), ch.filter.clone(), ch.from, ch.to);
        merged.entry(key).or_insert((0.0, e)).0 += ch.rate;
    }
    let mut resolved = 0.0;
    let mut resolved_divergence = None;
    for ((res, filt, from, to), &(rate, first)) in &merged {
        let conj = (res.clone(), filt.clone(), *to, *from);
        let back_rate = match merged.get(&conj) {
            Some(&(r, _)) => r,
            None if rate > 0.0 => {
                return Err(Error::UnpairedChannel {
                    channel: first,
                    reservoir: res.clone(),
                    filter: filt.clone(),
                })
            }
            None => continue,
        };
        if from > to {
            continue; // each unordered pair once
        }
        match pair_term(rate * p[*from], back_rate * p[*to]) {
            PairTerm::Finite(v) => resolved += v,
            PairTerm::Divergent => {
                resolved = f64::INFINITY;
                resolved_divergence.get_or_insert(DivergentPair {
                    reservoir: res.clone(),
                    filter: filt.clone(),
                    from: *from,
                    to: *to,
                });
            }
        }
    }

    let l = net.generator();
    let n = net.n_states();
    let mut coarse = 0.0;
    let mut coarse_divergence = None;
    for m in 0..n {
        for k in m + 1..n {
            match pair_term(l.rate(m, k) * p[m], l.rate(k, m) * p[k]) {
                PairTerm::Finite(v) => coarse += v,
                PairTerm::Divergent => {
                    coarse = f64::INFINITY;
                    coarse_divergence.get_or_insert((m, k));
                }
            }
        }
    }
    Ok(EntropyReport {
        resolved,
        coarse,
        resolved_divergence,
        coarse_divergence,
        note: ENTROPY_NOTE,
    })
}

/// Contribution of one transition to a record interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionBound {
    pub transition: usize,
    pub from: usize,
    pub to: usize,
    pub u: f64,
    pub lo: f64,
    pub hi: f64,
    /// Channel attaining the minimum (lowest index on ties).
    pub min_channel: Option<usize>,
    pub max_channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordInterval {
    pub lo: f64,
    pub hi: f64,
    pub direction: Vec<(String, f64)>,
    pub transitions: Vec<TransitionBound>,
}

impl RecordInterval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn dense_direction(net: &ChannelNetwork, a: &[(String, f64)]) -> Result<Vec<f64>> {
    let mut w = vec![0.0; net.n_records()];
    for (name, v) in a {
        w[net.record_index(name)?] += v;
    }
    Ok(w)
}

fn check_totals(net: &ChannelNetwork, u: &[f64]) -> Result<usize> {
    let e0 = net.transitions().0.len();
    if u.len() != e0 {
        return Err(Error::DimensionMismatch {
            what: "transition totals",
            expected: e0,
            found: u.len(),
        });
    }
    if let Some(k) = u.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transition total {k} is negative ({})",
            u[k]
        )));
    }
    Ok(e0)
}

/// Exact range of `a . J` over all channel assignments with totals `u`.
pub fn record_interval(
    net: &ChannelNetwork,
    u: &[f64],
    a: &[(String, f64)],
) -> Result<RecordInterval> {
    check_totals(net, u)?;
    let weights = dense_direction(net, a)?;
    let pp = net.projection();
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut bounds = Vec::with_capacity(pp.n_transitions());
    for (t, group) in pp.channels_by_transition().iter().enumerate() {
        let mut min: Option<(usize, f64)> = None;
        let mut max: Option<(usize, f64)> = None;
        for &e in group {
            let v: f64 = net.channels()[e]
                .increments
                .iter()
                .zip(&weights)
                .map(|(d, w)| d * w)
                .sum();
            if min.is_none_or(|(_, m)| v < m) {
                min = Some((e, v));
            }
            if max.is_none_or(|(_, m)| v > m) {
                max = Some((e, v));
            }
        }
        let (e_min, v_min) = min.expect("transition has a channel");
        let (e_max, v_max) = max.expect("transition has a channel");
        let tlo = u[t] * v_min;
        let thi = u[t] * v_max;
        lo += tlo;
        hi += thi;
        let tr = pp.transitions[t];
        bounds.push(TransitionBound {
            transition: t,
            from: tr.from,
            to: tr.to,
            u: u[t],
            lo: tlo,
            hi: thi,
            min_channel: Some(e_min),
            max_channel: Some(e_max),
        });
    }
    Ok(RecordInterval {
        lo,
        hi,
        direction: a.to_vec(),
        transitions: bounds,
    })
}

/// Per-transition summand of the compatible-record set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionHull {
    pub transition: usize,
    pub from: usize,
    pub to: usize,
    pub u: f64,
    /// Distinct increment vectors of the transition's channels, scaled by `u`.
    pub points: Vec<Vec<f64>>,
    /// First channel realizing each point.
    pub channels: Vec<usize>,
}

/// The compatible-record set as its Minkowski summands `u_t * conv{d_e}`.
/// Points are the deduplicated channel increments; no polytope is built.
pub fn record_hull_summary<S: AsRef<str>>(
    net: &ChannelNetwork,
    u: &[f64],
    selected: &[S],
) -> Result<Vec<TransitionHull>> {
    check_totals(net, u)?;
    let d = net.record_map(selected)?;
    let pp = net.projection();
    let mut out = Vec::with_capacity(pp.n_transitions());
    for (t, group) in pp.channels_by_transition().iter().enumerate() {
        let mut raw: Vec<Vec<f64>> = Vec::new();
        let mut channels = Vec::new();
        for &e in group {
            let v: Vec<f64> = d.d.column(e).iter().copied().collect();
            if !raw.contains(&v) {
                raw.push(v);
                channels.push(e);
            }
        }
        let tr = pp.transitions[t];
        out.push(TransitionHull {
            transition: t,
            from: tr.from,
            to: tr.to,
            u: u[t],
            points: raw
                .into_iter()
                .map(|v| v.into_iter().map(|x| x * u[t]).collect())
                .collect(),
            channels,
        });
    }
    Ok(out)
}

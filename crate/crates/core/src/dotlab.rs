//! Multi-terminal Coulomb-blockaded dot with energy-filtered contacts.
//!
//! States are `0` (empty) and one state per single-particle level. Every
//! (level, reservoir, filter) coupling contributes an entering channel with
//! rate `gamma * f_r(eps_i)` and a leaving channel with rate
//! `gamma * (1 - f_r(eps_i))`. Units: `k_B = hbar = 1`; energies and
//! temperatures share one unit, rates are inverse time.
//!
//! Record conventions, per reservoir `r`:
//! - `heat_r`: heat entering reservoir `r`; `-(eps_i - mu_r)` when an
//!   electron enters the dot from `r`, `+(eps_i - mu_r)` when it leaves to `r`.
//! - `charge_r`: electrons gained by reservoir `r` (`-1` in, `+1` out).
//! - `heat_total`: sum of all reservoir heats.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::completeness::apply_preserving_shift;
use crate::error::{Error, Result};
use crate::network::{ChannelNetwork, TransitionChannel};
use crate::records::{RecordInterval, TransitionBound};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub name: String,
    pub mu: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// Zero-based level index.
    pub level: usize,
    pub reservoir: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub filter: String,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotSpec {
    pub levels: Vec<f64>,
    pub reservoirs: Vec<Reservoir>,
    pub couplings: Vec<Coupling>,
}

impl DotSpec {
    /// One level between two reservoirs `L` and `R` at a common temperature,
    /// each coupled with strength `gamma` through a single filter.
    pub fn two_terminal(eps: f64, mu_l: f64, mu_r: f64, temperature: f64, gamma: f64) -> Self {
        DotSpec {
            levels: vec![eps],
            reservoirs: vec![
                Reservoir {
                    name: "L".into(),
                    mu: mu_l,
                    temperature,
                },
                Reservoir {
                    name: "R".into(),
                    mu: mu_r,
                    temperature,
                },
            ],
            couplings: ["L", "R"]
                .iter()
                .map(|r| Coupling {
                    level: 0,
                    reservoir: r.to_string(),
                    filter: String::new(),
                    gamma,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.reservoirs.is_empty() {
            return Err(Error::InvalidArgument(
                "dot needs at least one level and one reservoir".into(),
            ));
        }
        if let Some(e) = self.levels.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument(format!("level energy {e}")));
        }
        for (k, r) in self.reservoirs.iter().enumerate() {
            if !(r.temperature > 0.0 && r.temperature.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "reservoir `{}` temperature must be positive, got {}",
                    r.name, r.temperature
                )));
            }
            if !r.mu.is_finite() {
                return Err(Error::InvalidArgument(format!("reservoir `{}` mu", r.name)));
            }
            if self.reservoirs[..k].iter().any(|o| o.name == r.name) {
                return Err(Error::InvalidArgument(format!("duplicate reservoir `{}`", r.name)));
            }
        }
        for c in &self.couplings {
            if c.level >= self.levels.len() {
                return Err(Error::InvalidArgument(format!("coupling to missing level {}", c.level)));
            }
            self.reservoir(&c.reservoir)?;
            if !(c.gamma >= 0.0 && c.gamma.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "coupling gamma must be nonnegative, got {}",
                    c.gamma
                )));
            }
        }
        Ok(())
    }

    pub fn reservoir(&self, name: &str) -> Result<&Reservoir> {
        self.reservoirs
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown reservoir `{name}`")))
    }

    /// Heat increment magnitude `q_ir = eps_i - mu_r`.
    pub fn heat_quantum(&self, level: usize, reservoir: &str) -> Result<f64> {
        Ok(self.levels[level] - self.reservoir(reservoir)?.mu)
    }

    pub fn record_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.reservoirs.iter().map(|r| format!("heat_{}", r.name)).collect();
        out.extend(self.reservoirs.iter().map(|r| format!("charge_{}", r.name)));
        out.push("heat_total".into());
        out
    }
}

/// Fermi occupation `1 / (1 + exp((eps - mu) / T))`.
pub fn fermi(eps: f64, mu: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let x = (eps - mu) / temperature;
    Ok(if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    })
}

/// Dot state name for a zero-based level.
pub fn level_state(level: usize) -> usize {
    level + 1
}

pub fn build_dot(spec: &DotSpec) -> Result<ChannelNetwork> {
    spec.validate()?;
    let n_res = spec.reservoirs.len();
    let records = spec.record_names();
    let q = records.len();
    let mut states = vec!["0".to_string()];
    states.extend((1..=spec.levels.len()).map(|i| i.to_string()));

    let mut channels = Vec::new();
    for (i, &eps) in spec.levels.iter().enumerate() {
        let couplings: Vec<&Coupling> = spec.couplings.iter().filter(|c| c.level == i).collect();
        for entering in [true, false] {
            for c in &couplings {
                let r = spec
                    .reservoirs
                    .iter()
                    .position(|x| x.name == c.reservoir)
                    .expect("validated");
                let res = &spec.reservoirs[r];
                let f = fermi(eps, res.mu, res.temperature)?;
                let qi = eps - res.mu;
                let mut inc = vec![0.0; q];
                let (from, to, rate, heat, charge) = if entering {
                    (0, level_state(i), c.gamma * f, -qi, -1.0)
                } else {
                    (level_state(i), 0, c.gamma * (1.0 - f), qi, 1.0)
                };
                inc[r] = heat;
                inc[n_res + r] = charge;
                inc[2 * n_res] = heat;
                channels.push(
                    TransitionChannel::new(from, to, res.name.clone(), rate, inc)
                        .with_filter(c.filter.clone()),
                );
            }
        }
    }
    if channels.is_empty() {
        return Err(Error::InvalidArgument("dot has no couplings".into()));
    }
    ChannelNetwork::new(states, records, channels)
}

/// Total entering and leaving rates per level.
#[derive(Debug, Clone, PartialEq)]
pub struct DotTotals {
    pub gamma_plus: Vec<f64>,
    pub gamma_minus: Vec<f64>,
}

impl DotTotals {
    /// Reads `Gamma_i^+ = L(i, 0)` and `Gamma_i^- = L(0, i)` from a dot network.
    pub fn from_network(net: &ChannelNetwork) -> Self {
        let l = net.generator();
        let levels = net.n_states() - 1;
        DotTotals {
            gamma_plus: (0..levels).map(|i| l.rate(0, level_state(i))).collect(),
            gamma_minus: (0..levels).map(|i| l.rate(level_state(i), 0)).collect(),
        }
    }
}

/// Closed-form stationary occupations `(p_0, p_1, ..., p_N)`.
pub fn dot_stationary(totals: &DotTotals) -> Result<Vec<f64>> {
    if let Some(i) = totals.gamma_minus.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "level {i} has zero leaving rate"
        )));
    }
    let ratios: Vec<f64> = totals
        .gamma_plus
        .iter()
        .zip(&totals.gamma_minus)
        .map(|(p, m)| p / m)
        .collect();
    let p0 = 1.0 / (1.0 + ratios.iter().sum::<f64>());
    let mut out = vec![p0];
    out.extend(ratios.iter().map(|r| r * p0));
    Ok(out)
}

/// Relaxation matrix of the level occupations, `A_ij = -G_i^- d_ij - G_i^+`.
pub fn dot_relaxation_matrix(totals: &DotTotals) -> DMatrix<f64> {
    let n = totals.gamma_plus.len();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { totals.gamma_minus[i] } else { 0.0 };
        -diag - totals.gamma_plus[i]
    })
}

fn entering_channel(net: &ChannelNetwork, level: usize, reservoir: &str) -> Option<usize> {
    net.channels()
        .iter()
        .position(|c| c.from == 0 && c.to == level_state(level) && c.reservoir == reservoir)
}

/// Shifts rate `eta` from the entering channel of `lose` to that of `gain`
/// on one level. Transition totals, and so the generator, stay bitwise equal.
pub fn make_twin(
    net: &ChannelNetwork,
    level: usize,
    gain: &str,
    lose: &str,
    eta: f64,
) -> Result<ChannelNetwork> {
    let missing = |r: &str| Error::InvalidArgument(format!("no entering channel 0 -> {} via `{r}`", level_state(level)));
    if level_state(level) >= net.n_states() {
        return Err(Error::InvalidArgument(format!("no level {level}")));
    }
    let g = entering_channel(net, level, gain).ok_or_else(|| missing(gain))?;
    let s = entering_channel(net, level, lose).ok_or_else(|| missing(lose))?;
    if g == s {
        return Err(Error::InvalidArgument("gain and lose reservoirs coincide".into()));
    }
    let w_g = net.channels()[g].rate;
    let w_s = net.channels()[s].rate;
    if !eta.is_finite() || eta > w_s || eta < -w_g {
        return Err(Error::InvalidArgument(format!(
            "eta {eta} outside [-{w_g}, {w_s}]"
        )));
    }
    if eta == 0.0 {
        return Ok(net.clone());
    }
    let mut c = vec![0.0; net.n_channels()];
    c[g] = 1.0;
    c[s] = -1.0;
    apply_preserving_shift(net, &c, eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DotLevelBounds {
    pub level: usize,
    pub entering: RecordInterval,
    pub leaving: RecordInterval,
}

fn extremes(spec: &DotSpec, level: usize, allowed: &[String]) -> Result<((usize, f64), (usize, f64))> {
    if allowed.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "empty allowed reservoir set for level {level}"
        )));
    }
    let mut min = (0, f64::INFINITY);
    let mut max = (0, f64::NEG_INFINITY);
    for (k, r) in allowed.iter().enumerate() {
        let q = spec.heat_quantum(level, r)?;
        if q < min.1 {
            min = (k, q);
        }
        if q > max.1 {
            max = (k, q);
        }
    }
    Ok((min, max))
}

/// Heat-current bounds per level when only the totals are known and each
/// transition may be supplied by any reservoir of the allowed sets.
///
/// Entering: `[-p0 G+ max q, -p0 G+ min q]`; leaving:
/// `[p_i G- min q, p_i G- max q]`, with `q = eps_i - mu_r`.
pub fn dot_heat_bounds(
    totals: &DotTotals,
    p: &[f64],
    spec: &DotSpec,
    allowed_in: &[Vec<String>],
    allowed_out: &[Vec<String>],
) -> Result<Vec<DotLevelBounds>> {
    spec.validate()?;
    let n = spec.levels.len();
    for (what, len) in [
        ("gamma_plus", totals.gamma_plus.len()),
        ("gamma_minus", totals.gamma_minus.len()),
        ("allowed_in", allowed_in.len()),
        ("allowed_out", allowed_out.len()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    if p.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            what: "probability vector",
            expected: n + 1,
            found: p.len(),
        });
    }
    let net = build_dot(spec)?;
    let (transitions, _) = net.transitions();
    let t_index = |from: usize, to: usize| transitions.iter().position(|t| t.from == from && t.to == to);
    let channel_of = |from: usize, to: usize, r: &str| {
        net.channels()
            .iter()
            .position(|c| c.from == from && c.to == to && c.reservoir == r)
    };
    let direction = vec![("heat_total".to_string(), 1.0)];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = level_state(i);

        let ((kmin, qmin), (kmax, qmax)) = extremes(spec, i, &allowed_in[i])?;
        let u_in = p[0] * totals.gamma_plus[i];
        let lo = -(u_in * qmax);
        let hi = -(u_in * qmin);
        let entering = RecordInterval {
            lo,
            hi,
            direction: direction.clone(),
            transitions: vec![TransitionBound {
                transition: t_index(0, s).unwrap_or(usize::MAX),
                from: 0,
                to: s,
                u: u_in,
                lo,
                hi,
                min_channel: channel_of(0, s, &allowed_in[i][kmax]),
                max_channel: channel_of(0, s, &allowed_in[i][kmin]),
            }],
        };

        let ((kmin, qmin), (kmax, qmax)) = extremes(spec, i, &allowed_out[i])?;
        let u_out = p[s] * totals.gamma_minus[i];
        let lo = u_out * qmin;
        let hi = u_out * qmax;
        let leaving = RecordInterval {
            lo,
            hi,
            direction: direction.clone(),
            transitions: vec![TransitionBound {
                transition: t_index(s, 0).unwrap_or(usize::MAX),
                from: s,
                to: 0,
                u: u_out,
                lo,
                hi,
                min_channel: channel_of(s, 0, &allowed_out[i][kmin]),
                max_channel: channel_of(s, 0, &allowed_out[i][kmax]),
            }],
        };
        out.push(DotLevelBounds {
            level: i,
            entering,
            leaving,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fermi_values() {
        assert_eq!(fermi(0.3, 0.3, 2.0).unwrap(), 0.5);
        assert_relative_eq!(fermi(1.0, 0.5, 1.0).unwrap(), 0.377_540_668_798_145_4, epsilon = 1e-15);
        let far = fermi(50.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(far, (-50f64).exp() / (1.0 + (-50f64).exp()), max_relative = 1e-14);
        assert!(fermi(1e6, 0.0, 1.0).unwrap() >= 0.0);
        assert_eq!(fermi(-1e6, 0.0, 1.0).unwrap(), 1.0);
        assert!(fermi(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn stationary_closed_forms() {
        let t = DotTotals {
            gamma_plus: vec![0.8],
            gamma_minus: vec![0.8],
        };
        assert_eq!(dot_stationary(&t).unwrap(), vec![0.5, 0.5]);
        let t = DotTotals {
            gamma_plus: vec![1.0, 1.0],
            gamma_minus: vec![1.0, 1.0],
        };
        for x in dot_stationary(&t).unwrap() {
            assert_relative_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
        let t = DotTotals {
            gamma_plus: vec![1.0],
            gamma_minus: vec![0.0],
        };
        assert!(dot_stationary(&t).is_err());
    }

    #[test]
    fn zero_coupling_keeps_structural_channels() {
        let mut spec = DotSpec::two_terminal(1.0, 0.5, -0.5, 1.0, 1.0);
        spec.couplings[1].gamma = 0.0;
        let net = build_dot(&spec).unwrap();
        assert_eq!(net.channel_counts(), (4, 2));
        assert_eq!(net.channels()[1].rate, 0.0);
    }

    #[test]
    fn single_level_relaxation() {
        let t = DotTotals {
            gamma_plus: vec![0.3],
            gamma_minus: vec![1.1],
        };
        assert_relative_eq!(dot_relaxation_matrix(&t)[(0, 0)], -1.4, epsilon = 1e-15);
    }

    #[test]
    fn twin_argument_checks() {
        let net = build_dot(&DotSpec::two_terminal(1.0, 0.5, -0.5, 1.0, 1.0)).unwrap();
        assert_eq!(make_twin(&net, 0, "L", "R", 0.0).unwrap(), net);
        let w_r = net.channels()[1].rate;
        assert!(make_twin(&net, 0, "L", "R", w_r * 1.0001).is_err());
        let edge = make_twin(&net, 0, "L", "R", w_r).unwrap();
        assert_eq!(edge.channels()[1].rate, 0.0);
        assert_eq!(edge.generator(), net.generator());
        assert!(make_twin(&net, 0, "L", "X", 0.1).is_err());
        assert!(make_twin(&net, 3, "L", "R", 0.1).is_err());
    }

    #[test]
    fn single_allowed_reservoir_collapses() {
        let spec = DotSpec::two_terminal(1.0, 0.5, -0.5, 1.0, 1.0);
        let net = build_dot(&spec).unwrap();
        let totals = DotTotals::from_network(&net);
        let p = dot_stationary(&totals).unwrap();
        let only_l = vec![vec!["L".to_string()]];
        let b = dot_heat_bounds(&totals, &p, &spec, &only_l, &only_l).unwrap();
        assert_eq!(b[0].entering.lo, b[0].entering.hi);
        assert_eq!(b[0].leaving.lo, b[0].leaving.hi);
        assert!(dot_heat_bounds(&totals, &p, &spec, &[vec![]], &only_l).is_err());
    }
}

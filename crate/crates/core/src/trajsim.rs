//! Gillespie simulation of channel-resolved jump processes.
//!
//! Trajectory `k` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `k`, so results depend only on `(network, config)` and not on how
//! many threads run the trajectories. Aggregation is in trajectory order.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fcs::{CumulantReport, Method};
use crate::network::ChannelNetwork;
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Simulated time per trajectory.
    Time(f64),
    /// Jump budget per trajectory.
    Jumps(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// Sample the initial state from the stationary distribution.
    Stationary,
    State(usize),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: Horizon,
    pub n_trajectories: usize,
    pub seed: u64,
    pub initial: Initial,
    /// Simulated time discarded before accumulation starts.
    pub burn_in: f64,
}

impl SimConfig {
    pub fn new(horizon: Horizon, n_trajectories: usize, seed: u64) -> Self {
        SimConfig {
            horizon,
            n_trajectories,
            seed,
            initial: Initial::Stationary,
            burn_in: 0.0,
        }
    }

    fn validate(&self, n_states: usize) -> Result<()> {
        match self.horizon {
            Horizon::Time(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::InvalidArgument(format!("time horizon {t}")))
            }
            Horizon::Jumps(0) => return Err(Error::InvalidArgument("jump budget 0".into())),
            _ => {}
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("need at least one trajectory".into()));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::InvalidArgument(format!("burn-in {}", self.burn_in)));
        }
        match &self.initial {
            Initial::State(s) if *s >= n_states => {
                Err(Error::InvalidArgument(format!("initial state {s} out of range")))
            }
            Initial::Distribution(p) if p.len() != n_states => Err(Error::DimensionMismatch {
                what: "initial distribution",
                expected: n_states,
                found: p.len(),
            }),
            Initial::Distribution(p) if p.iter().any(|x| !(*x >= 0.0)) || p.iter().sum::<f64>() <= 0.0 => {
                Err(Error::InvalidArgument("initial distribution".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub index: usize,
    /// Accumulated record totals, aligned with the network's records.
    pub record_totals: Vec<f64>,
    pub channel_counts: Vec<u64>,
    /// Time spent in each state.
    pub occupation: Vec<f64>,
    pub elapsed: f64,
    pub jumps: u64,
    /// Hit a state with zero escape rate before the horizon.
    pub absorbed: bool,
}

impl TrajectoryStats {
    pub fn record_rates(&self) -> Vec<f64> {
        self.record_totals.iter().map(|x| x / self.elapsed).collect()
    }
}

/// Outgoing channels (positive rate only) per state, with cumulative rates.
struct JumpTable {
    out: Vec<Vec<(usize, f64)>>,
    escape: Vec<f64>,
}

impl JumpTable {
    fn new(net: &ChannelNetwork) -> Self {
        let mut out = vec![Vec::new(); net.n_states()];
        for (e, ch) in net.channels().iter().enumerate() {
            if ch.rate > 0.0 {
                out[ch.from].push((e, ch.rate));
            }
        }
        let escape = out.iter().map(|v| v.iter().map(|(_, r)| r).sum()).collect();
        JumpTable { out, escape }
    }

    fn pick(&self, state: usize, rng: &mut ChaCha8Rng) -> usize {
        let target = rng.random::<f64>() * self.escape[state];
        let mut acc = 0.0;
        let choices = &self.out[state];
        for &(e, r) in choices {
            acc += r;
            if target < acc {
                return e;
            }
        }
        choices.last().expect("state has outgoing channels").0
    }
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn run_trajectory(
    net: &ChannelNetwork,
    table: &JumpTable,
    cfg: &SimConfig,
    init: &[f64],
    index: usize,
    mut on_jump: impl FnMut(f64, usize, usize),
) -> TrajectoryStats {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut state = sample_index(init, &mut rng);

    // burn-in
    let mut t = 0.0;
    while t < cfg.burn_in {
        let esc = table.escape[state];
        if esc <= 0.0 {
            break;
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / esc;
        if t + dt >= cfg.burn_in {
            // memoryless: the residual wait restarts at the accumulation origin
            break;
        }
        t += dt;
        state = net.channels()[table.pick(state, &mut rng)].to;
    }

    let mut stats = TrajectoryStats {
        index,
        record_totals: vec![0.0; net.n_records()],
        channel_counts: vec![0; net.n_channels()],
        occupation: vec![0.0; net.n_states()],
        elapsed: 0.0,
        jumps: 0,
        absorbed: false,
    };
    let mut t = 0.0;
    loop {
        if let Horizon::Jumps(n) = cfg.horizon {
            if stats.jumps >= n {
                break;
            }
        }
        let esc = table.escape[state];
        if esc <= 0.0 {
            stats.absorbed = true;
            // stays put until the horizon, so all trajectories share T
            if let Horizon::Time(end) = cfg.horizon {
                stats.occupation[state] += end - t;
                t = end;
            }
            break;
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / esc;
        if let Horizon::Time(end) = cfg.horizon {
            if t + dt >= end {
                stats.occupation[state] += end - t;
                t = end;
                break;
            }
        }
        stats.occupation[state] += dt;
        t += dt;
        let e = table.pick(state, &mut rng);
        let ch = &net.channels()[e];
        for (acc, d) in stats.record_totals.iter_mut().zip(&ch.increments) {
            *acc += d;
        }
        stats.channel_counts[e] += 1;
        stats.jumps += 1;
        state = ch.to;
        on_jump(t, e, state);
    }
    stats.elapsed = t;
    stats
}

fn prepare(net: &ChannelNetwork, cfg: &SimConfig) -> Result<(JumpTable, Vec<f64>)> {
    cfg.validate(net.n_states())?;
    let table = JumpTable::new(net);
    if table.escape.iter().all(|e| *e <= 0.0) {
        return Err(Error::Simulation("network has no channel with positive rate".into()));
    }
    let init = match &cfg.initial {
        Initial::Stationary => spectral::stationary_state(&net.generator())?.p,
        Initial::State(s) => {
            let mut v = vec![0.0; net.n_states()];
            v[*s] = 1.0;
            v
        }
        Initial::Distribution(p) => p.clone(),
    };
    Ok((table, init))
}

/// Runs `cfg.n_trajectories` independent trajectories in parallel.
pub fn simulate(net: &ChannelNetwork, cfg: &SimConfig) -> Result<Vec<TrajectoryStats>> {
    let (table, init) = prepare(net, cfg)?;
    Ok((0..cfg.n_trajectories)
        .into_par_iter()
        .map(|k| run_trajectory(net, &table, cfg, &init, k, |_, _, _| {}))
        .collect())
}

/// Runs trajectory `index` alone and writes one `time, channel, state_after`
/// line per jump.
pub fn simulate_dump<W: Write>(
    net: &ChannelNetwork,
    cfg: &SimConfig,
    index: usize,
    out: &mut W,
) -> Result<TrajectoryStats> {
    let (table, init) = prepare(net, cfg)?;
    let mut io_err = None;
    let stats = run_trajectory(net, &table, cfg, &init, index, |t, e, s| {
        if io_err.is_none() {
            if let Err(err) = writeln!(out, "{t}, {e}, {s}") {
                io_err = Some(err);
            }
        }
    });
    if let Some(err) = io_err {
        return Err(Error::Simulation(format!("trajectory dump: {err}")));
    }
    Ok(stats)
}

/// Fraction of total simulated time spent in each state.
pub fn occupation_fractions(stats: &[TrajectoryStats]) -> Vec<f64> {
    let Some(first) = stats.first() else {
        return vec![];
    };
    let total: f64 = stats.iter().map(|s| s.elapsed).sum();
    (0..first.occupation.len())
        .map(|k| stats.iter().map(|s| s.occupation[k]).sum::<f64>() / total)
        .collect()
}

fn covariance(xs: &[&[f64]], q: usize) -> DMatrix<f64> {
    let n = xs.len() as f64;
    let mean: Vec<f64> = (0..q).map(|m| xs.iter().map(|x| x[m]).sum::<f64>() / n).collect();
    let mut c = DMatrix::zeros(q, q);
    for mu in 0..q {
        for nu in mu..q {
            let s: f64 = xs
                .iter()
                .map(|x| (x[mu] - mean[mu]) * (x[nu] - mean[nu]))
                .sum::<f64>()
                / (n - 1.0);
            c[(mu, nu)] = s;
            c[(nu, mu)] = s;
        }
    }
    c
}

const MAX_BATCHES: usize = 20;

/// Monte Carlo means and noise.
///
/// Means are total records over total time. Noise is the across-trajectory
/// covariance of the totals divided by the common horizon `T`; its standard
/// errors come from up to 20 contiguous batches of trajectories.
pub fn empirical_cumulants(net: &ChannelNetwork, stats: &[TrajectoryStats]) -> Result<CumulantReport> {
    if stats.len() < 2 {
        return Err(Error::InvalidArgument(
            "noise estimation needs at least two trajectories".into(),
        ));
    }
    let horizon = stats[0].elapsed;
    if let Some(s) = stats.iter().find(|s| s.elapsed != horizon) {
        return Err(Error::InvalidArgument(format!(
            "unequal horizons: trajectory {} ran {} vs {}",
            s.index, s.elapsed, horizon
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("zero-length trajectories".into()));
    }
    let q = net.n_records();
    let n = stats.len();
    let means: Vec<f64> = (0..q)
        .map(|m| stats.iter().map(|s| s.record_totals[m]).sum::<f64>() / (n as f64 * horizon))
        .collect();
    let rates: Vec<Vec<f64>> = stats.iter().map(|s| s.record_rates()).collect();
    let rate_refs: Vec<&[f64]> = rates.iter().map(|v| v.as_slice()).collect();
    let rate_cov = covariance(&rate_refs, q);
    let mean_errors: Vec<f64> = (0..q).map(|m| (rate_cov[(m, m)] / n as f64).sqrt()).collect();

    let totals: Vec<&[f64]> = stats.iter().map(|s| s.record_totals.as_slice()).collect();
    let noise = covariance(&totals, q) / horizon;

    let batches = MAX_BATCHES.min(n / 2);
    let noise_errors = if batches >= 2 {
        let size = n / batches;
        let estimates: Vec<DMatrix<f64>> = (0..batches)
            .map(|b| {
                let end = if b + 1 == batches { n } else { (b + 1) * size };
                covariance(&totals[b * size..end], q) / horizon
            })
            .collect();
        let bf = batches as f64;
        let avg = estimates.iter().fold(DMatrix::zeros(q, q), |a, e| a + e) / bf;
        let var = estimates
            .iter()
            .fold(DMatrix::zeros(q, q), |a, e| a + (e - &avg).map(|x| x * x))
            / (bf - 1.0);
        Some(var.map(|v| (v / bf).sqrt()))
    } else {
        None
    };
    Ok(CumulantReport {
        records: net.records().to_vec(),
        means,
        noise,
        method: Method::MonteCarlo,
        mean_errors: Some(mean_errors),
        noise_errors,
    })
}

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trec::dotlab::{build_dot, DotSpec};
use trec::{ChannelNetwork, TransitionChannel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn twin_spec() -> DotSpec {
    DotSpec::two_terminal(1.0, 0.5, -0.5, 1.0, 1.0)
}

pub fn twin_dot() -> ChannelNetwork {
    build_dot(&twin_spec()).unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_states: usize,
    pub max_per_transition: usize,
    pub records: usize,
    /// Every channel gets a conjugate with the same reservoir.
    pub paired: bool,
    /// Increments drawn from {-2, -1, 0, 1, 2} (exact ties), else uniform.
    pub discrete: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_states: 6,
            max_per_transition: 5,
            records: 3,
            paired: false,
            discrete: false,
        }
    }
}

fn increment(rng: &mut ChaCha8Rng, discrete: bool) -> f64 {
    if discrete {
        rng.random_range(-2i32..=2) as f64
    } else {
        rng.random_range(-1.5..1.5)
    }
}

/// Irreducible random network: a ring in both directions plus random chords,
/// each ordered transition realized by 1..=max_per_transition channels.
pub fn random_network(rng: &mut ChaCha8Rng, shape: Shape) -> ChannelNetwork {
    let n = rng.random_range(2..=shape.max_states);
    let mut edges = Vec::new();
    for m in 0..n {
        let k = (m + 1) % n;
        if n == 2 && m == 1 {
            break;
        }
        edges.push((m, k));
    }
    for m in 0..n {
        for k in m + 1..n {
            if !edges.contains(&(m, k)) && !edges.contains(&(k, m)) && rng.random_bool(0.3) {
                edges.push((m, k));
            }
        }
    }
    let records: Vec<String> = (0..shape.records).map(|r| format!("x{r}")).collect();
    let mut channels = Vec::new();
    for &(a, b) in &edges {
        let count = rng.random_range(1..=shape.max_per_transition);
        if shape.paired {
            for c in 0..count {
                for (from, to) in [(a, b), (b, a)] {
                    let inc = (0..shape.records).map(|_| increment(rng, shape.discrete)).collect();
                    let rate = rng.random_range(0.2..2.0);
                    channels.push(TransitionChannel::new(from, to, format!("r{c}"), rate, inc));
                }
            }
        } else {
            for (from, to) in [(a, b), (b, a)] {
                let count = if (from, to) == (a, b) { count } else { rng.random_range(1..=shape.max_per_transition) };
                for c in 0..count {
                    let inc = (0..shape.records).map(|_| increment(rng, shape.discrete)).collect();
                    let rate = rng.random_range(0.2..2.0);
                    channels.push(TransitionChannel::new(from, to, format!("r{c}"), rate, inc));
                }
            }
        }
    }
    // shuffle so that transition order is not simply grouped
    for i in (1..channels.len()).rev() {
        let j = rng.random_range(0..=i);
        channels.swap(i, j);
    }
    let states = (0..n).map(|s| format!("s{s}")).collect();
    ChannelNetwork::new(states, records, channels).unwrap()
}

/// Random probability vector with strictly positive entries.
pub fn random_probability(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Minimum of `dj^T R dj / 2` subject to `P dj = u`, from the KKT system
/// `[[R, P^T], [P, 0]] [dj; lambda] = [0; u]` with `R = diag(1 / r_inv)`.
pub fn kkt_cost(p: &DMatrix<f64>, r_inv: &[f64], u: &DVector<f64>) -> f64 {
    let e = p.ncols();
    let t = p.nrows();
    let mut k = DMatrix::zeros(e + t, e + t);
    for i in 0..e {
        k[(i, i)] = 1.0 / r_inv[i];
    }
    k.view_mut((0, e), (e, t)).copy_from(&p.transpose());
    k.view_mut((e, 0), (t, e)).copy_from(p);
    let mut rhs = DVector::zeros(e + t);
    rhs.rows_mut(e, t).copy_from(u);
    let sol = k.lu().solve(&rhs).expect("KKT system solvable");
    let dj = sol.rows(0, e);
    (0..e).map(|i| 0.5 * dj[i] * dj[i] / r_inv[i]).sum()
}

/// Extremes of `a . sum_e d_e j_e` over all vertex assignments (one channel
/// carries the whole total of each transition), by full enumeration.
pub fn vertex_extrema(net: &ChannelNetwork, u: &[f64], weights: &[f64]) -> (f64, f64) {
    let groups = net.projection().channels_by_transition();
    let value = |e: usize| -> f64 {
        net.channels()[e]
            .increments
            .iter()
            .zip(weights)
            .map(|(d, w)| d * w)
            .sum()
    };
    let mut idx = vec![0usize; groups.len()];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    loop {
        let v: f64 = groups
            .iter()
            .zip(&idx)
            .enumerate()
            .map(|(t, (g, &k))| u[t] * value(g[k]))
            .sum();
        lo = lo.min(v);
        hi = hi.max(v);
        let mut t = 0;
        loop {
            if t == groups.len() {
                return (lo, hi);
            }
            idx[t] += 1;
            if idx[t] < groups[t].len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}

/// Record value for explicit simplex weights `q_t^alpha`.
pub fn simplex_value(net: &ChannelNetwork, u: &[f64], weights: &[f64], q: &[f64]) -> f64 {
    let pp = net.projection();
    net.channels()
        .iter()
        .enumerate()
        .map(|(e, ch)| {
            let t = pp.channel_transition[e];
            let v: f64 = ch.increments.iter().zip(weights).map(|(d, w)| d * w).sum();
            u[t] * q[e] * v
        })
        .sum()
}

/// Random point of the product of per-transition simplices.
pub fn random_simplex_weights(net: &ChannelNetwork, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pp = net.projection();
    let mut q = vec![0.0; net.n_channels()];
    for g in pp.channels_by_transition() {
        // exponential spacings give a uniform point on the simplex
        let raw: Vec<f64> = g.iter().map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = raw.iter().sum();
        for (&e, r) in g.iter().zip(raw) {
            q[e] = r / s;
        }
    }
    q
}

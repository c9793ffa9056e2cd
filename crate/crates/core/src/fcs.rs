//! Full counting statistics of channel records.
//!
//! The tilted generator weights every channel by `exp(chi . d_e)`. Its
//! dominant eigenvalue is the scaled cumulant generating function; the first
//! two cumulants also have closed forms in terms of the stationary state and
//! the Drazin inverse of the untilted generator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ChannelNetwork;
use crate::spectral::{self, DrazinInverse, StationaryState};

/// Largest exponent accepted in a tilted rate.
pub const MAX_EXPONENT: f64 = 700.0;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Counting fields, dense over the network's records.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingField {
    values: Vec<f64>,
}

impl CountingField {
    pub fn zeros(net: &ChannelNetwork) -> Self {
        CountingField {
            values: vec![0.0; net.n_records()],
        }
    }

    /// Fields for named records; unnamed records get zero.
    pub fn from_pairs(net: &ChannelNetwork, pairs: &[(&str, f64)]) -> Result<Self> {
        let mut values = vec![0.0; net.n_records()];
        for &(name, v) in pairs {
            values[net.record_index(name)?] = v;
        }
        Ok(CountingField { values })
    }

    pub fn from_dense(net: &ChannelNetwork, values: Vec<f64>) -> Result<Self> {
        if values.len() != net.n_records() {
            return Err(Error::DimensionMismatch {
                what: "counting field",
                expected: net.n_records(),
                found: values.len(),
            });
        }
        Ok(CountingField { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn exponent(&self, increments: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(increments)
            .filter(|(chi, _)| **chi != 0.0)
            .map(|(chi, d)| chi * d)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedGenerator {
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    FiniteDifference,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::FiniteDifference => "finite_difference",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

/// Mean currents and zero-frequency noise for every record of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantReport {
    pub records: Vec<String>,
    pub means: Vec<f64>,
    pub noise: DMatrix<f64>,
    pub method: Method,
    pub mean_errors: Option<Vec<f64>>,
    pub noise_errors: Option<DMatrix<f64>>,
}

impl CumulantReport {
    /// Fano-type ratio `S_mm / |J_m|` per record (`NaN` for zero mean).
    pub fn fano(&self) -> Vec<f64> {
        self.means
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                if j == 0.0 {
                    f64::NAN
                } else {
                    self.noise[(k, k)] / j.abs()
                }
            })
            .collect()
    }
}

fn check_exponent(channel: usize, exponent: f64) -> Result<()> {
    if exponent > MAX_EXPONENT || !exponent.is_finite() {
        return Err(Error::Overflow { channel, exponent });
    }
    Ok(())
}

/// `L(chi)`: tilted off-diagonals, untilted diagonal.
pub fn tilted_generator(net: &ChannelNetwork, chi: &CountingField) -> Result<TiltedGenerator> {
    if chi.values.len() != net.n_records() {
        return Err(Error::DimensionMismatch {
            what: "counting field",
            expected: net.n_records(),
            found: chi.values.len(),
        });
    }
    let mut m = net.generator().matrix().clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] = 0.0;
            }
        }
    }
    for (e, ch) in net.channels().iter().enumerate() {
        let s = chi.exponent(&ch.increments);
        check_exponent(e, s)?;
        m[(ch.to, ch.from)] += ch.rate * s.exp();
    }
    Ok(TiltedGenerator { matrix: m })
}

/// First and second derivatives of the tilted generator at zero field for
/// record indices `mu`, `nu`. Diagonals vanish.
pub fn tilt_derivatives_idx(
    net: &ChannelNetwork,
    mu: usize,
    nu: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = net.n_states();
    let mut l_mu = DMatrix::zeros(n, n);
    let mut l_munu = DMatrix::zeros(n, n);
    for ch in net.channels() {
        let dm = ch.increments[mu];
        let dn = ch.increments[nu];
        l_mu[(ch.to, ch.from)] += ch.rate * dm;
        l_munu[(ch.to, ch.from)] += ch.rate * dm * dn;
    }
    (l_mu, l_munu)
}

pub fn tilt_derivatives(
    net: &ChannelNetwork,
    mu: &str,
    nu: &str,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = net.record_index(mu)?;
    let b = net.record_index(nu)?;
    Ok(tilt_derivatives_idx(net, a, b))
}

fn first_derivative(net: &ChannelNetwork, mu: usize) -> DMatrix<f64> {
    let n = net.n_states();
    let mut l_mu = DMatrix::zeros(n, n);
    for ch in net.channels() {
        l_mu[(ch.to, ch.from)] += ch.rate * ch.increments[mu];
    }
    l_mu
}

/// Stationary state and Drazin inverse of a network's generator.
#[derive(Debug, Clone)]
pub struct StationaryData {
    pub stationary: StationaryState,
    pub drazin: DrazinInverse,
}

impl StationaryData {
    pub fn new(net: &ChannelNetwork) -> Result<Self> {
        let l = net.generator();
        let stationary = spectral::stationary_state(&l)?;
        let drazin = spectral::drazin_inverse(&l, &stationary)?;
        Ok(StationaryData { stationary, drazin })
    }
}

/// `J_mu = 1^T L_mu p_ss` for every record.
pub fn mean_currents(net: &ChannelNetwork) -> Result<Vec<f64>> {
    let ss = spectral::stationary_state(&net.generator())?;
    Ok(mean_currents_at(net, &ss))
}

pub fn mean_currents_at(net: &ChannelNetwork, ss: &StationaryState) -> Vec<f64> {
    let p = ss.as_vector();
    (0..net.n_records())
        .map(|mu| (first_derivative(net, mu) * &p).sum())
        .collect()
}

/// Zero-frequency noise matrix
/// `S = 1^T L_munu p - 1^T (L_mu R L_nu + L_nu R L_mu) p`.
pub fn noise_matrix(net: &ChannelNetwork) -> Result<DMatrix<f64>> {
    let data = StationaryData::new(net)?;
    Ok(noise_matrix_with(net, &data))
}

pub fn noise_matrix_with(net: &ChannelNetwork, data: &StationaryData) -> DMatrix<f64> {
    let q = net.n_records();
    let p = data.stationary.as_vector();
    let r = &data.drazin.r;
    let firsts: Vec<DMatrix<f64>> = (0..q).map(|mu| first_derivative(net, mu)).collect();
    // R L_nu p, shared across rows
    let r_l_p: Vec<DVector<f64>> = firsts.iter().map(|l| r * (l * &p)).collect();
    let mut s = DMatrix::zeros(q, q);
    for mu in 0..q {
        for nu in mu..q {
            let (_, l_munu) = tilt_derivatives_idx(net, mu, nu);
            let direct = (l_munu * &p).sum();
            let cross = (&firsts[mu] * &r_l_p[nu]).sum() + (&firsts[nu] * &r_l_p[mu]).sum();
            let v = direct - cross;
            s[(mu, nu)] = v;
            s[(nu, mu)] = v;
        }
    }
    s
}

/// Means and noise from the closed-form expressions.
pub fn cumulants_analytic(net: &ChannelNetwork) -> Result<CumulantReport> {
    let data = StationaryData::new(net)?;
    Ok(CumulantReport {
        records: net.records().to_vec(),
        means: mean_currents_at(net, &data.stationary),
        noise: noise_matrix_with(net, &data),
        method: Method::Analytic,
        mean_errors: None,
        noise_errors: None,
    })
}

/// Scaled cumulant generating function: the eigenvalue of `L(chi)` with the
/// largest real part.
pub fn scgf(net: &ChannelNetwork, chi: &CountingField) -> Result<f64> {
    let tilted = tilted_generator(net, chi)?;
    let (re, im) = spectral::dominant_eigenvalue(&tilted.matrix)?;
    if im.abs() > 1e-8 * (1.0 + re.abs()) {
        return Err(Error::Eigen(format!(
            "dominant eigenvalue is not real ({re} + {im}i)"
        )));
    }
    Ok(re)
}

fn scgf_at(net: &ChannelNetwork, values: Vec<f64>) -> Result<f64> {
    scgf(net, &CountingField { values })
}

/// Means and noise from central differences of the SCGF; mixed second
/// derivatives use the four-point stencil.
pub fn cumulants_fd(net: &ChannelNetwork, h: f64) -> Result<CumulantReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
    }
    // Stationary analysis is still required to have a meaningful SCGF.
    spectral::stationary_state(&net.generator())?;
    let q = net.n_records();
    let shifted = |pairs: &[(usize, f64)]| {
        let mut v = vec![0.0; q];
        for &(k, x) in pairs {
            v[k] += x;
        }
        scgf_at(net, v)
    };
    let center = shifted(&[])?;
    let mut means = vec![0.0; q];
    let mut noise = DMatrix::zeros(q, q);
    for mu in 0..q {
        let plus = shifted(&[(mu, h)])?;
        let minus = shifted(&[(mu, -h)])?;
        means[mu] = (plus - minus) / (2.0 * h);
        noise[(mu, mu)] = (plus - 2.0 * center + minus) / (h * h);
    }
    for mu in 0..q {
        for nu in mu + 1..q {
            let pp = shifted(&[(mu, h), (nu, h)])?;
            let pm = shifted(&[(mu, h), (nu, -h)])?;
            let mp = shifted(&[(mu, -h), (nu, h)])?;
            let mm = shifted(&[(mu, -h), (nu, -h)])?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            noise[(mu, nu)] = v;
            noise[(nu, mu)] = v;
        }
    }
    Ok(CumulantReport {
        records: net.records().to_vec(),
        means,
        noise,
        method: Method::FiniteDifference,
        mean_errors: None,
        noise_errors: None,
    })
}

/// First-order change of the channel-resolved tilted rates under the channel
/// perturbation `c`: `sum_e c_e exp(chi . d_e) |n(e)><m(e)|`. Diagonal is
/// zero; for `c` in ker P the escape rates are unchanged.
pub fn tilted_null_variation(
    net: &ChannelNetwork,
    c: &[f64],
    chi: &CountingField,
) -> Result<DMatrix<f64>> {
    if c.len() != net.n_channels() {
        return Err(Error::DimensionMismatch {
            what: "channel vector",
            expected: net.n_channels(),
            found: c.len(),
        });
    }
    let n = net.n_states();
    let mut out = DMatrix::zeros(n, n);
    for (e, (ch, &ce)) in net.channels().iter().zip(c).enumerate() {
        let s = chi.exponent(&ch.increments);
        check_exponent(e, s)?;
        out[(ch.to, ch.from)] += ce * s.exp();
    }
    Ok(out)
}

//! Which records are fixed by the state generator.
//!
//! Channel redistributions in `ker P` leave every transition total, and so
//! the generator, unchanged. A linear record `D j` is determined by the
//! generator exactly when `D` annihilates `ker P`; the rank of `D` on
//! `ker P` counts the record directions that state data cannot recover.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fcs::StationaryData;
use crate::network::{ChannelNetwork, RecordMap};
use crate::spectral::{self, KernelBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessVerdict {
    pub complete: bool,
    /// Unit channel vector in the hidden space with the largest record
    /// response; present iff incomplete.
    pub witness: Option<DVector<f64>>,
    /// `D * witness`.
    pub witness_response: Option<DVector<f64>>,
    pub lost_rank: usize,
    /// Absolute threshold applied to singular values of the restricted map.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseCovarianceSource {
    UserSupplied,
    StationaryTraffic,
}

/// `Q = (P R^-1 P^T)^+`, the quadratic cost of transition-current
/// fluctuations after hidden channel directions are minimized out.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientForm {
    pub q: DMatrix<f64>,
    pub source: InverseCovarianceSource,
}

impl QuotientForm {
    /// `I_gen(u) = u^T Q u / 2`.
    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.q * u))
    }
}

fn check_columns(net: &ChannelNetwork, d: &RecordMap) -> Result<()> {
    if d.d.ncols() != net.n_channels() {
        return Err(Error::DimensionMismatch {
            what: "record map columns",
            expected: net.n_channels(),
            found: d.d.ncols(),
        });
    }
    Ok(())
}

/// Orthonormal basis of `ker P`.
pub fn generator_preserving_basis(net: &ChannelNetwork, tol: f64) -> KernelBasis {
    spectral::kernel_basis(&net.projection().p, tol)
}

fn record_scale(d: &DMatrix<f64>) -> f64 {
    spectral::singular_values(d).first().copied().unwrap_or(0.0).max(1.0)
}

/// Verdict for `D` against a hidden space spanned by the columns of `basis`.
fn verdict_on(d: &DMatrix<f64>, basis: &DMatrix<f64>, tol: f64) -> CompletenessVerdict {
    let thr = tol * record_scale(d);
    if basis.ncols() == 0 || d.nrows() == 0 {
        return CompletenessVerdict {
            complete: true,
            witness: None,
            witness_response: None,
            lost_rank: 0,
            threshold: thr,
        };
    }
    let restricted = d * basis;
    let svd = restricted.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values.as_slice();
    let lost_rank = s.iter().filter(|&&x| x > thr).count();
    if lost_rank == 0 {
        return CompletenessVerdict {
            complete: true,
            witness: None,
            witness_response: None,
            lost_rank,
            threshold: thr,
        };
    }
    let top = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
    let coeffs = v_t.row(top).transpose();
    let mut witness = basis * coeffs;
    witness.normalize_mut();
    spectral::canonical_sign(&mut witness);
    let response = d * &witness;
    CompletenessVerdict {
        complete: false,
        witness: Some(witness),
        witness_response: Some(response),
        lost_rank,
        threshold: thr,
    }
}

/// Kernel-sweep completeness test. The threshold on `||D c||` is `tol`
/// times `max(1, ||D||_2)`.
pub fn completeness_test(net: &ChannelNetwork, d: &RecordMap, tol: f64) -> Result<CompletenessVerdict> {
    check_columns(net, d)?;
    let basis = generator_preserving_basis(net, tol);
    Ok(verdict_on(&d.d, &basis.vectors, tol))
}

/// Independent row-space form of the same test: every row of `D` must be
/// reproduced by its least-squares projection onto the row space of `P`.
/// Returns the largest row residual norm and whether it is within threshold.
pub fn row_space_test(net: &ChannelNetwork, d: &RecordMap, tol: f64) -> Result<(bool, f64)> {
    check_columns(net, d)?;
    let p = net.projection().p;
    // P has full row rank, so P P^T is symmetric positive definite.
    let gram = &p * p.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("P P^T".into()))?;
    let mut worst = 0.0f64;
    for row in d.d.row_iter() {
        let x = row.transpose();
        let coeff = chol.solve(&(&p * &x));
        let residual = &x - p.transpose() * coeff;
        worst = worst.max(residual.norm());
    }
    let thr = tol * record_scale(&d.d);
    Ok((worst <= thr, worst))
}

/// Basis of `ker P ∩ ker D_meas`.
pub fn remaining_kernel(net: &ChannelNetwork, measured: &RecordMap, tol: f64) -> Result<KernelBasis> {
    check_columns(net, measured)?;
    let p = net.projection().p;
    let rows = p.nrows() + measured.d.nrows();
    let stacked = DMatrix::from_fn(rows, p.ncols(), |i, j| {
        if i < p.nrows() {
            p[(i, j)]
        } else {
            measured.d[(i - p.nrows(), j)]
        }
    });
    Ok(spectral::kernel_basis(&stacked, tol))
}

/// Whether `D_tar` is determined once the generator and `D_meas` are known.
pub fn predictability_test(
    net: &ChannelNetwork,
    measured: &RecordMap,
    target: &RecordMap,
    tol: f64,
) -> Result<CompletenessVerdict> {
    check_columns(net, target)?;
    let rem = remaining_kernel(net, measured, tol)?;
    Ok(verdict_on(&target.d, &rem.vectors, tol))
}

/// Dimension of `ker(B P)`, the hidden space if only instantaneous state
/// velocities were known. Informational.
pub fn velocity_kernel_dim(net: &ChannelNetwork, tol: f64) -> usize {
    let pp = net.projection();
    spectral::kernel_basis(&(&pp.b * &pp.p), tol).dim()
}

/// Quotient form with `R^-1` either supplied (positive diagonal, one entry
/// per channel) or taken as the stationary channel traffic `w_e p_from(e)`.
pub fn quotient_form(net: &ChannelNetwork, r_inv_diag: Option<&[f64]>) -> Result<QuotientForm> {
    let (diag, source) = match r_inv_diag {
        Some(v) => {
            if v.len() != net.n_channels() {
                return Err(Error::DimensionMismatch {
                    what: "inverse covariance diagonal",
                    expected: net.n_channels(),
                    found: v.len(),
                });
            }
            if let Some(k) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "inverse covariance entry {k} is not positive ({})",
                    v[k]
                )));
            }
            (v.to_vec(), InverseCovarianceSource::UserSupplied)
        }
        None => {
            let data = StationaryData::new(net)?;
            let j = net.channel_currents(&data.stationary.p);
            (j.iter().copied().collect(), InverseCovarianceSource::StationaryTraffic)
        }
    };
    let p = net.projection().p;
    let weighted = DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] * diag[j]);
    let m = weighted * p.transpose();
    let q = spectral::pseudo_inverse(&m, spectral::DEFAULT_TOL);
    let q = (&q + q.transpose()) * 0.5;
    Ok(QuotientForm { q, source })
}

/// `sum_e d_e^mu c_e p_from(e)`: first-order change of record `mu` under the
/// channel-rate perturbation `c` at occupation `p`.
pub fn first_order_record_change(
    net: &ChannelNetwork,
    c: &[f64],
    p: &[f64],
    mu: &str,
) -> Result<f64> {
    let k = net.record_index(mu)?;
    if c.len() != net.n_channels() {
        return Err(Error::DimensionMismatch {
            what: "channel vector",
            expected: net.n_channels(),
            found: c.len(),
        });
    }
    if p.len() != net.n_states() {
        return Err(Error::DimensionMismatch {
            what: "probability vector",
            expected: net.n_states(),
            found: p.len(),
        });
    }
    Ok(net
        .channels()
        .iter()
        .zip(c)
        .map(|(ch, &ce)| ch.increments[k] * ce * p[ch.from])
        .sum())
}

/// Largest `eps >= 0` keeping `rates + eps * c` nonnegative (infinite if `c`
/// has no negative entry).
pub fn max_preserving_step(net: &ChannelNetwork, c: &[f64]) -> f64 {
    net.channels()
        .iter()
        .zip(c)
        .filter(|(_, &ce)| ce < 0.0)
        .map(|(ch, &ce)| ch.rate / -ce)
        .fold(f64::INFINITY, f64::min)
}

/// Step used for behavioral twin checks: half the admissible step, capped.
pub fn twin_step(net: &ChannelNetwork, c: &[f64]) -> f64 {
    (0.5 * max_preserving_step(net, c)).min(1e-3)
}

/// Applies `rates + eps * c` for `c` in `ker P` and then repairs rounding so
/// that every transition total, summed in channel order, is bitwise equal to
/// the original. The repair moves single channel rates by a few ulps.
pub fn apply_preserving_shift(net: &ChannelNetwork, c: &[f64], eps: f64) -> Result<ChannelNetwork> {
    if c.len() != net.n_channels() {
        return Err(Error::DimensionMismatch {
            what: "channel vector",
            expected: net.n_channels(),
            found: c.len(),
        });
    }
    let pp = net.projection();
    let groups = pp.channels_by_transition();
    let old = net.rates();
    for (t, g) in groups.iter().enumerate() {
        let s: f64 = g.iter().map(|&e| c[e]).sum();
        let scale: f64 = g.iter().map(|&e| c[e].abs()).sum::<f64>().max(1.0);
        if s.abs() > 1e-9 * scale {
            return Err(Error::InvalidArgument(format!(
                "perturbation changes the total of transition {t} by {s:e}"
            )));
        }
    }
    let mut rates: Vec<f64> = old.iter().zip(c).map(|(w, ce)| w + eps * ce).collect();
    for (e, r) in rates.iter_mut().enumerate() {
        if *r < 0.0 {
            if *r > -1e-12 * old[e].max(1.0) {
                *r = 0.0;
            } else {
                return Err(Error::InvalidArgument(format!(
                    "step {eps} drives channel {e} rate negative"
                )));
            }
        }
    }
    for g in &groups {
        repair_total(g, &old, &mut rates)?;
    }
    net.with_rates(&rates)
}

fn ordered_sum(group: &[usize], rates: &[f64]) -> f64 {
    // Same accumulation as the generator: 0.0 then channels in order.
    group.iter().fold(0.0, |acc, &e| acc + rates[e])
}

fn repair_total(group: &[usize], old: &[f64], rates: &mut [f64]) -> Result<()> {
    let target = ordered_sum(group, old);
    if ordered_sum(group, rates) == target {
        return Ok(());
    }
    let mut by_size: Vec<usize> = group.to_vec();
    by_size.sort_by(|&a, &b| rates[b].total_cmp(&rates[a]));
    for &e in &by_size {
        let mut last_dir = 0i8;
        for _ in 0..1 << 16 {
            let now = ordered_sum(group, rates);
            if now == target {
                return Ok(());
            }
            let dir: i8 = if now < target { 1 } else { -1 };
            if last_dir != 0 && dir != last_dir {
                break;
            }
            last_dir = dir;
            let next = if dir > 0 {
                rates[e].next_up()
            } else {
                rates[e].next_down()
            };
            if next < 0.0 {
                break;
            }
            rates[e] = next;
        }
    }
    if ordered_sum(group, rates) == target {
        Ok(())
    } else {
        Err(Error::Singular("could not restore transition total bitwise".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::TransitionChannel;

    fn parallel(rates: &[f64]) -> ChannelNetwork {
        let mut chans: Vec<_> = rates
            .iter()
            .enumerate()
            .map(|(k, &r)| TransitionChannel::new(0, 1, format!("r{k}"), r, vec![k as f64]))
            .collect();
        chans.push(TransitionChannel::new(1, 0, "r0", 1.0, vec![0.0]));
        ChannelNetwork::new(vec!["a".into(), "b".into()], vec!["x".into()], chans).unwrap()
    }

    #[test]
    fn single_channel_per_transition_is_complete() {
        let net = parallel(&[1.0]);
        assert_eq!(generator_preserving_basis(&net, 1e-10).dim(), 0);
        let d = net.record_map(&["x"]).unwrap();
        let v = completeness_test(&net, &d, 1e-10).unwrap();
        assert!(v.complete && v.witness.is_none() && v.lost_rank == 0);
    }

    #[test]
    fn row_of_p_is_complete() {
        let net = parallel(&[1.0, 2.0, 0.5]);
        let p = net.projection().p;
        let d = RecordMap {
            records: vec!["row".into()],
            d: p.rows(0, 1).into_owned(),
        };
        assert!(completeness_test(&net, &d, 1e-10).unwrap().complete);
        assert!(row_space_test(&net, &d, 1e-10).unwrap().0);
    }

    #[test]
    fn quotient_two_parallel_identity_covariance() {
        let net = ChannelNetwork::new(
            vec!["a".into(), "b".into()],
            vec![],
            vec![
                TransitionChannel::new(0, 1, "L", 1.0, vec![]),
                TransitionChannel::new(0, 1, "R", 1.0, vec![]),
            ],
        )
        .unwrap();
        let qf = quotient_form(&net, Some(&[1.0, 1.0])).unwrap();
        assert!((qf.q[(0, 0)] - 0.5).abs() < 1e-15);
        let u = DVector::from_element(1, 3.0);
        assert!((qf.cost(&u) - 9.0 / 4.0).abs() < 1e-14);
        assert!(quotient_form(&net, Some(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn zero_perturbation_changes_nothing() {
        let net = parallel(&[1.0, 2.0]);
        assert_eq!(first_order_record_change(&net, &[0.0; 3], &[0.5, 0.5], "x").unwrap(), 0.0);
        let same = apply_preserving_shift(&net, &[0.0; 3], 1.0).unwrap();
        assert_eq!(same, net);
    }

    #[test]
    fn shift_keeps_generator_bitwise() {
        let net = parallel(&[0.1, 0.7, 0.2]);
        let c = [1.0 / 3.0, -0.5, 1.0 / 6.0, 0.0];
        let moved = apply_preserving_shift(&net, &c, 0.1).unwrap();
        assert_eq!(moved.generator(), net.generator());
        assert_ne!(moved.rates(), net.rates());
        assert!(apply_preserving_shift(&net, &[1.0, 0.0, 0.0, 0.0], 0.1).is_err());
    }
}

//! Dense linear algebra: stationary states, the Drazin inverse of an ergodic
//! generator, Moore-Penrose pseudoinverses, numerical rank and null spaces.
//!
//! Rank decisions use a threshold relative to the largest singular value.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::StateGenerator;

/// Default relative singular-value threshold.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub p: Vec<f64>,
    pub ergodic: bool,
}

impl StationaryState {
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.p)
    }
}

/// Orthonormal basis of a right null space, stored as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBasis {
    pub vectors: DMatrix<f64>,
    pub tolerance: f64,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrazinInverse {
    pub r: DMatrix<f64>,
}

/// Singular values plus the full set of right singular vectors (columns of V).
struct FullSvd {
    singular: Vec<f64>,
    v: DMatrix<f64>,
}

fn full_right_svd(m: &DMatrix<f64>) -> FullSvd {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return FullSvd {
            singular: vec![],
            v: DMatrix::zeros(0, 0),
        };
    }
    if rows == 0 {
        return FullSvd {
            singular: vec![0.0; cols],
            v: DMatrix::identity(cols, cols),
        };
    }
    // A thin SVD of a wide matrix only yields `rows` right vectors; zero rows
    // complete V without changing the row space.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    FullSvd {
        singular: svd.singular_values.iter().copied().collect(),
        v: v_t.transpose(),
    }
}

fn threshold(singular: &[f64], tol: f64) -> f64 {
    let smax = singular.iter().fold(0.0f64, |a, &s| a.max(s));
    tol * smax
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values at or above `tol * sigma_max` (zero for the
/// zero matrix).
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    let thr = threshold(&s, tol);
    s.iter().filter(|&&v| v > 0.0 && v >= thr).count()
}

/// Orthonormal basis of the right null space of `m`.
///
/// Each basis vector has its first non-negligible component made positive so
/// that one-dimensional kernels are reported reproducibly.
pub fn kernel_basis(m: &DMatrix<f64>, tol: f64) -> KernelBasis {
    let svd = full_right_svd(m);
    let thr = threshold(&svd.singular, tol);
    let mut cols: Vec<DVector<f64>> = svd
        .singular
        .iter()
        .enumerate()
        .filter(|(_, &s)| !(s > 0.0 && s >= thr))
        .map(|(k, _)| svd.v.column(k).into_owned())
        .collect();
    for c in &mut cols {
        canonical_sign(c);
    }
    let n = m.ncols();
    let vectors = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    KernelBasis {
        vectors,
        tolerance: thr,
    }
}

/// Flips `v` so its first component above `1e-12 * max|v|` is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Moore-Penrose pseudoinverse; singular values below `tol * sigma_max` are
/// treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = svd.singular_values.as_slice();
    let thr = threshold(s, tol);
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &sk) in s.iter().enumerate() {
        if sk > 0.0 && sk >= thr {
            out += v_t.row(k).transpose() * u.column(k).transpose() / sk;
        }
    }
    out
}

/// Unique normalized null vector of an ergodic generator.
///
/// The null-space dimension is measured by SVD at [`DEFAULT_TOL`]; the vector
/// itself comes from the linear system with one balance equation replaced by
/// normalization.
pub fn stationary_state(l: &StateGenerator) -> Result<StationaryState> {
    stationary_state_with_tol(l, DEFAULT_TOL)
}

pub fn stationary_state_with_tol(l: &StateGenerator, tol: f64) -> Result<StationaryState> {
    let m = l.matrix();
    let n = m.nrows();
    let null_dim = kernel_basis(m, tol).dim();
    if null_dim != 1 {
        return Err(Error::NonErgodic { null_dim });
    }
    let mut a = m.clone();
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("stationary balance system".into()))?;
    let mut p: Vec<f64> = sol.iter().map(|&x| if x < 0.0 { 0.0 } else { x }).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    Ok(StationaryState { p, ergodic: true })
}

/// Drazin (group) inverse of an ergodic generator from the bordered system
/// `[[L, p], [1^T, 0]] [R; y] = [I - p 1^T; 0]`.
pub fn drazin_inverse(l: &StateGenerator, ss: &StationaryState) -> Result<DrazinInverse> {
    if !ss.ergodic {
        return Err(Error::NonErgodic { null_dim: 0 });
    }
    let m = l.matrix();
    let n = m.nrows();
    if ss.p.len() != n {
        return Err(Error::DimensionMismatch {
            what: "stationary state",
            expected: n,
            found: ss.p.len(),
        });
    }
    let mut bordered = DMatrix::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(m);
    for i in 0..n {
        bordered[(i, n)] = ss.p[i];
        bordered[(n, i)] = 1.0;
    }
    let mut rhs = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            rhs[(i, j)] = if i == j { 1.0 } else { 0.0 } - ss.p[i];
        }
    }
    let lu = bordered.lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("bordered Drazin system".into()));
    }
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("bordered Drazin system".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("bordered Drazin system".into()));
    }
    Ok(DrazinInverse {
        r: sol.view((0, 0), (n, n)).into_owned(),
    })
}

/// Largest eigenvalue real part of a square matrix, with its imaginary part.
pub(crate) fn dominant_eigenvalue(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    eig.iter()
        .map(|z| (z.re, z.im))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::Eigen("empty matrix".into()))
}

/// All eigenvalues as (re, im) pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

//! Matrix primitives, sample moments, and reference-distribution functions
//! shared by every test statistic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on covariance inputs.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// An n x p matrix of observations, rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
}

impl Dataset {
    /// Wrap an observation matrix. Requires n >= 2 and finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::DegenerateInput("zero-dimensional observations".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite entry in data matrix".into()));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut m = DMatrix::zeros(n, p);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Self::new(m)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Dimension of each observation.
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Column means.
    pub fn mean_vector(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.values.column_iter().map(|c| c.sum() / n))
    }

    /// Deviations from the column means (same shape as the data).
    pub fn centered(&self) -> DMatrix<f64> {
        let mean = self.mean_vector();
        let mut out = self.values.clone();
        for j in 0..self.p() {
            let mj = mean[j];
            for i in 0..self.n() {
                out[(i, j)] -= mj;
            }
        }
        out
    }
}

/// Symmetric p x p covariance matrix.
///
/// Construction checks symmetry to `SYMMETRY_RTOL` (relative to the largest
/// absolute entry), rejects negative diagonals, and then symmetrizes exactly
/// as (S + S')/2 so downstream code can rely on bitwise symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    values: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected square matrix, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut max_asym = 0.0f64;
        for i in 0..values.nrows() {
            for j in (i + 1)..values.ncols() {
                max_asym = max_asym.max((values[(i, j)] - values[(j, i)]).abs());
            }
        }
        if max_asym > SYMMETRY_RTOL * scale {
            return Err(Error::InvalidMatrix(format!(
                "asymmetry {max_asym:.3e} exceeds tolerance {:.3e}",
                SYMMETRY_RTOL * scale
            )));
        }
        if (0..values.nrows()).any(|i| values[(i, i)] < 0.0) {
            return Err(Error::InvalidMatrix("negative diagonal entry".into()));
        }
        let mut sym = values.clone();
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                sym[(i, j)] = 0.5 * (values[(i, j)] + values[(j, i)]);
            }
        }
        Ok(Self { values: sym })
    }

    pub fn identity(p: usize) -> Self {
        Self { values: DMatrix::identity(p, p) }
    }

    pub fn from_diagonal(diag: &DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(diag))
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    /// Smallest eigenvalue; the PSD check used by tests and generators.
    pub fn min_eigenvalue(&self) -> f64 {
        eigenvalues_sym(self).last().copied().unwrap_or(f64::NAN)
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.p()).all(|i| (0..i).all(|j| self.values[(i, j)] == 0.0))
    }
}

/// Reference distribution attached to a test statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RefDistribution {
    ChiSquare { df: u64 },
    StandardNormal,
    Empirical { sample: Vec<f64> },
    None,
}

/// Sample covariance with divisor n (not n-1), centered at the sample mean.
pub fn sample_covariance(data: &Dataset) -> CovMatrix {
    let n = data.n() as f64;
    let centered = data.centered();
    let mut s = centered.transpose() * &centered;
    s /= n;
    // exact symmetrization; products accumulate tiny asymmetric roundoff
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    CovMatrix { values: s }
}

/// tr(S^k) for k in 1..=4 without forming S^k for k <= 2.
pub fn trace_power(s: &CovMatrix, k: u32) -> Result<f64> {
    let m = &s.values;
    match k {
        1 => Ok(m.trace()),
        // symmetry: tr S^2 equals the squared Frobenius norm
        2 => Ok(m.iter().map(|v| v * v).sum()),
        3 => {
            let m2 = m * m;
            Ok(m2.iter().zip(m.iter()).map(|(a, b)| a * b).sum())
        }
        4 => {
            let m2 = m * m;
            Ok(m2.iter().map(|v| v * v).sum())
        }
        _ => Err(Error::InvalidArgument(format!("trace_power supports k in 1..=4, got {k}"))),
    }
}

/// All eigenvalues of a symmetric matrix, descending.
pub fn eigenvalues_sym(s: &CovMatrix) -> Vec<f64> {
    let eig = s.values.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Upper-tail probability P[chi2_df > x].
pub fn chi2_sf(x: f64, df: u64) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("chi-square df must be >= 1".into()));
    }
    if x < 0.0 || !x.is_finite() {
        if x == f64::INFINITY {
            return Ok(0.0);
        }
        return Err(Error::InvalidArgument(format!("chi2_sf requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    // regularized upper incomplete gamma Q(df/2, x/2)
    Ok(statrs::function::gamma::gamma_ur(df as f64 / 2.0, x / 2.0))
}

/// Upper-tail probability P[Z > z] for a standard normal Z.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

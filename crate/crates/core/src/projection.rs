//! Random semi-orthogonal projection matrices and dataset projection.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Dataset;
use crate::rng::RngStream;

/// Condition-number ceiling on the Gram matrix of the raw Gaussian draw.
const GRAM_CONDITION_LIMIT: f64 = 1e12;
const MAX_ATTEMPTS: u64 = 5;

/// k x p matrix R with orthonormal rows (R R' = I_k).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    values: DMatrix<f64>,
}

impl ProjectionMatrix {
    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Largest absolute deviation of R R' from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let gram = &self.values * self.values.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.k() {
            for j in 0..self.k() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Draw a random k x p semi-orthogonal matrix.
///
/// A raw Gaussian matrix G is orthonormalized through the inverse square
/// root of its k x k Gram matrix, R = (G G')^{-1/2} G, so the only
/// decomposition is of a small k x k matrix and the row span is uniform
/// over the Grassmannian. Deterministic given the stream.
pub fn generate_projection(k: usize, p: usize, stream: RngStream) -> Result<ProjectionMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("projection dimension k must be >= 1".into()));
    }
    if k > p {
        return Err(Error::DimensionMismatch(format!(
            "projection dimension k={k} exceeds ambient dimension p={p}"
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let s = if attempt == 0 { stream } else { stream.remixed(attempt) };
        let mut rng = s.rng();
        let mut raw = Vec::with_capacity(k * p);
        for _ in 0..k * p {
            raw.push(StandardNormal.sample(&mut rng));
        }
        // row-major fill: row i of G is draw i*p .. (i+1)*p
        let g = DMatrix::from_row_slice(k, p, &raw);
        let gram: DMatrix<f64> = &g * g.transpose();
        let eig = gram.symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
        let min_ev = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
        if !(min_ev > 0.0 && max_ev / min_ev <= GRAM_CONDITION_LIMIT) {
            continue;
        }
        let mut inv_sqrt = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for c in 0..k {
                    acc += eig.eigenvectors[(a, c)] * eig.eigenvectors[(b, c)]
                        / eig.eigenvalues[c].sqrt();
                }
                inv_sqrt[(a, b)] = acc;
            }
        }
        let values = inv_sqrt * g;
        return Ok(ProjectionMatrix { values });
    }
    Err(Error::RankDeficient(format!(
        "failed to draw a well-conditioned {k}x{p} Gaussian matrix after {MAX_ATTEMPTS} attempts"
    )))
}

/// Apply R to every observation: row i of the output is R x_i.
pub fn project_dataset(r: &ProjectionMatrix, data: &Dataset) -> Result<Dataset> {
    if r.p() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "projection expects p={}, data has p={}",
            r.p(),
            data.p()
        )));
    }
    let projected = data.values() * r.values().transpose();
    Dataset::new(projected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_covariance;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed, 0).rng();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn square_case_is_orthogonal_with_unit_determinant() {
        let r = generate_projection(3, 3, RngStream::new(5, 0)).unwrap();
        assert!(r.orthogonality_defect() < 1e-8);
        let det = r.values().determinant();
        assert!((det.abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn wide_case_satisfies_row_orthonormality() {
        let r = generate_projection(5, 100, RngStream::new(9, 3)).unwrap();
        assert!(r.orthogonality_defect() < 1e-8);
    }

    #[test]
    fn fixed_stream_reproduces_bitwise() {
        let a = generate_projection(2, 10, RngStream::new(42, 1)).unwrap();
        let b = generate_projection(2, 10, RngStream::new(42, 1)).unwrap();
        assert_eq!(a.values(), b.values());
        let c = generate_projection(2, 10, RngStream::new(42, 2)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn rejects_k_larger_than_p() {
        assert!(matches!(
            generate_projection(4, 3, RngStream::new(1, 0)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(generate_projection(0, 3, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn block_identity_projection_selects_coordinates() {
        let data = gaussian_dataset(6, 8, 21);
        let mut m = DMatrix::zeros(4, 8);
        for i in 0..4 {
            m[(i, i)] = 1.0;
        }
        let r = ProjectionMatrix { values: m };
        let out = project_dataset(&r, &data).unwrap();
        for i in 0..6 {
            for j in 0..4 {
                assert_eq!(out.values()[(i, j)], data.values()[(i, j)]);
            }
        }
    }

    #[test]
    fn constant_dataset_stays_constant() {
        let data = Dataset::from_rows(&vec![vec![2.0, -1.0, 0.5, 3.0]; 4]).unwrap();
        let r = generate_projection(2, 4, RngStream::new(3, 0)).unwrap();
        let out = project_dataset(&r, &data).unwrap();
        for j in 0..2 {
            let v = out.values()[(0, j)];
            for i in 1..4 {
                assert!((out.values()[(i, j)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projected_covariance_is_congruence_of_covariance() {
        let data = gaussian_dataset(8, 6, 33);
        let r = generate_projection(3, 6, RngStream::new(33, 1)).unwrap();
        let out = project_dataset(&r, &data).unwrap();
        let s_out = sample_covariance(&out);
        let s_in = sample_covariance(&data);
        let oracle = r.values() * s_in.values() * r.values().transpose();
        let scale = oracle.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                assert!((s_out.values()[(i, j)] - oracle[(i, j)]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn projection_is_linear() {
        let x = gaussian_dataset(5, 6, 44);
        let y = gaussian_dataset(5, 6, 45);
        let (a, b) = (2.5, -1.25);
        let combo = Dataset::new(x.values() * a + y.values() * b).unwrap();
        let r = generate_projection(3, 6, RngStream::new(46, 0)).unwrap();
        let lhs = project_dataset(&r, &combo).unwrap();
        let rhs = project_dataset(&r, &x).unwrap().values() * a
            + project_dataset(&r, &y).unwrap().values() * b;
        let scale = rhs.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        let err = (lhs.values() - &rhs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-13 * scale, "linearity defect {err}");
    }

    #[test]
    fn projected_covariance_of_spherical_data_centers_on_scaled_identity() {
        // MC mean of the projected sample covariance over replicates, compared
        // entrywise against its exact expectation sigma^2 (n-1)/n I within 3 SE.
        let (n, p, k, sigma2) = (40usize, 30usize, 3usize, 2.25f64);
        let reps = 2000;
        let mut sums = DMatrix::zeros(k, k);
        let mut sumsq = DMatrix::zeros(k, k);
        for rep in 0..reps {
            let data = {
                let mut rng = RngStream::new(900, rep as u64).rng();
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| {
                        (0..p)
                            .map(|_| {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                sigma2.sqrt() * z
                            })
                            .collect()
                    })
                    .collect();
                Dataset::from_rows(&rows).unwrap()
            };
            let r = generate_projection(k, p, RngStream::new(901, rep as u64)).unwrap();
            let s = sample_covariance(&project_dataset(&r, &data).unwrap());
            sums += s.values();
            sumsq += s.values().map(|v| v * v);
        }
        let nf = reps as f64;
        let target = sigma2 * (n as f64 - 1.0) / n as f64;
        for i in 0..k {
            for j in 0..k {
                let mean = sums[(i, j)] / nf;
                let var = (sumsq[(i, j)] / nf - mean * mean).max(0.0);
                let se = (var / nf).sqrt();
                let expect = if i == j { target } else { 0.0 };
                assert!(
                    (mean - expect).abs() <= 3.0 * se + 1e-12,
                    "entry ({i},{j}): mean {mean} vs {expect} (se {se})"
                );
            }
        }
    }
}

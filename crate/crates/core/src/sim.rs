//! Scenario generators and the replication driver behind the size/power
//! studies: covariance models, Gaussian sampling, and grid execution with
//! per-cell rejection proportions and wall times.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{BaseTest, CrampConfig, Hypothesis};
use crate::error::{Error, Result};
use crate::highdim::{
    clx_two_sample, czz_one_sample, li_chen_two_sample, lw_identity, lw_identity_mc,
    schott_two_sample, syk_one_sample, syk_two_sample, ClxStrategy, McOptions, TwoSampleStrategy,
};
use crate::linalg::{CovMatrix, Dataset};
use crate::rng::{stream_index, RngStream, StreamFamily};

/// Covariance structure of a simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum CovModel {
    Identity,
    /// sigma^2 I.
    Sphere { sigma: f64 },
    /// sigma_ij = rho^|i-j| inside bandwidth B, zero outside.
    Band { rho: f64, bandwidth: usize },
    /// Diagonal: 1 up to index B, then 1 + epsilon.
    TailDiag { epsilon: f64, bandwidth: usize },
    /// Two-sample: Sigma_1 = I; Sigma_2 diagonal with the first
    /// floor(fraction * p) entries 1 and the rest Gamma(4, rate 2) draws.
    GammaDiag { fraction: f64 },
    /// Two-sample: Sigma_1 = diag(Unif(1,3)); Sigma_2 is the congruence of a
    /// band matrix (bandwidth floor(fraction * p)) by Sigma_1^{1/2}.
    BandCongruence { rho: f64, fraction: f64 },
}

/// Mean vector model; uniform entries are drawn on (-3, 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanModel {
    Zero,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioHypothesis {
    OneSample,
    TwoSample,
}

/// One simulation scenario: sizes, covariance and mean models, replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub hypothesis: ScenarioHypothesis,
    pub n: usize,
    #[serde(default)]
    pub m: Option<usize>,
    pub p: usize,
    pub cov_model: CovModel,
    pub mean_model: MeanModel,
    pub replicates: usize,
    pub seed: u64,
}

fn band_matrix(p: usize, rho: f64, bandwidth: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        let d = i.abs_diff(j);
        if d <= bandwidth {
            rho.powi(d as i32)
        } else {
            0.0
        }
    })
}

fn ensure_pd(values: &DMatrix<f64>, what: &str) -> Result<()> {
    if Cholesky::new(values.clone()).is_none() {
        return Err(Error::InvalidScenario(format!("{what} is not positive definite")));
    }
    Ok(())
}

/// Materialize the scenario covariance (pair for two-sample scenarios).
///
/// Band configurations are verified positive definite and rejected loudly
/// rather than projected; random diagonals draw from the given stream.
pub fn build_covariance(spec: &ScenarioSpec, stream: RngStream) -> Result<(CovMatrix, Option<CovMatrix>)> {
    if !(0.0..1.0).contains(&band_rho(spec.cov_model).unwrap_or(0.0)) {
        if let Some(rho) = band_rho(spec.cov_model) {
            return Err(Error::InvalidScenario(format!("band rho must lie in [0, 1), got {rho}")));
        }
    }
    let p = spec.p;
    let two = spec.hypothesis == ScenarioHypothesis::TwoSample;
    let single = |cov: CovMatrix| {
        let second = two.then(|| cov.clone());
        (cov, second)
    };
    match spec.cov_model {
        CovModel::Identity => Ok(single(CovMatrix::identity(p))),
        CovModel::Sphere { sigma } => {
            if sigma <= 0.0 {
                return Err(Error::InvalidScenario(format!("sphere sigma must be > 0, got {sigma}")));
            }
            Ok(single(CovMatrix::new(DMatrix::identity(p, p) * (sigma * sigma))?))
        }
        CovModel::Band { rho, bandwidth } => {
            let m = band_matrix(p, rho, bandwidth);
            if rho != 0.0 {
                ensure_pd(&m, &format!("band covariance (rho={rho}, bandwidth={bandwidth})"))?;
            }
            Ok(single(CovMatrix::new(m)?))
        }
        CovModel::TailDiag { epsilon, bandwidth } => {
            if 1.0 + epsilon <= 0.0 {
                return Err(Error::InvalidScenario(format!(
                    "tail-diag epsilon {epsilon} makes the diagonal non-positive"
                )));
            }
            let diag = DVector::from_fn(p, |i, _| if i < bandwidth { 1.0 } else { 1.0 + epsilon });
            Ok(single(CovMatrix::from_diagonal(&diag)?))
        }
        CovModel::GammaDiag { fraction } => {
            if !two {
                return Err(Error::InvalidScenario(
                    "gamma-diag is a two-sample covariance model".into(),
                ));
            }
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidScenario(format!(
                    "gamma-diag fraction must lie in [0, 1], got {fraction}"
                )));
            }
            let cut = (fraction * p as f64).floor() as usize;
            let gamma = Gamma::new(4.0, 0.5).expect("valid shape/scale");
            let mut rng = stream.rng();
            let diag = DVector::from_fn(p, |i, _| {
                if i < cut {
                    1.0
                } else {
                    gamma.sample(&mut rng)
                }
            });
            Ok((CovMatrix::identity(p), Some(CovMatrix::from_diagonal(&diag)?)))
        }
        CovModel::BandCongruence { rho, fraction } => {
            if !two {
                return Err(Error::InvalidScenario(
                    "band-congruence is a two-sample covariance model".into(),
                ));
            }
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidScenario(format!(
                    "band-congruence fraction must lie in [0, 1], got {fraction}"
                )));
            }
            let bandwidth = (fraction * p as f64).floor() as usize;
            let omega = band_matrix(p, rho, bandwidth);
            if rho != 0.0 {
                ensure_pd(&omega, &format!("band factor (rho={rho}, bandwidth={bandwidth})"))?;
            }
            let mut rng = stream.rng();
            let scales = DVector::from_fn(p, |_, _| rng.random_range(1.0..3.0));
            let sigma1 = CovMatrix::from_diagonal(&scales)?;
            let mut sigma2 = omega;
            for i in 0..p {
                for j in 0..p {
                    sigma2[(i, j)] *= (scales[i] * scales[j]).sqrt();
                }
            }
            Ok((sigma1, Some(CovMatrix::new(sigma2)?)))
        }
    }
}

fn band_rho(model: CovModel) -> Option<f64> {
    match model {
        CovModel::Band { rho, .. } | CovModel::BandCongruence { rho, .. } => Some(rho),
        _ => None,
    }
}

/// Draw n iid rows from N(mean, cov) through a factorization of cov.
pub fn sample_gaussian(mean: &DVector<f64>, cov: &CovMatrix, n: usize, stream: RngStream) -> Result<Dataset> {
    let p = cov.p();
    if mean.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {}, covariance dimension is {p}",
            mean.len()
        )));
    }
    let mut rng = stream.rng();
    let mut raw = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        raw.push(StandardNormal.sample(&mut rng));
    }
    let z = DMatrix::from_row_slice(n, p, &raw);
    let mut out = if cov.is_diagonal() {
        if (0..p).any(|i| cov.values()[(i, i)] <= 0.0) {
            return Err(Error::NotPositiveDefinite(
                "diagonal covariance has a non-positive entry".into(),
            ));
        }
        let sd = DVector::from_fn(p, |i, _| cov.values()[(i, i)].sqrt());
        let mut out = z;
        for j in 0..p {
            for i in 0..n {
                out[(i, j)] *= sd[j];
            }
        }
        out
    } else {
        let chol = Cholesky::new(cov.values().clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("covariance factorization failed".into())
        })?;
        z * chol.l().transpose()
    };
    for j in 0..p {
        for i in 0..n {
            out[(i, j)] += mean[j];
        }
    }
    Dataset::new(out)
}

/// Baseline tests runnable directly on the raw data inside a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RawMethod {
    LrtIdentity,
    LrtSphericity,
    John,
    Nagao,
    Lw,
    SykU,
    SykV,
    CzzU,
    CzzV,
    BoxM,
    Wald,
    Schott,
    Syk,
    Lc,
    Clx,
}

impl RawMethod {
    pub fn id(&self) -> &'static str {
        match self {
            RawMethod::LrtIdentity => "lrt-identity",
            RawMethod::LrtSphericity => "lrt-sphericity",
            RawMethod::John => "john",
            RawMethod::Nagao => "nagao",
            RawMethod::Lw => "lw",
            RawMethod::SykU => "syk-u",
            RawMethod::SykV => "syk-v",
            RawMethod::CzzU => "czz-u",
            RawMethod::CzzV => "czz-v",
            RawMethod::BoxM => "box-m",
            RawMethod::Wald => "wald",
            RawMethod::Schott => "schott",
            RawMethod::Syk => "syk",
            RawMethod::Lc => "lc",
            RawMethod::Clx => "clx",
        }
    }

    fn is_two_sample(&self) -> bool {
        matches!(
            self,
            RawMethod::BoxM
                | RawMethod::Wald
                | RawMethod::Schott
                | RawMethod::Syk
                | RawMethod::Lc
                | RawMethod::Clx
        )
    }
}

/// Method column of a study cell: a raw baseline or the projection
/// meta-procedure wrapped around a base test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodConfig {
    Raw {
        method: RawMethod,
        /// Monte-Carlo calibration replicates for the methods that support
        /// it (schott, syk, lc, clx, lw); absent means asymptotic/analytic.
        #[serde(default)]
        mc_replicates: Option<usize>,
    },
    Cramp {
        base: BaseTest,
        k: usize,
        projections: usize,
        null_replicates: usize,
    },
}

impl MethodConfig {
    pub fn id(&self) -> String {
        match self {
            MethodConfig::Raw { method, mc_replicates } => match mc_replicates {
                Some(_) => format!("{}-mc", method.id()),
                None => method.id().to_string(),
            },
            MethodConfig::Cramp { base, .. } => format!("cramp-{}", base.id()),
        }
    }
}

/// One grid cell: a scenario, a method, a nominal level, and a metric label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub scenario: ScenarioSpec,
    pub method: MethodConfig,
    pub alpha: f64,
    /// Label only ("size" or "power"); the harness reports proportions.
    pub metric: String,
}

/// One emitted result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub hypothesis: ScenarioHypothesis,
    pub n: usize,
    pub m: Option<usize>,
    pub p: usize,
    pub k: Option<usize>,
    pub projections: Option<usize>,
    pub method: String,
    pub metric: String,
    pub value: Option<f64>,
    pub replicates: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

fn scenario_data(spec: &ScenarioSpec, rep: u64) -> Result<(Dataset, Option<Dataset>)> {
    let cov_stream = RngStream::new(spec.seed, stream_index(StreamFamily::Scenario, rep, 0));
    let (cov1, cov2) = build_covariance(spec, cov_stream)?;
    let mean = |item: u64| -> DVector<f64> {
        match spec.mean_model {
            MeanModel::Zero => DVector::zeros(spec.p),
            MeanModel::Uniform => {
                let mut rng = RngStream::new(spec.seed, stream_index(StreamFamily::Scenario, rep, item))
                    .rng();
                DVector::from_fn(spec.p, |_, _| rng.random_range(-3.0..3.0))
            }
        }
    };
    let x = sample_gaussian(
        &mean(3),
        &cov1,
        spec.n,
        RngStream::new(spec.seed, stream_index(StreamFamily::Scenario, rep, 1)),
    )?;
    let y = match (spec.hypothesis, cov2) {
        (ScenarioHypothesis::TwoSample, Some(cov2)) => {
            let m = spec.m.ok_or_else(|| {
                Error::InvalidScenario("two-sample scenario needs a second sample size m".into())
            })?;
            Some(sample_gaussian(
                &mean(4),
                &cov2,
                m,
                RngStream::new(spec.seed, stream_index(StreamFamily::Scenario, rep, 2)),
            )?)
        }
        (ScenarioHypothesis::OneSample, _) => None,
        (ScenarioHypothesis::TwoSample, None) => unreachable!("two-sample build returns a pair"),
    };
    Ok((x, y))
}

fn raw_method_rejects(
    method: RawMethod,
    mc_replicates: Option<usize>,
    x: &Dataset,
    y: Option<&Dataset>,
    alpha: f64,
    rep: u64,
    seed: u64,
) -> Result<bool> {
    let mc = |replicates: usize| McOptions { replicates, seed: seed ^ rep.wrapping_mul(0x51ed_270b) };
    let two = |r: Option<usize>| match r {
        Some(b) => TwoSampleStrategy::MonteCarlo(mc(b)),
        None => TwoSampleStrategy::Asymptotic,
    };
    let p_value = match (method, y) {
        (RawMethod::LrtIdentity, None) => crate::classical::lrt_identity(x)?.p_value,
        (RawMethod::LrtSphericity, None) => crate::classical::lrt_sphericity(x)?.p_value,
        (RawMethod::John, None) => crate::classical::john_sphericity(x, true)?.p_value,
        (RawMethod::Nagao, None) => crate::classical::nagao_identity(x, true)?.p_value,
        (RawMethod::Lw, None) => match mc_replicates {
            Some(b) => lw_identity_mc(x, &mc(b))?.p_value,
            None => lw_identity(x)?.p_value,
        },
        (RawMethod::SykU, None) => syk_one_sample(x)?.0.p_value,
        (RawMethod::SykV, None) => syk_one_sample(x)?.1.p_value,
        (RawMethod::CzzU, None) => czz_one_sample(x)?.0.p_value,
        (RawMethod::CzzV, None) => czz_one_sample(x)?.1.p_value,
        (RawMethod::BoxM, Some(y)) => crate::classical::box_m(x, y)?.p_value,
        (RawMethod::Wald, Some(y)) => crate::classical::wald_two_sample(x, y)?.p_value,
        (RawMethod::Schott, Some(y)) => schott_two_sample(x, y, &two(mc_replicates))?.p_value,
        (RawMethod::Syk, Some(y)) => syk_two_sample(x, y, &two(mc_replicates))?.p_value,
        (RawMethod::Lc, Some(y)) => li_chen_two_sample(x, y, &two(mc_replicates))?.p_value,
        (RawMethod::Clx, Some(y)) => {
            let strategy = match mc_replicates {
                Some(b) => ClxStrategy::MonteCarlo(mc(b)),
                None => ClxStrategy::Analytic,
            };
            clx_two_sample(x, y, &strategy)?.p_value
        }
        (m, _) => {
            return Err(Error::InvalidConfig(format!(
                "method '{}' does not match the scenario hypothesis",
                m.id()
            )))
        }
    };
    Ok(p_value <= alpha)
}

/// Hypothesis the meta-procedure targets for a given base test.
pub fn hypothesis_for_base(base: BaseTest) -> Hypothesis {
    match base {
        BaseTest::BoxM | BaseTest::Wald => Hypothesis::TwoSample,
        BaseTest::LrtSphericity | BaseTest::John => Hypothesis::OneSampleSphericity,
        _ => Hypothesis::OneSampleIdentity,
    }
}

fn run_cell(cell: &StudyCell, cache_dir: Option<&std::path::Path>) -> Result<f64> {
    let spec = &cell.scenario;
    if spec.replicates == 0 {
        return Err(Error::InvalidConfig("cell has zero replicates".into()));
    }
    if let MethodConfig::Raw { method, .. } = &cell.method {
        let two = spec.hypothesis == ScenarioHypothesis::TwoSample;
        if method.is_two_sample() != two {
            return Err(Error::InvalidConfig(format!(
                "method '{}' does not match the scenario hypothesis",
                method.id()
            )));
        }
    }
    let rejections: usize = match &cell.method {
        MethodConfig::Raw { method, mc_replicates } => (0..spec.replicates as u64)
            .into_par_iter()
            .map(|rep| -> Result<bool> {
                let (x, y) = scenario_data(spec, rep)?;
                raw_method_rejects(*method, *mc_replicates, &x, y.as_ref(), cell.alpha, rep, spec.seed)
            })
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&r| r)
            .count(),
        MethodConfig::Cramp { base, k, projections, null_replicates } => {
            let mut cfg = CrampConfig::new(
                *k,
                *projections,
                *null_replicates,
                cell.alpha,
                spec.seed,
                *base,
                hypothesis_for_base(*base),
            );
            // one critical value per cell, amortized across replicates
            let m = (spec.hypothesis == ScenarioHypothesis::TwoSample)
                .then(|| spec.m.unwrap_or(spec.n));
            let (q, _) = crate::engine::empirical_critical_value(spec.n, m, spec.p, &cfg, cache_dir)?;
            cfg.run_index = 0;
            let cfg = &cfg;
            (0..spec.replicates as u64)
                .into_par_iter()
                .map(|rep| -> Result<bool> {
                    let (x, y) = scenario_data(spec, rep)?;
                    let mut c = cfg.clone();
                    c.run_index = rep;
                    let pvals = crate::engine::projected_pvalues(&x, y.as_ref(), &c)?;
                    Ok(crate::engine::mean_pvalue(&pvals) <= q)
                })
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&r| r)
                .count()
        }
    };
    Ok(rejections as f64 / spec.replicates as f64)
}

/// Execute every cell, emitting one row per cell. Per-cell failures are
/// recorded in the row and never abort the grid.
pub fn run_study(cells: &[StudyCell], cache_dir: Option<&std::path::Path>) -> Vec<StudyRow> {
    run_study_with(cells, cache_dir, |_| {})
}

/// `run_study` with a per-row callback for incremental emission.
pub fn run_study_with(
    cells: &[StudyCell],
    cache_dir: Option<&std::path::Path>,
    mut on_row: impl FnMut(&StudyRow),
) -> Vec<StudyRow> {
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let started = Instant::now();
        let outcome = run_cell(cell, cache_dir);
        let (k, projections) = match &cell.method {
            MethodConfig::Cramp { k, projections, .. } => (Some(*k), Some(*projections)),
            MethodConfig::Raw { .. } => (None, None),
        };
        let row = StudyRow {
            hypothesis: cell.scenario.hypothesis,
            n: cell.scenario.n,
            m: cell.scenario.m,
            p: cell.scenario.p,
            k,
            projections,
            method: cell.method.id(),
            metric: cell.metric.clone(),
            value: outcome.as_ref().ok().copied(),
            replicates: cell.scenario.replicates,
            wall_time_s: started.elapsed().as_secs_f64(),
            error: outcome.err().map(|e| e.to_string()),
        };
        on_row(&row);
        rows.push(row);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_sample_spec(cov: CovModel, n: usize, p: usize, reps: usize, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            hypothesis: ScenarioHypothesis::OneSample,
            n,
            m: None,
            p,
            cov_model: cov,
            mean_model: MeanModel::Zero,
            replicates: reps,
            seed,
        }
    }

    #[test]
    fn band_with_zero_rho_is_identity() {
        let spec = one_sample_spec(CovModel::Band { rho: 0.0, bandwidth: 7 }, 10, 6, 1, 1);
        let (cov, _) = build_covariance(&spec, RngStream::new(1, 0)).unwrap();
        assert_eq!(cov.values(), CovMatrix::identity(6).values());
    }

    #[test]
    fn tail_diag_with_zero_epsilon_is_identity() {
        let spec = one_sample_spec(CovModel::TailDiag { epsilon: 0.0, bandwidth: 3 }, 10, 6, 1, 1);
        let (cov, _) = build_covariance(&spec, RngStream::new(1, 0)).unwrap();
        assert_eq!(cov.values(), CovMatrix::identity(6).values());
    }

    #[test]
    fn band_entries_follow_the_formula() {
        let spec = one_sample_spec(CovModel::Band { rho: 0.5, bandwidth: 2 }, 10, 5, 1, 1);
        let (cov, _) = build_covariance(&spec, RngStream::new(1, 0)).unwrap();
        assert_eq!(cov.values()[(0, 2)], 0.25);
        assert_eq!(cov.values()[(0, 3)], 0.0);
        assert_eq!(cov.values()[(1, 1)], 1.0);
    }

    #[test]
    fn indefinite_band_is_rejected_by_name() {
        let spec = one_sample_spec(CovModel::Band { rho: 0.9, bandwidth: 10 }, 10, 100, 1, 1);
        match build_covariance(&spec, RngStream::new(1, 0)) {
            Err(Error::InvalidScenario(msg)) => {
                assert!(msg.contains("0.9") && msg.contains("10"), "{msg}");
            }
            other => panic!("expected invalid-scenario, got {other:?}"),
        }
    }

    #[test]
    fn generated_covariances_satisfy_invariants() {
        let stream = RngStream::new(5, 0);
        let two = ScenarioSpec {
            hypothesis: ScenarioHypothesis::TwoSample,
            n: 10,
            m: Some(10),
            p: 40,
            cov_model: CovModel::GammaDiag { fraction: 0.25 },
            mean_model: MeanModel::Zero,
            replicates: 1,
            seed: 5,
        };
        let (c1, c2) = build_covariance(&two, stream).unwrap();
        let c2 = c2.unwrap();
        assert_eq!(c1.values(), CovMatrix::identity(40).values());
        for i in 0..10 {
            assert_eq!(c2.values()[(i, i)], 1.0);
        }
        assert!(c2.min_eigenvalue() > 0.0);

        let bc = ScenarioSpec {
            cov_model: CovModel::BandCongruence { rho: 0.5, fraction: 0.1 },
            ..two
        };
        let (c1, c2) = build_covariance(&bc, stream).unwrap();
        let c2 = c2.unwrap();
        assert!(c1.is_diagonal());
        assert!((0..40).all(|i| (1.0..3.0).contains(&c1.values()[(i, i)])));
        assert!(c2.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn gamma_diag_requires_two_sample() {
        let spec = one_sample_spec(CovModel::GammaDiag { fraction: 0.5 }, 10, 6, 1, 1);
        assert!(matches!(
            build_covariance(&spec, RngStream::new(1, 0)),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn sample_gaussian_matches_covariance_in_the_large_sample_limit() {
        let p = 3;
        let cov = CovMatrix::new(DMatrix::from_row_slice(
            p,
            p,
            &[2.0, 0.6, 0.0, 0.6, 1.0, -0.3, 0.0, -0.3, 1.5],
        ))
        .unwrap();
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let d = sample_gaussian(&mean, &cov, 5000, RngStream::new(31, 0)).unwrap();
        let s = crate::linalg::sample_covariance(&d);
        for i in 0..p {
            for j in 0..p {
                assert!(
                    (s.values()[(i, j)] - cov.values()[(i, j)]).abs() < 0.15,
                    "entry ({i},{j})"
                );
            }
        }
        let mu = d.mean_vector();
        for i in 0..p {
            assert!((mu[i] - mean[i]).abs() < 0.1);
        }
    }

    #[test]
    fn sample_gaussian_rejects_rank_deficient_covariance() {
        let cov = CovMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 2.0])).unwrap();
        let mean = DVector::zeros(3);
        assert!(matches!(
            sample_gaussian(&mean, &cov, 10, RngStream::new(1, 0)),
            Err(Error::NotPositiveDefinite(_))
        ));
        let mut low_rank = DMatrix::zeros(3, 3);
        low_rank[(0, 0)] = 1.0;
        low_rank[(0, 1)] = 1.0;
        low_rank[(1, 0)] = 1.0;
        low_rank[(1, 1)] = 1.0;
        low_rank[(2, 2)] = 1.0;
        let cov = CovMatrix::new(low_rank).unwrap();
        assert!(sample_gaussian(&mean, &cov, 10, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn sample_gaussian_deterministic_rerun() {
        let cov = CovMatrix::identity(4);
        let mean = DVector::zeros(4);
        let a = sample_gaussian(&mean, &cov, 8, RngStream::new(77, 3)).unwrap();
        let b = sample_gaussian(&mean, &cov, 8, RngStream::new(77, 3)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn run_study_records_errors_without_aborting() {
        let bad = StudyCell {
            scenario: one_sample_spec(CovModel::Identity, 10, 6, 0, 3),
            method: MethodConfig::Raw { method: RawMethod::Nagao, mc_replicates: None },
            alpha: 0.05,
            metric: "size".into(),
        };
        let mismatched = StudyCell {
            scenario: one_sample_spec(CovModel::Identity, 10, 6, 5, 3),
            method: MethodConfig::Raw { method: RawMethod::Clx, mc_replicates: None },
            alpha: 0.05,
            metric: "size".into(),
        };
        let good = StudyCell {
            scenario: one_sample_spec(CovModel::Identity, 30, 4, 20, 3),
            method: MethodConfig::Raw { method: RawMethod::LrtIdentity, mc_replicates: None },
            alpha: 0.05,
            metric: "size".into(),
        };
        let rows = run_study(&[bad, mismatched, good], None);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].error.is_some() && rows[0].value.is_none());
        assert!(rows[1].error.is_some());
        assert!(rows[2].error.is_none());
        let v = rows[2].value.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn run_study_reproducible_for_fixed_seed() {
        let cell = StudyCell {
            scenario: ScenarioSpec {
                hypothesis: ScenarioHypothesis::TwoSample,
                n: 15,
                m: Some(15),
                p: 30,
                cov_model: CovModel::Identity,
                mean_model: MeanModel::Uniform,
                replicates: 10,
                seed: 99,
            },
            method: MethodConfig::Cramp {
                base: BaseTest::BoxM,
                k: 3,
                projections: 10,
                null_replicates: 100,
            },
            alpha: 0.05,
            metric: "size".into(),
        };
        let a = run_study(std::slice::from_ref(&cell), None);
        let b = run_study(std::slice::from_ref(&cell), None);
        assert_eq!(a[0].value, b[0].value);
        assert!(a[0].k == Some(3) && a[0].projections == Some(10));
    }
}

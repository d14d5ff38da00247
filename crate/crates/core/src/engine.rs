//! The random-projection meta-procedure: project K times, run a classical
//! base test per projection, average the p-values, and compare the average
//! against an empirically simulated critical value.
//!
//! Seed architecture: the master seed splits into disjoint substream
//! families (observed-data projections, null datasets, null projections),
//! so the observed decision and the null simulation can never share draws.
//! Every parallel reduction collects into index order first; outcomes are
//! bitwise identical for any worker count.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{box_m, john_sphericity, lrt_identity, lrt_sphericity, nagao_identity, wald_two_sample};
use crate::error::{Error, Result};
use crate::highdim::lw_identity;
use crate::linalg::Dataset;
use crate::projection::{generate_projection, project_dataset};
use crate::rng::{stream_index, RngStream, StreamFamily};

/// Hypothesis family a configuration targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    OneSampleIdentity,
    OneSampleSphericity,
    TwoSample,
}

/// Classical test applied to each projected dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseTest {
    LrtIdentity,
    LrtSphericity,
    John,
    Nagao,
    Lw,
    BoxM,
    Wald,
}

impl BaseTest {
    pub fn id(&self) -> &'static str {
        match self {
            BaseTest::LrtIdentity => "lrt-identity",
            BaseTest::LrtSphericity => "lrt-sphericity",
            BaseTest::John => "john",
            BaseTest::Nagao => "nagao",
            BaseTest::Lw => "lw",
            BaseTest::BoxM => "box-m",
            BaseTest::Wald => "wald",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Ok(match id {
            "lrt-identity" => BaseTest::LrtIdentity,
            "lrt-sphericity" => BaseTest::LrtSphericity,
            "john" => BaseTest::John,
            "nagao" => BaseTest::Nagao,
            "lw" => BaseTest::Lw,
            "box-m" => BaseTest::BoxM,
            "wald" => BaseTest::Wald,
            other => return Err(Error::InvalidConfig(format!("unknown base test '{other}'"))),
        })
    }

    fn is_two_sample(&self) -> bool {
        matches!(self, BaseTest::BoxM | BaseTest::Wald)
    }

    /// Determinant-based statistics need a nonsingular projected covariance.
    fn needs_nonsingular(&self) -> bool {
        matches!(
            self,
            BaseTest::LrtIdentity | BaseTest::LrtSphericity | BaseTest::BoxM | BaseTest::Wald
        )
    }
}

/// How the empirical-null simulation pairs datasets with projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullDataMode {
    /// One synthetic dataset per null replicate, K projections of it. This
    /// mirrors the statistic computed on real data and is the default.
    PerReplicate,
    /// A fresh synthetic dataset for every projection, kept for comparison.
    PerProjection,
}

/// Full configuration of one meta-procedure run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrampConfig {
    /// Projected dimension k.
    pub k: usize,
    /// Number of projections averaged per test.
    pub projections: usize,
    /// Null replicates behind the empirical critical value.
    pub null_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub base_test: BaseTest,
    pub hypothesis: Hypothesis,
    /// Substream slot for the observed-data projections; harnesses vary this
    /// per replicate so repeated runs draw fresh projections while sharing
    /// one cached null distribution.
    #[serde(default)]
    pub run_index: u64,
    #[serde(default = "default_null_mode")]
    pub null_data_mode: NullDataMode,
    /// Attach the simulated null sample to the outcome.
    #[serde(default)]
    pub keep_null_sample: bool,
}

fn default_null_mode() -> NullDataMode {
    NullDataMode::PerReplicate
}

impl CrampConfig {
    pub fn new(
        k: usize,
        projections: usize,
        null_replicates: usize,
        alpha: f64,
        seed: u64,
        base_test: BaseTest,
        hypothesis: Hypothesis,
    ) -> Self {
        Self {
            k,
            projections,
            null_replicates,
            alpha,
            seed,
            base_test,
            hypothesis,
            run_index: 0,
            null_data_mode: NullDataMode::PerReplicate,
            keep_null_sample: false,
        }
    }

    fn validate(&self, n: usize, m: Option<usize>, p: usize) -> Result<()> {
        if self.projections == 0 {
            return Err(Error::InvalidConfig("need at least one projection".into()));
        }
        if self.null_replicates < 100 {
            return Err(Error::InvalidConfig(format!(
                "null replicate count {} is too small for a stable quantile (need >= 100)",
                self.null_replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        match (self.hypothesis, self.base_test.is_two_sample(), m.is_some()) {
            (Hypothesis::TwoSample, true, true) => {}
            (Hypothesis::TwoSample, _, _) => {
                return Err(Error::InvalidConfig(
                    "two-sample hypothesis needs a two-sample base test and a second dataset".into(),
                ))
            }
            (_, false, false) => {}
            (_, true, _) => {
                return Err(Error::InvalidConfig(format!(
                    "base test '{}' requires the two-sample hypothesis",
                    self.base_test.id()
                )))
            }
            (_, _, true) => {
                return Err(Error::InvalidConfig(
                    "one-sample hypothesis cannot take a second dataset".into(),
                ))
            }
        }
        if self.hypothesis == Hypothesis::OneSampleSphericity
            && !matches!(self.base_test, BaseTest::LrtSphericity | BaseTest::John)
        {
            return Err(Error::InvalidConfig(format!(
                "sphericity null requires a scale-invariant base test, not '{}'",
                self.base_test.id()
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("projection dimension k must be >= 1".into()));
        }
        if self.k >= p {
            return Err(Error::InvalidConfig(format!(
                "projection dimension k={} must be < data dimension p={p}",
                self.k
            )));
        }
        let n_min = m.map_or(n, |m| n.min(m));
        if self.k >= n_min {
            return Err(Error::InvalidConfig(format!(
                "projection dimension k={} must be < sample size {n_min}",
                self.k
            )));
        }
        if self.base_test.needs_nonsingular() && self.k + 2 > n_min {
            return Err(Error::InvalidConfig(format!(
                "base test '{}' needs k <= min sample size - 2 (k={}, min n={n_min})",
                self.base_test.id(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Result of one meta-procedure run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrampOutcome {
    pub mean_p: f64,
    pub per_projection_p: Vec<f64>,
    pub critical_value: f64,
    pub reject: bool,
    pub null_sample: Option<Vec<f64>>,
}

fn base_pvalue(base: BaseTest, x: &Dataset, y: Option<&Dataset>) -> Result<f64> {
    Ok(match base {
        BaseTest::LrtIdentity => lrt_identity(x)?.p_value,
        BaseTest::LrtSphericity => lrt_sphericity(x)?.p_value,
        BaseTest::John => john_sphericity(x, true)?.p_value,
        BaseTest::Nagao => nagao_identity(x, true)?.p_value,
        BaseTest::Lw => lw_identity(x)?.p_value,
        BaseTest::BoxM => box_m(x, y.expect("two-sample base"))?.p_value,
        BaseTest::Wald => wald_two_sample(x, y.expect("two-sample base"))?.p_value,
    })
}

fn pvalues_for_projections<F>(cfg: &CrampConfig, p: usize, stream_for: F, x: &Dataset, y: Option<&Dataset>) -> Result<Vec<f64>>
where
    F: Fn(u64) -> RngStream + Sync,
{
    (0..cfg.projections as u64)
        .into_par_iter()
        .map(|i| {
            let r = generate_projection(cfg.k, p, stream_for(i))?;
            let px = project_dataset(&r, x)?;
            let py = y.map(|d| project_dataset(&r, d)).transpose()?;
            base_pvalue(cfg.base_test, &px, py.as_ref())
        })
        .collect()
}

/// Base-test p-values for K random projections of the observed data.
///
/// In the two-sample case the same projection matrix is applied to both
/// groups, so equality of the projected covariances is exactly the projected
/// null. Deterministic given the configuration.
pub fn projected_pvalues(x: &Dataset, y: Option<&Dataset>, cfg: &CrampConfig) -> Result<Vec<f64>> {
    cfg.validate(x.n(), y.map(Dataset::n), x.p())?;
    if let Some(y) = y {
        if y.p() != x.p() {
            return Err(Error::DimensionMismatch(format!(
                "groups have different dimensions: {} vs {}",
                x.p(),
                y.p()
            )));
        }
    }
    let seed = cfg.seed;
    let run = cfg.run_index;
    pvalues_for_projections(
        cfg,
        x.p(),
        |i| RngStream::new(seed, stream_index(StreamFamily::ObservedProjections, run, i)),
        x,
        y,
    )
}

/// Arithmetic mean in index order.
pub fn mean_pvalue(pvals: &[f64]) -> f64 {
    pvals.iter().sum::<f64>() / pvals.len() as f64
}

/// Lower empirical quantile by order statistic: the ceil(alpha * N)-th
/// smallest value. alpha = 1 returns the maximum.
fn lower_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let idx = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    sorted[idx - 1]
}

fn standard_normal_dataset(n: usize, p: usize, stream: RngStream) -> Dataset {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream.rng();
    let mut raw = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        raw.push(StandardNormal.sample(&mut rng));
    }
    Dataset::new(nalgebra::DMatrix::from_row_slice(n, p, &raw)).expect("n >= 2")
}

const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheKey {
    n: usize,
    m: Option<usize>,
    p: usize,
    k: usize,
    projections: usize,
    null_replicates: usize,
    alpha: f64,
    base: String,
    seed: u64,
    null_data_mode: NullDataMode,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    key: CacheKey,
    null_sample: Vec<f64>,
}

fn cache_key(n: usize, m: Option<usize>, p: usize, cfg: &CrampConfig) -> CacheKey {
    CacheKey {
        n,
        m,
        p,
        k: cfg.k,
        projections: cfg.projections,
        null_replicates: cfg.null_replicates,
        alpha: cfg.alpha,
        base: cfg.base_test.id().to_string(),
        seed: cfg.seed,
        null_data_mode: cfg.null_data_mode,
    }
}

fn cache_path(dir: &Path, key: &CacheKey) -> std::path::PathBuf {
    let mode = match key.null_data_mode {
        NullDataMode::PerReplicate => "rep",
        NullDataMode::PerProjection => "proj",
    };
    dir.join(format!(
        "null-n{}-m{}-p{}-k{}-K{}-N{}-a{:.6}-{}-s{}-{}.json",
        key.n,
        key.m.map_or_else(|| "x".to_string(), |m| m.to_string()),
        key.p,
        key.k,
        key.projections,
        key.null_replicates,
        key.alpha,
        key.base,
        key.seed,
        mode
    ))
}

fn cache_load(dir: &Path, key: &CacheKey) -> Option<Vec<f64>> {
    let bytes = fs::read(cache_path(dir, key)).ok()?;
    let parsed: CacheFile = serde_json::from_slice(&bytes).ok()?;
    if parsed.version != CACHE_VERSION || parsed.key != *key {
        return None;
    }
    if parsed.null_sample.len() != key.null_replicates {
        return None;
    }
    Some(parsed.null_sample)
}

fn cache_store(dir: &Path, key: &CacheKey, sample: &[f64]) {
    // cache is an optimization; failures are silent by design
    if fs::create_dir_all(dir).is_err() {
        return;
    }
    let file = CacheFile { version: CACHE_VERSION, key: key.clone(), null_sample: sample.to_vec() };
    let Ok(bytes) = serde_json::to_vec(&file) else { return };
    let path = cache_path(dir, key);
    let tmp = path.with_extension("json.tmp");
    if fs::write(&tmp, bytes).is_ok() {
        let _ = fs::rename(&tmp, &path);
    }
}

/// Simulate the null distribution of the mean p-value and return the
/// empirical alpha-quantile plus the simulated sample.
///
/// Null data are standard normal with identity covariance; the invariance
/// results for the spherical and two-sample nulls make that choice exhaustive.
/// Results are cached on disk when a cache directory is supplied; corrupt or
/// missing cache entries regenerate silently.
pub fn empirical_critical_value(
    n: usize,
    m: Option<usize>,
    p: usize,
    cfg: &CrampConfig,
    cache_dir: Option<&Path>,
) -> Result<(f64, Vec<f64>)> {
    cfg.validate(n, m, p)?;
    let key = cache_key(n, m, p, cfg);
    if let Some(dir) = cache_dir {
        if let Some(sample) = cache_load(dir, &key) {
            let mut sorted = sample.clone();
            sorted.sort_by(f64::total_cmp);
            return Ok((lower_quantile(&sorted, cfg.alpha), sample));
        }
    }
    let seed = cfg.seed;
    let sample: Vec<f64> = (0..cfg.null_replicates as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let pvals = match cfg.null_data_mode {
                NullDataMode::PerReplicate => {
                    let x = standard_normal_dataset(
                        n,
                        p,
                        RngStream::new(seed, stream_index(StreamFamily::NullData, rep, 0)),
                    );
                    let y = m.map(|m| {
                        standard_normal_dataset(
                            m,
                            p,
                            RngStream::new(seed, stream_index(StreamFamily::NullData, rep, 1)),
                        )
                    });
                    pvalues_for_projections(
                        cfg,
                        p,
                        |i| RngStream::new(seed, stream_index(StreamFamily::NullProjections, rep, i)),
                        &x,
                        y.as_ref(),
                    )?
                }
                NullDataMode::PerProjection => (0..cfg.projections as u64)
                    .map(|i| {
                        let x = standard_normal_dataset(
                            n,
                            p,
                            RngStream::new(seed, stream_index(StreamFamily::NullData, rep, 2 * i)),
                        );
                        let y = m.map(|m| {
                            standard_normal_dataset(
                                m,
                                p,
                                RngStream::new(
                                    seed,
                                    stream_index(StreamFamily::NullData, rep, 2 * i + 1),
                                ),
                            )
                        });
                        let r = generate_projection(
                            cfg.k,
                            p,
                            RngStream::new(seed, stream_index(StreamFamily::NullProjections, rep, i)),
                        )?;
                        let px = project_dataset(&r, &x)?;
                        let py = y.as_ref().map(|d| project_dataset(&r, d)).transpose()?;
                        base_pvalue(cfg.base_test, &px, py.as_ref())
                    })
                    .collect::<Result<Vec<f64>>>()?,
            };
            Ok(mean_pvalue(&pvals))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(dir) = cache_dir {
        cache_store(dir, &key, &sample);
    }
    let mut sorted = sample.clone();
    sorted.sort_by(f64::total_cmp);
    Ok((lower_quantile(&sorted, cfg.alpha), sample))
}

/// Run the full meta-procedure: observed mean p-value against the simulated
/// critical value. Rejects when mean_p <= critical value.
pub fn cramp_test(
    x: &Dataset,
    y: Option<&Dataset>,
    cfg: &CrampConfig,
    cache_dir: Option<&Path>,
) -> Result<CrampOutcome> {
    let per_projection_p = projected_pvalues(x, y, cfg)?;
    let mean_p = mean_pvalue(&per_projection_p);
    let (critical_value, null_sample) =
        empirical_critical_value(x.n(), y.map(Dataset::n), x.p(), cfg, cache_dir)?;
    Ok(CrampOutcome {
        mean_p,
        per_projection_p,
        critical_value,
        reject: mean_p <= critical_value,
        null_sample: cfg.keep_null_sample.then_some(null_sample),
    })
}

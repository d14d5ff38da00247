//! Group-comparison and split-stability workflows over expression matrices.

use std::path::PathBuf;

use cramp_core::{
    empirical_critical_value, mean_pvalue, projected_pvalues, BaseTest, ClxStrategy, CrampConfig,
    Dataset, McOptions, RngStream, StreamFamily, TwoSampleStrategy,
};
use rand::seq::SliceRandom;

use crate::error::{CliError, CliResult};
use crate::io::ExpressionMatrix;
use crate::report::{decision_str, BootstrapSummary, MethodOutcome, MethodProportion, MethodReport};

/// A named method: a raw two-sample baseline or the projection procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    Raw { method: cramp_core::RawMethod, monte_carlo: bool },
    Cramp(BaseTest),
}

impl MethodSpec {
    pub fn parse(id: &str) -> CliResult<Self> {
        if let Some(base) = id.strip_prefix("cramp-") {
            return Ok(MethodSpec::Cramp(BaseTest::from_id(base)?));
        }
        let (name, monte_carlo) = match id.strip_suffix("-mc") {
            Some(stem) => (stem, true),
            None => (id, false),
        };
        let method = raw_from_id(name)?;
        if monte_carlo
            && !matches!(
                method,
                cramp_core::RawMethod::Schott
                    | cramp_core::RawMethod::Syk
                    | cramp_core::RawMethod::Lc
                    | cramp_core::RawMethod::Clx
                    | cramp_core::RawMethod::Lw
            )
        {
            return Err(CliError::Config(format!(
                "method '{name}' has no monte-carlo strategy"
            )));
        }
        Ok(MethodSpec::Raw { method, monte_carlo })
    }

    pub fn id(&self) -> String {
        match self {
            MethodSpec::Raw { method, monte_carlo: false } => method.id().to_string(),
            MethodSpec::Raw { method, monte_carlo: true } => format!("{}-mc", method.id()),
            MethodSpec::Cramp(base) => format!("cramp-{}", base.id()),
        }
    }

    pub fn is_two_sample(&self) -> bool {
        match self {
            MethodSpec::Raw { method, .. } => matches!(
                method,
                cramp_core::RawMethod::BoxM
                    | cramp_core::RawMethod::Wald
                    | cramp_core::RawMethod::Schott
                    | cramp_core::RawMethod::Syk
                    | cramp_core::RawMethod::Lc
                    | cramp_core::RawMethod::Clx
            ),
            MethodSpec::Cramp(base) => matches!(base, BaseTest::BoxM | BaseTest::Wald),
        }
    }
}

fn raw_from_id(id: &str) -> CliResult<cramp_core::RawMethod> {
    use cramp_core::RawMethod as R;
    Ok(match id {
        "lrt-identity" => R::LrtIdentity,
        "lrt-sphericity" => R::LrtSphericity,
        "john" => R::John,
        "nagao" => R::Nagao,
        "lw" => R::Lw,
        "syk-u" => R::SykU,
        "syk-v" => R::SykV,
        "czz-u" => R::CzzU,
        "czz-v" => R::CzzV,
        "box-m" => R::BoxM,
        "wald" => R::Wald,
        "schott" => R::Schott,
        "syk" => R::Syk,
        "lc" => R::Lc,
        "clx" => R::Clx,
        other => return Err(CliError::Config(format!("unknown method '{other}'"))),
    })
}

/// Shared knobs for the projection procedure and calibrations.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub k: usize,
    pub projections: usize,
    pub null_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mc_replicates: usize,
    pub cache_dir: Option<PathBuf>,
}

impl RunOptions {
    fn cramp_config(&self, base: BaseTest) -> CrampConfig {
        CrampConfig::new(
            self.k,
            self.projections,
            self.null_replicates,
            self.alpha,
            self.seed,
            base,
            cramp_core::sim::hypothesis_for_base(base),
        )
    }
}

fn run_raw_two_sample(
    method: cramp_core::RawMethod,
    monte_carlo: bool,
    x: &Dataset,
    y: &Dataset,
    opts: &RunOptions,
    mc_seed: u64,
) -> CliResult<cramp_core::TestResult> {
    use cramp_core::RawMethod as R;
    let mc = McOptions { replicates: opts.mc_replicates, seed: mc_seed };
    let strat = if monte_carlo {
        TwoSampleStrategy::MonteCarlo(mc)
    } else {
        TwoSampleStrategy::Asymptotic
    };
    let result = match method {
        R::BoxM => cramp_core::box_m(x, y)?,
        R::Wald => cramp_core::wald_two_sample(x, y)?,
        R::Schott => cramp_core::schott_two_sample(x, y, &strat)?,
        R::Syk => cramp_core::syk_two_sample(x, y, &strat)?,
        R::Lc => cramp_core::li_chen_two_sample(x, y, &strat)?,
        R::Clx => {
            let strat = if monte_carlo { ClxStrategy::MonteCarlo(mc) } else { ClxStrategy::Analytic };
            cramp_core::clx_two_sample(x, y, &strat)?
        }
        other => {
            return Err(CliError::Config(format!(
                "method '{}' is not a two-sample test",
                other.id()
            )))
        }
    };
    Ok(result)
}

/// Run a one-sample method on a dataset.
pub fn run_one_sample_method(
    spec: MethodSpec,
    x: &Dataset,
    opts: &RunOptions,
) -> CliResult<MethodReport> {
    use cramp_core::RawMethod as R;
    match spec {
        MethodSpec::Raw { method, monte_carlo } => {
            let result = match (method, monte_carlo) {
                (R::LrtIdentity, _) => cramp_core::lrt_identity(x)?,
                (R::LrtSphericity, _) => cramp_core::lrt_sphericity(x)?,
                (R::John, _) => cramp_core::john_sphericity(x, true)?,
                (R::Nagao, _) => cramp_core::nagao_identity(x, true)?,
                (R::Lw, false) => cramp_core::lw_identity(x)?,
                (R::Lw, true) => cramp_core::lw_identity_mc(
                    x,
                    &McOptions { replicates: opts.mc_replicates, seed: opts.seed },
                )?,
                (R::SykU, _) => cramp_core::syk_one_sample(x)?.0,
                (R::SykV, _) => cramp_core::syk_one_sample(x)?.1,
                (R::CzzU, _) => cramp_core::czz_one_sample(x)?.0,
                (R::CzzV, _) => cramp_core::czz_one_sample(x)?.1,
                (m, _) => {
                    return Err(CliError::Config(format!(
                        "method '{}' is not a one-sample test",
                        m.id()
                    )))
                }
            };
            Ok(MethodReport {
                method: spec.id(),
                decision: decision_str(result.p_value <= opts.alpha),
                outcome: MethodOutcome::Test(result),
            })
        }
        MethodSpec::Cramp(base) => {
            if matches!(base, BaseTest::BoxM | BaseTest::Wald) {
                return Err(CliError::Config(format!(
                    "cramp base '{}' is a two-sample test",
                    base.id()
                )));
            }
            let cfg = opts.cramp_config(base);
            let outcome = cramp_core::cramp_test(x, None, &cfg, opts.cache_dir.as_deref())?;
            Ok(MethodReport {
                method: spec.id(),
                decision: decision_str(outcome.reject),
                outcome: MethodOutcome::Cramp {
                    k: cfg.k,
                    projections: cfg.projections,
                    null_replicates: cfg.null_replicates,
                    outcome,
                },
            })
        }
    }
}

/// Run a two-sample method on a pair of datasets.
pub fn run_two_sample_method(
    spec: MethodSpec,
    x: &Dataset,
    y: &Dataset,
    opts: &RunOptions,
) -> CliResult<MethodReport> {
    match spec {
        MethodSpec::Raw { method, monte_carlo } => {
            let result = run_raw_two_sample(method, monte_carlo, x, y, opts, opts.seed)?;
            Ok(MethodReport {
                method: spec.id(),
                decision: decision_str(result.p_value <= opts.alpha),
                outcome: MethodOutcome::Test(result),
            })
        }
        MethodSpec::Cramp(base) => {
            if !matches!(base, BaseTest::BoxM | BaseTest::Wald) {
                return Err(CliError::Config(format!(
                    "cramp base '{}' is a one-sample test",
                    base.id()
                )));
            }
            let cfg = opts.cramp_config(base);
            let outcome = cramp_core::cramp_test(x, Some(y), &cfg, opts.cache_dir.as_deref())?;
            Ok(MethodReport {
                method: spec.id(),
                decision: decision_str(outcome.reject),
                outcome: MethodOutcome::Cramp {
                    k: cfg.k,
                    projections: cfg.projections,
                    null_replicates: cfg.null_replicates,
                    outcome,
                },
            })
        }
    }
}

/// Compare two labeled groups with every requested two-sample method.
pub fn compare_groups(
    m: &ExpressionMatrix,
    group_a: &str,
    group_b: &str,
    methods: &[MethodSpec],
    opts: &RunOptions,
) -> CliResult<Vec<MethodReport>> {
    let rows_a = m.group_indices(group_a);
    let rows_b = m.group_indices(group_b);
    if rows_a.is_empty() || rows_b.is_empty() {
        return Err(CliError::Data(format!(
            "group '{}' has {} samples, group '{}' has {}",
            group_a,
            rows_a.len(),
            group_b,
            rows_b.len()
        )));
    }
    let x = m.dataset_from_rows(&rows_a)?;
    let y = m.dataset_from_rows(&rows_b)?;
    methods
        .iter()
        .map(|&spec| {
            if !spec.is_two_sample() {
                return Err(CliError::Config(format!(
                    "method '{}' is not a two-sample test",
                    spec.id()
                )));
            }
            run_two_sample_method(spec, &x, &y, opts)
        })
        .collect()
}

/// Repeatedly split one homogeneous group in two and count rejections per
/// method: a within-group stability check of the size of each test.
///
/// With `subsample_size` unset the group splits into two equal halves; set,
/// two subsamples of that size are drawn, disjoint when the group is large
/// enough and with replacement otherwise (recorded in the summary).
pub fn split_type1_study(
    m: &ExpressionMatrix,
    group: &str,
    replicates: usize,
    methods: &[MethodSpec],
    opts: &RunOptions,
    subsample_size: Option<usize>,
) -> CliResult<BootstrapSummary> {
    if replicates == 0 {
        return Err(CliError::Config("split study needs at least one replicate".into()));
    }
    let rows = m.group_indices(group);
    if rows.len() < 4 {
        return Err(CliError::Data(format!(
            "group '{group}' has {} samples, need at least 4 to split",
            rows.len()
        )));
    }
    let (size_a, size_b, with_replacement, subsampling) = match subsample_size {
        None => {
            let half = rows.len() / 2;
            (half, half, false, "equal-split".to_string())
        }
        Some(s) => {
            if s < 2 {
                return Err(CliError::Config("subsample size must be >= 2".into()));
            }
            if 2 * s <= rows.len() {
                (s, s, false, format!("subsample-{s}-disjoint"))
            } else {
                (s, s, true, format!("subsample-{s}-with-replacement"))
            }
        }
    };

    // critical values once per cramp method; split sizes are constant
    let mut criticals: Vec<Option<(CrampConfig, f64)>> = Vec::with_capacity(methods.len());
    for spec in methods {
        if !spec.is_two_sample() {
            return Err(CliError::Config(format!(
                "method '{}' is not a two-sample test",
                spec.id()
            )));
        }
        criticals.push(match spec {
            MethodSpec::Cramp(base) => {
                let cfg = opts.cramp_config(*base);
                let (q, _) = empirical_critical_value(
                    size_a,
                    Some(size_b),
                    m.n_genes(),
                    &cfg,
                    opts.cache_dir.as_deref(),
                )?;
                Some((cfg, q))
            }
            MethodSpec::Raw { .. } => None,
        });
    }

    let mut rejections = vec![0usize; methods.len()];
    for rep in 0..replicates as u64 {
        let mut rng = RngStream::new(
            opts.seed,
            cramp_core::stream_index(StreamFamily::Scenario, rep, 9),
        )
        .rng();
        let (idx_a, idx_b): (Vec<usize>, Vec<usize>) = if with_replacement {
            let draw = |rng: &mut _, count: usize| -> Vec<usize> {
                (0..count).map(|_| rows[rand::Rng::random_range(rng, 0..rows.len())]).collect()
            };
            let a = draw(&mut rng, size_a);
            let b = draw(&mut rng, size_b);
            (a, b)
        } else {
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            (shuffled[..size_a].to_vec(), shuffled[size_a..size_a + size_b].to_vec())
        };
        let x = m.dataset_from_rows(&idx_a)?;
        let y = m.dataset_from_rows(&idx_b)?;
        for (mi, spec) in methods.iter().enumerate() {
            let reject = match (&criticals[mi], spec) {
                (Some((cfg, q)), _) => {
                    let mut c = cfg.clone();
                    c.run_index = rep;
                    let pvals = projected_pvalues(&x, Some(&y), &c)?;
                    mean_pvalue(&pvals) <= *q
                }
                (None, MethodSpec::Raw { method, monte_carlo }) => {
                    let mc_seed = opts.seed ^ rep.wrapping_mul(0x9e37_79b9);
                    run_raw_two_sample(*method, *monte_carlo, &x, &y, opts, mc_seed)?.p_value
                        <= opts.alpha
                }
                (None, MethodSpec::Cramp(_)) => unreachable!("critical value precomputed"),
            };
            if reject {
                rejections[mi] += 1;
            }
        }
    }
    Ok(BootstrapSummary {
        replicates,
        subsampling,
        group: group.to_string(),
        group_size: rows.len(),
        per_method: methods
            .iter()
            .zip(&rejections)
            .map(|(spec, &r)| MethodProportion {
                method: spec.id(),
                rejection_proportion: r as f64 / replicates as f64,
                rejections: r,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing_round_trips() {
        for id in [
            "lrt-identity",
            "john",
            "lw",
            "lw-mc",
            "czz-v",
            "box-m",
            "schott-mc",
            "clx",
            "cramp-box-m",
            "cramp-lw",
        ] {
            let spec = MethodSpec::parse(id).unwrap();
            assert_eq!(spec.id(), id);
        }
        assert!(MethodSpec::parse("nope").is_err());
        assert!(MethodSpec::parse("nagao-mc").is_err());
        assert!(MethodSpec::parse("cramp-schott").is_err());
    }
}

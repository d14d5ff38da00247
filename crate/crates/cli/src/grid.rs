//! Declarative grid files for the `simulate` subcommand (TOML).
//!
//! ```toml
//! alpha = 0.05            # default for cells that do not override it
//!
//! [[cell]]
//! metric = "size"
//! [cell.scenario]
//! hypothesis = "two-sample"   # or "one-sample"
//! n = 20
//! m = 20                      # two-sample only
//! p = 100
//! replicates = 200
//! seed = 7
//! mean = "zero"               # or "uniform"
//! [cell.scenario.cov]
//! model = "identity"          # identity | sphere | band | tail-diag |
//!                             # gamma-diag | band-congruence
//! # sphere: sigma; band: rho, bandwidth; tail-diag: epsilon, bandwidth;
//! # gamma-diag: fraction; band-congruence: rho, fraction
//! [cell.method]
//! kind = "cramp"              # or "raw"
//! base = "box-m"              # cramp: base, k, projections, null-replicates
//! k = 5
//! projections = 100
//! null-replicates = 1000
//! # raw: method = "czz-v" plus optional mc-replicates
//! ```

use cramp_core::{
    BaseTest, CovModel, MeanModel, MethodConfig, ScenarioHypothesis, ScenarioSpec, StudyCell,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    alpha: Option<f64>,
    cell: Vec<GridCell>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridCell {
    #[serde(default)]
    metric: Option<String>,
    #[serde(default)]
    alpha: Option<f64>,
    scenario: GridScenario,
    method: GridMethod,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridScenario {
    hypothesis: String,
    n: usize,
    #[serde(default)]
    m: Option<usize>,
    p: usize,
    replicates: usize,
    seed: u64,
    #[serde(default)]
    mean: Option<String>,
    cov: GridCov,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
enum GridCov {
    Identity,
    Sphere { sigma: f64 },
    Band { rho: f64, bandwidth: usize },
    TailDiag { epsilon: f64, bandwidth: usize },
    GammaDiag { fraction: f64 },
    BandCongruence { rho: f64, fraction: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum GridMethod {
    Raw {
        method: String,
        #[serde(default, rename = "mc-replicates")]
        mc_replicates: Option<usize>,
    },
    Cramp {
        base: String,
        k: usize,
        projections: usize,
        #[serde(rename = "null-replicates")]
        null_replicates: usize,
    },
}

fn parse_raw_method(id: &str) -> CliResult<cramp_core::RawMethod> {
    match crate::workflow::MethodSpec::parse(id)? {
        crate::workflow::MethodSpec::Raw { method, monte_carlo: false } => Ok(method),
        _ => Err(CliError::Config(format!(
            "'{id}' is not a raw method id (use mc-replicates for monte-carlo calibration)"
        ))),
    }
}

/// Parse a TOML grid description into study cells.
pub fn parse_grid(text: &str) -> CliResult<Vec<StudyCell>> {
    let file: GridFile =
        toml::from_str(text).map_err(|e| CliError::Config(format!("grid config: {e}")))?;
    let default_alpha = file.alpha.unwrap_or(0.05);
    file.cell
        .into_iter()
        .map(|cell| {
            let hypothesis = match cell.scenario.hypothesis.as_str() {
                "one-sample" => ScenarioHypothesis::OneSample,
                "two-sample" => ScenarioHypothesis::TwoSample,
                other => {
                    return Err(CliError::Config(format!("unknown hypothesis '{other}'")))
                }
            };
            let mean_model = match cell.scenario.mean.as_deref() {
                None | Some("zero") => MeanModel::Zero,
                Some("uniform") => MeanModel::Uniform,
                Some(other) => {
                    return Err(CliError::Config(format!("unknown mean model '{other}'")))
                }
            };
            let cov_model = match cell.scenario.cov {
                GridCov::Identity => CovModel::Identity,
                GridCov::Sphere { sigma } => CovModel::Sphere { sigma },
                GridCov::Band { rho, bandwidth } => CovModel::Band { rho, bandwidth },
                GridCov::TailDiag { epsilon, bandwidth } => {
                    CovModel::TailDiag { epsilon, bandwidth }
                }
                GridCov::GammaDiag { fraction } => CovModel::GammaDiag { fraction },
                GridCov::BandCongruence { rho, fraction } => {
                    CovModel::BandCongruence { rho, fraction }
                }
            };
            let method = match cell.method {
                GridMethod::Raw { method, mc_replicates } => MethodConfig::Raw {
                    method: parse_raw_method(&method)?,
                    mc_replicates,
                },
                GridMethod::Cramp { base, k, projections, null_replicates } => {
                    MethodConfig::Cramp {
                        base: BaseTest::from_id(&base)?,
                        k,
                        projections,
                        null_replicates,
                    }
                }
            };
            Ok(StudyCell {
                scenario: ScenarioSpec {
                    hypothesis,
                    n: cell.scenario.n,
                    m: cell.scenario.m,
                    p: cell.scenario.p,
                    cov_model,
                    mean_model,
                    replicates: cell.scenario.replicates,
                    seed: cell.scenario.seed,
                },
                method,
                alpha: cell.alpha.unwrap_or(default_alpha),
                metric: cell.metric.unwrap_or_else(|| "size".to_string()),
            })
        })
        .collect()
}

/// Serialize study rows as CSV with fixed, documented columns.
pub fn rows_to_csv(rows: &[cramp_core::StudyRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "hypothesis",
        "n",
        "m",
        "p",
        "k",
        "projections",
        "method",
        "metric",
        "value",
        "replicates",
        "wall_time_s",
        "error",
    ])?;
    for r in rows {
        let hyp = match r.hypothesis {
            cramp_core::ScenarioHypothesis::OneSample => "one-sample",
            cramp_core::ScenarioHypothesis::TwoSample => "two-sample",
        };
        w.write_record([
            hyp,
            &r.n.to_string(),
            &r.m.map_or(String::new(), |m| m.to_string()),
            &r.p.to_string(),
            &r.k.map_or(String::new(), |k| k.to_string()),
            &r.projections.map_or(String::new(), |k| k.to_string()),
            &r.method,
            &r.metric,
            &r.value.map_or(String::new(), |v| v.to_string()),
            &r.replicates.to_string(),
            &r.wall_time_s.to_string(),
            r.error.as_deref().unwrap_or(""),
        ])?;
    }
    let bytes = w.into_inner().expect("csv buffer");
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

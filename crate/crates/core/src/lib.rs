//! Covariance-matrix hypothesis testing for high-dimensional data.
//!
//! The centerpiece is a random-projection meta-procedure: the data are
//! embedded K times into a low dimension through random semi-orthogonal
//! maps, a classical test runs on each embedding, and the average p-value
//! is compared against an empirically simulated critical value. Classical
//! fixed-dimension tests, high-dimensional baseline statistics, and a
//! simulation harness for size/power studies ship alongside.

pub mod classical;
pub mod engine;
pub mod error;
pub mod highdim;
pub mod ks;
pub mod linalg;
pub mod projection;
pub mod rng;
pub mod sim;

pub use classical::{
    box_m, john_sphericity, lrt_identity, lrt_sphericity, nagao_identity, wald_two_sample,
    PvalueStrategy, TestResult,
};
pub use engine::{
    cramp_test, empirical_critical_value, mean_pvalue, projected_pvalues, BaseTest, CrampConfig,
    CrampOutcome, Hypothesis, NullDataMode,
};
pub use error::{Error, Result};
pub use highdim::{
    clx_two_sample, czz_one_sample, czz_trace_estimators, li_chen_components, li_chen_two_sample,
    lw_identity, lw_identity_mc, schott_two_sample, syk_one_sample, syk_two_sample, ClxStrategy,
    McOptions, TwoSampleStrategy, UStatCache,
};
pub use linalg::{
    chi2_sf, eigenvalues_sym, normal_sf, sample_covariance, trace_power, CovMatrix, Dataset,
    RefDistribution,
};
pub use projection::{generate_projection, project_dataset, ProjectionMatrix};
pub use rng::{stream_index, RngStream, StreamFamily};
pub use sim::{
    build_covariance, run_study, run_study_with, sample_gaussian, CovModel, MeanModel, MethodConfig,
    RawMethod, ScenarioHypothesis, ScenarioSpec, StudyCell, StudyRow,
};

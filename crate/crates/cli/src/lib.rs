//! Library surface of the `cramp` command-line tool: tabular ingestion,
//! gene-expression workflows, grid configuration, and report serialization.

pub mod error;
pub mod grid;
pub mod io;
pub mod report;
pub mod workflow;

pub use error::{CliError, CliResult};
pub use io::{load_labels, load_matrix, select_top_genes, ExpressionMatrix, LoadOptions, LoadedMatrix, Orientation};
pub use report::{AnalysisReport, BootstrapSummary, MethodOutcome, MethodReport, Provenance};
pub use workflow::{compare_groups, split_type1_study, MethodSpec, RunOptions};

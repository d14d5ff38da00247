//! Tabular ingestion of expression matrices and gene filtering.
//!
//! Tables are delimiter-separated numeric grids, optionally with a header
//! row naming the columns. Orientation declares whether file rows are
//! samples or genes; matrices are normalized to samples x genes. Cells
//! spelled "", "NA", "NaN", "nan", or "null" are treated as missing and the
//! affected samples are dropped (with a reported count); any other
//! non-numeric cell is a parse error naming its coordinates.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// File rows are samples, columns are genes (default).
    SamplesByGenes,
    /// File rows are genes, columns are samples.
    GenesBySamples,
}

impl Orientation {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "samples-x-genes" => Ok(Orientation::SamplesByGenes),
            "genes-x-samples" => Ok(Orientation::GenesBySamples),
            other => Err(CliError::Config(format!(
                "unknown orientation '{other}' (expected samples-x-genes or genes-x-samples)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: char,
    pub orientation: Orientation,
    pub header: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { delimiter: ',', orientation: Orientation::SamplesByGenes, header: true }
    }
}

/// Samples x genes expression matrix with identifiers and group labels.
#[derive(Debug, Clone)]
pub struct ExpressionMatrix {
    values: DMatrix<f64>,
    gene_ids: Vec<String>,
    sample_labels: Vec<String>,
}

impl ExpressionMatrix {
    pub fn new(values: DMatrix<f64>, gene_ids: Vec<String>, sample_labels: Vec<String>) -> CliResult<Self> {
        if gene_ids.len() != values.ncols() {
            return Err(CliError::Data(format!(
                "{} gene ids for {} columns",
                gene_ids.len(),
                values.ncols()
            )));
        }
        if sample_labels.len() != values.nrows() {
            return Err(CliError::Data(format!(
                "{} sample labels for {} rows",
                sample_labels.len(),
                values.nrows()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &gene_ids {
            if !seen.insert(id.as_str()) {
                return Err(CliError::Data(format!("duplicate gene id '{id}'")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Data("non-finite entry in expression matrix".into()));
        }
        Ok(Self { values, gene_ids, sample_labels })
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_genes(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_labels(&self) -> &[String] {
        &self.sample_labels
    }

    /// Replace the per-sample group labels.
    pub fn assign_labels(&mut self, labels: Vec<String>) -> CliResult<()> {
        if labels.len() != self.n_samples() {
            return Err(CliError::Data(format!(
                "{} labels for {} samples",
                labels.len(),
                self.n_samples()
            )));
        }
        self.sample_labels = labels;
        Ok(())
    }

    /// Row indices carrying the given label.
    pub fn group_indices(&self, label: &str) -> Vec<usize> {
        self.sample_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_str() == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Dataset built from the given sample rows.
    pub fn dataset_from_rows(&self, rows: &[usize]) -> CliResult<cramp_core::Dataset> {
        let mut m = DMatrix::zeros(rows.len(), self.n_genes());
        for (out, &src) in rows.iter().enumerate() {
            m.row_mut(out).copy_from(&self.values.row(src));
        }
        cramp_core::Dataset::new(m).map_err(CliError::from)
    }
}

/// Ingestion outcome: the clean matrix plus what was dropped.
#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    pub matrix: ExpressionMatrix,
    /// Count of samples rejected for missing values.
    pub dropped_samples: usize,
    /// Original sample positions that survived, for aligning label files.
    pub kept_samples: Vec<usize>,
}

fn is_missing(tok: &str) -> bool {
    matches!(tok, "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

/// Parse a delimited numeric table into a samples x genes matrix.
pub fn load_matrix(path: &Path, opts: &LoadOptions) -> CliResult<LoadedMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if !line.trim().is_empty() {
            lines.push((idx + 1, line));
        }
    }
    if lines.is_empty() {
        return Err(CliError::Data(format!("{} is empty", path.display())));
    }
    let mut header: Option<Vec<String>> = None;
    if opts.header {
        let (_, first) = lines.remove(0);
        header = Some(first.split(opts.delimiter).map(|s| s.trim().to_string()).collect());
    }
    if lines.is_empty() {
        return Err(CliError::Data(format!("{} has a header but no data rows", path.display())));
    }
    let width = lines[0].1.split(opts.delimiter).count();
    let mut grid: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
    for (line_no, line) in &lines {
        let fields: Vec<&str> = line.split(opts.delimiter).map(str::trim).collect();
        if fields.len() != width {
            return Err(CliError::Data(format!(
                "ragged row at line {line_no}: expected {width} fields, got {}",
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (col, tok) in fields.iter().enumerate() {
            if is_missing(tok) {
                row.push(f64::NAN);
            } else {
                match tok.parse::<f64>() {
                    Ok(v) => row.push(v),
                    Err(_) => {
                        return Err(CliError::Data(format!(
                            "non-numeric value '{tok}' at line {line_no}, column {}",
                            col + 1
                        )))
                    }
                }
            }
        }
        grid.push(row);
    }
    if let Some(h) = &header {
        if h.len() != width {
            return Err(CliError::Data(format!(
                "header has {} fields but rows have {width}",
                h.len()
            )));
        }
    }

    // normalize to samples x genes
    let (raw_rows, raw_cols) = (grid.len(), width);
    let (n_samples, n_genes, value_at): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) =
        match opts.orientation {
            Orientation::SamplesByGenes => {
                let g = grid.clone();
                (raw_rows, raw_cols, Box::new(move |s, t| g[s][t]))
            }
            Orientation::GenesBySamples => {
                let g = grid.clone();
                (raw_cols, raw_rows, Box::new(move |s, t| g[t][s]))
            }
        };
    let gene_ids: Vec<String> = match (&header, opts.orientation) {
        (Some(h), Orientation::SamplesByGenes) => h.clone(),
        _ => (0..n_genes).map(|i| format!("g{i}")).collect(),
    };
    let file_sample_names: Vec<String> = match (&header, opts.orientation) {
        (Some(h), Orientation::GenesBySamples) => h.clone(),
        _ => (0..n_samples).map(|i| format!("s{i}")).collect(),
    };

    let mut kept_samples = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        if (0..n_genes).all(|t| value_at(s, t).is_finite()) {
            kept_samples.push(s);
        }
    }
    let dropped = n_samples - kept_samples.len();
    if kept_samples.len() < 2 {
        return Err(CliError::Data(format!(
            "fewer than 2 complete samples after dropping {dropped} with missing values"
        )));
    }
    let values = DMatrix::from_fn(kept_samples.len(), n_genes, |i, j| value_at(kept_samples[i], j));
    let labels: Vec<String> = kept_samples.iter().map(|&s| file_sample_names[s].clone()).collect();
    Ok(LoadedMatrix {
        matrix: ExpressionMatrix::new(values, gene_ids, labels)?,
        dropped_samples: dropped,
        kept_samples,
    })
}

/// Keep the `keep` genes whose minimum intensity across samples is largest;
/// ties break toward the earlier original column. Column order is preserved.
pub fn select_top_genes(m: &ExpressionMatrix, keep: usize) -> CliResult<ExpressionMatrix> {
    if keep > m.n_genes() {
        return Err(CliError::Config(format!(
            "cannot keep {keep} genes, matrix has {}",
            m.n_genes()
        )));
    }
    let minima: Vec<f64> = (0..m.n_genes())
        .map(|j| m.values().column(j).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut order: Vec<usize> = (0..m.n_genes()).collect();
    // stable sort: among equal minima the earlier column wins
    order.sort_by(|&a, &b| minima[b].total_cmp(&minima[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort_unstable();
    let values = DMatrix::from_fn(m.n_samples(), keep, |i, j| m.values()[(i, chosen[j])]);
    let gene_ids = chosen.iter().map(|&j| m.gene_ids()[j].clone()).collect();
    ExpressionMatrix::new(values, gene_ids, m.sample_labels().to_vec())
}

/// One label per line, aligned with the file's sample order.
pub fn load_labels(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
}

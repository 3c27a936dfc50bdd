//! Labeled hypergraph datasets and the `.hgd.json` file format.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::hypergraph::Hypergraph;
use crate::regularity::Loss;
use crate::trainer::{Sample, TrainingSet};

pub const DATASET_EXTENSION: &str = "hgd.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    hypergraph: Hypergraph,
    x_v: FeatureMatrix,
    x_e: FeatureMatrix,
    labels: Vec<Option<f64>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        hypergraph: Hypergraph,
        x_v: FeatureMatrix,
        x_e: FeatureMatrix,
        labels: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = hypergraph.n_vertices();
        if x_v.rows() != n {
            return Err(Error::DimensionMismatch {
                what: "vertex feature rows",
                expected: n,
                got: x_v.rows(),
            });
        }
        if x_e.rows() != hypergraph.n_edges() {
            return Err(Error::DimensionMismatch {
                what: "hyperedge feature rows",
                expected: hypergraph.n_edges(),
                got: x_e.rows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                what: "label count",
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(v) = labels.iter().position(|y| matches!(y, Some(y) if !y.is_finite())) {
            return Err(Error::Schema(format!("labels[{v}] is not finite")));
        }
        Ok(Self {
            name: name.into(),
            hypergraph,
            x_v,
            x_e,
            labels,
        })
    }

    /// Builds a dataset whose hyperedge features are the member means of the
    /// vertex features, column-normalized when the vertex features are.
    pub fn with_mean_edge_features(
        name: impl Into<String>,
        hypergraph: Hypergraph,
        x_v: FeatureMatrix,
        labels: Vec<Option<f64>>,
    ) -> Result<Self> {
        let x_e = member_mean_features(&hypergraph, &x_v)?;
        Self::new(name, hypergraph, x_v, x_e, labels)
    }

    /// Column-normalizes the selected feature matrices.
    pub fn normalize_features(mut self, vertex: bool, edge: bool) -> Result<Self> {
        if vertex {
            self.x_v = self.x_v.column_normalize()?;
        }
        if edge {
            self.x_e = self.x_e.column_normalize()?;
        }
        Ok(self)
    }

    pub fn hypergraph(&self) -> &Hypergraph {
        &self.hypergraph
    }

    pub fn vertex_features(&self) -> &FeatureMatrix {
        &self.x_v
    }

    pub fn edge_features(&self) -> &FeatureMatrix {
        &self.x_e
    }

    pub fn labels(&self) -> &[Option<f64>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<f64> {
        self.labels.get(v).copied().flatten()
    }

    pub fn n_vertices(&self) -> usize {
        self.hypergraph.n_vertices()
    }

    /// Vertices with a label, ascending.
    pub fn labeled_vertices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(v, y)| y.map(|_| v))
            .collect()
    }

    pub fn sample(&self, v: usize) -> Result<Sample> {
        match self.label(v) {
            Some(y) => Ok(Sample::new(v, y)),
            None if v < self.n_vertices() => Err(Error::InvalidParameter(format!("vertex {v} has no label"))),
            None => Err(Error::VertexOutOfRange {
                vertex: v,
                len: self.n_vertices(),
            }),
        }
    }

    pub fn training_set(&self, vertices: &[usize]) -> Result<TrainingSet> {
        TrainingSet::new(vertices.iter().map(|&v| self.sample(v)).collect::<Result<_>>()?)
    }

    /// Fails on the first label outside the loss's admissible range.
    pub fn check_labels(&self, loss: Loss) -> Result<()> {
        self.labels.iter().flatten().try_for_each(|&y| loss.check_label(y))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Parses `.hgd.json` text; `source` names the input in error messages.
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("{source}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        file.into_dataset()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            name: self.name.clone(),
            n_vertices: self.n_vertices(),
            edges: self
                .hypergraph
                .edges()
                .iter()
                .map(|e| e.iter().map(|&v| v as i64).collect())
                .collect(),
            vertex_features: self.x_v.to_rows(),
            edge_features: Some(self.x_e.to_rows()),
            labels: self.labels.clone(),
        };
        let mut s = serde_json::to_string(&file).map_err(|e| Error::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    name: String,
    n_vertices: usize,
    edges: Vec<Vec<i64>>,
    vertex_features: Vec<Vec<f64>>,
    #[serde(default)]
    edge_features: Option<Vec<Vec<f64>>>,
    labels: Vec<Option<f64>>,
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>], expected_rows: usize) -> Result<FeatureMatrix> {
    if rows.len() != expected_rows {
        return Err(Error::Schema(format!(
            "{field}: expected {expected_rows} rows, got {}",
            rows.len()
        )));
    }
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Schema(format!(
            "{field}[{i}]: expected {cols} columns, got {}",
            rows[i].len()
        )));
    }
    FeatureMatrix::from_rows(rows, cols).map_err(|e| match e {
        Error::NonFiniteEntry { row, col } => Error::Schema(format!("{field}[{row}][{col}] is not finite")),
        other => other,
    })
}

impl DatasetFile {
    fn into_dataset(self) -> Result<Dataset> {
        let hg = Hypergraph::from_signed_edge_lists(&self.edges, self.n_vertices)?;
        let x_v = matrix_from_rows("vertex_features", &self.vertex_features, self.n_vertices)?;
        if self.labels.len() != self.n_vertices {
            return Err(Error::Schema(format!(
                "labels: expected {} entries, got {}",
                self.n_vertices,
                self.labels.len()
            )));
        }
        match self.edge_features {
            Some(rows) => {
                let x_e = matrix_from_rows("edge_features", &rows, hg.n_edges())?;
                Dataset::new(self.name, hg, x_v, x_e, self.labels)
            }
            None => Dataset::with_mean_edge_features(self.name, hg, x_v, self.labels),
        }
    }
}

/// Row `e` is the mean of the vertex feature rows of hyperedge `e`.
pub fn member_mean_features(hg: &Hypergraph, x_v: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x_v.rows() != hg.n_vertices() {
        return Err(Error::DimensionMismatch {
            what: "vertex feature rows",
            expected: hg.n_vertices(),
            got: x_v.rows(),
        });
    }
    let xv = x_v.data();
    let mut out = Array2::zeros((hg.n_edges(), x_v.cols()));
    for (j, edge) in hg.edges().iter().enumerate() {
        let mut row = out.row_mut(j);
        for &v in edge {
            row += &xv.row(v);
        }
        row /= edge.len() as f64;
    }
    let m = FeatureMatrix::new(out)?;
    if x_v.is_normalized() {
        m.column_normalize()
    } else {
        Ok(m)
    }
}

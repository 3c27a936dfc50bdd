//! Co-citation hypergraphs: one hyperedge per citing document holding the
//! set of documents it cites.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::hypergraph::Hypergraph;

/// What to do with documents that end up in no hyperedge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsolatedPolicy {
    /// Remove them and reindex the rest.
    #[default]
    Drop,
    /// Reject the input.
    Error,
}

#[derive(Debug, Clone)]
pub struct Cocitation {
    pub hypergraph: Hypergraph,
    /// Document id of each vertex.
    pub vertex_ids: Vec<String>,
    /// Citing document of each hyperedge.
    pub edge_sources: Vec<String>,
}

/// Builds the co-citation hypergraph over the documents named in `pairs`
/// (`(citing, cited)`), indexed in order of first appearance.
pub fn build_cocitation<S: AsRef<str>>(pairs: &[(S, S)], policy: IsolatedPolicy) -> Result<Cocitation> {
    let mut ids: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut intern = |s: &str| -> usize {
        *lookup.entry(s.to_string()).or_insert_with(|| {
            ids.push(s.to_string());
            ids.len() - 1
        })
    };
    let indexed: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(citing, cited)| (intern(citing.as_ref()), intern(cited.as_ref())))
        .collect();
    build_indexed(&indexed, &ids, policy)
}

/// Same as [`build_cocitation`] with documents already mapped to `0..ids.len()`.
pub fn build_indexed(pairs: &[(usize, usize)], ids: &[String], policy: IsolatedPolicy) -> Result<Cocitation> {
    if pairs.is_empty() {
        return Err(Error::NoEdges);
    }
    let n = ids.len();
    let mut cited: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut citing_order: Vec<usize> = Vec::new();
    for &(a, b) in pairs {
        for x in [a, b] {
            if x >= n {
                return Err(Error::VertexOutOfRange { vertex: x, len: n });
            }
        }
        if cited[a].is_empty() {
            citing_order.push(a);
        }
        cited[a].insert(b);
    }
    let edges: Vec<Vec<usize>> = citing_order.iter().map(|&a| cited[a].iter().copied().collect()).collect();
    let edge_sources = citing_order.iter().map(|&a| ids[a].clone()).collect();
    let (hypergraph, kept) = match policy {
        IsolatedPolicy::Error => (Hypergraph::from_edge_lists(&edges, n)?, (0..n).collect()),
        IsolatedPolicy::Drop => Hypergraph::drop_isolated(&edges, n)?,
    };
    Ok(Cocitation {
        hypergraph,
        vertex_ids: kept.iter().map(|&v: &usize| ids[v].clone()).collect(),
        edge_sources,
    })
}

/// Reads a citation-network pair of files: `content` rows are
/// `id feature_1 .. feature_k class`, `cites` rows are `cited citing`.
/// Labels are 1 for `positive_class` and 0 otherwise; citations naming
/// documents missing from `content` are skipped.
pub fn ingest_citation_files(
    content: impl AsRef<Path>,
    cites: impl AsRef<Path>,
    positive_class: &str,
    policy: IsolatedPolicy,
    name: &str,
) -> Result<Dataset> {
    let content_path = content.as_ref();
    let cites_path = cites.as_ref();
    let content_text = fs::read_to_string(content_path)?;
    let cites_text = fs::read_to_string(cites_path)?;

    let mut ids = Vec::new();
    let mut index = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut classes = Vec::new();
    for (lineno, line) in content_text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let ctx = || format!("{}:{}", content_path.display(), lineno + 1);
        if fields.len() < 2 {
            return Err(Error::Parse {
                context: ctx(),
                message: "expected an id and a class".into(),
            });
        }
        let feats = fields[1..fields.len() - 1]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    context: ctx(),
                    message: format!("feature `{f}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != feats.len() {
                return Err(Error::Parse {
                    context: ctx(),
                    message: format!("expected {} features, got {}", first.len(), feats.len()),
                });
            }
        }
        if index.insert(fields[0].to_string(), ids.len()).is_some() {
            return Err(Error::Parse {
                context: ctx(),
                message: format!("duplicate document id `{}`", fields[0]),
            });
        }
        ids.push(fields[0].to_string());
        rows.push(feats);
        classes.push(fields[fields.len() - 1].to_string());
    }
    if ids.is_empty() {
        return Err(Error::NoVertices);
    }

    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in cites_text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Parse {
                context: format!("{}:{}", cites_path.display(), lineno + 1),
                message: format!("expected `cited citing`, got {} fields", fields.len()),
            });
        }
        match (index.get(fields[1]), index.get(fields[0])) {
            (Some(&citing), Some(&cited)) => pairs.push((citing, cited)),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} citations naming unknown documents");
    }

    let cc = build_indexed(&pairs, &ids, policy)?;
    let kept: Vec<usize> = cc.vertex_ids.iter().map(|id| index[id.as_str()]).collect();
    let cols = rows[0].len();
    let kept_rows: Vec<Vec<f64>> = kept.iter().map(|&v| rows[v].clone()).collect();
    let x_v = FeatureMatrix::from_rows(&kept_rows, cols)?.column_normalize()?;
    let labels = kept
        .iter()
        .map(|&v| Some(if classes[v] == positive_class { 1.0 } else { 0.0 }))
        .collect();
    Dataset::with_mean_edge_features(name, cc.hypergraph, x_v, labels)
}

//! Undirected, unweighted hypergraphs stored as sparse incidence lists.
//!
//! A [`Hypergraph`] keeps one sorted, deduplicated vertex list per hyperedge.
//! [`NormalizedIncidence`] wraps it with the degree scalings needed to apply
//! `D_V^{-1/2} H D_E^{-1/2}` (or plain `H`) without ever forming a dense matrix.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    n_vertices: usize,
    edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Builds a validated hypergraph. Duplicate vertices inside an edge are
    /// merged and edge order is preserved.
    pub fn from_edge_lists(edges: &[Vec<usize>], n_vertices: usize) -> Result<Self> {
        let signed: Vec<Vec<i64>> = edges
            .iter()
            .map(|e| e.iter().map(|&v| v as i64).collect())
            .collect();
        Self::from_signed_edge_lists(&signed, n_vertices)
    }

    /// Same as [`Hypergraph::from_edge_lists`] but accepts raw (possibly
    /// negative) indices, as read from untrusted input.
    pub fn from_signed_edge_lists(edges: &[Vec<i64>], n_vertices: usize) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::NoVertices);
        }
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        let mut covered = vec![false; n_vertices];
        let mut out = Vec::with_capacity(edges.len());
        for (j, edge) in edges.iter().enumerate() {
            let mut members = BTreeSet::new();
            for &raw in edge {
                if raw < 0 || raw as u64 >= n_vertices as u64 {
                    return Err(Error::IndexOutOfRange {
                        edge: j,
                        index: raw,
                        n_vertices,
                    });
                }
                members.insert(raw as usize);
            }
            if members.is_empty() {
                return Err(Error::EmptyEdge { edge: j });
            }
            for &v in &members {
                covered[v] = true;
            }
            out.push(members.into_iter().collect());
        }
        if let Some(vertex) = covered.iter().position(|c| !c) {
            return Err(Error::IsolatedVertex { vertex });
        }
        Ok(Self {
            n_vertices,
            edges: out,
        })
    }

    /// Drops vertices that appear in no hyperedge and relabels the rest
    /// contiguously. Returns the hypergraph and, for each new index, the
    /// original vertex index.
    pub fn drop_isolated(edges: &[Vec<usize>], n_vertices: usize) -> Result<(Self, Vec<usize>)> {
        let mut covered = vec![false; n_vertices];
        for edge in edges {
            for &v in edge {
                if v >= n_vertices {
                    return Err(Error::IndexOutOfRange {
                        edge: 0,
                        index: v as i64,
                        n_vertices,
                    });
                }
                covered[v] = true;
            }
        }
        let kept: Vec<usize> = (0..n_vertices).filter(|&v| covered[v]).collect();
        let dropped = n_vertices - kept.len();
        if dropped > 0 {
            log::warn!("dropping {dropped} isolated vertices");
        }
        let mut remap = vec![usize::MAX; n_vertices];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let relabeled: Vec<Vec<usize>> = edges
            .iter()
            .map(|e| e.iter().map(|&v| remap[v]).collect())
            .collect();
        let hg = Self::from_edge_lists(&relabeled, kept.len())?;
        Ok((hg, kept))
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &[usize] {
        &self.edges[j]
    }

    /// Number of stored ones in `H`.
    pub fn incidence_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn degrees(&self) -> DegreeVectors {
        let mut vertex = vec![0usize; self.n_vertices];
        for edge in &self.edges {
            for &v in edge {
                vertex[v] += 1;
            }
        }
        let edge = self.edges.iter().map(Vec::len).collect();
        DegreeVectors { vertex, edge }
    }
}

/// `d_V = H 1` and `d_E = H^T 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVectors {
    pub vertex: Vec<usize>,
    pub edge: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidenceScale {
    Normalized,
    Raw,
}

impl IncidenceScale {
    pub fn as_str(self) -> &'static str {
        match self {
            IncidenceScale::Normalized => "normalized",
            IncidenceScale::Raw => "raw",
        }
    }
}

impl std::fmt::Display for IncidenceScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IncidenceScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "raw" => Ok(Self::Raw),
            other => Err(Error::InvalidParameter(format!(
                "unknown incidence scale {other:?} (expected normalized|raw)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `y = H~ x`, with `x` of length M.
    Left,
    /// `y = H~^T x`, with `x` of length N.
    Right,
}

/// The incidence matrix with its degree scalings applied on the fly.
#[derive(Debug, Clone)]
pub struct NormalizedIncidence {
    base: Hypergraph,
    degrees: DegreeVectors,
    scale: IncidenceScale,
    vertex_inv_sqrt: Vec<f64>,
    edge_inv_sqrt: Vec<f64>,
}

impl NormalizedIncidence {
    pub fn new(base: &Hypergraph, scale: IncidenceScale) -> Self {
        let degrees = base.degrees();
        let vertex_inv_sqrt = degrees.vertex.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
        let edge_inv_sqrt = degrees.edge.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
        Self {
            base: base.clone(),
            degrees,
            scale,
            vertex_inv_sqrt,
            edge_inv_sqrt,
        }
    }

    pub fn base(&self) -> &Hypergraph {
        &self.base
    }

    pub fn degrees(&self) -> &DegreeVectors {
        &self.degrees
    }

    pub fn scale(&self) -> IncidenceScale {
        self.scale
    }

    pub fn n_vertices(&self) -> usize {
        self.base.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.base.edges.len()
    }

    /// `D_V^{-1/2}` diagonal, independent of the scale flag.
    pub fn vertex_inv_sqrt(&self) -> &[f64] {
        &self.vertex_inv_sqrt
    }

    /// `D_E^{-1/2}` diagonal, independent of the scale flag.
    pub fn edge_inv_sqrt(&self) -> &[f64] {
        &self.edge_inv_sqrt
    }

    #[inline]
    fn entry(&self, vertex: usize, edge: usize) -> f64 {
        match self.scale {
            IncidenceScale::Normalized => self.vertex_inv_sqrt[vertex] * self.edge_inv_sqrt[edge],
            IncidenceScale::Raw => 1.0,
        }
    }

    pub fn matvec(&self, side: Side, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let (n, m) = (self.n_vertices(), self.n_edges());
        match side {
            Side::Left => {
                if x.len() != m {
                    return Err(Error::DimensionMismatch {
                        what: "left matvec input",
                        expected: m,
                        got: x.len(),
                    });
                }
                let mut y = Array1::zeros(n);
                for (j, edge) in self.base.edges.iter().enumerate() {
                    let xj = x[j];
                    for &i in edge {
                        y[i] += self.entry(i, j) * xj;
                    }
                }
                Ok(y)
            }
            Side::Right => {
                if x.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "right matvec input",
                        expected: n,
                        got: x.len(),
                    });
                }
                let y = self
                    .base
                    .edges
                    .iter()
                    .enumerate()
                    .map(|(j, edge)| edge.iter().map(|&i| self.entry(i, j) * x[i]).sum())
                    .collect();
                Ok(y)
            }
        }
    }

    /// Applies the operator to every column of `x`.
    pub fn matmul(&self, side: Side, x: &Array2<f64>) -> Result<Array2<f64>> {
        let rows = match side {
            Side::Left => self.n_vertices(),
            Side::Right => self.n_edges(),
        };
        let mut out = Array2::zeros((rows, x.ncols()));
        for (k, col) in x.axis_iter(Axis(1)).enumerate() {
            let y = self.matvec(side, col)?;
            out.column_mut(k).assign(&y);
        }
        Ok(out)
    }

    /// Largest singular value by power iteration on the smaller Gram operator.
    ///
    /// Starts from the normalized all-ones vector and stops once the square
    /// root of the Rayleigh quotient moves by at most `tol` between sweeps.
    pub fn spectral_norm(&self, tol: f64, max_iter: usize) -> Result<f64> {
        if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "spectral_norm needs tol > 0 and max_iter >= 1 (got {tol}, {max_iter})"
            )));
        }
        let (n, m) = (self.n_vertices(), self.n_edges());
        // Gram on the edge side is H~^T H~ (M x M), on the vertex side H~ H~^T.
        let edge_side = m <= n;
        let dim = if edge_side { m } else { n };
        let gram = |v: &Array1<f64>| -> Array1<f64> {
            if edge_side {
                let u = self.matvec(Side::Left, v.view()).expect("shape checked");
                self.matvec(Side::Right, u.view()).expect("shape checked")
            } else {
                let u = self.matvec(Side::Right, v.view()).expect("shape checked");
                self.matvec(Side::Left, u.view()).expect("shape checked")
            }
        };

        let mut v = Array1::from_elem(dim, 1.0 / (dim as f64).sqrt());
        let mut prev = f64::NAN;
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            let w = gram(&v);
            let rayleigh = v.dot(&w).max(0.0);
            estimate = rayleigh.sqrt();
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                return Ok(0.0);
            }
            if (estimate - prev).abs() <= tol {
                return Ok(estimate);
            }
            prev = estimate;
            v = w / norm;
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            last: estimate,
        })
    }

    pub fn spectral_norm_default(&self) -> Result<f64> {
        self.spectral_norm(DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER)
    }
}

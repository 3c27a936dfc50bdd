#![allow(dead_code)]

use std::path::PathBuf;

use hcon::data::Dataset;
use hcon::{FeatureMatrix, Hypergraph, IncidenceScale, NormalizedIncidence};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn planted() -> Dataset {
    Dataset::load(fixture("planted200.hgd.json")).expect("fixture loads")
}

/// Random hypergraph with every vertex in at least one edge.
pub fn random_hypergraph(rng: &mut ChaCha8Rng, n: usize, m: usize, max_size: usize) -> Hypergraph {
    let mut edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let k = rng.random_range(1..=max_size.min(n));
            sample(rng, n, k).into_vec()
        })
        .collect();
    let mut covered = vec![false; n];
    for e in &edges {
        for &v in e {
            covered[v] = true;
        }
    }
    for (v, c) in covered.iter().enumerate() {
        if !c {
            let j = rng.random_range(0..edges.len());
            edges[j].push(v);
        }
    }
    Hypergraph::from_edge_lists(&edges, n).expect("covered hypergraph validates")
}

pub fn random_features(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
    let data = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    FeatureMatrix::new(data).unwrap()
}

pub fn dense_incidence(hg: &Hypergraph) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(hg.n_vertices(), hg.n_edges());
    for (j, e) in hg.edges().iter().enumerate() {
        for &v in e {
            h[(v, j)] = 1.0;
        }
    }
    h
}

/// `D_V^{-1/2} H D_E^{-1/2}` (or `H` itself for the raw scale), built densely.
pub fn dense_scaled(hg: &Hypergraph, scale: IncidenceScale) -> DMatrix<f64> {
    let h = dense_incidence(hg);
    match scale {
        IncidenceScale::Raw => h,
        IncidenceScale::Normalized => {
            let dv: Vec<f64> = (0..h.nrows()).map(|i| h.row(i).sum()).collect();
            let de: Vec<f64> = (0..h.ncols()).map(|j| h.column(j).sum()).collect();
            DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] / (dv[i] * de[j]).sqrt())
        }
    }
}

pub fn to_dense(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn normalized(hg: &Hypergraph) -> NormalizedIncidence {
    NormalizedIncidence::new(hg, IncidenceScale::Normalized)
}

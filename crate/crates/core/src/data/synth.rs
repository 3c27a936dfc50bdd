//! Planted-partition hypergraphs with class-informative features.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::hypergraph::Hypergraph;
use crate::seeds;

/// Regeneration attempts before giving up on an instance with isolated vertices.
pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub m: usize,
    pub classes: usize,
    /// Probability that a member is drawn from the hyperedge's home class.
    pub homophily: f64,
    /// Standard deviation of the Gaussian noise added to the one-hot block.
    pub feature_noise: f64,
    /// Extra standard-normal feature columns carrying no class signal.
    pub noise_dims: usize,
    /// Hyperedge sizes are drawn uniformly from `[min_edge_size, max_edge_size]`
    /// before duplicates collapse.
    pub min_edge_size: usize,
    pub max_edge_size: usize,
    /// Labels are spread evenly over this interval by class index.
    pub label_min: f64,
    pub label_max: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 200,
            m: 150,
            classes: 2,
            homophily: 0.9,
            feature_noise: 0.5,
            noise_dims: 40,
            min_edge_size: 4,
            max_edge_size: 10,
            label_min: 0.0,
            label_max: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.n < self.classes {
            return bad(format!("n = {} is smaller than classes = {}", self.n, self.classes));
        }
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        if !(self.homophily > 0.5 && self.homophily <= 1.0) {
            return bad(format!("homophily must lie in (0.5, 1], got {}", self.homophily));
        }
        if !(self.feature_noise.is_finite() && self.feature_noise >= 0.0) {
            return bad(format!("feature_noise must be finite and >= 0, got {}", self.feature_noise));
        }
        if self.min_edge_size == 0 || self.min_edge_size > self.max_edge_size {
            return bad(format!(
                "edge size range [{}, {}] is empty",
                self.min_edge_size, self.max_edge_size
            ));
        }
        if !(self.label_min.is_finite() && self.label_max.is_finite() && self.label_min < self.label_max) {
            return bad(format!("label range [{}, {}] is empty", self.label_min, self.label_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub dataset: Dataset,
    pub vertex_class: Vec<usize>,
    /// Home class of each hyperedge.
    pub edge_class: Vec<usize>,
}

impl Planted {
    /// Fraction of incidences whose vertex belongs to the hyperedge's home class.
    pub fn within_class_fraction(&self) -> f64 {
        let hg = self.dataset.hypergraph();
        let mut hits = 0usize;
        for (e, members) in hg.edges().iter().enumerate() {
            hits += members.iter().filter(|&&v| self.vertex_class[v] == self.edge_class[e]).count();
        }
        hits as f64 / hg.incidence_count() as f64
    }
}

/// Generates a planted-partition dataset.
///
/// Each vertex gets a class from a shuffled balanced assignment. Each
/// hyperedge picks a home class and draws every member from that class with
/// probability `homophily`, otherwise from the other classes. Vertex
/// features are a one-hot class block plus noise, followed by `noise_dims`
/// pure-noise columns, all column-normalized; hyperedge features are member
/// means, column-normalized.
pub fn synth_planted(cfg: &SynthConfig) -> Result<Planted> {
    cfg.validate()?;
    let mut rng = seeds::rng(seeds::derive(cfg.seed, seeds::Stream::Synth, 0));

    let mut vertex_class: Vec<usize> = (0..cfg.n).map(|v| v % cfg.classes).collect();
    vertex_class.shuffle(&mut rng);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); cfg.classes];
    for (v, &c) in vertex_class.iter().enumerate() {
        by_class[c].push(v);
    }
    let others: Vec<Vec<usize>> = (0..cfg.classes)
        .map(|c| (0..cfg.n).filter(|&v| vertex_class[v] != c).collect())
        .collect();

    let mut attempt = 0;
    let (hg, edge_class) = loop {
        attempt += 1;
        let mut edges = Vec::with_capacity(cfg.m);
        let mut homes = Vec::with_capacity(cfg.m);
        for _ in 0..cfg.m {
            let home = rng.random_range(0..cfg.classes);
            let size = rng.random_range(cfg.min_edge_size..=cfg.max_edge_size);
            let members: Vec<usize> = (0..size)
                .map(|_| {
                    let pool = if rng.random::<f64>() < cfg.homophily {
                        &by_class[home]
                    } else {
                        &others[home]
                    };
                    pool[rng.random_range(0..pool.len())]
                })
                .collect();
            edges.push(members);
            homes.push(home);
        }
        match Hypergraph::from_edge_lists(&edges, cfg.n) {
            Ok(hg) => break (hg, homes),
            Err(Error::IsolatedVertex { .. }) if attempt < MAX_ATTEMPTS => continue,
            Err(Error::IsolatedVertex { .. }) => return Err(Error::DegenerateInstance { attempts: attempt }),
            Err(e) => return Err(e),
        }
    };
    if attempt > 1 {
        log::debug!("planted instance accepted after {attempt} attempts");
    }

    let dim = cfg.classes + cfg.noise_dims;
    let mut xv = Array2::<f64>::zeros((cfg.n, dim));
    for v in 0..cfg.n {
        for k in 0..cfg.classes {
            let onehot = if vertex_class[v] == k { 1.0 } else { 0.0 };
            let z: f64 = StandardNormal.sample(&mut rng);
            xv[[v, k]] = onehot + cfg.feature_noise * z;
        }
        for k in cfg.classes..dim {
            xv[[v, k]] = StandardNormal.sample(&mut rng);
        }
    }
    let x_v = FeatureMatrix::new(xv)?.column_normalize()?;

    let span = cfg.label_max - cfg.label_min;
    let labels = vertex_class
        .iter()
        .map(|&c| Some(cfg.label_min + span * c as f64 / (cfg.classes - 1) as f64))
        .collect();
    let name = format!("planted-n{}-m{}-seed{}", cfg.n, cfg.m, cfg.seed);
    let dataset = Dataset::with_mean_edge_features(name, hg, x_v, labels)?;
    Ok(Planted {
        dataset,
        vertex_class,
        edge_class,
    })
}

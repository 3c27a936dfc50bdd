//! Run configuration: defaults, config files and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use hcon::data::{Dataset, SynthConfig};
use hcon::experiments::{ExperimentConfig, SplitSpec};
use hcon::{Activation, IncidenceScale, Loss};
use serde::{Deserialize, Serialize};

/// Every setting a command can read. Serialized verbatim into output
/// metadata so any output file can be fed back through `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset file; a planted instance from `synth` is generated when absent.
    pub dataset: Option<PathBuf>,
    pub synth: SynthConfig,
    pub activation: String,
    pub loss: String,
    pub alpha: f64,
    /// alpha grid for gap sweeps; `[alpha]` when empty.
    pub alphas: Vec<f64>,
    pub eta: f64,
    /// eta grid for gap sweeps; `[eta]` when empty.
    pub etas: Vec<f64>,
    pub iterations: usize,
    pub epochs: usize,
    pub init_scale: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub delta: f64,
    pub normalization: IncidenceScale,
    pub test_fraction: f64,
    pub train_fractions: Vec<f64>,
    /// Train fraction for single-split commands (`train`, `epochs`, `norm-compare`).
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Training-set size for `bounds` and `stability`.
    pub train_size: usize,
    pub probes: usize,
    /// Use this g_max in `bounds` instead of computing it from a dataset.
    pub g_max: Option<f64>,
    /// Column-normalize X_V after loading.
    pub normalize_vertex_features: bool,
    /// Column-normalize X_E after loading.
    pub normalize_edge_features: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        let s = SplitSpec::default();
        Self {
            dataset: None,
            synth: SynthConfig::default(),
            activation: Activation::Sigmoid.to_string(),
            loss: Loss::Squared { y_min: 0.0, y_max: 1.0 }.to_string(),
            alpha: e.alpha,
            alphas: Vec::new(),
            eta: e.eta,
            etas: Vec::new(),
            iterations: e.iterations,
            epochs: e.epochs,
            init_scale: e.init_scale,
            trials: e.trials,
            master_seed: e.master_seed,
            delta: e.delta,
            normalization: e.normalization,
            test_fraction: s.test_fraction,
            train_fractions: s.train_fractions,
            train_fraction: 0.5,
            split_seed: s.split_seed,
            train_size: 100,
            probes: 50,
            g_max: None,
            normalize_vertex_features: false,
            normalize_edge_features: false,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config or the `# config=` line of a results CSV.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let json = if text.starts_with('#') {
            text.lines()
                .take_while(|l| l.starts_with('#'))
                .find_map(|l| l.trim_start_matches('#').trim_start().strip_prefix("config="))
                .with_context(|| format!("{} has no `# config=` line", path.display()))?
                .to_string()
        } else {
            text
        };
        serde_json::from_str(&json).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn activation(&self) -> anyhow::Result<Activation> {
        Ok(self.activation.parse()?)
    }

    pub fn loss(&self) -> anyhow::Result<Loss> {
        Ok(self.loss.parse()?)
    }

    pub fn experiment(&self) -> anyhow::Result<ExperimentConfig> {
        let e = ExperimentConfig {
            alpha: self.alpha,
            eta: self.eta,
            iterations: self.iterations,
            epochs: self.epochs,
            init_scale: self.init_scale,
            trials: self.trials,
            master_seed: self.master_seed,
            delta: self.delta,
            normalization: self.normalization,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.test_fraction,
            train_fractions: self.train_fractions.clone(),
            split_seed: self.split_seed,
        }
    }

    pub fn single_split(&self) -> SplitSpec {
        SplitSpec {
            train_fractions: vec![self.train_fraction],
            ..self.split()
        }
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        if self.alphas.is_empty() {
            vec![self.alpha]
        } else {
            self.alphas.clone()
        }
    }

    pub fn eta_grid(&self) -> Vec<f64> {
        if self.etas.is_empty() {
            vec![self.eta]
        } else {
            self.etas.clone()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let act = self.activation()?;
        let loss = self.loss()?;
        act.validate()?;
        loss.validate()?;
        self.experiment()?;
        self.split().validate()?;
        self.single_split().validate()?;
        for &a in &self.alpha_grid() {
            if !(0.0..=1.0).contains(&a) {
                bail!("alpha must lie in [0, 1], got {a}");
            }
        }
        for &e in &self.eta_grid() {
            if !(e.is_finite() && e >= 0.0) {
                bail!("eta must be finite and >= 0, got {e}");
            }
        }
        if let Some(g) = self.g_max {
            if !(g.is_finite() && g >= 0.0) {
                bail!("g_max must be finite and >= 0, got {g}");
            }
        }
        if self.dataset.is_none() {
            self.synth.validate()?;
        }
        Ok(())
    }

    /// The configured dataset file, or the planted instance.
    pub fn dataset(&self) -> anyhow::Result<Dataset> {
        let ds = match &self.dataset {
            Some(p) => Dataset::load(p).with_context(|| format!("loading dataset {}", p.display()))?,
            None => hcon::data::synth_planted(&self.synth)?.dataset,
        };
        Ok(ds.normalize_features(self.normalize_vertex_features, self.normalize_edge_features)?)
    }
}

/// Comma-separated reals given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

fn parse_list(s: &str) -> Result<FloatList, String> {
    if s.trim().is_empty() {
        return Ok(FloatList(Vec::new()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()
        .map(FloatList)
}

/// Flags mirroring [`RunConfig`]; any flag given overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file, or a results CSV whose metadata echoes a config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset file (.hgd.json).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// sigmoid | tanh | elu | smoothed_relu:EPS
    #[arg(long, global = true)]
    pub activation: Option<String>,
    /// squared:MIN:MAX | clipped_bce:CLIP
    #[arg(long, global = true)]
    pub loss: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Comma-separated alpha grid.
    #[arg(long, global = true, value_parser = parse_list)]
    pub alphas: Option<FloatList>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Comma-separated eta grid.
    #[arg(long, global = true, value_parser = parse_list)]
    pub etas: Option<FloatList>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub init_scale: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub master_seed: Option<u64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// normalized | raw
    #[arg(long, global = true)]
    pub normalization: Option<IncidenceScale>,
    #[arg(long, global = true)]
    pub test_fraction: Option<f64>,
    /// Comma-separated train fractions.
    #[arg(long, global = true, value_parser = parse_list)]
    pub train_fractions: Option<FloatList>,
    #[arg(long, global = true)]
    pub train_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub split_seed: Option<u64>,
    #[arg(long, global = true)]
    pub train_size: Option<usize>,
    #[arg(long, global = true)]
    pub probes: Option<usize>,
    #[arg(long, global = true)]
    pub g_max: Option<f64>,
    /// true | false
    #[arg(long, global = true)]
    pub normalize_vertex_features: Option<bool>,
    /// true | false
    #[arg(long, global = true)]
    pub normalize_edge_features: Option<bool>,
    #[arg(long, global = true)]
    pub synth_n: Option<usize>,
    #[arg(long, global = true)]
    pub synth_m: Option<usize>,
    #[arg(long, global = true)]
    pub classes: Option<usize>,
    #[arg(long, global = true)]
    pub homophily: Option<f64>,
    #[arg(long, global = true)]
    pub feature_noise: Option<f64>,
    #[arg(long, global = true)]
    pub noise_dims: Option<usize>,
    #[arg(long, global = true)]
    pub min_edge_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_edge_size: Option<usize>,
    #[arg(long, global = true)]
    pub synth_seed: Option<u64>,
}

macro_rules! apply {
    ($src:expr, $dst:expr; $($field:ident),* $(,)?) => {
        $( if let Some(v) = $src.$field.clone() { $dst.$field = v; } )*
    };
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.dataset.is_some() {
            c.dataset = self.dataset.clone();
        }
        if self.g_max.is_some() {
            c.g_max = self.g_max;
        }
        apply!(self, c; activation, loss, alpha, eta, iterations, epochs, init_scale, trials,
            master_seed, delta, normalization, test_fraction, train_fraction, split_seed, train_size, probes,
            normalize_vertex_features, normalize_edge_features);
        for (flag, field) in [
            (&self.alphas, &mut c.alphas),
            (&self.etas, &mut c.etas),
            (&self.train_fractions, &mut c.train_fractions),
        ] {
            if let Some(FloatList(v)) = flag {
                *field = v.clone();
            }
        }
        let s = &mut c.synth;
        macro_rules! synth {
            ($($flag:ident => $field:ident),*) => { $( if let Some(v) = self.$flag { s.$field = v; } )* };
        }
        synth!(synth_n => n, synth_m => m, classes => classes, homophily => homophily,
            feature_noise => feature_noise, noise_dims => noise_dims, min_edge_size => min_edge_size,
            max_edge_size => max_edge_size, synth_seed => seed);
        c.validate()?;
        Ok(c)
    }
}

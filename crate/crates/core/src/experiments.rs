//! Stability and generalization-gap experiments.
//!
//! The data distribution is taken to be uniform over the labeled vertices;
//! test loss is the exact mean over the held-out vertices. Expectations over
//! the SGD randomization are estimated by averaging `trials` runs whose
//! initialization and sample order come from per-trial seeds derived from
//! the master seed (see [`crate::seeds`]). Trial `r` uses the same seeds and
//! the same split in every grid cell, so cells are compared on common random
//! numbers. Trials run in parallel; aggregation happens afterwards in grid
//! order, so thread count never changes the output.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gap_bound, kappa, kappa0, BoundInputs};
use crate::data::{CsvRecord, Dataset};
use crate::error::{Error, Result};
use crate::hypergraph::{IncidenceScale, NormalizedIncidence};
use crate::model::{Theta, VertexContext};
use crate::regularity::{Activation, Loss, RegularityConstants};
use crate::seeds::{self, Stream};
use crate::trainer::{
    draw_randomization, init_params, paired_train, sgd_train_observed, PairedChecks, Sample, SgdConfig,
    TrainingSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub eta: f64,
    /// SGD steps `T` for stability and gap experiments.
    pub iterations: usize,
    /// Epochs for trace experiments; one epoch is `n` steps.
    pub epochs: usize,
    pub init_scale: f64,
    /// Randomizations `R` averaged per cell.
    pub trials: usize,
    pub master_seed: u64,
    pub delta: f64,
    pub normalization: IncidenceScale,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            eta: 0.01,
            iterations: 200,
            epochs: 200,
            init_scale: 0.1,
            trials: 10,
            master_seed: 0,
            delta: 0.05,
            normalization: IncidenceScale::Normalized,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        self.sgd(self.iterations).validate()
    }

    pub fn sgd(&self, iterations: usize) -> SgdConfig {
        SgdConfig {
            eta: self.eta,
            iterations,
            init_seed: 0,
            init_scale: self.init_scale,
            record_trajectory: false,
        }
    }
}

/// Init and order seeds of trial `r`.
pub fn trial_seeds(master: u64, r: usize) -> (u64, u64) {
    (
        seeds::derive(master, Stream::Init, r as u64),
        seeds::derive(master, Stream::Order, r as u64),
    )
}

pub fn build_context(ds: &Dataset, alpha: f64, scale: IncidenceScale) -> Result<VertexContext> {
    let ni = NormalizedIncidence::new(ds.hypergraph(), scale);
    VertexContext::build(&ni, ds.vertex_features(), ds.edge_features(), alpha)
}

fn bound_inputs(ctx: &VertexContext, act: Activation, loss: Loss, eta: f64, iterations: usize, n: usize, delta: f64) -> BoundInputs {
    BoundInputs {
        constants: RegularityConstants::new(act, loss),
        g_max: ctx.g_max(),
        eta,
        iterations: iterations as u64,
        n,
        delta,
    }
}

/// Replaces position `i_star` of `s`.
pub fn perturb(s: &TrainingSet, i_star: usize, replacement: Sample) -> Result<TrainingSet> {
    let original = s.get(i_star).ok_or(Error::VertexOutOfRange {
        vertex: i_star,
        len: s.len(),
    })?;
    if original.same_as(&replacement) {
        return Err(Error::SameSample(i_star));
    }
    let mut samples = s.samples().to_vec();
    samples[i_star] = replacement;
    TrainingSet::new(samples)
}

// ---------------------------------------------------------------------------
// Splits

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub train_fractions: Vec<f64>,
    pub split_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            train_fractions: vec![0.3, 0.4, 0.5, 0.6, 0.7],
            split_seed: 0,
        }
    }
}

/// One shuffled partition of the labeled pool: a test block and the
/// remaining vertices, whose prefixes are the training sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub test: Vec<usize>,
    pub rest: Vec<usize>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.train_fractions.is_empty() {
            return Err(Error::InvalidParameter("train_fractions must be non-empty".into()));
        }
        if let Some(f) = self.train_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::InvalidParameter(format!("train fraction {f} outside (0, 1]")));
        }
        Ok(())
    }

    /// `(test size, train sizes)` for a pool of `pool` vertices.
    pub fn sizes(&self, pool: usize) -> Result<(usize, Vec<usize>)> {
        self.validate()?;
        let test = ((self.test_fraction * pool as f64).round() as usize).max(1);
        if test >= pool {
            return Err(Error::InvalidParameter(format!(
                "labeled pool of {pool} vertices leaves nothing to train on"
            )));
        }
        let available = pool - test;
        let train = self
            .train_fractions
            .iter()
            .map(|f| ((f * pool as f64).round() as usize).clamp(1, available))
            .collect();
        Ok((test, train))
    }

    /// Split used by trial `r`.
    pub fn draw(&self, pool: &[usize], r: usize) -> Result<Split> {
        let (test, _) = self.sizes(pool.len())?;
        let mut perm = pool.to_vec();
        perm.shuffle(&mut seeds::rng(seeds::derive(self.split_seed, Stream::Split, r as u64)));
        let rest = perm.split_off(test);
        Ok(Split { test: perm, rest })
    }
}

// ---------------------------------------------------------------------------
// Single trials

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialLosses {
    pub train: f64,
    pub test: f64,
}

impl TrialLosses {
    pub fn gap(&self) -> f64 {
        self.test - self.train
    }
}

fn mean_loss(ctx: &VertexContext, theta: &Theta, samples: &[Sample], act: Activation, loss: Loss) -> Result<f64> {
    ctx.mean_loss(theta, samples.iter().map(|s| (s.vertex, s.label)), act, loss)
}

/// Trains `iterations` steps from the trial's seeds, calling `observe` with
/// `(step, theta)` at step 0 and after every step. `Ok(None)` means the run
/// diverged.
#[allow(clippy::too_many_arguments)]
fn run_sgd<F>(
    ctx: &VertexContext,
    train: &TrainingSet,
    cfg: &ExperimentConfig,
    iterations: usize,
    r: usize,
    act: Activation,
    loss: Loss,
    mut observe: F,
) -> Result<Option<Theta>>
where
    F: FnMut(usize, &Theta) -> Result<()>,
{
    let (init_seed, order_seed) = trial_seeds(cfg.master_seed, r);
    let theta0 = init_params(ctx.vertex_dim(), ctx.edge_dim(), 1, init_seed, cfg.init_scale)?;
    let order = draw_randomization(train.len(), iterations, order_seed)?;
    observe(0, &theta0)?;
    match sgd_train_observed(ctx, &theta0, train, &order, &cfg.sgd(iterations), act, loss, observe) {
        Ok(theta) => Ok(Some(theta)),
        Err(Error::NonFiniteParameter { step }) => {
            log::warn!("trial {r} diverged at step {step}; excluded");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Final train and test loss of trial `r`, or `None` if it diverged.
/// Passing the same samples as train and test yields a gap of exactly 0.
#[allow(clippy::too_many_arguments)]
pub fn trial_losses(
    ctx: &VertexContext,
    train: &TrainingSet,
    test: &[Sample],
    cfg: &ExperimentConfig,
    iterations: usize,
    r: usize,
    act: Activation,
    loss: Loss,
) -> Result<Option<TrialLosses>> {
    if test.is_empty() {
        return Err(Error::InvalidParameter("test set is empty".into()));
    }
    let theta = match run_sgd(ctx, train, cfg, iterations, r, act, loss, |_, _| Ok(()))? {
        Some(t) => t,
        None => return Ok(None),
    };
    Ok(Some(TrialLosses {
        train: mean_loss(ctx, &theta, train.samples(), act, loss)?,
        test: mean_loss(ctx, &theta, test, act, loss)?,
    }))
}

fn samples_of(ds: &Dataset, vertices: &[usize]) -> Result<Vec<Sample>> {
    vertices.iter().map(|&v| ds.sample(v)).collect()
}

// ---------------------------------------------------------------------------
// Gap experiments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub n: usize,
    pub alpha: f64,
    pub eta: f64,
    pub normalization: IncidenceScale,
    pub trials: usize,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub train_loss_mean: f64,
    pub test_loss_mean: f64,
    pub kappa: f64,
    pub theoretical_bound: f64,
    pub failed_trials: usize,
}

impl CsvRecord for GapRecord {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "alpha",
        "eta",
        "normalization",
        "trials",
        "gap_mean",
        "gap_std",
        "train_loss_mean",
        "test_loss_mean",
        "kappa",
        "theoretical_bound",
        "failed_trials",
    ];
}

impl GapRecord {
    /// True when a finite bound lies below the measured mean gap.
    pub fn violates_bound(&self) -> bool {
        self.theoretical_bound.is_finite() && self.gap_mean > self.theoretical_bound
    }
}

/// Mean and sample standard deviation; `(NaN, NaN)` when empty.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Gap at `T = cfg.iterations` for every `(alpha, eta, train fraction)`,
/// emitted with `alpha` outermost and the train fraction innermost.
pub fn gap_experiment(
    ds: &Dataset,
    split: &SplitSpec,
    alphas: &[f64],
    etas: &[f64],
    cfg: &ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> Result<Vec<GapRecord>> {
    cfg.validate()?;
    if alphas.is_empty() || etas.is_empty() {
        return Err(Error::InvalidParameter("alpha and eta grids must be non-empty".into()));
    }
    ds.check_labels(loss)?;
    let pool = ds.labeled_vertices();
    let (_, sizes) = split.sizes(pool.len())?;
    let contexts = alphas
        .iter()
        .map(|&a| build_context(ds, a, cfg.normalization))
        .collect::<Result<Vec<_>>>()?;
    let splits = (0..cfg.trials)
        .map(|r| {
            let sp = split.draw(&pool, r)?;
            Ok((samples_of(ds, &sp.rest)?, samples_of(ds, &sp.test)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (ai, _) in alphas.iter().enumerate() {
        for &eta in etas {
            let c = ExperimentConfig { eta, ..*cfg };
            c.validate()?;
            for &n in &sizes {
                cells.push((ai, c, n));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |r| (c, r))).collect();
    let results = jobs
        .par_iter()
        .map(|&(ci, r)| {
            let (ai, c, n) = cells[ci];
            let (rest, test) = &splits[r];
            let train = TrainingSet::new(rest[..n].to_vec())?;
            trial_losses(&contexts[ai], &train, test, &c, c.iterations, r, act, loss)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(cells.len());
    for (ci, chunk) in results.chunks(cfg.trials).enumerate() {
        let (ai, c, n) = cells[ci];
        let ok: Vec<TrialLosses> = chunk.iter().flatten().copied().collect();
        let gaps: Vec<f64> = ok.iter().map(TrialLosses::gap).collect();
        let (gap_mean, gap_std) = mean_std(&gaps);
        let (train_mean, _) = mean_std(&ok.iter().map(|t| t.train).collect::<Vec<_>>());
        let (test_mean, _) = mean_std(&ok.iter().map(|t| t.test).collect::<Vec<_>>());
        let b = bound_inputs(&contexts[ai], act, loss, c.eta, c.iterations, n, c.delta);
        let rec = GapRecord {
            n,
            alpha: alphas[ai],
            eta: c.eta,
            normalization: cfg.normalization,
            trials: cfg.trials,
            gap_mean,
            gap_std,
            train_loss_mean: train_mean,
            test_loss_mean: test_mean,
            kappa: kappa(&b),
            theoretical_bound: gap_bound(&b),
            failed_trials: chunk.len() - ok.len(),
        };
        if rec.violates_bound() {
            log::error!(
                "FALSIFIED: gap {} exceeds bound {} (n = {n}, alpha = {}, eta = {})",
                rec.gap_mean,
                rec.theoretical_bound,
                rec.alpha,
                rec.eta
            );
        }
        records.push(rec);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Epoch traces

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

impl CsvRecord for EpochTrace {
    const COLUMNS: &'static [&'static str] = &["epoch", "train_loss", "test_loss"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub normalization: IncidenceScale,
    pub n: usize,
    pub traces: Vec<EpochTrace>,
    pub failed_trials: usize,
    pub mu: f64,
    pub g_max: f64,
    pub kappa: f64,
    /// Gap bound at `T = epochs * n`.
    pub theoretical_bound: f64,
}

impl EpochReport {
    pub fn final_gap(&self) -> f64 {
        self.traces.last().map_or(f64::NAN, |t| t.test_loss - t.train_loss)
    }
}

fn single_fraction(split: &SplitSpec) -> Result<f64> {
    match split.train_fractions.as_slice() {
        [f] => Ok(*f),
        other => Err(Error::InvalidParameter(format!(
            "epoch traces take exactly one train fraction, got {}",
            other.len()
        ))),
    }
}

/// Per-epoch mean train and test loss over `cfg.trials` runs of
/// `cfg.epochs * n` steps. Epoch 0 is the initialization.
pub fn epoch_trace_experiment(
    ds: &Dataset,
    split: &SplitSpec,
    cfg: &ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> Result<EpochReport> {
    let ctx = build_context(ds, cfg.alpha, cfg.normalization)?;
    epoch_traces_with_context(ds, &ctx, split, cfg, act, loss)
}

fn epoch_traces_with_context(
    ds: &Dataset,
    ctx: &VertexContext,
    split: &SplitSpec,
    cfg: &ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> Result<EpochReport> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be >= 1".into()));
    }
    ds.check_labels(loss)?;
    let fraction = single_fraction(split)?;
    let pool = ds.labeled_vertices();
    let (_, sizes) = SplitSpec {
        train_fractions: vec![fraction],
        ..split.clone()
    }
    .sizes(pool.len())?;
    let n = sizes[0];
    let iterations = cfg.epochs * n;

    let runs = (0..cfg.trials)
        .into_par_iter()
        .map(|r| -> Result<Option<Vec<(f64, f64)>>> {
            let sp = split.draw(&pool, r)?;
            let train = TrainingSet::new(samples_of(ds, &sp.rest[..n])?)?;
            let test = samples_of(ds, &sp.test)?;
            let mut points = Vec::with_capacity(cfg.epochs + 1);
            let done = run_sgd(ctx, &train, cfg, iterations, r, act, loss, |step, theta| {
                if step % n == 0 {
                    points.push((
                        mean_loss(ctx, theta, train.samples(), act, loss)?,
                        mean_loss(ctx, theta, &test, act, loss)?,
                    ));
                }
                Ok(())
            })?;
            Ok(done.map(|_| points))
        })
        .collect::<Result<Vec<_>>>()?;

    let ok: Vec<&Vec<(f64, f64)>> = runs.iter().flatten().collect();
    let failed = runs.len() - ok.len();
    let traces = (0..=cfg.epochs)
        .map(|e| {
            let k = ok.len() as f64;
            let (tr, te) = if ok.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    ok.iter().map(|p| p[e].0).sum::<f64>() / k,
                    ok.iter().map(|p| p[e].1).sum::<f64>() / k,
                )
            };
            EpochTrace {
                epoch: e,
                train_loss: tr,
                test_loss: te,
            }
        })
        .collect();
    let b = bound_inputs(ctx, act, loss, cfg.eta, iterations, n, cfg.delta);
    Ok(EpochReport {
        normalization: ctx.scale(),
        n,
        traces,
        failed_trials: failed,
        mu: ctx.mu(),
        g_max: ctx.g_max(),
        kappa: kappa(&b),
        theoretical_bound: gap_bound(&b),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormComparison {
    pub normalized: EpochReport,
    pub raw: EpochReport,
}

/// Epoch traces with the normalized and the raw incidence under identical
/// seeds and splits.
pub fn normalization_comparison(
    ds: &Dataset,
    split: &SplitSpec,
    cfg: &ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> Result<NormComparison> {
    let run = |scale| {
        let ctx = build_context(ds, cfg.alpha, scale)?;
        epoch_traces_with_context(ds, &ctx, split, cfg, act, loss)
    };
    Ok(NormComparison {
        normalized: run(IncidenceScale::Normalized)?,
        raw: run(IncidenceScale::Raw)?,
    })
}

// ---------------------------------------------------------------------------
// Stability

/// A training set, the position to perturb, its replacement and the probe
/// points at which loss differences are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityInstance {
    pub train: TrainingSet,
    pub i_star: usize,
    pub replacement: Sample,
    pub probes: Vec<Sample>,
}

/// Draws a training set of `n` labeled vertices, a held-out replacement for
/// a random position and up to `n_probes` probes from the labeled pool.
pub fn stability_instance(ds: &Dataset, n: usize, n_probes: usize, seed: u64) -> Result<StabilityInstance> {
    let pool = ds.labeled_vertices();
    if n == 0 || n >= pool.len() {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n < {} labeled vertices, got n = {n}",
            pool.len()
        )));
    }
    let mut perm = pool.clone();
    perm.shuffle(&mut seeds::rng(seeds::derive(seed, Stream::Split, 0)));
    let train = ds.training_set(&perm[..n])?;
    let replacement = ds.sample(perm[n])?;
    let i_star = {
        use rand::Rng;
        seeds::rng(seeds::derive(seed, Stream::Replacement, 0)).random_range(0..n)
    };
    let mut probes = pool;
    probes.shuffle(&mut seeds::rng(seeds::derive(seed, Stream::Probe, 0)));
    probes.truncate(n_probes.max(1));
    Ok(StabilityInstance {
        train,
        i_star,
        replacement,
        probes: samples_of(ds, &probes)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub trials: usize,
    pub iterations: usize,
    /// `max_probe |mean_r (loss(theta_T) - loss(theta'_T))|`.
    pub empirical: f64,
    pub per_probe: Vec<f64>,
    pub kappa: f64,
    /// `kappa / n`.
    pub stability_bound: f64,
    pub mean_final_delta: f64,
    pub kappa0: f64,
    /// `kappa0 / n`.
    pub drift_bound: f64,
    pub checks: PairedChecks,
}

impl StabilityReport {
    pub fn margin(&self) -> f64 {
        self.stability_bound - self.empirical
    }

    pub fn drift_margin(&self) -> f64 {
        self.drift_bound - self.mean_final_delta
    }
}

/// Paired runs on `S` and `S'` over `cfg.trials` randomizations.
pub fn stability_trial(
    ctx: &VertexContext,
    inst: &StabilityInstance,
    cfg: &ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> Result<StabilityReport> {
    cfg.validate()?;
    if !loss.smooth_over(act) {
        log::warn!("{act} maps outside the smooth range of {loss}; the same-sample inequality may not hold");
    }
    let s_prime = perturb(&inst.train, inst.i_star, inst.replacement)?;
    let n = inst.train.len();
    let sgd = cfg.sgd(cfg.iterations);
    let runs = (0..cfg.trials)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, f64, PairedChecks)> {
            let (init_seed, order_seed) = trial_seeds(cfg.master_seed, r);
            let theta0 = init_params(ctx.vertex_dim(), ctx.edge_dim(), 1, init_seed, cfg.init_scale)?;
            let order = draw_randomization(n, cfg.iterations, order_seed)?;
            let run = paired_train(ctx, &theta0, &inst.train, &s_prime, &order, &sgd, act, loss)?;
            let diffs = inst
                .probes
                .iter()
                .map(|p| {
                    let a = loss.value(ctx.predict(&run.theta, p.vertex, act)?, p.label)?;
                    let b = loss.value(ctx.predict(&run.theta_prime, p.vertex, act)?, p.label)?;
                    Ok(a - b)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((diffs, run.final_delta(), run.checks))
        })
        .collect::<Result<Vec<_>>>()?;

    let k = cfg.trials as f64;
    let per_probe: Vec<f64> = (0..inst.probes.len())
        .map(|j| runs.iter().map(|(d, _, _)| d[j]).sum::<f64>() / k)
        .collect();
    let empirical = per_probe.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mean_final_delta = runs.iter().map(|(_, d, _)| d).sum::<f64>() / k;
    let mut checks = PairedChecks::default();
    for (_, _, c) in &runs {
        checks.merge(c);
    }
    let b = bound_inputs(ctx, act, loss, cfg.eta, cfg.iterations, n, cfg.delta);
    let (k0, kap) = (kappa0(&b), kappa(&b));
    Ok(StabilityReport {
        n,
        trials: cfg.trials,
        iterations: cfg.iterations,
        empirical,
        per_probe,
        kappa: kap,
        stability_bound: kap / n as f64,
        mean_final_delta,
        kappa0: k0,
        drift_bound: k0 / n as f64,
        checks,
    })
}

// ---------------------------------------------------------------------------
// Expected gap over resampled training sets

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub n: usize,
    pub resamples: usize,
    pub failed: usize,
    pub mean_gap: f64,
    pub std_error: f64,
    pub kappa_over_n: f64,
}

impl SpotCheck {
    /// `mean_gap <= kappa / n + 2 SE`.
    pub fn passes(&self) -> bool {
        self.mean_gap <= self.kappa_over_n + 2.0 * self.std_error
    }
}

/// Average gap over `resamples` training sets of size `n` drawn from the
/// labeled pool; the rest of the pool is the test set.
pub fn expected_gap_spot_check(
    ds: &Dataset,
    n: usize,
    resamples: usize,
    cfg: &ExperimentConfig,
    act: Activation,
    loss: Loss,
) -> Result<SpotCheck> {
    cfg.validate()?;
    ds.check_labels(loss)?;
    let pool = ds.labeled_vertices();
    if n == 0 || n >= pool.len() || resamples == 0 {
        return Err(Error::InvalidParameter(format!(
            "spot check needs 1 <= n < {} and resamples >= 1",
            pool.len()
        )));
    }
    let ctx = build_context(ds, cfg.alpha, cfg.normalization)?;
    let gaps = (0..resamples)
        .into_par_iter()
        .map(|s| -> Result<Option<f64>> {
            let mut perm = pool.clone();
            perm.shuffle(&mut seeds::rng(seeds::derive(cfg.master_seed, Stream::Split, s as u64)));
            let train = ds.training_set(&perm[..n])?;
            let test = samples_of(ds, &perm[n..])?;
            Ok(trial_losses(&ctx, &train, &test, cfg, cfg.iterations, s, act, loss)?.map(|t| t.gap()))
        })
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<f64> = gaps.iter().flatten().copied().collect();
    let (mean, std) = mean_std(&ok);
    let b = bound_inputs(&ctx, act, loss, cfg.eta, cfg.iterations, n, cfg.delta);
    Ok(SpotCheck {
        n,
        resamples,
        failed: gaps.len() - ok.len(),
        mean_gap: mean,
        std_error: std / (ok.len() as f64).sqrt(),
        kappa_over_n: kappa(&b) / n as f64,
    })
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

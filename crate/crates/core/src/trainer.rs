//! Single-sample SGD on the vertex encoder and the paired-run machinery used
//! to measure parameter drift between training sets that differ in one sample.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{same_sample_constant, different_sample_constant};
use crate::error::{Error, Result};
use crate::model::{axpy_row, Theta, VertexContext};
use crate::regularity::{Activation, Loss, RegularityConstants};
use crate::seeds;

/// Absolute slack allowed on every per-step inequality check.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub vertex: usize,
    pub label: f64,
}

impl Sample {
    pub fn new(vertex: usize, label: f64) -> Self {
        Self { vertex, label }
    }

    /// Bitwise comparison, so `-0.0` and `0.0` labels count as different.
    pub fn same_as(&self, other: &Sample) -> bool {
        self.vertex == other.vertex && self.label.to_bits() == other.label.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    samples: Vec<Sample>,
}

impl TrainingSet {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("training set must be non-empty".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Sample> {
        self.samples.get(i)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.samples.iter().map(|s| (s.vertex, s.label))
    }

    pub fn validate_for(&self, ctx: &VertexContext, loss: Loss) -> Result<()> {
        for s in &self.samples {
            if s.vertex >= ctx.n_vertices() {
                return Err(Error::VertexOutOfRange {
                    vertex: s.vertex,
                    len: ctx.n_vertices(),
                });
            }
            loss.check_label(s.label)?;
        }
        Ok(())
    }

    /// Positions where `self` and `other` differ.
    pub fn differing_positions(&self, other: &TrainingSet) -> Vec<usize> {
        self.samples
            .iter()
            .zip(&other.samples)
            .enumerate()
            .filter(|(_, (a, b))| !a.same_as(b))
            .map(|(i, _)| i)
            .collect()
    }
}

/// The SGD sample order `(i_1, ..., i_T)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Randomization {
    pub seed: u64,
    pub sequence: Vec<usize>,
}

impl Randomization {
    pub fn from_sequence(seed: u64, sequence: Vec<usize>) -> Self {
        Self { seed, sequence }
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

/// `T` indices drawn uniformly with replacement from `[0, n)`.
pub fn draw_randomization(n: usize, iterations: usize, seed: u64) -> Result<Randomization> {
    if n == 0 {
        return Err(Error::InvalidParameter("cannot sample from an empty training set".into()));
    }
    let mut rng = seeds::rng(seed);
    let sequence = (0..iterations).map(|_| rng.random_range(0..n)).collect();
    Ok(Randomization { seed, sequence })
}

/// Parameters drawn i.i.d. uniform on `[-scale, scale]`.
pub fn init_params(first: usize, second: usize, outputs: usize, seed: u64, scale: f64) -> Result<Theta> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidParameter(format!("init scale must be finite and >= 0, got {scale}")));
    }
    let len = (first + second) * outputs;
    if scale == 0.0 {
        return Ok(Theta::zeros(first, second, outputs));
    }
    let mut rng = seeds::rng(seed);
    let data = (0..len).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    Theta::from_vec(first, second, outputs, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub eta: f64,
    pub iterations: usize,
    pub init_seed: u64,
    pub init_scale: f64,
    #[serde(default)]
    pub record_trajectory: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            eta: 0.01,
            iterations: 200,
            init_seed: 0,
            init_scale: 0.1,
            record_trajectory: false,
        }
    }
}

impl SgdConfig {
    /// `eta = 0` and `init_scale = 0` are accepted for degenerate checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "init_scale must be finite and >= 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub theta: Theta,
    /// `theta_1, ..., theta_T` when requested.
    pub trajectory: Option<Vec<Theta>>,
}

fn check_inputs(
    ctx: &VertexContext,
    theta0: &Theta,
    s: &TrainingSet,
    a: &Randomization,
    cfg: &SgdConfig,
    loss: Loss,
) -> Result<()> {
    cfg.validate()?;
    if a.len() != cfg.iterations {
        return Err(Error::DimensionMismatch {
            what: "randomization length vs iterations",
            expected: cfg.iterations,
            got: a.len(),
        });
    }
    if let Some(&bad) = a.sequence.iter().find(|&&i| i >= s.len()) {
        return Err(Error::InvalidParameter(format!(
            "randomization index {bad} outside training set of size {}",
            s.len()
        )));
    }
    if theta0.outputs() != 1 {
        return Err(Error::UnsupportedOutputDim(theta0.outputs()));
    }
    if theta0.first_rows() != ctx.vertex_dim() || theta0.second_rows() != ctx.edge_dim() {
        return Err(Error::DimensionMismatch {
            what: "theta rows",
            expected: ctx.vertex_dim() + ctx.edge_dim(),
            got: theta0.first_rows() + theta0.second_rows(),
        });
    }
    s.validate_for(ctx, loss)
}

#[inline]
fn coefficient(ctx: &VertexContext, theta: &Theta, s: &Sample, act: Activation, loss: Loss) -> Result<f64> {
    let d = ctx.preactivation_scalar(theta.as_slice(), s.vertex);
    Ok(loss.deriv(act.value(d), s.label)? * act.deriv(d))
}

/// Runs SGD and calls `observe(step, theta_step)` after every update
/// (`step` counts from 1).
#[allow(clippy::too_many_arguments)]
pub fn sgd_train_observed<F>(
    ctx: &VertexContext,
    theta0: &Theta,
    s: &TrainingSet,
    a: &Randomization,
    cfg: &SgdConfig,
    act: Activation,
    loss: Loss,
    mut observe: F,
) -> Result<Theta>
where
    F: FnMut(usize, &Theta) -> Result<()>,
{
    check_inputs(ctx, theta0, s, a, cfg, loss)?;
    let mut theta = theta0.clone();
    for (t, &i) in a.sequence.iter().enumerate() {
        let sample = &s.samples[i];
        let coef = coefficient(ctx, &theta, sample, act, loss)?;
        axpy_row(&mut theta, ctx, sample.vertex, cfg.eta * coef);
        if !theta.is_finite() {
            return Err(Error::NonFiniteParameter { step: t + 1 });
        }
        observe(t + 1, &theta)?;
    }
    Ok(theta)
}

pub fn sgd_train(
    ctx: &VertexContext,
    theta0: &Theta,
    s: &TrainingSet,
    a: &Randomization,
    cfg: &SgdConfig,
    act: Activation,
    loss: Loss,
) -> Result<TrainOutcome> {
    let mut trajectory = cfg.record_trajectory.then(|| Vec::with_capacity(cfg.iterations));
    let theta = sgd_train_observed(ctx, theta0, s, a, cfg, act, loss, |_, th| {
        if let Some(tr) = trajectory.as_mut() {
            tr.push(th.clone());
        }
        Ok(())
    })?;
    Ok(TrainOutcome { theta, trajectory })
}

/// Counters for the per-step inequalities checked during a paired run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedChecks {
    pub steps: usize,
    /// Steps where both runs drew the same sample (`i_t != i*`).
    pub same_sample_checks: usize,
    pub same_sample_violations: usize,
    /// Largest `lhs - rhs` seen for the same-sample inequality.
    pub same_sample_worst_excess: f64,
    pub different_sample_checks: usize,
    pub different_sample_violations: usize,
    /// Per-sample gradient norms above `alpha_l alpha_s g_max`.
    pub grad_norm_violations: usize,
    pub recursion_violations: usize,
    pub recursion_worst_excess: f64,
    /// First step (1-based) at which the perturbed position was drawn.
    pub first_hit: Option<usize>,
}

impl PairedChecks {
    pub fn violations(&self) -> usize {
        self.same_sample_violations + self.different_sample_violations + self.grad_norm_violations + self.recursion_violations
    }

    pub fn merge(&mut self, other: &PairedChecks) {
        self.steps += other.steps;
        self.same_sample_checks += other.same_sample_checks;
        self.same_sample_violations += other.same_sample_violations;
        self.same_sample_worst_excess = self.same_sample_worst_excess.max(other.same_sample_worst_excess);
        self.different_sample_checks += other.different_sample_checks;
        self.different_sample_violations += other.different_sample_violations;
        self.grad_norm_violations += other.grad_norm_violations;
        self.recursion_violations += other.recursion_violations;
        self.recursion_worst_excess = self.recursion_worst_excess.max(other.recursion_worst_excess);
        self.first_hit = match (self.first_hit, other.first_hit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Debug, Clone)]
pub struct PairedRun {
    pub theta: Theta,
    pub theta_prime: Theta,
    /// `||dtheta_t||_2` for `t = 0..=T`.
    pub delta_norms: Vec<f64>,
    pub perturbed_index: usize,
    pub checks: PairedChecks,
}

impl PairedRun {
    pub fn final_delta(&self) -> f64 {
        *self.delta_norms.last().expect("delta trace holds t = 0")
    }
}

/// Locates the single position where two training sets differ.
pub fn unit_perturbation_index(s: &TrainingSet, s_prime: &TrainingSet) -> Result<usize> {
    let diff = s.differing_positions(s_prime);
    if s.len() != s_prime.len() || diff.len() != 1 {
        return Err(Error::NotAUnitPerturbation {
            differing: diff.len(),
            len_a: s.len(),
            len_b: s_prime.len(),
        });
    }
    Ok(diff[0])
}

/// Trains on `s` and `s_prime` in lockstep from the same `theta0` with the
/// same sample order, recording `||theta_t - theta'_t||` and checking the
/// per-step gradient-difference and drift-recursion inequalities against
/// the constants implied by `act`, `loss` and `ctx.g_max()`.
#[allow(clippy::too_many_arguments)]
pub fn paired_train(
    ctx: &VertexContext,
    theta0: &Theta,
    s: &TrainingSet,
    s_prime: &TrainingSet,
    a: &Randomization,
    cfg: &SgdConfig,
    act: Activation,
    loss: Loss,
) -> Result<PairedRun> {
    let i_star = unit_perturbation_index(s, s_prime)?;
    check_inputs(ctx, theta0, s, a, cfg, loss)?;
    s_prime.validate_for(ctx, loss)?;

    if !loss.smooth_over(act) {
        log::debug!("{act} maps outside the smooth range of {loss}; the same-sample inequality may not hold");
    }
    let consts = RegularityConstants::new(act, loss);
    let g_max = ctx.g_max();
    let c = same_sample_constant(&consts, g_max);
    let c_prime = different_sample_constant(&consts, g_max);
    let grad_cap = consts.alpha_ell * consts.alpha_sigma * g_max;
    let eta = cfg.eta;

    let mut theta = theta0.clone();
    let mut theta_p = theta0.clone();
    let mut deltas = Vec::with_capacity(a.len() + 1);
    deltas.push(0.0);
    let mut checks = PairedChecks::default();

    for (t, &i) in a.sequence.iter().enumerate() {
        let step = t + 1;
        let prev = *deltas.last().unwrap();
        let zs = &s.samples[i];
        let zp = &s_prime.samples[i];
        let coef = coefficient(ctx, &theta, zs, act, loss)?;
        let coef_p = coefficient(ctx, &theta_p, zp, act, loss)?;

        let norm_s = coef.abs() * ctx.row_norm(zs.vertex);
        let norm_p = coef_p.abs() * ctx.row_norm(zp.vertex);
        if norm_s > grad_cap + CHECK_TOL || norm_p > grad_cap + CHECK_TOL {
            checks.grad_norm_violations += 1;
        }

        let diff_norm = if i == i_star {
            checks.first_hit.get_or_insert(step);
            let rs = ctx.row(zs.vertex);
            let rp = ctx.row(zp.vertex);
            rs.iter()
                .zip(&rp)
                .map(|(x, y)| {
                    let d = coef * x - coef_p * y;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        } else {
            (coef - coef_p).abs() * ctx.row_norm(zs.vertex)
        };

        checks.different_sample_checks += 1;
        if diff_norm > 2.0 * grad_cap + CHECK_TOL {
            checks.different_sample_violations += 1;
        }
        if i != i_star {
            checks.same_sample_checks += 1;
            let excess = diff_norm - c * prev;
            checks.same_sample_worst_excess = checks.same_sample_worst_excess.max(excess);
            if excess > CHECK_TOL {
                checks.same_sample_violations += 1;
            }
        }

        axpy_row(&mut theta, ctx, zs.vertex, eta * coef);
        axpy_row(&mut theta_p, ctx, zp.vertex, eta * coef_p);
        if !theta.is_finite() || !theta_p.is_finite() {
            return Err(Error::NonFiniteParameter { step });
        }

        let delta = theta.distance(&theta_p);
        if checks.first_hit.is_none() && delta != 0.0 {
            return Err(Error::InvariantViolation(format!(
                "parameter difference {delta} before the perturbed sample was drawn (step {step})"
            )));
        }
        let hit = if i == i_star { 1.0 } else { 0.0 };
        let rhs = (1.0 + eta * c) * prev + eta * c_prime * hit;
        let excess = delta - rhs;
        checks.recursion_worst_excess = checks.recursion_worst_excess.max(excess);
        if excess > CHECK_TOL {
            checks.recursion_violations += 1;
        }
        deltas.push(delta);
        checks.steps += 1;
    }

    Ok(PairedRun {
        theta,
        theta_prime: theta_p,
        delta_norms: deltas,
        perturbed_index: i_star,
        checks,
    })
}

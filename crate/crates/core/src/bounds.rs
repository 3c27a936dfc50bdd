//! Closed-form stability constants and generalization-gap bounds for SGD on
//! the single-layer encoder.
//!
//! With `C = (alpha_l nu_s + nu_l alpha_s^2) g_max^2` and `C' = 2 alpha_l alpha_s g_max`:
//!
//! - parameter drift: `E ||theta_T - theta'_T|| <= kappa0 / n`,
//!   `kappa0 = C' ((1 + eta C)^T - 1) / C`;
//! - uniform stability: `kappa = alpha_l alpha_s g_max kappa0`, bound `kappa / n`;
//! - gap perturbation: `(2 kappa + gamma_l) / n`;
//! - gap with probability `1 - delta`:
//!   `kappa / n + (2 kappa + gamma_l) / sqrt(n) * sqrt(ln(1/delta) / 2)`.
//!
//! The power `(1 + eta C)^T` is evaluated as `exp(T ln1p(eta C))`; results that
//! do not fit in an `f64` come back as `+inf` and are flagged in [`BoundReport`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::weighted_g_max;
use crate::regularity::RegularityConstants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub constants: RegularityConstants,
    pub g_max: f64,
    pub eta: f64,
    /// Number of SGD iterations `T`.
    pub iterations: u64,
    /// Training-set size `n`.
    pub n: usize,
    pub delta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !(self.g_max.is_finite() && self.g_max >= 0.0) {
            return Err(Error::InvalidParameter(format!("g_max must be finite and >= 0, got {}", self.g_max)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("training-set size n must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Same-sample gradient-difference constant `C` (Lipschitz factor on `||dtheta||`).
pub fn same_sample_constant(c: &RegularityConstants, g_max: f64) -> f64 {
    (c.alpha_ell * c.nu_sigma + c.nu_ell * c.alpha_sigma * c.alpha_sigma) * g_max * g_max
}

/// Different-sample gradient-difference constant `C'`.
pub fn different_sample_constant(c: &RegularityConstants, g_max: f64) -> f64 {
    2.0 * c.alpha_ell * c.alpha_sigma * g_max
}

/// Largest `ln` argument whose `exp` is still finite.
const LN_MAX: f64 = 709.782_712_893_384;

/// `C' ((1 + eta C)^T - 1) / C` with the `C -> 0` limit `eta C' T`.
pub fn drift_constant(c: f64, c_prime: f64, eta: f64, iterations: u64) -> f64 {
    if iterations == 0 || c_prime == 0.0 || eta == 0.0 {
        return 0.0;
    }
    let t = iterations as f64;
    if c == 0.0 {
        return eta * c_prime * t;
    }
    let log_growth = t * (eta * c).ln_1p();
    if log_growth < LN_MAX - 1.0 {
        let v = c_prime / c * log_growth.exp_m1();
        if v.is_finite() {
            return v;
        }
    }
    // ln(C'/C) + L + ln(1 - e^{-L})
    let ln_value = (c_prime / c).ln() + log_growth + (-(-log_growth).exp()).ln_1p();
    if ln_value < LN_MAX {
        ln_value.exp()
    } else {
        f64::INFINITY
    }
}

pub fn kappa0(b: &BoundInputs) -> f64 {
    let c = same_sample_constant(&b.constants, b.g_max);
    let cp = different_sample_constant(&b.constants, b.g_max);
    let k0 = drift_constant(c, cp, b.eta, b.iterations);
    if k0.is_infinite() {
        log::warn!(
            "kappa0 overflowed (C = {c}, eta = {}, T = {}); reporting +inf",
            b.eta,
            b.iterations
        );
    }
    k0
}

pub fn kappa(b: &BoundInputs) -> f64 {
    let k0 = kappa0(b);
    if k0 == 0.0 {
        return 0.0;
    }
    b.constants.alpha_ell * b.constants.alpha_sigma * b.g_max * k0
}

/// `kappa / n + (2 kappa + gamma) / sqrt(n) * sqrt(ln(1/delta) / 2)`.
pub fn gap_bound_from_kappa(kappa: f64, gamma_ell: f64, n: usize, delta: f64) -> f64 {
    let n = n as f64;
    kappa / n + (2.0 * kappa + gamma_ell) / n.sqrt() * ((1.0 / delta).ln() / 2.0).sqrt()
}

pub fn gap_bound(b: &BoundInputs) -> f64 {
    gap_bound_from_kappa(kappa(b), b.constants.gamma_ell, b.n, b.delta)
}

pub fn gap_perturbation_bound(b: &BoundInputs) -> f64 {
    (2.0 * kappa(b) + b.constants.gamma_ell) / b.n as f64
}

/// g_max bound that only uses feature dimensions: with unit-norm feature
/// columns `||X||_2 <= sqrt(cols)`, so this depends on the graph only through `mu`.
pub fn feature_dimension_g_max(mu: f64, alpha: f64, vertex_dim: usize, edge_dim: usize) -> f64 {
    weighted_g_max(mu, alpha, (vertex_dim as f64).sqrt(), (edge_dim as f64).sqrt())
}

/// Every constant of the analysis for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub c: f64,
    pub c_prime: f64,
    pub kappa0: f64,
    pub kappa: f64,
    /// `kappa0 / n`.
    pub drift_bound: f64,
    /// `kappa / n`.
    pub stability_bound: f64,
    pub perturbation_bound: f64,
    pub gap_bound: f64,
    pub overflow: bool,
}

impl BoundReport {
    pub fn compute(inputs: BoundInputs) -> Result<Self> {
        inputs.validate()?;
        let c = same_sample_constant(&inputs.constants, inputs.g_max);
        let c_prime = different_sample_constant(&inputs.constants, inputs.g_max);
        let k0 = kappa0(&inputs);
        let k = kappa(&inputs);
        let n = inputs.n as f64;
        let gap = gap_bound_from_kappa(k, inputs.constants.gamma_ell, inputs.n, inputs.delta);
        Ok(Self {
            inputs,
            c,
            c_prime,
            kappa0: k0,
            kappa: k,
            drift_bound: k0 / n,
            stability_bound: k / n,
            perturbation_bound: (2.0 * k + inputs.constants.gamma_ell) / n,
            gap_bound: gap,
            overflow: !gap.is_finite(),
        })
    }
}

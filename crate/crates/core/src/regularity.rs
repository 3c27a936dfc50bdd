//! Activations and losses together with the Lipschitz, smoothness and
//! boundedness constants that feed every stability bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max |sigma''|` for the logistic sigmoid, attained where `sigma = (3 - sqrt 3) / 6`.
/// Cross-checked by grid maximization in the tests.
pub const SIGMOID_SMOOTHNESS: f64 = 0.096_225_044_864_937_63;

/// `max |tanh''|`, attained where `tanh^2 = 1/3`.
pub const TANH_SMOOTHNESS: f64 = 0.769_800_358_919_501;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Elu,
    /// C^1 ReLU: quadratic blend on `[-epsilon, epsilon]`.
    SmoothedRelu { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    /// `-y ln(clip(y_hat, [clip, 1]))` for labels in `[0, 1]`.
    ClippedBce { clip: f64 },
    /// `(clamp(y_hat) - y)^2` on `[y_min, y_max]`.
    Squared { y_min: f64, y_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    pub alpha_sigma: f64,
    pub nu_sigma: f64,
    pub alpha_ell: f64,
    pub nu_ell: f64,
    pub gamma_ell: f64,
}

impl RegularityConstants {
    pub fn new(act: Activation, loss: Loss) -> Self {
        let (alpha_sigma, nu_sigma) = act.constants();
        let (alpha_ell, nu_ell, gamma_ell) = loss.constants();
        Self {
            alpha_sigma,
            nu_sigma,
            alpha_ell,
            nu_ell,
            gamma_ell,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_sigma,
            self.nu_sigma,
            self.alpha_ell,
            self.nu_ell,
            self.gamma_ell,
        ];
        if all.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "regularity constants must be finite and nonnegative: {self:?}"
            )))
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn smoothed_relu(epsilon: f64) -> Result<Self> {
        let a = Activation::SmoothedRelu { epsilon };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::SmoothedRelu { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "smoothed ReLU epsilon must be positive, got {epsilon}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::SmoothedRelu { epsilon } => {
                if x < -epsilon {
                    0.0
                } else if x > epsilon {
                    x
                } else {
                    (x + epsilon) * (x + epsilon) / (4.0 * epsilon)
                }
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::SmoothedRelu { epsilon } => {
                if x < -epsilon {
                    0.0
                } else if x > epsilon {
                    1.0
                } else {
                    (x + epsilon) / (2.0 * epsilon)
                }
            }
        }
    }

    /// Closure of the image of the activation.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Activation::Sigmoid => (0.0, 1.0),
            Activation::Tanh => (-1.0, 1.0),
            Activation::Elu => (-1.0, f64::INFINITY),
            Activation::SmoothedRelu { .. } => (0.0, f64::INFINITY),
        }
    }

    /// `(alpha_sigma, nu_sigma)`: bounds on `|sigma'|` and on the Lipschitz
    /// constant of `sigma'`.
    pub fn constants(&self) -> (f64, f64) {
        match *self {
            Activation::Sigmoid => (0.25, SIGMOID_SMOOTHNESS),
            Activation::Tanh => (1.0, TANH_SMOOTHNESS),
            Activation::Elu => (1.0, 1.0),
            Activation::SmoothedRelu { epsilon } => (1.0, 1.0 / (2.0 * epsilon)),
        }
    }
}

impl Loss {
    pub fn clipped_bce(clip: f64) -> Result<Self> {
        let l = Loss::ClippedBce { clip };
        l.validate()?;
        Ok(l)
    }

    pub fn squared(y_min: f64, y_max: f64) -> Result<Self> {
        let l = Loss::Squared { y_min, y_max };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::ClippedBce { clip } if !(clip > 0.0 && clip < 1.0) => Err(
                Error::InvalidParameter(format!("clip must lie in (0, 1), got {clip}")),
            ),
            Loss::Squared { y_min, y_max }
                if !(y_min < y_max && y_min.is_finite() && y_max.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "squared loss needs y_min < y_max, got [{y_min}, {y_max}]"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Admissible label interval.
    pub fn label_range(&self) -> (f64, f64) {
        match *self {
            Loss::ClippedBce { .. } => (0.0, 1.0),
            Loss::Squared { y_min, y_max } => (y_min, y_max),
        }
    }

    /// Interval the prediction is clipped to before evaluation.
    pub fn prediction_range(&self) -> (f64, f64) {
        match *self {
            Loss::ClippedBce { clip } => (clip, 1.0),
            Loss::Squared { y_min, y_max } => (y_min, y_max),
        }
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        let (min, max) = self.label_range();
        if y.is_finite() && y >= min && y <= max {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange { label: y, min, max })
        }
    }

    pub fn value(&self, y_hat: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        let (lo, hi) = self.prediction_range();
        let p = y_hat.clamp(lo, hi);
        Ok(match *self {
            Loss::ClippedBce { .. } => {
                let v = -y * p.ln();
                // -0.0 when y = 0 or p = 1
                v.max(0.0)
            }
            Loss::Squared { .. } => (p - y) * (p - y),
        })
    }

    /// `d loss / d y_hat` of the clipped loss. Zero where the clip is active;
    /// at the clip boundary the one-sided interior derivative is returned.
    pub fn deriv(&self, y_hat: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        let (lo, hi) = self.prediction_range();
        if y_hat < lo || y_hat > hi {
            return Ok(0.0);
        }
        Ok(match *self {
            Loss::ClippedBce { .. } => -y / y_hat,
            Loss::Squared { .. } => 2.0 * (y_hat - y),
        })
    }

    /// True when every output of `act` falls inside the prediction range,
    /// so the clip is never active and the loss is smooth along training.
    /// Outside this case `nu_ell` does not bound the derivative jump at the
    /// clip and the same-sample inequality can fail.
    pub fn smooth_over(&self, act: Activation) -> bool {
        let (lo, hi) = self.prediction_range();
        let (a, b) = act.range();
        let open_below = matches!(act, Activation::Sigmoid | Activation::Tanh);
        (lo < a || (lo == a && open_below)) && b <= hi
    }

    /// `(alpha_ell, nu_ell, gamma_ell)` over the admissible ranges.
    pub fn constants(&self) -> (f64, f64, f64) {
        match *self {
            Loss::ClippedBce { clip } => (1.0 / clip, 1.0 / (clip * clip), -clip.ln()),
            Loss::Squared { y_min, y_max } => {
                let w = y_max - y_min;
                (2.0 * w, 2.0, w * w)
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Elu => f.write_str("elu"),
            Activation::SmoothedRelu { epsilon } => write!(f, "smoothed_relu:{epsilon}"),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::ClippedBce { clip } => write!(f, "clipped_bce:{clip}"),
            Loss::Squared { y_min, y_max } => write!(f, "squared:{y_min}:{y_max}"),
        }
    }
}

fn parse_params(spec: &str, name: &str, expected: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').skip(1).collect();
    if parts.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "{name} takes {expected} parameter(s), got {spec:?}"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number {p:?} in {spec:?}: {e}")))
        })
        .collect()
}

/// Accepts `sigmoid`, `tanh`, `elu`, `smoothed_relu:<epsilon>`.
impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let head = s.split(':').next().unwrap_or_default();
        match head {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "elu" => Ok(Activation::Elu),
            "smoothed_relu" => {
                let p = parse_params(s, head, 1)?;
                Activation::smoothed_relu(p[0])
            }
            _ => Err(Error::InvalidParameter(format!("unknown activation {s:?}"))),
        }
    }
}

/// Accepts `clipped_bce:<clip>` and `squared:<y_min>:<y_max>`.
impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let head = s.split(':').next().unwrap_or_default();
        match head {
            "clipped_bce" => {
                let p = parse_params(s, head, 1)?;
                Loss::clipped_bce(p[0])
            }
            "squared" => {
                let p = parse_params(s, head, 2)?;
                Loss::squared(p[0], p[1])
            }
            _ => Err(Error::InvalidParameter(format!("unknown loss {s:?}"))),
        }
    }
}

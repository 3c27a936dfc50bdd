//! Numerical self-checks shared by the `verify` command and the benches.

use crate::error::Result;
use crate::model::{Theta, VertexContext};
use crate::regularity::{Activation, Loss};

/// Central-difference gradient of `loss(f(v | theta), y)`.
pub fn fd_gradient(
    ctx: &VertexContext,
    theta: &Theta,
    v: usize,
    act: Activation,
    loss: Loss,
    y: f64,
    h: f64,
) -> Result<Theta> {
    let mut probe = theta.clone();
    let mut out = theta.clone();
    for k in 0..theta.as_slice().len() {
        let x = theta.as_slice()[k];
        probe.as_mut_slice()[k] = x + h;
        let up = loss.value(ctx.predict(&probe, v, act)?, y)?;
        probe.as_mut_slice()[k] = x - h;
        let down = loss.value(ctx.predict(&probe, v, act)?, y)?;
        probe.as_mut_slice()[k] = x;
        out.as_mut_slice()[k] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// `||a - b|| / max(||a||, ||b||)`, or `||a - b||` when both are below `floor`.
pub fn relative_error(a: &Theta, b: &Theta, floor: f64) -> f64 {
    let scale = a.norm().max(b.norm());
    let d = a.distance(b);
    if scale < floor {
        d
    } else {
        d / scale
    }
}

/// True when `theta` puts site `v` within `margin` of a point where the
/// activation or the clipped loss is not smooth, so finite differences
/// there would straddle the kink.
pub fn near_kink(ctx: &VertexContext, theta: &Theta, v: usize, act: Activation, loss: Loss, margin: f64) -> Result<bool> {
    let d = ctx.preactivation(theta, v)?[0];
    let act_kink = match act {
        Activation::SmoothedRelu { epsilon } => (d.abs() - epsilon).abs() < margin,
        Activation::Elu => d.abs() < margin,
        _ => false,
    };
    let y_hat = act.value(d);
    let (lo, hi) = loss.prediction_range();
    let slope = act.deriv(d).abs().max(1.0);
    let loss_kink = (y_hat - lo).abs() < margin * slope || (y_hat - hi).abs() < margin * slope;
    Ok(act_kink || loss_kink)
}

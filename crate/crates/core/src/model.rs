//! Single-layer hypergraph collaborative network encoders.
//!
//! The hypergraph and features are fixed for a whole experiment, so each
//! encoder precomputes its per-row context once:
//!
//! - vertex encoder: `A = alpha * H~ H~^T X_V`, `B = (1 - alpha) * H~ D_E^{-1/2} X_E`,
//!   output `f(v) = sigma(A_v Q_V + B_v Q_E)`;
//! - hyperedge encoder: `C = beta * H~^T H~ X_E`, `D = (1 - beta) * H~^T D_V^{-1/2} X_V`,
//!   output `g(e) = sigma(C_e P_E + D_e P_V)`.
//!
//! With `alpha = 1` and `X_E = 0` the vertex encoder is the vertex-only
//! hypergraph convolution `sigma(D_V^{-1/2} H D_E^{-1} H^T D_V^{-1/2} X_V Q_V)`.
//!
//! Parameters live in a [`Theta`] that stacks the two blocks row-wise, so the
//! gradient of a scalar output is `sigma'(d) * (A_v B_v)^T` in the same layout.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::hypergraph::{IncidenceScale, NormalizedIncidence, Side};
use crate::regularity::{Activation, Loss};

/// Learnable parameters, stored as a dense `(first + second) x outputs`
/// row-major matrix. For the vertex encoder the blocks are `(Q_V, Q_E)`,
/// for the hyperedge encoder `(P_E, P_V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    first: usize,
    second: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl Theta {
    pub fn zeros(first: usize, second: usize, outputs: usize) -> Self {
        Self {
            first,
            second,
            outputs,
            data: vec![0.0; (first + second) * outputs],
        }
    }

    pub fn from_vec(first: usize, second: usize, outputs: usize, data: Vec<f64>) -> Result<Self> {
        let expected = (first + second) * outputs;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "theta entries",
                expected,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("theta has non-finite entries".into()));
        }
        Ok(Self {
            first,
            second,
            outputs,
            data,
        })
    }

    pub fn first_rows(&self) -> usize {
        self.first
    }

    pub fn second_rows(&self) -> usize {
        self.second
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn first_block(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.first, self.outputs), &self.data[..self.first * self.outputs])
            .expect("layout")
    }

    pub fn second_block(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.second, self.outputs), &self.data[self.first * self.outputs..])
            .expect("layout")
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `||self - other||_2` over the stacked parameters.
    pub fn distance(&self, other: &Theta) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn same_shape(&self, other: &Theta) -> bool {
        self.first == other.first && self.second == other.second && self.outputs == other.outputs
    }
}

/// Shared storage for both encoders: a primary and a cross-feature context
/// matrix with one row per output site.
#[derive(Debug, Clone)]
struct Encoding {
    primary: Array2<f64>,
    cross: Array2<f64>,
    weight: f64,
    g_max: f64,
    mu: f64,
    scale: IncidenceScale,
}

impl Encoding {
    fn len(&self) -> usize {
        self.primary.nrows()
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::VertexOutOfRange {
                vertex: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    fn check_theta(&self, theta: &Theta) -> Result<()> {
        if theta.first != self.primary.ncols() || theta.second != self.cross.ncols() {
            return Err(Error::DimensionMismatch {
                what: "theta rows",
                expected: self.primary.ncols() + self.cross.ncols(),
                got: theta.first + theta.second,
            });
        }
        Ok(())
    }

    fn preactivation(&self, theta: &Theta, i: usize) -> Result<Vec<f64>> {
        self.check_site(i)?;
        self.check_theta(theta)?;
        let q1 = theta.first_block();
        let q2 = theta.second_block();
        let d = self.primary.row(i).dot(&q1) + self.cross.row(i).dot(&q2);
        Ok(d.to_vec())
    }

    /// Scalar fast path; callers guarantee `i` and the theta shape are valid
    /// and `outputs == 1`.
    #[inline]
    fn preactivation_scalar(&self, theta: &[f64], i: usize) -> f64 {
        let split = self.primary.ncols();
        let p = self.primary.row(i);
        let c = self.cross.row(i);
        let mut acc = 0.0;
        for (k, x) in p.iter().enumerate() {
            acc += x * theta[k];
        }
        for (k, x) in c.iter().enumerate() {
            acc += x * theta[split + k];
        }
        acc
    }

    fn row_norm(&self, i: usize) -> f64 {
        let p = self.primary.row(i);
        let c = self.cross.row(i);
        (p.dot(&p) + c.dot(&c)).sqrt()
    }

    fn grad_coefficient(
        &self,
        theta: &Theta,
        i: usize,
        act: Activation,
        loss: Loss,
        y: f64,
    ) -> Result<f64> {
        self.check_site(i)?;
        self.check_theta(theta)?;
        if theta.outputs != 1 {
            return Err(Error::UnsupportedOutputDim(theta.outputs));
        }
        loss.check_label(y)?;
        let d = self.preactivation_scalar(&theta.data, i);
        Ok(loss.deriv(act.value(d), y)? * act.deriv(d))
    }

    fn scaled_row(&self, i: usize, coef: f64, first: usize, second: usize) -> Theta {
        let mut data = Vec::with_capacity(first + second);
        data.extend(self.primary.row(i).iter().map(|x| coef * x));
        data.extend(self.cross.row(i).iter().map(|x| coef * x));
        Theta {
            first,
            second,
            outputs: 1,
            data,
        }
    }
}

/// Mixed weighted g_max bound `mu * sqrt(w^2 ||X_p||^2 mu^2 + (1 - w)^2 ||X_c||^2)`.
pub fn weighted_g_max(mu: f64, weight: f64, primary_norm: f64, cross_norm: f64) -> f64 {
    let a = weight * primary_norm * mu;
    let b = (1.0 - weight) * cross_norm;
    mu * (a * a + b * b).sqrt()
}

fn check_weight(w: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {w}")))
    }
}

fn scale_rows(x: &Array2<f64>, diag: &[f64]) -> Array2<f64> {
    let mut out = x.clone();
    for (mut row, &s) in out.axis_iter_mut(Axis(0)).zip(diag) {
        row.mapv_inplace(|v| v * s);
    }
    out
}

/// Vertex-encoder context: rows `A_v` and `B_v`.
#[derive(Debug, Clone)]
pub struct VertexContext {
    enc: Encoding,
}

impl VertexContext {
    pub fn build(
        ni: &NormalizedIncidence,
        xv: &FeatureMatrix,
        xe: &FeatureMatrix,
        alpha: f64,
    ) -> Result<Self> {
        check_weight(alpha, "alpha")?;
        if xv.rows() != ni.n_vertices() {
            return Err(Error::DimensionMismatch {
                what: "vertex feature rows",
                expected: ni.n_vertices(),
                got: xv.rows(),
            });
        }
        if xe.rows() != ni.n_edges() {
            return Err(Error::DimensionMismatch {
                what: "hyperedge feature rows",
                expected: ni.n_edges(),
                got: xe.rows(),
            });
        }
        let mu = ni.spectral_norm_default()?;
        let mut a = ni.matmul(Side::Left, &ni.matmul(Side::Right, xv.data())?)?;
        a *= alpha;
        let mut b = ni.matmul(Side::Left, &scale_rows(xe.data(), ni.edge_inv_sqrt()))?;
        b *= 1.0 - alpha;
        let g_max = weighted_g_max(
            mu,
            alpha,
            xv.spectral_norm_default()?,
            xe.spectral_norm_default()?,
        );
        Ok(Self {
            enc: Encoding {
                primary: a,
                cross: b,
                weight: alpha,
                g_max,
                mu,
                scale: ni.scale(),
            },
        })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.enc.primary
    }

    pub fn b(&self) -> &Array2<f64> {
        &self.enc.cross
    }

    pub fn alpha(&self) -> f64 {
        self.enc.weight
    }

    pub fn g_max(&self) -> f64 {
        self.enc.g_max
    }

    /// Largest singular value of the incidence operator the context was built with.
    pub fn mu(&self) -> f64 {
        self.enc.mu
    }

    pub fn scale(&self) -> IncidenceScale {
        self.enc.scale
    }

    pub fn n_vertices(&self) -> usize {
        self.enc.len()
    }

    pub fn vertex_dim(&self) -> usize {
        self.enc.primary.ncols()
    }

    pub fn edge_dim(&self) -> usize {
        self.enc.cross.ncols()
    }

    /// Replaces the stored g_max. Only meant for fault-injection checks.
    pub fn with_g_max(mut self, g_max: f64) -> Self {
        self.enc.g_max = g_max;
        self
    }

    pub fn zero_theta(&self, outputs: usize) -> Theta {
        Theta::zeros(self.vertex_dim(), self.edge_dim(), outputs)
    }

    /// `||(A_v B_v)||_2`.
    pub fn row_norm(&self, v: usize) -> f64 {
        self.enc.row_norm(v)
    }

    /// `(A_v B_v)` as one vector.
    pub fn row(&self, v: usize) -> Vec<f64> {
        self.enc.primary.row(v).iter().chain(self.enc.cross.row(v).iter()).copied().collect()
    }

    /// `d_v = A_v Q_V + B_v Q_E`.
    pub fn preactivation(&self, theta: &Theta, v: usize) -> Result<Vec<f64>> {
        self.enc.preactivation(theta, v)
    }

    pub(crate) fn preactivation_scalar(&self, theta: &[f64], v: usize) -> f64 {
        self.enc.preactivation_scalar(theta, v)
    }

    pub(crate) fn primary_row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.enc.primary.row(v)
    }

    pub(crate) fn cross_row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.enc.cross.row(v)
    }

    pub fn forward(&self, theta: &Theta, v: usize, act: Activation) -> Result<Vec<f64>> {
        Ok(self
            .preactivation(theta, v)?
            .into_iter()
            .map(|d| act.value(d))
            .collect())
    }

    /// Scalar output `f(v | theta)`; requires `O = 1`.
    pub fn predict(&self, theta: &Theta, v: usize, act: Activation) -> Result<f64> {
        if theta.outputs != 1 {
            return Err(Error::UnsupportedOutputDim(theta.outputs));
        }
        Ok(self.forward(theta, v, act)?[0])
    }

    /// `d loss / d y_hat * sigma'(d_v)`, the scalar multiplying `(A_v B_v)^T`
    /// in the parameter gradient.
    pub fn grad_coefficient(
        &self,
        theta: &Theta,
        v: usize,
        act: Activation,
        loss: Loss,
        y: f64,
    ) -> Result<f64> {
        self.enc.grad_coefficient(theta, v, act, loss, y)
    }

    /// Gradient of `loss(f(v | theta), y)` with respect to the stacked parameters.
    pub fn grad(&self, theta: &Theta, v: usize, act: Activation, loss: Loss, y: f64) -> Result<Theta> {
        let coef = self.grad_coefficient(theta, v, act, loss, y)?;
        Ok(self.enc.scaled_row(v, coef, self.vertex_dim(), self.edge_dim()))
    }

    /// Gradient of the raw output `f(v | theta)` (no loss), `sigma'(d_v) (A_v B_v)^T`.
    pub fn output_grad(&self, theta: &Theta, v: usize, act: Activation) -> Result<Theta> {
        self.enc.check_site(v)?;
        self.enc.check_theta(theta)?;
        if theta.outputs != 1 {
            return Err(Error::UnsupportedOutputDim(theta.outputs));
        }
        let d = self.enc.preactivation_scalar(&theta.data, v);
        Ok(self.enc.scaled_row(v, act.deriv(d), self.vertex_dim(), self.edge_dim()))
    }

    /// Mean loss over `(vertex, label)` pairs.
    pub fn mean_loss<I>(&self, theta: &Theta, samples: I, act: Activation, loss: Loss) -> Result<f64>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut total = 0.0;
        let mut count = 0usize;
        for (v, y) in samples {
            self.enc.check_site(v)?;
            let d = self.enc.preactivation_scalar(&theta.data, v);
            total += loss.value(act.value(d), y)?;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidParameter("mean loss over an empty sample set".into()));
        }
        Ok(total / count as f64)
    }
}

/// Hyperedge-encoder context: rows `C_e` and `D_e`.
#[derive(Debug, Clone)]
pub struct EdgeContext {
    enc: Encoding,
}

impl EdgeContext {
    pub fn build(
        ni: &NormalizedIncidence,
        xv: &FeatureMatrix,
        xe: &FeatureMatrix,
        beta: f64,
    ) -> Result<Self> {
        check_weight(beta, "beta")?;
        if xv.rows() != ni.n_vertices() {
            return Err(Error::DimensionMismatch {
                what: "vertex feature rows",
                expected: ni.n_vertices(),
                got: xv.rows(),
            });
        }
        if xe.rows() != ni.n_edges() {
            return Err(Error::DimensionMismatch {
                what: "hyperedge feature rows",
                expected: ni.n_edges(),
                got: xe.rows(),
            });
        }
        let mu = ni.spectral_norm_default()?;
        let mut c = ni.matmul(Side::Right, &ni.matmul(Side::Left, xe.data())?)?;
        c *= beta;
        let mut d = ni.matmul(Side::Right, &scale_rows(xv.data(), ni.vertex_inv_sqrt()))?;
        d *= 1.0 - beta;
        let g_max = weighted_g_max(
            mu,
            beta,
            xe.spectral_norm_default()?,
            xv.spectral_norm_default()?,
        );
        Ok(Self {
            enc: Encoding {
                primary: c,
                cross: d,
                weight: beta,
                g_max,
                mu,
                scale: ni.scale(),
            },
        })
    }

    pub fn c(&self) -> &Array2<f64> {
        &self.enc.primary
    }

    pub fn d(&self) -> &Array2<f64> {
        &self.enc.cross
    }

    pub fn beta(&self) -> f64 {
        self.enc.weight
    }

    pub fn g_max_edge(&self) -> f64 {
        self.enc.g_max
    }

    pub fn n_edges(&self) -> usize {
        self.enc.len()
    }

    pub fn zero_theta(&self, outputs: usize) -> Theta {
        Theta::zeros(self.enc.primary.ncols(), self.enc.cross.ncols(), outputs)
    }

    pub fn row_norm(&self, e: usize) -> f64 {
        self.enc.row_norm(e)
    }

    pub fn preactivation(&self, theta: &Theta, e: usize) -> Result<Vec<f64>> {
        self.enc.preactivation(theta, e)
    }

    pub fn forward(&self, theta: &Theta, e: usize, act: Activation) -> Result<Vec<f64>> {
        Ok(self
            .preactivation(theta, e)?
            .into_iter()
            .map(|d| act.value(d))
            .collect())
    }

    pub fn grad(&self, theta: &Theta, e: usize, act: Activation, loss: Loss, y: f64) -> Result<Theta> {
        let coef = self.enc.grad_coefficient(theta, e, act, loss, y)?;
        Ok(self
            .enc
            .scaled_row(e, coef, self.enc.primary.ncols(), self.enc.cross.ncols()))
    }
}

/// Applies `theta -= eta * coef * row` in place; `row` is `(A_v B_v)`.
pub(crate) fn axpy_row(theta: &mut Theta, ctx: &VertexContext, v: usize, scale: f64) {
    debug_assert!(theta.same_shape(&ctx.zero_theta(1)));
    let split = ctx.vertex_dim();
    let data = theta.as_mut_slice();
    for (k, x) in ctx.primary_row(v).iter().enumerate() {
        data[k] -= scale * x;
    }
    for (k, x) in ctx.cross_row(v).iter().enumerate() {
        data[split + k] -= scale * x;
    }
}

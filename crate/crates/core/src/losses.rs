//! Training objectives for the point and vector heads, with analytic
//! gradients.
//!
//! The point loss is the penalty-reduced focal loss over the whole heatmap,
//! normalized by the number of positive cells. The vector loss is a per-component
//! L1 averaged over supervised interaction points. Sums run in a fixed order
//! (class-major, then row-major) so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::UnsignedVector;
use crate::heatmap::{ClassHeatmap, VectorField};

pub const DEFAULT_LAMBDA_V: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocalParams {
    pub alpha: f64,
    pub beta: f64,
    /// Predictions are clamped to `[eps, 1 - eps]` before the logarithms.
    pub eps: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 4.0, eps: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_point: f64,
    pub l_vector: f64,
    pub l_total: f64,
    pub lambda_v: f64,
    /// Positive-cell count used to normalize the point loss (floored at 1).
    pub n_points: usize,
    /// Supervised vector targets.
    pub n_vectors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalLoss {
    pub loss: f64,
    pub n_points: usize,
}

fn check_shapes(pred: &ClassHeatmap, target: &ClassHeatmap) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch { expected: target.shape().to_vec(), found: pred.shape().to_vec() });
    }
    Ok(())
}

/// Summand of the focal loss for one cell (before the `-1/N_p` factor) and
/// its derivative with respect to the clamped prediction.
#[inline]
fn focal_term(p: f64, t: f64, params: &FocalParams) -> (f64, f64) {
    let FocalParams { alpha, beta, .. } = *params;
    if t == 1.0 {
        let q = 1.0 - p;
        let value = q.powf(alpha) * p.ln();
        let grad = -alpha * q.powf(alpha - 1.0) * p.ln() + q.powf(alpha) / p;
        (value, grad)
    } else {
        let w = (1.0 - t).powf(beta);
        let l = (1.0 - p).ln();
        let value = w * p.powf(alpha) * l;
        let grad = w * (alpha * p.powf(alpha - 1.0) * l - p.powf(alpha) / (1.0 - p));
        (value, grad)
    }
}

fn focal_impl(pred: &ClassHeatmap, target: &ClassHeatmap, params: &FocalParams, mut grad: Option<&mut [f64]>) -> Result<FocalLoss> {
    check_shapes(pred, target)?;
    let n_points = target.values().iter().filter(|&&t| t == 1.0).count();
    let norm = n_points.max(1) as f64;
    let (lo, hi) = (params.eps, 1.0 - params.eps);
    let mut sum = 0.0;
    for (i, (&raw, &t)) in pred.values().iter().zip(target.values()).enumerate() {
        let p = raw.clamp(lo, hi);
        let (value, d) = focal_term(p, t, params);
        sum += value;
        if let Some(g) = grad.as_deref_mut() {
            // the clamp has zero derivative outside [eps, 1 - eps]
            g[i] = if raw > lo && raw < hi { -d / norm } else { 0.0 };
        }
    }
    Ok(FocalLoss { loss: -sum / norm, n_points })
}

/// Focal loss of `pred` against Gaussian targets `target`. Cells with
/// target exactly 1 are positives.
pub fn focal_loss(pred: &ClassHeatmap, target: &ClassHeatmap, params: &FocalParams) -> Result<FocalLoss> {
    focal_impl(pred, target, params, None)
}

/// Focal loss plus its gradient with respect to every cell of `pred`.
pub fn focal_loss_with_grad(pred: &ClassHeatmap, target: &ClassHeatmap, params: &FocalParams) -> Result<(FocalLoss, Vec<f64>)> {
    let mut grad = vec![0.0; pred.values().len()];
    let loss = focal_impl(pred, target, params, Some(&mut grad))?;
    Ok((loss, grad))
}

fn sorted_targets(targets: &[((usize, usize), UnsignedVector)]) -> Vec<((usize, usize), UnsignedVector)> {
    let mut t = targets.to_vec();
    t.sort_by(|a, b| {
        a.0.cmp(&b.0).then(a.1.vx_abs.total_cmp(&b.1.vx_abs)).then(a.1.vy_abs.total_cmp(&b.1.vy_abs))
    });
    t
}

fn vector_impl(field: &VectorField, targets: &[((usize, usize), UnsignedVector)], mut grad: Option<&mut [f64]>) -> Result<f64> {
    for &((y, x), _) in targets {
        if y >= field.height() || x >= field.width() {
            return Err(Error::OutOfBounds {
                index: 0,
                x: x as i64,
                y: y as i64,
                width: field.width(),
                height: field.height(),
            });
        }
    }
    if targets.is_empty() {
        return Ok(0.0);
    }
    let n = targets.len() as f64;
    let mut sum = 0.0;
    for ((y, x), t) in sorted_targets(targets) {
        let (ix, iy) = field.indices(y, x);
        let dx = field.values()[ix] - t.vx_abs;
        let dy = field.values()[iy] - t.vy_abs;
        sum += dx.abs() + dy.abs();
        if let Some(g) = grad.as_deref_mut() {
            // sign(0) = 0 gives the zero subgradient at the kink
            let sign = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
            g[ix] += sign(dx) / n;
            g[iy] += sign(dy) / n;
        }
    }
    Ok(sum / n)
}

/// Mean over supervised points `(y, x)` of `||V(y, x)| - v'|_1`. An empty
/// target list gives 0.
pub fn vector_l1_loss(field: &VectorField, targets: &[((usize, usize), UnsignedVector)]) -> Result<f64> {
    vector_impl(field, targets, None)
}

/// Vector loss and its (sub)gradient over the whole `2 x H x W` field.
pub fn vector_l1_loss_with_grad(field: &VectorField, targets: &[((usize, usize), UnsignedVector)]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; field.values().len()];
    let loss = vector_impl(field, targets, Some(&mut grad))?;
    Ok((loss, grad))
}

pub fn total_loss(l_point: f64, l_vector: f64, lambda_v: f64) -> f64 {
    l_point + lambda_v * l_vector
}

/// Point, vector and weighted total loss in one report.
pub fn loss_report(
    pred_points: &ClassHeatmap,
    target_points: &ClassHeatmap,
    pred_vectors: &VectorField,
    vector_targets: &[((usize, usize), UnsignedVector)],
    params: &FocalParams,
    lambda_v: f64,
) -> Result<LossReport> {
    let focal = focal_loss(pred_points, target_points, params)?;
    let l_vector = vector_l1_loss(pred_vectors, vector_targets)?;
    Ok(LossReport {
        l_point: focal.loss,
        l_vector,
        l_total: total_loss(focal.loss, l_vector, lambda_v),
        lambda_v,
        n_points: focal.n_points.max(1),
        n_vectors: vector_targets.len(),
    })
}

//! Distance and loss primitives over raw embedding vectors.
//!
//! Pure functions only; no state, no I/O.

use crate::error::{Error, Result};

/// `exp` saturates in f64 long before the mathematical sigmoid reaches 0 or
/// 1; these bounds pin the output inside the open unit interval regardless
/// of the activation.
const SIGMOID_FLOOR: f64 = f64::MIN_POSITIVE;
const SIGMOID_CEIL: f64 = 1.0 - f64::EPSILON;

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Squared Euclidean distance, the quantity the triplet loss is built from.
pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Euclidean distance between two equal-dimension vectors.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(squared_distance(a, b)?.sqrt())
}

fn triplet_activation(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<f64> {
    if !margin.is_finite() || margin < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "margin must be finite and non-negative, got {margin}"
        )));
    }
    Ok(squared_distance(anchor, positive)? - squared_distance(anchor, negative)? + margin)
}

/// Hinge triplet loss `max(0, |a-p|^2 - |a-n|^2 + margin)` over squared
/// Euclidean distances.
pub fn triplet_loss(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<f64> {
    Ok(triplet_activation(anchor, positive, negative, margin)?.max(0.0))
}

/// Gradients of the triplet loss with respect to each input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Analytic gradient of [`triplet_loss`]. Inside the inactive hinge region
/// all three gradients are zero; at the hinge boundary (activation exactly
/// zero) the active-branch gradient is reported, the usual subgradient
/// choice.
pub fn triplet_loss_grad(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<TripletGrad> {
    let activation = triplet_activation(anchor, positive, negative, margin)?;
    let dim = anchor.len();
    if activation < 0.0 {
        return Ok(TripletGrad {
            anchor: vec![0.0; dim],
            positive: vec![0.0; dim],
            negative: vec![0.0; dim],
        });
    }
    let mut grad = TripletGrad {
        anchor: Vec::with_capacity(dim),
        positive: Vec::with_capacity(dim),
        negative: Vec::with_capacity(dim),
    };
    for i in 0..dim {
        grad.anchor.push(2.0 * (negative[i] - positive[i]));
        grad.positive.push(2.0 * (positive[i] - anchor[i]));
        grad.negative.push(2.0 * (anchor[i] - negative[i]));
    }
    Ok(grad)
}

/// Numerically stable logistic function, clamped into the open interval
/// (0, 1). The input must not be NaN.
pub fn logistic(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(SIGMOID_FLOOR, SIGMOID_CEIL)
}

use super::{IsGenError, Result};
use crate::tensorkit::{self, Graph, Real, Tensor, Var};

/// Predictions are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]` before logs.
pub const PRED_CLAMP: f64 = 1e-7;

/// Weight on pixels where the target is non-zero.
const FOREGROUND_WEIGHT: f64 = 5.0;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(IsGenError::LengthMismatch(a, b));
    }
    Ok(())
}

/// Mean over pixels of `ŷ²` where `y == 0` and `5(y − ŷ)²` elsewhere.
pub fn reconstruction_loss(y: &[f32], yhat: &[f32]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(IsGenError::ShapeMismatch(format!("target has {} pixels, prediction {}", y.len(), yhat.len())));
    }
    if y.is_empty() {
        return Err(IsGenError::ShapeMismatch("empty image".into()));
    }
    let total: f64 = y
        .iter()
        .zip(yhat)
        .map(|(&t, &p)| {
            let (t, p) = (t as f64, p as f64);
            if t == 0.0 {
                p * p
            } else {
                FOREGROUND_WEIGHT * (t - p) * (t - p)
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// Binary cross-entropy averaged over the `N` predictions.
pub fn discriminator_loss(labels: &[f64], preds: &[f64]) -> Result<f64> {
    check_len(labels.len(), preds.len())?;
    if preds.is_empty() {
        return Err(IsGenError::LengthMismatch(0, 0));
    }
    let total: f64 = labels
        .iter()
        .zip(preds)
        .map(|(&y, &p)| {
            let p = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    Ok(-total / preds.len() as f64)
}

/// Reconstruction loss plus `λ` times the discriminator loss against the
/// inverted labels. `d_scores` is `[D(ŷ), D(x₁)]`, synthetic first.
pub fn generator_loss(y: &[f32], yhat: &[f32], d_scores: &[f64], lambda: f64) -> Result<f64> {
    check_len(d_scores.len(), 2)?;
    let rl = reconstruction_loss(y, yhat)?;
    let adv = discriminator_loss(&[1.0, 0.0], d_scores)?;
    Ok(rl + lambda * adv)
}

/// Differentiable reconstruction loss; `y` is a constant node.
pub fn reconstruction_loss_graph<T: Real>(g: &mut Graph<T>, y: Var, yhat: Var) -> tensorkit::Result<Var> {
    let weights = Tensor::from_fn(g.value(y).shape(), |i| {
        if g.value(y).data()[i] == T::zero() {
            T::one()
        } else {
            T::lit(FOREGROUND_WEIGHT)
        }
    });
    let w = g.input(weights)?;
    let diff = g.sub(yhat, y)?;
    let sq = g.square(diff)?;
    let weighted = g.mul(sq, w)?;
    g.mean(weighted)
}

/// Differentiable binary cross-entropy of `preds` (shape `[N]`) against
/// constant `labels`.
pub fn bce_graph<T: Real>(g: &mut Graph<T>, preds: Var, labels: &[f64]) -> tensorkit::Result<Var> {
    let n = g.value(preds).len();
    if n != labels.len() || n == 0 {
        return Err(tensorkit::TensorError::ShapeMismatch(format!("{n} predictions for {} labels", labels.len())));
    }
    let shape = g.value(preds).shape().to_vec();
    let y = g.input(Tensor::from_fn(&shape, |i| T::lit(labels[i])))?;
    let not_y = g.input(Tensor::from_fn(&shape, |i| T::lit(1.0 - labels[i])))?;
    let p = g.clamp(preds, T::lit(PRED_CLAMP), T::lit(1.0 - PRED_CLAMP))?;
    let log_p = g.ln(p)?;
    let q = g.affine(p, -T::one(), T::one())?;
    let log_q = g.ln(q)?;
    let a = g.mul(y, log_p)?;
    let b = g.mul(not_y, log_q)?;
    let s = g.add(a, b)?;
    let total = g.sum(s)?;
    g.affine(total, T::lit(-1.0 / n as f64), T::zero())
}

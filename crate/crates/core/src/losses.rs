//! Training objectives over logits, each returned with its exact gradient
//! with respect to those logits. All losses are averaged over the batch.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::tensor::{Matrix, Real};

/// Probability floor applied to predictions inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Scalar loss with its gradient with respect to the logits it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<T> {
    pub value: T,
    pub grad: Matrix<T>,
}

impl<T: Real> LossValue<T> {
    pub fn scaled(mut self, weight: T) -> Self {
        self.value *= weight;
        self.grad.scale(weight);
        self
    }
}

/// Overflow-safe softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    crate::encoder::softmax_in_place(&mut out);
    out
}

fn log_sum_exp<T: Real>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln()
}

/// Mean of `-log softmax(row[..width])[col]`; gradient is zero outside `..width`.
fn cross_entropy<T: Real>(logits: &Matrix<T>, width: usize, cols: impl Iterator<Item = usize>) -> LossValue<T> {
    let b = logits.rows();
    let inv_b = T::one() / T::of(b.max(1) as f64);
    let mut grad = Matrix::zeros(b, logits.cols());
    let mut total = T::zero();
    for (i, col) in cols.enumerate() {
        let z = &logits.row(i)[..width];
        total += log_sum_exp(z) - z[col];
        let probs = softmax(z);
        let g = grad.row_mut(i);
        for j in 0..width {
            g[j] = probs[j] * inv_b;
        }
        g[col] -= inv_b;
    }
    LossValue { value: total * inv_b, grad }
}

/// Stage-1 softmax loss over the first `num_known` logit columns only.
/// `labels` are class ids in `1..=num_known`.
pub fn pretrain_loss<T: Real>(logits: &Matrix<T>, labels: &[usize], num_known: usize) -> Result<LossValue<T>> {
    if labels.len() != logits.rows() || logits.cols() < num_known {
        return Err(Error::Shape(format!(
            "{} labels for {:?} logits with M={num_known}",
            labels.len(),
            logits.shape()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y < 1 || y > num_known) {
        return Err(Error::ClassOutOfRange { id: y, max: num_known });
    }
    Ok(cross_entropy(logits, num_known, labels.iter().map(|&y| y - 1)))
}

/// Softened target over M+1 classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTarget<T> {
    pub probs: Vec<T>,
}

impl<T: Real> SoftTarget<T> {
    pub fn is_one_hot(&self) -> bool {
        self.probs.iter().filter(|&&p| p != T::zero()).count() == 1
            && self.probs.iter().any(|&p| p == T::one())
    }
}

/// Moves mass `rho` from gold class `y` (in `1..=M`) to the open class M+1.
pub fn soft_target<T: Real>(y: usize, num_known: usize, rho: f64) -> Result<SoftTarget<T>> {
    if y < 1 || y > num_known {
        return Err(Error::ClassOutOfRange { id: y, max: num_known });
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(invalid(format!("relocation probability {rho} outside [0, 1)")));
    }
    let mut probs = vec![T::zero(); num_known + 1];
    probs[y - 1] = T::of(1.0 - rho);
    probs[num_known] += T::of(rho);
    Ok(SoftTarget { probs })
}

/// Mean over the batch of `Σ_c p_c ln(p_c / p'_c)` with `p' = softmax(logits)`.
/// Terms with `p_c = 0` contribute nothing; `p'` is floored at [`LOG_FLOOR`].
pub fn kl_loss<T: Real>(targets: &[SoftTarget<T>], logits: &Matrix<T>) -> Result<LossValue<T>> {
    if targets.len() != logits.rows() || targets.iter().any(|t| t.probs.len() != logits.cols()) {
        return Err(Error::Shape(format!("{} targets for {:?} logits", targets.len(), logits.shape())));
    }
    let b = logits.rows();
    let inv_b = T::one() / T::of(b.max(1) as f64);
    let floor = T::of(LOG_FLOOR);
    let mut grad = Matrix::zeros(b, logits.cols());
    let mut total = T::zero();
    for (i, target) in targets.iter().enumerate() {
        let q = softmax(logits.row(i));
        // d/dz_j of -Σ_c p_c ln max(q_c, floor) = q_j Σ_{unclamped c} p_c - p_j [q_j unclamped]
        let mut live_mass = T::zero();
        for (&p, &qc) in target.probs.iter().zip(&q) {
            if p > T::zero() {
                total += p * (p.ln() - qc.max(floor).ln());
                if qc >= floor {
                    live_mass += p;
                }
            }
        }
        let g = grad.row_mut(i);
        for j in 0..q.len() {
            let own = if q[j] >= floor { target.probs[j] } else { T::zero() };
            g[j] = (q[j] * live_mass - own) * inv_b;
        }
    }
    Ok(LossValue { value: total * inv_b, grad })
}

/// Softmax loss assigning every pseudo sample to the open class (last column).
pub fn mixup_loss<T: Real>(logits: &Matrix<T>) -> LossValue<T> {
    let open = logits.cols() - 1;
    cross_entropy(logits, logits.cols(), core::iter::repeat_n(open, logits.rows()))
}

/// Convex combination `γ·L_KL + (1−γ)·L_NM`, keeping both weighted gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss<T> {
    pub value: T,
    pub soft: LossValue<T>,
    pub mixup: LossValue<T>,
}

pub fn total_loss<T: Real>(kl: LossValue<T>, nm: LossValue<T>, gamma: f64) -> Result<TotalLoss<T>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("trade-off weight {gamma} outside [0, 1]")));
    }
    let soft = kl.scaled(T::of(gamma));
    let mixup = nm.scaled(T::of(1.0 - gamma));
    Ok(TotalLoss { value: soft.value + mixup.value, soft, mixup })
}

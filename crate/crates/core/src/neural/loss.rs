use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Mean binary cross-entropy on logits and its gradient with respect to the logits.
///
/// Uses `max(z, 0) - z y + ln(1 + exp(-|z|))`, finite for any finite logit.
pub fn bce_loss<T: Real>(logits: &[T], targets: &[bool]) -> Result<(T, Vec<T>)> {
    if logits.len() != targets.len() {
        return Err(Error::dims("bce_loss targets", logits.len(), targets.len()));
    }
    if logits.is_empty() {
        return Ok((T::zero(), Vec::new()));
    }
    let n = T::from_usize(logits.len()).expect("length fits scalar");
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        let y = if y { T::one() } else { T::zero() };
        total += z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - y) / n);
    }
    Ok((total / n, grad))
}

/// Mean softmax cross-entropy over rows with a target; `None` rows are ignored.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor2<T>, targets: &[Option<usize>]) -> Result<(T, Tensor2<T>)> {
    if logits.rows() != targets.len() {
        return Err(Error::dims("softmax_cross_entropy targets", logits.rows(), targets.len()));
    }
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    let active = targets.iter().filter(|t| t.is_some()).count();
    if active == 0 {
        return Ok((T::zero(), grad));
    }
    let n = T::from_usize(active).expect("count fits scalar");
    let mut total = T::zero();
    for (r, target) in targets.iter().enumerate() {
        let Some(c) = *target else { continue };
        if c >= logits.cols() {
            return Err(Error::invalid(format!("class target {c} out of range for {} logits", logits.cols())));
        }
        let row = logits.row(r);
        let probs = softmax(row);
        let lse = log_sum_exp(row);
        total += lse - row[c];
        for (j, (g, &p)) in grad.row_mut(r).iter_mut().zip(&probs).enumerate() {
            let y = if j == c { T::one() } else { T::zero() };
            *g = (p - y) / n;
        }
    }
    Ok((total / n, grad))
}

pub fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

pub fn softmax<T: Real>(row: &[T]) -> Vec<T> {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
    let s: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Smooth-L1 with transition point 1, summed over columns and averaged over
/// rows that carry a target.
pub fn smooth_l1<T: Real>(pred: &Tensor2<T>, targets: &[Option<Vec<T>>]) -> Result<(T, Tensor2<T>)> {
    if pred.rows() != targets.len() {
        return Err(Error::dims("smooth_l1 targets", pred.rows(), targets.len()));
    }
    let mut grad = Tensor2::zeros(pred.rows(), pred.cols());
    let active = targets.iter().filter(|t| t.is_some()).count();
    if active == 0 {
        return Ok((T::zero(), grad));
    }
    let n = T::from_usize(active).expect("count fits scalar");
    let half = T::lit(0.5);
    let mut total = T::zero();
    for (r, target) in targets.iter().enumerate() {
        let Some(t) = target else { continue };
        if t.len() != pred.cols() {
            return Err(Error::dims("smooth_l1 target width", pred.cols(), t.len()));
        }
        for c in 0..pred.cols() {
            let d = pred.get(r, c) - t[c];
            let (loss, slope) = if d.abs() < T::one() { (half * d * d, d) } else { (d.abs() - half, d.signum()) };
            total += loss;
            grad.set(r, c, slope / n);
        }
    }
    Ok((total / n, grad))
}

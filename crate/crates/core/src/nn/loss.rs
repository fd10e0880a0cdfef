use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(Error::Shape {
            op: "loss labels",
            lhs: logits.shape(),
            rhs: (labels.len(), 1),
        });
    }
    let classes = logits.cols();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean softmax cross-entropy and its exact gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    check_labels(logits, labels)?;
    let n = logits.rows();
    if n == 0 {
        return Ok((0.0, logits.clone()));
    }
    let mut grad = Matrix::zeros(n, logits.cols());
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_sum = sum.ln() + max;
        loss += log_sum - row[y];
        for (c, z) in row.iter().enumerate() {
            grad[(i, c)] = (z - log_sum).exp() / n as f64;
        }
        grad[(i, y)] -= 1.0 / n as f64;
    }
    Ok((loss / n as f64, grad))
}

/// Cross-entropy restricted to the logit columns in `active`: the other
/// columns are ignored by the softmax and receive zero gradient.
pub fn cross_entropy_within(logits: &Matrix, labels: &[usize], active: &Range<usize>) -> Result<(f64, Matrix)> {
    check_labels(logits, labels)?;
    if active.end > logits.cols() || active.is_empty() {
        return Err(Error::Shape {
            op: "active logit range",
            lhs: logits.shape(),
            rhs: (active.start, active.end),
        });
    }
    if let Some(&label) = labels.iter().find(|l| !active.contains(l)) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: active.end,
        });
    }
    let cols: Vec<usize> = active.clone().collect();
    let shifted: Vec<usize> = labels.iter().map(|l| l - active.start).collect();
    let (loss, sub) = cross_entropy(&logits.gather_cols(&cols), &shifted)?;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        grad.row_mut(i)[active.clone()].copy_from_slice(sub.row(i));
    }
    Ok((loss, grad))
}

/// `0.5 * mean_i ||logits_i - onehot(y_i)||^2`; quadratic, used for exactness checks.
pub fn half_squared_error(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    check_labels(logits, labels)?;
    let n = logits.rows().max(1) as f64;
    let mut grad = logits.clone();
    for (i, &y) in labels.iter().enumerate() {
        grad[(i, y)] -= 1.0;
    }
    let loss = 0.5 * grad.data().iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, grad.scale(1.0 / n)))
}

/// Loss selector shared by training code and the gradient checker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    HalfSquared,
}

impl LossKind {
    pub fn eval(self, logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
        match self {
            LossKind::CrossEntropy => cross_entropy(logits, labels),
            LossKind::HalfSquared => half_squared_error(logits, labels),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Matrix::zeros(3, 5);
        let (loss, _) = cross_entropy(&logits, &[0, 2, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn saturated_margin_gives_zero() {
        let logits = Matrix::from_rows(&[[500.0, 0.0, 0.0]]);
        let (loss, grad) = cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-12);
        assert!(grad.max_abs() < 1e-12);
    }

    #[test]
    fn masked_matches_sliced_logits() {
        let logits = Matrix::from_rows(&[[9.0, 0.3, -1.2], [-4.0, 1.1, 0.4]]);
        let (loss, grad) = cross_entropy_within(&logits, &[2, 1], &(1..3)).unwrap();
        let sliced = Matrix::from_rows(&[[0.3, -1.2], [1.1, 0.4]]);
        let (want, wgrad) = cross_entropy(&sliced, &[1, 0]).unwrap();
        assert_eq!(loss, want);
        assert_eq!(grad.col(0), vec![0.0, 0.0]);
        assert_eq!(grad.col(2), wgrad.col(1));
        assert!(cross_entropy_within(&logits, &[0, 1], &(1..3)).is_err());
    }

    #[test]
    fn out_of_range_label() {
        let logits = Matrix::zeros(1, 2);
        assert!(matches!(
            cross_entropy(&logits, &[2]),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let logits = Matrix::from_rows(&[[0.3, -1.2, 2.0], [1.1, 0.4, -0.7]]);
        let labels = [2, 0];
        let (_, grad) = cross_entropy(&logits, &labels).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            for c in 0..3 {
                let mut up = logits.clone();
                up[(i, c)] += h;
                let mut dn = logits.clone();
                dn[(i, c)] -= h;
                let fd = (cross_entropy(&up, &labels).unwrap().0 - cross_entropy(&dn, &labels).unwrap().0) / (2.0 * h);
                assert!((fd - grad[(i, c)]).abs() < 1e-6, "({i},{c})");
            }
        }
    }
}

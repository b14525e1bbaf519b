use crate::error::{Error, Result};

use super::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `probabilities` holds `P(class 1)` per example (`B` or `B×1`).
    Binary,
    /// `probabilities` is `B×K`, each row a distribution.
    Categorical,
}

/// Mean over the batch of `−log p(target)`, each term optionally multiplied
/// by the class weight of its target.
// negated comparisons reject NaN inputs as well
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn loss<S: Scalar>(
    kind: LossKind,
    probabilities: &Tensor<S>,
    targets: &[usize],
    class_weights: Option<&[S]>,
) -> Result<S> {
    let batch = targets.len();
    if batch == 0 {
        return Err(Error::Size("loss over an empty batch".into()));
    }
    let classes = match kind {
        LossKind::Binary => 2,
        LossKind::Categorical => match *probabilities.shape() {
            [b, k] if b == batch => k,
            ref s => {
                return Err(Error::Shape(format!(
                    "categorical probabilities {s:?} for {batch} targets"
                )))
            }
        },
    };
    if kind == LossKind::Binary && probabilities.len() != batch {
        return Err(Error::Shape(format!(
            "binary probabilities {:?} for {batch} targets",
            probabilities.shape()
        )));
    }
    if let Some(w) = class_weights {
        if w.len() != classes || w.iter().any(|&v| !(v > S::zero())) {
            return Err(Error::Domain(format!(
                "class weights must be {classes} positive values"
            )));
        }
    }
    let tol = S::lit(1e-6);
    let mut total = S::zero();
    for (b, &t) in targets.iter().enumerate() {
        if t >= classes {
            return Err(Error::Domain(format!("target {t} outside {classes} classes")));
        }
        let p = match kind {
            LossKind::Binary => {
                let p = probabilities.data()[b];
                if !(p > S::zero() && p < S::one()) {
                    return Err(Error::Domain(format!("binary probability {p} not in (0, 1)")));
                }
                if t == 1 {
                    p
                } else {
                    S::one() - p
                }
            }
            LossKind::Categorical => {
                let row = &probabilities.data()[b * classes..(b + 1) * classes];
                let sum: S = row.iter().copied().sum();
                if row.iter().any(|&v| !(v >= S::zero())) || (sum - S::one()).abs() > tol {
                    return Err(Error::Domain(format!("row {b} is not a distribution")));
                }
                if !(row[t] > S::zero()) {
                    return Err(Error::Domain(format!("row {b} gives its target zero mass")));
                }
                row[t]
            }
        };
        let w = class_weights.map_or(S::one(), |w| w[t]);
        total += -w * p.ln();
    }
    Ok(total / S::lit(batch as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_half_is_ln2() {
        let p = Tensor::<f64>::from_f64([1], &[0.5]).unwrap();
        let l = loss(LossKind::Binary, &p, &[1], None).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn uniform_six_is_ln6() {
        let p = Tensor::<f64>::full([2, 6], 1.0 / 6.0);
        let l = loss(LossKind::Categorical, &p, &[0, 4], None).unwrap();
        assert!((l - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn class_weight_scales_linearly() {
        let p = Tensor::<f64>::from_f64([2], &[0.3, 0.8]).unwrap();
        let base = loss(LossKind::Binary, &p, &[1, 1], None).unwrap();
        let weighted = loss(LossKind::Binary, &p, &[1, 1], Some(&[1.0, 2.0])).unwrap();
        assert_eq!(weighted, 2.0 * base);
    }

    #[test]
    fn invalid_probabilities_are_domain_errors() {
        let p = Tensor::<f64>::from_f64([1], &[1.0]).unwrap();
        assert!(matches!(loss(LossKind::Binary, &p, &[1], None), Err(Error::Domain(_))));
        let q = Tensor::<f64>::from_f64([1, 2], &[0.7, 0.7]).unwrap();
        assert!(matches!(loss(LossKind::Categorical, &q, &[0], None), Err(Error::Domain(_))));
        let z = Tensor::<f64>::from_f64([1, 2], &[1.0, 0.0]).unwrap();
        assert!(matches!(loss(LossKind::Categorical, &z, &[1], None), Err(Error::Domain(_))));
    }
}

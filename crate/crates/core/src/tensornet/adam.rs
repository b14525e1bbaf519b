use super::{ParamStore, Scalar};

/// Bias-corrected Adam. Moments live on the parameters; the step counter here.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: u64,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: 0,
        }
    }

    /// Applies one update from the `grad` slots. Frozen parameters and padding
    /// rows are left untouched.
    pub fn step<S: Scalar>(&mut self, params: &mut ParamStore<S>) {
        self.steps += 1;
        let t = self.steps as i32;
        let (b1, b2) = (S::lit(self.beta1), S::lit(self.beta2));
        let one = S::one();
        let c1 = S::lit(1.0 - self.beta1.powi(t));
        let c2 = S::lit(1.0 - self.beta2.powi(t));
        let lr = S::lit(self.learning_rate);
        let eps = S::lit(self.epsilon);
        for p in params.iter_mut() {
            let range = p.trainable_indices();
            let g = &p.grad.data()[range.clone()];
            let m = &mut p.adam_m.data_mut()[range.clone()];
            for (mi, &gi) in m.iter_mut().zip(g) {
                *mi = b1 * *mi + (one - b1) * gi;
            }
            let v = &mut p.adam_v.data_mut()[range.clone()];
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi = b2 * *vi + (one - b2) * gi * gi;
            }
            let (m, v) = (&p.adam_m.data()[range.clone()], &p.adam_v.data()[range.clone()]);
            let theta = &mut p.value.data_mut()[range];
            for ((th, &mi), &vi) in theta.iter_mut().zip(m).zip(v) {
                let m_hat = mi / c1;
                let v_hat = vi / c2;
                *th -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::{Parameter, Tensor};

    fn store(grad: f64, frozen: bool) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.add(Parameter::new("p", Tensor::full([3], 0.5)).frozen(frozen));
        s.get_mut(id).grad.data_mut().fill(grad);
        s
    }

    #[test]
    fn zero_gradient_leaves_value() {
        let mut s = store(0.0, false);
        Adam::new(0.01).step(&mut s);
        assert!(s.iter().all(|(_, p)| p.value.data().iter().all(|&v| v == 0.5)));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store(1.0, false);
        Adam::new(0.01).step(&mut s);
        // m̂ = v̂ = 1 on step 1, so Δ = −0.01 / (1 + 1e-8).
        let expected = 0.5 - 0.01 / (1.0 + 1e-8);
        for (_, p) in s.iter() {
            for &v in p.value.data() {
                assert!((v - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frozen_and_zero_lr_are_unchanged() {
        let mut s = store(3.0, true);
        Adam::new(0.01).step(&mut s);
        assert!(s.iter().all(|(_, p)| p.value.data().iter().all(|&v| v == 0.5)));
        let mut s = store(3.0, false);
        let before = s.clone();
        Adam::new(0.0).step(&mut s);
        assert_eq!(s.values(), before.values());
    }

    #[test]
    fn pad_row_is_not_updated() {
        let mut s = ParamStore::<f64>::new();
        let id = s.add(Parameter::new("emb", Tensor::zeros([3, 2])).with_pad_row());
        s.get_mut(id).grad.data_mut().fill(1.0);
        let mut adam = Adam::new(0.1);
        for _ in 0..5 {
            adam.step(&mut s);
        }
        let v = s.get(id).value.data();
        assert_eq!(&v[..2], &[0.0, 0.0]);
        assert!(v[2..].iter().all(|&x| x < 0.0));
    }
}

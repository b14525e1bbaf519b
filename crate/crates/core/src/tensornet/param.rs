use super::{Gradients, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
    pub adam_m: Tensor<S>,
    pub adam_v: Tensor<S>,
    pub frozen: bool,
    /// Row 0 is a padding row: kept at zero and excluded from updates.
    pub pad_row: bool,
}

impl<S: Scalar> Parameter<S> {
    pub fn new(name: impl Into<String>, value: Tensor<S>) -> Self {
        let zeros = Tensor::zeros(value.shape().to_vec());
        Parameter {
            name: name.into(),
            grad: zeros.clone(),
            adam_m: zeros.clone(),
            adam_v: zeros,
            value,
            frozen: false,
            pad_row: false,
        }
    }

    pub fn frozen(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn with_pad_row(mut self) -> Self {
        self.pad_row = true;
        self
    }

    /// Number of leading values belonging to the padding row.
    pub fn pad_len(&self) -> usize {
        if self.pad_row {
            self.value.shape().iter().skip(1).product()
        } else {
            0
        }
    }

    /// Flat indices that training may change.
    pub fn trainable_indices(&self) -> std::ops::Range<usize> {
        if self.frozen {
            0..0
        } else {
            self.pad_len()..self.value.len()
        }
    }
}

/// Ordered collection of parameters; ids are positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<S> {
    params: Vec<Parameter<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, param: Parameter<S>) -> ParamId {
        self.params.push(param);
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<S>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<S>> {
        self.params.iter_mut()
    }

    /// Total number of coordinates that training may change.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().map(|p| p.trainable_indices().len()).sum()
    }

    /// Copies gradients into the `grad` slots; parameters without a gradient
    /// (frozen or unused) get zeros. The padding row's gradient is zeroed.
    pub fn set_grads(&mut self, grads: &Gradients<S>) {
        for (i, p) in self.params.iter_mut().enumerate() {
            match grads.param(ParamId(i)) {
                Some(g) if !p.frozen => p.grad.data_mut().copy_from_slice(g.data()),
                _ => p.grad.data_mut().fill(S::zero()),
            }
            let pad = p.pad_len();
            p.grad.data_mut()[..pad].fill(S::zero());
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(S::zero());
        }
    }

    /// Snapshot of all parameter values.
    pub fn values(&self) -> Vec<Tensor<S>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore_values(&mut self, values: &[Tensor<S>]) {
        assert_eq!(values.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(values) {
            assert!(p.value.same_shape(v));
            p.value.data_mut().copy_from_slice(v.data());
        }
    }
}

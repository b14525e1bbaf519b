//! Central finite-difference checks against analytic gradients (64-bit).
//!
//! The numeric derivative is the Richardson combination
//! `(4·D(h/2) − D(h)) / 3` of two central differences, which cancels the
//! `h²` truncation term; this matters for coordinates whose gradient is
//! orders of magnitude below the loss curvature.
//!
//! A coordinate whose ±step evaluations change a ReLU sign or a max-pool
//! argmax (see [`Graph::kink_signature`]) straddles a non-differentiable
//! point; it is skipped and counted instead of compared.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{Gradients, Graph, NodeId, ParamId, ParamStore, Scalar, Tensor};

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CheckReport {
    pub max_error: f64,
    pub checked: usize,
    /// Coordinates skipped because the perturbation crossed a kink.
    pub skipped: usize,
    /// Analytic and numeric values at the worst coordinate.
    pub worst: (f64, f64),
}

impl CheckReport {
    fn merge(self, other: CheckReport) -> CheckReport {
        let worst = if other.max_error > self.max_error {
            other.worst
        } else {
            self.worst
        };
        CheckReport {
            max_error: self.max_error.max(other.max_error),
            checked: self.checked + other.checked,
            skipped: self.skipped + other.skipped,
            worst,
        }
    }

    /// `probes` holds `(loss, signature)` at `+h, −h, +h/2, −h/2`.
    fn record(&mut self, base: u64, probes: [(f64, u64); 4], analytic: f64, step: f64) {
        if probes.iter().any(|&(_, sig)| sig != base) {
            self.skipped += 1;
            return;
        }
        self.checked += 1;
        let wide = (probes[0].0 - probes[1].0) / (2.0 * step);
        let narrow = (probes[2].0 - probes[3].0) / step;
        let numeric = (4.0 * narrow - wide) / 3.0;
        let e = relative_error(analytic, numeric);
        if e > self.max_error {
            self.max_error = e;
            self.worst = (analytic, numeric);
        }
    }
}

fn offsets(step: f64) -> [f64; 4] {
    [step, -step, step / 2.0, -step / 2.0]
}

/// Compares `analytic` with central differences of `loss` on every trainable
/// parameter coordinate, or on a seeded sample of `sample.0` coordinates.
/// `loss` returns the loss value and the graph's kink signature.
pub fn gradient_check_fn<F>(
    params: &mut ParamStore<f64>,
    analytic: &Gradients<f64>,
    step: f64,
    sample_size: Option<(usize, u64)>,
    mut loss: F,
) -> Result<CheckReport>
where
    F: FnMut(&ParamStore<f64>) -> Result<(f64, u64)>,
{
    let mut coords: Vec<(ParamId, usize)> = Vec::new();
    for (id, p) in params.iter() {
        coords.extend(p.trainable_indices().map(|i| (id, i)));
    }
    if let Some((n, seed)) = sample_size {
        if n < coords.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> = sample(&mut rng, coords.len(), n).into_vec();
            picked.sort_unstable();
            coords = picked.into_iter().map(|i| coords[i]).collect();
        }
    }
    let (_, base) = loss(params)?;
    let mut report = CheckReport::default();
    for (id, i) in coords {
        let original = params.get(id).value.data()[i];
        let mut probes = [(0.0, 0); 4];
        for (probe, delta) in probes.iter_mut().zip(offsets(step)) {
            params.get_mut(id).value.data_mut()[i] = original + delta;
            *probe = loss(params)?;
        }
        params.get_mut(id).value.data_mut()[i] = original;
        let a = analytic.param(id).map_or(0.0, |g| g.data()[i]);
        report.record(base, probes, a, step);
    }
    Ok(report)
}

/// Moves every parameter value (PAD rows excepted) to uniform(−limit,
/// limit), so that checks run at a generic point instead of the zero-bias
/// initialisation where many units sit exactly on a kink.
pub fn randomize_parameters<S: Scalar>(params: &mut ParamStore<S>, limit: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in params.iter_mut() {
        let skip = p.pad_len();
        for v in &mut p.value.data_mut()[skip..] {
            *v = S::lit(rng.random_range(-limit..limit));
        }
    }
}

/// Checks gradients with respect to graph inputs and parameters of a
/// scalar-valued graph built by `build` from variable nodes.
pub fn check_graph_gradients<F>(
    params: &mut ParamStore<f64>,
    inputs: &[Tensor<f64>],
    step: f64,
    build: F,
) -> Result<CheckReport>
where
    F: Fn(&mut Graph<'_, f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |store: &ParamStore<f64>, xs: &[Tensor<f64>]| -> Result<(f64, u64)> {
        let mut g = Graph::new(store);
        let ids: Vec<NodeId> = xs.iter().map(|x| g.input(x.clone())).collect();
        let out = build(&mut g, &ids)?;
        Ok((g.value(out).data()[0], g.kink_signature()))
    };

    let (input_grads, analytic) = {
        let mut g = Graph::new(params);
        let ids: Vec<NodeId> = inputs.iter().map(|x| g.variable(x.clone())).collect();
        let out = build(&mut g, &ids)?;
        let grads = g.backward(out)?;
        let per_input: Vec<Tensor<f64>> = ids
            .iter()
            .zip(inputs)
            .map(|(&id, x)| {
                grads
                    .node(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(x.shape().to_vec()))
            })
            .collect();
        (per_input, grads)
    };

    let mut report = CheckReport::default();
    let mut xs = inputs.to_vec();
    let (_, base) = eval(params, &xs)?;
    for k in 0..xs.len() {
        for i in 0..xs[k].len() {
            let original = xs[k].data()[i];
            let mut probes = [(0.0, 0); 4];
            for (probe, delta) in probes.iter_mut().zip(offsets(step)) {
                xs[k].data_mut()[i] = original + delta;
                *probe = eval(params, &xs)?;
            }
            xs[k].data_mut()[i] = original;
            report.record(base, probes, input_grads[k].data()[i], step);
        }
    }
    let from_params = gradient_check_fn(params, &analytic, step, None, |store| eval(store, &xs))?;
    Ok(report.merge(from_params))
}

//! Multilayer perceptron for regression: rectified hidden layers, linear
//! output, mini-batch gradient descent on mean squared error with an
//! adaptive step size.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{MlpParams, Predictor};

/// Step-size floor below which training stops.
const MIN_LEARNING_RATE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// Shape (fan_out, fan_in).
    w: Array2<f64>,
    b: Array1<f64>,
}

impl DenseLayer {
    fn glorot(fan_out: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
        DenseLayer { w, b: Array1::zeros(fan_out) }
    }

    fn zeros_like(&self) -> Self {
        DenseLayer { w: Array2::zeros(self.w.raw_dim()), b: Array1::zeros(self.b.len()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    hidden: Vec<DenseLayer>,
    output: DenseLayer,
    n_features: usize,
}

struct Gradients {
    hidden: Vec<DenseLayer>,
    output: DenseLayer,
}

impl MlpModel {
    fn init(n_features: usize, params: &MlpParams, rng: &mut ChaCha8Rng) -> Self {
        let mut hidden = Vec::with_capacity(params.hidden_layers);
        let mut fan_in = n_features;
        for _ in 0..params.hidden_layers {
            hidden.push(DenseLayer::glorot(params.hidden_width, fan_in, rng));
            fan_in = params.hidden_width;
        }
        let output = DenseLayer::glorot(1, fan_in, rng);
        MlpModel { hidden, output, n_features }
    }

    /// Batch forward pass returning predictions and every post-activation
    /// (index 0 is the input batch itself).
    fn forward(&self, x: ArrayView2<f64>) -> (Array1<f64>, Vec<Array2<f64>>) {
        let mut activations = vec![x.to_owned()];
        for layer in &self.hidden {
            let z = activations.last().unwrap().dot(&layer.w.t()) + &layer.b;
            activations.push(z.mapv(|v| v.max(0.0)));
        }
        let out = activations.last().unwrap().dot(&self.output.w.t()) + &self.output.b;
        (out.column(0).to_owned(), activations)
    }

    /// Mean squared error over the batch and its analytic gradient.
    fn loss_and_grad(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, Gradients) {
        let n = x.nrows() as f64;
        let (pred, activations) = self.forward(x);
        let err = &pred - &y;
        let loss = err.mapv(|e| e * e).sum() / n;

        // delta starts as dL/d(output) for the linear output layer
        let mut delta: Array2<f64> =
            err.mapv(|e| 2.0 * e / n).insert_axis(Axis(1));
        let grad_output = DenseLayer {
            w: delta.t().dot(&activations[self.hidden.len()]),
            b: delta.sum_axis(Axis(0)),
        };

        let mut grad_hidden: Vec<DenseLayer> = self.hidden.iter().map(|l| l.zeros_like()).collect();
        let mut upstream_w = &self.output.w;
        for l in (0..self.hidden.len()).rev() {
            // relu'(z) is 1 exactly where the stored activation is positive
            let mask = activations[l + 1].mapv(|a| if a > 0.0 { 1.0 } else { 0.0 });
            delta = delta.dot(upstream_w) * &mask;
            grad_hidden[l] = DenseLayer {
                w: delta.t().dot(&activations[l]),
                b: delta.sum_axis(Axis(0)),
            };
            upstream_w = &self.hidden[l].w;
        }
        (loss, Gradients { hidden: grad_hidden, output: grad_output })
    }

    fn apply_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.hidden.iter_mut().zip(&grads.hidden) {
            layer.w.scaled_add(-lr, &g.w);
            layer.b.scaled_add(-lr, &g.b);
        }
        self.output.w.scaled_add(-lr, &grads.output.w);
        self.output.b.scaled_add(-lr, &grads.output.b);
    }

    fn training_loss(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
        let (pred, _) = self.forward(x);
        let err = &pred - &y;
        err.mapv(|e| e * e).sum() / x.nrows() as f64
    }

    /// Every weight and bias as one flat vector: per layer the weight matrix
    /// in row-major order followed by the bias, output layer last. The
    /// counterpart of [`MlpModel::set_flat_params`] and the gradient layout
    /// of [`MlpModel::loss_gradient`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.extend(layer.w.iter());
            out.extend(layer.b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.flat_params().len();
        if flat.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has {} entries, model needs {expected}",
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            for v in layer.w.iter_mut() {
                *v = *it.next().unwrap();
            }
            for v in layer.b.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Smallest |pre-activation| any hidden unit sees on this batch. A
    /// finite-difference probe of the gradient is only trustworthy when this
    /// margin comfortably exceeds the probe step, away from the relu kink.
    pub fn min_preactivation_margin(&self, x: ArrayView2<f64>) -> f64 {
        let mut a = x.to_owned();
        let mut margin = f64::INFINITY;
        for layer in &self.hidden {
            let z = a.dot(&layer.w.t()) + &layer.b;
            for v in z.iter() {
                margin = margin.min(v.abs());
            }
            a = z.mapv(|v| v.max(0.0));
        }
        margin
    }

    /// Batch MSE and its analytic gradient, flattened in
    /// [`MlpModel::flat_params`] order. Exposed so the backward pass can be
    /// verified against finite differences from outside.
    pub fn loss_gradient(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, Vec<f64>) {
        let (loss, grads) = self.loss_and_grad(x, y);
        let mut flat = Vec::new();
        for g in grads.hidden.iter().chain(std::iter::once(&grads.output)) {
            flat.extend(g.w.iter());
            flat.extend(g.b.iter());
        }
        (loss, flat)
    }
}

impl Predictor for MlpModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut a = Array1::from_vec(x.to_vec());
        for layer in &self.hidden {
            a = (layer.w.dot(&a) + &layer.b).mapv(|v| v.max(0.0));
        }
        self.output.w.dot(&a)[0] + self.output.b[0]
    }
}

pub fn fit_mlp(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &MlpParams) -> Result<MlpModel> {
    params.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n != y.len() {
        return Err(Error::InvalidArgument(format!(
            "feature matrix has {} rows but targets have {}",
            n,
            y.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = MlpModel::init(x.ncols(), params, &mut rng);
    let batch = params.batch_size.min(n);

    let mut lr = params.learning_rate_init;
    let mut best_loss = f64::INFINITY;
    let mut stale_epochs = 0;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.max_iter {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let bx = Array2::from_shape_fn((chunk.len(), x.ncols()), |(i, j)| x[[chunk[i], j]]);
            let by = Array1::from_shape_fn(chunk.len(), |i| y[chunk[i]]);
            let (_, grads) = model.loss_and_grad(bx.view(), by.view());
            model.apply_step(&grads, lr);
        }
        let loss = model.training_loss(x, y);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if loss < best_loss {
            best_loss = loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= 2 {
                lr /= 5.0;
                stale_epochs = 0;
            }
        }
        if lr < MIN_LEARNING_RATE {
            break;
        }
    }
    Ok(model)
}

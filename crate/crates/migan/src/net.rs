//! Dense MLP machinery for the adversarial pair: batched forward pass,
//! manual backpropagation, RMSProp updates and critic weight clipping.
//!
//! Batches are row-major (`examples x features`). A forward pass caches the
//! per-layer activations; the next backward pass consumes the cache and fills
//! the gradient buffers, which the optimizer step then applies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;

const RMS_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu(f64),
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Optimizer and architecture knobs shared by the adversarial pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub rms_decay: f64,
    /// Critic weight-clip radius.
    pub clip_value: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub leaky_slope: f64,
    pub noise_dim: usize,
    pub hidden_width: usize,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    /// Stop early once both loss moving averages flatten out.
    pub early_stop: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            rms_decay: 0.9,
            clip_value: 0.01,
            batch_size: 50,
            iterations: 2000,
            leaky_slope: 0.2,
            noise_dim: 32,
            hidden_width: 64,
            critic_steps: 1,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone)]
struct Layer {
    /// `in x out`.
    weights: Mat,
    biases: Vec<f64>,
    activation: Activation,
    grad_weights: Mat,
    grad_biases: Vec<f64>,
    rms_weights: Mat,
    rms_biases: Vec<f64>,
}

impl Layer {
    fn new(weights: Mat, biases: Vec<f64>, activation: Activation) -> Self {
        let (rows, cols) = (weights.rows(), weights.cols());
        assert_eq!(biases.len(), cols);
        Self {
            weights,
            biases,
            activation,
            grad_weights: Mat::zeros(rows, cols),
            grad_biases: vec![0.0; cols],
            rms_weights: Mat::zeros(rows, cols),
            rms_biases: vec![0.0; cols],
        }
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    input: Mat,
    /// Pre-activations per layer.
    pre: Vec<Mat>,
    /// Post-activations per layer.
    post: Vec<Mat>,
}

#[derive(Debug, Clone)]
pub struct MlpNet {
    layers: Vec<Layer>,
    cache: Option<ForwardCache>,
}

/// One RMSProp update; shared by every parameter of every layer.
pub(crate) fn rmsprop_update(param: &mut f64, grad: f64, rms: &mut f64, lr: f64, decay: f64) {
    *rms = decay * *rms + (1.0 - decay) * grad * grad;
    *param -= lr * grad / (rms.sqrt() + RMS_EPS);
}

impl MlpNet {
    /// Fully connected net with the given layer widths. Hidden layers use
    /// `hidden`, the final layer `output`. Weights start uniform in
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`, biases at zero.
    pub fn new(dims: &[usize], hidden: Activation, output: Activation, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least one layer");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut weights = Mat::zeros(fan_in, fan_out);
            for w in weights.data_mut() {
                *w = rng.random_range(-bound..=bound);
            }
            let activation = if i + 2 == dims.len() { output } else { hidden };
            layers.push(Layer::new(weights, vec![0.0; fan_out], activation));
        }
        Self { layers, cache: None }
    }

    /// Five fully connected layers, leaky-ReLU hidden, raw linear output.
    pub fn generator(n_out: usize, hyper: &TrainHyper, rng: &mut impl Rng) -> Self {
        let w = hyper.hidden_width;
        Self::new(
            &[hyper.noise_dim, w, w, w, w, n_out],
            Activation::LeakyRelu(hyper.leaky_slope),
            Activation::Linear,
            rng,
        )
    }

    /// Three fully connected layers, leaky-ReLU throughout, scalar score.
    pub fn discriminator(n_in: usize, hyper: &TrainHyper, rng: &mut impl Rng) -> Self {
        let w = hyper.hidden_width;
        let act = Activation::LeakyRelu(hyper.leaky_slope);
        Self::new(&[n_in, w, w, 1], act, act, rng)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.biases.len())
            .sum()
    }

    /// Flat view of all parameters (weights row-major, then biases, per layer).
    pub fn param(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            let nw = layer.weights.data().len();
            if idx < nw {
                return layer.weights.data()[idx];
            }
            idx -= nw;
            if idx < layer.biases.len() {
                return layer.biases[idx];
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Add `delta` to one parameter in the flat ordering.
    pub fn nudge_param(&mut self, mut idx: usize, delta: f64) {
        for layer in &mut self.layers {
            let nw = layer.weights.data().len();
            if idx < nw {
                layer.weights.data_mut()[idx] += delta;
                return;
            }
            idx -= nw;
            if idx < layer.biases.len() {
                layer.biases[idx] += delta;
                return;
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat view of the gradient buffers, same ordering as [`MlpNet::param`].
    pub fn grad(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            let nw = layer.grad_weights.data().len();
            if idx < nw {
                return layer.grad_weights.data()[idx];
            }
            idx -= nw;
            if idx < layer.grad_biases.len() {
                return layer.grad_biases[idx];
            }
            idx -= layer.grad_biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn params_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().copied().chain(l.biases.iter().copied()))
    }

    /// Largest pre-activation magnitude close to a leaky-ReLU kink in the last
    /// cached forward, used by gradient checks to avoid differentiating across
    /// the non-smooth point.
    pub fn min_cached_preactivation(&self) -> Option<f64> {
        self.cache.as_ref().map(|cache| {
            cache
                .pre
                .iter()
                .flat_map(|m| m.data().iter())
                .fold(f64::INFINITY, |acc, z| acc.min(z.abs()))
        })
    }

    /// Batched forward pass, caching activations for backpropagation.
    pub fn forward(&mut self, input: &Mat) -> Mat {
        assert_eq!(input.cols(), self.input_dim(), "input width mismatch");
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let mut z = current.matmul(&layer.weights);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
                    *v += b;
                }
            }
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = layer.activation.apply(*v);
            }
            pre.push(z);
            post.push(a.clone());
            current = a;
        }
        self.cache = Some(ForwardCache { input: input.clone(), pre, post });
        current
    }

    /// Forward pass without touching the cache; safe on a shared reference.
    pub fn forward_frozen(&self, input: &Mat) -> Mat {
        assert_eq!(input.cols(), self.input_dim(), "input width mismatch");
        let mut current = input.clone();
        for layer in &self.layers {
            let mut z = current.matmul(&layer.weights);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
                    *v += b;
                }
            }
            for v in z.data_mut() {
                *v = layer.activation.apply(*v);
            }
            current = z;
        }
        current
    }

    /// Backpropagate an upstream gradient through the cached forward pass.
    /// Fills the parameter gradient buffers and returns the gradient with
    /// respect to the input batch.
    pub fn backward(&mut self, upstream: &Mat) -> Result<Mat, NetError> {
        let cache = self.cache.take().ok_or(NetError::NoForwardCache)?;
        assert_eq!(upstream.rows(), cache.input.rows(), "batch size mismatch");
        assert_eq!(upstream.cols(), self.output_dim(), "output width mismatch");

        let mut delta = upstream.clone();
        for l in (0..self.layers.len()).rev() {
            // delta <- upstream .* act'(pre)
            let pre = &cache.pre[l];
            for (d, z) in delta.data_mut().iter_mut().zip(pre.data()) {
                *d *= self.layers[l].activation.derivative(*z);
            }
            let below: &Mat = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let layer = &mut self.layers[l];
            layer.grad_weights = below.transpose().matmul(&delta);
            for c in 0..layer.grad_biases.len() {
                layer.grad_biases[c] = (0..delta.rows()).map(|r| delta.get(r, c)).sum();
            }
            delta = delta.matmul(&layer.weights.transpose());
        }
        Ok(delta)
    }

    /// Apply the buffered gradients with RMSProp; clamp every parameter to
    /// `[-clip, +clip]` when a critic clip radius is given.
    pub fn rmsprop_step(&mut self, hyper: &TrainHyper, clip: Option<f64>) {
        let (lr, decay) = (hyper.learning_rate, hyper.rms_decay);
        for layer in &mut self.layers {
            for ((w, g), v) in layer
                .weights
                .data_mut()
                .iter_mut()
                .zip(layer.grad_weights.data())
                .zip(layer.rms_weights.data_mut())
            {
                rmsprop_update(w, *g, v, lr, decay);
            }
            for ((b, g), v) in layer
                .biases
                .iter_mut()
                .zip(&layer.grad_biases)
                .zip(layer.rms_biases.iter_mut())
            {
                rmsprop_update(b, *g, v, lr, decay);
            }
            if let Some(c) = clip {
                for w in layer.weights.data_mut() {
                    *w = w.clamp(-c, c);
                }
                for b in layer.biases.iter_mut() {
                    *b = b.clamp(-c, c);
                }
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layers: self
                .layers
                .iter()
                .map(|l| LayerCheckpoint {
                    fan_in: l.weights.rows(),
                    fan_out: l.weights.cols(),
                    weights: l.weights.data().to_vec(),
                    biases: l.biases.clone(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self, NetError> {
        let mut layers = Vec::with_capacity(checkpoint.layers.len());
        let mut prev_out: Option<usize> = None;
        for (i, l) in checkpoint.layers.iter().enumerate() {
            if l.weights.len() != l.fan_in * l.fan_out {
                return Err(NetError::Checkpoint(format!(
                    "layer {i}: {} weights for shape {}x{}",
                    l.weights.len(),
                    l.fan_in,
                    l.fan_out
                )));
            }
            if l.biases.len() != l.fan_out {
                return Err(NetError::Checkpoint(format!("layer {i}: bias length mismatch")));
            }
            if let Some(prev) = prev_out {
                if prev != l.fan_in {
                    return Err(NetError::Checkpoint(format!(
                        "layer {i}: fan_in {} does not chain with previous fan_out {prev}",
                        l.fan_in
                    )));
                }
            }
            prev_out = Some(l.fan_out);
            layers.push(Layer::new(
                Mat::from_vec(l.fan_in, l.fan_out, l.weights.clone()),
                l.biases.clone(),
                l.activation,
            ));
        }
        if layers.is_empty() {
            return Err(NetError::Checkpoint("checkpoint has no layers".into()));
        }
        Ok(Self { layers, cache: None })
    }
}

/// Serializable parameter snapshot: layer shapes plus row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layers: Vec<LayerCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_layer(weights: Mat, biases: Vec<f64>, activation: Activation) -> MlpNet {
        MlpNet::from_checkpoint(&Checkpoint {
            layers: vec![LayerCheckpoint {
                fan_in: weights.rows(),
                fan_out: weights.cols(),
                weights: weights.data().to_vec(),
                biases,
                activation,
            }],
        })
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let eye = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut net = single_layer(eye, vec![0.0, 0.0], Activation::Linear);
        let input = Mat::from_rows(&[vec![3.0, -4.0], vec![0.5, 2.0]]);
        assert_eq!(net.forward(&input), input);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let mut net = single_layer(Mat::zeros(3, 2), vec![0.0, 0.0], Activation::LeakyRelu(0.2));
        let input = Mat::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert_eq!(net.forward(&input).data(), &[0.0, 0.0]);
    }

    #[test]
    fn forward_matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = MlpNet::new(
            &[4, 7, 5, 2],
            Activation::LeakyRelu(0.2),
            Activation::Linear,
            &mut rng,
        );
        let mut input = Mat::zeros(6, 4);
        for v in input.data_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let fast = net.forward(&input);

        // Independent re-computation with plain nested loops.
        let mut rows: Vec<Vec<f64>> = (0..input.rows()).map(|r| input.row(r).to_vec()).collect();
        for l in 0..net.layer_count() {
            let mut next = Vec::new();
            for row in &rows {
                let fan_out = net.layers[l].weights.cols();
                let mut out = vec![0.0; fan_out];
                for (c, o) in out.iter_mut().enumerate() {
                    let mut acc = net.layers[l].biases[c];
                    for (i, x) in row.iter().enumerate() {
                        acc += x * net.layers[l].weights.get(i, c);
                    }
                    *o = net.layers[l].activation.apply(acc);
                }
                next.push(out);
            }
            rows = next;
        }
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((fast.get(r, c) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        let mut net = single_layer(Mat::zeros(3, 1), vec![0.0], Activation::Linear);
        let input = Mat::from_rows(&[vec![1.5, -2.0, 0.25]]);
        net.forward(&input);
        let upstream = Mat::from_rows(&[vec![1.0]]);
        net.backward(&upstream).unwrap();
        for (i, x) in input.row(0).iter().enumerate() {
            assert_eq!(net.grad(i), *x);
        }
        // Bias gradient is the upstream itself.
        assert_eq!(net.grad(3), 1.0);
    }

    #[test]
    fn leaky_gradient_scales_by_slope() {
        let slope = 0.2;
        let mut net = single_layer(
            Mat::from_rows(&[vec![1.0]]),
            vec![0.0],
            Activation::LeakyRelu(slope),
        );
        let input = Mat::from_rows(&[vec![-2.0]]); // negative pre-activation
        net.forward(&input);
        net.backward(&Mat::from_rows(&[vec![1.0]])).unwrap();
        assert_eq!(net.grad(0), slope * -2.0);
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut net = single_layer(Mat::zeros(1, 1), vec![0.0], Activation::Linear);
        assert!(matches!(
            net.backward(&Mat::from_rows(&[vec![1.0]])),
            Err(NetError::NoForwardCache)
        ));
    }

    /// Central finite differences against analytic gradients over many random
    /// shapes; parameters whose perturbation sits near a leaky-ReLU kink are
    /// skipped.
    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut checked = 0usize;
        for seed in 0..24u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims: Vec<usize> = match seed % 4 {
                0 => vec![3, 5, 2],
                1 => vec![4, 6, 6, 1],
                2 => vec![2, 4, 4, 4, 3],
                _ => vec![5, 3, 1],
            };
            let output_act = if seed % 2 == 0 {
                Activation::Linear
            } else {
                Activation::LeakyRelu(0.2)
            };
            let mut net = MlpNet::new(&dims, Activation::LeakyRelu(0.2), output_act, &mut rng);
            let mut input = Mat::zeros(3, dims[0]);
            for v in input.data_mut() {
                *v = rng.random_range(-1.5..1.5);
            }
            // Loss: random linear functional of the outputs.
            let mut probe = Mat::zeros(3, *dims.last().unwrap());
            for v in probe.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let loss = |out: &Mat| -> f64 {
                out.data().iter().zip(probe.data()).map(|(o, p)| o * p).sum()
            };

            net.forward(&input);
            net.backward(&probe).unwrap();
            let analytic: Vec<f64> = (0..net.param_count()).map(|i| net.grad(i)).collect();

            for idx in 0..net.param_count() {
                net.nudge_param(idx, h);
                let plus = loss(&net.forward(&input));
                let kink_plus = net.min_cached_preactivation().unwrap();
                net.nudge_param(idx, -2.0 * h);
                let minus = loss(&net.forward(&input));
                let kink_minus = net.min_cached_preactivation().unwrap();
                net.nudge_param(idx, h);
                if kink_plus < 10.0 * h || kink_minus < 10.0 * h {
                    continue; // crossing the kink invalidates the difference
                }
                let numeric = (plus - minus) / (2.0 * h);
                let denom = analytic[idx].abs().max(numeric.abs()).max(1.0);
                worst = worst.max((analytic[idx] - numeric).abs() / denom);
                checked += 1;
            }
        }
        assert!(checked > 1000, "only {checked} parameters checked");
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[test]
    fn batch_permutation_permutes_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpNet::new(&[3, 8, 2], Activation::LeakyRelu(0.2), Activation::Linear, &mut rng);
        let input = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![-1.0, 0.5, 0.0],
            vec![2.0, -2.0, 1.0],
        ]);
        let permuted = Mat::from_rows(&[
            input.row(2).to_vec(),
            input.row(0).to_vec(),
            input.row(1).to_vec(),
        ]);
        let out = net.forward_frozen(&input);
        let out_permuted = net.forward_frozen(&permuted);
        assert_eq!(out.row(2), out_permuted.row(0));
        assert_eq!(out.row(0), out_permuted.row(1));
        assert_eq!(out.row(1), out_permuted.row(2));
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net =
            MlpNet::new(&[2, 4, 1], Activation::LeakyRelu(0.2), Activation::Linear, &mut rng);
        let before: Vec<f64> = net.params_iter().collect();
        net.forward(&Mat::zeros(1, 2));
        net.backward(&Mat::zeros(1, 1)).unwrap();
        // Zero input and zero upstream produce all-zero gradients.
        net.rmsprop_step(&TrainHyper::default(), None);
        let after: Vec<f64> = net.params_iter().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn clip_clamps_out_of_range_parameter() {
        let mut net = single_layer(Mat::from_rows(&[vec![0.02]]), vec![0.0], Activation::Linear);
        net.forward(&Mat::from_rows(&[vec![0.0]]));
        net.backward(&Mat::from_rows(&[vec![0.0]])).unwrap();
        net.rmsprop_step(&TrainHyper::default(), Some(0.01));
        assert_eq!(net.param(0), 0.01);
    }

    #[test]
    fn clip_invariant_holds_across_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let hyper = TrainHyper { learning_rate: 1e-2, ..TrainHyper::default() };
        let mut net = MlpNet::discriminator(4, &hyper, &mut rng);
        for step in 0..50 {
            let mut input = Mat::zeros(5, 4);
            for v in input.data_mut() {
                *v = rng.random_range(-3.0..3.0);
            }
            net.forward(&input);
            let mut upstream = Mat::zeros(5, 1);
            for v in upstream.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            net.backward(&upstream).unwrap();
            net.rmsprop_step(&hyper, Some(hyper.clip_value));
            for p in net.params_iter() {
                assert!(p.abs() <= hyper.clip_value, "step {step}: parameter {p} escaped clip");
            }
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        // Scalar oracle for the optimizer itself: f(w) = w^2, gradient 2w.
        let (mut w, mut v) = (1.0, 0.0);
        for _ in 0..500 {
            let grad = 2.0 * w;
            rmsprop_update(&mut w, grad, &mut v, 0.01, 0.99);
        }
        assert!(w.abs() < 1e-3, "|w| = {}", w.abs());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let net = MlpNet::generator(3, &TrainHyper::default(), &mut rng);
        let json = serde_json::to_string(&net.to_checkpoint()).unwrap();
        let restored =
            MlpNet::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
        let mut input = Mat::zeros(2, net.input_dim());
        for v in input.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        assert_eq!(net.forward_frozen(&input), restored.forward_frozen(&input));
        assert_eq!(json, serde_json::to_string(&restored.to_checkpoint()).unwrap());
    }

    #[test]
    fn checkpoint_rejects_mismatched_shapes() {
        let broken = Checkpoint {
            layers: vec![LayerCheckpoint {
                fan_in: 2,
                fan_out: 2,
                weights: vec![1.0; 3],
                biases: vec![0.0; 2],
                activation: Activation::Linear,
            }],
        };
        assert!(MlpNet::from_checkpoint(&broken).is_err());
    }

    #[test]
    fn generator_and_critic_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hyper = TrainHyper::default();
        let generator = MlpNet::generator(3, &hyper, &mut rng);
        assert_eq!(generator.layer_count(), 5);
        assert_eq!(generator.input_dim(), hyper.noise_dim);
        assert_eq!(generator.output_dim(), 3);
        let critic = MlpNet::discriminator(12, &hyper, &mut rng);
        assert_eq!(critic.layer_count(), 3);
        assert_eq!(critic.output_dim(), 1);
    }
}

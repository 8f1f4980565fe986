//! Stacked-autoencoder network with a softmax output.
//!
//! Training runs in three stages: a sigmoid autoencoder on the inputs, a
//! second one on the first hidden code, and a softmax layer on the second
//! code. The stacked encoders plus softmax are then fine-tuned end to end.
//! Every stage is full-batch gradient descent: a step that would raise the
//! loss is rejected and the learning rate halved, so the recorded loss never
//! increases.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    feature_matrix, rank_by, require_non_empty, ClassifierFactory, ClassifierKind, Hyper, Model, ModelFile, Trainer,
    TrainingMeta,
};
use crate::dataset::Dataset;
use crate::encoding::{decode_f64s, encode_f64s, EncodedMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    /// First hidden width; `None` means 100 per class.
    pub hidden1: Option<usize>,
    /// Second hidden width; `None` means 10 per class.
    pub hidden2: Option<usize>,
    /// Iteration cap for each autoencoder.
    pub ae_iterations: usize,
    pub softmax_iterations: usize,
    pub finetune_iterations: usize,
    pub l2_weight: f64,
    pub learning_rate: f64,
    /// Stop a stage early once an accepted step improves the loss by less
    /// than this fraction.
    pub tol: Option<f64>,
    pub memory_budget: u64,
    pub seed: u64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            hidden1: None,
            hidden2: None,
            ae_iterations: 400,
            softmax_iterations: 400,
            finetune_iterations: 400,
            l2_weight: 0.001,
            learning_rate: 0.1,
            tol: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            seed: 0,
        }
    }
}

impl NetParams {
    pub fn widths(&self, n_classes: usize) -> (usize, usize) {
        (
            self.hidden1.unwrap_or(100 * n_classes),
            self.hidden2.unwrap_or(10 * n_classes),
        )
    }

    fn to_json(self) -> Value {
        json!({
            "hidden1": self.hidden1,
            "hidden2": self.hidden2,
            "ae_iterations": self.ae_iterations,
            "softmax_iterations": self.softmax_iterations,
            "finetune_iterations": self.finetune_iterations,
            "l2_weight": self.l2_weight,
            "learning_rate": self.learning_rate,
            "tol": self.tol,
            "memory_budget": self.memory_budget,
            "seed": self.seed,
        })
    }
}

/// Fully connected layer, `out x in` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Dense {
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-r..=r));
        Dense {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.w.t());
        z += &self.b;
        z
    }

    fn step(&self, g: &Dense, lr: f64) -> Dense {
        Dense {
            w: &self.w - &(&g.w * lr),
            b: &self.b - &(&g.b * lr),
        }
    }

    fn squared_norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }
}

fn sigmoid(z: &mut Array2<f64>) {
    z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp()));
}

fn sigmoid_prime_from(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v * (1.0 - v))
}

/// Row-wise log-softmax.
fn log_softmax(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
}

fn l2(layers: &[Dense], lambda: f64) -> f64 {
    lambda / 2.0 * layers.iter().map(Dense::squared_norm).sum::<f64>()
}

fn weight_grad(delta: &Array2<f64>, input: ArrayView2<f64>, layer: &Dense, lambda: f64) -> Dense {
    let mut w = delta.t().dot(&input);
    w.scaled_add(lambda, &layer.w);
    Dense {
        w,
        b: delta.sum_axis(Axis(0)),
    }
}

/// Reconstruction loss `1/n sum_i ||x_hat_i - x_i||^2 + lambda/2 ||W||^2` of
/// a sigmoid autoencoder and its gradient with respect to `[encoder, decoder]`.
pub fn autoencoder_loss_grad(layers: &[Dense], x: ArrayView2<f64>, lambda: f64) -> (f64, Vec<Dense>) {
    let (enc, dec) = (&layers[0], &layers[1]);
    let n = x.nrows() as f64;
    let mut h = enc.forward(x);
    sigmoid(&mut h);
    let mut out = dec.forward(h.view());
    sigmoid(&mut out);
    let err = &out - &x;
    let loss = err.iter().map(|e| e * e).sum::<f64>() / n + l2(layers, lambda);

    let delta_out = &err * &sigmoid_prime_from(&out) * (2.0 / n);
    let g_dec = weight_grad(&delta_out, h.view(), dec, lambda);
    let delta_h = delta_out.dot(&dec.w) * sigmoid_prime_from(&h);
    let g_enc = weight_grad(&delta_h, x, enc, lambda);
    (loss, vec![g_enc, g_dec])
}

/// Cross-entropy `-1/n sum_i log p(y_i | x_i) + lambda/2 ||W||^2` of a
/// network with sigmoid hidden layers and a softmax output, and its gradient.
pub fn classifier_loss_grad(layers: &[Dense], x: ArrayView2<f64>, targets: &[usize], lambda: f64) -> (f64, Vec<Dense>) {
    let n = x.nrows() as f64;
    let last = layers.len() - 1;
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let input = if l == 0 { x.view() } else { acts[l - 1].view() };
        let mut z = layer.forward(input);
        if l < last {
            sigmoid(&mut z);
        } else {
            log_softmax(&mut z);
        }
        acts.push(z);
    }
    let logp = &acts[last];
    let nll: f64 = targets.iter().enumerate().map(|(i, &t)| -logp[[i, t]]).sum::<f64>() / n;
    let loss = nll + l2(layers, lambda);

    let mut delta = logp.mapv(f64::exp);
    for (i, &t) in targets.iter().enumerate() {
        delta[[i, t]] -= 1.0;
    }
    delta /= n;
    let mut grads = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let input = if l == 0 { x.view() } else { acts[l - 1].view() };
        grads.push(weight_grad(&delta, input, &layers[l], lambda));
        if l > 0 {
            delta = delta.dot(&layers[l].w) * sigmoid_prime_from(&acts[l - 1]);
        }
    }
    grads.reverse();
    (loss, grads)
}

/// Gradient descent with step rejection. Returns the loss before the first
/// iteration followed by the loss after each iteration.
fn descend(
    layers: &mut Vec<Dense>,
    iterations: usize,
    learning_rate: f64,
    tol: Option<f64>,
    mut f: impl FnMut(&[Dense]) -> (f64, Vec<Dense>),
) -> Vec<f64> {
    let (mut loss, mut grad) = f(layers);
    let mut history = vec![loss];
    let mut lr = learning_rate;
    for _ in 0..iterations {
        let trial: Vec<Dense> = layers.iter().zip(&grad).map(|(l, g)| l.step(g, lr)).collect();
        let (trial_loss, trial_grad) = f(&trial);
        if trial_loss.is_finite() && trial_loss <= loss {
            let gain = (loss - trial_loss) / loss.abs().max(f64::MIN_POSITIVE);
            *layers = trial;
            loss = trial_loss;
            grad = trial_grad;
            history.push(loss);
            if tol.is_some_and(|t| gain < t) {
                break;
            }
        } else {
            lr /= 2.0;
            history.push(loss);
            if lr < 1e-12 {
                break;
            }
        }
    }
    history
}

/// Loss curves of each training stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub autoencoder1: Vec<f64>,
    pub autoencoder2: Vec<f64>,
    pub softmax: Vec<f64>,
    pub finetune: Vec<f64>,
}

/// Peak working-set estimate in bytes for the first autoencoder stage, which
/// dominates: four copies of its parameters (weights, gradient, trial step
/// and trial gradient) plus the input and two sets of activations.
pub fn memory_estimate(n: usize, input: usize, hidden1: usize) -> u64 {
    let params = 2 * input * hidden1 + input + hidden1;
    let values = 4 * params as u64 + (n * input) as u64 + 4 * (n * (input + hidden1)) as u64;
    8 * values
}

#[derive(Debug, Clone)]
pub struct NetTrainer {
    pub params: NetParams,
}

impl Trainer for NetTrainer {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::AutoencoderNet
    }

    fn hyperparameters(&self) -> Value {
        self.params.to_json()
    }

    fn train(&self, train: &Dataset) -> Result<Box<dyn Model>> {
        net_train(train, self.params).map(|(m, _)| Box::new(m) as Box<dyn Model>)
    }
}

pub fn net_train(train: &Dataset, params: NetParams) -> Result<(NetModel, TrainingHistory)> {
    let start = Instant::now();
    require_non_empty(train)?;
    let k = train.n_classes();
    if k < 2 {
        return Err(Error::data("the network needs at least two classes"));
    }
    if !(params.learning_rate > 0.0 && params.l2_weight >= 0.0) {
        return Err(Error::config("network learning rate must be positive and l2_weight non-negative"));
    }
    let (h1, h2) = params.widths(k);
    if h1 == 0 || h2 == 0 {
        return Err(Error::config("hidden layer widths must be positive"));
    }
    let n = train.len();
    let d = train.feature_len();
    let needed = memory_estimate(n, d, h1);
    if needed > params.memory_budget {
        return Err(Error::MemoryBudget {
            needed,
            budget: params.memory_budget,
        });
    }

    let raw = feature_matrix(train);
    let x = ArrayView2::from_shape((n, d), &raw).expect("feature matrix shape");
    let targets = train.targets();
    let lambda = params.l2_weight;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut history = TrainingHistory::default();

    let mut ae1 = vec![Dense::init(&mut rng, d, h1), Dense::init(&mut rng, h1, d)];
    history.autoencoder1 = descend(&mut ae1, params.ae_iterations, params.learning_rate, params.tol, |l| {
        autoencoder_loss_grad(l, x, lambda)
    });
    let enc1 = ae1.swap_remove(0);
    let mut code1 = enc1.forward(x);
    sigmoid(&mut code1);

    let mut ae2 = vec![Dense::init(&mut rng, h1, h2), Dense::init(&mut rng, h2, h1)];
    history.autoencoder2 = descend(&mut ae2, params.ae_iterations, params.learning_rate, params.tol, |l| {
        autoencoder_loss_grad(l, code1.view(), lambda)
    });
    let enc2 = ae2.swap_remove(0);
    let mut code2 = enc2.forward(code1.view());
    sigmoid(&mut code2);
    drop(code1);

    let mut soft = vec![Dense::init(&mut rng, h2, k)];
    history.softmax = descend(&mut soft, params.softmax_iterations, params.learning_rate, params.tol, |l| {
        classifier_loss_grad(l, code2.view(), &targets, lambda)
    });
    drop(code2);

    let mut layers = vec![enc1, enc2, soft.remove(0)];
    history.finetune = descend(&mut layers, params.finetune_iterations, params.learning_rate, params.tol, |l| {
        classifier_loss_grad(l, x, &targets, lambda)
    });
    log::debug!(
        "net trained in {:.1}s, fine-tune loss {:?} -> {:?}",
        start.elapsed().as_secs_f64(),
        history.finetune.first(),
        history.finetune.last()
    );

    let model = NetModel {
        classes: train.classes().to_vec(),
        input_len: d,
        layers,
        meta: TrainingMeta {
            seed: params.seed,
            hyperparameters: params.to_json(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    };
    Ok((model, history))
}

#[derive(Debug, Clone)]
pub struct NetModel {
    classes: Vec<String>,
    input_len: usize,
    layers: Vec<Dense>,
    meta: TrainingMeta,
}

impl NetModel {
    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Layer widths from input to output.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_len];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    /// Class probabilities for each row of `x`.
    pub fn probabilities_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.forward(a.view());
            if l < last {
                sigmoid(&mut a);
            } else {
                log_softmax(&mut a);
            }
        }
        a.mapv_inplace(f64::exp);
        a
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row shape");
        self.probabilities_batch(view).into_raw_vec_and_offset().0
    }
}

impl Model for NetModel {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::AutoencoderNet
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn rank(&self, x: &[f64]) -> Vec<usize> {
        assert_eq!(x.len(), self.input_len, "network input length");
        let p = self.probabilities(x);
        rank_by(self.classes.len(), |c| -p[c])
    }

    fn rank_many(&self, xs: &[&[f64]]) -> Vec<Vec<usize>> {
        let mut flat = Vec::with_capacity(xs.len() * self.input_len);
        for x in xs {
            assert_eq!(x.len(), self.input_len, "network input length");
            flat.extend_from_slice(x);
        }
        let view = ArrayView2::from_shape((xs.len(), self.input_len), &flat).expect("batch shape");
        self.probabilities_batch(view)
            .rows()
            .into_iter()
            .map(|p| rank_by(self.classes.len(), |c| -p[c]))
            .collect()
    }

    fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    fn params_json(&self) -> Value {
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| {
                let w = l.w.as_standard_layout();
                json!({
                    "w": EncodedMatrix::new(l.w.nrows(), l.w.ncols(), w.as_slice().expect("standard layout")),
                    "b": encode_f64s(l.b.as_slice().expect("contiguous bias")),
                })
            })
            .collect();
        json!({ "layers": layers })
    }
}

#[derive(Deserialize)]
struct StoredLayer {
    w: EncodedMatrix,
    b: String,
}

#[derive(Deserialize)]
struct StoredNet {
    layers: Vec<StoredLayer>,
}

pub struct NetFactory;

impl ClassifierFactory for NetFactory {
    fn name(&self) -> &'static str {
        "net"
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::AutoencoderNet
    }

    fn description(&self) -> &'static str {
        "two stacked sigmoid autoencoders (100N and 10N units) with a softmax output, fine-tuned end to end"
    }

    fn trainer(&self, hyperparameters: &Value) -> Result<Box<dyn Trainer>> {
        let h = Hyper(hyperparameters);
        h.check_keys(&[
            "hidden1",
            "hidden2",
            "ae_iterations",
            "softmax_iterations",
            "finetune_iterations",
            "l2_weight",
            "learning_rate",
            "tol",
            "memory_budget",
            "seed",
        ])?;
        let d = NetParams::default();
        let tol = match hyperparameters.get("tol").filter(|v| !v.is_null()) {
            None => None,
            Some(_) => Some(h.f64_or("tol", 0.0)?),
        };
        Ok(Box::new(NetTrainer {
            params: NetParams {
                hidden1: h.opt_usize("hidden1")?,
                hidden2: h.opt_usize("hidden2")?,
                ae_iterations: h.usize_or("ae_iterations", d.ae_iterations)?,
                softmax_iterations: h.usize_or("softmax_iterations", d.softmax_iterations)?,
                finetune_iterations: h.usize_or("finetune_iterations", d.finetune_iterations)?,
                l2_weight: h.f64_or("l2_weight", d.l2_weight)?,
                learning_rate: h.f64_or("learning_rate", d.learning_rate)?,
                tol,
                memory_budget: h.u64_or("memory_budget", d.memory_budget)?,
                seed: h.u64_or("seed", d.seed)?,
            },
        }))
    }

    fn decode(&self, file: &ModelFile) -> Result<Box<dyn Model>> {
        let stored: StoredNet = file.params()?;
        let mut layers = Vec::with_capacity(stored.layers.len());
        let mut width = file.input_len;
        for (i, l) in stored.layers.iter().enumerate() {
            let w = l.w.decode()?;
            let b = decode_f64s(&l.b)?;
            if l.w.cols != width || b.len() != l.w.rows {
                return Err(Error::data(format!("network layer {i} has inconsistent shape")));
            }
            width = l.w.rows;
            layers.push(Dense {
                w: Array2::from_shape_vec((l.w.rows, l.w.cols), w).expect("decoded shape"),
                b: Array1::from(b),
            });
        }
        if layers.is_empty() || width != file.classes.len() {
            return Err(Error::data("network output width differs from the class count"));
        }
        Ok(Box::new(NetModel {
            classes: file.classes.clone(),
            input_len: file.input_len,
            layers,
            meta: file.meta(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ModelExt;
    use crate::dataset::test_util::dataset;

    fn params_of(layers: &[Dense]) -> usize {
        layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Mutable access to the `i`-th scalar parameter across all layers.
    fn param_mut(layers: &mut [Dense], mut i: usize) -> &mut f64 {
        for l in layers {
            if i < l.w.len() {
                return l.w.iter_mut().nth(i).unwrap();
            }
            i -= l.w.len();
            if i < l.b.len() {
                return &mut l.b[i];
            }
            i -= l.b.len();
        }
        unreachable!()
    }

    fn param(layers: &[Dense], i: usize) -> f64 {
        *param_mut(&mut layers.to_vec(), i)
    }

    fn check_gradient(layers: &[Dense], f: impl Fn(&[Dense]) -> (f64, Vec<Dense>)) -> f64 {
        let (_, grads) = f(layers);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..params_of(layers) {
            let mut plus = layers.to_vec();
            *param_mut(&mut plus, i) += h;
            let mut minus = layers.to_vec();
            *param_mut(&mut minus, i) -= h;
            let numeric = (f(&plus).0 - f(&minus).0) / (2.0 * h);
            let analytic = param(&grads, i);
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        worst
    }

    fn toy_input(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, d), || rng.random_range(0.0..1.0))
    }

    #[test]
    fn classifier_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layers = vec![Dense::init(&mut rng, 4, 3), Dense::init(&mut rng, 3, 2)];
        let mut layers = layers;
        layers[0].b = Array1::from(vec![0.1, -0.2, 0.3]);
        layers[1].b = Array1::from(vec![-0.05, 0.15]);
        let x = toy_input(&mut rng, 5, 4);
        let targets = [0, 1, 1, 0, 1];
        let worst = check_gradient(&layers, |l| classifier_loss_grad(l, x.view(), &targets, 0.001));
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn autoencoder_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let layers = vec![Dense::init(&mut rng, 4, 3), Dense::init(&mut rng, 3, 4)];
        let x = toy_input(&mut rng, 6, 4);
        let worst = check_gradient(&layers, |l| autoencoder_loss_grad(l, x.view(), 0.001));
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    fn two_class_toy() -> Dataset {
        let rows: Vec<(&str, Vec<f64>)> = (0..12)
            .map(|i| {
                let base = if i % 2 == 0 { 0.2 } else { 0.8 };
                let f: Vec<f64> = (0..10).map(|j| base + 0.01 * ((i * 7 + j * 3) % 5) as f64).collect();
                (if i % 2 == 0 { "a" } else { "b" }, f)
            })
            .collect();
        dataset(&rows)
    }

    fn quick() -> NetParams {
        NetParams {
            ae_iterations: 30,
            softmax_iterations: 30,
            finetune_iterations: 30,
            seed: 5,
            ..NetParams::default()
        }
    }

    #[test]
    fn layer_shapes_follow_class_count() {
        let (m, _) = net_train(&two_class_toy(), quick()).unwrap();
        assert_eq!(m.shape(), vec![10, 200, 20, 2]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let (m, _) = net_train(&two_class_toy(), quick()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = m.probabilities(&x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert_eq!(m.predict(&x), m.predict(&x));
            assert_eq!(m.predict_topk(&x, 1)[0], m.predict(&x));
        }
    }

    #[test]
    fn losses_never_increase() {
        let (m, h) = net_train(&two_class_toy(), quick()).unwrap();
        for curve in [&h.autoencoder1, &h.autoencoder2, &h.softmax, &h.finetune] {
            assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{curve:?}");
        }
        assert!(h.finetune.last() < h.finetune.first());
        let d = two_class_toy();
        for r in d.measurements() {
            assert_eq!(m.predict(&r.features), r.label);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let d = two_class_toy();
        let (a, _) = net_train(&d, quick()).unwrap();
        let (b, _) = net_train(&d, quick()).unwrap();
        assert_eq!(a.layers(), b.layers());
        let (c, _) = net_train(&d, NetParams { seed: 6, ..quick() }).unwrap();
        assert_ne!(a.layers(), c.layers());
    }

    #[test]
    fn memory_budget_is_enforced() {
        let params = NetParams {
            memory_budget: 1000,
            ..quick()
        };
        let err = net_train(&two_class_toy(), params).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
        assert!(err.to_string().contains("downsampl"), "{err}");
    }

    #[test]
    fn ranking_follows_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = NetModel {
            classes: vec!["a".into(), "b".into()],
            input_len: 1,
            layers: vec![Dense {
                w: Array2::from_shape_vec((2, 1), vec![0.0, 0.0]).unwrap(),
                b: Array1::from(vec![(0.9f64).ln(), (0.1f64).ln()]),
            }],
            meta: TrainingMeta {
                seed: 0,
                hyperparameters: Value::Null,
                wall_time_s: 0.0,
            },
        };
        let p = m.probabilities(&[rng.random_range(0.0..1.0)]);
        assert!((p[0] - 0.9).abs() < 1e-12);
        assert_eq!(m.predict(&[0.0]), "a");
        assert_eq!(m.predict_topk(&[0.0], 2), vec!["a", "b"]);
    }
}

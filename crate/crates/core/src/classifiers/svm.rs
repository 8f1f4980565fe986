//! Linear soft-margin SVM, one-versus-one.
//!
//! Each class pair gets a binary C-SVC solved in the dual by sequential
//! minimal optimization with second-order working-set selection. The lower
//! class index of a pair is the positive side, and a decision value of zero
//! counts as a vote for it.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    feature_matrix, rank_by, require_non_empty, ClassifierFactory, ClassifierKind, Hyper, Model, ModelFile, Trainer,
    TrainingMeta,
};
use crate::dataset::Dataset;
use crate::encoding::{decode_f64s, encode_f64s};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    /// Iteration cap in passes; one pass is one update per training point.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 1000,
        }
    }
}

impl SvmParams {
    fn to_json(self) -> Value {
        json!({ "c": self.c, "tol": self.tol, "max_passes": self.max_passes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`.
    pub dual_objective: f64,
    pub iterations: usize,
}

/// Dual objective of a C-SVC at `alpha`.
pub fn dual_objective(gram: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Solves `max sum(a) - 1/2 a'Qa` subject to `0 <= a <= c` and `y'a = 0`,
/// where `Q_ij = y_i y_j gram_ij` and `gram` is row-major `n x n`.
pub fn solve_binary(gram: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> BinarySolution {
    let n = y.len();
    assert_eq!(gram.len(), n * n, "gram must be n x n");
    let k = |i: usize, j: usize| gram[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                if -y[t] * grad[t] > gmax || i == usize::MAX {
                    gmax = -y[t] * grad[t];
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut j = usize::MAX;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let b = gmax + yg;
            if b > 0.0 {
                let a = (k(i, i) + k(t, t) - 2.0 * k(i, t)).max(TAU);
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let quad = (k(i, i) + k(j, j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k(i, i) + k(j, j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(i, t) * di + y[j] * k(j, t) * dj);
        }
    }

    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else {
        0.0
    };
    let dual = -alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() / 2.0;
    BinarySolution {
        dual_objective: dual,
        alpha,
        bias: -rho,
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    /// Positive class (lower index).
    pub a: usize,
    /// Negative class.
    pub b: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PairModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone)]
pub struct SvmTrainer {
    pub params: SvmParams,
}

impl Trainer for SvmTrainer {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Svm
    }

    fn hyperparameters(&self) -> Value {
        self.params.to_json()
    }

    fn train(&self, train: &Dataset) -> Result<Box<dyn Model>> {
        svm_train(train, self.params).map(|m| Box::new(m) as Box<dyn Model>)
    }
}

pub fn svm_train(train: &Dataset, params: SvmParams) -> Result<SvmModel> {
    let start = Instant::now();
    require_non_empty(train)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::config(format!("SVM C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(Error::config("SVM tolerance must be positive"));
    }
    let n_classes = train.n_classes();
    if n_classes < 2 {
        return Err(Error::data("SVM needs at least two classes"));
    }
    let dim = train.feature_len();
    let raw = feature_matrix(train);
    let x = ArrayView2::from_shape((train.len(), dim), &raw).expect("feature matrix shape");
    let gram: Array2<f64> = x.dot(&x.t());
    let targets = train.targets();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &t) in targets.iter().enumerate() {
        by_class[t].push(i);
    }

    let mut pairs = Vec::with_capacity(n_classes * (n_classes - 1) / 2);
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            let members: Vec<usize> = by_class[a].iter().chain(&by_class[b]).copied().collect();
            let y: Vec<f64> = members.iter().map(|&i| if targets[i] == a { 1.0 } else { -1.0 }).collect();
            let m = members.len();
            let mut sub = Vec::with_capacity(m * m);
            for &i in &members {
                sub.extend(members.iter().map(|&j| gram[[i, j]]));
            }
            let sol = solve_binary(&sub, &y, params.c, params.tol, params.max_passes.saturating_mul(m));
            let mut weights = vec![0.0; dim];
            for ((&i, &alpha), &yi) in members.iter().zip(&sol.alpha).zip(&y) {
                if alpha != 0.0 {
                    let coef = alpha * yi;
                    for (w, v) in weights.iter_mut().zip(x.row(i)) {
                        *w += coef * v;
                    }
                }
            }
            pairs.push(PairModel {
                a,
                b,
                weights,
                bias: sol.bias,
            });
        }
    }
    Ok(SvmModel {
        classes: train.classes().to_vec(),
        input_len: dim,
        pairs,
        meta: TrainingMeta {
            seed: 0,
            hyperparameters: params.to_json(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    classes: Vec<String>,
    input_len: usize,
    pairs: Vec<PairModel>,
    meta: TrainingMeta,
}

impl SvmModel {
    pub fn pairs(&self) -> &[PairModel] {
        &self.pairs
    }

    /// Votes and summed absolute decision values of won pairs, per class.
    pub fn tally(&self, x: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut strength = vec![0.0; k];
        for p in &self.pairs {
            let d = p.decision(x);
            let winner = if d >= 0.0 { p.a } else { p.b };
            votes[winner] += 1;
            strength[winner] += d.abs();
        }
        (votes, strength)
    }
}

impl Model for SvmModel {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Svm
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn rank(&self, x: &[f64]) -> Vec<usize> {
        assert_eq!(x.len(), self.input_len, "SVM input length");
        let (votes, strength) = self.tally(x);
        rank_by(self.classes.len(), |c| (std::cmp::Reverse(votes[c]), -strength[c]))
    }

    fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    fn params_json(&self) -> Value {
        let weights: Vec<f64> = self.pairs.iter().flat_map(|p| p.weights.iter().copied()).collect();
        let biases: Vec<f64> = self.pairs.iter().map(|p| p.bias).collect();
        json!({
            "pairs": self.pairs.iter().map(|p| [p.a, p.b]).collect::<Vec<_>>(),
            "weights": encode_f64s(&weights),
            "biases": encode_f64s(&biases),
        })
    }
}

#[derive(Deserialize)]
struct StoredSvm {
    pairs: Vec<[usize; 2]>,
    weights: String,
    biases: String,
}

pub struct SvmFactory;

impl ClassifierFactory for SvmFactory {
    fn name(&self) -> &'static str {
        "svm"
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Svm
    }

    fn description(&self) -> &'static str {
        "linear C-SVC, one-versus-one (c = 1, tol = 0.001, max_passes = 1000)"
    }

    fn trainer(&self, hyperparameters: &Value) -> Result<Box<dyn Trainer>> {
        let h = Hyper(hyperparameters);
        h.check_keys(&["c", "tol", "max_passes"])?;
        let d = SvmParams::default();
        Ok(Box::new(SvmTrainer {
            params: SvmParams {
                c: h.f64_or("c", d.c)?,
                tol: h.f64_or("tol", d.tol)?,
                max_passes: h.usize_or("max_passes", d.max_passes)?,
            },
        }))
    }

    fn decode(&self, file: &ModelFile) -> Result<Box<dyn Model>> {
        let stored: StoredSvm = file.params()?;
        let weights = decode_f64s(&stored.weights)?;
        let biases = decode_f64s(&stored.biases)?;
        let dim = file.input_len;
        let k = file.classes.len();
        let np = stored.pairs.len();
        if biases.len() != np || weights.len() != np * dim {
            return Err(Error::data("SVM weight arrays disagree with the pair list"));
        }
        if stored.pairs.iter().any(|&[a, b]| a >= b || b >= k) {
            return Err(Error::data("SVM pair indices out of range"));
        }
        let pairs = stored
            .pairs
            .iter()
            .enumerate()
            .map(|(i, &[a, b])| PairModel {
                a,
                b,
                weights: weights[i * dim..(i + 1) * dim].to_vec(),
                bias: biases[i],
            })
            .collect();
        Ok(Box::new(SvmModel {
            classes: file.classes.clone(),
            input_len: dim,
            pairs,
            meta: file.meta(),
        }))
    }
}

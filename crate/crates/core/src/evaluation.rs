//! Success rates, per-class rates, top-k guess curves and confusion matrices.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{ClassifierKind, Model, Trainer};
use crate::dataset::{kfold, split, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub correct: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model_kind: ClassifierKind,
    pub seed: u64,
    pub hyperparameters: Value,
    /// SHA-256 of the evaluated dataset.
    pub test_digest: String,
    pub test_scenario: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub total: usize,
    pub correct: usize,
    pub success_rate: f64,
    /// Classes with at least one test measurement, in model class order.
    pub per_class: Vec<ClassScore>,
    /// `topk_correct[g - 1]`: measurements whose true class is among the
    /// first `g` guesses.
    pub topk_correct: Vec<usize>,
    pub topk_curve: Vec<f64>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub meta: ReportMeta,
}

impl EvalReport {
    /// Checks the arithmetic identities every report must satisfy.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::data(format!("report invariant violated: {m}")));
        let trace: usize = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        let sum: usize = self.confusion.iter().flatten().sum();
        if trace != self.correct || sum != self.total {
            return fail("confusion trace or sum");
        }
        if self.topk_correct.first() != Some(&self.correct) {
            return fail("top-1 count differs from correct count");
        }
        if self.topk_curve.first() != Some(&self.success_rate) {
            return fail("top-1 rate differs from success rate");
        }
        if self.topk_correct.windows(2).any(|w| w[1] < w[0]) {
            return fail("top-k curve decreases");
        }
        if self.topk_curve.len() == self.classes.len() && self.topk_correct.last() != Some(&self.total) {
            return fail("exhaustive guessing is not exact");
        }
        if self.per_class.iter().map(|c| c.correct).sum::<usize>() != self.correct
            || self.per_class.iter().map(|c| c.total).sum::<usize>() != self.total
        {
            return fail("per-class counts do not add up");
        }
        for (i, row) in self.confusion.iter().enumerate() {
            let total = row.iter().sum::<usize>();
            let listed = self.per_class.iter().find(|c| c.label == self.classes[i]).map_or(0, |c| c.total);
            if total != listed {
                return fail("confusion row sum differs from class count");
            }
        }
        Ok(())
    }
}

fn rate(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Ranks every test measurement and tallies the first `g_max` guesses.
pub fn evaluate(model: &dyn Model, test: &Dataset, g_max: usize) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::data("test set is empty"));
    }
    let classes = model.classes();
    let n = classes.len();
    if g_max == 0 || g_max > n {
        return Err(Error::config(format!("top-k depth must be between 1 and {n}, got {g_max}")));
    }
    if test.feature_len() != model.input_len() {
        return Err(Error::data(format!(
            "test features have length {}, the model expects {}",
            test.feature_len(),
            model.input_len()
        )));
    }
    let mut truth = Vec::with_capacity(test.len());
    for m in test.measurements() {
        let idx = classes
            .iter()
            .position(|c| *c == m.label)
            .ok_or_else(|| Error::data(format!("test label `{}` is not a model class", m.label)))?;
        truth.push(idx);
    }

    let mut confusion = vec![vec![0usize; n]; n];
    let mut topk_correct = vec![0usize; g_max];
    let inputs: Vec<&[f64]> = test.measurements().iter().map(|m| m.features.as_slice()).collect();
    for (ranking, &t) in model.rank_many(&inputs).into_iter().zip(&truth) {
        confusion[t][ranking[0]] += 1;
        let pos = ranking.iter().position(|&c| c == t).expect("ranking is a permutation");
        for hit in topk_correct.iter_mut().skip(pos) {
            *hit += 1;
        }
    }
    let total = test.len();
    let correct = topk_correct[0];
    let per_class = (0..n)
        .filter_map(|c| {
            let total = confusion[c].iter().sum::<usize>();
            (total > 0).then(|| ClassScore {
                label: classes[c].clone(),
                correct: confusion[c][c],
                total,
                rate: rate(confusion[c][c], total),
            })
        })
        .collect();
    let meta = model.meta();
    let report = EvalReport {
        classes: classes.to_vec(),
        total,
        correct,
        success_rate: rate(correct, total),
        per_class,
        topk_curve: topk_correct.iter().map(|&c| rate(c, total)).collect(),
        topk_correct,
        confusion,
        meta: ReportMeta {
            model_kind: model.kind(),
            seed: meta.seed,
            hyperparameters: meta.hyperparameters.clone(),
            test_digest: test.digest(),
            test_scenario: test.scenario.clone(),
        },
    };
    debug_assert!(report.check_invariants().is_ok());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_per_class: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub seed: u64,
    pub test_per_class: usize,
    pub points: Vec<CurvePoint>,
}

/// The first `n` members of every class, in dataset order.
fn first_per_class(d: &Dataset, n: usize) -> Dataset {
    let mut seen = vec![0usize; d.n_classes()];
    let idx: Vec<usize> = d
        .targets()
        .into_iter()
        .enumerate()
        .filter(|&(_, t)| {
            seen[t] += 1;
            seen[t] <= n
        })
        .map(|(i, _)| i)
        .collect();
    d.subset(&idx)
}

/// Success rate for growing training sets against one fixed test set of
/// `n_test` measurements per class.
pub fn learning_curve(
    trainer: &dyn Trainer,
    d: &Dataset,
    train_sizes: &[usize],
    n_test: usize,
    seed: u64,
) -> Result<LearningCurve> {
    let largest = *train_sizes
        .iter()
        .max()
        .ok_or_else(|| Error::config("learning curve needs at least one training size"))?;
    if train_sizes.contains(&0) {
        return Err(Error::config("learning curve training sizes must be positive"));
    }
    let (pool, test) = split(d, largest, n_test, seed)?;
    let mut points = Vec::with_capacity(train_sizes.len());
    for &size in train_sizes {
        let model = trainer.train(&first_per_class(&pool, size))?;
        points.push(CurvePoint {
            train_per_class: size,
            success_rate: evaluate(model.as_ref(), &test, 1)?.success_rate,
        });
    }
    Ok(LearningCurve {
        seed,
        test_per_class: n_test,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub k: usize,
    pub seed: u64,
    pub fold_rates: Vec<f64>,
    pub mean: f64,
}

/// Mean success rate over stratified folds.
pub fn cross_validate(trainer: &dyn Trainer, d: &Dataset, k: usize, seed: u64) -> Result<CrossValidation> {
    let mut fold_rates = Vec::with_capacity(k);
    for (train, val) in kfold(d, k, seed)? {
        let model = trainer.train(&train)?;
        fold_rates.push(evaluate(model.as_ref(), &val, 1)?.success_rate);
    }
    let mean = fold_rates.iter().sum::<f64>() / fold_rates.len() as f64;
    Ok(CrossValidation {
        k,
        seed,
        fold_rates,
        mean,
    })
}

/// `label,correct,total,rate`
pub fn write_per_class_csv(r: &EvalReport, w: &mut impl Write) -> Result<()> {
    writeln!(w, "label,correct,total,rate")?;
    for c in &r.per_class {
        writeln!(w, "{},{},{},{}", csv_field(&c.label), c.correct, c.total, c.rate)?;
    }
    Ok(())
}

/// `g,success_rate`
pub fn write_topk_csv(r: &EvalReport, w: &mut impl Write) -> Result<()> {
    writeln!(w, "g,success_rate")?;
    for (g, v) in r.topk_curve.iter().enumerate() {
        writeln!(w, "{},{}", g + 1, v)?;
    }
    Ok(())
}

/// `train_per_class,success_rate`
pub fn write_curve_csv(c: &LearningCurve, w: &mut impl Write) -> Result<()> {
    writeln!(w, "train_per_class,success_rate")?;
    for p in &c.points {
        writeln!(w, "{},{}", p.train_per_class, p.success_rate)?;
    }
    Ok(())
}

/// `fold,success_rate`
pub fn write_folds_csv(c: &CrossValidation, w: &mut impl Write) -> Result<()> {
    writeln!(w, "fold,success_rate")?;
    for (i, v) in c.fold_rates.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, v)?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

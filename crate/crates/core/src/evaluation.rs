//! Node classification on top of entity embeddings.
//!
//! The classifier is an L2-regularized multinomial logistic regression over
//! z-scored features, fitted by full-batch gradient descent with a
//! backtracking line search. The regularization strength is chosen from a
//! grid by stratified k-fold cross-validation on the training split only.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingMatrix;
use crate::seed;
use crate::{Error, Result};

/// Regularization grid (inverse strength, larger means weaker penalty).
pub const DEFAULT_REG_GRID: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

pub const CLASSIFIER_NOTE: &str =
    "classifier: L2 multinomial logistic regression (stands in for an RBF-kernel SVM)";

const MAX_STEPS: usize = 1000;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSplit {
    pub train: Vec<(String, String)>,
    pub test: Vec<(String, String)>,
}

impl LabeledSplit {
    pub fn validate(&self) -> Result<()> {
        let train: HashSet<&str> = self.train.iter().map(|(e, _)| e.as_str()).collect();
        if let Some((e, _)) = self.test.iter().find(|(e, _)| train.contains(e.as_str())) {
            return Err(Error::Invalid(format!("entity {e:?} is in both train and test")));
        }
        let classes: HashSet<&str> = self.train.iter().map(|(_, c)| c.as_str()).collect();
        if let Some((_, c)) = self.test.iter().find(|(_, c)| !classes.contains(c.as_str())) {
            return Err(Error::Invalid(format!("test class {c:?} never occurs in train")));
        }
        Ok(())
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.train.iter().chain(&self.test).map(|(e, _)| e.as_str())
    }

    /// Parses `entity TAB class TAB {train|test}` rows.
    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut split = LabeledSplit::default();
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [entity, class, part] = fields[..] else {
                return Err(Error::parse(i + 1, "expected entity TAB class TAB train|test", &line));
            };
            let entity = entity
                .strip_prefix('<')
                .and_then(|s| s.strip_suffix('>'))
                .unwrap_or(entity);
            let row = (entity.to_string(), class.to_string());
            match part.trim() {
                "train" => split.train.push(row),
                "test" => split.test.push(row),
                other => {
                    return Err(Error::parse(i + 1, "split must be train or test", other))
                }
            }
        }
        split.validate()?;
        Ok(split)
    }
}

fn feature_rows(features: &EmbeddingMatrix, rows: &[(String, String)]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|(e, _)| {
            features
                .vector(e)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::MissingEntity(e.clone()))
        })
        .collect()
}

/// Fitted multinomial logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    classes: Vec<String>,
    dim: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes x (dim + 1)`, bias last.
    weights: Vec<f64>,
    /// Objective after every accepted step.
    pub loss_history: Vec<f64>,
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    dim: usize,
    penalty: f64,
}

impl Problem<'_> {
    fn objective_and_gradient(&self, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let stride = self.dim + 1;
        let n = self.x.len() as f64;
        let mut loss = 0.0;
        let mut logits = vec![0.0; self.k];
        let mut g_local = grad.as_ref().map(|_| vec![0.0; w.len()]);
        for (xi, &yi) in self.x.iter().zip(self.y) {
            for (c, l) in logits.iter_mut().enumerate() {
                let row = &w[c * stride..(c + 1) * stride];
                *l = row[self.dim] + crate::embedding::dot(&row[..self.dim], xi);
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            loss += max + z.ln() - logits[yi];
            if let Some(g) = g_local.as_mut() {
                for c in 0..self.k {
                    let p = (logits[c] - max).exp() / z;
                    let coef = (p - if c == yi { 1.0 } else { 0.0 }) / n;
                    let row = &mut g[c * stride..(c + 1) * stride];
                    for (gj, xj) in row[..self.dim].iter_mut().zip(xi) {
                        *gj += coef * xj;
                    }
                    row[self.dim] += coef;
                }
            }
        }
        let mut reg = 0.0;
        for c in 0..self.k {
            for j in 0..self.dim {
                let wj = w[c * stride + j];
                reg += wj * wj;
                if let Some(g) = g_local.as_mut() {
                    g[c * stride + j] += self.penalty * wj;
                }
            }
        }
        if let (Some(out), Some(g)) = (grad, g_local) {
            out.copy_from_slice(&g);
        }
        loss / n + 0.5 * self.penalty * reg
    }
}

impl LogisticRegression {
    /// Fits on raw feature rows. `reg` is the inverse regularization strength;
    /// the penalty is `||W||^2 / (2 * reg * n)`.
    pub fn fit(x: &[Vec<f64>], labels: &[String], reg: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Invalid("no training rows".into()));
        }
        if reg.is_nan() || reg <= 0.0 {
            return Err(Error::Config(format!("regularization must be positive, got {reg}")));
        }
        let dim = x[0].len();
        let classes: Vec<String> = labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let class_index: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let y: Vec<usize> = labels.iter().map(|l| class_index[l.as_str()]).collect();

        let n = x.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for row in x {
            for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in scale.iter_mut() {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect();

        let k = classes.len();
        let problem = Problem {
            x: &z,
            y: &y,
            k,
            dim,
            penalty: 1.0 / (reg * n),
        };
        let mut w = vec![0.0; k * (dim + 1)];
        let mut grad = vec![0.0; w.len()];
        let mut f = problem.objective_and_gradient(&w, Some(&mut grad));
        let mut history = vec![f];
        let mut step = 1.0;
        let mut trial = vec![0.0; w.len()];
        for _ in 0..MAX_STEPS {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < TOLERANCE {
                break;
            }
            // backtracking line search (Armijo)
            let mut accepted = None;
            for _ in 0..60 {
                for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&grad) {
                    *t = wi - step * gi;
                }
                let ft = problem.objective_and_gradient(&trial, None);
                if ft <= f - 0.5 * step * gnorm2 {
                    accepted = Some(ft);
                    break;
                }
                step *= 0.5;
            }
            let Some(ft) = accepted else { break };
            std::mem::swap(&mut w, &mut trial);
            let decrease = f - ft;
            f = problem.objective_and_gradient(&w, Some(&mut grad));
            history.push(f);
            step *= 2.0;
            if decrease <= TOLERANCE * f.abs().max(1.0) {
                break;
            }
        }
        Ok(LogisticRegression {
            classes,
            dim,
            mean,
            scale,
            weights: w,
            loss_history: history,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn predict(&self, x: &[f64]) -> &str {
        let stride = self.dim + 1;
        let z: Vec<f64> = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.classes.len() {
            let row = &self.weights[c * stride..(c + 1) * stride];
            let s = row[self.dim] + crate::embedding::dot(&row[..self.dim], &z);
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        &self.classes[best]
    }
}

fn accuracy_on(model: &LogisticRegression, x: &[Vec<f64>], labels: &[String]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let correct = x
        .iter()
        .zip(labels)
        .filter(|(row, label)| model.predict(row) == label.as_str())
        .count();
    correct as f64 / x.len() as f64
}

/// Stratified assignment of row indices to `folds` folds.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let mut rng = seed::rng(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: LogisticRegression,
    pub regularization: f64,
    /// Mean cross-validated accuracy per grid value, in grid order.
    pub cv_scores: Vec<(f64, f64)>,
}

/// Picks the regularization by stratified CV on the train split, then refits
/// on the full train split.
pub fn train_classifier(
    features: &EmbeddingMatrix,
    split: &LabeledSplit,
    reg_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<TrainedClassifier> {
    if reg_grid.is_empty() {
        return Err(Error::Config("regularization grid is empty".into()));
    }
    let x = feature_rows(features, &split.train)?;
    let labels: Vec<String> = split.train.iter().map(|(_, c)| c.clone()).collect();
    let distinct: HashSet<&str> = labels.iter().map(String::as_str).collect();
    if distinct.len() < 2 {
        return Err(Error::Invalid(
            "cross-validation needs at least two classes in the train split".into(),
        ));
    }
    if folds < 2 || labels.len() < folds {
        return Err(Error::Invalid(format!(
            "cannot run {folds}-fold cross-validation on {} rows",
            labels.len()
        )));
    }
    let fold_of = stratified_folds(&labels, folds, seed);
    let jobs: Vec<(usize, usize)> = (0..reg_grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let scores: Vec<Result<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (mut tx, mut ty, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
            for i in 0..x.len() {
                if fold_of[i] == f {
                    vx.push(x[i].clone());
                    vy.push(labels[i].clone());
                } else {
                    tx.push(x[i].clone());
                    ty.push(labels[i].clone());
                }
            }
            let model = LogisticRegression::fit(&tx, &ty, reg_grid[g])?;
            Ok((g, accuracy_on(&model, &vx, &vy)))
        })
        .collect();
    let mut sums = vec![0.0; reg_grid.len()];
    for s in scores {
        let (g, acc) = s?;
        sums[g] += acc / folds as f64;
    }
    let cv_scores: Vec<(f64, f64)> = reg_grid.iter().copied().zip(sums).collect();
    let mut best = 0;
    for (i, &(_, s)) in cv_scores.iter().enumerate() {
        if s > cv_scores[best].1 + 1e-12 {
            best = i;
        }
    }
    let regularization = reg_grid[best];
    let model = LogisticRegression::fit(&x, &labels, regularization)?;
    Ok(TrainedClassifier {
        model,
        regularization,
        cv_scores,
    })
}

/// Fraction of test entities whose predicted class matches the label.
pub fn evaluate_accuracy(
    model: &LogisticRegression,
    features: &EmbeddingMatrix,
    split: &LabeledSplit,
) -> Result<f64> {
    let x = feature_rows(features, &split.test)?;
    let labels: Vec<String> = split.test.iter().map(|(_, c)| c.clone()).collect();
    Ok(accuracy_on(model, &x, &labels))
}

/// Result of one pipeline repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub classifier: String,
    pub runs: Vec<RunOutcome>,
    pub mean: f64,
    pub std_dev: f64,
    pub metadata: BTreeMap<String, String>,
}

impl EvaluationReport {
    pub fn from_runs(runs: Vec<RunOutcome>) -> Self {
        let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let (mean, std_dev) = mean_std(&accs);
        EvaluationReport {
            classifier: CLASSIFIER_NOTE.to_string(),
            runs,
            mean,
            std_dev,
            metadata: BTreeMap::new(),
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.accuracy).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `pipeline` with `repetitions` derived seeds and summarizes accuracy.
pub fn repeat_runs<F>(base_seed: u64, repetitions: usize, mut pipeline: F) -> Result<EvaluationReport>
where
    F: FnMut(u64) -> Result<(f64, f64)>,
{
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let seed = seed::derive(base_seed, r as u64);
        let (accuracy, regularization) = pipeline(seed)?;
        runs.push(RunOutcome {
            seed,
            accuracy,
            regularization,
        });
    }
    Ok(EvaluationReport::from_runs(runs))
}

/// Per-dataset, per-strategy scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub datasets: Vec<String>,
    pub strategies: Vec<String>,
    /// `scores[dataset][strategy]`
    pub scores: Vec<Vec<Option<f64>>>,
}

impl ScoreTable {
    pub fn new(datasets: &[&str], strategies: &[&str]) -> Self {
        ScoreTable {
            datasets: datasets.iter().map(|s| s.to_string()).collect(),
            strategies: strategies.iter().map(|s| s.to_string()).collect(),
            scores: vec![vec![None; strategies.len()]; datasets.len()],
        }
    }

    pub fn set(&mut self, dataset: usize, strategy: usize, score: f64) {
        self.scores[dataset][strategy] = Some(score);
    }

    /// Parses TSV: header `dataset TAB strategy...`, then one row per dataset.
    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut lines = BufReader::new(source).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(1, "missing header", ""))?;
        let strategies: Vec<String> = header.split('\t').skip(1).map(String::from).collect();
        let mut table = ScoreTable {
            strategies,
            ..Default::default()
        };
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            table.datasets.push(fields.next().unwrap_or("").to_string());
            let row = fields
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() || f == "/" {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::parse(i + 2, "invalid score", f))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            table.scores.push(row);
        }
        Ok(table)
    }
}

/// Per-dataset ranks (1 = best, ties share the mean position), then the mean
/// over datasets for each strategy.
pub fn average_rank(table: &ScoreTable) -> Result<Vec<f64>> {
    let s = table.strategies.len();
    let mut sums = vec![0.0; s];
    for (d, row) in table.scores.iter().enumerate() {
        let mut cells = Vec::with_capacity(s);
        for j in 0..s {
            let v = row.get(j).copied().flatten().ok_or_else(|| {
                Error::Invalid(format!(
                    "missing score for strategy {:?} on dataset {:?}",
                    table.strategies[j], table.datasets[d]
                ))
            })?;
            cells.push((j, v));
        }
        for (j, r) in rank_descending(&cells) {
            sums[j] += r;
        }
    }
    let n = table.scores.len().max(1) as f64;
    Ok(sums.into_iter().map(|x| x / n).collect())
}

fn rank_descending(cells: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut sorted = cells.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = Vec::with_capacity(cells.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].1 == sorted[i].1 {
            j += 1;
        }
        // positions i..=j are 1-based i+1..=j+1
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for cell in &sorted[i..=j] {
            out.push((cell.0, rank));
        }
        i = j + 1;
    }
    out
}

/// Aligned plain-text table of scores plus an average-rank footer.
pub fn render_rank_table(table: &ScoreTable) -> Result<String> {
    let ranks = average_rank(table)?;
    let first = table
        .datasets
        .iter()
        .map(String::len)
        .chain(["avg rank".len()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = table
        .strategies
        .iter()
        .map(|s| s.len().max(8))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<first$}", "");
    for (s, w) in table.strategies.iter().zip(&widths) {
        let _ = write!(out, "  {s:>w$}");
    }
    out.push('\n');
    for (d, row) in table.datasets.iter().zip(&table.scores) {
        let _ = write!(out, "{d:<first$}");
        for (v, w) in row.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$.2}", v.unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<first$}", "avg rank");
    for (r, w) in ranks.iter().zip(&widths) {
        let _ = write!(out, "  {r:>w$.2}");
    }
    out.push('\n');
    Ok(out)
}

//! Surface-grouped stratified k-fold evaluation of a multinomial logistic
//! regression baseline.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_data, Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

/// Softmax regression on z-scored features. Weights start at zero and are
/// trained by full-batch gradient descent, so fitting is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    classes: usize,
    dims: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (dims + 1)`, bias last.
    weights: Vec<f64>,
}

fn softmax_into(z: &mut [f64]) {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl LogisticModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, cfg: &LogisticConfig) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(invalid_data("training set is empty or misaligned"));
        }
        let dims = x[0].len();
        let mut mean = vec![0.0; dims];
        for row in x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n as f64);
        }
        let mut scale = vec![0.0; dims];
        for row in x {
            scale
                .iter_mut()
                .zip(row.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n as f64);
        }
        scale.iter_mut().for_each(|s| {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        });
        let mut model = Self {
            classes,
            dims,
            mean,
            scale,
            weights: vec![0.0; classes * (dims + 1)],
        };
        let z: Vec<Vec<f64>> = x.iter().map(|r| model.standardize(r)).collect();
        let stride = dims + 1;
        let mut grad = vec![0.0; model.weights.len()];
        let mut p = vec![0.0; classes];
        for _ in 0..cfg.epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (zi, &yi) in z.iter().zip(y) {
                model.logits(zi, &mut p);
                softmax_into(&mut p);
                for c in 0..classes {
                    let err = p[c] - if c == yi { 1.0 } else { 0.0 };
                    let g = &mut grad[c * stride..(c + 1) * stride];
                    g[..dims].iter_mut().zip(zi).for_each(|(gv, v)| *gv += err * v);
                    g[dims] += err;
                }
            }
            for c in 0..classes {
                for k in 0..stride {
                    let idx = c * stride + k;
                    let reg = if k < dims { cfg.l2 * model.weights[idx] } else { 0.0 };
                    model.weights[idx] -= cfg.learning_rate * (grad[idx] / n as f64 + reg);
                }
            }
        }
        Ok(model)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn logits(&self, z: &[f64], out: &mut [f64]) {
        let stride = self.dims + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * stride..(c + 1) * stride];
            *o = w[..self.dims].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + w[self.dims];
        }
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let z = self.standardize(row);
        let mut out = vec![0.0; self.classes];
        self.logits(&z, &mut out);
        let mut best = 0;
        for (c, &v) in out.iter().enumerate() {
            if v > out[best] {
                best = c;
            }
        }
        best
    }
}

/// Fold index per group. Groups of each class are shuffled with the seed and
/// dealt round-robin, continuing the deal across classes so fold sizes stay
/// balanced.
pub fn stratified_group_folds(
    group_labels: &[usize],
    classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("folds must be >= 2, got {folds}")));
    }
    if group_labels.len() < folds {
        return Err(Error::InvalidDataset(format!(
            "{} surfaces cannot fill {folds} folds",
            group_labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; group_labels.len()];
    let mut dealt = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..group_labels.len()).filter(|&g| group_labels[g] == c).collect();
        if members.len() < folds {
            log::warn!(
                "class {c} has {} surfaces for {folds} folds; some folds will miss it",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for g in members {
            assignment[g] = dealt % folds;
            dealt += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_groups: usize,
    pub test_samples: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub count: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl ModeStats {
    pub fn from_counts(counts: &[usize]) -> Option<Self> {
        if counts.is_empty() {
            return None;
        }
        Some(Self {
            count: counts.len(),
            min: *counts.iter().min().unwrap(),
            max: *counts.iter().max().unwrap(),
            mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    /// `confusion[true][predicted]`, summed over test folds.
    pub confusion: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes_computed: Option<ModeStats>,
}

/// Cross-validated accuracy of [`LogisticModel`] with folds split by surface.
pub fn baseline_classify(matrix: &FeatureMatrix, folds: usize, seed: u64) -> Result<EvalReport> {
    baseline_classify_with(matrix, folds, seed, &LogisticConfig::default())
}

pub fn baseline_classify_with(
    matrix: &FeatureMatrix,
    folds: usize,
    seed: u64,
    cfg: &LogisticConfig,
) -> Result<EvalReport> {
    if matrix.rows.is_empty() {
        return Err(Error::InvalidDataset("feature matrix has no rows".into()));
    }
    for r in &matrix.rows {
        if r.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_data(format!("row {} has non-finite features", r.id)));
        }
    }
    let mut classes: Vec<String> = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    let mut group_index: HashMap<&str, usize> = HashMap::new();
    let mut group_label: Vec<usize> = Vec::new();
    let mut sample_group = Vec::with_capacity(matrix.rows.len());
    let mut y = Vec::with_capacity(matrix.rows.len());
    for r in &matrix.rows {
        let c = match classes.iter().position(|c| c == &r.label) {
            Some(c) => c,
            None => {
                classes.push(r.label.clone());
                classes.len() - 1
            }
        };
        let g = *group_index.entry(r.group()).or_insert_with(|| {
            groups.push(r.group().to_string());
            group_label.push(c);
            groups.len() - 1
        });
        if group_label[g] != c {
            return Err(Error::InvalidDataset(format!(
                "surface {} carries labels {} and {}",
                groups[g], classes[group_label[g]], r.label
            )));
        }
        sample_group.push(g);
        y.push(c);
    }
    let assignment = stratified_group_folds(&group_label, classes.len(), folds, seed)?;
    let mut confusion = vec![vec![0; classes.len()]; classes.len()];
    let mut results = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (mut xtr, mut ytr, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for (i, r) in matrix.rows.iter().enumerate() {
            if assignment[sample_group[i]] == fold {
                test.push(i);
            } else {
                xtr.push(r.values.clone());
                ytr.push(y[i]);
            }
        }
        let model = LogisticModel::fit(&xtr, &ytr, classes.len(), cfg)?;
        let mut correct = 0;
        for &i in &test {
            let pred = model.predict(&matrix.rows[i].values);
            confusion[y[i]][pred] += 1;
            if pred == y[i] {
                correct += 1;
            }
        }
        results.push(FoldResult {
            fold,
            test_groups: assignment.iter().filter(|&&f| f == fold).count(),
            test_samples: test.len(),
            accuracy: correct as f64 / test.len() as f64,
        });
    }
    let accuracies: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let mean = accuracies.iter().sum::<f64>() / folds as f64;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64;
    Ok(EvalReport {
        classes,
        folds: results,
        accuracies,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        confusion,
        modes_computed: None,
    })
}

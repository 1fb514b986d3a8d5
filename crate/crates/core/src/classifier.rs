//! One-vs-rest linear SVMs trained by dual coordinate descent.
//!
//! Each binary problem is the L2-regularized hinge-loss SVM
//! `min ½‖w‖² + C Σ max(0, 1 − yᵢ wᵀxᵢ)`, with the bias folded in as an extra
//! constant feature. The dual `max Σα − ½‖Σ αᵢyᵢxᵢ‖², 0 ≤ α ≤ C` is solved one
//! coordinate at a time with exact line minimization, so the dual objective
//! never decreases between sweeps. No shrinking.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorSet;
use crate::io::binary::{put_f64s, put_string, put_u32, Reader};
use crate::{Error, Result};

/// Row-major `rows × dim` matrix of features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{dim} feature matrix given {} values",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(Error::ShapeMismatch("feature rows differ in length".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// A new matrix holding the given rows in order.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: idx.len(),
            dim: self.dim,
            data,
        }
    }
}

impl From<&DescriptorSet> for FeatureMatrix {
    fn from(set: &DescriptorSet) -> Self {
        FeatureMatrix {
            rows: set.len(),
            dim: set.dim,
            data: set.data.clone(),
        }
    }
}

/// Per-sample, per-class decision values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub rows: usize,
    pub classes: usize,
    pub data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * classes {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{classes} score matrix given {} values",
                data.len()
            )));
        }
        Ok(ScoreMatrix { rows, classes, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    /// Row-wise argmax; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.rows).map(|i| argmax(self.row(i))).collect()
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c: f64,
    /// Stop once no coordinate's projected gradient exceeds this.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seeds the per-sweep visiting order.
    pub seed: u64,
    /// Value of the constant feature that carries the bias.
    pub bias_feature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            tolerance: 1e-3,
            max_epochs: 1000,
            seed: 0,
            bias_feature: 1.0,
        }
    }
}

/// Convergence record of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    /// Dual objective after each full sweep.
    pub dual_objective: Vec<f64>,
    /// Largest projected-gradient magnitude at the final iterate.
    pub kkt_violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trace: SolverTrace,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f32]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| a * b as f64).sum()
}

fn check_config(cfg: &TrainConfig) -> Result<()> {
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", cfg.c)));
    }
    if cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument("tolerance and epoch budget must be positive".into()));
    }
    Ok(())
}

/// Trains one binary classifier; `targets` must be ±1.
pub fn train_binary(x: &FeatureMatrix, targets: &[f64], cfg: &TrainConfig) -> Result<BinarySvm> {
    check_config(cfg)?;
    if x.rows() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples but {} targets",
            x.rows(),
            targets.len()
        )));
    }
    if x.rows() == 0 || x.dim() == 0 {
        return Err(Error::Degenerate("no samples or zero-dimensional features".into()));
    }
    if targets.iter().any(|&t| t != 1.0 && t != -1.0) {
        return Err(Error::InvalidArgument("binary targets must be +1 or -1".into()));
    }

    let n = x.rows();
    let b = cfg.bias_feature;
    let q_diag: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().map(|&v| v as f64 * v as f64).sum::<f64>() + b * b)
        .collect();
    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; x.dim()];
    let mut w_bias = 0.0f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let gradient = |w: &[f64], w_bias: f64, i: usize| targets[i] * (dot(w, x.row(i)) + w_bias * b) - 1.0;
    let projected = |g: f64, a: f64| {
        if a <= 0.0 {
            g.min(0.0)
        } else if a >= cfg.c {
            g.max(0.0)
        } else {
            g
        }
    };

    let mut trace = SolverTrace {
        dual_objective: Vec::new(),
        kkt_violation: f64::INFINITY,
        converged: false,
    };
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sweep_max = 0.0f64;
        for &i in &order {
            if q_diag[i] <= 0.0 {
                continue;
            }
            let g = gradient(&w, w_bias, i);
            let pg = projected(g, alpha[i]);
            sweep_max = sweep_max.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, cfg.c);
                let step = (alpha[i] - old) * targets[i];
                for (wj, &xj) in w.iter_mut().zip(x.row(i)) {
                    *wj += step * xj as f64;
                }
                w_bias += step * b;
            }
        }
        let norm2 = w.iter().map(|v| v * v).sum::<f64>() + w_bias * w_bias;
        trace.dual_objective.push(alpha.iter().sum::<f64>() - 0.5 * norm2);
        if sweep_max <= cfg.tolerance {
            // Updates inside the sweep move other gradients; confirm at the
            // final iterate before stopping.
            let violation = (0..n)
                .filter(|&i| q_diag[i] > 0.0)
                .map(|i| projected(gradient(&w, w_bias, i), alpha[i]).abs())
                .fold(0.0, f64::max);
            trace.kkt_violation = violation;
            if violation <= cfg.tolerance {
                trace.converged = true;
                break;
            }
        }
    }
    if !trace.converged {
        trace.kkt_violation = (0..n)
            .filter(|&i| q_diag[i] > 0.0)
            .map(|i| projected(gradient(&w, w_bias, i), alpha[i]).abs())
            .fold(0.0, f64::max);
    }
    Ok(BinarySvm {
        weights: w,
        bias: w_bias * b,
        trace,
    })
}

/// One-vs-rest multiclass linear SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Class index → label, sorted.
    pub labels: Vec<String>,
    pub dim: usize,
    /// Row-major `classes × dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub c: f64,
}

pub fn train(x: &FeatureMatrix, labels: &[String], cfg: &TrainConfig) -> Result<SvmModel> {
    Ok(train_traced(x, labels, cfg)?.0)
}

/// [`train`] that also returns each class's solver trace.
pub fn train_traced(
    x: &FeatureMatrix,
    labels: &[String],
    cfg: &TrainConfig,
) -> Result<(SvmModel, Vec<SolverTrace>)> {
    check_config(cfg)?;
    if x.rows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if x.rows() < 2 || classes.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two samples of two classes, got {} samples of {} classes",
            x.rows(),
            classes.len()
        )));
    }
    if x.dim() == 0 {
        return Err(Error::Degenerate("zero-dimensional features".into()));
    }
    let mut weights = Vec::with_capacity(classes.len() * x.dim());
    let mut biases = Vec::with_capacity(classes.len());
    let mut traces = Vec::with_capacity(classes.len());
    for class in &classes {
        let targets: Vec<f64> = labels
            .iter()
            .map(|l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let svm = train_binary(x, &targets, cfg)?;
        weights.extend_from_slice(&svm.weights);
        biases.push(svm.bias);
        traces.push(svm.trace);
    }
    Ok((
        SvmModel {
            labels: classes,
            dim: x.dim(),
            weights,
            biases,
            c: cfg.c,
        },
        traces,
    ))
}

impl SvmModel {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn class_weights(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .map_err(|_| Error::UnknownLabel(label.to_string()))
    }

    /// Raw `w·x + b` for every sample and class.
    pub fn decision_scores(&self, x: &FeatureMatrix) -> Result<ScoreMatrix> {
        if x.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "model expects {}-dimensional features, got {}",
                self.dim,
                x.dim()
            )));
        }
        let k = self.num_classes();
        let mut data = Vec::with_capacity(x.rows() * k);
        for i in 0..x.rows() {
            for c in 0..k {
                data.push(dot(self.class_weights(c), x.row(i)) + self.biases[c]);
            }
        }
        ScoreMatrix::new(x.rows(), k, data)
    }

    /// Class indices by highest score, ties to the lowest index.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(self.decision_scores(x)?.argmax())
    }

    pub fn predict_labels(&self, x: &FeatureMatrix) -> Result<Vec<String>> {
        Ok(self
            .predict(x)?
            .into_iter()
            .map(|c| self.labels[c].clone())
            .collect())
    }

    /// Label strings to class indices; unknown labels are an error.
    pub fn encode_labels(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.class_index(l)).collect()
    }

    /// `.fsv` layout: magic `FSVM`, version u32, header JSON (u64 length +
    /// bytes: labels, dim, C), then `classes × dim` f64 weights and
    /// `classes` f64 biases, little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::to_string(&SvmHeader {
            labels: self.labels.clone(),
            dim: self.dim,
            c: self.c,
        })
        .expect("svm header always serializes");
        let mut out = Vec::with_capacity(header.len() + (self.weights.len() + self.biases.len()) * 8 + 16);
        out.extend_from_slice(SVM_MAGIC);
        put_u32(&mut out, SVM_VERSION);
        put_string(&mut out, &header);
        put_f64s(&mut out, &self.weights);
        put_f64s(&mut out, &self.biases);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "svm file");
        r.expect(SVM_MAGIC)?;
        let version = r.u32()?;
        if version != SVM_VERSION {
            return Err(r.corrupt(format!("unsupported version {version}")));
        }
        let header = r.string()?;
        let header: SvmHeader =
            serde_json::from_str(&header).map_err(|e| r.corrupt(format!("bad header: {e}")))?;
        let k = header.labels.len();
        if k < 2 || !header.labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(r.corrupt("labels must be at least two, sorted and distinct"));
        }
        let count = k
            .checked_mul(header.dim)
            .and_then(|n| n.checked_add(k))
            .filter(|n| n.checked_mul(8) == Some(r.remaining()))
            .ok_or_else(|| r.corrupt("parameter blob does not match the header"))?;
        let weights = r.f64s(count - k)?;
        let biases = r.f64s(k)?;
        r.finish()?;
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::CorruptFile("svm file holds non-finite weights".into()));
        }
        Ok(SvmModel {
            labels: header.labels,
            dim: header.dim,
            weights,
            biases,
            c: header.c,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SvmModel::decode(&std::fs::read(path)?)
    }
}

const SVM_MAGIC: &[u8; 4] = b"FSVM";
const SVM_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SvmHeader {
    labels: Vec<String>,
    dim: usize,
    c: f64,
}

/// Accuracy figures. `accuracy` is the mean of per-class recalls over the
/// classes present in the ground truth; `sample_accuracy` is the plain
/// fraction of correct predictions. Both are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub sample_accuracy: f64,
    /// Recall per class, `None` for classes absent from the ground truth.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[truth][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub labels: Vec<String>,
}

pub fn evaluate(model: &SvmModel, x: &FeatureMatrix, labels: &[String]) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labels to evaluate against".into()));
    }
    if labels.len() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let truth = model.encode_labels(labels)?;
    let predicted = model.predict(x)?;
    evaluate_predictions(&predicted, &truth, &model.labels)
}

/// Scores index predictions against index ground truth over `labels`.
pub fn evaluate_predictions(predicted: &[usize], truth: &[usize], labels: &[String]) -> Result<EvalReport> {
    let k = labels.len();
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} ground-truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::InvalidArgument(format!("class index out of range 0..{k}")));
        }
        confusion[t][p] += 1;
    }
    let per_class: Vec<Option<f64>> = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| 100.0 * row[c] as f64 / total as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        accuracy: present.iter().sum::<f64>() / present.len() as f64,
        sample_accuracy: 100.0 * correct as f64 / truth.len() as f64,
        per_class_accuracy: per_class,
        confusion,
        labels: labels.to_vec(),
    })
}

/// The C grid searched when none is given.
pub const DEFAULT_C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Picks C by k-fold cross-validated mean per-class accuracy. Returns the
/// best C and the score of every candidate; ties favour the smaller C.
pub fn select_c(
    x: &FeatureMatrix,
    labels: &[String],
    grid: &[f64],
    folds: usize,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() || folds < 2 || folds > x.rows() {
        return Err(Error::InvalidArgument(format!(
            "need a non-empty grid and 2..={} folds",
            x.rows()
        )));
    }
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let cfg = TrainConfig { c, ..*cfg };
        let mut total = 0.0;
        let mut used = 0;
        for f in 0..folds {
            let (mut held, mut kept) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                if pos % folds == f {
                    held.push(i);
                } else {
                    kept.push(i);
                }
            }
            let train_labels: Vec<String> = kept.iter().map(|&i| labels[i].clone()).collect();
            let model = match train(&x.select(&kept), &train_labels, &cfg) {
                Ok(m) => m,
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            };
            let pairs: Vec<(usize, usize)> = held
                .iter()
                .filter_map(|&i| model.class_index(&labels[i]).ok().map(|t| (i, t)))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let idx: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let predicted = model.predict(&x.select(&idx))?;
            total += evaluate_predictions(&predicted, &truth, &model.labels)?.accuracy;
            used += 1;
        }
        scores.push((c, if used > 0 { total / used as f64 } else { 0.0 }));
    }
    let best = scores
        .iter()
        .fold(scores[0], |best, &s| if s.1 > best.1 { s } else { best });
    Ok((best.0, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn separable_line() {
        let x = FeatureMatrix::from_rows(&[[-2.0f32], [-1.0], [1.0], [2.0]]).unwrap();
        let y = labels(&["neg", "neg", "pos", "pos"]);
        let m = train(&x, &y, &TrainConfig::default()).unwrap();
        assert_eq!(m.predict_labels(&x).unwrap(), y);
    }

    #[test]
    fn degenerate_inputs() {
        let x = FeatureMatrix::from_rows(&[[1.0f32], [2.0]]).unwrap();
        assert!(matches!(
            train(&x, &labels(&["a", "a"]), &TrainConfig::default()),
            Err(Error::Degenerate(_))
        ));
        let empty = FeatureMatrix::new(2, 0, vec![]).unwrap();
        assert!(matches!(
            train(&empty, &labels(&["a", "b"]), &TrainConfig::default()),
            Err(Error::Degenerate(_))
        ));
        let bad_c = TrainConfig {
            c: 0.0,
            ..Default::default()
        };
        assert!(train(&x, &labels(&["a", "b"]), &bad_c).is_err());
    }

    #[test]
    fn zero_model_scores_are_biases() {
        let m = SvmModel {
            labels: labels(&["a", "b", "c"]),
            dim: 2,
            weights: vec![0.0; 6],
            biases: vec![0.5, -1.0, 2.0],
            c: 1.0,
        };
        let x = FeatureMatrix::from_rows(&[[3.0f32, 4.0], [-1.0, 9.0]]).unwrap();
        let s = m.decision_scores(&x).unwrap();
        assert_eq!(s.row(0), &[0.5, -1.0, 2.0]);
        assert_eq!(s.row(1), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn single_sample_by_hand() {
        let m = SvmModel {
            labels: labels(&["a", "b"]),
            dim: 3,
            weights: vec![1.0, 2.0, 3.0, -1.0, 0.0, 0.5],
            biases: vec![0.25, 1.0],
            c: 1.0,
        };
        let x = FeatureMatrix::from_rows(&[[1.0f32, -1.0, 2.0]]).unwrap();
        let s = m.decision_scores(&x).unwrap();
        assert_eq!(s.row(0), &[1.0 - 2.0 + 6.0 + 0.25, -1.0 + 1.0 + 1.0]);
        assert_eq!(m.predict(&x).unwrap(), vec![0]);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let s = ScoreMatrix::new(2, 3, vec![1.0, 1.0, 0.0, -1.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.argmax(), vec![0, 1]);
    }

    #[test]
    fn evaluation_conventions() {
        let names = labels(&["a", "b"]);
        let perfect = evaluate_predictions(&[0, 1, 1], &[0, 1, 1], &names).unwrap();
        assert_eq!(perfect.accuracy, 100.0);
        let constant = evaluate_predictions(&[0, 0, 0, 0], &[0, 0, 1, 1], &names).unwrap();
        assert_eq!(constant.accuracy, 50.0);
        assert_eq!(constant.confusion, vec![vec![2, 0], vec![2, 0]]);
        // Imbalanced: plain accuracy and mean per-class recall diverge.
        let skew = evaluate_predictions(&[0, 0, 0, 0], &[0, 0, 0, 1], &names).unwrap();
        assert_eq!(skew.sample_accuracy, 75.0);
        assert_eq!(skew.accuracy, 50.0);
    }

    #[test]
    fn unknown_label_is_an_error() {
        let x = FeatureMatrix::from_rows(&[[-1.0f32], [1.0]]).unwrap();
        let m = train(&x, &labels(&["a", "b"]), &TrainConfig::default()).unwrap();
        assert!(matches!(
            evaluate(&m, &x, &labels(&["a", "zebra"])),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn file_roundtrip_and_truncation() {
        let x = FeatureMatrix::from_rows(&[[-1.0f32, 0.5], [1.0, 0.25], [0.0, -3.0]]).unwrap();
        let m = train(&x, &labels(&["a", "b", "c"]), &TrainConfig::default()).unwrap();
        let bytes = m.encode();
        assert_eq!(SvmModel::decode(&bytes).unwrap(), m);
        for cut in 0..bytes.len() {
            assert!(matches!(
                SvmModel::decode(&bytes[..cut]),
                Err(Error::CorruptFile(_))
            ));
        }
    }

    #[test]
    fn grid_search_runs() {
        let rows: Vec<[f32; 2]> = (0..20)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                [s * (1.0 + i as f32 * 0.1), 0.3 * i as f32]
            })
            .collect();
        let y: Vec<String> = (0..20).map(|i| if i % 2 == 0 { "p" } else { "n" }.to_string()).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let (c, scores) = select_c(&x, &y, &DEFAULT_C_GRID, 4, &TrainConfig::default()).unwrap();
        assert_eq!(scores.len(), 4);
        assert!(DEFAULT_C_GRID.contains(&c));
    }
}

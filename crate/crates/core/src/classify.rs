//! Two-class LDA, stratified k-fold assignment and confusion-matrix metrics.
//!
//! Class `true` is the positive ("severe") class throughout.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng;
use crate::{Error, RealMatrix, Result};

/// Relative ridge added to the pooled covariance diagonal: `1e-6 * trace / d`.
pub const RIDGE_FACTOR: f64 = 1e-6;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// `[P(negative), P(positive)]` from the training labels.
    pub priors: [f64; 2],
    pub pooled_covariance: RealMatrix,
    pub ridge: f64,
    /// Fewer training samples than features plus one.
    pub underdetermined: bool,
}

impl LdaModel {
    /// `w . x - b`; positive means the positive class.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() - self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.score(x) > 0.0
    }
}

fn class_mean(x: &RealMatrix, rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for &r in rows {
        for (acc, v) in m.iter_mut().zip(x.row(r)) {
            *acc += v;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
fn cholesky_solve(a: &RealMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[(i, i)] = libm::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    Some(x)
}

/// Fits `w = (S + eps I)^-1 (mu1 - mu0)` with `S` the pooled within-class
/// covariance and the threshold midway between the projected class means,
/// shifted by the log prior ratio.
pub fn lda_fit(x: &RealMatrix, y: &[bool]) -> Result<LdaModel> {
    if x.rows() != y.len() {
        return Err(Error::shape("one label per sample is required"));
    }
    let d = x.cols();
    if d == 0 {
        return Err(Error::invalid("LDA needs at least one feature"));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("LDA needs both classes in the training set"));
    }
    let mu1 = class_mean(x, &pos);
    let mu0 = class_mean(x, &neg);

    let mut cov = RealMatrix::zeros(d, d);
    for (rows, mu) in [(&pos, &mu1), (&neg, &mu0)] {
        for &r in rows.iter() {
            let row = x.row(r);
            for i in 0..d {
                let di = row[i] - mu[i];
                for j in 0..d {
                    cov[(i, j)] += di * (row[j] - mu[j]);
                }
            }
        }
    }
    let n = y.len();
    let denom = n.saturating_sub(2).max(1) as f64;
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] /= denom;
        }
    }
    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    // A zero-scatter training set (e.g. one point per class) still gets a
    // unit-scale ridge so the direction mu1 - mu0 survives.
    let ridge = RIDGE_FACTOR * if trace > 0.0 { trace / d as f64 } else { 1.0 };
    let mut regularised = cov.clone();
    for i in 0..d {
        regularised[(i, i)] += ridge;
    }
    let diff: Vec<f64> = mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect();
    let weights = cholesky_solve(&regularised, &diff)
        .ok_or_else(|| Error::Singular(String::from("pooled covariance is not positive definite after ridge")))?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Singular(String::from("non-finite discriminant weights")));
    }
    let priors = [neg.len() as f64 / n as f64, pos.len() as f64 / n as f64];
    let midpoint: f64 = weights
        .iter()
        .zip(mu1.iter().zip(&mu0))
        .map(|(w, (a, b))| w * 0.5 * (a + b))
        .sum();
    let bias = midpoint - libm::log(priors[1] / priors[0]);
    Ok(LdaModel {
        weights,
        bias,
        priors,
        pooled_covariance: cov,
        ridge,
        underdetermined: n <= d,
    })
}

/// Fold id per sample, stratified by class.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<usize>,
    /// Some class has fewer members than folds.
    pub sparse_class: bool,
}

impl FoldAssignment {
    /// Sample indices in the test split of `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Shuffles each class with a seeded stream and deals its members round-robin
/// over the folds, continuing the rotation from one class to the next.
///
/// Per-class fold counts differ by at most one, so as long as every class has
/// two or more members each training split contains both classes.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("stratified folds need both classes present"));
    }
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::invalid(
            "a class with a single member cannot appear in every training split",
        ));
    }
    let mut rng = rng::seeded(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for mut members in [neg.clone(), pos.clone()] {
        rng::shuffle(&mut rng, &mut members);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        k,
        seed,
        folds,
        sparse_class: pos.len() < k || neg.len() < k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn new(tp: usize, fn_: usize, fp: usize, tn: usize) -> Self {
        Self { tp, fn_, fp, tn }
    }

    /// Precision `TP / (TP + FP)`.
    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Sensitivity `TP / (TP + FN)`.
    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Specificity `TN / (TN + FP)`.
    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }
}

/// Confusion counts with the derived ratios; undefined ratios are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub confusion: Confusion,
    pub ppv: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
}

impl From<Confusion> for Metrics {
    fn from(c: Confusion) -> Self {
        Self {
            confusion: c,
            ppv: c.ppv(),
            tpr: c.tpr(),
            tnr: c.tnr(),
        }
    }
}

pub fn confusion_and_metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("predictions and labels differ in length"));
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (false, true) => c.fn_ += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c.into())
}

/// Mann-Whitney AUC: `P(score_pos > score_neg) + P(tie) / 2`, via mid-ranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both classes present"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Rounds half away from zero to two decimals, the precision used in reports.
pub fn round2(x: f64) -> f64 {
    libm::round(x * 100.0) / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / pairs
    }

    #[test]
    fn separated_clusters_train_perfectly() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut rng = rng::seeded(1);
        for i in 0..40 {
            let c = i % 2 == 0;
            let centre = if c { 5.0 } else { -5.0 };
            rows.push(vec![centre + rng::normal(&mut rng), centre + rng::normal(&mut rng), rng::normal(&mut rng)]);
            y.push(c);
        }
        let x = RealMatrix::from_rows(&rows).unwrap();
        let m = lda_fit(&x, &y).unwrap();
        let correct = (0..40).filter(|&i| m.predict(x.row(i)) == y[i]).count();
        assert_eq!(correct, 40);
        assert!(m.score(&[5.0, 5.0, 0.0]) > 0.0);
    }

    #[test]
    fn one_dimensional_two_points() {
        let x = RealMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let m = lda_fit(&x, &[false, true]).unwrap();
        assert!(m.bias.abs() < 1e-9 * m.weights[0].abs());
        assert!(m.score(&[0.0]).abs() < 1e-9 * m.weights[0].abs());
        assert!(m.predict(&[1.0]));
        assert!(!m.predict(&[-1.0]));
    }

    #[test]
    fn joint_rescaling_keeps_predictions() {
        let x = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.5], vec![2.0, 2.0], vec![3.0, 2.5]]).unwrap();
        let y = [false, false, true, true];
        let m = lda_fit(&x, &y).unwrap();
        let mut scaled = m.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= 7.5);
        scaled.bias *= 7.5;
        for probe in [[0.5, 0.5], [1.5, 1.2], [2.9, 0.0], [-4.0, 9.0]] {
            assert_eq!(m.predict(&probe), scaled.predict(&probe));
        }
    }

    #[test]
    fn identical_distributions_give_chance_auc() {
        let mut rng = rng::seeded(7);
        let mut total = 0.0;
        let runs = 200;
        for _ in 0..runs {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
                (0..n).map(|_| vec![rng::normal(rng), rng::normal(rng), rng::normal(rng)]).collect()
            };
            let train = RealMatrix::from_rows(&draw(&mut rng, 30)).unwrap();
            let y: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
            let m = lda_fit(&train, &y).unwrap();
            let test = draw(&mut rng, 30);
            let scores: Vec<f64> = test.iter().map(|r| m.score(r)).collect();
            total += auc(&scores, &y).unwrap();
        }
        let mean = total / runs as f64;
        assert!((mean - 0.5).abs() <= 0.1, "mean AUC {mean}");
    }

    #[test]
    fn lda_rejects_single_class() {
        let x = RealMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(lda_fit(&x, &[true, true]).is_err());
    }

    #[test]
    fn balanced_folds_have_one_per_class() {
        let labels: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let f = stratified_kfold(&labels, 5, 3).unwrap();
        for fold in 0..5 {
            let test = f.test_indices(fold);
            assert_eq!(test.iter().filter(|&&i| labels[i]).count(), 1);
            assert_eq!(test.iter().filter(|&&i| !labels[i]).count(), 1);
        }
        assert_eq!(f, stratified_kfold(&labels, 5, 3).unwrap());
    }

    #[test]
    fn seeds_change_assignments() {
        let labels: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let base = stratified_kfold(&labels, 5, 0).unwrap();
        let differing = (1..20)
            .filter(|&s| stratified_kfold(&labels, 5, s).unwrap().folds != base.folds)
            .count();
        assert!(differing >= 18);
    }

    #[test]
    fn sparse_class_still_trains_on_both() {
        let mut labels = vec![false; 12];
        labels[0] = true;
        labels[5] = true;
        labels[9] = true;
        let f = stratified_kfold(&labels, 5, 11).unwrap();
        assert!(f.sparse_class);
        for fold in 0..5 {
            let train = f.train_indices(fold);
            assert!(train.iter().any(|&i| labels[i]));
            assert!(train.iter().any(|&i| !labels[i]));
        }
        labels[5] = false;
        labels[9] = false;
        assert!(stratified_kfold(&labels, 5, 11).is_err());
        assert!(stratified_kfold(&[false, false], 5, 1).is_err());
    }

    #[test]
    fn metric_examples() {
        let m: Metrics = Confusion::new(9, 4, 6, 18).into();
        assert_eq!(round2(m.ppv.unwrap()), 0.60);
        assert_eq!(round2(m.tpr.unwrap()), 0.69);
        assert_eq!(round2(m.tnr.unwrap()), 0.75);
        let undefined: Metrics = Confusion::new(0, 0, 0, 5).into();
        assert_eq!(undefined.ppv, None);
        assert_eq!(undefined.tpr, None);
        assert_eq!(undefined.tnr, Some(1.0));
    }

    #[test]
    fn confusion_counts() {
        let pred = [true, true, false, false, true];
        let y = [true, false, true, false, true];
        let m = confusion_and_metrics(&pred, &y).unwrap();
        assert_eq!(m.confusion, Confusion::new(2, 1, 1, 1));
        assert!(confusion_and_metrics(&pred, &y[..4]).is_err());
    }

    #[test]
    fn auc_conventions() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[1.0; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert!(auc(&[1.0, 2.0], &[true, true]).is_err());
        let scores = [0.3, 0.3, 0.1, 0.7, 0.7, 0.2, 0.9];
        let labels = [true, false, false, true, false, true, true];
        assert!((auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() < 1e-15);
    }

    #[test]
    fn random_scores_give_chance_auc() {
        let mut rng = rng::seeded(99);
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let mut total = 0.0;
        for _ in 0..200 {
            let s: Vec<f64> = (0..40).map(|_| rng::unit(&mut rng)).collect();
            total += auc(&s, &labels).unwrap();
        }
        assert!((total / 200.0 - 0.5).abs() <= 0.1);
    }
}

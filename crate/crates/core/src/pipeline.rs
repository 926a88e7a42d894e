//! End-to-end evaluation: per-group HOSVD, phase features, Fisher ranking,
//! LDA under stratified cross-validation, pooled held-out metrics.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::classify::{self, auc, confusion_and_metrics, lda_fit, stratified_kfold, Metrics};
use crate::cohort::{group_by_service, Horizon, SubjectRecord};
use crate::features::{
    fisher_scores, phase_features, select_top_k, FeatureOptions, FisherVariant, PhaseFeatureMatrix,
    Rotation, DEFAULT_TOP_K,
};
use crate::hosvd::{hosvd, HosvdFactors, HosvdOptions};
use crate::{ComplexTensor3, Error, RealMatrix, Result};

/// Where Fisher ranking happens relative to the cross-validation loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Selection {
    /// Rank on each training split only.
    #[default]
    InFold,
    /// Rank once on every labelled subject of the group.
    Global,
}

/// How the reported AUC is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AucMode {
    /// One AUC over held-out scores pooled across folds.
    #[default]
    Pooled,
    /// Mean of per-fold AUCs (folds whose test split holds both classes).
    FoldMean,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineOptions {
    pub hosvd: HosvdOptions,
    pub features: FeatureOptions,
    pub fisher: FisherVariant,
    pub selection: Selection,
    pub folds: usize,
    pub top_k: usize,
    pub seed: u64,
    pub auc: AucMode,
}

impl PipelineOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            hosvd: HosvdOptions::default(),
            features: FeatureOptions::default(),
            fisher: FisherVariant::Linear,
            selection: Selection::InFold,
            folds: classify::DEFAULT_FOLDS,
            top_k: DEFAULT_TOP_K,
            seed,
            auc: AucMode::Pooled,
        }
    }

    pub fn with_rotation(mut self, rotation: Rotation) -> Self {
        self.features.rotation = rotation;
        self
    }
}

/// One subject's cross-validation record.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeldOut {
    pub id: String,
    pub fold: usize,
    pub severe: bool,
    pub score: f64,
    pub predicted_severe: bool,
}

/// Selected phase coordinates of one subject, for scatter plots.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScatterPoint {
    pub id: String,
    pub severe: bool,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub group: String,
    pub horizon: Horizon,
    pub rotated: bool,
    pub seed: u64,
    pub folds: usize,
    pub selection: Selection,
    pub n_mild: usize,
    pub n_severe: usize,
    pub n_excluded: usize,
    pub metrics: Metrics,
    pub auc: f64,
    /// Zero-based `(a, b)` pairs chosen in each fold, fold order.
    pub selected_features: Vec<Vec<(usize, usize)>>,
    /// Top pairs ranked on the whole labelled group (scatter axes).
    pub scatter_features: Vec<(usize, usize)>,
    pub held_out: Vec<HeldOut>,
    pub scatter: Vec<ScatterPoint>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "snake_case"))]
pub enum GroupOutcome {
    Evaluated(Box<EvalReport>),
    Skipped {
        group: String,
        horizon: Horizon,
        rotated: bool,
        reason: String,
    },
}

impl GroupOutcome {
    pub fn report(&self) -> Option<&EvalReport> {
        match self {
            GroupOutcome::Evaluated(r) => Some(r),
            GroupOutcome::Skipped { .. } => None,
        }
    }
}

/// Inputs for one group at one horizon.
#[derive(Debug, Clone, Copy)]
pub struct GroupData<'a> {
    pub name: &'a str,
    pub horizon: Horizon,
    /// Group sub-tensor, subjects along mode 3.
    pub tensor: &'a ComplexTensor3,
    pub ids: &'a [String],
    /// `None` excludes the subject from classification.
    pub labels: &'a [Option<bool>],
}

/// Cross-validates LDA on phase features of one group.
///
/// Single-class groups (or classes with one member) come back as
/// [`GroupOutcome::Skipped`], not as errors.
pub fn evaluate_group(
    data: &GroupData<'_>,
    factors: &HosvdFactors,
    options: &PipelineOptions,
) -> Result<GroupOutcome> {
    let n = data.tensor.dims()[2];
    if data.ids.len() != n || data.labels.len() != n {
        return Err(Error::shape("one id and one label slot per subject are required"));
    }
    let rotated = options.features.rotation.is_on();
    let skipped = |reason: String| GroupOutcome::Skipped {
        group: data.name.to_string(),
        horizon: data.horizon,
        rotated,
        reason,
    };

    let labelled: Vec<usize> = (0..n).filter(|&p| data.labels[p].is_some()).collect();
    let y: Vec<bool> = labelled.iter().map(|&p| data.labels[p].unwrap()).collect();
    let n_severe = y.iter().filter(|&&v| v).count();
    let n_mild = y.len() - n_severe;
    if n_severe < 2 || n_mild < 2 {
        return Ok(skipped(alloc::format!(
            "needs at least two subjects per class (mild {n_mild}, severe {n_severe})"
        )));
    }

    let features: PhaseFeatureMatrix = phase_features(data.tensor, factors, &options.features)?;
    let mut warnings = Vec::new();
    let degenerate = features
        .degenerate
        .iter()
        .filter(|(p, _)| data.labels[*p].is_some())
        .count();
    if degenerate > 0 {
        warnings.push(alloc::format!(
            "{degenerate} near-zero projections had undefined phase and were set to 0"
        ));
    }
    let x: RealMatrix = features.phases.select_rows(&labelled);
    let k = options.top_k.min(features.n_features());

    let folds = stratified_kfold(&y, options.folds, options.seed)?;
    if folds.sparse_class {
        warnings.push(alloc::format!(
            "a class has fewer members than the {} folds; some test splits lack it",
            options.folds
        ));
    }

    let rank = |rows: &[usize]| -> Result<Vec<usize>> {
        let ys: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
        let scores = fisher_scores(&x.select_rows(rows), &ys, options.fisher)?;
        select_top_k(&scores, k)
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let global = rank(&all)?;

    let mut scores = alloc::vec![0.0; y.len()];
    let mut selected_features = Vec::with_capacity(options.folds);
    let mut fold_aucs = Vec::new();
    let mut underdetermined = false;
    for fold in 0..options.folds {
        let test = folds.test_indices(fold);
        let train = folds.train_indices(fold);
        if test.is_empty() {
            selected_features.push(Vec::new());
            continue;
        }
        let chosen = match options.selection {
            Selection::InFold => rank(&train)?,
            Selection::Global => global.clone(),
        };
        selected_features.push(chosen.iter().map(|&j| features.feature_index[j]).collect());
        let xs = x.select_columns(&chosen);
        let ys: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let model = lda_fit(&xs.select_rows(&train), &ys)?;
        underdetermined |= model.underdetermined;
        for &i in &test {
            scores[i] = model.score(xs.row(i));
        }
        let test_y: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        if test_y.iter().any(|&v| v) && test_y.iter().any(|&v| !v) {
            let test_scores: Vec<f64> = test.iter().map(|&i| scores[i]).collect();
            fold_aucs.push(auc(&test_scores, &test_y)?);
        }
    }
    if underdetermined {
        warnings.push("some training splits had no more samples than features".to_string());
    }

    let predictions: Vec<bool> = scores.iter().map(|&s| s > 0.0).collect();
    let metrics = confusion_and_metrics(&predictions, &y)?;
    let auc_value = match options.auc {
        AucMode::Pooled => auc(&scores, &y)?,
        AucMode::FoldMean if !fold_aucs.is_empty() => {
            fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64
        }
        AucMode::FoldMean => {
            warnings.push("no test split held both classes; falling back to pooled AUC".to_string());
            auc(&scores, &y)?
        }
    };

    let held_out = labelled
        .iter()
        .enumerate()
        .map(|(i, &p)| HeldOut {
            id: data.ids[p].clone(),
            fold: folds.folds[i],
            severe: y[i],
            score: scores[i],
            predicted_severe: predictions[i],
        })
        .collect();
    let scatter = labelled
        .iter()
        .enumerate()
        .map(|(i, &p)| ScatterPoint {
            id: data.ids[p].clone(),
            severe: y[i],
            phases: global.iter().map(|&j| x[(i, j)]).collect(),
        })
        .collect();

    Ok(GroupOutcome::Evaluated(Box::new(EvalReport {
        group: data.name.to_string(),
        horizon: data.horizon,
        rotated,
        seed: options.seed,
        folds: options.folds,
        selection: options.selection,
        n_mild,
        n_severe,
        n_excluded: n - labelled.len(),
        metrics,
        auc: auc_value,
        selected_features,
        scatter_features: global.iter().map(|&j| features.feature_index[j]).collect(),
        held_out,
        scatter,
        warnings,
    })))
}

/// Decomposition of one service group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecomposition {
    pub name: String,
    /// Cohort indices of the group's subjects.
    pub members: Vec<usize>,
    pub tensor: ComplexTensor3,
    pub factors: HosvdFactors,
}

/// Splits a cohort by service and decomposes each group.
pub fn decompose_groups(
    tensor: &ComplexTensor3,
    subjects: &[SubjectRecord],
    options: &HosvdOptions,
) -> Result<Vec<GroupDecomposition>> {
    if tensor.dims()[2] != subjects.len() {
        return Err(Error::shape("one subject record per tensor slice is required"));
    }
    group_by_service(subjects)
        .into_iter()
        .map(|(service, members)| {
            let sub = tensor.select_frontal(&members)?;
            let factors = hosvd(&sub, options)?;
            Ok(GroupDecomposition {
                name: service.as_str().to_string(),
                members,
                tensor: sub,
                factors,
            })
        })
        .collect()
}

/// Runs every group through every requested horizon and rotation setting.
///
/// Outcomes are ordered by group, then horizon, then rotation, as given.
pub fn analyze(
    groups: &[GroupDecomposition],
    subjects: &[SubjectRecord],
    horizons: &[Horizon],
    rotations: &[Rotation],
    options: &PipelineOptions,
) -> Result<Vec<GroupOutcome>> {
    let mut out = Vec::new();
    for g in groups {
        let ids: Vec<String> = g.members.iter().map(|&i| subjects[i].id.clone()).collect();
        for &horizon in horizons {
            let labels: Vec<Option<bool>> = g
                .members
                .iter()
                .map(|&i| subjects[i].label(horizon))
                .collect::<Result<_>>()?;
            for &rotation in rotations {
                let opts = options.clone().with_rotation(rotation);
                let data = GroupData {
                    name: &g.name,
                    horizon,
                    tensor: &g.tensor,
                    ids: &ids,
                    labels: &labels,
                };
                out.push(evaluate_group(&data, &g.factors, &opts)?);
            }
        }
    }
    Ok(out)
}

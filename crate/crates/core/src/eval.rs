//! Evaluation: confusion accounting under the attack-centric convention,
//! the DR/ER metrics, deterministic stratified splitting, and the
//! three-method comparison report.
//!
//! Convention throughout: +1 is a normal window, −1 an attack window,
//! and the "positive" side of the confusion matrix is the normal class,
//! so the detection rate DR = TN / (TN + FN) measures recognized attacks.

use std::io::{self, Write};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{FeatureVector, Label};
use crate::kernels::KernelConfig;
use crate::mkl::{
    accuracy_on, predict, select_model, train, MklConfig, MklError, MklModel, Regularizer,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and truth lengths differ: {predicted} vs {truth}")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("empty label sequences")]
    Empty,
    #[error("detection rate undefined: no attack samples (tn + fn = 0)")]
    NoAttackSamples,
    #[error("metric undefined on an empty confusion matrix")]
    EmptyConfusion,
    #[error("stratified split needs at least 2 samples per class, got {normal} normal / {attack} attack")]
    TooFewPerClass { normal: usize, attack: usize },
    #[error("sample at window {0} has no label")]
    Unlabeled(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Mkl(#[from] MklError),
}

/// Confusion counts. TP/FP count normal-truth samples, TN/FN count
/// attack-truth samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    /// Normal samples marked normal.
    pub tp: usize,
    /// Normal samples marked attack.
    pub fp: usize,
    /// Attack samples marked attack.
    pub tn: usize,
    /// Attack samples marked normal.
    pub fn_count: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_count
    }
}

/// Tabulate predictions against ground truth.
pub fn confusion(predicted: &[Label], truth: &[Label]) -> Result<ConfusionCounts, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (t, p) {
            (Label::Normal, Label::Normal) => c.tp += 1,
            (Label::Normal, Label::Attack) => c.fp += 1,
            (Label::Attack, Label::Attack) => c.tn += 1,
            (Label::Attack, Label::Normal) => c.fn_count += 1,
        }
    }
    Ok(c)
}

/// Detection rate `TN / (TN + FN)` — the fraction of attacks caught.
pub fn dr(c: &ConfusionCounts) -> Result<f64, EvalError> {
    let attacks = c.tn + c.fn_count;
    if attacks == 0 {
        return Err(EvalError::NoAttackSamples);
    }
    Ok(c.tn as f64 / attacks as f64)
}

/// Error rate `(FN + FP) / total`.
pub fn er(c: &ConfusionCounts) -> Result<f64, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::EmptyConfusion);
    }
    Ok((c.fn_count + c.fp) as f64 / total as f64)
}

/// Accuracy `(TP + TN) / total`, the implied third indicator.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::EmptyConfusion);
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

/// Deterministic stratified split. Each class contributes
/// `round(train_fraction · n_class)` training samples (clamped so both
/// sides keep at least one sample per class); sample order within each
/// side follows the input order.
pub fn split(
    samples: &[FeatureVector],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::BadFraction(train_fraction));
    }
    let mut normal_idx = Vec::new();
    let mut attack_idx = Vec::new();
    for (i, fv) in samples.iter().enumerate() {
        match fv.label.ok_or(EvalError::Unlabeled(fv.window))? {
            Label::Normal => normal_idx.push(i),
            Label::Attack => attack_idx.push(i),
        }
    }
    if normal_idx.len() < 2 || attack_idx.len() < 2 {
        return Err(EvalError::TooFewPerClass {
            normal: normal_idx.len(),
            attack: attack_idx.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_mask = vec![false; samples.len()];
    for class in [&mut normal_idx, &mut attack_idx] {
        class.shuffle(&mut rng);
        let k = ((train_fraction * class.len() as f64).round() as usize)
            .clamp(1, class.len() - 1);
        for &i in class.iter().take(k) {
            train_mask[i] = true;
        }
    }
    let mut train_set = Vec::new();
    let mut test_set = Vec::new();
    for (i, fv) in samples.iter().enumerate() {
        if train_mask[i] {
            train_set.push(fv.clone());
        } else {
            test_set.push(fv.clone());
        }
    }
    Ok((train_set, test_set))
}

/// The comparison methods, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Sum-of-RBF multiple kernel learning under the simplex constraint.
    SimpleMkl,
    /// Best single base kernel, chosen on an inner validation split.
    SingleKernelSvm,
    /// Full selection over {sum, product} × {L1, L2} by smallest R.
    RGmkl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SimpleMkl => "smkl",
            Method::SingleKernelSvm => "svm",
            Method::RGmkl => "r-gmkl",
        }
    }
}

/// Shared hyperparameters for the comparison run.
#[derive(Debug, Clone)]
pub struct CompareParams {
    pub c: f64,
    pub svm_tol: f64,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub bandwidths: Vec<f64>,
    /// Seed for the inner validation split of the single-kernel baseline.
    pub seed: u64,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            c: 10.0,
            svm_tol: 1e-3,
            outer_max_iter: 100,
            outer_tol: 1e-6,
            bandwidths: vec![0.125, 0.5, 2.0, 8.0],
            seed: 0,
        }
    }
}

impl CompareParams {
    fn apply(&self, mut cfg: MklConfig) -> MklConfig {
        cfg.c = self.c;
        cfg.svm_tol = self.svm_tol;
        cfg.outer_max_iter = self.outer_max_iter;
        cfg.outer_tol = self.outer_tol;
        cfg.kernel.bandwidths = self.bandwidths.clone();
        cfg
    }

    fn candidate_grid(&self) -> Vec<MklConfig> {
        MklConfig::candidate_grid(2)
            .into_iter()
            .map(|c| self.apply(c))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub dr: f64,
    pub er: f64,
    pub confusion: ConfusionCounts,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<MethodResult>,
}

impl CompareReport {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.rows.iter().find(|r| r.method == method)
    }
}

fn train_single_kernel_baseline(
    train_set: &[FeatureVector],
    params: &CompareParams,
) -> Result<MklModel, EvalError> {
    // Candidate 1-D kernels: every (feature, bandwidth) pair.
    let mut candidates = Vec::new();
    for feature in 0..2 {
        for &bw in &params.bandwidths {
            candidates.push(params.apply(MklConfig::new(
                KernelConfig::single(feature, bw, 2),
                Regularizer::L1,
            )));
        }
    }
    // Inner validation split of the training data.
    let (inner_train, inner_val) = split(train_set, 0.75, params.seed.wrapping_add(0x5157))?;
    let mut best: Option<(f64, MklConfig)> = None;
    for cfg in candidates {
        let model = match train(&inner_train, &cfg) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let acc = accuracy_on(&model, &inner_val)?;
        if best.as_ref().map_or(true, |(ba, _)| acc > *ba) {
            best = Some((acc, cfg));
        }
    }
    let (_, cfg) = best.ok_or(MklError::AllCandidatesFailed)?;
    Ok(train(train_set, &cfg)?)
}

fn evaluate_model(
    model: &MklModel,
    method: Method,
    test_set: &[FeatureVector],
) -> Result<MethodResult, EvalError> {
    let mut predicted = Vec::with_capacity(test_set.len());
    let mut truth = Vec::with_capacity(test_set.len());
    for fv in test_set {
        truth.push(fv.label.ok_or(EvalError::Unlabeled(fv.window))?);
        predicted.push(predict(model, fv).map_err(EvalError::Mkl)?);
    }
    let c = confusion(&predicted, &truth)?;
    Ok(MethodResult {
        method,
        dr: dr(&c)?,
        er: er(&c)?,
        confusion: c,
    })
}

/// Train each requested method on the shared training split and tabulate
/// DR/ER on the shared test split.
pub fn compare(
    methods: &[Method],
    train_set: &[FeatureVector],
    test_set: &[FeatureVector],
    params: &CompareParams,
) -> Result<CompareReport, EvalError> {
    assert!(!methods.is_empty(), "need at least one method");
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let model = match method {
            Method::SingleKernelSvm => train_single_kernel_baseline(train_set, params)?,
            Method::SimpleMkl => {
                let cfg = params.apply(MklConfig::new(
                    KernelConfig::default_grid(crate::kernels::KernelFamily::Sum, 2),
                    Regularizer::L1,
                ));
                train(train_set, &cfg)?
            }
            Method::RGmkl => {
                let (model, _) = select_model(train_set, test_set, &params.candidate_grid())?;
                model
            }
        };
        rows.push(evaluate_model(&model, method, test_set)?);
    }
    Ok(CompareReport { rows })
}

pub const COMPARE_CSV_HEADER: &str = "method,dr,er";

/// Comparison report as CSV, shaped like the method-comparison tables.
pub fn write_compare_csv<W: Write>(mut out: W, report: &CompareReport) -> io::Result<()> {
    writeln!(out, "{COMPARE_CSV_HEADER}")?;
    for row in &report.rows {
        writeln!(out, "{},{},{}", row.method.name(), row.dr, row.er)?;
    }
    Ok(())
}

/// Aligned plain-text table of the comparison report.
pub fn format_compare_table(report: &CompareReport) -> String {
    let mut out = String::from("method      DR        ER\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{:<10}  {:<8.4}  {:<8.4}\n",
            row.method.name(),
            row.dr,
            row.er
        ));
    }
    out
}

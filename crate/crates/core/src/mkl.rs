//! Multiple-kernel training: alternating optimization over kernel
//! weights `d` and SVM dual variables, the feasible-set projections for
//! the two regularization paradigms, the R fitness used for model
//! selection, and model (de)serialization.
//!
//! The outer objective is `J(d) = r(d) + Q*(d)` where `Q*(d)` is the SVM
//! dual optimum at the combined kernel `K_d`. Its gradient at the dual
//! optimum is `∂r/∂d_m − ½ βᵀ (∂K_d/∂d_m) β` with `β = α ∘ y`, which
//! drives a projected-gradient step with backtracking, so the objective
//! trace is non-increasing by construction.

use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FeatureVector, Label};
use crate::kernels::{
    build_grams, combine, combine_row, gradient_quadform, quadform, GramSet, KernelConfig,
    KernelError, KernelFamily,
};
use crate::svm::{decision, solve_dual, DualSolution, SvmError};

#[derive(Debug, Error)]
pub enum MklError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("training needs at least 2 samples per class, got {normal} normal / {attack} attack")]
    TooFewSamples { normal: usize, attack: usize },
    #[error("sample at window {0} has no label")]
    UnlabeledSample(usize),
    #[error("classifier features are 2-dimensional (sfv, cdf); config says {0}")]
    BadFeatureDim(usize),
    #[error("L2 regularization strength must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("R is undefined: |b| = {0:.3e} is below 1e-12")]
    BiasNearZero(f64),
    #[error("R is undefined: kernel energies are all zero")]
    DegenerateEnergies,
    #[error("every candidate configuration failed or produced an undefined R")]
    AllCandidatesFailed,
    #[error("model selection needs at least 2 candidates, got {0}")]
    TooFewCandidates(usize),
    #[error("evaluation sample at window {0} has no label")]
    UnlabeledEvalSample(usize),
    #[error("model io: {0}")]
    Io(#[from] io::Error),
    #[error("model file line {line}: {reason}")]
    ModelParse { line: usize, reason: String },
    #[error("not a model file (bad magic line)")]
    BadMagic,
}

/// Regularization paradigm for the kernel weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// Hard simplex constraint `Σ d_m = 1, d ≥ 0`; `r(d) = 0`.
    L1,
    /// Penalty `r(d) = σ ‖d‖² / 2` over the non-negative orthant.
    L2 { sigma: f64 },
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::L1 => "l1",
            Regularizer::L2 { .. } => "l2",
        }
    }

    fn value(&self, d: &[f64]) -> f64 {
        match self {
            Regularizer::L1 => 0.0,
            Regularizer::L2 { sigma } => 0.5 * sigma * d.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    fn grad(&self, d: &[f64]) -> Vec<f64> {
        match self {
            Regularizer::L1 => vec![0.0; d.len()],
            Regularizer::L2 { sigma } => d.iter().map(|v| sigma * v).collect(),
        }
    }
}

/// Backtracking line-search parameters for the outer weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            min_step: 1e-8,
        }
    }
}

/// Full training configuration for one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct MklConfig {
    pub kernel: KernelConfig,
    pub regularizer: Regularizer,
    pub c: f64,
    pub svm_tol: f64,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub step: StepPolicy,
}

impl MklConfig {
    pub fn new(kernel: KernelConfig, regularizer: Regularizer) -> Self {
        MklConfig {
            kernel,
            regularizer,
            c: 10.0,
            svm_tol: 1e-3,
            outer_max_iter: 100,
            outer_tol: 1e-6,
            step: StepPolicy::default(),
        }
    }

    /// The default four-candidate grid: {sum, product} × {L1, L2}.
    pub fn candidate_grid(feature_dim: usize) -> Vec<MklConfig> {
        let mut grid = Vec::new();
        for family in [KernelFamily::Product, KernelFamily::Sum] {
            for reg in [Regularizer::L1, Regularizer::L2 { sigma: 1.0 }] {
                grid.push(MklConfig::new(
                    KernelConfig::default_grid(family, feature_dim),
                    reg,
                ));
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<(), MklError> {
        self.kernel.validate()?;
        if let Regularizer::L2 { sigma } = self.regularizer {
            if !(sigma > 0.0) {
                return Err(MklError::NonPositiveSigma(sigma));
            }
        }
        assert!(self.c > 0.0 && self.svm_tol > 0.0, "C and tol must be positive");
        Ok(())
    }
}

/// Per-feature z-score statistics frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let dim = x.ncols();
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for f in 0..dim {
            let col = x.column(f);
            let mu = col.sum() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            mean[f] = mu;
            // A constant feature standardizes to zero offset, not NaN.
            std[f] = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardization { mean, std }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A trained classifier: kernel weights, dual solution, standardized
/// training samples and everything needed to score new windows.
#[derive(Debug, Clone, PartialEq)]
pub struct MklModel {
    pub d: Vec<f64>,
    pub dual: DualSolution,
    /// Standardized training features, one row per sample.
    pub train_x: Array2<f64>,
    pub train_y: Vec<f64>,
    pub standardization: Standardization,
    pub config: MklConfig,
    /// The R fitness; `None` when undefined for this model.
    pub r: Option<f64>,
    /// Accepted outer objective values, non-increasing.
    pub objective_trace: Vec<f64>,
}

/// The classifier input features of one window.
pub fn classifier_features(fv: &FeatureVector) -> [f64; 2] {
    [fv.sfv, fv.cdf]
}

fn labelled_matrix(samples: &[FeatureVector]) -> Result<(Array2<f64>, Vec<f64>), MklError> {
    let mut y = Vec::with_capacity(samples.len());
    let mut x = Array2::<f64>::zeros((samples.len(), 2));
    let mut normal = 0usize;
    let mut attack = 0usize;
    for (i, fv) in samples.iter().enumerate() {
        let label = fv.label.ok_or(MklError::UnlabeledSample(fv.window))?;
        match label {
            Label::Normal => normal += 1,
            Label::Attack => attack += 1,
        }
        y.push(label.to_f64());
        let feats = classifier_features(fv);
        x[[i, 0]] = feats[0];
        x[[i, 1]] = feats[1];
    }
    if normal < 2 || attack < 2 {
        return Err(MklError::TooFewSamples { normal, attack });
    }
    Ok((x, y))
}

/// Project a weight vector onto the feasible set of the regularizer:
/// the probability simplex for L1, the non-negative orthant for L2.
pub fn project_feasible(d: &[f64], regularizer: &Regularizer) -> Vec<f64> {
    match regularizer {
        Regularizer::L1 => project_simplex(d),
        Regularizer::L2 { .. } => d.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Euclidean projection onto `{d : d ≥ 0, Σ d = 1}`.
///
/// Vectors already feasible (within 1e-12 on the sum) pass through
/// unchanged, which makes the projection exactly idempotent.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    debug_assert!(v.iter().all(|x| x.is_finite()));
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 1e-12 {
        return v.to_vec();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

struct Objective<'a> {
    grams: &'a GramSet,
    y: &'a [f64],
    config: &'a MklConfig,
}

impl Objective<'_> {
    /// `J(d) = r(d) + Q*(d)` and the dual solution attaining it.
    fn eval(&self, d: &[f64]) -> Result<(f64, DualSolution), MklError> {
        let k = combine(d, self.grams)?;
        let sol = solve_dual(k.view(), self.y, self.config.c, self.config.svm_tol)?;
        Ok((self.config.regularizer.value(d) + sol.objective, sol))
    }

    fn gradient(&self, d: &[f64], sol: &DualSolution) -> Result<Vec<f64>, MklError> {
        let beta: Vec<f64> = sol.alpha.iter().zip(self.y).map(|(a, yi)| a * yi).collect();
        let qf = gradient_quadform(d, self.grams, &beta)?;
        let mut grad = self.config.regularizer.grad(d);
        for (g, q) in grad.iter_mut().zip(qf) {
            *g -= 0.5 * q;
        }
        Ok(grad)
    }
}

/// Train one candidate configuration on labelled window features.
pub fn train(samples: &[FeatureVector], config: &MklConfig) -> Result<MklModel, MklError> {
    config.validate()?;
    if config.kernel.feature_dim != 2 {
        return Err(MklError::BadFeatureDim(config.kernel.feature_dim));
    }
    let (raw_x, y) = labelled_matrix(samples)?;
    let standardization = Standardization::fit(&raw_x);
    let mut train_x = raw_x;
    for mut row in train_x.rows_mut() {
        let std = standardization.apply(&[row[0], row[1]]);
        row[0] = std[0];
        row[1] = std[1];
    }

    let grams = build_grams(train_x.view(), &config.kernel)?;
    let m = config.kernel.term_count();
    let mut d = match config.regularizer {
        Regularizer::L1 => vec![1.0 / m as f64; m],
        Regularizer::L2 { .. } => vec![1.0; m],
    };

    let objective = Objective { grams: &grams, y: &y, config };
    let (mut j, mut sol) = objective.eval(&d)?;
    let mut trace = vec![j];

    for _ in 0..config.outer_max_iter {
        let grad = objective.gradient(&d, &sol)?;
        let mut step = config.step.initial_step;
        let mut accepted: Option<(Vec<f64>, f64, DualSolution)> = None;
        while step >= config.step.min_step {
            let tentative: Vec<f64> = d.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
            let candidate = project_feasible(&tentative, &config.regularizer);
            let movement: f64 = candidate
                .iter()
                .zip(&d)
                .map(|(c, v)| (c - v) * (c - v))
                .sum::<f64>()
                .sqrt();
            if movement <= 1e-15 {
                // Stationary under projection; no step can make progress.
                break;
            }
            let (j_cand, sol_cand) = objective.eval(&candidate)?;
            // Projected-gradient Armijo: grad·(d - candidate) ≥ 0 holds by
            // the projection inequality, so accepted steps never increase J.
            let decrease: f64 = grad
                .iter()
                .zip(d.iter().zip(&candidate))
                .map(|(g, (v, c))| g * (v - c))
                .sum();
            if j_cand <= j - config.step.armijo * decrease {
                accepted = Some((candidate, j_cand, sol_cand));
                break;
            }
            step *= config.step.shrink;
        }
        let Some((d_next, j_next, sol_next)) = accepted else {
            break; // converged by stall
        };
        let improvement = j - j_next;
        d = d_next;
        sol = sol_next;
        j = j_next;
        trace.push(j);
        if improvement.abs() < config.outer_tol * j.abs().max(1.0) {
            break;
        }
    }

    let beta: Vec<f64> = sol.alpha.iter().zip(&y).map(|(a, yi)| a * yi).collect();
    let r = r_fitness(&d, &grams, &beta, sol.b).ok();

    Ok(MklModel {
        d,
        dual: sol,
        train_x,
        train_y: y,
        standardization,
        config: config.clone(),
        r,
        objective_trace: trace,
    })
}

/// Per-kernel energy `h_m = d_m ‖ω_m‖` with `‖ω_m‖ = d_m √(βᵀ B_m β)`,
/// where `B_m` is the base Gram for the sum family and the magnitude of
/// the Hadamard term `D_m ∘ K_d` for the product family.
fn kernel_energies(d: &[f64], grams: &GramSet, beta: &[f64]) -> Result<Vec<f64>, MklError> {
    match grams {
        GramSet::Sum(kernels) => Ok(d
            .iter()
            .zip(kernels)
            .map(|(dm, k)| dm * dm * quadform(k, beta).max(0.0).sqrt())
            .collect()),
        GramSet::Product(dists) => {
            let combined = combine(d, grams)?;
            let n = combined.nrows();
            let mut energies = Vec::with_capacity(dists.len());
            for (dm, dist) in d.iter().zip(dists) {
                let mut acc = 0.0;
                for i in 0..n {
                    let bi = beta[i];
                    if bi == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        acc += bi * beta[j] * dist[[i, j]] * combined[[i, j]];
                    }
                }
                energies.push(dm * dm * acc.abs().sqrt());
            }
            Ok(energies)
        }
    }
}

fn r_fitness(d: &[f64], grams: &GramSet, beta: &[f64], b: f64) -> Result<f64, MklError> {
    if b.abs() < 1e-12 {
        return Err(MklError::BiasNearZero(b.abs()));
    }
    let h = kernel_energies(d, grams, beta)?;
    let sum_h: f64 = h.iter().sum();
    let sum_h32: f64 = h.iter().map(|v| v.powf(1.5)).sum();
    if sum_h + sum_h32 < 1e-15 {
        return Err(MklError::DegenerateEnergies);
    }
    Ok(((sum_h - sum_h32) / (sum_h + sum_h32) / b).abs())
}

/// The R fitness of a trained model, recomputed from its stored state.
pub fn compute_r(model: &MklModel) -> Result<f64, MklError> {
    let grams = build_grams(model.train_x.view(), &model.config.kernel)?;
    let beta: Vec<f64> = model
        .dual
        .alpha
        .iter()
        .zip(&model.train_y)
        .map(|(a, y)| a * y)
        .collect();
    r_fitness(&model.d, &grams, &beta, model.dual.b)
}

/// Classify one window: +1 normal, −1 attack. An exact-zero decision
/// value counts as normal.
pub fn predict(model: &MklModel, sample: &FeatureVector) -> Result<Label, MklError> {
    let raw = classifier_features(sample);
    let std = Array1::from(model.standardization.apply(&raw));
    let row = combine_row(&model.d, &model.config.kernel, model.train_x.view(), std.view())?;
    let f = decision(&model.dual, &model.train_y, &row)?;
    Ok(if f >= 0.0 { Label::Normal } else { Label::Attack })
}

/// Fraction of labelled samples a model classifies correctly.
pub fn accuracy_on(model: &MklModel, samples: &[FeatureVector]) -> Result<f64, MklError> {
    assert!(!samples.is_empty(), "accuracy needs at least one sample");
    let mut hits = 0usize;
    for fv in samples {
        let truth = fv.label.ok_or(MklError::UnlabeledEvalSample(fv.window))?;
        if predict(model, fv)? == truth {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// One row of the selection report, shaped like the parameter-selection
/// tables: group number, kernel family, regularizer, R, accuracy.
#[derive(Debug, Clone)]
pub struct SelectionRow {
    pub group: usize,
    pub family: KernelFamily,
    pub regularizer: &'static str,
    pub r: Option<f64>,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
    /// Index into `rows` of the selected candidate.
    pub chosen: usize,
}

/// Train every candidate, report R and held-out accuracy per candidate,
/// and return the model with the smallest defined R.
pub fn select_model(
    train_set: &[FeatureVector],
    eval_set: &[FeatureVector],
    candidates: &[MklConfig],
) -> Result<(MklModel, SelectionReport), MklError> {
    if candidates.len() < 2 {
        return Err(MklError::TooFewCandidates(candidates.len()));
    }
    let results: Vec<Result<(MklModel, Option<f64>), MklError>> = candidates
        .par_iter()
        .map(|cfg| {
            let model = train(train_set, cfg)?;
            let acc = if eval_set.is_empty() {
                None
            } else {
                Some(accuracy_on(&model, eval_set)?)
            };
            Ok((model, acc))
        })
        .collect();

    let mut rows = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    let mut models: Vec<Option<MklModel>> = Vec::with_capacity(candidates.len());
    for (idx, (cfg, result)) in candidates.iter().zip(results).enumerate() {
        match result {
            Ok((model, acc)) => {
                if let Some(r) = model.r {
                    if best.map_or(true, |(_, br)| r < br) {
                        best = Some((idx, r));
                    }
                }
                rows.push(SelectionRow {
                    group: idx + 1,
                    family: cfg.kernel.family,
                    regularizer: cfg.regularizer.name(),
                    r: model.r,
                    accuracy: acc,
                    error: None,
                });
                models.push(Some(model));
            }
            Err(e) => {
                rows.push(SelectionRow {
                    group: idx + 1,
                    family: cfg.kernel.family,
                    regularizer: cfg.regularizer.name(),
                    r: None,
                    accuracy: None,
                    error: Some(e.to_string()),
                });
                models.push(None);
            }
        }
    }
    let (chosen, _) = best.ok_or(MklError::AllCandidatesFailed)?;
    let model = models[chosen].take().expect("chosen candidate trained");
    Ok((model, SelectionReport { rows, chosen }))
}

pub const SELECTION_CSV_HEADER: &str = "group,kernel,regularizer,r,accuracy";

/// Selection report as CSV, mirroring the parameter-selection tables.
pub fn write_selection_csv<W: Write>(mut out: W, report: &SelectionReport) -> io::Result<()> {
    writeln!(out, "{SELECTION_CSV_HEADER}")?;
    for row in &report.rows {
        let r = row.r.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into());
        let acc = row
            .accuracy
            .map(|v| v.to_string())
            .unwrap_or_else(|| "undefined".into());
        writeln!(
            out,
            "{},{},{},{},{}",
            row.group,
            row.family.name(),
            row.regularizer,
            r,
            acc
        )?;
    }
    Ok(())
}

const MODEL_MAGIC: &str = "rgmkl-model v1";

/// Serialize a model as a self-describing plain-text document. Floats
/// round-trip exactly, so a written model reproduces detection runs
/// byte for byte.
pub fn write_model<W: Write>(mut out: W, model: &MklModel) -> io::Result<()> {
    let cfg = &model.config;
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(out, "family = {}", cfg.kernel.family.name())?;
    writeln!(out, "bandwidths = {}", join_floats(&cfg.kernel.bandwidths))?;
    writeln!(out, "feature_dim = {}", cfg.kernel.feature_dim)?;
    writeln!(out, "per_feature = {}", cfg.kernel.per_feature)?;
    match cfg.kernel.single_feature {
        Some(f) => writeln!(out, "single_feature = {f}")?,
        None => writeln!(out, "single_feature = none")?,
    }
    writeln!(out, "regularizer = {}", cfg.regularizer.name())?;
    if let Regularizer::L2 { sigma } = cfg.regularizer {
        writeln!(out, "sigma = {sigma}")?;
    }
    writeln!(out, "c = {}", cfg.c)?;
    writeln!(out, "svm_tol = {}", cfg.svm_tol)?;
    writeln!(out, "outer_max_iter = {}", cfg.outer_max_iter)?;
    writeln!(out, "outer_tol = {}", cfg.outer_tol)?;
    writeln!(out, "mean = {}", join_floats(&model.standardization.mean))?;
    writeln!(out, "std = {}", join_floats(&model.standardization.std))?;
    writeln!(out, "d = {}", join_floats(&model.d))?;
    writeln!(out, "alpha = {}", join_floats(&model.dual.alpha))?;
    writeln!(out, "bias = {}", model.dual.b)?;
    writeln!(out, "objective = {}", model.dual.objective)?;
    match model.r {
        Some(r) => writeln!(out, "r = {r}")?,
        None => writeln!(out, "r = undefined")?,
    }
    writeln!(out, "labels = {}", join_floats(&model.train_y))?;
    writeln!(out, "samples = {}", model.train_x.nrows())?;
    for i in 0..model.train_x.nrows() {
        let row: Vec<f64> = model.train_x.row(i).to_vec();
        writeln!(out, "x{i} = {}", join_floats(&row))?;
    }
    Ok(())
}

pub fn write_model_path(path: &Path, model: &MklModel) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_model(io::BufWriter::new(file), model)
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_floats(raw: &str, line: usize) -> Result<Vec<f64>, MklError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|e| MklError::ModelParse {
                line,
                reason: format!("bad float `{tok}`: {e}"),
            })
        })
        .collect()
}

/// Read a model written by [`write_model`].
pub fn read_model<R: io::Read>(reader: R) -> Result<MklModel, MklError> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let magic = lines
        .next()
        .ok_or(MklError::BadMagic)?
        .1
        .map_err(MklError::Io)?;
    if magic.trim_end() != MODEL_MAGIC {
        return Err(MklError::BadMagic);
    }

    let mut kv: Vec<(usize, String, String)> = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(MklError::Io)?;
        let lineno = idx + 1;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let (key, value) = trimmed.split_once(" = ").ok_or_else(|| MklError::ModelParse {
            line: lineno,
            reason: "expected `key = value`".into(),
        })?;
        kv.push((lineno, key.to_string(), value.to_string()));
    }

    let find = |key: &str| -> Result<(usize, String), MklError> {
        kv.iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.clone()))
            .ok_or_else(|| MklError::ModelParse {
                line: 0,
                reason: format!("missing key `{key}`"),
            })
    };
    let parse_scalar = |key: &str| -> Result<f64, MklError> {
        let (line, v) = find(key)?;
        v.parse::<f64>().map_err(|e| MklError::ModelParse {
            line,
            reason: format!("bad float `{v}`: {e}"),
        })
    };

    let (fam_line, family_raw) = find("family")?;
    let family = match family_raw.as_str() {
        "sum-rbf" => KernelFamily::Sum,
        "product-rbf" => KernelFamily::Product,
        other => {
            return Err(MklError::ModelParse {
                line: fam_line,
                reason: format!("unknown kernel family `{other}`"),
            })
        }
    };
    let (bw_line, bw_raw) = find("bandwidths")?;
    let bandwidths = parse_floats(&bw_raw, bw_line)?;
    let feature_dim = parse_scalar("feature_dim")? as usize;
    let (pf_line, pf_raw) = find("per_feature")?;
    let per_feature = pf_raw.parse::<bool>().map_err(|_| MklError::ModelParse {
        line: pf_line,
        reason: format!("bad bool `{pf_raw}`"),
    })?;
    let (sf_line, sf_raw) = find("single_feature")?;
    let single_feature = match sf_raw.as_str() {
        "none" => None,
        raw => Some(raw.parse::<usize>().map_err(|e| MklError::ModelParse {
            line: sf_line,
            reason: format!("bad index `{raw}`: {e}"),
        })?),
    };
    let (reg_line, reg_raw) = find("regularizer")?;
    let regularizer = match reg_raw.as_str() {
        "l1" => Regularizer::L1,
        "l2" => Regularizer::L2 { sigma: parse_scalar("sigma")? },
        other => {
            return Err(MklError::ModelParse {
                line: reg_line,
                reason: format!("unknown regularizer `{other}`"),
            })
        }
    };

    let config = MklConfig {
        kernel: KernelConfig {
            family,
            bandwidths,
            feature_dim,
            per_feature,
            single_feature,
        },
        regularizer,
        c: parse_scalar("c")?,
        svm_tol: parse_scalar("svm_tol")?,
        outer_max_iter: parse_scalar("outer_max_iter")? as usize,
        outer_tol: parse_scalar("outer_tol")?,
        step: StepPolicy::default(),
    };

    let (mean_line, mean_raw) = find("mean")?;
    let (std_line, std_raw) = find("std")?;
    let standardization = Standardization {
        mean: parse_floats(&mean_raw, mean_line)?,
        std: parse_floats(&std_raw, std_line)?,
    };
    let (d_line, d_raw) = find("d")?;
    let d = parse_floats(&d_raw, d_line)?;
    let (a_line, a_raw) = find("alpha")?;
    let alpha = parse_floats(&a_raw, a_line)?;
    let b = parse_scalar("bias")?;
    let objective = parse_scalar("objective")?;
    let (r_line, r_raw) = find("r")?;
    let r = match r_raw.as_str() {
        "undefined" => None,
        raw => Some(raw.parse::<f64>().map_err(|e| MklError::ModelParse {
            line: r_line,
            reason: format!("bad float `{raw}`: {e}"),
        })?),
    };
    let (y_line, y_raw) = find("labels")?;
    let train_y = parse_floats(&y_raw, y_line)?;
    let n = parse_scalar("samples")? as usize;
    if train_y.len() != n || alpha.len() != n {
        return Err(MklError::ModelParse {
            line: y_line,
            reason: format!(
                "inconsistent sizes: {n} samples, {} labels, {} alphas",
                train_y.len(),
                alpha.len()
            ),
        });
    }

    let mut train_x = Array2::<f64>::zeros((n, feature_dim));
    for i in 0..n {
        let key = format!("x{i}");
        let (row_line, row_raw) = find(&key)?;
        let row = parse_floats(&row_raw, row_line)?;
        if row.len() != feature_dim {
            return Err(MklError::ModelParse {
                line: row_line,
                reason: format!("expected {feature_dim} features, got {}", row.len()),
            });
        }
        for (f, v) in row.into_iter().enumerate() {
            train_x[[i, f]] = v;
        }
    }

    let support_indices = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    Ok(MklModel {
        d,
        dual: DualSolution {
            alpha,
            b,
            objective,
            support_indices,
        },
        train_x,
        train_y,
        standardization,
        config,
        r,
        objective_trace: Vec::new(),
    })
}

pub fn read_model_path(path: &Path) -> Result<MklModel, MklError> {
    let file = std::fs::File::open(path)?;
    read_model(file)
}

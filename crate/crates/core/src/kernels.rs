//! RBF base kernels and the two combination families the classifier
//! selects between: a weighted sum of RBF Gram matrices and a weighted
//! product of RBF factors (a generalized RBF kernel on reweighted
//! squared distances).
//!
//! For the sum family the per-term data are the base Gram matrices
//! `K_m`; for the product family they are scaled squared-distance
//! matrices `D_m`, so that combining with weights `d` yields
//! `exp(-Σ d_m D_m)` elementwise.

use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("kernel weights must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("expected {expected} kernel weights, got {got}")]
    WeightCountMismatch { expected: usize, got: usize },
    #[error("need at least 2 samples to build Gram matrices, got {0}")]
    TooFewSamples(usize),
    #[error("sum family needs at least 2 base kernels, got {0}")]
    TooFewBaseKernels(usize),
    #[error("feature dimension must be at least 1")]
    EmptyFeatureDim,
    #[error("sample dimension {got} does not match configured dimension {expected}")]
    SampleDimMismatch { expected: usize, got: usize },
}

/// Which combination family a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `K_d = Σ d_m K_m`
    Sum,
    /// `K_d = exp(-Σ d_m D_m)` elementwise
    Product,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Sum => "sum-rbf",
            KernelFamily::Product => "product-rbf",
        }
    }
}

/// Base-kernel grid: which family, which bandwidths, and whether each
/// term covers a single feature coordinate or the full vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub bandwidths: Vec<f64>,
    pub feature_dim: usize,
    /// One term per (feature, bandwidth) pair when true; one full-vector
    /// term per bandwidth when false.
    pub per_feature: bool,
    /// Restrict the per-feature cross to one coordinate. Used for
    /// single-kernel baselines.
    pub single_feature: Option<usize>,
}

impl KernelConfig {
    /// Default grid: per-feature kernels crossed with bandwidths
    /// `{2^-3, 2^-1, 2, 2^3}`.
    pub fn default_grid(family: KernelFamily, feature_dim: usize) -> Self {
        KernelConfig {
            family,
            bandwidths: vec![0.125, 0.5, 2.0, 8.0],
            feature_dim,
            per_feature: true,
            single_feature: None,
        }
    }

    /// A single-term config: one RBF kernel on one feature coordinate.
    pub fn single(feature: usize, bandwidth: f64, feature_dim: usize) -> Self {
        KernelConfig {
            family: KernelFamily::Product,
            bandwidths: vec![bandwidth],
            feature_dim,
            per_feature: true,
            single_feature: Some(feature),
        }
    }

    pub fn term_count(&self) -> usize {
        if self.single_feature.is_some() {
            return self.bandwidths.len();
        }
        if self.per_feature {
            self.feature_dim * self.bandwidths.len()
        } else {
            self.bandwidths.len()
        }
    }

    /// Term `m` as (feature coordinate or None for full-vector, bandwidth).
    pub fn term(&self, m: usize) -> (Option<usize>, f64) {
        if let Some(f) = self.single_feature {
            return (Some(f), self.bandwidths[m]);
        }
        if self.per_feature {
            let nb = self.bandwidths.len();
            (Some(m / nb), self.bandwidths[m % nb])
        } else {
            (None, self.bandwidths[m])
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.feature_dim == 0 {
            return Err(KernelError::EmptyFeatureDim);
        }
        for &g in &self.bandwidths {
            if !(g > 0.0) {
                return Err(KernelError::NonPositiveBandwidth(g));
            }
        }
        if let Some(f) = self.single_feature {
            if f >= self.feature_dim {
                return Err(KernelError::SampleDimMismatch {
                    expected: self.feature_dim,
                    got: f,
                });
            }
        }
        let m = self.term_count();
        if self.family == KernelFamily::Sum && m < 2 {
            return Err(KernelError::TooFewBaseKernels(m));
        }
        if m == 0 {
            return Err(KernelError::TooFewBaseKernels(0));
        }
        Ok(())
    }
}

/// Per-term Gram data, ready to combine under a weight vector.
#[derive(Debug, Clone)]
pub enum GramSet {
    /// Base Gram matrices `K_m`.
    Sum(Vec<Array2<f64>>),
    /// Scaled squared-distance matrices `D_m` (non-negative, zero diagonal).
    Product(Vec<Array2<f64>>),
}

impl GramSet {
    pub fn term_count(&self) -> usize {
        match self {
            GramSet::Sum(k) => k.len(),
            GramSet::Product(d) => d.len(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            GramSet::Sum(k) => k.first().map_or(0, |m| m.nrows()),
            GramSet::Product(d) => d.first().map_or(0, |m| m.nrows()),
        }
    }
}

/// Gaussian RBF kernel `exp(-γ ‖x - y‖²)`.
pub fn rbf(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::DimensionMismatch(x.len(), y.len()));
    }
    if !(gamma > 0.0) {
        return Err(KernelError::NonPositiveBandwidth(gamma));
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * sq).exp())
}

fn term_sq_dist(cfg: &KernelConfig, m: usize, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let (feature, gamma) = cfg.term(m);
    match feature {
        Some(f) => {
            let d = a[f] - b[f];
            gamma * d * d
        }
        None => {
            let sq: f64 = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            gamma * sq
        }
    }
}

/// Build per-term Gram data for `samples` (rows are feature vectors).
pub fn build_grams(samples: ArrayView2<f64>, cfg: &KernelConfig) -> Result<GramSet, KernelError> {
    cfg.validate()?;
    let n = samples.nrows();
    if n < 2 {
        return Err(KernelError::TooFewSamples(n));
    }
    if samples.ncols() != cfg.feature_dim {
        return Err(KernelError::SampleDimMismatch {
            expected: cfg.feature_dim,
            got: samples.ncols(),
        });
    }
    let m_count = cfg.term_count();
    let mut mats = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let mut mat = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let sq = term_sq_dist(cfg, m, samples.row(i), samples.row(j));
                let v = match cfg.family {
                    KernelFamily::Sum => (-sq).exp(),
                    KernelFamily::Product => sq,
                };
                mat[[i, j]] = v;
                mat[[j, i]] = v;
            }
        }
        mats.push(mat);
    }
    Ok(match cfg.family {
        KernelFamily::Sum => GramSet::Sum(mats),
        KernelFamily::Product => GramSet::Product(mats),
    })
}

fn check_weights(d: &[f64], grams: &GramSet) -> Result<(), KernelError> {
    if d.len() != grams.term_count() {
        return Err(KernelError::WeightCountMismatch {
            expected: grams.term_count(),
            got: d.len(),
        });
    }
    for &w in d {
        if !(w >= 0.0) {
            return Err(KernelError::NegativeWeight(w));
        }
    }
    Ok(())
}

/// Combine per-term Gram data under non-negative weights into one
/// symmetric PSD kernel matrix.
pub fn combine(d: &[f64], grams: &GramSet) -> Result<Array2<f64>, KernelError> {
    check_weights(d, grams)?;
    let n = grams.n();
    match grams {
        GramSet::Sum(kernels) => {
            let mut out = Array2::<f64>::zeros((n, n));
            for (w, k) in d.iter().zip(kernels) {
                out.scaled_add(*w, k);
            }
            Ok(out)
        }
        GramSet::Product(dists) => {
            let mut expo = Array2::<f64>::zeros((n, n));
            for (w, dist) in d.iter().zip(dists) {
                expo.scaled_add(*w, dist);
            }
            Ok(expo.mapv(|v| (-v).exp()))
        }
    }
}

/// Kernel evaluations between one query point and every training point,
/// under the same combination rule as [`combine`].
pub fn combine_row(
    d: &[f64],
    cfg: &KernelConfig,
    train: ArrayView2<f64>,
    query: ArrayView1<f64>,
) -> Result<Vec<f64>, KernelError> {
    cfg.validate()?;
    if d.len() != cfg.term_count() {
        return Err(KernelError::WeightCountMismatch {
            expected: cfg.term_count(),
            got: d.len(),
        });
    }
    for &w in d {
        if !(w >= 0.0) {
            return Err(KernelError::NegativeWeight(w));
        }
    }
    if query.len() != cfg.feature_dim || train.ncols() != cfg.feature_dim {
        return Err(KernelError::SampleDimMismatch {
            expected: cfg.feature_dim,
            got: query.len(),
        });
    }
    let mut row = Vec::with_capacity(train.nrows());
    for i in 0..train.nrows() {
        let xi = train.row(i);
        let v = match cfg.family {
            KernelFamily::Sum => {
                let mut acc = 0.0;
                for (m, w) in d.iter().enumerate() {
                    acc += w * (-term_sq_dist(cfg, m, xi, query)).exp();
                }
                acc
            }
            KernelFamily::Product => {
                let mut expo = 0.0;
                for (m, w) in d.iter().enumerate() {
                    expo += w * term_sq_dist(cfg, m, xi, query);
                }
                (-expo).exp()
            }
        };
        row.push(v);
    }
    Ok(row)
}

/// Per-term derivative of the quadratic form `βᵀ K_d β` with respect to
/// each weight: `βᵀ K_m β` for the sum family, `βᵀ (-D_m ∘ K_d) β` for
/// the product family.
pub fn gradient_quadform(
    d: &[f64],
    grams: &GramSet,
    beta: &[f64],
) -> Result<Vec<f64>, KernelError> {
    check_weights(d, grams)?;
    let n = grams.n();
    assert_eq!(beta.len(), n, "beta length must match Gram dimension");
    match grams {
        GramSet::Sum(kernels) => Ok(kernels.iter().map(|k| quadform(k, beta)).collect()),
        GramSet::Product(dists) => {
            let combined = combine(d, grams)?;
            let mut out = Vec::with_capacity(dists.len());
            for dist in dists {
                let mut acc = 0.0;
                for i in 0..n {
                    let bi = beta[i];
                    if bi == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        acc += bi * beta[j] * (-dist[[i, j]] * combined[[i, j]]);
                    }
                }
                out.push(acc);
            }
            Ok(out)
        }
    }
}

/// `βᵀ M β` for a symmetric matrix.
pub fn quadform(mat: &Array2<f64>, beta: &[f64]) -> f64 {
    let n = mat.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let bi = beta[i];
        if bi == 0.0 {
            continue;
        }
        let row = mat.row(i);
        let mut inner = 0.0;
        for j in 0..n {
            inner += beta[j] * row[j];
        }
        acc += bi * inner;
    }
    acc
}

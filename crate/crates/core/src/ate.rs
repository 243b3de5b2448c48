//! Cross-fitted average-treatment-effect estimators built on the orthogonal
//! score `ψ = α(D,X)(Y − μ(D,X)) + μ(1,X) − μ(0,X) − θ`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FoldAssignment, ObservationalDataset};
use crate::error::{Error, Result};
use crate::linalg::{mean, sample_sd};
use crate::models::{ridge_outcome_fit, Link, ModelSpec, OutcomeModel, RieszModel};
use crate::riesz::{fit_riesz, RieszFitConfig};
use crate::synthetic::Oracle;

/// A fitted regression `μ(d, x)`.
pub trait OutcomeRegression: Send + Sync {
    fn predict(&self, d: u8, x: &[f64]) -> f64;
}

/// A fitted representer `α(d, x)`.
pub trait RieszRepresenter: Send + Sync {
    fn alpha(&self, d: u8, x: &[f64]) -> f64;
}

/// Fits `μ` on a training fold.
pub trait OutcomeLearner: Sync {
    fn fit(&self, train: &ObservationalDataset, seed: u64) -> Result<Box<dyn OutcomeRegression>>;
}

/// Fits `α` on a training fold.
pub trait RieszLearner: Sync {
    fn fit(&self, train: &ObservationalDataset, seed: u64) -> Result<Box<dyn RieszRepresenter>>;
}

impl OutcomeRegression for OutcomeModel {
    fn predict(&self, d: u8, x: &[f64]) -> f64 {
        OutcomeModel::predict(self, d, x)
    }
}

impl RieszRepresenter for RieszModel {
    fn alpha(&self, d: u8, x: &[f64]) -> f64 {
        RieszModel::alpha(self, d, x)
    }
}

impl OutcomeRegression for Oracle {
    fn predict(&self, d: u8, x: &[f64]) -> f64 {
        self.mu(d, x)
    }
}

impl RieszRepresenter for Oracle {
    fn alpha(&self, d: u8, x: &[f64]) -> f64 {
        Oracle::alpha(self, d, x)
    }
}

/// Ridge regression on `[φ(x), d·φ(x)]`, optionally restricted to a subset of
/// covariate columns.
#[derive(Debug, Clone)]
pub struct RidgeOutcomeLearner {
    pub spec: ModelSpec,
    pub lambda: f64,
    pub columns: Option<Vec<usize>>,
}

impl OutcomeLearner for RidgeOutcomeLearner {
    fn fit(&self, train: &ObservationalDataset, seed: u64) -> Result<Box<dyn OutcomeRegression>> {
        let basis = match &self.columns {
            None => self.spec.linear_basis(train.x(), seed)?,
            Some(cols) => {
                let idx: Vec<usize> = (0..train.len()).collect();
                let sub = column_subset(train.x(), cols, &idx)?;
                self.spec.linear_basis(&sub, seed)?.on_columns(train.dim(), cols.clone())?
            }
        };
        Ok(Box::new(ridge_outcome_fit(train, &basis, self.lambda)?))
    }
}

fn column_subset(x: &crate::data::Samples, cols: &[usize], rows: &[usize]) -> Result<crate::data::Samples> {
    if let Some(&c) = cols.iter().find(|&&c| c >= x.ncols()) {
        return Err(Error::Config(format!("column {c} out of range for {} covariates", x.ncols())));
    }
    let flat = rows.iter().flat_map(|&i| cols.iter().map(move |&c| x.row(i)[c])).collect();
    crate::data::Samples::from_flat(rows.len(), cols.len(), flat)
}

/// Riesz regression with both heads on one basis.
#[derive(Debug, Clone)]
pub struct RieszRegressionLearner {
    pub spec: ModelSpec,
    pub link: Link,
    /// Starting value of both heads.
    pub start: f64,
    pub fit: RieszFitConfig,
}

impl RieszRegressionLearner {
    /// Heads linear in a polynomial basis. The least-squares objectives are
    /// then convex quadratics, and their first-order conditions balance every
    /// function in the span of the basis.
    pub fn linear(degree: usize, fit: RieszFitConfig) -> Self {
        RieszRegressionLearner { spec: ModelSpec::Poly { degree }, link: Link::Identity, start: 2.0, fit }
    }

    /// Heads `1 + exp(θᵀφ(x))`. For a logistic propensity and a degree-1
    /// basis this family contains the true representer. Meant for the
    /// `riesz-ukl` objective, which is convex in `θ` under this link; the
    /// least-squares objectives are not bounded below with it.
    pub fn logistic_ratio(degree: usize, fit: RieszFitConfig) -> Self {
        RieszRegressionLearner { spec: ModelSpec::Poly { degree }, link: Link::ShiftedExp, start: 2.0, fit }
    }
}

impl RieszLearner for RieszRegressionLearner {
    fn fit(&self, train: &ObservationalDataset, seed: u64) -> Result<Box<dyn RieszRepresenter>> {
        let basis = self.spec.linear_basis(train.x(), seed)?;
        let model0 = RieszModel::shared(basis, self.link, self.start)?;
        let cfg = RieszFitConfig { seed, ..self.fit.clone() };
        Ok(Box::new(fit_riesz(train, &model0, &cfg)?.model))
    }
}

/// Returns the known nuisances regardless of the training data.
#[derive(Debug, Clone)]
pub struct OracleLearner(pub Oracle);

impl OutcomeLearner for OracleLearner {
    fn fit(&self, _: &ObservationalDataset, _: u64) -> Result<Box<dyn OutcomeRegression>> {
        Ok(Box::new(self.0.clone()))
    }
}

impl RieszLearner for OracleLearner {
    fn fit(&self, _: &ObservationalDataset, _: u64) -> Result<Box<dyn RieszRepresenter>> {
        Ok(Box::new(self.0.clone()))
    }
}

/// `α(D,X)(Y − μ(D,X)) + μ(1,X) − μ(0,X) − θ`.
pub fn neyman_score(
    x: &[f64],
    d: u8,
    y: f64,
    mu: &dyn OutcomeRegression,
    alpha: &dyn RieszRepresenter,
    theta: f64,
) -> f64 {
    alpha.alpha(d, x) * (y - mu.predict(d, x)) + mu.predict(1, x) - mu.predict(0, x) - theta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Debiased,
    Plugin,
    Ipw,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Debiased => "debiased",
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Ipw => "ipw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold_id: usize,
    pub n_eval: usize,
    /// Mean of `α̂(D,X)(Y − μ̂(D,X))` over the fold.
    pub mean_correction: f64,
    /// Mean of `μ̂(1,X) − μ̂(0,X)` over the fold.
    pub mean_plugin: f64,
    /// Largest fitted `r̂1` or `r̂0` on the fold, when a representer was fitted.
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub estimator_kind: EstimatorKind,
    pub tau_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub folds: usize,
    pub per_fold: Vec<FoldDiagnostics>,
    pub warnings: Vec<String>,
    /// Uncentered per-observation scores, in row order.
    #[serde(skip)]
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteConfig {
    pub seed: u64,
    /// Overlap guard: warn when a fitted ratio exceeds `1 / eps_min`.
    pub eps_min: f64,
}

impl Default for AteConfig {
    fn default() -> Self {
        AteConfig { seed: 0, eps_min: 0.01 }
    }
}

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

struct FoldOut {
    rows: Vec<usize>,
    correction: Vec<f64>,
    plugin: Vec<f64>,
    max_ratio: Option<f64>,
}

fn cross_fit(
    data: &ObservationalDataset,
    folds: &FoldAssignment,
    cfg: &AteConfig,
    kind: EstimatorKind,
    mu: Option<&dyn OutcomeLearner>,
    alpha: Option<&dyn RieszLearner>,
) -> Result<AteReport> {
    if folds.fold_ids().len() != data.len() {
        return Err(Error::Shape(format!("{} fold ids for {} rows", folds.fold_ids().len(), data.len())));
    }
    if !(cfg.eps_min > 0.0 && cfg.eps_min < 0.5) {
        return Err(Error::Config(format!("eps_min must lie in (0, 0.5), got {}", cfg.eps_min)));
    }
    let outs: Vec<FoldOut> = (0..folds.k())
        .into_par_iter()
        .map(|f| -> Result<FoldOut> {
            let train_idx = folds.complement(f);
            let train = data.subset_unchecked(&train_idx);
            if alpha.is_some() {
                for arm in [1u8, 0] {
                    if train.arm_count(arm) == 0 {
                        return Err(Error::EmptyArmInFold { fold: f, arm });
                    }
                }
            }
            let fold_seed = cfg.seed ^ (f as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mu_hat = mu.map(|l| l.fit(&train, fold_seed)).transpose()?;
            let alpha_hat = alpha.map(|l| l.fit(&train, fold_seed)).transpose()?;
            let rows = folds.fold(f);
            let mut out = FoldOut { correction: Vec::new(), plugin: Vec::new(), max_ratio: None, rows: Vec::new() };
            for &i in &rows {
                let x = data.x().row(i);
                let (d, y) = (data.treatment()[i], data.outcome()[i]);
                let (fit_d, plug) = match &mu_hat {
                    Some(m) => (m.predict(d, x), m.predict(1, x) - m.predict(0, x)),
                    None => (0.0, 0.0),
                };
                let corr = match &alpha_hat {
                    Some(a) => {
                        let peak = a.alpha(1, x).max(-a.alpha(0, x));
                        out.max_ratio = Some(out.max_ratio.map_or(peak, |m: f64| m.max(peak)));
                        a.alpha(d, x) * (y - fit_d)
                    }
                    None => 0.0,
                };
                out.correction.push(corr);
                out.plugin.push(plug);
            }
            out.rows = rows;
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let n = data.len();
    let mut scores = vec![0.0; n];
    let mut per_fold = Vec::with_capacity(outs.len());
    let mut warnings = Vec::new();
    for (f, o) in outs.iter().enumerate() {
        for (j, &i) in o.rows.iter().enumerate() {
            scores[i] = o.correction[j] + o.plugin[j];
        }
        if let Some(m) = o.max_ratio {
            if m > 1.0 / cfg.eps_min {
                let w = format!("overlap: fold {f} has a fitted ratio {m:.1} above 1/eps_min = {:.1}", 1.0 / cfg.eps_min);
                log::warn!("{w}");
                warnings.push(w);
            }
        }
        per_fold.push(FoldDiagnostics {
            fold_id: f,
            n_eval: o.rows.len(),
            mean_correction: mean(&o.correction),
            mean_plugin: mean(&o.plugin),
            max_ratio: o.max_ratio,
        });
    }
    let tau_hat = mean(&scores);
    let se = sample_sd(&scores) / (n as f64).sqrt();
    if kind == EstimatorKind::Plugin {
        warnings.push("plug-in standard error is a diagnostic, not a valid asymptotic standard error".into());
    }
    Ok(AteReport {
        estimator_kind: kind,
        tau_hat,
        se,
        ci_low: tau_hat - Z_95 * se,
        ci_high: tau_hat + Z_95 * se,
        n,
        folds: folds.k(),
        per_fold,
        warnings,
        scores,
    })
}

/// Cross-fitted debiased estimator: `μ̂` and `α̂` are fitted on each fold's
/// complement and the score is averaged over held-out rows.
pub fn estimate_ate_debiased(
    data: &ObservationalDataset,
    folds: &FoldAssignment,
    cfg: &AteConfig,
    mu: &dyn OutcomeLearner,
    alpha: &dyn RieszLearner,
) -> Result<AteReport> {
    cross_fit(data, folds, cfg, EstimatorKind::Debiased, Some(mu), Some(alpha))
}

/// Cross-fitted plug-in estimator `(1/n) Σ [μ̂(1,X) − μ̂(0,X)]`.
pub fn estimate_ate_plugin(
    data: &ObservationalDataset,
    folds: &FoldAssignment,
    cfg: &AteConfig,
    mu: &dyn OutcomeLearner,
) -> Result<AteReport> {
    cross_fit(data, folds, cfg, EstimatorKind::Plugin, Some(mu), None)
}

/// Cross-fitted weighting estimator `(1/n) Σ α̂(D,X) Y`.
pub fn estimate_ate_ipw(
    data: &ObservationalDataset,
    folds: &FoldAssignment,
    cfg: &AteConfig,
    alpha: &dyn RieszLearner,
) -> Result<AteReport> {
    cross_fit(data, folds, cfg, EstimatorKind::Ipw, None, Some(alpha))
}

/// Difference of arm means, no adjustment.
pub fn naive_difference(data: &ObservationalDataset) -> f64 {
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&d, &y) in data.treatment().iter().zip(data.outcome()) {
        if d == 1 {
            s1 += y;
        } else {
            s0 += y;
        }
    }
    s1 / data.arm_count(1) as f64 - s0 / data.arm_count(0) as f64
}

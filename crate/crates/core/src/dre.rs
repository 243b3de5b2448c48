//! Direct density-ratio estimation by empirical Bregman risk minimization.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Samples, TwoSampleDataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, Features};
use crate::losses::{bd_terms, chain, link_values, pu_saturation_warning, BregmanLoss, RiskValue};
use crate::models::{BasisExpansion, BasisKind, DensityRatio, GaussianKernel, Link, RatioModel};
use crate::optim::{minimize, OptimizerSettings};

/// Penalty `Ω(θ)` added to the empirical risk with weight `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `Σ θ_j²` over non-intercept coefficients.
    L2Coefficients,
    /// `θᵀ K θ` for a Gaussian-center basis, the squared RKHS norm of the
    /// non-intercept part.
    RkhsNorm,
}

/// Evaluates `λ·Ω(θ)` and its gradient for one basis.
#[derive(Debug, Clone)]
pub(crate) struct Penalty {
    lambda: f64,
    offset: usize,
    mask: Vec<f64>,
    gram: Option<nalgebra::DMatrix<f64>>,
}

impl Penalty {
    pub(crate) fn new(basis: &BasisExpansion, kind: Regularizer, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("regularization weight must be non-negative, got {lambda}")));
        }
        let offset = usize::from(basis.has_intercept());
        let gram = match (kind, basis.kind()) {
            (Regularizer::L2Coefficients, _) => None,
            (Regularizer::RkhsNorm, BasisKind::GaussianCenters { centers, bandwidth }) => {
                Some(GaussianKernel::new(*bandwidth)?.gram(centers, centers))
            }
            (Regularizer::RkhsNorm, _) => {
                return Err(Error::Config("the RKHS-norm penalty needs a Gaussian-center basis".into()))
            }
        };
        Ok(Penalty { lambda, offset, mask: basis.penalty_mask(), gram })
    }

    /// Adds the gradient into `grad` and returns the value.
    pub(crate) fn apply(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        match &self.gram {
            None => {
                let mut v = 0.0;
                for ((t, m), g) in theta.iter().zip(&self.mask).zip(grad.iter_mut()) {
                    v += m * t * t;
                    *g += 2.0 * self.lambda * m * t;
                }
                self.lambda * v
            }
            Some(k) => {
                let c = &theta[self.offset..];
                let kc: Vec<f64> = (0..c.len()).map(|i| (0..c.len()).map(|j| k[(i, j)] * c[j]).sum()).collect();
                for (g, v) in grad[self.offset..].iter_mut().zip(&kc) {
                    *g += 2.0 * self.lambda * v;
                }
                self.lambda * dot(c, &kc)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreFitConfig {
    pub loss: BregmanLoss,
    pub reg_lambda: f64,
    pub reg_kind: Regularizer,
    pub optimizer: OptimizerSettings,
    /// Constant `C` of the non-negative correction, when enabled.
    pub nonneg_correction: Option<f64>,
    pub seed: u64,
}

impl Default for DreFitConfig {
    fn default() -> Self {
        DreFitConfig {
            loss: BregmanLoss::Lsif,
            reg_lambda: 0.0,
            reg_kind: Regularizer::L2Coefficients,
            optimizer: OptimizerSettings::default(),
            nonneg_correction: None,
            seed: 0,
        }
    }
}

impl DreFitConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if let Some(c) = self.nonneg_correction {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("non-negative correction constant must be positive, got {c}")));
            }
        }
        if self.loss == BregmanLoss::RieszUkl {
            return Err(Error::Config("riesz-ukl is a representer loss, not a density-ratio loss".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreFit {
    pub model: RatioModel,
    /// Penalized objective after each accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub warnings: Vec<String>,
}

/// uLSIF risk `−(2/n_nu) Σ r(x_nu) + (1/n_de) Σ r(x_de)²` and its gradient.
pub fn lsif_empirical_risk(r: &RatioModel, data: &TwoSampleDataset) -> Result<RiskValue> {
    let phi_de = r.basis.design(data.de())?;
    let phi_nu = r.basis.design(data.nu())?;
    let (r_de, dr_de) = link_values(r, &r.theta, &phi_de);
    let (r_nu, dr_nu) = link_values(r, &r.theta, &phi_nu);
    let (n_de, n_nu) = (r_de.len() as f64, r_nu.len() as f64);
    let value = -2.0 * r_nu.iter().sum::<f64>() / n_nu + r_de.iter().map(|v| v * v).sum::<f64>() / n_de;
    let mut grad = vec![0.0; r.n_params()];
    let w_de: Vec<f64> = r_de.iter().map(|v| 2.0 * v / n_de).collect();
    chain(&phi_de, &w_de, &dr_de, &mut grad);
    chain(&phi_nu, &vec![-2.0 / n_nu; r_nu.len()], &dr_nu, &mut grad);
    Ok(RiskValue { value, grad: Some(grad) })
}

/// Non-negative corrected risk
///
/// `(1/n_nu) Σ ℓ₂(r_nu) + C (1/n_nu) Σ ℓ₁(r_nu) + [(1/n_de) Σ ℓ₁(r_de) − C (1/n_nu) Σ ℓ₁(r_nu)]₊`.
///
/// The middle term adds back what the bracket subtracts, so the value equals
/// the plain risk whenever the bracket is positive. When the bracket is not
/// positive it contributes neither value nor gradient.
pub fn nonneg_corrected_risk(r: &RatioModel, data: &TwoSampleDataset, loss: BregmanLoss, c: f64) -> Result<RiskValue> {
    let phi_de = r.basis.design(data.de())?;
    let phi_nu = r.basis.design(data.nu())?;
    let mut grad = vec![0.0; r.n_params()];
    let value = nonneg_value_grad(loss, c, r, &r.theta, &phi_de, &phi_nu, &mut grad)?;
    Ok(RiskValue { value, grad: Some(grad) })
}

fn nonneg_value_grad(
    loss: BregmanLoss,
    c: f64,
    model: &RatioModel,
    theta: &[f64],
    phi_de: &Features,
    phi_nu: &Features,
    grad: &mut [f64],
) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Config(format!("non-negative correction constant must be non-negative, got {c}")));
    }
    let (r_de, dr_de) = link_values(model, theta, phi_de);
    let (r_nu, dr_nu) = link_values(model, theta, phi_nu);
    let t = bd_terms(loss, &r_de, &r_nu, true)?;
    let bracket = t.de_ell1 - c * t.nu_ell1;
    let w_nu: Vec<f64> = if bracket > 0.0 {
        chain(phi_de, &t.w_de_ell1, &dr_de, grad);
        t.w_nu_ell2.clone()
    } else {
        t.w_nu_ell2.iter().zip(&t.w_nu_ell1).map(|(a, b)| a + c * b).collect()
    };
    chain(phi_nu, &w_nu, &dr_nu, grad);
    Ok(t.nu_ell2 + c * t.nu_ell1 + bracket.max(0.0))
}

fn bd_value_grad(
    loss: BregmanLoss,
    model: &RatioModel,
    theta: &[f64],
    phi_de: &Features,
    phi_nu: &Features,
    grad: &mut [f64],
) -> Result<f64> {
    let (r_de, dr_de) = link_values(model, theta, phi_de);
    let (r_nu, dr_nu) = link_values(model, theta, phi_nu);
    let t = bd_terms(loss, &r_de, &r_nu, false)?;
    chain(phi_de, &t.w_de_ell1, &dr_de, grad);
    chain(phi_nu, &t.w_nu_ell2, &dr_nu, grad);
    Ok(t.de_ell1 + t.nu_ell2)
}

/// Minimizes the empirical Bregman risk (or its non-negative correction)
/// plus `λ·Ω(θ)`, starting from `model0`.
pub fn fit_dre(data: &TwoSampleDataset, model0: &RatioModel, cfg: &DreFitConfig) -> Result<DreFit> {
    cfg.validate()?;
    let phi_de = model0.basis.design(data.de())?;
    let phi_nu = model0.basis.design(data.nu())?;
    let penalty = Penalty::new(&model0.basis, cfg.reg_kind, cfg.reg_lambda)?;
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; theta.len()];
        let risk = match cfg.nonneg_correction {
            Some(c) => nonneg_value_grad(cfg.loss, c, model0, theta, &phi_de, &phi_nu, &mut grad)?,
            None => bd_value_grad(cfg.loss, model0, theta, &phi_de, &phi_nu, &mut grad)?,
        };
        let pen = penalty.apply(theta, &mut grad);
        Ok((risk + pen, grad))
    };
    let out = minimize(objective, model0.theta.clone(), &cfg.optimizer)?;
    let model = model0.with_theta(out.theta);
    let mut warnings = Vec::new();
    if !out.converged {
        warnings.push(format!("optimizer did not converge in {} iterations", out.iterations));
    }
    if let BregmanLoss::PuLog { c } = cfg.loss {
        let max_ratio = model.eval_many(data.de()).into_iter().chain(model.eval_many(data.nu())).fold(f64::MIN, f64::max);
        if let Some(w) = pu_saturation_warning(c, max_ratio) {
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(DreFit {
        model,
        trace: out.trace,
        converged: out.converged,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        warnings,
    })
}

/// The fitted model with `max(r, 0)` applied at evaluation time.
pub fn truncate_nonnegative(r: &RatioModel) -> RatioModel {
    RatioModel { truncate: true, ..r.clone() }
}

/// `log r(x)`, exact on the linear predictor for exponential links.
pub fn log_ratio(r: &RatioModel, x: &[f64]) -> f64 {
    match (r.link, r.truncate) {
        (Link::Exp, _) => dot(&r.basis.features(x), &r.theta),
        _ => r.eval(x).ln(),
    }
}

/// How intermediate distributions between `p_nu` and `p_de` are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaymarkRule {
    /// Waymark `k` of `m` pools `n − ⌊k n / m⌋` numerator rows with
    /// `⌊k n / m⌋` denominator rows, drawn without replacement, where
    /// `n = min(n_nu, n_de)`. The end waymarks are the full samples.
    PooledFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopeConfig {
    pub m: usize,
    pub waymark_rule: WaymarkRule,
    pub stage: DreFitConfig,
}

/// Minimum rows in any waymark.
pub const MIN_WAYMARK_SAMPLES: usize = 10;

/// Waymarks `W_0 = nu, W_1, …, W_m = de`.
pub fn build_waymarks(data: &TwoSampleDataset, m: usize, rule: WaymarkRule, seed: u64) -> Result<Vec<Samples>> {
    if m == 0 {
        return Err(Error::Config("telescope needs at least one stage".into()));
    }
    let n = data.n_nu().min(data.n_de());
    let sizes = [(0, data.n_nu()), (m, data.n_de()), (1, n)];
    for (waymark, got) in sizes.into_iter().filter(|&(k, _)| k <= m) {
        if got < MIN_WAYMARK_SAMPLES {
            return Err(Error::InsufficientWaymarkSamples { waymark, got, needed: MIN_WAYMARK_SAMPLES });
        }
    }
    let WaymarkRule::PooledFraction = rule;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(m + 1);
    out.push(data.nu().clone());
    for k in 1..m {
        let from_de = k * n / m;
        let from_nu = n - from_de;
        let mut i_nu = sample(&mut rng, data.n_nu(), from_nu).into_vec();
        let mut i_de = sample(&mut rng, data.n_de(), from_de).into_vec();
        i_nu.sort_unstable();
        i_de.sort_unstable();
        out.push(data.nu().select(&i_nu).concat(&data.de().select(&i_de))?);
    }
    out.push(data.de().clone());
    Ok(out)
}

/// Product of per-stage ratio models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopedRatio {
    pub stages: Vec<RatioModel>,
}

impl TelescopedRatio {
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        self.stages.iter().map(|s| log_ratio(s, x)).sum()
    }
}

impl DensityRatio for TelescopedRatio {
    fn ratio(&self, x: &[f64]) -> f64 {
        self.stages.iter().map(|s| s.eval(x)).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopedFit {
    pub ratio: TelescopedRatio,
    pub stage_fits: Vec<DreFit>,
}

/// Fits `p_nu / p_de = Π_k p_k / p_{k+1}` stage by stage, every stage starting
/// from `model0`.
pub fn fit_telescoped(data: &TwoSampleDataset, model0: &RatioModel, cfg: &TelescopeConfig) -> Result<TelescopedFit> {
    fit_telescoped_with(data, cfg, |_, _| Ok(model0.clone()))
}

/// As [`fit_telescoped`], with the starting model of stage `k` built from the
/// stage's two-sample data.
pub fn fit_telescoped_with<F>(data: &TwoSampleDataset, cfg: &TelescopeConfig, mut stage_model: F) -> Result<TelescopedFit>
where
    F: FnMut(usize, &TwoSampleDataset) -> Result<RatioModel>,
{
    let waymarks = build_waymarks(data, cfg.m, cfg.waymark_rule, cfg.stage.seed)?;
    let mut stage_fits = Vec::with_capacity(cfg.m);
    for k in 0..cfg.m {
        let pair = if cfg.m == 1 {
            data.clone()
        } else {
            TwoSampleDataset::new(waymarks[k + 1].clone(), waymarks[k].clone())?
        };
        let model0 = stage_model(k, &pair)?;
        stage_fits.push(fit_dre(&pair, &model0, &cfg.stage)?);
    }
    let stages = stage_fits.iter().map(|f| f.model.clone()).collect();
    Ok(TelescopedFit { ratio: TelescopedRatio { stages }, stage_fits })
}

/// Serializable fitted ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FittedRatioModel {
    Single { model: RatioModel },
    Telescoped { stages: Vec<RatioModel> },
}

impl FittedRatioModel {
    pub fn input_dim(&self) -> usize {
        match self {
            FittedRatioModel::Single { model } => model.basis.input_dim(),
            FittedRatioModel::Telescoped { stages } => stages.first().map_or(0, |s| s.basis.input_dim()),
        }
    }
}

impl DensityRatio for FittedRatioModel {
    fn ratio(&self, x: &[f64]) -> f64 {
        match self {
            FittedRatioModel::Single { model } => model.eval(x),
            FittedRatioModel::Telescoped { stages } => stages.iter().map(|s| s.eval(x)).product(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Samples {
        Samples::from_column(v).unwrap()
    }

    #[test]
    fn lsif_linear_toy() {
        // r = θx, de = {1, 2}, nu = {3}: −6θ + 2.5θ², minimized at 1.2.
        let data = TwoSampleDataset::new(col(&[1.0, 2.0]), col(&[3.0])).unwrap();
        let basis = BasisExpansion::polynomial(1, 1).unwrap().without_intercept().unwrap();
        for theta in [-1.0, 0.0, 0.5, 1.2, 3.0] {
            let m = RatioModel::new(basis.clone(), vec![theta], Link::Identity).unwrap();
            let v = lsif_empirical_risk(&m, &data).unwrap();
            assert!((v.value - (-6.0 * theta + 2.5 * theta * theta)).abs() < 1e-12);
            assert!((v.grad.unwrap()[0] - (-6.0 + 5.0 * theta)).abs() < 1e-12);
        }
        let m0 = RatioModel::new(basis, vec![0.0], Link::Identity).unwrap();
        let fit = fit_dre(&data, &m0, &DreFitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.model.theta[0] - 1.2).abs() < 1e-8);
    }

    #[test]
    fn zero_and_constant_models() {
        let data = TwoSampleDataset::new(col(&[0.2, -1.0, 3.0]), col(&[0.5, 0.7])).unwrap();
        let b = BasisExpansion::intercept_only(1).unwrap();
        let zero = RatioModel::new(b.clone(), vec![0.0], Link::Identity).unwrap();
        assert_eq!(lsif_empirical_risk(&zero, &data).unwrap().value, 0.0);
        let m = RatioModel::new(b.clone(), vec![0.3], Link::Identity).unwrap();
        assert!((lsif_empirical_risk(&m, &data).unwrap().value - (-0.6 + 0.09)).abs() < 1e-15);
        let fit = fit_dre(&data, &m, &DreFitConfig::default()).unwrap();
        assert!((fit.model.theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nonneg_examples() {
        let data = TwoSampleDataset::new(col(&[0.0]), col(&[0.0])).unwrap();
        let zero = RatioModel::new(BasisExpansion::intercept_only(1).unwrap(), vec![0.0], Link::Identity).unwrap();
        // ℓ₂(0) = 1, ℓ₁(0) = −½: 1 − ½·½ + [−½ + ¼]₊
        let v = nonneg_corrected_risk(&zero, &data, BregmanLoss::Lsif, 0.5).unwrap();
        assert!((v.value - 0.75).abs() < 1e-15);
        assert_eq!(v.grad.unwrap()[0], -1.0 + 0.5 * 0.0);

        // Bracket positive: equals the plain risk.
        let data = TwoSampleDataset::new(col(&[1.0, 2.0, 3.0]), col(&[0.1, 0.2])).unwrap();
        let b = BasisExpansion::polynomial(1, 1).unwrap();
        let m = RatioModel::new(b, vec![0.5, 0.8], Link::Identity).unwrap();
        let plain = crate::losses::bd_population_risk(BregmanLoss::Lsif, &m, &data).unwrap();
        let nn = nonneg_corrected_risk(&m, &data, BregmanLoss::Lsif, 0.3).unwrap();
        assert!((plain.value - nn.value).abs() < 1e-14);
        for (a, b) in plain.grad.unwrap().iter().zip(nn.grad.unwrap()) {
            assert!((a - b).abs() < 1e-14);
        }
        let c0 = nonneg_corrected_risk(&m, &data, BregmanLoss::Lsif, 0.0).unwrap();
        assert!((plain.value - c0.value).abs() < 1e-14);
    }

    #[test]
    fn truncation() {
        let b = BasisExpansion::polynomial(1, 1).unwrap();
        let m = RatioModel::new(b.clone(), vec![-1.0, 0.0], Link::Identity).unwrap();
        assert_eq!(truncate_nonnegative(&m).eval(&[4.0]), 0.0);
        let m = RatioModel::new(b, vec![0.0, 1.0], Link::Identity).unwrap();
        let t = truncate_nonnegative(&m);
        assert_eq!((t.eval(&[-1.0]), t.eval(&[2.0])), (0.0, 2.0));
    }

    #[test]
    fn rkhs_penalty_needs_gaussian_basis() {
        let b = BasisExpansion::polynomial(1, 2).unwrap();
        assert!(Penalty::new(&b, Regularizer::RkhsNorm, 1.0).is_err());
        let g = BasisExpansion::gaussian(col(&[0.0, 1.0]), 1.0).unwrap();
        let p = Penalty::new(&g, Regularizer::RkhsNorm, 2.0).unwrap();
        let mut grad = vec![0.0; 3];
        let k01 = (-0.5f64).exp();
        let v = p.apply(&[5.0, 1.0, 1.0], &mut grad);
        assert!((v - 2.0 * (2.0 + 2.0 * k01)).abs() < 1e-14);
        assert_eq!(grad[0], 0.0);
    }

    #[test]
    fn waymark_sizes() {
        let de = col(&(0..40).map(f64::from).collect::<Vec<_>>());
        let nu = col(&(100..130).map(f64::from).collect::<Vec<_>>());
        let data = TwoSampleDataset::new(de, nu).unwrap();
        let w = build_waymarks(&data, 3, WaymarkRule::PooledFraction, 5).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w[0].nrows(), 30);
        assert_eq!(w[3].nrows(), 40);
        let from_de = |s: &Samples| s.rows().filter(|r| r[0] < 100.0).count();
        assert_eq!((w[1].nrows(), from_de(&w[1])), (30, 10));
        assert_eq!((w[2].nrows(), from_de(&w[2])), (30, 20));
        assert_eq!(w, build_waymarks(&data, 3, WaymarkRule::PooledFraction, 5).unwrap());

        let small = TwoSampleDataset::new(col(&[0.0; 9]), col(&[1.0; 20])).unwrap();
        assert!(matches!(
            build_waymarks(&small, 2, WaymarkRule::PooledFraction, 0),
            Err(Error::InsufficientWaymarkSamples { got: 9, .. })
        ));
    }
}

//! Riesz regression for the ATE representer
//! `α(d, x) = d·r1(x) − (1 − d)·r0(x)`.
//!
//! The least-squares Riesz objective in `α` and the paired LSIF objective in
//! `(r1, r0)` are computed by separate code paths; they coincide exactly
//! because `α(D, X)² = D·r1(X)² + (1 − D)·r0(X)²` for binary `D`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ObservationalDataset;
use crate::dre::{Penalty, Regularizer};
use crate::error::{Error, Result};
use crate::linalg::Features;
use crate::losses::{chain, link_values, riesz_tailored_ukl_risk, riesz_ukl_terms, RiskValue};
use crate::models::{Link, RatioModel, RieszModel};
use crate::optim::{minimize, OptimizerSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RieszObjective {
    /// `(1/n) Σ [−2(α(1,X) − α(0,X)) + α(D,X)²]`.
    RieszLsq,
    /// `(1/n) Σ [−2(r1(X) + r0(X)) + D r1(X)² + (1 − D) r0(X)²]`.
    PairedLsif,
    /// Signed-representer UKL risk; needs heads bounded above 1.
    RieszUkl,
}

impl fmt::Display for RieszObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RieszObjective::RieszLsq => "riesz-lsq",
            RieszObjective::PairedLsif => "paired-lsif",
            RieszObjective::RieszUkl => "riesz-ukl",
        })
    }
}

impl FromStr for RieszObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riesz-lsq" => Ok(RieszObjective::RieszLsq),
            "paired-lsif" => Ok(RieszObjective::PairedLsif),
            "riesz-ukl" => Ok(RieszObjective::RieszUkl),
            _ => Err(Error::Config(format!("unknown Riesz objective `{s}` (expected riesz-lsq | paired-lsif | riesz-ukl)"))),
        }
    }
}

/// Builds `α` from the two ratio heads.
pub fn alpha_from_ratios(r1: &RatioModel, r0: &RatioModel) -> Result<RieszModel> {
    RieszModel::separate(r1.clone(), r0.clone())
}

/// Splits `α` back into `(r1, r0)` with `r1(x) = α(1, x)` and
/// `r0(x) = −α(0, x)`.
pub fn ratios_from_alpha(alpha: &RieszModel) -> (RatioModel, RatioModel) {
    (alpha.r1.clone(), alpha.r0.clone())
}

struct Designs {
    phi1: Features,
    phi0: Features,
}

impl Designs {
    fn new(model: &RieszModel, data: &ObservationalDataset) -> Result<Self> {
        let phi1 = model.r1.basis.design(data.x())?;
        let phi0 = if model.r0.basis == model.r1.basis { phi1.clone() } else { model.r0.basis.design(data.x())? };
        Ok(Designs { phi1, phi0 })
    }
}

fn riesz_lsq_value_grad(model: &RieszModel, params: &[f64], d: &[u8], ph: &Designs, grad: &mut [f64]) -> f64 {
    let k = model.r1.n_params();
    let (a1, da1) = link_values(&model.r1, &params[..k], &ph.phi1);
    let (r0, dr0) = link_values(&model.r0, &params[k..], &ph.phi0);
    let a0: Vec<f64> = r0.iter().map(|v| -v).collect();
    let n = d.len() as f64;
    let mut value = 0.0;
    let mut w1 = Vec::with_capacity(d.len());
    let mut w0 = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let ad = if d[i] == 1 { a1[i] } else { a0[i] };
        value += -2.0 * (a1[i] - a0[i]) + ad * ad;
        let di = f64::from(d[i]);
        w1.push((-2.0 + 2.0 * di * a1[i]) / n);
        // ∂/∂α(0) = 2 + 2(1 − D)α(0), and ∂α(0)/∂r0 = −1.
        w0.push(-(2.0 + 2.0 * (1.0 - di) * a0[i]) / n);
    }
    chain(&ph.phi1, &w1, &da1, &mut grad[..k]);
    chain(&ph.phi0, &w0, &dr0, &mut grad[k..]);
    value / n
}

fn paired_lsif_value_grad(
    r1m: &RatioModel,
    r0m: &RatioModel,
    params: &[f64],
    d: &[u8],
    ph: &Designs,
    grad: &mut [f64],
) -> f64 {
    let k = r1m.n_params();
    let (r1, dr1) = link_values(r1m, &params[..k], &ph.phi1);
    let (r0, dr0) = link_values(r0m, &params[k..], &ph.phi0);
    let n = d.len() as f64;
    let mut value = 0.0;
    let mut w1 = Vec::with_capacity(d.len());
    let mut w0 = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let di = f64::from(d[i]);
        value += -2.0 * (r1[i] + r0[i]) + di * r1[i] * r1[i] + (1.0 - di) * r0[i] * r0[i];
        w1.push((-2.0 + 2.0 * di * r1[i]) / n);
        w0.push((-2.0 + 2.0 * (1.0 - di) * r0[i]) / n);
    }
    chain(&ph.phi1, &w1, &dr1, &mut grad[..k]);
    chain(&ph.phi0, &w0, &dr0, &mut grad[k..]);
    value / n
}

/// Least-squares Riesz risk and its gradient in `[θ1, θ0]`.
pub fn riesz_empirical_risk(alpha: &RieszModel, data: &ObservationalDataset) -> Result<RiskValue> {
    let ph = Designs::new(alpha, data)?;
    let mut grad = vec![0.0; alpha.n_params()];
    let value = riesz_lsq_value_grad(alpha, &alpha.params(), data.treatment(), &ph, &mut grad);
    Ok(RiskValue { value, grad: Some(grad) })
}

/// Paired LSIF risk of `(r1, r0)` and its gradient in `[θ1, θ0]`.
pub fn paired_lsif_risk(r1: &RatioModel, r0: &RatioModel, data: &ObservationalDataset) -> Result<RiskValue> {
    let phi1 = r1.basis.design(data.x())?;
    let phi0 = r0.basis.design(data.x())?;
    let ph = Designs { phi1, phi0 };
    let mut params = r1.theta.clone();
    params.extend_from_slice(&r0.theta);
    let mut grad = vec![0.0; params.len()];
    let value = paired_lsif_value_grad(r1, r0, &params, data.treatment(), &ph, &mut grad);
    Ok(RiskValue { value, grad: Some(grad) })
}

/// Risk of `alpha` under the chosen objective.
pub fn riesz_objective_risk(objective: RieszObjective, alpha: &RieszModel, data: &ObservationalDataset) -> Result<RiskValue> {
    match objective {
        RieszObjective::RieszLsq => riesz_empirical_risk(alpha, data),
        RieszObjective::PairedLsif => paired_lsif_risk(&alpha.r1, &alpha.r0, data),
        RieszObjective::RieszUkl => riesz_tailored_ukl_risk(alpha, data),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszFitConfig {
    pub objective: RieszObjective,
    pub reg_lambda: f64,
    pub reg_kind: Regularizer,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
}

impl Default for RieszFitConfig {
    fn default() -> Self {
        RieszFitConfig {
            objective: RieszObjective::RieszLsq,
            reg_lambda: 0.0,
            reg_kind: Regularizer::L2Coefficients,
            optimizer: OptimizerSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszFit {
    pub model: RieszModel,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn above_one(link: Link) -> bool {
    matches!(link, Link::ShiftedSoftplus | Link::ShiftedExp)
}

/// Minimizes the selected empirical objective plus `λ·Ω` over both heads.
pub fn fit_riesz(data: &ObservationalDataset, model0: &RieszModel, cfg: &RieszFitConfig) -> Result<RieszFit> {
    cfg.optimizer.validate()?;
    if cfg.objective == RieszObjective::RieszUkl && !(above_one(model0.r1.link) && above_one(model0.r0.link)) {
        return Err(Error::Config("riesz-ukl needs both heads on a link bounded below by 1 (softplus1 or exp1)".into()));
    }
    let ph = Designs::new(model0, data)?;
    let pen1 = Penalty::new(&model0.r1.basis, cfg.reg_kind, cfg.reg_lambda)?;
    let pen0 = Penalty::new(&model0.r0.basis, cfg.reg_kind, cfg.reg_lambda)?;
    let k = model0.r1.n_params();
    let d = data.treatment();
    let objective = |params: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; params.len()];
        let risk = match cfg.objective {
            RieszObjective::RieszLsq => riesz_lsq_value_grad(model0, params, d, &ph, &mut grad),
            RieszObjective::PairedLsif => paired_lsif_value_grad(&model0.r1, &model0.r0, params, d, &ph, &mut grad),
            RieszObjective::RieszUkl => {
                let (a1, da1) = link_values(&model0.r1, &params[..k], &ph.phi1);
                let (r0, dr0) = link_values(&model0.r0, &params[k..], &ph.phi0);
                let a0: Vec<f64> = r0.iter().map(|v| -v).collect();
                let (value, g1, g0) = riesz_ukl_terms(d, &a1, &a0)?;
                chain(&ph.phi1, &g1, &da1, &mut grad[..k]);
                let g0: Vec<f64> = g0.iter().map(|v| -v).collect();
                chain(&ph.phi0, &g0, &dr0, &mut grad[k..]);
                value
            }
        };
        let (g1, g0) = grad.split_at_mut(k);
        let pen = pen1.apply(&params[..k], g1) + pen0.apply(&params[k..], g0);
        Ok((risk + pen, grad))
    };
    let out = minimize(objective, model0.params(), &cfg.optimizer)?;
    Ok(RieszFit {
        model: model0.with_params(&out.theta),
        trace: out.trace,
        converged: out.converged,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
    })
}

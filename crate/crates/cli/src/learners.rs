//! Flag groups shared by several commands.

use riesz_dre::ate::{RidgeOutcomeLearner, RieszRegressionLearner};
use riesz_dre::dre::Regularizer;
use riesz_dre::models::{Link, ModelSpec};
use riesz_dre::optim::OptimizerSettings;
use riesz_dre::riesz::{RieszFitConfig, RieszObjective};

use crate::config::Resolver;
use crate::{CliError, OptimArgs, OutcomeLearnerArgs, RieszLearnerArgs};

pub(crate) fn optimizer(r: &mut Resolver, a: &OptimArgs, max_iters: usize, grad_tol: f64) -> Result<OptimizerSettings, CliError> {
    let s = OptimizerSettings {
        max_iters: r.get("max-iters", a.max_iters.clone(), max_iters)?,
        step_size: r.get("step-size", a.step_size.clone(), 1.0)?,
        grad_tol: r.get("grad-tol", a.grad_tol.clone(), grad_tol)?,
    };
    s.validate()?;
    Ok(s)
}

pub(crate) fn regularizer(r: &mut Resolver, cli: Option<String>) -> Result<Regularizer, CliError> {
    let token: String = r.get("regularizer", cli, "l2".to_string())?;
    match token.as_str() {
        "l2" => Ok(Regularizer::L2Coefficients),
        "rkhs" => Ok(Regularizer::RkhsNorm),
        other => Err(CliError::Usage(format!("--regularizer: expected l2 | rkhs, got `{other}`"))),
    }
}

/// Least-squares objectives get linear heads; riesz-ukl needs heads above 1.
pub(crate) fn default_riesz_link(objective: RieszObjective) -> Link {
    match objective {
        RieszObjective::RieszUkl => Link::ShiftedSoftplus,
        RieszObjective::RieszLsq | RieszObjective::PairedLsif => Link::Identity,
    }
}

/// Linear-in-basis model spec; kernel expansions are refused.
pub(crate) fn linear_spec(r: &mut Resolver, key: &str, cli: Option<String>, default: &str) -> Result<ModelSpec, CliError> {
    let spec: ModelSpec = r.get(key, cli, default.parse()?)?;
    if let ModelSpec::Kulsif { .. } = spec {
        return Err(CliError::Usage(format!("--{key}: kulsif is not available here; use linear:poly or linear:rbf")));
    }
    Ok(spec)
}

pub(crate) fn riesz_learner(r: &mut Resolver, a: &RieszLearnerArgs) -> Result<RieszRegressionLearner, CliError> {
    let objective: RieszObjective = r.get("riesz-objective", a.riesz_objective.clone(), RieszObjective::RieszLsq)?;
    let spec = linear_spec(r, "riesz-model", a.riesz_model.clone(), "linear:poly:1")?;
    let link: Link = r.get("riesz-link", a.riesz_link.clone(), default_riesz_link(objective))?;
    let reg_lambda: f64 = r.get("riesz-lambda", a.riesz_lambda.clone(), 0.0)?;
    let optimizer = optimizer(
        r,
        &OptimArgs { max_iters: a.max_iters.clone(), step_size: None, grad_tol: a.grad_tol.clone() },
        5000,
        1e-6,
    )?;
    let fit = RieszFitConfig { objective, reg_lambda, optimizer, ..Default::default() };
    Ok(RieszRegressionLearner { spec, link, start: 2.0, fit })
}

pub(crate) fn outcome_learner(r: &mut Resolver, a: &OutcomeLearnerArgs) -> Result<RidgeOutcomeLearner, CliError> {
    let spec = linear_spec(r, "outcome-model", a.outcome_model.clone(), "linear:poly:2")?;
    let lambda: f64 = r.get("outcome-lambda", a.outcome_lambda.clone(), 1e-3)?;
    let columns = match r.opt::<String>("outcome-columns", a.outcome_columns.clone())? {
        None => None,
        Some(text) => {
            let cols = text
                .split(',')
                .map(|s| match s.trim().parse::<usize>() {
                    Ok(c) if c >= 1 => Ok(c - 1),
                    _ => Err(CliError::Usage(format!("--outcome-columns: bad column `{s}` (1-based)"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(cols)
        }
    };
    Ok(RidgeOutcomeLearner { spec, lambda, columns })
}

use riesz_dre::ate::{estimate_ate_debiased, estimate_ate_ipw, estimate_ate_plugin, AteConfig, EstimatorKind};
use riesz_dre::data::make_folds;

use crate::learners::{outcome_learner, riesz_learner};
use crate::output::{self, read_observational};
use crate::{AteArgs, CliError, Ctx};

pub(crate) fn parse_estimator(token: &str) -> Result<EstimatorKind, CliError> {
    match token {
        "debiased" => Ok(EstimatorKind::Debiased),
        "plugin" => Ok(EstimatorKind::Plugin),
        "ipw" => Ok(EstimatorKind::Ipw),
        other => Err(CliError::Usage(format!("--estimator: expected debiased | plugin | ipw, got `{other}`"))),
    }
}

pub(crate) fn estimate(a: &AteArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let path: String = r.required("data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let k: usize = r.get("folds", a.folds.clone(), 5)?;
    let kind = parse_estimator(&r.get::<String>("estimator", a.estimator.clone(), "debiased".into())?)?;
    let eps_min: f64 = r.get("eps-min", a.eps_min.clone(), 0.01)?;
    if !(eps_min > 0.0 && eps_min < 1.0) {
        return Err(CliError::Usage(format!("--eps-min must lie in (0, 1), got {eps_min}")));
    }
    let alpha = riesz_learner(r, &a.riesz)?;
    let mu = outcome_learner(r, &a.outcome)?;
    let data = read_observational(path.as_ref())?;
    let folds = make_folds(data.len(), k, seed)?;
    let cfg = AteConfig { seed, eps_min };
    let report = match kind {
        EstimatorKind::Debiased => estimate_ate_debiased(&data, &folds, &cfg, &mu, &alpha)?,
        EstimatorKind::Plugin => estimate_ate_plugin(&data, &folds, &cfg, &mu)?,
        EstimatorKind::Ipw => estimate_ate_ipw(&data, &folds, &cfg, &alpha)?,
    };
    output::write_json(ctx, &report)
}

use serde::Serialize;

use riesz_dre::data::ObservationalDataset;
use riesz_dre::models::{Link, ModelSpec, RatioModel, RieszModel};
use riesz_dre::riesz::{fit_riesz, riesz_objective_risk, RieszFitConfig, RieszObjective};

use crate::learners::{default_riesz_link, linear_spec, optimizer, regularizer};
use crate::output::{self, read_observational};
use crate::{CliError, Ctx, RieszFitArgs};

#[derive(Serialize)]
struct RieszDoc {
    model: RieszModel,
    objective: RieszObjective,
    objective_value: f64,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    /// Largest fitted `r1` or `r0` on the data.
    max_ratio: f64,
}

/// Heads over separate bases. RBF centers are drawn from the arm each head
/// weights; polynomial heads get identical bases.
fn separate_heads(spec: &ModelSpec, data: &ObservationalDataset, link: Link, start: f64, seed: u64) -> Result<RieszModel, CliError> {
    let arm = |a: u8| {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| data.treatment()[i] == a).collect();
        data.x().select(&idx)
    };
    let r1 = RatioModel::constant(spec.linear_basis(&arm(1), seed)?, link, start)?;
    let r0 = RatioModel::constant(spec.linear_basis(&arm(0), seed.wrapping_add(1))?, link, start)?;
    Ok(RieszModel::separate(r1, r0)?)
}

pub(crate) fn fit(a: &RieszFitArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let path: String = r.required("data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let objective: RieszObjective = r.get("objective", a.objective.clone(), RieszObjective::RieszLsq)?;
    let shared: bool = r.get("shared-basis", a.shared_basis.clone(), true)?;
    let spec = linear_spec(r, "model", a.model.clone(), "linear:poly:1")?;
    let link: Link = r.get("link", a.link.clone(), default_riesz_link(objective))?;
    let reg_lambda: f64 = r.get("lambda", a.lambda.clone(), 0.0)?;
    let reg_kind = regularizer(r, a.regularizer.clone())?;
    let start: f64 = r.get("start", a.start.clone(), 2.0)?;
    let opt = optimizer(r, &a.optim, 5000, 1e-6)?;
    let data = read_observational(path.as_ref())?;

    let model0 = if shared {
        RieszModel::shared(spec.linear_basis(data.x(), seed)?, link, start)?
    } else {
        separate_heads(&spec, &data, link, start, seed)?
    };
    let cfg = RieszFitConfig { objective, reg_lambda, reg_kind, optimizer: opt, seed };
    let fit = fit_riesz(&data, &model0, &cfg)?;
    let objective_value = riesz_objective_risk(objective, &fit.model, &data)?.value;
    let max_ratio = data
        .x()
        .rows()
        .flat_map(|x| [fit.model.r1.eval(x), fit.model.r0.eval(x)])
        .fold(f64::NEG_INFINITY, f64::max);
    let doc = RieszDoc {
        model: fit.model,
        objective,
        objective_value,
        converged: fit.converged,
        iterations: fit.iterations,
        grad_norm: fit.grad_norm,
        max_ratio,
    };
    output::write_json(ctx, &doc)
}

use serde::Serialize;

use riesz_dre::data::TwoSampleDataset;
use riesz_dre::dre::{
    fit_telescoped_with, truncate_nonnegative, DreFit, DreFitConfig, FittedRatioModel, TelescopeConfig,
    WaymarkRule,
};
use riesz_dre::losses::BregmanLoss;
use riesz_dre::models::{
    kulsif_fit, select_lambda_loocv, DensityRatio, GaussianKernel, LambdaChoice, Link, ModelSpec, RatioModel,
};

use crate::learners::{optimizer, regularizer};
use crate::output::{self, read_json_field, read_two_sample, OracleFile};
use crate::{CliError, Ctx, DreEvalArgs, DreFitArgs};

#[derive(Serialize)]
struct StageReport {
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    final_objective: Option<f64>,
    warnings: Vec<String>,
}

impl From<&DreFit> for StageReport {
    fn from(f: &DreFit) -> Self {
        StageReport {
            converged: f.converged,
            iterations: f.iterations,
            grad_norm: f.grad_norm,
            final_objective: f.trace.last().copied(),
            warnings: f.warnings.clone(),
        }
    }
}

#[derive(Serialize, Default)]
struct KernelReport {
    sigma: f64,
    lambda: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    loocv_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    loocv_scores: Vec<f64>,
}

#[derive(Serialize)]
struct FitDoc {
    model: FittedRatioModel,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    stages: Vec<StageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelReport>,
}

/// Starting model: the constant 1 when the link can represent it.
fn start_model(spec: &ModelSpec, pair: &TwoSampleDataset, link: Link, seed: u64) -> riesz_dre::error::Result<RatioModel> {
    let basis = spec.linear_basis(&pair.pooled(), seed)?;
    let start = [1.0, 0.5, 2.0].into_iter().find(|&v| link.inverse(v).is_some()).unwrap_or(1.0);
    RatioModel::constant(basis, link, start)
}

fn fit_kernel(data: &TwoSampleDataset, spec: &ModelSpec) -> Result<(RatioModel, KernelReport), CliError> {
    let ModelSpec::Kulsif { bandwidth, lambda } = *spec else { unreachable!() };
    let sigma = bandwidth.resolve(&data.pooled());
    let kernel = GaussianKernel::new(sigma)?;
    let mut report = KernelReport { sigma, ..Default::default() };
    report.lambda = match lambda {
        LambdaChoice::Fixed(l) => l,
        LambdaChoice::LoocvGrid => {
            let grid = LambdaChoice::DEFAULT_GRID.to_vec();
            let (best, scores) = select_lambda_loocv(data, &kernel, &grid)?;
            report.loocv_grid = grid;
            report.loocv_scores = scores;
            best
        }
    };
    Ok((kulsif_fit(data, &kernel, report.lambda)?, report))
}

pub(crate) fn fit(a: &DreFitArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let path: String = r.required("data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let loss: BregmanLoss = r.get("loss", a.loss.clone(), BregmanLoss::Lsif)?;
    let spec: ModelSpec = r.get("model", a.model.clone(), "linear:poly:1".parse()?)?;
    let link: Link = r.get("link", a.link.clone(), loss.natural_link())?;
    let reg_lambda: f64 = r.get("lambda", a.lambda.clone(), 0.0)?;
    let reg_kind = regularizer(r, a.regularizer.clone())?;
    let nonneg_correction: Option<f64> = r.opt("nonneg-c", a.nonneg_c.clone())?;
    let m: usize = r.get("telescope-m", a.telescope_m.clone(), 1)?;
    let truncate = r.flag("truncate", a.truncate)?;
    let opt = optimizer(r, &a.optim, 5000, 1e-8)?;
    let data = read_two_sample(path.as_ref())?;

    let mut doc = if let ModelSpec::Kulsif { .. } = spec {
        if loss != BregmanLoss::Lsif || nonneg_correction.is_some() || m != 1 {
            return Err(CliError::Usage(
                "kulsif models solve the plain LSIF system; --loss, --nonneg-c and --telescope-m do not apply".into(),
            ));
        }
        let (model, kernel) = fit_kernel(&data, &spec)?;
        FitDoc { model: FittedRatioModel::Single { model }, stages: Vec::new(), kernel: Some(kernel) }
    } else {
        let stage = DreFitConfig { loss, reg_lambda, reg_kind, optimizer: opt, nonneg_correction, seed };
        stage.validate()?;
        let tcfg = TelescopeConfig { m, waymark_rule: WaymarkRule::PooledFraction, stage };
        let fit = fit_telescoped_with(&data, &tcfg, |k, pair| start_model(&spec, pair, link, seed.wrapping_add(k as u64)))?;
        let stages = fit.stage_fits.iter().map(StageReport::from).collect();
        let mut models = fit.ratio.stages;
        let model = if models.len() == 1 {
            FittedRatioModel::Single { model: models.remove(0) }
        } else {
            FittedRatioModel::Telescoped { stages: models }
        };
        FitDoc { model, stages, kernel: None }
    };
    if truncate {
        doc.model = match doc.model {
            FittedRatioModel::Single { model } => FittedRatioModel::Single { model: truncate_nonnegative(&model) },
            FittedRatioModel::Telescoped { stages } => {
                FittedRatioModel::Telescoped { stages: stages.iter().map(truncate_nonnegative).collect() }
            }
        };
    }
    output::write_json(ctx, &doc)
}

#[derive(Serialize)]
struct EvalDoc {
    n_de: usize,
    n_nu: usize,
    /// `(1/n_de) Σ r(x_de)² − (2/n_nu) Σ r(x_nu)`.
    lsif_risk: f64,
    mean_ratio_de: f64,
    mean_ratio_nu: f64,
    max_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleMetrics>,
}

#[derive(Serialize)]
struct OracleMetrics {
    /// Monte Carlo `E_de[(r − r₀)²]` over the denominator rows.
    l2_error: f64,
    l2_error_se: f64,
    true_lsif_risk: f64,
}

fn lsif_risk(r: &dyn DensityRatio, data: &TwoSampleDataset) -> (f64, Vec<f64>, Vec<f64>) {
    let de: Vec<f64> = data.de().rows().map(|x| r.ratio(x)).collect();
    let nu: Vec<f64> = data.nu().rows().map(|x| r.ratio(x)).collect();
    let risk = de.iter().map(|v| v * v).sum::<f64>() / de.len() as f64 - 2.0 * nu.iter().sum::<f64>() / nu.len() as f64;
    (risk, de, nu)
}

pub(crate) fn eval(a: &DreEvalArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let r = &mut ctx.resolver;
    let model_path: String = r.required("model", a.model.as_ref().map(|p| p.display().to_string()))?;
    let data_path: String = r.required("data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let oracle_path: Option<String> = r.opt("oracle", a.oracle.as_ref().map(|p| p.display().to_string()))?;
    let model: FittedRatioModel = read_json_field(model_path.as_ref(), "model")?;
    let data = read_two_sample(data_path.as_ref())?;
    if model.input_dim() != data.dim() {
        return Err(CliError::Data(format!(
            "schema mismatch: model takes {} covariates, data has {}",
            model.input_dim(),
            data.dim()
        )));
    }
    let (lsif, de, nu) = lsif_risk(&model, &data);
    let oracle = match oracle_path {
        None => None,
        Some(p) => {
            let truth = match read_json_field::<OracleFile>(p.as_ref(), "oracle")? {
                OracleFile::GaussianShift { design } => design,
                OracleFile::Observational { .. } => {
                    return Err(CliError::Data(format!("{p}: schema mismatch: not a two-sample oracle")))
                }
            };
            if truth.dim() != data.dim() {
                return Err(CliError::Data(format!("{p}: schema mismatch: oracle dimension {}", truth.dim())));
            }
            let sq: Vec<f64> = data.de().rows().zip(&de).map(|(x, v)| (v - truth.ratio(x)).powi(2)).collect();
            let n = sq.len() as f64;
            let mean = sq.iter().sum::<f64>() / n;
            let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Some(OracleMetrics { l2_error: mean, l2_error_se: (var / n).sqrt(), true_lsif_risk: lsif_risk(&truth, &data).0 })
        }
    };
    let doc = EvalDoc {
        n_de: data.n_de(),
        n_nu: data.n_nu(),
        lsif_risk: lsif,
        mean_ratio_de: de.iter().sum::<f64>() / de.len() as f64,
        mean_ratio_nu: nu.iter().sum::<f64>() / nu.len() as f64,
        max_ratio: de.iter().chain(&nu).copied().fold(f64::NEG_INFINITY, f64::max),
        oracle,
    };
    output::write_json(ctx, &doc)
}

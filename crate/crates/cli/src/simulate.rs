use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use riesz_dre::ate::{
    estimate_ate_debiased, estimate_ate_ipw, estimate_ate_plugin, naive_difference, AteConfig, OracleLearner, Z_95,
};
use riesz_dre::data::make_folds;
use riesz_dre::dre::{fit_dre, DreFitConfig};
use riesz_dre::linalg::sample_sd;
use riesz_dre::losses::BregmanLoss;
use riesz_dre::models::{DensityRatio, Link, ModelSpec, RatioModel};
use riesz_dre::optim::OptimizerSettings;
use riesz_dre::synthetic::{generate, generate_two_sample, GaussianShiftDesign, SyntheticDesign};

use crate::learners::{linear_spec, outcome_learner, riesz_learner};
use crate::output;
use crate::synth::{parse_design, AnyDesign};
use crate::{CliError, Ctx, OptimArgs, SimulateArgs};

/// Stream offset for held-out draws in the ratio study.
const TEST_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimEstimator {
    Debiased,
    Plugin,
    Ipw,
    /// Debiased score with the true `μ₀` and `α₀`.
    Oracle,
    /// Difference of arm means.
    Naive,
}

impl std::str::FromStr for SimEstimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "debiased" => Ok(SimEstimator::Debiased),
            "plugin" => Ok(SimEstimator::Plugin),
            "ipw" => Ok(SimEstimator::Ipw),
            "oracle" => Ok(SimEstimator::Oracle),
            "naive" => Ok(SimEstimator::Naive),
            _ => Err("expected debiased | plugin | ipw | oracle | naive".into()),
        }
    }
}

impl std::fmt::Display for SimEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimEstimator::Debiased => "debiased",
            SimEstimator::Plugin => "plugin",
            SimEstimator::Ipw => "ipw",
            SimEstimator::Oracle => "oracle",
            SimEstimator::Naive => "naive",
        })
    }
}

struct AteRow {
    n: usize,
    rep: usize,
    estimator: SimEstimator,
    tau_hat: f64,
    se: f64,
    covered: bool,
    runtime_ms: u128,
}

#[derive(Serialize)]
struct AteSummary {
    n: usize,
    estimator: String,
    reps: usize,
    tau0: f64,
    bias: f64,
    sd: f64,
    coverage: f64,
    mean_se: f64,
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    summary: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_log_slope: Option<f64>,
}

fn naive_se(data: &riesz_dre::data::ObservationalDataset) -> f64 {
    let arm = |a: u8| -> Vec<f64> {
        data.treatment().iter().zip(data.outcome()).filter(|(&d, _)| d == a).map(|(_, &y)| y).collect()
    };
    let (y1, y0) = (arm(1), arm(0));
    let v = |y: &[f64]| if y.len() > 1 { sample_sd(y).powi(2) / y.len() as f64 } else { 0.0 };
    (v(&y1) + v(&y0)).sqrt()
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn run_ate(a: &SimulateArgs, ctx: &mut Ctx, design: SyntheticDesign, grid: &[usize], reps: usize, threads: Option<usize>) -> Result<(), CliError> {
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let estimators: Vec<SimEstimator> = r.list("estimators", a.estimators.clone(), "debiased,plugin,oracle,naive")?;
    let k: usize = r.get("folds", a.folds.clone(), 5)?;
    let alpha = riesz_learner(r, &a.riesz)?;
    let mu = outcome_learner(r, &a.outcome)?;
    let name = design.name.clone();
    let tau0 = riesz_dre::synthetic::Oracle::new(design.clone())?.tau0;

    let one_rep = |n: usize, rep: usize| -> Result<Vec<AteRow>, CliError> {
        let rep_seed = seed ^ rep as u64;
        let (data, oracle) = generate(&SyntheticDesign { seed: rep_seed, ..design.clone() }, n)?;
        let folds = make_folds(n, k, rep_seed)?;
        let cfg = AteConfig { seed: rep_seed, ..Default::default() };
        let orc = OracleLearner(oracle);
        estimators
            .iter()
            .map(|&est| {
                let t0 = Instant::now();
                let (tau_hat, se) = match est {
                    SimEstimator::Debiased => {
                        let rep = estimate_ate_debiased(&data, &folds, &cfg, &mu, &alpha)?;
                        (rep.tau_hat, rep.se)
                    }
                    SimEstimator::Plugin => {
                        let rep = estimate_ate_plugin(&data, &folds, &cfg, &mu)?;
                        (rep.tau_hat, rep.se)
                    }
                    SimEstimator::Ipw => {
                        let rep = estimate_ate_ipw(&data, &folds, &cfg, &alpha)?;
                        (rep.tau_hat, rep.se)
                    }
                    SimEstimator::Oracle => {
                        let rep = estimate_ate_debiased(&data, &folds, &cfg, &orc, &orc)?;
                        (rep.tau_hat, rep.se)
                    }
                    SimEstimator::Naive => (naive_difference(&data), naive_se(&data)),
                };
                let covered = (tau_hat - Z_95 * se..=tau_hat + Z_95 * se).contains(&tau0);
                Ok(AteRow { n, rep, estimator: est, tau_hat, se, covered, runtime_ms: t0.elapsed().as_millis() })
            })
            .collect()
    };

    let jobs: Vec<(usize, usize)> = grid.iter().flat_map(|&n| (0..reps).map(move |rep| (n, rep))).collect();
    let rows: Vec<AteRow> = in_pool(threads, || {
        jobs.par_iter().map(|&(n, rep)| one_rep(n, rep)).collect::<Result<Vec<_>, CliError>>()
    })??
    .into_iter()
    .flatten()
    .collect();

    let mut csv = String::from("design,n,rep,estimator,tau_hat,se,covered,runtime_ms\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{name},{},{},{},{:?},{:?},{},{}",
            row.n, row.rep, row.estimator, row.tau_hat, row.se, u8::from(row.covered), row.runtime_ms
        );
    }
    let mut summary = Vec::new();
    for &n in grid {
        for &est in &estimators {
            let sel: Vec<&AteRow> = rows.iter().filter(|r| r.n == n && r.estimator == est).collect();
            let m = sel.len() as f64;
            let taus: Vec<f64> = sel.iter().map(|r| r.tau_hat).collect();
            let mean = taus.iter().sum::<f64>() / m;
            summary.push(AteSummary {
                n,
                estimator: est.to_string(),
                reps: sel.len(),
                tau0,
                bias: mean - tau0,
                sd: if sel.len() > 1 { sample_sd(&taus) } else { 0.0 },
                coverage: sel.iter().filter(|r| r.covered).count() as f64 / m,
                mean_se: sel.iter().map(|r| r.se).sum::<f64>() / m,
            });
        }
    }
    output::write_csv(ctx, csv.as_bytes(), &Summary { summary, log_log_slope: None })
}

#[derive(Serialize)]
struct DreSummary {
    n: usize,
    reps: usize,
    mean_l2_error: f64,
    se: f64,
}

/// Least-squares slope of `ln y` on `ln x`.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn run_dre(a: &SimulateArgs, ctx: &mut Ctx, design: GaussianShiftDesign, token: &str, grid: &[usize], reps: usize, threads: Option<usize>) -> Result<(), CliError> {
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let spec: ModelSpec = linear_spec(r, "model", a.model.clone(), "linear:rbf:20:median")?;
    let loss: BregmanLoss = r.get("loss", a.loss.clone(), BregmanLoss::Lsif)?;
    let link: Link = r.get("link", a.link.clone(), Link::Exp)?;
    let lambda0: f64 = r.get("lambda", a.lambda.clone(), 0.1)?;
    let test_n: usize = r.get("test-n", a.test_n.clone(), 5000)?;
    let optim: OptimizerSettings = crate::learners::optimizer(
        r,
        &OptimArgs { max_iters: a.riesz.max_iters.clone(), step_size: None, grad_tol: a.riesz.grad_tol.clone() },
        5000,
        1e-6,
    )?;
    let n_min = *grid.iter().min().expect("non-empty grid") as f64;

    let one_rep = |n: usize, rep: usize| -> Result<(f64, u128), CliError> {
        let t0 = Instant::now();
        let rep_seed = seed ^ rep as u64;
        let (train, _) = generate_two_sample(&design, n, n, rep_seed)?;
        let (test, _) = generate_two_sample(&design, test_n, 1, rep_seed ^ TEST_STREAM)?;
        let basis = spec.linear_basis(&train.pooled(), rep_seed)?;
        let start = if link.inverse(1.0).is_some() { 1.0 } else { 0.5 };
        let model0 = RatioModel::constant(basis, link, start)?;
        let cfg = DreFitConfig {
            loss,
            reg_lambda: lambda0 * (n_min / n as f64).sqrt(),
            optimizer: optim,
            seed: rep_seed,
            ..Default::default()
        };
        let fit = fit_dre(&train, &model0, &cfg)?;
        let err = test.de().rows().map(|x| (fit.model.eval(x) - design.ratio(x)).powi(2)).sum::<f64>() / test_n as f64;
        Ok((err, t0.elapsed().as_millis()))
    };

    let jobs: Vec<(usize, usize)> = grid.iter().flat_map(|&n| (0..reps).map(move |rep| (n, rep))).collect();
    let results: Vec<(f64, u128)> = in_pool(threads, || {
        jobs.par_iter().map(|&(n, rep)| one_rep(n, rep)).collect::<Result<Vec<_>, CliError>>()
    })??;

    let mut csv = String::from("design,n,rep,estimator,l2_error,runtime_ms\n");
    for (&(n, rep), (err, ms)) in jobs.iter().zip(&results) {
        let _ = writeln!(csv, "{token},{n},{rep},{loss},{err:?},{ms}");
    }
    let mut summary = Vec::new();
    for &n in grid {
        let errs: Vec<f64> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == n).map(|(_, r)| r.0).collect();
        let m = errs.len() as f64;
        let se = if errs.len() > 1 { sample_sd(&errs) / m.sqrt() } else { 0.0 };
        summary.push(DreSummary { n, reps: errs.len(), mean_l2_error: errs.iter().sum::<f64>() / m, se });
    }
    let slope = log_log_slope(&summary.iter().map(|s| (s.n as f64, s.mean_l2_error)).collect::<Vec<_>>());
    output::write_csv(ctx, csv.as_bytes(), &Summary { summary, log_log_slope: slope })
}

pub(crate) fn run(a: &SimulateArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let r = &mut ctx.resolver;
    let study: String = r.get("study", a.study.clone(), "ate".into())?;
    let reps: usize = r.get("reps", a.reps.clone(), 200)?;
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let grid: Vec<usize> = r.list("n", a.n.clone(), "2000")?;
    let threads: Option<usize> = r.opt("threads", a.threads.clone())?;
    match study.as_str() {
        "ate" => {
            let token: String = r.get("design", a.design.clone(), "default-confounded".into())?;
            match parse_design(&token, 0)? {
                AnyDesign::Observational(d) => run_ate(a, ctx, d, &grid, reps, threads),
                AnyDesign::GaussianShift(_) => Err(CliError::Usage(format!("--design {token} is not an observational design"))),
            }
        }
        "dre-l2" => {
            let token: String = r.get("design", a.design.clone(), "gaussian-small-shift".into())?;
            match parse_design(&token, 0)? {
                AnyDesign::GaussianShift(g) => run_dre(a, ctx, g, &token, &grid, reps, threads),
                AnyDesign::Observational(_) => Err(CliError::Usage(format!("--design {token} is not a two-sample design"))),
            }
        }
        other => Err(CliError::Usage(format!("--study: expected ate | dre-l2, got `{other}`"))),
    }
}

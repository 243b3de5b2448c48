use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use riesz_dre::models::{Link, RieszModel};
use riesz_dre::riesz::{paired_lsif_risk, riesz_empirical_risk};
use riesz_dre::synthetic::{generate, DesignName, SyntheticDesign};

use crate::learners::linear_spec;
use crate::output::{self, read_observational};
use crate::{CliError, Ctx, EquivalenceArgs};

/// Pass threshold on the relative discrepancy.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rows: usize,
    pub trials: usize,
    pub max_rel_discrepancy: f64,
    pub max_abs_discrepancy: f64,
    /// Largest relative discrepancy between the two gradients (max-norm).
    pub max_grad_rel_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub(crate) fn run(a: &EquivalenceArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let seed = ctx.seed;
    let r = &mut ctx.resolver;
    let trials: usize = r.get("trials", a.trials.clone(), 100)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let data_path: Option<String> = r.opt("data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let synthetic = r.flag("synthetic", a.synthetic)?;
    if synthetic && data_path.is_some() {
        return Err(CliError::Usage("--synthetic and --data are exclusive".into()));
    }
    let spec = linear_spec(r, "model", a.model.clone(), "linear:poly:2")?;
    let link: Link = r.get("link", a.link.clone(), Link::Identity)?;
    let scale: f64 = r.get("scale", a.scale.clone(), 1.0)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Usage(format!("--scale must be positive, got {scale}")));
    }
    let data = match data_path {
        Some(p) => read_observational(p.as_ref())?,
        None => {
            let name: DesignName = r.get("design", a.design.clone(), DesignName::DefaultConfounded)?;
            let n: usize = r.get("n", a.n.clone(), 500)?;
            generate(&SyntheticDesign::named(name, seed), n)?.0
        }
    };
    let base = RieszModel::shared(spec.linear_basis(data.x(), seed)?, link, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivalenceReport {
        rows: data.len(),
        trials,
        max_rel_discrepancy: 0.0,
        max_abs_discrepancy: 0.0,
        max_grad_rel_discrepancy: 0.0,
        tolerance: EQUIVALENCE_TOL,
        pass: false,
    };
    for _ in 0..trials {
        let params: Vec<f64> = (0..base.n_params())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let alpha = base.with_params(&params);
        let riesz = riesz_empirical_risk(&alpha, &data)?;
        let paired = paired_lsif_risk(&alpha.r1, &alpha.r0, &data)?;
        if !(riesz.value.is_finite() && paired.value.is_finite()) {
            return Err(CliError::Numerical("objective is not finite at a random model".into()));
        }
        report.max_rel_discrepancy = report.max_rel_discrepancy.max(rel(riesz.value, paired.value));
        report.max_abs_discrepancy = report.max_abs_discrepancy.max((riesz.value - paired.value).abs());
        if let (Some(g1), Some(g2)) = (&riesz.grad, &paired.grad) {
            let diff = g1.iter().zip(g2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let size = g1.iter().chain(g2).map(|v| v.abs()).fold(0.0, f64::max);
            report.max_grad_rel_discrepancy =
                report.max_grad_rel_discrepancy.max(if size == 0.0 { 0.0 } else { diff / size });
        }
    }
    report.pass = report.max_rel_discrepancy <= EQUIVALENCE_TOL;
    output::write_json(ctx, &report)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "objectives disagree: max relative discrepancy {:.3e} > {EQUIVALENCE_TOL:e}",
            report.max_rel_discrepancy
        )))
    }
}

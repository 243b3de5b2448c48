use serde::Serialize;

use riesz_dre::data::{write_observational_csv, write_two_sample_csv};
use riesz_dre::synthetic::{generate, generate_two_sample, DesignName, GaussianShiftDesign, Oracle, SyntheticDesign};

use crate::output::{self, OracleFile};
use crate::{CliError, Ctx, SynthGenArgs};

pub(crate) enum AnyDesign {
    Observational(SyntheticDesign),
    GaussianShift(GaussianShiftDesign),
}

pub(crate) fn parse_design(token: &str, seed: u64) -> Result<AnyDesign, CliError> {
    match token {
        "gaussian-small-shift" => Ok(AnyDesign::GaussianShift(GaussianShiftDesign::small_shift())),
        "gaussian-large-gap" => Ok(AnyDesign::GaussianShift(GaussianShiftDesign::large_gap())),
        _ => {
            let name: DesignName = token.parse().map_err(|_| {
                CliError::Usage(format!(
                    "--design: unknown design `{token}` (expected default-confounded | randomized | heterogeneous | gaussian-small-shift | gaussian-large-gap)"
                ))
            })?;
            Ok(AnyDesign::Observational(SyntheticDesign::named(name, seed)))
        }
    }
}

fn parse_vec(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("--{key}: cannot parse `{s}`"))))
        .collect()
}

#[derive(Serialize)]
struct OracleDoc<'a> {
    oracle: &'a OracleFile,
}

#[derive(Serialize)]
struct GenSummary {
    rows: usize,
}

pub(crate) fn run(a: &SynthGenArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let r = &mut ctx.resolver;
    let token: String = r.get("design", a.design.clone(), "default-confounded".to_string())?;
    let n: usize = r.get("n", a.n.clone(), 2000)?;
    let design = parse_design(&token, ctx.seed)?;
    let mut csv = Vec::new();
    let (oracle, rows) = match design {
        AnyDesign::Observational(mut d) => {
            if let Some(text) = r.opt::<String>("beta", a.beta.clone())? {
                d.beta = parse_vec("beta", &text)?;
                d.dim = d.beta.len();
                d.gamma0.resize(d.dim, 0.0);
                d.gamma1.resize(d.dim, 0.0);
            }
            d.b = r.get("b", a.b.clone(), d.b)?;
            d.eps = r.get("eps", a.eps.clone(), d.eps)?;
            d.tau_base = r.get("tau", a.tau.clone(), d.tau_base)?;
            d.noise_sd = r.get("noise-sd", a.noise_sd.clone(), d.noise_sd)?;
            d.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let (data, oracle) = generate(&d, n)?;
            write_observational_csv(&data, &mut csv)?;
            let Oracle { design, tau0 } = oracle;
            (OracleFile::Observational { design, tau0 }, data.len())
        }
        AnyDesign::GaussianShift(g) => {
            let n_de: usize = r.get("n-de", a.n_de.clone(), n)?;
            let n_nu: usize = r.get("n-nu", a.n_nu.clone(), n)?;
            let (data, g) = generate_two_sample(&g, n_de, n_nu, ctx.seed)?;
            write_two_sample_csv(&data, &mut csv)?;
            (OracleFile::GaussianShift { design: g }, n_de + n_nu)
        }
    };
    let oracle_path = ctx.resolver.opt::<String>("emit-oracle", a.emit_oracle.as_ref().map(|p| p.display().to_string()))?;
    output::write_csv(ctx, &csv, &GenSummary { rows })?;
    if let Some(p) = oracle_path {
        output::write_json_to(ctx, std::path::Path::new(&p), &OracleDoc { oracle: &oracle })?;
    }
    Ok(())
}

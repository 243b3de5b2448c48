mod common;

use riesz_dre::data::TwoSampleDataset;
use riesz_dre::dre::{lsif_empirical_risk, nonneg_corrected_risk};
use riesz_dre::losses::{bd_population_risk, riesz_tailored_ukl_risk, BregmanLoss, RiskValue};
use riesz_dre::models::{BasisExpansion, Link, RatioModel, RieszModel};
use riesz_dre::riesz::{paired_lsif_risk, riesz_empirical_risk};
use riesz_dre::synthetic::{generate, generate_two_sample, GaussianShiftDesign, SyntheticDesign};

const POINTS: usize = 20;
const TOL: f64 = 1e-5;

fn two_sample() -> TwoSampleDataset {
    let g = GaussianShiftDesign::new(vec![0.5, -0.3], 1.0).unwrap();
    generate_two_sample(&g, 60, 50, 4).unwrap().0
}

/// Checks the analytic gradient of `risk` against central differences at
/// `POINTS` random parameter vectors around `center`.
fn check(name: &str, center: &[f64], scale: f64, seed: u64, risk: impl Fn(&[f64]) -> Option<RiskValue>) {
    let mut rng = common::rng(seed);
    let mut checked = 0;
    let mut tries = 0;
    while checked < POINTS {
        tries += 1;
        assert!(tries < 50 * POINTS, "{name}: too few evaluable points");
        let noise = common::normal_vec(&mut rng, center.len(), scale);
        let theta: Vec<f64> = center.iter().zip(&noise).map(|(c, z)| c + z).collect();
        let Some(at) = risk(&theta) else { continue };
        let analytic = at.grad.expect("gradient requested");
        let fd = common::fd_grad(|t| risk(t).map_or(f64::NAN, |r| r.value), &theta);
        if fd.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let err = common::rel_err(&analytic, &fd, 1e-6);
        assert!(err <= TOL, "{name}: relative gradient error {err:.2e} at {theta:?}");
        checked += 1;
    }
}

#[test]
fn lsif_risk_gradient() {
    let data = two_sample();
    let basis = BasisExpansion::polynomial(2, 2).unwrap();
    let m0 = RatioModel::constant(basis, Link::Identity, 1.0).unwrap();
    check("lsif", &m0.theta, 0.5, 1, |t| lsif_empirical_risk(&m0.with_theta(t.to_vec()), &data).ok());
}

#[test]
fn bregman_risk_gradients() {
    let data = two_sample();
    let basis = BasisExpansion::polynomial(2, 1).unwrap();
    for (loss, link, start) in [
        (BregmanLoss::Lsif, Link::Identity, 1.0),
        (BregmanLoss::Ukl, Link::Exp, 1.0),
        (BregmanLoss::Bkl, Link::Exp, 1.0),
        (BregmanLoss::PuLog { c: 0.5 }, Link::ScaledSigmoid { upper: 2.0 }, 1.0),
    ] {
        let m0 = RatioModel::constant(basis.clone(), link, start).unwrap();
        check(&format!("{loss:?}"), &m0.theta, 0.3, 2, |t| {
            bd_population_risk(loss, &m0.with_theta(t.to_vec()), &data).ok()
        });
    }
}

#[test]
fn representer_risk_gradients() {
    let (data, _) = generate(&SyntheticDesign::default_confounded(5), 80).unwrap();
    let lin = RieszModel::shared(BasisExpansion::polynomial(3, 2).unwrap(), Link::Identity, 2.0).unwrap();
    check("riesz-lsq", &lin.params(), 0.5, 3, |p| riesz_empirical_risk(&lin.with_params(p), &data).ok());
    check("paired-lsif", &lin.params(), 0.5, 4, |p| {
        let a = lin.with_params(p);
        paired_lsif_risk(&a.r1, &a.r0, &data).ok()
    });
    for link in [Link::ShiftedSoftplus, Link::ShiftedExp] {
        let m = RieszModel::shared(BasisExpansion::polynomial(3, 1).unwrap(), link, 2.0).unwrap();
        check(&format!("riesz-ukl {link}"), &m.params(), 0.3, 5, |p| {
            riesz_tailored_ukl_risk(&m.with_params(p), &data).ok()
        });
    }
}

#[test]
fn nonneg_corrected_gradient_away_from_the_clamp() {
    let data = two_sample();
    let basis = BasisExpansion::polynomial(2, 1).unwrap();
    let c = 0.5;
    for (loss, link) in [(BregmanLoss::Lsif, Link::Identity), (BregmanLoss::Ukl, Link::Exp)] {
        let m0 = RatioModel::constant(basis.clone(), link, 1.0).unwrap();
        // The bracket (1/n_de) Σ ℓ₁(r_de) − C (1/n_nu) Σ ℓ₁(r_nu), recomputed here.
        let bracket = |m: &RatioModel| -> f64 {
            let ell1 = |r: f64| loss.ell1(r).unwrap();
            let de: f64 = data.de().rows().map(|x| ell1(m.eval(x))).sum::<f64>() / data.n_de() as f64;
            let nu: f64 = data.nu().rows().map(|x| ell1(m.eval(x))).sum::<f64>() / data.n_nu() as f64;
            de - c * nu
        };
        check(&format!("nonneg {loss:?}"), &m0.theta, 0.5, 6, |t| {
            let m = m0.with_theta(t.to_vec());
            if bracket(&m).abs() < 1e-3 {
                return None;
            }
            nonneg_corrected_risk(&m, &data, loss, c).ok()
        });
    }
}

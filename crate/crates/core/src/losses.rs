//! Bregman generators and the density-ratio risks assembled from them.
//!
//! For a convex generator `f`, density-ratio matching minimizes
//!
//! `BD_f(r) = E_de[ℓ₁(r(X))] + E_nu[ℓ₂(r(X))]`, with
//! `ℓ₁(t) = f'(t)·t − f(t)` and `ℓ₂(t) = −f'(t)`.
//!
//! | kind | `f(t)` | domain |
//! |------|--------|--------|
//! | `lsif` | `(t − 1)² / 2` | ℝ |
//! | `ukl` | `t log t − t` | `t > 0` |
//! | `bkl` | `t log t − (1 + t) log(1 + t)` | `t > 0` |
//! | `pu:<C>` | `C g(Ct)`, `g(s) = log(1 − s) + s (log s − log(1 − s))` | `0 < t < 1/C` |
//! | `riesz-ukl` | `(|α| − 1) log(|α| − 1) + |α|` | `|α| > 1` |
//!
//! At `C = 1` the PU generator is `log(1 − t) + t(log t − log(1 − t))`.
//! Rescaled by `1/C`, its risk is the PU log-loss
//! `−E_de[log(1 − s)] + C·E_nu[−log s + log(1 − s)]` in the scaled output
//! `s = C·r`. The constraint `C < 1 / sup r₀` keeps the true ratio inside the
//! domain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ObservationalDataset, TwoSampleDataset};
use crate::error::{Error, Result};
use crate::linalg::Features;
use crate::models::{RatioModel, RieszModel};

/// One entry of the generator catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BregmanLoss {
    Lsif,
    Ukl,
    Bkl,
    PuLog { c: f64 },
    RieszUkl,
}

/// Default PU class-prior style constant.
pub const DEFAULT_PU_C: f64 = 0.5;

impl BregmanLoss {
    /// The density-ratio losses (every kind except `riesz-ukl`, which acts
    /// on signed representers).
    pub fn ratio_catalog(pu_c: f64) -> [BregmanLoss; 4] {
        [BregmanLoss::Lsif, BregmanLoss::Ukl, BregmanLoss::Bkl, BregmanLoss::PuLog { c: pu_c }]
    }

    pub fn in_domain(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        match *self {
            BregmanLoss::Lsif => true,
            BregmanLoss::Ukl | BregmanLoss::Bkl => t > 0.0,
            BregmanLoss::PuLog { c } => t > 0.0 && c * t < 1.0,
            BregmanLoss::RieszUkl => t.abs() > 1.0,
        }
    }

    fn check(&self, t: f64, location: impl Into<String>) -> Result<()> {
        if self.in_domain(t) {
            Ok(())
        } else {
            Err(Error::domain(self, t, location))
        }
    }

    /// Generator value `f(t)`.
    pub fn f(&self, t: f64) -> Result<f64> {
        self.check(t, "f")?;
        Ok(match *self {
            BregmanLoss::Lsif => 0.5 * (t - 1.0) * (t - 1.0),
            BregmanLoss::Ukl => t * t.ln() - t,
            BregmanLoss::Bkl => t * t.ln() - (1.0 + t) * t.ln_1p(),
            BregmanLoss::PuLog { c } => {
                let s = c * t;
                c * ((-s).ln_1p() + s * (s.ln() - (-s).ln_1p()))
            }
            BregmanLoss::RieszUkl => {
                let u = t.abs() - 1.0;
                u * u.ln() + t.abs()
            }
        })
    }

    /// First derivative `f'(t)`.
    pub fn df(&self, t: f64) -> Result<f64> {
        self.check(t, "df")?;
        Ok(self.df_unchecked(t))
    }

    fn df_unchecked(&self, t: f64) -> f64 {
        match *self {
            BregmanLoss::Lsif => t - 1.0,
            BregmanLoss::Ukl => t.ln(),
            BregmanLoss::Bkl => t.ln() - t.ln_1p(),
            BregmanLoss::PuLog { c } => {
                let s = c * t;
                c * c * (s.ln() - (-s).ln_1p())
            }
            BregmanLoss::RieszUkl => t.signum() * ((t.abs() - 1.0).ln() + 2.0),
        }
    }

    /// Second derivative `f''(t)`.
    pub fn ddf(&self, t: f64) -> Result<f64> {
        self.check(t, "ddf")?;
        Ok(self.ddf_unchecked(t))
    }

    fn ddf_unchecked(&self, t: f64) -> f64 {
        match *self {
            BregmanLoss::Lsif => 1.0,
            BregmanLoss::Ukl => 1.0 / t,
            BregmanLoss::Bkl => 1.0 / (t * (1.0 + t)),
            BregmanLoss::PuLog { c } => c * c / (t * (1.0 - c * t)),
            BregmanLoss::RieszUkl => 1.0 / (t.abs() - 1.0),
        }
    }

    /// Denominator-side piece `ℓ₁(t) = f'(t)·t − f(t)`.
    pub fn ell1(&self, t: f64) -> Result<f64> {
        Ok(self.df(t)? * t - self.f(t)?)
    }

    /// Numerator-side piece `ℓ₂(t) = −f'(t)`.
    pub fn ell2(&self, t: f64) -> Result<f64> {
        Ok(-self.df(t)?)
    }

    /// `(ℓ₁(t), ℓ₁'(t))` with the closed forms the generators allow.
    fn ell1_with_derivative(&self, t: f64) -> (f64, f64) {
        let value = match *self {
            BregmanLoss::Lsif => 0.5 * (t * t - 1.0),
            BregmanLoss::Ukl => t,
            BregmanLoss::Bkl => t.ln_1p(),
            BregmanLoss::PuLog { c } => -c * (-c * t).ln_1p(),
            BregmanLoss::RieszUkl => self.df_unchecked(t) * t - self.f(t).unwrap_or(f64::NAN),
        };
        (value, t * self.ddf_unchecked(t))
    }

    /// `(ℓ₂(t), ℓ₂'(t))`.
    fn ell2_with_derivative(&self, t: f64) -> (f64, f64) {
        (-self.df_unchecked(t), -self.ddf_unchecked(t))
    }

    /// Link that keeps a linear model inside this loss's domain.
    pub fn natural_link(&self) -> crate::models::Link {
        use crate::models::Link;
        match *self {
            BregmanLoss::Lsif => Link::Identity,
            BregmanLoss::Ukl | BregmanLoss::Bkl => Link::Exp,
            BregmanLoss::PuLog { c } => Link::ScaledSigmoid { upper: 1.0 / c },
            BregmanLoss::RieszUkl => Link::ShiftedSoftplus,
        }
    }
}

impl fmt::Display for BregmanLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BregmanLoss::Lsif => write!(f, "lsif"),
            BregmanLoss::Ukl => write!(f, "ukl"),
            BregmanLoss::Bkl => write!(f, "bkl"),
            BregmanLoss::PuLog { c } => write!(f, "pu:{c}"),
            BregmanLoss::RieszUkl => write!(f, "riesz-ukl"),
        }
    }
}

impl FromStr for BregmanLoss {
    type Err = Error;

    /// `lsif | ukl | bkl | pu:<C> | riesz-ukl`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsif" => Ok(BregmanLoss::Lsif),
            "ukl" => Ok(BregmanLoss::Ukl),
            "bkl" => Ok(BregmanLoss::Bkl),
            "riesz-ukl" => Ok(BregmanLoss::RieszUkl),
            "pu" => Ok(BregmanLoss::PuLog { c: DEFAULT_PU_C }),
            _ => match s.strip_prefix("pu:").map(str::parse::<f64>) {
                Some(Ok(c)) if c > 0.0 && c.is_finite() => Ok(BregmanLoss::PuLog { c }),
                Some(_) => Err(Error::Config(format!("PU constant must be positive in `{s}`"))),
                None => Err(Error::Config(format!(
                    "unknown loss `{s}` (expected lsif | ukl | bkl | pu:<C> | riesz-ukl)"
                ))),
            },
        }
    }
}

/// Generator value, as a free function.
pub fn f_value(loss: BregmanLoss, t: f64) -> Result<f64> {
    loss.f(t)
}

/// A risk and, when requested, its gradient in the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskValue {
    pub value: f64,
    pub grad: Option<Vec<f64>>,
}

/// Sample-average pieces of an empirical BD risk.
#[derive(Debug, Clone)]
pub(crate) struct BdTerms {
    /// `(1/n_de) Σ ℓ₁(r_de)`.
    pub de_ell1: f64,
    /// `(1/n_nu) Σ ℓ₁(r_nu)`; only filled when asked for.
    pub nu_ell1: f64,
    /// `(1/n_nu) Σ ℓ₂(r_nu)`.
    pub nu_ell2: f64,
    /// `ℓ₁'(r_de_j) / n_de`.
    pub w_de_ell1: Vec<f64>,
    /// `ℓ₁'(r_nu_k) / n_nu`.
    pub w_nu_ell1: Vec<f64>,
    /// `ℓ₂'(r_nu_k) / n_nu`.
    pub w_nu_ell2: Vec<f64>,
}

pub(crate) fn bd_terms(loss: BregmanLoss, r_de: &[f64], r_nu: &[f64], need_nu_ell1: bool) -> Result<BdTerms> {
    let (n_de, n_nu) = (r_de.len() as f64, r_nu.len() as f64);
    let mut t = BdTerms {
        de_ell1: 0.0,
        nu_ell1: 0.0,
        nu_ell2: 0.0,
        w_de_ell1: Vec::with_capacity(r_de.len()),
        w_nu_ell1: Vec::with_capacity(if need_nu_ell1 { r_nu.len() } else { 0 }),
        w_nu_ell2: Vec::with_capacity(r_nu.len()),
    };
    for (j, &r) in r_de.iter().enumerate() {
        loss.check(r, format!("de sample {j}"))?;
        let (v, dv) = loss.ell1_with_derivative(r);
        t.de_ell1 += v;
        t.w_de_ell1.push(dv / n_de);
    }
    for (k, &r) in r_nu.iter().enumerate() {
        loss.check(r, format!("nu sample {k}"))?;
        let (v, dv) = loss.ell2_with_derivative(r);
        t.nu_ell2 += v;
        t.w_nu_ell2.push(dv / n_nu);
        if need_nu_ell1 {
            let (v1, dv1) = loss.ell1_with_derivative(r);
            t.nu_ell1 += v1;
            t.w_nu_ell1.push(dv1 / n_nu);
        }
    }
    t.de_ell1 /= n_de;
    t.nu_ell1 /= n_nu;
    t.nu_ell2 /= n_nu;
    Ok(t)
}

/// Ratio values and link derivatives of a model on a precomputed design.
pub(crate) fn link_values(model: &RatioModel, theta: &[f64], phi: &Features) -> (Vec<f64>, Vec<f64>) {
    let eta = phi.matvec(theta);
    let mut r = Vec::with_capacity(eta.len());
    let mut dr = Vec::with_capacity(eta.len());
    for e in eta {
        let (v, d) = model.link.apply_with_derivative(e);
        if model.truncate && v < 0.0 {
            r.push(0.0);
            dr.push(0.0);
        } else {
            r.push(v);
            dr.push(d);
        }
    }
    (r, dr)
}

/// `Σ_i w_i · (∂r_i/∂η) · φ_i` accumulated into `grad`.
pub(crate) fn chain(phi: &Features, w: &[f64], dr: &[f64], grad: &mut [f64]) {
    let scaled: Vec<f64> = w.iter().zip(dr).map(|(a, b)| a * b).collect();
    phi.add_tmatvec(&scaled, grad);
}

/// Empirical Bregman risk `(1/n_de) Σ ℓ₁(r(x_de)) + (1/n_nu) Σ ℓ₂(r(x_nu))`
/// and its gradient in `θ`.
pub fn bd_population_risk(loss: BregmanLoss, r: &RatioModel, data: &TwoSampleDataset) -> Result<RiskValue> {
    let phi_de = r.basis.design(data.de())?;
    let phi_nu = r.basis.design(data.nu())?;
    let (r_de, dr_de) = link_values(r, &r.theta, &phi_de);
    let (r_nu, dr_nu) = link_values(r, &r.theta, &phi_nu);
    let t = bd_terms(loss, &r_de, &r_nu, false)?;
    let mut grad = vec![0.0; r.n_params()];
    chain(&phi_de, &t.w_de_ell1, &dr_de, &mut grad);
    chain(&phi_nu, &t.w_nu_ell2, &dr_nu, &mut grad);
    Ok(RiskValue { value: t.de_ell1 + t.nu_ell2, grad: Some(grad) })
}

/// A support point of a discrete distribution pair: probabilities under
/// `p_de` and `p_nu` and a candidate ratio value.
#[derive(Debug, Clone, Copy)]
pub struct SupportPoint {
    pub p_de: f64,
    pub p_nu: f64,
    pub r: f64,
}

/// Population BD risk `Σ p_de ℓ₁(r) + Σ p_nu ℓ₂(r)` on a finite support.
pub fn discrete_bd_risk(loss: BregmanLoss, support: &[SupportPoint]) -> Result<f64> {
    let mut total = 0.0;
    for (i, s) in support.iter().enumerate() {
        loss.check(s.r, format!("support point {i}"))?;
        total += s.p_de * loss.ell1(s.r)? + s.p_nu * loss.ell2(s.r)?;
    }
    Ok(total)
}

/// Integrand of the signed-representer UKL risk,
/// `log(|α(D,X)| − 1) + |α(D,X)| − log(α(1,X) − 1) − log(−α(0,X) − 1)`.
pub fn riesz_ukl_integrand(d: u8, alpha1: f64, alpha0: f64) -> Result<f64> {
    riesz_ukl_terms_row(d, alpha1, alpha0, "row").map(|(v, _, _)| v)
}

fn riesz_ukl_terms_row(d: u8, a1: f64, a0: f64, location: &str) -> Result<(f64, f64, f64)> {
    if !(a1 > 1.0) {
        return Err(Error::domain(BregmanLoss::RieszUkl, a1, format!("{location}: α(1, x) must exceed 1")));
    }
    if !(a0 < -1.0) {
        return Err(Error::domain(BregmanLoss::RieszUkl, a0, format!("{location}: α(0, x) must be below −1")));
    }
    let ad = if d == 1 { a1 } else { a0 };
    let value = (ad.abs() - 1.0).ln() + ad.abs() - (a1 - 1.0).ln() - (-a0 - 1.0).ln();
    // With D = 1 the integrand is a1 − log(−a0 − 1); with D = 0 it is
    // −a0 − log(a1 − 1).
    let (g1, g0) = if d == 1 { (1.0, 1.0 / (-a0 - 1.0)) } else { (-1.0 / (a1 - 1.0), -1.0) };
    Ok((value, g1, g0))
}

/// Per-row values and derivatives w.r.t. `α(1, x)` and `α(0, x)`, averaged.
pub(crate) fn riesz_ukl_terms(d: &[u8], a1: &[f64], a0: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = d.len() as f64;
    let mut value = 0.0;
    let mut g1 = Vec::with_capacity(d.len());
    let mut g0 = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let (v, d1, d0) = riesz_ukl_terms_row(d[i], a1[i], a0[i], &format!("row {i}"))?;
        value += v;
        g1.push(d1 / n);
        g0.push(d0 / n);
    }
    Ok((value / n, g1, g0))
}

/// Sample average of [`riesz_ukl_integrand`] and its gradient in the
/// representer parameters `[θ1, θ0]`.
pub fn riesz_tailored_ukl_risk(alpha: &RieszModel, data: &ObservationalDataset) -> Result<RiskValue> {
    let phi1 = alpha.r1.basis.design(data.x())?;
    let phi0 = alpha.r0.basis.design(data.x())?;
    let (r1, dr1) = link_values(&alpha.r1, &alpha.r1.theta, &phi1);
    let (r0, dr0) = link_values(&alpha.r0, &alpha.r0.theta, &phi0);
    let a0: Vec<f64> = r0.iter().map(|v| -v).collect();
    let (value, g1, g0) = riesz_ukl_terms(data.treatment(), &r1, &a0)?;
    let k = alpha.r1.n_params();
    let mut grad = vec![0.0; alpha.n_params()];
    chain(&phi1, &g1, &dr1, &mut grad[..k]);
    // α(0, x) = −r0(x)
    let g0_neg: Vec<f64> = g0.iter().map(|v| -v).collect();
    chain(&phi0, &g0_neg, &dr0, &mut grad[k..]);
    Ok(RiskValue { value, grad: Some(grad) })
}

/// Warning text when a fitted ratio reaches the PU ceiling `1/C`, i.e. the
/// constant is too large for the data.
pub fn pu_saturation_warning(c: f64, max_ratio: f64) -> Option<String> {
    (max_ratio * c >= 0.99).then(|| {
        format!("PU loss: fitted ratio reaches {max_ratio:.3} near the ceiling 1/C = {:.3}; C may exceed 1/sup r0", 1.0 / c)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Samples;
    use crate::models::{BasisExpansion, Link};

    fn grid(loss: BregmanLoss) -> Vec<f64> {
        let (lo, hi) = match loss {
            BregmanLoss::Lsif => (-3.0, 5.0),
            BregmanLoss::Ukl | BregmanLoss::Bkl => (0.05, 6.0),
            BregmanLoss::PuLog { c } => (0.02 / c, 0.98 / c),
            BregmanLoss::RieszUkl => (1.05, 8.0),
        };
        (0..100).map(|i| lo + (hi - lo) * i as f64 / 99.0).collect()
    }

    fn all_losses() -> Vec<BregmanLoss> {
        vec![
            BregmanLoss::Lsif,
            BregmanLoss::Ukl,
            BregmanLoss::Bkl,
            BregmanLoss::PuLog { c: 0.5 },
            BregmanLoss::PuLog { c: 1.0 },
            BregmanLoss::RieszUkl,
        ]
    }

    #[test]
    fn table_values() {
        assert_eq!(f_value(BregmanLoss::Lsif, 3.0).unwrap(), 2.0);
        assert_eq!(f_value(BregmanLoss::Lsif, 1.0).unwrap(), 0.0);
        assert_eq!(f_value(BregmanLoss::Ukl, 1.0).unwrap(), -1.0);
        assert!(matches!(f_value(BregmanLoss::Ukl, 0.0), Err(Error::Domain { .. })));
        // At C = 1 the PU generator is log(1 − t) + t(log t − log(1 − t)).
        let t: f64 = 0.3;
        let expect = (1.0 - t).ln() + t * (t.ln() - (1.0 - t).ln());
        assert!((f_value(BregmanLoss::PuLog { c: 1.0 }, t).unwrap() - expect).abs() < 1e-15);
        let t: f64 = -2.5;
        let expect = 1.5 * 1.5f64.ln() + 2.5;
        assert!((f_value(BregmanLoss::RieszUkl, t).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for loss in all_losses() {
            let mut pts = grid(loss);
            if loss == BregmanLoss::RieszUkl {
                pts.extend(grid(loss).into_iter().map(|t| -t));
            }
            for t in pts {
                let h = 1e-5 * t.abs().max(1e-2);
                let h = match loss {
                    BregmanLoss::PuLog { c } => h.min(0.5 * (1.0 / c - t)).min(0.5 * t),
                    BregmanLoss::Ukl | BregmanLoss::Bkl => h.min(0.5 * t),
                    BregmanLoss::RieszUkl => h.min(0.5 * (t.abs() - 1.0)),
                    BregmanLoss::Lsif => h,
                };
                let fd = (loss.f(t + h).unwrap() - loss.f(t - h).unwrap()) / (2.0 * h);
                let df = loss.df(t).unwrap();
                assert!((fd - df).abs() <= 1e-6 * df.abs().max(1.0), "{loss} df at {t}: {df} vs {fd}");
                let fd2 = (loss.df(t + h).unwrap() - loss.df(t - h).unwrap()) / (2.0 * h);
                let ddf = loss.ddf(t).unwrap();
                assert!((fd2 - ddf).abs() <= 1e-5 * ddf.abs().max(1.0), "{loss} ddf at {t}: {ddf} vs {fd2}");
            }
        }
    }

    #[test]
    fn generators_are_convex_on_grid() {
        for loss in all_losses() {
            let branches: Vec<Vec<f64>> = if loss == BregmanLoss::RieszUkl {
                vec![grid(loss), grid(loss).into_iter().rev().map(|t| -t).collect()]
            } else {
                vec![grid(loss)]
            };
            for g in branches {
                let dfs: Vec<f64> = g.iter().map(|&t| loss.df(t).unwrap()).collect();
                assert!(dfs.windows(2).all(|w| w[1] >= w[0]), "{loss}: df not monotone");
            }
        }
    }

    #[test]
    fn pieces_are_consistent() {
        for loss in all_losses() {
            for t in grid(loss) {
                let (e1, de1) = loss.ell1_with_derivative(t);
                let (e2, de2) = loss.ell2_with_derivative(t);
                assert!((e1 - loss.ell1(t).unwrap()).abs() <= 1e-12 * e1.abs().max(1.0), "{loss} ell1 at {t}");
                assert_eq!(e2, loss.ell2(t).unwrap());
                assert!((de1 - t * loss.ddf(t).unwrap()).abs() <= 1e-12 * de1.abs().max(1.0));
                assert_eq!(de2, -loss.ddf(t).unwrap());
            }
        }
    }

    fn const_model(v: f64, link: Link) -> RatioModel {
        RatioModel::constant(BasisExpansion::intercept_only(1).unwrap(), link, v).unwrap()
    }

    fn any_data() -> TwoSampleDataset {
        TwoSampleDataset::new(
            Samples::from_column(&[0.1, -0.4, 2.0]).unwrap(),
            Samples::from_column(&[0.3, 1.5]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn risks_at_unit_ratio() {
        let data = any_data();
        // ½E_de[r²] − E_nu[r] + ½: zero at r ≡ 1
        let lsif = bd_population_risk(BregmanLoss::Lsif, &const_model(1.0, Link::Identity), &data).unwrap();
        assert!(lsif.value.abs() < 1e-15);
        let ukl = bd_population_risk(BregmanLoss::Ukl, &const_model(1.0, Link::Exp), &data).unwrap();
        assert!((ukl.value - 1.0).abs() < 1e-15);
        let bkl = bd_population_risk(BregmanLoss::Bkl, &const_model(1.0, Link::Exp), &data).unwrap();
        assert!((bkl.value - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((bkl.value - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn lsif_bd_matches_display_up_to_constant() {
        let data = any_data();
        let b = BasisExpansion::polynomial(1, 1).unwrap();
        let m = RatioModel::new(b, vec![0.7, -0.3], Link::Identity).unwrap();
        let bd = bd_population_risk(BregmanLoss::Lsif, &m, &data).unwrap().value;
        let half_sq = m.eval_many(data.de()).iter().map(|r| 0.5 * r * r).sum::<f64>() / 3.0;
        let mean_nu = m.eval_many(data.nu()).iter().sum::<f64>() / 2.0;
        assert!((bd - (half_sq - mean_nu + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn pu_domain_error_names_sample() {
        let data = any_data();
        let m = const_model(2.0, Link::Identity);
        let err = bd_population_risk(BregmanLoss::PuLog { c: 0.5 }, &m, &data).unwrap_err();
        match err {
            Error::Domain { value, location, .. } => {
                assert_eq!(value, 2.0);
                assert_eq!(location, "de sample 0");
            }
            e => panic!("unexpected {e}"),
        }
        // At C = 1 the domain is (0, 1), so a model containing 1 is rejected.
        let m = const_model(1.0, Link::Identity);
        assert!(bd_population_risk(BregmanLoss::PuLog { c: 1.0 }, &m, &data).is_err());
    }

    #[test]
    fn tailored_ukl_examples() {
        let x = Samples::from_column(&[0.0, 1.0, 2.0]).unwrap();
        let data = ObservationalDataset::new(x, vec![1, 0, 1], vec![0.0; 3]).unwrap();
        let b = BasisExpansion::intercept_only(1).unwrap();
        let m = RieszModel::shared(b.clone(), Link::Identity, 2.0).unwrap();
        let risk = riesz_tailored_ukl_risk(&m, &data).unwrap();
        assert!((risk.value - 2.0).abs() < 1e-15);

        // α(1,·) ≡ 1.5, α(0,·) ≡ −3 on treated rows: 1.5 − log 2.
        let v = riesz_ukl_integrand(1, 1.5, -3.0).unwrap();
        assert!((v - (1.5 - 2f64.ln())).abs() < 1e-15);
        assert!((v - 0.8069).abs() < 1e-4);

        let m = RieszModel::separate(
            RatioModel::constant(b.clone(), Link::Identity, 1.0).unwrap(),
            RatioModel::constant(b, Link::Identity, 2.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(riesz_tailored_ukl_risk(&m, &data), Err(Error::Domain { .. })));
    }

    #[test]
    fn loss_tokens() {
        for tok in ["lsif", "ukl", "bkl", "pu:0.25", "riesz-ukl"] {
            let l: BregmanLoss = tok.parse().unwrap();
            assert_eq!(l.to_string(), tok);
        }
        assert_eq!("pu".parse::<BregmanLoss>().unwrap(), BregmanLoss::PuLog { c: 0.5 });
        assert!("pu:-1".parse::<BregmanLoss>().is_err());
        assert!("kliep2".parse::<BregmanLoss>().is_err());
    }

    #[test]
    fn pu_warning() {
        assert!(pu_saturation_warning(0.5, 1.999).is_some());
        assert!(pu_saturation_warning(0.5, 1.2).is_none());
    }
}

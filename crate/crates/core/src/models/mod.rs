//! Hypothesis classes for ratios and Riesz representers.
//!
//! A [`RatioModel`] is `r(x) = link(θᵀφ(x))` over a [`BasisExpansion`] `φ`.
//! A [`RieszModel`] pairs two ratio heads and evaluates
//! `α(d, x) = d·r1(x) − (1 − d)·r0(x)`.

mod kernel;
mod outcome;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Samples;
use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, Features};

pub use kernel::{
    kulsif_fit, kulsif_objective, kulsif_system, loocv_score, median_heuristic,
    select_lambda_loocv, GaussianKernel, KulsifSystem,
};
pub use outcome::{ridge_outcome_fit, OutcomeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisKind {
    /// Per-coordinate powers `x_j^k`, `k = 1..=degree` (no cross-products).
    Polynomial { degree: usize },
    /// `exp(−‖x − c‖² / (2σ²))` for each center `c`.
    GaussianCenters { centers: Samples, bandwidth: f64 },
}

/// Feature map `x ↦ φ(x)`, optionally with a leading constant `φ₀ ≡ 1` and
/// optionally restricted to a subset of covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExpansion {
    kind: BasisKind,
    intercept: bool,
    input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    columns: Option<Vec<usize>>,
}

impl BasisExpansion {
    pub fn polynomial(input_dim: usize, degree: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        Ok(BasisExpansion { kind: BasisKind::Polynomial { degree }, intercept: true, input_dim, columns: None })
    }

    /// Constant feature only.
    pub fn intercept_only(input_dim: usize) -> Result<Self> {
        Self::polynomial(input_dim, 0)
    }

    pub fn gaussian(centers: Samples, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if centers.nrows() == 0 {
            return Err(Error::Config("gaussian basis needs at least one center".into()));
        }
        let input_dim = centers.ncols();
        Ok(BasisExpansion {
            kind: BasisKind::GaussianCenters { centers, bandwidth },
            intercept: true,
            input_dim,
            columns: None,
        })
    }

    pub fn without_intercept(mut self) -> Result<Self> {
        self.intercept = false;
        if self.dim() == 0 {
            return Err(Error::Config("basis without intercept has no features".into()));
        }
        Ok(self)
    }

    /// Restricts the map to the listed covariate columns of a wider input.
    /// Gaussian centers must already live in the restricted space.
    pub fn on_columns(mut self, full_dim: usize, columns: Vec<usize>) -> Result<Self> {
        if columns.len() != self.input_dim || columns.iter().any(|&c| c >= full_dim) {
            return Err(Error::Config(format!(
                "column subset {columns:?} incompatible with basis input dimension {} / data dimension {full_dim}",
                self.input_dim
            )));
        }
        self.input_dim = full_dim;
        self.columns = Some(columns);
        Ok(self)
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Expected covariate dimension of inputs.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of features `m`.
    pub fn dim(&self) -> usize {
        let active = self.columns.as_ref().map_or(self.input_dim, |c| c.len());
        let body = match &self.kind {
            BasisKind::Polynomial { degree } => active * degree,
            BasisKind::GaussianCenters { centers, .. } => centers.nrows(),
        };
        body + usize::from(self.intercept)
    }

    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_dim);
        debug_assert_eq!(out.len(), self.dim());
        let mut buf;
        let x = match &self.columns {
            Some(cols) => {
                buf = Vec::with_capacity(cols.len());
                buf.extend(cols.iter().map(|&c| x[c]));
                &buf[..]
            }
            None => x,
        };
        let mut k = 0;
        if self.intercept {
            out[0] = 1.0;
            k = 1;
        }
        match &self.kind {
            BasisKind::Polynomial { degree } => {
                for &xj in x {
                    let mut p = 1.0;
                    for _ in 0..*degree {
                        p *= xj;
                        out[k] = p;
                        k += 1;
                    }
                }
            }
            BasisKind::GaussianCenters { centers, bandwidth } => {
                let scale = 1.0 / (2.0 * bandwidth * bandwidth);
                for c in centers.rows() {
                    out[k] = (-sq_dist(x, c) * scale).exp();
                    k += 1;
                }
            }
        }
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.features_into(x, &mut out);
        out
    }

    /// Feature matrix for every row of `samples`.
    pub fn design(&self, samples: &Samples) -> Result<Features> {
        if samples.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "basis expects {} covariates, data has {}",
                self.input_dim,
                samples.ncols()
            )));
        }
        let m = self.dim();
        let mut data = vec![0.0; samples.nrows() * m];
        for (row, out) in samples.rows().zip(data.chunks_exact_mut(m.max(1))) {
            self.features_into(row, out);
        }
        Ok(Features::new(samples.nrows(), m, data))
    }

    /// 1 for penalized coefficients, 0 for the intercept.
    pub fn penalty_mask(&self) -> Vec<f64> {
        let mut mask = vec![1.0; self.dim()];
        if self.intercept {
            mask[0] = 0.0;
        }
        mask
    }
}

/// Output link applied to `η = θᵀφ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Link {
    Identity,
    /// `exp(η)`, strictly positive.
    Exp,
    /// Logistic sigmoid, in `(0, 1)`.
    Sigmoid,
    /// `upper · σ(η)`, in `(0, upper)`.
    ScaledSigmoid { upper: f64 },
    /// `1 + softplus(η)`, strictly above 1.
    ShiftedSoftplus,
    /// `1 + exp(η)`, strictly above 1. With a linear `η` this is exactly the
    /// inverse of a logistic propensity.
    ShiftedExp,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Link {
    pub fn apply(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Exp => eta.exp(),
            Link::Sigmoid => sigmoid(eta),
            Link::ScaledSigmoid { upper } => upper * sigmoid(eta),
            Link::ShiftedSoftplus => 1.0 + softplus(eta),
            Link::ShiftedExp => 1.0 + eta.exp(),
        }
    }

    /// `(link(η), link'(η))`.
    pub fn apply_with_derivative(self, eta: f64) -> (f64, f64) {
        match self {
            Link::Identity => (eta, 1.0),
            Link::Exp => {
                let e = eta.exp();
                (e, e)
            }
            Link::Sigmoid => {
                let s = sigmoid(eta);
                (s, s * (1.0 - s))
            }
            Link::ScaledSigmoid { upper } => {
                let s = sigmoid(eta);
                (upper * s, upper * s * (1.0 - s))
            }
            Link::ShiftedSoftplus => (1.0 + softplus(eta), sigmoid(eta)),
            Link::ShiftedExp => {
                let e = eta.exp();
                (1.0 + e, e)
            }
        }
    }

    /// `η` with `link(η) = value`, when `value` is in the range of the link.
    pub fn inverse(self, value: f64) -> Option<f64> {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let eta = match self {
            Link::Identity => value,
            Link::Exp if value > 0.0 => value.ln(),
            Link::Sigmoid if value > 0.0 && value < 1.0 => logit(value),
            Link::ScaledSigmoid { upper } if value > 0.0 && value < upper => logit(value / upper),
            Link::ShiftedSoftplus if value > 1.0 => (value - 1.0).exp_m1().ln(),
            Link::ShiftedExp if value > 1.0 => (value - 1.0).ln(),
            _ => return None,
        };
        eta.is_finite().then_some(eta)
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Link::Identity),
            "exp" => Ok(Link::Exp),
            "sigmoid" => Ok(Link::Sigmoid),
            "softplus1" => Ok(Link::ShiftedSoftplus),
            "exp1" => Ok(Link::ShiftedExp),
            _ => match s.strip_prefix("scaled-sigmoid:").map(str::parse::<f64>) {
                Some(Ok(upper)) if upper > 0.0 && upper.is_finite() => Ok(Link::ScaledSigmoid { upper }),
                _ => Err(Error::Config(format!(
                    "unknown link `{s}` (expected identity | exp | sigmoid | scaled-sigmoid:<upper> | softplus1 | exp1)"
                ))),
            },
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Identity => f.write_str("identity"),
            Link::Exp => f.write_str("exp"),
            Link::Sigmoid => f.write_str("sigmoid"),
            Link::ScaledSigmoid { upper } => write!(f, "scaled-sigmoid:{upper}"),
            Link::ShiftedSoftplus => f.write_str("softplus1"),
            Link::ShiftedExp => f.write_str("exp1"),
        }
    }
}

/// `r(x) = link(θᵀφ(x))`, optionally truncated at zero when evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub basis: BasisExpansion,
    pub theta: Vec<f64>,
    pub link: Link,
    #[serde(default)]
    pub truncate: bool,
}

impl RatioModel {
    pub fn new(basis: BasisExpansion, theta: Vec<f64>, link: Link) -> Result<Self> {
        if theta.len() != basis.dim() {
            return Err(Error::Shape(format!(
                "{} coefficients for a {}-dimensional basis",
                theta.len(),
                basis.dim()
            )));
        }
        Ok(RatioModel { basis, theta, link, truncate: false })
    }

    /// Model equal to `value` everywhere: all coefficients zero except the
    /// intercept, which is set through the inverse link.
    pub fn constant(basis: BasisExpansion, link: Link, value: f64) -> Result<Self> {
        let mut theta = vec![0.0; basis.dim()];
        let eta = link
            .inverse(value)
            .ok_or_else(|| Error::Config(format!("{value} is outside the range of link {link:?}")))?;
        if eta != 0.0 {
            if !basis.has_intercept() {
                return Err(Error::Config("constant start needs an intercept".into()));
            }
            theta[0] = eta;
        }
        RatioModel::new(basis, theta, link)
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> RatioModel {
        assert_eq!(theta.len(), self.theta.len());
        RatioModel { theta, ..self.clone() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = self.link.apply(dot(&self.basis.features(x), &self.theta));
        if self.truncate {
            r.max(0.0)
        } else {
            r
        }
    }

    /// Writes `∂r/∂θ` into `grad` and returns `r(x)`.
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let phi = self.basis.features(x);
        let (r, dr) = self.link.apply_with_derivative(dot(&phi, &self.theta));
        if self.truncate && r < 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        for (g, p) in grad.iter_mut().zip(&phi) {
            *g = dr * p;
        }
        r
    }

    pub fn eval_many(&self, samples: &Samples) -> Vec<f64> {
        samples.rows().map(|x| self.eval(x)).collect()
    }
}

/// Anything that evaluates a density ratio pointwise.
pub trait DensityRatio {
    fn ratio(&self, x: &[f64]) -> f64;
}

impl DensityRatio for RatioModel {
    fn ratio(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// Two ratio heads, `α(1, x) = r1(x)` and `α(0, x) = −r0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszModel {
    pub r1: RatioModel,
    pub r0: RatioModel,
    pub shared_basis: bool,
}

impl RieszModel {
    /// Heads over one basis, each with its own coefficients.
    pub fn shared(basis: BasisExpansion, link: Link, start: f64) -> Result<Self> {
        let r1 = RatioModel::constant(basis.clone(), link, start)?;
        let r0 = RatioModel::constant(basis, link, start)?;
        Ok(RieszModel { r1, r0, shared_basis: true })
    }

    pub fn separate(r1: RatioModel, r0: RatioModel) -> Result<Self> {
        if r1.basis.input_dim() != r0.basis.input_dim() {
            return Err(Error::Shape("Riesz heads must take the same covariates".into()));
        }
        let shared_basis = r1.basis == r0.basis;
        Ok(RieszModel { r1, r0, shared_basis })
    }

    pub fn alpha(&self, d: u8, x: &[f64]) -> f64 {
        if d == 1 {
            self.r1.eval(x)
        } else {
            -self.r0.eval(x)
        }
    }

    pub fn n_params(&self) -> usize {
        self.r1.n_params() + self.r0.n_params()
    }

    /// `[θ1, θ0]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.r1.theta.clone();
        p.extend_from_slice(&self.r0.theta);
        p
    }

    pub fn with_params(&self, params: &[f64]) -> RieszModel {
        let k = self.r1.n_params();
        RieszModel {
            r1: self.r1.with_theta(params[..k].to_vec()),
            r0: self.r0.with_theta(params[k..].to_vec()),
            shared_basis: self.shared_basis,
        }
    }
}

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance of the pooled sample.
    Median,
}

impl Bandwidth {
    pub fn resolve(self, pool: &Samples) -> f64 {
        match self {
            Bandwidth::Fixed(s) => s,
            Bandwidth::Median => median_heuristic(pool),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Leave-one-out selection over [`LambdaChoice::DEFAULT_GRID`].
    LoocvGrid,
}

impl LambdaChoice {
    pub const DEFAULT_GRID: [f64; 6] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 1.0];
}

/// Model family selected by a configuration token:
/// `linear:poly:<degree> | linear:rbf:<m>:<sigma|median> | kulsif:<sigma|median>:<lambda|loocv-grid>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Poly { degree: usize },
    Rbf { centers: usize, bandwidth: Bandwidth },
    Kulsif { bandwidth: Bandwidth, lambda: LambdaChoice },
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth> {
    if s == "median" {
        return Ok(Bandwidth::Median);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(v)),
        _ => Err(Error::Config(format!("bad bandwidth `{s}`"))),
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("bad model spec `{s}`"));
        match parts.as_slice() {
            ["linear", "poly", deg] => Ok(ModelSpec::Poly { degree: deg.parse().map_err(|_| bad())? }),
            ["linear", "rbf", m, bw] => {
                let centers: usize = m.parse().map_err(|_| bad())?;
                if centers == 0 {
                    return Err(bad());
                }
                Ok(ModelSpec::Rbf { centers, bandwidth: parse_bandwidth(bw)? })
            }
            ["kulsif", bw, lam] => {
                let lambda = if *lam == "loocv-grid" {
                    LambdaChoice::LoocvGrid
                } else {
                    match lam.parse::<f64>() {
                        Ok(v) if v > 0.0 => LambdaChoice::Fixed(v),
                        _ => return Err(Error::NonPositiveLambda(lam.parse().unwrap_or(f64::NAN))),
                    }
                };
                Ok(ModelSpec::Kulsif { bandwidth: parse_bandwidth(bw)?, lambda })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bw = |b: &Bandwidth| match b {
            Bandwidth::Median => "median".to_string(),
            Bandwidth::Fixed(s) => s.to_string(),
        };
        match self {
            ModelSpec::Poly { degree } => write!(f, "linear:poly:{degree}"),
            ModelSpec::Rbf { centers, bandwidth } => write!(f, "linear:rbf:{centers}:{}", bw(bandwidth)),
            ModelSpec::Kulsif { bandwidth, lambda } => {
                let lam = match lambda {
                    LambdaChoice::Fixed(v) => v.to_string(),
                    LambdaChoice::LoocvGrid => "loocv-grid".into(),
                };
                write!(f, "kulsif:{}:{lam}", bw(bandwidth))
            }
        }
    }
}

impl ModelSpec {
    /// Basis for the linear-in-basis families. RBF centers are `m` rows of
    /// `pool` drawn without replacement with `seed` (all rows if `m` exceeds
    /// the pool); the median bandwidth is computed on `pool`.
    pub fn linear_basis(&self, pool: &Samples, seed: u64) -> Result<BasisExpansion> {
        match *self {
            ModelSpec::Poly { degree } => BasisExpansion::polynomial(pool.ncols(), degree),
            ModelSpec::Rbf { centers, bandwidth } => {
                let n = pool.nrows();
                let idx: Vec<usize> = if centers >= n {
                    (0..n).collect()
                } else {
                    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, centers).into_vec();
                    idx.sort_unstable();
                    idx
                };
                BasisExpansion::gaussian(pool.select(&idx), bandwidth.resolve(pool))
            }
            ModelSpec::Kulsif { .. } => {
                Err(Error::Config("kulsif is an RKHS model, not a linear basis".into()))
            }
        }
    }
}

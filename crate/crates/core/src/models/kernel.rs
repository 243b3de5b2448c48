//! Gaussian kernel, the KuLSIF analytic solve and leave-one-out selection.
//!
//! KuLSIF minimizes, over `r` in the RKHS of `k`,
//!
//! `(1/n_de) Σ r(x_de)² − (2/n_nu) Σ r(x_nu) + (λ/2) ‖r‖²`.
//!
//! With `r = Σ_l c_l k(·, z_l)` over the pooled points `z = de ∪ nu`, the
//! stationarity condition is
//!
//! `((2/n_de) K_dᵀ K_d + λ K) c = (2/n_nu) K_nᵀ 1`
//!
//! where `K` is the pooled Gram matrix and `K_d`, `K_n` its de / nu rows.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{BasisExpansion, Link, RatioModel};
use crate::data::{Samples, TwoSampleDataset};
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, sq_dist, symmetrize};

/// `k(x, x') = exp(−‖x − x'‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        Ok(GaussianKernel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (-sq_dist(a, b) / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn gram(&self, a: &Samples, b: &Samples) -> DMatrix<f64> {
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| self.eval(a.row(i), b.row(j)))
    }
}

const MEDIAN_MAX_POINTS: usize = 1000;

/// Median pairwise Euclidean distance. Pools larger than 1000 points are
/// thinned to an evenly strided subset first.
pub fn median_heuristic(pool: &Samples) -> f64 {
    let n = pool.nrows();
    let idx: Vec<usize> = if n > MEDIAN_MAX_POINTS {
        (0..MEDIAN_MAX_POINTS).map(|i| i * n / MEDIAN_MAX_POINTS).collect()
    } else {
        (0..n).collect()
    };
    let mut d = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(sq_dist(pool.row(i), pool.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 0 { 0.5 * (d[mid - 1] + d[mid]) } else { d[mid] };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// The assembled KuLSIF normal equations (after symmetrization and jitter).
#[derive(Debug, Clone)]
pub struct KulsifSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub gram: DMatrix<f64>,
    pub centers: Samples,
    pub jitter: f64,
}

pub fn kulsif_system(data: &TwoSampleDataset, kernel: &GaussianKernel, lambda: f64) -> Result<KulsifSystem> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let (n_de, n_nu) = (data.n_de(), data.n_nu());
    let centers = data.pooled();
    let m = centers.nrows();
    let gram = kernel.gram(&centers, &centers);
    let k_d = gram.rows(0, n_de);
    let k_n = gram.rows(n_de, n_nu);

    let mut a = k_d.transpose() * k_d * (2.0 / n_de as f64) + &gram * lambda;
    symmetrize(&mut a);
    let jitter = 1e-10 * gram.trace() / m as f64;
    for i in 0..m {
        a[(i, i)] += jitter;
    }
    let b = k_n.transpose() * DVector::from_element(n_nu, 2.0 / n_nu as f64);
    Ok(KulsifSystem { a, b, gram, centers, jitter })
}

/// Solves the KuLSIF system and returns the kernel expansion as a
/// [`RatioModel`] (Gaussian basis on the pooled points, no intercept,
/// identity link).
pub fn kulsif_fit(data: &TwoSampleDataset, kernel: &GaussianKernel, lambda: f64) -> Result<RatioModel> {
    let sys = kulsif_system(data, kernel, lambda)?;
    let c = solve_spd(&sys.a, &sys.b)?;
    let basis = BasisExpansion::gaussian(sys.centers, kernel.sigma())?.without_intercept()?;
    RatioModel::new(basis, c.iter().copied().collect(), Link::Identity)
}

/// KuLSIF objective of a kernel-expansion model, evaluated directly from
/// the model's predictions; the RKHS norm uses the Gram matrix of the
/// model's own centers.
pub fn kulsif_objective(model: &RatioModel, data: &TwoSampleDataset, lambda: f64) -> Result<f64> {
    let super::BasisKind::GaussianCenters { centers, bandwidth } = model.basis.kind() else {
        return Err(Error::Config("KuLSIF objective needs a Gaussian kernel expansion".into()));
    };
    if model.basis.has_intercept() {
        return Err(Error::Config("KuLSIF expansion has no intercept".into()));
    }
    let kernel = GaussianKernel::new(*bandwidth)?;
    let de_term: f64 = data.de().rows().map(|x| model.eval(x).powi(2)).sum::<f64>() / data.n_de() as f64;
    let nu_term: f64 = data.nu().rows().map(|x| model.eval(x)).sum::<f64>() / data.n_nu() as f64;
    let c = DVector::from_column_slice(&model.theta);
    let norm_sq = (c.transpose() * kernel.gram(centers, centers) * &c)[(0, 0)];
    Ok(de_term - 2.0 * nu_term + 0.5 * lambda * norm_sq)
}

/// Leave-one-out score: for `i < N = min(n_de, n_nu)`, drop the `i`-th de
/// and `i`-th nu point, refit, and score `½ r(x_de_i)² − r(x_nu_i)` on the
/// held-out pair. Returns the average over `i`.
pub fn loocv_score(data: &TwoSampleDataset, kernel: &GaussianKernel, lambda: f64) -> Result<f64> {
    let (n_de, n_nu) = (data.n_de(), data.n_nu());
    if n_de < 2 || n_nu < 2 {
        return Err(Error::TooFewSamples { n_de, n_nu });
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let n_pairs = n_de.min(n_nu);
    let held: Vec<f64> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let keep_de: Vec<usize> = (0..n_de).filter(|&j| j != i).collect();
            let keep_nu: Vec<usize> = (0..n_nu).filter(|&j| j != i).collect();
            let train = TwoSampleDataset::new(data.de().select(&keep_de), data.nu().select(&keep_nu))?;
            let model = kulsif_fit(&train, kernel, lambda)?;
            let r_de = model.eval(data.de().row(i));
            let r_nu = model.eval(data.nu().row(i));
            Ok(0.5 * r_de * r_de - r_nu)
        })
        .collect::<Result<_>>()?;
    Ok(held.iter().sum::<f64>() / n_pairs as f64)
}

/// Picks the λ in `grid` with the smallest leave-one-out score. Returns the
/// winner and every score in grid order.
pub fn select_lambda_loocv(
    data: &TwoSampleDataset,
    kernel: &GaussianKernel,
    grid: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let scores = grid.iter().map(|&l| loocv_score(data, kernel, l)).collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| grid[i])
        .expect("non-empty grid");
    Ok((best, scores))
}

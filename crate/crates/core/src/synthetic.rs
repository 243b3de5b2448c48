//! Synthetic designs with known propensities, outcome surfaces and density
//! ratios.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ObservationalDataset, Samples, TwoSampleDataset};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::models::DensityRatio;

/// Observational design: `X ~ N(0, I_d)`,
/// `e₀(x) = clip(σ(βᵀx + b), ε, 1 − ε)`, `D ~ Bernoulli(e₀(X))`,
/// `Y = γ₀ᵀX + D(τ_base + γ₁ᵀX) + noise_sd·N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub name: String,
    pub dim: usize,
    pub beta: Vec<f64>,
    pub b: f64,
    pub eps: f64,
    pub tau_base: f64,
    pub gamma0: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Shipped observational designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignName {
    DefaultConfounded,
    Randomized,
    Heterogeneous,
}

impl DesignName {
    pub const ALL: [DesignName; 3] = [DesignName::DefaultConfounded, DesignName::Randomized, DesignName::Heterogeneous];
}

impl fmt::Display for DesignName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignName::DefaultConfounded => "default-confounded",
            DesignName::Randomized => "randomized",
            DesignName::Heterogeneous => "heterogeneous",
        })
    }
}

impl FromStr for DesignName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignName::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown design `{s}` (expected default-confounded | randomized | heterogeneous)")))
    }
}

impl SyntheticDesign {
    /// Confounded design with a homogeneous effect `τ₀ = 1`. The first
    /// covariate drives both treatment and outcome.
    pub fn default_confounded(seed: u64) -> Self {
        SyntheticDesign {
            name: DesignName::DefaultConfounded.to_string(),
            dim: 3,
            beta: vec![0.8, -0.4, 0.3],
            b: 0.0,
            eps: 0.02,
            tau_base: 1.0,
            gamma0: vec![1.5, 0.5, -0.5],
            gamma1: vec![0.0; 3],
            noise_sd: 1.0,
            seed,
        }
    }

    /// `e₀ ≡ 0.5`.
    pub fn randomized(seed: u64) -> Self {
        SyntheticDesign {
            name: DesignName::Randomized.to_string(),
            beta: vec![0.0; 3],
            ..Self::default_confounded(seed)
        }
    }

    /// Confounded, with an effect that varies in the first covariate.
    pub fn heterogeneous(seed: u64) -> Self {
        SyntheticDesign {
            name: DesignName::Heterogeneous.to_string(),
            gamma1: vec![0.5, 0.0, 0.0],
            ..Self::default_confounded(seed)
        }
    }

    pub fn named(name: DesignName, seed: u64) -> Self {
        match name {
            DesignName::DefaultConfounded => Self::default_confounded(seed),
            DesignName::Randomized => Self::randomized(seed),
            DesignName::Heterogeneous => Self::heterogeneous(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::DegenerateDesign(format!("overlap bound must lie in (0, 0.5), got {}", self.eps)));
        }
        if self.dim == 0 || [&self.beta, &self.gamma0, &self.gamma1].iter().any(|v| v.len() != self.dim) {
            return Err(Error::DegenerateDesign(format!("coefficient vectors must have length dim = {}", self.dim)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::DegenerateDesign(format!("noise sd must be non-negative, got {}", self.noise_sd)));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Ground-truth nuisances of a [`SyntheticDesign`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub design: SyntheticDesign,
    pub tau0: f64,
}

impl Oracle {
    pub fn new(design: SyntheticDesign) -> Result<Self> {
        design.validate()?;
        // E[X] = 0, so the average of γ₁ᵀX vanishes.
        let tau0 = design.tau_base;
        Ok(Oracle { design, tau0 })
    }

    pub fn e0(&self, x: &[f64]) -> f64 {
        let d = &self.design;
        sigmoid(dot(&d.beta, x) + d.b).clamp(d.eps, 1.0 - d.eps)
    }

    /// `p_X(x) / p_{D,X}(1, x) = 1 / e₀(x)`.
    pub fn r1(&self, x: &[f64]) -> f64 {
        1.0 / self.e0(x)
    }

    /// `p_X(x) / p_{D,X}(0, x) = 1 / (1 − e₀(x))`.
    pub fn r0(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 - self.e0(x))
    }

    pub fn alpha(&self, d: u8, x: &[f64]) -> f64 {
        let df = f64::from(d);
        df * self.r1(x) - (1.0 - df) * self.r0(x)
    }

    pub fn mu(&self, d: u8, x: &[f64]) -> f64 {
        let g = &self.design;
        dot(&g.gamma0, x) + f64::from(d) * (g.tau_base + dot(&g.gamma1, x))
    }
}

/// Draws `n` observations. When a draw leaves a treatment arm empty, the
/// design is redrawn with the seed incremented.
pub fn generate(design: &SyntheticDesign, n: usize) -> Result<(ObservationalDataset, Oracle)> {
    let oracle = Oracle::new(design.clone())?;
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    const MAX_ATTEMPTS: u64 = 1000;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = design.seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n * design.dim);
        let mut d = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..design.dim).map(|_| rng.sample(StandardNormal)).collect();
            let di = u8::from(rng.random::<f64>() < oracle.e0(&row));
            let noise: f64 = rng.sample(StandardNormal);
            y.push(oracle.mu(di, &row) + design.noise_sd * noise);
            d.push(di);
            x.extend(row);
        }
        if d.iter().any(|&v| v == 1) && d.iter().any(|&v| v == 0) {
            if attempt > 0 {
                log::warn!("design `{}`: empty arm with seed {}; used seed {seed}", design.name, design.seed);
            }
            let data = ObservationalDataset::new(Samples::from_flat(n, design.dim, x)?, d, y)?;
            return Ok((data, oracle));
        }
    }
    Err(Error::DegenerateDesign(format!("no draw of {n} rows had both arms after {MAX_ATTEMPTS} seeds")))
}

/// `p_de = N(0, sd² I)`, `p_nu = N(μ, sd² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianShiftDesign {
    pub mu_shift: Vec<f64>,
    pub sd: f64,
}

impl GaussianShiftDesign {
    pub fn new(mu_shift: Vec<f64>, sd: f64) -> Result<Self> {
        if mu_shift.is_empty() || !(sd > 0.0) {
            return Err(Error::DegenerateDesign("shift needs dimension >= 1 and sd > 0".into()));
        }
        Ok(GaussianShiftDesign { mu_shift, sd })
    }

    /// One-dimensional shift by 0.5.
    pub fn small_shift() -> Self {
        GaussianShiftDesign { mu_shift: vec![0.5], sd: 1.0 }
    }

    /// `‖μ‖² = 32` in two dimensions.
    pub fn large_gap() -> Self {
        GaussianShiftDesign { mu_shift: vec![4.0, 4.0], sd: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.mu_shift.len()
    }

    fn mu_sq(&self) -> f64 {
        dot(&self.mu_shift, &self.mu_shift)
    }

    /// `log r₀(x) = (μᵀx − ‖μ‖²/2) / sd²`.
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        (dot(&self.mu_shift, x) - 0.5 * self.mu_sq()) / (self.sd * self.sd)
    }

    /// `KL(p_nu ‖ p_de) = ‖μ‖² / (2 sd²)`.
    pub fn kl(&self) -> f64 {
        0.5 * self.mu_sq() / (self.sd * self.sd)
    }

    /// `E_de[(r₀ − 1)²] = exp(‖μ‖² / sd²) − 1`.
    pub fn chi_square(&self) -> f64 {
        (self.mu_sq() / (self.sd * self.sd)).exp_m1()
    }
}

impl DensityRatio for GaussianShiftDesign {
    fn ratio(&self, x: &[f64]) -> f64 {
        self.log_ratio(x).exp()
    }
}

/// Draws `n_de` rows from `p_de` and then `n_nu` rows from `p_nu`.
pub fn generate_two_sample(
    design: &GaussianShiftDesign,
    n_de: usize,
    n_nu: usize,
    seed: u64,
) -> Result<(TwoSampleDataset, GaussianShiftDesign)> {
    let d = design.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize, shift: Option<&[f64]>| -> Result<Samples> {
        let mut v = Vec::with_capacity(n * d);
        for _ in 0..n {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                v.push(shift.map_or(0.0, |m| m[j]) + design.sd * z);
            }
        }
        Samples::from_flat(n, d, v)
    };
    let de = draw(n_de, None)?;
    let nu = draw(n_nu, Some(&design.mu_shift))?;
    Ok((TwoSampleDataset::new(de, nu)?, design.clone()))
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BasisExpansion;
use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd};

/// Ridge regression `μ̂(d, x) = [φ(x), d·φ(x)]ᵀ β̂` with a separate surface
/// per arm. The intercept of `φ` makes `d·φ₀ = d` the arm shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub basis: BasisExpansion,
    pub beta: Vec<f64>,
}

impl OutcomeModel {
    fn design_row(basis: &BasisExpansion, d: u8, x: &[f64]) -> Vec<f64> {
        let phi = basis.features(x);
        let df = f64::from(d);
        let mut row = phi.clone();
        row.extend(phi.iter().map(|p| df * p));
        row
    }

    pub fn predict(&self, d: u8, x: &[f64]) -> f64 {
        dot(&Self::design_row(&self.basis, d, x), &self.beta)
    }
}

/// `β̂ = (ΨᵀΨ + λI)⁻¹ΨᵀY` with `Ψ = [φ(X), D·φ(X)]`.
pub fn ridge_outcome_fit(data: &ObservationalDataset, basis: &BasisExpansion, lambda: f64) -> Result<OutcomeModel> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("ridge penalty must be non-negative, got {lambda}")));
    }
    if basis.input_dim() != data.dim() {
        return Err(Error::Shape(format!(
            "basis expects {} covariates, data has {}",
            basis.input_dim(),
            data.dim()
        )));
    }
    let p = 2 * basis.dim();
    let n = data.len();
    let mut psi = DMatrix::zeros(n, p);
    for i in 0..n {
        let row = OutcomeModel::design_row(basis, data.treatment()[i], data.x().row(i));
        for (j, v) in row.into_iter().enumerate() {
            psi[(i, j)] = v;
        }
    }
    let mut gram = psi.transpose() * &psi;
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = psi.transpose() * DVector::from_column_slice(data.outcome());
    let beta = solve_spd(&gram, &rhs)?;
    // LU may "succeed" on an exactly rank-deficient system with a huge residual.
    let resid = (&gram * &beta - &rhs).norm();
    if resid > 1e-6 * (1.0 + rhs.norm()) {
        return Err(Error::SingularSystem(format!("ridge normal equations, residual {resid:.3e}")));
    }
    Ok(OutcomeModel { basis: basis.clone(), beta: beta.iter().copied().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Samples;

    fn toy(y: impl Fn(f64, u8) -> f64) -> ObservationalDataset {
        let xs = [-1.5, -0.7, 0.0, 0.4, 1.1, 2.0, -0.2, 0.9];
        let ds = [1u8, 0, 1, 0, 1, 0, 0, 1];
        let ys = xs.iter().zip(&ds).map(|(&x, &d)| y(x, d)).collect();
        ObservationalDataset::new(Samples::from_column(&xs).unwrap(), ds.to_vec(), ys).unwrap()
    }

    #[test]
    fn constant_outcome() {
        let data = toy(|_, _| 4.25);
        let basis = BasisExpansion::polynomial(1, 1).unwrap();
        let m = ridge_outcome_fit(&data, &basis, 0.0).unwrap();
        for x in [-3.0, 0.0, 5.0] {
            for d in [0, 1] {
                assert!((m.predict(d, &[x]) - 4.25).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn recovers_exact_linear_model() {
        let data = toy(|x, d| 1.0 + 2.0 * x + 3.0 * f64::from(d));
        let basis = BasisExpansion::polynomial(1, 1).unwrap();
        let m = ridge_outcome_fit(&data, &basis, 1e-10).unwrap();
        let expect = [1.0, 2.0, 3.0, 0.0];
        for (b, e) in m.beta.iter().zip(expect) {
            assert!((b - e).abs() < 1e-6, "{:?}", m.beta);
        }
    }

    #[test]
    fn coefficient_norm_shrinks_with_lambda() {
        let data = toy(|x, d| 0.5 - x + 2.0 * f64::from(d) * x + (3.0 * x).sin());
        let basis = BasisExpansion::polynomial(1, 2).unwrap();
        let norms: Vec<f64> = [0.0, 0.01, 0.1, 1.0, 10.0, 1e3, 1e6]
            .iter()
            .map(|&l| {
                let m = ridge_outcome_fit(&data, &basis, l).unwrap();
                m.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
            })
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{norms:?}");
        }
        assert!(norms.last().unwrap() < &1e-3);
    }

    #[test]
    fn rank_deficient_without_ridge() {
        // Cubic basis on a single treated point cannot be identified.
        let data = ObservationalDataset::new(
            Samples::from_column(&[0.0, 1.0, 2.0]).unwrap(),
            vec![1, 0, 0],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let basis = BasisExpansion::polynomial(1, 3).unwrap();
        assert!(matches!(ridge_outcome_fit(&data, &basis, 0.0), Err(Error::SingularSystem(_))));
        assert!(ridge_outcome_fit(&data, &basis, 1e-3).is_ok());
    }
}

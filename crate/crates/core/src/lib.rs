//! Direct density-ratio estimation and Riesz representer estimation as one
//! family of Bregman-divergence empirical risk minimization problems, plus a
//! cross-fitted debiased estimator of the average treatment effect that uses
//! the fitted representers.
//!
//! For the ATE the Riesz representer is
//!
//! `α₀(d, x) = d · r₀(1, x) − (1 − d) · r₀(0, x)`, with
//! `r₀(1, x) = p_X(x) / p_{D,X}(1, x)` and `r₀(0, x) = p_X(x) / p_{D,X}(0, x)`,
//!
//! so the least-squares Riesz objective and the paired least-squares
//! importance fitting (LSIF) objective for `(r₀(1,·), r₀(0,·))` are the same
//! function of the model. [`riesz::riesz_empirical_risk`] and
//! [`riesz::paired_lsif_risk`] evaluate the two forms.
//!
//! Module map:
//!
//! - [`data`]: datasets, validation, CSV ingestion and fold assignment.
//! - [`losses`]: the Bregman generator catalog and the risks built from it.
//! - [`models`]: basis expansions, ratio / Riesz models, the Gaussian kernel
//!   with the KuLSIF solve and leave-one-out selection, and ridge outcome
//!   regression.
//! - [`optim`]: deterministic gradient descent with backtracking.
//! - [`dre`]: density-ratio fitting, non-negative correction, truncation and
//!   telescoping.
//! - [`riesz`]: Riesz regression objectives and fitting.
//! - [`ate`]: Neyman-orthogonal scores and the cross-fitted estimators.
//! - [`synthetic`]: ground-truth designs and oracles.

pub mod ate;
pub mod data;
pub mod dre;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod models;
pub mod optim;
pub mod riesz;
pub mod synthetic;

pub use error::{Error, Result};

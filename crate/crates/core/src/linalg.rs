//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` for a symmetric positive (semi)definite `a`.
///
/// Tries Cholesky first and falls back to LU; a non-finite solution is
/// reported as singular.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => a
            .clone()
            .lu()
            .solve(b)
            .ok_or_else(|| Error::SingularSystem(format!("{}x{} system", a.nrows(), a.ncols())))?,
    };
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem("solution is not finite".into()))
    }
}

/// `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Row-major feature matrix `Φ` (one row per sample, one column per basis
/// function).
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(n: usize, m: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * m, "feature buffer size");
        Features { n, m, data }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    /// `Φ θ`.
    pub fn matvec(&self, theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.m);
        self.data.chunks_exact(self.m).map(|row| dot(row, theta)).collect()
    }

    /// Adds `Φᵀ w` into `out`.
    pub fn add_tmatvec(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.n);
        for (row, &wi) in self.data.chunks_exact(self.m).zip(w) {
            if wi != 0.0 {
                for (o, &p) in out.iter_mut().zip(row) {
                    *o += wi * p;
                }
            }
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.m, &self.data)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the `n − 1` denominator (0 for `n < 2`).
pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

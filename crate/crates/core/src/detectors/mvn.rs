use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_dim, to_matrix};
use crate::error::{Error, Result};

/// Single Gaussian fitted by maximum likelihood.
///
/// `cov` already includes the ridge `regularization · I`; `chol` is its
/// lower Cholesky factor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvnModel {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub chol: Vec<f64>,
    pub log_det: f64,
    pub regularization: f64,
}

/// Relative ridge added to the covariance diagonal, as a fraction of the
/// mean per-dimension variance.
pub const MVN_RIDGE: f64 = 1e-6;

/// Mean and covariance (divisor n) plus `λI`, `λ = 1e-6 · trace(Σ)/d`.
pub fn fit_mvn<R: AsRef<[f64]>>(data: &[R]) -> Result<MvnModel> {
    if data.len() < 2 {
        return Err(Error::Fit(format!(
            "MVN needs at least 2 samples, got {}",
            data.len()
        )));
    }
    let (x, mean) = to_matrix(data)?;
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut cov = x.tr_mul(&x) / n;
    // Exact symmetry regardless of the multiply kernel.
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let trace = cov.trace();
    let mut lambda = (MVN_RIDGE * trace / d as f64).max(1e-12);
    let mut attempt = 0;
    let chol = loop {
        let mut reg = cov.clone();
        for i in 0..d {
            reg[(i, i)] += lambda;
        }
        if let Some(c) = reg.clone().cholesky() {
            cov = reg;
            break c.l();
        }
        attempt += 1;
        if attempt > 8 {
            return Err(Error::Fit("covariance not positive definite".into()));
        }
        lambda *= 10.0;
    };
    let log_det = 2.0 * (0..d).map(|i| chol[(i, i)].ln()).sum::<f64>();
    Ok(MvnModel {
        mean,
        cov: row_major(&cov),
        chol: row_major(&chol),
        log_det,
        regularization: lambda,
    })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl MvnModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Natural-log density at `h`, via a triangular solve.
    pub fn log_density(&self, h: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(d, h.len())?;
        let mut z = vec![0.0; d];
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let s: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
            z[i] = (h[i] - self.mean[i] - s) / self.chol[i * d + i];
        }
        let maha: f64 = z.iter().map(|v| v * v).sum();
        Ok(-0.5 * (maha + self.log_det + d as f64 * (2.0 * std::f64::consts::PI).ln()))
    }

    /// `-log p(h)`: larger for less likely points.
    pub fn score(&self, h: &[f64]) -> Result<f64> {
        self.log_density(h).map(|lp| -lp)
    }
}

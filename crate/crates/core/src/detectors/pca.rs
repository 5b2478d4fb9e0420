use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{check_dim, to_matrix};
use crate::error::{Error, Result};

/// Principal subspace retaining a fraction of the training variance.
///
/// `components[j]` is the j-th principal direction (unit length), ordered
/// by decreasing eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub variance_threshold: f64,
}

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.99;

pub fn fit_pca<R: AsRef<[f64]>>(data: &[R], variance_threshold: f64) -> Result<PcaModel> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::config(format!(
            "variance threshold must be in (0, 1], got {variance_threshold}"
        )));
    }
    if data.len() < 2 {
        return Err(Error::Fit(format!(
            "PCA needs at least 2 samples, got {}",
            data.len()
        )));
    }
    let (x, mean) = to_matrix(data)?;
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut cov = x.tr_mul(&x) / n;
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let total = cov.trace();
    if !(total > 0.0) {
        return Err(Error::Fit("zero total variance".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let kept: f64 = values.iter().sum();

    // Smallest k whose cumulative share reaches the threshold, with a
    // relative slack for roundoff in the eigenvalue sum.
    let target = variance_threshold * kept - 1e-12 * kept;
    let mut k = 0;
    let mut cum = 0.0;
    while k < d {
        cum += values[k];
        k += 1;
        if cum >= target {
            break;
        }
    }

    let components = order[..k]
        .iter()
        .map(|&i| {
            let mut w: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let pivot = w
                .iter()
                .copied()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            let s = if pivot < 0.0 { -1.0 / norm } else { 1.0 / norm };
            w.iter_mut().for_each(|v| *v *= s);
            w
        })
        .collect();

    Ok(PcaModel {
        mean,
        components,
        eigenvalues: values[..k].to_vec(),
        variance_threshold,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Coordinates `Wᵀ(h - mean)`.
    pub fn project(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), h.len())?;
        Ok(self
            .components
            .iter()
            .map(|w| w.iter().zip(h).zip(&self.mean).map(|((w, h), m)| w * (h - m)).sum())
            .collect())
    }

    /// Squared norm of the residual `r - W Wᵀ r`, `r = h - mean`.
    pub fn score(&self, h: &[f64]) -> Result<f64> {
        let z = self.project(h)?;
        let mut r: Vec<f64> = h.iter().zip(&self.mean).map(|(h, m)| h - m).collect();
        for (w, zj) in self.components.iter().zip(&z) {
            for (ri, wi) in r.iter_mut().zip(w) {
                *ri -= zj * wi;
            }
        }
        Ok(r.iter().map(|v| v * v).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_in_3d_has_one_component() {
        let data: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 - 4.5;
                vec![t, 2.0 * t, -t]
            })
            .collect();
        let m = fit_pca(&data, 0.99).unwrap();
        assert_eq!(m.n_components(), 1);
        assert!(m.score(&[1.0, 2.0, -1.0]).unwrap() < 1e-18);
        let w = &m.components[0];
        assert!(w[1] > 0.0);
    }

    #[test]
    fn xy_plane_residual() {
        let data = vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
        ];
        let m = fit_pca(&data, 1.0).unwrap();
        assert_eq!(m.n_components(), 2);
        assert!((m.score(&[3.0, 4.0, 5.0]).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_a_fit_error() {
        assert!(matches!(fit_pca(&vec![vec![1.0, 1.0]; 4], 0.99), Err(Error::Fit(_))));
        assert!(fit_pca(&[vec![1.0], vec![2.0]], 0.0).is_err());
    }
}

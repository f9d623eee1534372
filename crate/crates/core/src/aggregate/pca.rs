use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Principal components of a row set.
///
/// Components come in descending eigenvalue order; each is oriented so that
/// its largest-magnitude coordinate is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl Pca {
    /// Fits on `rows` (n × d) using the sample covariance (n − 1 denominator).
    pub fn fit<V: AsRef<[f64]>>(rows: &[V], target_dim: usize) -> Result<Self> {
        let n = rows.len();
        if target_dim == 0 {
            return Err(Error::InvalidArgument("target dimension must be positive".into()));
        }
        if n <= target_dim {
            return Err(Error::InvalidArgument(format!(
                "PCA to {target_dim} dimensions needs more than {target_dim} rows, got {n}"
            )));
        }
        let d = rows[0].as_ref().len();
        if target_dim > d {
            return Err(Error::InvalidArgument(format!(
                "target dimension {target_dim} exceeds input dimension {d}"
            )));
        }
        let mut mean = vec![0.0; d];
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let centered = DMatrix::from_fn(n, d, |i, j| rows[i].as_ref()[j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = Vec::with_capacity(target_dim);
        let mut eigenvalues = Vec::with_capacity(target_dim);
        for &c in order.iter().take(target_dim) {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let pivot = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            eigenvalues.push(eig.eigenvalues[c].max(0.0));
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Projection basis, `target_dim` unit rows of length d.
    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Covariance eigenvalues of the kept components.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn target_dim(&self) -> usize {
        self.components.len()
    }

    /// Centers `x` and projects it onto the components. No renormalization.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x)
                    .zip(&self.mean)
                    .map(|((ci, xi), mi)| ci * (xi - mi))
                    .sum()
            })
            .collect()
    }

    /// Maps projected coordinates back to the input space.
    pub fn inverse_transform(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &yi) in self.components.iter().zip(y) {
            for (xj, cj) in x.iter_mut().zip(c) {
                *xj += yi * cj;
            }
        }
        x
    }
}

/// Fits a PCA on `rows` and projects them. Returns the projected rows and the
/// fitted basis.
pub fn pca_reduce<V: AsRef<[f64]>>(rows: &[V], target_dim: usize) -> Result<(Vec<Vec<f64>>, Pca)> {
    let pca = Pca::fit(rows, target_dim)?;
    let projected = rows.iter().map(|r| pca.transform(r.as_ref())).collect();
    Ok((projected, pca))
}

//! Exact principal-component analysis via a cyclic Jacobi eigensolver.
//!
//! Deterministic by construction: components are sorted by descending
//! eigenvalue and signed so each component's largest-magnitude loading is
//! positive. Eigenvalues are those of the `1/n`-scaled covariance, so the
//! mean squared reconstruction error from the top `k` components equals the
//! sum of the discarded eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::mathfn;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PcaError {
    EmptyDataset,
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for PcaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcaError::EmptyDataset => write!(f, "cannot fit a projection to an empty dataset"),
            PcaError::RaggedRow { row, expected, got } => {
                write!(f, "row {row} has {got} values, expected {expected}")
            }
        }
    }
}

impl core::error::Error for PcaError {}

/// A fitted projection: dataset mean, eigenvalues in descending order and
/// the matching unit-length components (rows).
#[derive(Clone, Debug)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

/// Cyclic Jacobi diagonalization of a symmetric matrix. Returns the diagonal
/// (eigenvalues) and the accumulated rotations (eigenvector columns).
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n <= 1 {
        return (a.iter().map(|r| r.first().copied().unwrap_or(0.0)).collect(), v);
    }
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off <= scale * 1e-30 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                if mathfn::abs(a[p][q]) <= scale * 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + mathfn::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + mathfn::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / mathfn::sqrt(t * t + 1.0);
                let s = t * c;
                // rows p and q
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                // columns p and q
                for row in a.iter_mut() {
                    let akp = row[p];
                    let akq = row[q];
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                // eigenvector columns
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

/// Fits a projection to `data` (one vector per row, equal lengths).
pub fn fit(data: &[Vec<f64>]) -> Result<Pca, PcaError> {
    if data.is_empty() {
        return Err(PcaError::EmptyDataset);
    }
    let dim = data[0].len();
    for (r, row) in data.iter().enumerate() {
        if row.len() != dim {
            return Err(PcaError::RaggedRow {
                row: r,
                expected: dim,
                got: row.len(),
            });
        }
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for row in data {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = vec![vec![0.0f64; dim]; dim];
    for row in data {
        let centered: Vec<f64> = row.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..dim {
            for j in i..dim {
                cov[i][j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eigenvalues[j]
            .partial_cmp(&eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut sorted_values = Vec::with_capacity(dim);
    let mut components = Vec::with_capacity(dim);
    for &idx in &order {
        sorted_values.push(eigenvalues[idx]);
        let mut comp: Vec<f64> = (0..dim).map(|k| vectors[k][idx]).collect();
        // sign convention: the largest-magnitude loading is positive
        let mut lead = 0;
        for (k, &x) in comp.iter().enumerate() {
            if mathfn::abs(x) > mathfn::abs(comp[lead]) {
                lead = k;
            }
        }
        if comp[lead] < 0.0 {
            for x in &mut comp {
                *x = -*x;
            }
        }
        components.push(comp);
    }
    Ok(Pca {
        mean,
        eigenvalues: sorted_values,
        components,
    })
}

impl Pca {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Coordinates of `x` along the top `k` components.
    pub fn project(&self, x: &[f64], k: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.components
            .iter()
            .take(k)
            .map(|comp| comp.iter().zip(&centered).map(|(c, v)| c * v).sum())
            .collect()
    }

    /// The 2-D projection used for plotting; a missing second dimension
    /// reads as 0.
    pub fn project2(&self, x: &[f64]) -> (f64, f64) {
        let p = self.project(x, 2);
        (
            p.first().copied().unwrap_or(0.0),
            p.get(1).copied().unwrap_or(0.0),
        )
    }

    /// Mean plus the top-`k` reconstruction of `x`.
    pub fn reconstruct(&self, x: &[f64], k: usize) -> Vec<f64> {
        let coords = self.project(x, k);
        let mut out = self.mean.clone();
        for (comp, coord) in self.components.iter().take(k).zip(coords) {
            for (o, &c) in out.iter_mut().zip(comp) {
                *o += coord * c;
            }
        }
        out
    }

    /// Mean squared reconstruction error over a dataset from the top `k`
    /// components; equals the sum of the discarded eigenvalues.
    pub fn mean_reconstruction_error(&self, data: &[Vec<f64>], k: usize) -> f64 {
        let mut total = 0.0;
        for row in data {
            let rec = self.reconstruct(row, k);
            total += row
                .iter()
                .zip(&rec)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        total / data.len() as f64
    }
}

//! Covariance-based preprocessing: PCA gating and the pseudo-inverse
//! square-root rescaling that turns the underlying representation into an
//! orthogonal one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_kernel::{pseudo_inverse_sqrt, symmetric_eigendecomposition, SymmetricOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Raw,
    Projected,
    Orthonormalized,
}

/// N points in R^n, one per row.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: DMatrix<f64>,
    stage: Stage,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>, stage: Stage) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptySet);
        }
        if points.ncols() == 0 {
            return Err(Error::EmptyAmbient);
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix);
        }
        Ok(Self { points, stage })
    }

    pub fn from_rows(rows: Vec<DVector<f64>>, stage: Stage) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySet);
        }
        let n = rows[0].len();
        let mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Self::new(mat, stage)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn ambient(&self) -> usize {
        self.points.ncols()
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    /// Subtract the mean point. Only relevant for data whose symmetry is
    /// linear around a nonzero centroid.
    pub fn centered(&self) -> PointCloud {
        let n = self.ambient();
        let mean = DVector::from_fn(n, |j, _| self.points.column(j).mean());
        let mut pts = self.points.clone();
        for i in 0..pts.nrows() {
            for j in 0..n {
                pts[(i, j)] -= mean[j];
            }
        }
        PointCloud {
            points: pts,
            stage: self.stage,
        }
    }

    /// Parse comma-separated decimal rows.
    pub fn from_csv_str(text: &str, skip_header: bool) -> Result<PointCloud> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if skip_header && lineno == 0 {
                continue;
            }
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = trimmed
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect();
            let row = row.map_err(|e| Error::Io(format!("line {}: {e}", lineno + 1)))?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Io(format!(
                        "line {}: expected {} fields, got {}",
                        lineno + 1,
                        first.len(),
                        row.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptySet);
        }
        let n = rows[0].len();
        let mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        PointCloud::new(mat, Stage::Raw)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.ambient())
                .map(|j| format!("{}", self.points[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `Σ[X] = (1/N) Σ xᵢ xᵢᵀ` (no mean subtraction; the model is linear).
pub fn covariance(cloud: &PointCloud) -> SymmetricOperator {
    let n = cloud.ambient();
    let mut acc = DMatrix::zeros(n, n);
    for i in 0..cloud.len() {
        let x = cloud.points.row(i);
        acc += x.transpose() * x;
    }
    acc /= cloud.len() as f64;
    SymmetricOperator::new(acc).expect("covariance of a finite cloud is finite")
}

/// Record of the applied transform: retained eigenbasis columns and the
/// inverse square roots of their eigenvalues.
#[derive(Debug, Clone)]
pub struct PreprocessTransform {
    pub basis: DMatrix<f64>,
    pub inv_sqrt_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PreprocessResult {
    pub cloud: PointCloud,
    pub transform: PreprocessTransform,
    pub retained_dimension: usize,
    /// Covariance eigenvalues, descending.
    pub covariance_spectrum: Vec<f64>,
}

impl PreprocessResult {
    /// Output points expressed in the retained eigenbasis, dropping the
    /// discarded directions.
    pub fn reduced_cloud(&self) -> PointCloud {
        let coords = &self.cloud.points * &self.transform.basis;
        PointCloud {
            points: coords,
            stage: Stage::Orthonormalized,
        }
    }

    /// Reduced coordinates rescaled by 1/√r so that exact orbit data lands
    /// on the unit sphere. The verification thresholds are calibrated in
    /// this normalization.
    pub fn normalized_cloud(&self) -> PointCloud {
        let r = self.retained_dimension as f64;
        let coords = (&self.cloud.points * &self.transform.basis) / r.sqrt();
        PointCloud {
            points: coords,
            stage: Stage::Orthonormalized,
        }
    }

    /// Map external points (rows) through the same normalized transform as
    /// `normalized_cloud`.
    pub fn project_points(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.retained_dimension as f64;
        let mut scaled_basis = self.transform.basis.clone();
        for (j, inv) in self.transform.inv_sqrt_eigenvalues.iter().enumerate() {
            let col = scaled_basis.column(j) * (*inv / r.sqrt());
            scaled_basis.set_column(j, &col);
        }
        points * scaled_basis
    }
}

pub fn default_epsilon(covariance_spectrum_top: f64) -> f64 {
    1e-9 * covariance_spectrum_top
}

/// `orthonormalize` with the default gate 1e-9 times the top covariance
/// eigenvalue when no epsilon is supplied.
pub fn orthonormalize_auto(cloud: &PointCloud, epsilon: Option<f64>) -> Result<PreprocessResult> {
    let eps = match epsilon {
        Some(e) => e,
        None => {
            let sigma = covariance(cloud);
            let (values, _) = symmetric_eigendecomposition(&sigma);
            default_epsilon(values.last().copied().unwrap_or(0.0))
        }
    };
    orthonormalize(cloud, eps)
}

/// Rescale the cloud by the pseudo-inverse square root of its covariance,
/// keeping only eigendirections above `epsilon`. The output covariance is
/// the identity on the retained subspace.
pub fn orthonormalize(cloud: &PointCloud, epsilon: f64) -> Result<PreprocessResult> {
    let sigma = covariance(cloud);
    let (values, vectors) = symmetric_eigendecomposition(&sigma);
    let n = cloud.ambient();
    let retained: Vec<usize> = (0..n).filter(|&i| values[i] > epsilon).collect();
    if retained.is_empty() {
        return Err(Error::DegenerateCloud { epsilon });
    }
    let m = pseudo_inverse_sqrt(&sigma, epsilon)?;
    let pts = &cloud.points * m.matrix(); // rows x_iᵀ Mᵀ = (M x_i)ᵀ, M symmetric
    let mut basis = DMatrix::zeros(n, retained.len());
    let mut inv_sqrt = Vec::with_capacity(retained.len());
    // Retained columns ordered by descending eigenvalue.
    for (dst, &src) in retained.iter().rev().enumerate() {
        basis.set_column(dst, &vectors.column(src));
        inv_sqrt.push(values[src].powf(-0.5));
    }
    let mut spectrum = values;
    spectrum.reverse();
    Ok(PreprocessResult {
        cloud: PointCloud {
            points: pts,
            stage: Stage::Orthonormalized,
        },
        transform: PreprocessTransform {
            basis,
            inv_sqrt_eigenvalues: inv_sqrt,
        },
        retained_dimension: retained.len(),
        covariance_spectrum: spectrum,
    })
}

/// Project onto the top `target_dim` covariance eigendirections and
/// re-express the points in that basis. Ties at the cut are logged and
/// resolved by index order.
pub fn project_to_dimension(cloud: &PointCloud, target_dim: usize) -> Result<PointCloud> {
    let n = cloud.ambient();
    if target_dim == 0 || target_dim > n {
        return Err(Error::Config(format!(
            "target dimension {target_dim} out of range 1..={n}"
        )));
    }
    let sigma = covariance(cloud);
    let (values, vectors) = symmetric_eigendecomposition(&sigma);
    if target_dim < n {
        let gap = values[n - target_dim] - values[n - target_dim - 1];
        if gap.abs() < 1e-12 {
            log::warn!(
                "ambiguous PCA cut at dimension {target_dim}: eigenvalue gap {gap:.3e}; proceeding with index order"
            );
        }
    }
    let mut basis = DMatrix::zeros(n, target_dim);
    for dst in 0..target_dim {
        basis.set_column(dst, &vectors.column(n - 1 - dst));
    }
    Ok(PointCloud {
        points: &cloud.points * basis,
        stage: Stage::Projected,
    })
}

//! Ground-truth generators: Haar-uniform orbit samples with optional noise
//! and outliers, uniform Stiefel-frame clouds, and the orbit-based density
//! samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra_fit::FitResult;
use crate::error::{Error, Result};
use crate::matrix_kernel::{matrix_exponential_skew, Frame};
use crate::orbit_verify::sample_fitted_orbit;
use crate::preprocess::{PointCloud, Stage};
use crate::rep_catalog::{assemble_raw_frame, Group, RepresentationType};

/// Specification of a synthetic orbit sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitSpec {
    pub rep: RepresentationType,
    /// Defaults to a unit point with mass 1/√p on every irrep block.
    #[serde(default)]
    pub base_point: Option<Vec<f64>>,
    /// Optional diagonal distortion applied after the group action, making
    /// the sampled representation non-orthogonal.
    #[serde(default)]
    pub stretch_diag: Option<Vec<f64>>,
    pub n_points: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Extra points drawn uniformly in [-1, 1]^n.
    #[serde(default)]
    pub outliers: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum GroupElement {
    Angles(Vec<f64>),
    Quaternion([f64; 4]),
}

/// One Haar-uniform group element: uniform angles for the Abelian groups,
/// a normalized 4-dimensional Gaussian for SU(2) (pushed forward for
/// SO(3)).
pub fn haar_element<R: Rng>(group: Group, rng: &mut R) -> GroupElement {
    match group {
        Group::So2 => GroupElement::Angles(vec![rng.random_range(0.0..std::f64::consts::TAU)]),
        Group::Torus(d) => GroupElement::Angles(
            (0..d)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect(),
        ),
        Group::Su2 | Group::So3 => {
            let mut q = [0.0f64; 4];
            loop {
                for v in q.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for v in q.iter_mut() {
                        *v /= norm;
                    }
                    break;
                }
            }
            GroupElement::Quaternion(q)
        }
    }
}

fn rotation_2x2(theta: f64) -> [[f64; 2]; 2] {
    [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]]
}

/// The representing matrix φ(g) of the model block-diagonal
/// representation.
pub fn rep_matrix(rep: &RepresentationType, g: &GroupElement) -> Result<DMatrix<f64>> {
    let n = rep.ambient_dimension();
    match (rep, g) {
        (RepresentationType::So2(weights), GroupElement::Angles(a)) if a.len() == 1 => {
            let mut out = DMatrix::identity(n, n);
            for (b, &k) in weights.iter().enumerate() {
                let r = rotation_2x2(k as f64 * a[0]);
                out[(2 * b, 2 * b)] = r[0][0];
                out[(2 * b, 2 * b + 1)] = r[0][1];
                out[(2 * b + 1, 2 * b)] = r[1][0];
                out[(2 * b + 1, 2 * b + 1)] = r[1][1];
            }
            Ok(out)
        }
        (RepresentationType::Torus(rows), GroupElement::Angles(a)) if a.len() == rows.len() => {
            let m = rows[0].len();
            let mut out = DMatrix::identity(n, n);
            for b in 0..m {
                let theta: f64 = rows.iter().zip(a.iter()).map(|(r, t)| r[b] as f64 * t).sum();
                let r = rotation_2x2(theta);
                out[(2 * b, 2 * b)] = r[0][0];
                out[(2 * b, 2 * b + 1)] = r[0][1];
                out[(2 * b + 1, 2 * b)] = r[1][0];
                out[(2 * b + 1, 2 * b + 1)] = r[1][1];
            }
            Ok(out)
        }
        (RepresentationType::Su2(_) | RepresentationType::So3(_), GroupElement::Quaternion(q)) => {
            let frame = assemble_raw_frame(rep, n)?;
            let gens = frame.matrices();
            let c = q[0].clamp(-1.0, 1.0);
            let v_norm = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if v_norm < 1e-14 {
                return Ok(if c >= 0.0 {
                    DMatrix::identity(n, n)
                } else {
                    // -1 in the group: a full turn in any direction.
                    matrix_exponential_skew(&(&gens[0] * (2.0 * std::f64::consts::PI)))
                });
            }
            let alpha = c.acos();
            let mut a = DMatrix::zeros(n, n);
            for (i, gmat) in gens.iter().enumerate() {
                a += gmat * (2.0 * alpha * q[i + 1] / v_norm);
            }
            Ok(matrix_exponential_skew(&a))
        }
        _ => Err(Error::Config("group element does not match representation".into())),
    }
}

/// Unit-norm base point with mass 1/√p on each irrep block. Plane blocks
/// start at their first coordinate; higher-dimensional blocks use a graded
/// generic direction to avoid special stabilizers.
pub fn default_base_point(rep: &RepresentationType) -> DVector<f64> {
    let n = rep.ambient_dimension();
    let mut x = DVector::zeros(n);
    let block_dims: Vec<usize> = match rep {
        RepresentationType::So2(w) => w.iter().map(|_| 2).collect(),
        RepresentationType::Torus(rows) => rows[0].iter().map(|_| 2).collect(),
        RepresentationType::Su2(parts) | RepresentationType::So3(parts) => parts.clone(),
    };
    let p = block_dims.len();
    let mass = 1.0 / (p as f64).sqrt();
    let mut offset = 0;
    for (b, &dim) in block_dims.iter().enumerate() {
        if dim <= 2 {
            x[offset] = mass;
        } else {
            // Shift the graded direction per block: repeated irreps with
            // parallel components would confine the orbit to a diagonal
            // subspace.
            let mut v = DVector::from_fn(dim, |i, _| 1.0 / (((i + b) % dim) as f64 + 1.0));
            let norm = v.norm();
            v /= norm;
            for i in 0..dim {
                x[offset + i] = mass * v[i];
            }
        }
        offset += dim;
    }
    x
}

fn block_dims_of(rep: &RepresentationType) -> Vec<(usize, bool)> {
    // (dimension, acts nontrivially)
    match rep {
        RepresentationType::So2(w) => w.iter().map(|&k| (2, k != 0)).collect(),
        RepresentationType::Torus(rows) => {
            let m = rows[0].len();
            (0..m)
                .map(|b| (2, rows.iter().any(|r| r[b] != 0)))
                .collect()
        }
        RepresentationType::Su2(parts) | RepresentationType::So3(parts) => {
            parts.iter().map(|&p| (p, p > 1)).collect()
        }
    }
}

fn per_index_rng(seed: u64, index: usize) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0x6A09E667F3BCC909))
}

/// Haar-uniform sample of the orbit through the base point, with optional
/// diagonal stretch, additive Gaussian noise, and uniform outliers.
pub fn sample_orbit_uniform(spec: &OrbitSpec) -> Result<PointCloud> {
    let n = spec.rep.ambient_dimension();
    if n == 0 {
        return Err(Error::EmptyAmbient);
    }
    let x0 = match &spec.base_point {
        Some(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
            DVector::from_vec(v.clone())
        }
        None => default_base_point(&spec.rep),
    };
    // A block on which the group acts nontrivially needs mass to produce
    // an almost-faithful orbit.
    let mut offset = 0;
    for (b, (dim, acts)) in block_dims_of(&spec.rep).into_iter().enumerate() {
        let mass: f64 = (0..dim).map(|i| x0[offset + i] * x0[offset + i]).sum();
        if acts && mass < 1e-20 {
            return Err(Error::DegenerateBasePoint { block: b });
        }
        offset += dim;
    }
    if let Some(s) = &spec.stretch_diag {
        if s.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.len() });
        }
    }
    let group = spec.rep.group();
    let rows: Vec<Result<DVector<f64>>> = (0..spec.n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = per_index_rng(spec.seed, i);
            let g = haar_element(group, &mut rng);
            let mut x = rep_matrix(&spec.rep, &g)? * &x0;
            if let Some(s) = &spec.stretch_diag {
                for c in 0..n {
                    x[c] *= s[c];
                }
            }
            if spec.noise_sigma > 0.0 {
                for c in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    x[c] += spec.noise_sigma * z;
                }
            }
            Ok(x)
        })
        .collect();
    let mut all = Vec::with_capacity(spec.n_points + spec.outliers);
    for r in rows {
        all.push(r?);
    }
    for i in 0..spec.outliers {
        let mut rng = per_index_rng(spec.seed.wrapping_add(0xABCDEF), spec.n_points + i);
        all.push(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
    }
    PointCloud::from_rows(all, Stage::Raw)
}

/// Uniform sample of the manifold of r orthonormal rows in R^c, embedded
/// in R^{r·c} by row-major flattening.
pub fn sample_stiefel(rows: usize, cols: usize, count: usize, seed: u64) -> Result<PointCloud> {
    if rows == 0 || cols == 0 || rows > cols {
        return Err(Error::Config("need 1 <= rows <= cols".into()));
    }
    let out: Vec<DVector<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = per_index_rng(seed, i);
            let g = DMatrix::from_fn(cols, rows, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = g.qr();
            let mut q = qr.q();
            let r = qr.r();
            for k in 0..rows {
                if r[(k, k)] < 0.0 {
                    let col = -q.column(k);
                    q.set_column(k, &col);
                }
            }
            // Row i of the frame is the i-th column of q.
            let mut flat = DVector::zeros(rows * cols);
            for ri in 0..rows {
                for ci in 0..cols {
                    flat[ri * cols + ci] = q[(ci, ri)];
                }
            }
            flat
        })
        .collect();
    PointCloud::from_rows(out, Stage::Raw)
}

/// `(n(l+2)/4)^(−1/(l+4))`.
pub fn silverman_factor(n_points: usize, intrinsic_dim: usize) -> f64 {
    let n = n_points as f64;
    let l = intrinsic_dim as f64;
    (n * (l + 2.0) / 4.0).powf(-1.0 / (l + 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerParadigm {
    MultiSourceLiePca,
    MultiSourceLieDetect,
    SingleSourceLieDetect,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerMode {
    pub paradigm: SamplerParadigm,
    /// Acceptance threshold for multi-source resampling; defaults to the
    /// largest nearest-neighbor distance in the input cloud.
    pub tau: Option<f64>,
    pub intrinsic_dim: usize,
}

/// Frames driving the sampler: a raw estimated frame, or a full fit when
/// period information is available.
pub enum DensityFrames<'a> {
    Raw(&'a Frame),
    Fitted(&'a FitResult),
}

/// Largest distance from a point to its nearest neighbor.
pub fn max_nearest_neighbor_distance(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = cloud.point(i);
            let mut best = f64::INFINITY;
            for j in 0..n {
                if j != i {
                    best = best.min((cloud.point(j) - &xi).norm());
                }
            }
            if best.is_finite() {
                best
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Generate `m_out` new points along the estimated symmetry directions.
/// Multi-source modes draw Gaussian algebra coordinates per point and
/// resample (same source, fresh coordinates) while the candidate lands
/// farther than τ from the input; the single-source mode sweeps a
/// fundamental domain from one fixed source.
pub fn density_sample(
    cloud: &PointCloud,
    frames: &DensityFrames,
    mode: &SamplerMode,
    m_out: usize,
    seed: u64,
) -> Result<PointCloud> {
    if m_out == 0 {
        return Err(Error::EmptySample);
    }
    let n = cloud.ambient();
    let frame: &Frame = match frames {
        DensityFrames::Raw(f) => f,
        DensityFrames::Fitted(fit) => &fit.fitted_frame,
    };
    if frame.ambient() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: frame.ambient(),
        });
    }
    match mode.paradigm {
        SamplerParadigm::SingleSourceLieDetect => {
            let DensityFrames::Fitted(fit) = frames else {
                return Err(Error::Config(
                    "single-source sampling needs the fitted representation".into(),
                ));
            };
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let src = rng.random_range(0..cloud.len());
            let sample = sample_fitted_orbit(fit, &cloud.point(src), m_out)?;
            PointCloud::new(sample.points, Stage::Raw)
        }
        SamplerParadigm::MultiSourceLiePca | SamplerParadigm::MultiSourceLieDetect => {
            let tau = mode.tau.unwrap_or_else(|| max_nearest_neighbor_distance(cloud));
            let h = silverman_factor(cloud.len(), mode.intrinsic_dim);
            let d = frame.count();
            let results: Vec<(DVector<f64>, bool)> = (0..m_out)
                .into_par_iter()
                .map(|j| {
                    let mut rng = per_index_rng(seed, j);
                    let src = cloud.point(rng.random_range(0..cloud.len()));
                    let mut last = src.clone();
                    for _attempt in 0..100 {
                        let mut a = DMatrix::zeros(n, n);
                        for k in 0..d {
                            let t: f64 = rng.sample::<f64, _>(StandardNormal) * h;
                            a += &frame.matrices()[k] * t;
                        }
                        let y = matrix_exponential_skew(&a) * &src;
                        let dist = (0..cloud.len())
                            .map(|i| (cloud.point(i) - &y).norm())
                            .fold(f64::INFINITY, f64::min);
                        last = y;
                        if dist <= tau {
                            return (last, true);
                        }
                    }
                    (last, false)
                })
                .collect();
            let stalled = results.iter().filter(|(_, ok)| !ok).count();
            if stalled * 10 > m_out {
                return Err(Error::SamplerStalled {
                    stalled,
                    total: m_out,
                });
            }
            PointCloud::from_rows(results.into_iter().map(|(p, _)| p).collect(), Stage::Raw)
        }
    }
}

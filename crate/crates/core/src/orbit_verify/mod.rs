//! Orbit reconstruction from a fitted frame and goodness-of-fit scoring
//! with one-sided/symmetric Hausdorff and Wasserstein-2 distances.

pub mod transport;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::algebra_fit::FitResult;
use crate::error::{Error, Result};
use crate::matrix_kernel::{matrix_exponential_skew, skew_schur_form, Frame};
use crate::preprocess::{PointCloud, Stage};
use crate::rep_catalog::{weight_block_matrix, RepresentationType};

/// Points generated by exponentiating Lie-algebra directions at a base
/// point. Orthogonal actions preserve the base-point norm.
#[derive(Debug, Clone)]
pub struct OrbitSample {
    pub base_point: DVector<f64>,
    pub frame: Frame,
    pub points: DMatrix<f64>,
    pub coverage_radius: f64,
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index + 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const HALTON_BASES: [usize; 6] = [2, 3, 5, 7, 11, 13];

/// Deterministic low-discrepancy points in the unit ball of R^d. For
/// d = 1 opposite directions duplicate group elements, so a half-open
/// one-sided grid is used instead.
pub(crate) fn ball_points(d: usize, k: usize) -> Vec<DVector<f64>> {
    if d == 1 {
        return (0..k)
            .map(|i| DVector::from_vec(vec![i as f64 / k as f64]))
            .collect();
    }
    let mut out = Vec::with_capacity(k);
    let mut idx = 0;
    while out.len() < k {
        let t = DVector::from_fn(d, |c, _| 2.0 * halton(idx, HALTON_BASES[c]) - 1.0);
        if t.norm() <= 1.0 {
            out.push(t);
        }
        idx += 1;
    }
    out
}

/// `{exp(R Σ tᵢ Aᵢ)·x}` over a deterministic sample of the parameter ball.
pub fn sample_orbit(frame: &Frame, x: &DVector<f64>, k: usize, coverage_radius: f64) -> Result<OrbitSample> {
    if k == 0 {
        return Err(Error::EmptySample);
    }
    if x.norm() < 1e-14 {
        return Err(Error::Config("orbit base point is zero".into()));
    }
    if x.len() != frame.ambient() {
        return Err(Error::DimensionMismatch {
            expected: frame.ambient(),
            got: x.len(),
        });
    }
    let d = frame.count();
    let n = frame.ambient();
    let params = ball_points(d, k);
    let rows: Vec<DVector<f64>> = params
        .par_iter()
        .map(|t| {
            let mut a = DMatrix::zeros(n, n);
            for (i, mat) in frame.matrices().iter().enumerate() {
                a += mat * (coverage_radius * t[i]);
            }
            matrix_exponential_skew(&a) * x
        })
        .collect();
    let mut points = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        points.set_row(i, &r.transpose());
    }
    Ok(OrbitSample {
        base_point: x.clone(),
        frame: frame.clone(),
        points,
        coverage_radius,
    })
}

/// Period-aware coverage radius for a single normalized weight block:
/// `exp(t·B(k))` returns to the identity at t = 2π·√2·‖k‖.
pub fn so2_coverage_radius(weights: &[i64]) -> f64 {
    let norm_sq: f64 = weights.iter().map(|&k| (k * k) as f64).sum();
    2.0 * std::f64::consts::PI * (2.0 * norm_sq).sqrt()
}

/// Ball radius for su(2)-type frames: π over the fastest block rate of the
/// generators, with a 1.5 safety factor so the exponential surjects.
pub fn nonabelian_coverage_radius(frame: &Frame) -> f64 {
    let mut alpha_max = 0.0f64;
    for m in frame.matrices() {
        if let Ok(form) = skew_schur_form(m) {
            for r in form.block_rates {
                alpha_max = alpha_max.max(r);
            }
        }
    }
    if alpha_max <= 0.0 {
        return 0.0;
    }
    1.5 * std::f64::consts::PI / alpha_max
}

/// Orbit sample adapted to the fitted representation: exact periods for
/// the Abelian types, a safety-factor ball for su(2)/so(3).
pub fn sample_fitted_orbit(fit: &FitResult, x: &DVector<f64>, k: usize) -> Result<OrbitSample> {
    if k == 0 {
        return Err(Error::EmptySample);
    }
    let n = fit.conjugator.nrows();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    match &fit.rep {
        RepresentationType::So2(weights) => {
            let radius = so2_coverage_radius(weights);
            sample_orbit(&fit.fitted_frame, x, k, radius)
        }
        RepresentationType::Torus(rows) => {
            // Commuting generators with per-generator periods: sample the
            // product of fundamental intervals with a low-discrepancy set.
            let _d = rows.len();
            let gens: Vec<DMatrix<f64>> = rows
                .iter()
                .map(|r| {
                    &fit.conjugator * weight_block_matrix(r, n) * fit.conjugator.transpose()
                })
                .collect();
            let periods: Vec<f64> = rows.iter().map(|r| so2_coverage_radius(r)).collect();
            let rows_out: Vec<DVector<f64>> = (0..k)
                .into_par_iter()
                .map(|idx| {
                    let mut a = DMatrix::zeros(n, n);
                    for (i, g) in gens.iter().enumerate() {
                        let theta = halton(idx, HALTON_BASES[i]) * periods[i];
                        a += g * theta;
                    }
                    matrix_exponential_skew(&a) * x
                })
                .collect();
            let mut points = DMatrix::zeros(k, n);
            for (i, r) in rows_out.iter().enumerate() {
                points.set_row(i, &r.transpose());
            }
            Ok(OrbitSample {
                base_point: x.clone(),
                frame: fit.fitted_frame.clone(),
                points,
                coverage_radius: periods.iter().cloned().fold(0.0, f64::max),
                })
        }
        RepresentationType::Su2(parts) | RepresentationType::So3(parts) => {
            sample_orbit_su2_like(&fit.fitted_frame, parts, x, k)
        }
    }
}

/// Largest spin carried by the partition: (p−1)/2 for odd parts, (p−2)/4
/// for the quaternionic parts (multiples of four).
fn max_spin(parts: &[usize]) -> f64 {
    parts
        .iter()
        .map(|&p| {
            if p % 2 == 1 {
                (p as f64 - 1.0) / 2.0
            } else {
                (p as f64 - 2.0) / 4.0
            }
        })
        .fold(0.0, f64::max)
}

/// Deterministic Haar-uniform sample of an su(2)-type orbit: quaternions
/// from a low-discrepancy sequence are mapped through the fitted frame.
/// The frame is an orthogonal mixture of structure-constant generators,
/// so a uniform rotation axis stays uniform and only the spin scale
/// (largest block rate over largest spin) is needed.
pub fn sample_orbit_su2_like(
    frame: &Frame,
    parts: &[usize],
    x: &DVector<f64>,
    k: usize,
) -> Result<OrbitSample> {
    if k == 0 {
        return Err(Error::EmptySample);
    }
    if x.len() != frame.ambient() {
        return Err(Error::DimensionMismatch {
            expected: frame.ambient(),
            got: x.len(),
        });
    }
    let mut alpha_max = 0.0f64;
    for m in frame.matrices() {
        if let Ok(form) = skew_schur_form(m) {
            for r in form.block_rates {
                alpha_max = alpha_max.max(r);
            }
        }
    }
    if alpha_max <= 0.0 {
        return Err(Error::DegenerateEigenframe);
    }
    let scale = max_spin(parts).max(0.5) / alpha_max;
    let n = frame.ambient();
    let rows: Vec<DVector<f64>> = (0..k)
        .into_par_iter()
        .map(|idx| {
            let u1 = halton(idx, 2);
            let u2 = halton(idx, 3);
            let u3 = halton(idx, 5);
            // Uniform unit quaternion (scalar part first).
            let w = (1.0 - u1).sqrt() * (std::f64::consts::TAU * u2).sin();
            let v = [
                (1.0 - u1).sqrt() * (std::f64::consts::TAU * u2).cos(),
                u1.sqrt() * (std::f64::consts::TAU * u3).sin(),
                u1.sqrt() * (std::f64::consts::TAU * u3).cos(),
            ];
            let v_norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if v_norm < 1e-12 {
                return x.clone();
            }
            let alpha = w.clamp(-1.0, 1.0).acos();
            let mut a = DMatrix::zeros(n, n);
            for (i, m) in frame.matrices().iter().enumerate() {
                a += m * (2.0 * alpha * scale * v[i] / v_norm);
            }
            matrix_exponential_skew(&a) * x
        })
        .collect();
    let mut points = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        points.set_row(i, &r.transpose());
    }
    Ok(OrbitSample {
        base_point: x.clone(),
        frame: frame.clone(),
        points,
        coverage_radius: 2.0 * std::f64::consts::PI * scale,
    })
}

fn atomic_max(cell: &AtomicU64, value: f64) {
    let mut cur = cell.load(Ordering::Relaxed);
    loop {
        if f64::from_bits(cur) >= value {
            return;
        }
        match cell.compare_exchange_weak(cur, value.to_bits(), Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return,
            Err(v) => cur = v,
        }
    }
}

/// `sup_{a∈A} inf_{b∈B} ‖a − b‖`, exact over the finite rows of A and B.
pub fn hausdorff_one_sided(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    hausdorff_one_sided_bounded(a, b, f64::INFINITY)
}

/// One-sided Hausdorff with an early abort: rows whose best match falls
/// below the running supremum cannot contribute, and the whole scan stops
/// mattering once the supremum exceeds `abort_above`.
pub fn hausdorff_one_sided_bounded(a: &DMatrix<f64>, b: &DMatrix<f64>, abort_above: f64) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::EmptySet);
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let running = AtomicU64::new(0f64.to_bits());
    let dims = a.ncols();
    (0..a.nrows()).into_par_iter().for_each(|i| {
        let sup_so_far = f64::from_bits(running.load(Ordering::Relaxed));
        if sup_so_far > abort_above {
            return;
        }
        let floor_sq = sup_so_far * sup_so_far;
        let mut best = f64::INFINITY;
        for j in 0..b.nrows() {
            let mut dist_sq = 0.0;
            for c in 0..dims {
                let d = a[(i, c)] - b[(j, c)];
                dist_sq += d * d;
            }
            if dist_sq < best {
                best = dist_sq;
                if best <= floor_sq {
                    return; // cannot raise the supremum
                }
            }
        }
        atomic_max(&running, best.sqrt());
    });
    Ok(f64::from_bits(running.load(Ordering::Relaxed)))
}

pub fn hausdorff_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(hausdorff_one_sided(a, b)?.max(hausdorff_one_sided(b, a)?))
}

/// Finite point set with a probability weight per row.
#[derive(Debug, Clone)]
pub struct WeightedPoints {
    pub points: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl WeightedPoints {
    pub fn uniform(points: DMatrix<f64>) -> Self {
        let n = points.nrows();
        Self {
            points,
            weights: vec![1.0 / n as f64; n],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum W2Method {
    Exact,
    Sinkhorn { reg: f64 },
}

/// Wasserstein-2 distance between weighted point sets.
pub fn wasserstein2(a: &WeightedPoints, b: &WeightedPoints, method: W2Method) -> Result<f64> {
    for w in [&a.weights, &b.weights] {
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-8 || w.iter().any(|&x| x < 0.0) {
            return Err(Error::BadWeights { sum });
        }
    }
    if a.points.nrows() == 0 || b.points.nrows() == 0 {
        return Err(Error::EmptySet);
    }
    let cost = DMatrix::from_fn(a.points.nrows(), b.points.nrows(), |i, j| {
        let mut acc = 0.0;
        for c in 0..a.points.ncols() {
            let d = a.points[(i, c)] - b.points[(j, c)];
            acc += d * d;
        }
        acc
    });
    let value = match method {
        W2Method::Exact => transport::exact_transport_cost(&cost, &a.weights, &b.weights),
        W2Method::Sinkhorn { reg } => {
            transport::sinkhorn_transport_cost(&cost, &a.weights, &b.weights, reg)
        }
    };
    Ok(value.max(0.0).sqrt())
}

/// Median squared pairwise distance, the scale reference for the Sinkhorn
/// regularization.
pub fn median_squared_distance(cost_points_a: &DMatrix<f64>, cost_points_b: &DMatrix<f64>) -> f64 {
    let mut vals = Vec::with_capacity(cost_points_a.nrows() * cost_points_b.nrows());
    for i in 0..cost_points_a.nrows() {
        for j in 0..cost_points_b.nrows() {
            let mut acc = 0.0;
            for c in 0..cost_points_a.ncols() {
                let d = cost_points_a[(i, c)] - cost_points_b[(j, c)];
                acc += d * d;
            }
            vals.push(acc);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals[vals.len() / 2]
}

/// Uniform mixture of per-point orbit samples, `K` points each with
/// weight `1/(N·K)`.
pub fn average_orbit_measure(
    cloud: &PointCloud,
    frame: &Frame,
    per_point_k: usize,
    coverage_radius: f64,
) -> Result<WeightedPoints> {
    if per_point_k == 0 {
        return Err(Error::EmptySample);
    }
    let n = cloud.ambient();
    let total = cloud.len() * per_point_k;
    let mut points = DMatrix::zeros(total, n);
    for i in 0..cloud.len() {
        let sample = sample_orbit(frame, &cloud.point(i), per_point_k, coverage_radius)?;
        points
            .view_mut((i * per_point_k, 0), (per_point_k, n))
            .copy_from(&sample.points);
    }
    Ok(WeightedPoints::uniform(points))
}

/// Same mixture but with the representation-aware sampler of
/// `sample_fitted_orbit`.
pub fn average_fitted_orbit_measure(
    cloud: &PointCloud,
    fit: &FitResult,
    per_point_k: usize,
) -> Result<WeightedPoints> {
    if per_point_k == 0 {
        return Err(Error::EmptySample);
    }
    let n = cloud.ambient();
    let total = cloud.len() * per_point_k;
    let mut points = DMatrix::zeros(total, n);
    for i in 0..cloud.len() {
        let sample = sample_fitted_orbit(fit, &cloud.point(i), per_point_k)?;
        points
            .view_mut((i * per_point_k, 0), (per_point_k, n))
            .copy_from(&sample.points);
    }
    Ok(WeightedPoints::uniform(points))
}

/// Wasserstein-2 distance between the empirical cloud measure and the
/// averaged orbit measure of the fit, via entropic regularization at
/// 0.01 times the median squared distance.
pub fn orbit_measure_wasserstein(cloud: &PointCloud, fit: &FitResult) -> Result<f64> {
    let per_point = (2000 / cloud.len()).clamp(1, 50);
    let measure = average_fitted_orbit_measure(cloud, fit, per_point)?;
    let mu_x = WeightedPoints::uniform(cloud.points().clone());
    let reg = 0.01 * median_squared_distance(cloud.points(), &measure.points).max(1e-12);
    wasserstein2(&mu_x, &measure, W2Method::Sinkhorn { reg })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Success,
    NonTransitiveSuspected,
    Fail,
}

/// Empirical separation thresholds between orbits of non-equivalent
/// types on orthonormalized data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    pub one_sided: f64,
    pub symmetric: f64,
    /// The reverse direction stays informative up to this multiple of the
    /// one-sided threshold when the forward direction already failed.
    pub reverse_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            one_sided: 0.35,
            symmetric: 0.42,
            reverse_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasePointMode {
    First,
    Best,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub hausdorff_in_to_orbit: f64,
    pub hausdorff_orbit_to_in: f64,
    pub hausdorff_symmetric: f64,
    pub wasserstein2: Option<f64>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    pub base_point_index: usize,
    pub orbit_sample_count: usize,
}

/// Reconstruct the fitted orbit and score it against the cloud. Only
/// orthonormalized clouds are accepted: the thresholds are calibrated in
/// that normalization.
pub fn verify(
    cloud: &PointCloud,
    fit: &FitResult,
    base_mode: BasePointMode,
    k: usize,
    compute_w2: bool,
) -> Result<VerificationReport> {
    verify_with_thresholds(cloud, fit, base_mode, k, compute_w2, Thresholds::default())
}

pub fn verify_with_thresholds(
    cloud: &PointCloud,
    fit: &FitResult,
    base_mode: BasePointMode,
    k: usize,
    compute_w2: bool,
    thresholds: Thresholds,
) -> Result<VerificationReport> {
    if cloud.stage() != Stage::Orthonormalized {
        return Err(Error::Config(
            "verification thresholds apply to orthonormalized clouds only".into(),
        ));
    }
    let indices: Vec<usize> = match base_mode {
        BasePointMode::First => vec![0],
        BasePointMode::Best => (0..cloud.len()).collect(),
    };
    let mut best: Option<(usize, f64, OrbitSample)> = None;
    for &i in &indices {
        let orbit = sample_fitted_orbit(fit, &cloud.point(i), k)?;
        let bound = best.as_ref().map_or(f64::INFINITY, |(_, b, _)| *b);
        let hd = hausdorff_one_sided_bounded(cloud.points(), &orbit.points, bound)?;
        if best.as_ref().map_or(true, |(_, b, _)| hd < *b) {
            best = Some((i, hd, orbit));
        }
    }
    let (base_index, hd_in, orbit) = best.expect("at least one base point");
    let hd_out = hausdorff_one_sided(&orbit.points, cloud.points())?;
    let wasserstein = if compute_w2 {
        Some(orbit_measure_wasserstein(cloud, fit)?)
    } else {
        None
    };
    let verdict = if hd_in < thresholds.one_sided {
        Verdict::Success
    } else if hd_out < thresholds.one_sided * thresholds.reverse_factor {
        Verdict::NonTransitiveSuspected
    } else {
        Verdict::Fail
    };
    Ok(VerificationReport {
        hausdorff_in_to_orbit: hd_in,
        hausdorff_orbit_to_in: hd_out,
        hausdorff_symmetric: hd_in.max(hd_out),
        wasserstein2: wasserstein,
        verdict,
        thresholds,
        base_point_index: base_index,
        orbit_sample_count: k,
    })
}

//! Matching the estimated symmetry directions against the catalog: a
//! projected gradient descent on the orthogonal group for the general
//! case, and closed-form reductions for SO(2) and T^d.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie_pca::LiePcaOperator;
use crate::matrix_kernel::{frobenius_inner, skew_schur_form, Frame};
use crate::rep_catalog::{
    assemble_frame, enumerate_partition_types, enumerate_so2_types, enumerate_torus_types, Group,
    RepresentationType,
};

/// A representation type together with its block-diagonal model frame.
#[derive(Debug, Clone)]
pub struct FitCandidate {
    pub rep: RepresentationType,
    pub base_frame: Frame,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub rep: RepresentationType,
    pub conjugator: DMatrix<f64>,
    pub cost: f64,
    pub fitted_frame: Frame,
    /// Best cost per tested type, ascending.
    pub all_costs: Vec<(RepresentationType, f64)>,
    /// Whether the winning optimization met the gradient tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub enum StepRule {
    Fixed(f64),
    Backtracking {
        initial: f64,
        shrink: f64,
        armijo: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptimizerConfig {
    /// Random restarts per connected component of O(n).
    pub restarts: usize,
    pub max_iters: usize,
    pub gradient_tol: f64,
    pub step: StepRule,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 400,
            gradient_tol: 1e-7,
            step: StepRule::Backtracking {
                initial: 1.0,
                shrink: 0.5,
                armijo: 1e-4,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitMode {
    Stiefel,
    Grassmann,
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub mode: FitMode,
    pub w_max: i64,
    pub so2_allow_zero: bool,
    pub so2_distinct_only: bool,
}

impl FitOptions {
    pub fn new(w_max: i64) -> Self {
        Self {
            mode: FitMode::Auto,
            w_max,
            so2_allow_zero: false,
            so2_distinct_only: true,
        }
    }
}

/// Σ_j ‖Λ(O B_j Oᵀ)‖² over the candidate frame. Invariant under right
/// multiplication of the frame by any orthogonal matrix.
pub fn cost_stiefel(op: &LiePcaOperator, candidate: &FitCandidate, o: &DMatrix<f64>) -> f64 {
    candidate
        .base_frame
        .matrices()
        .iter()
        .map(|b| op.image_norm_squared(&(o * b * o.transpose())))
        .sum()
}

/// Euclidean gradient of `cost_stiefel` with respect to O.
pub fn grad_stiefel(op: &LiePcaOperator, candidate: &FitCandidate, o: &DMatrix<f64>) -> DMatrix<f64> {
    let n = op.ambient();
    let mat = op.matrix();
    let mut grad = DMatrix::zeros(n, n);
    for b in candidate.base_frame.matrices() {
        let c = o * b * o.transpose();
        let v = mat * crate::lie_pca::flatten(&c);
        let g = crate::lie_pca::unflatten(&(mat * v), n);
        grad += (&g * o * b.transpose() + g.transpose() * o * b) * 2.0;
    }
    grad
}

/// Squared projection distance between the span of the (orthonormal)
/// bottom frame and the conjugated candidate span:
/// `2d − 2 Σ_{ij} ⟨A_i, O B_j Oᵀ⟩²`.
pub fn cost_grassmann(bottom: &Frame, candidate: &FitCandidate, o: &DMatrix<f64>) -> f64 {
    let d = bottom.count() as f64;
    let mut overlap = 0.0;
    for a in bottom.matrices() {
        for b in candidate.base_frame.matrices() {
            let s = frobenius_inner(a, &(o * b * o.transpose()));
            overlap += s * s;
        }
    }
    (2.0 * d - 2.0 * overlap).max(0.0)
}

pub fn grad_grassmann(bottom: &Frame, candidate: &FitCandidate, o: &DMatrix<f64>) -> DMatrix<f64> {
    let n = bottom.ambient();
    let mut grad = DMatrix::zeros(n, n);
    for a in bottom.matrices() {
        for b in candidate.base_frame.matrices() {
            let s = frobenius_inner(a, &(o * b * o.transpose()));
            grad += (a * o * b.transpose() + a.transpose() * o * b) * (-4.0 * s);
        }
    }
    grad
}

fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Q factor of the QR decomposition with positive diagonal of R; retracts
/// an ambient step back onto the orthogonal group without leaving the
/// current connected component.
pub fn qr_retract(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            let col = -q.column(i);
            q.set_column(i, &col);
        }
    }
    q
}

pub fn random_orthogonal(n: usize, det_sign: f64, rng: &mut StdRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut q = qr_retract(&g);
    if q.determinant() * det_sign < 0.0 {
        let col = -q.column(0);
        q.set_column(0, &col);
    }
    q
}

/// Projected gradient descent on O(n) over both connected components,
/// best result over all restarts. Deterministic for a fixed seed.
pub fn optimize_orthogonal(
    cost: &(dyn Fn(&DMatrix<f64>) -> f64 + Sync),
    grad: &(dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Sync),
    n: usize,
    config: &OptimizerConfig,
) -> Result<(DMatrix<f64>, f64, bool)> {
    let mut best: Option<(DMatrix<f64>, f64, bool)> = None;
    let mut rng = StdRng::seed_from_u64(config.seed);
    for &det_sign in &[1.0f64, -1.0] {
        for restart in 0..config.restarts.max(1) {
            let start = if restart == 0 {
                let mut eye = DMatrix::identity(n, n);
                if det_sign < 0.0 {
                    eye[(0, 0)] = -1.0;
                }
                eye
            } else {
                random_orthogonal(n, det_sign, &mut rng)
            };
            let (o, c, converged) = descend(cost, grad, start, config)?;
            let better = match &best {
                None => true,
                Some((_, bc, _)) => c < *bc,
            };
            if better {
                best = Some((o, c, converged));
            }
        }
    }
    Ok(best.expect("at least one restart runs"))
}

fn descend(
    cost: &(dyn Fn(&DMatrix<f64>) -> f64 + Sync),
    grad: &(dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Sync),
    start: DMatrix<f64>,
    config: &OptimizerConfig,
) -> Result<(DMatrix<f64>, f64, bool)> {
    let mut o = start;
    let mut c = cost(&o);
    if !c.is_finite() {
        return Err(Error::OptimizerDiverged);
    }
    let mut converged = false;
    for _ in 0..config.max_iters {
        let g = grad(&o);
        let rgrad = &o * skew_part(&(o.transpose() * &g));
        let gnorm_sq = rgrad.norm_squared();
        if gnorm_sq.sqrt() <= config.gradient_tol {
            converged = true;
            break;
        }
        match config.step {
            StepRule::Fixed(t) => {
                let next = qr_retract(&(&o - &rgrad * t));
                let cn = cost(&next);
                if !cn.is_finite() {
                    return Err(Error::OptimizerDiverged);
                }
                o = next;
                c = cn;
            }
            StepRule::Backtracking {
                initial,
                shrink,
                armijo,
            } => {
                let mut t = initial;
                let mut accepted = false;
                while t > 1e-16 {
                    let next = qr_retract(&(&o - &rgrad * t));
                    let cn = cost(&next);
                    if !cn.is_finite() {
                        return Err(Error::OptimizerDiverged);
                    }
                    if cn <= c - armijo * t * gnorm_sq {
                        o = next;
                        c = cn;
                        accepted = true;
                        break;
                    }
                    t *= shrink;
                }
                if !accepted {
                    // No descent direction at line-search resolution.
                    converged = true;
                    break;
                }
            }
        }
    }
    Ok((o, c, converged))
}

/// Candidate list for a group in ambient dimension n.
pub fn candidates(group: Group, n: usize, opts: &FitOptions) -> Result<Vec<FitCandidate>> {
    if n == 0 {
        return Err(Error::EmptyAmbient);
    }
    let types = match group {
        Group::So2 => {
            let m = n / 2;
            if m == 0 {
                return Err(Error::EmptyAmbient);
            }
            enumerate_so2_types(m, opts.w_max, opts.so2_allow_zero, opts.so2_distinct_only)?
        }
        Group::Torus(d) => {
            let m = n / 2;
            enumerate_torus_types(m, d, opts.w_max)?
        }
        Group::Su2 => enumerate_partition_types(Group::Su2, n, true)?,
        Group::So3 => enumerate_partition_types(Group::So3, n, true)?,
    };
    if types.is_empty() {
        return Err(Error::NoCandidates);
    }
    types
        .into_iter()
        .map(|rep| {
            let base_frame = assemble_frame(&rep, n)?;
            Ok(FitCandidate { rep, base_frame })
        })
        .collect()
}

fn sort_costs(all: &mut Vec<(RepresentationType, f64)>) {
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
}

/// Closed-form matching for SO(2): reduce the bottom eigen-matrix to its
/// block normal form and compare normalized rate vectors against each
/// weight tuple; the reducing rotation is the optimal conjugator.
pub fn fit_so2_closed_form_ranked(
    bottom_matrix: &DMatrix<f64>,
    types: &[RepresentationType],
) -> Result<(Vec<RankedFit>, Vec<(RepresentationType, f64)>)> {
    if types.is_empty() {
        return Err(Error::NoCandidates);
    }
    let norm = bottom_matrix.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateEigenframe);
    }
    let unit = bottom_matrix / norm;
    let form = skew_schur_form(&unit)?;
    let alpha = &form.block_rates;
    let alpha_norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    if alpha_norm < 1e-12 {
        return Err(Error::DegenerateEigenframe);
    }
    let mut all = Vec::with_capacity(types.len());
    for rep in types {
        let RepresentationType::So2(weights) = rep else {
            return Err(Error::Config("SO(2) closed form expects SO(2) types".into()));
        };
        if weights.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: weights.len(),
            });
        }
        let w_norm = weights.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
        let f: f64 = alpha
            .iter()
            .zip(weights.iter())
            .map(|(&a, &k)| {
                let diff = a / alpha_norm - k as f64 / w_norm;
                diff * diff
            })
            .sum();
        all.push((rep.clone(), f));
    }
    sort_costs(&mut all);
    let ranked = all
        .iter()
        .map(|(rep, cost)| RankedFit {
            rep: rep.clone(),
            conjugator: form.rotation.clone(),
            cost: *cost,
            converged: true,
        })
        .collect();
    Ok((ranked, all))
}

/// Closed-form matching for SO(2); see `fit_so2_closed_form_ranked` for
/// the full candidate ranking.
pub fn fit_so2_closed_form(
    bottom_matrix: &DMatrix<f64>,
    types: &[RepresentationType],
) -> Result<FitResult> {
    let (mut ranked, all) = fit_so2_closed_form_ranked(bottom_matrix, types)?;
    ranked.remove(0).into_fit_result(bottom_matrix.nrows(), all)
}

/// Off-block-diagonal residual of a skew matrix: everything outside the
/// m 2×2 diagonal blocks.
fn off_block(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for a in 0..n / 2 {
        out[(2 * a, 2 * a + 1)] = 0.0;
        out[(2 * a + 1, 2 * a)] = 0.0;
    }
    for i in 0..n {
        out[(i, i)] = 0.0;
    }
    out
}

fn block_rates(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows() / 2).map(|a| m[(2 * a + 1, 2 * a)]).collect()
}

/// n×n orthogonal matrix performing a signed permutation at block level:
/// block `σ(a)` moves to slot `a`, with an in-block reflection for a sign
/// flip.
fn block_signed_permutation(n: usize, perm: &[usize], signs: &[i64]) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(n, n);
    for (a, &src) in perm.iter().enumerate() {
        r[(2 * a, 2 * src)] = 1.0;
        r[(2 * a + 1, 2 * src + 1)] = if signs[a] < 0 { -1.0 } else { 1.0 };
    }
    if n % 2 == 1 {
        r[(n - 1, n - 1)] = 1.0;
    }
    r
}

/// Closed-form route for T^d: simultaneously reduce the bottom frame to
/// 2×2 block form, read one rate vector per frame element, and pick the
/// lattice whose span matches the rate span best over all signed axis
/// permutations.
pub fn fit_torus_closed_form_ranked(
    bottom: &Frame,
    types: &[RepresentationType],
    config: &OptimizerConfig,
) -> Result<(Vec<RankedFit>, Vec<(RepresentationType, f64)>)> {
    if types.is_empty() {
        return Err(Error::NoCandidates);
    }
    let d = bottom.count();
    let n = bottom.ambient();
    let m = n / 2;
    if m < d {
        return Err(Error::NoAlmostFaithfulRep { rank: d, max: m });
    }
    let mats: Vec<DMatrix<f64>> = bottom.matrices().to_vec();
    let cost = move |o: &DMatrix<f64>| -> f64 {
        mats.iter()
            .map(|a| off_block(&(o * a * o.transpose())).norm_squared())
            .sum()
    };
    let mats2: Vec<DMatrix<f64>> = bottom.matrices().to_vec();
    let grad = move |o: &DMatrix<f64>| -> DMatrix<f64> {
        let mut g = DMatrix::zeros(n, n);
        for a in &mats2 {
            let p = off_block(&(o * a * o.transpose()));
            g += (&p * o * a.transpose() + p.transpose() * o * a) * 2.0;
        }
        g
    };
    let (o_star, residual, _) = optimize_orthogonal(&cost, &grad, n, config)?;
    if residual / d as f64 > 0.5 {
        return Err(Error::NonReducibleFrame { residual });
    }

    // Rate vectors, one per frame element, with a shared block order.
    let rho: Vec<Vec<f64>> = bottom
        .matrices()
        .iter()
        .map(|a| block_rates(&(&o_star * a * o_star.transpose())))
        .collect();
    let u = orthonormal_columns(&rho, m, d).ok_or(Error::DegenerateEigenframe)?;

    let perms = crate::rep_catalog::lattice::signed_permutations(m);
    let mut all = Vec::with_capacity(types.len());
    let mut winners: Vec<(RepresentationType, f64, DMatrix<f64>)> = Vec::new();
    for rep in types {
        let RepresentationType::Torus(rows) = rep else {
            return Err(Error::Config("torus closed form expects torus types".into()));
        };
        let rows_f: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&k| k as f64).collect())
            .collect();
        let v = orthonormal_columns(&rows_f, m, d).ok_or(Error::DegenerateEigenframe)?;
        let mut best_score = f64::INFINITY;
        let mut best_perm = 0usize;
        for (pi, g) in perms.iter().enumerate() {
            // Row-permute and sign-flip V, then compare spans.
            let mut vg = DMatrix::zeros(m, d);
            for a in 0..m {
                for c in 0..d {
                    vg[(a, c)] = (g.signs[a] as f64) * v[(g.perm[a], c)];
                }
            }
            let overlap = (u.transpose() * vg).norm_squared();
            let score = (2.0 * d as f64 - 2.0 * overlap).max(0.0);
            if score < best_score {
                best_score = score;
                best_perm = pi;
            }
        }
        let g = &perms[best_perm];
        let conjugator = o_star.transpose() * block_signed_permutation(n, &g.perm, &g.signs);
        let candidate = FitCandidate {
            rep: rep.clone(),
            base_frame: assemble_frame(rep, n)?,
        };
        let cost_val = cost_grassmann(bottom, &candidate, &conjugator);
        all.push((rep.clone(), cost_val));
        winners.push((rep.clone(), cost_val, conjugator));
    }
    winners.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    sort_costs(&mut all);
    let ranked = winners
        .into_iter()
        .map(|(rep, cost, conjugator)| RankedFit {
            rep,
            conjugator,
            cost,
            converged: true,
        })
        .collect();
    Ok((ranked, all))
}

/// Closed-form route for T^d; see `fit_torus_closed_form_ranked` for the
/// full candidate ranking.
pub fn fit_torus_closed_form(
    bottom: &Frame,
    types: &[RepresentationType],
    config: &OptimizerConfig,
) -> Result<FitResult> {
    let (mut ranked, all) = fit_torus_closed_form_ranked(bottom, types, config)?;
    ranked.remove(0).into_fit_result(bottom.ambient(), all)
}

/// Orthonormalized m×d column matrix from d row vectors of length m.
fn orthonormal_columns(rows: &[Vec<f64>], m: usize, d: usize) -> Option<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != m) {
        return None;
    }
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(d);
    for r in rows {
        let mut v = nalgebra::DVector::from_vec(r.clone());
        for prev in &cols {
            let c = prev.dot(&v);
            v -= prev * c;
        }
        let norm = v.norm();
        if norm < 1e-10 {
            return None;
        }
        cols.push(v / norm);
    }
    let mut out = DMatrix::zeros(m, d);
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    Some(out)
}

pub enum FitInput<'a> {
    Operator(&'a LiePcaOperator),
    BottomFrame(&'a Frame),
}

/// Per-candidate outcome of a fit, before a winner is chosen.
#[derive(Debug, Clone)]
pub struct RankedFit {
    pub rep: RepresentationType,
    pub conjugator: DMatrix<f64>,
    pub cost: f64,
    pub converged: bool,
}

impl RankedFit {
    pub fn into_fit_result(self, n: usize, all_costs: Vec<(RepresentationType, f64)>) -> Result<FitResult> {
        let fitted_frame = assemble_frame(&self.rep, n)?.conjugated(&self.conjugator);
        Ok(FitResult {
            rep: self.rep,
            conjugator: self.conjugator,
            cost: self.cost,
            fitted_frame,
            all_costs,
            converged: self.converged,
        })
    }
}

fn extract_bottom(input: &FitInput, d: usize) -> Result<Frame> {
    match input {
        // Orthonormalized data carries a skew symmetry algebra, so the
        // compressed eigenvectors are the cleaner estimate.
        FitInput::Operator(op) => op.bottom_frame_skew(d),
        FitInput::BottomFrame(f) => {
            if f.count() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: f.count(),
                });
            }
            f.orthonormalized()
        }
    }
}

/// Route the fit: closed forms for the Abelian groups, gradient descent
/// over O(n) per candidate otherwise.
pub fn fit(
    input: FitInput,
    group: Group,
    n: usize,
    opts: &FitOptions,
    optimizer: &OptimizerConfig,
) -> Result<FitResult> {
    let (mut ranked, all) = fit_ranked(input, group, n, opts, optimizer)?;
    ranked.remove(0).into_fit_result(n, all)
}

/// Every candidate with its own optimal conjugator, cheapest first.
pub fn fit_ranked(
    input: FitInput,
    group: Group,
    n: usize,
    opts: &FitOptions,
    optimizer: &OptimizerConfig,
) -> Result<(Vec<RankedFit>, Vec<(RepresentationType, f64)>)> {
    let mode = match opts.mode {
        FitMode::Auto => match group {
            Group::So2 | Group::Torus(_) => FitMode::Grassmann,
            Group::Su2 | Group::So3 => FitMode::Stiefel,
        },
        m => m,
    };
    match (group, mode) {
        (Group::So2, FitMode::Grassmann) => {
            let frame = extract_bottom(&input, 1)?;
            let types: Vec<RepresentationType> = candidates(group, n, opts)?
                .into_iter()
                .map(|c| c.rep)
                .collect();
            fit_so2_closed_form_ranked(&frame.matrices()[0], &types)
        }
        (Group::Torus(d), FitMode::Grassmann) => {
            let frame = extract_bottom(&input, d)?;
            let types: Vec<RepresentationType> = candidates(group, n, opts)?
                .into_iter()
                .map(|c| c.rep)
                .collect();
            fit_torus_closed_form_ranked(&frame, &types, optimizer)
        }
        (_, FitMode::Grassmann) => {
            let frame = extract_bottom(&input, group.lie_dimension())?;
            fit_by_descent(group, n, opts, optimizer, move |cand, cfg| {
                let f = frame.clone();
                let cand2 = cand.clone();
                let cost = move |o: &DMatrix<f64>| cost_grassmann(&f, &cand2, o);
                let f2 = frame.clone();
                let cand3 = cand.clone();
                let grad = move |o: &DMatrix<f64>| grad_grassmann(&f2, &cand3, o);
                optimize_orthogonal(&cost, &grad, n, cfg)
            })
        }
        (_, FitMode::Stiefel) => {
            let FitInput::Operator(op) = input else {
                return Err(Error::Config(
                    "cost minimization over the operator requires the full operator".into(),
                ));
            };
            fit_by_descent(group, n, opts, optimizer, move |cand, cfg| {
                let cand2 = cand.clone();
                let cost = move |o: &DMatrix<f64>| cost_stiefel(op, &cand2, o);
                let cand3 = cand.clone();
                let grad = move |o: &DMatrix<f64>| grad_stiefel(op, &cand3, o);
                optimize_orthogonal(&cost, &grad, n, cfg)
            })
        }
        (_, FitMode::Auto) => unreachable!(),
    }
}

fn fit_by_descent<F>(
    group: Group,
    n: usize,
    opts: &FitOptions,
    optimizer: &OptimizerConfig,
    run: F,
) -> Result<(Vec<RankedFit>, Vec<(RepresentationType, f64)>)>
where
    F: Fn(&FitCandidate, &OptimizerConfig) -> Result<(DMatrix<f64>, f64, bool)> + Sync,
{
    let cands = candidates(group, n, opts)?;
    let results: Vec<Result<(DMatrix<f64>, f64, bool)>> = cands
        .par_iter()
        .enumerate()
        .map(|(idx, cand)| {
            let mut cfg = *optimizer;
            cfg.seed = optimizer
                .seed
                .wrapping_add((idx as u64).wrapping_mul(0x9E3779B97F4A7C15));
            run(cand, &cfg)
        })
        .collect();
    let mut ranked = Vec::with_capacity(cands.len());
    let mut all = Vec::with_capacity(cands.len());
    for (idx, r) in results.into_iter().enumerate() {
        let (o, c, conv) = r?;
        all.push((cands[idx].rep.clone(), c));
        ranked.push(RankedFit {
            rep: cands[idx].rep.clone(),
            conjugator: o,
            cost: c,
            converged: conv,
        });
    }
    if ranked.is_empty() {
        return Err(Error::NoCandidates);
    }
    ranked.sort_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap());
    sort_costs(&mut all);
    Ok((ranked, all))
}

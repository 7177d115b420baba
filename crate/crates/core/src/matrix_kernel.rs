//! Dense-matrix primitives shared by the rest of the crate: symmetric
//! eigendecomposition, skew-symmetric normal form, matrix exponential,
//! pseudo-inverse square root, and subspace distances between frames.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Frobenius inner product `tr(A Bᵀ) = Σ a_ij b_ij`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Dense symmetric operator. Construction symmetrizes the input and
/// rejects non-finite entries.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    mat: DMatrix<f64>,
}

impl SymmetricOperator {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix);
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        Ok(Self { mat: sym })
    }

    pub fn dimension(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }
}

/// Eigendecomposition of a symmetric operator with eigenvalues sorted
/// ascending and matching orthonormal eigenvector columns.
pub fn symmetric_eigendecomposition(op: &SymmetricOperator) -> (Vec<f64>, DMatrix<f64>) {
    sorted_symmetric_eigen(op.matrix())
}

pub(crate) fn sorted_symmetric_eigen(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Normal form of a skew-symmetric matrix: an orthogonal `rotation` P and
/// non-negative ascending `block_rates` (α₁,…,α_m) with
/// `P · diag(L(α₁),…,L(α_m)[,0]) · Pᵀ` reconstructing the input, where
/// `L(α) = [[0,−α],[α,0]]`. Odd dimensions carry a trailing zero row/column.
#[derive(Debug, Clone)]
pub struct SkewNormalForm {
    pub rotation: DMatrix<f64>,
    pub block_rates: Vec<f64>,
    pub residual_zero: bool,
}

impl SkewNormalForm {
    /// The block-diagonal matrix `diag(L(α₁),…,L(α_m)[,0])`.
    pub fn block_form(&self) -> DMatrix<f64> {
        let m = self.block_rates.len();
        let n = 2 * m + usize::from(self.residual_zero);
        let mut b = DMatrix::zeros(n, n);
        for (i, &a) in self.block_rates.iter().enumerate() {
            b[(2 * i, 2 * i + 1)] = -a;
            b[(2 * i + 1, 2 * i)] = a;
        }
        b
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.rotation * self.block_form() * self.rotation.transpose()
    }
}

/// Reduce a skew-symmetric matrix to its canonical 2×2 block form by
/// diagonalizing `−A²` and pairing eigenvectors into invariant planes.
pub fn skew_schur_form(a: &DMatrix<f64>) -> Result<SkewNormalForm> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix);
    }
    let residual = (a + a.transpose()).norm();
    if residual > 1e-10 * (1.0 + a.norm()) {
        return Err(Error::NotSkewSymmetric { residual });
    }
    let skew = (a - a.transpose()) * 0.5;

    // -A² is symmetric PSD with eigenvalues α² in pairs.
    let minus_a2 = -(&skew * &skew);
    let (values, vectors) = sorted_symmetric_eigen(&minus_a2);
    let scale = values.last().copied().unwrap_or(0.0).max(0.0);
    let zero_tol = 1e-12 * (1.0 + scale);
    let cluster_tol = 1e-9 * (1.0 + scale);

    // Group near-equal eigenvalues so degenerate planes are paired inside
    // one invariant eigenspace.
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some((rep, idxs)) if (v - *rep).abs() <= cluster_tol => idxs.push(i),
            _ => clusters.push((v, vec![i])),
        }
    }

    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut kernel: Vec<DVector<f64>> = Vec::new();
    for (rep, idxs) in clusters {
        if rep <= zero_tol {
            for &i in &idxs {
                kernel.push(vectors.column(i).into_owned());
            }
            continue;
        }
        let alpha = rep.sqrt();
        // Peel orthonormal (u, Au/α) pairs off the eigenspace.
        let mut basis: Vec<DVector<f64>> = idxs.iter().map(|&i| vectors.column(i).into_owned()).collect();
        while let Some(u) = basis.pop() {
            let u = {
                let norm = u.norm();
                if norm < 1e-8 {
                    continue;
                }
                u / norm
            };
            let v = (&skew * &u) / alpha;
            let v = {
                let v = &v - &u * u.dot(&v);
                let norm = v.norm();
                if norm < 1e-8 {
                    continue;
                }
                v / norm
            };
            pairs.push((alpha, u.clone(), v.clone()));
            for w in basis.iter_mut() {
                *w -= &u * u.dot(w);
                *w -= &v * v.dot(w);
            }
            basis.retain(|w| w.norm() > 1e-8);
            for k in 0..basis.len() {
                let mut w = basis[k].clone();
                for prev in basis.iter().take(k) {
                    w -= prev * prev.dot(&w);
                }
                let norm = w.norm();
                basis[k] = if norm > 1e-8 { w / norm } else { DVector::zeros(n) };
            }
            basis.retain(|w| w.norm() > 0.5);
        }
    }

    // Kernel vectors form zero-rate blocks; odd dimension leaves one out.
    let mut kit = kernel.into_iter();
    loop {
        match (kit.next(), kit.next()) {
            (Some(u), Some(v)) => pairs.push((0.0, u, v)),
            (Some(u), None) => {
                pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                let mut rotation = DMatrix::zeros(n, n);
                let mut rates = Vec::with_capacity(pairs.len());
                for (i, (alpha, pu, pv)) in pairs.iter().enumerate() {
                    rates.push(*alpha);
                    rotation.set_column(2 * i, pu);
                    rotation.set_column(2 * i + 1, pv);
                }
                rotation.set_column(n - 1, &u);
                return Ok(SkewNormalForm {
                    rotation,
                    block_rates: rates,
                    residual_zero: true,
                });
            }
            (None, _) => break,
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut rotation = DMatrix::zeros(n, n);
    let mut rates = Vec::with_capacity(pairs.len());
    for (i, (alpha, pu, pv)) in pairs.iter().enumerate() {
        rates.push(*alpha);
        rotation.set_column(2 * i, pu);
        rotation.set_column(2 * i + 1, pv);
    }
    Ok(SkewNormalForm {
        rotation,
        block_rates: rates,
        residual_zero: false,
    })
}

/// Matrix exponential of a skew-symmetric matrix by scaling and squaring
/// with a truncated series on the scaled matrix.
pub fn matrix_exponential_skew(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=16 {
        term = (&term * &scaled) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Square root of the Moore–Penrose pseudo-inverse: acts as λ^(−1/2) on
/// eigenvectors with eigenvalue above `rank_threshold` and as zero below.
pub fn pseudo_inverse_sqrt(s: &SymmetricOperator, rank_threshold: f64) -> Result<SymmetricOperator> {
    let (values, vectors) = symmetric_eigendecomposition(s);
    if let Some(&min) = values.first() {
        if min < -1e-8 {
            return Err(Error::NotPSD { eigenvalue: min });
        }
    }
    let n = s.dimension();
    let mut out = DMatrix::zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        if v > rank_threshold {
            let col = vectors.column(i);
            out += col * col.transpose() / v.sqrt();
        }
    }
    SymmetricOperator::new(out)
}

/// An ordered tuple of skew-symmetric matrices of a common ambient
/// dimension. Construction skew-symmetrizes each entry exactly.
#[derive(Debug, Clone)]
pub struct Frame {
    mats: Vec<DMatrix<f64>>,
}

impl Frame {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::EmptySet);
        }
        let n = mats[0].nrows();
        for m in &mats {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows().max(m.ncols()),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMatrix);
            }
        }
        let mats = mats.into_iter().map(|m| (&m - m.transpose()) * 0.5).collect();
        Ok(Self { mats })
    }

    pub fn count(&self) -> usize {
        self.mats.len()
    }

    pub fn ambient(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.count();
        DMatrix::from_fn(d, d, |i, j| frobenius_inner(&self.mats[i], &self.mats[j]))
    }

    /// Gram–Schmidt in the Frobenius inner product.
    pub fn orthonormalized(&self) -> Result<Frame> {
        let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(self.count());
        for m in &self.mats {
            let mut w = m.clone();
            for prev in &out {
                let c = frobenius_inner(prev, &w);
                w -= prev * c;
            }
            let norm = w.norm();
            if norm < 1e-10 * (1.0 + m.norm()) {
                return Err(Error::DegenerateEigenframe);
            }
            out.push(w / norm);
        }
        Ok(Frame { mats: out })
    }

    /// Componentwise conjugation `(O A₁ Oᵀ, …, O A_d Oᵀ)`.
    pub fn conjugated(&self, o: &DMatrix<f64>) -> Frame {
        Frame {
            mats: self.mats.iter().map(|a| o * a * o.transpose()).collect(),
        }
    }

    /// Right multiplication by a d×d matrix, mixing the frame inside its span.
    pub fn right_multiplied(&self, p: &DMatrix<f64>) -> Frame {
        let d = self.count();
        assert_eq!(p.nrows(), d);
        let mats = (0..p.ncols())
            .map(|j| {
                let mut acc = DMatrix::zeros(self.ambient(), self.ambient());
                for i in 0..d {
                    acc += &self.mats[i] * p[(i, j)];
                }
                acc
            })
            .collect();
        Frame { mats }
    }
}

/// Distance `‖Π_span(A) − Π_span(B)‖` between the spans of two orthonormal
/// frames, evaluated through pairwise Frobenius inner products.
pub fn grassmann_distance(frame_a: &Frame, frame_b: &Frame) -> Result<f64> {
    if frame_a.ambient() != frame_b.ambient() {
        return Err(Error::DimensionMismatch {
            expected: frame_a.ambient(),
            got: frame_b.ambient(),
        });
    }
    if frame_a.count() != frame_b.count() {
        return Err(Error::DimensionMismatch {
            expected: frame_a.count(),
            got: frame_b.count(),
        });
    }
    Ok(grassmann_distance_squared(frame_a, frame_b)?.sqrt())
}

/// Squared projection distance `2d − 2Σ_{ij} ⟨A_i, B_j⟩²`.
pub fn grassmann_distance_squared(frame_a: &Frame, frame_b: &Frame) -> Result<f64> {
    if frame_a.ambient() != frame_b.ambient() || frame_a.count() != frame_b.count() {
        return Err(Error::DimensionMismatch {
            expected: frame_a.ambient() * frame_a.count(),
            got: frame_b.ambient() * frame_b.count(),
        });
    }
    let d = frame_a.count() as f64;
    let mut overlap = 0.0;
    for a in frame_a.matrices() {
        for b in frame_b.matrices() {
            let s = frobenius_inner(a, b);
            overlap += s * s;
        }
    }
    Ok((2.0 * d - 2.0 * overlap).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_matrix(n: usize, rng: &mut StdRng) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    pub(crate) fn random_skew(n: usize, rng: &mut StdRng) -> DMatrix<f64> {
        let m = random_matrix(n, rng);
        (&m - m.transpose()) * 0.5
    }

    pub(crate) fn random_orthogonal(n: usize, rng: &mut StdRng) -> DMatrix<f64> {
        let qr = random_matrix(n, rng).qr();
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

    fn block_l(rates: &[f64]) -> DMatrix<f64> {
        let n = 2 * rates.len();
        let mut b = DMatrix::zeros(n, n);
        for (i, &a) in rates.iter().enumerate() {
            b[(2 * i, 2 * i + 1)] = -a;
            b[(2 * i + 1, 2 * i)] = a;
        }
        b
    }

    #[test]
    fn eigendecomposition_identity() {
        let op = SymmetricOperator::new(DMatrix::identity(3, 3)).unwrap();
        let (values, _) = symmetric_eigendecomposition(&op);
        for v in values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigendecomposition_diagonal() {
        let op = SymmetricOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0]))).unwrap();
        let (values, vectors) = symmetric_eigendecomposition(&op);
        assert!((values[0] - 0.0).abs() < 1e-12 && (values[1] - 2.0).abs() < 1e-12);
        assert!(vectors.column(0)[0].abs() > 0.99);
        assert!(vectors.column(1)[1].abs() > 0.99);
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let mut rng = StdRng::seed_from_u64(7);
        let m = random_matrix(5, &mut rng);
        let op = SymmetricOperator::new(m).unwrap();
        let (values, vectors) = symmetric_eigendecomposition(&op);
        let recon = &vectors
            * DMatrix::from_diagonal(&DVector::from_vec(values.clone()))
            * vectors.transpose();
        assert!((recon - op.matrix()).norm() <= 1e-8 * op.matrix().norm().max(1.0));
        let gram = vectors.transpose() * &vectors;
        assert!((gram - DMatrix::identity(5, 5)).norm() < 1e-10);
    }

    #[test]
    fn eigendecomposition_rejects_nonfinite() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(SymmetricOperator::new(m), Err(Error::InvalidMatrix)));
    }

    #[test]
    fn schur_form_reads_block_rates() {
        // B(1,4) normalized by √2·‖(1,4)‖ = √34.
        let b = block_l(&[1.0, 4.0]) / 34f64.sqrt();
        let form = skew_schur_form(&b).unwrap();
        assert!((form.block_rates[0] - 1.0 / 34f64.sqrt()).abs() < 1e-12);
        assert!((form.block_rates[1] - 4.0 / 34f64.sqrt()).abs() < 1e-12);
        assert!((form.block_rates[0] - 0.17150).abs() < 1e-4);
        assert!((form.block_rates[1] - 0.68599).abs() < 1e-4);
    }

    #[test]
    fn schur_form_zero_matrix() {
        let form = skew_schur_form(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(form.block_rates, vec![0.0, 0.0]);
        assert!(!form.residual_zero);
        assert!((form.reconstruct()).norm() < 1e-12);
    }

    #[test]
    fn schur_form_matches_complex_eigenvalue_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_skew(6, &mut rng);
            let form = skew_schur_form(&a).unwrap();
            // Oracle: |imaginary parts| of the complex spectrum, deduplicated by sign.
            let eig = a.complex_eigenvalues();
            let mut imags: Vec<f64> = eig.iter().map(|z| z.im).filter(|x| *x >= -1e-14).collect();
            imags.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(imags.len(), form.block_rates.len());
            for (a_i, b_i) in form.block_rates.iter().zip(imags.iter()) {
                assert!((a_i - b_i.max(0.0)).abs() < 1e-8, "rates {a_i} vs oracle {b_i}");
            }
            // Reconstruction and orthogonality contracts.
            assert!((form.reconstruct() - &a).norm() < 1e-8);
            let p = &form.rotation;
            assert!((p.transpose() * p - DMatrix::identity(6, 6)).norm() < 1e-10);
        }
    }

    #[test]
    fn schur_form_odd_dimension() {
        let mut rng = StdRng::seed_from_u64(13);
        let a = random_skew(5, &mut rng);
        let form = skew_schur_form(&a).unwrap();
        assert!(form.residual_zero);
        assert_eq!(form.block_rates.len(), 2);
        assert!((form.reconstruct() - &a).norm() < 1e-8);
    }

    #[test]
    fn schur_form_degenerate_rates() {
        // Repeated rate: two identical blocks conjugated by a random rotation.
        let mut rng = StdRng::seed_from_u64(17);
        let o = random_orthogonal(4, &mut rng);
        let a = &o * block_l(&[2.0, 2.0]) * o.transpose();
        let form = skew_schur_form(&a).unwrap();
        assert!((form.block_rates[0] - 2.0).abs() < 1e-9);
        assert!((form.block_rates[1] - 2.0).abs() < 1e-9);
        assert!((form.reconstruct() - &a).norm() < 1e-8);
    }

    #[test]
    fn schur_form_rejects_non_skew() {
        let m = DMatrix::identity(3, 3);
        assert!(matches!(
            skew_schur_form(&m),
            Err(Error::NotSkewSymmetric { .. })
        ));
    }

    #[test]
    fn schur_rates_invariant_under_conjugation() {
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..10 {
            let a = random_skew(6, &mut rng);
            let o = random_orthogonal(6, &mut rng);
            let b = &o * &a * o.transpose();
            let fa = skew_schur_form(&a).unwrap();
            let fb = skew_schur_form(&b).unwrap();
            for (x, y) in fa.block_rates.iter().zip(fb.block_rates.iter()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn exponential_quarter_turn() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]) * std::f64::consts::FRAC_PI_2;
        let r = matrix_exponential_skew(&l);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((r - expected).norm() < 1e-12);
    }

    #[test]
    fn exponential_of_zero() {
        let e = matrix_exponential_skew(&DMatrix::zeros(3, 3));
        assert!((e - DMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn exponential_matches_series_oracle() {
        // Oracle: plain truncated series with tail bound < 1e-12 on a
        // pre-scaled matrix, squared back up.
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..10 {
            let a = random_skew(5, &mut rng) * rng.random_range(0.1..4.0);
            let halvings = 8u32;
            let scaled = &a / 2f64.powi(halvings as i32);
            let mut oracle = DMatrix::identity(5, 5);
            let mut term = DMatrix::identity(5, 5);
            for k in 1..=25 {
                term = (&term * &scaled) / k as f64;
                oracle += &term;
            }
            for _ in 0..halvings {
                oracle = &oracle * &oracle;
            }
            let fast = matrix_exponential_skew(&a);
            assert!((&fast - &oracle).norm() < 1e-11);
            // Orthogonality with determinant one.
            assert!((fast.transpose() * &fast - DMatrix::identity(5, 5)).norm() < 1e-9);
            assert!((fast.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pseudo_inverse_sqrt_diagonal() {
        let s = SymmetricOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        let m = pseudo_inverse_sqrt(&s, 1e-9).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]));
        assert!((m.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_sqrt_singular() {
        let s = SymmetricOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]))).unwrap();
        let m = pseudo_inverse_sqrt(&s, 1e-9).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]));
        assert!((m.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_sqrt_defining_identity() {
        // M·S·M equals the projection onto the retained eigenspace.
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..10 {
            let b = random_matrix(4, &mut rng);
            let s = SymmetricOperator::new(&b * b.transpose()).unwrap();
            let m = pseudo_inverse_sqrt(&s, 1e-9).unwrap();
            let msm = m.matrix() * s.matrix() * m.matrix();
            let (values, vectors) = symmetric_eigendecomposition(&s);
            let mut proj = DMatrix::zeros(4, 4);
            for (i, &v) in values.iter().enumerate() {
                if v > 1e-9 {
                    let col = vectors.column(i);
                    proj += col * col.transpose();
                }
            }
            assert!((msm - proj).norm() < 1e-8);
        }
    }

    #[test]
    fn pseudo_inverse_sqrt_rejects_negative() {
        let s = SymmetricOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]))).unwrap();
        assert!(matches!(
            pseudo_inverse_sqrt(&s, 1e-9),
            Err(Error::NotPSD { .. })
        ));
    }

    #[test]
    fn grassmann_distance_same_frame_is_zero() {
        let mut rng = StdRng::seed_from_u64(31);
        let f = Frame::new(vec![random_skew(4, &mut rng)]).unwrap().orthonormalized().unwrap();
        assert!(grassmann_distance(&f, &f).unwrap() < 1e-12);
    }

    #[test]
    fn grassmann_distance_orthogonal_lines() {
        let a = block_l(&[1.0, 0.0]) / 2f64.sqrt();
        let b = block_l(&[0.0, 1.0]) / 2f64.sqrt();
        let fa = Frame::new(vec![a]).unwrap();
        let fb = Frame::new(vec![b]).unwrap();
        let d = grassmann_distance(&fa, &fb).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grassmann_distance_line_formula() {
        // For unit lines with overlap s = ⟨A,B⟩ the projection distance
        // satisfies d² = min{2‖A−B‖², 2‖A+B‖²}·(1+|s|)/2 exactly; the two
        // sides agree to second order as the lines align and the min-form
        // always dominates.
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..20 {
            let a = {
                let m = random_skew(5, &mut rng);
                let norm = m.norm();
                m / norm
            };
            let b = {
                let m = random_skew(5, &mut rng);
                let norm = m.norm();
                m / norm
            };
            let fa = Frame::new(vec![a.clone()]).unwrap();
            let fb = Frame::new(vec![b.clone()]).unwrap();
            let d = grassmann_distance(&fa, &fb).unwrap();
            let s = frobenius_inner(&a, &b);
            let alt_sq = (2.0 * (&a - &b).norm_squared()).min(2.0 * (&a + &b).norm_squared());
            assert!((d * d - alt_sq * (1.0 + s.abs()) / 2.0).abs() < 1e-10);
            assert!(d * d <= alt_sq + 1e-12);
        }
    }

    #[test]
    fn grassmann_distance_matches_projection_matrices() {
        // Assemble explicit projections in the skew-symmetric coordinate
        // space of dimension n(n-1)/2 and compare.
        let mut rng = StdRng::seed_from_u64(41);
        for &(d, n) in &[(1usize, 4usize), (2, 5), (3, 6)] {
            let fa = Frame::new((0..d).map(|_| random_skew(n, &mut rng)).collect())
                .unwrap()
                .orthonormalized()
                .unwrap();
            let fb = Frame::new((0..d).map(|_| random_skew(n, &mut rng)).collect())
                .unwrap()
                .orthonormalized()
                .unwrap();
            let basis = crate::lie_pca::skew_basis(n);
            let coords = |f: &Frame| -> DMatrix<f64> {
                DMatrix::from_fn(basis.len(), f.count(), |i, j| {
                    frobenius_inner(&basis[i], &f.matrices()[j])
                })
            };
            let ca = coords(&fa);
            let cb = coords(&fb);
            let pa = &ca * ca.transpose();
            let pb = &cb * cb.transpose();
            let direct = (pa - pb).norm();
            let fast = grassmann_distance(&fa, &fb).unwrap();
            assert!((direct - fast).abs() < 1e-8, "direct {direct} vs fast {fast}");
        }
    }

    #[test]
    fn grassmann_distance_dimension_mismatch() {
        let fa = Frame::new(vec![DMatrix::zeros(4, 4)]).unwrap();
        let fb = Frame::new(vec![DMatrix::zeros(6, 6)]).unwrap();
        assert!(matches!(
            grassmann_distance(&fa, &fb),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exp_bound_under_conjugation() {
        // The exponential is 1-Lipschitz on skew matrices in Frobenius
        // norm, so ‖exp(tA) − exp(tB)‖ ≤ |t|·‖A − B‖; for conjugate pairs
        // and |t| ≤ 1 this is the plain bound ‖A − B‖. (The unscaled bound
        // fails for |t| > 1: A = L(0.1), B = -A, t = 10 gives
        // 2√2·sin(1) > 2√2·0.1.)
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..40 {
            let a = random_skew(5, &mut rng);
            let o = random_orthogonal(5, &mut rng);
            let b = &o * &a * o.transpose();
            let t: f64 = rng.random_range(-10.0..10.0);
            let lhs = (matrix_exponential_skew(&(&a * t)) - matrix_exponential_skew(&(&b * t))).norm();
            let rhs = (&a - &b).norm();
            assert!(lhs <= t.abs().max(1.0) * rhs + 1e-9, "t {t} lhs {lhs} rhs {rhs}");
            let ts: f64 = rng.random_range(-1.0..1.0);
            let lhs_small =
                (matrix_exponential_skew(&(&a * ts)) - matrix_exponential_skew(&(&b * ts))).norm();
            assert!(lhs_small <= rhs + 1e-9, "ts {ts} lhs {lhs_small} rhs {rhs}");
        }
    }

    #[test]
    fn outer_product_stability() {
        let mut rng = StdRng::seed_from_u64(47);
        for _ in 0..50 {
            let x = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            let lhs = (&x * x.transpose() - &y * y.transpose()).norm();
            let rhs = (x.norm() + y.norm()) * (&x - &y).norm();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn frame_orthonormalization_and_right_invariance() {
        let mut rng = StdRng::seed_from_u64(53);
        let f = Frame::new((0..3).map(|_| random_skew(6, &mut rng)).collect())
            .unwrap()
            .orthonormalized()
            .unwrap();
        assert!((f.gram() - DMatrix::identity(3, 3)).norm() < 1e-10);
        let p = random_orthogonal(3, &mut rng);
        let g = f.right_multiplied(&p);
        assert!((g.gram() - DMatrix::identity(3, 3)).norm() < 1e-10);
        assert!(grassmann_distance(&f, &g).unwrap() < 1e-8);
    }
}

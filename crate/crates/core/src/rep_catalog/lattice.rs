//! Integer lattice machinery: Hermite normal form, invariant factors,
//! primitivity, and a canonical key for lattices up to signed axis
//! permutations.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub type IntMatrix = Vec<Vec<i64>>;

/// Row-style Hermite normal form. Pivots are positive, entries above a
/// pivot are reduced into `[0, pivot)`, zero rows are dropped.
pub fn hermite_normal_form(basis: &[Vec<i64>]) -> IntMatrix {
    let mut rows: Vec<Vec<i128>> = basis
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    if rows.is_empty() {
        return Vec::new();
    }
    let m = rows[0].len();
    let mut pivot_row = 0;
    for col in 0..m {
        // Eliminate below pivot_row in this column by gcd steps.
        loop {
            let mut best: Option<usize> = None;
            for r in pivot_row..rows.len() {
                if rows[r][col] != 0 {
                    best = match best {
                        None => Some(r),
                        Some(b) if rows[r][col].abs() < rows[b][col].abs() => Some(r),
                        other => other,
                    };
                }
            }
            let Some(b) = best else { break };
            rows.swap(pivot_row, b);
            let mut reduced_all = true;
            let head = rows[pivot_row][col];
            for r in pivot_row + 1..rows.len() {
                if rows[r][col] != 0 {
                    let q = rows[r][col].div_euclid(head);
                    for c in 0..m {
                        rows[r][c] -= q * rows[pivot_row][c];
                    }
                    if rows[r][col] != 0 {
                        reduced_all = false;
                    }
                }
            }
            if reduced_all {
                break;
            }
        }
        if rows[pivot_row][col] != 0 {
            if rows[pivot_row][col] < 0 {
                for c in 0..m {
                    rows[pivot_row][c] = -rows[pivot_row][c];
                }
            }
            let head = rows[pivot_row][col];
            for r in 0..pivot_row {
                let q = rows[r][col].div_euclid(head);
                if q != 0 {
                    for c in 0..m {
                        rows[r][c] -= q * rows[pivot_row][c];
                    }
                }
            }
            pivot_row += 1;
            if pivot_row == rows.len() {
                break;
            }
        }
    }
    rows.truncate(pivot_row);
    rows.into_iter()
        .map(|r| r.into_iter().map(|x| x as i64).collect())
        .collect()
}

pub fn lattice_rank(basis: &[Vec<i64>]) -> usize {
    hermite_normal_form(basis).len()
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn minor_det(basis: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> i128 {
    let k = rows.len();
    let mut mat: Vec<Vec<i128>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| basis[r][c] as i128).collect())
        .collect();
    // Fraction-free Gaussian elimination (Bareiss).
    let mut sign = 1i128;
    let mut prev = 1i128;
    for i in 0..k {
        if mat[i][i] == 0 {
            let swap = (i + 1..k).find(|&r| mat[r][i] != 0);
            match swap {
                Some(r) => {
                    mat.swap(i, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for r in i + 1..k {
            for c in i + 1..k {
                mat[r][c] = (mat[r][c] * mat[i][i] - mat[r][i] * mat[i][c]) / prev;
            }
            mat[r][i] = 0;
        }
        prev = mat[i][i];
    }
    sign * mat[k - 1][k - 1]
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Invariant factors d₁ | d₂ | … of the integer matrix, via gcds of k×k
/// minors (dₖ = gₖ/gₖ₋₁ with gₖ the gcd of all k-minors).
pub fn smith_invariant_factors(basis: &[Vec<i64>]) -> Vec<i64> {
    let d = basis.len();
    let m = if d > 0 { basis[0].len() } else { 0 };
    let rank = lattice_rank(basis);
    let mut factors = Vec::with_capacity(rank);
    let mut prev_gcd: i128 = 1;
    for k in 1..=rank {
        let mut g: i128 = 0;
        'outer: for rows in combinations(d, k) {
            for cols in combinations(m, k) {
                g = gcd_i128(g, minor_det(basis, &rows, &cols));
                if g == 1 {
                    break 'outer;
                }
            }
        }
        factors.push((g / prev_gcd) as i64);
        prev_gcd = g;
    }
    factors
}

/// A lattice is primitive when it is not contained in a strictly larger
/// integer lattice of the same rank, equivalently when all invariant
/// factors are one.
pub fn lattice_is_primitive(basis: &[Vec<i64>]) -> Result<bool> {
    let d = basis.len();
    if lattice_rank(basis) < d {
        return Err(Error::RankDeficient { expected: d });
    }
    Ok(smith_invariant_factors(basis).iter().all(|&f| f == 1))
}

/// Signed permutation of the m axes: a permutation together with sign
/// flips, acting on the columns of a weight matrix.
#[derive(Clone)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<i64>,
}

impl SignedPermutation {
    pub fn apply(&self, basis: &[Vec<i64>]) -> IntMatrix {
        basis
            .iter()
            .map(|row| {
                (0..row.len())
                    .map(|c| self.signs[c] * row[self.perm[c]])
                    .collect()
            })
            .collect()
    }
}

pub fn signed_permutations(m: usize) -> Vec<SignedPermutation> {
    fn perms(m: usize) -> Vec<Vec<usize>> {
        if m == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(m - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, m - 1);
                out.push(q);
            }
        }
        out
    }
    let mut out = Vec::new();
    for p in perms(m) {
        for mask in 0..(1u32 << m) {
            let signs = (0..m).map(|c| if mask >> c & 1 == 1 { -1 } else { 1 }).collect();
            out.push(SignedPermutation {
                perm: p.clone(),
                signs,
            });
        }
    }
    out
}

/// Canonical representative of the lattice class under signed axis
/// permutations: the lexicographically smallest Hermite normal form over
/// the whole signed-permutation orbit.
pub fn canonical_lattice_basis(basis: &[Vec<i64>]) -> Result<IntMatrix> {
    let d = basis.len();
    if lattice_rank(basis) < d {
        return Err(Error::RankDeficient { expected: d });
    }
    let m = basis[0].len();
    let mut best: Option<IntMatrix> = None;
    for g in signed_permutations(m) {
        let h = hermite_normal_form(&g.apply(basis));
        let better = match &best {
            None => true,
            Some(b) => flat_lex(&h) < flat_lex(b),
        };
        if better {
            best = Some(h);
        }
    }
    Ok(best.unwrap())
}

fn flat_lex(mat: &IntMatrix) -> Vec<i64> {
    mat.iter().flatten().copied().collect()
}

/// Rational projection matrix onto the lattice span, minimized
/// lexicographically over signed axis permutations. Equal keys single out
/// exactly the orbit-equivalent torus types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalLatticeKey {
    pub dimension: usize,
    pub entries: Vec<BigRational>,
}

pub fn canonical_lattice_key(basis: &[Vec<i64>]) -> Result<CanonicalLatticeKey> {
    let d = basis.len();
    if d == 0 || lattice_rank(basis) < d {
        return Err(Error::RankDeficient { expected: d.max(1) });
    }
    let m = basis[0].len();
    let mut best: Option<Vec<BigRational>> = None;
    for g in signed_permutations(m) {
        let p = projection_entries(&g.apply(basis));
        let better = match &best {
            None => true,
            Some(b) => p < *b,
        };
        if better {
            best = Some(p);
        }
    }
    Ok(CanonicalLatticeKey {
        dimension: m,
        entries: best.unwrap(),
    })
}

/// Row-major entries of `Bᵀ (B Bᵀ)⁻¹ B` in lowest terms.
fn projection_entries(basis: &IntMatrix) -> Vec<BigRational> {
    let d = basis.len();
    let m = basis[0].len();
    let big = |x: i64| BigRational::from_integer(BigInt::from(x));
    // Gram matrix G = B Bᵀ.
    let mut gram: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = BigRational::zero();
            for c in 0..m {
                acc += big(basis[i][c]) * big(basis[j][c]);
            }
            gram[i][j] = acc;
        }
    }
    let inv = invert_rational(gram);
    // P = Bᵀ G⁻¹ B.
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let mut acc = BigRational::zero();
            for i in 0..d {
                for j in 0..d {
                    acc += big(basis[i][r]) * &inv[i][j] * big(basis[j][c]);
                }
            }
            out.push(acc);
        }
    }
    out
}

fn invert_rational(mut a: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .expect("Gram matrix of a full-rank basis is invertible");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for c in 0..n {
            a[col][c] /= p.clone();
            inv[col][c] /= p.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..n {
                    let av = a[col][c].clone();
                    let iv = inv[col][c].clone();
                    a[r][c] -= f.clone() * av;
                    inv[r][c] -= f.clone() * iv;
                }
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hnf_identity() {
        let b = vec![vec![1, 0], vec![0, 1]];
        assert_eq!(hermite_normal_form(&b), b);
    }

    #[test]
    fn hnf_is_lattice_invariant() {
        // Row operations preserve the lattice, hence the HNF.
        let b = vec![vec![1, 2, 3], vec![0, 1, 4]];
        let b2 = vec![vec![1, 3, 7], vec![2, 5, 10]]; // r1+r2, 2r1+r2
        assert_eq!(hermite_normal_form(&b), hermite_normal_form(&b2));
    }

    #[test]
    fn primitivity_verdicts() {
        assert!(lattice_is_primitive(&[vec![1, 0], vec![0, 1]]).unwrap());
        assert!(!lattice_is_primitive(&[vec![2, 0], vec![0, 2]]).unwrap());
        assert!(lattice_is_primitive(&[vec![2, 1]]).unwrap());
        assert!(!lattice_is_primitive(&[vec![2, 4]]).unwrap());
    }

    #[test]
    fn rank_deficient_is_rejected() {
        assert!(matches!(
            lattice_is_primitive(&[vec![1, 2], vec![2, 4]]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn key_of_standard_basis_is_identity_projection() {
        let key = canonical_lattice_key(&[vec![1, 0], vec![0, 1]]).unwrap();
        let one = BigRational::one();
        let zero = BigRational::zero();
        assert_eq!(key.entries, vec![one.clone(), zero.clone(), zero, one]);
    }

    #[test]
    fn key_invariant_under_signed_permutation() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let basis: Vec<Vec<i64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.random_range(-3..=3)).collect())
                .collect();
            if lattice_rank(&basis) < 2 {
                continue;
            }
            let perms = signed_permutations(3);
            let g = &perms[rng.random_range(0..perms.len())];
            let moved = g.apply(&basis);
            assert_eq!(
                canonical_lattice_key(&basis).unwrap(),
                canonical_lattice_key(&moved).unwrap()
            );
            assert_eq!(
                canonical_lattice_basis(&basis).unwrap(),
                canonical_lattice_basis(&moved).unwrap()
            );
        }
    }

    #[test]
    fn key_invariant_under_row_operations() {
        let a = vec![vec![1, 0, 2], vec![0, 1, 1]];
        let b = vec![vec![1, 1, 3], vec![1, 2, 4]]; // r1+r2, r1+2r2
        assert_eq!(canonical_lattice_key(&a).unwrap(), canonical_lattice_key(&b).unwrap());
    }
}

//! Catalog of orbit-equivalence classes of representations for SO(2), T^d,
//! SU(2) and SO(3), and assembly of their pushforward Lie-algebra frames.

pub mod irreps;
pub mod lattice;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_kernel::Frame;

pub use irreps::{irrep_basis, rotation_generator, IrrepBasis};
pub use lattice::{
    canonical_lattice_basis, canonical_lattice_key, hermite_normal_form, lattice_is_primitive,
    lattice_rank, smith_invariant_factors, CanonicalLatticeKey,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    So2,
    Torus(usize),
    Su2,
    So3,
}

impl Group {
    pub fn lie_dimension(&self) -> usize {
        match self {
            Group::So2 => 1,
            Group::Torus(d) => *d,
            Group::Su2 | Group::So3 => 3,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Group::So2 => "SO(2)".into(),
            Group::Torus(d) => format!("T{d}"),
            Group::Su2 => "SU(2)".into(),
            Group::So3 => "SO(3)".into(),
        }
    }
}

impl std::str::FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so2" | "so(2)" => Ok(Group::So2),
            "su2" | "su(2)" => Ok(Group::Su2),
            "so3" | "so(3)" => Ok(Group::So3),
            other => {
                if let Some(d) = other.strip_prefix('t').and_then(|t| t.parse::<usize>().ok()) {
                    if d >= 1 {
                        return Ok(Group::Torus(d));
                    }
                }
                Err(Error::Config(format!("unknown group '{s}'")))
            }
        }
    }
}

/// Canonical label of an orbit-equivalence class of representations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "group", content = "payload")]
pub enum RepresentationType {
    /// Non-negative, non-decreasing, primitive weight tuple; a zero entry
    /// stands for a plane on which the action is trivial.
    So2(Vec<i64>),
    /// Canonical basis (rows) of a rank-d primitive weight lattice.
    Torus(Vec<Vec<i64>>),
    /// Partition of the ambient dimension into parts that are odd or
    /// multiples of four, sorted ascending.
    Su2(Vec<usize>),
    /// Partition into odd parts, sorted ascending.
    So3(Vec<usize>),
}

impl RepresentationType {
    pub fn group(&self) -> Group {
        match self {
            RepresentationType::So2(_) => Group::So2,
            RepresentationType::Torus(rows) => Group::Torus(rows.len()),
            RepresentationType::Su2(_) => Group::Su2,
            RepresentationType::So3(_) => Group::So3,
        }
    }

    /// Ambient dimension of the block-diagonal model representation.
    pub fn ambient_dimension(&self) -> usize {
        match self {
            RepresentationType::So2(w) => 2 * w.len(),
            RepresentationType::Torus(rows) => 2 * rows.first().map_or(0, |r| r.len()),
            RepresentationType::Su2(parts) | RepresentationType::So3(parts) => parts.iter().sum(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            RepresentationType::So2(w) => format!(
                "({})",
                w.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
            ),
            RepresentationType::Torus(rows) => {
                let body = rows
                    .iter()
                    .map(|r| r.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","))
                    .collect::<Vec<_>>()
                    .join(" / ");
                format!("[{body}]")
            }
            RepresentationType::Su2(p) | RepresentationType::So3(p) => format!(
                "({})",
                p.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }
}

/// Two types are orbit-equivalent when their pushforward algebras are
/// conjugate. The payloads are canonical, so the check reduces to an
/// equality after canonical normalization.
pub fn orbit_equivalent(a: &RepresentationType, b: &RepresentationType) -> bool {
    match (a, b) {
        (RepresentationType::So2(x), RepresentationType::So2(y)) => {
            normalize_so2(x) == normalize_so2(y)
        }
        (RepresentationType::Torus(x), RepresentationType::Torus(y)) => {
            match (canonical_lattice_basis(x), canonical_lattice_basis(y)) {
                (Ok(cx), Ok(cy)) => cx == cy,
                _ => false,
            }
        }
        (RepresentationType::Su2(x), RepresentationType::Su2(y))
        | (RepresentationType::So3(x), RepresentationType::So3(y)) => sorted(x) == sorted(y),
        _ => false,
    }
}

fn sorted(parts: &[usize]) -> Vec<usize> {
    let mut p = parts.to_vec();
    p.sort_unstable();
    p
}

fn normalize_so2(weights: &[i64]) -> Vec<i64> {
    let mut w: Vec<i64> = weights.iter().map(|k| k.abs()).collect();
    w.sort_unstable();
    let g = w.iter().fold(0i64, |acc, &x| num_integer::gcd(acc, x));
    if g > 1 {
        for x in w.iter_mut() {
            *x /= g;
        }
    }
    w
}

fn gcd_all(weights: &[i64]) -> i64 {
    weights.iter().fold(0i64, |acc, &x| num_integer::gcd(acc, x.abs()))
}

/// Non-negative, non-decreasing, primitive m-tuples with entries at most
/// `w_max`. `allow_zero` admits trivial planes, `distinct_only` demands
/// strictly increasing entries.
pub fn enumerate_so2_types(
    m: usize,
    w_max: i64,
    allow_zero: bool,
    distinct_only: bool,
) -> Result<Vec<RepresentationType>> {
    if m == 0 {
        return Err(Error::EmptyAmbient);
    }
    if w_max < 1 {
        return Err(Error::Config("w_max must be at least 1".into()));
    }
    let mut out = Vec::new();
    let lo = if allow_zero { 0 } else { 1 };
    let mut tuple = vec![0i64; m];
    fn rec(
        tuple: &mut Vec<i64>,
        pos: usize,
        lo: i64,
        w_max: i64,
        distinct: bool,
        out: &mut Vec<RepresentationType>,
    ) {
        if pos == tuple.len() {
            if gcd_all(tuple) == 1 {
                out.push(RepresentationType::So2(tuple.clone()));
            }
            return;
        }
        let start = if pos == 0 {
            lo
        } else if distinct {
            tuple[pos - 1] + 1
        } else {
            tuple[pos - 1]
        };
        for k in start..=w_max {
            tuple[pos] = k;
            rec(tuple, pos + 1, lo, w_max, distinct, out);
        }
    }
    rec(&mut tuple, 0, lo, w_max, distinct_only, &mut out);
    out.sort_by(|a, b| match (a, b) {
        (RepresentationType::So2(x), RepresentationType::So2(y)) => x.cmp(y),
        _ => unreachable!(),
    });
    Ok(out)
}

/// One representative weight matrix per orbit-equivalence class of
/// almost-faithful T^d representations in R^{2m}, with a generating basis
/// of entries at most `w_max` in absolute value. Weight columns are
/// nonzero and pairwise distinct up to sign: a zero weight fixes a plane
/// and a repeated irrep traps the orbit in a proper subspace, so neither
/// survives the spanning normalization. Both exclusions are invariant
/// under lattice basis changes and signed permutations.
pub fn enumerate_torus_types(m: usize, d: usize, w_max: i64) -> Result<Vec<RepresentationType>> {
    if m == 0 {
        return Err(Error::EmptyAmbient);
    }
    if d > m {
        return Err(Error::NoAlmostFaithfulRep { rank: d, max: m });
    }
    if d == 0 {
        return Err(Error::Config("torus rank must be at least 1".into()));
    }
    let side = (2 * w_max + 1) as usize;
    let cells = d * m;
    let total = side.pow(cells as u32);
    let mut unique_lattices: std::collections::HashSet<Vec<i64>> = std::collections::HashSet::new();
    let mut hnf_list: Vec<lattice::IntMatrix> = Vec::new();
    let mut basis = vec![vec![0i64; m]; d];
    for code in 0..total {
        let mut c = code;
        for r in 0..d {
            for col in 0..m {
                basis[r][col] = (c % side) as i64 - w_max;
                c /= side;
            }
        }
        if (0..m).any(|col| (0..d).all(|r| basis[r][col] == 0)) {
            continue;
        }
        if has_sign_duplicate_columns(&basis, d, m) {
            continue;
        }
        let hnf = hermite_normal_form(&basis);
        if hnf.len() < d {
            continue;
        }
        let flat: Vec<i64> = hnf.iter().flatten().copied().collect();
        if unique_lattices.insert(flat) {
            hnf_list.push(hnf);
        }
    }
    let mut classes: std::collections::HashMap<Vec<i64>, lattice::IntMatrix> =
        std::collections::HashMap::new();
    for hnf in hnf_list {
        if !lattice_is_primitive(&hnf)? {
            continue;
        }
        let canon = canonical_lattice_basis(&hnf)?;
        let flat: Vec<i64> = canon.iter().flatten().copied().collect();
        classes.entry(flat).or_insert(canon);
    }
    let mut reps: Vec<lattice::IntMatrix> = classes.into_values().collect();
    reps.sort_by_key(|b| b.iter().flatten().copied().collect::<Vec<i64>>());
    Ok(reps.into_iter().map(RepresentationType::Torus).collect())
}

fn has_sign_duplicate_columns(basis: &[Vec<i64>], d: usize, m: usize) -> bool {
    for a in 0..m {
        for b in a + 1..m {
            let same = (0..d).all(|r| basis[r][a] == basis[r][b]);
            let neg = (0..d).all(|r| basis[r][a] == -basis[r][b]);
            if same || neg {
                return true;
            }
        }
    }
    false
}

fn admissible_su2_part(p: usize) -> bool {
    p % 2 == 1 || p % 4 == 0
}

fn admissible_so3_part(p: usize) -> bool {
    p % 2 == 1
}

/// Partitions of `n` into admissible irrep dimensions, sorted ascending
/// part-wise and lexicographically across partitions.
pub fn enumerate_partition_types(
    group: Group,
    n: usize,
    nontrivial_only: bool,
) -> Result<Vec<RepresentationType>> {
    let admissible: fn(usize) -> bool = match group {
        Group::Su2 => admissible_su2_part,
        Group::So3 => admissible_so3_part,
        _ => return Err(Error::Config("partition catalog is for SU(2)/SO(3)".into())),
    };
    let mut out = Vec::new();
    let mut parts: Vec<usize> = Vec::new();
    fn rec(
        remaining: usize,
        min_part: usize,
        admissible: fn(usize) -> bool,
        parts: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if remaining == 0 {
            out.push(parts.clone());
            return;
        }
        for p in min_part..=remaining {
            if admissible(p) {
                parts.push(p);
                rec(remaining - p, p, admissible, parts, out);
                parts.pop();
            }
        }
    }
    let mut raw = Vec::new();
    rec(n, 1, admissible, &mut parts, &mut raw);
    raw.sort();
    for p in raw {
        if nontrivial_only && p.iter().all(|&x| x == 1) {
            continue;
        }
        out.push(match group {
            Group::Su2 => RepresentationType::Su2(p),
            Group::So3 => RepresentationType::So3(p),
            _ => unreachable!(),
        });
    }
    Ok(out)
}

/// `B(k₁,…,k_m) = diag(L(k₁),…,L(k_m)) / (√2‖k‖)`, padded with a zero
/// row/column when the ambient dimension is odd.
pub fn weight_block_matrix(weights: &[i64], n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for (i, &k) in weights.iter().enumerate() {
        b[(2 * i, 2 * i + 1)] = -(k as f64);
        b[(2 * i + 1, 2 * i)] = k as f64;
    }
    let norm_sq: f64 = weights.iter().map(|&k| (k * k) as f64).sum();
    if norm_sq > 0.0 {
        b /= (2.0 * norm_sq).sqrt();
    }
    b
}

/// Block-diagonal generators of the model representation, prior to any
/// orthonormalization. SO(2)/torus rows map to normalized weight blocks;
/// SU(2)/SO(3) partitions stack the irreducible generators.
pub fn assemble_raw_frame(rep: &RepresentationType, n: usize) -> Result<Frame> {
    match rep {
        RepresentationType::So2(weights) => {
            check_abelian_ambient(weights.len(), n)?;
            Frame::new(vec![weight_block_matrix(weights, n)])
        }
        RepresentationType::Torus(rows) => {
            let m = rows.first().map_or(0, |r| r.len());
            check_abelian_ambient(m, n)?;
            let mats = rows.iter().map(|r| weight_block_matrix(r, n)).collect();
            Frame::new(mats)
        }
        RepresentationType::Su2(parts) | RepresentationType::So3(parts) => {
            let total: usize = parts.iter().sum();
            if total != n {
                return Err(Error::DimensionMismatch { expected: n, got: total });
            }
            let group = rep.group();
            let mut gens = vec![DMatrix::zeros(n, n); 3];
            let mut offset = 0;
            for &p in parts {
                let block = irrep_basis(group, p as i64)?;
                for (i, g) in block.generators.iter().enumerate() {
                    gens[i].view_mut((offset, offset), (p, p)).copy_from(g);
                }
                offset += p;
            }
            Frame::new(gens)
        }
    }
}

fn check_abelian_ambient(m: usize, n: usize) -> Result<()> {
    if n == 2 * m || n == 2 * m + 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: n, got: 2 * m })
    }
}

/// Orthonormal pushforward frame of the model representation. The trivial
/// SO(2) type yields the zero matrix and is passed through unnormalized.
pub fn assemble_frame(rep: &RepresentationType, n: usize) -> Result<Frame> {
    let raw = assemble_raw_frame(rep, n)?;
    if let RepresentationType::So2(w) = rep {
        if w.iter().all(|&k| k == 0) {
            return Ok(raw);
        }
    }
    raw.orthonormalized()
}

//! Explicit generator matrices for the real irreducible representations of
//! SO(2), SU(2) and SO(3).
//!
//! For the rank-one groups the generators come in two families indexed by
//! the spin j: odd dimensions 2j+1 with integer j, and dimensions 4j+2
//! (multiples of four) with half-integer j. Both satisfy the brackets
//! [e₁,e₂]=e₃, [e₂,e₃]=e₁, [e₁,e₃]=−e₂.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rep_catalog::Group;

/// Generators of one irreducible block: a single skew matrix for SO(2)
/// weights, three for su(2)/so(3) part sizes.
#[derive(Debug, Clone)]
pub struct IrrepBasis {
    pub dimension: usize,
    pub generators: Vec<DMatrix<f64>>,
}

/// `L(k) = [[0,−k],[k,0]]`.
pub fn rotation_generator(k: i64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, -(k as f64), k as f64, 0.0])
}

pub fn irrep_basis(group: Group, label: i64) -> Result<IrrepBasis> {
    match group {
        Group::So2 | Group::Torus(_) => {
            if label == 0 {
                Ok(IrrepBasis {
                    dimension: 1,
                    generators: vec![DMatrix::zeros(1, 1)],
                })
            } else {
                Ok(IrrepBasis {
                    dimension: 2,
                    generators: vec![rotation_generator(label)],
                })
            }
        }
        Group::Su2 => su2_irrep(label as usize),
        Group::So3 => {
            let p = label as usize;
            if p % 2 == 1 {
                su2_irrep(p)
            } else {
                Err(Error::NoRealIrrep { dimension: p })
            }
        }
    }
}

fn su2_irrep(p: usize) -> Result<IrrepBasis> {
    if p == 0 {
        return Err(Error::NoRealIrrep { dimension: 0 });
    }
    if p == 1 {
        return Ok(IrrepBasis {
            dimension: 1,
            generators: vec![DMatrix::zeros(1, 1); 3],
        });
    }
    if p % 2 == 1 {
        Ok(IrrepBasis {
            dimension: p,
            generators: odd_generators(p),
        })
    } else if p % 4 == 0 {
        Ok(IrrepBasis {
            dimension: p,
            generators: quaternionic_generators(p),
        })
    } else {
        Err(Error::NoRealIrrep { dimension: p })
    }
}

fn ladder(two_j: i64, l: i64) -> f64 {
    if l < 1 {
        return 0.0;
    }
    let v = (two_j * l - l * (l - 1)) as f64 / 4.0;
    if v > 0.0 {
        v.sqrt()
    } else {
        0.0
    }
}

/// Spin-j generators in dimension p = 2j+1 with integer j.
fn odd_generators(p: usize) -> Vec<DMatrix<f64>> {
    let j = ((p - 1) / 2) as i64;
    let two_j = 2 * j;
    let a = |l: i64| ladder(two_j, l);
    let corner = a(j) + ((j * j + j) as f64 / 2.0).sqrt();
    let pi = p as i64;

    let l1 = DMatrix::from_fn(p, p, |k0, l0| {
        let (k, l) = (k0 as i64 + 1, l0 as i64 + 1);
        let mut v = 0.0;
        if k % 2 == 0 {
            if l == k + 1 {
                v += a(k / 2);
            }
            if k == l + 3 {
                v += a((k - 2) / 2);
            }
        }
        if l == pi && k == pi - 1 {
            v -= corner;
        }
        if l == pi - 1 && k == pi {
            v += corner;
        }
        if k % 2 == 1 {
            if l == k + 3 {
                v -= a((k + 1) / 2);
            }
            if k == l + 1 {
                v -= a((k - 1) / 2);
            }
        }
        v
    });

    // The sign of the middle generator is normalized so that the family
    // closes with [e1,e2]=e3, [e2,e3]=e1, [e1,e3]=-e2; downstream costs
    // are insensitive to this global orientation.
    let l2 = DMatrix::from_fn(p, p, |k0, l0| {
        let (k, l) = (k0 as i64 + 1, l0 as i64 + 1);
        let mut v = 0.0;
        if l == pi && k == pi - 2 {
            v += corner;
        }
        if l == pi - 2 && k == pi {
            v -= corner;
        }
        if l == k + 2 {
            v -= a((k + 1) / 2);
        }
        if k == l + 2 {
            v += a((k - 1) / 2);
        }
        v
    });

    let l3 = third_generator(p, two_j);
    vec![l1, l2, l3]
}

/// Generators in dimension p = 4j+2 with half-integer j (p a multiple of
/// four); the complex irrep is quaternionic and only its realification is
/// available.
fn quaternionic_generators(p: usize) -> Vec<DMatrix<f64>> {
    let two_j = ((p - 2) / 2) as i64;
    let a = |l: i64| ladder(two_j, l);

    let l1 = DMatrix::from_fn(p, p, |k0, l0| {
        let (k, l) = (k0 as i64 + 1, l0 as i64 + 1);
        let mut v = 0.0;
        if k % 2 == 1 {
            if l == k + 3 {
                v += a((k + 1) / 2);
            }
            if k == l + 1 {
                v += a((k - 1) / 2);
            }
        } else {
            if l == k + 1 {
                v -= a(k / 2);
            }
            if k == l + 3 {
                v -= a((k - 2) / 2);
            }
        }
        v
    });

    let l2 = DMatrix::from_fn(p, p, |k0, l0| {
        let (k, l) = (k0 as i64 + 1, l0 as i64 + 1);
        let mut v = 0.0;
        if l == k + 2 {
            v += a((k + 1) / 2);
        }
        if k == l + 2 {
            v -= a((k - 1) / 2);
        }
        v
    });

    let l3 = third_generator(p, two_j);
    vec![l1, l2, l3]
}

fn third_generator(p: usize, two_j: i64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |k0, l0| {
        let (k, l) = (k0 as i64 + 1, l0 as i64 + 1);
        let mut v = 0.0;
        if k % 2 == 0 && k == l + 1 {
            v += 2.0 * (two_j + 2 - k) as f64 / 4.0;
        }
        if k % 2 == 1 && l == k + 1 {
            v -= 2.0 * (two_j + 1 - k) as f64 / 4.0;
        }
        v
    })
}

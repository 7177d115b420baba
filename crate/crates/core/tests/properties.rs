//! Randomized property checks over the numeric kernels.

use liedetect::matrix_kernel::{
    grassmann_distance, matrix_exponential_skew, skew_schur_form, Frame,
};
use liedetect::orbit_verify::hausdorff_symmetric;
use liedetect::preprocess::{covariance, orthonormalize, PointCloud, Stage};
use liedetect::rep_catalog::{enumerate_so2_types, RepresentationType};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn small_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n * n)
        .prop_map(move |v| DMatrix::from_vec(n, n, v))
}

fn point_set(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_of_skew_is_special_orthogonal(m in small_matrix(4)) {
        let skew = (&m - m.transpose()) * 0.5;
        let e = matrix_exponential_skew(&skew);
        let gram = e.transpose() * &e;
        prop_assert!((gram - DMatrix::identity(4, 4)).norm() < 1e-9);
        prop_assert!((e.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schur_form_reconstructs(m in small_matrix(5)) {
        let skew = (&m - m.transpose()) * 0.5;
        let form = skew_schur_form(&skew).unwrap();
        prop_assert!((form.reconstruct() - &skew).norm() < 1e-8);
        for w in form.block_rates.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
        prop_assert!(form.block_rates.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn grassmann_distance_is_symmetric_and_span_invariant(
        a in small_matrix(4),
        b in small_matrix(4),
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let fa = Frame::new(vec![a]).unwrap();
        let fb = Frame::new(vec![b]).unwrap();
        let (Ok(fa), Ok(fb)) = (fa.orthonormalized(), fb.orthonormalized()) else {
            return Ok(());
        };
        let d_ab = grassmann_distance(&fa, &fb).unwrap();
        let d_ba = grassmann_distance(&fb, &fa).unwrap();
        prop_assert!((d_ab - d_ba).abs() < 1e-12);
        // Multiplying a one-element frame by ±cos/sin mixes nothing, but a
        // sign flip must leave the span distance unchanged.
        let flipped = fa.right_multiplied(&DMatrix::from_element(1, 1, theta.cos().signum()));
        let d_flip = grassmann_distance(&flipped, &fb).unwrap();
        prop_assert!((d_ab - d_flip).abs() < 1e-10);
    }

    #[test]
    fn hausdorff_triangle_inequality(
        a in point_set(6, 2),
        b in point_set(5, 2),
        c in point_set(7, 2),
    ) {
        let ab = hausdorff_symmetric(&a, &b).unwrap();
        let bc = hausdorff_symmetric(&b, &c).unwrap();
        let ac = hausdorff_symmetric(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn orthonormalize_scale_covariance(
        pts in point_set(30, 3),
        scale in 0.2f64..5.0,
    ) {
        let cloud = PointCloud::new(pts.clone(), Stage::Raw).unwrap();
        let sigma = covariance(&cloud);
        let top = sigma.matrix().trace();
        prop_assume!(top > 1e-6);
        let eps = 1e-6 * top;
        let Ok(base) = orthonormalize(&cloud, eps) else { return Ok(()); };
        let scaled = PointCloud::new(pts * scale, Stage::Raw).unwrap();
        let Ok(rescaled) = orthonormalize(&scaled, eps * scale * scale) else { return Ok(()); };
        prop_assert!((base.cloud.points() - rescaled.cloud.points()).norm() < 1e-8);
    }

    #[test]
    fn so2_enumeration_is_primitive_and_sorted(
        m in 1usize..4,
        w_max in 1i64..6,
    ) {
        let types = enumerate_so2_types(m, w_max, false, false).unwrap();
        for t in &types {
            let RepresentationType::So2(w) = t else { unreachable!() };
            let gcd = w.iter().fold(0i64, |acc, &x| num_integer::gcd(acc, x));
            prop_assert_eq!(gcd, 1);
            for pair in w.windows(2) {
                prop_assert!(pair[0] <= pair[1]);
            }
            prop_assert!(w.iter().all(|&x| x >= 1 && x <= w_max));
        }
        // No duplicates.
        let mut seen = std::collections::HashSet::new();
        for t in &types {
            let key = format!("{t:?}");
            prop_assert!(seen.insert(key));
        }
    }
}

//! Property tests for the small kernels and the tiling invariants.

use cube_shadows_core::combinatorics::{binomial, next_combination, unrank_combination};
use cube_shadows_core::linalg::{self, Matrix};
use cube_shadows_core::moments::centered_quadratic_variance;
use cube_shadows_core::subspace::Subspace;
use cube_shadows_core::tiling::{enumerate_tiling, TilingTolerances};
use proptest::prelude::*;

fn square_matrix(m: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0f64..5.0, m * m)
        .prop_map(move |data| Matrix::from_vec(m, m, data))
}

fn symmetric_matrix(m: usize) -> impl Strategy<Value = Matrix> {
    square_matrix(m).prop_map(|a| {
        let mut s = a.clone();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                s.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
            }
        }
        s
    })
}

proptest! {
    #[test]
    fn unrank_matches_sequential_enumeration(m in 1usize..9, k in 0usize..5) {
        let k = k.min(m);
        let total = binomial(m as u64, k as u64);
        let mut comb: Vec<usize> = (0..k).collect();
        let mut buf = Vec::new();
        for rank in 0..total {
            unrank_combination(m, k, rank, &mut buf);
            prop_assert_eq!(&buf, &comb);
            let more = next_combination(m, &mut comb);
            prop_assert_eq!(more, rank + 1 < total);
        }
    }

    #[test]
    fn lu_det_matches_cofactor_3x3(a in square_matrix(3)) {
        let d = a.get(0,0) * (a.get(1,1) * a.get(2,2) - a.get(1,2) * a.get(2,1))
              - a.get(0,1) * (a.get(1,0) * a.get(2,2) - a.get(1,2) * a.get(2,0))
              + a.get(0,2) * (a.get(1,0) * a.get(2,1) - a.get(1,1) * a.get(2,0));
        let lu = linalg::lu_det(&a);
        prop_assert!((lu - d).abs() <= 1e-9 * (1.0 + d.abs()), "{lu} vs {d}");
    }

    #[test]
    fn lu_solve_has_small_residual(a in square_matrix(4), b in prop::collection::vec(-3.0f64..3.0, 4)) {
        if let Some(x) = linalg::lu_solve(&a, &b, 1e-12) {
            let r = a.matvec(&x);
            let scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn jacobi_preserves_trace_and_frobenius(a in symmetric_matrix(5)) {
        let e = linalg::sym_eigenvalues(&a);
        let tr: f64 = e.iter().sum();
        let fr: f64 = e.iter().map(|x| x * x).sum();
        prop_assert!((tr - a.trace()).abs() <= 1e-9 * (1.0 + a.trace().abs()));
        prop_assert!((fr - a.frobenius_norm_sq()).abs() <= 1e-9 * (1.0 + a.frobenius_norm_sq()));
    }

    #[test]
    fn quadratic_variance_nonnegative_zero_iff_zero(q in symmetric_matrix(4)) {
        let v = centered_quadratic_variance(&q).unwrap();
        prop_assert!(v >= 0.0);
        let nonzero = q.max_abs() > 0.0;
        prop_assert_eq!(v > 0.0, nonzero);
    }

    #[test]
    fn subspace_invariants_hold_for_any_seed(n in 3usize..12, k in 1usize..4, seed in 0u64..500) {
        let k = k.min(n - 1);
        let s = Subspace::haar(n, k, seed).unwrap();
        prop_assert!(s.orthonormality_error() < 1e-12);
        // P_E + P_E⊥ = I
        let p = s.projector();
        let q = s.complement_basis().transpose().matmul(s.complement_basis());
        let mut sum = p.clone();
        sum.add_assign(&q);
        prop_assert!(sum.sub(&Matrix::identity(n)).max_abs() < 1e-10);
        // P² = P, trace = n - k
        prop_assert!(p.matmul(&p).sub(&p).max_abs() < 1e-10);
        prop_assert!((p.trace() - (n - k) as f64).abs() < 1e-10);
    }

    #[test]
    fn tiling_weights_and_volume(seed in 0u64..200) {
        let s = Subspace::haar(7, 2, seed).unwrap();
        let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default()).unwrap();
        let wsum: f64 = t.tiles().iter().map(|x| x.weight).sum();
        prop_assert!((wsum - 1.0).abs() < 1e-10);
        prop_assert!(t.tiles().iter().all(|x| x.weight > 0.0));
        prop_assert!(t.total_volume() > 0.0);
    }
}

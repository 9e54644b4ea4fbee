//! Randomized invariants over arbitrary inputs.

use lazy_spectra::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn triplet_strategy(dim: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec(
        (0..dim, 0..dim, prop::num::f64::NORMAL.prop_map(|v| v % 1e6)),
        0..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Symmetrized storage: entry(i, j) == entry(j, i) and the matvec agrees
    /// with the dense reconstruction no matter how triplets arrive.
    #[test]
    fn storage_is_symmetric_and_matvec_consistent(
        triplets in triplet_strategy(8),
        v in prop::collection::vec(-1e3f64..1e3, 8),
    ) {
        let m = SymmetricMatrix::from_triplets(8, &triplets).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                prop_assert_eq!(m.entry(i, j), m.entry(j, i));
            }
        }
        let x = DVector::from_vec(v);
        let got = m.matvec(&x);
        let want = m.to_dense() * &x;
        prop_assert!((got - &want).norm() <= 1e-9 * want.norm().max(1.0));
    }

    /// Matrix Market round-trips are bit-exact for arbitrary symmetric content.
    #[test]
    fn matrix_market_roundtrip(triplets in triplet_strategy(6)) {
        let m = SymmetricMatrix::from_triplets(6, &triplets).unwrap();
        let path = std::env::temp_dir().join(format!(
            "ls_prop_{}_{:x}.mtx",
            std::process::id(),
            rand::random::<u64>()
        ));
        save_matrix_market(&m, &path).unwrap();
        let back = load_matrix_market(&path).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(m.dim(), back.dim());
        prop_assert_eq!(m.nnz(), back.nnz());
        for (i, j, v) in m.upper_entries() {
            prop_assert_eq!(v, back.entry(i, j));
        }
    }

    /// Projection against a B-orthonormal basis is idempotent and its output
    /// is B-orthogonal to every basis column.
    #[test]
    fn projection_idempotent_and_orthogonal(
        seed in 0u64..1_000,
        k in 0usize..4,
        w in prop::collection::vec(-10.0f64..10.0, 6),
    ) {
        let bd = synth::random_spd(6, 0.3, 3.0, seed);
        let b = SymmetricMatrix::from_dense(&bd).unwrap();
        let mut basis = ImplicitBasis::new(6);
        let mut col_seed = seed;
        while basis.len() < k {
            col_seed = col_seed.wrapping_add(0x9E37);
            let mut v = DVector::from_fn(6, |i, _| {
                (((i as u64 + 1) * (col_seed % 97 + 1)) as f64 * 0.631).sin()
            });
            basis.project_out_inplace(&mut v);
            let bv = b.matvec(&v);
            let q = bv.dot(&v);
            if q < 1e-9 {
                continue;
            }
            basis.push(&v / q.sqrt(), bv / q.sqrt()).unwrap();
        }
        let w = DVector::from_vec(w);
        let once = b_project_out(&b, &basis, &w).unwrap();
        let twice = b_project_out(&b, &basis, &once).unwrap();
        prop_assert!((&once - &twice).norm() <= 1e-10 * (1.0 + once.norm()));
        for c in basis.columns() {
            prop_assert!(b_inner(&b, c, &once).unwrap().abs() <= 1e-9 * (1.0 + w.norm()));
        }
    }
}

use qlattice::coeffs::{
    build_dense_map, classify_by_overlap, equation_residuals, scaled_b, solve_coefficients,
    superset_matrix, svd_closest_unitary,
};

fn mappable(n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&i| i < n - i)
}

#[test]
fn residuals_small_enough_up_to_24() {
    for n in 1..=24 {
        for i in mappable(n) {
            let c = solve_coefficients(n, i).unwrap_or_else(|e| panic!("n={n} i={i}: {e}"));
            let worst = equation_residuals(n, i, &c.a)
                .into_iter()
                .fold(0.0f64, |m, r| m.max(r.abs()));
            assert!(worst <= 1e-10, "n={n} i={i} residual {worst:e}");
        }
    }
}

#[test]
fn matches_svd_oracle_up_to_10() {
    for n in 1..=10 {
        for i in mappable(n) {
            let c = solve_coefficients(n, i).unwrap();
            let oracle = svd_closest_unitary(n, i).unwrap();
            let dense = build_dense_map(&c).unwrap();
            let diff = dense.max_abs_diff(&oracle);
            assert!(diff <= 1e-8, "n={n} i={i} diff {diff:e}");
            assert!(classify_by_overlap(&oracle, 1e-9).is_some());
        }
    }
}

#[test]
fn polar_factor_property_at_12() {
    // The closest orthonormal map U to M makes UᵀM symmetric positive definite.
    let n = 12;
    for i in mappable(n) {
        let u = build_dense_map(&solve_coefficients(n, i).unwrap()).unwrap();
        let m = superset_matrix(n, i).unwrap();
        let p = u.entries.transpose() * m;
        let asym = (&p - p.transpose()).amax();
        assert!(asym < 1e-9, "i={i} asym {asym:e}");
        let eig = p.symmetric_eigenvalues();
        assert!(eig.min() > 0.0, "i={i} min eigenvalue {}", eig.min());
    }
}

#[test]
fn alternating_signs_and_b_range() {
    for n in 3..=20 {
        for i in mappable(n).filter(|&i| i >= 1) {
            let c = solve_coefficients(n, i).unwrap();
            assert!(c.a[i] > 0.0);
            let b = scaled_b(&c);
            assert!(b[0] > 0.5 && b[0] <= 1.0, "n={n} i={i} b0={}", b[0]);
            assert!(b.iter().all(|&x| x > 0.0), "n={n} i={i} b={b:?}");
        }
    }
}

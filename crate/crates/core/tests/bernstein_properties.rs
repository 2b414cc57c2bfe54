use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use spline_spde::bernstein::{
    basis_len, bernstein_all, bernstein_value, local_matrices, multi_indices, BPolynomial,
};
use spline_spde::dense::DenseMatrix;

fn barycentric() -> impl Strategy<Value = [f64; 3]> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| {
        let (u, v) = if u + v > 1.0 {
            (1.0 - u, 1.0 - v)
        } else {
            (u, v)
        };
        [1.0 - u - v, u, v]
    })
}

fn polynomial(max_degree: usize) -> impl Strategy<Value = BPolynomial> {
    (1..=max_degree).prop_flat_map(|d| {
        prop::collection::vec(-2.0..2.0f64, basis_len(d))
            .prop_map(move |c| BPolynomial::new(d, c).unwrap())
    })
}

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    prop::array::uniform3((-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| [x, y])).prop_filter(
        "non-degenerate",
        |v| {
            let area = 0.5
                * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
                    - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0]));
            area.abs() > 0.05
        },
    )
}

fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.row(i)[j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn partition_of_unity(d in 1usize..=5, b in barycentric()) {
        let total: f64 = bernstein_all(d, b).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn de_casteljau_matches_naive_sum(p in polynomial(5), b in barycentric()) {
        let naive: f64 = multi_indices(p.degree())
            .iter()
            .map(|&m| p.coeff(m) * bernstein_value(p.degree(), m, b).unwrap())
            .sum();
        let scale: f64 = p.coeffs().iter().map(|c| c.abs()).sum();
        prop_assert!((p.de_casteljau(b) - naive).abs() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn derivative_matches_finite_differences(p in polynomial(5), b in barycentric(), a1 in -1.0..1.0f64, a2 in -1.0..1.0f64) {
        let a = [a1, a2, -a1 - a2];
        let dp = p.dir_derivative(a).unwrap();
        let h = 1e-6;
        let shift = |s: f64| [b[0] + s * a[0], b[1] + s * a[1], b[2] + s * a[2]];
        let fd = (p.de_casteljau(shift(h)) - p.de_casteljau(shift(-h))) / (2.0 * h);
        let scale: f64 = p.coeffs().iter().map(|c| c.abs()).sum::<f64>() * p.degree() as f64;
        prop_assert!((dp.de_casteljau(b) - fd).abs() < 1e-6 * scale.max(1.0));
    }

    #[test]
    fn inner_product_with_one_is_the_integral(p in polynomial(5), area in 0.01..10.0f64) {
        let one = BPolynomial::constant(p.degree(), 1.0);
        let ip = p.inner_product(&one, area);
        prop_assert!((ip - p.integral(area)).abs() < 1e-12 * area * 10.0);
    }

    #[test]
    fn elevation_keeps_values(p in polynomial(4), b in barycentric()) {
        prop_assert!((p.elevate().de_casteljau(b) - p.de_casteljau(b)).abs() < 1e-12 * 10.0);
    }

    #[test]
    fn element_matrices_are_symmetric_and_semidefinite(d in 1usize..=5, v in triangle()) {
        let el = local_matrices(d, v).unwrap();
        for (name, m) in [("mass", &el.mass), ("stiffness", &el.stiffness), ("roughness", &el.roughness)] {
            let norm = m.max_abs().max(f64::MIN_POSITIVE);
            prop_assert!(m.asymmetry() <= 1e-13 * norm, "{name} asymmetric");
            let eig = SymmetricEigen::new(to_nalgebra(m)).eigenvalues;
            prop_assert!(eig.min() >= -1e-12 * norm * m.rows() as f64, "{name} eigenvalue {}", eig.min());
        }
        prop_assert!(to_nalgebra(&el.mass).cholesky().is_some());
    }

    #[test]
    fn scaled_mass_is_affine_invariant(d in 1usize..=5, v in triangle(), w in triangle()) {
        let area = |t: [[f64; 2]; 3]| 0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0])).abs();
        let mut a = local_matrices(d, v).unwrap().mass;
        let mut b = local_matrices(d, w).unwrap().mass;
        a.scale(1.0 / area(v));
        b.scale(1.0 / area(w));
        let diff = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }
}

#[test]
fn zero_direction_gives_zero_derivative() {
    let p = BPolynomial::new(3, (0..10).map(|i| i as f64).collect()).unwrap();
    let dp = p.dir_derivative([0.0; 3]).unwrap();
    assert_eq!(dp.degree(), 2);
    assert!(dp.coeffs().iter().all(|&c| c == 0.0));
}

mod common;

use common::*;
use femcycle::linalg::{eigenvalues_qr, lu_solve, norm_inf, DenseMatrix};
use femcycle::model::{LuoRudy, ModelSystem};
use femcycle::quadrature::gauss3_integrate;
use femcycle::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn to_nalgebra(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

/// Greedy matching of two spectra; returns the largest pairing distance
/// relative to max(1, |z|).
fn spectrum_gap(ours: &[(f64, f64)], theirs: &[(f64, f64)]) -> f64 {
    let mut pool = theirs.to_vec();
    let mut worst: f64 = 0.0;
    for &(re, im) in ours {
        let (k, d) = pool
            .iter()
            .enumerate()
            .map(|(k, &(r, i))| (k, (r - re).hypot(i - im)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst = worst.max(d / re.hypot(im).max(1.0));
        pool.swap_remove(k);
    }
    worst
}

fn ours(a: &DenseMatrix) -> Vec<(f64, f64)> {
    eigenvalues_qr(a).unwrap().iter().map(|z| (z.re, z.im)).collect()
}

fn reference(a: &DenseMatrix) -> Vec<(f64, f64)> {
    to_nalgebra(a)
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

#[test]
fn diagonal_solve() {
    let a = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]).unwrap();
    assert_eq!(lu_solve(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    let id = DenseMatrix::identity(5);
    let b = [1.0, -2.0, 3.5, 0.0, 7.0];
    assert_eq!(lu_solve(&id, &b).unwrap(), b.to_vec());
}

#[test]
fn singular_pivot_is_reported() {
    let a = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 1.0, 1.0]]).unwrap();
    assert!(matches!(lu_solve(&a, &[1.0, 2.0, 3.0]), Err(Error::SingularMatrix { .. })));
}

#[test]
fn luo_rudy_spectrum_agrees_with_nalgebra() {
    let jac = LuoRudy::default().jac_u(HOPF_LAMBDA, &HOPF_U).unwrap();
    assert!(spectrum_gap(&ours(&jac), &reference(&jac)) <= 1e-10);
}

#[test]
fn small_spectra() {
    let d = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
    assert!(spectrum_gap(&ours(&d), &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]) <= 1e-14);
    let rot = DenseMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
    assert!(spectrum_gap(&ours(&rot), &[(0.0, 1.0), (0.0, -1.0)]) <= 1e-14);
}

#[test]
fn gauss_rule_exactness() {
    assert_eq!(gauss3_integrate(|_| 1.0, 0.0, 1.0), 1.0);
    assert!((gauss3_integrate(|t| t.powi(5), 0.0, 1.0) - 1.0 / 6.0).abs() <= 1e-15);
}

#[test]
fn composite_rule_converges_at_sixth_order() {
    let composite = |n: usize| {
        (0..n)
            .map(|k| {
                let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
                gauss3_integrate(|t| t.exp() * (3.0 * t).sin(), a, b)
            })
            .sum::<f64>()
    };
    let antiderivative = |t: f64| t.exp() * ((3.0 * t).sin() - 3.0 * (3.0 * t).cos()) / 10.0;
    let exact = antiderivative(1.0) - antiderivative(0.0);
    let e4 = (composite(4) - exact).abs();
    let e8 = (composite(8) - exact).abs();
    assert!(e8 <= 1e-8, "{e8:e}");
    assert!(e4 / e8 > 40.0, "ratio {}", e4 / e8);
}

fn well_conditioned(n: usize, entries: &[f64]) -> DenseMatrix {
    let mut a = DenseMatrix::from_row_major(n, n, entries[..n * n].to_vec()).unwrap();
    for i in 0..n {
        a[(i, i)] += n as f64;
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lu_round_trip(entries in proptest::collection::vec(-1.0..1.0f64, 2500), x in proptest::collection::vec(-5.0..5.0f64, 50)) {
        let a = well_conditioned(50, &entries);
        let b = a.mul_vec(&x);
        let sol = lu_solve(&a, &b).unwrap();
        let r: Vec<f64> = a.mul_vec(&sol).iter().zip(&b).map(|(p, q)| p - q).collect();
        prop_assert!(norm_inf(&r) <= 1e-10 * (a.norm_inf() * norm_inf(&sol) + norm_inf(&b)));
        prop_assert!(max_abs_diff(&sol, &x) <= 1e-8 * norm_inf(&x).max(1.0));
    }

    #[test]
    fn eigenvalues_match_nalgebra(n in 2usize..10, entries in proptest::collection::vec(-3.0..3.0f64, 100)) {
        let a = DenseMatrix::from_row_major(n, n, entries[..n * n].to_vec()).unwrap();
        prop_assert!(spectrum_gap(&ours(&a), &reference(&a)) <= 1e-8);
    }

    #[test]
    fn eigenvalues_invariant_under_permutation(n in 2usize..9, entries in proptest::collection::vec(-3.0..3.0f64, 81), perm in Just((0..9usize).collect::<Vec<_>>()).prop_shuffle()) {
        let a = DenseMatrix::from_row_major(n, n, entries[..n * n].to_vec()).unwrap();
        let p: Vec<usize> = perm.into_iter().filter(|&k| k < n).collect();
        let mut b = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = a[(p[i], p[j])];
            }
        }
        prop_assert!(spectrum_gap(&ours(&a), &ours(&b)) <= 1e-8);
    }

    #[test]
    fn luo_rudy_spectrum_invariant_under_diagonal_scaling(scales in proptest::collection::vec(0.1..10.0f64, 8)) {
        let jac = LuoRudy::default().jac_u(HOPF_LAMBDA, &HOPF_U).unwrap();
        let mut scaled = jac.clone();
        for i in 0..8 {
            for j in 0..8 {
                scaled[(i, j)] = scales[i] * jac[(i, j)] / scales[j];
            }
        }
        prop_assert!(spectrum_gap(&ours(&jac), &ours(&scaled)) <= 1e-8);
    }

    #[test]
    fn gauss_linear_and_additive(a in -3.0..3.0f64, b in -3.0..3.0f64, lo in -2.0..0.0f64, mid in 0.0..1.0f64, hi in 1.0..3.0f64) {
        let f = |t: f64| (t * 1.3).sin();
        let g = |t: f64| t.exp();
        let lhs = gauss3_integrate(|t| a * f(t) + b * g(t), lo, hi);
        let rhs = a * gauss3_integrate(f, lo, hi) + b * gauss3_integrate(g, lo, hi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + 1.0));
        // polynomial integrand: the split is exact, so additivity holds to roundoff
        let p = |t: f64| 1.0 - 2.0 * t + t.powi(4);
        let whole = gauss3_integrate(p, lo, hi);
        let split = gauss3_integrate(p, lo, mid) + gauss3_integrate(p, mid, hi);
        prop_assert!((whole - split).abs() <= 1e-12 * (whole.abs() + 1.0));
    }
}

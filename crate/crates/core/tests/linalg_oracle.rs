//! Solver validation against normal-equations oracles across random
//! shapes, including an analytic minimum-norm check for rank-deficient
//! designs built from scaled duplicate columns.

mod common;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use causalsel::linalg::{lstsq, DEFAULT_RCOND};

fn randn(rng: &mut ChaCha12Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn matches_normal_equations_across_shapes() {
    let mut rng = ChaCha12Rng::seed_from_u64(4040);
    for case in 0..60 {
        let m = 10 + (case * 7) % 50;
        let n = 1 + case % 8;
        if m <= n {
            continue;
        }
        let mut a = Array2::<f64>::zeros((m, n));
        for j in 0..n {
            for i in 0..m {
                a[[i, j]] = randn(&mut rng);
            }
        }
        let b: Array1<f64> = (0..m).map(|_| randn(&mut rng)).collect();

        let ours = lstsq(a.view(), b.view(), DEFAULT_RCOND).unwrap();
        assert_eq!(ours.rank, n, "case {case} lost rank on a random matrix");
        let oracle = common::normal_equations_ols(&a, &b);
        for j in 0..n {
            assert!(
                (ours.coefficients[j] - oracle[j]).abs() < 1e-8,
                "case {case}, coefficient {j}: {} vs {}",
                ours.coefficients[j],
                oracle[j]
            );
        }
    }
}

#[test]
fn minimum_norm_matches_analytic_split_for_scaled_duplicates() {
    // Design [B | B·diag(s)]: for any least-squares weight vector w on B,
    // the minimum-norm coefficient split is x1 = w/(1+s²), x2 = s·w/(1+s²).
    let mut rng = ChaCha12Rng::seed_from_u64(9090);
    for case in 0..20 {
        let m = 30;
        let n = 1 + case % 4;
        let mut b_mat = Array2::<f64>::zeros((m, n));
        for j in 0..n {
            for i in 0..m {
                b_mat[[i, j]] = randn(&mut rng);
            }
        }
        let scales: Vec<f64> = (0..n).map(|j| 0.5 + j as f64).collect();
        let mut a = Array2::<f64>::zeros((m, 2 * n));
        for j in 0..n {
            for i in 0..m {
                a[[i, j]] = b_mat[[i, j]];
                a[[i, n + j]] = scales[j] * b_mat[[i, j]];
            }
        }
        let y: Array1<f64> = (0..m).map(|_| randn(&mut rng)).collect();

        let ours = lstsq(a.view(), y.view(), DEFAULT_RCOND).unwrap();
        assert_eq!(ours.rank, n, "case {case}: rank should be the base width");

        let w = common::normal_equations_ols(&b_mat, &y);
        for j in 0..n {
            let s = scales[j];
            let denom = 1.0 + s * s;
            let x1 = w[j] / denom;
            let x2 = s * w[j] / denom;
            assert!(
                (ours.coefficients[j] - x1).abs() < 1e-8,
                "case {case}, x1[{j}]: {} vs {}",
                ours.coefficients[j],
                x1
            );
            assert!(
                (ours.coefficients[n + j] - x2).abs() < 1e-8,
                "case {case}, x2[{j}]: {} vs {}",
                ours.coefficients[n + j],
                x2
            );
        }
    }
}

//! Partial-correlation conditional-independence test.
//!
//! The primitive both discovery algorithms consume: correlate the
//! residuals of `x` and `y` after projecting each onto `[1 | Z]`, then
//! translate the statistic into a two-sided Student-t p-value with
//! `dof = n − k − 2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::linalg::{lstsq, DEFAULT_RCOND};

/// One conditional-independence test outcome.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CiResult<F> {
    /// Partial correlation in [−1, 1].
    pub r: F,
    /// Two-sided p-value.
    pub p_value: F,
    /// Sample count.
    pub n: usize,
    /// Degrees of freedom, `n − k − 2`.
    pub dof: usize,
    /// Set when |r| = 1 up to rounding; p is exactly 0 in that case.
    pub perfect: bool,
}

/// Partial correlation of `x` and `y` given the columns of `z`.
///
/// Residualizes both variables on `[1 | Z]` (the constant regressor is
/// always included, so inputs need not be centered) and returns the
/// Pearson correlation of the residuals. With zero conditioning columns
/// this is the plain Pearson correlation.
pub fn partial_correlation<F: Float>(
    x: ArrayView1<'_, F>,
    y: ArrayView1<'_, F>,
    z: ArrayView2<'_, F>,
) -> Result<F> {
    let (rx, ry) = residual_pair(x, y, z)?;
    correlate_residuals(&rx, &ry)
}

/// Full CI test: statistic, p-value, sample count and degrees of freedom.
pub fn ci_test<F: Float>(
    x: ArrayView1<'_, F>,
    y: ArrayView1<'_, F>,
    z: ArrayView2<'_, F>,
) -> Result<CiResult<F>> {
    let n = x.len();
    let k = z.ncols();
    let (rx, ry) = residual_pair(x, y, z)?;
    let r = correlate_residuals(&rx, &ry)?;
    let dof = n - k - 2;

    if r.abs() >= F::one() {
        let sign = if r > F::zero() { F::one() } else { -F::one() };
        return Ok(CiResult {
            r: sign,
            p_value: F::zero(),
            n,
            dof,
            perfect: true,
        });
    }

    Ok(CiResult {
        r,
        p_value: p_value_from_r(r, dof),
        n,
        dof,
        perfect: false,
    })
}

/// Two-sided p-value for a partial correlation `r` at `dof` degrees of
/// freedom, via the identity p = I_{ν/(ν+t²)}(ν/2, ½) with
/// t = r·√(ν/(1−r²)).
pub fn p_value_from_r<F: Float>(r: F, dof: usize) -> F {
    let r64 = r.as_f64();
    let nu = dof as f64;
    let t_sq = r64 * r64 * nu / (1.0 - r64 * r64);
    let x = nu / (nu + t_sq);
    let p = statrs::function::beta::beta_reg(nu / 2.0, 0.5, x);
    F::cast(p.clamp(0.0, 1.0))
}

fn residual_pair<F: Float>(
    x: ArrayView1<'_, F>,
    y: ArrayView1<'_, F>,
    z: ArrayView2<'_, F>,
) -> Result<(Array1<F>, Array1<F>)> {
    let n = x.len();
    let k = z.ncols();
    if y.len() != n || (k > 0 && z.nrows() != n) {
        return Err(Error::Shape(format!(
            "ci test inputs disagree on length: x={n}, y={}, z rows={}",
            y.len(),
            z.nrows()
        )));
    }
    if n <= k + 2 {
        return Err(Error::InsufficientSamples(format!(
            "partial correlation needs n > k + 2, got n={n}, k={k}"
        )));
    }

    // Design [1 | Z].
    let mut design = Array2::zeros((n, k + 1));
    for i in 0..n {
        design[[i, 0]] = F::one();
    }
    for j in 0..k {
        for i in 0..n {
            design[[i, j + 1]] = z[[i, j]];
        }
    }

    let fit_x = lstsq(design.view(), x, DEFAULT_RCOND)?;
    if fit_x.rank < k + 1 {
        let offending: Vec<String> = fit_x
            .dropped_columns
            .iter()
            .map(|&c| {
                if c == 0 {
                    "intercept".to_string()
                } else {
                    format!("z[{}]", c - 1)
                }
            })
            .collect();
        return Err(Error::Degenerate(format!(
            "conditioning set is rank-deficient; dependent columns: {}",
            offending.join(", ")
        )));
    }
    let fit_y = lstsq(design.view(), y, DEFAULT_RCOND)?;
    Ok((fit_x.residuals, fit_y.residuals))
}

fn correlate_residuals<F: Float>(rx: &Array1<F>, ry: &Array1<F>) -> Result<F> {
    let sxy: F = rx.iter().zip(ry.iter()).map(|(&a, &b)| a * b).sum();
    let sxx: F = rx.iter().map(|&a| a * a).sum();
    let syy: F = ry.iter().map(|&b| b * b).sum();
    let denom = (sxx * syy).sqrt();
    if denom == F::zero() {
        return Err(Error::Degenerate(
            "a variable is exactly explained by the conditioning set; \
             partial correlation is undefined"
                .to_string(),
        ));
    }
    let r = sxy / denom;
    // Floating-point fuzz can push |r| past 1 by an ulp.
    Ok(r.max(-F::one()).min(F::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, rng: &mut ChaCha12Rng) -> Array1<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn identical_vectors_give_r_one() {
        let x: Array1<f64> = ndarray::array![1.0, 2.0, 3.0, 4.0, 5.0];
        let z = Array2::<f64>::zeros((5, 0));
        let r = partial_correlation(x.view(), x.view(), z.view()).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let res = ci_test(x.view(), x.view(), z.view()).unwrap();
        assert!(res.perfect);
        assert_eq!(res.p_value, 0.0);
    }

    #[test]
    fn independent_normals_are_uncorrelated() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 10_000;
        let x = normals(n, &mut rng);
        let y = normals(n, &mut rng);
        let z = Array2::<f64>::zeros((n, 0));
        let r = partial_correlation(x.view(), y.view(), z.view()).unwrap();
        assert!(r.abs() < 0.05, "r = {r}");
    }

    #[test]
    fn conditioning_removes_common_driver() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 5000;
        let zv = normals(n, &mut rng);
        let e1 = normals(n, &mut rng);
        let e2 = normals(n, &mut rng);
        let x = &zv + &e1;
        let y = &zv + &e2;
        let z = zv
            .clone()
            .into_shape_with_order((n, 1))
            .expect("column reshape");
        let r = partial_correlation(x.view(), y.view(), z.view()).unwrap();
        assert!(r.abs() < 0.1, "r = {r}");
    }

    #[test]
    fn known_t_point() {
        // r = 0.5 at n = 27, k = 0: t = 0.5·√(25/0.75) = 2.8868, p ≈ 0.0079.
        let p: f64 = p_value_from_r(0.5, 25);
        assert!((p - 0.0079).abs() < 2e-4, "p = {p}");
    }

    #[test]
    fn zero_r_gives_p_one() {
        let p: f64 = p_value_from_r(0.0, 25);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn p_decreases_in_abs_r_at_fixed_dof() {
        for dof in [5usize, 25, 200] {
            let mut last = 1.0 + 1e-12;
            for i in 0..50 {
                let r = i as f64 / 50.0;
                let p: f64 = p_value_from_r(r, dof);
                assert!(p < last, "p not decreasing at r={r}, dof={dof}");
                last = p;
            }
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let x: Array1<f64> = ndarray::array![1.0, 2.0, 3.0];
        let z = Array2::<f64>::zeros((3, 1));
        assert!(matches!(
            ci_test(x.view(), x.view(), z.view()),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn collinear_conditioning_is_degenerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 50;
        let x = normals(n, &mut rng);
        let y = normals(n, &mut rng);
        let zc = normals(n, &mut rng);
        let mut z = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            z[[i, 0]] = zc[i];
            z[[i, 1]] = 2.0 * zc[i];
        }
        match ci_test(x.view(), y.view(), z.view()) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("z[")),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }
}

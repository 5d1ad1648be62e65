//! Independent oracles used by the integration and acceptance suites.
//!
//! Nothing here goes through the library's solver or distribution code:
//! matrix inversion is Gauss–Jordan, the Student-t tail is Simpson
//! quadrature on the tangent-substituted density, and partial correlation
//! comes from the precision matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Gauss–Jordan inverse with partial pivoting. Returns `None` on a
/// numerically singular input.
pub fn gauss_jordan_inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = Array2::<f64>::zeros((n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = a[[i, j]];
        }
        m[[i, n + i]] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if m[[r, col]].abs() > m[[pivot, col]].abs() {
                pivot = r;
            }
        }
        if m[[pivot, col]].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for j in 0..2 * n {
                let tmp = m[[col, j]];
                m[[col, j]] = m[[pivot, j]];
                m[[pivot, j]] = tmp;
            }
        }
        let d = m[[col, col]];
        for j in 0..2 * n {
            m[[col, j]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[[r, j]] -= f * m[[col, j]];
                    }
                }
            }
        }
    }
    let mut inv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            inv[[i, j]] = m[[i, n + j]];
        }
    }
    Some(inv)
}

/// Partial correlation of x and y given Z via the precision matrix of
/// [x, y, Z]: r = −Ω₀₁ / √(Ω₀₀·Ω₁₁).
pub fn precision_matrix_partial_corr(
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    z: ArrayView2<'_, f64>,
) -> f64 {
    let n = x.len();
    let k = z.ncols();
    let d = k + 2;
    let mut data = Array2::<f64>::zeros((n, d));
    data.column_mut(0).assign(&x);
    data.column_mut(1).assign(&y);
    for j in 0..k {
        data.column_mut(j + 2).assign(&z.column(j));
    }
    let means: Vec<f64> = (0..d).map(|j| data.column(j).sum() / n as f64).collect();
    let mut cov = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for r in 0..n {
                s += (data[[r, i]] - means[i]) * (data[[r, j]] - means[j]);
            }
            cov[[i, j]] = s / (n as f64 - 1.0);
        }
    }
    let omega = gauss_jordan_inverse(&cov).expect("well-conditioned covariance");
    -omega[[0, 1]] / (omega[[0, 0]] * omega[[1, 1]]).sqrt()
}

/// OLS coefficients by normal equations: (XᵀX)⁻¹Xᵀy.
pub fn normal_equations_ols(design: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let xtx = design.t().dot(design);
    let xty = design.t().dot(y);
    let inv = gauss_jordan_inverse(&xtx).expect("full-rank design");
    inv.dot(&xty)
}

/// Two-sided Student-t tail probability P(|T| > t) at `dof` degrees of
/// freedom, by Simpson quadrature of the unnormalized density under the
/// substitution x = tan θ (no gamma functions involved).
pub fn t_two_sided_quadrature(t: f64, dof: f64) -> f64 {
    let density = |x: f64| (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
    // Full mass over ℝ and tail mass over (|t|, ∞), both mapped through
    // x = tan θ so the domain is finite.
    let integrand = |theta: f64| {
        let c = theta.cos();
        density(theta.tan()) / (c * c)
    };
    let total = simpson(&integrand, 0.0, std::f64::consts::FRAC_PI_2 - 1e-12, 200_001);
    let tail = simpson(
        &integrand,
        t.abs().atan(),
        std::f64::consts::FRAC_PI_2 - 1e-12,
        200_001,
    );
    tail / total
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    assert!(points % 2 == 1 && points >= 3);
    let h = (b - a) / (points - 1) as f64;
    let mut acc = f(a) + f(b);
    for i in 1..points - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

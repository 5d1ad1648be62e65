//! Dense least squares via Householder QR with column pivoting.
//!
//! The solver is deliberately self-contained: everything in the pipeline
//! that projects, residualizes or fits goes through [`lstsq`], so its
//! numerical behaviour (rank detection threshold, minimum-norm handling)
//! is fixed in one place. Normal equations are reserved for test oracles.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::float::Float;

/// Relative diagonal threshold below which a pivoted column is treated as
/// linearly dependent.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Outcome of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares<F> {
    /// Coefficients in the original column order of the design matrix.
    pub coefficients: Array1<F>,
    /// `design · coefficients`.
    pub fitted: Array1<F>,
    /// `rhs − fitted`.
    pub residuals: Array1<F>,
    /// Numerical rank detected during pivoting.
    pub rank: usize,
    /// Original indices of columns pivoted beyond the numerical rank.
    pub dropped_columns: Vec<usize>,
}

impl<F: Float> LeastSquares<F> {
    pub fn is_full_rank(&self, ncols: usize) -> bool {
        self.rank == ncols
    }
}

/// Solve `min ‖A·x − b‖₂` for an m×n matrix A with m ≥ n.
///
/// Rank-revealing: columns whose pivoted diagonal falls below
/// `rcond × |R₀₀|` are treated as dependent, and the returned solution is
/// the minimum-norm one (complete orthogonal decomposition on the
/// deficient trailing block). Callers that must reject deficiency check
/// `rank` against the column count.
pub fn lstsq<F: Float>(
    design: ArrayView2<'_, F>,
    rhs: ArrayView1<'_, F>,
    rcond: f64,
) -> Result<LeastSquares<F>> {
    let (m, n) = design.dim();
    if rhs.len() != m {
        return Err(Error::Shape(format!(
            "design has {m} rows but rhs has {} entries",
            rhs.len()
        )));
    }
    if m < n {
        return Err(Error::Underdetermined(format!(
            "{m} rows < {n} columns; reduce the number of regressors"
        )));
    }
    if n == 0 {
        return Ok(LeastSquares {
            coefficients: Array1::zeros(0),
            fitted: Array1::zeros(m),
            residuals: rhs.to_owned(),
            rank: 0,
            dropped_columns: Vec::new(),
        });
    }

    let mut r = design.to_owned();
    let mut qtb = rhs.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();

    // Householder QR, pivoting the largest remaining column to the front.
    for j in 0..n {
        let mut best = j;
        let mut best_norm = column_tail_norm(&r, j, j);
        for c in (j + 1)..n {
            let nc = column_tail_norm(&r, c, j);
            if nc > best_norm {
                best_norm = nc;
                best = c;
            }
        }
        if best != j {
            swap_columns(&mut r, j, best);
            perm.swap(j, best);
        }
        if best_norm == F::zero() {
            continue;
        }

        // Reflector zeroing r[j+1.., j].
        let alpha = if r[[j, j]] >= F::zero() {
            -best_norm
        } else {
            best_norm
        };
        let mut v: Vec<F> = (j..m).map(|i| r[[i, j]]).collect();
        v[0] -= alpha;
        let vtv: F = v.iter().map(|&x| x * x).sum();
        if vtv > F::zero() {
            let two = F::cast(2.0);
            for c in j..n {
                let dot: F = (j..m).map(|i| v[i - j] * r[[i, c]]).sum();
                let scale = two * dot / vtv;
                for i in j..m {
                    r[[i, c]] -= scale * v[i - j];
                }
            }
            let dot: F = (j..m).map(|i| v[i - j] * qtb[i]).sum();
            let scale = two * dot / vtv;
            for i in j..m {
                qtb[i] -= scale * v[i - j];
            }
        }
        r[[j, j]] = alpha;
        for i in (j + 1)..m {
            r[[i, j]] = F::zero();
        }
    }

    // Numerical rank from the pivoted diagonal.
    let lead = r[[0, 0]].abs();
    let tol = lead * F::cast(rcond);
    let mut rank = 0;
    for j in 0..n {
        if r[[j, j]].abs() > tol {
            rank = j + 1;
        } else {
            break;
        }
    }

    let mut pivoted = if rank == n {
        // Full rank: plain back-substitution on R.
        back_substitute(&r, &qtb, n)
    } else {
        solve_deficient(&mut r, &qtb, rank, n)
    };

    // Undo the pivoting.
    let mut coefficients = Array1::zeros(n);
    for (pos, &orig) in perm.iter().enumerate() {
        coefficients[orig] = pivoted[pos];
    }
    pivoted.clear();

    let fitted = design.dot(&coefficients);
    let residuals = &rhs.to_owned() - &fitted;
    let mut dropped_columns: Vec<usize> = perm[rank..].to_vec();
    dropped_columns.sort_unstable();

    Ok(LeastSquares {
        coefficients,
        fitted,
        residuals,
        rank,
        dropped_columns,
    })
}

/// Minimum-norm solution for a rank-deficient system: annihilate the
/// trailing block of `[R₁₁ R₁₂]` with right reflectors (complete
/// orthogonal decomposition), solve the triangular core, then map back.
fn solve_deficient<F: Float>(r: &mut Array2<F>, qtb: &Array1<F>, rank: usize, n: usize) -> Vec<F> {
    if rank == 0 {
        return vec![F::zero(); n];
    }
    let two = F::cast(2.0);
    // Reflectors over columns {i} ∪ {rank..n}, generated bottom row first.
    let mut reflectors: Vec<(usize, Vec<F>)> = Vec::with_capacity(rank);
    for i in (0..rank).rev() {
        let tail_sq: F = (rank..n).map(|c| r[[i, c]] * r[[i, c]]).sum();
        if tail_sq == F::zero() {
            continue;
        }
        let head = r[[i, i]];
        let norm = (head * head + tail_sq).sqrt();
        let beta = if head >= F::zero() { -norm } else { norm };
        let mut v = Vec::with_capacity(1 + n - rank);
        v.push(head - beta);
        for c in rank..n {
            v.push(r[[i, c]]);
        }
        let vtv: F = v.iter().map(|&x| x * x).sum();
        // Apply from the right to rows 0..i; row i becomes [.., beta, 0..].
        for row in 0..i {
            let mut dot = v[0] * r[[row, i]];
            for (k, c) in (rank..n).enumerate() {
                dot += v[k + 1] * r[[row, c]];
            }
            let scale = two * dot / vtv;
            r[[row, i]] -= scale * v[0];
            for (k, c) in (rank..n).enumerate() {
                r[[row, c]] -= scale * v[k + 1];
            }
        }
        r[[i, i]] = beta;
        for c in rank..n {
            r[[i, c]] = F::zero();
        }
        reflectors.push((i, v));
    }

    // Triangular core solve, zeros in the free block.
    let mut y = back_substitute(r, qtb, rank);
    y.resize(n, F::zero());

    // y ← Z_rank … Z_1 · u, applying reflectors in reverse generation order.
    for (i, v) in reflectors.iter().rev() {
        let vtv: F = v.iter().map(|&x| x * x).sum();
        let mut dot = v[0] * y[*i];
        for (k, c) in (rank..n).enumerate() {
            dot += v[k + 1] * y[c];
        }
        let scale = two * dot / vtv;
        y[*i] -= scale * v[0];
        for (k, c) in (rank..n).enumerate() {
            y[c] -= scale * v[k + 1];
        }
    }
    y
}

fn back_substitute<F: Float>(r: &Array2<F>, qtb: &Array1<F>, k: usize) -> Vec<F> {
    let mut x = vec![F::zero(); k];
    for i in (0..k).rev() {
        let mut acc = qtb[i];
        for j in (i + 1)..k {
            acc -= r[[i, j]] * x[j];
        }
        x[i] = acc / r[[i, i]];
    }
    x
}

fn column_tail_norm<F: Float>(r: &Array2<F>, col: usize, from_row: usize) -> F {
    let m = r.nrows();
    let sum: F = (from_row..m).map(|i| r[[i, col]] * r[[i, col]]).sum();
    sum.sqrt()
}

fn swap_columns<F: Float>(r: &mut Array2<F>, a: usize, b: usize) {
    let m = r.nrows();
    for i in 0..m {
        let tmp = r[[i, a]];
        r[[i, a]] = r[[i, b]];
        r[[i, b]] = tmp;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    #[test]
    fn exact_square_system() {
        let a = array![[2.0, 0.0], [0.0, 4.0]];
        let b = array![2.0, 8.0];
        let out = lstsq(a.view(), b.view(), DEFAULT_RCOND).unwrap();
        assert_eq!(out.rank, 2);
        assert_close(out.coefficients[0], 1.0, 1e-12);
        assert_close(out.coefficients[1], 2.0, 1e-12);
    }

    #[test]
    fn overdetermined_matches_normal_equations() {
        // Small fixed system solved by hand via (AᵀA)⁻¹Aᵀb.
        let a = array![[1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]];
        let b = array![6.0, 5.0, 7.0, 10.0];
        let out = lstsq(a.view(), b.view(), DEFAULT_RCOND).unwrap();
        // AᵀA = [[4, 10], [10, 30]], Aᵀb = [28, 77] → x = [3.5, 1.4]
        assert_close(out.coefficients[0], 3.5, 1e-10);
        assert_close(out.coefficients[1], 1.4, 1e-10);
        // Residuals orthogonal to columns.
        for c in 0..2 {
            let dot: f64 = (0..4).map(|i| a[[i, c]] * out.residuals[i]).sum();
            assert!(dot.abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_column_reports_deficiency_and_min_norm() {
        let a = array![
            [1.0, 1.0, 2.0],
            [1.0, 1.0, 0.5],
            [1.0, 1.0, -1.0],
            [1.0, 1.0, 3.0]
        ];
        let b = array![1.0, 2.0, 3.0, 4.0];
        let out = lstsq(a.view(), b.view(), DEFAULT_RCOND).unwrap();
        assert_eq!(out.rank, 2);
        assert_eq!(out.dropped_columns.len(), 1);
        // Minimum-norm splits the shared weight across the duplicates.
        assert_close(out.coefficients[0], out.coefficients[1], 1e-10);
        // Residuals still orthogonal to the column space.
        for c in 0..3 {
            let dot: f64 = (0..4).map(|i| a[[i, c]] * out.residuals[i]).sum();
            assert!(dot.abs() < 1e-9, "column {c} dot {dot}");
        }
    }

    #[test]
    fn underdetermined_is_rejected() {
        let a = array![[1.0, 2.0, 3.0]];
        let b = array![1.0];
        assert!(matches!(
            lstsq(a.view(), b.view(), DEFAULT_RCOND),
            Err(Error::Underdetermined(_))
        ));
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let a = Array2::<f64>::zeros((3, 2));
        let b = array![1.0, 1.0, 1.0];
        let out = lstsq(a.view(), b.view(), DEFAULT_RCOND).unwrap();
        assert_eq!(out.rank, 0);
        assert_eq!(out.dropped_columns, vec![0, 1]);
        assert!(out.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn works_in_f32() {
        let a = array![[1.0f32, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let b = array![1.0f32, 2.0, 3.0];
        let out = lstsq(a.view(), b.view(), DEFAULT_RCOND).unwrap();
        assert_eq!(out.rank, 2);
        assert!((out.coefficients[0] - 1.0).abs() < 1e-5);
    }
}

//! Small dense linear solves used by the explainers.
//!
//! The systems here are tiny (at most a few dozen unknowns from coalition
//! regressions and local surrogates), so plain Gaussian elimination with
//! partial pivoting is all that is needed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "solve expects a square system, got {}x{} with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if n == 0 {
        return Ok(Array1::zeros(0));
    }

    let mut m = a.to_owned();
    let mut rhs = b.to_owned();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);

    for col in 0..n {
        let mut pivot = col;
        let mut best = m[[col, col]].abs();
        for row in col + 1..n {
            let v = m[[row, col]].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best <= scale * 1e-13 {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            rhs.swap(pivot, col);
        }
        let diag = m[[col, col]];
        for row in col + 1..n {
            let factor = m[[row, col]] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= factor * m[[col, k]];
            }
            rhs[row] -= factor * rhs[col];
        }
    }

    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[[row, k]] * x[k];
        }
        x[row] = acc / m[[row, row]];
    }
    Ok(x)
}

/// Weighted least squares: `argmin_t sum_k w_k (a_k . t - y_k)^2` via the
/// normal equations, with an optional ridge penalty. `ridge_skip` exempts one
/// column (the surrogate intercept) from the penalty.
pub fn weighted_least_squares(
    a: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    ridge: f64,
    ridge_skip: Option<usize>,
) -> Result<Array1<f64>> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if y.len() != rows || w.len() != rows {
        return Err(Error::InvalidArgument(
            "weighted_least_squares: row count mismatch".into(),
        ));
    }
    let mut gram = Array2::<f64>::zeros((cols, cols));
    let mut rhs = Array1::<f64>::zeros(cols);
    for k in 0..rows {
        let wk = w[k];
        let row = a.row(k);
        for i in 0..cols {
            let wai = wk * row[i];
            rhs[i] += wai * y[k];
            for j in i..cols {
                gram[[i, j]] += wai * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            gram[[i, j]] = gram[[j, i]];
        }
        if ridge > 0.0 && ridge_skip != Some(i) {
            gram[[i, i]] += ridge;
        }
    }
    solve(gram.view(), rhs.view())
}

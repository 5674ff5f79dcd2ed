//! Small dense linear-algebra kernels: Cholesky and LU solves, a cyclic
//! Jacobi eigensolver for symmetric matrices, and a pseudo-inverse solve.
//!
//! Matrices are row-major `Array2`s. Everything is written against
//! [`Scalar`] so the same routines serve `f32` and `f64` models.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, Scalar};

/// `A^T A` for a row-major `A` (n×m), accumulated row by row.
pub fn gram_t<T: Scalar>(a: ArrayView2<T>) -> Array2<T> {
    let m = a.ncols();
    let mut out = Array2::<T>::zeros((m, m));
    for row in a.rows() {
        for p in 0..m {
            let rp = row[p];
            if rp == T::zero() {
                continue;
            }
            for q in p..m {
                out[[p, q]] += rp * row[q];
            }
        }
    }
    for p in 0..m {
        for q in 0..p {
            out[[p, q]] = out[[q, p]];
        }
    }
    out
}

/// `A^T b`.
pub fn at_b<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    let mut out = Array2::<T>::zeros((a.ncols(), b.ncols()));
    for (ra, rb) in a.rows().into_iter().zip(b.rows()) {
        for p in 0..a.ncols() {
            let v = ra[p];
            if v == T::zero() {
                continue;
            }
            for q in 0..b.ncols() {
                out[[p, q]] += v * rb[q];
            }
        }
    }
    out
}

pub fn matmul<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
    check_dim(a.ncols(), b.nrows())?;
    let mut out = Array2::<T>::zeros((a.nrows(), b.ncols()));
    for (i, ra) in a.rows().into_iter().enumerate() {
        for (k, &v) in ra.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            for (o, &bv) in out.row_mut(i).iter_mut().zip(b.row(k)) {
                *o += v * bv;
            }
        }
    }
    Ok(out)
}

pub fn matvec<T: Scalar>(a: ArrayView2<T>, x: ArrayView1<T>) -> Result<Array1<T>> {
    check_dim(a.ncols(), x.len())?;
    let xs = x.to_vec();
    Ok(a.rows()
        .into_iter()
        .map(|r| match r.as_slice() {
            Some(s) => dot(s, &xs),
            None => dot(&r.to_vec(), &xs),
        })
        .collect())
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    check_dim(n, a.ncols())?;
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let lj: Vec<T> = l.row(j).as_slice().expect("standard layout")[..j].to_vec();
        let diag = a[[j, j]] - dot(&lj, &lj);
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let li = &l.row(i).to_slice().expect("standard layout")[..j];
            let v = (a[[i, j]] - dot(li, &lj)) / ljj;
            l[[i, j]] = v;
        }
    }
    Ok(l)
}

/// Solves `L L^T X = B` given the Cholesky factor `L`.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
    let n = l.nrows();
    check_dim(n, b.nrows())?;
    let mut x = b.to_owned();
    for col in 0..x.ncols() {
        // forward
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
        // backward with L^T
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in (i + 1)..n {
                s -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    Ok(x)
}

pub fn solve_spd<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
    let l = cholesky(a)?;
    cholesky_solve(l.view(), b)
}

/// Gaussian elimination with partial pivoting. Errors on an exactly singular
/// pivot.
pub fn solve_lu<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    check_dim(n, a.ncols())?;
    check_dim(n, b.nrows())?;
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[[i, k]].abs().partial_cmp(&m[[j, k]].abs()).unwrap())
            .unwrap();
        if m[[p, k]] == T::zero() || !m[[p, k]].is_finite() {
            return Err(Error::Numerical("singular matrix".into()));
        }
        if p != k {
            for c in 0..n {
                m.swap([p, c], [k, c]);
            }
            for c in 0..x.ncols() {
                x.swap([p, c], [k, c]);
            }
        }
        for i in (k + 1)..n {
            let f = m[[i, k]] / m[[k, k]];
            if f == T::zero() {
                continue;
            }
            for c in k..n {
                let v = m[[k, c]];
                m[[i, c]] -= f * v;
            }
            for c in 0..x.ncols() {
                let v = x[[k, c]];
                x[[i, c]] -= f * v;
            }
        }
    }
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[[i, c]];
            for k in (i + 1)..n {
                s -= m[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = s / m[[i, i]];
        }
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    check_dim(n, a.ncols())?;
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let s = m[[i, j]] * m[[i, j]];
                total += s;
                if i != j {
                    off += s;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let diag: Vec<T> = (0..n).map(|i| m[[i, i]]).collect();
    if !diag.iter().all(|d| d.is_finite()) {
        return Err(Error::Numerical("eigensolver produced non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = v.select(Axis(1), &order);
    Ok((values, vectors))
}

/// Minimum-norm least-squares solution of a symmetric system via the
/// eigen-decomposition; eigenvalues below `rel_cut * max|eig|` are dropped.
pub fn solve_symmetric_pinv<T: Scalar>(
    a: ArrayView2<T>,
    b: ArrayView2<T>,
    rel_cut: T,
) -> Result<Array2<T>> {
    check_dim(a.nrows(), b.nrows())?;
    let (vals, vecs) = symmetric_eigen(a)?;
    let top = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut out = Array2::<T>::zeros((a.ncols(), b.ncols()));
    if top == T::zero() {
        return Ok(out);
    }
    let vtb = at_b(vecs.view(), b);
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= rel_cut * top {
            continue;
        }
        for c in 0..b.ncols() {
            let coef = vtb[[k, c]] / lam;
            for i in 0..a.nrows() {
                out[[i, c]] += vecs[[i, k]] * coef;
            }
        }
    }
    Ok(out)
}

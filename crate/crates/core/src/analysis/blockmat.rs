//! Block vectorization and the block Kronecker product.
//!
//! Conventions (fixed jointly so the identities below hold):
//!
//! * `bvec(X, m)` splits `X` into `m x m` blocks, stacks the blocks in
//!   column-major block order, and vectorizes each block column-major:
//!   `bvec(X)[(j*nb + i)*m^2 + c*m + r] = X[i*m + r, j*m + c]`.
//! * `block_kron(A, B, m)` is the blockwise product whose `(i, j)`
//!   block-of-blocks has `(k, l)` inner block `A_ij (x) B_kl`:
//!   flat entry `[(i*rb + k)*m^2 + a*m + c, (j*sb + l)*m^2 + b*m + d]
//!   = A[i*m + a, j*m + b] * B[k*m + c, l*m + d]`.
//!
//! With these packings, for conforming square matrices,
//! `bvec(A * X * C^T) = block_kron(C, A, m) * bvec(X)`, mirroring the
//! ordinary `vec`/Kronecker identity, and the product is multiplicative:
//! `block_kron(A, B) * block_kron(C, D) = block_kron(A*C, B*D)`.

use nalgebra::{DMatrix, DVector};

use super::AnalysisError;

fn check_multiple(dim: usize, block: usize) -> Result<(), AnalysisError> {
    if block == 0 || dim % block != 0 {
        Err(AnalysisError::BlockMismatch { got: dim, block })
    } else {
        Ok(())
    }
}

/// Block-vectorize a square matrix with `m x m` blocks.
pub fn bvec(x: &DMatrix<f64>, m: usize) -> Result<DVector<f64>, AnalysisError> {
    if x.nrows() != x.ncols() {
        return Err(AnalysisError::Dimension(format!(
            "bvec expects a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    check_multiple(x.nrows(), m)?;
    let nb = x.nrows() / m;
    let mut v = DVector::zeros(nb * nb * m * m);
    let mut idx = 0;
    for j in 0..nb {
        for i in 0..nb {
            for c in 0..m {
                for r in 0..m {
                    v[idx] = x[(i * m + r, j * m + c)];
                    idx += 1;
                }
            }
        }
    }
    Ok(v)
}

/// Invert [`bvec`]: rebuild the `nb*m x nb*m` matrix from its block
/// vectorization.
pub fn unbvec(v: &DVector<f64>, m: usize) -> Result<DMatrix<f64>, AnalysisError> {
    let len = v.len();
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len {
        return Err(AnalysisError::Dimension(format!(
            "bvec length {len} is not a perfect square"
        )));
    }
    check_multiple(side, m)?;
    let nb = side / m;
    let mut x = DMatrix::zeros(side, side);
    let mut idx = 0;
    for j in 0..nb {
        for i in 0..nb {
            for c in 0..m {
                for r in 0..m {
                    x[(i * m + r, j * m + c)] = v[idx];
                    idx += 1;
                }
            }
        }
    }
    Ok(x)
}

/// Block Kronecker product of `a` and `b`, both partitioned into `m x m`
/// blocks.
pub fn block_kron(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: usize,
) -> Result<DMatrix<f64>, AnalysisError> {
    for dim in [a.nrows(), a.ncols(), b.nrows(), b.ncols()] {
        check_multiple(dim, m)?;
    }
    let (pb, qb) = (a.nrows() / m, a.ncols() / m);
    let (rb, sb) = (b.nrows() / m, b.ncols() / m);
    let mm = m * m;
    let mut out = DMatrix::zeros(pb * rb * mm, qb * sb * mm);
    for i in 0..pb {
        for j in 0..qb {
            for aa in 0..m {
                for bb in 0..m {
                    let av = a[(i * m + aa, j * m + bb)];
                    if av == 0.0 {
                        continue;
                    }
                    for k in 0..rb {
                        for l in 0..sb {
                            for cc in 0..m {
                                let row = (i * rb + k) * mm + aa * m + cc;
                                for dd in 0..m {
                                    let col = (j * sb + l) * mm + bb * m + dd;
                                    out[(row, col)] = av * b[(k * m + cc, l * m + dd)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

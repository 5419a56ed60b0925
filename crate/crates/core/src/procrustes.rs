//! Orthogonality-constrained least squares shared by both W-steps.
//!
//! `min ‖B − WᵀA‖_F` over column-orthonormal `W` is the same as maximizing
//! `trace(Wᵀ C)` with the cross matrix `C = A Bᵀ`; the maximizer is the polar
//! factor `U Vᵀ` of `C`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GmvError, Result};
use crate::ternary::ProjectionMatrix;

/// Column-orthonormal `W` maximizing `trace(Wᵀ cross)` for a `d × ℓ` cross matrix.
pub fn orthogonal_procrustes(cross: &DMatrix<f64>) -> Result<ProjectionMatrix> {
    let (d, l) = cross.shape();
    if l == 0 || l > d {
        return Err(GmvError::param(format!(
            "cross matrix must be d×ℓ with 1 ≤ ℓ ≤ d, got {d}×{l}"
        )));
    }
    if cross.iter().any(|v| !v.is_finite()) {
        return Err(GmvError::param("cross matrix has non-finite entries"));
    }
    let svd = cross
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| GmvError::numerical("singular value factorization did not converge"))?;
    let mut u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");

    // Left vectors of (numerically) zero singular values have arbitrary sign.
    let smax = svd.singular_values.max();
    let zero_tol = smax.max(1.0) * (d as f64) * f64::EPSILON;
    for (k, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > zero_tol {
            continue;
        }
        let mut col = u.column_mut(k);
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    ProjectionMatrix::new(u * v_t)
}

/// Orthonormalized seeded Gaussian `d × ℓ` matrix.
///
/// The QR factor signs are fixed so the triangular factor has a nonnegative
/// diagonal, which makes the result equal to Gram–Schmidt on the same draw.
pub fn random_orthonormal(d: usize, l: usize, seed: u64) -> Result<ProjectionMatrix> {
    if l == 0 || l > d {
        return Err(GmvError::param(format!(
            "random projection needs 1 ≤ ℓ ≤ d, got d={d}, ℓ={l}"
        )));
    }
    let gaussian = gaussian_matrix(d, l, seed);
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..l {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    ProjectionMatrix::new(q)
}

/// Standard Gaussian `rows × cols` matrix filled column by column from a
/// ChaCha8 stream seeded with `seed`.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

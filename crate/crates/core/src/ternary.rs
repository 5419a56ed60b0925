//! Sparse ternary quantization and the projection-based embedding.
//!
//! A template `x` of dimension `d` is projected on the `ℓ` columns of a
//! column-orthonormal matrix `W`; the `S` projections of largest magnitude
//! keep their sign and the rest are zeroed. The result lives in
//! `{-1, 0, +1}^ℓ` with at most `S` nonzeros.

use nalgebra::{DMatrix, DVector, Dyn, Matrix, Storage, U1};

use crate::error::{GmvError, Result};

/// Frobenius tolerance on `WᵀW - I` for a valid projection.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Tolerance on the Euclidean norm of ingested templates.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// A vector over `{-1, 0, +1}` with at most `budget` nonzero entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TernaryCode {
    values: Vec<i8>,
    budget: usize,
}

impl TernaryCode {
    pub fn new(values: Vec<i8>, budget: usize) -> Result<Self> {
        if budget == 0 || budget > values.len() {
            return Err(GmvError::param(format!(
                "sparsity budget {budget} outside [1, {}]",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(GmvError::param(format!("non-ternary entry {v}")));
        }
        let nnz = values.iter().filter(|v| **v != 0).count();
        if nnz > budget {
            return Err(GmvError::param(format!(
                "{nnz} nonzeros exceed sparsity budget {budget}"
            )));
        }
        Ok(Self { values, budget })
    }

    /// The all-zero code of length `len`.
    pub fn zeros(len: usize, budget: usize) -> Result<Self> {
        Self::new(vec![0; len], budget)
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0)
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.values.len(), self.values.iter().map(|v| f64::from(*v)))
    }
}

/// A `d × ℓ` matrix with orthonormal columns, `ℓ ≤ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    matrix: DMatrix<f64>,
}

impl ProjectionMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (d, l) = matrix.shape();
        if l == 0 || l > d {
            return Err(GmvError::param(format!(
                "projection must be d×ℓ with 1 ≤ ℓ ≤ d, got {d}×{l}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(GmvError::param("projection has non-finite entries"));
        }
        let err = orthonormality_error(&matrix);
        if err > ORTHONORMAL_TOL {
            return Err(GmvError::param(format!(
                "columns not orthonormal: ‖WᵀW − I‖_F = {err:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Template dimension `d`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Code length `ℓ`.
    pub fn code_len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.matrix)
    }
}

/// `‖WᵀW − I‖_F`.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let gram = w.tr_mul(w);
    (gram - DMatrix::<f64>::identity(w.ncols(), w.ncols())).norm()
}

/// Check that a vector is finite and has unit norm within [`UNIT_NORM_TOL`].
pub fn check_unit<St: Storage<f64, Dyn, U1>>(x: &Matrix<f64, Dyn, U1, St>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GmvError::param("template has non-finite entries"));
    }
    let n = x.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(GmvError::param(format!("template norm {n} is not 1")));
    }
    Ok(())
}

/// Keep the `s` largest-magnitude entries of `v` as their signs.
///
/// Ties in magnitude go to the lowest index. Exact zeros stay zero even when
/// selected, so the result may have fewer than `s` nonzeros.
pub fn ternarize(v: &[f64], s: usize) -> Result<TernaryCode> {
    let len = v.len();
    if s == 0 || s > len {
        return Err(GmvError::param(format!(
            "sparsity {s} outside [1, {len}]"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GmvError::numerical("ternarize input has non-finite entries"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    // stable: equal magnitudes keep ascending index order
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    let mut values = vec![0i8; len];
    for &i in &order[..s] {
        values[i] = if v[i] > 0.0 {
            1
        } else if v[i] < 0.0 {
            -1
        } else {
            0
        };
    }
    Ok(TernaryCode { values, budget: s })
}

/// Stack codes as the columns of a real `ℓ × n` matrix.
pub fn codes_matrix(codes: &[TernaryCode], len: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(len, codes.len());
    for (j, c) in codes.iter().enumerate() {
        for (i, v) in c.values().iter().enumerate() {
            out[(i, j)] = f64::from(*v);
        }
    }
    out
}

/// `e(x) = T_S(Wᵀx)`.
pub fn embed<St: Storage<f64, Dyn, U1>>(
    x: &Matrix<f64, Dyn, U1, St>,
    w: &ProjectionMatrix,
    s: usize,
) -> Result<TernaryCode> {
    if x.nrows() != w.dim() {
        return Err(GmvError::param(format!(
            "template has dimension {}, projection expects {}",
            x.nrows(),
            w.dim()
        )));
    }
    let projected = w.matrix().tr_mul(x);
    ternarize(projected.as_slice(), s)
}

/// Unit-norm reconstruction `W c / ‖W c‖`.
pub fn reconstruct_unit(code: &TernaryCode, w: &ProjectionMatrix) -> Result<DVector<f64>> {
    if code.len() != w.code_len() {
        return Err(GmvError::param(format!(
            "code length {} does not match projection width {}",
            code.len(),
            w.code_len()
        )));
    }
    if code.is_zero() {
        return Err(GmvError::DegenerateCode);
    }
    let y = w.matrix() * code.to_dvector();
    let n = y.norm();
    Ok(y / n)
}

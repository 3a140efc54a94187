//! Small dense linear-algebra helpers shared by the reduction and stepping
//! modules: symmetric eigen solves, SPD solves with refinement, submatrix
//! extraction by index list.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Extract `m[rows, cols]` as a new dense matrix.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Extract `v[rows]` as a new vector.
pub fn subvector(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| v[rows[i]])
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Maximum absolute deviation from symmetry, relative to the largest entry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Cholesky factorization with a descriptive error if the matrix is not SPD.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::SingularMatrix(format!("{what} is not positive definite")))
}

/// Solve `K X = B` for an SPD `K` with one step of iterative refinement.
///
/// The refinement keeps the boundary-flexibility columns accurate enough for
/// the tight static-exactness checks on stiffly conditioned meshes.
pub fn solve_spd_refined(k: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = cholesky(k, what)?;
    let mut x = chol.solve(b);
    let r = b - k * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// Eigen decomposition of a symmetric matrix, eigenvalues ascending.
///
/// Returns `(values, vectors)` with eigenvectors as columns, orthonormal.
pub fn sym_eig(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut a = m.clone();
    symmetrize(&mut a);
    let se = a.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = DVector::from_fn(n, |i, _| se.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Generalized symmetric eigen solve `K φ = λ M φ` with `M` SPD.
///
/// Reduced to a standard symmetric problem through the Cholesky congruence
/// `M = L Lᵀ`, so the returned eigenvectors are mass-normalized
/// (`φᵀ M φ = 1`). Eigenvalues ascending.
pub fn generalized_sym_eig(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    what: &str,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    if m.nrows() != n {
        return Err(Error::Dimension(format!(
            "{what}: K is {n}x{n} but M is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let chol = cholesky(m, &format!("{what}: mass matrix"))?;
    let l = chol.l();
    // A = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(k)
        .ok_or_else(|| Error::SingularMatrix(format!("{what}: Cholesky factor")))?;
    let mut a = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::SingularMatrix(format!("{what}: Cholesky factor")))?;
    symmetrize(&mut a);
    let (values, y) = sym_eig(&a);
    // φ = L⁻ᵀ y
    let phi = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::SingularMatrix(format!("{what}: Cholesky factor")))?;
    Ok((values, phi))
}

/// Relative residual `‖K φ − λ M φ‖ / (‖K‖_F ‖φ‖ + |λ| ‖M‖_F ‖φ‖)` of one
/// eigenpair; used to validate eigen solves against the configured tolerance.
pub fn eigpair_residual(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    lambda: f64,
    phi: &DVector<f64>,
) -> f64 {
    let r = k * phi - m * phi * lambda;
    let scale = k.norm() * phi.norm() + lambda.abs() * m.norm() * phi.norm();
    r.norm() / scale.max(f64::MIN_POSITIVE)
}

/// Relative difference of two matrices in the Frobenius norm.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

//! Dense linear-algebra primitives used by every certificate check.
//!
//! Semidefiniteness is judged from the extreme eigenvalue of the symmetric
//! part, so every verdict carries a signed margin. Least-squares problems go
//! through the SVD (rank revealing); normal equations are never formed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used when a caller does not supply one.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-8;

/// Outcome of a `S ⪯ tol·I` test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymVerdict {
    pub is_satisfied: bool,
    /// Largest eigenvalue of the symmetric part.
    pub margin: f64,
    pub tolerance: f64,
}

/// Least-squares factorization `basis · factor ≈ target`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorResult {
    pub factor: Option<Mat>,
    /// Frobenius norm of `basis · factor − target`.
    pub residual: f64,
    pub feasible: bool,
}

/// Solution of `AP = PÂ − BQ`.
#[derive(Debug, Clone, PartialEq)]
pub enum PairEmbedding {
    Feasible { a_hat: Mat, q: Mat, residual: f64 },
    Infeasible { residual: f64 },
}

impl PairEmbedding {
    pub fn residual(&self) -> f64 {
        match self {
            PairEmbedding::Feasible { residual, .. } | PairEmbedding::Infeasible { residual } => {
                *residual
            }
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, PairEmbedding::Feasible { .. })
    }
}

fn ensure_finite(m: &Mat, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

pub fn symmetrize(s: &Mat) -> Mat {
    (s + s.transpose()) * 0.5
}

// nalgebra 0.33's SVD and symmetric eigensolver lose accuracy on
// rank-deficient input (errors up to 1e-2 on 3×3 rank-one matrices), so the
// iterative decompositions go through faer.

fn to_faer(m: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD `m = U diag(s) Vᵀ` with `U` square in the row dimension, `V`
/// square in the column dimension and `s` nonincreasing. A failed
/// decomposition yields NaN factors so that downstream finiteness checks
/// trip instead of a panic.
struct FullSvd {
    u: Mat,
    s: Vec<f64>,
    v: Mat,
}

fn full_svd(m: &Mat) -> FullSvd {
    let (r, c) = m.shape();
    match to_faer(m).svd() {
        Ok(svd) => FullSvd {
            u: from_faer(svd.U()),
            s: svd.S().column_vector().iter().copied().collect(),
            v: from_faer(svd.V()),
        },
        Err(_) => FullSvd {
            u: Mat::from_element(r, r, f64::NAN),
            s: vec![f64::NAN; r.min(c)],
            v: Mat::from_element(c, c, f64::NAN),
        },
    }
}

fn sym_eigenvalues(s: &Mat) -> Vector {
    if s.nrows() == 0 {
        return Vector::zeros(0);
    }
    match to_faer(&symmetrize(s)).self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => Vector::from_vec(ev),
        Err(_) => Vector::from_element(s.nrows(), f64::NAN),
    }
}

/// Largest eigenvalue of `(S + Sᵀ)/2`; zero for an empty matrix.
pub fn max_eigenvalue(s: &Mat) -> f64 {
    let ev = sym_eigenvalues(s);
    if ev.is_empty() {
        0.0
    } else {
        ev.max()
    }
}

/// Smallest eigenvalue of `(S + Sᵀ)/2`; zero for an empty matrix.
pub fn min_eigenvalue(s: &Mat) -> f64 {
    let ev = sym_eigenvalues(s);
    if ev.is_empty() {
        0.0
    } else {
        ev.min()
    }
}

/// Largest real part of the eigenvalues of a square matrix; `-∞` when empty.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    match to_faer(a).eigenvalues() {
        Ok(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::NAN,
    }
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &Mat) -> Vector {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vector::zeros(0);
    }
    match to_faer(m).singular_values() {
        Ok(s) => Vector::from_vec(s),
        Err(_) => Vector::from_element(m.nrows().min(m.ncols()), f64::NAN),
    }
}

pub fn spectral_norm(m: &Mat) -> f64 {
    let s = singular_values(m);
    if s.is_empty() {
        0.0
    } else {
        s.max()
    }
}

/// Absolute tolerance `rel · max(1, ‖S‖₂)`.
pub fn scaled_tolerance(s: &Mat, rel: f64) -> f64 {
    rel * spectral_norm(s).max(1.0)
}

fn rank_cutoff(rows: usize, cols: usize, smax: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * smax
}

pub fn rank(m: &Mat) -> usize {
    let s = singular_values(m);
    if s.is_empty() {
        return 0;
    }
    let cutoff = rank_cutoff(m.nrows(), m.ncols(), s.max());
    s.iter().filter(|&&v| v > cutoff).count()
}

/// Moore–Penrose pseudo-inverse with the usual `max(m,n)·ε·σ_max` cutoff.
pub fn pseudo_inverse(m: &Mat) -> Mat {
    pseudo_inverse_with_cutoff(m, 0.0)
}

/// Pseudo-inverse discarding singular values up to
/// `max(cutoff, max(m,n)·ε·σ_max)`.
pub fn pseudo_inverse_with_cutoff(m: &Mat, cutoff: f64) -> Mat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let svd = full_svd(m);
    let smax = svd.s[0];
    if smax == 0.0 {
        return Mat::zeros(c, r);
    }
    let cutoff = rank_cutoff(r, c, smax).max(cutoff);
    let mut out = Mat::zeros(c, r);
    for (k, &sv) in svd.s.iter().enumerate() {
        // a NaN singular value must poison the result, not vanish
        if !(sv <= cutoff) {
            out += svd.v.column(k) * svd.u.column(k).transpose() * (1.0 / sv);
        }
    }
    out
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &Mat) -> Mat {
    null_space_with_cutoff(m, 0.0)
}

/// Null space treating singular values up to `max(cutoff, max(r,c)·ε·σ_max)`
/// as zero.
pub fn null_space_with_cutoff(m: &Mat, cutoff: f64) -> Mat {
    let (r, c) = m.shape();
    if c == 0 {
        return Mat::zeros(0, 0);
    }
    if r == 0 {
        return Mat::identity(c, c);
    }
    let svd = full_svd(m);
    let cutoff = rank_cutoff(r, c, svd.s[0]).max(cutoff);
    let kept = svd.s.iter().filter(|&&sv| !(sv <= cutoff)).count();
    svd.v.columns(kept, c - kept).into_owned()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &Mat) -> Mat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(r, 0);
    }
    let svd = full_svd(m);
    if svd.s[0] == 0.0 {
        return Mat::zeros(r, 0);
    }
    let cutoff = rank_cutoff(r, c, svd.s[0]);
    let kept = svd.s.iter().filter(|&&sv| !(sv <= cutoff)).count();
    svd.u.columns(0, kept).into_owned()
}

/// Reduced row-echelon basis of the span of the columns of `basis`.
///
/// Two bases of the same subspace map to the same output, which makes
/// downstream choices (H, Ŵ) reproducible. A single all-ones direction comes
/// back as the all-ones vector.
pub fn canonical_basis(basis: &Mat) -> Mat {
    let (k, d) = basis.shape();
    if k == 0 || d == 0 {
        return Mat::zeros(k, 0);
    }
    let mut t = basis.transpose();
    let scale = t.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut pivot_row = 0;
    for col in 0..k {
        if pivot_row == d {
            break;
        }
        let (best, best_val) = (pivot_row..d)
            .map(|r| (r, t[(r, col)].abs()))
            .fold((pivot_row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tol {
            continue;
        }
        t.swap_rows(pivot_row, best);
        let p = t[(pivot_row, col)];
        for j in 0..k {
            t[(pivot_row, j)] /= p;
        }
        for r in 0..d {
            if r != pivot_row {
                let factor = t[(r, col)];
                if factor != 0.0 {
                    for j in 0..k {
                        t[(r, j)] -= factor * t[(pivot_row, j)];
                    }
                }
            }
        }
        pivot_row += 1;
    }
    for v in t.iter_mut() {
        if v.abs() <= 1e-13 {
            *v = 0.0;
        }
    }
    t.rows(0, pivot_row).transpose()
}

pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Block matrix assembled from named blocks; unset blocks are zero.
pub(crate) struct BlockMatrix {
    rows: Vec<usize>,
    cols: Vec<usize>,
    data: Mat,
}

impl BlockMatrix {
    pub(crate) fn new(rows: &[usize], cols: &[usize]) -> Self {
        let data = Mat::zeros(rows.iter().sum(), cols.iter().sum());
        Self {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            data,
        }
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, name: &str, block: &Mat) -> Result<()> {
        let expected = (self.rows[i], self.cols[j]);
        if block.shape() != expected {
            return Err(Error::shape(format!("block {name}"), expected, block.shape()));
        }
        let r0: usize = self.rows[..i].iter().sum();
        let c0: usize = self.cols[..j].iter().sum();
        self.data.view_mut((r0, c0), expected).copy_from(block);
        Ok(())
    }

    pub(crate) fn into_inner(self) -> Mat {
        self.data
    }
}

/// Tests `(S + Sᵀ)/2 ⪯ tol·I`.
pub fn check_nsd(s: &Mat, tol: f64) -> Result<SymVerdict> {
    if !s.is_square() {
        return Err(Error::shape("check_nsd", (s.nrows(), s.nrows()), s.shape()));
    }
    ensure_finite(s, "check_nsd")?;
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("tolerance must be nonnegative, got {tol}")));
    }
    let margin = max_eigenvalue(s);
    Ok(SymVerdict {
        is_satisfied: margin <= tol,
        margin,
        tolerance: tol,
    })
}

/// Minimum-norm least-squares `X` with `basis · X ≈ target`; feasible exactly
/// when `im target ⊆ im basis` up to `tol · (1 + ‖target‖_F)`.
pub fn image_factor(target: &Mat, basis: &Mat, tol: f64) -> Result<FactorResult> {
    if target.nrows() != basis.nrows() {
        return Err(Error::Dimension {
            context: "image_factor".into(),
            expected: format!("{} rows", basis.nrows()),
            found: format!("{} rows", target.nrows()),
        });
    }
    ensure_finite(target, "image_factor target")?;
    ensure_finite(basis, "image_factor basis")?;
    let factor = pseudo_inverse(basis) * target;
    let residual = (basis * &factor - target).norm();
    let feasible = residual <= tol * (1.0 + target.norm());
    Ok(FactorResult {
        factor: feasible.then_some(factor),
        residual,
        feasible,
    })
}

/// Solves `primary · X + secondary · Y ≈ target`, taking the minimum-norm `Y`
/// and then the (unique when `primary` is injective) least-squares `X`.
///
/// Returns `(X, Y, residual)`. The residual equals the least-squares residual
/// of the stacked system `[primary secondary]`.
pub fn split_solve(target: &Mat, primary: &Mat, secondary: &Mat) -> (Mat, Mat, f64) {
    let n = target.nrows();
    let p_pinv = pseudo_inverse(primary);
    let complement = Mat::identity(n, n) - primary * &p_pinv;
    // rounding in the projector must not be inverted as if it were signal
    let cutoff = 1e-12 * spectral_norm(secondary).max(1.0);
    let y = pseudo_inverse_with_cutoff(&(&complement * secondary), cutoff) * (&complement * target);
    let x = &p_pinv * (target - secondary * &y);
    let residual = (primary * &x + secondary * &y - target).norm();
    (x, y, residual)
}

/// Solves `AP = PÂ − BQ`; feasible iff `im AP ⊆ im P + im B`.
///
/// Among all solutions the one with minimum-norm `Q` is returned; `Â` is then
/// determined by `P` (unique for injective `P`).
pub fn solve_pair_embedding(a: &Mat, b: &Mat, p: &Mat, tol: f64) -> Result<PairEmbedding> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::shape("A", (n, n), a.shape()));
    }
    if p.nrows() != n {
        return Err(Error::shape("P", (n, p.ncols()), p.shape()));
    }
    if b.nrows() != n {
        return Err(Error::shape("B", (n, b.ncols()), b.shape()));
    }
    ensure_finite(a, "A")?;
    ensure_finite(b, "B")?;
    ensure_finite(p, "P")?;
    let ap = a * p;
    let (a_hat, y, residual) = split_solve(&ap, p, b);
    if residual <= tol * ap.norm() {
        Ok(PairEmbedding::Feasible {
            a_hat,
            q: -y,
            residual,
        })
    } else {
        Ok(PairEmbedding::Infeasible { residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn complete_laplacian(n: usize) -> Mat {
        Mat::identity(n, n) * n as f64 - Mat::from_element(n, n, 1.0)
    }

    #[test]
    fn zero_matrix_is_nsd_with_zero_margin() {
        let v = check_nsd(&Mat::zeros(2, 2), 1e-9).unwrap();
        assert!(v.is_satisfied);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn negated_complete_laplacian_is_nsd() {
        let l = complete_laplacian(9);
        let v = check_nsd(&(-(&l + l.transpose())), 1e-9).unwrap();
        assert!(v.is_satisfied);
        assert!(v.margin.abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_fails_with_unit_margin() {
        let s = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let v = check_nsd(&s, 1e-9).unwrap();
        assert!(!v.is_satisfied);
        assert_relative_eq!(v.margin, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nsd_rejects_bad_input() {
        assert!(matches!(
            check_nsd(&Mat::zeros(2, 3), 0.0),
            Err(Error::Dimension { .. })
        ));
        let mut s = Mat::zeros(2, 2);
        s[(0, 1)] = f64::NAN;
        assert!(matches!(check_nsd(&s, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn image_factor_identity_and_full_image() {
        let z = Mat::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 3.0]);
        let r = image_factor(&z, &z, 1e-10).unwrap();
        assert!(r.feasible);
        assert_relative_eq!(r.factor.unwrap(), Mat::identity(2, 2), epsilon = 1e-12);

        let d = Mat::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 4.0, 0.0, 7.0]);
        let r = image_factor(&d, &Mat::identity(2, 2), 1e-10).unwrap();
        assert_relative_eq!(r.factor.unwrap(), d, epsilon = 1e-12);
    }

    #[test]
    fn image_factor_reports_unexplained_part() {
        // least squares over the 2x1 case: min_x (x-1)^2 + 1 = 1 at x = 1
        let target = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        let basis = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let r = image_factor(&target, &basis, 1e-10).unwrap();
        assert!(!r.feasible);
        assert!(r.factor.is_none());
        assert_relative_eq!(r.residual, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn image_factor_row_mismatch() {
        assert!(image_factor(&Mat::zeros(2, 1), &Mat::zeros(3, 1), 1e-9).is_err());
    }

    #[test]
    fn pair_embedding_zero_drift() {
        let a = Mat::zeros(3, 3);
        let b = Mat::identity(3, 3);
        let p = Mat::from_element(3, 1, 1.0);
        match solve_pair_embedding(&a, &b, &p, 1e-10).unwrap() {
            PairEmbedding::Feasible { a_hat, q, residual } => {
                assert_eq!(a_hat, Mat::zeros(1, 1));
                assert_eq!(q, Mat::zeros(3, 1));
                assert_eq!(residual, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pair_embedding_trivial() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]);
        let b = Mat::zeros(2, 1);
        match solve_pair_embedding(&a, &b, &Mat::identity(2, 2), 1e-10).unwrap() {
            PairEmbedding::Feasible { a_hat, q, .. } => {
                assert_relative_eq!(a_hat, a, epsilon = 1e-12);
                assert_relative_eq!(q, Mat::zeros(1, 2), epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn oscillator_blocks(n: usize) -> (Mat, Mat, Mat) {
        let i = Mat::identity(n, n);
        let z = Mat::zeros(n, n);
        let mut a = Mat::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&i);
        a.view_mut((n, 0), (n, n)).copy_from(&(-&i));
        a.view_mut((n, n), (n, n)).copy_from(&(&i * -0.5));
        let mut b = Mat::zeros(2 * n, n);
        b.view_mut((n, 0), (n, n)).copy_from(&i);
        let _ = z;
        let ones = Mat::from_element(n, 1, 1.0);
        let p = block_diag(&[ones.clone(), ones]);
        (a, b, p)
    }

    #[test]
    fn pair_embedding_oscillator_blocks() {
        let (a, b, p) = oscillator_blocks(10);
        match solve_pair_embedding(&a, &b, &p, 1e-10).unwrap() {
            PairEmbedding::Feasible { a_hat, q, .. } => {
                let expected = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.5]);
                assert_relative_eq!(a_hat, expected, epsilon = 1e-12);
                assert!(q.norm() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pair_embedding_infeasible_is_an_outcome() {
        // rotation does not keep span(e1) invariant and B = 0
        let a = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let p = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let out = solve_pair_embedding(&a, &Mat::zeros(2, 1), &p, 1e-10).unwrap();
        assert!(!out.is_feasible());
        assert_relative_eq!(out.residual(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn canonical_basis_normalizes_direction() {
        let v = Mat::from_element(3, 1, 1.0 / 3f64.sqrt());
        assert_relative_eq!(
            canonical_basis(&v),
            Mat::from_element(3, 1, 1.0),
            epsilon = 1e-12
        );
        let q = Mat::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]);
        assert_relative_eq!(canonical_basis(&q), Mat::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = Mat::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let ns = null_space(&m);
        assert_eq!(ns.shape(), (3, 2));
        assert!((&m * &ns).norm() < 1e-12);
        assert_eq!(null_space(&Mat::identity(2, 2)).ncols(), 0);
    }

    #[test]
    fn empty_shapes_are_handled() {
        assert_eq!(pseudo_inverse(&Mat::zeros(3, 0)).shape(), (0, 3));
        assert_eq!(rank(&Mat::zeros(0, 4)), 0);
        let v = check_nsd(&Mat::zeros(0, 0), 0.0).unwrap();
        assert!(v.is_satisfied);
        let r = image_factor(&Mat::zeros(2, 0), &Mat::zeros(2, 1), 1e-9).unwrap();
        assert!(r.feasible);
    }
}

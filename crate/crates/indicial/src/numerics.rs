//! Tolerance-governed numerical primitives shared by all analysis stages:
//! matrix inertia, nullspace extraction, truncated matrix power-series
//! arithmetic, and subspace tests.
//!
//! All rank decisions are singular-value based with a relative cutoff;
//! inertia counts are scale-aware so that Gram matrices built from
//! unnormalized bases are classified consistently.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;

/// Tolerances steering every rank, zero, and clustering decision.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_rel: f64,
    /// Absolute eigenvalue cutoff for inertia counts (scaled by the
    /// spectral radius estimate).
    pub zero_eig_abs: f64,
    /// Radius for merging numerically coincident roots.
    pub root_cluster: f64,
    /// Distance within which Im(sigma) is snapped to 0, -m/2, -m.
    pub line_snap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rel: 1e-9,
            zero_eig_abs: 1e-8,
            root_cluster: 2e-2,
            line_snap: 1e-1,
        }
    }
}

impl Tolerances {
    /// Checks positivity and the ordering `root_cluster < line_snap < m/4`
    /// required for unambiguous band classification of a weight-`m` pencil.
    pub fn validate(&self, m: u32) -> Result<()> {
        if !(self.rank_rel > 0.0 && self.zero_eig_abs > 0.0 && self.root_cluster > 0.0 && self.line_snap > 0.0)
        {
            return Err(Error::InvalidTolerances(
                "all tolerance fields must be strictly positive".into(),
            ));
        }
        if !(self.root_cluster < self.line_snap && self.line_snap < m as f64 / 4.0) {
            return Err(Error::InvalidTolerances(format!(
                "need root_cluster < line_snap < m/4, got {} / {} / {}",
                self.root_cluster,
                self.line_snap,
                m as f64 / 4.0
            )));
        }
        Ok(())
    }
}

/// Frobenius deviation of `m` from its conjugate transpose.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Singular value decomposition by one-sided Jacobi rotations, with factors
/// in descending singular-value order.
///
/// Small dense matrices only, which is all this crate needs. The
/// implementation is self-contained because the library eigensolver-based
/// SVD misassociates singular vectors on rank-deficient complex inputs,
/// and every rank decision here depends on that association.
pub struct SortedSvd {
    pub singular_values: Vec<f64>,
    /// `m x min(m, n)` left factor; columns beyond the numerical rank are
    /// zero (their singular values vanish).
    pub u: Option<CMatrix>,
    /// `min(n, n) x n` right factor, `v^H`; rows are always well-defined.
    pub v_t: Option<CMatrix>,
}

pub fn sorted_svd(m: &CMatrix, want_u: bool, want_vt: bool) -> SortedSvd {
    let (rows, cols) = m.shape();
    if rows >= cols {
        let (u, s, v) = jacobi_svd_tall(m);
        SortedSvd {
            singular_values: s,
            u: want_u.then_some(u),
            v_t: want_vt.then(|| v.adjoint()),
        }
    } else {
        // decompose the adjoint and swap factors
        let (u, s, v) = jacobi_svd_tall(&m.adjoint());
        SortedSvd {
            singular_values: s,
            u: want_u.then_some(v),
            v_t: want_vt.then(|| u.adjoint()),
        }
    }
}

/// One-sided Jacobi on a matrix with `rows >= cols`: returns `(U, S, V)`
/// with `A = U diag(S) V^H`, `U` of shape `rows x cols`, `V` unitary
/// `cols x cols`, `S` descending.
fn jacobi_svd_tall(a: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (rows, cols) = a.shape();
    let mut b = a.clone();
    let mut v = CMatrix::identity(cols, cols);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let tol2 = (1e-15 * scale) * (1e-15 * scale);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let bp = b.column(p).into_owned();
                let bq = b.column(q).into_owned();
                let app = bp.norm_squared();
                let aqq = bq.norm_squared();
                let apq = bp.dotc(&bq); // Gram entry b_p^H b_q
                let mag2 = apq.norm_sqr();
                off = off.max(mag2);
                if mag2 <= tol2 * 1e-4 {
                    continue;
                }
                // unitary 2x2 diagonalizing [[app, apq], [conj(apq), aqq]]
                let delta = 0.5 * (app - aqq);
                let r = (delta * delta + mag2).sqrt();
                let lam = 0.5 * (app + aqq) + r.copysign(if delta >= 0.0 { 1.0 } else { -1.0 });
                // eigenvector (apq, lam - app) for the eigenvalue closest to
                // the larger diagonal entry keeps the rotation small
                let e1 = apq;
                let e2 = C64::new(lam - app, 0.0);
                let nrm = (e1.norm_sqr() + e2.norm_sqr()).sqrt();
                if nrm == 0.0 {
                    continue;
                }
                let w11 = e1 / nrm;
                let w21 = e2 / nrm;
                // second column: orthogonal complement
                let w12 = -w21.conj();
                let w22 = w11.conj();
                for i in 0..rows {
                    let x = b[(i, p)];
                    let y = b[(i, q)];
                    b[(i, p)] = x * w11 + y * w21;
                    b[(i, q)] = x * w12 + y * w22;
                }
                for i in 0..cols {
                    let x = v[(i, p)];
                    let y = v[(i, q)];
                    v[(i, p)] = x * w11 + y * w21;
                    v[(i, q)] = x * w12 + y * w22;
                }
            }
        }
        if off <= tol2 {
            break;
        }
    }
    // column norms are the singular values; sort descending
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| b.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());
    let mut u = CMatrix::zeros(rows, cols);
    let mut vs = CMatrix::zeros(cols, cols);
    let mut s = Vec::with_capacity(cols);
    let floor = 1e-300;
    for (new, &old) in order.iter().enumerate() {
        s.push(norms[old]);
        if norms[old] > floor {
            u.set_column(new, &(b.column(old) / C64::new(norms[old], 0.0)));
        }
        vs.set_column(new, &v.column(old));
    }
    (u, s, vs)
}

/// Inertia `(n_minus, n_zero, n_plus)` of a Hermitian matrix.
///
/// Eigenvalues within `zero_eig_abs * max(1, spectral radius)` of zero are
/// counted as zero. Fails with [`Error::NotHermitian`] if the symmetry
/// deviation exceeds `rank_rel * ||M||`.
pub fn inertia(m: &CMatrix, tol: &Tolerances) -> Result<(usize, usize, usize)> {
    assert_eq!(m.nrows(), m.ncols(), "inertia needs a square matrix");
    if m.nrows() == 0 {
        return Ok((0, 0, 0));
    }
    let dev = hermitian_deviation(m);
    let scale = m.norm();
    if dev > tol.rank_rel * scale.max(1.0) {
        return Err(Error::NotHermitian {
            deviation: dev,
            tol: tol.rank_rel * scale.max(1.0),
        });
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eigs = h.symmetric_eigen().eigenvalues;
    let radius = eigs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let cut = tol.zero_eig_abs * radius.max(1.0);
    let mut counts = (0usize, 0usize, 0usize);
    for &lambda in eigs.iter() {
        if lambda < -cut {
            counts.0 += 1;
        } else if lambda > cut {
            counts.2 += 1;
        } else {
            counts.1 += 1;
        }
    }
    Ok(counts)
}

/// Real eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = (m + m.adjoint()).scale(0.5);
    let mut v: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Orthonormal basis of the nullspace of `m`, as matrix columns.
///
/// Rank is decided by `rank_rel` relative to the largest singular value.
pub fn nullspace(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    let smax = largest_singular_value(m);
    nullspace_with_threshold(m, tol.rank_rel * smax.max(f64::MIN_POSITIVE))
}

/// Nullspace with an absolute singular-value threshold.
pub fn nullspace_with_threshold(m: &CMatrix, abs_thresh: f64) -> CMatrix {
    let ncols = m.ncols();
    if ncols == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 || m.norm() <= 1e-250 {
        return CMatrix::identity(ncols, ncols);
    }
    // pad wide matrices with zero rows so the thin SVD exposes the full
    // right singular basis
    let m = if m.nrows() < ncols {
        let mut padded = CMatrix::zeros(ncols, ncols);
        padded.rows_mut(0, m.nrows()).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = sorted_svd(&m, false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let mut null_cols: Vec<usize> = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= abs_thresh {
            null_cols.push(i);
        }
    }
    let mut out = CMatrix::zeros(ncols, null_cols.len());
    for (k, &i) in null_cols.iter().enumerate() {
        out.set_column(k, &vt.row(i).adjoint());
    }
    out
}

/// Numerical rank at relative threshold `rank_rel`.
pub fn numerical_rank(m: &CMatrix, tol: &Tolerances) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd_unordered(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &x| a.max(x));
    sv.iter()
        .filter(|&&s| s > tol.rank_rel * smax.max(f64::MIN_POSITIVE))
        .count()
}

pub fn largest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd_unordered(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &x| a.max(x))
}

pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd_unordered(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &x| a.min(x))
}

/// Truncated matrix power series `sum_k coeffs[k] s^k`.
///
/// `order()` is the truncation order `N`; coefficients beyond `N` are
/// unknown, not zero. Arithmetic never extends orders silently.
#[derive(Debug, Clone)]
pub struct MatrixSeries {
    coeffs: Vec<CMatrix>,
}

impl MatrixSeries {
    /// Coefficients must share one shape; square shapes are required only
    /// for evaluation-as-operator uses (`identity`, `series_inv`), while
    /// rectangular series arise as off-diagonal blocks in Schur-complement
    /// reductions.
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DimensionMismatch(
                "matrix series needs at least the constant coefficient".into(),
            ));
        }
        let shape = coeffs[0].shape();
        for c in &coeffs {
            if c.shape() != shape {
                return Err(Error::DimensionMismatch(
                    "all series coefficients must have equal shape".into(),
                ));
            }
        }
        Ok(MatrixSeries { coeffs })
    }

    pub fn identity(dim: usize, order: usize) -> Self {
        let mut coeffs = vec![CMatrix::zeros(dim, dim); order + 1];
        coeffs[0] = CMatrix::identity(dim, dim);
        MatrixSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn ncols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    /// Dimension of a square series.
    pub fn dim(&self) -> usize {
        debug_assert_eq!(self.coeffs[0].nrows(), self.coeffs[0].ncols());
        self.coeffs[0].nrows()
    }

    pub fn coeff(&self, k: usize) -> &CMatrix {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    /// Lowest index with a nonzero coefficient (relative threshold), or
    /// `None` if every known coefficient vanishes.
    pub fn valuation(&self, rel_thresh: f64) -> Option<usize> {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        self.coeffs.iter().position(|c| c.norm() > rel_thresh * scale)
    }

    /// Drops the first `nu` coefficients (divides by `s^nu`).
    pub fn shift_down(&self, nu: usize) -> Result<Self> {
        if nu >= self.coeffs.len() {
            return Err(Error::TruncationExhausted { order: self.order() });
        }
        MatrixSeries::new(self.coeffs[nu..].to_vec())
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order());
        MatrixSeries {
            coeffs: self.coeffs[..=n].to_vec(),
        }
    }

    /// Congruence by a constant matrix: `u^H . self . u` coefficient-wise.
    pub fn congruence(&self, u: &CMatrix) -> Self {
        let uh = u.adjoint();
        MatrixSeries {
            coeffs: self.coeffs.iter().map(|c| &uh * c * u).collect(),
        }
    }

    pub fn sub(&self, other: &MatrixSeries) -> Result<Self> {
        if self.coeffs[0].shape() != other.coeffs[0].shape() {
            return Err(Error::DimensionMismatch("series shapes differ".into()));
        }
        let n = self.order().min(other.order());
        let coeffs = (0..=n).map(|k| &self.coeffs[k] - &other.coeffs[k]).collect();
        MatrixSeries::new(coeffs)
    }

    pub fn eval(&self, s: C64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.nrows(), self.ncols());
        for c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }
}

/// Cauchy product truncated at `min(a.order, b.order)`.
pub fn series_mul(a: &MatrixSeries, b: &MatrixSeries) -> Result<MatrixSeries> {
    if a.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(
            "series factors have mismatched inner dimensions".into(),
        ));
    }
    let n = a.order().min(b.order());
    let mut coeffs = vec![CMatrix::zeros(a.nrows(), b.ncols()); n + 1];
    for k in 0..=n {
        for i in 0..=k {
            coeffs[k] += a.coeff(i) * b.coeff(k - i);
        }
    }
    MatrixSeries::new(coeffs)
}

/// Inverse series by the standard recursion; requires an invertible
/// constant term (condition number below `1 / rank_rel`).
pub fn series_inv(a: &MatrixSeries, tol: &Tolerances) -> Result<MatrixSeries> {
    let dim = a.dim();
    let c0 = a.coeff(0).clone();
    let sv = c0.clone().svd_unordered(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |x, &y| x.max(y));
    let smin = sv.iter().fold(f64::INFINITY, |x, &y| x.min(y));
    if !(smin > tol.rank_rel * smax) || smax == 0.0 {
        return Err(Error::SingularConstantTerm {
            cond: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    let c0_inv = c0
        .lu()
        .try_inverse()
        .ok_or(Error::SingularConstantTerm { cond: smax / smin })?;
    let n = a.order();
    let mut inv = vec![CMatrix::zeros(dim, dim); n + 1];
    inv[0] = c0_inv.clone();
    for k in 1..=n {
        let mut acc = CMatrix::zeros(dim, dim);
        for i in 1..=k {
            acc += a.coeff(i) * &inv[k - i];
        }
        inv[k] = -&c0_inv * acc;
    }
    MatrixSeries::new(inv)
}

// ---------------------------------------------------------------------------
// Subspace utilities (principal-angle based, basis independent)
// ---------------------------------------------------------------------------

/// Orthonormalizes the columns of `m`, dropping numerically dependent ones.
///
/// Inputs are expected at unit scale (subspace bases); besides the relative
/// cutoff, singular values below an absolute floor of `1e-12` are treated
/// as zero so that exactly-zero columns cannot survive as junk directions.
pub fn orthonormalize(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return CMatrix::zeros(m.nrows(), 0);
    }
    let svd = sorted_svd(m, true, false);
    let u = svd.u.expect("svd requested u");
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cut = (tol.rank_rel * smax).max(1e-12);
    let rank = svd.singular_values.iter().filter(|&&s| s > cut).count();
    u.columns(0, rank).into_owned()
}

/// Whether `span(a)` is contained in `span(b)` up to `thresh` (largest
/// principal-angle sine).
pub fn subspace_contains(b: &CMatrix, a: &CMatrix, tol: &Tolerances, thresh: f64) -> bool {
    let aq = orthonormalize(a, tol);
    let bq = orthonormalize(b, tol);
    if aq.ncols() == 0 {
        return true;
    }
    if aq.ncols() > bq.ncols() {
        return false;
    }
    // residual of projecting a onto span(b)
    let proj = &bq * (bq.adjoint() * &aq);
    (&aq - proj).norm() <= thresh * (aq.ncols() as f64).sqrt()
}

pub fn subspace_eq(a: &CMatrix, b: &CMatrix, tol: &Tolerances, thresh: f64) -> bool {
    let ar = orthonormalize(a, tol);
    let br = orthonormalize(b, tol);
    ar.ncols() == br.ncols() && subspace_contains(&br, &ar, tol, thresh)
}

/// Orthonormal basis of `span(a) + span(b)`.
pub fn subspace_sum(a: &CMatrix, b: &CMatrix, tol: &Tolerances) -> CMatrix {
    let dim = a.nrows().max(b.nrows());
    let mut stacked = CMatrix::zeros(dim, a.ncols() + b.ncols());
    stacked.columns_mut(0, a.ncols()).copy_from(a);
    stacked.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    orthonormalize(&stacked, tol)
}

/// Orthonormal basis of `span(a) ∩ span(b)`.
pub fn subspace_intersect(a: &CMatrix, b: &CMatrix, tol: &Tolerances) -> CMatrix {
    let aq = orthonormalize(a, tol);
    let bq = orthonormalize(b, tol);
    if aq.ncols() == 0 || bq.ncols() == 0 {
        return CMatrix::zeros(a.nrows(), 0);
    }
    // x in both spans iff [aq | -bq] (u; v) = 0 with x = aq u
    let mut stacked = CMatrix::zeros(aq.nrows(), aq.ncols() + bq.ncols());
    stacked.columns_mut(0, aq.ncols()).copy_from(&aq);
    stacked.columns_mut(aq.ncols(), bq.ncols()).copy_from(&(-&bq));
    let ns = nullspace(&stacked, tol);
    if ns.ncols() == 0 {
        return CMatrix::zeros(a.nrows(), 0);
    }
    let u_part = ns.rows(0, aq.ncols()).into_owned();
    orthonormalize(&(&aq * u_part), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inertia_offdiagonal_pair() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let tol = Tolerances::default();
        assert_eq!(inertia(&m, &tol).unwrap(), (1, 0, 1));
    }

    #[test]
    fn inertia_zero_matrix() {
        let m = CMatrix::zeros(3, 3);
        let tol = Tolerances::default();
        assert_eq!(inertia(&m, &tol).unwrap(), (0, 3, 0));
    }

    #[test]
    fn inertia_near_zero_eigenvalue() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(2., 0.),
            c(-5., 0.),
            c(1e-14, 0.),
        ]));
        let tol = Tolerances {
            zero_eig_abs: 1e-10,
            ..Tolerances::default()
        };
        assert_eq!(inertia(&m, &tol).unwrap(), (1, 1, 1));
    }

    #[test]
    fn inertia_rejects_nonhermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        let tol = Tolerances::default();
        assert!(matches!(inertia(&m, &tol), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn inertia_unitary_congruence_invariant() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let tol = Tolerances::default();
        for _ in 0..20 {
            let n = rng.random_range(2..6);
            let a = CMatrix::from_fn(n, n, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let h = (&a + a.adjoint()).scale(0.5);
            // unitary from QR of a random matrix
            let b = CMatrix::from_fn(n, n, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let q = b.qr().q();
            let congruent = q.adjoint() * &h * &q;
            assert_eq!(inertia(&h, &tol).unwrap(), inertia(&congruent, &tol).unwrap());
        }
    }

    #[test]
    fn nullspace_identity_is_empty() {
        let tol = Tolerances::default();
        assert_eq!(nullspace(&CMatrix::identity(3, 3), &tol).ncols(), 0);
    }

    #[test]
    fn nullspace_rank_one() {
        let tol = Tolerances::default();
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(1., 0.), c(1., 0.)]);
        let ns = nullspace(&m, &tol);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).norm() < 1e-12);
        // spans (1,-1)/sqrt(2)
        let v = ns.column(0);
        assert!((v[0] + v[1]).norm() < 1e-12);
    }

    #[test]
    fn nullspace_zero_matrix_is_full() {
        let tol = Tolerances::default();
        let ns = nullspace(&CMatrix::zeros(2, 2), &tol);
        assert_eq!(ns.ncols(), 2);
    }

    #[test]
    fn nullspace_dim_plus_rank_is_cols() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let tol = Tolerances::default();
        for _ in 0..20 {
            let rows = rng.random_range(1..6);
            let cols = rng.random_range(1..6);
            let m = CMatrix::from_fn(rows, cols, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            assert_eq!(
                nullspace(&m, &tol).ncols() + numerical_rank(&m, &tol),
                cols
            );
        }
    }

    #[test]
    fn series_mul_identity() {
        let tol = Tolerances::default();
        let _ = tol;
        let id = MatrixSeries::identity(2, 2);
        let b = MatrixSeries::new(vec![
            CMatrix::from_row_slice(2, 2, &[c(1., 2.), c(0., 1.), c(3., 0.), c(0., 0.)]),
            CMatrix::identity(2, 2),
            CMatrix::zeros(2, 2),
        ])
        .unwrap();
        let prod = series_mul(&id, &b).unwrap();
        for k in 0..=2 {
            assert!((prod.coeff(k) - b.coeff(k)).norm() < 1e-14);
        }
    }

    #[test]
    fn series_mul_s_times_s() {
        // (s I)(s I) truncated at order 3 gives s^2 I
        let mut coeffs = vec![CMatrix::zeros(2, 2); 4];
        coeffs[1] = CMatrix::identity(2, 2);
        let a = MatrixSeries::new(coeffs).unwrap();
        let prod = series_mul(&a, &a).unwrap();
        assert!(prod.coeff(0).norm() < 1e-15);
        assert!(prod.coeff(1).norm() < 1e-15);
        assert!((prod.coeff(2) - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(prod.coeff(3).norm() < 1e-15);
    }

    #[test]
    fn series_inv_geometric() {
        // (I + s N)^{-1} = I - s N + s^2 N^2 - ...
        let tol = Tolerances::default();
        let n = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        let a = MatrixSeries::new(vec![CMatrix::identity(2, 2), n.clone(), CMatrix::zeros(2, 2)])
            .unwrap();
        let inv = series_inv(&a, &tol).unwrap();
        assert!((inv.coeff(0) - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((inv.coeff(1) + &n).norm() < 1e-14);
        assert!((inv.coeff(2) - &n * &n).norm() < 1e-14);
    }

    #[test]
    fn series_inv_constant() {
        let tol = Tolerances::default();
        let c0 = CMatrix::from_row_slice(2, 2, &[c(2., 1.), c(0., 0.), c(1., 0.), c(1., -1.)]);
        let a = MatrixSeries::new(vec![c0.clone()]).unwrap();
        let inv = series_inv(&a, &tol).unwrap();
        assert!((c0 * inv.coeff(0) - CMatrix::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn series_inv_rejects_singular() {
        let tol = Tolerances::default();
        let a = MatrixSeries::new(vec![CMatrix::zeros(2, 2), CMatrix::identity(2, 2)]).unwrap();
        assert!(matches!(
            series_inv(&a, &tol),
            Err(Error::SingularConstantTerm { .. })
        ));
    }

    #[test]
    fn series_inv_roundtrip_random() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let tol = Tolerances::default();
        for _ in 0..10 {
            let dim = rng.random_range(1..4);
            let order = 3;
            let mut coeffs: Vec<CMatrix> = (0..=order)
                .map(|_| {
                    CMatrix::from_fn(dim, dim, |_, _| {
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    })
                })
                .collect();
            coeffs[0] += CMatrix::identity(dim, dim).scale(2.0);
            let a = MatrixSeries::new(coeffs).unwrap();
            let inv = series_inv(&a, &tol).unwrap();
            let prod = series_mul(&a, &inv).unwrap();
            assert!((prod.coeff(0) - CMatrix::identity(dim, dim)).norm() < 1e-10);
            for k in 1..=order {
                assert!(prod.coeff(k).norm() < 1e-10, "order {k} residual");
            }
            // inv of inv returns the original up to truncation
            let back = series_inv(&inv, &tol).unwrap();
            for k in 0..=order {
                assert!((back.coeff(k) - a.coeff(k)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn subspace_ops_basic() {
        let tol = Tolerances::default();
        let e1 = CMatrix::from_column_slice(3, 1, &[c(1., 0.), c(0., 0.), c(0., 0.)]);
        let e12 = CMatrix::from_column_slice(
            3,
            2,
            &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)],
        );
        let e2 = CMatrix::from_column_slice(3, 1, &[c(0., 0.), c(1., 0.), c(0., 0.)]);
        assert!(subspace_contains(&e12, &e1, &tol, 1e-8));
        assert!(!subspace_contains(&e1, &e12, &tol, 1e-8));
        assert_eq!(subspace_intersect(&e12, &e2, &tol).ncols(), 1);
        assert_eq!(subspace_sum(&e1, &e2, &tol).ncols(), 2);
        assert!(subspace_eq(&e12, &subspace_sum(&e1, &e2, &tol), &tol, 1e-8));
    }
}

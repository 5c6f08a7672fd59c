//! Principal parts of meromorphic germs annihilated by the pencil modulo
//! holomorphic germs, the nilpotent action of multiplication by
//! `sigma - sigma0`, and the dictionary to singular functions
//! `e_j log^j(x) x^{i sigma0}`.
//!
//! A principal part `(f_1, .., f_L)` (with `f_l` the coefficient of
//! `(sigma - sigma0)^{-l}`) is annihilated by `p` iff for every `r >= 1`
//! `sum_k p_k f_{k+r} = 0`, where `p_k` are the Taylor coefficients of `p`
//! at `sigma0`. This is a block-Toeplitz nullspace problem. The
//! multiplication action drops indices, `(f_1, .., f_L) -> (f_2, .., f_L, 0)`,
//! and preserves the kernel exactly, so Jordan chains generated from
//! numerically selected chain tops satisfy the shift relations without
//! additional error.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::{self, CMatrix, CVector, Tolerances};
use crate::pencil::PencilSpec;

/// Principal part of a Laurent expansion at `sigma0`:
/// `sum_l f[l-1] (sigma - sigma0)^{-l}`.
#[derive(Debug, Clone)]
pub struct PrincipalPart {
    pub sigma0: C64,
    pub f: Vec<CVector>,
}

impl PrincipalPart {
    pub fn pole_order(&self) -> usize {
        self.f.len()
    }

    pub fn dim(&self) -> usize {
        self.f.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn norm(&self) -> f64 {
        self.f.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }

    /// Multiplication by `(sigma - sigma0)`: shifts coefficients down and
    /// drops the former residue term into the holomorphic part. The zero
    /// germ is represented with a single zero coefficient so the vector
    /// dimension survives.
    pub fn shifted(&self) -> PrincipalPart {
        let mut f = self.f[1..].to_vec();
        if f.is_empty() {
            f.push(CVector::zeros(self.dim()));
        }
        PrincipalPart {
            sigma0: self.sigma0,
            f,
        }
    }

    /// Stacks `(f_1; ..; f_len)` into one column, zero-padded to `len`.
    pub fn stacked(&self, len: usize) -> CVector {
        let n = self.dim();
        let mut out = CVector::zeros(len * n);
        for (l, v) in self.f.iter().enumerate().take(len) {
            out.rows_mut(l * n, n).copy_from(v);
        }
        out
    }

    pub fn from_stacked(sigma0: C64, stacked: &CVector, n: usize) -> PrincipalPart {
        let len = stacked.len() / n;
        let mut f: Vec<CVector> = (0..len)
            .map(|l| stacked.rows(l * n, n).into_owned())
            .collect();
        // trim trailing numerically-zero coefficients
        let scale = f.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        while f.len() > 1 && f.last().unwrap().norm() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            f.pop();
        }
        PrincipalPart { sigma0, f }
    }

    pub fn scale(&self, factor: C64) -> PrincipalPart {
        PrincipalPart {
            sigma0: self.sigma0,
            f: self.f.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Log-coefficient data of a singular function
/// `u = omega * sum_j e[j] log^j(x) x^{i sigma0}`.
#[derive(Debug, Clone)]
pub struct LogCoefficients {
    pub sigma0: C64,
    pub e: Vec<CVector>,
}

impl LogCoefficients {
    pub fn top_degree(&self) -> usize {
        self.e.len().saturating_sub(1)
    }
}

/// Principal part of the Mellin transform of the cutoff quasi-polynomial:
/// `f_{j+1} = (-1)^j j! i^{j+1} e_j`. The cutoff only shifts the
/// holomorphic part.
pub fn germ_from_log_coeffs(u: &LogCoefficients) -> PrincipalPart {
    let f = u
        .e
        .iter()
        .enumerate()
        .map(|(j, e)| e * dictionary_factor(j))
        .collect();
    PrincipalPart {
        sigma0: u.sigma0,
        f,
    }
}

/// Inverse of [`germ_from_log_coeffs`].
pub fn log_coeffs_from_germ(g: &PrincipalPart) -> LogCoefficients {
    let e = g
        .f
        .iter()
        .enumerate()
        .map(|(j, f)| f * (C64::new(1.0, 0.0) / dictionary_factor(j)))
        .collect();
    LogCoefficients {
        sigma0: g.sigma0,
        e,
    }
}

fn dictionary_factor(j: usize) -> C64 {
    // (-1)^j j! i^(j+1)
    let mut fact = 1.0f64;
    for k in 1..=j {
        fact *= k as f64;
    }
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    C64::new(0.0, 1.0).powu(j as u32 + 1) * C64::new(sign * fact, 0.0)
}

/// Basis of the germ space at one root, organized into Jordan chains of the
/// shift action. Chain `c` occupies basis indices
/// `chain_start[c] .. chain_start[c] + partial_mults[c]`, ordered from the
/// bottom of the chain (pole order 1) to its top.
#[derive(Debug, Clone)]
pub struct GermBasis {
    pub sigma0: C64,
    pub basis: Vec<PrincipalPart>,
    /// Matrix of the shift `M_sigma - sigma0` in this basis (exact 0/1
    /// Jordan structure).
    pub shift: CMatrix,
    /// Jordan block sizes, descending.
    pub partial_mults: Vec<usize>,
    pub chain_start: Vec<usize>,
}

impl GermBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn max_pole_order(&self) -> usize {
        self.partial_mults.first().copied().unwrap_or(0)
    }

    /// Basis indices at chain positions `<= depth`, i.e. a basis of
    /// `ker(shift^depth)`.
    pub fn kernel_power_indices(&self, depth: usize) -> Vec<usize> {
        let mut idx = Vec::new();
        for (c, &len) in self.partial_mults.iter().enumerate() {
            for pos in 0..len.min(depth) {
                idx.push(self.chain_start[c] + pos);
            }
        }
        idx
    }

    pub fn dim_kernel_power(&self, depth: usize) -> usize {
        self.partial_mults.iter().map(|&l| l.min(depth)).sum()
    }
}

/// Computes the germ space at `sigma0` as a block-Toeplitz nullspace with
/// pole orders up to `l_max`, structured into shift chains.
///
/// When `expected_dim` is given (the algebraic multiplicity of the root) a
/// differing computed dimension is a tolerance failure.
pub fn kernel_space(
    p: &PencilSpec,
    sigma0: C64,
    l_max: usize,
    tol: &Tolerances,
    expected_dim: Option<usize>,
) -> Result<GermBasis> {
    assert!(l_max >= 1, "pole order bound must be at least 1");
    let n = p.dim();
    let t = toeplitz_matrix(p, sigma0, l_max);
    // rank scale from the full local Taylor data: the Toeplitz block itself
    // can be near zero (e.g. a full-kernel root of a linear pencil)
    let kernel = numerics::nullspace_with_threshold(&t, tol.rank_rel * local_scale(p, sigma0, l_max));
    let d = kernel.ncols();
    if let Some(expected) = expected_dim {
        if d != expected {
            return Err(Error::GermDimensionMismatch {
                sigma0,
                got: d,
                expected,
            });
        }
    }
    if d == 0 {
        return Ok(GermBasis {
            sigma0,
            basis: Vec::new(),
            shift: CMatrix::zeros(0, 0),
            partial_mults: Vec::new(),
            chain_start: Vec::new(),
        });
    }

    // subspaces N_j = kernel ∩ ker(Z^j): stacked coefficients above pole
    // order j vanish
    let mut n_bases: Vec<CMatrix> = Vec::with_capacity(l_max + 2);
    n_bases.push(CMatrix::zeros(l_max * n, 0)); // N_0
    for j in 1..=l_max {
        if j == l_max {
            n_bases.push(kernel.clone());
        } else {
            let tail = kernel.rows(j * n, (l_max - j) * n).into_owned();
            let coords = numerics::nullspace_with_threshold(&tail, 1e-8);
            n_bases.push(numerics::orthonormalize(&(&kernel * coords), tol));
        }
    }
    n_bases.push(kernel.clone()); // N_{l_max + 1} = N_{l_max}

    let dims: Vec<usize> = n_bases.iter().map(|b| b.ncols()).collect();

    // chain tops per level, highest level first
    let mut chains: Vec<Vec<CVector>> = Vec::new();
    for ell in (1..=l_max).rev() {
        let expected_blocks =
            (2 * dims[ell]) as i64 - dims[ell + 1] as i64 - dims[ell - 1] as i64;
        if expected_blocks < 0 {
            return Err(Error::InvariantMismatch(format!(
                "kernel filtration at {sigma0} is not concave at level {ell}"
            )));
        }
        if expected_blocks == 0 {
            continue;
        }
        // covered = N_{ell-1} + Z * N_{ell+1}
        let shifted = shift_columns(&n_bases[ell + 1], n);
        let covered = numerics::subspace_sum(&n_bases[ell - 1], &shifted, tol);
        let tops = complement_in(&n_bases[ell], &covered, tol);
        if tops.ncols() != expected_blocks as usize {
            return Err(Error::InvariantMismatch(format!(
                "found {} chain tops of height {ell} at {sigma0}, expected {expected_blocks}",
                tops.ncols()
            )));
        }
        for k in 0..tops.ncols() {
            let top = tops.column(k).into_owned();
            let top = &top / C64::new(top.norm().max(f64::MIN_POSITIVE), 0.0);
            eprintln!("DBG ell={ell} top {k}: Tres {:.3e}", (&t * &top).norm());
            let mut chain = vec![top.clone()];
            let mut cur = top;
            for _ in 1..ell {
                cur = shift_vector(&cur, n);
                eprintln!("DBG   shift: norm {:.3e} Tres {:.3e}", cur.norm(), (&t * &cur).norm());
                chain.push(cur.clone());
            }
            chain.reverse(); // bottom (pole order 1) first
            chains.push(chain);
        }
    }

    let total: usize = chains.iter().map(|c| c.len()).sum();
    if total != d {
        return Err(Error::InvariantMismatch(format!(
            "chain decomposition at {sigma0} spans {total} of {d} kernel dimensions"
        )));
    }

    // residual check: every chain vector must satisfy the Toeplitz conditions
    let t_norm = numerics::largest_singular_value(&t);
    for chain in &chains {
        for v in chain {
            let r = (&t * v).norm();
            if r > 1e-6 * t_norm.max(1.0) * v.norm() {
                return Err(Error::InvariantMismatch(format!(
                    "chain vector at {sigma0} violates the germ conditions (residual {r:.3e})"
                )));
            }
        }
    }

    let mut basis = Vec::with_capacity(d);
    let mut partial_mults = Vec::with_capacity(chains.len());
    let mut chain_start = Vec::with_capacity(chains.len());
    let mut shift = CMatrix::zeros(d, d);
    for chain in &chains {
        let start = basis.len();
        chain_start.push(start);
        partial_mults.push(chain.len());
        for (pos, v) in chain.iter().enumerate() {
            basis.push(PrincipalPart::from_stacked(sigma0, v, n));
            if pos > 0 {
                shift[(start + pos - 1, start + pos)] = C64::new(1.0, 0.0);
            }
        }
    }

    Ok(GermBasis {
        sigma0,
        basis,
        shift,
        partial_mults,
        chain_start,
    })
}

/// Whether the singular function with the given log coefficients belongs to
/// the germ space at its base point: its principal part must satisfy the
/// block-Toeplitz conditions.
pub fn membership(p: &PencilSpec, u: &LogCoefficients, tol: &Tolerances) -> bool {
    let g = germ_from_log_coeffs(u);
    let l = g.pole_order();
    let t = toeplitz_matrix(p, u.sigma0, l);
    let v = g.stacked(l);
    let vn = v.norm();
    if vn == 0.0 {
        return true;
    }
    (&t * &v).norm() <= tol.rank_rel.max(1e-10) * 100.0 * local_scale(p, u.sigma0, l) * vn
}

/// Norm scale of the Taylor data of `p` at `sigma0` through order `l`.
fn local_scale(p: &PencilSpec, sigma0: C64, l: usize) -> f64 {
    let taylor = p.taylor_at(sigma0, l);
    taylor
        .coeffs()
        .iter()
        .map(|c| c.norm())
        .fold(f64::MIN_POSITIVE, f64::max)
}

/// The block-Toeplitz matrix encoding the germ conditions at pole orders
/// `1..=l`: block `(r-1, c-1)` is the Taylor coefficient `p_{c-r}`.
pub fn toeplitz_matrix(p: &PencilSpec, sigma0: C64, l: usize) -> CMatrix {
    let n = p.dim();
    let taylor = p.taylor_at(sigma0, l.saturating_sub(1));
    let mut t = CMatrix::zeros(l * n, l * n);
    for r in 1..=l {
        for c in r..=l {
            t.view_mut(((r - 1) * n, (c - 1) * n), (n, n))
                .copy_from(taylor.coeff(c - r));
        }
    }
    t
}

/// Applies the coefficient shift `Z` to a stacked germ vector.
fn shift_vector(v: &CVector, n: usize) -> CVector {
    let l = v.len() / n;
    let mut out = CVector::zeros(v.len());
    if l > 1 {
        out.rows_mut(0, (l - 1) * n).copy_from(&v.rows(n, (l - 1) * n));
    }
    out
}

fn shift_columns(m: &CMatrix, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        out.set_column(c, &shift_vector(&m.column(c).into_owned(), n));
    }
    out
}

/// Orthonormal complement of `span(w)` inside `span(v)`.
fn complement_in(v: &CMatrix, w: &CMatrix, tol: &Tolerances) -> CMatrix {
    let wq = numerics::orthonormalize(w, tol);
    let mut proj = v.clone();
    if wq.ncols() > 0 {
        proj -= &wq * (wq.adjoint() * v);
    }
    let svd = numerics::sorted_svd(&proj, true, false);
    let u = svd.u.expect("svd requested u");
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-8).count();
    u.columns(0, rank).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar_pencil(m: u32, coeffs: &[C64]) -> PencilSpec {
        PencilSpec::new(
            m,
            coeffs
                .iter()
                .map(|&z| CMatrix::from_element(1, 1, z))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn simple_root_single_chain() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let g = kernel_space(&p, c(0., -1.), 1, &tol, Some(1)).unwrap();
        assert_eq!(g.dim(), 1);
        assert_eq!(g.partial_mults, vec![1]);
        assert!(g.shift.norm() < 1e-15);
    }

    #[test]
    fn double_root_single_chain_of_two() {
        // (sigma + i)^2: conditions are vacuous up to order 2
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let g = kernel_space(&p, c(0., -1.), 2, &tol, Some(2)).unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.partial_mults, vec![2]);
        // shift maps the top (index 1) to the bottom (index 0)
        assert!((g.shift[(0, 1)] - c(1., 0.)).norm() < 1e-15);
        assert_eq!(g.basis[0].pole_order(), 1);
        assert_eq!(g.basis[1].pole_order(), 2);
    }

    #[test]
    fn block_diag_mixed_chains() {
        // diag(sigma + i, (sigma + i)^2): partial multiplicities [2, 1]
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(-1., 0.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(0., 2.)]);
        let a2 = CMatrix::from_row_slice(2, 2, &[z, z, z, c(1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1, a2]).unwrap();
        let tol = Tolerances::default();
        let g = kernel_space(&p, c(0., -1.), 3, &tol, Some(3)).unwrap();
        assert_eq!(g.dim(), 3);
        assert_eq!(g.partial_mults, vec![2, 1]);
        assert_eq!(g.chain_start, vec![0, 2]);
    }

    #[test]
    fn kernel_dim_stable_when_raising_l_max() {
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(-1., 0.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(0., 2.)]);
        let a2 = CMatrix::from_row_slice(2, 2, &[z, z, z, c(1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1, a2]).unwrap();
        let tol = Tolerances::default();
        for l_max in 3..6 {
            let g = kernel_space(&p, c(0., -1.), l_max, &tol, None).unwrap();
            assert_eq!(g.dim(), 3, "dim changed at l_max = {l_max}");
            assert_eq!(g.partial_mults, vec![2, 1]);
        }
    }

    #[test]
    fn dictionary_no_logs() {
        let v = CVector::from_vec(vec![c(2., 1.)]);
        let u = LogCoefficients {
            sigma0: c(0., -1.),
            e: vec![v.clone()],
        };
        let g = germ_from_log_coeffs(&u);
        assert_eq!(g.pole_order(), 1);
        assert!((&g.f[0] - &v * c(0., 1.)).norm() < 1e-15);
    }

    #[test]
    fn dictionary_pure_log_term() {
        let w = CVector::from_vec(vec![c(1., -3.)]);
        let u = LogCoefficients {
            sigma0: c(0.5, -1.),
            e: vec![CVector::zeros(1), w.clone()],
        };
        let g = germ_from_log_coeffs(&u);
        assert_eq!(g.pole_order(), 2);
        assert!(g.f[0].norm() < 1e-15);
        // (-1)^1 1! i^2 = +1
        assert!((&g.f[1] - &w).norm() < 1e-15);
    }

    #[test]
    fn dictionary_roundtrip() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let k = rng.random_range(1..5);
            let e: Vec<CVector> = (0..k)
                .map(|_| {
                    CVector::from_fn(2, |_, _| {
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    })
                })
                .collect();
            let u = LogCoefficients {
                sigma0: c(0.3, -0.7),
                e: e.clone(),
            };
            let back = log_coeffs_from_germ(&germ_from_log_coeffs(&u));
            for (a, b) in back.e.iter().zip(e.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dictionary_is_linear() {
        let sigma0 = c(0.1, -0.9);
        let e1 = vec![CVector::from_vec(vec![c(1., 0.), c(0., 2.)])];
        let e2 = vec![CVector::from_vec(vec![c(0., -1.), c(3., 0.)])];
        let alpha = c(0.7, -0.2);
        let sum = LogCoefficients {
            sigma0,
            e: vec![&e1[0] * alpha + &e2[0]],
        };
        let g1 = germ_from_log_coeffs(&LogCoefficients { sigma0, e: e1 });
        let g2 = germ_from_log_coeffs(&LogCoefficients { sigma0, e: e2 });
        let gs = germ_from_log_coeffs(&sum);
        assert!((&gs.f[0] - (&g1.f[0] * alpha + &g2.f[0])).norm() < 1e-14);
    }

    #[test]
    fn membership_kernel_vector() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        // u = omega v x^{i sigma0} with p(sigma0) v = 0 (scalar: any v)
        let yes = LogCoefficients {
            sigma0: c(0., -1.),
            e: vec![CVector::from_vec(vec![c(1., 0.)])],
        };
        assert!(membership(&p, &yes, &tol));
        // off the root the order-1 condition p_0 f_1 = 0 fails
        let no = LogCoefficients {
            sigma0: c(0.5, -1.),
            e: vec![CVector::from_vec(vec![c(1., 0.)])],
        };
        assert!(!membership(&p, &no, &tol));
    }

    #[test]
    fn membership_vector_outside_kernel() {
        // p = diag(sigma + i, 1) at -i: kernel of p(sigma0) is e1 only
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(1., 0.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, z]);
        let p = PencilSpec::new(2, vec![a0, a1]).unwrap();
        let tol = Tolerances::default();
        let inside = LogCoefficients {
            sigma0: c(0., -1.),
            e: vec![CVector::from_vec(vec![c(1., 0.), z])],
        };
        let outside = LogCoefficients {
            sigma0: c(0., -1.),
            e: vec![CVector::from_vec(vec![z, c(1., 0.)])],
        };
        assert!(membership(&p, &inside, &tol));
        assert!(!membership(&p, &outside, &tol));
    }

    #[test]
    fn membership_log_chain_element() {
        // (sigma + i)^2: the pure-log element has germ (f1, f2) = (0, w),
        // annihilated because p_0 = p_1 = 0
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let u = LogCoefficients {
            sigma0: c(0., -1.),
            e: vec![CVector::zeros(1), CVector::from_vec(vec![c(1., 0.)])],
        };
        assert!(membership(&p, &u, &tol));
    }

    #[test]
    fn shift_of_basis_stays_in_span() {
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(-1., 0.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(0., 2.)]);
        let a2 = CMatrix::from_row_slice(2, 2, &[z, z, z, c(1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1, a2]).unwrap();
        let tol = Tolerances::default();
        let g = kernel_space(&p, c(0., -1.), 3, &tol, Some(3)).unwrap();
        let l = g.max_pole_order();
        let span = {
            let cols: Vec<CVector> = g.basis.iter().map(|b| b.stacked(l)).collect();
            CMatrix::from_columns(&cols)
        };
        for b in &g.basis {
            let shifted = b.shifted().stacked(l);
            let single = CMatrix::from_columns(&[shifted]);
            assert!(numerics::subspace_contains(&span, &single, &tol, 1e-9));
        }
    }
}

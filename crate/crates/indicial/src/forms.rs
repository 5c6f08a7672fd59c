//! The indefinite inner products attached to the pencil: the residue
//! pairing between principal parts at star-paired roots, Gram matrices,
//! the level forms and sign characteristic at critical roots, and the
//! recursive reduction of the localized pencil to diagonal `±s^l` blocks
//! as an independent route to the same invariants.
//!
//! With `p_k` the Taylor coefficients of `p` at `sigma0`, principal parts
//! `u = sum_l f_l (sigma - sigma0)^{-l}` at `sigma0` and
//! `v = sum_j g_j (sigma - sigma1)^{-j}` at `sigma1 = sigma0*`, the pairing
//!
//! `[u, v] = res_{sigma = sigma0} < p(sigma) u(sigma), v(sigma*) >`
//!
//! reduces to the convolution `sum_{k = l + j - 1} < p_k f_l, g_j >`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::germs::{GermBasis, PrincipalPart};
use crate::numerics::{self, CMatrix, Tolerances};
use crate::pencil::{star, PencilSpec};

/// Sign-characteristic data of one critical root: for each level `l`, the
/// inertia of the Hermitian form `[u, v]_l = [shift^{l-1} u, v]` on
/// `ker(shift^l)`.
#[derive(Debug, Clone)]
pub struct CriticalRootInvariants {
    pub sigma0: C64,
    pub per_ell: Vec<EllInvariants>,
    /// `sum over odd l of (m_plus - m_minus)`; the root's contribution to
    /// the signature of the quotient pairing.
    pub signature_contribution: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EllInvariants {
    pub ell: usize,
    pub m0: usize,
    pub m_plus: usize,
    pub m_minus: usize,
}

/// Block data `(l, n_plus, n_minus)` of the diagonal `±s^l` reduction.
#[derive(Debug, Clone)]
pub struct NormalFormBlocks {
    pub sigma0: C64,
    /// Aggregated per block size, ascending in `l`; only sizes with
    /// `n_plus + n_minus > 0` appear.
    pub blocks: Vec<(usize, usize, usize)>,
}

impl NormalFormBlocks {
    pub fn total_multiplicity(&self) -> usize {
        self.blocks.iter().map(|&(l, p, m)| l * (p + m)).sum()
    }

    pub fn counts_for(&self, ell: usize) -> (usize, usize) {
        self.blocks
            .iter()
            .find(|&&(l, _, _)| l == ell)
            .map(|&(_, p, m)| (p, m))
            .unwrap_or((0, 0))
    }
}

/// Residue pairing of two principal parts attached to star-paired roots.
pub fn residue_pairing(
    p: &PencilSpec,
    u: &PrincipalPart,
    v: &PrincipalPart,
    tol: &Tolerances,
) -> Result<C64> {
    let paired = (star(u.sigma0, p.weight()) - v.sigma0).norm() <= tol.root_cluster;
    if !paired {
        return Err(Error::NotStarPaired(u.sigma0, v.sigma0));
    }
    Ok(residue_pairing_unchecked(p, u, v))
}

fn residue_pairing_unchecked(p: &PencilSpec, u: &PrincipalPart, v: &PrincipalPart) -> C64 {
    let lu = u.pole_order();
    let lv = v.pole_order();
    let taylor = p.taylor_at(u.sigma0, lu + lv);
    let mut acc = C64::new(0.0, 0.0);
    for (li, f) in u.f.iter().enumerate() {
        let l = li + 1;
        for (ji, g) in v.f.iter().enumerate() {
            let j = ji + 1;
            let k = l + j - 1;
            if k <= taylor.order() {
                acc += g.dotc(&(taylor.coeff(k) * f));
            }
        }
    }
    acc
}

/// Gram matrix of the pairing between two germ bases at star-paired roots:
/// entry `(i, j)` pairs `left.basis[i]` with `right.basis[j]`.
pub fn gram_matrix(
    p: &PencilSpec,
    left: &GermBasis,
    right: &GermBasis,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let paired = (star(left.sigma0, p.weight()) - right.sigma0).norm() <= tol.root_cluster;
    if !paired {
        return Err(Error::NotStarPaired(left.sigma0, right.sigma0));
    }
    let mut g = CMatrix::zeros(left.dim(), right.dim());
    for (i, u) in left.basis.iter().enumerate() {
        for (j, v) in right.basis.iter().enumerate() {
            g[(i, j)] = residue_pairing_unchecked(p, u, v);
        }
    }
    Ok(g)
}

/// Numerical contour integral `(1/2 pi i) oint < p u(sigma), v(sigma*) >`
/// around `sigma0 = u.sigma0`; independent of the convolution route and
/// defined for arbitrary root pairs (it vanishes for non-star-paired germ
/// vectors).
pub fn contour_pairing(p: &PencilSpec, u: &PrincipalPart, v: &PrincipalPart) -> C64 {
    let m = p.weight();
    let pole_v = star(v.sigma0, m); // v(sigma*) has its pole here
    let dist = (pole_v - u.sigma0).norm();
    let radius = if dist < 1e-9 { 0.1 } else { (dist / 3.0).min(0.1) };

    let eval = |sigma: C64| -> C64 {
        let mut uval = nalgebra::DVector::zeros(u.dim());
        let du = sigma - u.sigma0;
        let mut pw = C64::new(1.0, 0.0);
        for f in &u.f {
            pw /= du;
            uval += f * pw;
        }
        let w = p.evaluate(sigma) * uval;
        let zs = star(sigma, m) - v.sigma0;
        let mut vval = nalgebra::DVector::zeros(v.dim());
        let mut pwv = C64::new(1.0, 0.0);
        for g in &v.f {
            pwv /= zs;
            vval += g * pwv;
        }
        vval.dotc(&w)
    };

    let mut npts = 64usize;
    let mut prev = C64::new(f64::NAN, f64::NAN);
    loop {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..npts {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / npts as f64;
            let dir = C64::new(theta.cos(), theta.sin());
            acc += eval(u.sigma0 + dir * radius) * dir;
        }
        let val = acc * radius / npts as f64;
        if !prev.re.is_nan() && (val - prev).norm() <= 1e-12 * val.norm().max(1.0) {
            return val;
        }
        prev = val;
        npts *= 2;
        if npts > 1 << 13 {
            return val;
        }
    }
}

/// Level-form invariants and sign characteristic at a critical root.
///
/// Both identities of the sign-characteristic data are enforced:
/// `m_plus + m_minus` must equal the number of Jordan blocks of size `l`,
/// and `m0` must reproduce the kernel-dimension formula; a mismatch is a
/// tolerance failure, not a warning.
pub fn ell_invariants(
    p: &PencilSpec,
    germ: &GermBasis,
    tol: &Tolerances,
) -> Result<CriticalRootInvariants> {
    require_critical(p, germ.sigma0)?;
    let gram = gram_matrix(p, germ, germ, tol)?;
    ell_invariants_from_gram(germ, &gram, tol)
}

/// Same as [`ell_invariants`] with a precomputed self-Gram block.
pub fn ell_invariants_from_gram(
    germ: &GermBasis,
    gram: &CMatrix,
    tol: &Tolerances,
) -> Result<CriticalRootInvariants> {
    let dev = numerics::hermitian_deviation(gram);
    if dev > 1e-9 * gram.norm().max(1.0) {
        return Err(Error::InvariantMismatch(format!(
            "Gram block at {} is not Hermitian (deviation {dev:.3e})",
            germ.sigma0
        )));
    }
    let ell_max = germ.max_pole_order();
    let mut per_ell = Vec::with_capacity(ell_max);
    let mut contribution = 0i64;
    for ell in 1..=ell_max {
        let idx = germ.kernel_power_indices(ell);
        let k = idx.len();
        let mut form = CMatrix::zeros(k, k);
        for (a, &ia) in idx.iter().enumerate() {
            // shift^{l-1} maps chain position pos to pos - (l-1)
            let shifted = shifted_index(germ, ia, ell - 1);
            for (b, &ib) in idx.iter().enumerate() {
                form[(a, b)] = match shifted {
                    Some(row) => gram[(row, ib)],
                    None => C64::new(0.0, 0.0),
                };
            }
        }
        let form = (&form + form.adjoint()).scale(0.5);
        let (m_minus, m0, m_plus) = numerics::inertia(&form, tol)?;
        let blocks_of_size = germ.partial_mults.iter().filter(|&&l| l == ell).count();
        if m_plus + m_minus != blocks_of_size {
            return Err(Error::InvariantMismatch(format!(
                "level {ell} at {}: m+ + m- = {} but {blocks_of_size} blocks of that size",
                germ.sigma0,
                m_plus + m_minus
            )));
        }
        let d = |j: usize| germ.dim_kernel_power(j);
        let expected = d(ell + 1) as i64 - d(ell) as i64 + d(ell - 1) as i64;
        if m0 as i64 != expected {
            return Err(Error::InvariantMismatch(format!(
                "level {ell} at {}: m0 = {m0}, kernel-dimension formula gives {expected}",
                germ.sigma0
            )));
        }
        if ell % 2 == 1 {
            contribution += m_plus as i64 - m_minus as i64;
        }
        per_ell.push(EllInvariants {
            ell,
            m0,
            m_plus,
            m_minus,
        });
    }
    Ok(CriticalRootInvariants {
        sigma0: germ.sigma0,
        per_ell,
        signature_contribution: contribution,
    })
}

/// Index of `shift^power` applied to basis vector `idx`, or `None` when the
/// chain is exhausted.
fn shifted_index(germ: &GermBasis, idx: usize, power: usize) -> Option<usize> {
    for (c, &start) in germ.chain_start.iter().enumerate() {
        let len = germ.partial_mults[c];
        if idx >= start && idx < start + len {
            let pos = idx - start;
            return pos.checked_sub(power).map(|p| start + p);
        }
    }
    None
}

/// Recursive reduction of the localized pencil at a critical root to
/// orthogonal `±s^l` blocks, by splitting along the kernel of the leading
/// coefficient and passing to the Schur complement.
///
/// Truncation starts at `alg_mult + mu` and is doubled once on exhaustion.
pub fn normal_form(
    p: &PencilSpec,
    sigma0: C64,
    alg_mult: usize,
    tol: &Tolerances,
) -> Result<NormalFormBlocks> {
    require_critical(p, sigma0)?;
    let base_order = alg_mult + p.degree();
    match normal_form_at_order(p, sigma0, alg_mult, base_order, tol) {
        Ok(blocks) => Ok(blocks),
        Err(Error::TruncationExhausted { .. }) => {
            normal_form_at_order(p, sigma0, alg_mult, 2 * base_order, tol)
        }
        Err(e) => Err(e),
    }
}

fn normal_form_at_order(
    p: &PencilSpec,
    sigma0: C64,
    alg_mult: usize,
    order: usize,
    tol: &Tolerances,
) -> Result<NormalFormBlocks> {
    let series = p.taylor_at(sigma0, order);
    let mut raw: Vec<(usize, usize, usize)> = Vec::new();
    reduce(&series, 0, tol, &mut raw)?;
    let mut by_ell: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for (l, np, nm) in raw {
        if l == 0 || np + nm == 0 {
            continue;
        }
        let e = by_ell.entry(l).or_insert((0, 0));
        e.0 += np;
        e.1 += nm;
    }
    let blocks: Vec<(usize, usize, usize)> =
        by_ell.into_iter().map(|(l, (np, nm))| (l, np, nm)).collect();
    let out = NormalFormBlocks { sigma0, blocks };
    if out.total_multiplicity() != alg_mult {
        return Err(Error::InvariantMismatch(format!(
            "normal form at {sigma0} accounts for multiplicity {}, expected {alg_mult}",
            out.total_multiplicity()
        )));
    }
    Ok(out)
}

fn reduce(
    q: &numerics::MatrixSeries,
    offset: usize,
    tol: &Tolerances,
    blocks: &mut Vec<(usize, usize, usize)>,
) -> Result<()> {
    let dim = q.dim();
    if dim == 0 {
        return Ok(());
    }
    let nu = q
        .valuation(1e-10)
        .ok_or(Error::TruncationExhausted { order: q.order() })?;
    let reduced = q.shift_down(nu)?;
    let level = offset + nu;
    let c0 = (reduced.coeff(0) + reduced.coeff(0).adjoint()).scale(0.5);
    let eig = c0.clone().symmetric_eigen();
    let radius = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let cut = tol.zero_eig_abs * radius.max(1.0);
    let mut kernel_cols = Vec::new();
    let mut range_cols = Vec::new();
    let mut n_plus = 0usize;
    let mut n_minus = 0usize;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cut {
            kernel_cols.push(i);
        } else {
            range_cols.push(i);
            if lambda > 0.0 {
                n_plus += 1;
            } else {
                n_minus += 1;
            }
        }
    }
    if kernel_cols.is_empty() {
        blocks.push((level, n_plus, n_minus));
        return Ok(());
    }
    // invertible complement contributes a block at the current level
    blocks.push((level, n_plus, n_minus));
    if range_cols.is_empty() {
        // c0 vanished below the zero cutoff yet survived the valuation
        // threshold: inconsistent scales
        return Err(Error::InvariantMismatch(
            "normal-form leading coefficient is numerically zero after valuation".into(),
        ));
    }
    // unitary reordering [kernel | range]
    let mut u = CMatrix::zeros(dim, dim);
    for (new, &old) in kernel_cols.iter().chain(range_cols.iter()).enumerate() {
        u.set_column(new, &eig.eigenvectors.column(old));
    }
    let transformed = reduced.congruence(&u);
    let k0 = kernel_cols.len();
    let take = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> numerics::MatrixSeries {
        numerics::MatrixSeries::new(
            transformed
                .coeffs()
                .iter()
                .map(|m| m.view((rows.start, cols.start), (rows.end - rows.start, cols.end - cols.start)).into_owned())
                .collect(),
        )
        .expect("series blocks are well-formed")
    };
    let q11 = take(0..k0, 0..k0);
    let q12 = take(0..k0, k0..dim);
    let q21 = take(k0..dim, 0..k0);
    let q22 = take(k0..dim, k0..dim);
    let q22_inv = numerics::series_inv(&q22, tol)?;
    let correction = numerics::series_mul(&numerics::series_mul(&q12, &q22_inv)?, &q21)?;
    let schur = q11.sub(&correction)?;
    reduce(&schur, level, tol, blocks)
}

/// Sum of per-root signature contributions.
pub fn total_signature(invariants: &[CriticalRootInvariants]) -> i64 {
    invariants.iter().map(|i| i.signature_contribution).sum()
}

/// Runs both invariant routes at a critical root and enforces that they
/// agree as multisets of `(l, plus, minus)`.
pub fn verified_invariants(
    p: &PencilSpec,
    germ: &GermBasis,
    alg_mult: usize,
    tol: &Tolerances,
) -> Result<(CriticalRootInvariants, NormalFormBlocks)> {
    let inv = ell_invariants(p, germ, tol)?;
    let nf = normal_form(p, germ.sigma0, alg_mult, tol)?;
    for e in &inv.per_ell {
        let (np, nm) = nf.counts_for(e.ell);
        if np != e.m_plus || nm != e.m_minus {
            return Err(Error::InvariantMismatch(format!(
                "level {} at {}: level form gives (+{}, -{}), normal form gives (+{np}, -{nm})",
                e.ell, germ.sigma0, e.m_plus, e.m_minus
            )));
        }
    }
    for &(l, np, nm) in &nf.blocks {
        let from_inv = inv
            .per_ell
            .iter()
            .find(|e| e.ell == l)
            .map(|e| (e.m_plus, e.m_minus))
            .unwrap_or((0, 0));
        if from_inv != (np, nm) {
            return Err(Error::InvariantMismatch(format!(
                "normal-form block size {l} at {} not present in level forms",
                germ.sigma0
            )));
        }
    }
    Ok((inv, nf))
}

fn require_critical(p: &PencilSpec, sigma0: C64) -> Result<()> {
    if (sigma0.im - p.critical_im()).abs() > 1e-9 {
        return Err(Error::NotCritical(sigma0));
    }
    Ok(())
}

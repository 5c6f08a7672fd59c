//! The finite-dimensional quotient model of the maximal domain: a graded
//! vector space spanned by germ bases at the open-strip roots, with the
//! generator `g = (+) (sigma0 I + shift)` and the Hermitian Gram form of
//! the residue pairing. Subspaces of the quotient classify the closed
//! extensions between the minimal and maximal domain; Lagrangian subspaces
//! are the selfadjoint ones.
//!
//! Coordinates are taken in the germ chain bases, not function-space norms;
//! every classification below (Lagrangian, invariant, order) is covariant
//! under basis changes, so this choice is harmless.
//!
//! The pairing of coordinate vectors is
//! `[u, v] = sum_{i,j} u_i G_{ij} conj(v_j)` with `G_{ij} = [b_i, b_j]`;
//! a matrix `M` is selfadjoint for it iff `M^T G = G conj(M)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::forms::{self, CriticalRootInvariants, NormalFormBlocks};
use crate::germs::{self, GermBasis, LogCoefficients, PrincipalPart};
use crate::numerics::{self, CMatrix, CVector, Tolerances};
use crate::pencil::PencilSpec;
use crate::roots::{self, Band, Root};

/// Principal-angle threshold for subspace equality and containment tests.
const SUBSPACE_THRESH: f64 = 1e-8;

/// A subspace of the quotient, representing a domain between the minimal
/// and maximal one. Columns are independent coordinate vectors.
#[derive(Debug, Clone)]
pub struct ExtensionSubspace {
    pub basis: CMatrix,
}

impl ExtensionSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// One Jordan block of the canonical chain basis at a critical root, with
/// its sign: the chain realizes `[u_a, u_b] = sign * delta_{a+b, l+1}`.
#[derive(Debug, Clone)]
pub struct CanonicalBlock {
    pub size: usize,
    pub sign: i8,
    /// Chain vectors in global quotient coordinates, bottom (kernel) first.
    pub chain: Vec<CVector>,
}

/// The quotient model: open-strip roots, germ bases, generator, Gram form.
#[derive(Debug, Clone)]
pub struct QuotientModel {
    pencil: PencilSpec,
    tol: Tolerances,
    roots: Vec<Root>,
    germs: Vec<GermBasis>,
    offsets: Vec<usize>,
    dim: usize,
    generator: CMatrix,
    gram: CMatrix,
    warnings: Vec<String>,
    /// All roots found in the window (including edge and outside-strip
    /// ones), for reporting.
    all_roots: Vec<Root>,
}

/// Pairing of coordinate vectors under a Gram matrix `G_{ij} = [b_i, b_j]`.
pub fn pair(gram: &CMatrix, u: &CVector, v: &CVector) -> C64 {
    v.dotc(&(gram.transpose() * u))
}

/// Defect of `M` being selfadjoint for the pairing: `||M^T G - G conj(M)||`.
pub fn selfadjoint_defect(gram: &CMatrix, m: &CMatrix) -> f64 {
    (m.transpose() * gram - gram * m.conjugate()).norm()
}

impl QuotientModel {
    /// Assembles the quotient model of a symmetric pencil: roots, germ
    /// bases, generator, Gram form, and all structural checks.
    pub fn build(p: &PencilSpec, tol: &Tolerances, window: Option<f64>) -> Result<Self> {
        tol.validate(p.weight())?;
        p.require_symmetric(tol)?;
        let all_roots = roots::boundary_spectrum(p, tol, window)?;
        let mut warnings = Vec::new();
        for r in &all_roots {
            if matches!(r.band, Band::UpperEdge | Band::LowerEdge) {
                warnings.push(format!(
                    "root {} on the {} is excluded from the quotient model (it belongs to the minimal domain)",
                    r.sigma0,
                    r.band.name()
                ));
            }
        }
        let strip_roots: Vec<Root> = all_roots
            .iter()
            .filter(|r| r.band.in_open_strip())
            .cloned()
            .collect();
        let mut germs_list = Vec::with_capacity(strip_roots.len());
        let mut offsets = Vec::with_capacity(strip_roots.len());
        let mut dim = 0usize;
        for r in &strip_roots {
            offsets.push(dim);
            let g = germs::kernel_space(p, r.sigma0, r.alg_mult, tol, Some(r.alg_mult))?;
            dim += g.dim();
            germs_list.push(g);
        }

        let mut generator = CMatrix::zeros(dim, dim);
        for (g, &off) in germs_list.iter().zip(offsets.iter()) {
            let d = g.dim();
            let block = &g.shift + CMatrix::identity(d, d) * g.sigma0;
            generator.view_mut((off, off), (d, d)).copy_from(&block);
        }

        let mut gram = CMatrix::zeros(dim, dim);
        for (a, ga) in germs_list.iter().enumerate() {
            for (b, gb) in germs_list.iter().enumerate() {
                let paired = (crate::pencil::star(ga.sigma0, p.weight()) - gb.sigma0).norm()
                    <= tol.root_cluster;
                if !paired {
                    continue;
                }
                let block = forms::gram_matrix(p, ga, gb, tol)?;
                gram.view_mut((offsets[a], offsets[b]), (ga.dim(), gb.dim()))
                    .copy_from(&block);
            }
        }

        if dim > 0 {
            let dev = numerics::hermitian_deviation(&gram);
            if dev > 1e-9 * gram.norm().max(1.0) {
                return Err(Error::InvariantMismatch(format!(
                    "quotient Gram is not Hermitian (deviation {dev:.3e})"
                )));
            }
            let gram_h = (&gram + gram.adjoint()).scale(0.5);
            let eigs = numerics::hermitian_eigenvalues(&gram_h);
            let radius = eigs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let smallest = eigs.iter().fold(f64::INFINITY, |a, &x| a.min(x.abs()));
            if smallest <= tol.zero_eig_abs * radius.max(1.0) {
                return Err(Error::GramDegenerate { smallest });
            }
            gram = gram_h;

            // (generator + i m/2) must be selfadjoint for the Gram form
            let h = &generator
                + CMatrix::identity(dim, dim) * C64::new(0.0, p.weight() as f64 / 2.0);
            let defect = selfadjoint_defect(&gram, &h);
            if defect > 1e-9 * gram.norm().max(1.0) * generator.norm().max(1.0) {
                return Err(Error::InvariantMismatch(format!(
                    "generator is not Gram-selfadjoint (defect {defect:.3e})"
                )));
            }
        }

        Ok(QuotientModel {
            pencil: p.clone(),
            tol: *tol,
            roots: strip_roots,
            germs: germs_list,
            offsets,
            dim,
            generator,
            gram,
            warnings,
            all_roots,
        })
    }

    pub fn pencil(&self) -> &PencilSpec {
        &self.pencil
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Open-strip roots backing the model.
    pub fn strip_roots(&self) -> &[Root] {
        &self.roots
    }

    /// Every root found in the window, including excluded edge roots.
    pub fn all_roots(&self) -> &[Root] {
        &self.all_roots
    }

    pub fn germ_basis(&self, root_idx: usize) -> &GermBasis {
        &self.germs[root_idx]
    }

    pub fn offset(&self, root_idx: usize) -> usize {
        self.offsets[root_idx]
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn critical_root_indices(&self) -> Vec<usize> {
        (0..self.roots.len())
            .filter(|&i| self.roots[i].band == Band::Critical)
            .collect()
    }

    fn gram_block(&self, a: usize, b: usize) -> CMatrix {
        self.gram
            .view(
                (self.offsets[a], self.offsets[b]),
                (self.germs[a].dim(), self.germs[b].dim()),
            )
            .into_owned()
    }

    /// Level-form invariants of every critical root.
    pub fn critical_invariants(&self) -> Result<Vec<CriticalRootInvariants>> {
        self.critical_root_indices()
            .into_iter()
            .map(|i| {
                forms::ell_invariants_from_gram(&self.germs[i], &self.gram_block(i, i), &self.tol)
            })
            .collect()
    }

    /// Level forms and normal-form blocks of every critical root, with the
    /// two routes cross-checked against each other.
    pub fn verified_critical_invariants(
        &self,
    ) -> Result<Vec<(CriticalRootInvariants, NormalFormBlocks)>> {
        self.critical_root_indices()
            .into_iter()
            .map(|i| {
                let inv = forms::ell_invariants_from_gram(
                    &self.germs[i],
                    &self.gram_block(i, i),
                    &self.tol,
                )?;
                let nf = forms::normal_form(
                    &self.pencil,
                    self.roots[i].sigma0,
                    self.roots[i].alg_mult,
                    &self.tol,
                )?;
                for e in &inv.per_ell {
                    let (np, nm) = nf.counts_for(e.ell);
                    if np != e.m_plus || nm != e.m_minus {
                        return Err(Error::InvariantMismatch(format!(
                            "route disagreement at {} level {}: ({}, {}) vs ({np}, {nm})",
                            inv.sigma0, e.ell, e.m_plus, e.m_minus
                        )));
                    }
                }
                Ok((inv, nf))
            })
            .collect()
    }

    /// Signature of the quotient pairing, summed over critical roots.
    pub fn total_signature(&self) -> Result<i64> {
        Ok(forms::total_signature(&self.critical_invariants()?))
    }

    /// Gram-orthogonal companion `D^[perp]`; the domain of the adjoint.
    pub fn adjoint_subspace(&self, d: &ExtensionSubspace) -> ExtensionSubspace {
        if d.basis.ncols() == 0 {
            return ExtensionSubspace {
                basis: CMatrix::identity(self.dim, self.dim),
            };
        }
        let constraints = (d.basis.adjoint() * self.gram.conjugate()).transpose();
        // v must satisfy constraints^T v = 0
        let ns = numerics::nullspace(&constraints.transpose(), &self.tol);
        ExtensionSubspace { basis: ns }
    }

    /// Whether `D = D^[perp]`, i.e. the extension is selfadjoint.
    pub fn is_selfadjoint(&self, d: &ExtensionSubspace) -> bool {
        let perp = self.adjoint_subspace(d);
        numerics::subspace_eq(&d.basis, &perp.basis, &self.tol, SUBSPACE_THRESH)
    }

    /// Whether the generator maps `D` into itself.
    pub fn is_invariant(&self, d: &ExtensionSubspace) -> bool {
        if d.basis.ncols() == 0 {
            return true;
        }
        let image = &self.generator * &d.basis;
        numerics::subspace_contains(&d.basis, &image, &self.tol, SUBSPACE_THRESH)
    }

    /// `(n_plus, n_minus)`: inertia counts of the Gram form. These equal
    /// the deficiency indices of the minimal operator.
    pub fn deficiency_indices(&self) -> Result<(usize, usize)> {
        if self.dim == 0 {
            return Ok((0, 0));
        }
        let (n_minus, n_zero, n_plus) = numerics::inertia(&self.gram, &self.tol)?;
        if n_zero != 0 {
            return Err(Error::GramDegenerate { smallest: 0.0 });
        }
        Ok((n_plus, n_minus))
    }

    /// Canonical chain basis of the germ space at a critical root:
    /// a Gram-orthogonal decomposition into single Jordan blocks, each with
    /// a chain basis realizing the `+-` antidiagonal form exactly, and its
    /// sign. Blocks are ordered by size descending.
    pub fn canonical_chain_basis(&self, root_idx: usize) -> Result<Vec<CanonicalBlock>> {
        let root = &self.roots[root_idx];
        if root.band != Band::Critical {
            return Err(Error::NotCritical(root.sigma0));
        }
        let germ = &self.germs[root_idx];
        let d = germ.dim();
        let gram = self.gram_block(root_idx, root_idx);
        let shift = &germ.shift;

        let mut blocks: Vec<CanonicalBlock> = Vec::new();
        let mut work = CMatrix::identity(d, d); // orthonormal basis of the working subspace
        while work.ncols() > 0 {
            let w = work.ncols();
            // restriction of the shift to the working subspace
            let sw_full = shift * &work;
            let s_w = work.adjoint() * &sw_full;
            if (&sw_full - &work * &s_w).norm() > 1e-7 * (1.0 + s_w.norm()) {
                return Err(Error::CanonicalFormFailure(format!(
                    "working subspace at {} is not shift-invariant",
                    root.sigma0
                )));
            }
            // nilpotency index
            let mut ell = 1usize;
            let mut power = s_w.clone();
            while power.norm() > 1e-8 && ell <= d {
                power = &power * &s_w;
                ell += 1;
            }
            // level form on the working subspace: F_ab = [S^{l-1} w_a, w_b]
            let mut shifted = work.clone();
            for _ in 0..ell - 1 {
                shifted = shift * shifted;
            }
            let form = shifted.transpose() * &gram * work.conjugate();
            let form = (&form + form.adjoint()).scale(0.5);
            let eig = form.clone().symmetric_eigen();
            let (mut best, mut best_abs) = (0usize, 0.0f64);
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                if l.abs() > best_abs {
                    best_abs = l.abs();
                    best = i;
                }
            }
            if best_abs <= 1e-10 * (1.0 + form.norm()) {
                return Err(Error::CanonicalFormFailure(format!(
                    "level form degenerate on working subspace at {}",
                    root.sigma0
                )));
            }
            let lambda = eig.eigenvalues[best];
            let sign: i8 = if lambda > 0.0 { 1 } else { -1 };
            let y = eig.eigenvectors.column(best).into_owned();
            let mut top = (&work * y) / C64::new(best_abs.sqrt(), 0.0);

            // chain corrections: kill [S^a t, t] for a < l-1, keeping the
            // top antidiagonal entry at +-1; the h_a are real by symmetry
            let shift_pow = |v: &CVector, k: usize| -> CVector {
                let mut out = v.clone();
                for _ in 0..k {
                    out = shift * out;
                }
                out
            };
            for k in 1..ell {
                let h = pair(&gram, &shift_pow(&top, ell - 1 - k), &top);
                let c = -h.re / (2.0 * sign as f64);
                top += shift_pow(&top, k) * C64::new(c, 0.0);
            }

            let mut chain: Vec<CVector> = (0..ell)
                .map(|a| shift_pow(&top, ell - 1 - a))
                .collect();
            // verify the exact antidiagonal form
            for (a, ua) in chain.iter().enumerate() {
                for (b, ub) in chain.iter().enumerate() {
                    let val = pair(&gram, ua, ub);
                    let expect = if a + b == ell - 1 {
                        C64::new(sign as f64, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    if (val - expect).norm() > 1e-8 {
                        return Err(Error::CanonicalFormFailure(format!(
                            "chain Gram at {} deviates from the antidiagonal form by {:.3e}",
                            root.sigma0,
                            (val - expect).norm()
                        )));
                    }
                }
            }

            // deflate: Gram-orthogonal complement of the chain inside work
            let chain_mat = CMatrix::from_columns(&chain);
            let constraints = (&self.gram_block(root_idx, root_idx) * chain_mat.conjugate())
                .transpose()
                * &work;
            let coords = numerics::nullspace_with_threshold(&constraints, 1e-10);
            let next = numerics::orthonormalize(&(&work * coords), &self.tol);
            if next.ncols() + ell != w {
                return Err(Error::CanonicalFormFailure(format!(
                    "deflation at {} lost dimensions ({} + {ell} != {w})",
                    root.sigma0,
                    next.ncols()
                )));
            }
            work = next;

            // lift chain vectors to global coordinates
            let off = self.offsets[root_idx];
            for v in &mut chain {
                let mut global = CVector::zeros(self.dim);
                global.rows_mut(off, d).copy_from(v);
                *v = global;
            }
            blocks.push(CanonicalBlock {
                size: ell,
                sign,
                chain,
            });
        }
        blocks.sort_by(|a, b| b.size.cmp(&a.size).then(b.sign.cmp(&a.sign)));
        Ok(blocks)
    }

    /// The sign condition: at every critical root there are no odd blocks,
    /// and the even blocks all carry one sign.
    pub fn sign_condition(&self) -> Result<bool> {
        for inv in self.critical_invariants()? {
            for e in &inv.per_ell {
                if e.ell % 2 == 1 && (e.m_plus > 0 || e.m_minus > 0) {
                    return Ok(false);
                }
                if e.ell % 2 == 0 && e.m_plus > 0 && e.m_minus > 0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Sampling check of `p(sigma) >= 0` on the critical line combined with
    /// nonnegativity of the normal-form data at the critical roots.
    pub fn semibounded(&self, samples: usize) -> Result<bool> {
        if !semibounded_sampling(&self.pencil, &self.tol, samples, None) {
            return Ok(false);
        }
        for (_, nf) in self.verified_critical_invariants()? {
            for &(l, _, nm) in &nf.blocks {
                if l % 2 == 1 || nm > 0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Columns of the identity block for one root.
    fn root_columns(&self, root_idx: usize) -> CMatrix {
        let off = self.offsets[root_idx];
        let d = self.germs[root_idx].dim();
        let mut m = CMatrix::zeros(self.dim, d);
        for k in 0..d {
            m[(off + k, k)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Direct sum of the germ spaces below the critical line.
    pub fn lower_half_subspace(&self) -> ExtensionSubspace {
        let cols: Vec<CMatrix> = (0..self.roots.len())
            .filter(|&i| self.roots[i].band == Band::StripLower)
            .map(|i| self.root_columns(i))
            .collect();
        ExtensionSubspace {
            basis: hcat(self.dim, &cols),
        }
    }

    fn upper_half_subspace(&self) -> ExtensionSubspace {
        let cols: Vec<CMatrix> = (0..self.roots.len())
            .filter(|&i| self.roots[i].band == Band::StripUpper)
            .map(|i| self.root_columns(i))
            .collect();
        ExtensionSubspace {
            basis: hcat(self.dim, &cols),
        }
    }

    /// Unique invariant Lagrangian half of a critical germ space under the
    /// sign condition: the bottom halves of all (even) canonical chains.
    pub fn critical_half_subspace(&self, root_idx: usize) -> Result<CMatrix> {
        let blocks = self.canonical_chain_basis(root_idx)?;
        let mut cols: Vec<CVector> = Vec::new();
        for b in &blocks {
            if b.size % 2 == 1 {
                return Err(Error::SignConditionViolated(self.roots[root_idx].sigma0));
            }
            for v in &b.chain[..b.size / 2] {
                cols.push(v.clone());
            }
        }
        Ok(if cols.is_empty() {
            CMatrix::zeros(self.dim, 0)
        } else {
            CMatrix::from_columns(&cols)
        })
    }

    fn require_semibounded_sign_condition(&self, samples: usize) -> Result<()> {
        if !self.semibounded(samples)? {
            return Err(Error::NotSemibounded);
        }
        if !self.sign_condition()? {
            let bad = self
                .critical_root_indices()
                .first()
                .map(|&i| self.roots[i].sigma0)
                .unwrap_or(C64::new(0.0, 0.0));
            return Err(Error::SignConditionViolated(bad));
        }
        Ok(())
    }

    /// Boundary data of the Friedrichs extension: all germ spaces below the
    /// critical line plus the invariant Lagrangian halves on it.
    pub fn friedrichs_subspace(&self) -> Result<ExtensionSubspace> {
        self.require_semibounded_sign_condition(201)?;
        let mut parts: Vec<CMatrix> = vec![self.lower_half_subspace().basis];
        for i in self.critical_root_indices() {
            parts.push(self.critical_half_subspace(i)?);
        }
        let d = ExtensionSubspace {
            basis: hcat(self.dim, &parts),
        };
        self.verify_lagrangian_invariant(&d, "Friedrichs")?;
        Ok(d)
    }

    /// Boundary data of the Krein extension: all germ spaces above the
    /// critical line plus the same critical halves.
    pub fn krein_subspace(&self) -> Result<ExtensionSubspace> {
        self.require_semibounded_sign_condition(201)?;
        let mut parts: Vec<CMatrix> = vec![self.upper_half_subspace().basis];
        for i in self.critical_root_indices() {
            parts.push(self.critical_half_subspace(i)?);
        }
        let d = ExtensionSubspace {
            basis: hcat(self.dim, &parts),
        };
        self.verify_lagrangian_invariant(&d, "Krein")?;
        Ok(d)
    }

    fn verify_lagrangian_invariant(&self, d: &ExtensionSubspace, which: &str) -> Result<()> {
        if !self.is_selfadjoint(d) {
            return Err(Error::CanonicalFormFailure(format!(
                "{which} boundary space failed the Lagrangian check"
            )));
        }
        if !self.is_invariant(d) {
            return Err(Error::CanonicalFormFailure(format!(
                "{which} boundary space failed the invariance check"
            )));
        }
        Ok(())
    }

    /// Constructs an invariant selfadjoint extension: bottom halves of all
    /// blocks at each critical root, mixed middle vectors for odd blocks
    /// paired across opposite signs, and the full germ spaces below the
    /// critical line. Exists iff the odd-block signature vanishes at every
    /// critical root.
    pub fn construct_invariant_selfadjoint(&self) -> Result<ExtensionSubspace> {
        let mut parts: Vec<CMatrix> = vec![self.lower_half_subspace().basis];
        for i in self.critical_root_indices() {
            let blocks = self.canonical_chain_basis(i)?;
            let odd_balance: i64 = blocks
                .iter()
                .filter(|b| b.size % 2 == 1)
                .map(|b| b.sign as i64)
                .sum();
            if odd_balance != 0 {
                return Err(Error::NoInvariantSelfadjointExtension {
                    sigma0: self.roots[i].sigma0,
                    contribution: odd_balance,
                });
            }
            let mut cols: Vec<CVector> = Vec::new();
            for b in &blocks {
                for v in &b.chain[..b.size / 2] {
                    cols.push(v.clone());
                }
            }
            let mut odd_plus: Vec<&CanonicalBlock> = blocks
                .iter()
                .filter(|b| b.size % 2 == 1 && b.sign == 1)
                .collect();
            let mut odd_minus: Vec<&CanonicalBlock> = blocks
                .iter()
                .filter(|b| b.size % 2 == 1 && b.sign == -1)
                .collect();
            odd_plus.sort_by(|a, b| b.size.cmp(&a.size));
            odd_minus.sort_by(|a, b| b.size.cmp(&a.size));
            for (v, w) in odd_plus.iter().zip(odd_minus.iter()) {
                let mid_v = &v.chain[(v.size - 1) / 2];
                let mid_w = &w.chain[(w.size - 1) / 2];
                cols.push(mid_v + mid_w);
            }
            if !cols.is_empty() {
                parts.push(CMatrix::from_columns(&cols));
            }
        }
        let d = ExtensionSubspace {
            basis: hcat(self.dim, &parts),
        };
        self.verify_lagrangian_invariant(&d, "invariant selfadjoint")?;
        Ok(d)
    }

    /// Order relation for invariant selfadjoint extensions of a semibounded
    /// pencil satisfying the sign condition: `D1 <= D2` iff
    /// `D1 ∩ E_- ⊆ D2 ∩ E_-` with `E_-` the lower germ sum.
    pub fn order_leq(&self, d1: &ExtensionSubspace, d2: &ExtensionSubspace) -> Result<bool> {
        self.require_semibounded_sign_condition(201)
            .map_err(|_| Error::PreconditionViolated(
                "order relation needs a semibounded pencil with the sign condition".into(),
            ))?;
        for (name, d) in [("first", d1), ("second", d2)] {
            if !self.is_selfadjoint(d) || !self.is_invariant(d) {
                return Err(Error::PreconditionViolated(format!(
                    "{name} subspace is not an invariant selfadjoint extension"
                )));
            }
        }
        let lower = self.lower_half_subspace();
        let i1 = numerics::subspace_intersect(&d1.basis, &lower.basis, &self.tol);
        let i2 = numerics::subspace_intersect(&d2.basis, &lower.basis, &self.tol);
        Ok(numerics::subspace_contains(&i2, &i1, &self.tol, SUBSPACE_THRESH))
    }

    /// Log-coefficient expansions of the columns of a subspace, grouped by
    /// root: the boundary data of the corresponding domain.
    pub fn boundary_expansion(
        &self,
        d: &ExtensionSubspace,
    ) -> Vec<(usize, Vec<LogCoefficients>)> {
        let mut out = Vec::new();
        for (i, germ) in self.germs.iter().enumerate() {
            let off = self.offsets[i];
            let dd = germ.dim();
            let mut per_root = Vec::new();
            for c in 0..d.basis.ncols() {
                let block = d.basis.view((off, 0), (dd, d.basis.ncols()));
                let local = block.column(c);
                if local.norm() <= 1e-12 {
                    continue;
                }
                let n = self.pencil.dim();
                let lmax = germ.max_pole_order();
                let mut stacked = CVector::zeros(lmax * n);
                for (k, b) in germ.basis.iter().enumerate() {
                    stacked += b.stacked(lmax) * local[k];
                }
                let pp = PrincipalPart::from_stacked(germ.sigma0, &stacked, n);
                per_root.push(germs::log_coeffs_from_germ(&pp));
            }
            if !per_root.is_empty() {
                out.push((i, per_root));
            }
        }
        out
    }
}

/// Sampling check of semiboundedness alone: smallest eigenvalue of
/// `p(sigma)` on the critical line within the root window, at `samples`
/// points.
pub fn semibounded_sampling(
    p: &PencilSpec,
    tol: &Tolerances,
    samples: usize,
    window: Option<f64>,
) -> bool {
    let t_bound = window.unwrap_or_else(|| roots::default_window(p)).min(50.0);
    let samples = samples.max(3);
    let scale = p.max_coeff_norm().max(1.0);
    for k in 0..samples {
        let re = -t_bound + 2.0 * t_bound * k as f64 / (samples - 1) as f64;
        let sigma = C64::new(re, p.critical_im());
        let eigs = numerics::hermitian_eigenvalues(&p.evaluate(sigma));
        if let Some(min) = eigs.first() {
            if *min < -tol.zero_eig_abs * scale {
                return false;
            }
        }
    }
    true
}

fn hcat(dim: usize, parts: &[CMatrix]) -> CMatrix {
    let total: usize = parts.iter().map(|m| m.ncols()).sum();
    let mut out = CMatrix::zeros(dim, total);
    let mut c = 0;
    for m in parts {
        out.columns_mut(c, m.ncols()).copy_from(m);
        c += m.ncols();
    }
    out
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

    fn strip_pair_pencil() -> PencilSpec {
        let s0 = c(0., -0.5);
        let s0s = crate::pencil::star(s0, 2);
        scalar_pencil(2, &[s0 * s0s, -(s0 + s0s), c(1., 0.)])
    }

    #[test]
    fn build_linear_scalar() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        assert_eq!(q.dim(), 1);
        assert!((q.generator()[(0, 0)] - c(0., -1.)).norm() < 1e-10);
        assert!((q.gram()[(0, 0)] - c(1., 0.)).norm() < 1e-10);
        assert_eq!(q.deficiency_indices().unwrap(), (1, 0));
        assert_eq!(q.total_signature().unwrap(), 1);
    }

    #[test]
    fn build_strip_pair() {
        let p = strip_pair_pencil();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        assert_eq!(q.dim(), 2);
        // roots sorted by Im: lower root first
        assert!((q.generator()[(0, 0)] - c(0., -1.5)).norm() < 1e-10);
        assert!((q.generator()[(1, 1)] - c(0., -0.5)).norm() < 1e-10);
        // gram is antidiagonal with [upper, lower] = i; basis order is
        // (lower, upper) so the (1, 0) entry pairs upper against lower
        assert!(q.gram()[(0, 0)].norm() < 1e-12);
        assert!(q.gram()[(1, 1)].norm() < 1e-12);
        assert!((q.gram()[(1, 0)] - c(0., 1.)).norm() < 1e-10);
        assert!((q.gram()[(0, 1)] - c(0., -1.)).norm() < 1e-10);
        assert_eq!(q.deficiency_indices().unwrap(), (1, 1));
        assert_eq!(q.total_signature().unwrap(), 0);
    }

    #[test]
    fn build_no_strip_roots() {
        // sigma(sigma + 2i): both roots on the edges; quotient is trivial
        let p = scalar_pencil(2, &[c(0., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        assert_eq!(q.dim(), 0);
        assert_eq!(q.deficiency_indices().unwrap(), (0, 0));
        assert_eq!(q.warnings().len(), 2);
    }

    #[test]
    fn adjoint_subspace_dimensions() {
        let p = strip_pair_pencil();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let zero = ExtensionSubspace {
            basis: CMatrix::zeros(2, 0),
        };
        assert_eq!(q.adjoint_subspace(&zero).dim(), 2);
        let full = ExtensionSubspace {
            basis: CMatrix::identity(2, 2),
        };
        assert_eq!(q.adjoint_subspace(&full).dim(), 0);
        assert!(!q.is_selfadjoint(&zero));
        // eigenvector line at the upper root (index 1) is isotropic
        let line = ExtensionSubspace {
            basis: CMatrix::from_column_slice(2, 1, &[c(0., 0.), c(1., 0.)]),
        };
        let perp = q.adjoint_subspace(&line);
        assert_eq!(perp.dim(), 1);
        assert!(numerics::subspace_eq(&line.basis, &perp.basis, &tol, 1e-8));
        assert!(q.is_selfadjoint(&line));
        assert!(q.is_invariant(&line));
    }

    #[test]
    fn mixed_line_selfadjoint_but_not_invariant() {
        let p = strip_pair_pencil();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        // e_lower + e_upper: isotropic for the antidiagonal Gram
        let mixed = ExtensionSubspace {
            basis: CMatrix::from_column_slice(2, 1, &[c(1., 0.), c(1., 0.)]),
        };
        assert!(q.is_selfadjoint(&mixed));
        assert!(!q.is_invariant(&mixed));
    }

    #[test]
    fn canonical_chain_simple_roots() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let blocks = q.canonical_chain_basis(0).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].size, 1);
        assert_eq!(blocks[0].sign, 1);
    }

    #[test]
    fn canonical_chain_double_root() {
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let blocks = q.canonical_chain_basis(0).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].size, 2);
        assert_eq!(blocks[0].sign, 1);
        // chain realizes the SIP form
        let g = q.gram();
        let b = &blocks[0];
        assert!(pair(g, &b.chain[0], &b.chain[0]).norm() < 1e-9);
        assert!((pair(g, &b.chain[0], &b.chain[1]) - c(1., 0.)).norm() < 1e-9);
        assert!((pair(g, &b.chain[1], &b.chain[1])).norm() < 1e-9);
    }

    #[test]
    fn canonical_chain_opposite_signs() {
        // diag(sigma + i, -(sigma + i))
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(0., -1.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(-1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1]).unwrap();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let blocks = q.canonical_chain_basis(0).unwrap();
        assert_eq!(blocks.len(), 2);
        let signs: Vec<i8> = blocks.iter().map(|b| b.sign).collect();
        assert!(signs.contains(&1) && signs.contains(&-1));
    }

    #[test]
    fn sign_condition_cases() {
        let tol = Tolerances::default();
        // even single block: sign condition holds
        let p_even = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let q = QuotientModel::build(&p_even, &tol, None).unwrap();
        assert!(q.sign_condition().unwrap());
        // odd block: violated
        let p_odd = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let q2 = QuotientModel::build(&p_odd, &tol, None).unwrap();
        assert!(!q2.sign_condition().unwrap());
        // no critical roots: trivially true
        let q3 = QuotientModel::build(&strip_pair_pencil(), &tol, None).unwrap();
        assert!(q3.sign_condition().unwrap());
    }

    #[test]
    fn semibounded_cases() {
        let tol = Tolerances::default();
        let q_even =
            QuotientModel::build(&scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]), &tol, None)
                .unwrap();
        assert!(q_even.semibounded(201).unwrap());
        let q_odd =
            QuotientModel::build(&scalar_pencil(2, &[c(0., 1.), c(1., 0.)]), &tol, None).unwrap();
        assert!(!q_odd.semibounded(201).unwrap());
        // strip pair (sigma - s0)(sigma - s0*) is positive on the line
        let q_pair = QuotientModel::build(&strip_pair_pencil(), &tol, None).unwrap();
        assert!(q_pair.semibounded(201).unwrap());
    }

    #[test]
    fn friedrichs_and_krein_for_strip_pair() {
        let p = strip_pair_pencil();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let f = q.friedrichs_subspace().unwrap();
        let k = q.krein_subspace().unwrap();
        // Friedrichs: lower root line (index 0); Krein: upper root line
        assert_eq!(f.dim(), 1);
        assert_eq!(k.dim(), 1);
        assert!(f.basis[(0, 0)].norm() > 0.9);
        assert!(k.basis[(1, 0)].norm() > 0.9);
        // lattice: krein <= anything <= friedrichs
        assert!(q.order_leq(&k, &f).unwrap());
        assert!(!q.order_leq(&f, &k).unwrap());
        assert!(q.order_leq(&f, &f).unwrap());
        // intersection/sum structure
        assert_eq!(numerics::subspace_intersect(&f.basis, &k.basis, &tol).ncols(), 0);
        assert_eq!(numerics::subspace_sum(&f.basis, &k.basis, &tol).ncols(), 2);
    }

    #[test]
    fn friedrichs_equals_krein_for_double_root() {
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let f = q.friedrichs_subspace().unwrap();
        let k = q.krein_subspace().unwrap();
        assert_eq!(f.dim(), 1);
        assert!(numerics::subspace_eq(&f.basis, &k.basis, &tol, 1e-8));
        // the half-chain is the no-log boundary datum: pole order 1 only
        let exp = q.boundary_expansion(&f);
        assert_eq!(exp.len(), 1);
        assert_eq!(exp[0].1[0].e.len(), 1);
    }

    #[test]
    fn friedrichs_refuses_odd_pencil() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        assert!(matches!(
            q.friedrichs_subspace(),
            Err(Error::NotSemibounded)
        ));
    }

    #[test]
    fn invariant_selfadjoint_mixed_pair() {
        // diag(sigma + i, -(sigma + i)): contributions +1 and -1 cancel
        let z = c(0., 0.);
        let a0 = CMatrix::from_row_slice(2, 2, &[c(0., 1.), z, z, c(0., -1.)]);
        let a1 = CMatrix::from_row_slice(2, 2, &[c(1., 0.), z, z, c(-1., 0.)]);
        let p = PencilSpec::new(2, vec![a0, a1]).unwrap();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let d = q.construct_invariant_selfadjoint().unwrap();
        assert_eq!(d.dim(), 1);
        assert!(q.is_selfadjoint(&d));
        assert!(q.is_invariant(&d));
    }

    #[test]
    fn invariant_selfadjoint_refuses_unbalanced() {
        let p = scalar_pencil(2, &[c(0., 1.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        assert!(matches!(
            q.construct_invariant_selfadjoint(),
            Err(Error::NoInvariantSelfadjointExtension { .. })
        ));
    }

    #[test]
    fn invariant_selfadjoint_even_block_is_friedrichs() {
        let p = scalar_pencil(2, &[c(-1., 0.), c(0., 2.), c(1., 0.)]);
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let d = q.construct_invariant_selfadjoint().unwrap();
        let f = q.friedrichs_subspace().unwrap();
        assert!(numerics::subspace_eq(&d.basis, &f.basis, &tol, 1e-8));
    }

    #[test]
    fn generator_spectrum_in_strip() {
        let p = strip_pair_pencil();
        let tol = Tolerances::default();
        let q = QuotientModel::build(&p, &tol, None).unwrap();
        let eigs = q.generator().clone().schur().eigenvalues().unwrap();
        for l in eigs.iter() {
            assert!(l.im < 0.0 && l.im > -2.0);
        }
    }

    #[test]
    fn unsymmetric_pencil_rejected() {
        let p = scalar_pencil(2, &[c(0., 0.), c(1., 0.)]);
        let tol = Tolerances::default();
        assert!(matches!(
            QuotientModel::build(&p, &tol, None),
            Err(Error::NotSymmetric(_))
        ));
    }
}

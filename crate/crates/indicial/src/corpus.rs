//! Randomized test-pencil generators with planted ground truth: diagonal
//! `±(sigma - sigma0)^l` structures conjugated by invertible polynomial
//! congruences, and Gram-type semibounded pencils `s(sigma*)^* s(sigma)`.
//!
//! Congruences use unimodular polynomial factors (unit-triangular with
//! polynomial off-diagonal entries, mixed with constant unitaries), so the
//! root set and all local invariants of the planted pencil are preserved
//! exactly while the coefficients become dense.

use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::numerics::CMatrix;
use crate::pencil::PencilSpec;

/// Ground truth of one planted critical root.
#[derive(Debug, Clone)]
pub struct PlantedRoot {
    pub sigma0: C64,
    /// Multiset of `(block size, sign)`.
    pub blocks: Vec<(usize, i8)>,
}

impl PlantedRoot {
    pub fn alg_mult(&self) -> usize {
        self.blocks.iter().map(|b| b.0).sum()
    }

    pub fn signature_contribution(&self) -> i64 {
        self.blocks
            .iter()
            .filter(|(l, _)| l % 2 == 1)
            .map(|&(_, s)| s as i64)
            .sum()
    }

    /// Expected `(m_plus, m_minus)` at one level.
    pub fn counts_for(&self, ell: usize) -> (usize, usize) {
        let plus = self.blocks.iter().filter(|&&(l, s)| l == ell && s > 0).count();
        let minus = self.blocks.iter().filter(|&&(l, s)| l == ell && s < 0).count();
        (plus, minus)
    }
}

/// A generated pencil with its planted data.
#[derive(Debug, Clone)]
pub struct PlantedPencil {
    pub pencil: PencilSpec,
    pub m: u32,
    pub critical: Vec<PlantedRoot>,
    /// Strip roots planted off the critical line (upper representatives).
    pub strip_roots: Vec<C64>,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

/// Haar-ish random unitary from the QR factorization of a Gaussian-free
/// uniform complex matrix (orthogonality is all that matters here).
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| random_complex(rng));
    a.qr().q()
}

// ---------------------------------------------------------------------------
// polynomial matrix helpers (coefficient lists, lowest order first)
// ---------------------------------------------------------------------------

pub type PolyMatrix = Vec<CMatrix>;

pub fn poly_mul(a: &[CMatrix], b: &[CMatrix]) -> PolyMatrix {
    let n = a[0].nrows();
    let mut out = vec![CMatrix::zeros(n, b[0].ncols()); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficients of `u(sigma*)^* = sum_k u_k^* (sigma + i m)^k`.
pub fn poly_star(u: &[CMatrix], m: u32) -> PolyMatrix {
    let n = u[0].nrows();
    let im = c(0.0, m as f64);
    let mut out = vec![CMatrix::zeros(n, n); u.len()];
    for (k, uk) in u.iter().enumerate() {
        // expand (sigma + i m)^k
        let mut binom = 1.0f64;
        let mut pw = c(1.0, 0.0);
        for j in 0..=k {
            // coefficient of sigma^j in (sigma + im)^k is binom(k, j) (im)^(k-j);
            // iterate j from k downward so the power accumulates
            let jj = k - j;
            out[jj] += uk.adjoint().scale(binom) * pw;
            binom = binom * jj as f64 / (j + 1) as f64;
            pw *= im;
        }
    }
    out
}

fn poly_trim(mut p: PolyMatrix) -> PolyMatrix {
    let scale = p.iter().map(|m| m.norm()).fold(f64::MIN_POSITIVE, f64::max);
    while p.len() > 1 && p.last().unwrap().norm() <= 1e-13 * scale {
        p.pop();
    }
    p
}

/// Random unimodular polynomial matrix of the given off-diagonal degree:
/// `Q0 L(sigma) Q1 U(sigma) Q2` with unit-triangular `L`, `U`. Its
/// determinant is a nonzero constant, so it is invertible for every sigma.
pub fn random_unimodular_poly(n: usize, deg: usize, rng: &mut ChaCha8Rng) -> PolyMatrix {
    let mut acc: PolyMatrix = vec![random_unitary(n, rng)];
    if deg == 0 {
        return acc;
    }
    let tri = |upper: bool, rng: &mut ChaCha8Rng| -> PolyMatrix {
        let mut coeffs = vec![CMatrix::identity(n, n)];
        for _ in 0..deg {
            coeffs.push(CMatrix::zeros(n, n));
        }
        for i in 0..n {
            for j in 0..n {
                if (upper && j > i) || (!upper && j < i) {
                    for co in coeffs.iter_mut().skip(1) {
                        co[(i, j)] = random_complex(rng) * 0.6;
                    }
                    // keep the constant part mixed as well
                    coeffs[0][(i, j)] = random_complex(rng) * 0.3;
                }
            }
        }
        coeffs
    };
    // only one triangular factor carries sigma so the total degree is `deg`
    let upper_first = rng.random::<bool>();
    acc = poly_mul(&acc, &tri(upper_first, rng));
    acc = poly_mul(&acc, &[random_unitary(n, rng)]);
    let mut constant_tri = CMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if (upper_first && j < i) || (!upper_first && j > i) {
                constant_tri[(i, j)] = random_complex(rng) * 0.4;
            }
        }
    }
    acc = poly_mul(&acc, &[constant_tri]);
    acc = poly_mul(&acc, &[random_unitary(n, rng)]);
    poly_trim(acc)
}

/// Applies the congruence `u(sigma*)^* p(sigma) u(sigma)`.
pub fn congruence(p: &PencilSpec, u: &[CMatrix]) -> PencilSpec {
    let ustar = poly_star(u, p.weight());
    let prod = poly_mul(&poly_mul(&ustar, p.coeffs()), u);
    PencilSpec::new(p.weight(), poly_trim(prod)).expect("congruence output is a valid pencil")
}

// ---------------------------------------------------------------------------
// planted pencils
// ---------------------------------------------------------------------------

/// Scalar polynomial `(sigma - root)^power` as coefficients.
fn binomial_power(root: C64, power: usize) -> Vec<C64> {
    let mut coeffs = vec![c(1.0, 0.0)];
    for _ in 0..power {
        let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
        for (k, &a) in coeffs.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= a * root;
        }
        coeffs = next;
    }
    coeffs
}

fn scalar_poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![c(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Diagonal pencil from per-entry scalar polynomials.
fn diag_pencil(m: u32, entries: &[Vec<C64>]) -> PencilSpec {
    let n = entries.len();
    let deg = entries.iter().map(|e| e.len() - 1).max().unwrap_or(0);
    let mut coeffs = vec![CMatrix::zeros(n, n); deg + 1];
    for (i, e) in entries.iter().enumerate() {
        for (k, &v) in e.iter().enumerate() {
            coeffs[k][(i, i)] = v;
        }
    }
    PencilSpec::new(m, coeffs).expect("diagonal pencil is valid")
}

/// A random pencil with planted critical-root blocks
/// `+- (sigma - sigma0)^l`, optional strip pairs, and an invertible
/// polynomial congruence. `n <= 6`, result degree `mu <= 4`.
pub fn planted_critical_pencil(rng: &mut ChaCha8Rng) -> PlantedPencil {
    let m: u32 = *[1u32, 2, 3].choose(rng).unwrap();
    let crit_im = -(m as f64) / 2.0;
    let n_roots = rng.random_range(1..=2usize);
    let res: [f64; 2] = [rng.random::<f64>() - 2.0, rng.random::<f64>() + 1.0];

    let mut entries: Vec<Vec<C64>> = Vec::new();
    let mut critical: Vec<PlantedRoot> = Vec::new();
    let mut max_entry_deg = 1usize;
    for k in 0..n_roots {
        let sigma0 = c(res[k], crit_im);
        let n_blocks = rng.random_range(1..=2usize);
        let mut blocks = Vec::new();
        for _ in 0..n_blocks {
            let l = *[1usize, 1, 2, 2, 3, 4].choose(rng).unwrap();
            let sign: i8 = if rng.random::<bool>() { 1 } else { -1 };
            blocks.push((l, sign));
            let mut poly = binomial_power(sigma0, l);
            if sign < 0 {
                for co in &mut poly {
                    *co = -*co;
                }
            }
            max_entry_deg = max_entry_deg.max(l);
            entries.push(poly);
        }
        critical.push(PlantedRoot { sigma0, blocks });
    }

    // optionally one strip pair, degree 2
    let mut strip_roots = Vec::new();
    if entries.len() < 5 && rng.random::<f64>() < 0.5 {
        let beta = (0.15 + 0.2 * rng.random::<f64>()) * m as f64;
        let tau = c(2.5 + rng.random::<f64>(), -beta);
        let tau_star = crate::pencil::star(tau, m);
        entries.push(scalar_poly_mul(
            &binomial_power(tau, 1),
            &binomial_power(tau_star, 1),
        ));
        strip_roots.push(tau);
        max_entry_deg = max_entry_deg.max(2);
    }

    // pad with positive constants up to a random dimension <= 6
    let target_n = entries.len().max(rng.random_range(entries.len()..=6.min(entries.len() + 2)));
    while entries.len() < target_n {
        entries.push(vec![c(0.5 + rng.random::<f64>(), 0.0)]);
    }

    let diag = diag_pencil(m, &entries);
    // keep the result degree within 4: polynomial congruence only when the
    // planted entries leave room, otherwise a constant unitary
    let u_deg = if max_entry_deg <= 2 { 1 } else { 0 };
    let u = random_unimodular_poly(entries.len(), u_deg, rng);
    let pencil = congruence(&diag, &u);
    debug_assert!(pencil.degree() <= 4);

    PlantedPencil {
        pencil,
        m,
        critical,
        strip_roots,
    }
}

/// A semibounded pencil `s(sigma*)^* s(sigma)` with planted critical and
/// strip roots of `det s`. On the critical line it is a Gram matrix, hence
/// positive semidefinite.
pub fn planted_semibounded_pencil(rng: &mut ChaCha8Rng) -> PlantedPencil {
    let m: u32 = *[1u32, 2, 3].choose(rng).unwrap();
    let crit_im = -(m as f64) / 2.0;
    let n = rng.random_range(2..=4usize);

    // diagonal core of s: one critical factor, optionally one strip factor
    let sigma0 = c(2.0 * rng.random::<f64>() - 1.0, crit_im);
    let crit_mult = rng.random_range(1..=2usize);
    let mut entries: Vec<Vec<C64>> = vec![binomial_power(sigma0, crit_mult)];
    let mut strip_roots = Vec::new();
    if rng.random::<f64>() < 0.7 {
        let beta = (0.15 + 0.2 * rng.random::<f64>()) * m as f64;
        let tau = c(2.5 + rng.random::<f64>(), -beta);
        entries.push(binomial_power(tau, 1));
        strip_roots.push(tau);
    }
    while entries.len() < n {
        entries.push(vec![c(0.6 + rng.random::<f64>(), 0.0)]);
    }

    let core: PolyMatrix = {
        let deg = entries.iter().map(|e| e.len() - 1).max().unwrap();
        let mut coeffs = vec![CMatrix::zeros(n, n); deg + 1];
        for (i, e) in entries.iter().enumerate() {
            for (k, &v) in e.iter().enumerate() {
                coeffs[k][(i, i)] = v;
            }
        }
        coeffs
    };
    let v = random_unimodular_poly(n, 0, rng);
    let w = random_unimodular_poly(n, 0, rng);
    let s = poly_mul(&poly_mul(&v, &core), &w);
    let s_star = poly_star(&s, m);
    let pencil = PencilSpec::new(m, poly_trim(poly_mul(&s_star, &s)))
        .expect("Gram pencil is valid");

    // det p vanishes to order 2*crit_mult at sigma0; the squared structure
    // gives a single even block of size 2*crit_mult with positive sign
    let critical = vec![PlantedRoot {
        sigma0,
        blocks: vec![(2 * crit_mult, 1)],
    }];
    PlantedPencil {
        pencil,
        m,
        critical,
        strip_roots,
    }
}
